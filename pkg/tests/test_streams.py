import json

import pytest

from logitue.streams import (GenerationRecord, StreamFormatError, TokenStep,
                             parse_record, read_split, record_to_line, write_split)


def minimal_line(**overrides):
    obj = {
        "id": "a",
        "prompt": "q",
        "answer_text": "ans",
        "steps": [
            {"token_id": 1, "token_text": "x", "topk_logits": [0.0, 0.0],
             "topk_token_ids": [1, 2], "is_eos": False}
        ],
    }
    obj.update(overrides)
    return json.dumps(obj)


def test_minimal_record_round_trip():
    record = parse_record(minimal_line())
    assert record.num_steps == 1
    assert record.steps[0].topk_logits == [0.0, 0.0]
    again = parse_record(record_to_line(record))
    assert again == record


def test_topk_length_mismatch():
    line = minimal_line(steps=[{"token_id": 1, "token_text": "x",
                                "topk_logits": [1.0, 2.0, 3.0],
                                "topk_token_ids": [1, 2]}])
    with pytest.raises(StreamFormatError, match="3 entries"):
        parse_record(line)


def test_non_finite_logit_rejected():
    line = minimal_line().replace("0.0, 0.0", "NaN, 0.0")
    with pytest.raises(StreamFormatError, match="non-finite"):
        parse_record(line)


def test_malformed_json_reports_line_number():
    with pytest.raises(StreamFormatError, match="line 7"):
        parse_record("{not json", line_number=7)


@pytest.mark.parametrize("missing", ["id", "prompt", "answer_text", "steps"])
def test_missing_required_field(missing):
    obj = json.loads(minimal_line())
    del obj[missing]
    with pytest.raises(StreamFormatError, match="missing required field"):
        parse_record(json.dumps(obj))


def test_empty_steps_rejected():
    with pytest.raises(StreamFormatError, match="non-empty"):
        parse_record(minimal_line(steps=[]))


def test_eos_only_on_final_step():
    steps = [
        {"token_id": 1, "token_text": "x", "topk_logits": [0.0],
         "topk_token_ids": [1], "is_eos": True},
        {"token_id": 2, "token_text": "y", "topk_logits": [0.0],
         "topk_token_ids": [2], "is_eos": False},
    ]
    with pytest.raises(StreamFormatError, match="non-final"):
        parse_record(minimal_line(steps=steps))


def test_logits_preserved_in_file_order():
    # Ingestion must not reorder or transform the arrays.
    steps = [{"token_id": 1, "token_text": "x", "topk_logits": [3.5, -1.25, 2.0],
              "topk_token_ids": [9, 4, 7]}]
    record = parse_record(minimal_line(steps=steps))
    assert record.steps[0].topk_logits == [3.5, -1.25, 2.0]
    assert record.steps[0].topk_token_ids == [9, 4, 7]


def test_read_split_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert read_split(path) == []


def test_read_split_order_and_count(tmp_path):
    records = [
        GenerationRecord(id=f"r{i}", prompt="p", answer_text="a",
                         steps=[TokenStep(0, "t", [0.5], [0])])
        for i in range(5)
    ]
    path = tmp_path / "split.jsonl"
    write_split(path, records)
    loaded = read_split(path)
    assert [r.id for r in loaded] == [f"r{i}" for i in range(5)]
    assert loaded == records


def test_duplicate_id_detected(tmp_path):
    path = tmp_path / "dup.jsonl"
    path.write_text(minimal_line() + "\n" + minimal_line() + "\n")
    with pytest.raises(StreamFormatError, match="duplicate id"):
        read_split(path)


def test_reference_optional_round_trip():
    record = parse_record(minimal_line(reference="gold"))
    assert record.reference == "gold"
    assert parse_record(minimal_line()).reference is None
