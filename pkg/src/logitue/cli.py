"""Command-line pipeline: synthetic data, scoring, labeling, evaluation,
meta-model training/prediction, configuration sweeps, and the martingale lab.

Every subcommand resolves its options as defaults < config file < flags,
echoes the resolved configuration into the output directory, and writes a
manifest with content hashes of its outputs. All runs are deterministic
for a fixed seed.

Exit codes: 0 success, 2 input/format errors, 3 undefined-metric errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import aggregator, labeling, martingale, metaue, metrics, streams, sweep, synthetic

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_UNDEFINED_METRIC = 3


class CliError(Exception):
    def __init__(self, message, code=EXIT_INPUT_ERROR):
        super().__init__(message)
        self.code = code


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _finish_run(out_dir: Path, command: str, config: dict, outputs) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config.json", "w", encoding="utf-8") as fh:
        json.dump({"command": command, "config": config}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest = {"command": command,
                "outputs": {p.name: _sha256(p) for p in sorted(outputs)}}
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve(args, defaults: dict) -> dict:
    """defaults < config file < explicit flags."""
    resolved = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        with open(config_path, "r", encoding="utf-8") as fh:
            file_conf = json.load(fh)
        for key in defaults:
            if key in file_conf:
                resolved[key] = file_conf[key]
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    return resolved


def _parse_grid(text, cast):
    return tuple(cast(v) for v in str(text).split(",") if v)


def _read_score_map(path, field):
    """id -> (score, tau) from a scores/predictions JSONL file."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            if field not in obj or obj[field] is None:
                raise CliError(f"{path}: line {line_number} has no usable {field!r} field")
            out[str(obj["id"])] = (float(obj[field]), obj.get("tokens_consumed"))
    if not out:
        raise CliError(f"{path}: no scores found")
    return out


def _join_scores_labels(score_map, labels):
    scores, correct, taus = [], [], []
    matched = 0
    for lab in labels:
        if lab.record_id not in score_map:
            continue
        value, tau = score_map[lab.record_id]
        scores.append(value)
        correct.append(lab.correct)
        taus.append(tau)
        matched += 1
    if matched == 0:
        raise CliError("no ids shared between scores and labels")
    if matched != len(labels) or matched != len(score_map):
        raise CliError(
            f"id mismatch: {len(score_map)} scored, {len(labels)} labeled, {matched} joined"
        )
    if any(t is None for t in taus):
        taus = None
    return np.asarray(scores), np.asarray(correct, dtype=np.int64), taus


# ---------------------------------------------------------------------------
# Subcommands


def cmd_gen_synthetic(args):
    defaults = {"n": 2000, "k": 20, "t_min": 5, "t_max": 60, "separation": 2.0,
                "seed": 0, "embed_dim": 0, "split_fractions": "0.8,0.1,0.1"}
    conf = _resolve(args, defaults)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = synthetic.SyntheticSpec(
        n=int(conf["n"]), k=int(conf["k"]), t_min=int(conf["t_min"]),
        t_max=int(conf["t_max"]), separation=float(conf["separation"]),
        embed_dim=int(conf["embed_dim"]), seed=int(conf["seed"]),
    )
    records, embeddings = synthetic.generate_corpus(spec)
    fractions = _parse_grid(conf["split_fractions"], float)
    splits = dict(zip(("train", "val", "test"), synthetic.split_records(records, fractions)))
    outputs = []
    for name, split in splits.items():
        path = out_dir / f"{name}.jsonl"
        streams.write_split(path, split)
        outputs.append(path)
        if embeddings is not None:
            epath = out_dir / f"embeddings_{name}.jsonl"
            ids = [r.id for r in split]
            metaue.write_embeddings(epath, ids, np.vstack([embeddings[i] for i in ids]))
            outputs.append(epath)
    _finish_run(out_dir, "gen-synthetic", conf, outputs)
    return EXIT_OK


def cmd_score(args):
    defaults = {"scorer": "logit_magnitude", "formula": "l2", "mode": "early_stop",
                "M": 5, "W": 10, "fraction": 1.0, "norm_stats": None}
    conf = _resolve(args, defaults)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = aggregator.StoppingConfig(
        M=int(conf["M"]), W=int(conf["W"]), mode=conf["mode"],
        fraction=float(conf["fraction"]),
    )
    from .scoring import get_scorer

    scorer = get_scorer(conf["scorer"], formula=conf["formula"])
    sequences = [
        aggregator.run_stream(record, config, scorer)
        for record in streams.iter_records(args.input)
    ]
    if not sequences:
        raise CliError(f"{args.input}: no records to score")
    outputs = []
    if conf["norm_stats"]:
        with open(conf["norm_stats"], "r", encoding="utf-8") as fh:
            stats = aggregator.norm_stats_from_dict(json.load(fh))
    else:
        stats = aggregator.fit_minmax([s.raw_score for s in sequences])
        stats_path = out_dir / "norm_stats.json"
        with open(stats_path, "w", encoding="utf-8") as fh:
            json.dump(aggregator.norm_stats_to_dict(stats), fh, sort_keys=True)
            fh.write("\n")
        outputs.append(stats_path)
    for seq in sequences:
        seq.norm_score = aggregator.normalize(seq.raw_score, stats)
    scores_path = out_dir / "scores.jsonl"
    aggregator.write_scored(scores_path, sequences)
    outputs.append(scores_path)
    _finish_run(out_dir, "score", conf, outputs)
    return EXIT_OK


def cmd_label(args):
    defaults = {"threshold": 0.3, "beta": 1.0}
    conf = _resolve(args, defaults)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = [
        labeling.label(record, threshold=float(conf["threshold"]), beta=float(conf["beta"]))
        for record in streams.iter_records(args.input)
    ]
    labels_path = out_dir / "labels.jsonl"
    labeling.write_labels(labels_path, labels)
    _finish_run(out_dir, "label", conf, [labels_path])
    return EXIT_OK


def cmd_evaluate(args):
    defaults = {"score_field": "raw_score", "B": 1000, "seed": 0}
    conf = _resolve(args, defaults)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    field = conf["score_field"]
    test_scores, test_correct, taus = _join_scores_labels(
        _read_score_map(args.scores, field), labeling.read_labels(args.labels)
    )
    val_scores, val_correct, _ = _join_scores_labels(
        _read_score_map(args.val_scores, field), labeling.read_labels(args.val_labels)
    )
    report = metrics.evaluate(test_scores, test_correct, val_scores, val_correct,
                              taus=taus, B=int(conf["B"]), seed=int(conf["seed"]))
    report_path = out_dir / "report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    _finish_run(out_dir, "evaluate", conf, [report_path])
    return EXIT_OK


def _correct_array_for(ids, labels):
    by_id = {lab.record_id: lab.correct for lab in labels}
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise CliError(f"{len(missing)} embedding ids have no label (first: {missing[0]!r})")
    return np.array([by_id[i] for i in ids], dtype=np.int64)


def cmd_train_metaue(args):
    defaults = {"target_field": "norm_score", "seeds": "0", "max_epochs": 100,
                "lr_grid": "3e-3,1e-3,3e-4", "batch_grid": "64,128,256",
                "dropout": 0.1, "hidden_dim": 256, "weight_decay": 0.01}
    conf = _resolve(args, defaults)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    train_ids, train_X = metaue.read_embeddings(args.train_embeddings)
    target_map = _read_score_map(args.pseudo_labels, conf["target_field"])
    missing = [i for i in train_ids if i not in target_map]
    if missing:
        raise CliError(f"{len(missing)} training ids lack pseudo-labels (first: {missing[0]!r})")
    train_y = np.array([target_map[i][0] for i in train_ids])

    val_ids, val_X = metaue.read_embeddings(args.val_embeddings)
    val_correct = _correct_array_for(val_ids, labeling.read_labels(args.val_labels))

    seeds = _parse_grid(conf["seeds"], int)
    cfg = metaue.TrainConfig(
        lr_grid=_parse_grid(conf["lr_grid"], float),
        batch_grid=_parse_grid(conf["batch_grid"], int),
        max_epochs=int(conf["max_epochs"]),
        dropout_rate=float(conf["dropout"]),
        weight_decay=float(conf["weight_decay"]),
        hidden_dim=int(conf["hidden_dim"]),
        seeds=seeds,
    )
    # One grid search (first seed); the winning cell is reused for every seed.
    grid = metaue.grid_search(train_X, train_y, val_X, val_correct, cfg, seeds[0])
    outputs = []
    history_path = out_dir / "history.jsonl"
    per_seed = []
    with open(history_path, "w", encoding="utf-8") as hist_fh:
        for cell in grid.cells:
            for row in cell.get("history", []):
                hist_fh.write(json.dumps({"phase": "grid", "seed": seeds[0],
                                          "lr": cell["lr"], "batch_size": cell["batch_size"],
                                          **row}))
                hist_fh.write("\n")
        for seed in seeds:
            if seed == seeds[0]:
                params, history = grid.params, None
                val_auroc = grid.val_auroc
            else:
                params, history = metaue.train(train_X, train_y, val_X, val_correct,
                                               grid.lr, grid.batch_size, cfg, seed)
                val_auroc = max(row["val_auroc"] for row in history)
                for row in history:
                    hist_fh.write(json.dumps({"phase": "seed", "seed": seed,
                                              "lr": grid.lr, "batch_size": grid.batch_size,
                                              **row}))
                    hist_fh.write("\n")
            ckpt_path = out_dir / f"checkpoint_seed{seed}.json"
            metaue.save_checkpoint(ckpt_path, params, meta={
                "seed": seed, "lr": grid.lr, "batch_size": grid.batch_size,
                "hidden_dim": cfg.hidden_dim, "dropout_rate": cfg.dropout_rate,
                "val_auroc": val_auroc,
            })
            outputs.append(ckpt_path)
            per_seed.append({"seed": seed, "val_auroc": val_auroc})
    outputs.append(history_path)

    aurocs = [row["val_auroc"] for row in per_seed]
    summary = {
        "best_lr": grid.lr,
        "best_batch_size": grid.batch_size,
        "per_seed": per_seed,
        "val_auroc_mean": float(np.mean(aurocs)),
        "val_auroc_std_across_seeds": float(np.std(aurocs)),
    }
    summary_path = out_dir / "summary.json"
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    outputs.append(summary_path)
    _finish_run(out_dir, "train-metaue", conf, outputs)
    return EXIT_OK


def cmd_predict_metaue(args):
    conf = _resolve(args, {})
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    params, _meta = metaue.load_checkpoint(args.checkpoint)
    ids, X = metaue.read_embeddings(args.embeddings)
    if X.shape[1] != params.input_dim:
        raise CliError(
            f"embedding dim {X.shape[1]} does not match checkpoint dim {params.input_dim}"
        )
    raw, clamped = metaue.predict(params, X)
    pred_path = out_dir / "predictions.jsonl"
    with open(pred_path, "w", encoding="utf-8") as fh:
        for rid, r, c in zip(ids, raw, clamped):
            fh.write(json.dumps({"id": rid, "score_raw": float(r), "score_clamped": float(c)}))
            fh.write("\n")
    _finish_run(out_dir, "predict-metaue", conf, [pred_path])
    return EXIT_OK


def _sweep_inputs(args, conf):
    records = streams.read_split(args.input)
    labels = labeling.read_labels(args.labels)
    correct_by_id = {lab.record_id: lab.correct for lab in labels}
    spec = sweep.SweepSpec(
        m_grid=_parse_grid(conf["m_grid"], int),
        w_grid=_parse_grid(conf["w_grid"], int),
        fraction_grid=_parse_grid(conf["fraction_grid"], float),
    )
    return records, correct_by_id, spec


_SWEEP_DEFAULTS = {
    "m_grid": "1,3,5,10,20,50,100",
    "w_grid": "1,3,5,10,20,50,100",
    "fraction_grid": "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0",
    "scorer": "logit_magnitude",
}


def cmd_sweep(args):
    conf = _resolve(args, _SWEEP_DEFAULTS)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records, correct_by_id, spec = _sweep_inputs(args, conf)
    cells = sweep.run_mw_sweep(records, correct_by_id, spec, scorer=conf["scorer"])
    csv_path = out_dir / "mw_sweep.csv"
    sweep.write_mw_csv(csv_path, cells)
    _finish_run(out_dir, "sweep", conf, [csv_path])
    return EXIT_OK


def cmd_fraction_sweep(args):
    conf = _resolve(args, _SWEEP_DEFAULTS)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records, correct_by_id, spec = _sweep_inputs(args, conf)
    cells = sweep.run_fraction_sweep(records, correct_by_id, spec, scorer=conf["scorer"])
    csv_path = out_dir / "fraction_sweep.csv"
    sweep.write_fraction_csv(csv_path, cells)
    _finish_run(out_dir, "fraction-sweep", conf, [csv_path])
    return EXIT_OK


def cmd_simulate(args):
    defaults = {"T": 100, "n_paths": 100_000, "eps": 0.01, "seed": 0}
    conf = _resolve(args, defaults)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    models = [martingale.parse_increment_model(m) for m in (args.model or ["gaussian:1.0"])]
    rules = [martingale.parse_stopping_rule(r) for r in (args.rule or [f"fixed:{int(conf['T'])}"])]
    conf["models"] = [m.describe() for m in models]
    conf["rules"] = [r.describe() for r in rules]
    reports = []
    for model in models:
        paths = martingale.simulate_paths(int(conf["T"]), model, int(conf["n_paths"]),
                                          int(conf["seed"]))
        for rule in rules:
            taus = martingale.apply_stopping(paths, rule)
            reports.append(martingale.bound_report(paths, taus, float(conf["eps"]),
                                                   model, rule))
    csv_path = out_dir / "simulate.csv"
    martingale.write_reports_csv(csv_path, reports)
    _finish_run(out_dir, "simulate", conf, [csv_path])
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logitue",
        description="Generation-efficient uncertainty estimation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--output-dir", required=True)
        p.add_argument("--config", help="JSON config file (flat flag-name keys)")

    p = sub.add_parser("gen-synthetic", help="generate a seeded synthetic corpus")
    common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--t-min", dest="t_min", type=int)
    p.add_argument("--t-max", dest="t_max", type=int)
    p.add_argument("--separation", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--embed-dim", dest="embed_dim", type=int)
    p.add_argument("--split-fractions", dest="split_fractions")
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("score", help="score a logit-stream file")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--scorer", choices=["logit_magnitude", "entropy", "self_certainty"])
    p.add_argument("--formula", choices=["l2", "relu_sum"])
    p.add_argument("--mode", choices=["early_stop", "full_generation", "fixed_fraction"])
    p.add_argument("--M", type=int)
    p.add_argument("--W", type=int)
    p.add_argument("--fraction", type=float)
    p.add_argument("--norm-stats", dest="norm_stats")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("label", help="ROUGE-L correctness labels")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--threshold", type=float)
    p.add_argument("--beta", type=float)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("evaluate", help="metrics report from scores and labels")
    common(p)
    p.add_argument("--scores", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--val-scores", dest="val_scores", required=True)
    p.add_argument("--val-labels", dest="val_labels", required=True)
    p.add_argument("--score-field", dest="score_field")
    p.add_argument("--B", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("train-metaue", help="distill scores into the input-only head")
    common(p)
    p.add_argument("--train-embeddings", dest="train_embeddings", required=True)
    p.add_argument("--pseudo-labels", dest="pseudo_labels", required=True)
    p.add_argument("--target-field", dest="target_field")
    p.add_argument("--val-embeddings", dest="val_embeddings", required=True)
    p.add_argument("--val-labels", dest="val_labels", required=True)
    p.add_argument("--seeds")
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.add_argument("--lr-grid", dest="lr_grid")
    p.add_argument("--batch-grid", dest="batch_grid")
    p.add_argument("--dropout", type=float)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.set_defaults(func=cmd_train_metaue)

    p = sub.add_parser("predict-metaue", help="apply a checkpoint to embeddings")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--embeddings", required=True)
    p.set_defaults(func=cmd_predict_metaue)

    for name, func in (("sweep", cmd_sweep), ("fraction-sweep", cmd_fraction_sweep)):
        p = sub.add_parser(name, help=f"run the {name.replace('-', ' ')}")
        common(p)
        p.add_argument("--input", required=True)
        p.add_argument("--labels", required=True)
        p.add_argument("--m-grid", dest="m_grid")
        p.add_argument("--w-grid", dest="w_grid")
        p.add_argument("--fraction-grid", dest="fraction_grid")
        p.add_argument("--scorer")
        p.set_defaults(func=func)

    p = sub.add_parser("simulate", help="martingale stopping-penalty lab")
    common(p)
    p.add_argument("--T", type=int)
    p.add_argument("--n-paths", dest="n_paths", type=int)
    p.add_argument("--model", action="append")
    p.add_argument("--rule", action="append")
    p.add_argument("--eps", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except metrics.UndefinedMetricError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNDEFINED_METRIC
    except (streams.StreamFormatError, labeling.MissingReferenceError,
            FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
