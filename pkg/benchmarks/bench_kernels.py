"""Benchmark the hot kernels with the compiled path against the pure-numpy
fallback.

The implementation is chosen at import time from the LOGITUE_NUMBA
environment variable, so this script re-executes itself in a subprocess per
configuration and prints a small comparison table.

Usage: python3 benchmarks/bench_kernels.py
"""

import json
import os
import subprocess
import sys
import time


def run_benchmarks():
    import numpy as np

    from logitue import _kernels

    rng = np.random.default_rng(0)
    results = {"numba": bool(_kernels.NUMBA_ENABLED)}

    # Streaming top-M scan over many paths.
    n_streams, T = 2000, 500
    scores = rng.normal(size=(n_streams, T))
    # warm-up triggers JIT compilation outside the timed region
    _kernels.topm_stream(scores[0], 5, 10, _kernels.MODE_EARLY_STOP, 1.0, False)
    start = time.perf_counter()
    for row in scores:
        _kernels.topm_stream(row, 5, 10, _kernels.MODE_EARLY_STOP, 1.0, False)
    results["topm_stream_s"] = time.perf_counter() - start

    # LCS dynamic program on token-id sequences.
    pairs = [(rng.integers(0, 50, size=300).astype(np.int64),
              rng.integers(0, 50, size=300).astype(np.int64))
             for _ in range(50)]
    _kernels.lcs_length_ids(*pairs[0])
    start = time.perf_counter()
    for a, b in pairs:
        _kernels.lcs_length_ids(a, b)
    results["lcs_s"] = time.perf_counter() - start

    # Patience stopping-time scan over a large path matrix.
    inc = rng.normal(size=(1000, 500))
    _kernels.patience_stop_times(inc[:1], 0.5, 3)
    start = time.perf_counter()
    _kernels.patience_stop_times(inc, 0.5, 3)
    results["patience_scan_s"] = time.perf_counter() - start

    print(json.dumps(results))


def main():
    if os.environ.get("_BENCH_CHILD"):
        run_benchmarks()
        return

    rows = {}
    for label, flag in (("numba", "1"), ("fallback", "0")):
        env = dict(os.environ, LOGITUE_NUMBA=flag, _BENCH_CHILD="1")
        out = subprocess.run([sys.executable, __file__], env=env,
                             capture_output=True, text=True, check=True)
        rows[label] = json.loads(out.stdout.strip().splitlines()[-1])

    if rows["numba"]["numba"] is not True:
        print("warning: numba unavailable; both columns use the fallback")

    print(f"{'kernel':<20}{'numba (s)':>12}{'fallback (s)':>14}{'speedup':>10}")
    for key, name in (("topm_stream_s", "topm_stream"),
                      ("lcs_s", "lcs_length_ids"),
                      ("patience_scan_s", "patience_scan")):
        fast, slow = rows["numba"][key], rows["fallback"][key]
        print(f"{name:<20}{fast:>12.4f}{slow:>14.4f}{slow / fast:>9.1f}x")


if __name__ == "__main__":
    main()
