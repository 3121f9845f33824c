"""Hot numeric kernels with an optional numba backend.

Every kernel is written in njit-compatible Python. When numba is available
and not disabled via the ``LOGITUE_NUMBA`` environment variable (set to
``0``/``false``/``off`` to disable), the functions are compiled with
``@njit``; otherwise the same source runs as plain Python/numpy. The
benchmark in benchmarks/bench_kernels.py compares both paths.
"""

import os

import numpy as np


def _numba_requested() -> bool:
    flag = os.environ.get("LOGITUE_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "off", "no")


NUMBA_ENABLED = False
if _numba_requested():
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        pass

if not NUMBA_ENABLED:

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


# Stream modes.
MODE_EARLY_STOP = 0
MODE_FULL = 1
MODE_FRACTION = 2

# Stop reasons.
STOP_EOS = 0
STOP_PATIENCE = 1
STOP_FRACTION = 2
STOP_END_OF_STREAM = 3


@njit(cache=True)
def topm_stream(scores, M, W, mode, fraction, last_is_eos):
    """Run the top-M patience loop over a precomputed token-score array.

    Returns (tau, raw_score, stop_reason). The entry rule is strict
    (a new score must exceed the current minimum) and among equal minima
    the oldest entry is evicted. raw_score is the sequential-sum mean of
    the surviving entries in step order, so the pure-Python tracker and
    this kernel produce bit-identical values.
    """
    T = scores.shape[0]
    entry_steps = np.empty(M, np.int64)
    entry_scores = np.empty(M, np.float64)
    count = 0
    patience = 0

    if mode == MODE_FRACTION:
        limit = int(np.ceil(fraction * T))
        if limit < 1:
            limit = 1
        if limit > T:
            limit = T
    else:
        limit = T

    tau = limit
    reason = STOP_END_OF_STREAM
    stopped = False
    for t in range(1, limit + 1):
        s = scores[t - 1]
        if count < M:
            entry_steps[count] = t
            entry_scores[count] = s
            count += 1
            patience = 0
        else:
            mi = 0
            for j in range(1, M):
                if entry_scores[j] < entry_scores[mi] or (
                    entry_scores[j] == entry_scores[mi]
                    and entry_steps[j] < entry_steps[mi]
                ):
                    mi = j
            if s > entry_scores[mi]:
                entry_steps[mi] = t
                entry_scores[mi] = s
                patience = 0
            else:
                patience += 1

        if last_is_eos and t == T:
            tau = t
            reason = STOP_EOS
            stopped = True
            break
        if mode == MODE_EARLY_STOP and count == M and patience >= W:
            tau = t
            reason = STOP_PATIENCE
            stopped = True
            break

    if not stopped:
        tau = limit
        if mode == MODE_FRACTION and limit < T:
            reason = STOP_FRACTION
        else:
            reason = STOP_END_OF_STREAM

    # Mean over surviving entries in step order (selection sort; M is small).
    for i in range(count):
        mn = i
        for j in range(i + 1, count):
            if entry_steps[j] < entry_steps[mn]:
                mn = j
        if mn != i:
            ts = entry_steps[i]
            entry_steps[i] = entry_steps[mn]
            entry_steps[mn] = ts
            sc = entry_scores[i]
            entry_scores[i] = entry_scores[mn]
            entry_scores[mn] = sc
    acc = 0.0
    for i in range(count):
        acc += entry_scores[i]
    raw = acc / count
    return tau, raw, reason


@njit(cache=True)
def lcs_length_ids(a, b):
    """Longest-common-subsequence length over two int64 id arrays."""
    n = a.shape[0]
    m = b.shape[0]
    prev = np.zeros(m + 1, np.int64)
    curr = np.zeros(m + 1, np.int64)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if a[i - 1] == b[j - 1]:
                curr[j] = prev[j - 1] + 1
            elif prev[j] >= curr[j - 1]:
                curr[j] = prev[j]
            else:
                curr[j] = curr[j - 1]
        tmp = prev
        prev = curr
        curr = tmp
    return prev[m]


@njit(cache=True)
def patience_stop_times(increments, eps_thr, W):
    """Stopping time per path: first t with W consecutive |increments| <= eps_thr.

    Paths that never satisfy the rule stop at T.
    """
    n, T = increments.shape
    taus = np.empty(n, np.int64)
    for p in range(n):
        run = 0
        tau = T
        for t in range(T):
            if abs(increments[p, t]) <= eps_thr:
                run += 1
                if run >= W:
                    tau = t + 1
                    break
            else:
                run = 0
        taus[p] = tau
    return taus
