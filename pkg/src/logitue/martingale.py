"""Monte-Carlo lab for early-stopping penalties of Doob martingales.

Simulates zero-conditional-mean increment paths, applies stopping rules,
and checks that the expected squared gap between the full-horizon and
stopped values equals the expected post-stop quadratic variation, plus the
small-update-energy bound penalty <= eps * E[T - tau].
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels


@dataclass
class GaussianIncrements:
    sigma: float
    name = "gaussian"

    def std_at(self, t: int) -> float:
        return self.sigma

    def sample(self, rng: np.random.Generator, n_paths: int, T: int) -> np.ndarray:
        return rng.standard_normal((n_paths, T)) * self.sigma

    def describe(self) -> str:
        return f"gaussian(sigma={self.sigma})"


@dataclass
class ShrinkingGaussianIncrements:
    """Independent gaussian increments with std sigma * decay**(t-1)."""

    sigma: float
    decay: float
    name = "shrinking_gaussian"

    def std_at(self, t: int) -> float:
        return self.sigma * self.decay ** (t - 1)

    def sample(self, rng: np.random.Generator, n_paths: int, T: int) -> np.ndarray:
        stds = np.array([self.std_at(t) for t in range(1, T + 1)])
        return rng.standard_normal((n_paths, T)) * stds

    def describe(self) -> str:
        return f"shrinking_gaussian(sigma={self.sigma},decay={self.decay})"


@dataclass
class BernoulliIncrements:
    """Symmetric +/- sigma increments (variance sigma^2)."""

    sigma: float
    name = "bernoulli_pm"

    def std_at(self, t: int) -> float:
        return self.sigma

    def sample(self, rng: np.random.Generator, n_paths: int, T: int) -> np.ndarray:
        signs = rng.integers(0, 2, size=(n_paths, T)) * 2 - 1
        return signs * self.sigma

    def describe(self) -> str:
        return f"bernoulli_pm(sigma={self.sigma})"


@dataclass
class FixedStop:
    tau0: int
    name = "fixed"

    def describe(self) -> str:
        return f"fixed(tau0={self.tau0})"


@dataclass
class PatienceStop:
    """Stop at the first step with W consecutive |increments| <= eps_thr."""

    eps_thr: float
    W: int
    name = "small_increment_patience"

    def describe(self) -> str:
        return f"patience(eps_thr={self.eps_thr},W={self.W})"


@dataclass
class PathSet:
    increments: np.ndarray  # (n_paths, T)

    @property
    def n_paths(self) -> int:
        return self.increments.shape[0]

    @property
    def T(self) -> int:
        return self.increments.shape[1]

    def cumulative(self) -> np.ndarray:
        """Path values M_0..M_T as an (n_paths, T+1) array with M_0 = 0."""
        n = self.n_paths
        out = np.zeros((n, self.T + 1))
        np.cumsum(self.increments, axis=1, out=out[:, 1:])
        return out


def simulate_paths(T: int, model, n_paths: int, seed: int) -> PathSet:
    if T < 1 or n_paths < 1:
        raise ValueError("T and n_paths must be >= 1")
    rng = np.random.default_rng(seed)
    return PathSet(increments=model.sample(rng, n_paths, T))


def apply_stopping(paths: PathSet, rule) -> np.ndarray:
    """Stopping time per path (values in 0..T; fixed rules clamp to T)."""
    if isinstance(rule, FixedStop):
        if rule.tau0 < 0:
            raise ValueError("tau0 must be >= 0")
        return np.full(paths.n_paths, min(rule.tau0, paths.T), dtype=np.int64)
    if isinstance(rule, PatienceStop):
        if rule.W < 1 or rule.eps_thr < 0:
            raise ValueError("patience rule needs W >= 1 and eps_thr >= 0")
        inc = np.ascontiguousarray(paths.increments, dtype=np.float64)
        return _kernels.patience_stop_times(inc, rule.eps_thr, rule.W)
    raise TypeError(f"unknown stopping rule {rule!r}")


def _mean_se(values: np.ndarray):
    mean = float(np.mean(values))
    if values.size > 1:
        se = float(np.std(values, ddof=1) / math.sqrt(values.size))
    else:
        se = 0.0
    return mean, se


def penalty(paths: PathSet, taus: np.ndarray):
    """Monte-Carlo mean and standard error of (M_T - M_tau)^2."""
    values = paths.cumulative()
    idx = np.arange(paths.n_paths)
    gap = values[:, paths.T] - values[idx, taus]
    return _mean_se(gap**2)


def residual_qv(paths: PathSet, taus: np.ndarray):
    """Monte-Carlo mean and standard error of the post-stop sum of squared increments."""
    sq = np.zeros((paths.n_paths, paths.T + 1))
    np.cumsum(paths.increments**2, axis=1, out=sq[:, 1:])
    idx = np.arange(paths.n_paths)
    resid = sq[:, paths.T] - sq[idx, taus]
    return _mean_se(resid)


@dataclass
class BoundReport:
    model: str
    rule: str
    T: int
    n_paths: int
    penalty: float
    penalty_se: float
    residual_qv: float
    residual_se: float
    eps: float
    mean_tail: float          # E[T - tau]
    tail_se: float
    eps_bound: float          # eps * E[T - tau]
    eps_horizon: float        # eps * T
    hypothesis_verified: bool
    passed: Optional[bool]    # None when the eps-hypothesis is unverified


def bound_report(paths: PathSet, taus: np.ndarray, eps: float, model, rule) -> BoundReport:
    """Check penalty <= eps * E[T - tau] within 3 combined standard errors.

    The conditional-variance hypothesis is established by construction
    from the model's known variance schedule over every step that can
    fall after some stopping time; rules that do not satisfy it are
    reported as unverified rather than failed.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    pen, pen_se = penalty(paths, taus)
    res, res_se = residual_qv(paths, taus)
    tail = (paths.T - taus).astype(np.float64)
    mean_tail, tail_se = _mean_se(tail)
    eps_bound = eps * mean_tail

    min_tau = int(taus.min())
    tol = 1e-12
    hypothesis = all(
        model.std_at(t) ** 2 <= eps + tol for t in range(min_tau + 1, paths.T + 1)
    )
    if hypothesis:
        slack = 3.0 * (pen_se + eps * tail_se)
        passed = pen <= eps_bound + slack
    else:
        passed = None
    return BoundReport(
        model=model.describe(),
        rule=rule.describe(),
        T=paths.T,
        n_paths=paths.n_paths,
        penalty=pen,
        penalty_se=pen_se,
        residual_qv=res,
        residual_se=res_se,
        eps=eps,
        mean_tail=mean_tail,
        tail_se=tail_se,
        eps_bound=eps_bound,
        eps_horizon=eps * paths.T,
        hypothesis_verified=hypothesis,
        passed=passed,
    )


CSV_COLUMNS = ("model", "rule", "T", "n_paths", "penalty", "penalty_se",
               "residual_qv", "residual_se", "eps_bound", "pass")


def write_reports_csv(path, reports) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in reports:
            if r.passed is None:
                status = "unverified"
            else:
                status = "pass" if r.passed else "fail"
            writer.writerow([
                r.model, r.rule, r.T, r.n_paths,
                repr(r.penalty), repr(r.penalty_se),
                repr(r.residual_qv), repr(r.residual_se),
                repr(r.eps_bound), status,
            ])


def parse_increment_model(text: str):
    """Parse CLI specs like gaussian:1.0, shrinking:1.0,0.9, bernoulli:0.5."""
    kind, _, args = text.partition(":")
    parts = [p for p in args.split(",") if p] if args else []
    try:
        if kind == "gaussian":
            return GaussianIncrements(sigma=float(parts[0]))
        if kind in ("shrinking", "shrinking_gaussian"):
            return ShrinkingGaussianIncrements(sigma=float(parts[0]), decay=float(parts[1]))
        if kind in ("bernoulli", "bernoulli_pm"):
            return BernoulliIncrements(sigma=float(parts[0]))
    except (IndexError, ValueError) as exc:
        raise ValueError(f"bad increment model spec {text!r}: {exc}") from exc
    raise ValueError(f"unknown increment model {kind!r}")


def parse_stopping_rule(text: str):
    """Parse CLI specs like fixed:10 or patience:0.1,5."""
    kind, _, args = text.partition(":")
    parts = [p for p in args.split(",") if p] if args else []
    try:
        if kind == "fixed":
            return FixedStop(tau0=int(parts[0]))
        if kind in ("patience", "small_increment_patience"):
            return PatienceStop(eps_thr=float(parts[0]), W=int(parts[1]))
    except (IndexError, ValueError) as exc:
        raise ValueError(f"bad stopping rule spec {text!r}: {exc}") from exc
    raise ValueError(f"unknown stopping rule {kind!r}")
