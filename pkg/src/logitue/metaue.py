"""Input-only uncertainty predictor: a two-layer SiLU MLP head over frozen
prompt embeddings, trained with AdamW (linear warmup + cosine decay) against
distilled sequence-uncertainty targets, with grid search and AUROC-based
early stopping.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .metrics import auroc

_PARAM_FIELDS = ("W1", "b1", "W2", "b2")

CHECKPOINT_VERSION = 1


@dataclass
class MLPParams:
    W1: np.ndarray  # (d, H)
    b1: np.ndarray  # (H,)
    W2: np.ndarray  # (H, 1)
    b2: np.ndarray  # (1,)

    def copy(self) -> "MLPParams":
        return MLPParams(self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy())

    @property
    def input_dim(self) -> int:
        return self.W1.shape[0]


@dataclass
class TrainConfig:
    lr_grid: Tuple[float, ...] = (3e-3, 1e-3, 3e-4)
    batch_grid: Tuple[int, ...] = (64, 128, 256)
    max_epochs: int = 100
    warmup_fraction: float = 0.10
    early_stop_patience_fraction: float = 0.10
    dropout_rate: float = 0.1
    weight_decay: float = 0.01
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    hidden_dim: int = 256
    seeds: Tuple[int, ...] = (0, 1, 2, 3, 4)


def init_params(d: int, hidden_dim: int, rng: np.random.Generator) -> MLPParams:
    # He-style init for the SiLU layer; the output head starts at zero so
    # the network begins as the constant-zero function and the head learns
    # only the residual structure on top of it.
    w1 = rng.normal(0.0, math.sqrt(2.0 / d), size=(d, hidden_dim))
    b1 = np.zeros(hidden_dim)
    w2 = np.zeros((hidden_dim, 1))
    b2 = np.zeros(1)
    return MLPParams(w1, b1, w2, b2)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward(params: MLPParams, x, dropout_rate: float = 0.0,
            training: bool = False, rng: Optional[np.random.Generator] = None):
    """Eval/train forward pass. Accepts a single vector or an (n, d) batch.

    Hidden layer is SiLU; dropout is inverted dropout on the hidden
    activations; the output head is linear.
    """
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] != params.input_dim:
        raise ValueError(f"input dim {X.shape[1]} does not match params dim {params.input_dim}")
    z1 = X @ params.W1 + params.b1
    h = z1 * _sigmoid(z1)
    if training and dropout_rate > 0.0:
        if rng is None:
            raise ValueError("training-mode dropout requires an rng")
        mask = (rng.random(h.shape) >= dropout_rate) / (1.0 - dropout_rate)
        h = h * mask
    out = (h @ params.W2 + params.b2).ravel()
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite activations in forward pass")
    return float(out[0]) if single else out


def mse_loss(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape or p.size == 0:
        raise ValueError("predictions and targets must be equal-length and non-empty")
    return float(np.mean((p - t) ** 2))


def loss_and_grads(params: MLPParams, X, y, dropout_rate: float = 0.0,
                   rng: Optional[np.random.Generator] = None):
    """MSE loss and exact analytic gradients through linear-SiLU-dropout-linear."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise ValueError("batch must be non-empty with matching lengths")
    n = X.shape[0]
    z1 = X @ params.W1 + params.b1
    sig = _sigmoid(z1)
    h = z1 * sig
    if dropout_rate > 0.0:
        if rng is None:
            raise ValueError("dropout requires an rng")
        mask = (rng.random(h.shape) >= dropout_rate) / (1.0 - dropout_rate)
        hd = h * mask
    else:
        mask = None
        hd = h
    pred = (hd @ params.W2 + params.b2).ravel()
    err = pred - y
    loss = float(np.mean(err**2))

    g_pred = (2.0 / n) * err[:, None]
    gW2 = hd.T @ g_pred
    gb2 = g_pred.sum(axis=0)
    g_hd = g_pred @ params.W2.T
    g_h = g_hd * mask if mask is not None else g_hd
    dsilu = sig * (1.0 + z1 * (1.0 - sig))
    g_z1 = g_h * dsilu
    gW1 = X.T @ g_z1
    gb1 = g_z1.sum(axis=0)
    grads = MLPParams(gW1, gb1, gW2, gb2)
    for name in _PARAM_FIELDS:
        if not np.all(np.isfinite(getattr(grads, name))):
            raise FloatingPointError(f"non-finite gradient in {name}")
    return loss, grads


def lr_schedule(step: int, total_steps: int, peak_lr: float,
                warmup_fraction: float = 0.10) -> float:
    """Linear warmup to peak_lr then cosine decay to zero."""
    if total_steps <= 0:
        raise ValueError("total_steps must be positive")
    warmup_steps = round(warmup_fraction * total_steps)
    if warmup_steps > 0 and step < warmup_steps:
        return peak_lr * step / warmup_steps
    decay_steps = total_steps - warmup_steps
    if decay_steps <= 0:
        return peak_lr
    progress = (step - warmup_steps) / decay_steps
    return peak_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


@dataclass
class AdamState:
    m: MLPParams
    v: MLPParams

    @staticmethod
    def zeros_like(params: MLPParams) -> "AdamState":
        zero = lambda: MLPParams(*(np.zeros_like(getattr(params, f)) for f in _PARAM_FIELDS))
        return AdamState(m=zero(), v=zero())


def adamw_step(params: MLPParams, grads: MLPParams, state: AdamState, step_index: int,
               lr: float, betas=(0.9, 0.999), eps: float = 1e-8,
               weight_decay: float = 0.0) -> None:
    """In-place decoupled-weight-decay Adam update (step_index starts at 1)."""
    b1, b2 = betas
    for name in _PARAM_FIELDS:
        p = getattr(params, name)
        g = getattr(grads, name)
        m = getattr(state.m, name)
        v = getattr(state.v, name)
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**step_index)
        v_hat = v / (1.0 - b2**step_index)
        if weight_decay:
            p *= 1.0 - lr * weight_decay
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)
        if not np.all(np.isfinite(p)):
            raise FloatingPointError(f"non-finite parameter update in {name}")


def train(train_X, train_y, val_X, val_correct, lr: float, batch_size: int,
          cfg: TrainConfig, seed: int, select: str = "best") -> Tuple[MLPParams, List[dict]]:
    """One training run: shuffled mini-batches, AdamW with warmup/cosine,
    validation-AUROC early stopping.

    Early-stop rule: stop at an epoch boundary once the best validation
    AUROC has not strictly improved within the last
    ceil(patience_fraction * total_steps) optimizer steps.

    select="best" returns the max-validation-AUROC checkpoint (AUROC ties
    resolved toward the later, lower-loss epoch); select="final" returns
    the last epoch's parameters, which is what a convergence check wants.
    """
    if select not in ("best", "final"):
        raise ValueError(f"unknown checkpoint selection {select!r}")
    train_X = np.asarray(train_X, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.float64)
    val_X = np.asarray(val_X, dtype=np.float64)
    val_correct = np.asarray(val_correct, dtype=np.int64)
    n = train_X.shape[0]
    if n == 0:
        raise ValueError("empty training set")

    init_rng = np.random.default_rng([seed, 0])
    run_rng = np.random.default_rng([seed, 1])
    params = init_params(train_X.shape[1], cfg.hidden_dim, init_rng)
    state = AdamState.zeros_like(params)

    batches_per_epoch = math.ceil(n / batch_size)
    total_steps = cfg.max_epochs * batches_per_epoch
    patience_steps = math.ceil(cfg.early_stop_patience_fraction * total_steps)

    best_params = params.copy()
    best_auroc = -math.inf
    best_step = 0
    history = []
    step = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = run_rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            loss, grads = loss_and_grads(
                params, train_X[idx], train_y[idx],
                dropout_rate=cfg.dropout_rate, rng=run_rng,
            )
            current_lr = lr_schedule(step, total_steps, lr, cfg.warmup_fraction)
            step += 1
            adamw_step(params, grads, state, step, current_lr,
                       betas=cfg.betas, eps=cfg.eps, weight_decay=cfg.weight_decay)
            epoch_loss += loss * idx.size
        epoch_loss /= n

        val_pred = forward(params, val_X)
        val_auroc = auroc(val_pred, val_correct)
        history.append({
            "epoch": epoch,
            "step": step,
            "train_loss": epoch_loss,
            "val_auroc": val_auroc,
        })
        if val_auroc >= best_auroc:
            if val_auroc > best_auroc:
                best_step = step
            best_auroc = val_auroc
            best_params = params.copy()
        if step - best_step >= patience_steps:
            break
    return (best_params if select == "best" else params), history


@dataclass
class GridResult:
    lr: float
    batch_size: int
    params: MLPParams
    val_auroc: float
    cells: List[dict] = field(default_factory=list)


def grid_search(train_X, train_y, val_X, val_correct, cfg: TrainConfig,
                seed: int) -> GridResult:
    """Train every (lr, batch) cell, keep the max-validation-AUROC model.

    Ties break toward smaller lr then smaller batch; failing cells are
    recorded and skipped rather than aborting the search.
    """
    best = None
    cells = []
    for lr in sorted(cfg.lr_grid):
        for batch_size in sorted(cfg.batch_grid):
            try:
                params, history = train(train_X, train_y, val_X, val_correct,
                                        lr, batch_size, cfg, seed)
                val_auroc = max(row["val_auroc"] for row in history)
                cells.append({"lr": lr, "batch_size": batch_size,
                              "val_auroc": val_auroc, "epochs": len(history),
                              "history": history})
                if best is None or val_auroc > best.val_auroc:
                    best = GridResult(lr=lr, batch_size=batch_size,
                                      params=params, val_auroc=val_auroc)
            except (FloatingPointError, ValueError) as exc:
                cells.append({"lr": lr, "batch_size": batch_size, "error": str(exc)})
    if best is None:
        raise RuntimeError("every grid cell failed to train")
    best.cells = cells
    return best


def predict(params: MLPParams, X):
    """Deterministic eval-mode predictions: (raw, clamped-to-[0,1]) arrays."""
    raw = forward(params, X)
    raw = np.atleast_1d(np.asarray(raw, dtype=np.float64))
    return raw, np.clip(raw, 0.0, 1.0)


def read_embeddings(path):
    """Load an embeddings JSONL file into (ids, (n, d) float64 matrix)."""
    ids = []
    vectors = []
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            vec = np.asarray(obj["vector"], dtype=np.float64)
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"non-finite embedding at line {line_number}")
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise ValueError(
                    f"embedding dimension drift at line {line_number}: {vec.size} != {dim}"
                )
            ids.append(str(obj["id"]))
            vectors.append(vec)
    if not ids:
        raise ValueError(f"no embeddings found in {path}")
    return ids, np.vstack(vectors)


def write_embeddings(path, ids, X) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rid, vec in zip(ids, np.asarray(X, dtype=np.float64)):
            fh.write(json.dumps({"id": rid, "vector": [float(v) for v in vec]}))
            fh.write("\n")


def save_checkpoint(path, params: MLPParams, meta: Optional[dict] = None) -> None:
    obj = {
        "version": CHECKPOINT_VERSION,
        "shapes": {f: list(getattr(params, f).shape) for f in _PARAM_FIELDS},
        "params": {f: getattr(params, f).ravel().tolist() for f in _PARAM_FIELDS},
        "meta": meta or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh)
        fh.write("\n")


def load_checkpoint(path) -> Tuple[MLPParams, dict]:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if obj.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {obj.get('version')!r}")
    arrays = {}
    for name in _PARAM_FIELDS:
        shape = tuple(obj["shapes"][name])
        arrays[name] = np.asarray(obj["params"][name], dtype=np.float64).reshape(shape)
    return MLPParams(**arrays), obj.get("meta", {})
