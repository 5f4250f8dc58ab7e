"""Supervised training: MSE on normalized targets, BPTT, Adam, grid search.

Everything is deterministic given (seed, data, config): weight init is
the caller's (seeded) responsibility, and one Generator seeded from
TrainConfig.seed drives shuffling and dropout in a fixed draw order.
"""

import math
import time
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np

from . import kernels
from .errors import (ConfigError, EmptyCandidates, EmptyDataset, LengthMismatch,
                     RangeError, ShapeMismatch)
from .metrics import mape
from .model import (GATE_ORDER, clone_model, forward, forward_batch, init_model,
                    param_arrays, predict_day)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    lr_start: float = 0.1
    lr_end: float = 0.005
    dropout_rate: float = 0.2
    grad_clip_norm: float = 5.0
    seed: int = 0
    shuffle: bool = True
    early_stop_patience: Optional[int] = None

    def validate(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 < self.lr_end <= self.lr_start:
            raise ConfigError(f"need 0 < lr_end <= lr_start, got "
                              f"{self.lr_end}..{self.lr_start}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got "
                              f"{self.dropout_rate}")
        if not self.grad_clip_norm > 0.0:
            raise ConfigError("grad_clip_norm must be > 0 (use inf to disable)")
        if self.early_stop_patience is not None and self.early_stop_patience < 1:
            raise ConfigError("early_stop_patience must be >= 1 or omitted")


_BOOLS = {"true": True, "yes": True, "1": True,
          "false": False, "no": False, "0": False}


def parse_train_config(text, base=None):
    """Parse `key = value` lines mirroring TrainConfig field names.

    Unknown keys are rejected. '#' starts a comment;
    early_stop_patience accepts 'none'.
    """
    base = base or TrainConfig()
    known = {f.name: f for f in fields(TrainConfig)}
    overrides = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            if key in ("epochs", "batch_size", "seed"):
                overrides[key] = int(value)
            elif key == "shuffle":
                overrides[key] = _BOOLS[value.lower()]
            elif key == "early_stop_patience":
                overrides[key] = None if value.lower() == "none" else int(value)
            else:
                overrides[key] = float(value)
        except (ValueError, KeyError):
            raise ConfigError(f"line {lineno}: bad value {value!r} for "
                              f"{key!r}") from None
    config = replace(base, **overrides)
    config.validate()
    return config


@dataclass
class AdamState:
    """First/second-moment accumulators mirroring the parameter arrays."""

    m: list
    v: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def init_like(cls, arrays):
        return cls([np.zeros_like(a) for a in arrays],
                   [np.zeros_like(a) for a in arrays])


@dataclass
class TrainReport:
    epoch_losses: list
    val_mapes: Optional[list]
    final_lr: float
    wall_time_s: float


# --- loss and gradients -------------------------------------------------------

def mse_loss(pred, target_norm):
    pred = np.asarray(pred, dtype=np.float64)
    target_norm = np.asarray(target_norm, dtype=np.float64)
    if pred.shape != target_norm.shape:
        raise LengthMismatch(f"pred {pred.shape} vs target {target_norm.shape}")
    diff = pred - target_norm
    return float(np.mean(diff * diff))


def _backward_batch(model, cache, targets_norm):
    """Gradients of the batch-mean MSE, in param_arrays order."""
    targets_norm = np.asarray(targets_norm, dtype=np.float64)
    if cache.prediction.shape != targets_norm.shape:
        raise ShapeMismatch(f"cache prediction {cache.prediction.shape} vs "
                            f"targets {targets_norm.shape}")
    batch, n_out = targets_norm.shape

    dy = (2.0 / (n_out * batch)) * (cache.prediction - targets_norm)
    d_head_w = dy.T @ cache.head_input
    d_head_b = dy.sum(axis=0)

    T = cache.x_seqs[0].shape[0]
    top = len(model.layers) - 1
    dh_seq = np.zeros_like(cache.h_seqs[top])
    dh_seq[T - 1] = dy @ model.head_weights

    per_layer = [None] * len(model.layers)
    for idx in range(top, -1, -1):
        layer = model.layers[idx]
        w, u, _ = layer.packed()
        dx, dw, du, db = kernels.lstm_layer_backward(
            cache.x_seqs[idx], w, u, cache.gates[idx], cache.c_seqs[idx],
            cache.tanhc_seqs[idx], cache.h_seqs[idx], dh_seq)
        h = layer.hidden_size
        grads = []
        for gi, _gate in enumerate(GATE_ORDER):
            cols = slice(gi * h, (gi + 1) * h)
            grads += [np.ascontiguousarray(dw[:, cols].T),
                      np.ascontiguousarray(du[:, cols].T), db[cols].copy()]
        per_layer[idx] = grads
        if idx > 0:
            mask = cache.masks[idx - 1]
            dh_seq = dx if mask is None else dx * mask

    flat = [g for grads in per_layer for g in grads]
    flat += [d_head_w, d_head_b]
    return flat


def backward(model, cache, target_norm):
    """Single-sample gradients of mse_loss via full BPTT."""
    target_norm = np.asarray(target_norm, dtype=np.float64)
    return _backward_batch(model, cache, target_norm[None])


# --- optimizer ------------------------------------------------------------------

def adam_step(params, grads, state, lr):
    """One bias-corrected Adam update; returns (new params, new state)."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeMismatch("params, grads and state must align")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ShapeMismatch(f"param {p.shape} vs grad {g.shape}")

    t = state.step + 1
    b1, b2, eps = state.beta1, state.beta2, state.epsilon
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        new_params.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(new_m, new_v, t, b1, b2, eps)


def lr_schedule(epoch, total_epochs, lr_start, lr_end):
    """Exponential interpolation from lr_start (epoch 0) to lr_end (last)."""
    if not 0 <= epoch < total_epochs:
        raise RangeError(f"epoch {epoch} outside [0, {total_epochs})")
    if total_epochs == 1:
        return lr_start
    return lr_start * (lr_end / lr_start) ** (epoch / (total_epochs - 1))


def global_norm(grads):
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads))


def clip_gradients(grads, max_norm):
    """Scale all gradients so the global norm is at most max_norm."""
    norm = global_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        return [g * scale for g in grads], norm
    return grads, norm


# --- training loop ----------------------------------------------------------------

def _normalize_targets(samples, normalization):
    lo, hi = normalization.demand_min, normalization.demand_max
    return np.stack([(s.target_kw - lo) / (hi - lo) for s in samples])


def _validation_mape(model, samples):
    actual = np.concatenate([s.target_kw for s in samples])
    pred = np.concatenate([predict_day(model, s.inputs) for s in samples])
    return mape(actual, pred)


def train(init, samples, config, validation=None):
    """Train a copy of `init` on window samples; returns (model, report).

    Targets are normalized with the model's own NormalizationParams. Each
    epoch: optional shuffle, mini-batch gradient averaging, global-norm
    clipping, one Adam step per batch at lr_schedule(epoch). With
    early_stop_patience set and a validation set, training stops after
    that many epochs without a validation-MAPE improvement and the best
    epoch's weights are restored.
    """
    config.validate()
    samples = list(samples)
    if not samples:
        raise EmptyDataset("need at least one training sample")

    t0 = time.perf_counter()
    model = clone_model(init)
    arrays = param_arrays(model)
    state = AdamState.init_like(arrays)
    rng = np.random.default_rng(config.seed)

    inputs = np.stack([s.inputs for s in samples])
    targets = _normalize_targets(samples, model.normalization)
    n = len(samples)

    losses = []
    val_mapes = [] if validation is not None else None
    best_mape = math.inf
    best_arrays = None
    stale = 0
    lr = config.lr_start

    for epoch in range(config.epochs):
        lr = lr_schedule(epoch, config.epochs, config.lr_start, config.lr_end)
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        loss_sum = 0.0
        for lo in range(0, n, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            pred, cache = forward_batch(model, inputs[idx], train=True,
                                        dropout_rate=config.dropout_rate, rng=rng)
            grads = _backward_batch(model, cache, targets[idx])
            grads, _ = clip_gradients(grads, config.grad_clip_norm)
            new_arrays, state = adam_step(arrays, grads, state, lr)
            for a, fresh in zip(arrays, new_arrays):
                a[...] = fresh
            loss_sum += mse_loss(pred, targets[idx]) * len(idx)
        losses.append(loss_sum / n)

        if validation is not None:
            vm = _validation_mape(model, validation)
            val_mapes.append(vm)
            if vm < best_mape:
                best_mape = vm
                stale = 0
                if config.early_stop_patience is not None:
                    best_arrays = [a.copy() for a in arrays]
            else:
                stale += 1
                if (config.early_stop_patience is not None
                        and stale >= config.early_stop_patience):
                    break

    if best_arrays is not None:
        for a, best in zip(arrays, best_arrays):
            a[...] = best

    report = TrainReport(losses, val_mapes, lr, time.perf_counter() - t0)
    return model, report


# --- verification -------------------------------------------------------------------

def grad_check(model, sample_inputs, target_norm, epsilon=1e-5):
    """Worst disagreement between BPTT and central finite differences.

    Relative error per component is |a - f| / max(|a|, |f|, floor) with
    floor = 1% of the largest gradient magnitude, so finite-difference
    round-off on negligible components cannot dominate the report.
    Returns 0.0 when both gradients are identically zero. Dropout must
    be disabled (it is: the check runs its own dropout-free forward).
    """
    sample_inputs = np.asarray(sample_inputs, dtype=np.float64)
    target_norm = np.asarray(target_norm, dtype=np.float64)

    _, cache = forward(model, sample_inputs, train=True, dropout_rate=0.0)
    analytic = backward(model, cache, target_norm)
    arrays = param_arrays(model)

    def loss_now():
        pred, _ = forward(model, sample_inputs)
        return mse_loss(pred, target_norm)

    fd = [np.zeros_like(a) for a in arrays]
    for a, out in zip(arrays, fd):
        flat_a = a.reshape(-1)
        flat_out = out.reshape(-1)
        for j in range(flat_a.size):
            orig = flat_a[j]
            flat_a[j] = orig + epsilon
            up = loss_now()
            flat_a[j] = orig - epsilon
            down = loss_now()
            flat_a[j] = orig
            flat_out[j] = (up - down) / (2.0 * epsilon)

    scale = max(max(np.max(np.abs(g)) for g in analytic),
                max(np.max(np.abs(g)) for g in fd))
    if scale == 0.0:
        return 0.0
    floor = 1e-2 * scale
    worst = 0.0
    for a, f in zip(analytic, fd):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), floor)
        worst = max(worst, float(np.max(np.abs(a - f) / denom)))
    return worst


@dataclass
class GridSearchResult:
    best_index: int
    best_model: object
    best_layer_sizes: tuple
    best_config: TrainConfig
    val_mapes: list


def grid_search(candidates, train_set, validation_set, normalization,
                input_size=39, output_size=24):
    """Train every (layer_sizes, TrainConfig) candidate, score by
    validation MAPE, return the minimizer (earliest index wins ties)."""
    candidates = list(candidates)
    if not candidates:
        raise EmptyCandidates("grid search needs at least one candidate")

    best = None
    scores = []
    for pos, (layer_sizes, config) in enumerate(candidates):
        seed_model = init_model(tuple(layer_sizes), config.seed,
                                input_size=input_size, output_size=output_size,
                                normalization=normalization)
        trained, _report = train(seed_model, train_set, config,
                                 validation=validation_set)
        score = _validation_mape(trained, validation_set)
        scores.append(score)
        if best is None or score < best[0]:
            best = (score, pos, trained)

    _, pos, trained = best
    layer_sizes, config = candidates[pos]
    return GridSearchResult(pos, trained, tuple(layer_sizes), config, scores)
