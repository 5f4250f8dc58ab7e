"""Comparison forecasters: ridge linear regression and seasonal-naive.

The linear model consumes the same flattened 48x39 window inputs as the
LSTM so the comparison isolates the architecture, and its 24 outputs are
normalized demand just like the LSTM head.
"""

from dataclasses import dataclass
from datetime import timedelta

import numpy as np

from .errors import DimensionMismatch, MissingHistory, SingularSystem
from .features import FEATURE_LAYOUT_VERSION, denormalize


@dataclass
class LinRegModel:
    """Per-output-hour affine map on flattened normalized inputs."""

    weights: np.ndarray    # (24, 48 * 39)
    intercept: np.ndarray  # (24,)
    ridge_lambda: float
    normalization: object
    feature_layout_version: int = FEATURE_LAYOUT_VERSION


def _flatten(samples):
    return np.stack([s.inputs.reshape(-1) for s in samples])


def fit_linreg(train_windows, normalization, ridge_lambda=1e-6):
    """Least squares via the normal equations with ridge regularization.

    The intercept column is not penalized. ridge_lambda=0 is allowed but
    raises SingularSystem when the normal equations are singular.
    """
    train_windows = list(train_windows)
    if not train_windows:
        raise SingularSystem("need at least one training sample")
    if ridge_lambda < 0:
        raise ValueError(f"ridge_lambda must be >= 0, got {ridge_lambda}")

    x = _flatten(train_windows)
    lo, hi = normalization.demand_min, normalization.demand_max
    y = np.stack([(s.target_kw - lo) / (hi - lo) for s in train_windows])

    n, f = x.shape
    a = np.hstack([x, np.ones((n, 1))])
    gram = a.T @ a
    gram[np.arange(f), np.arange(f)] += ridge_lambda
    try:
        solution = np.linalg.solve(gram, a.T @ y)
    except np.linalg.LinAlgError:
        raise SingularSystem("normal equations are singular; "
                             "use ridge_lambda > 0") from None
    return LinRegModel(np.ascontiguousarray(solution[:f].T),
                       solution[f].copy(), float(ridge_lambda), normalization)


def predict_linreg(model, sample_inputs):
    """Affine map then inverse normalization; feeds label_day like the LSTM."""
    flat = np.asarray(sample_inputs, dtype=np.float64).reshape(-1)
    if flat.shape[0] != model.weights.shape[1]:
        raise DimensionMismatch(f"input length {flat.shape[0]} != "
                                f"{model.weights.shape[1]} features")
    pred_norm = model.weights @ flat + model.intercept
    n = model.normalization
    return denormalize(pred_norm, n.demand_min, n.demand_max)


def seasonal_naive_predict(trace, target_date):
    """Previous day's 24 demands, bit-exact from the trace."""
    prev = trace.day_demands(target_date - timedelta(days=1))
    if prev is None:
        raise MissingHistory(f"trace has no full day before {target_date}")
    return prev
