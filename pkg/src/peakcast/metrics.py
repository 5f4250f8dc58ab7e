"""Forecast evaluation: MAPE plus top-k / bottom-k capture accuracy.

Capture accuracy comes in two modes because the published definition is
ambiguous; both are computed everywhere:

    hour_level: share of true peak hours captured, pooled over days
    day_exact:  share of days whose predicted set matches exactly

hour_level is the headline number; it can never be below day_exact.
"""

from dataclasses import dataclass

import numpy as np

from .errors import CardinalityMismatch, LengthMismatch, NonPositiveActual
from .labeling import label_day

MODES = ("hour_level", "day_exact")


def mape(actual, predicted):
    """100/N * sum(|actual - predicted| / actual), in percent."""
    actual = np.asarray(actual, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    if actual.shape != predicted.shape or actual.size == 0:
        raise LengthMismatch(f"actual {actual.shape} vs predicted "
                             f"{predicted.shape}")
    if np.any(actual <= 0):
        raise NonPositiveActual("MAPE needs strictly positive actual values")
    return float(100.0 * np.mean(np.abs(actual - predicted) / actual))


def capture_accuracy(predicted_sets, true_sets, k, mode):
    """Percent of peaks captured across days, per the chosen mode."""
    predicted_sets = [frozenset(s) for s in predicted_sets]
    true_sets = [frozenset(s) for s in true_sets]
    if len(predicted_sets) != len(true_sets) or not true_sets:
        raise CardinalityMismatch(f"{len(predicted_sets)} predicted vs "
                                  f"{len(true_sets)} true days")
    for s in (*predicted_sets, *true_sets):
        if len(s) != k:
            raise CardinalityMismatch(f"set {sorted(s)} does not have k={k} hours")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")

    days = len(true_sets)
    if mode == "hour_level":
        captured = sum(len(p & t) for p, t in zip(predicted_sets, true_sets))
        return 100.0 * captured / (k * days)
    exact = sum(1 for p, t in zip(predicted_sets, true_sets) if p == t)
    return 100.0 * exact / days


@dataclass(frozen=True)
class AccuracyTable:
    """Per-k capture accuracy for one model under one mode."""

    model: str
    mode: str
    day_count: int
    top: dict      # k -> percent
    bottom: dict   # k -> percent


@dataclass(frozen=True)
class ModelEvaluation:
    model: str
    day_count: int
    mape_pct: float
    tables: dict   # mode -> AccuracyTable


def evaluate_model(predict_fn, test_windows, k_values=range(1, 6), name="model"):
    """Score a per-day predictor against actual demand.

    predict_fn maps a WindowSample to 24 predicted kW. Per day the
    prediction and the truth are labeled with label_day and compared;
    MAPE is pooled over all test hours.
    """
    test_windows = list(test_windows)
    if not test_windows:
        raise LengthMismatch("need at least one test day")
    k_values = list(k_values)

    predictions = [np.asarray(predict_fn(s), dtype=np.float64)
                   for s in test_windows]
    actuals = [s.target_kw for s in test_windows]

    overall_mape = mape(np.concatenate(actuals), np.concatenate(predictions))

    tables = {}
    for mode in MODES:
        top, bottom = {}, {}
        for k in k_values:
            pred_top, pred_bot, true_top, true_bot = [], [], [], []
            for pred, act in zip(predictions, actuals):
                pl = label_day(pred, k)
                al = label_day(act, k)
                pred_top.append(pl.top_hours)
                pred_bot.append(pl.bottom_hours)
                true_top.append(al.top_hours)
                true_bot.append(al.bottom_hours)
            top[k] = capture_accuracy(pred_top, true_top, k, mode)
            bottom[k] = capture_accuracy(pred_bot, true_bot, k, mode)
        tables[mode] = AccuracyTable(name, mode, len(test_windows), top, bottom)

    return ModelEvaluation(name, len(test_windows), overall_mape, tables)


def results_csv(evaluations, k_values=range(1, 6)):
    """Accuracy table rows, one per model and k, with both modes."""
    lines = ["model,k,top_acc_hour,top_acc_day,bottom_acc_hour,bottom_acc_day"]
    for ev in evaluations:
        hour = ev.tables["hour_level"]
        day = ev.tables["day_exact"]
        for k in k_values:
            lines.append(f"{ev.model},{k},{hour.top[k]:.4f},{day.top[k]:.4f},"
                         f"{hour.bottom[k]:.4f},{day.bottom[k]:.4f}")
    return "\n".join(lines) + "\n"
