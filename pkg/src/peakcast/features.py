"""Per-timestep feature encoding and 48-in / 24-out window assembly.

Feature vector layout, dimension 39 (FEATURE_LAYOUT_VERSION freezes it):

    [0]      normalized demand
    [1..24]  hour-of-day one-hot
    [25..31] day-of-week one-hot (Monday first)
    [32..35] season one-hot, order Fall, Winter, Spring, Summer
    [36]     holiday flag
    [37]     normalized temperature
    [38]     normalized humidity

Continuous channels are min-max normalized against the training split and
clamped to [0, 1] at encode time.
"""

from dataclasses import dataclass
from datetime import timedelta

import numpy as np

from .errors import DegenerateChannel, TooShort
from .trace import SEASONS

FEATURE_LAYOUT_VERSION = 1
FEATURE_DIM = 39
IDX_DEMAND = 0
HOUR_SLICE = slice(1, 25)
DOW_SLICE = slice(25, 32)
SEASON_SLICE = slice(32, 36)
IDX_HOLIDAY = 36
IDX_TEMP = 37
IDX_HUMIDITY = 38

INPUT_HOURS = 48
TARGET_HOURS = 24


@dataclass(frozen=True)
class NormalizationParams:
    """Channel extremes of the training split (never the test set)."""

    demand_min: float
    demand_max: float
    temp_min: float
    temp_max: float
    humidity_min: float
    humidity_max: float

    def __post_init__(self):
        for name in ("demand", "temp", "humidity"):
            lo = getattr(self, f"{name}_min")
            hi = getattr(self, f"{name}_max")
            if not lo < hi:
                raise DegenerateChannel(f"{name}: min {lo} must be < max {hi}")


@dataclass(frozen=True)
class WindowSample:
    """48 encoded input hours followed by one day's 24 raw target demands."""

    inputs: np.ndarray      # (48, 39)
    target_kw: np.ndarray   # (24,)
    target_date: object


def fit_normalizer(train):
    """Channel extremes of a training trace."""
    channels = {
        "demand": train.demand_kw,
        "temp": train.temp_f,
        "humidity": train.humidity_pct,
    }
    values = {}
    for name, arr in channels.items():
        lo, hi = float(arr.min()), float(arr.max())
        if lo == hi:
            raise DegenerateChannel(f"{name} channel is constant at {lo}")
        values[f"{name}_min"] = lo
        values[f"{name}_max"] = hi
    return NormalizationParams(**values)


def normalize(value, lo, hi):
    """(value - lo) / (hi - lo), clamped to [0, 1]."""
    return min(1.0, max(0.0, (value - lo) / (hi - lo)))


def denormalize(value, lo, hi):
    """Inverse of normalize without clamping."""
    return lo + value * (hi - lo)


def _season_index(record_date, calendar):
    return SEASONS.index(calendar.season_of[record_date.month])


def encode_timestep(record, calendar, params):
    """Encode one DemandRecord into the fixed 39-dim layout."""
    v = np.zeros(FEATURE_DIM)
    v[IDX_DEMAND] = normalize(record.demand_kw, params.demand_min, params.demand_max)
    v[1 + record.timestamp.hour] = 1.0
    v[25 + record.timestamp.weekday()] = 1.0
    v[32 + _season_index(record.timestamp.date(), calendar)] = 1.0
    if record.timestamp.date() in calendar.holidays:
        v[IDX_HOLIDAY] = 1.0
    v[IDX_TEMP] = normalize(record.temp_f, params.temp_min, params.temp_max)
    v[IDX_HUMIDITY] = normalize(record.humidity_pct, params.humidity_min,
                                params.humidity_max)
    return v


def encode_trace(trace, calendar, params):
    """Vectorized encode_timestep over a whole trace; same layout, (N, 39)."""
    n = len(trace)
    out = np.zeros((n, FEATURE_DIM))

    def norm(arr, lo, hi):
        return np.clip((arr - lo) / (hi - lo), 0.0, 1.0)

    out[:, IDX_DEMAND] = norm(trace.demand_kw, params.demand_min, params.demand_max)
    out[:, IDX_TEMP] = norm(trace.temp_f, params.temp_min, params.temp_max)
    out[:, IDX_HUMIDITY] = norm(trace.humidity_pct, params.humidity_min,
                                params.humidity_max)

    rows = np.arange(n)
    hours = np.array([r.timestamp.hour for r in trace.records])
    dows = np.array([r.timestamp.weekday() for r in trace.records])
    out[rows, 1 + hours] = 1.0
    out[rows, 25 + dows] = 1.0

    day_count = (n + 23) // 24 + 1
    first = trace.start.date()
    seasons = {}
    holiday = {}
    for d in range(day_count):
        day = first + timedelta(days=d)
        seasons[day] = _season_index(day, calendar)
        holiday[day] = day in calendar.holidays
    dates = [r.timestamp.date() for r in trace.records]
    out[rows, 32 + np.array([seasons[d] for d in dates])] = 1.0
    out[:, IDX_HOLIDAY] = [1.0 if holiday[d] else 0.0 for d in dates]
    return out


def build_windows(trace, calendar, params, stride=24):
    """One sample per day from day 3 onward: 48 input hours, 24 targets.

    The default stride of 24 keeps samples midnight-aligned, matching
    daily battery operation; stride < 24 is a data-augmentation mode
    where target_date is the date of the first target hour.
    """
    if trace.start.hour != 0:
        raise TooShort(f"trace must start at midnight, got {trace.start}")
    if len(trace) < INPUT_HOURS + TARGET_HOURS:
        raise TooShort(f"need at least {INPUT_HOURS + TARGET_HOURS} hours, "
                       f"got {len(trace)}")
    if not 1 <= stride <= 24:
        raise ValueError(f"stride must be in 1..24, got {stride}")

    encoded = encode_trace(trace, calendar, params)
    demand = trace.demand_kw
    samples = []
    for start in range(INPUT_HOURS, len(trace) - TARGET_HOURS + 1, stride):
        samples.append(WindowSample(
            inputs=encoded[start - INPUT_HOURS:start],
            target_kw=demand[start:start + TARGET_HOURS],
            target_date=trace.records[start].timestamp.date(),
        ))
    return samples
