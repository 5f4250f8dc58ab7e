"""Hourly demand traces: CSV ingestion, synthetic generation, splitting.

Traces are strict 1-hour grids. CSV schema:

    timestamp,demand_kw,temp_f,humidity_pct
    2022-01-03T00:00,14231.5,28.4,61.2

Timestamps are ISO local time without DST shifts; missing hours are
rejected rather than imputed.
"""

import configparser
import csv
import io
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta

import numpy as np
from scipy.signal import lfilter

from .errors import BoundaryError, ConfigError, DomainError, GapError, MalformedRow

HOUR = timedelta(hours=1)
SEASONS = ("Fall", "Winter", "Spring", "Summer")
CSV_HEADER = "timestamp,demand_kw,temp_f,humidity_pct"
TIMESTAMP_FMT = "%Y-%m-%dT%H:00"


@dataclass(frozen=True)
class DemandRecord:
    """One hour of campus load plus the weather observed that hour."""

    timestamp: datetime
    demand_kw: float
    temp_f: float
    humidity_pct: float

    def __post_init__(self):
        if not self.demand_kw > 0:
            raise DomainError(f"demand_kw must be > 0, got {self.demand_kw} "
                              f"at {self.timestamp}")
        if not 0.0 <= self.humidity_pct <= 100.0:
            raise DomainError(f"humidity_pct must be in [0, 100], got "
                              f"{self.humidity_pct} at {self.timestamp}")


class DemandTrace:
    """An ordered, gap-free hourly trace. Immutable after construction."""

    def __init__(self, records):
        records = tuple(records)
        if not records:
            raise GapError("trace must contain at least one record")
        for prev, cur in zip(records, records[1:]):
            if cur.timestamp - prev.timestamp != HOUR:
                raise GapError(f"non-1-hour spacing between {prev.timestamp} "
                               f"and {cur.timestamp}")
        self.records = records
        self._demand = np.array([r.demand_kw for r in records])
        self._temp = np.array([r.temp_f for r in records])
        self._humidity = np.array([r.humidity_pct for r in records])

    def __len__(self):
        return len(self.records)

    @property
    def start(self):
        return self.records[0].timestamp

    @property
    def end(self):
        return self.records[-1].timestamp

    @property
    def demand_kw(self):
        return self._demand.copy()

    @property
    def temp_f(self):
        return self._temp.copy()

    @property
    def humidity_pct(self):
        return self._humidity.copy()

    def index_of(self, ts):
        """Index of the record at timestamp ts, or None."""
        delta = ts - self.start
        hours = delta // HOUR
        if delta != hours * HOUR or not 0 <= hours < len(self.records):
            return None
        return int(hours)

    def day_demands(self, day):
        """The 24 demand values of a calendar day, or None if incomplete."""
        i = self.index_of(datetime(day.year, day.month, day.day))
        if i is None or i + 24 > len(self.records):
            return None
        return self._demand[i:i + 24].copy()

    def slice(self, lo, hi):
        """Sub-trace of records with lo <= index < hi."""
        return DemandTrace(self.records[lo:hi])

    @classmethod
    def from_arrays(cls, start, demand_kw, temp_f, humidity_pct):
        records = [
            DemandRecord(start + i * HOUR, float(d), float(t), float(h))
            for i, (d, t, h) in enumerate(zip(demand_kw, temp_f, humidity_pct))
        ]
        return cls(records)


def parse_trace(content):
    """Parse the documented CSV schema into a DemandTrace.

    Raises MalformedRow for unparsable fields, GapError for grid
    violations and DomainError for out-of-domain values.
    """
    reader = csv.reader(io.StringIO(content))
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedRow("empty input: expected a header row") from None
    if [h.strip() for h in header] != CSV_HEADER.split(","):
        raise MalformedRow(f"bad header {header!r}; expected {CSV_HEADER!r}")

    records = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise MalformedRow(f"line {lineno}: expected 4 fields, got {len(row)}")
        try:
            ts = datetime.strptime(row[0].strip(), TIMESTAMP_FMT)
            values = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise MalformedRow(f"line {lineno}: {exc}") from None
        records.append(DemandRecord(ts, *values))
    if not records:
        raise MalformedRow("no data rows")
    return DemandTrace(records)


def serialize_trace(trace):
    """Inverse of parse_trace; floats use repr so round-trips are lossless."""
    lines = [CSV_HEADER]
    for r in trace.records:
        lines.append(f"{r.timestamp.strftime(TIMESTAMP_FMT)},"
                     f"{r.demand_kw!r},{r.temp_f!r},{r.humidity_pct!r}")
    return "\n".join(lines) + "\n"


def split_train_test(trace, boundary):
    """Chronological split: records strictly before boundary vs at/after.

    boundary must be a midnight timestamp strictly inside the trace.
    """
    if isinstance(boundary, date) and not isinstance(boundary, datetime):
        boundary = datetime(boundary.year, boundary.month, boundary.day)
    if boundary.hour or boundary.minute or boundary.second or boundary.microsecond:
        raise BoundaryError(f"boundary {boundary} is not midnight-aligned")
    if not trace.start < boundary <= trace.end:
        raise BoundaryError(f"boundary {boundary} outside trace range "
                            f"[{trace.start}, {trace.end}]")
    cut = trace.index_of(boundary)
    return trace.slice(0, cut), trace.slice(cut, len(trace))


# --- calendar -------------------------------------------------------------

DEFAULT_SEASON_OF = {
    12: "Winter", 1: "Winter", 2: "Winter",
    3: "Spring", 4: "Spring", 5: "Spring",
    6: "Summer", 7: "Summer", 8: "Summer",
    9: "Fall", 10: "Fall", 11: "Fall",
}


@dataclass(frozen=True)
class CalendarSpec:
    """Holiday dates plus a month -> season mapping.

    semesters is an optional list of (start, end) date ranges; it is
    accepted for forward compatibility but the default feature layout
    does not consume it.
    """

    holidays: frozenset = frozenset()
    season_of: dict = field(default_factory=lambda: dict(DEFAULT_SEASON_OF))
    semesters: tuple = ()

    def __post_init__(self):
        missing = [m for m in range(1, 13) if m not in self.season_of]
        if missing:
            raise ConfigError(f"season mapping missing months {missing}")
        bad = {s for s in self.season_of.values() if s not in SEASONS}
        if bad:
            raise ConfigError(f"unknown season names {sorted(bad)}; "
                              f"expected one of {SEASONS}")


def _nth_weekday(year, month, weekday, n):
    d = date(year, month, 1)
    offset = (weekday - d.weekday()) % 7
    return d + timedelta(days=offset + 7 * (n - 1))


def _last_weekday(year, month, weekday):
    nxt = date(year + 1, 1, 1) if month == 12 else date(year, month + 1, 1)
    d = nxt - timedelta(days=1)
    return d - timedelta(days=(d.weekday() - weekday) % 7)


def us_federal_holidays(year):
    """US federal holidays for one year (observed-date shifts ignored)."""
    return frozenset({
        date(year, 1, 1),
        _nth_weekday(year, 1, 0, 3),    # MLK day
        _nth_weekday(year, 2, 0, 3),    # Presidents day
        _last_weekday(year, 5, 0),      # Memorial day
        date(year, 6, 19),
        date(year, 7, 4),
        _nth_weekday(year, 9, 0, 1),    # Labor day
        _nth_weekday(year, 10, 0, 2),   # Columbus day
        date(year, 11, 11),
        _nth_weekday(year, 11, 3, 4),   # Thanksgiving
        date(year, 12, 25),
    })


def default_calendar(years):
    """CalendarSpec with US federal holidays for the given years."""
    holidays = frozenset().union(*(us_federal_holidays(y) for y in years))
    return CalendarSpec(holidays=holidays)


def parse_calendar(content):
    """Parse the calendar file: [holidays] dates and [seasons] month map."""
    parser = configparser.ConfigParser(allow_no_value=True, delimiters=("=",))
    try:
        parser.read_string(content)
    except configparser.Error as exc:
        raise ConfigError(f"bad calendar file: {exc}") from None

    holidays = set()
    if parser.has_section("holidays"):
        for key in parser["holidays"]:
            try:
                holidays.add(date.fromisoformat(key.strip()))
            except ValueError:
                raise ConfigError(f"bad holiday date {key!r}") from None

    season_of = dict(DEFAULT_SEASON_OF)
    if parser.has_section("seasons"):
        season_of = {}
        for key, value in parser["seasons"].items():
            try:
                month = int(key)
            except ValueError:
                raise ConfigError(f"bad month {key!r} in [seasons]") from None
            if not 1 <= month <= 12:
                raise ConfigError(f"month {month} outside 1..12")
            season_of[month] = (value or "").strip().title()

    semesters = []
    if parser.has_section("semesters"):
        for key, value in parser["semesters"].items():
            try:
                semesters.append((date.fromisoformat(key.strip()),
                                  date.fromisoformat((value or "").strip())))
            except ValueError:
                raise ConfigError(f"bad semester range {key!r}") from None

    return CalendarSpec(holidays=frozenset(holidays), season_of=season_of,
                        semesters=tuple(semesters))


def serialize_calendar(calendar):
    lines = ["[holidays]"]
    lines += [d.isoformat() for d in sorted(calendar.holidays)]
    lines.append("")
    lines.append("[seasons]")
    lines += [f"{m} = {calendar.season_of[m]}" for m in range(1, 13)]
    if calendar.semesters:
        lines.append("")
        lines.append("[semesters]")
        lines += [f"{a.isoformat()} = {b.isoformat()}" for a, b in calendar.semesters]
    return "\n".join(lines) + "\n"


# --- synthetic generation --------------------------------------------------

@dataclass(frozen=True)
class SyntheticConfig:
    """Knobs for the campus-like synthetic trace.

    Demand is base load + a daily profile (one afternoon bump, or morning
    plus evening bumps on bimodal days) + weekday/weekend offset + an
    annual sinusoid + temperature-driven load + AR(1) noise, clamped to
    [min_kw, max_kw].
    """

    days: int = 730
    base_kw: float = 16500.0
    daily_amplitude_kw: float = 5200.0
    weekly_amplitude_kw: float = 1400.0
    seasonal_amplitude_kw: float = 2200.0
    noise_sd_kw: float = 420.0
    min_kw: float = 9934.0
    max_kw: float = 26219.0
    bimodal_probability: float = 0.25
    seed: int = 0
    start: date = date(2022, 1, 3)
    temp_min_f: float = -9.5
    temp_max_f: float = 97.0
    weather_coupling_kw_per_f: float = 28.0

    def validate(self):
        if self.days < 1:
            raise ConfigError(f"days must be >= 1, got {self.days}")
        if not self.min_kw < self.max_kw:
            raise ConfigError(f"min_kw {self.min_kw} must be < max_kw {self.max_kw}")
        for name in ("daily_amplitude_kw", "weekly_amplitude_kw",
                     "seasonal_amplitude_kw", "noise_sd_kw"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if not 0.0 <= self.bimodal_probability <= 1.0:
            raise ConfigError("bimodal_probability must be in [0, 1]")
        if not self.temp_min_f < self.temp_max_f:
            raise ConfigError("temp_min_f must be < temp_max_f")


def _ar1(rng, n, sd, rho):
    eps = rng.normal(0.0, sd * np.sqrt(1.0 - rho * rho), n)
    return lfilter([1.0], [1.0, -rho], eps)


def generate_synthetic(config):
    """Deterministic synthetic trace; identical output for identical config.

    Daily peak shape, weather and noise are drawn from one seeded stream
    in a fixed order, so any field change only perturbs downstream draws.
    """
    config.validate()
    days, n = config.days, config.days * 24
    rng = np.random.default_rng(config.seed)

    # Per-day draws first, then hour-level noise, in a frozen order.
    bimodal = rng.random(days) < config.bimodal_probability
    uni_center = rng.normal(14.5, 0.7, days)
    am_center = rng.normal(8.5, 0.6, days)
    pm_center = rng.normal(18.5, 0.6, days)
    amp_jitter = rng.normal(1.0, 0.07, days)
    demand_noise = _ar1(rng, n, config.noise_sd_kw, 0.9)
    temp_noise = _ar1(rng, n, 6.0, 0.95)
    humidity_noise = _ar1(rng, n, 9.0, 0.9)

    hour = np.tile(np.arange(24.0), days)
    day_idx = np.repeat(np.arange(days), 24)
    dates = [config.start + timedelta(days=int(d)) for d in range(days)]
    doy = np.repeat([d.timetuple().tm_yday for d in dates], 24).astype(float)
    holidays = frozenset().union(
        *(us_federal_holidays(y) for y in {d.year for d in dates}))
    offday = np.repeat(
        [d.weekday() >= 5 or d in holidays for d in dates], 24).astype(float)

    # Daily profile in roughly [-0.35, 1]: bumps above a flat night valley.
    uni = np.exp(-0.5 * ((hour - uni_center[day_idx]) / 3.1) ** 2)
    bi = (0.62 * np.exp(-0.5 * ((hour - am_center[day_idx]) / 2.1) ** 2)
          + 0.80 * np.exp(-0.5 * ((hour - pm_center[day_idx]) / 2.3) ** 2))
    profile = np.where(bimodal[day_idx], bi, uni) - 0.35

    season_phase = np.cos(2.0 * np.pi * (doy - 197.0) / 365.25)
    weekly = config.weekly_amplitude_kw * np.where(offday > 0, -1.0, 0.4)
    seasonal = config.seasonal_amplitude_kw * season_phase

    tmid = 0.5 * (config.temp_min_f + config.temp_max_f)
    tamp = 0.40 * (config.temp_max_f - config.temp_min_f)
    diurnal = -np.cos(2.0 * np.pi * (hour - 15.0) / 24.0)
    temp = tmid + tamp * season_phase + 7.5 * diurnal + temp_noise
    temp = np.clip(temp, config.temp_min_f, config.temp_max_f)

    humidity = 58.0 - 18.0 * season_phase - 6.0 * diurnal + humidity_noise
    humidity = np.clip(humidity, 0.0, 100.0)

    wc = config.weather_coupling_kw_per_f
    weather_load = (wc * np.maximum(0.0, temp - 65.0)
                    + 0.6 * wc * np.maximum(0.0, 40.0 - temp))

    # Weekend/holiday days also run a flatter profile (multiplicative
    # interaction; this is what separates shape-aware models from a
    # purely additive fit).
    day_scale = amp_jitter[day_idx] * np.where(offday > 0, 0.55, 1.0)
    demand = (config.base_kw
              + config.daily_amplitude_kw * day_scale * profile
              + weekly + seasonal + weather_load + demand_noise)
    demand = np.clip(demand, config.min_kw, config.max_kw)

    start_ts = datetime(config.start.year, config.start.month, config.start.day)
    return DemandTrace.from_arrays(start_ts, demand, temp, humidity)
