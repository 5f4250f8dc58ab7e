"""Battery dispatch from day labels, demand-charge math, savings model.

Two views are provided on purpose. dispatch_day / monthly_demand_savings
simulate physically consistent operation (state of charge bounded, no
grid export, charge losses). closed_form_savings is the simpler
published-style estimate that multiplies the per-hour discharge
capacity/k by capture accuracy and the monthly demand charge; it ignores
whether the discharge exceeds the actual peak excess.
"""

import calendar as _calendar
from dataclasses import dataclass
from datetime import timedelta

import numpy as np

from .errors import IncompleteMonth, NoSavings, RangeError, SocOutOfRange
from .labeling import HOURS_PER_DAY


@dataclass(frozen=True)
class BatterySpec:
    capacity_kwh: float
    max_power_kw: float
    unit_cost_per_kwh: float = 200.0
    round_trip_efficiency: float = 1.0

    def __post_init__(self):
        if not self.capacity_kwh > 0:
            raise RangeError(f"capacity_kwh must be > 0, got {self.capacity_kwh}")
        if not self.max_power_kw > 0:
            raise RangeError(f"max_power_kw must be > 0, got {self.max_power_kw}")
        if not 0.0 < self.round_trip_efficiency <= 1.0:
            raise RangeError("round_trip_efficiency must be in (0, 1]")

    @property
    def cost_usd(self):
        return self.capacity_kwh * self.unit_cost_per_kwh


@dataclass(frozen=True)
class TariffSpec:
    demand_charge_per_kw: float = 22.0

    def __post_init__(self):
        if self.demand_charge_per_kw < 0:
            raise RangeError("demand_charge_per_kw must be >= 0")


@dataclass(frozen=True)
class DispatchResult:
    net_load_kw: np.ndarray   # (24,)
    soc_kwh: np.ndarray       # (25,) initial + after each hour
    discharged_kwh: float
    charged_kwh: float        # grid-side energy drawn for charging


def dispatch_day(demand_24, labeling, battery, initial_soc):
    """Run one day of the labeled charge/discharge policy.

    T hours discharge at min(capacity/k, max power, soc, demand) so the
    battery never exports; B hours recharge toward full, spreading the
    deficit evenly over the remaining B hours (power-capped); N hours
    pass through.
    """
    demand = np.asarray(demand_24, dtype=np.float64)
    if demand.shape != (HOURS_PER_DAY,):
        raise RangeError(f"expected 24 demand values, got {demand.shape}")
    if not 0.0 <= initial_soc <= battery.capacity_kwh:
        raise SocOutOfRange(f"initial_soc {initial_soc} outside "
                            f"[0, {battery.capacity_kwh}]")

    bd_target = battery.capacity_kwh / labeling.k
    eff = battery.round_trip_efficiency
    bottom_left = sorted(labeling.bottom_hours)

    net = demand.copy()
    soc = float(initial_soc)
    soc_series = [soc]
    discharged = 0.0
    charged = 0.0
    for hour in range(HOURS_PER_DAY):
        if hour in labeling.top_hours:
            amount = min(bd_target, battery.max_power_kw, soc, demand[hour])
            net[hour] -= amount
            soc -= amount
            discharged += amount
        elif hour in labeling.bottom_hours:
            remaining = sum(1 for b in bottom_left if b >= hour)
            deficit = battery.capacity_kwh - soc
            grid = min(battery.max_power_kw, deficit / (eff * remaining))
            net[hour] += grid
            soc += grid * eff
            charged += grid
        soc = min(max(soc, 0.0), battery.capacity_kwh)
        soc_series.append(soc)

    return DispatchResult(net, np.array(soc_series), discharged, charged)


def monthly_demand_savings(daily_results, raw_demand, tariff):
    """(peak raw demand - peak net load) * demand charge, for one month."""
    raw = np.asarray(raw_demand, dtype=np.float64)
    days = len(daily_results)
    if not 28 <= days <= 31 or raw.shape != (days * HOURS_PER_DAY,):
        raise IncompleteMonth(f"{days} daily results against "
                              f"{raw.shape} raw hours")
    net = np.concatenate([r.net_load_kw for r in daily_results])
    return float((raw.max() - net.max()) * tariff.demand_charge_per_kw)


def closed_form_savings(capacity_kwh, k, accuracy_fraction, tariff):
    """Published-style annual estimate: (capacity/k) * accuracy * rate * 12."""
    if k < 1:
        raise RangeError(f"k must be >= 1, got {k}")
    if not 0.0 <= accuracy_fraction <= 1.0:
        raise RangeError(f"accuracy must be in [0, 1], got {accuracy_fraction}")
    return (capacity_kwh / k) * accuracy_fraction * tariff.demand_charge_per_kw * 12.0


def payback_years(battery_cost, annual_savings):
    if annual_savings <= 0:
        raise NoSavings(f"annual savings must be > 0, got {annual_savings}")
    return battery_cost / annual_savings


@dataclass(frozen=True)
class SweepRow:
    capacity_kwh: float
    k: int
    accuracy: float
    annual_savings_usd: float
    payback_years: float


@dataclass(frozen=True)
class SavingsReport:
    rows: tuple


def savings_sweep(capacities, k_values, accuracy_by_k, tariff, unit_cost=200.0):
    """Full savings/payback grid over battery sizes and k."""
    rows = []
    for capacity in capacities:
        for k in k_values:
            accuracy = accuracy_by_k[k]
            savings = closed_form_savings(capacity, k, accuracy, tariff)
            payback = (capacity * unit_cost / savings) if savings > 0 \
                else float("inf")
            rows.append(SweepRow(capacity, k, accuracy, savings, payback))
    return SavingsReport(tuple(rows))


def savings_csv(report):
    lines = ["capacity_kwh,k,accuracy,annual_savings_usd,payback_years"]
    for r in report.rows:
        lines.append(f"{r.capacity_kwh:.4f},{r.k},{r.accuracy:.4f},"
                     f"{r.annual_savings_usd:.4f},{r.payback_years:.4f}")
    return "\n".join(lines) + "\n"


# --- month-by-month trace simulation ----------------------------------------

@dataclass(frozen=True)
class MonthResult:
    year: int
    month: int
    raw_peak_kw: float
    net_peak_kw: float
    savings_usd: float


def simulate_trace(trace, label_for_day, battery, tariff, initial_soc=None,
                   carry_soc=True):
    """Dispatch every complete calendar month of a trace.

    label_for_day(day, demand_24) supplies the DayLabeling that drives
    the battery (from a forecast, or from the actual demand for the
    oracle run). Returns (month results, per-day DispatchResults).
    """
    soc = battery.capacity_kwh if initial_soc is None else initial_soc

    by_month = {}
    day = trace.start.date()
    if trace.start.hour != 0:
        day += timedelta(days=1)
    while True:
        demand = trace.day_demands(day)
        if demand is None:
            break
        by_month.setdefault((day.year, day.month), []).append((day, demand))
        day += timedelta(days=1)

    months = []
    dispatches = []
    for (year, month), entries in sorted(by_month.items()):
        if len(entries) != _calendar.monthrange(year, month)[1]:
            continue
        results = []
        raw = []
        for day, demand in entries:
            labeling = label_for_day(day, demand)
            result = dispatch_day(demand, labeling, battery, soc)
            if carry_soc:
                soc = result.soc_kwh[-1]
            results.append(result)
            raw.append(demand)
        raw = np.concatenate(raw)
        savings = monthly_demand_savings(results, raw, tariff)
        net_peak = max(float(r.net_load_kw.max()) for r in results)
        months.append(MonthResult(year, month, float(raw.max()), net_peak,
                                  savings))
        dispatches.extend(results)
    return months, dispatches


def months_csv(months):
    lines = ["year,month,raw_peak_kw,net_peak_kw,savings_usd"]
    for m in months:
        lines.append(f"{m.year},{m.month},{m.raw_peak_kw:.4f},"
                     f"{m.net_peak_kw:.4f},{m.savings_usd:.4f}")
    return "\n".join(lines) + "\n"
