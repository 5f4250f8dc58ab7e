"""Min-max labeling: mark each hour of a day T (top-k), B (bottom-k) or N.

Tie-break is deterministic: at equal demand the earlier hour ranks first.
Top ranks are allocated before bottom ranks, so on fully degenerate days
the two sets stay disjoint (possible because k <= 12 and 2k <= 24).
"""

from dataclasses import dataclass

import numpy as np

from .errors import KOutOfRange

HOURS_PER_DAY = 24


@dataclass(frozen=True)
class DayLabeling:
    k: int
    labels: tuple           # 24 entries from {"T", "B", "N"}
    top_hours: frozenset
    bottom_hours: frozenset


def label_day(demand_24, k):
    """Label one day's 24 demand values for a given k.

    Handles contiguous (uni-modal) and non-contiguous (bi-modal) peak
    hours alike: selection is purely by demand rank.
    """
    demand = np.asarray(demand_24, dtype=np.float64)
    if demand.shape != (HOURS_PER_DAY,):
        raise KOutOfRange(f"expected 24 hourly values, got shape {demand.shape}")
    if not 1 <= k <= 12:
        raise KOutOfRange(f"k must be in 1..12, got {k}")

    by_desc = sorted(range(HOURS_PER_DAY), key=lambda h: (-demand[h], h))
    top = set(by_desc[:k])
    by_asc = sorted(range(HOURS_PER_DAY), key=lambda h: (demand[h], h))
    bottom = set()
    for h in by_asc:
        if h not in top:
            bottom.add(h)
            if len(bottom) == k:
                break

    labels = tuple("T" if h in top else "B" if h in bottom else "N"
                   for h in range(HOURS_PER_DAY))
    return DayLabeling(k, labels, frozenset(top), frozenset(bottom))


def labels_csv(entries):
    """Label export: one `date,hour,label,demand_kw` row per hour.

    entries: iterable of (date, demand_24, DayLabeling).
    """
    lines = ["date,hour,label,demand_kw"]
    for day, demand, labeling in entries:
        for hour in range(HOURS_PER_DAY):
            lines.append(f"{day.isoformat()},{hour},"
                         f"{labeling.labels[hour]},{demand[hour]:.4f}")
    return "\n".join(lines) + "\n"
