"""
Pair timing evidence: canonical per-item times and the master-minus-harvester
delay series of a candidate (harvester, master) pair
"""
import math
from decimal import Decimal
from typing import Dict, Sequence, Union

from .schema import CourseStore, DeltaSeries, EventKind, ItemTimes, TimestampPolicy

MICROS = 10**6


def item_times(store: CourseStore, account: str, policy: TimestampPolicy = "earliest") -> ItemTimes:
    """Earliest (or latest) show-answer and correct-submission time per item for one account"""
    pick = min if policy == "earliest" else max
    show: Dict[str, int] = {}
    correct: Dict[str, int] = {}
    for event in store.account_events.get(account, ()):
        if event.kind == EventKind.SHOW_ANSWER:
            target = show
        elif event.kind == EventKind.CORRECT_SUBMISSION:
            target = correct
        else:
            continue
        seen = target.get(event.item)
        target[event.item] = event.time_us if seen is None else pick(seen, event.time_us)
    return ItemTimes(show=show, correct=correct)


def delta_series(ch_times: ItemTimes, cm_times: ItemTimes) -> DeltaSeries:
    """Delta t = master correct time - harvester show time over items both sides have, in item order."""
    common = sorted(ch_times.show.keys() & cm_times.correct.keys())
    deltas = tuple((cm_times.correct[i] - ch_times.show[i]) / MICROS for i in common)
    return DeltaSeries(
        items=tuple(common),
        deltas=deltas,
        n=len(deltas),
        x=sum(1 for d in deltas if d > 0),
    )


def percentile(series: Union[DeltaSeries, Sequence[float]], q: float) -> float:
    """Nearest-rank percentile: the ceil(q*n)-th smallest value (1-indexed)."""
    values = series.deltas if isinstance(series, DeltaSeries) else series
    if not values:
        raise ValueError("percentile of empty series")
    if not 0 < q <= 1:
        raise ValueError(f"percentile fraction must be in (0, 1], got {q}")
    # Decimal(repr(q)) keeps 0.7*10 from rounding up to rank 8
    rank = max(1, math.ceil(Decimal(repr(q)) * len(values)))
    return sorted(values)[rank - 1]
