"""
Sensitivity and aggregation analyses over detections: cutoff sweep,
multi-certificate breakdown, prevention breakdown and username evidence
"""
from bisect import bisect_left
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

from .schema import (
    AggregateReport,
    CertificationRoster,
    CourseMetadata,
    Detection,
    MultiCertRow,
    PreventionRow,
    SweepResult,
)

DEFAULT_THRESHOLDS = (1, 5, 10, 15, 20, 25, 30)


def default_grid(max_seconds: float = 3600.0, step_seconds: float = 30.0) -> List[float]:
    """0, step, 2*step, ... up to and including max_seconds."""
    if step_seconds <= 0 or max_seconds < 0:
        raise ValueError("sweep grid needs a positive step and a non-negative maximum")
    points = int(round(max_seconds / step_seconds))
    return [k * step_seconds for k in range(points + 1)]


def _passes_all_but_cutoff(detection: Detection) -> bool:
    v = detection.filter_verdicts
    return v.bayesian and v.certification and v.shared_ip and v.group_size and detection.p90_seconds is not None


def cutoff_sweep(pairs: Iterable[Detection], grid: Sequence[float]) -> SweepResult:
    """Number of pairs whose 90th-percentile delay is below each cutoff, with the per-bin histogram"""
    if not grid:
        raise ValueError("cutoff sweep needs a non-empty grid")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("cutoff grid must be non-decreasing")

    values = sorted(d.p90_seconds for d in pairs if _passes_all_but_cutoff(d))
    cumulative = [bisect_left(values, g) for g in grid]
    histogram = [cumulative[0]] + [b - a for a, b in zip(cumulative, cumulative[1:])]
    return SweepResult(grid=list(grid), cumulative_detections=cumulative, histogram=histogram)


def multi_cert_table(detections: Iterable[Detection], roster: CertificationRoster,
                     thresholds: Sequence[int] = DEFAULT_THRESHOLDS) -> List[MultiCertRow]:
    certificates = roster.certificates_by_account()
    cameo_users = {d.master for d in detections if d.is_cameo}
    rows = []
    for minimum in thresholds:
        earners = [a for a, count in certificates.items() if count >= minimum]
        with_cameo = sum(1 for a in earners if a in cameo_users)
        rows.append(MultiCertRow(
            min_certificates=minimum,
            earners=len(earners),
            earners_with_cameo=with_cameo,
            fraction=with_cameo / len(earners) if earners else 0.0,
        ))
    return rows


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, char_a in enumerate(a, start=1):
        current = [i]
        for j, char_b in enumerate(b, start=1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (char_a != char_b),
            ))
        previous = current
    return previous[-1]


def username_similarity(a: str, b: str) -> float:
    """1 - edit distance / longer length; diagnostic only, never a filter."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


def repeat_offenders(detections: Iterable[Detection], min_certificates: int = 5) -> List[Tuple[str, int]]:
    """Masters flagged in at least `min_certificates` distinct courses, most courses first."""
    courses: Dict[str, set] = {}
    for d in detections:
        if d.is_cameo:
            courses.setdefault(d.master, set()).add(d.course)
    hits = [(master, len(c)) for master, c in courses.items() if len(c) >= min_certificates]
    return sorted(hits, key=lambda row: (-row[1], row[0]))


def recurring_pairs(detections: Iterable[Detection]) -> List[Tuple[str, str, List[str]]]:
    courses: Dict[Tuple[str, str], set] = {}
    for d in detections:
        if d.is_cameo:
            courses.setdefault((d.harvester, d.master), set()).add(d.course)
    return [(h, m, sorted(c)) for (h, m), c in sorted(courses.items()) if len(c) > 1]


def prevention_breakdown(report: AggregateReport,
                         metadata: Mapping[str, CourseMetadata]) -> List[PreventionRow]:
    """Per prevention tag: the pooled rate (typical user) and the mean per-course rate (typical course)."""
    rows = []
    for tag in (False, True):
        courses = [c for c in sorted(report.per_course)
                   if (metadata[c].prevention if c in metadata else False) == tag]
        if not courses:
            continue
        counts = [report.per_course[c] for c in courses]
        certified = sum(c.certified_count for c in counts)
        cameo = sum(c.cameo_count for c in counts)
        rows.append(PreventionRow(
            prevention=tag,
            courses=len(courses),
            certified=certified,
            cameo=cameo,
            typical_user_rate=cameo / certified if certified else 0.0,
            typical_course_rate=sum(c.cameo_fraction for c in counts) / len(counts),
        ))
    return rows
