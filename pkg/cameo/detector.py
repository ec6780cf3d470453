"""
Five-filter CAMEO classification of ordered (harvester, master) pairs.

The filters are conjunctive, so the cheap structural ones (certification,
shared IP group, group size) prune the candidate pairs up front and only the
survivors get the timing filters (Bayesian criterion, 90th-percentile cutoff).
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from functools import cached_property
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from .analytics import username_similarity
from .bayes import passes_filter1, posterior, prob_pi_exceeds
from .ip_linkage import group_within_limit, shares_ip_history
from .pairgen import delta_series, item_times, percentile
from .schema import (
    AggregateReport,
    CertificationRoster,
    CourseCounts,
    CourseStore,
    DeltaSeries,
    Detection,
    DetectionRun,
    FilterConfig,
    FilterVerdicts,
    IpGroupPartition,
    ItemTimes,
)

logger = logging.getLogger(__name__)

FILTER_NAMES = ("bayesian", "cutoff", "certification", "shared_ip", "group_size")


class CourseIndex:
    """Memoized canonical item times for the accounts of one course"""

    def __init__(self, store: CourseStore, config: FilterConfig):
        self.store = store
        self.policy = config.timestamp_policy
        self._times: Dict[str, ItemTimes] = {}

    def times(self, account: str) -> ItemTimes:
        if account not in self._times:
            self._times[account] = item_times(self.store, account, self.policy)
        return self._times[account]

    def common_items(self, ch: str, cm: str) -> int:
        return len(self.times(ch).show.keys() & self.times(cm).correct.keys())


class PairContext:
    """Everything the filters need about one ordered pair; timing evidence is computed on first use."""

    def __init__(self, ch: str, cm: str, store: CourseStore, roster: CertificationRoster,
                 partition: IpGroupPartition, config: FilterConfig, index: Optional[CourseIndex] = None):
        self.ch = ch
        self.cm = cm
        self.store = store
        self.roster = roster
        self.partition = partition
        self.config = config
        self.index = index or CourseIndex(store, config)

    @cached_property
    def series(self) -> DeltaSeries:
        return delta_series(self.index.times(self.ch), self.index.times(self.cm))

    @cached_property
    def p90_seconds(self) -> Optional[float]:
        if self.series.n == 0:
            return None
        return percentile(self.series, self.config.percentile_q)

    @cached_property
    def posterior_prob(self) -> float:
        post = posterior(self.series.x, self.series.n, self.config.prior)
        return prob_pi_exceeds(self.config.criterion.pi_threshold, post)

    def check(self, name: str) -> bool:
        return FILTER_CHECKS[name](self)


def _bayesian(ctx: PairContext) -> bool:
    if ctx.series.n == 0:
        return False
    return passes_filter1(ctx.series.x, ctx.series.n, ctx.config.prior, ctx.config.criterion)


def _cutoff(ctx: PairContext) -> bool:
    return ctx.p90_seconds is not None and ctx.p90_seconds < ctx.config.cutoff_seconds


def _certification(ctx: PairContext) -> bool:
    course = ctx.store.course
    return ctx.roster.is_certified(ctx.cm, course) and not ctx.roster.is_certified(ctx.ch, course)


def _shared_ip(ctx: PairContext) -> bool:
    return shares_ip_history(ctx.ch, ctx.cm, ctx.partition)


def _group_size(ctx: PairContext) -> bool:
    return group_within_limit(ctx.partition.group_size(ctx.cm), ctx.config)


FILTER_CHECKS: Dict[str, Callable[[PairContext], bool]] = {
    "bayesian": _bayesian,
    "cutoff": _cutoff,
    "certification": _certification,
    "shared_ip": _shared_ip,
    "group_size": _group_size,
}


def passes_filters(ctx: PairContext, order: Sequence[str] = FILTER_NAMES) -> bool:
    """Short-circuit conjunction of the filters in the given order."""
    return all(ctx.check(name) for name in order)


def generate_candidates(store: CourseStore, roster: CertificationRoster, partition: IpGroupPartition,
                        config: FilterConfig, index: Optional[CourseIndex] = None) -> Iterator[Tuple[str, str]]:
    """Ordered (harvester, master) pairs passing certification, shared-IP, group-size and common-item checks"""
    index = index or CourseIndex(store, config)
    course = store.course
    buckets: Dict[str, List[str]] = {}
    for account in sorted(store.accounts):
        group = partition.group_of.get(account)
        if group is not None:
            buckets.setdefault(group, []).append(account)

    for group in sorted(buckets):
        if not group_within_limit(partition.group_account_count[group], config):
            logger.debug("course %s: skipping IP group %s (%d accounts)",
                         course, group, partition.group_account_count[group])
            continue
        accounts = buckets[group]
        masters = [a for a in accounts if roster.is_certified(a, course)]
        harvesters = [a for a in accounts if not roster.is_certified(a, course)]
        for cm in masters:
            for ch in harvesters:
                if index.common_items(ch, cm) < config.min_common_items:
                    continue
                yield ch, cm


def classify_pair(ch: str, cm: str, store: CourseStore, roster: CertificationRoster,
                  partition: IpGroupPartition, config: FilterConfig,
                  index: Optional[CourseIndex] = None) -> Detection:
    ctx = PairContext(ch, cm, store, roster, partition, config, index)
    verdicts = FilterVerdicts(**{name: ctx.check(name) for name in FILTER_NAMES})
    note = None
    if ctx.series.n == 0:
        note = "no common items; timing filters cannot pass"
        logger.debug("course %s: pair (%s, %s) has no common items", store.course, ch, cm)
    return Detection(
        course=store.course,
        harvester=ch,
        master=cm,
        n=ctx.series.n,
        x=ctx.series.x,
        p90_seconds=ctx.p90_seconds,
        posterior_prob=ctx.posterior_prob,
        filter_verdicts=verdicts,
        is_cameo=verdicts.passed(),
        username_similarity=username_similarity(ch, cm),
        note=note,
    )


def detect_course(store: CourseStore, roster: CertificationRoster, partition: IpGroupPartition,
                  config: FilterConfig) -> List[Detection]:
    """Classify every candidate pair of one course"""
    index = CourseIndex(store, config)
    classified = [classify_pair(ch, cm, store, roster, partition, config, index)
                  for ch, cm in generate_candidates(store, roster, partition, config, index)]
    flagged = sum(1 for d in classified if d.is_cameo)
    logger.info("course %s: %d candidate pairs, %d flagged", store.course, len(classified), flagged)
    return classified


def _course_job(args) -> List[Detection]:
    return detect_course(*args)


def _sort_key(d: Detection):
    return (d.course, d.master, d.harvester)


def detect(stores: Mapping[str, CourseStore], roster: CertificationRoster, partition: IpGroupPartition,
           config: FilterConfig, jobs: int = 1) -> DetectionRun:
    """Run every course (in parallel when jobs > 1) and aggregate the flagged pairs"""
    courses = sorted(stores)
    jobs_args = [(stores[c], roster, partition, config) for c in courses]
    if jobs > 1 and len(courses) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(courses))) as pool:
            per_course = list(pool.map(_course_job, jobs_args))
    else:
        per_course = [_course_job(args) for args in jobs_args]

    candidates = sorted((d for batch in per_course for d in batch), key=_sort_key)
    detections = [d for d in candidates if d.is_cameo]
    report = aggregate(detections, roster, courses)
    return DetectionRun(detections=detections, candidates=candidates, report=report)


def aggregate(detections: Iterable[Detection], roster: CertificationRoster,
              courses: Iterable[str] = ()) -> AggregateReport:
    """Count flagged certificates once per (master, course) however many harvesters served them"""
    flagged = [d for d in detections if d.is_cameo]
    certificates = {(d.master, d.course) for d in flagged}
    all_courses = sorted(set(courses) | set(roster.courses()) | {c for _, c in certificates})

    per_course = {}
    for course in all_courses:
        certified = len(roster.certified_in(course))
        cameo = sum(1 for _, c in certificates if c == course)
        per_course[course] = CourseCounts(
            certified_count=certified,
            cameo_count=cameo,
            cameo_fraction=cameo / certified if certified else 0.0,
        )

    total = sum(c.certified_count for c in per_course.values())
    affected = [c for c in per_course.values() if c.cameo_count > 0]
    affected_certified = sum(c.certified_count for c in affected)
    return AggregateReport(
        cameo_certificates=len(certificates),
        unique_cameo_users=len({d.master for d in flagged}),
        harvester_accounts=len({d.harvester for d in flagged}),
        total_certificates=total,
        courses_with_cameo=len(affected),
        cameo_fraction_overall=len(certificates) / total if total else 0.0,
        cameo_fraction_affected_courses=(sum(c.cameo_count for c in affected) / affected_certified
                                         if affected_certified else 0.0),
        per_course=per_course,
    )


def brute_force_detect(stores: Mapping[str, CourseStore], roster: CertificationRoster,
                       partition: IpGroupPartition, config: FilterConfig,
                       order: Sequence[str] = FILTER_NAMES) -> List[Tuple[str, str, str]]:
    """Reference run: every ordered pair of every course through all five filters, no pruning."""
    flagged = []
    for course in sorted(stores):
        store = stores[course]
        index = CourseIndex(store, config)
        accounts = sorted(store.accounts)
        for ch in accounts:
            for cm in accounts:
                if ch == cm:
                    continue
                ctx = PairContext(ch, cm, store, roster, partition, config, index)
                if ctx.series.n < config.min_common_items:
                    continue
                if passes_filters(ctx, order):
                    flagged.append((ch, cm, course))
    return sorted(flagged, key=lambda t: (t[2], t[1], t[0]))
