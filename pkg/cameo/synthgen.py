"""
Synthetic labeled clickstream corpora: benign cohorts (independent,
synchronized and ordered-offset learners), planted CAMEO pairs, and the
pair-level evaluation of detections against the planted ground truth.

All randomness comes from numpy Generators; course i of a corpus uses
seed + i so courses can be generated independently.
"""
import ipaddress
import logging
from typing import Callable, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

from .clickstream import parse_timestamp
from .schema import (
    BenignKind,
    BenignProfile,
    CameoPlan,
    CameoStrategy,
    CertificationRoster,
    CourseMetadata,
    Detection,
    Event,
    EventKind,
    EvaluationReport,
    GroundTruth,
    MissedPair,
    PlantedPair,
    RunConfig,
    SyntheticCorpus,
)

logger = logging.getLogger(__name__)

MICROS = 10**6
ROAMING_NETWORK = int(ipaddress.IPv4Address("172.16.0.0"))
ROAMING_SPAN = 2**20
BASE_NAMES = ("curtis", "maria", "kenji", "amara", "lucas", "ingrid", "omar", "priya", "tomas", "zoe")

Seed = Union[int, np.random.Generator]
Diagnose = Callable[[str, str, str], Optional[Detection]]


class IpPool:
    """Hands out distinct 10.0.0.0/8 addresses in order."""

    def __init__(self):
        self._next = 1

    def take(self) -> str:
        k = self._next
        self._next += 1
        return str(ipaddress.IPv4Address((10 << 24) + k))


def item_ids(count: int) -> List[str]:
    return [f"p{i:03d}" for i in range(count)]


def _at(start_us: int, offset_seconds: float) -> int:
    return start_us + int(round(offset_seconds * MICROS))


def _roaming_ip(rng: np.random.Generator, home_ip: str, rate: float) -> str:
    if rate > 0 and rng.random() < rate:
        return str(ipaddress.IPv4Address(ROAMING_NETWORK + int(rng.integers(ROAMING_SPAN))))
    return home_ip


def _embargoed(profile: BenignProfile, rng: np.random.Generator, time_us: int) -> int:
    if profile.embargo_until_us is None:
        return time_us
    return _at(profile.embargo_until_us, rng.uniform(0, 86400.0))


def _session_start(profile: BenignProfile, rng: np.random.Generator) -> float:
    span = profile.window_seconds - profile.items * profile.item_spacing_seconds
    return rng.uniform(0, span) if span > 0 else 0.0


def _async_cohort(profile: BenignProfile, n_accounts: int, course: str, rng: np.random.Generator,
                  pool: IpPool, prefix: str) -> Tuple[List[Event], Dict[str, bool]]:
    items = item_ids(profile.items)
    accounts = [f"{prefix}-u{i:04d}" for i in range(n_accounts)]
    certified = {a: i % 2 == 1 for i, a in enumerate(accounts)}

    home: Dict[str, str] = {}
    router = min(profile.router_accounts, n_accounts)
    if router:
        router_ip = pool.take()
        for account in accounts[:router]:
            home[account] = router_ip
    rest = accounts[router:]
    for start in range(0, len(rest), profile.household_size):
        household_ip = pool.take()
        for account in rest[start:start + profile.household_size]:
            home[account] = household_ip

    correct = rng.uniform(0, profile.window_seconds, size=(n_accounts, profile.items))
    delay = rng.uniform(5.0, profile.show_delay_seconds, size=(n_accounts, profile.items))
    shown = rng.random((n_accounts, profile.items)) < profile.show_fraction

    events = []
    for a, account in enumerate(accounts):
        for i, item in enumerate(items):
            t_correct = _at(profile.start_us, correct[a, i])
            events.append(Event(account=account, course=course, item=item, kind=EventKind.CORRECT_SUBMISSION,
                                time_us=t_correct, ip=_roaming_ip(rng, home[account], profile.roaming_ip_rate)))
            if shown[a, i]:
                t_show = _embargoed(profile, rng, _at(t_correct, delay[a, i]))
                events.append(Event(account=account, course=course, item=item, kind=EventKind.SHOW_ANSWER,
                                    time_us=t_show, ip=_roaming_ip(rng, home[account], profile.roaming_ip_rate)))
    return events, certified


def _paired_cohort(profile: BenignProfile, n_accounts: int, course: str, rng: np.random.Generator,
                   pool: IpPool, prefix: str) -> Tuple[List[Event], Dict[str, bool]]:
    """Two-account cohorts sharing an IP: `-a` is uncertified, `-b` certified."""
    if n_accounts % 2:
        logger.debug("odd account count %d for %s cohort; dropping one", n_accounts, profile.kind.value)
    tag = "s" if profile.kind == BenignKind.SYNCHRONIZED else "o"
    items = item_ids(profile.items)
    jitter = profile.jitter_seconds
    events: List[Event] = []
    certified: Dict[str, bool] = {}

    for k in range(n_accounts // 2):
        first, second = f"{prefix}-{tag}{k:03d}-a", f"{prefix}-{tag}{k:03d}-b"
        certified[first], certified[second] = False, True
        ip = pool.take()
        session = _session_start(profile, rng)

        for i, item in enumerate(items):
            base = session + i * profile.item_spacing_seconds
            if profile.kind == BenignKind.SYNCHRONIZED:
                # both learners submit and reveal together, each within +-jitter of the shared moment
                times = {
                    (first, EventKind.CORRECT_SUBMISSION): base + rng.uniform(-jitter, jitter),
                    (first, EventKind.SHOW_ANSWER): base + rng.uniform(-jitter, jitter),
                    (second, EventKind.CORRECT_SUBMISSION): base + rng.uniform(-jitter, jitter),
                    (second, EventKind.SHOW_ANSWER): base + rng.uniform(-jitter, jitter),
                }
            else:
                # leader works first; the follower submits offset later
                follower_correct = base + profile.offset_seconds + rng.uniform(-jitter, jitter)
                times = {
                    (first, EventKind.CORRECT_SUBMISSION): base - rng.uniform(5.0, profile.show_delay_seconds),
                    (first, EventKind.SHOW_ANSWER): base,
                    (second, EventKind.CORRECT_SUBMISSION): follower_correct,
                    (second, EventKind.SHOW_ANSWER): follower_correct + rng.uniform(5.0, profile.show_delay_seconds),
                }
            for (account, kind), seconds in times.items():
                time_us = _at(profile.start_us, seconds)
                if kind == EventKind.SHOW_ANSWER:
                    time_us = _embargoed(profile, rng, time_us)
                events.append(Event(account=account, course=course, item=item, kind=kind, time_us=time_us,
                                    ip=_roaming_ip(rng, ip, profile.roaming_ip_rate)))
    return events, certified


def benign_cohort(profile: BenignProfile, n_accounts: int, course: str, seed: Seed,
                  ip_pool: Optional[IpPool] = None,
                  account_prefix: Optional[str] = None) -> Tuple[List[Event], Dict[str, bool]]:
    """Events plus the certification of every generated account"""
    if n_accounts < 0:
        raise ValueError(f"n_accounts must be non-negative, got {n_accounts}")
    rng = np.random.default_rng(seed)
    pool = ip_pool or IpPool()
    prefix = account_prefix or course
    if profile.kind == BenignKind.INDEPENDENT_ASYNC:
        return _async_cohort(profile, n_accounts, course, rng, pool, prefix)
    return _paired_cohort(profile, n_accounts, course, rng, pool, prefix)


def gen_benign(profile: BenignProfile, n_accounts: int, course: str, seed: Seed,
               ip_pool: Optional[IpPool] = None, account_prefix: Optional[str] = None) -> List[Event]:
    events, _ = benign_cohort(profile, n_accounts, course, seed, ip_pool, account_prefix)
    return events


def sample_lags(plan: CameoPlan, rng: np.random.Generator) -> List[int]:
    """Per-item harvest-to-submit lags in whole microseconds, all strictly positive."""
    if plan.lag_distribution == "constant":
        seconds = np.full(plan.items, plan.lag_mean_seconds)
    else:
        seconds = rng.exponential(plan.lag_mean_seconds, size=plan.items)
    return [max(1, int(round(s * MICROS))) for s in seconds]


def gen_cameo(plan: CameoPlan, course: str, seed: Seed) -> Tuple[List[Event], PlantedPair]:
    """Harvester reveals, master submits `lag` later, on every item, both from the shared IP."""
    rng = np.random.default_rng(seed)
    items = item_ids(plan.items)
    lags = sample_lags(plan, rng)
    events: List[Event] = []

    def emit(account, item, kind, time_us):
        events.append(Event(account=account, course=course, item=item, kind=kind,
                            time_us=time_us, ip=plan.shared_ip))

    def harvest(item, show_us):
        emit(plan.harvester, item, EventKind.OTHER, show_us - int(rng.integers(5, 30)) * MICROS)
        emit(plan.harvester, item, EventKind.SHOW_ANSWER, show_us)

    t = plan.start_us
    if plan.strategy == CameoStrategy.ALTERNATING:
        for item, lag in zip(items, lags):
            harvest(item, t)
            emit(plan.master, item, EventKind.CORRECT_SUBMISSION, t + lag)
            t += lag + _at(0, rng.uniform(20.0, 120.0))
    else:
        for start in range(0, plan.items, plan.cluster_size):
            block = range(start, min(start + plan.cluster_size, plan.items))
            shows = {}
            for i in block:
                shows[i] = t
                harvest(items[i], t)
                t += _at(0, rng.uniform(2.0, 8.0))
            for i in block:
                emit(plan.master, items[i], EventKind.CORRECT_SUBMISSION, shows[i] + lags[i])
            t = max(shows[i] + lags[i] for i in block) + _at(0, rng.uniform(20.0, 120.0))

    pair = PlantedPair(harvester=plan.harvester, master=plan.master, course=course, strategy=plan.strategy,
                       lags_seconds=tuple(lag / MICROS for lag in lags))
    return events, pair


def _cameo_names(k: int) -> Tuple[str, str]:
    base = BASE_NAMES[k % len(BASE_NAMES)]
    return f"{base}{k}", f"{base}{k + 1}"


def _event_order(e: Event):
    return (e.course, e.time_us, e.account, e.kind.value, e.item)


def build_corpus(config: RunConfig) -> SyntheticCorpus:
    """Benign cohorts and planted pairs for every course, with roster, metadata and ground truth"""
    start_us = parse_timestamp(config.synth_start)
    window_seconds = config.window_days * 86400.0
    pool = IpPool()

    n_prevention = min(config.prevention_courses, config.n_courses)
    courses = [f"course-{i + 1:02d}" for i in range(config.n_courses)]
    prevention = set(courses[len(courses) - n_prevention:]) if n_prevention else set()

    n_async = int(round(config.benign_accounts * config.async_share))
    n_sync = int(round(config.benign_accounts * config.sync_share))
    n_offset = config.benign_accounts - n_async - n_sync

    events: List[Event] = []
    roster: Dict[Tuple[str, str], bool] = {}
    labels: Dict[str, str] = {}
    planted: List[PlantedPair] = []
    previous_masters: List[str] = []
    name_counter = 0

    for index, course in enumerate(courses):
        rng = np.random.default_rng(config.seed + index)
        embargo = _at(start_us, window_seconds) if course in prevention else None
        common = dict(items=config.items, start_us=start_us, window_seconds=window_seconds,
                      jitter_seconds=config.jitter_seconds, offset_seconds=config.offset_seconds,
                      roaming_ip_rate=config.roaming_ip_rate, embargo_until_us=embargo)
        cohorts = [
            (BenignProfile(kind=BenignKind.INDEPENDENT_ASYNC, household_size=config.household_size,
                           router_accounts=config.router_accounts, **common), n_async),
            (BenignProfile(kind=BenignKind.SYNCHRONIZED, **common), n_sync),
            (BenignProfile(kind=BenignKind.ORDERED_OFFSET, **common), n_offset),
        ]
        for profile, count in cohorts:
            cohort_events, certified = benign_cohort(profile, count, course, rng, pool)
            events.extend(cohort_events)
            for account, cert in certified.items():
                roster[(account, course)] = cert
                labels.setdefault(account, "benign")

        if course in prevention:
            logger.info("course %s: prevention course, no pairs planted", course)
            continue

        n_clustered = int(round(config.cameo_pairs * config.clustered_share))
        n_repeat = min(int(round(config.cameo_pairs * config.repeat_master_share)), len(previous_masters))
        masters = []
        for p in range(config.cameo_pairs):
            master, harvester = _cameo_names(name_counter)
            name_counter += 2
            if p < n_repeat:
                master = previous_masters[p]
            plan = CameoPlan(
                strategy=CameoStrategy.CLUSTERED if p < n_clustered else CameoStrategy.ALTERNATING,
                lag_mean_seconds=config.lag_mean_seconds,
                items=config.items,
                shared_ip=pool.take(),
                harvester=harvester,
                master=master,
                start_us=_at(start_us, rng.uniform(0, window_seconds / 2)),
            )
            cameo_events, pair = gen_cameo(plan, course, rng)
            events.extend(cameo_events)
            planted.append(pair)
            roster[(master, course)] = True
            roster[(harvester, course)] = False
            labels[master] = "cameo-master"
            labels[harvester] = "cameo-harvester"
            masters.append(master)
        # a master is reused in at most one later course
        previous_masters = masters[n_repeat:]
        logger.info("course %s: %d benign accounts, %d planted pairs (%d repeat masters)",
                    course, config.benign_accounts, config.cameo_pairs, n_repeat)

    events.sort(key=_event_order)
    truth = GroundTruth(
        planted=sorted(planted, key=lambda p: (p.course, p.master, p.harvester)),
        labels=dict(sorted(labels.items())),
        certified=sorted(key for key, cert in roster.items() if cert),
        prevention_courses=sorted(prevention),
    )
    return SyntheticCorpus(
        events=events,
        roster=CertificationRoster(entries=dict(sorted(roster.items()))),
        metadata=[CourseMetadata(course=c, prevention=c in prevention) for c in courses],
        truth=truth,
    )


def evaluate(detections: Iterable[Detection], truth: GroundTruth,
             diagnose: Optional[Diagnose] = None) -> EvaluationReport:
    """
    Pair-level precision and recall on (harvester, master, course) triples.

    With no predictions precision is reported as 1.0 and zero_predictions is set.
    `diagnose`, when given, re-classifies each missed pair so the report shows
    which filters rejected it.
    """
    flagged = {d.triple: d for d in detections if d.is_cameo}
    planted = truth.planted_triples()
    hits = planted & flagged.keys()

    zero = not flagged
    precision = 1.0 if zero else len(hits) / len(flagged)
    recall = len(hits) / len(planted) if planted else 1.0

    false_positives = [flagged[t] for t in sorted(flagged.keys() - planted, key=lambda t: (t[2], t[1], t[0]))]
    false_negatives = [
        MissedPair(harvester=h, master=m, course=c, detection=diagnose(h, m, c) if diagnose else None)
        for h, m, c in sorted(planted - flagged.keys(), key=lambda t: (t[2], t[1], t[0]))
    ]
    logger.info("evaluation: %d planted, %d predicted, %d correct", len(planted), len(flagged), len(hits))
    return EvaluationReport(
        precision=precision,
        recall=recall,
        true_positives=len(hits),
        predicted=len(flagged),
        planted=len(planted),
        zero_predictions=zero,
        false_positives=false_positives,
        false_negatives=false_negatives,
    )
