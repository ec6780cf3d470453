"""
Domain types for CAMEO detection: clickstream events, per-pair timing
evidence, filter configuration, detections, reports and synthetic corpora
"""
from enum import Enum
from typing import Dict, FrozenSet, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class EventKind(str, Enum):
    SHOW_ANSWER = "show_answer"
    CORRECT_SUBMISSION = "correct_submission"
    OTHER = "other"


class Event(BaseModel):
    """One timestamped account action. Time is microseconds since the epoch (UTC)."""
    model_config = ConfigDict(frozen=True)

    account: str = Field(min_length=1)
    course: str = Field(min_length=1)
    item: str = ""
    kind: EventKind
    time_us: int
    ip: str = ""

    @model_validator(mode="after")
    def _item_required_for_graded_kinds(self):
        if self.kind != EventKind.OTHER and not self.item:
            raise ValueError(f"missing item for {self.kind.value} event")
        return self


class CertificationRoster(BaseModel):
    """(account, course) -> certified. Accounts absent from the roster count as uncertified."""
    entries: Dict[Tuple[str, str], bool] = Field(default_factory=dict)

    def is_certified(self, account: str, course: str) -> bool:
        return self.entries.get((account, course), False)

    def courses(self) -> List[str]:
        return sorted({course for _, course in self.entries})

    def certified_in(self, course: str) -> List[str]:
        return sorted(a for (a, c), cert in self.entries.items() if c == course and cert)

    def certificates_by_account(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for (account, _), certified in self.entries.items():
            if certified:
                counts[account] = counts.get(account, 0) + 1
        return counts


class CourseStore(BaseModel):
    """Events of one course, ordered by time with ties kept in input order."""
    model_config = ConfigDict(frozen=True)

    course: str
    events: Tuple[Event, ...] = ()
    account_events: Dict[str, Tuple[Event, ...]] = Field(default_factory=dict)

    @property
    def accounts(self) -> FrozenSet[str]:
        return frozenset(self.account_events)

    @model_validator(mode="after")
    def _single_course(self):
        stray = [e for e in self.events if e.course != self.course]
        if stray:
            raise ValueError(f"event for course {stray[0].course!r} stored under {self.course!r}")
        return self


class CourseMetadata(BaseModel):
    model_config = ConfigDict(frozen=True)

    course: str
    prevention: bool = False


class LoadReport(BaseModel):
    event_counts: Dict[str, int] = Field(default_factory=dict)
    total_events: int = 0
    roster_entries: int = 0
    errors: List[str] = Field(default_factory=list)


class Corpus(BaseModel):
    stores: Dict[str, CourseStore] = Field(default_factory=dict)
    roster: CertificationRoster = Field(default_factory=CertificationRoster)
    report: LoadReport = Field(default_factory=LoadReport)


# --- pair timing ---------------------------------------------------------

TimestampPolicy = Literal["earliest", "latest"]


class ItemTimes(BaseModel):
    """Canonical per-item times of one account: show-answer (harvest side) and correct submission (master side)."""
    model_config = ConfigDict(frozen=True)

    show: Dict[str, int] = Field(default_factory=dict)
    correct: Dict[str, int] = Field(default_factory=dict)


class DeltaSeries(BaseModel):
    """Signed master-minus-harvester delays in seconds over the items both sides have."""
    model_config = ConfigDict(frozen=True)

    items: Tuple[str, ...] = ()
    deltas: Tuple[float, ...] = ()
    n: int = 0
    x: int = 0

    @model_validator(mode="after")
    def _counts_match(self):
        if self.n != len(self.deltas) or len(self.items) != len(self.deltas):
            raise ValueError("n must equal the number of deltas")
        if self.x != sum(1 for d in self.deltas if d > 0):
            raise ValueError("x must count strictly positive deltas")
        return self


# --- Bayesian criterion ----------------------------------------------------

class PriorConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(default=0.5, gt=0)
    beta: float = Field(default=0.5, gt=0)


class PosteriorParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    a: float = Field(gt=0)
    b: float = Field(gt=0)


class CriterionConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    pi_threshold: float = Field(default=0.9, gt=0, lt=1)
    confidence: float = Field(default=0.9, gt=0, lt=1)


# --- IP linkage ------------------------------------------------------------

class ModalIpRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    account: str
    course: str
    ip: str
    observation_count: int = Field(ge=1)


class IpGroupPartition(BaseModel):
    model_config = ConfigDict(frozen=True)

    group_of: Dict[str, str] = Field(default_factory=dict)
    members: Dict[str, FrozenSet[str]] = Field(default_factory=dict)
    group_account_count: Dict[str, int] = Field(default_factory=dict)

    def group_size(self, account: str) -> int:
        group = self.group_of.get(account)
        return self.group_account_count[group] if group is not None else 0

    def as_sets(self) -> FrozenSet[FrozenSet[str]]:
        return frozenset(self.members.values())


GroupSizeRule = Literal["at_least", "exceeds"]


# --- detection -------------------------------------------------------------

class FilterConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    prior: PriorConfig = Field(default_factory=PriorConfig)
    criterion: CriterionConfig = Field(default_factory=CriterionConfig)
    percentile_q: float = Field(default=0.9, gt=0, le=1)
    cutoff_seconds: float = Field(default=300.0, gt=0)
    max_group_accounts: int = Field(default=10, ge=2)
    group_size_rule: GroupSizeRule = "at_least"
    min_common_items: int = Field(default=1, ge=0)
    timestamp_policy: TimestampPolicy = "earliest"


class FilterVerdicts(BaseModel):
    model_config = ConfigDict(frozen=True)

    bayesian: bool = False
    cutoff: bool = False
    certification: bool = False
    shared_ip: bool = False
    group_size: bool = False

    def passed(self) -> bool:
        return self.bayesian and self.cutoff and self.certification and self.shared_ip and self.group_size


class Detection(BaseModel):
    model_config = ConfigDict(frozen=True)

    course: str
    harvester: str
    master: str
    n: int = Field(ge=0)
    x: int = Field(ge=0)
    p90_seconds: Optional[float] = None
    posterior_prob: float
    filter_verdicts: FilterVerdicts
    is_cameo: bool
    username_similarity: float = 0.0
    note: Optional[str] = None

    @model_validator(mode="after")
    def _conjunction(self):
        if self.is_cameo != self.filter_verdicts.passed():
            raise ValueError("is_cameo must equal the conjunction of the five verdicts")
        return self

    @property
    def triple(self) -> Tuple[str, str, str]:
        return (self.harvester, self.master, self.course)


class CourseCounts(BaseModel):
    certified_count: int = 0
    cameo_count: int = 0
    cameo_fraction: float = 0.0

    @model_validator(mode="after")
    def _bounded(self):
        if self.cameo_count > self.certified_count:
            raise ValueError("cameo_count cannot exceed certified_count")
        return self


class AggregateReport(BaseModel):
    cameo_certificates: int = 0
    unique_cameo_users: int = 0
    harvester_accounts: int = 0
    total_certificates: int = 0
    courses_with_cameo: int = 0
    cameo_fraction_overall: float = 0.0
    cameo_fraction_affected_courses: float = 0.0
    per_course: Dict[str, CourseCounts] = Field(default_factory=dict)


class DetectionRun(BaseModel):
    detections: List[Detection] = Field(default_factory=list)
    candidates: List[Detection] = Field(default_factory=list)
    report: AggregateReport = Field(default_factory=AggregateReport)


# --- analytics -------------------------------------------------------------

class SweepResult(BaseModel):
    grid: List[float]
    cumulative_detections: List[int]
    histogram: List[int]

    @model_validator(mode="after")
    def _cumulative_consistent(self):
        running = 0
        for cumulative, binned in zip(self.cumulative_detections, self.histogram):
            running += binned
            if cumulative != running:
                raise ValueError("cumulative detections must equal the running histogram sum")
        return self


class MultiCertRow(BaseModel):
    min_certificates: int
    earners: int
    earners_with_cameo: int
    fraction: float


class PreventionRow(BaseModel):
    prevention: bool
    courses: int
    certified: int
    cameo: int
    typical_user_rate: float
    typical_course_rate: float


# --- synthetic corpora -------------------------------------------------------

class BenignKind(str, Enum):
    INDEPENDENT_ASYNC = "independent_async"
    SYNCHRONIZED = "synchronized"
    ORDERED_OFFSET = "ordered_offset"


class BenignProfile(BaseModel):
    """Timing of a benign cohort. Defaults are engineering choices, not measured values."""
    model_config = ConfigDict(frozen=True)

    kind: BenignKind
    items: int = Field(default=141, ge=1)
    start_us: int = 1393632000 * 10**6
    window_seconds: float = Field(default=60 * 86400.0, gt=0)
    item_spacing_seconds: float = Field(default=120.0, gt=0)
    show_delay_seconds: float = Field(default=600.0, gt=0)
    show_fraction: float = Field(default=1.0, gt=0, le=1)
    offset_seconds: float = Field(default=7200.0, gt=0)
    jitter_seconds: float = Field(default=10.0, gt=0)
    household_size: int = Field(default=2, ge=1)
    router_accounts: int = Field(default=0, ge=0)
    roaming_ip_rate: float = Field(default=0.05, ge=0, lt=0.5)
    # show-answer embargoed until this time (prevention courses)
    embargo_until_us: Optional[int] = None

    @model_validator(mode="after")
    def _jitter_below_offset(self):
        if self.kind == BenignKind.ORDERED_OFFSET and self.jitter_seconds >= self.offset_seconds:
            raise ValueError("jitter_seconds must be smaller than offset_seconds")
        return self


class CameoStrategy(str, Enum):
    ALTERNATING = "alternating"
    CLUSTERED = "clustered"


class CameoPlan(BaseModel):
    model_config = ConfigDict(frozen=True)

    strategy: CameoStrategy = CameoStrategy.ALTERNATING
    lag_distribution: Literal["exponential", "constant"] = "exponential"
    lag_mean_seconds: float = Field(default=30.0, gt=0)
    items: int = Field(default=141, ge=1)
    shared_ip: str = "192.0.2.1"
    cluster_size: int = Field(default=10, ge=1)
    harvester: str = "harvester"
    master: str = "master"
    start_us: int = 1393632000 * 10**6


class PlantedPair(BaseModel):
    model_config = ConfigDict(frozen=True)

    harvester: str
    master: str
    course: str
    strategy: CameoStrategy
    lags_seconds: Tuple[float, ...] = ()

    @property
    def triple(self) -> Tuple[str, str, str]:
        return (self.harvester, self.master, self.course)


AccountLabel = Literal["benign", "cameo-master", "cameo-harvester"]


class GroundTruth(BaseModel):
    planted: List[PlantedPair] = Field(default_factory=list)
    labels: Dict[str, AccountLabel] = Field(default_factory=dict)
    certified: List[Tuple[str, str]] = Field(default_factory=list)
    prevention_courses: List[str] = Field(default_factory=list)

    def planted_triples(self) -> FrozenSet[Tuple[str, str, str]]:
        return frozenset(p.triple for p in self.planted)


class SyntheticCorpus(BaseModel):
    events: List[Event] = Field(default_factory=list)
    roster: CertificationRoster = Field(default_factory=CertificationRoster)
    metadata: List[CourseMetadata] = Field(default_factory=list)
    truth: GroundTruth = Field(default_factory=GroundTruth)


class MissedPair(BaseModel):
    harvester: str
    master: str
    course: str
    detection: Optional[Detection] = None


class EvaluationReport(BaseModel):
    precision: float
    recall: float
    true_positives: int
    predicted: int
    planted: int
    zero_predictions: bool = False
    false_positives: List[Detection] = Field(default_factory=list)
    false_negatives: List[MissedPair] = Field(default_factory=list)


# --- run configuration -------------------------------------------------------

class RunConfig(BaseModel):
    """Flat, fully resolved configuration of one command invocation."""
    model_config = ConfigDict(extra="forbid")

    # Bayesian criterion and filters
    alpha: float = Field(default=0.5, gt=0)
    beta: float = Field(default=0.5, gt=0)
    pi_threshold: float = Field(default=0.9, gt=0, lt=1)
    confidence: float = Field(default=0.9, gt=0, lt=1)
    percentile_q: float = Field(default=0.9, gt=0, le=1)
    cutoff_seconds: float = Field(default=300.0, gt=0)
    max_group_accounts: int = Field(default=10, ge=2)
    group_size_rule: GroupSizeRule = "at_least"
    min_common_items: int = Field(default=1, ge=0)
    timestamp_policy: TimestampPolicy = "earliest"

    # ingestion
    max_error_rate: float = Field(default=0.0, ge=0, le=1)
    window_start: Optional[str] = None
    window_end: Optional[str] = None

    # paths
    events: Optional[str] = None
    roster: Optional[str] = None
    courses: Optional[str] = None
    detections: Optional[str] = None
    truth: Optional[str] = None
    out: str = "out"

    # analytics
    sweep_max_seconds: float = Field(default=3600.0, gt=0)
    sweep_step_seconds: float = Field(default=30.0, gt=0)
    multicert_thresholds: List[int] = Field(default_factory=lambda: [1, 5, 10, 15, 20, 25, 30])
    repeat_offender_min: int = Field(default=5, ge=1)
    write_candidates: bool = False

    # synthetic corpora
    n_courses: int = Field(default=1, ge=1)
    benign_accounts: int = Field(default=500, ge=0)
    cameo_pairs: int = Field(default=50, ge=0)
    items: int = Field(default=141, ge=1)
    async_share: float = Field(default=0.6, ge=0, le=1)
    sync_share: float = Field(default=0.2, ge=0, le=1)
    clustered_share: float = Field(default=0.5, ge=0, le=1)
    repeat_master_share: float = Field(default=0.2, ge=0, le=1)
    prevention_courses: int = Field(default=0, ge=0)
    household_size: int = Field(default=2, ge=1)
    router_accounts: int = Field(default=12, ge=0)
    lag_mean_seconds: float = Field(default=30.0, gt=0)
    offset_seconds: float = Field(default=7200.0, gt=0)
    jitter_seconds: float = Field(default=10.0, gt=0)
    window_days: float = Field(default=60.0, gt=0)
    roaming_ip_rate: float = Field(default=0.05, ge=0, lt=0.5)
    synth_start: str = "2014-03-01T00:00:00Z"

    # execution
    jobs: int = Field(default=0, ge=0)
    seed: int = 1

    @field_validator("multicert_thresholds", mode="before")
    @classmethod
    def _split_thresholds(cls, value):
        if isinstance(value, str):
            return [int(part) for part in value.replace(" ", "").split(",") if part]
        return value

    @model_validator(mode="after")
    def _shares_fit(self):
        if self.async_share + self.sync_share > 1:
            raise ValueError("async_share + sync_share must not exceed 1")
        return self

    def filter_config(self) -> FilterConfig:
        return FilterConfig(
            prior=PriorConfig(alpha=self.alpha, beta=self.beta),
            criterion=CriterionConfig(pi_threshold=self.pi_threshold, confidence=self.confidence),
            percentile_q=self.percentile_q,
            cutoff_seconds=self.cutoff_seconds,
            max_group_accounts=self.max_group_accounts,
            group_size_rule=self.group_size_rule,
            min_common_items=self.min_common_items,
            timestamp_policy=self.timestamp_policy,
        )
