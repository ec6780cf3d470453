"""
Output artifact writers, one per artifact kind, plus readers for the
artifacts that later commands consume (detections, ground truth)
"""
import csv
import io
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

from .clickstream import format_event_line
from .schema import (
    AggregateReport,
    CertificationRoster,
    CourseMetadata,
    Detection,
    EvaluationReport,
    Event,
    GroundTruth,
    IpGroupPartition,
    MultiCertRow,
    PreventionRow,
    SweepResult,
)


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _fraction(value: float) -> str:
    return f"{value:.6f}"


def _flag(value: bool) -> str:
    return "true" if value else "false"


class ArtifactWriter(ABC):
    """Abstract base class for output artifacts"""

    @abstractmethod
    def get_output_filename(self) -> str:
        """Return the file name inside the output directory"""
        pass

    @abstractmethod
    def render(self, payload: Any) -> str:
        """Render the payload as the file's full text"""
        pass

    @abstractmethod
    def get_artifact_name(self) -> str:
        """Return human-readable artifact name"""
        pass


class DetectionsWriter(ArtifactWriter):
    """Flagged pairs as JSON lines with every diagnostic field"""

    def get_output_filename(self) -> str:
        return "detections.jsonl"

    def render(self, payload: List[Detection]) -> str:
        return "".join(d.model_dump_json() + "\n" for d in payload)

    def get_artifact_name(self) -> str:
        return "Detections"


class CandidatesWriter(DetectionsWriter):
    def get_output_filename(self) -> str:
        return "candidates.jsonl"

    def get_artifact_name(self) -> str:
        return "Classified candidate pairs"


class CourseSummaryWriter(ArtifactWriter):
    def get_output_filename(self) -> str:
        return "course_summary.csv"

    def render(self, payload: AggregateReport) -> str:
        rows = [(course, c.certified_count, c.cameo_count, _fraction(c.cameo_fraction))
                for course, c in sorted(payload.per_course.items())]
        return _csv_text(("course", "certified_count", "cameo_count", "cameo_fraction"), rows)

    def get_artifact_name(self) -> str:
        return "Per-course summary"


class AggregateWriter(ArtifactWriter):
    def get_output_filename(self) -> str:
        return "aggregate.json"

    def render(self, payload: AggregateReport) -> str:
        return payload.model_dump_json(indent=2) + "\n"

    def get_artifact_name(self) -> str:
        return "Aggregate report"


class IpGroupsWriter(ArtifactWriter):
    """Audit trail of the IP linkage: every account with its group and the group's size"""

    def get_output_filename(self) -> str:
        return "ip_groups.csv"

    def render(self, payload: IpGroupPartition) -> str:
        rows = [(account, group, payload.group_account_count[group])
                for account, group in sorted(payload.group_of.items())]
        return _csv_text(("account", "group_id", "group_size"), rows)

    def get_artifact_name(self) -> str:
        return "IP groups"


class SweepWriter(ArtifactWriter):
    def get_output_filename(self) -> str:
        return "sweep.csv"

    def render(self, payload: SweepResult) -> str:
        rows = [(f"{g:g}", c, h) for g, c, h in
                zip(payload.grid, payload.cumulative_detections, payload.histogram)]
        return _csv_text(("cutoff_seconds", "cumulative", "histogram_bin"), rows)

    def get_artifact_name(self) -> str:
        return "Cutoff sweep"


class MultiCertWriter(ArtifactWriter):
    def get_output_filename(self) -> str:
        return "multicert.csv"

    def render(self, payload: List[MultiCertRow]) -> str:
        rows = [(r.min_certificates, r.earners, r.earners_with_cameo, _fraction(r.fraction)) for r in payload]
        return _csv_text(("min_certificates", "earners", "earners_with_cameo", "fraction"), rows)

    def get_artifact_name(self) -> str:
        return "Multi-certificate table"


class PreventionWriter(ArtifactWriter):
    def get_output_filename(self) -> str:
        return "prevention.csv"

    def render(self, payload: List[PreventionRow]) -> str:
        rows = [(_flag(r.prevention), r.courses, r.certified, r.cameo,
                 _fraction(r.typical_user_rate), _fraction(r.typical_course_rate)) for r in payload]
        return _csv_text(("prevention", "courses", "certified", "cameo",
                          "typical_user_rate", "typical_course_rate"), rows)

    def get_artifact_name(self) -> str:
        return "Prevention breakdown"


class EvaluationWriter(ArtifactWriter):
    def get_output_filename(self) -> str:
        return "evaluation.json"

    def render(self, payload: EvaluationReport) -> str:
        return payload.model_dump_json(indent=2) + "\n"

    def get_artifact_name(self) -> str:
        return "Evaluation report"


class TruthWriter(ArtifactWriter):
    def get_output_filename(self) -> str:
        return "truth.json"

    def render(self, payload: GroundTruth) -> str:
        return payload.model_dump_json(indent=2) + "\n"

    def get_artifact_name(self) -> str:
        return "Ground truth"


class EventsWriter(ArtifactWriter):
    """Same JSON-lines event format the loader reads"""

    def get_output_filename(self) -> str:
        return "events.jsonl"

    def render(self, payload: List[Event]) -> str:
        return "".join(format_event_line(e) + "\n" for e in payload)

    def get_artifact_name(self) -> str:
        return "Event log"


class RosterWriter(ArtifactWriter):
    def get_output_filename(self) -> str:
        return "roster.csv"

    def render(self, payload: CertificationRoster) -> str:
        rows = [(account, course, _flag(cert)) for (account, course), cert in sorted(payload.entries.items())]
        return _csv_text(("account", "course", "certified"), rows)

    def get_artifact_name(self) -> str:
        return "Certification roster"


class CourseMetadataWriter(ArtifactWriter):
    def get_output_filename(self) -> str:
        return "courses.csv"

    def render(self, payload: List[CourseMetadata]) -> str:
        rows = [(m.course, _flag(m.prevention)) for m in sorted(payload, key=lambda m: m.course)]
        return _csv_text(("course", "prevention"), rows)

    def get_artifact_name(self) -> str:
        return "Course metadata"


# Registry of artifact kinds
ARTIFACT_WRITERS: Dict[str, ArtifactWriter] = {
    "detections": DetectionsWriter(),
    "candidates": CandidatesWriter(),
    "course_summary": CourseSummaryWriter(),
    "aggregate": AggregateWriter(),
    "ip_groups": IpGroupsWriter(),
    "sweep": SweepWriter(),
    "multicert": MultiCertWriter(),
    "prevention": PreventionWriter(),
    "evaluation": EvaluationWriter(),
    "truth": TruthWriter(),
    "events": EventsWriter(),
    "roster": RosterWriter(),
    "courses": CourseMetadataWriter(),
}


def get_available_artifacts() -> Dict[str, str]:
    """Return mapping of artifact kinds to human-readable names"""
    return {key: writer.get_artifact_name() for key, writer in ARTIFACT_WRITERS.items()}


def write_artifact(kind: str, payload: Any, output_dir: str = ".") -> str:
    """Render one artifact into the output directory and return its path"""
    if kind not in ARTIFACT_WRITERS:
        raise ValueError(f"Unknown artifact: {kind}. Available: {list(ARTIFACT_WRITERS.keys())}")

    writer = ARTIFACT_WRITERS[kind]
    output_path = Path(output_dir) / writer.get_output_filename()
    output_path.parent.mkdir(parents=True, exist_ok=True)

    with open(output_path, "w", encoding="utf-8", newline="") as f:
        f.write(writer.render(payload))

    return str(output_path)


def _require(path: str) -> Path:
    file_path = Path(path)
    if not file_path.is_file():
        raise FileNotFoundError(f"input file not found: {path}")
    return file_path


def read_detections(path: str) -> List[Detection]:
    with open(_require(path), "r", encoding="utf-8") as f:
        return [Detection.model_validate_json(line) for line in f if line.strip()]


def read_ground_truth(path: str) -> GroundTruth:
    return GroundTruth.model_validate_json(_require(path).read_text(encoding="utf-8"))
