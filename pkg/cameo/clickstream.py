"""
Clickstream ingestion - parse JSON-lines event logs and CSV certification
rosters into immutable per-course stores
"""
import csv
import ipaddress
import json
import logging
import math
from datetime import datetime, timedelta, timezone
from decimal import Decimal, InvalidOperation, ROUND_HALF_EVEN
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

from dateutil.parser import isoparse
from pydantic import ValidationError

from .schema import (
    CertificationRoster,
    Corpus,
    CourseMetadata,
    CourseStore,
    Event,
    EventKind,
    LoadReport,
)

logger = logging.getLogger(__name__)

EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
MICROS = 10**6

KIND_NAMES = {
    "show_answer": EventKind.SHOW_ANSWER,
    "correct_submission": EventKind.CORRECT_SUBMISSION,
}

REQUIRED_FIELDS = ("account", "course", "kind", "time", "ip")
ROSTER_HEADER = ["account", "course", "certified"]
COURSES_HEADER = ["course", "prevention"]
TRUTHY = {"true": True, "1": True, "false": False, "0": False}

Window = Tuple[Optional[int], Optional[int]]


class RecordError(ValueError):
    """A single malformed input record."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number
        self.message = message


class CorpusLoadError(ValueError):
    """Loading failed as a whole; carries every record error seen."""

    def __init__(self, message: str, errors: Optional[List[str]] = None):
        super().__init__(message)
        self.errors = errors or []


def parse_timestamp(value) -> int:
    """RFC 3339 text or epoch seconds (int or decimal) -> microseconds since epoch."""
    if isinstance(value, bool) or value is None:
        raise ValueError(f"unparseable timestamp {value!r}")
    if isinstance(value, int):
        return value * MICROS
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite timestamp {value!r}")
        value = Decimal(repr(value))
    if isinstance(value, str):
        text = value.strip()
        try:
            value = Decimal(text)
        except InvalidOperation:
            try:
                moment = isoparse(text)
            except (ValueError, OverflowError) as exc:
                raise ValueError(f"unparseable timestamp {text!r}") from exc
            if moment.tzinfo is None:
                moment = moment.replace(tzinfo=timezone.utc)
            return (moment - EPOCH) // timedelta(microseconds=1)
    if isinstance(value, Decimal):
        if not value.is_finite():
            raise ValueError(f"non-finite timestamp {value}")
        return int((value * MICROS).to_integral_value(rounding=ROUND_HALF_EVEN))
    raise ValueError(f"unparseable timestamp {value!r}")


def format_timestamp(time_us: int) -> str:
    moment = EPOCH + timedelta(microseconds=time_us)
    spec = "microseconds" if time_us % MICROS else "seconds"
    return moment.isoformat(timespec=spec).replace("+00:00", "Z")


def _canonical_ip(text: str) -> str:
    if not text:
        return ""
    return str(ipaddress.ip_address(text.strip()))


def parse_event_line(line: str, line_number: int = 1, window: Optional[Window] = None) -> Event:
    """Parse one JSON-lines record into a validated Event, or raise RecordError"""
    try:
        record = json.loads(line, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise RecordError(line_number, f"invalid JSON ({exc.msg})") from exc
    if not isinstance(record, dict):
        raise RecordError(line_number, "record is not a JSON object")

    for field in REQUIRED_FIELDS:
        if field not in record:
            raise RecordError(line_number, f"missing {field}")
    for field in ("account", "course", "kind", "ip"):
        if not isinstance(record[field], str):
            raise RecordError(line_number, f"{field} must be a string")
    if not record["account"]:
        raise RecordError(line_number, "empty account")
    if not record["course"]:
        raise RecordError(line_number, "empty course")

    kind = KIND_NAMES.get(record["kind"], EventKind.OTHER)
    item = record.get("item", "")
    if not isinstance(item, str):
        raise RecordError(line_number, "item must be a string")
    if kind != EventKind.OTHER and not item:
        raise RecordError(line_number, "missing item")

    try:
        time_us = parse_timestamp(record["time"])
    except ValueError as exc:
        raise RecordError(line_number, str(exc)) from exc
    if window is not None:
        start, end = window
        if (start is not None and time_us < start) or (end is not None and time_us > end):
            raise RecordError(line_number, "time outside analysis window")

    try:
        ip = _canonical_ip(record["ip"])
    except ValueError as exc:
        raise RecordError(line_number, f"invalid ip {record['ip']!r}") from exc

    try:
        return Event(account=record["account"], course=record["course"], item=item,
                     kind=kind, time_us=time_us, ip=ip)
    except ValidationError as exc:
        raise RecordError(line_number, exc.errors()[0]["msg"]) from exc


def format_event_line(event: Event) -> str:
    return json.dumps({
        "account": event.account,
        "course": event.course,
        "item": event.item,
        "kind": event.kind.value,
        "time": format_timestamp(event.time_us),
        "ip": event.ip,
    })


def parse_roster_lines(lines: Iterable[str]) -> Tuple[CertificationRoster, List[str], int]:
    """Returns (roster, record errors, records seen). Duplicate entries abort the load."""
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None:
        return CertificationRoster(), [], 0
    if [h.strip() for h in header] != ROSTER_HEADER:
        raise CorpusLoadError(f"roster header must be {','.join(ROSTER_HEADER)}, got {','.join(header)}")

    entries: Dict[Tuple[str, str], bool] = {}
    errors: List[str] = []
    seen = 0
    for line_number, row in enumerate(reader, start=2):
        if not row or not any(cell.strip() for cell in row):
            continue
        seen += 1
        if len(row) != 3:
            errors.append(str(RecordError(line_number, "expected 3 columns")))
            continue
        account, course, certified = (cell.strip() for cell in row)
        if not account or not course:
            errors.append(str(RecordError(line_number, "empty account or course")))
            continue
        if certified.lower() not in TRUTHY:
            errors.append(str(RecordError(line_number, f"bad certified value {certified!r}")))
            continue
        key = (account, course)
        if key in entries:
            raise CorpusLoadError(f"duplicate roster entry ({account}, {course}) at line {line_number}")
        entries[key] = TRUTHY[certified.lower()]
    return CertificationRoster(entries=entries), errors, seen


def partition_events(events: Iterable[Event]) -> Dict[str, CourseStore]:
    """Split events by course; sort by time, keeping input order for ties."""
    by_course: Dict[str, List[Event]] = {}
    for event in events:
        by_course.setdefault(event.course, []).append(event)

    stores = {}
    for course in sorted(by_course):
        ordered = sorted(by_course[course], key=lambda e: e.time_us)
        per_account: Dict[str, List[Event]] = {}
        for event in ordered:
            per_account.setdefault(event.account, []).append(event)
        stores[course] = CourseStore(
            course=course,
            events=tuple(ordered),
            account_events={a: tuple(evs) for a, evs in per_account.items()},
        )
    return stores


def load_corpus(event_lines: Iterable[str], roster_lines: Iterable[str],
                max_error_rate: float = 0.0, window: Optional[Window] = None) -> Corpus:
    """Parse both streams, collect record errors and partition events by course"""
    events: List[Event] = []
    errors: List[str] = []
    records = 0
    for line_number, line in enumerate(event_lines, start=1):
        if not line.strip():
            continue
        records += 1
        try:
            events.append(parse_event_line(line, line_number, window))
        except RecordError as exc:
            errors.append(f"events {exc}")

    roster, roster_errors, roster_records = parse_roster_lines(roster_lines)
    errors.extend(f"roster {e}" for e in roster_errors)
    records += roster_records

    if errors:
        rate = len(errors) / records
        for message in errors[:20]:
            logger.warning("skipped %s", message)
        if rate > max_error_rate:
            raise CorpusLoadError(
                f"{len(errors)} of {records} records malformed "
                f"(rate {rate:.4f} exceeds allowed {max_error_rate:.4f})",
                errors,
            )

    if not events:
        logger.warning("event stream is empty; nothing to analyze")

    stores = partition_events(events)
    counts = {course: len(store.events) for course, store in stores.items()}
    for course, count in counts.items():
        logger.info("course %s: %d events, %d accounts", course, count, len(stores[course].accounts))

    report = LoadReport(event_counts=counts, total_events=len(events),
                        roster_entries=len(roster.entries), errors=errors)
    return Corpus(stores=stores, roster=roster, report=report)


def _open_lines(path: str):
    file_path = Path(path)
    if not file_path.is_file():
        raise FileNotFoundError(f"input file not found: {path}")
    return open(file_path, "r", encoding="utf-8", newline="")


def load_corpus_files(events_path: str, roster_path: str, max_error_rate: float = 0.0,
                      window: Optional[Window] = None) -> Corpus:
    with _open_lines(events_path) as events_file, _open_lines(roster_path) as roster_file:
        return load_corpus(events_file, roster_file, max_error_rate, window)


def load_course_metadata(lines: Iterable[str]) -> Dict[str, CourseMetadata]:
    """Optional `course,prevention` CSV tagging courses that embargo answers or randomize items."""
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None:
        return {}
    if [h.strip() for h in header] != COURSES_HEADER:
        raise CorpusLoadError(f"course metadata header must be {','.join(COURSES_HEADER)}")
    metadata = {}
    for line_number, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2 or row[1].strip().lower() not in TRUTHY:
            raise CorpusLoadError(str(RecordError(line_number, "bad course metadata row")))
        course = row[0].strip()
        metadata[course] = CourseMetadata(course=course, prevention=TRUTHY[row[1].strip().lower()])
    return metadata


def load_course_metadata_file(path: str) -> Dict[str, CourseMetadata]:
    with _open_lines(path) as handle:
        return load_course_metadata(handle)


def load_roster_file(path: str, max_error_rate: float = 0.0) -> CertificationRoster:
    """Roster on its own, for analyses over detections that were written earlier."""
    with _open_lines(path) as handle:
        roster, errors, records = parse_roster_lines(handle)
    if errors and len(errors) / records > max_error_rate:
        raise CorpusLoadError(f"{len(errors)} of {records} roster records malformed", errors)
    for message in errors:
        logger.warning("skipped roster %s", message)
    return roster
