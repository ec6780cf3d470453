"""
Mock course environments for testing detection scenarios
Each scenario gets a small hand-built clickstream, roster and expected detections
"""
from pathlib import Path
from typing import Dict, List

from cameo.clickstream import format_event_line
from cameo.schema import CertificationRoster, Event, EventKind

T0 = 1393632000 * 10**6
SECOND = 10**6

SHOW = EventKind.SHOW_ANSWER
CORRECT = EventKind.CORRECT_SUBMISSION


def ev(account: str, course: str, item: str, kind: EventKind, seconds: float, ip: str) -> Event:
    return Event(account=account, course=course, item=item, kind=kind,
                 time_us=T0 + int(round(seconds * SECOND)), ip=ip)


def harvest_pair(harvester: str, master: str, course: str, lags: List[float], ip: str,
                 spacing: float = 100.0, first_item: int = 0) -> List[Event]:
    """Harvester reveals item i, master submits it lags[i] seconds later"""
    events = []
    for i, lag in enumerate(lags):
        item = f"p{first_item + i:03d}"
        start = i * spacing
        events.append(ev(harvester, course, item, SHOW, start, ip))
        events.append(ev(master, course, item, CORRECT, start + lag, ip))
    return events


def solo_learner(account: str, course: str, items: int, ip: str, offset: float = 50000.0) -> List[Event]:
    events = []
    for i in range(items):
        item = f"p{i:03d}"
        events.append(ev(account, course, item, CORRECT, offset + 300 * i, ip))
        events.append(ev(account, course, item, SHOW, offset + 300 * i + 60, ip))
    return events


def _roster(entries: Dict[tuple, bool]) -> CertificationRoster:
    return CertificationRoster(entries=entries)


def get_mock_course_environment(name: str) -> dict:
    """Return events, roster and expected (harvester, master, course) detections for a scenario"""

    environments = {
        "alternating_cheater": lambda: {
            # classic CAMEO: reveal, then submit half a minute later from the same IP
            "events": harvest_pair("curtis2", "curtis1", "c1", [30.0] * 20, "10.0.0.1")
                      + solo_learner("loner", "c1", 20, "10.0.0.9"),
            "roster": _roster({("curtis1", "c1"): True, ("curtis2", "c1"): False, ("loner", "c1"): True}),
            "expected": {("curtis2", "curtis1", "c1")},
        },
        "synchronized_siblings": lambda: {
            # working side by side: submissions land a few seconds either side of each other
            "events": harvest_pair("sib-a", "sib-b", "c1",
                                   [5.0 if i % 2 else -5.0 for i in range(20)], "10.0.0.2"),
            "roster": _roster({("sib-a", "c1"): False, ("sib-b", "c1"): True}),
            "expected": set(),
        },
        "offset_pair": lambda: {
            # consistently ordered, but two hours apart
            "events": harvest_pair("early", "late", "c1", [7200.0] * 20, "10.0.0.3", spacing=8000.0),
            "roster": _roster({("early", "c1"): False, ("late", "c1"): True}),
            "expected": set(),
        },
        "internet_cafe": lambda: {
            # a cheating-looking pair behind a router shared by twelve accounts
            "events": harvest_pair("cafe-h", "cafe-m", "c1", [20.0] * 20, "10.0.0.4")
                      + [e for k in range(10) for e in solo_learner(f"cafe-{k}", "c1", 5, "10.0.0.4")],
            "roster": _roster({("cafe-h", "c1"): False, ("cafe-m", "c1"): True,
                               **{(f"cafe-{k}", "c1"): k % 2 == 0 for k in range(10)}}),
            "expected": set(),
        },
        "split_ip_cheater": lambda: {
            # different modal IPs in c1, linked through the master's modal IP in c2
            "events": [e.model_copy(update={"ip": "10.0.0.5" if e.account == "split-h" else "10.0.0.6"})
                       for e in harvest_pair("split-h", "split-m", "c1", [40.0] * 20, "0.0.0.0")]
                      + solo_learner("split-m", "c2", 10, "10.0.0.5"),
            "roster": _roster({("split-h", "c1"): False, ("split-m", "c1"): True, ("split-m", "c2"): True}),
            "expected": {("split-h", "split-m", "c1")},
        },
        "twelve_of_twelve": lambda: {
            "events": harvest_pair("h12", "m12", "c1", [10.0] * 12, "10.0.0.7"),
            "roster": _roster({("h12", "c1"): False, ("m12", "c1"): True}),
            "expected": set(),
        },
        "thirteen_of_thirteen": lambda: {
            "events": harvest_pair("h13", "m13", "c1", [10.0] * 13, "10.0.0.8"),
            "roster": _roster({("h13", "c1"): False, ("m13", "c1"): True}),
            "expected": {("h13", "m13", "c1")},
        },
        "two_harvesters": lambda: {
            # one master fed by two harvester accounts on items split between them
            "events": harvest_pair("feeder1", "boss", "c1", [15.0] * 20, "10.0.0.10")
                      + harvest_pair("feeder2", "boss", "c1", [25.0] * 20, "10.0.0.10", first_item=20),
            "roster": _roster({("boss", "c1"): True, ("feeder1", "c1"): False, ("feeder2", "c1"): False}),
            "expected": {("feeder1", "boss", "c1"), ("feeder2", "boss", "c1")},
        },
        "empty": lambda: {
            "events": [],
            "roster": _roster({}),
            "expected": set(),
        },
    }

    if name not in environments:
        raise ValueError(f"Unknown environment: {name}. Available: {list(environments.keys())}")
    return environments[name]()


def event_lines(events: List[Event]) -> List[str]:
    return [format_event_line(e) + "\n" for e in events]


def roster_lines(roster: CertificationRoster) -> List[str]:
    lines = ["account,course,certified\n"]
    for (account, course), certified in sorted(roster.entries.items()):
        lines.append(f"{account},{course},{'true' if certified else 'false'}\n")
    return lines


def write_environment(env: dict, directory: Path) -> Dict[str, str]:
    """Write an environment as events.jsonl and roster.csv and return both paths"""
    directory.mkdir(parents=True, exist_ok=True)
    events_path = directory / "events.jsonl"
    roster_path = directory / "roster.csv"
    events_path.write_text("".join(event_lines(env["events"])), encoding="utf-8")
    roster_path.write_text("".join(roster_lines(env["roster"])), encoding="utf-8")
    return {"events": str(events_path), "roster": str(roster_path)}
