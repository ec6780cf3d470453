#!/usr/bin/env python3
"""
CameoScan - detection of answer harvesting with multiple accounts
Command-line entry point for detection, synthetic corpora, evaluation and analyses
"""
import argparse
import sys
from typing import Callable, Dict, List, Optional, Tuple

from cameo.analytics import (
    cutoff_sweep,
    default_grid,
    multi_cert_table,
    prevention_breakdown,
    recurring_pairs,
    repeat_offenders,
)
from cameo.artifacts import get_available_artifacts, read_detections, read_ground_truth, write_artifact
from cameo.clickstream import CorpusLoadError, load_corpus_files, load_course_metadata_file, load_roster_file
from cameo.config import (
    ConfigError,
    analysis_window,
    check_output_dir,
    configure_logging,
    effective_jobs,
    load_run_config,
    render_config,
)
from cameo.detector import aggregate, classify_pair, detect
from cameo.ip_linkage import build_ip_groups, modal_ip_records
from cameo.schema import Corpus, DetectionRun, IpGroupPartition, RunConfig
from cameo.synthgen import build_corpus, evaluate
from cameo.templates import render_detect_summary, render_evaluation, render_report, render_sweep, render_synth_summary


def print_saved(paths: List[str]):
    for path in paths:
        print(f"📁 {path}")


def load_inputs(config: RunConfig) -> Tuple[Corpus, IpGroupPartition]:
    """Load events and roster and build the cross-course IP groups"""
    if not config.events or not config.roster:
        raise ConfigError("events and roster are required (--events PATH --roster PATH)")
    print(f"🔍 Loading {config.events} and {config.roster}...")
    corpus = load_corpus_files(config.events, config.roster, config.max_error_rate, analysis_window(config))
    if corpus.report.errors:
        print(f"⚠️  Skipped {len(corpus.report.errors)} malformed records")
    partition = build_ip_groups(modal_ip_records(corpus.stores))
    return corpus, partition


def run_detection(config: RunConfig) -> Tuple[Corpus, IpGroupPartition, DetectionRun]:
    corpus, partition = load_inputs(config)
    print(f"🔄 Classifying pairs in {len(corpus.stores)} courses...")
    run = detect(corpus.stores, corpus.roster, partition, config.filter_config(), effective_jobs(config))
    return corpus, partition, run


def cmd_detect(config: RunConfig) -> int:
    _, partition, run = run_detection(config)
    paths = [
        write_artifact("detections", run.detections, config.out),
        write_artifact("course_summary", run.report, config.out),
        write_artifact("aggregate", run.report, config.out),
        write_artifact("ip_groups", partition, config.out),
    ]
    if config.write_candidates:
        paths.append(write_artifact("candidates", run.candidates, config.out))
    print()
    print(render_detect_summary(run.report, len(run.candidates)), end="")
    print_saved(paths)
    return 0


def cmd_synth(config: RunConfig) -> int:
    print(f"🔄 Generating {config.n_courses} synthetic course(s) with seed {config.seed}...")
    corpus = build_corpus(config)
    paths = [
        write_artifact("events", corpus.events, config.out),
        write_artifact("roster", corpus.roster, config.out),
        write_artifact("courses", corpus.metadata, config.out),
        write_artifact("truth", corpus.truth, config.out),
    ]
    print(render_synth_summary(corpus), end="")
    print_saved(paths)
    return 0


def cmd_evaluate(config: RunConfig) -> int:
    if not config.detections or not config.truth:
        raise ConfigError("evaluate needs --detections PATH and --truth PATH")
    detections = read_detections(config.detections)
    truth = read_ground_truth(config.truth)

    diagnose = None
    if config.events and config.roster:
        corpus, partition = load_inputs(config)
        filters = config.filter_config()

        def diagnose(harvester, master, course):
            store = corpus.stores.get(course)
            if store is None:
                return None
            return classify_pair(harvester, master, store, corpus.roster, partition, filters)

    evaluation = evaluate(detections, truth, diagnose)
    print(render_evaluation(evaluation), end="")
    print_saved([write_artifact("evaluation", evaluation, config.out)])
    return 0


def cmd_sweep(config: RunConfig) -> int:
    _, _, run = run_detection(config)
    grid = default_grid(config.sweep_max_seconds, config.sweep_step_seconds)
    sweep = cutoff_sweep(run.candidates, grid)
    print(render_sweep(sweep), end="")
    print_saved([write_artifact("sweep", sweep, config.out)])
    return 0


def cmd_report(config: RunConfig) -> int:
    if config.detections:
        if not config.roster:
            raise ConfigError("report needs --roster PATH")
        detections = read_detections(config.detections)
        roster = load_roster_file(config.roster, config.max_error_rate)
        report = aggregate(detections, roster)
    else:
        corpus, _, run = run_detection(config)
        detections, roster, report = run.detections, corpus.roster, run.report

    metadata = load_course_metadata_file(config.courses) if config.courses else {}
    multicert = multi_cert_table(detections, roster, config.multicert_thresholds)
    prevention = prevention_breakdown(report, metadata)
    print(render_report(report, multicert, prevention,
                        repeat_offenders(detections, config.repeat_offender_min),
                        recurring_pairs(detections), config.repeat_offender_min), end="")
    print_saved([
        write_artifact("multicert", multicert, config.out),
        write_artifact("prevention", prevention, config.out),
        write_artifact("aggregate", report, config.out),
    ])
    return 0


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    "detect": cmd_detect,
    "synth": cmd_synth,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "report": cmd_report,
}

HELP = {
    "detect": "classify every candidate pair and write detections",
    "synth": "generate a labeled synthetic corpus",
    "evaluate": "score detections against planted ground truth",
    "sweep": "count detections over a grid of percentile cutoffs",
    "report": "aggregate prevalence, multi-certificate and prevention tables",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="flat 'key = value' config file")
    common.add_argument("--print-config", action="store_true", help="print the resolved configuration and exit")
    common.add_argument("--events", help="JSON-lines event log")
    common.add_argument("--roster", help="CSV certification roster (account,course,certified)")
    common.add_argument("--courses", help="optional CSV course metadata (course,prevention)")
    common.add_argument("--detections", help="detections JSON-lines file")
    common.add_argument("--truth", help="ground-truth JSON file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int, help="worker processes (0 = one per core, 1 = serial)")
    common.add_argument("--cutoff-seconds", dest="cutoff_seconds", type=float)
    common.add_argument("--pi-threshold", dest="pi_threshold", type=float)
    common.add_argument("--confidence", type=float)
    common.add_argument("--alpha", type=float)
    common.add_argument("--beta", type=float)
    common.add_argument("--max-group", dest="max_group_accounts", type=int)
    common.add_argument("--write-candidates", dest="write_candidates", action="store_true",
                        help="also write every classified candidate pair")

    parser = argparse.ArgumentParser(
        description="Detect CAMEO (answer harvesting with multiple accounts) in course clickstreams",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=f"""
Artifacts:
{chr(10).join(f"  {key:<15} {name}" for key, name in get_available_artifacts().items())}

Example usage:
  python3 cameoscan.py synth --out corpus --seed 7
  python3 cameoscan.py detect --events corpus/events.jsonl --roster corpus/roster.csv --out run
  python3 cameoscan.py evaluate --detections run/detections.jsonl --truth corpus/truth.json --out run
  python3 cameoscan.py sweep --events corpus/events.jsonl --roster corpus/roster.csv --out run

Set CAMEO_LOG=error|warn|info|debug for log verbosity.
        """,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        command = sub.add_parser(name, parents=[common], help=HELP[name], description=HELP[name],
                                 argument_default=argparse.SUPPRESS)
        if name == "synth":
            command.add_argument("--n-courses", dest="n_courses", type=int)
            command.add_argument("--benign-accounts", dest="benign_accounts", type=int)
            command.add_argument("--cameo-pairs", dest="cameo_pairs", type=int)
            command.add_argument("--items", type=int)
            command.add_argument("--prevention-courses", dest="prevention_courses", type=int)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config", None)
    print_config = args.pop("print_config", False)

    try:
        config = load_run_config(config_path, args)
        if print_config:
            print(render_config(config), end="")
            return 0
        check_output_dir(config.out)
        return COMMANDS[command](config)
    except KeyboardInterrupt:
        print("\n\n👋 Cancelled. Partial outputs may remain in the output directory.")
        return 0
    except CorpusLoadError as e:
        print(f"\n❌ Error: {e}")
        for message in e.errors[:10]:
            print(f"   {message}")
        return 1
    except (ConfigError, FileNotFoundError, ValueError) as e:
        print(f"\n❌ Error: {e}")
        return 1
    except OSError as e:
        print(f"\n❌ Error: cannot write outputs: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
