import numpy as np
import pytest

from cameo.clickstream import partition_events
from cameo.detector import (
    FILTER_NAMES,
    CourseIndex,
    PairContext,
    aggregate,
    brute_force_detect,
    classify_pair,
    detect,
    generate_candidates,
)
from cameo.ip_linkage import build_ip_groups, modal_ip_records
from cameo.schema import CertificationRoster, FilterConfig, RunConfig
from cameo.synthgen import build_corpus
from test_environments import get_mock_course_environment

SCENARIOS = [
    "alternating_cheater",
    "synchronized_siblings",
    "offset_pair",
    "internet_cafe",
    "split_ip_cheater",
    "twelve_of_twelve",
    "thirteen_of_thirteen",
    "two_harvesters",
    "empty",
]

SMALL_CORPUS = dict(benign_accounts=12, cameo_pairs=2, items=20, router_accounts=0)


def load_env(name):
    env = get_mock_course_environment(name)
    stores = partition_events(env["events"])
    partition = build_ip_groups(modal_ip_records(stores))
    return env, stores, partition


def synthetic_inputs(seed, **overrides):
    corpus = build_corpus(RunConfig(seed=seed, **{**SMALL_CORPUS, **overrides}))
    stores = partition_events(corpus.events)
    return stores, corpus.roster, build_ip_groups(modal_ip_records(stores))


def triples(run):
    return {d.triple for d in run.detections}


@pytest.mark.parametrize("name", SCENARIOS)
def test_scenarios(name):
    env, stores, partition = load_env(name)
    run = detect(stores, env["roster"], partition, FilterConfig())
    assert triples(run) == env["expected"]


class TestCandidates:
    def test_three_accounts_one_certified(self):
        env, stores, partition = load_env("alternating_cheater")
        roster = CertificationRoster(entries={("curtis1", "c1"): True})
        everyone = build_ip_groups([r.model_copy(update={"ip": "10.0.0.1"})
                                    for r in modal_ip_records(stores)])
        pairs = list(generate_candidates(stores["c1"], roster, everyone, FilterConfig()))
        assert sorted(pairs) == [("curtis2", "curtis1"), ("loner", "curtis1")]

    def test_different_groups_not_paired(self):
        env, stores, partition = load_env("alternating_cheater")
        pairs = list(generate_candidates(stores["c1"], env["roster"], partition, FilterConfig()))
        assert pairs == [("curtis2", "curtis1")]

    def test_large_group_not_paired(self):
        env, stores, partition = load_env("internet_cafe")
        assert partition.group_size("cafe-m") == 12
        assert list(generate_candidates(stores["c1"], env["roster"], partition, FilterConfig())) == []

    def test_group_rule_exceeds_keeps_group_at_threshold(self):
        env, stores, partition = load_env("internet_cafe")
        config = FilterConfig(max_group_accounts=12, group_size_rule="exceeds")
        assert ("cafe-h", "cafe-m") in set(generate_candidates(stores["c1"], env["roster"], partition, config))

    def test_min_common_items(self):
        env, stores, partition = load_env("alternating_cheater")
        config = FilterConfig(min_common_items=21)
        assert list(generate_candidates(stores["c1"], env["roster"], partition, config)) == []


class TestClassifyPair:
    def test_offset_pair_fails_only_cutoff(self):
        env, stores, partition = load_env("offset_pair")
        d = classify_pair("early", "late", stores["c1"], env["roster"], partition, FilterConfig())
        assert d.filter_verdicts.bayesian
        assert not d.filter_verdicts.cutoff
        assert d.p90_seconds == pytest.approx(7200.0)
        assert not d.is_cameo

    def test_synchronized_pair_fails_bayesian(self):
        env, stores, partition = load_env("synchronized_siblings")
        d = classify_pair("sib-a", "sib-b", stores["c1"], env["roster"], partition, FilterConfig())
        assert (d.n, d.x) == (20, 10)
        assert not d.filter_verdicts.bayesian
        assert d.filter_verdicts.cutoff

    def test_planted_pair_passes_everything(self):
        env, stores, partition = load_env("alternating_cheater")
        d = classify_pair("curtis2", "curtis1", stores["c1"], env["roster"], partition, FilterConfig())
        assert d.is_cameo
        assert all(d.filter_verdicts.model_dump().values())
        assert d.username_similarity == pytest.approx(1 - 1 / 7)
        assert d.note is None

    def test_no_common_items(self):
        env, stores, partition = load_env("alternating_cheater")
        # curtis1 never reveals an answer, so nothing lines up in this direction
        d = classify_pair("curtis1", "curtis2", stores["c1"], env["roster"], partition,
                          FilterConfig(min_common_items=0))
        assert d.n == 0
        assert not d.filter_verdicts.bayesian and not d.filter_verdicts.cutoff
        assert d.p90_seconds is None
        assert "no common items" in d.note


class TestAggregate:
    def test_master_with_two_harvesters_counts_once(self):
        env, stores, partition = load_env("two_harvesters")
        report = detect(stores, env["roster"], partition, FilterConfig()).report
        assert report.cameo_certificates == 1
        assert report.unique_cameo_users == 1
        assert report.harvester_accounts == 2
        assert report.per_course["c1"].cameo_fraction == 1.0
        assert report.courses_with_cameo == 1

    def test_empty_corpus(self):
        run = detect({}, CertificationRoster(), build_ip_groups([]), FilterConfig())
        assert run.detections == [] and run.candidates == []
        assert run.report.cameo_certificates == 0
        assert run.report.per_course == {}

    def test_uncertified_only_course_has_zero_fraction(self):
        roster = CertificationRoster(entries={("a", "c9"): False})
        report = aggregate([], roster)
        assert report.per_course["c9"].cameo_fraction == 0.0
        assert report.cameo_fraction_overall == 0.0


def test_output_sorted_by_course_master_harvester():
    stores, roster, partition = synthetic_inputs(3, n_courses=2)
    run = detect(stores, roster, partition, FilterConfig())
    keys = [(d.course, d.master, d.harvester) for d in run.candidates]
    assert keys == sorted(keys)


def test_parallel_run_matches_serial():
    stores, roster, partition = synthetic_inputs(5, n_courses=3)
    serial = detect(stores, roster, partition, FilterConfig(), jobs=1)
    parallel = detect(stores, roster, partition, FilterConfig(), jobs=3)
    assert serial.model_dump_json() == parallel.model_dump_json()


def test_repeat_runs_are_identical():
    stores, roster, partition = synthetic_inputs(8)
    first = detect(stores, roster, partition, FilterConfig())
    second = detect(stores, roster, partition, FilterConfig())
    assert first.model_dump_json() == second.model_dump_json()


def test_relaxing_cutoff_never_removes_detections():
    stores, roster, partition = synthetic_inputs(11, lag_mean_seconds=200.0)
    previous = set()
    for cutoff in (30, 60, 120, 300, 600, 1800, 7200, 10000):
        current = triples(detect(stores, roster, partition, FilterConfig(cutoff_seconds=cutoff)))
        assert previous <= current
        previous = current


def test_filter_order_does_not_matter():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        stores, roster, partition = synthetic_inputs(
            seed,
            items=int(rng.integers(8, 25)),
            lag_mean_seconds=float(rng.choice([20.0, 150.0, 400.0])),
            router_accounts=int(rng.choice([0, 6])),
        )
        config = FilterConfig(max_group_accounts=int(rng.integers(2, 8)))
        contexts = []
        for course, store in stores.items():
            index = CourseIndex(store, config)
            accounts = sorted(store.accounts)
            contexts.extend(PairContext(ch, cm, store, roster, partition, config, index)
                            for ch in accounts for cm in accounts if ch != cm)

        reference = {(c.ch, c.cm, c.store.course) for c in contexts
                     if all(c.check(name) for name in FILTER_NAMES)}
        for _ in range(10):
            order = list(rng.permutation(FILTER_NAMES))
            flagged = set()
            for c in contexts:
                if all(c.check(name) for name in order):
                    flagged.add((c.ch, c.cm, c.store.course))
            assert flagged == reference, f"seed {seed}, order {order}"


@pytest.mark.parametrize("seed", range(20))
def test_pruned_detection_equals_brute_force(seed):
    rng = np.random.default_rng(1000 + seed)
    stores, roster, partition = synthetic_inputs(
        seed,
        n_courses=2,
        lag_mean_seconds=float(rng.choice([30.0, 250.0])),
        repeat_master_share=0.5,
        router_accounts=int(rng.choice([0, 5])),
    )
    accounts = set().union(*(s.accounts for s in stores.values()))
    assert len(accounts) <= 50
    config = FilterConfig(max_group_accounts=int(rng.integers(2, 6)))
    run = detect(stores, roster, partition, config)
    assert sorted(triples(run)) == sorted(brute_force_detect(stores, roster, partition, config))


@pytest.mark.parametrize("name", SCENARIOS)
def test_pruned_detection_equals_brute_force_on_scenarios(name):
    env, stores, partition = load_env(name)
    run = detect(stores, env["roster"], partition, FilterConfig())
    assert sorted(triples(run)) == sorted(brute_force_detect(stores, env["roster"], partition, FilterConfig()))
