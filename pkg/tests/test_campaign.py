"""Campaign configuration, single trials, the two execution engines,
replay, experiments, dataset collection and the ablation grid."""

import json

import numpy as np
import pytest

from pairfuzz.campaign import (CROSS_DONORS, MIN_BUDGET, CampaignConfig, ConfigError, TrialRecord,
                               ablation_configs, collect_dataset, load_config, load_matrices,
                               parse_config_text, read_summary, replay_coverage, run_ablation,
                               run_experiment, run_trial)
from pairfuzz.strategy import PairCountMatrix

SMALL = MIN_BUDGET


def cfg(**kw):
    base = dict(target="chunkfmt", budget=SMALL, seed=1)
    base.update(kw)
    return CampaignConfig(**base)


class TestConfig:
    def test_defaults_validate(self):
        c = CampaignConfig().validate()
        assert c.mode == "pairwise" and c.t_train_fraction == pytest.approx(1 / 24)
        assert c.budget == 2_000_000 and c.name == "pairwise"

    def test_parse_text(self):
        vals = parse_config_text("""
            # a comment
            target = arith
            t-train-fraction = 1/12   # fraction syntax
            budget = 50_000
            bucketing = yes
            label =
        """)
        assert vals == {"target": "arith", "t_train_fraction": 1 / 12, "budget": 50_000,
                        "bucketing": True, "label": None}

    @pytest.mark.parametrize("text", ["nonsense", "colour = red", "bucketing = maybe",
                                      "budget = lots"])
    def test_parse_rejects(self, text):
        with pytest.raises(ConfigError):
            parse_config_text(text)

    def test_precedence(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("target = arith\nbudget = 20000\nseed = 5\n")
        c = load_config(path, budget=30000, seed=None)
        assert (c.target, c.budget, c.seed) == ("arith", 30000, 5)
        assert load_config(None).target == "chunkfmt"

    @pytest.mark.parametrize("kw", [
        dict(target="nope"), dict(mode="greedy"), dict(budget=10), dict(trials=0),
        dict(t_train_fraction=0.0), dict(t_train_fraction=1.5), dict(max_input_size=0),
        dict(engine="gpu"), dict(mode="cross_program"), dict(weights="1,2,3"),
        dict(energy_min=100, energy_max=10), dict(first_mutator_mode="x"), dict(length_mode="x"),
    ])
    def test_validate_rejects(self, kw):
        with pytest.raises(ConfigError):
            cfg(**kw).validate()

    def test_cross_matrix_must_parse(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,2,3\n")
        with pytest.raises(ConfigError):
            cfg(mode="cross_program", cross_matrix=str(bad)).validate()


class TestTrial:
    @pytest.mark.parametrize("target", ["chunkfmt", "arith", "strictfmt"])
    def test_budget_and_curve(self, target):
        r = run_trial(cfg(target=target))
        assert r.executions == SMALL
        xs = [x for x, _ in r.coverage_curve]
        ys = [y for _, y in r.coverage_curve]
        assert xs == sorted(xs) and ys == sorted(ys)
        assert xs[-1] == SMALL and r.final_coverage == ys[-1] > 0

    def test_training_credits_match_interesting(self):
        r = run_trial(cfg(t_train_fraction=0.5))
        assert r.training_executions == SMALL // 2
        credited = [e for e in r.interesting if e.credited is not None]
        assert r.pair_counts.total == len(credited) == r.training_interesting
        assert all(e.exec_index <= r.training_executions for e in credited)
        assert all(len(e.credited) == 2 for e in credited)

    def test_collect_mode_trains_whole_budget(self):
        r = run_trial(cfg(t_train_fraction=1.0))
        assert r.training_executions == SMALL
        assert all(e.credited is not None for e in r.interesting)
        assert all(len(e.sequence) == 2 for e in r.interesting)

    def test_fixed_never_trains(self):
        r = run_trial(cfg(mode="fixed"))
        assert r.training_executions == 0 and r.pair_counts.total == 0 and r.bandit is None

    def test_p2_records_sparsity(self):
        r = run_trial(cfg(mode="pairwise_p2", t_train_fraction=0.5))
        assert 0 < r.triplet_sparsity < 0.01

    def test_seeds_dir_and_dictionary(self, tmp_path):
        (tmp_path / "s").mkdir()
        (tmp_path / "s" / "one.bin").write_bytes(b"AR\x01\x00\x00\x00\x00\x5a")
        (tmp_path / "d.dict").write_text('k="AR"\n')
        r = run_trial(cfg(target="arith", seeds_dir=str(tmp_path / "s"),
                          dictionary=str(tmp_path / "d.dict")))
        assert r.initial_seeds == [b"AR\x01\x00\x00\x00\x00\x5a"]

    def test_time_budget_stops(self):
        r = run_trial(cfg(budget=10**9, time_budget=0.5))
        assert 0 < r.executions < 10**9
        assert r.training_executions <= r.executions


class TestReplay:
    def test_rerun_is_byte_identical(self, tmp_path):
        c = cfg(target="arith", seed=7)
        a = run_trial(c)
        path = a.save(tmp_path / "t")
        again = run_trial(TrialRecord.load(path / "record.json").config)
        assert again.to_json() == (path / "record.json").read_text()

    @pytest.mark.parametrize("target", ["chunkfmt", "arith", "strictfmt"])
    def test_log_replays_final_coverage(self, target):
        r = run_trial(cfg(target=target, seed=3))
        assert replay_coverage(r) == r.final_coverage

    def test_bucketed_replay(self):
        r = run_trial(cfg(seed=4, bucketing=True))
        assert replay_coverage(r) == r.final_coverage

    def test_json_roundtrip(self):
        r = run_trial(cfg(seed=2))
        back = TrialRecord.from_dict(json.loads(r.to_json()))
        assert back.to_json() == r.to_json()

    def test_save_layout(self, tmp_path):
        r = run_trial(cfg(seed=5))
        d = r.save(tmp_path)
        assert PairCountMatrix.load(d / "pair_counts.csv") == r.pair_counts
        assert len(list((d / "corpus").iterdir())) == len(r.initial_seeds) + len(r.interesting)


@pytest.mark.parametrize("mode", ["pairwise", "pairwise_p2", "random_matrix", "isolated", "fixed"])
@pytest.mark.parametrize("target", ["chunkfmt", "arith", "strictfmt"])
def test_kernel_engine_matches_reference(mode, target):
    c = cfg(target=target, mode=mode, seed=3, t_train_fraction=0.3)
    fast = run_trial(c).to_json()
    slow = run_trial(c.replace(engine="reference")).to_json()
    assert fast == slow.replace('"engine":"reference"', '"engine":"kernel"')


def test_kernel_engine_matches_reference_cross_and_options(tmp_path):
    path = tmp_path / "m.csv"
    PairCountMatrix(np.random.default_rng(0).integers(0, 5, (32, 32))).save(path)
    for c in (cfg(mode="cross_program", cross_matrix=str(path), first_mutator_mode="weighted"),
              cfg(length_mode="default", t_train_fraction=0.2, bucketing=True),
              cfg(max_input_size=24, seed=8)):
        fast = run_trial(c).to_json()
        slow = run_trial(c.replace(engine="reference")).to_json()
        assert fast == slow.replace('"engine":"reference"', '"engine":"kernel"')


class TestExperiment:
    def test_summary_and_layout(self, tmp_path):
        configs = [cfg(mode="pairwise"), cfg(mode="fixed")]
        rows = run_experiment(configs, 2, master_seed=10, output_dir=tmp_path)
        assert [(r["strategy"], r["trial"], r["seed"]) for r in rows] == [
            ("pairwise", 1, 11), ("pairwise", 2, 12), ("fixed", 1, 11), ("fixed", 2, 12)]
        assert read_summary(tmp_path / "summary.csv") == rows
        assert len(list((tmp_path / "trials").iterdir())) == 4
        assert (tmp_path / "trials" / "fixed__chunkfmt__002" / "record.json").exists()

    def test_needs_configs(self):
        with pytest.raises(ConfigError):
            run_experiment([], 1)

    def test_parallel_equals_serial(self, tmp_path):
        configs = [cfg(target="arith")]
        serial = run_experiment(configs, 2, 0)
        parallel = run_experiment(configs, 2, 0, workers=2)
        assert serial == parallel


class TestCollect:
    def test_matrices(self, tmp_path):
        out = collect_dataset(cfg(target="arith"), 2, master_seed=0, output_dir=tmp_path)
        assert len(out) == 2
        mats = load_matrices(tmp_path)
        assert [m for m, _ in out] == mats
        assert all(m.total == n for m, n in out)
        assert read_summary(tmp_path / "summary.csv")[0]["strategy"] == "collect"

    def test_load_matrices_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_matrices(tmp_path)


class TestAblation:
    def test_variant_grid(self):
        names = [c.name for c in ablation_configs(cfg(), "m.csv")]
        assert names == ["pairwise", "p2", "default_length", "weighted_m1", "random_matrix",
                         "t_train_1_48", "t_train_1_12", "cross_program"]
        by = {c.name: c for c in ablation_configs(cfg(mode="fixed"), "m.csv")}
        assert by["pairwise"].mode == "pairwise"
        assert by["t_train_1_48"].t_train_fraction == pytest.approx(1 / 48)
        assert by["cross_program"].cross_matrix == "m.csv"
        assert "cross_program" not in [c.name for c in ablation_configs(cfg())]

    def test_donors_differ_from_target(self):
        assert all(t != d for t, d in CROSS_DONORS.items())

    def test_run_writes_marker(self, tmp_path):
        rows = run_ablation(cfg(target="arith"), 1, master_seed=0, output_dir=tmp_path)
        meta = json.loads((tmp_path / "ablation.json").read_text())
        assert meta["donor"] == "chunkfmt" and meta["baseline"] == "pairwise"
        assert {r["strategy"] for r in rows} == set(meta["variants"])
        assert PairCountMatrix.load(tmp_path / "cross_matrix.csv").total > 0
