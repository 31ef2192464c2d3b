"""Acceptance criteria C1-C9.

Each test prints one ``PASS``/``FAIL`` line (visible without ``-s``) and then
asserts the same condition, so ``pytest -v tests/test_acceptance.py`` both
reports and gates.  C4-C6 run full-scale campaigns (2M executions per trial)
and are marked ``slow``; deselect them with ``-m "not slow"``.  Every
threshold and tolerance is a module constant below.
"""

import itertools
import json
import time

import numpy as np
import pytest

from mutator_cases import CASES, MAX, check_case
from oracles import (TIME_FIXTURES, a12_by_pairs, betainc_quadrature, check_time_fixture,
                     exact_p_by_enumeration)
from pairfuzz.campaign import (CampaignConfig, TrialRecord, collect_dataset, replay_coverage,
                               run_experiment, run_trial)
from pairfuzz.cli import main
from pairfuzz.stats import special
from pairfuzz.stats.compare import mann_whitney_one_sided, vargha_delaney
from pairfuzz.stats.linear import PairDataset, anova_interaction_test
from pairfuzz.stats.report import goodness_of_fit_table, read_summary, time_table
from pairfuzz.strategy import PairCountMatrix, normalize
from test_stats import grid_dataset
from test_strategy import chi_square_row, walk_transitions

FULL_BUDGET, TRIALS = 2_000_000, 10
C1_SECONDS = 1.0
C2_TRANSITIONS = 10**6
C2_ALPHA = 0.01
C2_PERMUTATIONS = 100
C3_GRID, C3_REPLICATES, C3_SEEDS, C3_SIGMA = 8, 5, 100, 0.01
C3_ALPHA, C3_MAX_NULL, C3_MIN_POWER, C3_SECONDS = 0.05, 0.10, 0.99, 30.0
C4_SECONDS = 600.0
C5_TARGETS, C5_REPORT_ONLY = ("chunkfmt", "arith"), ("strictfmt",)
C5_ALPHA, C5_MIN_A12, C5_SECONDS = 0.1, 0.6, 3600.0
C7_MAX_N, C7_A12_PAIRS, C7_F_PROBES, C7_F_TOL = 4, 1000, 20, 1e-6


@pytest.fixture
def verdict(capsys):
    """``verdict(name, ok, detail)`` prints the criterion line and asserts."""

    def report(name: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} {name}: {detail}")
        assert ok, f"{name}: {detail}"

    return report


def test_c1_mutator_conformance(verdict):
    start = time.perf_counter()
    failures = sum(not check_case(c) for c in CASES)
    elapsed = time.perf_counter() - start
    per_mutator = {}
    for c in CASES:
        per_mutator.setdefault(c[0], []).append(len(c[1]))
    thin = sorted(m for m in range(1, 33)
                  if len(per_mutator.get(m, [])) < 3
                  or not {1, MAX} <= set(per_mutator.get(m, [])))
    ok = failures == 0 and not thin and elapsed < C1_SECONDS
    verdict("C1 mutator conformance", ok,
            f"{len(CASES)} cases, {failures} failing, mutators lacking 3 cases or "
            f"lengths 1 and {MAX}: {thin}, {elapsed:.3f}s (limit {C1_SECONDS}s)")


def test_c2_sampling_matches_learned_matrix(verdict):
    learned = run_trial(CampaignConfig(target="chunkfmt", budget=FULL_BUDGET, seed=1,
                                       t_train_fraction=1.0)).pair_counts
    cond = normalize(learned)
    tally = walk_transitions(cond, C2_TRANSITIONS, seed=2024)
    worst = 1.0
    for i in range(1, 33):
        if i in cond.fallback_rows:
            continue
        worst = min(worst, chi_square_row(tally[i - 1], cond.rows[i - 1])[2])

    rng = np.random.default_rng(0)
    events = [(i + 1, j + 1) for i, j in zip(*np.nonzero(learned.counts))
              for _ in range(int(learned.counts[i, j]))]
    mismatched = 0
    for _ in range(C2_PERMUTATIONS):
        m = PairCountMatrix()
        for k in rng.permutation(len(events)):
            m.record(*events[k])
        got = normalize(m)
        mismatched += not (np.array_equal(got.rows, cond.rows)
                           and got.fallback_rows == cond.fallback_rows)
    ok = worst > C2_ALPHA and mismatched == 0
    verdict("C2 sampling correctness", ok,
            f"{learned.total} learned pair credits, {32 - len(cond.fallback_rows)} non-fallback rows, "
            f"min row chi-square p={worst:.4f} (need > {C2_ALPHA}); "
            f"{mismatched}/{C2_PERMUTATIONS} permutations changed the normalization")


def test_c3_anova_calibration_and_power(verdict):
    start = time.perf_counter()
    null_rejections = power_hits = 0
    for seed in range(C3_SEEDS):
        ds = grid_dataset(C3_GRID, C3_GRID, C3_REPLICATES, seed, sigma=C3_SIGMA)
        null_rejections += anova_interaction_test(ds).p_value < C3_ALPHA
        planted = grid_dataset(C3_GRID, C3_GRID, C3_REPLICATES, seed, sigma=C3_SIGMA,
                               gamma={(2, 3): 10 * C3_SIGMA})
        power_hits += anova_interaction_test(planted).p_value < C3_ALPHA
    elapsed = time.perf_counter() - start
    null_rate, power = null_rejections / C3_SEEDS, power_hits / C3_SEEDS
    ok = null_rate <= C3_MAX_NULL and power >= C3_MIN_POWER and elapsed < C3_SECONDS
    verdict("C3 ANOVA calibration and power", ok,
            f"null rejects {null_rate:.2f} (limit {C3_MAX_NULL}), planted 10-sigma rejects "
            f"{power:.2f} (need {C3_MIN_POWER}), {elapsed:.1f}s (limit {C3_SECONDS}s)")


@pytest.mark.slow
def test_c4_nested_r2(verdict, tmp_path):
    start = time.perf_counter()
    config = CampaignConfig(target="chunkfmt", budget=FULL_BUDGET, t_train_fraction=1.0)
    out = collect_dataset(config, TRIALS, master_seed=0, output_dir=tmp_path)
    elapsed = time.perf_counter() - start
    row = goodness_of_fit_table({"chunkfmt": PairDataset.from_matrices([m for m, _ in out])})[0]
    delta = row["delta_r2_adj"]
    ok = delta > 0 and elapsed < C4_SECONDS
    verdict("C4 nested R2", ok,
            f"chunkfmt K={TRIALS}: R2_adj additive {row['r2_adj_additive']:.4f}, interaction "
            f"{row['r2_adj_interaction']:.4f}, delta {delta:+.4f} (need > 0); "
            f"{elapsed:.0f}s (limit {C4_SECONDS:.0f}s)")


@pytest.mark.slow
def test_c5_pairwise_beats_random_matrix(verdict, tmp_path):
    start = time.perf_counter()
    lines, ok = [], True
    for target in C5_TARGETS + C5_REPORT_ONLY:
        configs = [CampaignConfig(target=target, mode=mode, budget=FULL_BUDGET)
                   for mode in ("pairwise", "random_matrix")]
        rows = run_experiment(configs, TRIALS, master_seed=0, output_dir=tmp_path / target)
        finals = {m: [r["final_coverage"] for r in rows if r["strategy"] == m]
                  for m in ("pairwise", "random_matrix")}
        a, b = finals["pairwise"], finals["random_matrix"]
        p = mann_whitney_one_sided(a, b).p_value
        a12 = vargha_delaney(a, b)
        med_a, med_b = float(np.median(a)), float(np.median(b))
        if target in C5_TARGETS:
            good = med_a >= med_b and p < C5_ALPHA and a12 > C5_MIN_A12
            ok &= good
            tag = "ok" if good else "MISS"
        else:
            tag = "report only"
        lines.append(f"{target} median {med_a:g} vs {med_b:g}, p={p:.4f}, A12={a12:.2f} [{tag}]")
    elapsed = time.perf_counter() - start
    ok &= elapsed < C5_SECONDS
    verdict("C5 pairwise vs random matrix", ok,
            "; ".join(lines) + f"; {elapsed:.0f}s (limit {C5_SECONDS:.0f}s)")


@pytest.mark.slow
def test_c6_ablation_table(verdict, tmp_path, capsys):
    code = main(["ablate", "--target", "chunkfmt", "--budget", str(FULL_BUDGET),
                 "--trials", str(TRIALS), "--output-dir", str(tmp_path)])
    capsys.readouterr()
    table = tmp_path / "report" / "ablation_table.csv"
    header = table.read_text().splitlines()[0].split(",") if table.exists() else []
    variants = json.loads((tmp_path / "ablation.json").read_text())["variants"]
    want = {"pairwise", "p2", "default_length", "weighted_m1", "random_matrix",
            "t_train_1_48", "t_train_1_12", "cross_program"}
    summary = read_summary(tmp_path / "summary.csv")
    med = {v: float(np.median([r["final_coverage"] for r in summary if r["strategy"] == v]))
           for v in variants}
    columns = all(f"{v}_median" in header for v in want)
    ok = (code == 0 and set(variants) == want and columns
          and med["random_matrix"] <= med["pairwise"])
    verdict("C6 ablation harness", ok,
            f"exit {code}, {len(header)} columns, all variant columns present: {columns}; "
            + ", ".join(f"{v}={med[v]:g}" for v in variants)
            + " (need random_matrix <= pairwise)")


def test_c7_statistics_oracles(verdict):
    mw_checked = mw_bad = 0
    values = range(1, 2 * C7_MAX_N + 1)
    for n in range(1, C7_MAX_N + 1):
        for m in range(1, C7_MAX_N + 1):
            for a in itertools.combinations(values[:n + m], n):
                b = [v for v in values[:n + m] if v not in a]
                mw_checked += 1
                got = mann_whitney_one_sided(a, b, method="exact").p_value
                mw_bad += abs(got - exact_p_by_enumeration(a, b)) > 1e-12
            # tied samples: every 0/1 assignment
            for bits in itertools.product((0, 1), repeat=n + m):
                a, b = bits[:n], bits[n:]
                mw_checked += 1
                got = mann_whitney_one_sided(a, b, method="exact").p_value
                mw_bad += abs(got - exact_p_by_enumeration(a, b)) > 1e-12
    rng = np.random.default_rng(12)
    a12_bad = 0
    for _ in range(C7_A12_PAIRS):
        a = rng.integers(0, 6, rng.integers(1, 9)).tolist()
        b = rng.integers(0, 6, rng.integers(1, 9)).tolist()
        a12_bad += abs(vargha_delaney(a, b) - a12_by_pairs(a, b)) > 1e-12
    f_err = 0.0
    probe_rng = np.random.default_rng(3)
    for _ in range(C7_F_PROBES):
        d1 = float(probe_rng.integers(1, 60))
        d2 = float(probe_rng.integers(2, 1000))
        f = float(probe_rng.uniform(0.05, 6.0))
        x = d1 * f / (d1 * f + d2)
        f_err = max(f_err, abs(special.f_cdf(f, d1, d2) - betainc_quadrature(d1 / 2, d2 / 2, x)))
    ok = mw_bad == 0 and a12_bad == 0 and f_err <= C7_F_TOL
    verdict("C7 statistics oracles", ok,
            f"Mann-Whitney exact vs enumeration {mw_checked - mw_bad}/{mw_checked}; "
            f"A12 vs pair counting {C7_A12_PAIRS - a12_bad}/{C7_A12_PAIRS}; "
            f"F-CDF max error {f_err:.2e} at {C7_F_PROBES} probes (limit {C7_F_TOL})")


def test_c8_replayability(verdict, tmp_path):
    bad = []
    for target, seed in (("chunkfmt", 101), ("arith", 102), ("strictfmt", 103)):
        record = run_trial(CampaignConfig(target=target, budget=100_000, seed=seed))
        path = record.save(tmp_path / target) / "record.json"
        again = run_trial(TrialRecord.load(path).config)
        if again.to_json() != path.read_text():
            bad.append(f"{target} rerun differs")
        if replay_coverage(record) != record.final_coverage:
            bad.append(f"{target} replay coverage differs")
    verdict("C8 replayability", not bad,
            "3 targets rerun byte-identically and replay to final coverage" if not bad
            else "; ".join(bad))


def test_c9_time_to_threshold(verdict):
    problems = [p for fx in TIME_FIXTURES for p in check_time_fixture(fx, time_table)]
    verdict("C9 time to threshold", not problems,
            f"{len(TIME_FIXTURES)} fixtures, "
            + ("all pairs match" if not problems else "; ".join(problems)))
