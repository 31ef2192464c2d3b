"""Trials and experiments: the fuzzing loop wired end to end.

A trial repeatedly selects a seed, assigns it energy, and mutates it that
many times with sequences from the trial's strategy.  Inputs that reach new
coverage join the corpus; during training they also credit the mutators
that produced them.

The per-input work runs in the compiled kernel.  ``engine="reference"``
swaps in a pure-Python loop that makes the same random draws in the same
order; the test-suite runs both and requires identical records.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _kernel as K
from .corpus import Corpus, EnergyConfig, Provenance, assign_energy, content_hash, load_seed_dir
from .mutators import DEFAULT_MAX_INPUT_SIZE, MutationContext, WeightTable, default_weight_table, \
    load_dictionary, mutate_inplace
from .rng import FuzzRng, derive_seed
from .strategy import (DEFAULT_EPSILON, DEFAULT_EXPLORE_FRACTION, DEFAULT_T_TRAIN,
                       FIRST_MUTATOR_MODES, LENGTH_MODES, MODES, PairCountMatrix, StrategyState)
from .targets import BUCKETS, MAP_SIZE, CoverageMap, Target, execute, get_target

log = logging.getLogger(__name__)

MIN_BUDGET = 10_000
DEFAULT_BUDGET = 2_000_000


class ConfigError(ValueError):
    """Invalid campaign configuration, reported before anything executes."""


@dataclass
class CampaignConfig:
    target: str = "chunkfmt"
    mode: str = "pairwise"
    first_mutator_mode: str = "uniform"
    length_mode: str = "bandit"
    t_train_fraction: float = DEFAULT_T_TRAIN
    cross_matrix: str | None = None
    seed: int = 0
    budget: int = DEFAULT_BUDGET
    trials: int = 1
    output_dir: str | None = None
    max_input_size: int = DEFAULT_MAX_INPUT_SIZE
    bucketing: bool = False
    energy_base: int = 64
    energy_unproductive_factor: float = 0.25
    energy_min: int = 16
    energy_max: int = 4096
    explore_fraction: float = DEFAULT_EXPLORE_FRACTION
    epsilon: float = DEFAULT_EPSILON
    seeds_dir: str | None = None
    dictionary: str | None = None
    weights: str | None = None
    time_budget: float = 0.0
    engine: str = "kernel"
    label: str | None = None

    def validate(self) -> "CampaignConfig":
        try:
            get_target(self.target)
        except KeyError as exc:
            raise ConfigError(exc.args[0]) from None
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; choose from {MODES}")
        if self.first_mutator_mode not in FIRST_MUTATOR_MODES:
            raise ConfigError(f"first_mutator_mode must be one of {FIRST_MUTATOR_MODES}")
        if self.length_mode not in LENGTH_MODES:
            raise ConfigError(f"length_mode must be one of {LENGTH_MODES}")
        if self.budget < MIN_BUDGET:
            raise ConfigError(f"budget must be at least {MIN_BUDGET} executions")
        if self.trials < 1:
            raise ConfigError("trial count must be at least 1")
        if not 0 < self.t_train_fraction <= 1:
            raise ConfigError("t_train_fraction must be in (0, 1]")
        if self.max_input_size < 1:
            raise ConfigError("max_input_size must be positive")
        if self.engine not in ("kernel", "reference"):
            raise ConfigError("engine must be 'kernel' or 'reference'")
        if self.mode == "cross_program":
            if not self.cross_matrix:
                raise ConfigError("cross_program mode needs cross_matrix")
            try:
                PairCountMatrix.load(self.cross_matrix)
            except (OSError, ValueError) as exc:
                raise ConfigError(f"unreadable cross-program matrix {self.cross_matrix}: {exc}") from None
        try:
            self.weight_table()
            EnergyConfig(self.energy_base, self.energy_unproductive_factor,
                         self.energy_min, self.energy_max)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    @property
    def name(self) -> str:
        return self.label or self.mode

    def weight_table(self) -> WeightTable:
        if not self.weights:
            return default_weight_table()
        return WeightTable([float(w) for w in self.weights.split(",")])

    def energy(self) -> EnergyConfig:
        return EnergyConfig(self.energy_base, self.energy_unproductive_factor,
                            self.energy_min, self.energy_max)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "CampaignConfig":
        return dataclasses.replace(self, **changes)


# --- config files ------------------------------------------------------------

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(CampaignConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    if kind == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if kind == "int":
        return int(raw.replace("_", ""))
    if kind == "float":
        if "/" in raw:
            num, den = raw.split("/", 1)
            return float(num) / float(den)
        return float(raw)
    return raw or None


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _coerce(key, raw)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return values


def load_config(path: str | Path | None = None, **overrides) -> CampaignConfig:
    """Defaults, then the file, then explicit overrides (``None`` means unset)."""
    values = parse_config_text(Path(path).read_text(encoding="utf-8")) if path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    return CampaignConfig(**values)


# --- records -------------------------------------------------------------------


@dataclass
class InterestingEvent:
    exec_index: int
    parent: int
    sequence: tuple[int, ...]
    credited: tuple[int, ...] | None
    data: bytes

    def to_dict(self) -> dict:
        return {"exec_index": self.exec_index, "parent": self.parent,
                "sequence": list(self.sequence),
                "credited": list(self.credited) if self.credited else None,
                "data": self.data.hex()}


@dataclass
class CrashEvent:
    exec_index: int
    bug_id: str
    parent: int
    sequence: tuple[int, ...]
    data: bytes

    def to_dict(self) -> dict:
        return {"exec_index": self.exec_index, "bug_id": self.bug_id, "parent": self.parent,
                "sequence": list(self.sequence), "data": self.data.hex()}


@dataclass
class TrialRecord:
    config: CampaignConfig
    seed: int
    executions: int
    training_executions: int
    coverage_curve: list[tuple[int, int]]
    initial_seeds: list[bytes]
    interesting: list[InterestingEvent]
    crashes: list[CrashEvent]
    crash_counts: dict[str, int]
    pair_counts: PairCountMatrix
    bandit: dict | None
    triplet_sparsity: float | None = None
    elapsed: float = field(default=0.0, compare=False)

    @property
    def final_coverage(self) -> int:
        return self.coverage_curve[-1][1]

    @property
    def training_interesting(self) -> int:
        return sum(1 for e in self.interesting if e.credited is not None)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "seed": self.seed,
            "executions": self.executions,
            "training_executions": self.training_executions,
            "final_coverage": self.final_coverage,
            "coverage_curve": [list(p) for p in self.coverage_curve],
            "initial_seeds": [s.hex() for s in self.initial_seeds],
            "interesting": [e.to_dict() for e in self.interesting],
            "crashes": [c.to_dict() for c in self.crashes],
            "crash_counts": dict(self.crash_counts),
            "pair_counts": self.pair_counts.counts.tolist(),
            "bandit": self.bandit,
            "triplet_sparsity": self.triplet_sparsity,
        }

    def to_json(self) -> str:
        """Canonical serialization; contains nothing time- or host-dependent."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "TrialRecord":
        return cls(
            config=CampaignConfig(**d["config"]),
            seed=d["seed"],
            executions=d["executions"],
            training_executions=d["training_executions"],
            coverage_curve=[tuple(p) for p in d["coverage_curve"]],
            initial_seeds=[bytes.fromhex(s) for s in d["initial_seeds"]],
            interesting=[InterestingEvent(e["exec_index"], e["parent"], tuple(e["sequence"]),
                                          tuple(e["credited"]) if e["credited"] else None,
                                          bytes.fromhex(e["data"])) for e in d["interesting"]],
            crashes=[CrashEvent(c["exec_index"], c["bug_id"], c["parent"], tuple(c["sequence"]),
                                bytes.fromhex(c["data"])) for c in d["crashes"]],
            crash_counts=dict(d["crash_counts"]),
            pair_counts=PairCountMatrix(np.array(d["pair_counts"], dtype=np.int64)),
            bandit=d["bandit"],
            triplet_sparsity=d.get("triplet_sparsity"),
        )

    @classmethod
    def load(cls, path: str | Path) -> "TrialRecord":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def save(self, directory: str | Path) -> Path:
        """Write ``record.json``, ``pair_counts.csv``, ``corpus/`` and ``crashes/``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "record.json").write_text(self.to_json(), encoding="utf-8")
        self.pair_counts.save(directory / "pair_counts.csv")
        corpus = directory / "corpus"
        corpus.mkdir(exist_ok=True)
        for data in self.initial_seeds:
            (corpus / f"0_{content_hash(data)}.bin").write_bytes(data)
        for e in self.interesting:
            (corpus / f"{e.exec_index}_{content_hash(e.data)}.bin").write_bytes(e.data)
        for c in self.crashes:
            d = directory / "crashes" / c.bug_id
            d.mkdir(parents=True, exist_ok=True)
            (d / f"{content_hash(c.data)}.bin").write_bytes(c.data)
        return directory


def replay_coverage(record: TrialRecord) -> int:
    """Coverage count reached by re-executing the initial seeds and the interesting log."""
    target = get_target(record.config.target)
    size = MAP_SIZE * (BUCKETS if record.config.bucketing else 1)
    global_map = CoverageMap(size)
    for data in list(record.initial_seeds) + [e.data for e in record.interesting]:
        res = execute(target, data, record.config.bucketing)
        if not res.crashed:
            global_map.merge(res.coverage.elements())
    return global_map.count


# --- engines -----------------------------------------------------------------


class _Engine:
    """Shared state of one trial: target, map, corpus, dictionaries, scratch."""

    def __init__(self, target: Target, config: CampaignConfig, corpus: Corpus,
                 dictionary: Sequence[bytes], auto_dictionary: Sequence[bytes]):
        self.target = target
        self.bucketing = config.bucketing
        self.max_size = config.max_input_size
        self.global_map = CoverageMap(MAP_SIZE * (BUCKETS if self.bucketing else 1))
        self.corpus = corpus
        self.dictionary = list(dictionary)
        self.auto_dictionary = list(auto_dictionary)
        self.crash_seen = np.zeros(len(target.bugs), dtype=np.int64)
        self.crash_counts = np.zeros(len(target.bugs), dtype=np.int64)

    def calibrate(self, data: bytes) -> tuple[bool, int]:
        """Execute an initial seed; return (grew coverage, bug index or -1)."""
        res = execute(self.target, data, self.bucketing)
        if res.crashed:
            bug = self.target.bugs.index(res.bug_id)
            self.crash_counts[bug] += 1
            self.crash_seen[bug] = 1
            return False, bug
        return self.global_map.merge(res.coverage.elements()) > 0, -1


def _flatten(entries: Sequence[bytes]) -> tuple[np.ndarray, np.ndarray]:
    offs = np.zeros(len(entries) + 1, dtype=np.int64)
    for i, e in enumerate(entries):
        offs[i + 1] = offs[i] + len(e)
    flat = np.frombuffer(b"".join(entries) or b"\0", dtype=np.uint8).copy()
    return flat, offs


class KernelEngine(_Engine):
    def __init__(self, *args):
        super().__init__(*args)
        cap = 2 * self.max_size + 1024
        self.buf = np.zeros(cap, dtype=np.uint8)
        self.counts = np.zeros(MAP_SIZE, dtype=np.uint32)
        self.cov = np.zeros(MAP_SIZE, dtype=np.int32)
        self.seq = np.zeros(32, dtype=np.int64)
        self.eff = np.zeros(32, dtype=np.int64)
        self.rs = np.zeros(1, dtype=np.uint64)
        self.dflat, self.doffs = _flatten(self.dictionary)
        self.aflat, self.aoffs = _flatten(self.auto_dictionary)

    def batch(self, seed, energy, exec_index, stop_index, tables, guided_start, guided_len, rng):
        c = self.corpus
        self.rs[0] = rng.state
        done, status, n, length, bug = K.run_batch(
            self.target.tid, seed.array, seed.length, energy, exec_index, stop_index,
            self.max_size, self.bucketing, self.buf, self.counts, self.cov, self.global_map.bits,
            self.dflat, self.doffs, self.aflat, self.aoffs, c.flat, c.offsets, len(c),
            tables["smode"], tables["lmode"], tables["wcum"], tables["fcum"], tables["ccum"],
            tables["c3cum"], tables["pulls"], tables["rewards"], guided_start, guided_len,
            tables["explore_frac"], tables["eps"], self.rs, self.seq, self.eff,
            self.crash_seen, self.crash_counts)
        rng.state = int(self.rs[0])
        if status == K.STATUS_INTERESTING:
            self.global_map.count = int(np.count_nonzero(self.global_map.bits))
        data = bytes(self.buf[:n]) if status >= K.STATUS_INTERESTING else b""
        return done, status, data, tuple(int(m) for m in self.eff[:length]), bug


class ReferenceEngine(_Engine):
    """Pure-Python twin of ``KernelEngine``; slow, used to cross-check it."""

    def __init__(self, *args, state: StrategyState):
        super().__init__(*args)
        self.state = state

    def batch(self, seed, energy, exec_index, stop_index, tables, guided_start, guided_len, rng):
        state = self.state
        ctx = MutationContext(rng, self.dictionary, self.auto_dictionary, self.corpus.view(),
                              self.max_size)
        guided = tables["smode"] in (K.MODE_MARKOV, K.MODE_MARKOV_P2)
        bandit = state.bandit if guided and tables["lmode"] == 1 else None
        bits = self.global_map.bits
        done = 0
        while done < energy and exec_index < stop_index:
            progress = (exec_index - guided_start) / guided_len if guided and guided_len > 0 else 0.0
            seq = state.next_sequence(rng, progress)
            buf = bytearray(seed.data)
            eff = tuple(mutate_inplace(buf, seq, ctx))
            res = execute(self.target, bytes(buf), self.bucketing)
            exec_index += 1
            done += 1
            if bandit is not None:
                bandit.pulls[len(seq)] += 1
            if res.crashed:
                bug = self.target.bugs.index(res.bug_id)
                self.crash_counts[bug] += 1
                if not self.crash_seen[bug]:
                    self.crash_seen[bug] = 1
                    return done, K.STATUS_CRASH, bytes(buf), eff, bug
                continue
            idx = np.fromiter(res.coverage.elements(), dtype=np.int64)
            fresh = idx[bits[idx] == 0]
            if fresh.size:
                bits[fresh] = 1
                self.global_map.count += int(fresh.size)
                if bandit is not None:
                    bandit.rewards[len(seq)] += 1
                return done, K.STATUS_INTERESTING, bytes(buf), eff, -1
        return done, (K.STATUS_ENERGY if done >= energy else K.STATUS_STOP), b"", (), -1


# --- trial loop ----------------------------------------------------------------


def _resolve_inputs(config: CampaignConfig, target: Target):
    seeds = load_seed_dir(config.seeds_dir) if config.seeds_dir else list(target.seeds().values())
    dictionary = load_dictionary(config.dictionary) if config.dictionary else target.dictionary
    return seeds, dictionary, target.auto_dictionary


def run_trial(config: CampaignConfig) -> TrialRecord:
    """Run one trial to its execution budget (or wall-clock budget, if set)."""
    config.validate()
    target = get_target(config.target)
    seeds, dictionary, auto_dictionary = _resolve_inputs(config, target)
    cross = PairCountMatrix.load(config.cross_matrix) if config.mode == "cross_program" else None
    state = StrategyState(config.mode, config.first_mutator_mode, config.length_mode,
                          config.t_train_fraction, config.weight_table(), cross,
                          config.explore_fraction, config.epsilon)
    rng = FuzzRng(config.seed)
    corpus = Corpus(seeds)
    args = (target, config, corpus, dictionary, auto_dictionary)
    engine = KernelEngine(*args) if config.engine == "kernel" else ReferenceEngine(*args, state=state)
    energy_cfg = config.energy()
    budget = config.budget
    wall = config.time_budget > 0
    started = time.perf_counter()

    curve = [(0, 0)]
    interesting: list[InterestingEvent] = []
    crashes: list[CrashEvent] = []
    exec_index = 0
    for entry in corpus.entries:
        grew, bug = engine.calibrate(entry.data)
        exec_index += 1
        if grew:
            curve.append((exec_index, engine.global_map.count))

    train_end = state.training_end(budget)
    if wall and state.phase == "training":
        train_end = budget  # moved to the real boundary once the clock passes it
    guided_start, guided_len = train_end, budget - train_end
    if state.phase == "training" and exec_index >= train_end:
        state.finish_training(rng)
    tables = state.kernel_tables()

    while exec_index < budget:
        if wall and time.perf_counter() - started >= config.time_budget:
            break
        seed = corpus.select_seed(rng)
        remaining = assign_energy(seed, energy_cfg)
        productive = False
        while remaining > 0 and exec_index < budget:
            if state.phase == "training":
                if wall and time.perf_counter() - started >= config.t_train_fraction * config.time_budget:
                    train_end = exec_index
                    rate = exec_index / max(time.perf_counter() - started, 1e-9)
                    guided_start = exec_index
                    guided_len = max(1, int(rate * (1 - config.t_train_fraction) * config.time_budget))
                if exec_index >= train_end:
                    state.finish_training(rng)
                    tables = state.kernel_tables()
            stop = train_end if state.phase == "training" else budget
            done, status, data, eff, bug = engine.batch(
                seed, remaining, exec_index, stop, tables, guided_start, guided_len, rng)
            exec_index += done
            remaining -= done
            if status == K.STATUS_INTERESTING:
                productive = True
                credited = state.record(eff)
                corpus.add_if_new(data, Provenance(seed.id, eff), exec_index)
                interesting.append(InterestingEvent(exec_index, seed.id, eff, credited, data))
                curve.append((exec_index, engine.global_map.count))
            elif status == K.STATUS_CRASH:
                bug_id = target.bugs[bug]
                corpus.add_crash(data, bug_id)
                crashes.append(CrashEvent(exec_index, bug_id, seed.id, eff, data))
                log.info("trial %d: %s at execution %d", config.seed, bug_id, exec_index)
            if wall and time.perf_counter() - started >= config.time_budget:
                break
        seed.productive = productive

    if state.phase == "training" and not wall and train_end < budget:
        state.finish_training(rng)
    if curve[-1][0] != exec_index:
        curve.append((exec_index, engine.global_map.count))
    return TrialRecord(
        config=config,
        seed=config.seed,
        executions=exec_index,
        training_executions=min(train_end, exec_index),
        coverage_curve=curve,
        initial_seeds=[e.data for e in corpus.entries if e.provenance is None],
        interesting=interesting,
        crashes=crashes,
        crash_counts={b: int(c) for b, c in zip(target.bugs, engine.crash_counts)},
        pair_counts=PairCountMatrix(state.pair_counts.counts),
        bandit=state.bandit.to_dict() if state.bandit is not None else None,
        triplet_sparsity=state.triplets.sparsity if state.triplets is not None else None,
        elapsed=time.perf_counter() - started,
    )


# --- experiments -----------------------------------------------------------------

SUMMARY_FIELDS = ("strategy", "target", "trial", "seed", "final_coverage", "executions",
                  "interesting", "crashes", "bugs")


def _trial_job(args) -> tuple[str, dict]:
    config, path = args
    record = run_trial(config)
    if path is not None:
        record.save(path)
    return record.to_json(), _summary_row(record)


def _summary_row(record: TrialRecord) -> dict:
    c = record.config
    return {"strategy": c.name, "target": c.target, "trial": c.trials, "seed": record.seed,
            "final_coverage": record.final_coverage, "executions": record.executions,
            "interesting": len(record.interesting), "crashes": sum(record.crash_counts.values()),
            "bugs": ";".join(sorted({x.bug_id for x in record.crashes}))}


def trial_configs(configs: Iterable[CampaignConfig], trials: int, master_seed: int):
    """Expand each config into ``trials`` runs seeded master+1 .. master+trials."""
    for config in configs:
        for k in range(1, trials + 1):
            # the trial number rides in ``trials`` so the summary can report it
            yield config.replace(seed=derive_seed(master_seed, k), trials=k)


def _run_jobs(jobs, workers: int):
    if workers <= 1:
        for job in jobs:
            try:
                yield _trial_job(job)
            except Exception as exc:
                raise RuntimeError(f"trial with seed {job[0].seed} ({job[0].name}) failed: {exc}") from exc
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_trial_job, job) for job in jobs]
        for job, fut in zip(jobs, futures):
            try:
                yield fut.result()
            except Exception as exc:
                for f in futures:
                    f.cancel()
                raise RuntimeError(f"trial with seed {job[0].seed} ({job[0].name}) failed: {exc}") from exc


def run_experiment(configs: Sequence[CampaignConfig], trials: int, master_seed: int = 0,
                   output_dir: str | Path | None = None, workers: int = 1) -> list[dict]:
    """Run every config for ``trials`` trials; write records and ``summary.csv``.

    Returns the summary rows.  Trial ``k`` of every config uses seed
    ``master_seed + k``, so strategies are compared on the same seeds.
    """
    if not configs:
        raise ConfigError("run_experiment needs at least one config")
    for c in configs:
        c.validate()
    out = Path(output_dir) if output_dir else None
    jobs = []
    for cfg in trial_configs(configs, trials, master_seed):
        path = out / "trials" / f"{cfg.name}__{cfg.target}__{cfg.trials:03d}" if out else None
        jobs.append((cfg, path))
    rows = [row for _, row in _run_jobs(jobs, workers)]
    if out is not None:
        write_summary(rows, out / "summary.csv")
    return rows


def write_summary(rows: Sequence[dict], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def read_summary(path: str | Path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for key in ("trial", "seed", "final_coverage", "executions", "interesting", "crashes"):
            r[key] = int(r[key])
    return rows


def collect_dataset(config: CampaignConfig, trials: int, master_seed: int = 0,
                    output_dir: str | Path | None = None,
                    workers: int = 1) -> list[tuple[PairCountMatrix, int]]:
    """Training-only trials for the interaction dataset.

    Every execution of every trial uses uniform length-2 sequences.  Returns
    ``(matrix, interesting count)`` per trial and, with ``output_dir``, writes
    ``matrices/trial_<k>.csv`` plus ``summary.csv``.
    """
    base = config.replace(mode="pairwise", t_train_fraction=1.0, label=config.label or "collect")
    base.validate()
    out = Path(output_dir) if output_dir else None
    results = []
    rows = []
    jobs = [(cfg, None) for cfg in trial_configs([base], trials, master_seed)]
    for (cfg, _), (rec_json, row) in zip(jobs, _run_jobs(jobs, workers)):
        record = TrialRecord.from_dict(json.loads(rec_json))
        results.append((record.pair_counts, record.training_interesting))
        rows.append(row)
        if out is not None:
            (out / "matrices").mkdir(parents=True, exist_ok=True)
            record.pair_counts.save(out / "matrices" / f"trial_{cfg.trials:03d}.csv")
    if out is not None:
        write_summary(rows, out / "summary.csv")
    return results


def load_matrices(directory: str | Path) -> list[PairCountMatrix]:
    d = Path(directory)
    if (d / "matrices").is_dir():
        d = d / "matrices"
    files = sorted(d.glob("*.csv"))
    if not files:
        raise FileNotFoundError(f"no matrix CSVs under {directory}")
    return [PairCountMatrix.load(p) for p in files]


# --- ablation ------------------------------------------------------------------

def ablation_configs(base: CampaignConfig, cross_matrix: str | None = None) -> list[CampaignConfig]:
    """The variant grid: the pairwise strategy and one change at a time."""
    b = base.replace(mode="pairwise", first_mutator_mode="uniform", length_mode="bandit",
                     t_train_fraction=DEFAULT_T_TRAIN, label=None)
    variants = [
        b.replace(label="pairwise"),
        b.replace(mode="pairwise_p2", label="p2"),
        b.replace(length_mode="default", label="default_length"),
        b.replace(first_mutator_mode="weighted", label="weighted_m1"),
        b.replace(mode="random_matrix", label="random_matrix"),
        b.replace(t_train_fraction=1 / 48, label="t_train_1_48"),
        b.replace(t_train_fraction=1 / 12, label="t_train_1_12"),
    ]
    if cross_matrix:
        variants.append(b.replace(mode="cross_program", cross_matrix=cross_matrix,
                                  label="cross_program"))
    return variants


# the cross-program variant borrows pair counts learned on a different target
CROSS_DONORS = {"chunkfmt": "arith", "arith": "chunkfmt", "strictfmt": "chunkfmt"}


def donor_matrix(base: CampaignConfig, path: str | Path, donor: str | None = None,
                 master_seed: int = 0) -> Path:
    """Train on ``donor`` for a default training phase's worth of executions.

    The donor trial spends ``budget * t_train`` executions in training (never
    below the minimum budget) and its pair counts are written to ``path``.
    """
    donor = donor or CROSS_DONORS.get(base.target, "chunkfmt")
    budget = max(MIN_BUDGET, int(np.ceil(base.budget * DEFAULT_T_TRAIN)))
    cfg = base.replace(target=donor, mode="pairwise", t_train_fraction=1.0, budget=budget,
                       seed=derive_seed(master_seed, 0), label="donor", cross_matrix=None,
                       seeds_dir=None, dictionary=None)
    record = run_trial(cfg)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    record.pair_counts.save(path)
    return path


def run_ablation(base: CampaignConfig, trials: int, master_seed: int = 0,
                 output_dir: str | Path | None = None, workers: int = 1,
                 cross_matrix: str | None = None, donor: str | None = None) -> list[dict]:
    """Run the variant grid on ``base.target``; returns the summary rows.

    Writes an experiment directory plus ``ablation.json`` naming the
    baseline, so ``analyze`` also emits the ablation tables.
    """
    out = Path(output_dir) if output_dir else Path(tempfile.mkdtemp(prefix="ablate-"))
    if cross_matrix is None:
        donor = donor or CROSS_DONORS.get(base.target, "chunkfmt")
        cross_matrix = str(donor_matrix(base, out / "cross_matrix.csv", donor, master_seed))
    else:
        donor = None
    configs = ablation_configs(base, cross_matrix)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ablation.json").write_text(json.dumps({
        "target": base.target, "baseline": "pairwise", "trials": trials,
        "master_seed": master_seed, "variants": [c.name for c in configs],
        "cross_matrix": cross_matrix, "donor": donor,
    }, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return run_experiment(configs, trials, master_seed, out, workers)


def default_workers() -> int:
    return max(1, (os.cpu_count() or 1))
