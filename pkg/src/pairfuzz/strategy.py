"""Mutation strategies: learned pairwise scheduling and its baselines.

A trial that uses a learned strategy runs in two phases.  During training,
every mutated input is produced by a length-2 sequence of uniformly drawn
mutators, and each interesting input credits its ordered pair in a count
matrix.  At the phase boundary the matrix is row-normalized into a
transition matrix, and the guided phase generates sequences as a Markov
walk over mutators, with the walk length picked by an epsilon-greedy bandit.

Every sampler here has a compiled twin in ``_kernel``; both consume the
same random stream in the same order.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernel as K
from .mutators import (NUM_MUTATORS, WeightTable, default_weight_table, sample_cumulative,
                       sample_default_length)

M = NUM_MUTATORS
MIN_LENGTH = 2
MAX_LENGTH = 16
LENGTHS = tuple(range(MIN_LENGTH, MAX_LENGTH + 1))

MODES = ("fixed", "isolated", "pairwise", "pairwise_p2", "random_matrix", "cross_program")
TRAINED_MODES = frozenset({"isolated", "pairwise", "pairwise_p2", "random_matrix"})
MARKOV_MODES = frozenset({"pairwise", "pairwise_p2", "random_matrix", "cross_program"})
FIRST_MUTATOR_MODES = ("uniform", "weighted")
LENGTH_MODES = ("bandit", "default")

DEFAULT_T_TRAIN = 1 / 24
DEFAULT_EXPLORE_FRACTION = 1 / 23
DEFAULT_EPSILON = 0.5


def _check_id(mid: int) -> int:
    if not 1 <= mid <= M:
        raise ValueError(f"mutator id {mid} outside 1..{M}")
    return mid


# --- counts ---------------------------------------------------------------


class PairCountMatrix:
    """``counts[i-1, j-1] = N(i, j)``: interesting inputs from the pair <i, j>."""

    def __init__(self, counts: np.ndarray | None = None):
        if counts is None:
            counts = np.zeros((M, M), dtype=np.int64)
        counts = np.asarray(counts)
        if counts.shape != (M, M):
            raise ValueError(f"pair counts must be {M}x{M}, got {counts.shape}")
        if (counts < 0).any():
            raise ValueError("pair counts must be nonnegative")
        self.counts = counts.astype(np.int64, copy=True)

    def record(self, i: int, j: int) -> None:
        self.counts[_check_id(i) - 1, _check_id(j) - 1] += 1

    def __getitem__(self, ij: tuple[int, int]) -> int:
        i, j = ij
        return int(self.counts[i - 1, j - 1])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other) -> bool:
        return isinstance(other, PairCountMatrix) and np.array_equal(self.counts, other.counts)

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(range(1, M + 1))
        w.writerows(self.counts.tolist())
        return out.getvalue()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    @classmethod
    def from_csv(cls, text: str) -> "PairCountMatrix":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        if not rows or [c.strip() for c in rows[0]] != [str(i) for i in range(1, M + 1)]:
            raise ValueError("matrix CSV must start with a header row of mutator ids 1..32")
        body = rows[1:]
        if len(body) != M or any(len(r) != M for r in body):
            raise ValueError(f"matrix CSV must have {M} rows of {M} integer counts")
        try:
            return cls(np.array([[int(c) for c in r] for r in body], dtype=np.int64))
        except ValueError as exc:
            raise ValueError(f"bad matrix CSV: {exc}") from None

    @classmethod
    def load(cls, path: str | Path) -> "PairCountMatrix":
        return cls.from_csv(Path(path).read_text(encoding="utf-8"))


class TripletCountTensor:
    """``counts[i-1, j-1, k-1] = N(i, j, k)`` for the second-order variant."""

    def __init__(self, counts: np.ndarray | None = None):
        if counts is None:
            counts = np.zeros((M, M, M), dtype=np.int64)
        self.counts = np.asarray(counts, dtype=np.int64).copy()
        if self.counts.shape != (M, M, M):
            raise ValueError(f"triplet counts must be {M}x{M}x{M}")

    def record(self, i: int, j: int, k: int) -> None:
        self.counts[_check_id(i) - 1, _check_id(j) - 1, _check_id(k) - 1] += 1

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def sparsity(self) -> float:
        """Fraction of the M**3 triplets that were ever credited."""
        return np.count_nonzero(self.counts) / self.counts.size


def record_pair_outcome(state: "StrategyState | PairCountMatrix", i: int, j: int) -> None:
    counts = state.pair_counts if isinstance(state, StrategyState) else state
    counts.record(i, j)


def record_triplet_outcome(tensor: TripletCountTensor, i: int, j: int, k: int) -> None:
    tensor.record(i, j, k)


# --- conditional distributions --------------------------------------------


@dataclass
class ConditionalMatrix:
    """Row-stochastic transition matrix over mutators.

    ``rows[i-1]`` is the distribution of the next mutator after ``i``;
    ``fallback_rows`` holds the (1-based) ids whose count row was empty and
    which were therefore set uniform.
    """

    rows: np.ndarray
    fallback_rows: frozenset[int] = frozenset()
    cumulative: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        self.cumulative = np.cumsum(self.rows, axis=1)

    def row(self, mid: int) -> np.ndarray:
        return self.rows[mid - 1]


def normalize(counts: PairCountMatrix | np.ndarray) -> ConditionalMatrix:
    """Row-normalize counts; all-zero rows become uniform and are flagged."""
    c = counts.counts if isinstance(counts, PairCountMatrix) else np.asarray(counts)
    rows = np.empty(c.shape, dtype=np.float64)
    fallback = []
    for i in range(c.shape[0]):
        total = c[i].sum()
        if total > 0:
            rows[i] = c[i] / total
        else:
            rows[i] = 1.0 / c.shape[1]
            fallback.append(i + 1)
    return ConditionalMatrix(rows, frozenset(fallback))


@dataclass
class TripletConditional:
    """Second-order transitions: row ``(a-1)*M + (b-1)`` is Pr(next | a, b).

    Unseen (a, b) contexts reuse the first-order row of ``b``, which is in
    turn uniform when ``b`` was never credited.
    """

    rows: np.ndarray
    fallback_contexts: frozenset[tuple[int, int]] = frozenset()
    cumulative: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.cumulative = np.cumsum(self.rows, axis=1)

    def row(self, prev2: int, prev1: int) -> np.ndarray:
        return self.rows[(prev2 - 1) * M + prev1 - 1]


def normalize_triplets(tensor: TripletCountTensor, pairwise: ConditionalMatrix) -> TripletConditional:
    c = tensor.counts.reshape(M * M, M)
    totals = c.sum(axis=1)
    rows = np.empty((M * M, M), dtype=np.float64)
    fallback = []
    for r in range(M * M):
        if totals[r] > 0:
            rows[r] = c[r] / totals[r]
        else:
            rows[r] = pairwise.rows[r % M]
            fallback.append((r // M + 1, r % M + 1))
    return TripletConditional(rows, frozenset(fallback))


def first_mutator_scores(counts: PairCountMatrix | np.ndarray) -> np.ndarray:
    """``s_i``: interesting inputs in which mutator ``i`` took part (index 0 is id 1)."""
    c = counts.counts if isinstance(counts, PairCountMatrix) else np.asarray(counts)
    return c.sum(axis=1) + c.sum(axis=0) - np.diag(c)


def _weights_or_uniform(scores: np.ndarray) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    return scores if scores.sum() > 0 else np.ones(M)


def build_isolated_strategy(counts: PairCountMatrix) -> WeightTable:
    """Marginal-only baseline: weight each mutator by its score, ignore order."""
    return WeightTable(_weights_or_uniform(first_mutator_scores(counts)).tolist())


def build_random_matrix(rng) -> ConditionalMatrix:
    """Rows of i.i.d. uniform(0, 1) entries, each normalized to sum to one."""
    raw = np.array([[rng.random() for _ in range(M)] for _ in range(M)])
    return ConditionalMatrix(raw / raw.sum(axis=1, keepdims=True))


def sample_next(conditional: ConditionalMatrix, prev: int, rng) -> int:
    return 1 + sample_cumulative(conditional.cumulative[prev - 1], rng)


def sample_next_p2(conditional: TripletConditional, prev2: int, prev1: int, rng) -> int:
    return 1 + sample_cumulative(conditional.cumulative[(prev2 - 1) * M + prev1 - 1], rng)


def training_sequence(rng, length: int = 2) -> tuple[int, ...]:
    """Uniform i.i.d. mutators; pairs by default, triplets for the p=2 variant."""
    return tuple(1 + rng.randbelow(M) for _ in range(length))


# --- length bandit -----------------------------------------------------------


class LengthBandit:
    """Epsilon-greedy choice of sequence length over {2, ..., 16}.

    ``pulls`` and ``rewards`` are indexed by the length itself (slots 0 and 1
    are unused) so the compiled loop can update them in place.
    """

    def __init__(self, explore_fraction: float = DEFAULT_EXPLORE_FRACTION,
                 epsilon: float = DEFAULT_EPSILON):
        self.pulls = np.zeros(MAX_LENGTH + 1, dtype=np.int64)
        self.rewards = np.zeros(MAX_LENGTH + 1, dtype=np.int64)
        self.explore_fraction = explore_fraction
        self.epsilon = epsilon

    def epsilon_at(self, progress: float) -> float:
        """Probability of exploiting the best arm at this point of the guided phase."""
        return 0.0 if progress < self.explore_fraction else self.epsilon

    def best_arm(self) -> int:
        scores = self.rewards[MIN_LENGTH:] / np.maximum(1, self.pulls[MIN_LENGTH:])
        return MIN_LENGTH + int(np.argmax(scores))  # argmax keeps the first, i.e. smallest l

    def to_dict(self) -> dict:
        return {
            "pulls": {str(l): int(self.pulls[l]) for l in LENGTHS},
            "rewards": {str(l): int(self.rewards[l]) for l in LENGTHS},
            "explore_fraction": self.explore_fraction,
            "epsilon": self.epsilon,
        }


def bandit_select_length(bandit: LengthBandit, progress: float, rng) -> int:
    if rng.random() < bandit.epsilon_at(progress):
        return bandit.best_arm()
    return MIN_LENGTH + rng.randbelow(len(LENGTHS))


def bandit_update(bandit: LengthBandit, l: int, interesting_count: int) -> None:
    if not MIN_LENGTH <= l <= MAX_LENGTH:
        raise ValueError(f"length {l} outside {MIN_LENGTH}..{MAX_LENGTH}")
    bandit.pulls[l] += 1
    bandit.rewards[l] += interesting_count


# --- strategy state ----------------------------------------------------------


class StrategyState:
    """Everything one trial's mutation policy knows and learns."""

    def __init__(self, mode: str = "pairwise", first_mutator_mode: str = "uniform",
                 length_mode: str = "bandit", t_train_fraction: float = DEFAULT_T_TRAIN,
                 weights: WeightTable | None = None,
                 cross_counts: PairCountMatrix | None = None,
                 explore_fraction: float = DEFAULT_EXPLORE_FRACTION,
                 epsilon: float = DEFAULT_EPSILON):
        if mode not in MODES:
            raise ValueError(f"unknown strategy mode {mode!r}; choose from {MODES}")
        if first_mutator_mode not in FIRST_MUTATOR_MODES:
            raise ValueError(f"first_mutator_mode must be one of {FIRST_MUTATOR_MODES}")
        if length_mode not in LENGTH_MODES:
            raise ValueError(f"length_mode must be one of {LENGTH_MODES}")
        if mode in TRAINED_MODES and not 0 < t_train_fraction <= 1:
            raise ValueError("t_train_fraction must be in (0, 1]")
        if mode == "cross_program" and cross_counts is None:
            raise ValueError("cross_program mode needs a persisted pair-count matrix")
        self.mode = mode
        self.first_mutator_mode = first_mutator_mode
        self.length_mode = length_mode
        self.t_train_fraction = t_train_fraction if mode in TRAINED_MODES else 0.0
        self.weights = weights or default_weight_table()
        self.pair_counts = PairCountMatrix()
        self.triplets = TripletCountTensor() if mode == "pairwise_p2" else None
        self.conditional: ConditionalMatrix | None = None
        self.triplet_conditional: TripletConditional | None = None
        self.first_weights = WeightTable.uniform()
        uses_bandit = mode in MARKOV_MODES and length_mode == "bandit"
        self.bandit = LengthBandit(explore_fraction, epsilon) if uses_bandit else None
        self.phase = "training" if mode in TRAINED_MODES else "guided"
        if mode == "cross_program":
            self._enter_guided(cross_counts, None)

    @property
    def training_length(self) -> int:
        return 3 if self.mode == "pairwise_p2" else 2

    def training_end(self, budget: int) -> int:
        """First execution index that belongs to the guided phase."""
        if self.mode not in TRAINED_MODES:
            return 0
        return min(budget, int(np.ceil(self.t_train_fraction * budget - 1e-9)))

    def record(self, sequence: Sequence[int]) -> tuple[int, ...] | None:
        """Credit an interesting input produced during training; return what was credited."""
        if self.phase != "training":
            return None
        if self.triplets is not None:
            i, j, k = sequence[:3]
            self.triplets.record(i, j, k)
            self.pair_counts.record(j, k)
            return (i, j, k)
        i, j = sequence[:2]
        self.pair_counts.record(i, j)
        return (i, j)

    def finish_training(self, rng) -> None:
        if self.phase != "training":
            raise RuntimeError("training phase already finished")
        random_rows = build_random_matrix(rng) if self.mode == "random_matrix" else None
        self._enter_guided(self.pair_counts, random_rows)

    def _enter_guided(self, counts: PairCountMatrix, replacement: ConditionalMatrix | None):
        self.phase = "guided"
        if self.mode == "isolated":
            self.weights = build_isolated_strategy(counts)
            return
        self.conditional = replacement if replacement is not None else normalize(counts)
        if self.triplets is not None:
            self.triplet_conditional = normalize_triplets(self.triplets, self.conditional)
        if self.first_mutator_mode == "weighted":
            self.first_weights = WeightTable(_weights_or_uniform(first_mutator_scores(counts)).tolist())

    # -- sequence generation (reference route) --

    @property
    def kernel_mode(self) -> int:
        if self.phase == "training":
            return K.MODE_TRAIN_TRIPLE if self.triplets is not None else K.MODE_TRAIN_PAIR
        if self.mode in ("fixed", "isolated"):
            return K.MODE_FIXED
        return K.MODE_MARKOV_P2 if self.mode == "pairwise_p2" else K.MODE_MARKOV

    def next_sequence(self, rng, progress: float = 0.0) -> list[int]:
        mode = self.kernel_mode
        if mode in (K.MODE_TRAIN_PAIR, K.MODE_TRAIN_TRIPLE):
            return list(training_sequence(rng, self.training_length))
        if mode == K.MODE_FIXED:
            from .mutators import generate_sequence_fixed
            return generate_sequence_fixed(self.weights, rng)
        return generate_sequence_guided(self, rng, progress)

    def kernel_tables(self) -> dict[str, np.ndarray]:
        """Arrays the compiled loop samples from, in the current phase."""
        ccum = self.conditional.cumulative if self.conditional is not None else np.zeros((M, M))
        if self.triplet_conditional is not None:
            c3cum = self.triplet_conditional.cumulative
        else:
            c3cum = np.zeros((1, M))
        bandit = self.bandit or LengthBandit()
        return {
            "smode": self.kernel_mode,
            "lmode": 1 if self.bandit is not None else 0,
            "wcum": np.array(self.weights.cumulative, dtype=np.float64),
            "fcum": np.array(self.first_weights.cumulative, dtype=np.float64),
            "ccum": np.ascontiguousarray(ccum, dtype=np.float64),
            "c3cum": np.ascontiguousarray(c3cum, dtype=np.float64),
            "pulls": bandit.pulls,
            "rewards": bandit.rewards,
            "explore_frac": bandit.explore_fraction,
            "eps": bandit.epsilon,
        }


def select_first_mutator(state: StrategyState, rng) -> int:
    return state.first_weights.sample(rng)


def generate_sequence_guided(state: StrategyState, rng, progress: float = 0.0) -> list[int]:
    """One Markov walk: length, first mutator, then each successor in turn.

    ``progress`` is the consumed fraction of the guided phase; it only
    matters to the bandit's exploration schedule.
    """
    if state.conditional is None:
        raise RuntimeError("guided generation needs a conditional matrix")
    if state.bandit is not None:
        length = bandit_select_length(state.bandit, progress, rng)
    else:
        length = sample_default_length(rng)
    seq = [select_first_mutator(state, rng)]
    while len(seq) < length:
        if state.triplet_conditional is not None and len(seq) >= 2:
            seq.append(sample_next_p2(state.triplet_conditional, seq[-2], seq[-1], rng))
        else:
            seq.append(sample_next(state.conditional, seq[-1], rng))
    return seq
