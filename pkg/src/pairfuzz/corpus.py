"""Seed corpus, seed selection and energy assignment."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .mutators import NUM_MUTATORS


@dataclass(frozen=True)
class Provenance:
    parent: int
    sequence: tuple[int, ...]


@dataclass
class SeedEntry:
    id: int
    data: bytes
    discovered_at: int = 0
    provenance: Provenance | None = None
    times_selected: int = 0
    # outcome of the last round fuzzed from this seed: None until fuzzed once
    productive: bool | None = None
    array: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.array = np.frombuffer(self.data, dtype=np.uint8)

    @property
    def length(self) -> int:
        return len(self.data)


@dataclass(frozen=True)
class EnergyConfig:
    base: int = 64
    unproductive_factor: float = 0.25
    minimum: int = 16
    maximum: int = 4096

    def __post_init__(self):
        if not 1 <= self.minimum <= self.maximum:
            raise ValueError("energy clamp must satisfy 1 <= minimum <= maximum")


def assign_energy(seed: SeedEntry, config: EnergyConfig = EnergyConfig()) -> int:
    """Inputs to generate from ``seed`` this round.

    Seeds whose last round found nothing get a quarter of the base energy;
    fresh and recently productive seeds get the full base.
    """
    energy = config.base
    if seed.productive is False:
        energy = config.base * config.unproductive_factor
    return int(min(config.maximum, max(config.minimum, round(energy))))


def content_hash(data: bytes) -> str:
    return hashlib.sha1(data).hexdigest()[:16]


class Corpus:
    """Ordered, byte-deduplicated seed collection that only ever grows.

    Also keeps a flat copy of every entry (``flat``/``offsets``) that the
    compiled loop reads donor blocks from.
    """

    def __init__(self, initial: Iterable[bytes] = ()):
        self.entries: list[SeedEntry] = []
        self.crash_entries: list[tuple[bytes, str]] = []
        self._known: set[bytes] = set()
        self._lengths = np.zeros(64, dtype=np.float64)
        self._times = np.zeros(64, dtype=np.float64)
        self.flat = np.zeros(1 << 14, dtype=np.uint8)
        self.offsets = np.zeros(65, dtype=np.int64)
        for data in initial:
            self.add_if_new(data)
        if not self.entries:
            raise ValueError("corpus needs at least one nonempty initial seed")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, idx: int) -> SeedEntry:
        return self.entries[idx]

    def __contains__(self, data: bytes) -> bool:
        return bytes(data) in self._known

    def add_if_new(self, data: bytes, provenance: Provenance | tuple | None = None,
                   discovered_at: int = 0) -> bool:
        data = bytes(data)
        if not data:
            raise ValueError("corpus entries must be nonempty")
        if data in self._known:
            return False
        if provenance is not None:
            provenance = Provenance(int(provenance[0]), tuple(int(m) for m in provenance[1])) \
                if isinstance(provenance, tuple) else provenance
            if not 0 <= provenance.parent < len(self.entries):
                raise ValueError(f"provenance parent {provenance.parent} is not in the corpus")
            if not provenance.sequence or not all(1 <= m <= NUM_MUTATORS for m in provenance.sequence):
                raise ValueError("provenance needs a nonempty sequence of mutator ids")
        idx = len(self.entries)
        self.entries.append(SeedEntry(idx, data, discovered_at, provenance))
        self._known.add(data)
        self._append_arrays(idx, data)
        return True

    def _append_arrays(self, idx: int, data: bytes) -> None:
        if idx >= self._lengths.size:
            cap = 2 * self._lengths.size
            self._lengths = np.resize(self._lengths, cap)
            self._times = np.resize(self._times, cap)
            self.offsets = np.resize(self.offsets, cap + 1)
        self._lengths[idx] = len(data)
        self._times[idx] = 0
        start = self.offsets[idx]
        end = start + len(data)
        if end > self.flat.size:
            grown = np.zeros(max(2 * self.flat.size, end), dtype=np.uint8)
            grown[:start] = self.flat[:start]
            self.flat = grown
        self.flat[start:end] = np.frombuffer(data, dtype=np.uint8)
        self.offsets[idx + 1] = end

    def add_crash(self, data: bytes, bug_id: str) -> None:
        self.crash_entries.append((bytes(data), bug_id))

    def selection_weights(self) -> np.ndarray:
        n = len(self.entries)
        lengths = self._lengths[:n]
        median = float(np.median(lengths))
        return (1.0 / (1.0 + self._times[:n])) * (median / np.maximum(1.0, lengths))

    def select_seed(self, rng) -> SeedEntry:
        return select_seed(self, rng)

    def view(self) -> list[bytes]:
        return [e.data for e in self.entries]

    def save(self, directory: str | Path) -> None:
        """``corpus/<exec_index>_<hash>.bin`` and ``crashes/<bug_id>/<hash>.bin``."""
        directory = Path(directory)
        (directory / "corpus").mkdir(parents=True, exist_ok=True)
        for e in self.entries:
            (directory / "corpus" / f"{e.discovered_at}_{content_hash(e.data)}.bin").write_bytes(e.data)
        for data, bug_id in self.crash_entries:
            d = directory / "crashes" / bug_id
            d.mkdir(parents=True, exist_ok=True)
            (d / f"{content_hash(data)}.bin").write_bytes(data)


def select_seed(corpus: Corpus, rng) -> SeedEntry:
    """Pick a seed, favouring short and rarely chosen ones; count the pick."""
    n = len(corpus)
    if n == 1:
        idx = 0
    else:
        cum = np.cumsum(corpus.selection_weights())
        idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        idx = min(idx, n - 1)
    entry = corpus.entries[idx]
    entry.times_selected += 1
    corpus._times[idx] += 1
    return entry


def add_if_new(corpus: Corpus, data: bytes, provenance=None, discovered_at: int = 0) -> bool:
    return corpus.add_if_new(data, provenance, discovered_at)


def load_seed_dir(path: str | Path) -> list[bytes]:
    files = sorted(p for p in Path(path).iterdir() if p.is_file())
    seeds = [p.read_bytes() for p in files]
    seeds = [s for s in seeds if s]
    if not seeds:
        raise ValueError(f"no nonempty seed files in {path}")
    return seeds

