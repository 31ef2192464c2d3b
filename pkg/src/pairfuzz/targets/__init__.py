"""Built-in instrumented targets and the execution harness.

Targets are parsers written as compiled state machines.  Every branch the
parser takes reports a statically numbered edge, so coverage is exact and
collision free.  Reaching a designated poison edge is a bug; it is reported
in the result, never raised.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from . import arith, chunkfmt, strictfmt
from ._edges import Edge, EdgeTable

MAP_SIZE = 1 << 16
BUCKETS = 8


class CoverageMap:
    """Edge bitmap with a maintained popcount.

    Used both per execution and as the trial-wide accumulated map that
    decides whether an input is interesting.
    """

    def __init__(self, size: int = MAP_SIZE):
        if size <= 0 or size & (size - 1):
            raise ValueError("map size must be a power of two")
        self.bits = np.zeros(size, dtype=np.uint8)
        self.count = 0

    @classmethod
    def of(cls, elements, size: int = MAP_SIZE) -> "CoverageMap":
        m = cls(size)
        m.merge(elements)
        return m

    def merge(self, elements) -> int:
        """Set ``elements``; return how many were new."""
        idx = np.unique(np.asarray(list(elements), dtype=np.int64))
        if idx.size == 0:
            return 0
        new = int(np.count_nonzero(self.bits[idx] == 0))
        self.bits[idx] = 1
        self.count += new
        return new

    def elements(self) -> set[int]:
        return set(np.flatnonzero(self.bits).tolist())

    def __contains__(self, element: int) -> bool:
        return bool(self.bits[element])

    def __len__(self) -> int:
        return self.count

    def copy(self) -> "CoverageMap":
        m = CoverageMap(self.bits.size)
        m.bits[:] = self.bits
        m.count = self.count
        return m


@dataclass
class ExecResult:
    coverage: CoverageMap
    crashed: bool
    bug_id: str | None = None
    exec_index: int = 0

    @property
    def elements(self) -> set[int]:
        return self.coverage.elements()


@dataclass(frozen=True)
class Target:
    name: str
    tid: int
    edge_table: EdgeTable = field(repr=False)
    bugs: tuple[str, ...]
    dictionary: tuple[bytes, ...] = field(repr=False)
    auto_dictionary: tuple[bytes, ...] = field(repr=False)
    seed_builder: Callable[[], dict[str, bytes]] = field(repr=False)
    doc: str = field(default="", repr=False)

    @property
    def edge_count(self) -> int:
        return len(self.edge_table)

    @property
    def edges(self) -> list[Edge]:
        return self.edge_table.edges

    def seeds_dir(self) -> Path:
        return Path(str(resources.files(__package__) / "seeds" / self.name))

    def dictionary_path(self) -> Path:
        """Shipped copy of ``dictionary`` in AFL dictionary syntax."""
        return Path(str(resources.files(__package__) / "dictionaries" / f"{self.name}.dict"))

    def seeds(self) -> dict[str, bytes]:
        """Shipped seed corpus, read from the package's seed directory."""
        d = self.seeds_dir()
        files = sorted(p for p in d.glob("*.bin")) if d.is_dir() else []
        if not files:
            return self.seed_builder()
        return {p.name: p.read_bytes() for p in files}

    def run(self, data: bytes) -> tuple[set[int], str | None]:
        """Edge set traversed on ``data`` and the bug reached, if any."""
        res = execute(self, data)
        return res.elements, res.bug_id


def _target(module, tid) -> Target:
    return Target(module.NAME, tid, module.E, module.BUGS, tuple(module.DICTIONARY),
                  tuple(module.AUTO_DICTIONARY), module.seed_corpus, module.__doc__ or "")


_TARGETS = {
    t.name: t for t in (_target(chunkfmt, 0), _target(arith, 1), _target(strictfmt, 2))
}


def builtin_targets() -> list[Target]:
    return list(_TARGETS.values())


def get_target(name: str) -> Target:
    try:
        return _TARGETS[name]
    except KeyError:
        raise KeyError(f"unknown target {name!r}; choose from {sorted(_TARGETS)}") from None


class Scratch:
    """Per-thread working arrays for one execution at a time."""

    def __init__(self, capacity: int = 1 << 14):
        self.counts = np.zeros(MAP_SIZE, dtype=np.uint32)
        self.cov = np.zeros(MAP_SIZE, dtype=np.int32)
        self.buf = np.zeros(capacity, dtype=np.uint8)


_local = threading.local()


def _scratch(size: int) -> Scratch:
    s = getattr(_local, "scratch", None)
    if s is None or s.buf.size < size:
        s = _local.scratch = Scratch(max(size, 1 << 14))
    return s


def execute(target: Target, data: bytes, bucketing: bool = False,
            exec_index: int = 0) -> ExecResult:
    """Run ``data`` through ``target`` and collect its coverage."""
    from .._kernel import exec_elements

    s = _scratch(len(data) + 1)
    s.buf[:len(data)] = np.frombuffer(data, dtype=np.uint8)
    k, bug = exec_elements(target.tid, s.buf, len(data), s.counts, s.cov, bucketing)
    cov = CoverageMap.of(s.cov[:k].tolist())
    return ExecResult(cov, bug >= 0, target.bugs[bug] if bug >= 0 else None, exec_index)


def is_interesting(global_map: CoverageMap, result: ExecResult) -> bool:
    """True iff ``result`` covers something ``global_map`` lacks; merges on True."""
    new = result.coverage.bits & (global_map.bits == 0)
    if not new.any():
        return False
    global_map.bits |= result.coverage.bits
    global_map.count += int(np.count_nonzero(new))
    return True


def edge_of(element: int, bucketing: bool) -> int:
    return element // BUCKETS if bucketing else element
