"""Static edge numbering and the per-execution hit hook shared by targets."""

from __future__ import annotations

from dataclasses import dataclass

from numba import njit


@dataclass(frozen=True)
class Edge:
    id: int
    label: str
    doc: str


class EdgeTable:
    """Assigns consecutive edge ids and keeps a description of each one.

    Ids are fixed when the target module is imported, so the compiled
    parser can use them as constants and the map never has collisions.
    """

    def __init__(self, target: str):
        self.target = target
        self.edges: list[Edge] = []

    def edge(self, label: str, doc: str) -> int:
        eid = len(self.edges)
        self.edges.append(Edge(eid, label, doc))
        return eid

    def block(self, label: str, count: int, doc: str) -> int:
        """Reserve ``count`` consecutive edges; ``doc`` may use ``{i}``."""
        base = len(self.edges)
        for i in range(count):
            self.edges.append(Edge(base + i, f"{label}[{i}]", doc.format(i=i)))
        return base

    def __len__(self) -> int:
        return len(self.edges)

    def by_label(self, label: str) -> int:
        for e in self.edges:
            if e.label == label:
                return e.id
        raise KeyError(label)


@njit(inline="always")
def hit(edge, counts, cov, k):
    """Count one traversal of ``edge``; append it to ``cov`` on first hit."""
    c = counts[edge]
    counts[edge] = c + 1
    if c == 0:
        cov[k] = edge
        return k + 1
    return k
