"""``arith``: a fixed-width record parser.

Layout::

    magic    'A' 'R'
    version  u8                                   (1..3 accepted)
    record*  kind:u8  level:u8  value:u16le  tag:u8   (at most 8 records)
    tag      = TAGS[kind]                         (kind < 8)

A record is *consistent* when ``level == value // 32``.  Every consistent
record reports its (kind, level) rung; an inconsistent one only reports a
per-kind mismatch edge.  Climbing to the next rung therefore needs two small
edits stacked in one input: bump the level byte and add a small delta to
the value.  A large jump (a random or "interesting" value written over
either field) almost never keeps the pair consistent, and block moves
misalign the fixed-width records, so the rungs are reached by arithmetic
pairs and little else: the planted unit/unit interaction.

Bug ``ARI001``: a kind-7 record at level 24 or above immediately following a
kind-6 record at level 24 or above.
"""

from __future__ import annotations

import struct

import numpy as np
from numba import njit

from ._edges import EdgeTable, hit

NAME = "arith"
MAGIC = b"AR"
MAGIC_ARR = np.frombuffer(MAGIC, dtype=np.uint8).copy()
BUGS = ("ARI001",)
NUM_KINDS = 8
MAX_RECORDS = 8
RECORD_SIZE = 5
STEP = 32
LEVELS = 48
LIMIT = STEP * LEVELS
BUG_LEVEL = 24
TAGS = np.array([(0x5A + 0x1D * k) & 0xFF for k in range(NUM_KINDS)], dtype=np.int64)

E = EdgeTable(NAME)
ENTRY = E.edge("entry", "parser entered")
MAGIC_OK = E.block("magic_ok", 2, "magic byte {i} matched")
MAGIC_BAD = E.edge("magic_bad", "magic mismatch, input rejected")
NO_VERSION = E.edge("no_version", "input ends before the version byte")
VERSION = E.block("version", 3, "version {i}+1")
BAD_VERSION = E.edge("bad_version", "version out of range, input rejected")
BAD_KIND = E.edge("bad_kind", "record kind 8 or above stops parsing")
BAD_TAG = E.edge("bad_tag", "record tag mismatch stops parsing")
SLOT = E.block("slot", MAX_RECORDS, "record slot {i} parsed")
MISMATCH = E.block("mismatch", NUM_KINDS, "kind {i}: level byte disagrees with value // 32")
RUNG = E.block("rung", NUM_KINDS * LEVELS, "kind {i}//48 consistent at level {i}%48")
OVER = E.block("over", NUM_KINDS, "kind {i}: value 1536 or above")
PARTIAL = E.edge("partial", "trailing bytes shorter than a record")
BUG = E.edge("bug", "ARI001 poison: kind 6 then kind 7, both at level 24 or above")
EDGE_COUNT = len(E)


@njit(cache=True)
def run(buf, n, counts, cov):
    k = hit(ENTRY, counts, cov, 0)
    for i in range(2):
        if i >= n or buf[i] != MAGIC_ARR[i]:
            return hit(MAGIC_BAD, counts, cov, k), -1
        k = hit(MAGIC_OK + i, counts, cov, k)
    if n < 3:
        return hit(NO_VERSION, counts, cov, k), -1
    version = buf[2]
    if version < 1 or version > 3:
        return hit(BAD_VERSION, counts, cov, k), -1
    k = hit(VERSION + version - 1, counts, cov, k)
    bug = -1
    prev_kind = -1
    prev_level = -1
    pos = 3
    slot = 0
    while slot < MAX_RECORDS and pos + RECORD_SIZE <= n:
        kind = np.int64(buf[pos])
        if kind >= NUM_KINDS:
            return hit(BAD_KIND, counts, cov, k), bug
        if buf[pos + 4] != TAGS[kind]:
            return hit(BAD_TAG, counts, cov, k), bug
        k = hit(SLOT + slot, counts, cov, k)
        level = np.int64(buf[pos + 1])
        value = np.int64(buf[pos + 2]) | (np.int64(buf[pos + 3]) << 8)
        consistent = -1
        if value >= LIMIT:
            k = hit(OVER + kind, counts, cov, k)
        elif level != value // STEP:
            k = hit(MISMATCH + kind, counts, cov, k)
        else:
            consistent = level
            k = hit(RUNG + kind * LEVELS + level, counts, cov, k)
            if (kind == 7 and level >= BUG_LEVEL and prev_kind == 6
                    and prev_level >= BUG_LEVEL):
                k = hit(BUG, counts, cov, k)
                bug = 0
        prev_kind = kind
        prev_level = consistent
        pos += RECORD_SIZE
        slot += 1
    if slot < MAX_RECORDS and pos < n:
        k = hit(PARTIAL, counts, cov, k)
    return k, bug


def record(kind: int, value: int, level: int | None = None) -> bytes:
    """Encode a record; ``level`` defaults to the consistent ``value // 32``."""
    if level is None:
        level = min(value // STEP, 255)
    return struct.pack("<BBHB", kind, level, value, int(TAGS[kind]))


def build(*records: bytes, version: int = 1) -> bytes:
    return MAGIC + bytes((version,)) + b"".join(records)


AUTO_DICTIONARY = (MAGIC,) + tuple(bytes((int(t),)) for t in TAGS)
DICTIONARY = (MAGIC + b"\x01",)


def seed_corpus() -> dict[str, bytes]:
    return {
        "ascending.bin": build(*(record(kind, 2 + 3 * kind) for kind in range(NUM_KINDS))),
        "descending.bin": build(*(record(kind, 5 + kind) for kind in reversed(range(NUM_KINDS))),
                                version=2),
    }
