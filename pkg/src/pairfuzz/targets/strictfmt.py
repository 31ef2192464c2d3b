"""``strictfmt``: a rigid 32-byte image header.

Layout (all multi-byte fields big-endian)::

    0   magic     "STRICT01"
    8   version   u8   (0..3)
    9   flags     u8
    10  width     u16
    12  height    u16
    14  depth     u8   (1, 2, 4, 8, 16)
    15  channels  u8   (1..4)
    16  size      u32  must equal width*height*channels*depth/8 (rounded up)
    20  reserved  8 zero bytes
    28  trailer   DE AD BE EF

The input must be exactly 32 bytes long.  Any insertion or deletion is
rejected right after the magic, so chunk mutators almost never pay off here.

Bug ``STR001``: a header whose declared size matches and exceeds 2**24
bytes while flag bit 7 is set.
"""

from __future__ import annotations

import struct

import numpy as np
from numba import njit

from ._edges import EdgeTable, hit

NAME = "strictfmt"
MAGIC = b"STRICT01"
MAGIC_ARR = np.frombuffer(MAGIC, dtype=np.uint8).copy()
TRAILER = b"\xde\xad\xbe\xef"
TRAILER_ARR = np.frombuffer(TRAILER, dtype=np.uint8).copy()
BUGS = ("STR001",)
HEADER_SIZE = 32
DEPTHS = np.array([1, 2, 4, 8, 16], dtype=np.int64)

E = EdgeTable(NAME)
ENTRY = E.edge("entry", "parser entered")
MAGIC_OK = E.block("magic_ok", 8, "magic byte {i} matched")
MAGIC_BAD = E.edge("magic_bad", "magic mismatch, input rejected")
BAD_LEN = E.edge("bad_len", "input is not exactly 32 bytes")
VERSION = E.block("version", 4, "version {i}")
BAD_VERSION = E.edge("bad_version", "version above 3")
FLAG = E.block("flag", 8, "flag bit {i} set")
WIDTH = E.block("width", 17, "width with bit length {i}")
HEIGHT = E.block("height", 17, "height with bit length {i}")
DEPTH = E.block("depth", 5, "depth option {i} (1, 2, 4, 8, 16)")
BAD_DEPTH = E.edge("bad_depth", "unsupported depth")
CHANNELS = E.block("channels", 4, "{i}+1 channels")
BAD_CHANNELS = E.edge("bad_channels", "channel count outside 1..4")
SIZE_OK = E.edge("size_ok", "declared size matches the geometry")
SIZE_BAD = E.edge("size_bad", "declared size does not match")
RESERVED_BAD = E.edge("reserved_bad", "nonzero reserved byte")
TRAILER_OK = E.block("trailer_ok", 4, "trailer byte {i} matched")
TRAILER_BAD = E.edge("trailer_bad", "trailer mismatch")
ACCEPT = E.edge("accept", "header accepted")
VER_DEPTH = E.block("ver_depth", 20, "accepted version {i}//5 with depth option {i}%5")
CH_DEPTH = E.block("ch_depth", 20, "accepted channels {i}//5+1 with depth option {i}%5")
VER_FLAG = E.block("ver_flag", 32, "accepted version {i}//8 with flag bit {i}%8")
BUG = E.edge("bug", "STR001 poison: oversized image with flag bit 7")
EDGE_COUNT = len(E)


@njit(cache=True)
def _bit_length(v):
    b = 0
    while v:
        v >>= 1
        b += 1
    return b


@njit(cache=True)
def run(buf, n, counts, cov):
    k = hit(ENTRY, counts, cov, 0)
    for i in range(8):
        if i >= n or buf[i] != MAGIC_ARR[i]:
            return hit(MAGIC_BAD, counts, cov, k), -1
        k = hit(MAGIC_OK + i, counts, cov, k)
    if n != HEADER_SIZE:
        return hit(BAD_LEN, counts, cov, k), -1
    version = np.int64(buf[8])
    if version > 3:
        return hit(BAD_VERSION, counts, cov, k), -1
    k = hit(VERSION + version, counts, cov, k)
    flags = np.int64(buf[9])
    for b in range(8):
        if flags & (1 << b):
            k = hit(FLAG + b, counts, cov, k)
    width = (np.int64(buf[10]) << 8) | buf[11]
    height = (np.int64(buf[12]) << 8) | buf[13]
    k = hit(WIDTH + _bit_length(width), counts, cov, k)
    k = hit(HEIGHT + _bit_length(height), counts, cov, k)
    depth = np.int64(buf[14])
    di = -1
    for i in range(5):
        if DEPTHS[i] == depth:
            di = i
    if di < 0:
        return hit(BAD_DEPTH, counts, cov, k), -1
    k = hit(DEPTH + di, counts, cov, k)
    channels = np.int64(buf[15])
    if channels < 1 or channels > 4:
        return hit(BAD_CHANNELS, counts, cov, k), -1
    k = hit(CHANNELS + channels - 1, counts, cov, k)
    declared = ((np.int64(buf[16]) << 24) | (np.int64(buf[17]) << 16)
                | (np.int64(buf[18]) << 8) | buf[19])
    expected = (width * height * channels * depth + 7) // 8
    if declared != expected:
        return hit(SIZE_BAD, counts, cov, k), -1
    k = hit(SIZE_OK, counts, cov, k)
    for i in range(20, 28):
        if buf[i] != 0:
            return hit(RESERVED_BAD, counts, cov, k), -1
    for i in range(4):
        if buf[28 + i] != TRAILER_ARR[i]:
            return hit(TRAILER_BAD, counts, cov, k), -1
        k = hit(TRAILER_OK + i, counts, cov, k)
    k = hit(ACCEPT, counts, cov, k)
    k = hit(VER_DEPTH + version * 5 + di, counts, cov, k)
    k = hit(CH_DEPTH + (channels - 1) * 5 + di, counts, cov, k)
    for b in range(8):
        if flags & (1 << b):
            k = hit(VER_FLAG + version * 8 + b, counts, cov, k)
    if expected > (1 << 24) and flags & 0x80:
        return hit(BUG, counts, cov, k), 0
    return k, -1


def header(version=1, flags=0, width=16, height=16, depth=8, channels=3,
           size=None, reserved=bytes(8), trailer=TRAILER) -> bytes:
    if size is None:
        size = (width * height * channels * depth + 7) // 8
    return (MAGIC + struct.pack(">BBHHBBI", version, flags, width, height, depth,
                                channels, size & 0xFFFFFFFF) + reserved + trailer)


AUTO_DICTIONARY = (MAGIC, TRAILER)
DICTIONARY = (MAGIC, TRAILER)


def seed_corpus() -> dict[str, bytes]:
    return {
        "rgb.bin": header(),
        "gray.bin": header(version=0, width=8, height=4, depth=1, channels=1),
    }
