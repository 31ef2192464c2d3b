"""``chunkfmt``: a PNG-like chunk container.

Layout::

    magic  89 'C' 'H' 'K'
    chunk* C7  type:u8  len:u8  data[len]  crc:u8
    crc  = (0xA5 + type + len + sum(data)) & 0xFF

Bytes between chunks that are not the ``C7`` sync byte are skipped as junk,
so a block that contains a whole chunk survives being copied anywhere
between chunks.  Known chunk types are ``H`` (header), ``P`` (palette),
``D`` (run-length data), ``T`` (keyword text), ``G`` (gamma), ``X``
(extension) and ``E`` (end).

The parser caches validation per type: the crc of the first good chunk of a
type is checked, later chunks of an already validated type are trusted.  A
value edit inside a validated chunk only breaks its crc; the same edit
inside a duplicated or relocated copy reaches the type's value gates.
Copy-then-edit is the planted chunk/unit pair interaction (the ``CHK001``
route runs through it); edit-then-copy copies a chunk whose crc is already
broken and gains nothing.

The deepest gates are the gamma ladders.  ``G`` chunks carry no crc check.
A ``G`` chunk holds up to eight ``channel:u8 level:u8 value:u16be`` slots;
slot ``c`` must carry ``channel = 0xE0 | c`` and any other channel byte
ends the chunk, so relabelling, shifting or copying slots gains nothing.
A slot is consistent when ``level == value // 32`` and then reports its
(channel, level) rung.  Each new rung takes a level bump stacked with a
small value edit, the planted unit/unit interaction.

Bugs:

``CHK001``
    A ``T`` chunk whose keyword is ``Copyright`` (NUL terminated) carries
    more than 24 bytes of text.
``CHK002``
    A ``D`` chunk with filter 4 decodes to more than 1024 bytes.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._edges import EdgeTable, hit

NAME = "chunkfmt"
MAGIC = b"\x89CHK"
MAGIC_ARR = np.frombuffer(MAGIC, dtype=np.uint8).copy()
BUGS = ("CHK001", "CHK002")
MAX_CHUNKS = 64
SYNC = 0xC7
G_SLOTS = 8
G_STEP = 32
G_LEVELS = 48
G_LIMIT = G_STEP * G_LEVELS
G_SLOT_SIZE = 4
G_CHANNEL_TAG = 0xE0

TYPES = b"HPDTGXE"
T_H, T_P, T_D, T_T, T_G, T_X, T_E = range(7)
NUM_TYPES = len(TYPES)
TYPE_INDEX = np.full(256, -1, dtype=np.int64)
for _i, _t in enumerate(TYPES):
    TYPE_INDEX[_t] = _i

# header bit depths and colour types, with PNG's allowed combinations
DEPTHS = np.array([1, 2, 4, 8, 16], dtype=np.int64)
COLORS = np.array([0, 2, 3, 4, 6], dtype=np.int64)
COMBO_OK = np.array([
    # color: 0  2  3  4  6
    [1, 0, 1, 0, 0],  # depth 1
    [1, 0, 1, 0, 0],  # depth 2
    [1, 0, 1, 0, 0],  # depth 4
    [1, 1, 1, 1, 1],  # depth 8
    [1, 1, 0, 1, 1],  # depth 16
], dtype=np.int64)

KEYWORDS = (b"Title", b"Author", b"Copyright", b"Software")
KW_LEN = np.array([len(k) for k in KEYWORDS], dtype=np.int64)
KW_BYTES = np.zeros((len(KEYWORDS), 9), dtype=np.uint8)
for _i, _k in enumerate(KEYWORDS):
    KW_BYTES[_i, :len(_k)] = np.frombuffer(_k, dtype=np.uint8)
KW_OFFSET = np.cumsum([0] + [len(k) for k in KEYWORDS])[:-1].astype(np.int64)
EXT_MAGIC = np.frombuffer(b"EXT1", dtype=np.uint8).copy()

E = EdgeTable(NAME)
ENTRY = E.edge("entry", "parser entered")
SHORT = E.edge("short", "input shorter than the magic")
MAGIC_OK = E.block("magic_ok", 4, "magic byte {i} matched")
MAGIC_BAD = E.edge("magic_bad", "magic mismatch, input rejected")
JUNK = E.edge("junk", "non-sync byte between chunks skipped")
TRUNC_HEAD = E.edge("trunc_head", "fewer than 4 bytes left for a chunk header")
TRUNC_BODY = E.edge("trunc_body", "chunk length runs past the end of input")
UNKNOWN = E.edge("unknown", "unknown chunk type skipped")
CRC_OK = E.block("crc_ok", NUM_TYPES, "first chunk of type #{i} passed crc")
CRC_BAD = E.block("crc_bad", NUM_TYPES, "first chunk of type #{i} failed crc")
TRUSTED = E.block("trusted", NUM_TYPES, "repeat chunk of type #{i} accepted without crc")
TRANS = E.block("trans", (NUM_TYPES + 1) * NUM_TYPES,
                "accepted chunk order (prev*7+type), prev 0 = start")
MANY = E.edge("many", "chunk limit reached")
H_SHORT = E.edge("h_short", "header chunk shorter than 4 bytes")
H_WIDTH = E.block("h_width", 8, "header width in [{i}*32, {i}*32+32)")
H_HEIGHT = E.block("h_height", 8, "header height in [{i}*32, {i}*32+32)")
H_COMBO = E.block("h_combo", 25, "valid header depth/colour combination #{i}")
H_BADCOMBO = E.edge("h_badcombo", "header depth/colour combination rejected")
P_COUNT = E.block("p_count", 17, "palette with {i} entries (16 = 16 or more)")
P_STEP = E.block("p_step", 15, "palette red channel ramps by 1..8 up to entry {i}+1")
D_EMPTY = E.edge("d_empty", "empty data chunk")
D_FILTER = E.block("d_filter", 5, "data filter {i}")
D_BADFILTER = E.edge("d_badfilter", "data filter out of range")
D_RUN = E.block("d_run", 16, "run length in [{i}*16, {i}*16+16)")
D_TOTAL = E.block("d_total", 16, "decoded size in [{i}*64, {i}*64+64) (15 = larger)")
T_KW = E.block("t_kw", int(KW_LEN.sum()), "keyword prefix byte matched (flattened {i})")
T_FULL = E.block("t_full", len(KEYWORDS), "keyword #{i} terminated by NUL")
T_LEN = E.block("t_len", 8, "text after keyword of length [{i}*4, {i}*4+4) (7 = longer)")
G_SHORT = E.edge("g_short", "gamma chunk shorter than one 4-byte slot")
G_BADCHAN = E.edge("g_badchan", "gamma slot whose channel byte is not its own index stops the chunk")
G_MISMATCH = E.block("g_mismatch", G_SLOTS, "gamma channel {i}: level byte disagrees with value // 32")
G_OVER = E.block("g_over", G_SLOTS, "gamma channel {i}: value 1536 or above")
G_RUNG = E.block("g_rung", G_SLOTS * G_LEVELS, "gamma channel {i}//48 consistent at level {i}%48")
X_MAGIC = E.block("x_magic", 4, "extension magic byte {i} matched")
X_BODY = E.block("x_body", 8, "extension payload of {i} bytes (7 = 7 or more)")
END = E.edge("end", "end chunk reached")
TRAILING = E.edge("trailing", "bytes after the end chunk")
BUG_TEXT = E.edge("bug_text", "CHK001 poison: Copyright text overflow")
BUG_RLE = E.edge("bug_rle", "CHK002 poison: filter-4 data decodes past 1024 bytes")
EDGE_COUNT = len(E)


@njit(cache=True)
def _header(buf, s, ln, counts, cov, k):
    if ln < 4:
        return hit(H_SHORT, counts, cov, k)
    k = hit(H_WIDTH + (buf[s] >> 5), counts, cov, k)
    k = hit(H_HEIGHT + (buf[s + 1] >> 5), counts, cov, k)
    depth = buf[s + 2]
    color = buf[s + 3]
    di = -1
    for i in range(5):
        if DEPTHS[i] == depth:
            di = i
    ci = -1
    for i in range(5):
        if COLORS[i] == color:
            ci = i
    if di < 0 or ci < 0 or COMBO_OK[di, ci] == 0:
        return hit(H_BADCOMBO, counts, cov, k)
    return hit(H_COMBO + di * 5 + ci, counts, cov, k)


@njit(cache=True)
def _palette(buf, s, ln, counts, cov, k):
    entries = ln // 3
    k = hit(P_COUNT + min(entries, 16), counts, cov, k)
    for e in range(1, min(entries, 16)):
        step = np.int64(buf[s + 3 * e]) - np.int64(buf[s + 3 * e - 3])
        if step < 1 or step > 8:
            break
        k = hit(P_STEP + e - 1, counts, cov, k)
    return k


@njit(cache=True)
def _data(buf, s, ln, counts, cov, k):
    if ln == 0:
        return hit(D_EMPTY, counts, cov, k), -1
    filt = buf[s]
    if filt > 4:
        return hit(D_BADFILTER, counts, cov, k), -1
    k = hit(D_FILTER + filt, counts, cov, k)
    total = 0
    p = s + 1
    while p + 1 < s + ln:
        run = buf[p]
        k = hit(D_RUN + (run >> 4), counts, cov, k)
        total += run
        p += 2
    k = hit(D_TOTAL + min(total >> 6, 15), counts, cov, k)
    if filt == 4 and total > 1024:
        return hit(BUG_RLE, counts, cov, k), 1
    return k, -1


@njit(cache=True)
def _text(buf, s, ln, counts, cov, k):
    if ln == 0:
        return k, -1
    kw = -1
    for i in range(KW_BYTES.shape[0]):
        if buf[s] == KW_BYTES[i, 0]:
            kw = i
    if kw < 0:
        return k, -1
    m = 0
    while m < KW_LEN[kw] and m < ln and buf[s + m] == KW_BYTES[kw, m]:
        k = hit(T_KW + KW_OFFSET[kw] + m, counts, cov, k)
        m += 1
    if m < KW_LEN[kw] or m >= ln or buf[s + m] != 0:
        return k, -1
    k = hit(T_FULL + kw, counts, cov, k)
    rest = ln - m - 1
    k = hit(T_LEN + min(rest >> 2, 7), counts, cov, k)
    if kw == 2 and rest > 24:
        return hit(BUG_TEXT, counts, cov, k), 0
    return k, -1


@njit(cache=True)
def _gamma(buf, s, ln, counts, cov, k):
    if ln < G_SLOT_SIZE:
        return hit(G_SHORT, counts, cov, k)
    for slot in range(min(ln // G_SLOT_SIZE, G_SLOTS)):
        p = s + G_SLOT_SIZE * slot
        if buf[p] != G_CHANNEL_TAG | slot:
            return hit(G_BADCHAN, counts, cov, k)
        ch = np.int64(slot)
        level = np.int64(buf[p + 1])
        v = (np.int64(buf[p + 2]) << 8) | buf[p + 3]
        if v >= G_LIMIT:
            k = hit(G_OVER + ch, counts, cov, k)
        elif level != v // G_STEP:
            k = hit(G_MISMATCH + ch, counts, cov, k)
        else:
            k = hit(G_RUNG + ch * G_LEVELS + level, counts, cov, k)
    return k


@njit(cache=True)
def _extension(buf, s, ln, counts, cov, k):
    m = 0
    while m < 4 and m < ln and buf[s + m] == EXT_MAGIC[m]:
        k = hit(X_MAGIC + m, counts, cov, k)
        m += 1
    if m < 4:
        return k
    return hit(X_BODY + min(ln - 4, 7), counts, cov, k)


@njit(cache=True)
def run(buf, n, counts, cov):
    k = hit(ENTRY, counts, cov, 0)
    bug = -1
    if n < 4:
        if n > 0:
            k = hit(SHORT, counts, cov, k)
        return k, bug
    for i in range(4):
        if buf[i] != MAGIC_ARR[i]:
            return hit(MAGIC_BAD, counts, cov, k), bug
        k = hit(MAGIC_OK + i, counts, cov, k)
    pos = 4
    prev = -1
    validated = 0
    chunks = 0
    while pos < n:
        if buf[pos] != SYNC:
            k = hit(JUNK, counts, cov, k)
            pos += 1
            continue
        if chunks == MAX_CHUNKS:
            k = hit(MANY, counts, cov, k)
            break
        if n - pos < 4:
            k = hit(TRUNC_HEAD, counts, cov, k)
            break
        t = buf[pos + 1]
        ln = np.int64(buf[pos + 2])
        s = pos + 3
        if s + ln + 1 > n:
            k = hit(TRUNC_BODY, counts, cov, k)
            break
        nxt = s + ln + 1
        chunks += 1
        ti = TYPE_INDEX[t]
        if ti < 0:
            k = hit(UNKNOWN, counts, cov, k)
            pos = nxt
            continue
        if validated & (1 << ti) or ti == T_G:
            k = hit(TRUSTED + ti, counts, cov, k)
        else:
            crc = 0xA5 + np.int64(t) + ln
            for i in range(s, s + ln):
                crc += buf[i]
            if (crc & 0xFF) != buf[s + ln]:
                k = hit(CRC_BAD + ti, counts, cov, k)
                pos = nxt
                continue
            k = hit(CRC_OK + ti, counts, cov, k)
            validated |= 1 << ti
        k = hit(TRANS + (prev + 1) * NUM_TYPES + ti, counts, cov, k)
        prev = ti
        if ti == T_H:
            k = _header(buf, s, ln, counts, cov, k)
        elif ti == T_P:
            k = _palette(buf, s, ln, counts, cov, k)
        elif ti == T_D:
            k, b = _data(buf, s, ln, counts, cov, k)
            if b >= 0:
                bug = b
        elif ti == T_T:
            k, b = _text(buf, s, ln, counts, cov, k)
            if b >= 0:
                bug = b
        elif ti == T_G:
            k = _gamma(buf, s, ln, counts, cov, k)
        elif ti == T_X:
            k = _extension(buf, s, ln, counts, cov, k)
        else:
            k = hit(END, counts, cov, k)
            if nxt < n:
                k = hit(TRAILING, counts, cov, k)
            break
        pos = nxt
    return k, bug


def crc(ctype: int, data: bytes) -> int:
    return (0xA5 + ctype + len(data) + sum(data)) & 0xFF


def chunk(ctype: bytes | int, data: bytes) -> bytes:
    """Encode one well-formed chunk (used by seeds and witnesses)."""
    t = ctype[0] if isinstance(ctype, (bytes, bytearray)) else ctype
    return bytes((SYNC, t, len(data))) + data + bytes((crc(t, data),))


def gamma(*values: int) -> bytes:
    """``G`` chunk payload with consistent slots for ``values``."""
    return b"".join(bytes((G_CHANNEL_TAG | ch, min(v // G_STEP, 255), v >> 8, v & 0xFF))
                    for ch, v in enumerate(values))


def build(*chunks: bytes) -> bytes:
    return MAGIC + b"".join(chunks)


AUTO_DICTIONARY = (MAGIC, b"EXT1") + KEYWORDS
DICTIONARY = tuple(bytes((t,)) for t in TYPES) + (b"Copyright\x00", b"EXT1")


def seed_corpus() -> dict[str, bytes]:
    header = chunk(b"H", bytes((64, 48, 8, 2)))
    return {
        "basic.bin": build(header, chunk(b"P", bytes((10, 0, 0) * 4)),
                           chunk(b"D", bytes((0, 4, 7, 4, 9))), chunk(b"E", b"")),
        "text.bin": build(header, chunk(b"T", b"Title\x00demo"),
                          chunk(b"G", gamma(10, 40, 75, 120, 6, 50, 90, 20)), chunk(b"E", b"")),
        "ext.bin": build(chunk(b"H", bytes((16, 16, 1, 0))), chunk(b"X", b"EXT1\x01"),
                         chunk(b"D", bytes((1, 2, 3))), chunk(b"E", b"")),
        "gamma.bin": build(chunk(b"G", gamma(40, 70))),
    }
