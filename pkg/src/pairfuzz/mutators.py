"""The 32 havoc mutators and fixed-probability sequence generation.

Mutator ids follow the AFL++ havoc table: ids 1-20 are *unit* mutators that
edit bytes in place, ids 21-32 are *chunk* mutators that move, insert or
delete blocks.

Every mutator is a total function on nonempty input.  When a mutator cannot
run as described (a 4-byte edit on a 2-byte input, a dictionary insert with
no dictionary, a corpus splice with no other seed) it degrades to a simpler
mutator, and the id it actually ran as is reported back so that pair counts
credit the effective mutator.

Random draws happen in a fixed, documented order per mutator.  Each draw is
``rng.randbelow(n)``, which tests exploit by scripting the stream.
"""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

NUM_MUTATORS = 32
MUTATOR_IDS = tuple(range(1, NUM_MUTATORS + 1))
UNIT_IDS = frozenset(range(1, 21))
CHUNK_IDS = frozenset(range(21, 33))

ARITH_MAX = 35
DEFAULT_MAX_INPUT_SIZE = 4096

INTERESTING_8 = (-128, -1, 0, 1, 16, 32, 64, 100, 127)
INTERESTING_16 = INTERESTING_8 + (-32768, -129, 128, 255, 256, 512, 1000, 1024, 4096, 32767)
INTERESTING_32 = INTERESTING_16 + (
    -2147483648, -100663046, -32769, 32768, 65535, 65536, 100663045, 2147483647,
)

MUTATOR_NAMES = {
    1: "flip a random bit",
    2: "replace a random byte with an interesting value",
    3: "replace two adjacent bytes with interesting values",
    4: "replace two adjacent bytes with interesting values (be)",
    5: "replace four adjacent bytes with interesting values",
    6: "replace four adjacent bytes with interesting values (be)",
    7: "subtract a value between 1 and 35 from a random byte",
    8: "add a value between 1 and 35 to a random byte",
    9: "subtract a value between 1 and 35 from two adjacent bytes",
    10: "subtract a value between 1 and 35 from two adjacent bytes (be)",
    11: "add a value between 1 and 35 to two adjacent bytes",
    12: "add a value between 1 and 35 to two adjacent bytes (be)",
    13: "subtract a value between 1 and 35 from four adjacent bytes",
    14: "subtract a value between 1 and 35 from four adjacent bytes (be)",
    15: "add a value between 1 and 35 to four adjacent bytes",
    16: "add a value between 1 and 35 to four adjacent bytes (be)",
    17: "set a random byte to a random value",
    18: "increase a random byte by 1",
    19: "decrease a random byte by 1",
    20: "flip all the bits of a random byte",
    21: "swap a block of bytes between two positions",
    22: "delete a block of bytes",
    23: "overwrite a block with a dictionary entry",
    24: "insert a dictionary entry at a random position",
    25: "overwrite a block with an auto-dictionary entry",
    26: "insert an auto-dictionary entry at a random position",
    27: "overwrite a block with a block from another seed",
    28: "insert a block from another seed at a random position",
    29: "clone a block to a different position",
    30: "insert a block of constant bytes",
    31: "overwrite a block with another block of the seed",
    32: "overwrite a block with a fixed byte value",
}

# Bar lengths (mm) of the published selection-probability chart; normalizing
# them reproduces the printed probabilities of ids 1, 2, 3, 31 and 32.
DEFAULT_BAR_MM = (
    7.9, 6.4, 4.3, 4.3, 4.3, 4.3, 6.4, 7.1, 4.3, 4.3, 4.3, 4.3, 4.3, 4.3, 4.3, 4.3,
    6.4, 4.3, 4.3, 2.9, 4.3, 6.4, 7.1, 8.6, 6.4, 7.9, 9.3, 10.0, 10.0, 5.0, 7.1, 3.6,
)


@dataclass
class MutationContext:
    """Everything a mutator may read besides the buffer it edits."""

    rng: object
    dictionary: Sequence[bytes] = ()
    auto_dictionary: Sequence[bytes] = ()
    corpus_view: Sequence[bytes] = ()
    max_input_size: int = DEFAULT_MAX_INPUT_SIZE


# --- helpers ---------------------------------------------------------------


def _block(n: int, rng) -> tuple[int, int]:
    """Offset and length of a random block inside a buffer of length n."""
    off = rng.randbelow(n)
    span = min(n - off, max(1, n >> 1))
    return off, 1 + rng.randbelow(span)


def _write(buf: bytearray, pos: int, value: int, width: int, big: bool) -> None:
    buf[pos:pos + width] = (value & ((1 << (8 * width)) - 1)).to_bytes(
        width, "big" if big else "little")


def _read(buf: bytearray, pos: int, width: int, big: bool) -> int:
    return int.from_bytes(buf[pos:pos + width], "big" if big else "little")


# --- unit mutators ---------------------------------------------------------
# Each returns the id it effectively ran as.


def _flip_bit(buf, ctx):
    # draws: bit index over the whole buffer
    bit = ctx.rng.randbelow(len(buf) << 3)
    buf[bit >> 3] ^= 1 << (bit & 7)
    return 1


def _interesting8(buf, ctx):
    # draws: position, value index
    rng = ctx.rng
    pos = rng.randbelow(len(buf))
    buf[pos] = INTERESTING_8[rng.randbelow(len(INTERESTING_8))] & 0xFF
    return 2


def _interesting_wide(width, big, mid):
    table = INTERESTING_16 if width == 2 else INTERESTING_32

    def mutate(buf, ctx):
        # draws: position, value index
        if len(buf) < width:
            return _UNIT_FALLBACK[mid](buf, ctx)
        rng = ctx.rng
        pos = rng.randbelow(len(buf) - width + 1)
        _write(buf, pos, table[rng.randbelow(len(table))], width, big)
        return mid

    return mutate


def _arith(width, big, sign, mid):
    mask = (1 << (8 * width)) - 1

    def mutate(buf, ctx):
        # draws: position, delta - 1
        if len(buf) < width:
            return _UNIT_FALLBACK[mid](buf, ctx)
        rng = ctx.rng
        pos = rng.randbelow(len(buf) - width + 1)
        delta = 1 + rng.randbelow(ARITH_MAX)
        if width == 1:
            buf[pos] = (buf[pos] + sign * delta) & 0xFF
        else:
            _write(buf, pos, (_read(buf, pos, width, big) + sign * delta) & mask, width, big)
        return mid

    return mutate


def _random_byte(buf, ctx):
    # draws: position, xor mask - 1 (the byte always changes)
    rng = ctx.rng
    pos = rng.randbelow(len(buf))
    buf[pos] ^= 1 + rng.randbelow(255)
    return 17


def _inc_byte(buf, ctx):
    pos = ctx.rng.randbelow(len(buf))
    buf[pos] = (buf[pos] + 1) & 0xFF
    return 18


def _dec_byte(buf, ctx):
    pos = ctx.rng.randbelow(len(buf))
    buf[pos] = (buf[pos] - 1) & 0xFF
    return 19


def _invert_byte(buf, ctx):
    pos = ctx.rng.randbelow(len(buf))
    buf[pos] ^= 0xFF
    return 20


# --- chunk mutators --------------------------------------------------------


def _swap_blocks(buf, ctx):
    # draws: block length - 1, first offset, gap
    n = len(buf)
    if n < 2:
        return 21
    rng = ctx.rng
    size = 1 + rng.randbelow(n >> 1)
    a = rng.randbelow(n - 2 * size + 1)
    b = a + size + rng.randbelow(n - a - 2 * size + 1)
    first = buf[a:a + size]
    buf[a:a + size] = buf[b:b + size]
    buf[b:b + size] = first
    return 21


def _delete_block(buf, ctx):
    # draws: offset, length - 1
    n = len(buf)
    off, size = _block(n, ctx.rng)
    if size >= n:
        return 22  # length floor of one byte
    del buf[off:off + size]
    return 22


def _dict_overwrite(mid, attr):
    def mutate(buf, ctx):
        # draws: entry index, position
        entries = getattr(ctx, attr)
        if not entries:
            return _random_byte(buf, ctx)
        rng = ctx.rng
        token = entries[rng.randbelow(len(entries))]
        pos = rng.randbelow(len(buf))
        token = token[:len(buf) - pos]
        buf[pos:pos + len(token)] = token
        return mid

    return mutate


def _dict_insert(mid, attr):
    def mutate(buf, ctx):
        # draws: entry index, position
        entries = getattr(ctx, attr)
        if not entries:
            return _random_byte(buf, ctx)
        rng = ctx.rng
        token = entries[rng.randbelow(len(entries))]
        pos = rng.randbelow(len(buf) + 1)
        buf[pos:pos] = token
        return mid

    return mutate


def _splice_overwrite(buf, ctx):
    # draws: donor index, donor offset, donor length - 1, destination
    if not ctx.corpus_view:
        return _clone_block(buf, ctx)
    rng = ctx.rng
    donor = ctx.corpus_view[rng.randbelow(len(ctx.corpus_view))]
    off, size = _block(len(donor), rng)
    dst = rng.randbelow(len(buf))
    size = min(size, len(buf) - dst)
    buf[dst:dst + size] = donor[off:off + size]
    return 27


def _splice_insert(buf, ctx):
    # draws: donor index, donor offset, donor length - 1, destination
    if not ctx.corpus_view:
        return _clone_block(buf, ctx)
    rng = ctx.rng
    donor = ctx.corpus_view[rng.randbelow(len(ctx.corpus_view))]
    off, size = _block(len(donor), rng)
    dst = rng.randbelow(len(buf) + 1)
    buf[dst:dst] = donor[off:off + size]
    return 28


def _clone_block(buf, ctx):
    # draws: offset, length - 1, destination
    rng = ctx.rng
    off, size = _block(len(buf), rng)
    dst = rng.randbelow(len(buf) + 1)
    buf[dst:dst] = buf[off:off + size]
    return 29


def _insert_constant(buf, ctx):
    # draws: length source offset, length - 1, value kind, value, destination
    rng = ctx.rng
    _, size = _block(len(buf), rng)
    if rng.randbelow(2):
        value = buf[rng.randbelow(len(buf))]
    else:
        value = rng.randbelow(256)
    dst = rng.randbelow(len(buf) + 1)
    buf[dst:dst] = bytes((value,)) * size
    return 30


def _overwrite_block(buf, ctx):
    # draws: source offset, length - 1, destination
    rng = ctx.rng
    off, size = _block(len(buf), rng)
    dst = rng.randbelow(len(buf) - size + 1)
    buf[dst:dst + size] = buf[off:off + size]
    return 31


def _fill_block(buf, ctx):
    # draws: offset, length - 1, value kind, value
    rng = ctx.rng
    off, size = _block(len(buf), rng)
    if rng.randbelow(2):
        value = buf[rng.randbelow(len(buf))]
    else:
        value = rng.randbelow(256)
    buf[off:off + size] = bytes((value,)) * size
    return 32


_MUTATORS: list[Callable | None] = [None] * (NUM_MUTATORS + 1)
_MUTATORS[1] = _flip_bit
_MUTATORS[2] = _interesting8
_MUTATORS[3] = _interesting_wide(2, False, 3)
_MUTATORS[4] = _interesting_wide(2, True, 4)
_MUTATORS[5] = _interesting_wide(4, False, 5)
_MUTATORS[6] = _interesting_wide(4, True, 6)
_MUTATORS[7] = _arith(1, False, -1, 7)
_MUTATORS[8] = _arith(1, False, 1, 8)
_MUTATORS[9] = _arith(2, False, -1, 9)
_MUTATORS[10] = _arith(2, True, -1, 10)
_MUTATORS[11] = _arith(2, False, 1, 11)
_MUTATORS[12] = _arith(2, True, 1, 12)
_MUTATORS[13] = _arith(4, False, -1, 13)
_MUTATORS[14] = _arith(4, True, -1, 14)
_MUTATORS[15] = _arith(4, False, 1, 15)
_MUTATORS[16] = _arith(4, True, 1, 16)
_MUTATORS[17] = _random_byte
_MUTATORS[18] = _inc_byte
_MUTATORS[19] = _dec_byte
_MUTATORS[20] = _invert_byte
_MUTATORS[21] = _swap_blocks
_MUTATORS[22] = _delete_block
_MUTATORS[23] = _dict_overwrite(23, "dictionary")
_MUTATORS[24] = _dict_insert(24, "dictionary")
_MUTATORS[25] = _dict_overwrite(25, "auto_dictionary")
_MUTATORS[26] = _dict_insert(26, "auto_dictionary")
_MUTATORS[27] = _splice_overwrite
_MUTATORS[28] = _splice_insert
_MUTATORS[29] = _clone_block
_MUTATORS[30] = _insert_constant
_MUTATORS[31] = _overwrite_block
_MUTATORS[32] = _fill_block

# Multi-byte unit mutators on inputs shorter than their width fall back to the
# next narrower variant with the same direction and byte order.
_UNIT_FALLBACK = {
    3: _MUTATORS[2], 4: _MUTATORS[2],
    5: _MUTATORS[3], 6: _MUTATORS[4],
    9: _MUTATORS[7], 10: _MUTATORS[7], 11: _MUTATORS[8], 12: _MUTATORS[8],
    13: _MUTATORS[9], 14: _MUTATORS[10], 15: _MUTATORS[11], 16: _MUTATORS[12],
}


def mutate_inplace(buf: bytearray, sequence: Sequence[int], ctx: MutationContext) -> list[int]:
    """Apply ``sequence`` to ``buf`` in order; return the effective ids.

    The buffer is truncated to ``ctx.max_input_size`` after every step so
    that later mutators never see an oversized input.
    """
    table = _MUTATORS
    limit = ctx.max_input_size
    applied = []
    for mid in sequence:
        applied.append(table[mid](buf, ctx))
        if len(buf) > limit:
            del buf[limit:]
    return applied


def apply_mutator(mid: int, data: bytes, ctx: MutationContext) -> tuple[bytes, int]:
    """Apply one mutator to a copy of ``data``.

    Returns the mutated bytes and the id the mutator effectively ran as.
    """
    if not 1 <= mid <= NUM_MUTATORS:
        raise ValueError(f"mutator id out of range: {mid}")
    if not data:
        raise ValueError("mutators need a nonempty input")
    buf = bytearray(data)
    effective = _MUTATORS[mid](buf, ctx)
    if len(buf) > ctx.max_input_size:
        del buf[ctx.max_input_size:]
    return bytes(buf), effective


# --- selection probabilities and the fixed baseline -----------------------


def sample_cumulative(cumulative: Sequence[float], rng) -> int:
    """0-based index drawn in proportion to the increments of ``cumulative``.

    Draws ``random() * total`` and bisects to the right.  If rounding lands
    past the end, step back over trailing zero-weight slots.
    """
    size = len(cumulative)
    x = rng.random() * cumulative[size - 1]
    i = bisect.bisect_right(cumulative, x)
    if i >= size:
        i = size - 1
        while i > 0 and cumulative[i] == cumulative[i - 1]:
            i -= 1
    return i


class WeightTable:
    """Per-mutator nonnegative weights with a cached cumulative table."""

    def __init__(self, weights: Sequence[float]):
        weights = [float(w) for w in weights]
        if len(weights) != NUM_MUTATORS:
            raise ValueError(f"expected {NUM_MUTATORS} weights, got {len(weights)}")
        if any(w < 0 for w in weights) or not any(w > 0 for w in weights):
            raise ValueError("weights must be nonnegative with at least one positive")
        self.weights = tuple(weights)
        total = 0.0
        cumulative = []
        for w in weights:
            total += w
            cumulative.append(total)
        self._cumulative = cumulative
        self._total = total

    def weight(self, mid: int) -> float:
        return self.weights[mid - 1]

    def probabilities(self) -> list[float]:
        return [w / self._total for w in self.weights]

    def probability(self, mid: int) -> float:
        return self.weights[mid - 1] / self._total

    @property
    def cumulative(self) -> list[float]:
        return list(self._cumulative)

    def sample(self, rng) -> int:
        return 1 + sample_cumulative(self._cumulative, rng)

    @classmethod
    def uniform(cls) -> "WeightTable":
        return cls([1.0] * NUM_MUTATORS)


def default_weight_table() -> WeightTable:
    return WeightTable(DEFAULT_BAR_MM)


def sample_default_length(rng) -> int:
    """Havoc stack depth: 2, 4, 8 or 16, each with probability 1/4."""
    return 2 << rng.randbelow(4)


def generate_sequence_fixed(weights: WeightTable, rng) -> list[int]:
    length = sample_default_length(rng)
    sample = weights.sample
    return [sample(rng) for _ in range(length)]


# --- dictionaries ----------------------------------------------------------

_DICT_LINE = re.compile(r'^\s*(?:[A-Za-z0-9_]+(?:@\d+)?\s*=\s*)?"(.*)"\s*$')


def parse_dictionary(text: str) -> list[bytes]:
    """Parse AFL dictionary syntax (``name="value"`` lines).

    Only the ``\\xNN``, ``\\\\`` and ``\\"`` escapes are recognised; blank
    lines and ``#`` comments are skipped.
    """
    entries = []
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        m = _DICT_LINE.match(stripped)
        if not m:
            raise ValueError(f"dictionary line {lineno}: expected name=\"value\"")
        entries.append(_unescape(m.group(1), lineno))
    return entries


def _unescape(body: str, lineno: int) -> bytes:
    out = bytearray()
    i = 0
    while i < len(body):
        c = body[i]
        if c != "\\":
            out += c.encode("latin-1")
            i += 1
            continue
        nxt = body[i + 1:i + 2]
        if nxt in ("\\", '"'):
            out += nxt.encode()
            i += 2
        elif nxt == "x" and re.fullmatch(r"[0-9A-Fa-f]{2}", body[i + 2:i + 4]):
            out.append(int(body[i + 2:i + 4], 16))
            i += 4
        else:
            raise ValueError(f"dictionary line {lineno}: bad escape at column {i + 1}")
    return bytes(out)


def format_dictionary(entries: Sequence[bytes], prefix: str = "token") -> str:
    lines = []
    for n, entry in enumerate(entries):
        body = "".join(
            chr(b) if 0x20 <= b < 0x7F and chr(b) not in '\\"' else f"\\x{b:02x}"
            for b in entry)
        lines.append(f'{prefix}_{n}="{body}"')
    return "\n".join(lines) + "\n"


def load_dictionary(path: str | Path) -> list[bytes]:
    return parse_dictionary(Path(path).read_text(encoding="latin-1"))
