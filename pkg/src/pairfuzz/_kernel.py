"""Compiled inner fuzzing loop.

This module mirrors, draw for draw, the Python reference implementations in
``mutators`` and ``strategy``: the same splitmix64 stream, the same draw
order per mutator, the same cumulative-table sampling.  Tests run both
routes on shared seeds and require byte-identical results.

Nothing here is public API; ``campaign`` drives ``run_batch`` and
``targets`` wraps ``exec_elements``.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
from numba import njit

from .targets import arith, chunkfmt, strictfmt


def _drop_stale_cache() -> None:
    """Invalidate this module's on-disk compile cache when a target changes.

    numba keys the cache on this file only, but the compiled loop inlines
    the target parsers; without this check an edited target would keep
    running its old compiled code.
    """
    here = Path(__file__).resolve()
    sources = [here] + sorted(here.parent.joinpath("targets").glob("*.py"))
    digest = hashlib.sha256(b"".join(p.read_bytes() for p in sources)).hexdigest()
    cache = here.parent / "__pycache__"
    stamp = cache / "_kernel.sources"
    try:
        if stamp.is_file() and stamp.read_text() == digest:
            return
        for f in cache.glob("_kernel.*.nb[ic]"):
            f.unlink()
        cache.mkdir(exist_ok=True)
        stamp.write_text(digest)
    except OSError:
        pass  # read-only install: nothing cached here to go stale


_drop_stale_cache()

U64 = np.uint64
_GOLDEN = U64(0x9E3779B97F4A7C15)
_MIX1 = U64(0xBF58476D1CE4E5B9)
_MIX2 = U64(0x94D049BB133111EB)
_S30 = U64(30)
_S27 = U64(27)
_S31 = U64(31)
_S32 = U64(32)
_S11 = U64(11)
_INV_2_53 = 1.0 / (1 << 53)

INTERESTING_8 = np.array([-128, -1, 0, 1, 16, 32, 64, 100, 127], dtype=np.int64)
INTERESTING_16 = np.concatenate([INTERESTING_8, np.array(
    [-32768, -129, 128, 255, 256, 512, 1000, 1024, 4096, 32767], dtype=np.int64)])
INTERESTING_32 = np.concatenate([INTERESTING_16, np.array(
    [-2147483648, -100663046, -32769, 32768, 65535, 65536, 100663045, 2147483647],
    dtype=np.int64)])

# sequence modes
MODE_TRAIN_PAIR = 0
MODE_TRAIN_TRIPLE = 1
MODE_FIXED = 2
MODE_MARKOV = 3
MODE_MARKOV_P2 = 4

# batch exit reasons
STATUS_ENERGY = 0
STATUS_STOP = 1
STATUS_INTERESTING = 2
STATUS_CRASH = 3

TARGET_IDS = {"chunkfmt": 0, "arith": 1, "strictfmt": 2}


# --- random stream ---------------------------------------------------------


@njit(cache=True)
def next64(rs):
    s = rs[0] + _GOLDEN
    rs[0] = s
    z = (s ^ (s >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@njit(cache=True)
def randbelow(rs, n):
    return np.int64(((next64(rs) >> _S32) * U64(n)) >> _S32)


@njit(cache=True)
def rand01(rs):
    return np.float64(next64(rs) >> _S11) * _INV_2_53


@njit(cache=True)
def sample_cumulative(cum, rs):
    """Index (0-based) drawn in proportion to the increments of ``cum``."""
    size = cum.shape[0]
    x = rand01(rs) * cum[size - 1]
    i = np.searchsorted(cum, x, side="right")
    if i >= size:
        i = size - 1
        while i > 0 and cum[i] == cum[i - 1]:
            i -= 1
    return i


# --- buffer helpers --------------------------------------------------------


@njit(cache=True)
def _block(n, rs):
    off = randbelow(rs, n)
    span = min(n - off, max(1, n >> 1))
    return off, 1 + randbelow(rs, span)


@njit(cache=True)
def _open_gap(buf, n, pos, size):
    for i in range(n - 1, pos - 1, -1):
        buf[i + size] = buf[i]


@njit(cache=True)
def _read(buf, pos, width, big):
    v = np.int64(0)
    for b in range(width):
        byte = np.int64(buf[pos + width - 1 - b] if big else buf[pos + b])
        v |= byte << (8 * b)
    return v


@njit(cache=True)
def _write(buf, pos, value, width, big):
    for b in range(width):
        byte = (value >> (8 * b)) & 0xFF
        if big:
            buf[pos + width - 1 - b] = byte
        else:
            buf[pos + b] = byte


@njit(cache=True)
def resolve_fallback(mid, n, n_dict, n_auto, n_corpus):
    """Id a mutator degrades to on this input and context."""
    if (mid == 3 or mid == 4) and n < 2:
        return 2
    if mid == 5 and n < 4:
        return 3 if n >= 2 else 2
    if mid == 6 and n < 4:
        return 4 if n >= 2 else 2
    if 9 <= mid <= 12 and n < 2:
        return 7 if mid <= 10 else 8
    if 13 <= mid <= 16 and n < 4:
        if n >= 2:
            return mid - 4
        return 7 if mid <= 14 else 8
    if (mid == 23 or mid == 24) and n_dict == 0:
        return 17
    if (mid == 25 or mid == 26) and n_auto == 0:
        return 17
    if (mid == 27 or mid == 28) and n_corpus == 0:
        return 29
    return mid


@njit(cache=True)
def apply_one(mid, buf, n, rs, dflat, doffs, aflat, aoffs, cflat, coffs, ncorp):
    """Apply mutator ``mid`` in place; return ``(new_length, effective_id)``."""
    mid = resolve_fallback(mid, n, doffs.shape[0] - 1, aoffs.shape[0] - 1, ncorp)
    if mid == 1:
        bit = randbelow(rs, n << 3)
        buf[bit >> 3] ^= np.uint8(1 << (bit & 7))
    elif mid == 2:
        pos = randbelow(rs, n)
        buf[pos] = INTERESTING_8[randbelow(rs, INTERESTING_8.shape[0])] & 0xFF
    elif 3 <= mid <= 6:
        width = 2 if mid <= 4 else 4
        table = INTERESTING_16 if width == 2 else INTERESTING_32
        pos = randbelow(rs, n - width + 1)
        _write(buf, pos, table[randbelow(rs, table.shape[0])], width, mid % 2 == 0)
    elif 7 <= mid <= 16:
        if mid <= 8:
            width = 1
        elif mid <= 12:
            width = 2
        else:
            width = 4
        sign = 1 if (mid == 8 or mid == 11 or mid == 12 or mid == 15 or mid == 16) else -1
        big = mid == 10 or mid == 12 or mid == 14 or mid == 16
        pos = randbelow(rs, n - width + 1)
        delta = 1 + randbelow(rs, 35)
        mask = (np.int64(1) << (8 * width)) - 1
        _write(buf, pos, (_read(buf, pos, width, big) + sign * delta) & mask, width, big)
    elif mid == 17:
        pos = randbelow(rs, n)
        buf[pos] ^= np.uint8(1 + randbelow(rs, 255))
    elif mid == 18:
        pos = randbelow(rs, n)
        buf[pos] = buf[pos] + np.uint8(1)
    elif mid == 19:
        pos = randbelow(rs, n)
        buf[pos] = buf[pos] - np.uint8(1)
    elif mid == 20:
        pos = randbelow(rs, n)
        buf[pos] ^= np.uint8(0xFF)
    elif mid == 21:
        if n >= 2:
            size = 1 + randbelow(rs, n >> 1)
            a = randbelow(rs, n - 2 * size + 1)
            b = a + size + randbelow(rs, n - a - 2 * size + 1)
            for i in range(size):
                t = buf[a + i]
                buf[a + i] = buf[b + i]
                buf[b + i] = t
    elif mid == 22:
        off, size = _block(n, rs)
        if size < n:
            for i in range(off, n - size):
                buf[i] = buf[i + size]
            n -= size
    elif 23 <= mid <= 26:
        if mid <= 24:
            flat = dflat
            offs = doffs
        else:
            flat = aflat
            offs = aoffs
        e = randbelow(rs, offs.shape[0] - 1)
        t0 = offs[e]
        tl = offs[e + 1] - t0
        if mid == 23 or mid == 25:
            pos = randbelow(rs, n)
            tl = min(tl, n - pos)
        else:
            pos = randbelow(rs, n + 1)
            _open_gap(buf, n, pos, tl)
            n += tl
        for i in range(tl):
            buf[pos + i] = flat[t0 + i]
    elif mid == 27 or mid == 28:
        d = randbelow(rs, ncorp)
        d0 = coffs[d]
        off, size = _block(coffs[d + 1] - d0, rs)
        if mid == 27:
            dst = randbelow(rs, n)
            size = min(size, n - dst)
        else:
            dst = randbelow(rs, n + 1)
            _open_gap(buf, n, dst, size)
            n += size
        for i in range(size):
            buf[dst + i] = cflat[d0 + off + i]
    elif mid == 29:
        off, size = _block(n, rs)
        dst = randbelow(rs, n + 1)
        tmp = buf[off:off + size].copy()
        _open_gap(buf, n, dst, size)
        n += size
        buf[dst:dst + size] = tmp
    elif mid == 30 or mid == 32:
        off, size = _block(n, rs)
        if randbelow(rs, 2):
            value = buf[randbelow(rs, n)]
        else:
            value = np.uint8(randbelow(rs, 256))
        if mid == 30:
            off = randbelow(rs, n + 1)
            _open_gap(buf, n, off, size)
            n += size
        for i in range(size):
            buf[off + i] = value
    else:  # 31
        off, size = _block(n, rs)
        dst = randbelow(rs, n - size + 1)
        tmp = buf[off:off + size].copy()
        buf[dst:dst + size] = tmp
    return n, mid


# --- sequence generation ---------------------------------------------------


@njit(cache=True)
def default_length(rs):
    return 2 << randbelow(rs, 4)


@njit(cache=True)
def bandit_length(rs, pulls, rewards, progress, explore_frac, eps):
    """epsilon-greedy arm over lengths 2..16; arrays are indexed by length."""
    e = 0.0 if progress < explore_frac else eps
    if rand01(rs) < e:
        best = 2
        best_score = -1.0
        for arm in range(2, 17):
            score = rewards[arm] / max(1, pulls[arm])
            if score > best_score:
                best_score = score
                best = arm
        return best
    return 2 + randbelow(rs, 15)


@njit(cache=True)
def gen_sequence(rs, seq, smode, lmode, wcum, fcum, ccum, c3cum, pulls, rewards,
                 progress, explore_frac, eps):
    if smode == MODE_TRAIN_PAIR or smode == MODE_TRAIN_TRIPLE:
        length = 2 if smode == MODE_TRAIN_PAIR else 3
        for i in range(length):
            seq[i] = 1 + randbelow(rs, 32)
        return length
    if smode == MODE_FIXED:
        length = default_length(rs)
        for i in range(length):
            seq[i] = 1 + sample_cumulative(wcum, rs)
        return length
    if lmode == 1:
        length = bandit_length(rs, pulls, rewards, progress, explore_frac, eps)
    else:
        length = default_length(rs)
    seq[0] = 1 + sample_cumulative(fcum, rs)
    for i in range(1, length):
        if smode == MODE_MARKOV_P2 and i >= 2:
            row = (seq[i - 2] - 1) * 32 + seq[i - 1] - 1
            seq[i] = 1 + sample_cumulative(c3cum[row], rs)
        else:
            seq[i] = 1 + sample_cumulative(ccum[seq[i - 1] - 1], rs)
    return length


# --- execution -------------------------------------------------------------


@njit(cache=True)
def run_target(tid, buf, n, counts, cov):
    if tid == 0:
        return chunkfmt.run(buf, n, counts, cov)
    if tid == 1:
        return arith.run(buf, n, counts, cov)
    return strictfmt.run(buf, n, counts, cov)


@njit(cache=True)
def bucket(count):
    if count <= 3:
        return count - 1
    if count < 8:
        return 3
    if count < 16:
        return 4
    if count < 32:
        return 5
    if count < 128:
        return 6
    return 7


@njit(cache=True)
def exec_elements(tid, buf, n, counts, cov, bucketing):
    """Run the target; leave coverage map elements in ``cov[:k]``.

    ``counts`` is left zeroed for the next execution.
    """
    k, bug = run_target(tid, buf, n, counts, cov)
    for i in range(k):
        e = cov[i]
        if bucketing:
            cov[i] = e * 8 + bucket(counts[e])
        counts[e] = 0
    return k, bug


@njit(cache=True)
def run_batch(tid, seed, seed_len, energy, exec_index, stop_index, max_size, bucketing,
              buf, counts, cov, gmap,
              dflat, doffs, aflat, aoffs, cflat, coffs, ncorp,
              smode, lmode, wcum, fcum, ccum, c3cum, pulls, rewards,
              guided_start, guided_len, explore_frac, eps,
              rs, seq, eff, crash_seen, crash_counts):
    """Fuzz one seed until energy runs out, the stop index, or an event.

    Returns ``(executions, status, length, sequence_length, bug)``.  On
    ``STATUS_INTERESTING`` or ``STATUS_CRASH`` the input is in
    ``buf[:length]`` and the effective mutator ids in ``eff[:sequence_length]``.
    """
    done = 0
    guided = smode == MODE_MARKOV or smode == MODE_MARKOV_P2
    while done < energy and exec_index < stop_index:
        progress = 0.0
        if guided and guided_len > 0:
            progress = (exec_index - guided_start) / guided_len
        length = gen_sequence(rs, seq, smode, lmode, wcum, fcum, ccum, c3cum, pulls,
                              rewards, progress, explore_frac, eps)
        n = seed_len
        buf[:n] = seed[:n]
        for i in range(length):
            n, e = apply_one(seq[i], buf, n, rs, dflat, doffs, aflat, aoffs, cflat, coffs, ncorp)
            eff[i] = e
            if n > max_size:
                n = max_size
        k, bug = exec_elements(tid, buf, n, counts, cov, bucketing)
        exec_index += 1
        done += 1
        bandit = guided and lmode == 1
        if bandit:
            pulls[length] += 1
        if bug >= 0:
            crash_counts[bug] += 1
            if crash_seen[bug] == 0:
                crash_seen[bug] = 1
                return done, STATUS_CRASH, n, length, bug
            continue
        new = False
        for i in range(k):
            if gmap[cov[i]] == 0:
                new = True
                gmap[cov[i]] = 1
        if new:
            if bandit:
                rewards[length] += 1
            return done, STATUS_INTERESTING, n, length, -1
    return done, (STATUS_ENERGY if done >= energy else STATUS_STOP), 0, 0, -1
