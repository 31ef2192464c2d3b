"""Mutator table conformance, selection weights, dictionaries, and the
compiled mutation route checked against the pure-Python one."""

import time

import numpy as np
import pytest

from mutator_cases import CASES, MAX, ScriptedRng, check_case, run_case
from pairfuzz import _kernel as K
from pairfuzz.mutators import (CHUNK_IDS, DEFAULT_BAR_MM, MUTATOR_IDS, NUM_MUTATORS, UNIT_IDS,
                               MutationContext, WeightTable, apply_mutator, default_weight_table,
                               format_dictionary, generate_sequence_fixed, mutate_inplace,
                               parse_dictionary, sample_cumulative, sample_default_length)
from pairfuzz.rng import FuzzRng


def _case_id(case):
    mid, data, draws, *_ = case
    return f"m{mid}-len{len(data)}-{'_'.join(map(str, draws))}"


class TestMutatorTable:
    @pytest.mark.parametrize("case", CASES, ids=[_case_id(c) for c in CASES])
    def test_case(self, case):
        out, eff, left = run_case(case)
        assert out == case[4]
        assert eff == case[5]
        assert left == [], "scripted draws left unconsumed"

    def test_every_mutator_has_three_cases_and_boundary_lengths(self):
        for mid in MUTATOR_IDS:
            mine = [c for c in CASES if c[0] == mid]
            assert len(mine) >= 3, mid
            lengths = {len(c[1]) for c in mine}
            assert 1 in lengths and MAX in lengths, mid

    def test_table_runs_under_one_second(self):
        start = time.perf_counter()
        assert all(check_case(c) for c in CASES)
        assert time.perf_counter() - start < 1.0


class TestMutatorContract:
    def test_ids_partition(self):
        assert UNIT_IDS | CHUNK_IDS == set(MUTATOR_IDS)
        assert not UNIT_IDS & CHUNK_IDS
        assert len(MUTATOR_IDS) == NUM_MUTATORS == 32

    def test_rejects_bad_id_and_empty_input(self):
        ctx = MutationContext(rng=FuzzRng(1))
        with pytest.raises(ValueError):
            apply_mutator(0, b"a", ctx)
        with pytest.raises(ValueError):
            apply_mutator(33, b"a", ctx)
        with pytest.raises(ValueError):
            apply_mutator(1, b"", ctx)

    @pytest.mark.parametrize("mid", MUTATOR_IDS)
    def test_output_nonempty_and_bounded(self, mid):
        rng = FuzzRng(mid)
        ctx = MutationContext(rng=rng, dictionary=[b"TOKEN"], auto_dictionary=[b"\x89A"],
                              corpus_view=[b"donor-bytes"], max_input_size=16)
        for _ in range(300):
            n = 1 + rng.randbelow(16)
            data = bytes(rng.randbelow(256) for _ in range(n))
            out, eff = apply_mutator(mid, data, ctx)
            assert 1 <= len(out) <= 16
            assert 1 <= eff <= 32
            if mid in UNIT_IDS:
                assert len(out) == len(data)
                assert eff in UNIT_IDS

    def test_unit_mutators_do_not_touch_other_bytes(self):
        rng = FuzzRng(5)
        for mid in (1, 2, 7, 8, 17, 18, 19, 20):
            ctx = MutationContext(rng=rng)
            data = bytes(range(40, 72))
            out, _ = apply_mutator(mid, data, ctx)
            assert sum(a != b for a, b in zip(out, data)) <= 1

    def test_mutate_inplace_truncates_after_each_step(self):
        ctx = MutationContext(rng=FuzzRng(3), corpus_view=[b"x" * 50], max_input_size=10)
        buf = bytearray(b"0123456789")
        eff = mutate_inplace(buf, [29, 28, 24, 1], ctx)
        assert len(eff) == 4 and len(buf) <= 10


class TestWeights:
    def test_printed_probabilities(self):
        # the five probabilities printed beside the bar chart
        w = default_weight_table()
        for mid, p in {1: 0.043, 2: 0.035, 3: 0.023, 31: 0.039, 32: 0.020}.items():
            assert w.probability(mid) == pytest.approx(p, abs=5e-4)
        assert sum(w.probabilities()) == pytest.approx(1.0)
        assert len(DEFAULT_BAR_MM) == 32

    def test_weight_table_validation(self):
        with pytest.raises(ValueError):
            WeightTable([1.0] * 31)
        with pytest.raises(ValueError):
            WeightTable([0.0] * 32)
        with pytest.raises(ValueError):
            WeightTable([-1.0] + [1.0] * 31)

    def test_sampling_frequencies(self):
        w = default_weight_table()
        rng = FuzzRng(11)
        n = 200_000
        hits = np.bincount([w.sample(rng) for _ in range(n)], minlength=33)[1:]
        p = np.array(w.probabilities())
        assert np.all(np.abs(hits / n - p) < 5 * np.sqrt(p * (1 - p) / n))

    def test_zero_weight_never_sampled(self):
        weights = [0.0] * 32
        weights[4] = 1.0
        weights[31] = 0.0
        w = WeightTable(weights)
        rng = FuzzRng(2)
        assert {w.sample(rng) for _ in range(1000)} == {5}

    def test_sample_cumulative_end_skips_zero_slots(self):
        class One:
            def random(self):
                return 1.0 - 1e-17  # rounds the product to the total
        assert sample_cumulative([1.0, 2.0, 2.0], One()) in (0, 1)

    def test_default_length_distribution(self):
        rng = FuzzRng(4)
        lengths = [sample_default_length(rng) for _ in range(40_000)]
        values, counts = np.unique(lengths, return_counts=True)
        assert values.tolist() == [2, 4, 8, 16]
        assert np.all(np.abs(counts / 40_000 - 0.25) < 0.01)

    def test_fixed_sequence(self):
        seq = generate_sequence_fixed(default_weight_table(), FuzzRng(9))
        assert len(seq) in (2, 4, 8, 16) and all(1 <= m <= 32 for m in seq)


class TestDictionary:
    def test_parse(self):
        text = '# comment\n\nkw1="IHDR"\nraw="\\x00\\xffA\\\\\\""\n"bare"\nname@2="x"\n'
        assert parse_dictionary(text) == [b"IHDR", b"\x00\xffA\\\"", b"bare", b"x"]

    def test_roundtrip(self):
        entries = [bytes([b]) for b in range(256)] + [b'quote"back\\slash', b"\x89PNG"]
        assert parse_dictionary(format_dictionary(entries)) == entries

    @pytest.mark.parametrize("bad", ['kw=IHDR', 'kw="\\q"', 'kw="\\x4"'])
    def test_rejects_malformed(self, bad):
        with pytest.raises(ValueError):
            parse_dictionary(bad)


def _flat(entries):
    offs = np.zeros(len(entries) + 1, np.int64)
    for i, e in enumerate(entries):
        offs[i + 1] = offs[i] + len(e)
    return np.frombuffer(b"".join(entries) or b"\0", np.uint8).copy(), offs


class TestKernelRoute:
    """The compiled mutators consume the same draws and produce the same bytes."""

    def test_random_sequences_match_reference(self):
        dicts, auto, corp = [b"IHDR", b"Copyright\x00"], [b"\x89CHK"], [bytes(range(40)), b"xyz"]
        tables = (*_flat(dicts), *_flat(auto), *_flat(corp), len(corp))
        empty = (_flat([])[0], np.zeros(1, np.int64)) * 3 + (0,)
        for trial in range(1500):
            r = FuzzRng(trial)
            n = 1 + r.randbelow(20)
            data = bytes(r.randbelow(256) for _ in range(n))
            seq = [1 + r.randbelow(32) for _ in range(1 + r.randbelow(8))]
            full = trial % 3 != 0
            ctx = MutationContext(rng=FuzzRng(trial * 7 + 1),
                                  dictionary=dicts if full else [],
                                  auto_dictionary=auto if full else [],
                                  corpus_view=corp if full else [], max_input_size=64)
            buf = bytearray(data)
            eff = mutate_inplace(buf, seq, ctx)

            rs = np.array([trial * 7 + 1], np.uint64)
            kb = np.zeros(1024, np.uint8)
            kb[:n] = np.frombuffer(data, np.uint8)
            m, keff = n, []
            for s in seq:
                m, e = K.apply_one(s, kb, m, rs, *(tables if full else empty))
                keff.append(e)
                m = min(m, 64)
            assert bytes(kb[:m]) == bytes(buf), (trial, seq)
            assert keff == eff
            assert int(rs[0]) == ctx.rng.state

    def test_rng_twins(self):
        rs = np.array([123], np.uint64)
        ref = FuzzRng(123)
        for n in (1, 2, 7, 255, 1 << 20):
            assert K.randbelow(rs, n) == ref.randbelow(n)
            assert K.rand01(rs) == ref.random()

    def test_default_length_twin(self):
        rs = np.array([77], np.uint64)
        ref = FuzzRng(77)
        for _ in range(100):
            assert K.default_length(rs) == sample_default_length(ref)


def test_scripted_rng_rejects_out_of_range():
    with pytest.raises(AssertionError):
        ScriptedRng([5]).randbelow(5)
