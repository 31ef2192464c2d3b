"""Synthetic targets: edge tables, shipped seeds and dictionaries, bug
witnesses, coverage maps and the interesting-input predicate."""

import pytest

from pairfuzz.mutators import load_dictionary
from pairfuzz.targets import (BUCKETS, CoverageMap, builtin_targets, edge_of, execute, get_target,
                              is_interesting)
from pairfuzz.targets import arith, chunkfmt, strictfmt

NAMES = ("chunkfmt", "arith", "strictfmt")


class TestRegistry:
    def test_builtin_names(self):
        assert [t.name for t in builtin_targets()] == list(NAMES)

    def test_unknown_target(self):
        with pytest.raises(KeyError):
            get_target("nope")

    @pytest.mark.parametrize("name", NAMES)
    def test_edge_ids_are_dense(self, name):
        t = get_target(name)
        assert [e.id for e in t.edges] == list(range(t.edge_count))
        assert len({e.label for e in t.edges}) == t.edge_count

    def test_edge_counts(self):
        assert get_target("chunkfmt").edge_count == 661
        assert get_target("arith").edge_count == 421


class TestShippedData:
    @pytest.mark.parametrize("name", NAMES)
    def test_seed_files_match_builder(self, name):
        t = get_target(name)
        assert t.seeds_dir().is_dir()
        assert t.seeds() == t.seed_builder()

    @pytest.mark.parametrize("name", NAMES)
    def test_dictionary_file_matches_module(self, name):
        t = get_target(name)
        assert load_dictionary(t.dictionary_path()) == list(t.dictionary)

    @pytest.mark.parametrize("name", NAMES)
    def test_seeds_run_clean(self, name):
        t = get_target(name)
        for data in t.seeds().values():
            res = execute(t, data)
            assert not res.crashed
            assert res.coverage.count > 5


class TestBehaviour:
    @pytest.mark.parametrize("name", NAMES)
    def test_deterministic(self, name):
        t = get_target(name)
        for data in list(t.seeds().values()) + [b"", b"\x00", b"garbage" * 9]:
            assert execute(t, data).elements == execute(t, data).elements

    @pytest.mark.parametrize("name", NAMES)
    def test_edges_in_range(self, name):
        t = get_target(name)
        for data in list(t.seeds().values()) + [b"", b"\xff" * 40]:
            assert all(0 <= e < t.edge_count for e in execute(t, data).elements)

    def test_bad_magic_is_shallow(self):
        t = get_target("chunkfmt")
        deep = execute(t, t.seeds()["basic.bin"]).coverage.count
        assert execute(t, b"XXXXXXXX").coverage.count < deep

    def test_bucketing_spreads_hit_counts(self):
        t = get_target("chunkfmt")
        data = t.seeds()["basic.bin"]
        plain = execute(t, data).elements
        bucketed = execute(t, data, bucketing=True).elements
        assert {edge_of(e, True) for e in bucketed} == plain
        assert all(e // BUCKETS < t.edge_count for e in bucketed)


class TestBugWitnesses:
    def test_chunkfmt_text_overflow(self):
        data = chunkfmt.build(chunkfmt.chunk(b"T", b"Title\x00x"),
                              chunkfmt.chunk(b"T", b"Copyright\x00" + b"a" * 25))
        assert execute(get_target("chunkfmt"), data).bug_id == "CHK001"

    def test_chunkfmt_rle_overrun(self):
        data = chunkfmt.build(chunkfmt.chunk(b"D", bytes([4] + [255, 0] * 5)))
        assert execute(get_target("chunkfmt"), data).bug_id == "CHK002"

    def test_arith_adjacent_high_records(self):
        data = arith.build(arith.record(6, 24 * 32), arith.record(7, 24 * 32))
        assert execute(get_target("arith"), data).bug_id == "ARI001"
        below = arith.build(arith.record(6, 23 * 32), arith.record(7, 24 * 32))
        assert execute(get_target("arith"), below).bug_id is None

    def test_strictfmt_oversized_flagged(self):
        data = strictfmt.header(flags=0x80, width=4096, height=4096, depth=16, channels=4)
        assert execute(get_target("strictfmt"), data).bug_id == "STR001"
        clean = strictfmt.header(flags=0x00, width=4096, height=4096, depth=16, channels=4)
        assert execute(get_target("strictfmt"), clean).bug_id is None


class TestPlantedStructure:
    def test_arith_rung_needs_both_fields(self):
        t = get_target("arith")
        base = execute(t, arith.build(arith.record(0, 64))).elements
        up = execute(t, arith.build(arith.record(0, 96))).elements
        value_only = execute(t, arith.build(arith.record(0, 96, level=2))).elements
        level_only = execute(t, arith.build(arith.record(0, 64, level=3))).elements
        rung = up - base
        assert [t.edges[e].label for e in rung] == ["rung[3]"]
        # either edit alone only reaches the kind's mismatch edge
        for single in (value_only, level_only):
            assert not single & rung
            assert [t.edges[e].label for e in single - base] == ["mismatch[0]"]

    def test_chunkfmt_gamma_channels(self):
        t = get_target("chunkfmt")
        low = execute(t, chunkfmt.build(chunkfmt.chunk(b"G", chunkfmt.gamma(64, 64)))).elements
        high = execute(t, chunkfmt.build(chunkfmt.chunk(b"G", chunkfmt.gamma(64, 96)))).elements
        assert high - low

    def test_chunkfmt_gamma_rung_needs_both_fields(self):
        t = get_target("chunkfmt")

        def run(slot1):
            payload = chunkfmt.gamma(64) + slot1
            return execute(t, chunkfmt.build(chunkfmt.chunk(b"G", payload))).elements

        base = run(bytes((0xE1, 2, 0, 64)))
        rung = run(bytes((0xE1, 3, 0, 96))) - base
        assert [t.edges[e].label for e in rung] == ["g_rung[51]"]
        for single in (bytes((0xE1, 3, 0, 64)), bytes((0xE1, 2, 0, 96))):
            assert [t.edges[e].label for e in run(single) - base] == ["g_mismatch[1]"]
        # a consistent slot relabelled to another channel ends the chunk
        moved = run(bytes((0xE2, 2, 0, 64))) - base
        assert [t.edges[e].label for e in moved] == ["g_badchan"]

    def test_strictfmt_rejects_length_change(self):
        t = get_target("strictfmt")
        ok = strictfmt.header()
        assert execute(t, ok + b"\x00").coverage.count < execute(t, ok).coverage.count


class TestCoverageMap:
    def test_merge_counts_new(self):
        m = CoverageMap(16)
        assert m.merge([1, 2, 2, 3]) == 3
        assert m.merge([3, 4]) == 1
        assert m.count == 4 and 4 in m and 5 not in m
        assert m.elements() == {1, 2, 3, 4}

    def test_power_of_two(self):
        with pytest.raises(ValueError):
            CoverageMap(12)

    def test_is_interesting_merges_only_when_new(self):
        t = get_target("arith")
        g = CoverageMap()
        r = execute(t, t.seeds()["ascending.bin"])
        assert is_interesting(g, r)
        assert g.count == r.coverage.count
        assert not is_interesting(g, r)
        snapshot = g.copy()
        assert not is_interesting(g, execute(t, t.seeds()["ascending.bin"]))
        assert g.elements() == snapshot.elements()
