from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pmlmc.errors import InvalidArgs
from pmlmc.runtime.batching import BatchPolicy, batch_size, build_coordinator_tree, tree_batch_size


class TestBatchSize:
    def test_min_clamp(self):
        assert batch_size(0, 16384, 8) == 21

    def test_done(self):
        assert batch_size(16384, 16384, 8) == 0

    def test_small_remainder(self):
        assert batch_size(90, 100, 2) == 1

    def test_capped_by_remaining(self):
        assert batch_size(99, 100, 1, BatchPolicy(0.5, 0.6)) == 1

    def test_max_clamp(self):
        # raw ceil(1000/1000) = 1, min clamp ceil(0.7 * 1000) = 700, max 700
        assert batch_size(0, 1000, 1, BatchPolicy(0.7, 0.7)) == 700

    def test_invalid(self):
        with pytest.raises(InvalidArgs):
            batch_size(5, 4, 1)
        with pytest.raises(InvalidArgs):
            batch_size(0, 4, 0)
        with pytest.raises(InvalidArgs):
            BatchPolicy(0.5, 0.1)

    @given(st.integers(1, 10**7), st.integers(1, 512), st.data())
    def test_within_clamps(self, N, parts, data):
        n = data.draw(st.integers(0, N - 1))
        b = batch_size(n, N, parts)
        lo, hi = math.ceil(0.01 * N / parts), math.ceil(0.62 * N / parts)
        assert 1 <= b <= N - n
        assert b <= hi and (b >= lo or b == N - n)


class TestTreeBatchSize:
    def test_example(self):
        assert tree_batch_size(0, 1000, 2, 10) == 1

    def test_done(self):
        assert tree_batch_size(1000, 1000, 2, 10) == 0

    def test_single_coordinator_matches_batch_size_raw(self):
        # P_i = P_total: raw is ceil((N - n) / N) = 1, clamps those of P_total partitions
        for n in (0, 10, 500):
            assert tree_batch_size(n, 1000, 10, 10) == batch_size(n, 1000, 10)

    def test_scaled_clamps(self):
        plain = tree_batch_size(0, 100_000, 4, 16)
        scaled = tree_batch_size(0, 100_000, 4, 16, scale_clamps=True)
        assert plain == math.ceil(0.01 * 100_000 / 16)
        assert scaled == math.ceil(0.01 * 100_000 * 4 / 16)

    def test_invalid(self):
        with pytest.raises(InvalidArgs):
            tree_batch_size(0, 10, 3, 2)


class TestTree:
    def test_single_root(self):
        t = build_coordinator_tree(1, 4)
        assert t.size == 1 and t.nodes[0].roots == [0]

    def test_eight_roots(self):
        t = build_coordinator_tree(8, 4, first_id=100)
        assert t.nodes[0].children == [100, 101]
        assert t.nodes[100].roots == [0, 1, 2, 3] and t.nodes[101].roots == [4, 5, 6, 7]
        assert t.depth() == 1

    def test_nine_roots_merges_leftover(self):
        t = build_coordinator_tree(9, 4)
        sizes = sorted(len(t.nodes[c].roots) for c in t.nodes[0].children)
        assert sizes == [4, 5]

    def test_fits_under_master(self):
        t = build_coordinator_tree(7, 4)
        assert t.size == 1 and len(t.nodes[0].roots) == 7

    def test_invalid(self):
        with pytest.raises(InvalidArgs):
            build_coordinator_tree(0, 4)
        with pytest.raises(InvalidArgs):
            build_coordinator_tree(4, 1)

    @given(st.integers(1, 3000), st.integers(2, 64))
    def test_structure(self, roots, limit):
        t = build_coordinator_tree(roots, limit, first_id=1)
        covered = sorted(r for n in t.nodes.values() for r in n.roots)
        assert covered == list(range(roots))
        assert all(n.is_leaf == bool(n.roots) or n.id == 0 for n in t.nodes.values())
        # every node respects the limit except merged tails, which stay below twice it
        fan = t.fan_out()
        assert all(f < 2 * limit for f in fan.values())
        for i, n in t.nodes.items():
            if i:
                assert i in t.nodes[n.parent].children
        # all leaves at the same depth
        depths = set()
        for leaf in (n for n in t.nodes.values() if n.is_leaf):
            d, cur = 0, leaf
            while cur.parent is not None:
                cur, d = t.nodes[cur.parent], d + 1
            depths.add(d)
        assert len(depths) == 1
