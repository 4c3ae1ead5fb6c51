from __future__ import annotations

import math
import random

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from pmlmc.accumulate import ExactSum, LevelAccumulator
from pmlmc.rng import sample_blocks, sample_stream, sample_uniforms


def test_stream_depends_on_all_keys():
    base = sample_stream(1, 2, 3).random(4)
    assert np.array_equal(base, sample_stream(1, 2, 3).random(4))
    for other in (sample_stream(2, 2, 3), sample_stream(1, 3, 3), sample_stream(1, 2, 4)):
        assert not np.array_equal(base, other.random(4))


@given(st.integers(0, 2**64 - 1), st.integers(0, 5), st.integers(1, 10**12), st.integers(1, 50))
def test_blocks_split_anywhere(seed, level, first, n):
    whole = sample_blocks(seed, level, first, first + n - 1)
    cut = n // 2
    left = sample_blocks(seed, level, first, first + cut - 1)
    right = sample_blocks(seed, level, first + cut, first + n - 1)
    assert np.array_equal(whole, np.concatenate([left, right]))


def test_uniforms_are_uniform():
    u = sample_uniforms(7, 0, 1, 200_000)
    assert 0 <= u.min() and u.max() < 1
    assert abs(u.mean() - 0.5) < 5 * math.sqrt(1 / 12 / len(u))
    # levels draw independent values for the same index
    assert abs(np.corrcoef(u, sample_uniforms(7, 1, 1, 200_000))[0, 1]) < 0.02


@given(st.lists(st.floats(-1e300, 1e300), max_size=60), st.randoms(use_true_random=False))
def test_exact_sum_order_independent(xs, rnd):
    a, b = ExactSum(), ExactSum()
    for x in xs:
        a.add(x)
    ys = xs[:]
    rnd.shuffle(ys)
    for y in ys:
        b.add(y)
    assert a.value() == b.value() == math.fsum(xs)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=80), st.integers(1, 6))
def test_accumulator_merge_matches_serial(ys, parts):
    serial = LevelAccumulator(0)
    for y in ys:
        serial.add(y, abs(y))
    chunks = [LevelAccumulator(0) for _ in range(parts)]
    for i, y in enumerate(ys):
        chunks[i % parts].add(y, abs(y))
    merged = LevelAccumulator(0)
    for c in reversed(chunks):
        merged.merge(c)
    assert merged.count == serial.count
    assert merged.sum_y.value() == serial.sum_y.value()
    assert merged.sum_y2.value() == serial.sum_y2.value()
    assert merged.sum_cost.value() == serial.sum_cost.value()


def test_merge_rejects_other_level():
    import pytest

    with pytest.raises(ValueError):
        LevelAccumulator(0).merge(LevelAccumulator(1))


def test_copy_is_independent():
    a = LevelAccumulator(2)
    a.add(1.0, 1.0)
    b = a.copy()
    b.add(random.random(), 0.0)
    assert a.count == 1 and a.sum_y.value() == 1.0
