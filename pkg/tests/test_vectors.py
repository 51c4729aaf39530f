import numpy as np
import pytest
from hypothesis import given, strategies as st

from heavyprod.vectors import (
    DimensionError,
    SignVector,
    inner_product,
    inner_products,
    nbytes_for,
    pack_rows,
    paired_inner_products,
    stack,
    subset_product,
    unpack_signs,
)

signs_st = st.lists(st.sampled_from([-1, 1]), min_size=1, max_size=130)


@st.composite
def sign_pairs(draw):
    d = draw(st.integers(1, 130))
    pick = st.lists(st.sampled_from([-1, 1]), min_size=d, max_size=d)
    return draw(pick), draw(pick)


def test_examples():
    assert inner_product(SignVector.from_signs([1] * 5), SignVector.from_signs([1] * 5)) == 5
    x = SignVector.from_signs([1, -1, 1, -1])
    y = SignVector.from_signs([-1, 1, -1, 1])
    assert inner_product(x, y) == -4
    a = SignVector.from_signs([1, 1, 1, 1, 1])
    b = SignVector.from_signs([1, -1, 1, -1, 1])
    assert inner_product(a, b) == 1


def test_subset_product_examples():
    x = SignVector.from_signs([1, -1, 1])
    assert subset_product(x, []) == 1
    assert subset_product(x, [1, 2]) == -1
    assert subset_product(SignVector.from_signs([-1, -1, 1]), [0, 1]) == 1
    with pytest.raises(IndexError):
        subset_product(x, [3])


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        inner_product(SignVector.from_signs([1, 1]), SignVector.from_signs([1, 1, 1]))


def test_storage_and_padding():
    v = SignVector.from_signs([1] * 11)
    assert len(v.bits) == nbytes_for(11) == 2
    assert v.bits[1] >> 3 == 0
    with pytest.raises(ValueError):
        SignVector(11, bytes([0xFF, 0xFF]))
    with pytest.raises(ValueError):
        SignVector(0, b"")


@given(sign_pairs())
def test_inner_product_matches_loop(pair):
    xs, ys = pair
    x, y = SignVector.from_signs(xs), SignVector.from_signs(ys)
    assert inner_product(x, y) == sum(a * b for a, b in zip(xs, ys))
    assert (inner_product(x, y) - len(xs)) % 2 == 0


@given(signs_st)
def test_self_and_negation(xs):
    x = SignVector.from_signs(xs)
    assert inner_product(x, x) == len(xs)
    assert inner_product(x, x.negate()) == -len(xs)
    assert [x.entry(i) for i in range(len(xs))] == xs


@given(signs_st, st.data())
def test_subset_product_recursion(xs, data):
    x = SignVector.from_signs(xs)
    d = len(xs)
    members = data.draw(st.sets(st.integers(0, d - 1)))
    outside = [i for i in range(d) if i not in members]
    if not outside:
        return
    i = data.draw(st.sampled_from(outside))
    assert subset_product(x, sorted(members | {i})) == subset_product(x, sorted(members)) * x.entry(i)


@given(st.integers(1, 40), st.integers(1, 70), st.integers(0, 2**32 - 1))
def test_packed_matrix_paths(n, d, seed):
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, (n, d)).astype(bool)
    rows = pack_rows(bits)
    signs = unpack_signs(rows, d).astype(np.int64)
    assert np.array_equal(signs, np.where(bits, 1, -1))
    ips = inner_products(rows, rows[::-1], d, chunk=7)
    assert np.array_equal(ips, signs @ signs[::-1].T)
    assert np.array_equal(paired_inner_products(rows, rows[::-1], d), np.diag(ips))
    vecs = [SignVector.from_row(r, d) for r in rows]
    assert np.array_equal(stack(vecs), rows)
