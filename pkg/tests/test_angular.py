import math
from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphclt.angular import (
    SignedSqrtRational,
    cg,
    cg_squared,
    cg_zero,
    chain_intermediates,
    chained_cg,
    factorial,
    orthogonality_report,
    triangle_ok,
    wigner6j,
    wigner6j_float,
    wigner6j_racah,
)

S = SignedSqrtRational.parse


def test_factorial_matches_math():
    for n in range(60):
        assert factorial(n) == math.factorial(n)
    with pytest.raises(ValueError):
        factorial(-1)


@pytest.mark.parametrize("args,expected", [((1, 1, 2), True), ((1, 1, 3), False), ((0, 5, 5), True)])
def test_triangle(args, expected):
    assert triangle_ok(*args) is expected


@pytest.mark.parametrize(
    "args,expected",
    [
        ((1, 1, 1, -1, 0, 0), "+sqrt(1/3)"),
        ((1, 1, 1, 0, 2, 1), "+sqrt(1/2)"),
        ((1, 0, 1, 0, 2, 0), "+sqrt(2/3)"),
        ((1, 0, 1, 0, 0, 0), "-sqrt(1/3)"),
        ((1, 0, 1, 0, 1, 0), "0"),
        ((2, 1, 0, 0, 2, 1), "+sqrt(1)"),
    ],
)
def test_cg_known_values(args, expected):
    assert cg(*args) == S(expected)
    assert str(cg(*args)) == expected


def test_cg_trivial_coupling():
    for l1 in range(10):
        assert cg(l1, 0, 0, 0, l1, 0) == S("+sqrt(1)")


def test_cg_selection_rules():
    assert not cg(2, 1, 1, 0, 2, 0)  # m mismatch
    assert not cg(1, 0, 1, 0, 3, 0)  # triangle
    with pytest.raises(ValueError):
        cg(1, 2, 1, 0, 2, 2)


def _gram_schmidt_block():
    """Independent oracle for l1 = l2 = 1: lower from the stretched state with J-."""
    import numpy as np

    basis = [(m1, m2) for m1 in (-1, 0, 1) for m2 in (-1, 0, 1)]
    idx = {b: i for i, b in enumerate(basis)}

    def lower(v):
        out = np.zeros(9)
        for (m1, m2), c in zip(basis, v):
            if c == 0:
                continue
            if m1 > -1:
                out[idx[(m1 - 1, m2)]] += c * math.sqrt(1 * 2 - m1 * (m1 - 1))
            if m2 > -1:
                out[idx[(m1, m2 - 1)]] += c * math.sqrt(1 * 2 - m2 * (m2 - 1))
        return out

    states = {}
    for L in (2, 1, 0):
        v = np.zeros(9)
        v[idx[(1, L - 1)]] = 1.0
        # orthogonalize against higher-L states with M = L
        for (Lp, Mp), u in states.items():
            if Mp == L:
                v = v - np.dot(u, v) * u
        v /= np.linalg.norm(v)
        # Condon-Shortley: <l1 l1, l2 (L - l1) | L L> > 0
        if v[idx[(1, L - 1)]] < 0:
            v = -v
        M = L
        states[(L, M)] = v
        while M > -L:
            v = lower(v)
            v /= np.linalg.norm(v)
            M -= 1
            states[(L, M)] = v
    return basis, states


def test_cg_against_gram_schmidt():
    basis, states = _gram_schmidt_block()
    for (L, M), v in states.items():
        for (m1, m2), c in zip(basis, v):
            assert float(cg(1, m1, 1, m2, L, M)) == pytest.approx(c, abs=1e-12)


def test_cg_zero_values():
    assert cg_zero(1, 1, 1) == SignedSqrtRational.zero()
    assert cg_zero(0, 0, 0) == S("+sqrt(1)")
    assert cg_zero(1, 1, 2) == S("+sqrt(2/3)")
    assert cg_zero(2, 2, 2) == S("-sqrt(2/7)")


def test_cg_zero_matches_general_formula():
    for l1, l2, l3 in product(range(9), repeat=3):
        assert cg_zero(l1, l2, l3) == cg(l1, 0, l2, 0, l3, 0)


@given(st.integers(0, 5), st.integers(0, 5), st.integers(0, 10), st.data())
@settings(max_examples=150, deadline=None)
def test_cg_symmetries(l1, l2, l, data):
    m1 = data.draw(st.integers(-l1, l1))
    m2 = data.draw(st.integers(-l2, l2))
    m = m1 + m2
    if abs(m) > l:
        return
    a = cg(l1, m1, l2, m2, l, m)
    # exchange and reflection symmetries
    sign = -1 if (l1 + l2 - l) % 2 else 1
    assert cg(l2, m2, l1, m1, l, m) == (a if sign > 0 else -a)
    assert cg(l1, -m1, l2, -m2, l, -m) == (a if sign > 0 else -a)


def test_orthogonality_small_blocks():
    r = orthogonality_report(1, 1)
    assert r.ok and r.diagonal_exact
    r0 = orthogonality_report(0, 0)
    assert r0.ok and r0.checked == 2
    with pytest.raises(ValueError):
        orthogonality_report(1, 1, tolerance=0)


def test_row_normalization_exact():
    for l1, l2 in product(range(4), repeat=2):
        for l in range(abs(l1 - l2), l1 + l2 + 1):
            for m in range(-l, l + 1):
                tot = sum(
                    (cg_squared(l1, m1, l2, m - m1, l, m) for m1 in range(-l1, l1 + 1) if abs(m - m1) <= l2),
                    Fraction(0),
                )
                assert tot == 1


def test_signed_sqrt_roundtrip():
    for text in ("0", "+sqrt(2/3)", "-sqrt(5)", "+sqrt(1/36)"):
        assert str(S(text)) == text
    for bad in ("sqrt2", "+sqrt(x)", "+sqrt(1/0)", ""):
        with pytest.raises((ValueError, ZeroDivisionError)):
            S(bad)
    v = S("-sqrt(2/7)")
    assert v.square() == Fraction(2, 7)
    assert float(v) == pytest.approx(-math.sqrt(2 / 7))


def test_wigner6j_values():
    assert wigner6j(1, 1, 1, 1, 1, 1) == S("+sqrt(1/36)")
    assert wigner6j(1, 1, 2, 0, 2, 1) == S("+sqrt(1/15)")
    assert wigner6j(1, 1, 3, 1, 1, 1) == SignedSqrtRational.zero()
    assert wigner6j(1, 1, 1, 1, 1, 1).square() == Fraction(1, 36)


SMALL6 = [a for a in product(range(4), repeat=6)]


def test_wigner6j_paths_agree():
    for a in SMALL6:
        assert wigner6j(*a) == wigner6j_racah(*a), a


@given(st.tuples(*[st.integers(0, 4)] * 6))
@settings(max_examples=300, deadline=None)
def test_wigner6j_symmetries(a):
    l1, l2, l3, l4, l5, l6 = a
    v = wigner6j_racah(*a)
    # column permutations
    assert wigner6j_racah(l2, l1, l3, l5, l4, l6) == v
    assert wigner6j_racah(l1, l3, l2, l4, l6, l5) == v
    assert wigner6j_racah(l3, l2, l1, l6, l5, l4) == v
    # exchange of upper and lower entries in two columns
    assert wigner6j_racah(l4, l5, l3, l1, l2, l6) == v
    assert wigner6j_racah(l1, l5, l6, l4, l2, l3) == v


@given(st.tuples(*[st.integers(0, 4)] * 6))
@settings(max_examples=60, deadline=None)
def test_wigner6j_literal_matches_racah(a):
    assert wigner6j(*a) == wigner6j_racah(*a)


def test_wigner6j_float():
    assert wigner6j_float(1, 1, 1, 1, 1, 1) == pytest.approx(1 / 6)


def test_chained_zero_projection_is_product():
    leaves = [(1, 0), (2, 0), (1, 0)]
    for inter in chain_intermediates([1, 2, 1], 2):
        v = chained_cg(leaves, inter, 0)
        expect = float(cg_zero(1, 2, inter[0])) * float(cg_zero(inter[0], 1, 2))
        assert float(v) == pytest.approx(expect, abs=1e-15)
    with pytest.raises(ValueError):
        chained_cg([(1, 0)], [], 0)


def test_chain_intermediates_complete():
    got = list(chain_intermediates([1, 1, 1], 1))
    assert got == [(0, 1), (1, 1), (2, 1)]
    assert list(chain_intermediates([3], 3)) == [()]
