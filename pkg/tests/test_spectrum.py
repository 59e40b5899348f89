import math
from collections import defaultdict
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphclt.angular import cg_zero_squared
from sphclt.spectrum import (
    PowerSpectrum,
    UnreachableLevel,
    bridge_distribution,
    enumerate_paths,
    exact_sup,
    gkr_convolve,
    gkr_coupling,
    gkr_weight,
    hat_convolve,
    make_spectrum,
    parse_model,
    path_sup,
    sphere_coupling,
    star_convolve,
    transition_kernel,
    walk_bridge,
)

spectra = st.lists(st.floats(0.05, 2.0), min_size=2, max_size=5).map(lambda v: PowerSpectrum(tuple(v)))


def test_make_spectrum_examples():
    s = make_spectrum("exponential 0", 2)
    assert s.values == pytest.approx((1.0, math.exp(-1), math.exp(-2)), abs=1e-15)
    p = make_spectrum(("polynomial", 2), 2)
    assert p.values == pytest.approx((1.0, 0.25, 1 / 9), abs=1e-15)
    n = make_spectrum("exponential 1.5", 10, normalize=True)
    assert n.pointwise_variance() == pytest.approx(1.0, abs=1e-12)
    c = make_spectrum("custom 1, 0.5, 0.25")
    assert c.Lmax == 2


def test_make_spectrum_rejections():
    with pytest.raises(ValueError):
        make_spectrum("custom 1, 0, 2")
    with pytest.raises(ValueError):
        make_spectrum("custom 1, -1, 2")
    with pytest.raises(ValueError):
        make_spectrum("polynomial 1.5", 8)
    with pytest.raises(ValueError):
        make_spectrum("exponential -1", 8)
    with pytest.raises(ValueError):
        make_spectrum("exponential 0", 1)
    with pytest.raises(ValueError):
        parse_model("gaussian 2")


def test_spectrum_csv_roundtrip():
    s = make_spectrum("exponential 0.5", 6, normalize=True)
    text = s.to_csv()
    assert text.splitlines()[0] == "l,C_l"
    assert PowerSpectrum.from_csv(text).values == s.values


def test_hat_convolve_degenerate_spectra():
    c = 2.5
    t = hat_convolve([c], 4)
    for q in range(1, 5):
        assert t.get(q)[0] == pytest.approx(c**q)
    t1 = hat_convolve([0.0, c], 2)
    g = 3 * c  # Γ_1 = 3 C_1
    assert t1.get(2) == pytest.approx([g * g / 3, 0.0, 2 * g * g / 3], abs=1e-14)


@given(spectra, st.integers(2, 4))
@settings(max_examples=30, deadline=None)
def test_hat_total_mass(s, q):
    t = hat_convolve(s, q)
    assert math.fsum(t.get(q)) == pytest.approx(s.gamma_star**q, rel=1e-10)
    assert math.fsum(t.law(q)) == pytest.approx(1.0, abs=1e-12)


@given(spectra, st.sampled_from(["hat", "gkr"]))
@settings(max_examples=30, deadline=None)
def test_kernel_rows_stochastic(s, kind):
    K = transition_kernel(s, kind)
    # rows whose reach stays inside the 4 Lmax window are exact
    for a in range(3 * s.Lmax + 1):
        assert math.fsum(K[a]) == pytest.approx(1.0, abs=1e-12)


def test_hat_second_order_formula():
    s = make_spectrum("exponential 0.3", 4)
    g = s.gamma
    t = hat_convolve(s, 2).get(2)
    for l in range(9):
        ref = math.fsum(
            g[a] * g[b] * float(cg_zero_squared(a, b, l)) for a in range(5) for b in range(5)
        )
        assert t[l] == pytest.approx(ref, rel=1e-13, abs=1e-15)


def test_star_convolution_examples():
    s = make_spectrum("exponential 0", 8)
    g = s.gamma
    # p = 2 reduces to a single weighted sum
    for l, l1 in [(3, 2), (5, 7), (0, 4)]:
        ref = math.fsum(g[b] * float(cg_zero_squared(l1, b, l)) for b in range(9))
        assert star_convolve(s, 2, l, l1) == pytest.approx(ref, rel=1e-13, abs=1e-16)
    # degenerate spectrum: identity
    for l, l1 in [(0, 0), (2, 2), (1, 3)]:
        assert star_convolve([1.7], 2, l, l1) == pytest.approx(1.7 if l == l1 else 0.0)


def test_star_consistency_identity():
    s = make_spectrum("exponential 0", 8)
    q, p = 3, 2
    t = hat_convolve(s, q)
    prev = t.get(q + 1 - p)
    for l in range(2 * 8 + 1):
        acc = math.fsum(prev[l1] * star_convolve(s, p, l, l1) for l1 in range(prev.size))
        assert acc == pytest.approx(t.value(q, l), rel=1e-10, abs=1e-14)


def test_gkr_weight_examples():
    for l1 in range(5):
        for l2 in range(5):
            assert sum(gkr_weight(l1, l2, l) for l in range(l1 + l2 + 1)) == 1
    assert [gkr_weight(1, 1, l) for l in range(3)] == [Fraction(1, 9), Fraction(3, 9), Fraction(5, 9)]
    for l2 in range(4):
        for l in range(6):
            assert gkr_weight(0, l2, l) == (1 if l == l2 else 0)


def test_gkr_convolve_examples():
    assert gkr_convolve([3.0], 3).get(3)[0] == pytest.approx(1.0)
    t = gkr_convolve([0.0, 1.0], 2)
    assert t.get(2) == pytest.approx([1 / 9, 3 / 9, 5 / 9], abs=1e-15)
    s = make_spectrum("polynomial 2", 6)
    t = gkr_convolve(s, 4)
    for q in range(1, 5):
        assert math.fsum(t.get(q)) == pytest.approx(1.0, abs=1e-12)


def test_gkr_and_hat_share_support():
    s = make_spectrum("exponential 0", 5)
    h, k = hat_convolve(s, 3).get(3), gkr_convolve(s, 3).get(3)
    assert h.size == k.size == 16
    assert np.all(h > 0) and np.all(k > 0)
    assert not np.allclose(h / h.sum(), k)


def test_bridge_examples():
    d = bridge_distribution([1.0], 1, 2, 0)
    assert d.sup() == (1.0, 0)
    d = bridge_distribution([0.0, 1.0], 1, 2, 2)
    assert d.sup() == (pytest.approx(1.0), 1)
    with pytest.raises(UnreachableLevel):
        bridge_distribution([0.0, 1.0], 1, 2, 1)
    with pytest.raises(UnreachableLevel):
        bridge_distribution([1.0, 1.0], 1, 2, 7)
    with pytest.raises(ValueError):
        bridge_distribution([1.0, 1.0], 2, 2, 0)


def test_bridge_tie_break_smallest():
    # Γ_0 = Γ_1: reaching l = 1 via (0 then 1) or (1 then 0) is equally likely
    d = bridge_distribution([1.0, 1.0 / 3.0], 1, 2, 1)
    assert d.probabilities[:2] == pytest.approx([0.5, 0.5], abs=1e-15)
    assert d.sup() == (pytest.approx(0.5), 0)


@given(spectra, st.integers(2, 4), st.data(), st.sampled_from(["hat", "gkr"]))
@settings(max_examples=40, deadline=None)
def test_bridges_sum_to_one(s, q, data, kind):
    p = data.draw(st.integers(1, q - 1))
    l = data.draw(st.integers(0, q * s.Lmax))
    d = bridge_distribution(s, p, q, l, kind)
    assert d.total() == pytest.approx(1.0, abs=1e-12)


def _enumerated(s, q, kind):
    end = defaultdict(float)
    marg = defaultdict(lambda: defaultdict(float))
    for path, pr in enumerate_paths(s, q, kind):
        end[path[-1]] += pr
        for p in range(1, q):
            marg[(p, path[-1])][path[p - 1]] += pr
    return end, marg


@pytest.mark.parametrize("kind", ["hat", "gkr"])
def test_path_enumeration_oracle(kind):
    s = make_spectrum("exponential 0.5", 3)
    for q in (2, 3):
        t = hat_convolve(s, q) if kind == "hat" else gkr_convolve(s, q)
        end, marg = _enumerated(s, q, kind)
        law = t.law(q)
        for l in range(q * 3 + 1):
            assert end[l] == pytest.approx(law[l], abs=1e-12)
            for p in range(1, q):
                d = bridge_distribution(s, p, q, l, kind).probabilities
                for lam, v in marg[(p, l)].items():
                    assert d[lam] == pytest.approx(v / end[l], abs=1e-12)


def test_path_sup_matches_enumeration():
    s = make_spectrum("exponential 0", 3)
    q = 3
    paths = list(enumerate_paths(s, q))
    for l in range(10):
        cands = [(pr, path) for path, pr in paths if path[-1] == l]
        tot = math.fsum(pr for pr, _ in cands)
        best = max(pr for pr, _ in cands) / tot
        val, path = path_sup(s, q, l)
        assert val == pytest.approx(best, abs=1e-12)
        assert len(path) == q - 1


def test_exact_walk_matches_float_bridge():
    s = make_spectrum("custom 1, 0.5, 0.25")
    gamma = {l: Fraction(2 * l + 1) * Fraction(c).limit_denominator(100) for l, c in enumerate(s.values)}
    for kind, couple in (("hat", sphere_coupling), ("gkr", gkr_coupling)):
        for p, q, l in [(1, 2, 2), (1, 3, 3), (2, 3, 1)]:
            ex = walk_bridge(gamma, couple, p, q, l)
            fl = bridge_distribution(s, p, q, l, kind).probabilities
            assert sum(ex.values()) == 1
            for lam, v in ex.items():
                assert float(v) == pytest.approx(fl[lam], abs=1e-12)
            best, lam = exact_sup(ex)
            assert bridge_distribution(s, p, q, l, kind).sup()[1] == lam


def test_convolution_csv():
    t = hat_convolve(make_spectrum("exponential 0", 3), 2)
    lines = t.to_csv().splitlines()
    assert lines[0] == "q,l,value"
    assert len(lines) == 1 + 4 + 7
