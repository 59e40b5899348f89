import math

import numpy as np
import pytest

from sphclt.cltcheck import hermite_variance
from sphclt.harmonics import legendre, quadrature_grid
from sphclt.simulate import (
    ExperimentConfig,
    FieldSample,
    GridMap,
    SymmetryError,
    analyze_map,
    empirical_stats,
    enforce_hermitian,
    hermitian_defect,
    hermite_map,
    run_experiment,
    sample_alm,
    sample_batch,
    subordinate_q2_exact,
    synthesize,
)
from sphclt.spectrum import make_spectrum

S8 = make_spectrum("exponential 0", 8, normalize=True)


def test_sample_determinism_and_symmetry():
    a = sample_alm(S8, 42)
    b = sample_alm(S8, 42)
    assert np.array_equal(a.alm, b.alm)
    assert a.symmetry_defect() == 0.0
    assert not np.array_equal(a.alm, sample_alm(S8, 43).alm)
    batch = sample_batch(S8, 7, 10, 3)
    assert np.array_equal(batch[1], sample_batch(S8, 7, 11, 1)[0])


def test_sample_moments():
    s = make_spectrum("exponential 0.5", 4)
    N = 10000
    alm = sample_batch(s, 11, 0, N)
    for l in range(5):
        for m in range(0, l + 1):
            x = np.abs(alm[:, l, 4 + m]) ** 2
            se = x.std(ddof=1) / math.sqrt(N)
            assert abs(x.mean() - s.C[l]) < 4 * se
            if m > 0:
                y = alm[:, l, 4 + m].real * alm[:, l, 4 + m].imag
                assert abs(y.mean()) < 4 * y.std(ddof=1) / math.sqrt(N)


def test_field_sample_validation():
    with pytest.raises(ValueError):
        FieldSample(2, np.zeros((2, 5)))
    f = sample_alm(S8, 1)
    assert f[3, -2] == pytest.approx(np.conj(f[3, 2]))
    with pytest.raises(IndexError):
        f[2, 3]


def test_hermitian_helpers():
    L = 3
    a = np.zeros((L + 1, 2 * L + 1), dtype=complex)
    a[2, L + 1] = 1 + 2j
    assert hermitian_defect(a, L) > 0
    b = enforce_hermitian(a, L)
    assert hermitian_defect(b, L) == 0.0
    assert b[2, L - 1] == -(1 - 2j)


def test_synthesize_constant_and_rejection():
    L = 3
    a = np.zeros((L + 1, 2 * L + 1), dtype=complex)
    a[0, L] = 2.5
    mp = synthesize(FieldSample(L, a), quadrature_grid(6))
    assert np.allclose(mp.values, 2.5 / math.sqrt(4 * math.pi), atol=1e-14)
    a[1, L + 1] = 1.0  # no mirror partner
    with pytest.raises(SymmetryError):
        synthesize(FieldSample(L, a), quadrature_grid(6))


def test_synthesize_matches_pointwise_sum():
    from sphclt.harmonics import ylm

    f = sample_alm(make_spectrum("exponential 0", 4), 3)
    g = quadrature_grid(8)
    mp = synthesize(f, g)
    for j, th in enumerate(g.theta[:3]):
        for k, ph in enumerate(g.phi[:4]):
            ref = sum(f[l, m] * ylm(l, m, (th, ph)) for l in range(5) for m in range(-l, l + 1))
            assert mp.values[j, k] == pytest.approx(ref.real, abs=1e-12)


def test_roundtrip():
    f = sample_alm(S8, 5)
    back = analyze_map(synthesize(f, quadrature_grid(16)), 8)
    assert np.abs(back.alm - f.alm).max() < 1e-10


def test_analyze_constant_map():
    g = quadrature_grid(10)
    mp = GridMap(g, np.full((g.theta.size, g.phi.size), 1.5))
    out = analyze_map(mp, 5)
    assert out[0, 0] == pytest.approx(1.5 * math.sqrt(4 * math.pi), abs=1e-12)
    rest = out.alm.copy()
    rest[0, 5] = 0
    assert np.abs(rest).max() < 1e-10


def test_hermite_map_examples():
    g = quadrature_grid(2)
    v = np.full((g.theta.size, g.phi.size), 2.0)
    mp = GridMap(g, v)
    assert np.array_equal(hermite_map(mp, 1).values, v)
    assert np.allclose(hermite_map(mp, 2).values, 3.0)
    assert np.allclose(hermite_map(mp, 3).values, 2.0)


def test_subordinate_q2_constant_field():
    L = 4
    a = np.zeros((L + 1, 2 * L + 1), dtype=complex)
    a[0, L] = 1.3
    f = FieldSample(L, a)
    for l, m in [(1, 0), (2, 1), (4, -3)]:
        assert subordinate_q2_exact(f, l, m) == 0
    assert subordinate_q2_exact(f, 9, 0) == 0
    with pytest.raises(ValueError):
        subordinate_q2_exact(f, 2, 3)


def test_subordinate_q2_matches_map_pipeline():
    L = 6
    s = make_spectrum("polynomial 2", L, normalize=True)
    g = quadrature_grid(4 * L)
    for seed in range(5):
        f = sample_alm(s, seed)
        out = analyze_map(hermite_map(synthesize(f, g), 2), 2 * L)
        for l in range(0, 2 * L + 1, 3):
            for m in range(-l, l + 1, 2):
                assert abs(subordinate_q2_exact(f, l, m) - out[l, m]) < 1e-10


def test_empirical_stats_gaussian():
    z = np.random.default_rng(2024).standard_normal(5000)
    r = empirical_stats(z)
    assert abs(r.mean) < 4 * r.mean_se
    assert abs(r.variance - 1) < 4 * r.variance_se
    assert abs(r.skewness) < 4 * r.skewness_se
    assert abs(r.excess_kurtosis) < 4 * r.excess_kurtosis_se
    assert r.ks < 4 * r.ks_se + 0.8 / math.sqrt(5000)


def test_empirical_stats_chi_square():
    z = np.random.default_rng(99).standard_normal(200000)
    r = empirical_stats((z * z - 1) / math.sqrt(2))
    # (Z^2 - 1)/sqrt 2 has skewness sqrt 8 and excess kurtosis 12
    assert r.skewness == pytest.approx(math.sqrt(8), abs=0.2)
    assert r.excess_kurtosis == pytest.approx(12.0, abs=1.5)


def test_empirical_stats_constant_and_small():
    r = empirical_stats(np.full(200, 3.0))
    assert r.variance == 0.0
    assert r.ks > 0.99
    assert math.isnan(r.excess_kurtosis)
    with pytest.raises(ValueError):
        empirical_stats(np.zeros(50))


def test_experiment_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(Lmax=4, q=2, l_targets=(9,)).validate()
    with pytest.raises(ValueError):
        ExperimentConfig(N=50).validate()
    with pytest.raises(ValueError):
        ExperimentConfig(threads=0).validate()
    with pytest.raises(ValueError):
        ExperimentConfig(seed=-1).validate()


def test_experiment_thread_invariance():
    base = dict(spectrum="exponential 0", Lmax=6, q=2, l_targets=(2, 6), N=600, seed=9, angles=(0.4, 1.5))
    a = run_experiment(ExperimentConfig(**base, threads=1))
    b = run_experiment(ExperimentConfig(**base, threads=3))
    assert np.array_equal(a.samples, b.samples)
    assert [c.estimate for c in a.covariance] == [c.estimate for c in b.covariance]


def test_experiment_q3_map_pipeline():
    cfg = ExperimentConfig(spectrum="exponential 0", Lmax=4, q=3, l_targets=(2, 5), N=400, seed=1)
    rep = run_experiment(cfg)
    s = make_spectrum("exponential 0", 4, normalize=True)
    for lv in rep.levels:
        assert lv.theory_variance == pytest.approx(hermite_variance(s, 3, lv.l))
        assert abs(lv.raw_second_moment - lv.theory_variance) < 4 * lv.raw_second_moment_se
    assert rep.level(5).l == 5
    with pytest.raises(KeyError):
        rep.level(3)


def test_pointwise_variance_of_synthesized_fields():
    g = quadrature_grid(16)
    alm = sample_batch(S8, 3, 0, 2000)
    vals = synthesize(alm, g, 8).values[:, 2, 5]
    se = math.sqrt(2.0 / vals.size)
    assert abs(np.mean(vals**2) - 1.0) < 4 * se


def test_covariance_target_is_legendre():
    cfg = ExperimentConfig(spectrum="exponential 0", Lmax=4, q=2, l_targets=(4,), N=200, seed=2, angles=(math.pi / 2,))
    rep = run_experiment(cfg)
    (c,) = rep.covariance
    assert c.target == pytest.approx(legendre(4, 0, 0.0))
