"""Monte Carlo engine for Hermite-subordinated isotropic Gaussian fields.

Coefficient arrays use the layout ``a[l, Lmax + m]`` (entries with |m| > l
are zero); batches carry a leading replicate axis.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import stats

from .cltcheck import hermite_poly, hermite_variance_table
from .harmonics import QuadratureGrid, gaunt3, legendre, normalized_legendre_table, quadrature_grid, ylm
from .spectrum import PowerSpectrum, make_spectrum

FOUR_PI = 4.0 * math.pi
CHUNK = 256  # replicates per work unit; fixed so results never depend on scheduling
SYM_TOL = 1e-10


class SymmetryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# coefficient arrays


@dataclass
class FieldSample:
    Lmax: int
    alm: np.ndarray  # complex, shape (Lmax+1, 2Lmax+1)

    def __post_init__(self):
        self.alm = np.asarray(self.alm, dtype=complex)
        if self.alm.shape != (self.Lmax + 1, 2 * self.Lmax + 1):
            raise ValueError(f"coefficient array must have shape {(self.Lmax + 1, 2 * self.Lmax + 1)}")

    def __getitem__(self, lm: tuple[int, int]) -> complex:
        l, m = lm
        if not (0 <= l <= self.Lmax and abs(m) <= l):
            raise IndexError(f"({l}, {m}) outside the sample")
        return complex(self.alm[l, self.Lmax + m])

    def symmetry_defect(self) -> float:
        return hermitian_defect(self.alm[None], self.Lmax)


def _signs(Lmax: int) -> np.ndarray:
    m = np.arange(-Lmax, Lmax + 1)
    return np.where(m % 2, -1.0, 1.0)


def _mask(Lmax: int) -> np.ndarray:
    l = np.arange(Lmax + 1)[:, None]
    m = np.arange(-Lmax, Lmax + 1)[None, :]
    return np.abs(m) <= l


def hermitian_defect(alm: np.ndarray, Lmax: int) -> float:
    """max |a_{l,-m} - (-1)^m conj(a_{lm})| over a batch, plus stray entries with |m| > l."""
    mirror = _signs(Lmax) * np.conj(alm[..., ::-1])
    stray = np.abs(alm[..., ~_mask(Lmax)]).max(initial=0.0)
    return float(max(np.abs(alm - mirror).max(initial=0.0), stray))


def enforce_hermitian(alm: np.ndarray, Lmax: int) -> np.ndarray:
    """Rebuild negative orders from nonnegative ones; make ``a_{l0}`` real."""
    out = np.array(alm, dtype=complex)
    out[..., Lmax] = out[..., Lmax].real
    pos = out[..., Lmax + 1 :]
    out[..., :Lmax] = (_signs(Lmax)[Lmax + 1 :] * np.conj(pos))[..., ::-1]
    out[..., ~_mask(Lmax)] = 0.0
    return out


def _draw(C: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    Lmax = C.size - 1
    a = np.zeros((Lmax + 1, 2 * Lmax + 1), dtype=complex)
    sd = np.sqrt(C)
    a[:, Lmax] = sd * rng.standard_normal(Lmax + 1)
    if Lmax:
        re = rng.standard_normal((Lmax + 1, Lmax))
        im = rng.standard_normal((Lmax + 1, Lmax))
        pos = (re + 1j * im) * (sd / math.sqrt(2.0))[:, None]
        a[:, Lmax + 1 :] = pos
    return enforce_hermitian(a, Lmax)


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def sample_alm(s: PowerSpectrum, seed) -> FieldSample:
    """One isotropic Gaussian coefficient array with spectrum ``s``.

    ``a_{l0}`` has variance ``C_l``; for m > 0 real and imaginary parts are
    independent with variance ``C_l / 2``; negative orders follow by symmetry.
    """
    return FieldSample(s.Lmax, _draw(s.C, _rng(seed)))


def sample_batch(s: PowerSpectrum, seed: int, start: int, count: int) -> np.ndarray:
    """Replicates ``start .. start+count-1``; replicate r uses the stream ``(seed, r)``."""
    return np.stack([_draw(s.C, _rng((seed, r))) for r in range(start, start + count)])


# ---------------------------------------------------------------------------
# maps


@dataclass
class GridMap:
    grid: QuadratureGrid
    values: np.ndarray  # (..., n_theta, n_phi)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape[-2:] != (self.grid.theta.size, self.grid.phi.size):
            raise ValueError("map values do not match grid")
        self.values = v


@lru_cache(maxsize=16)
def _grid_tables(degree: int, Lmax: int):
    g = quadrature_grid(degree)
    P = normalized_legendre_table(Lmax, np.cos(g.theta))  # (L+1, L+1, nθ)
    m = np.arange(-Lmax, Lmax + 1)
    E = np.exp(1j * np.outer(m, g.phi))  # (2L+1, nφ)
    # Pfull[l, Lmax+m, j]: normalized Legendre with the sign for negative m
    Pfull = np.zeros((Lmax + 1, 2 * Lmax + 1, g.theta.size))
    for mm in range(-Lmax, Lmax + 1):
        am = abs(mm)
        sgn = (-1) ** am if mm < 0 else 1
        Pfull[am:, Lmax + mm] = sgn * P[am:, am]
    return Pfull, E


def synthesize(f: FieldSample | np.ndarray, g: QuadratureGrid, Lmax: int | None = None) -> GridMap:
    """Evaluate ``T(x) = Σ a_lm Y_lm(x)`` on the grid nodes (a batch is allowed)."""
    if isinstance(f, FieldSample):
        alm, Lmax = f.alm, f.Lmax
    else:
        alm = np.asarray(f, dtype=complex)
        if Lmax is None:
            Lmax = alm.shape[-2] - 1
    if hermitian_defect(alm, Lmax) > SYM_TOL * max(1.0, float(np.abs(alm).max(initial=0.0))):
        raise SymmetryError("coefficients violate a_{l,-m} = (-1)^m conj(a_lm)")
    Pfull, E = _grid_tables(g.degree, Lmax)
    Fm = np.einsum("...lm,lmj->...jm", alm, Pfull)
    T = Fm @ E
    scale = max(1.0, float(np.abs(T).max(initial=0.0)))
    if np.abs(T.imag).max(initial=0.0) > SYM_TOL * scale:
        raise SymmetryError("synthesized map is not real")
    return GridMap(g, T.real)


def hermite_map(mp: GridMap, q: int) -> GridMap:
    """Pointwise ``H_q`` of a unit-variance map."""
    if q < 0:
        raise ValueError("q must be >= 0")
    return GridMap(mp.grid, hermite_poly(q, mp.values))


def analyze_map(mp: GridMap, Lout: int) -> FieldSample | np.ndarray:
    """Quadrature coefficients ``a_lm = ∫ T conj(Y_lm)`` for ``l <= Lout``.

    Returns a :class:`FieldSample` for a single map and an array for a batch.
    """
    g = mp.grid
    Pfull, E = _grid_tables(g.degree, Lout)
    dphi = 2.0 * math.pi / g.phi.size
    # Fourier in φ, then Gauss-Legendre in θ
    Tm = (mp.values.astype(complex) @ np.conj(E).T) * dphi  # (..., nθ, 2L+1)
    alm = np.einsum("...jm,lmj,j->...lm", Tm, Pfull, g.theta_weights)
    alm[..., ~_mask(Lout)] = 0.0
    scale = max(1.0, float(np.abs(alm).max(initial=0.0)))
    if hermitian_defect(alm, Lout) > SYM_TOL * scale:
        raise SymmetryError("analysis produced non-Hermitian coefficients")
    alm = enforce_hermitian(alm, Lout)
    if alm.ndim == 2:
        return FieldSample(Lout, alm)
    return alm


# ---------------------------------------------------------------------------
# exact quadratic subordination


@lru_cache(maxsize=256)
def _q2_table(Lmax: int, l: int, m: int) -> np.ndarray:
    """``W[Lmax + m1, l1, l2] = ∫ Y_{l1 m1} Y_{l2, m-m1} conj(Y_lm)``."""
    W = np.zeros((2 * Lmax + 1, Lmax + 1, Lmax + 1))
    for m1 in range(-Lmax, Lmax + 1):
        m2 = m - m1
        if abs(m2) > Lmax:
            continue
        for l1 in range(abs(m1), Lmax + 1):
            for l2 in range(max(abs(m2), abs(l - l1)), min(Lmax, l + l1) + 1):
                if (l1 + l2 + l) % 2 == 0:
                    W[Lmax + m1, l1, l2] = gaunt3(l1, m1, l2, m2, l, m)
    W.setflags(write=False)
    return W


def _q2_batch(alm: np.ndarray, Lmax: int, l: int, m: int, variance: float = 1.0) -> np.ndarray:
    W = _q2_table(Lmax, l, m)
    out = np.zeros(alm.shape[0], dtype=complex)
    for m1 in range(-Lmax, Lmax + 1):
        m2 = m - m1
        if abs(m2) > Lmax:
            continue
        Wm = W[Lmax + m1]
        if not Wm.any():
            continue
        out += np.einsum("ni,ij,nj->n", alm[:, :, Lmax + m1], Wm, alm[:, :, Lmax + m2])
    if l == 0:
        out -= math.sqrt(FOUR_PI) * variance
    return out


def subordinate_q2_exact(f: FieldSample, l: int, m: int, variance: float = 1.0) -> complex:
    """``a_{lm;2}`` of ``H_2(T) = T^2 - variance`` from the harmonic-space convolution."""
    if l < 0 or abs(m) > l:
        raise ValueError(f"inadmissible (l, m) = ({l}, {m})")
    if l > 2 * f.Lmax:
        return 0j
    return complex(_q2_batch(f.alm[None], f.Lmax, l, m, variance)[0])


# ---------------------------------------------------------------------------
# statistics

KS_NULL_SD = 0.2589  # asymptotic sd of sqrt(N) * KS statistic under the null


@dataclass
class MomentsRecord:
    n: int
    mean: float
    mean_se: float
    variance: float
    variance_se: float
    skewness: float
    skewness_se: float
    excess_kurtosis: float
    excess_kurtosis_se: float
    ks: float
    ks_se: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def empirical_stats(samples: Sequence[float]) -> MomentsRecord:
    """Moments of a sample with Monte Carlo standard errors (Gaussian-reference SEs
    for skewness ``sqrt(6/N)`` and kurtosis ``sqrt(24/N)``)."""
    x = np.asarray(samples, dtype=float).reshape(-1)
    n = x.size
    if n < 100:
        raise ValueError(f"need at least 100 samples, got {n}")
    mean = math.fsum(x) / n
    d = x - mean
    m2 = math.fsum(d * d) / n
    m4 = math.fsum(d**4) / n
    var = m2 * n / (n - 1)
    if m2 > 0:
        skew = math.fsum(d**3) / n / m2**1.5
        kurt = m4 / m2**2 - 3.0
    else:
        skew = kurt = float("nan")
    ks = float(stats.kstest(x, "norm").statistic)
    return MomentsRecord(
        n=n,
        mean=mean,
        mean_se=math.sqrt(var / n),
        variance=var,
        variance_se=math.sqrt(max(m4 - m2 * m2, 0.0) / n),
        skewness=skew,
        skewness_se=math.sqrt(6.0 / n),
        excess_kurtosis=kurt,
        excess_kurtosis_se=math.sqrt(24.0 / n),
        ks=ks,
        ks_se=KS_NULL_SD / math.sqrt(n),
    )


# ---------------------------------------------------------------------------
# experiments


@dataclass
class ExperimentConfig:
    spectrum: str = "exponential 0.0"
    Lmax: int = 8
    q: int = 2
    l_targets: tuple[int, ...] = (2, 4, 8)
    N: int = 2000
    seed: int = 0
    angles: tuple[float, ...] = ()  # separations (radians) for the covariance check
    cov_l: int | None = None  # level for the covariance check (default: first target)
    threads: int = 1

    def validate(self) -> None:
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if self.Lmax < 2:
            raise ValueError("Lmax must be >= 2")
        if self.N < 100:
            raise ValueError("N must be >= 100")
        if not self.l_targets:
            raise ValueError("no target levels")
        bad = [l for l in self.l_targets if not 0 <= l <= self.q * self.Lmax]
        if bad:
            raise ValueError(f"l targets {bad} outside 0..q*Lmax = {self.q * self.Lmax}")
        if self.cov_l is not None and not 0 <= self.cov_l <= self.q * self.Lmax:
            raise ValueError("cov_l outside 0..q*Lmax")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass
class CovarianceCheck:
    l: int
    angle: float
    estimate: float
    se: float
    target: float

    @property
    def z(self) -> float:
        return (self.estimate - self.target) / self.se if self.se > 0 else float("inf")


@dataclass
class LevelResult:
    l: int
    theory_variance: float
    raw_second_moment: float
    raw_second_moment_se: float
    moments: MomentsRecord  # of the normalized coefficient


@dataclass
class CltExperimentReport:
    config: ExperimentConfig
    levels: list[LevelResult]
    covariance: list[CovarianceCheck]
    samples: np.ndarray = field(repr=False)  # (N, len(l_targets)) normalized a_{l0;q}

    def level(self, l: int) -> LevelResult:
        for r in self.levels:
            if r.l == l:
                return r
        raise KeyError(l)


def _chunk_values(s: PowerSpectrum, cfg: ExperimentConfig, start: int, count: int, cov_l: int | None):
    """Per-replicate a_{l0;q} for every target and, optionally, all a_{lm;q} at ``cov_l``."""
    alm = sample_batch(s, cfg.seed, start, count)
    L = s.Lmax
    if cfg.q == 2:
        targets = np.stack([_q2_batch(alm, L, l, 0).real for l in cfg.l_targets], axis=1)
        cov = None
        if cov_l is not None:
            cov = np.stack([_q2_batch(alm, L, cov_l, m) for m in range(-cov_l, cov_l + 1)], axis=1)
        return targets, cov
    Lout = max(max(cfg.l_targets), cov_l or 0)
    grid = quadrature_grid(cfg.q * L + Lout)
    mp = hermite_map(synthesize(alm, grid, L), cfg.q)
    out = analyze_map(mp, Lout)
    targets = np.stack([out[:, l, Lout].real for l in cfg.l_targets], axis=1)
    cov = None
    if cov_l is not None:
        cov = out[:, cov_l, Lout - cov_l : Lout + cov_l + 1]
    return targets, cov


def run_experiment(cfg: ExperimentConfig) -> CltExperimentReport:
    """Monte Carlo check of the high-frequency CLT for ``H_q`` of a Gaussian field.

    The spectrum is normalized to unit pointwise variance first.  Results are
    identical for any ``threads`` value: work is split into fixed chunks and
    each replicate draws from its own ``(seed, r)`` stream.
    """
    cfg.validate()
    s = make_spectrum(cfg.spectrum, cfg.Lmax, normalize=True)
    cov_l = (cfg.cov_l if cfg.cov_l is not None else cfg.l_targets[0]) if cfg.angles else None
    starts = list(range(0, cfg.N, CHUNK))
    work = [(a, min(CHUNK, cfg.N - a)) for a in starts]
    # warm the shared caches before fanning out
    _chunk_values(s, cfg, 0, 1, cov_l)
    if cfg.threads > 1 and len(work) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            parts = list(ex.map(lambda w: _chunk_values(s, cfg, w[0], w[1], cov_l), work))
    else:
        parts = [_chunk_values(s, cfg, a, c, cov_l) for a, c in work]
    raw = np.concatenate([p[0] for p in parts], axis=0)
    theory = hermite_variance_table(s, cfg.q).values
    levels = []
    normalized = np.empty_like(raw)
    for i, l in enumerate(cfg.l_targets):
        tv = float(theory[l])
        x = raw[:, i]
        sq = x * x
        normalized[:, i] = x / math.sqrt(tv)
        levels.append(
            LevelResult(
                l=l,
                theory_variance=tv,
                raw_second_moment=math.fsum(sq) / sq.size,
                raw_second_moment_se=float(np.std(sq, ddof=1) / math.sqrt(sq.size)),
                moments=empirical_stats(normalized[:, i]),
            )
        )
    covs = []
    if cov_l is not None:
        coef = np.concatenate([p[1] for p in parts], axis=0)
        covs = _covariance_checks(coef, cov_l, float(theory[cov_l]), cfg.angles)
    return CltExperimentReport(cfg, levels, covs, normalized)


def _covariance_checks(coef: np.ndarray, l: int, tv: float, angles: Sequence[float]) -> list[CovarianceCheck]:
    """``E[T̄_l(x) T̄_l(y)]`` with x the north pole and y at colatitude ``angle``."""
    norm = math.sqrt((2 * l + 1) * tv / FOUR_PI)
    x_vals = (coef[:, l].real * math.sqrt((2 * l + 1) / FOUR_PI)) / norm
    out = []
    for ang in angles:
        y = np.array([ylm(l, m, (float(ang), 0.0)) for m in range(-l, l + 1)])
        y_vals = (coef @ y).real / norm
        prod = x_vals * y_vals
        est = math.fsum(prod) / prod.size
        se = float(np.std(prod, ddof=1) / math.sqrt(prod.size))
        out.append(CovarianceCheck(l, float(ang), est, se, legendre(l, 0, math.cos(ang))))
    return out
