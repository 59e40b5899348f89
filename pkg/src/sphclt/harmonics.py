"""Legendre functions, spherical harmonics, product quadrature and Gaunt integrals."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import angular
from .angular import _cg_surd, _squarefree_split, _surd_mul

FOUR_PI = 4.0 * math.pi

__all__ = [
    "SphericalPoint",
    "QuadratureGrid",
    "legendre",
    "normalized_legendre_table",
    "ylm",
    "ylm_table",
    "quadrature_grid",
    "gaunt3",
    "gaunt_n",
    "gaunt_n_expanded",
    "gaunt_numeric",
]


@dataclass(frozen=True)
class SphericalPoint:
    theta: float
    phi: float

    def __post_init__(self):
        if not (0.0 <= self.theta <= math.pi):
            raise ValueError(f"colatitude out of range: {self.theta}")
        if not (0.0 <= self.phi < 2 * math.pi):
            raise ValueError(f"longitude out of range: {self.phi}")

    def unit_vector(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)])


# ---------------------------------------------------------------------------
# Legendre functions


def legendre(l: int, m: int, x):
    """Associated Legendre function ``P_lm(x)`` with the Condon-Shortley phase.

    Accepts a scalar or an array for ``x``. Upward recurrence in l starting
    from the closed form of ``P_mm``.
    """
    if l < 0 or not (0 <= m <= l):
        raise ValueError(f"need 0 <= m <= l, got l={l}, m={m}")
    xa = np.asarray(x, dtype=float)
    if np.any(np.abs(xa) > 1.0):
        raise ValueError("x must lie in [-1, 1]")
    # P_mm = (-1)^m (2m-1)!! (1-x^2)^(m/2)
    pmm = np.ones_like(xa)
    if m > 0:
        s = np.sqrt((1.0 - xa) * (1.0 + xa))
        fact = 1.0
        for _ in range(m):
            pmm = -pmm * fact * s
            fact += 2.0
    if l == m:
        out = pmm
    else:
        p_prev, p_cur = pmm, xa * (2 * m + 1) * pmm
        for ll in range(m + 2, l + 1):
            p_prev, p_cur = p_cur, (xa * (2 * ll - 1) * p_cur - (ll + m - 1) * p_prev) / (ll - m)
        out = p_cur
    return float(out) if np.ndim(out) == 0 else out


def normalized_legendre_table(Lmax: int, x) -> np.ndarray:
    """Table ``P[l, m, ...]`` with ``Y_lm(θ, φ) = P[l, m] e^{imφ}`` at ``x = cos θ``.

    Only ``0 <= m <= l`` is filled; the rest is zero.  Uses the
    orthonormal recurrence, which is stable to high degree.
    """
    xa = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip((1.0 - xa) * (1.0 + xa), 0.0, None))
    P = np.zeros((Lmax + 1, Lmax + 1) + xa.shape)
    P[0, 0] = 1.0 / math.sqrt(FOUR_PI)
    for m in range(1, Lmax + 1):
        P[m, m] = -math.sqrt((2 * m + 1) / (2.0 * m)) * s * P[m - 1, m - 1]
    for m in range(0, Lmax):
        P[m + 1, m] = math.sqrt(2 * m + 3) * xa * P[m, m]
        for l in range(m + 2, Lmax + 1):
            a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            P[l, m] = a * (xa * P[l - 1, m] - b * P[l - 2, m])
    return P


def _norm_const(l: int, m: int) -> float:
    # sqrt((2l+1)/(4π) (l-m)!/(l+m)!) without overflow
    lg = math.lgamma(l - m + 1) - math.lgamma(l + m + 1)
    return math.sqrt((2 * l + 1) / FOUR_PI) * math.exp(0.5 * lg)


def ylm(l: int, m: int, p) -> complex:
    """Spherical harmonic ``Y_lm`` at a point (``SphericalPoint`` or ``(theta, phi)``)."""
    if l < 0 or abs(m) > l:
        raise ValueError(f"inadmissible (l, m) = ({l}, {m})")
    theta, phi = (p.theta, p.phi) if isinstance(p, SphericalPoint) else p
    am = abs(m)
    val = _norm_const(l, am) * legendre(l, am, math.cos(theta)) * complex(math.cos(am * phi), math.sin(am * phi))
    if m < 0:
        val = (-1) ** am * val.conjugate()
    return val


def ylm_table(Lmax: int, theta, phi) -> np.ndarray:
    """Array ``Y[l, Lmax + m, k]`` of harmonics at points ``(theta[k], phi[k])``."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    P = normalized_legendre_table(Lmax, np.cos(theta))
    Y = np.zeros((Lmax + 1, 2 * Lmax + 1, theta.size), dtype=complex)
    for m in range(0, Lmax + 1):
        e = np.exp(1j * m * phi)
        for l in range(m, Lmax + 1):
            Y[l, Lmax + m] = P[l, m] * e
            if m:
                Y[l, Lmax - m] = (-1) ** m * np.conj(Y[l, Lmax + m])
    return Y


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureGrid:
    """Gauss-Legendre (in cos θ) times uniform-φ product grid.

    ``theta`` and ``phi`` are the 1-d factor nodes; the flattened node list
    is θ-major.  ``weights`` are the flattened product weights.
    """

    degree: int
    theta: np.ndarray
    phi: np.ndarray
    theta_weights: np.ndarray
    weights: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def nodes(self) -> list[SphericalPoint]:
        return [SphericalPoint(float(t), float(p)) for t in self.theta for p in self.phi]

    def flat_angles(self) -> tuple[np.ndarray, np.ndarray]:
        th = np.repeat(self.theta, self.phi.size)
        ph = np.tile(self.phi, self.theta.size)
        return th, ph

    def integrate(self, values) -> complex | float:
        """Quadrature sum of ``values`` aligned with the flattened nodes."""
        v = np.asarray(values).reshape(-1)
        if v.size != self.size:
            raise ValueError("values do not match grid size")
        return np.dot(self.weights, v)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta", "phi", "weight"])
        th, ph = self.flat_angles()
        for t, p, wt in zip(th, ph, self.weights):
            w.writerow([repr(float(t)), repr(float(p)), repr(float(wt))])
        return buf.getvalue()


@lru_cache(maxsize=64)
def quadrature_grid(degree: int) -> QuadratureGrid:
    """Grid integrating exactly every harmonic product of total degree <= ``degree``."""
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    n_theta = (degree + 2) // 2  # ceil((degree + 1) / 2)
    n_phi = max(degree + 1, 2)  # two longitudes keep every m = 1 harmonic mean-zero
    x, wx = np.polynomial.legendre.leggauss(n_theta)
    # order by increasing colatitude
    x, wx = x[::-1], wx[::-1]
    theta = np.arccos(x)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    weights = np.outer(wx, np.full(n_phi, 2.0 * math.pi / n_phi)).reshape(-1)
    for arr in (theta, phi, wx, weights):
        arr.setflags(write=False)
    return QuadratureGrid(degree, theta, phi, wx, weights)


# ---------------------------------------------------------------------------
# Gaunt integrals


def gaunt3(l1: int, m1: int, l2: int, m2: int, l: int, m: int) -> float:
    """``∫ Y_{l1 m1} Y_{l2 m2} conj(Y_{lm})``."""
    c = angular.cg(l1, m1, l2, m2, l, m)
    if not c:
        return 0.0
    c0 = angular.cg_zero(l1, l2, l)
    pref = math.sqrt((2 * l1 + 1) * (2 * l2 + 1) / (FOUR_PI * (2 * l + 1)))
    return pref * float(c * c0)


def _check_indices(indices: Sequence[tuple[int, int]]) -> list[tuple[int, int]]:
    idx = [(int(l), int(m)) for l, m in indices]
    for l, m in idx:
        if l < 0 or abs(m) > l:
            raise ValueError(f"inadmissible index ({l}, {m})")
    return idx


def _surd_dict_add(acc: dict[int, Fraction], t: tuple[Fraction, int]) -> None:
    if t[0]:
        acc[t[1]] = acc.get(t[1], Fraction(0)) + t[0]


def _finish(acc: dict[int, Fraction], integer_factor: int, four_pi_power: float, sign: int) -> float:
    """sign * sqrt(integer_factor) * (4π)^power * Σ acc, exact up to the last step."""
    s, k = _squarefree_split(integer_factor, integer_factor)
    pref = (Fraction(s), k)
    out: dict[int, Fraction] = {}
    for kern, c in acc.items():
        _surd_dict_add(out, _surd_mul((c, kern), pref))
    total = math.fsum(float(c) * math.sqrt(kk) for kk, c in out.items())
    return sign * total * FOUR_PI**four_pi_power


def gaunt_n(indices: Sequence[tuple[int, int]]) -> float:
    """Generalized Gaunt integral ``∫ Y_{l1 m1} ... Y_{lq mq} Y_{l, -m}``.

    The last entry of ``indices`` is ``(l, -m)``.  Evaluated through chained
    zero-projection and m-projection couplings summed over admissible
    intermediate momenta.  The sum is exact; only the final scale is floating.
    """
    idx = _check_indices(indices)
    if len(idx) < 3:
        raise ValueError("need at least three indices")
    leaves, (l, mneg) = idx[:-1], idx[-1]
    m = -mneg
    if sum(mi for _, mi in leaves) != m:
        return 0.0
    ls = [li for li, _ in leaves]
    zero_leaves = [(li, 0) for li in ls]
    acc: dict[int, Fraction] = {}
    for inter in angular.chain_intermediates(ls, l):
        a = angular._chain_surd(zero_leaves, inter, 0)
        if a[0] == 0:
            continue
        b = angular._chain_surd(leaves, inter, m)
        _surd_dict_add(acc, _surd_mul(a, b))
    if not acc:
        return 0.0
    q = len(leaves)
    num = math.prod(2 * li + 1 for li in ls)
    # sqrt(4π/(2l+1)) * Π sqrt((2l_i+1)/4π) = sqrt(Π(2l_i+1)(2l+1)) / (2l+1) * (4π)^((1-q)/2)
    acc = {k: c / (2 * l + 1) for k, c in acc.items()}
    return _finish(acc, num * (2 * l + 1), (1 - q) / 2, -1 if m % 2 else 1)


def gaunt_n_expanded(indices: Sequence[tuple[int, int]]) -> float:
    """Same integral as :func:`gaunt_n` via the iterated three-harmonic expansion.

    Sums over intermediate momenta L_i and their projections M_i explicitly;
    for four harmonics the middle product is empty (taken as 1).
    """
    idx = _check_indices(indices)
    if len(idx) < 3:
        raise ValueError("need at least three indices")
    leaves, (l, mneg) = idx[:-1], idx[-1]
    m = -mneg
    q = len(leaves)
    sign = -1 if m % 2 else 1
    if q == 2:
        return sign * gaunt3(leaves[0][0], leaves[0][1], leaves[1][0], leaves[1][1], l, m)
    ls = [li for li, _ in leaves]
    ms = [mi for _, mi in leaves]
    acc: dict[int, Fraction] = {}

    def rec(i: int, L: int, M: int, val: tuple[Fraction, int]):
        # i: index of the next leaf to couple (0-based); L, M running pair
        if i == q - 1:
            t = _surd_mul(val, _cg_surd(L, 0, ls[i], 0, l, 0))
            t = _surd_mul(t, _cg_surd(L, M, ls[i], ms[i], l, m))
            if t[0]:
                _surd_dict_add(acc, (t[0], t[1]))
            return
        for L2 in range(abs(L - ls[i]), L + ls[i] + 1):
            for M2 in range(-L2, L2 + 1):
                t = _surd_mul(val, _cg_surd(L, 0, ls[i], 0, L2, 0))
                if t[0] == 0:
                    break
                t = _surd_mul(t, _cg_surd(L, M, ls[i], ms[i], L2, M2))
                if t[0]:
                    rec(i + 1, L2, M2, t)

    for L1 in range(abs(ls[0] - ls[1]), ls[0] + ls[1] + 1):
        for M1 in range(-L1, L1 + 1):
            t = _surd_mul(_cg_surd(ls[0], 0, ls[1], 0, L1, 0), _cg_surd(ls[0], ms[0], ls[1], ms[1], L1, M1))
            if t[0]:
                rec(2, L1, M1, t)
    if not acc:
        return 0.0
    # sqrt((2l1+1)(2l2+1)/(4π(2l+1))) * Π_{i>=3} sqrt((2l_i+1)/4π)
    num = math.prod(2 * li + 1 for li in ls)
    acc = {k: c / (2 * l + 1) for k, c in acc.items()}
    return _finish(acc, num * (2 * l + 1), (1 - q) / 2, sign)


def gaunt_numeric(indices: Sequence[tuple[int, int]], imag_tol: float = 1e-12) -> float:
    """Quadrature value of ``∫ Π Y_{l_i m_i}`` on an exact grid."""
    idx = _check_indices(indices)
    deg = sum(l for l, _ in idx)
    grid = quadrature_grid(deg)
    th, ph = grid.flat_angles()
    Lmax = max(l for l, _ in idx)
    P = normalized_legendre_table(Lmax, np.cos(th))
    prod = np.ones(th.size, dtype=complex)
    for l, m in idx:
        am = abs(m)
        y = P[l, am] * np.exp(1j * am * ph)
        if m < 0:
            y = (-1) ** am * np.conj(y)
        prod = prod * y
    val = complex(np.dot(grid.weights, prod))
    if abs(val.imag) > imag_tol:
        raise ArithmeticError(f"Gaunt integral has imaginary part {val.imag:.3e}")
    return val.real
