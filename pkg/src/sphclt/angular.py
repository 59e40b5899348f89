"""Exact Clebsch-Gordan coefficients, chained couplings and Wigner 6j symbols.

Every coefficient handled here has the form ``c * sqrt(k)`` with ``c`` rational
and ``k`` a squarefree integer.  Internally that pair is called a *surd*; it
makes products exact and lets sums of products be collected by kernel, so the
6j sums and chained couplings stay exact.  The public value type is
:class:`SignedSqrtRational` (``sign * sqrt(radicand)``).

Phase convention: Condon-Shortley throughout.
"""

from __future__ import annotations

import math
import re
import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

__all__ = [
    "SignedSqrtRational",
    "ChainedCoupling",
    "OrthogonalityReport",
    "factorial",
    "triangle_ok",
    "cg",
    "cg_zero",
    "cg_squared",
    "cg_zero_squared",
    "wigner6j",
    "wigner6j_racah",
    "chained_cg",
    "chained_cg_float",
    "orthogonality_report",
]


# ---------------------------------------------------------------------------
# factorial memo (append-only, shared)

_FACT: list[int] = [1]
_FACT_LOCK = threading.Lock()


def factorial(n: int) -> int:
    """Exact ``n!`` from a shared append-only table."""
    if n < 0:
        raise ValueError(f"factorial of negative number {n}")
    table = _FACT
    if n < len(table):
        return table[n]
    with _FACT_LOCK:
        while len(table) <= n:
            table.append(table[-1] * len(table))
    return table[n]


@lru_cache(maxsize=None)
def _primes_upto(n: int) -> tuple[int, ...]:
    if n < 2:
        return ()
    sieve = bytearray([1]) * (n + 1)
    sieve[0:2] = b"\x00\x00"
    for p in range(2, math.isqrt(n) + 1):
        if sieve[p]:
            sieve[p * p :: p] = bytearray(len(sieve[p * p :: p]))
    return tuple(i for i, v in enumerate(sieve) if v)


def _squarefree_split(n: int, pmax: int) -> tuple[int, int]:
    """Return ``(s, k)`` with ``n = s**2 * k`` and ``k`` squarefree.

    All prime factors of ``n`` must be at most ``pmax``.
    """
    s, k = 1, 1
    for p in _primes_upto(pmax):
        if n == 1:
            break
        if n % p:
            continue
        e = 0
        while n % p == 0:
            n //= p
            e += 1
        s *= p ** (e // 2)
        if e % 2:
            k *= p
    if n != 1:
        raise ArithmeticError("prime factor above declared bound")
    return s, k


# ---------------------------------------------------------------------------
# value types

_FMT = re.compile(r"^\s*([+-]?)sqrt\((\d+)(?:/(\d+))?\)\s*$")


@dataclass(frozen=True)
class SignedSqrtRational:
    """Exact real number ``sign * sqrt(radicand)``."""

    sign: int
    radicand: Fraction

    def __post_init__(self):
        rad = Fraction(self.radicand)
        object.__setattr__(self, "radicand", rad)
        if self.sign not in (-1, 0, 1):
            raise ValueError("sign must be -1, 0 or +1")
        if rad < 0:
            raise ValueError("radicand must be nonnegative")
        if (self.sign == 0) != (rad == 0):
            raise ValueError("sign is 0 iff radicand is 0")

    @classmethod
    def zero(cls) -> "SignedSqrtRational":
        return cls(0, Fraction(0))

    @classmethod
    def from_surd(cls, coef: Fraction, kernel: int) -> "SignedSqrtRational":
        if coef == 0:
            return cls.zero()
        return cls(1 if coef > 0 else -1, coef * coef * kernel)

    @classmethod
    def parse(cls, text: str) -> "SignedSqrtRational":
        """Inverse of ``str()``: accepts ``0``, ``+sqrt(p)`` or ``-sqrt(p/q)``."""
        if text.strip() == "0":
            return cls.zero()
        match = _FMT.match(text)
        if not match:
            raise ValueError(f"not a signed square root: {text!r}")
        sgn, p, q = match.groups()
        rad = Fraction(int(p), int(q) if q else 1)
        if rad == 0:
            return cls.zero()
        return cls(-1 if sgn == "-" else 1, rad)

    def square(self) -> Fraction:
        return self.radicand

    def __float__(self) -> float:
        if self.sign == 0:
            return 0.0
        # sqrt(p/q) without overflowing on huge p, q
        p, q = self.radicand.numerator, self.radicand.denominator
        value = math.exp(0.5 * (math.log(p) - math.log(q))) if p > 2**1000 or q > 2**1000 else math.sqrt(p / q)
        return self.sign * value

    def __bool__(self) -> bool:
        return self.sign != 0

    def __neg__(self) -> "SignedSqrtRational":
        return SignedSqrtRational(-self.sign, self.radicand)

    def __mul__(self, other: "SignedSqrtRational") -> "SignedSqrtRational":
        if not isinstance(other, SignedSqrtRational):
            return NotImplemented
        return SignedSqrtRational(self.sign * other.sign, self.radicand * other.radicand)

    def __str__(self) -> str:
        if self.sign == 0:
            return "0"
        sgn = "+" if self.sign > 0 else "-"
        r = self.radicand
        body = f"{r.numerator}" if r.denominator == 1 else f"{r.numerator}/{r.denominator}"
        return f"{sgn}sqrt({body})"


def _surd_mul(a: tuple[Fraction, int], b: tuple[Fraction, int]) -> tuple[Fraction, int]:
    (ca, ka), (cb, kb) = a, b
    if ca == 0 or cb == 0:
        return Fraction(0), 1
    g = math.gcd(ka, kb)
    return ca * cb * g, (ka // g) * (kb // g)


def _surd_sum_to_ssr(terms: dict[int, Fraction]) -> SignedSqrtRational:
    live = {k: c for k, c in terms.items() if c != 0}
    if not live:
        return SignedSqrtRational.zero()
    if len(live) > 1:
        raise ArithmeticError("sum does not reduce to a single square root")
    (k, c), = live.items()
    return SignedSqrtRational.from_surd(c, k)


def _surd_sum_float(terms: dict[int, Fraction]) -> float:
    return math.fsum(float(c) * math.sqrt(k) for k, c in terms.items() if c != 0)


# ---------------------------------------------------------------------------
# Clebsch-Gordan coefficients


def triangle_ok(l1: int, l2: int, l3: int) -> bool:
    return abs(l1 - l2) <= l3 <= l1 + l2


def _check_proj(l: int, m: int) -> None:
    if l < 0 or abs(m) > l:
        raise ValueError(f"inadmissible angular index (l={l}, m={m})")


@lru_cache(maxsize=1 << 18)
def _cg_surd(l1: int, m1: int, l2: int, m2: int, l: int, m: int) -> tuple[Fraction, int]:
    """Racah single-sum formula, returned as ``(coef, kernel)``."""
    if m != m1 + m2 or not triangle_ok(l1, l2, l):
        return Fraction(0), 1
    f = factorial
    num = (
        (2 * l + 1)
        * f(l1 + l2 - l)
        * f(l1 - l2 + l)
        * f(-l1 + l2 + l)
        * f(l1 + m1)
        * f(l1 - m1)
        * f(l2 + m2)
        * f(l2 - m2)
        * f(l + m)
        * f(l - m)
    )
    den = f(l1 + l2 + l + 1)
    kmin = max(0, l2 - l - m1, l1 - l + m2)
    kmax = min(l1 + l2 - l, l1 - m1, l2 + m2)
    acc = Fraction(0)
    for k in range(kmin, kmax + 1):
        d = (
            f(k)
            * f(l1 + l2 - l - k)
            * f(l1 - m1 - k)
            * f(l2 + m2 - k)
            * f(l - l2 + m1 + k)
            * f(l - l1 - m2 + k)
        )
        acc += Fraction(-1 if k % 2 else 1, d)
    if acc == 0:
        return Fraction(0), 1
    # sqrt(num/den) = sqrt(num*den)/den
    s, kern = _squarefree_split(num * den, l1 + l2 + l + 2)
    return acc * Fraction(s, den), kern


def cg(l1: int, m1: int, l2: int, m2: int, l: int, m: int) -> SignedSqrtRational:
    """Clebsch-Gordan coefficient ``C^{l m}_{l1 m1 l2 m2}``, exactly."""
    _check_proj(l1, m1)
    _check_proj(l2, m2)
    _check_proj(l, m)
    return SignedSqrtRational.from_surd(*_cg_surd(l1, m1, l2, m2, l, m))


def cg_squared(l1: int, m1: int, l2: int, m2: int, l: int, m: int) -> Fraction:
    c, k = _cg_surd(l1, m1, l2, m2, l, m)
    return c * c * k


@lru_cache(maxsize=1 << 18)
def _cg_zero_parts(l1: int, l2: int, l3: int) -> tuple[int, Fraction]:
    """Zero-projection closed form as ``(sign, square)``."""
    J = l1 + l2 + l3
    if J % 2 or not triangle_ok(l1, l2, l3):
        return 0, Fraction(0)
    g = J // 2
    f = factorial
    a, b, c = g - l3, g - l2, g - l1
    sq = Fraction(
        (2 * l3 + 1) * f(g) ** 2 * f(J - 2 * l3) * f(J - 2 * l2) * f(J - 2 * l1),
        (f(a) * f(b) * f(c)) ** 2 * f(J + 1),
    )
    return (-1 if a % 2 else 1), sq


def cg_zero(l1: int, l2: int, l3: int) -> SignedSqrtRational:
    """``C^{l3 0}_{l1 0 l2 0}`` from its dedicated closed form (parity rule built in)."""
    if min(l1, l2, l3) < 0:
        raise ValueError("negative angular momentum")
    sign, sq = _cg_zero_parts(l1, l2, l3)
    return SignedSqrtRational(sign, sq)


def cg_zero_squared(l1: int, l2: int, l3: int) -> Fraction:
    return _cg_zero_parts(l1, l2, l3)[1]


# ---------------------------------------------------------------------------
# 6j symbols


def wigner6j(l1: int, l2: int, l3: int, l4: int, l5: int, l6: int) -> SignedSqrtRational:
    """``{l1 l2 l3; l4 l5 l6}`` from its defining sum of four CG coefficients.

    The sum runs over m1, m3, m4, m6 with m5 held at 0; every admissible m5
    gives the same value.
    """
    if min(l1, l2, l3, l4, l5, l6) < 0:
        raise ValueError("negative angular momentum")
    if not (
        triangle_ok(l1, l2, l3)
        and triangle_ok(l1, l6, l5)
        and triangle_ok(l3, l4, l5)
        and triangle_ok(l2, l4, l6)
    ):
        return SignedSqrtRational.zero()
    m5 = 0
    terms: dict[int, Fraction] = {}
    for m1 in range(-l1, l1 + 1):
        m6 = m5 - m1
        if abs(m6) > l6:
            continue
        for m3 in range(-l3, l3 + 1):
            m2, m4 = m3 - m1, m5 - m3
            if abs(m2) > l2 or abs(m4) > l4:
                continue
            t = _cg_surd(l1, m1, l2, m2, l3, m3)
            if t[0] == 0:
                continue
            t = _surd_mul(t, _cg_surd(l1, m1, l6, m6, l5, m5))
            t = _surd_mul(t, _cg_surd(l3, m3, l4, m4, l5, m5))
            t = _surd_mul(t, _cg_surd(l2, m2, l4, m4, l6, m6))
            if t[0]:
                terms[t[1]] = terms.get(t[1], Fraction(0)) + t[0]
    # K = (-1)^(l1+l2+l4+l5) / sqrt((2 l3 + 1)(2 l6 + 1))
    n = (2 * l3 + 1) * (2 * l6 + 1)
    s, kern = _squarefree_split(n, n)
    pref = (Fraction(-1 if (l1 + l2 + l4 + l5) % 2 else 1, s * kern), kern)
    out: dict[int, Fraction] = {}
    for k, c in terms.items():
        cc, kk = _surd_mul((c, k), pref)
        out[kk] = out.get(kk, Fraction(0)) + cc
    return _surd_sum_to_ssr(out)


def _delta_sq(a: int, b: int, c: int) -> Fraction:
    f = factorial
    return Fraction(f(a + b - c) * f(a - b + c) * f(-a + b + c), f(a + b + c + 1))


@lru_cache(maxsize=1 << 20)
def _racah6j_parts(a: int, b: int, c: int, d: int, e: int, f_: int) -> tuple[int, Fraction]:
    if not (
        triangle_ok(a, b, c) and triangle_ok(a, e, f_) and triangle_ok(d, b, f_) and triangle_ok(d, e, c)
    ):
        return 0, Fraction(0)
    f = factorial
    t_lo = max(a + b + c, a + e + f_, d + b + f_, d + e + c)
    t_hi = min(a + b + d + e, a + c + d + f_, b + c + e + f_)
    den_l = []
    for t in range(t_lo, t_hi + 1):
        den = (
            f(t - a - b - c)
            * f(t - a - e - f_)
            * f(t - d - b - f_)
            * f(t - d - e - c)
            * f(a + b + d + e - t)
            * f(a + c + d + f_ - t)
            * f(b + c + e + f_ - t)
        )
        den_l.append((t, den))
    acc = Fraction(0)
    for t, den in den_l:
        acc += Fraction((-1 if t % 2 else 1) * f(t + 1), den)
    if acc == 0:
        return 0, Fraction(0)
    sq = acc * acc * _delta_sq(a, b, c) * _delta_sq(a, e, f_) * _delta_sq(d, b, f_) * _delta_sq(d, e, c)
    return (1 if acc > 0 else -1), sq


def wigner6j_racah(l1: int, l2: int, l3: int, l4: int, l5: int, l6: int) -> SignedSqrtRational:
    """Same symbol as :func:`wigner6j` via the Racah single-sum formula (fast path)."""
    if min(l1, l2, l3, l4, l5, l6) < 0:
        raise ValueError("negative angular momentum")
    sign, sq = _racah6j_parts(l1, l2, l3, l4, l5, l6)
    return SignedSqrtRational(sign, sq)


@lru_cache(maxsize=1 << 20)
def wigner6j_float(l1: int, l2: int, l3: int, l4: int, l5: int, l6: int) -> float:
    return float(wigner6j_racah(l1, l2, l3, l4, l5, l6))


# ---------------------------------------------------------------------------
# chained couplings


@dataclass(frozen=True)
class ChainedCoupling:
    leaves: tuple[tuple[int, int], ...]
    intermediates: tuple[int, ...]
    mu: int
    value: SignedSqrtRational


def _chain_surd(
    leaves: Sequence[tuple[int, int]], intermediates: Sequence[int], mu: int
) -> tuple[Fraction, int]:
    p = len(leaves)
    if p < 2 or len(intermediates) != p - 1:
        raise ValueError("need p >= 2 leaves and p - 1 intermediate momenta")
    for l, m in leaves:
        _check_proj(l, m)
    lam, proj = leaves[0]
    acc: tuple[Fraction, int] = (Fraction(1), 1)
    for i in range(1, p):
        li, mi = leaves[i]
        new_lam = intermediates[i - 1]
        new_proj = proj + mi if i < p - 1 else mu
        if abs(new_proj) > new_lam or new_proj != proj + mi:
            return Fraction(0), 1
        acc = _surd_mul(acc, _cg_surd(lam, proj, li, mi, new_lam, new_proj))
        if acc[0] == 0:
            return acc
        lam, proj = new_lam, new_proj
    return acc


def chained_cg(
    leaves: Sequence[tuple[int, int]], intermediates: Sequence[int], mu: int
) -> SignedSqrtRational:
    """Coupling ``C^{λ1..λ_{p-1}; μ}_{l1 m1; ...; lp mp}``.

    The inner projection sums collapse: each running projection is fixed by
    the leaves, so the value is a single product of pairwise coefficients.
    """
    return SignedSqrtRational.from_surd(*_chain_surd(leaves, intermediates, mu))


def chained_cg_float(
    leaves: Sequence[tuple[int, int]], intermediates: Sequence[int], mu: int
) -> float:
    c, k = _chain_surd(leaves, intermediates, mu)
    return float(c) * math.sqrt(k)


def chain_intermediates(ls: Sequence[int], final: int) -> Iterable[tuple[int, ...]]:
    """All triangle-admissible tuples ``(L1, ..., L_{p-2}, final)`` for leaves ``ls``."""
    p = len(ls)

    def rec(prev: int, i: int, path: tuple[int, ...]):
        if i == p - 1:
            if triangle_ok(prev, ls[i], final):
                yield path + (final,)
            return
        for L in range(abs(prev - ls[i]), prev + ls[i] + 1):
            yield from rec(L, i + 1, path + (L,))

    if p == 1:
        if ls[0] == final:
            yield ()
        return
    yield from rec(ls[0], 1, ())


# ---------------------------------------------------------------------------
# orthogonality diagnostics


@dataclass
class OrthogonalityReport:
    l1: int
    l2: int
    checked: int
    diagonal_exact: bool
    max_offdiagonal: float
    violations: list[str]

    @property
    def ok(self) -> bool:
        return self.diagonal_exact and not self.violations


def orthogonality_report(l1: int, l2: int, tolerance: float = 1e-12) -> OrthogonalityReport:
    """Check both unitarity relations of the (l1, l2) coupling block.

    Diagonal sums are exact rationals compared to 1; off-diagonal sums are
    compensated floating sums compared to ``tolerance``.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    pairs = [(m1, m2) for m1 in range(-l1, l1 + 1) for m2 in range(-l2, l2 + 1)]
    targets = [(l, m) for l in range(abs(l1 - l2), l1 + l2 + 1) for m in range(-l, l + 1)]
    violations: list[str] = []
    diag_ok = True
    worst = 0.0
    checked = 0

    # sum over (m1, m2) for fixed (l, m), (l', m')
    for i, (l, m) in enumerate(targets):
        exact = sum((cg_squared(l1, m1, l2, m2, l, m) for m1, m2 in pairs), Fraction(0))
        checked += 1
        if exact != 1:
            diag_ok = False
            violations.append(f"row ({l},{m}): sum of squares = {exact}")
        for lp, mp in targets[i + 1 :]:
            if mp != m:
                continue
            s = math.fsum(
                float(cg(l1, m1, l2, m2, l, m)) * float(cg(l1, m1, l2, m2, lp, mp)) for m1, m2 in pairs
            )
            checked += 1
            worst = max(worst, abs(s))
            if abs(s) > tolerance:
                violations.append(f"rows ({l},{m})/({lp},{mp}): {s:.3e}")
    # sum over (l, m) for fixed (m1, m2), (m1', m2')
    for i, (m1, m2) in enumerate(pairs):
        exact = sum((cg_squared(l1, m1, l2, m2, l, m) for l, m in targets), Fraction(0))
        checked += 1
        if exact != 1:
            diag_ok = False
            violations.append(f"column ({m1},{m2}): sum of squares = {exact}")
        for m1p, m2p in pairs[i + 1 :]:
            if m1p + m2p != m1 + m2:
                continue
            s = math.fsum(
                float(cg(l1, m1, l2, m2, l, m)) * float(cg(l1, m1p, l2, m2p, l, m)) for l, m in targets
            )
            checked += 1
            worst = max(worst, abs(s))
            if abs(s) > tolerance:
                violations.append(f"columns ({m1},{m2})/({m1p},{m2p}): {s:.3e}")
    return OrthogonalityReport(l1, l2, checked, diag_ok, worst, violations)
