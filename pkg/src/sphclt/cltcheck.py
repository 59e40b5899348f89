"""Variance formulas and finite-l evaluators of the high-frequency CLT conditions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Callable, Mapping, Sequence

import numpy as np

from . import angular, spectrum
from .angular import cg, cg_zero, cg_zero_squared, chain_intermediates, wigner6j_float
from .harmonics import normalized_legendre_table, quadrature_grid
from .spectrum import PowerSpectrum, UnreachableLevel

FOUR_PI = 4.0 * math.pi
CONJECTURE_LABEL = "conjectured criterion (diagnostic only, unproven)"
QQ1_LABEL = "sufficient for p=q-1 contraction only"


# ---------------------------------------------------------------------------
# variance of the Hermite components


@dataclass
class HermiteVarianceTable:
    q: int
    values: np.ndarray  # index l

    def total(self) -> float:
        """``Σ (2l+1) C̃_l / 4π``."""
        return math.fsum((2 * l + 1) * v for l, v in enumerate(self.values)) / FOUR_PI


def hermite_variance_table(s, q: int) -> HermiteVarianceTable:
    """``C̃_l^{(q)}`` for every ``l <= q Lmax`` from the q-fold convolution."""
    if q < 1:
        raise ValueError("q must be >= 1")
    if q == 1:
        g = spectrum._as_gamma(s)
        return HermiteVarianceTable(1, g / (2 * np.arange(g.size) + 1))
    gq = spectrum.hat_convolve(s, q).get(q)
    ls = np.arange(gq.size)
    vals = math.factorial(q) * FOUR_PI ** (1 - q) * gq / (2 * ls + 1)
    return HermiteVarianceTable(q, vals)


def hermite_variance(s, q: int, l: int) -> float:
    """Variance ``C̃_l^{(q)}`` of the Hermite-subordinated coefficients ``a_{lm;q}``."""
    Lmax = len(spectrum._as_gamma(s)) - 1
    if not 0 <= l <= q * Lmax:
        raise ValueError(f"l = {l} outside 0..{q * Lmax}")
    return float(hermite_variance_table(s, q).values[l])


def _cvals(s) -> np.ndarray:
    g = spectrum._as_gamma(s)
    return g / (2 * np.arange(g.size) + 1)


def hermite_variance_chained(s, q: int, l: int) -> float:
    """Same quantity by literal enumeration of leaves and zero-projection chains.

    Slow (exponential in q); meant as an independent check at small Lmax.
    """
    if q < 2:
        raise ValueError("q must be >= 2")
    C = _cvals(s)
    Lmax = C.size - 1
    terms = []
    for ls in product(range(Lmax + 1), repeat=q):
        w = math.prod(float(C[li]) for li in ls)
        if w == 0.0:
            continue
        chain = Fraction(0)
        for inter in chain_intermediates(list(ls), l):
            c, k = angular._chain_surd([(li, 0) for li in ls], inter, 0)
            chain += c * c * k
        if chain:
            terms.append(w * math.prod((2 * li + 1) for li in ls) * float(chain))
    return math.factorial(q) * FOUR_PI ** (1 - q) / (2 * l + 1) * math.fsum(terms)


def hermite_variance_gaunt(s, q: int, l: int, m: int = 0) -> float:
    """``q! Σ C_{l1}..C_{lq} |G{l1,m1;..;lq,mq;l,-m}|^2`` with Gaunt integrals by quadrature.

    The Gaunt tensors are assembled from harmonics sampled on an exact grid,
    so this path shares no code with the coupling-coefficient formulas.
    """
    if q < 2:
        raise ValueError("q must be >= 2")
    if abs(m) > l:
        raise ValueError("|m| > l")
    C = _cvals(s)
    Lmax = C.size - 1
    grid = quadrature_grid(q * Lmax + l)
    th, ph = grid.flat_angles()
    P = normalized_legendre_table(max(Lmax, l), np.cos(th))
    # rows: all (l_i, m_i) with C > 0
    idx = [(a, b) for a in range(Lmax + 1) if C[a] > 0 for b in range(-a, a + 1)]
    Y = np.empty((len(idx), th.size), dtype=complex)
    for r, (a, b) in enumerate(idx):
        y = P[a, abs(b)] * np.exp(1j * abs(b) * ph)
        Y[r] = (-1) ** abs(b) * np.conj(y) if b < 0 else y
    mm = -m
    ylast = P[l, abs(mm)] * np.exp(1j * abs(mm) * ph)
    if mm < 0:
        ylast = (-1) ** abs(mm) * np.conj(ylast)
    wts = np.array([C[a] for a, _ in idx])
    # contract one harmonic at a time: T[k] holds the q-1 fold tensor times weights at node k
    base = grid.weights * ylast
    if q == 2:
        G = (Y * base) @ Y.T
        return math.factorial(q) * float(np.einsum("i,j,ij->", wts, wts, np.abs(G) ** 2))
    if q == 3:
        G = np.einsum("ik,jk,rk,k->ijr", Y, Y, Y, base, optimize=True)
        return math.factorial(q) * float(np.einsum("i,j,r,ijr->", wts, wts, wts, np.abs(G) ** 2, optimize=True))
    raise NotImplementedError("explicit Gaunt sums implemented for q = 2, 3")


# ---------------------------------------------------------------------------
# bridge conditions


def bridge_sup(s, p: int, q: int, l: int, kind: str = "hat") -> float:
    """``sup_λ P{Z_p = λ | Z_q = l}`` (ties go to the smallest λ)."""
    return spectrum.bridge_distribution(s, p, q, l, kind).sup()[0]


def bridge_argsup(s, p: int, q: int, l: int, kind: str = "hat") -> tuple[float, int]:
    return spectrum.bridge_distribution(s, p, q, l, kind).sup()


def bridge_sup_q2_step(s, l: int) -> float:
    """q = 2 condition with the sup taken over the second step instead of ``Z_1``.

    ``sup_{l2} Σ_{l1} Γ_{l1} Γ_{l2} (C^{l0}_{l1 0 l2 0})^2 / Γ̂_{2,l}``; equal to
    :func:`bridge_sup` by the symmetry of the squared coefficient.
    """
    g = spectrum._as_gamma(s)
    Lmax = g.size - 1
    tab = spectrum.hat_convolve(s, 2)
    total = tab.value(2, l)
    if total <= 0:
        raise UnreachableLevel(f"endpoint {l} unreachable in 2 steps")
    best = 0.0
    for l2 in range(Lmax + 1):
        v = math.fsum(g[l1] * g[l2] * float(cg_zero_squared(l1, l2, l)) for l1 in range(Lmax + 1))
        best = max(best, v / total)
    return best


def _log_slope(ls: Sequence[int], vals: Sequence[float]) -> float:
    pts = [(math.log(l), math.log(v)) for l, v in zip(ls, vals) if l > 0 and v > 0]
    if len(pts) < 2:
        return float("nan")
    x = np.array([a for a, _ in pts])
    y = np.array([b for _, b in pts])
    return float(np.polyfit(x, y, 1)[0])


def trend_label(ls: Sequence[int], vals: Sequence[float], tol: float = 0.5) -> str:
    """``decaying`` / ``flat`` / ``increasing`` from the log-log slope.

    ``decaying`` means a fitted power law falling faster than ``l^{-tol}``;
    logarithmically slow decay counts as ``flat``.
    """
    slope = _log_slope(ls, vals)
    if math.isnan(slope):
        return "undetermined"
    if slope < -tol:
        return "decaying"
    if slope > tol:
        return "increasing"
    return "flat"


@dataclass
class CltConditionReport:
    q: int
    ls: list[int]
    families: dict[str, list[float]]  # label -> value per l
    labels: dict[str, str]
    verdict: str
    slopes: dict[str, float] = field(default_factory=dict)

    def rows(self) -> list[dict]:
        out = []
        for name, vals in self.families.items():
            for l, v in zip(self.ls, vals):
                out.append({"q": self.q, "l": l, "condition": name, "value": v, "label": self.labels[name]})
        return out


def clt_condition_check(s, q: int, l_list: Sequence[int]) -> CltConditionReport:
    """Tabulate the bridge conditions for order q at each target level."""
    if q < 2:
        raise ValueError("q must be >= 2")
    ls = [int(l) for l in l_list]
    fam: dict[str, list[float]] = {}
    labels: dict[str, str] = {}
    if q == 2:
        fam["sup P(Z1|Z2)"] = [bridge_sup(s, 1, 2, l) for l in ls]
        labels["sup P(Z1|Z2)"] = "sufficient condition (q=2)"
        alt = [bridge_sup_q2_step(s, l) for l in ls]
        if any(abs(a - b) > 1e-12 for a, b in zip(alt, fam["sup P(Z1|Z2)"])):
            fam["sup over second step"] = alt
            labels["sup over second step"] = "literal reading (differs from Markov reading)"
        main = "sup P(Z1|Z2)"
    elif q == 3:
        a = [bridge_sup(s, 2, 3, l) for l in ls]
        b = [bridge_sup(s, 1, 3, l) for l in ls]
        fam["sup P(Z2|Z3)"], fam["sup P(Z1|Z3)"] = a, b
        fam["max"] = [max(x, y) for x, y in zip(a, b)]
        labels.update({"sup P(Z2|Z3)": "sufficient condition (q=3)", "sup P(Z1|Z3)": "sufficient condition (q=3)",
                       "max": "sufficient condition (q=3), combined"})
        main = "max"
    else:
        # the p=q-1 condition is the pair; its limit vanishes iff the larger member does
        a = [bridge_sup(s, q - 1, q, l) for l in ls]
        b = [bridge_sup(s, 1, q, l) for l in ls]
        fam[f"sup P(Z{q-1}|Z{q})"], fam[f"sup P(Z1|Z{q})"] = a, b
        labels[f"sup P(Z{q-1}|Z{q})"] = labels[f"sup P(Z1|Z{q})"] = QQ1_LABEL
        fam["max_p sup P(Zp|Zq)"] = [max(bridge_sup(s, p, q, l) for p in range(1, q)) for l in ls]
        labels["max_p sup P(Zp|Zq)"] = CONJECTURE_LABEL
        slopes = {k: _log_slope(ls, v) for k, v in fam.items()}
        pair = [max(x, y) for x, y in zip(a, b)]
        return CltConditionReport(q, ls, fam, labels, trend_label(ls, pair), slopes)
    slopes = {k: _log_slope(ls, v) for k, v in fam.items()}
    return CltConditionReport(q, ls, fam, labels, trend_label(ls, fam[main]), slopes)


# ---------------------------------------------------------------------------
# q = 2 contraction ratio


def _six_j_weights(l: int) -> np.ndarray:
    s = np.arange(2 * l + 1)
    return np.array([(2 * k + 1) * (2 * l + 1) * float(cg_zero_squared(l, k, l)) for k in s])


def as11_ratio_q2(s, l: int) -> float:
    """Contraction ratio for q = 2, p = 1, m = 0, reduced through 6j symbols.

    Normalized as ``num / (C̃_l^{(2)} / 2)^2`` so that a field living only at
    l = 0 gives exactly 1.
    """
    g = spectrum._as_gamma(s)
    Lmax = g.size - 1
    if not 0 <= l <= 2 * Lmax:
        raise ValueError(f"l = {l} outside 0..{2 * Lmax}")
    den = spectrum.hat_convolve(s, 2).value(2, l)
    if den <= 0:
        raise UnreachableLevel(f"C̃_{l} = 0")
    ws = _six_j_weights(l)
    live = [a for a in range(Lmax + 1) if g[a] > 0]
    c0 = {(a, b): float(cg_zero(a, b, l)) for a in live for b in live}
    terms = []
    for l1 in live:
        for l2 in live:
            if (l1 + l2) % 2:
                continue
            js = [j for j in live if c0[(l1, j)] and c0[(l2, j)]]
            if not js:
                continue
            # inner[s] = Σ_j Γ_j C_{l1 j} C_{l2 j} {l1 j l; l s l2}
            inner = np.zeros(ws.size)
            for si in range(ws.size):
                if ws[si] == 0.0:
                    continue
                inner[si] = math.fsum(
                    g[j] * c0[(l1, j)] * c0[(l2, j)] * wigner6j_float(l1, j, l, l, si, l2) for j in js
                )
            terms.append(g[l1] * g[l2] * math.fsum(ws * inner * inner))
    return math.fsum(terms) / den**2


def as11_ratio_q2_bruteforce(s, l: int) -> float:
    """The same ratio from raw four-coefficient sums over all projections (small Lmax)."""
    g = spectrum._as_gamma(s)
    Lmax = g.size - 1
    den = spectrum.hat_convolve(s, 2).value(2, l)
    if den <= 0:
        raise UnreachableLevel(f"C̃_{l} = 0")
    live = [a for a in range(Lmax + 1) if g[a] > 0]
    terms = []
    for j1 in live:
        for n1 in range(-j1, j1 + 1):
            for j2 in live:
                for n2 in range(-j2, j2 + 1):
                    inner = []
                    for l1 in live:
                        z = float(cg_zero(l1, j1, l)) * float(cg_zero(l1, j2, l))
                        if z == 0.0:
                            continue
                        for m1 in range(-l1, l1 + 1):
                            a = cg(l1, m1, j1, n1, l, 0)
                            b = cg(l1, m1, j2, n2, l, 0)
                            if a and b:
                                inner.append(g[l1] * float(a) * float(b) * z)
                    if inner:
                        terms.append(g[j1] * g[j2] * math.fsum(inner) ** 2)
    return math.fsum(terms) / den**2


# ---------------------------------------------------------------------------
# Abelian baseline


def _as_int_law(gamma) -> dict[int, Fraction]:
    if isinstance(gamma, Mapping):
        items = gamma.items()
    else:
        seq = list(gamma)
        if len(seq) % 2 == 0:
            raise ValueError("sequence form needs odd length, centered at index len//2")
        off = len(seq) // 2
        items = ((i - off, v) for i, v in enumerate(seq))
    law = {int(k): Fraction(v) for k, v in items if v}
    if any(v < 0 for v in law.values()):
        raise ValueError("weights must be nonnegative")
    if not law:
        raise ValueError("empty step law")
    if any(law.get(-k, 0) != v for k, v in law.items()):
        raise ValueError("step weights must be symmetric: gamma[-l] == gamma[l]")
    return law


def _seq_conv(a: Mapping[int, Fraction], b: Mapping[int, Fraction]) -> dict[int, Fraction]:
    out: dict[int, Fraction] = {}
    for i, x in a.items():
        for j, y in b.items():
            out[i + j] = out.get(i + j, Fraction(0)) + x * y
    return out


def _power(law: Mapping[int, Fraction], n: int) -> dict[int, Fraction]:
    out: dict[int, Fraction] = {0: Fraction(1)}
    for _ in range(n):
        out = _seq_conv(out, law)
    return out


def abelian_bridge_sup(gamma, p: int, q: int, l: int) -> Fraction:
    """``sup_j P[U_p = j | U_q = l]`` for the integer walk with step weights ``gamma``.

    ``gamma`` is a mapping ``{j: weight}`` or an odd-length sequence centered
    at 0.  Exact rational result.
    """
    if not 1 <= p < q:
        raise ValueError("need 1 <= p < q")
    law = _as_int_law(gamma)
    head, tail, full = _power(law, p), _power(law, q - p), _power(law, q)
    total = full.get(l, Fraction(0))
    if total == 0:
        raise UnreachableLevel(f"endpoint {l} unreachable in {q} steps")
    return max(w * tail.get(l - j, Fraction(0)) for j, w in head.items()) / total


def indicator_bridge_sup(gamma, p: int, q: int, l: int) -> Fraction:
    """The generic hypergroup bridge with coupling weights replaced by ``1{a + b = l}``."""
    law = _as_int_law(gamma)
    dist = spectrum.walk_bridge(law, spectrum.integer_coupling, p, q, l)
    return spectrum.exact_sup(dist)[0]


# ---------------------------------------------------------------------------
# regime scan


def _proxy(s: PowerSpectrum, l: int) -> float:
    """``C_l^2 / C_{⌊l/2⌋}^2`` with unit constants."""
    return (spectrum_value(s, l) / spectrum_value(s, l // 2)) ** 2


def spectrum_value(s: PowerSpectrum, l: int) -> float:
    """``C_l`` including levels beyond Lmax for the parametric models."""
    if l <= s.Lmax:
        return s.values[l]
    name, arg = spectrum.parse_model(s.model)
    if name == "exponential":
        f = lambda k: (k + 1) ** arg * math.exp(-k)
    elif name == "polynomial":
        f = lambda k: (1.0 + k) ** (-arg)
    else:
        raise ValueError(f"C_{l} beyond Lmax is unknown for a custom spectrum")
    return s.values[0] * f(l) / f(0)


@dataclass
class DualityReport:
    ls: list[int]
    exp_sup: list[float]
    poly_sup: list[float]
    exp_proxy: list[float]
    poly_proxy: list[float]
    exp_flag: str
    poly_flag: str

    def rows(self) -> list[dict]:
        return [
            {"l": l, "exp_bridge_sup": a, "poly_bridge_sup": b, "exp_proxy": c, "poly_proxy": d}
            for l, a, b, c, d in zip(self.ls, self.exp_sup, self.poly_sup, self.exp_proxy, self.poly_proxy)
        ]


def _duality_flag(ls: Sequence[int], proxy: Sequence[float]) -> str:
    # exponential-type decay of the proxy in l (not log l) signals the CLT regime
    x = np.array(ls, dtype=float)
    y = np.log(np.maximum(np.array(proxy), 1e-300))
    if len(ls) >= 2 and np.polyfit(x, y, 1)[0] < -0.05:
        return "CLT-compatible decay"
    return "obstructed"


def duality_scan(s_exp: PowerSpectrum, s_poly: PowerSpectrum, l_list: Sequence[int]) -> DualityReport:
    ls = [int(l) for l in l_list]
    es = [bridge_sup(s_exp, 1, 2, l) for l in ls]
    ps = [bridge_sup(s_poly, 1, 2, l) for l in ls]
    ep = [_proxy(s_exp, l) for l in ls]
    pp = [_proxy(s_poly, l) for l in ls]
    return DualityReport(ls, es, ps, ep, pp, _duality_flag(ls, ep), _duality_flag(ls, pp))


# ---------------------------------------------------------------------------
# general subordination


def hermite_poly(q: int, z):
    """``H_q(z)`` by the recurrence ``H_{k+1} = z H_k - k H_{k-1}``."""
    z = np.asarray(z, dtype=float)
    h_prev, h = np.ones_like(z), z.copy()
    if q == 0:
        return h_prev
    for k in range(1, q):
        h_prev, h = h, z * h - k * h_prev
    return h


COARSE_NODES, FINE_NODES = 128, 256  # numpy's Gauss-Hermite weights underflow beyond ~300 nodes


def _hermite_rules(F: Callable[[np.ndarray], np.ndarray], Qmax: int) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients ``c_0..c_Qmax`` on the coarse and on the fine rule."""
    if not 0 <= Qmax <= 60:
        raise ValueError("Qmax must lie in 0..60")
    out = []
    e2 = []
    for k in (COARSE_NODES, FINE_NODES):
        z, w = np.polynomial.hermite_e.hermegauss(k)
        w = w / math.sqrt(2 * math.pi)
        with np.errstate(over="ignore", invalid="ignore"):
            fz = np.asarray(F(z), dtype=float)
            if fz.shape != z.shape:
                raise ValueError("F must be vectorized")
            e2.append(math.fsum(w * fz * fz))
        out.append(np.array([math.fsum(w * fz * hermite_poly(q, z)) for q in range(Qmax + 1)]) if math.isfinite(e2[-1]) else None)
    # E[F^2] settles under refinement; a divergent integral keeps growing
    if not all(math.isfinite(v) for v in e2) or abs(e2[0] - e2[1]) > 0.05 * max(1.0, e2[1]):
        raise ValueError("F is not square-integrable against the Gaussian weight")
    return out[0], out[1]


def hermite_coefficients(F: Callable[[np.ndarray], np.ndarray], Qmax: int) -> np.ndarray:
    """``c_q(F) = E[F(Z) H_q(Z)]`` for q = 0..Qmax by Gauss-Hermite quadrature.

    Exact for polynomial ``F`` of degree up to Qmax.  ``F`` is rejected when
    ``E[F^2]`` does not settle between a 128- and a 256-node rule.
    """
    return _hermite_rules(F, Qmax)[1]


@dataclass
class SubordinationAnalysis:
    coefficients: np.ndarray  # c_q for q = 0..Qmax
    ls: list[int]
    sigma_q2: dict[int, list[float]]  # per l: candidate σ_q^2 for q = 1..Qmax
    sigma2: dict[int, float]
    tail: dict[int, list[float]]  # per l: tail mass beyond p, p = 1..Qmax-1
    norm_partial_sums: list[float]
    cauchy_gap: float


def analyze_subordination(F, s, Qmax: int, l_list: Sequence[int] | None = None,
                          tol: float = 1e-8) -> SubordinationAnalysis:
    """Hermite expansion of ``F`` and finite-l proxies of the general CLT conditions.

    ``F`` is a vectorized callable or an explicit coefficient sequence
    ``(c_1, c_2, ...)``.  ``F`` must be centered.
    """
    if Qmax < 1:
        raise ValueError("Qmax must be >= 1")
    if callable(F):
        coarse, c = _hermite_rules(F, Qmax)
        scale = math.sqrt(sum(float(x) ** 2 / math.factorial(k) for k, x in enumerate(c)))
        # allow for quadrature error on non-smooth F, estimated from the two rules
        if abs(c[0]) > tol * max(1.0, scale) + 10 * abs(c[0] - coarse[0]):
            raise ValueError(f"F must be centered (E F(Z) = {c[0]:.3g})")
        c[0] = 0.0
    else:
        vals = [float(x) for x in F]
        if len(vals) > Qmax:
            raise ValueError("more coefficients than Qmax")
        c = np.zeros(Qmax + 1)
        c[1 : len(vals) + 1] = vals
    partial = list(np.cumsum([c[q] ** 2 / math.factorial(q) for q in range(1, Qmax + 1)]))
    gap = partial[-1] - partial[-2] if len(partial) > 1 else partial[-1]
    Lmax = len(spectrum._as_gamma(s)) - 1
    ls = list(range(1, Lmax + 1)) if l_list is None else [int(l) for l in l_list]
    tables = {q: hermite_variance_table(s, q).values for q in range(1, Qmax + 1) if c[q] != 0.0}
    sig_q: dict[int, list[float]] = {}
    sig: dict[int, float] = {}
    tails: dict[int, list[float]] = {}
    for l in ls:
        t = []
        for q in range(1, Qmax + 1):
            tab = tables.get(q)
            v = float(tab[l]) if tab is not None and l < tab.size else 0.0
            t.append((2 * l + 1) / FOUR_PI * (c[q] / math.factorial(q)) ** 2 * v)
        tot = math.fsum(t)
        cand = [x / tot if tot > 0 else 0.0 for x in t]
        sig_q[l] = cand
        sig[l] = math.fsum((c[q] / math.factorial(q)) ** 2 * cand[q - 1] for q in range(1, Qmax + 1))
        tails[l] = [FOUR_PI * math.fsum(t[p:]) for p in range(1, Qmax)]
    return SubordinationAnalysis(c, ls, sig_q, sig, tails, partial, gap)


# ---------------------------------------------------------------------------
# lemma scans


@dataclass
class LemmaBoundsReport:
    cg_constant: float
    cg_argmax: tuple[int, int]
    sixj_constant: float
    sixj_argmax: tuple[int, ...]
    cg_growth: bool
    sixj_growth: bool


def lemma_bounds_check(l_range: Sequence[int], l1_range: Sequence[int], sixj_range: Sequence[int] | None = None) -> LemmaBoundsReport:
    """Empirical constants for the coupling-coefficient decay and the 6j-sum bound.

    ``sup |C^{l0}_{l0 l1 0}| l1^{1/4}`` over ``l in l_range``, ``0 < l1 in l1_range``
    (zero unless ``l1 <= 2l``), and ``sup X / bound`` where X is the 6j sum and
    bound the fifth-root factor, with ``l1, l2, j1, j2`` in ``sixj_range``.
    Growth flags compare the constant on the upper half of the range with
    the lower half.
    """
    best, arg = 0.0, (0, 0)
    half_best = 0.0
    lmid = sorted(l1_range)[len(l1_range) // 2] if l1_range else 0
    for l in l_range:
        for l1 in l1_range:
            if l1 <= 0 or l1 > 2 * l or l1 % 2:
                continue
            v = abs(float(cg_zero(l, l1, l))) * l1**0.25
            if v > best:
                best, arg = v, (l, l1)
            if l1 < lmid:
                half_best = max(half_best, v)
    cg_growth = best > 1.5 * half_best if half_best > 0 else False
    sj = list(sixj_range) if sixj_range is not None else list(range(0, 5))
    sbest, sarg, s_low = 0.0, (0,) * 5, 0.0
    smid = sorted(sj)[len(sj) // 2] if sj else 0
    for l in l_range:
        ws = _six_j_weights(l)
        for l1, l2, j1, j2 in product(sj, repeat=4):
            if (l1 + j1 + l) % 2 or (l1 + j2 + l) % 2 or (l2 + j1 + l) % 2:
                continue
            x = math.fsum(
                ws[k] * wigner6j_float(l1, j1, l, l, k, l2) * wigner6j_float(l1, j2, l, l, k, l2)
                for k in range(ws.size) if ws[k]
            )
            bound = max(min((2 * l1 + 1) ** -0.2, (2 * l2 + 1) ** -0.2), min((2 * j1 + 1) ** -0.2, (2 * j2 + 1) ** -0.2))
            r = abs(x) / bound
            if r > sbest:
                sbest, sarg = r, (l, l1, l2, j1, j2)
            if max(l1, l2, j1, j2) < smid:
                s_low = max(s_low, r)
    return LemmaBoundsReport(best, arg, sbest, sarg, cg_growth, sbest > 1.5 * s_low if s_low > 0 else False)
