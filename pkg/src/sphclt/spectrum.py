"""Power spectra, hypergroup convolutions on the dual of SO(3) and bridge laws.

A spectrum ``C_0..C_Lmax`` defines step weights ``Γ_l = (2l+1) C_l``.  Two
coupling rules are supported:

* ``hat``: ``l1 ⊕ l2`` lands on ``l`` with weight ``(C^{l0}_{l1 0 l2 0})^2``;
* ``gkr``: weight ``(2l+1) / ((2l1+1)(2l2+1))`` on the whole triangle band.

Both are probability laws in ``l``, so ``Γ̂_{q,·} / (Γ*)^q`` is the law of
the q-th position ``Z_q`` of a random walk whose steps have law ``Γ/Γ*``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping

import numpy as np

from .angular import cg_zero_squared, triangle_ok

FOUR_PI = 4.0 * math.pi
KINDS = ("hat", "gkr")


class UnreachableLevel(ValueError):
    """Conditioning on an endpoint the walk cannot reach."""


# ---------------------------------------------------------------------------
# spectra


@dataclass(frozen=True)
class PowerSpectrum:
    values: tuple[float, ...]
    model: str = "custom"

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("empty spectrum")
        bad = [l for l, v in enumerate(vals) if not (v > 0.0 and math.isfinite(v))]
        if bad:
            raise ValueError(f"spectrum must be positive and finite; offending l = {bad[:5]}")
        object.__setattr__(self, "values", vals)

    @property
    def Lmax(self) -> int:
        return len(self.values) - 1

    @property
    def C(self) -> np.ndarray:
        return np.array(self.values)

    @property
    def gamma(self) -> np.ndarray:
        return np.array([(2 * l + 1) * c for l, c in enumerate(self.values)])

    @property
    def gamma_star(self) -> float:
        return math.fsum(self.gamma)

    def pointwise_variance(self) -> float:
        """``Σ (2l+1) C_l / 4π`` of the truncated field."""
        return self.gamma_star / FOUR_PI

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["l", "C_l"])
        for l, c in enumerate(self.values):
            w.writerow([l, repr(c)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "PowerSpectrum":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["l", "C_l"]:
            raise ValueError("expected header 'l,C_l'")
        vals = []
        for i, row in enumerate(rows[1:]):
            if int(row[0]) != i:
                raise ValueError(f"row {i + 2}: expected l = {i}")
            vals.append(float(row[1]))
        return cls(tuple(vals))


def parse_model(spec) -> tuple[str, object]:
    """Turn ``"exponential 0.5"``, ``"polynomial 3"`` or ``"custom 1,0.5,0.2"`` into a pair."""
    if isinstance(spec, tuple):
        return spec
    parts = str(spec).split(None, 1)
    if not parts:
        raise ValueError("empty spectrum model")
    name = parts[0].lower()
    arg = parts[1].strip() if len(parts) > 1 else ""
    if name in ("exponential", "polynomial"):
        try:
            return name, float(arg) if arg else (0.0 if name == "exponential" else None)
        except ValueError:
            raise ValueError(f"bad parameter for {name}: {arg!r}") from None
    if name == "custom":
        try:
            return name, [float(x) for x in arg.replace(",", " ").split()]
        except ValueError:
            raise ValueError(f"bad custom spectrum: {arg!r}") from None
    raise ValueError(f"unknown spectrum model {name!r}")


def make_spectrum(model, Lmax: int | None = None, normalize: bool = False) -> PowerSpectrum:
    """Build a spectrum from ``exponential α``, ``polynomial β`` or ``custom`` values.

    ``exponential α``: ``C_l = (l+1)^α e^{-l}``.  ``polynomial β``:
    ``C_l = (1+l)^{-β}``.  With ``normalize`` the values are rescaled so that
    ``Σ (2l+1) C_l / 4π = 1``.

    The polynomial exponent must be at least 2; a truncated spectrum is
    always summable and the borderline β = 2 is the case of interest.
    """
    name, arg = parse_model(model)
    if name == "custom":
        vals = list(arg)
        if Lmax is not None and Lmax != len(vals) - 1:
            raise ValueError(f"custom spectrum has {len(vals)} entries, Lmax={Lmax}")
        label = "custom"
    else:
        if Lmax is None or Lmax < 2:
            raise ValueError("Lmax must be at least 2")
        if name == "exponential":
            if arg is None or arg < 0:
                raise ValueError("exponential model needs alpha >= 0")
            vals = [(l + 1) ** arg * math.exp(-l) for l in range(Lmax + 1)]
        else:
            if arg is None or arg < 2:
                raise ValueError("polynomial model needs beta >= 2")
            vals = [(1.0 + l) ** (-arg) for l in range(Lmax + 1)]
        label = f"{name} {arg!r}"
    spec = PowerSpectrum(tuple(vals), label)
    if normalize:
        scale = FOUR_PI / spec.gamma_star
        spec = PowerSpectrum(tuple(v * scale for v in spec.values), label)
    return spec


def _as_gamma(s) -> np.ndarray:
    """Step weights from a spectrum, or from raw ``C_l`` values (zeros allowed)."""
    if isinstance(s, PowerSpectrum):
        return s.gamma
    c = np.asarray(s, dtype=float)
    if c.ndim != 1 or c.size == 0 or np.any(c < 0) or not np.all(np.isfinite(c)):
        raise ValueError("raw spectrum must be a nonempty sequence of nonnegative reals")
    if not np.any(c > 0):
        raise ValueError("raw spectrum is identically zero")
    return np.arange(c.size) * 2.0 * c + c


# ---------------------------------------------------------------------------
# coupling weights


def gkr_weight(l1: int, l2: int, l: int) -> Fraction:
    """``(2l+1) / ((2l1+1)(2l2+1))`` on the triangle band, 0 outside."""
    if min(l1, l2, l) < 0 or not triangle_ok(l1, l2, l):
        return Fraction(0)
    return Fraction(2 * l + 1, (2 * l1 + 1) * (2 * l2 + 1))


@lru_cache(maxsize=None)
def _hat_w(a: int, b: int, l: int) -> float:
    return float(cg_zero_squared(a, b, l))


@lru_cache(maxsize=None)
def _gkr_w(a: int, b: int, l: int) -> float:
    return float(gkr_weight(a, b, l))


def _targets(kind: str, a: int, b: int) -> range:
    if kind == "hat":
        return range(abs(a - b), a + b + 1, 2)
    return range(abs(a - b), a + b + 1)


def _weight(kind: str):
    if kind == "hat":
        return _hat_w
    if kind == "gkr":
        return _gkr_w
    raise ValueError(f"unknown convolution kind {kind!r}")


def _kernel(gamma: np.ndarray, size: int, kind: str) -> np.ndarray:
    """Unnormalized transfer matrix ``K[a, l] = Σ_b Γ_b w(a, b, l)``, states 0..size."""
    w = _weight(kind)
    K = np.zeros((size + 1, size + 1))
    support = [(b, float(g)) for b, g in enumerate(gamma) if g > 0]
    for a in range(size + 1):
        terms: dict[int, list[float]] = {}
        for b, g in support:
            for l in _targets(kind, a, b):
                if l > size:
                    break
                terms.setdefault(l, []).append(g * w(a, b, l))
        for l, t in terms.items():
            K[a, l] = math.fsum(t)
    return K


def _vecmat(v: np.ndarray, K: np.ndarray) -> np.ndarray:
    """Row vector times matrix with compensated sums, fixed order."""
    out = np.zeros(K.shape[1])
    nz = np.nonzero(v)[0]
    for l in range(K.shape[1]):
        col = K[nz, l]
        if np.any(col):
            out[l] = math.fsum(v[nz] * col)
    return out


def transition_kernel(s, kind: str = "hat", size: int | None = None) -> np.ndarray:
    """Stochastic matrix ``P{Z_{n+1} = l | Z_n = L}`` on states ``0..size``.

    Rows whose mass would leave the state window are truncated; with
    ``size = None`` the window is ``4 Lmax`` and rows ``L <= 3 Lmax`` are exact.
    """
    gamma = _as_gamma(s)
    if kind == "gkr":
        gamma = gamma / math.fsum(gamma)
    Lmax = gamma.size - 1
    size = 4 * Lmax if size is None else size
    return _kernel(gamma, size, kind) / math.fsum(gamma)


# ---------------------------------------------------------------------------
# convolution tables


@dataclass
class ConvolutionTable:
    """``values[q-1][l] = Γ̂_{q,l}`` (or the GKR analogue) for q = 1..order."""

    kind: str
    gamma: np.ndarray
    values: list[np.ndarray]
    kernel: np.ndarray = field(repr=False)
    _powers: dict = field(default_factory=dict, repr=False)

    @property
    def order(self) -> int:
        return len(self.values)

    @property
    def Lmax(self) -> int:
        return self.gamma.size - 1

    @property
    def gamma_star(self) -> float:
        return math.fsum(self.gamma)

    def get(self, q: int) -> np.ndarray:
        if not 1 <= q <= self.order:
            raise ValueError(f"order {q} not tabulated (have 1..{self.order})")
        return self.values[q - 1]

    def value(self, q: int, l: int) -> float:
        v = self.get(q)
        return float(v[l]) if 0 <= l < v.size else 0.0

    def law(self, q: int) -> np.ndarray:
        """Distribution of ``Z_q``: ``Γ̂_{q,·} / (Γ*)^q``."""
        return self.get(q) / self.gamma_star**q

    def power(self, k: int) -> np.ndarray:
        """Matrix ``M[λ, l] = [e_λ K^k]_l`` of k-step transfer weights (cached)."""
        if k not in self._powers:
            if k == 0:
                self._powers[0] = np.eye(self.kernel.shape[0])
            else:
                prev = self.power(k - 1)
                self._powers[k] = np.array([_vecmat(row, self.kernel) for row in prev])
        return self._powers[k]

    def star(self, p: int, l1: int) -> np.ndarray:
        """``Γ̂*_{p,·;l1}``: weights of the walk started at ``l1`` after ``p - 1`` steps."""
        if p < 1:
            raise ValueError("star order must be >= 1")
        n = self.kernel.shape[0]
        if not 0 <= l1 < n:
            return np.zeros(n)
        return self.power(p - 1)[l1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["q", "l", "value"])
        for q, vals in enumerate(self.values, start=1):
            for l in range(q * self.Lmax + 1):
                w.writerow([q, l, repr(float(vals[l]))])
        return buf.getvalue()


def _convolve(gamma: np.ndarray, q: int, kind: str) -> ConvolutionTable:
    if q < 1:
        raise ValueError("order must be >= 1")
    Lmax = gamma.size - 1
    size = q * Lmax
    K = _kernel(gamma, size, kind)
    first = np.zeros(size + 1)
    first[: Lmax + 1] = gamma
    vals = [first]
    for _ in range(q - 1):
        vals.append(_vecmat(vals[-1], K))
    return ConvolutionTable(kind, gamma.copy(), vals, K)


@lru_cache(maxsize=32)
def _convolve_cached(gamma_key: tuple[float, ...], q: int, kind: str) -> ConvolutionTable:
    return _convolve(np.array(gamma_key), q, kind)


def _table(s, q: int, kind: str) -> ConvolutionTable:
    gamma = _as_gamma(s)
    if kind == "gkr":
        gamma = gamma / math.fsum(gamma)
    elif kind != "hat":
        raise ValueError(f"unknown convolution kind {kind!r}")
    return _convolve_cached(tuple(float(g) for g in gamma), q, kind)


def hat_convolve(s, q: int) -> ConvolutionTable:
    """``Γ̂_{k,l}`` for k = 1..q and l = 0..k·Lmax (squared zero-projection CG weights)."""
    if q < 2:
        raise ValueError("q must be >= 2")
    return _table(s, q, "hat")


def gkr_convolve(s, q: int) -> ConvolutionTable:
    """GKR analogue of :func:`hat_convolve`; Γ is rescaled internally to sum to 1."""
    if q < 2:
        raise ValueError("q must be >= 2")
    return _table(s, q, "gkr")


@lru_cache(maxsize=32)
def _kernel_cached(gamma_key: tuple[float, ...], size: int, kind: str) -> np.ndarray:
    return _kernel(np.array(gamma_key), size, kind)


def star_convolve(s, p: int, l: int, l1: int, kind: str = "hat") -> float:
    """``Γ̂*_{p,l;l1}``, with ``Σ_{l1} Γ̂_{q+1-p,l1} Γ̂*_{p,l;l1} = Γ̂_{q,l}``."""
    if p < 2:
        raise ValueError("p must be >= 2")
    if l1 < 0 or l < 0:
        raise ValueError("negative level")
    gamma = _as_gamma(s)
    if kind == "gkr":
        gamma = gamma / math.fsum(gamma)
    # states up to l1 + (p-1) Lmax are reachable from l1
    size = max(l, l1 + (p - 1) * (gamma.size - 1))
    K = _kernel_cached(tuple(float(g) for g in gamma), size, kind)
    v = np.zeros(size + 1)
    v[l1] = 1.0
    for _ in range(p - 1):
        v = _vecmat(v, K)
    return float(v[l])


# ---------------------------------------------------------------------------
# bridges


@dataclass
class BridgeDistribution:
    p: int
    q: int
    l: int
    kind: str
    probabilities: np.ndarray  # index λ

    def sup(self) -> tuple[float, int]:
        """Largest probability and its λ (smallest λ on ties)."""
        i = int(np.argmax(self.probabilities))  # argmax returns the first maximum
        return float(self.probabilities[i]), i

    def total(self) -> float:
        return math.fsum(self.probabilities)


def bridge_distribution(s, p: int, q: int, l: int, kind: str = "hat") -> BridgeDistribution:
    """Law of ``Z_p`` given ``Z_q = l``: ``Γ̂*_{q+1-p,l;λ} Γ̂_{p,λ} / Γ̂_{q,l}``."""
    if not 1 <= p < q:
        raise ValueError("need 1 <= p < q")
    tab = _table(s, q, kind)
    Lmax = tab.Lmax
    if not 0 <= l <= q * Lmax:
        raise UnreachableLevel(f"level {l} outside support 0..{q * Lmax}")
    total = tab.value(q, l)
    if total <= 0.0:
        raise UnreachableLevel(f"Γ̂_{{{q},{l}}} = 0: endpoint {l} unreachable in {q} steps")
    start = tab.get(p)
    reach = tab.power(q - p)[:, l]
    probs = np.zeros(p * Lmax + 1)
    for lam in range(p * Lmax + 1):
        if start[lam] != 0.0:
            probs[lam] = start[lam] * reach[lam] / total
    return BridgeDistribution(p, q, l, kind, probs)


def path_sup(s, q: int, l: int, kind: str = "hat") -> tuple[float, tuple[int, ...]]:
    """Most likely path ``(Z_1, ..., Z_{q-1})`` given ``Z_q = l`` and its probability.

    Max-product dynamic programming over the walk; ties resolved toward the
    lexicographically smallest path.
    """
    if q < 2:
        raise ValueError("q must be >= 2")
    tab = _table(s, q, kind)
    total = tab.value(q, l)
    if total <= 0.0:
        raise UnreachableLevel(f"endpoint {l} unreachable in {q} steps")
    K = tab.kernel
    n = K.shape[0]
    # best[k][x]: max weight of a path Z_1..Z_k ending at x; choice[k][x] back-pointer
    best = np.zeros(n)
    best[: tab.Lmax + 1] = tab.gamma
    choices = []
    for _ in range(q - 1):
        cand = best[:, None] * K
        arg = np.argmax(cand, axis=0)
        best = cand[arg, np.arange(n)]
        choices.append(arg)
    path = [l]
    for arg in reversed(choices):
        path.append(int(arg[path[-1]]))
    path.reverse()
    return float(best[l] / total), tuple(path[:-1])


# ---------------------------------------------------------------------------
# exact walks on a generic discrete hypergroup

Coupling = Callable[[int, int], Mapping[int, Fraction]]


def sphere_coupling(a: int, b: int) -> dict[int, Fraction]:
    return {l: cg_zero_squared(a, b, l) for l in range(abs(a - b), a + b + 1, 2)}


def gkr_coupling(a: int, b: int) -> dict[int, Fraction]:
    return {l: gkr_weight(a, b, l) for l in range(abs(a - b), a + b + 1)}


def integer_coupling(a: int, b: int) -> dict[int, Fraction]:
    """Indicator weights ``1{a + b = l}``: the ordinary random walk on Z."""
    return {a + b: Fraction(1)}


def _step(dist: Mapping[int, Fraction], gamma: Mapping[int, Fraction], couple: Coupling) -> dict[int, Fraction]:
    out: dict[int, Fraction] = {}
    for a, pa in sorted(dist.items()):
        for b, gb in sorted(gamma.items()):
            for l, w in couple(a, b).items():
                if w:
                    out[l] = out.get(l, Fraction(0)) + pa * gb * w
    return out


def walk_bridge(
    gamma: Mapping[int, Fraction | int], couple: Coupling, p: int, q: int, l: int
) -> dict[int, Fraction]:
    """Exact law of ``Z_p`` given ``Z_q = l`` for the walk with step weights ``gamma``.

    ``couple(a, b)`` gives the law of ``a ⊕ b``.  All arithmetic is rational.
    """
    if not 1 <= p < q:
        raise ValueError("need 1 <= p < q")
    g = {k: Fraction(v) for k, v in gamma.items() if v}
    zp: dict[int, Fraction] = dict(g)
    for _ in range(p - 1):
        zp = _step(zp, g, couple)
    joint: dict[int, Fraction] = {}
    for lam, w in sorted(zp.items()):
        d = {lam: Fraction(1)}
        for _ in range(q - p):
            d = _step(d, g, couple)
        if d.get(l):
            joint[lam] = w * d[l]
    total = sum(joint.values(), Fraction(0))
    if total == 0:
        raise UnreachableLevel(f"endpoint {l} unreachable in {q} steps")
    return {lam: v / total for lam, v in joint.items()}


def exact_sup(dist: Mapping[int, Fraction]) -> tuple[Fraction, int]:
    best = max(dist.values())
    return best, min(k for k, v in dist.items() if v == best)


def enumerate_paths(s, q: int, kind: str = "hat") -> Iterable[tuple[tuple[int, ...], float]]:
    """Every walk path ``(Z_1, ..., Z_q)`` with its probability (brute force, small cases)."""
    gamma = _as_gamma(s)
    if kind == "gkr":
        gamma = gamma / math.fsum(gamma)
    gs = math.fsum(gamma)
    w = _weight(kind)
    steps = [(b, g / gs) for b, g in enumerate(gamma) if g > 0]

    def rec(path: tuple[int, ...], prob: float):
        if len(path) == q:
            yield path, prob
            return
        a = path[-1]
        nxt: dict[int, list[float]] = {}
        for b, pb in steps:
            for l in _targets(kind, a, b):
                ww = w(a, b, l)
                if ww:
                    nxt.setdefault(l, []).append(pb * ww)
        for l in sorted(nxt):
            yield from rec(path + (l,), prob * math.fsum(nxt[l]))

    for b, pb in steps:
        yield from rec((b,), pb)
