"""Exact Gaussian moments of trace products with an external field.

The weight ``exp(-Tr(Lambda H^2)/2)`` on Hermitian ``N x N`` matrices has
two-point function ``<H_ab H_cd> = 2 delta_ad delta_bc / (lambda_a + lambda_b)``.
Moments of ``prod_i Tr(H^{p_i})`` are sums over perfect matchings of the
matrix entries; each matching identifies row indices into classes ("faces")
and leaves a sum over colourings of the faces by ``1..N``.

An even potential ``V(x) = g * sum_d c_d x^d`` is treated perturbatively:
``exp(Tr V(H))`` is expanded in ``g`` and every order is again Gaussian.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache, reduce
from typing import Iterable, Mapping, Sequence

import numpy as np

from .series import format_fraction, parse_fraction

DEFAULT_DEGREE_CAP = 12
DEFAULT_POTENTIAL = ((4, Fraction(1)),)


class CapExceeded(RuntimeError):
    """Refusal to enumerate a Gaussian integrand above the degree cap."""

    def __init__(self, powers, cap, order=None, moment=None):
        self.powers = tuple(powers)
        self.moment = moment
        self.degree = sum(self.powers)
        self.cap = cap
        self.order = order
        self.pairings = double_factorial(self.degree - 1)
        where = f" at g-order {order}" if order is not None else ""
        if moment is not None:
            where += f" (while evaluating M{list(moment)})"
        super().__init__(
            f"trace moment {self.powers}{where} has degree {self.degree} > cap {cap} "
            f"(~{self.pairings} pairings)"
        )


def double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


@dataclass(frozen=True)
class ExternalField:
    """``Lambda = diag(lambdas)`` with exact positive entries."""

    lambdas: tuple

    def __post_init__(self):
        lams = tuple(Fraction(x) for x in self.lambdas)
        if not lams:
            raise ValueError("external field needs at least one eigenvalue")
        if any(x <= 0 for x in lams):
            raise ValueError("all lambda_i must be positive")
        object.__setattr__(self, "lambdas", lams)

    @property
    def N(self) -> int:
        return len(self.lambdas)

    @classmethod
    def parse(cls, text: str) -> "ExternalField":
        return cls(tuple(parse_fraction(x) for x in text.split(",") if x.strip()))

    @classmethod
    def random(cls, N: int, seed: int, bound: int = 50) -> "ExternalField":
        """Distinct positive rationals ``p/q`` with ``p, q <= bound`` from a seeded generator."""
        rng = random.Random(seed)
        seen: list[Fraction] = []
        while len(seen) < N:
            x = Fraction(rng.randint(1, bound), rng.randint(1, bound))
            if x not in seen:
                seen.append(x)
        return cls(tuple(seen))

    def permuted(self, order: Sequence[int]) -> "ExternalField":
        return ExternalField(tuple(self.lambdas[i] for i in order))

    def to_json(self) -> list:
        return [format_fraction(x) for x in self.lambdas]


def covariance(a: int, b: int, c: int, d: int, field: ExternalField) -> Fraction:
    """``<H_ab H_cd>`` under the Gaussian weight; indices are 1-based."""
    for idx in (a, b, c, d):
        if not 1 <= idx <= field.N:
            raise IndexError(f"index {idx} outside 1..{field.N}")
    if a != d or b != c:
        return Fraction(0)
    return 2 / (field.lambdas[a - 1] + field.lambdas[b - 1])


# --------------------------------------------------------------------------
# matching enumeration


def _matchings(n: int):
    """Perfect matchings of ``range(n)`` as involution arrays, first-free-slot recursion."""
    partner = [-1] * n

    def rec(start):
        i = start
        while i < n and partner[i] >= 0:
            i += 1
        if i == n:
            yield partner
            return
        for j in range(i + 1, n):
            if partner[j] < 0:
                partner[i] = j
                partner[j] = i
                yield from rec(i + 1)
                partner[j] = -1
        partner[i] = -1

    yield from rec(0)


@lru_cache(maxsize=256)
def contraction_graphs(powers: tuple) -> tuple:
    """Group all matchings of ``prod Tr(H^{p_i})`` by their face graph.

    Returns ``((n_faces, edges, multiplicity), ...)``. ``edges`` lists, per
    matched pair, the two faces whose indices the propagator connects;
    faces are labelled by first appearance so equal graphs coincide.
    """
    D = sum(powers)
    nxt = [0] * D
    prev = [0] * D
    base = 0
    for p in powers:
        for k in range(p):
            nxt[base + k] = base + (k + 1) % p
            prev[base + (k + 1) % p] = base + k
        base += p

    counts: Counter = Counter()
    for partner in _matchings(D):
        # row(x) == row(partner[prev[x]]); faces are cycles of that map
        face = [-1] * D
        nf = 0
        for x in range(D):
            if face[x] >= 0:
                continue
            y = x
            while face[y] < 0:
                face[y] = nf
                y = partner[prev[y]]
            nf += 1
        edges = []
        for s in range(D):
            t = partner[s]
            if s < t:
                u, v = face[s], face[nxt[s]]
                edges.append((u, v) if u <= v else (v, u))
        edges.sort()
        counts[(nf, tuple(edges))] += 1
    return tuple((nf, edges, c) for (nf, edges), c in sorted(counts.items()))


def _aligned(arr: np.ndarray, axes: tuple, target: tuple) -> np.ndarray:
    """View ``arr`` (indexed by ``axes``) as broadcastable over ``target``."""
    order = sorted(range(len(axes)), key=lambda i: target.index(axes[i]))
    arr = np.transpose(arr, order) if order else arr
    shape = [1] * len(target)
    for i in order:
        shape[target.index(axes[i])] = arr.shape[order.index(i)]
    return arr.reshape(shape)


def _colouring_sum(n_faces: int, edges: tuple, w_int: np.ndarray, d_int: np.ndarray) -> int:
    """``sum_{colourings} prod_edges w[c(u), c(v)]`` by variable elimination.

    Object arrays keep Python ints exact; np.einsum is avoided because it
    drops to int64 when combining disconnected factors.
    """
    factors: list[tuple[tuple, np.ndarray]] = []
    for (u, v), k in Counter(edges).items():
        if u == v:
            factors.append(((u,), d_int ** k))
        else:
            factors.append(((u, v), w_int ** k))
    scalar = 1
    remaining = set(range(n_faces))
    while remaining:
        # eliminate the face touching the fewest other faces
        def cost(x):
            return len({y for axes, _ in factors if x in axes for y in axes})
        x = min(remaining, key=cost)
        remaining.discard(x)
        touching = [f for f in factors if x in f[0]]
        factors = [f for f in factors if x not in f[0]]
        target = tuple(sorted({y for axes, _ in touching for y in axes}))
        joint = None
        for axes, arr in touching:
            part = _aligned(arr, axes, target)
            joint = part if joint is None else joint * part
        summed = joint.sum(axis=target.index(x))
        rest = tuple(y for y in target if y != x)
        if rest:
            factors.append((rest, np.asarray(summed, dtype=object).reshape([w_int.shape[0]] * len(rest))))
        else:
            scalar *= int(summed)
    for _, arr in factors:
        scalar *= int(arr)
    return scalar


def gaussian_trace_moment(
    powers: Iterable[int], field: ExternalField, cap: int = DEFAULT_DEGREE_CAP
) -> Fraction:
    """Exact ``E[prod_i Tr(H^{p_i})]`` under the normalized Gaussian measure."""
    powers = tuple(sorted((int(p) for p in powers), reverse=True))
    if any(p < 1 for p in powers):
        raise ValueError("trace powers must be positive")
    D = sum(powers)
    if D % 2:
        return Fraction(0)
    if D == 0:
        return Fraction(1)
    if D > cap:
        raise CapExceeded(powers, cap)
    return _trace_moment(powers, field)


@lru_cache(maxsize=4096)
def _trace_moment(powers: tuple, field: ExternalField) -> Fraction:
    lam = field.lambdas
    N = field.N
    w = [[2 / (lam[a] + lam[b]) for b in range(N)] for a in range(N)]
    # common denominator so the colouring sums run over Python ints
    L = reduce(math.lcm, (x.denominator for row in w for x in row), 1)
    w_int = np.empty((N, N), dtype=object)
    for a in range(N):
        for b in range(N):
            w_int[a, b] = w[a][b].numerator * (L // w[a][b].denominator)
    d_int = np.array([w_int[a, a] for a in range(N)], dtype=object)

    total = 0
    for n_faces, edges, mult in contraction_graphs(powers):
        total += mult * _colouring_sum(n_faces, edges, w_int, d_int)
    return Fraction(total, L ** (sum(powers) // 2))


# --------------------------------------------------------------------------
# perturbative moments


class GSeries:
    """Truncated power series ``sum_{p<=P} c_p g^p`` with exact coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable):
        coeffs = tuple(Fraction(c) for c in coeffs)
        if not coeffs:
            raise ValueError("GSeries needs at least the constant coefficient")
        self.coeffs = coeffs

    @classmethod
    def zero(cls, P: int) -> "GSeries":
        return cls([0] * (P + 1))

    @classmethod
    def constant(cls, value, P: int) -> "GSeries":
        return cls([value] + [0] * P)

    @property
    def P(self) -> int:
        return len(self.coeffs) - 1

    def _align(self, other: "GSeries") -> int:
        return min(self.P, other.P)

    def __add__(self, other: "GSeries") -> "GSeries":
        P = self._align(other)
        return GSeries(a + b for a, b in zip(self.coeffs[: P + 1], other.coeffs[: P + 1]))

    def __neg__(self) -> "GSeries":
        return GSeries(-c for c in self.coeffs)

    def __sub__(self, other: "GSeries") -> "GSeries":
        return self + (-other)

    def scale(self, factor) -> "GSeries":
        return GSeries(c * factor for c in self.coeffs)

    def __mul__(self, other) -> "GSeries":
        if not isinstance(other, GSeries):
            return self.scale(other)
        P = self._align(other)
        out = [Fraction(0)] * (P + 1)
        for i in range(P + 1):
            if not self.coeffs[i]:
                continue
            for j in range(P + 1 - i):
                out[i + j] += self.coeffs[i] * other.coeffs[j]
        return GSeries(out)

    __rmul__ = __mul__

    def __truediv__(self, other: "GSeries") -> "GSeries":
        P = self._align(other)
        b = other.coeffs
        if not b[0]:
            raise ZeroDivisionError("GSeries divisor has zero constant term")
        out: list[Fraction] = []
        for k in range(P + 1):
            acc = self.coeffs[k] - sum(out[i] * b[k - i] for i in range(k))
            out.append(acc / b[0])
        return GSeries(out)

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def __eq__(self, other) -> bool:
        return isinstance(other, GSeries) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def to_json(self) -> list:
        return [format_fraction(c) for c in self.coeffs]

    def __repr__(self) -> str:
        return "GSeries(" + ", ".join(format_fraction(c) for c in self.coeffs) + ")"


def _insertions(potential: tuple, p: int):
    """Expand ``(sum_d c_d Tr H^d)^p`` into ``(extra_powers, coefficient)`` pairs."""
    degrees = [d for d, _ in potential]
    coeffs = dict(potential)
    out: dict[tuple, Fraction] = {}

    def rec(i, left, chosen):
        if i == len(degrees) - 1:
            counts = chosen + [left]
            mult = Fraction(math.factorial(p))
            extra: list[int] = []
            for d, k in zip(degrees, counts):
                mult *= coeffs[d] ** k / math.factorial(k)
                extra.extend([d] * k)
            key = tuple(sorted(extra, reverse=True))
            out[key] = out.get(key, 0) + mult
            return
        for k in range(left + 1):
            rec(i + 1, left - k, chosen + [k])

    rec(0, p, [])
    return out.items()


def _normalize_potential(potential) -> tuple:
    if potential is None:
        return DEFAULT_POTENTIAL
    items = potential.items() if isinstance(potential, Mapping) else potential
    out = []
    for d, c in items:
        d = int(d)
        if d < 2 or d % 2:
            raise ValueError(f"potential must be even, got monomial x^{d}")
        out.append((d, Fraction(c)))
    if not out:
        raise ValueError("empty potential")
    return tuple(sorted(out))


def perturbed_trace_moment(
    powers: tuple, field: ExternalField, P: int, potential=None, cap: int = DEFAULT_DEGREE_CAP
) -> GSeries:
    """``sum_p g^p/p! E[prod Tr(H^{p_i}) (Tr V(H)/g)^p]`` through order ``P``."""
    potential = _normalize_potential(potential)
    coeffs = []
    for p in range(P + 1):
        acc = Fraction(0)
        for extra, mult in _insertions(potential, p):
            full = tuple(powers) + extra
            if sum(full) % 2 == 0 and sum(full) > cap:
                raise CapExceeded(full, cap, order=p)
            acc += mult * gaussian_trace_moment(full, field, cap)
        coeffs.append(acc / math.factorial(p))
    return GSeries(coeffs)


def moment(
    key: Iterable[int], field: ExternalField, P: int = 0, potential=None, cap: int = DEFAULT_DEGREE_CAP
) -> GSeries:
    """Normalized moment ``M_key`` as a series in the coupling ``g``."""
    key = tuple(sorted((int(k) for k in key), reverse=True))
    if P < 0:
        raise ValueError("g-order must be non-negative")
    if sum(key) % 2:
        return GSeries.zero(P)
    return _moment(key, field, P, _normalize_potential(potential), cap)


@lru_cache(maxsize=4096)
def _moment(key: tuple, field: ExternalField, P: int, potential: tuple, cap: int) -> GSeries:
    if not key:
        return GSeries.constant(1, P)
    num = perturbed_trace_moment(key, field, P, potential, cap)
    den = perturbed_trace_moment((), field, P, potential, cap)
    return num / den


def moment_json(key: Sequence[int], field: ExternalField, P: int, value: GSeries) -> dict:
    return {
        "partition": list(key),
        "N": field.N,
        "lambdas": field.to_json(),
        "g_order": P,
        "coefficients": value.to_json(),
    }
