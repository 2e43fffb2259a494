"""Moment relations of the even-potential Kontsevich model.

Three generators produce relations between normalized moments ``M_pi``:

* :func:`gen_linear_C` -- ``<q_{k+m}(H~)> = <Tr(H^m) q_k(H~)>`` for odd ``k, m``;
* :func:`gen_linear_B` -- the ``t``-expansion of
  ``sum_{k>=1, m>=0} (-1)^k q_k(t) <q_k(H~) q_m(tH/2)>``;
* :func:`gen_bkp` -- the ``(s, t)``-expansion of the bilinear BKP identity.

:func:`gen_new` builds the extra linear family obtained from the
``l = n = s = 0`` sector of the bilinear identity. Every generated
expression can be checked against exact Gaussian moments with :func:`verify`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Callable, Iterable, Mapping

from . import wick
from .schurq import (
    OddPartition,
    TracePoly,
    format_partition,
    merge_partitions,
    odd_partitions,
    partition_sort_key,
    q_on_scaled_traces,
    q_on_traces,
    q_poly,
)
from .series import Multidegree, format_fraction

FAMILIES = ("C", "B", "BKP", "NEW")

TermKey = tuple  # sorted tuple of non-empty odd partitions; () is the constant 1


def term_key(*partitions: OddPartition) -> TermKey:
    parts = [tuple(p) for p in partitions if p]
    return tuple(sorted(parts, key=partition_sort_key))


def term_sort_key(key: TermKey) -> tuple:
    return (len(key), tuple(partition_sort_key(p) for p in key))


def _key_is_even(key: TermKey) -> bool:
    return all(len(p) % 2 == 0 for p in key)


def _content(values: Iterable[Fraction]) -> Fraction:
    """Positive rational ``c`` such that ``values / c`` are coprime integers."""
    values = [Fraction(v) for v in values if v]
    if not values:
        return Fraction(1)
    num = reduce(math.gcd, (v.numerator for v in values))
    den = reduce(math.lcm, (v.denominator for v in values))
    return Fraction(num, den)


class MomentExpr:
    """Rational combination of products of moment symbols.

    ``terms`` maps a :data:`TermKey` to its coefficient. A key with one
    partition is a linear term ``M_pi``, two partitions a quadratic term
    ``M_pi M_rho``. Moments whose partition has an odd number of parts
    vanish for even potentials and are dropped when ``drop_odd`` is set.
    """

    __slots__ = ("terms", "order")

    def __init__(self, terms: Mapping[TermKey, Fraction] | None = None, order: int | None = None,
                 drop_odd: bool = True):
        clean: dict[TermKey, Fraction] = {}
        for key, c in (terms or {}).items():
            key = term_key(*key)
            if drop_odd and not _key_is_even(key):
                continue
            c = Fraction(c)
            if c:
                clean[key] = clean.get(key, 0) + c
                if not clean[key]:
                    del clean[key]
        weights = {sum(sum(p) for p in k) for k in clean}
        if len(weights) > 1:
            raise ValueError(f"mixed weights {sorted(weights)} in one moment expression")
        if order is None:
            order = weights.pop() if weights else 0
        elif weights and weights != {order}:
            raise ValueError(f"terms have weight {weights.pop()} but order {order} was declared")
        self.terms = clean
        self.order = order

    @classmethod
    def linear(cls, coeffs: Mapping[OddPartition, object], order: int | None = None) -> "MomentExpr":
        return cls({(tuple(p),): c for p, c in coeffs.items()}, order)

    @property
    def linear_terms(self) -> dict:
        return {k[0]: c for k, c in self.terms.items() if len(k) == 1}

    @property
    def quadratic_terms(self) -> dict:
        return {k: c for k, c in self.terms.items() if len(k) == 2}

    @property
    def degree(self) -> int:
        return max((len(k) for k in self.terms), default=0)

    def is_linear(self) -> bool:
        return all(len(k) <= 1 for k in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def sorted_terms(self) -> list:
        return sorted(self.terms.items(), key=lambda kv: term_sort_key(kv[0]))

    def leading(self) -> tuple[TermKey, Fraction]:
        return self.sorted_terms()[0]

    def __add__(self, other: "MomentExpr") -> "MomentExpr":
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0) + c
        order = self.order if self.terms else other.order
        return MomentExpr(out, order if (self.terms or other.terms) else None)

    def __neg__(self) -> "MomentExpr":
        return self.scale(-1)

    def __sub__(self, other: "MomentExpr") -> "MomentExpr":
        return self + (-other)

    def scale(self, factor) -> "MomentExpr":
        factor = Fraction(factor)
        return MomentExpr({k: c * factor for k, c in self.terms.items()}, self.order)

    def times_symbol(self, key: TermKey) -> "MomentExpr":
        """Multiply every term by the moment monomial ``key``."""
        w = sum(sum(p) for p in key)
        return MomentExpr(
            {term_key(*k, *key): c for k, c in self.terms.items()}, self.order + w, drop_odd=False
        )

    def content(self) -> Fraction:
        """Signed scale with ``self == content * normalized()``."""
        if not self.terms:
            return Fraction(1)
        c = _content(self.terms.values())
        return c if self.leading()[1] > 0 else -c

    def normalized(self) -> "MomentExpr":
        """Coprime integer coefficients, leading coefficient positive."""
        if not self.terms:
            return self
        return self.scale(1 / self.content())

    def ratio_to(self, other: "MomentExpr") -> Fraction | None:
        """``c`` with ``self == c * other``, or None if not proportional."""
        if set(self.terms) != set(other.terms) or not self.terms:
            return None
        k0 = next(iter(self.terms))
        c = self.terms[k0] / other.terms[k0]
        if all(self.terms[k] == c * other.terms[k] for k in self.terms):
            return c
        return None

    def __eq__(self, other) -> bool:
        return isinstance(other, MomentExpr) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def to_json(self) -> dict:
        linear, quadratic, higher = [], [], []
        for k, c in self.sorted_terms():
            entry = {"coeff": format_fraction(c)}
            if len(k) == 1:
                linear.append({"partition": list(k[0]), **entry})
            elif len(k) == 2:
                quadratic.append({"pair": [list(k[0]), list(k[1])], **entry})
            else:
                higher.append({"factors": [list(p) for p in k], **entry})
        out = {"order": self.order, "linear": linear, "quadratic": quadratic, "text": str(self)}
        if higher:
            out["higher"] = higher
        return out

    @classmethod
    def from_json(cls, data: dict) -> "MomentExpr":
        terms = {}
        for e in data.get("linear", []):
            terms[(tuple(e["partition"]),)] = Fraction(e["coeff"])
        for e in data.get("quadratic", []):
            terms[tuple(tuple(p) for p in e["pair"])] = Fraction(e["coeff"])
        for e in data.get("higher", []):
            terms[tuple(tuple(p) for p in e["factors"])] = Fraction(e["coeff"])
        return cls(terms, data.get("order"), drop_odd=False)

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        out = []
        for i, (k, c) in enumerate(self.sorted_terms()):
            sign = "-" if c < 0 else "+"
            mag = abs(c)
            sym = "*".join(f"M[{format_partition(p)}]" for p in k) or "1"
            txt = sym if mag == 1 else f"{format_fraction(mag)}*{sym}"
            out.append((("-" if sign == "-" else "") if i == 0 else f" {sign} ") + txt)
        return "".join(out)

    __repr__ = __str__


def format_linear(coeffs: Mapping[OddPartition, Fraction]) -> str:
    return str(MomentExpr.linear(coeffs))


@dataclass
class Block:
    """Sector of monomials sharing one relation: ``prefactor * poly * expr``."""

    prefactor: Fraction
    polynomial: dict  # Multidegree -> int
    expr: MomentExpr

    def polynomial_text(self) -> str:
        parts = []
        for i, (m, c) in enumerate(sorted(self.polynomial.items(), key=lambda kv: kv[0].sort_key())):
            mag = abs(c)
            body = str(m) if mag == 1 else f"{mag}*{m}"
            parts.append(("-" if c < 0 else "") + body if i == 0 else (" - " if c < 0 else " + ") + body)
        return "".join(parts)

    def to_json(self) -> dict:
        return {
            "prefactor": format_fraction(self.prefactor),
            "polynomial": [
                {"monomial": m.to_json(), "coeff": str(c)}
                for m, c in sorted(self.polynomial.items(), key=lambda kv: kv[0].sort_key())
            ],
            "polynomial_text": self.polynomial_text(),
            "relation": self.expr.to_json(),
        }


@dataclass
class RelationSet:
    family: str
    order: int
    relations: list = field(default_factory=list)
    provenance: list = field(default_factory=list)
    blocks: list = field(default_factory=list)
    chain: list = field(default_factory=list)
    chain_scale: Fraction | None = None

    def to_json(self) -> dict:
        rels = []
        for rel, prov in zip(self.relations, self.provenance):
            entry = rel.to_json()
            entry["scale_note"] = "coprime integer coefficients, leading coefficient positive"
            entry["provenance"] = prov
            rels.append(entry)
        out = {"family": self.family, "order": self.order, "relations": rels}
        if self.blocks:
            out["blocks"] = [b.to_json() for b in self.blocks]
        if self.chain:
            out["chain"] = [line.to_json() for line in self.chain]
            out["chain_scale"] = format_fraction(self.chain_scale)
        return out


# --------------------------------------------------------------------------
# helpers for expanding brackets <...> into moment symbols


def _bracket(tp: TracePoly) -> dict[Multidegree, dict[TermKey, Fraction]]:
    """Group a trace polynomial by its auxiliary monomial; partitions become symbols."""
    out: dict[Multidegree, dict] = {}
    for (mono, pi), c in tp.terms.items():
        d = out.setdefault(mono, {})
        k = term_key(pi)
        d[k] = d.get(k, 0) + c
    return out


def _sector_exprs(acc: dict, order: int) -> dict[Multidegree, MomentExpr]:
    out = {}
    for mono, terms in acc.items():
        e = MomentExpr(terms, order)
        if not e.is_zero():
            out[mono] = e
    return out


def factor_sectors(sectors: Mapping[Multidegree, MomentExpr]) -> list[Block]:
    """Group monomials whose coefficients are proportional into blocks.

    Within a block the coefficient of monomial ``mu`` equals
    ``prefactor * polynomial[mu] * expr`` where ``expr`` is normalized and
    ``polynomial`` has coprime integer coefficients whose leading monomial
    (largest indices) is positive.
    """
    groups: list[tuple[MomentExpr, dict]] = []
    for mono in sorted(sectors, key=lambda m: m.sort_key()):
        e = sectors[mono]
        norm = e.normalized()
        for ref, members in groups:
            if norm == ref:
                members[mono] = e.content()
                break
        else:
            groups.append((norm, {mono: e.content()}))
    blocks = []
    for ref, members in groups:
        lead = min(members, key=lambda m: m.sort_key())
        kappa = _content(members.values())
        if members[lead] < 0:
            kappa = -kappa
        poly = {m: int(c / kappa) for m, c in members.items()}
        blocks.append(Block(kappa, poly, ref))
    return blocks


def _set_from_blocks(family: str, order: int, blocks: list[Block]) -> RelationSet:
    rs = RelationSet(family, order, blocks=blocks)
    for b in blocks:
        rs.relations.append(b.expr)
        rs.provenance.append([str(m) for m in sorted(b.polynomial, key=lambda m: m.sort_key())])
    return rs


# --------------------------------------------------------------------------
# family C


def linear_C_chain(n: int) -> tuple[list[MomentExpr], Fraction]:
    """Equal quantities ``<q_n(H~)>, <Tr H q_{n-1}(H~)>, <Tr H^3 q_{n-3}(H~)>, ...``.

    Returned rescaled by the smallest factor making every line integral.
    """
    lhs = MomentExpr(_bracket(q_on_traces(n)).get(Multidegree.one(), {}), n)
    lines = [lhs]
    for m in range(1, n, 2):
        k = n - m
        trace = TracePoly({(Multidegree.one(), (m,)): 1})
        lines.append(MomentExpr(_bracket(trace * q_on_traces(k)).get(Multidegree.one(), {}), n))
    scale = 1 / _content(c for line in lines for c in line.terms.values())
    return [line.scale(scale) for line in lines], scale


def gen_linear_C(n: int) -> RelationSet:
    if n % 2 or n < 2:
        return RelationSet("C", n)
    chain, scale = linear_C_chain(n)
    rs = RelationSet("C", n, chain=chain, chain_scale=scale)
    for i, m in enumerate(range(1, n, 2), start=1):
        rel = chain[0] - chain[i]
        if rel.is_zero():
            continue
        rs.relations.append(rel.normalized())
        rs.provenance.append([f"k={n - m},m={m}"])
    return rs


# --------------------------------------------------------------------------
# family B


def linear_B_sectors(n: int, alphabet: str = "t") -> dict[Multidegree, MomentExpr]:
    """Coefficients of weight-``n`` monomials in ``sum (-1)^k q_k(x) <q_k(H~) q_m(xH/2)>``."""
    acc: dict[Multidegree, dict] = {}
    for k in range(1, n + 1):
        m = n - k
        outer = q_poly(k, n)
        if alphabet != "t":
            outer_terms = {_rename(mu, alphabet): c for mu, c in outer.terms.items()}
        else:
            outer_terms = outer.terms
        inner = _bracket(q_on_traces(k) * q_on_scaled_traces(m, alphabet))
        sign = -1 if k % 2 else 1
        for mu, c in outer_terms.items():
            for nu, terms in inner.items():
                d = acc.setdefault(mu * nu, {})
                for key, v in terms.items():
                    d[key] = d.get(key, 0) + sign * c * v
    return _sector_exprs(acc, n)


def _rename(mu: Multidegree, alphabet: str) -> Multidegree:
    return Multidegree({(alphabet, i): e for (_, i), e in mu.items})


def gen_linear_B(n: int) -> RelationSet:
    if n % 2 or n < 2:
        return RelationSet("B", n)
    return _set_from_blocks("B", n, factor_sectors(linear_B_sectors(n)))


# --------------------------------------------------------------------------
# bilinear BKP identity


def _bkp_half(n: int, first: bool) -> dict[int, list]:
    """``sum_{m,r} [sign] q_k(H~) q_m(sH/2) q_r(tH/2)`` per ``k``, as (weight, mono, pi, c)."""
    out: dict[int, list] = {}
    for k in range(n + 1):
        rows = []
        for m in range(n + 1 - k):
            sign = 1 if first or m % 2 == 0 else -1
            for r in range(n + 1 - k - m):
                tp = q_on_traces(k) * q_on_scaled_traces(m, "s") * q_on_scaled_traces(r, "t")
                for (mono, pi), c in tp.terms.items():
                    rows.append((mono.weight, mono, pi, sign * c))
        out[k] = rows
    return out


def bkp_sectors(n: int) -> dict[Multidegree, MomentExpr]:
    """Weight-``n`` coefficients of the expanded bilinear identity (aggregated sums)."""
    first = _bkp_half(n, True)
    second = _bkp_half(n, False)
    acc: dict[Multidegree, dict] = {}
    for k in range(n + 1):
        for l in range(n + 1 - k):
            if k + l == 0:
                continue
            outer = q_poly(k + l, n).terms
            budget = n - k - l
            by_weight: dict[int, list] = {}
            for row in second[l]:
                by_weight.setdefault(row[0], []).append(row)
            sign = -1 if k % 2 else 1
            for w1, mono1, pi1, c1 in first[k]:
                if w1 > budget:
                    continue
                for _, mono2, pi2, c2 in by_weight.get(budget - w1, ()):
                    if len(pi1) % 2 or len(pi2) % 2:
                        continue
                    key = term_key(pi1, pi2)
                    base = mono1 * mono2
                    for mu, cq in outer.items():
                        d = acc.setdefault(mu_s(mu) * base, {})
                        d[key] = d.get(key, 0) + sign * cq * c1 * c2
    return _sector_exprs(acc, n)


def mu_s(mu: Multidegree) -> Multidegree:
    return _rename(mu, "s")


def bkp_sectors_direct(
    n: int, where: Callable[[int, int, int, int, int, int], bool] | None = None
) -> dict[Multidegree, MomentExpr]:
    """Term-by-term expansion over ``(k, l, m, n', r, s')``, optionally filtered.

    Slower than :func:`bkp_sectors` but exposes the individual index
    sectors (used for the extra linear family and for cross-checks).
    """
    acc: dict[Multidegree, dict] = {}
    for k in range(n + 1):
        for l in range(n + 1 - k):
            if k + l == 0:
                continue
            for m in range(n + 1 - k - l):
                for r in range(n + 1 - k - l - m):
                    for n2 in range(n + 1 - k - l - m - r):
                        s2 = n - k - l - m - r - n2
                        if where is not None and not where(k, l, m, n2, r, s2):
                            continue
                        sign = -1 if (k + n2) % 2 else 1
                        left = q_on_traces(k) * q_on_scaled_traces(m, "s") * q_on_scaled_traces(r, "t")
                        right = q_on_traces(l) * q_on_scaled_traces(n2, "s") * q_on_scaled_traces(s2, "t")
                        outer = q_poly(k + l, n).terms
                        for (m1, p1), c1 in left.terms.items():
                            for (m2, p2), c2 in right.terms.items():
                                key = term_key(p1, p2)
                                for mu, cq in outer.items():
                                    d = acc.setdefault(mu_s(mu) * m1 * m2, {})
                                    d[key] = d.get(key, 0) + sign * cq * c1 * c2
    return _sector_exprs(acc, n)


def gen_bkp(n: int) -> RelationSet:
    if n % 2 or n < 2:
        return RelationSet("BKP", n)
    return _set_from_blocks("BKP", n, factor_sectors(bkp_sectors(n)))


def new_sectors(n: int, r: int) -> dict[Multidegree, MomentExpr]:
    """``sum_{k=1}^{n-2r} (-1)^k q_k(s) <q_k(H~) q_{n-2r-k}(sH/2) q_{2r}(tH/2)>``."""
    return bkp_sectors_direct(n, lambda k, l, m, n2, rr, s2: l == n2 == s2 == 0 and rr == 2 * r)


def gen_new(n: int) -> RelationSet:
    """Extra linear relations of order ``n`` for ``r = 1 .. (n-6)/2``."""
    rs = RelationSet("NEW", n)
    if n % 2 or n < 8:
        return rs
    for r in range(1, (n - 6) // 2 + 1):
        for b in factor_sectors(new_sectors(n, r)):
            if any(b.expr == e for e in rs.relations):
                continue
            rs.blocks.append(b)
            rs.relations.append(b.expr)
            rs.provenance.append([f"r={r}"] + [str(m) for m in sorted(b.polynomial, key=lambda m: m.sort_key())])
    return rs


def generate(family: str, n: int) -> RelationSet:
    family = family.upper()
    if family == "C":
        return gen_linear_C(n)
    if family == "B":
        return gen_linear_B(n)
    if family == "BKP":
        return gen_bkp(n)
    if family == "NEW":
        return gen_new(n)
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


# --------------------------------------------------------------------------
# verification against the Wick engine


@dataclass
class VerifyReport:
    expr: MomentExpr
    residual: wick.GSeries
    N: int
    g_order: int

    @property
    def holds(self) -> bool:
        return self.residual.is_zero()

    def to_json(self) -> dict:
        return {
            "relation": str(self.expr),
            "N": self.N,
            "g_order": self.g_order,
            "residual": self.residual.to_json(),
            "holds": self.holds,
        }


def verify(
    expr: MomentExpr,
    field: wick.ExternalField,
    P: int = 0,
    potential=None,
    cap: int = wick.DEFAULT_DEGREE_CAP,
) -> VerifyReport:
    """Substitute exact perturbative moments into ``expr`` and return the residual."""
    total = wick.GSeries.zero(P)
    for key, c in expr.sorted_terms():
        value = wick.GSeries.constant(1, P)
        for pi in key:
            try:
                value = value * wick.moment(pi, field, P, potential, cap)
            except wick.CapExceeded as exc:
                raise wick.CapExceeded(exc.powers, exc.cap, exc.order, moment=pi) from exc
        total = total + value.scale(c)
    return VerifyReport(expr, total, field.N, P)
