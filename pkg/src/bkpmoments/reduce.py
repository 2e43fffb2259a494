"""Exact reduction of quadratic BKP relations modulo the linear ones.

At order ``n`` the span is generated by every linear relation of weight
``w <= n`` multiplied by moment symbols of weight ``n - w`` (by single
symbols unless ``closure_degree`` is raised). A bilinear relation is
*linearizable* if some span element cancels all its non-linear terms; what
remains is a linear relation that may or may not already be known.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from . import wick
from .relations import (
    MomentExpr,
    TermKey,
    gen_bkp,
    gen_linear_B,
    gen_linear_C,
    gen_new,
    term_key,
    term_sort_key,
)
from .schurq import odd_partitions
from .series import format_fraction

DEFAULT_BASIS_CAP = 20000
PIVOT_STRATEGIES = ("min_denominator", "first")


class BasisTooLarge(RuntimeError):
    def __init__(self, order: int, size: int, cap: int):
        self.order, self.size, self.cap = order, size, cap
        super().__init__(f"basis at order {order} has {size} symbols, above the cap of {cap}")


def even_symbols(w: int) -> list[tuple]:
    """Odd partitions of ``w`` with an even number of parts (the non-vanishing moments)."""
    return [p for p in odd_partitions(w) if len(p) % 2 == 0 and p]


def symbol_monomials(w: int, max_factors: int) -> list[TermKey]:
    """Products of at most ``max_factors`` non-vanishing moment symbols of total weight ``w``."""
    if w == 0:
        return [()]
    out: set = set()

    def rec(left, acc):
        if left == 0:
            out.add(term_key(*acc))
            return
        if len(acc) == max_factors:
            return
        for part_w in range(2, left + 1, 2):
            for p in even_symbols(part_w):
                rec(left - part_w, acc + [p])

    rec(w, [])
    return sorted(out, key=term_sort_key)


@dataclass
class Basis:
    order: int
    keys: list

    def __post_init__(self):
        self.index = {k: i for i, k in enumerate(self.keys)}

    @classmethod
    def build(cls, n: int, max_degree: int = 2, cap: int = DEFAULT_BASIS_CAP) -> "Basis":
        keys = symbol_monomials(n, max_degree)
        # higher-degree symbols first: elimination clears them before linear ones
        keys.sort(key=lambda k: (-len(k), term_sort_key(k)))
        if len(keys) > cap:
            raise BasisTooLarge(n, len(keys), cap)
        return cls(n, keys)

    def vector(self, expr: MomentExpr) -> dict[int, Fraction]:
        vec = {}
        for k, c in expr.terms.items():
            if k not in self.index:
                raise KeyError(f"term {k} is not in the order-{self.order} basis")
            vec[self.index[k]] = c
        return vec

    def expr(self, vec: dict[int, Fraction]) -> MomentExpr:
        return MomentExpr({self.keys[i]: c for i, c in vec.items()}, self.order, drop_odd=False)

    @property
    def linear_keys(self) -> list:
        return [k for k in self.keys if len(k) == 1]

    @property
    def quadratic_keys(self) -> list:
        return [k for k in self.keys if len(k) == 2]


@dataclass
class Generator:
    label: str
    expr: MomentExpr


def linear_relations(w: int, extra: Sequence[MomentExpr] = ()) -> list[tuple[str, MomentExpr]]:
    out = []
    for fam, gen in (("C", gen_linear_C), ("B", gen_linear_B)):
        for i, rel in enumerate(gen(w).relations):
            out.append((f"{fam}{w}[{i}]", rel))
    for i, rel in enumerate(e for e in extra if e.order == w):
        out.append((f"NEW{w}[{i}]", rel))
    return out


def build_span(
    n: int,
    prior: Sequence[MomentExpr] = (),
    closure_degree: int = 1,
    cap: int = DEFAULT_BASIS_CAP,
) -> tuple[Basis, list[Generator]]:
    """Basis of order-``n`` symbols and the generating set of the linear span.

    ``prior`` holds additional linear relations of lower order (typically
    those found by earlier reductions). ``closure_degree`` is the largest
    number of moment symbols a linear relation may be multiplied by.
    """
    basis = Basis.build(n, max_degree=1 + closure_degree, cap=cap)
    gens: list[Generator] = []
    for w in range(4, n + 1, 2):
        for label, rel in linear_relations(w, prior):
            for mult in symbol_monomials(n - w, closure_degree):
                expr = rel.times_symbol(mult) if mult else rel
                name = label if not mult else label + "*" + "*".join(
                    "M[" + ",".join(map(str, p)) + "]" for p in mult
                )
                gens.append(Generator(name, expr))
    return basis, gens


class Echelon:
    """Row-echelon form over the rationals that remembers row provenance.

    Each stored row is ``(vector, combination)`` where ``combination`` maps a
    generator index to the coefficient with which it enters the row.
    """

    def __init__(self, vectors: Sequence[dict], strategy: str = "min_denominator"):
        if strategy not in PIVOT_STRATEGIES:
            raise ValueError(f"unknown pivot strategy {strategy!r}")
        self.strategy = strategy
        self.pivots: dict[int, tuple[dict, dict]] = {}
        rows = [(dict(v), {i: Fraction(1)}) for i, v in enumerate(vectors) if v]
        active = rows
        columns = sorted({c for v, _ in rows for c in v})
        for col in columns:
            cand = [r for r in active if r[0].get(col)]
            if not cand:
                continue
            piv = self._choose(cand, col)
            vec, combo = piv
            inv = 1 / vec[col]
            vec = {c: x * inv for c, x in vec.items()}
            combo = {g: x * inv for g, x in combo.items()}
            self.pivots[col] = (vec, combo)
            rest = []
            for r in active:
                if r is piv:
                    continue
                f = r[0].get(col)
                if f:
                    r = (_axpy(r[0], vec, -f), _axpy(r[1], combo, -f))
                if r[0]:
                    rest.append(r)
            active = rest

    def _choose(self, cand, col):
        if self.strategy == "first":
            return cand[0]
        return min(cand, key=lambda r: (r[0][col].denominator, abs(r[0][col].numerator)))

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def reduce(self, vec: dict) -> tuple[dict, dict]:
        """Normal form of ``vec`` and the generator combination that was subtracted."""
        vec = dict(vec)
        combo: dict = {}
        while True:
            cols = sorted(c for c in vec if c in self.pivots)
            if not cols:
                return vec, combo
            col = cols[0]
            f = vec[col]
            pv, pc = self.pivots[col]
            vec = _axpy(vec, pv, -f)
            combo = _axpy(combo, pc, f)


def _axpy(x: dict, y: dict, a: Fraction) -> dict:
    out = dict(x)
    for k, v in y.items():
        s = out.get(k, 0) + a * v
        if s:
            out[k] = s
        else:
            out.pop(k, None)
    return out


@dataclass
class Certificate:
    relation: MomentExpr
    residue: MomentExpr
    combination: list  # (generator label, coefficient)

    def to_json(self) -> dict:
        return {
            "relation": self.relation.to_json(),
            "residue": self.residue.to_json(),
            "combination": [{"generator": g, "coeff": format_fraction(c)} for g, c in self.combination],
        }


@dataclass
class ReductionReport:
    order: int
    basis_size: int
    span_dimension: int
    reduced_relations: list
    is_fully_linearizable: bool
    certificates: list
    new_certificates: list = field(default_factory=list)
    matches_new_family: bool | None = None
    prior: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "basis_size": self.basis_size,
            "span_dimension": self.span_dimension,
            "is_fully_linearizable": self.is_fully_linearizable,
            "matches_new_family": self.matches_new_family,
            "reduced_relations": [r.to_json() for r in self.reduced_relations],
            "prior_relations": [str(r) for r in self.prior],
            "certificates": [c.to_json() for c in self.certificates],
            "new_relation_certificates": [c.to_json() for c in self.new_certificates],
        }

    def summary_lines(self) -> list[str]:
        lines = [
            f"order {self.order}: basis {self.basis_size}, span dim {self.span_dimension}, "
            f"{len(self.certificates)} bilinear relations, "
            f"fully linearizable: {'yes' if self.is_fully_linearizable else 'no'}",
        ]
        for c in self.certificates:
            kind = "0" if c.residue.is_zero() else ("linear" if c.residue.is_linear() else "NONLINEAR")
            lines.append(f"  residue [{kind}]: {c.residue}")
        for r in self.reduced_relations:
            lines.append(f"  new: 0 = {r}")
        return lines


def _certificate(basis, gens, rel, residue_vec, combo) -> Certificate:
    comb = sorted(combo.items())
    return Certificate(rel, basis.expr(residue_vec), [(gens[g].label, c) for g, c in comb])


def check_certificate(cert: Certificate, gens: Sequence[Generator]) -> bool:
    """``relation - sum c_g g == residue`` in exact arithmetic."""
    by_label = {g.label: g.expr for g in gens}
    total = cert.relation
    for label, c in cert.combination:
        total = total - by_label[label].scale(c)
    return total == cert.residue


def reduce_quadratic(
    n: int,
    prior: Sequence[MomentExpr] | None = None,
    closure_degree: int = 1,
    strategy: str = "min_denominator",
    cap: int = DEFAULT_BASIS_CAP,
) -> ReductionReport:
    """Reduce every order-``n`` bilinear relation modulo the linear span.

    When ``prior`` is None the extra linear relations of orders ``8 .. n-2``
    are obtained by reducing those orders first.
    """
    if n % 2 or n < 6:
        raise ValueError("reduction needs an even order >= 6")
    if prior is None:
        prior = []
        for m in range(8, n, 2):
            prior = prior + reduce_quadratic(m, prior, closure_degree, strategy, cap).reduced_relations
    basis, gens = build_span(n, prior, closure_degree, cap)
    ech = Echelon([basis.vector(g.expr) for g in gens], strategy)

    certs = []
    residues = []
    linearizable = True
    for rel in gen_bkp(n).relations:
        vec, combo = ech.reduce(basis.vector(rel))
        cert = _certificate(basis, gens, rel, vec, combo)
        certs.append(cert)
        if not cert.residue.is_linear():
            linearizable = False
        elif not cert.residue.is_zero():
            residues.append(vec)

    # independent part of the linear residues
    res_ech = Echelon(residues, strategy)
    new_rank = res_ech.rank

    reduced: list[MomentExpr] = []
    new_certs: list[Certificate] = []
    matches = None
    if new_rank:
        candidates = [r for r in gen_new(n).relations]
        cand_nf = []
        for rel in candidates:
            vec, combo = ech.reduce(basis.vector(rel))
            cand_nf.append((rel, vec, combo))
        nonzero = [v for _, v, _ in cand_nf if v]
        joint = Echelon(residues + nonzero, strategy).rank
        cand_rank = Echelon(nonzero, strategy).rank
        matches = joint == new_rank == cand_rank
        if matches:
            kept: list = []
            for rel, vec, combo in cand_nf:
                if not vec:
                    continue
                if Echelon(kept + [vec], strategy).rank > len(kept):
                    kept.append(vec)
                    reduced.append(rel)
                    new_certs.append(_certificate(basis, gens, rel, vec, combo))
        else:
            for col, (vec, _) in sorted(res_ech.pivots.items()):
                reduced.append(basis.expr(vec).normalized())
    return ReductionReport(
        order=n,
        basis_size=len(basis.keys),
        span_dimension=ech.rank,
        reduced_relations=reduced,
        is_fully_linearizable=linearizable,
        certificates=certs,
        new_certificates=new_certs,
        matches_new_family=matches,
        prior=list(prior),
    )


@dataclass
class Completeness:
    """Known linear relations of one order against the exact evaluation kernel."""

    order: int
    symbols: int
    kernel_dimension: int
    span_rank: int

    @property
    def complete(self) -> bool:
        return self.kernel_dimension == self.span_rank

    def to_json(self) -> dict:
        return {**self.__dict__, "complete": self.complete}


def default_probe_fields() -> list:
    return [wick.ExternalField.random(N, 100 + seed) for N in (2, 4, 6) for seed in range(6)]


def linear_completeness(w: int, prior: Sequence[MomentExpr] = (), fields=None) -> Completeness:
    """Compare the rank of the known order-``w`` linear relations with the
    dimension of all linear relations satisfied by the exact moments on
    ``fields``. Equality means no linear relation valid on those fields is
    missing from the span (the kernel can only overestimate)."""
    syms = even_symbols(w)
    rows = [{i: wick.moment(p, f, 0).coeffs[0] for i, p in enumerate(syms)} for f in fields or default_probe_fields()]
    index = {term_key(p): i for i, p in enumerate(syms)}
    known = [{index[k]: c for k, c in e.terms.items()} for _, e in linear_relations(w, prior)]
    return Completeness(w, len(syms), len(syms) - Echelon(rows).rank, Echelon(known).rank)


@dataclass
class ProbeSummary:
    reports: list
    completeness: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "orders": [
                {
                    "order": r.order,
                    "fully_linearizable": r.is_fully_linearizable,
                    "new_relations": [str(x) for x in r.reduced_relations],
                    "matches_new_family": r.matches_new_family,
                    "span_dimension": r.span_dimension,
                    "basis_size": r.basis_size,
                }
                for r in self.reports
            ],
            "linear_completeness": [c.to_json() for c in self.completeness],
            "reports": [r.to_json() for r in self.reports],
        }

    def summary_lines(self) -> list[str]:
        lines = [f"{'order':>5} {'basis':>6} {'span':>5} {'linearizable':>12} {'new':>4} {'NEW-family':>10}"]
        for r in self.reports:
            lines.append(
                f"{r.order:>5} {r.basis_size:>6} {r.span_dimension:>5} "
                f"{'yes' if r.is_fully_linearizable else 'no':>12} {len(r.reduced_relations):>4} "
                f"{str(r.matches_new_family):>10}"
            )
        for c in self.completeness:
            lines.append(
                f"order {c.order} linear relations: {c.span_rank} known, evaluation kernel {c.kernel_dimension}"
                f" of {c.symbols} symbols ({'complete' if c.complete else 'INCOMPLETE'})"
            )
        return lines


def probe_open_question(
    n_max: int,
    closure_degree: int = 1,
    strategy: str = "min_denominator",
    cap: int = DEFAULT_BASIS_CAP,
    check_completeness: bool = False,
) -> ProbeSummary:
    """Reduce orders ``8, 10, ..., n_max`` feeding each order's new relations forward.

    With ``check_completeness`` the known linear relations of every order
    up to ``n_max`` are also compared against the exact evaluation kernel, so
    that a non-linearizable verdict cannot stem from a missing linear relation.
    """
    if n_max % 2 or n_max < 8:
        raise ValueError("n_max must be even and >= 8")
    prior: list[MomentExpr] = []
    reports = []
    for n in range(8, n_max + 1, 2):
        rep = reduce_quadratic(n, prior, closure_degree, strategy, cap)
        reports.append(rep)
        prior = prior + rep.reduced_relations
    summary = ProbeSummary(reports)
    if check_completeness:
        summary.completeness = [linear_completeness(w, prior) for w in range(4, n_max + 1, 2)]
    return summary
