"""Elementary Schur Q-functions and their trace substitutions.

``q_j(t) = [x^j] exp(2 sum_k t_{2k+1} x^{2k+1})``. Substituting
``t_n = Tr(H^n)/n`` or ``t_n = s_n Tr(H^n)/2`` turns ``q_j`` into a linear
combination of trace products ``prod Tr(H^{n_i})``, which we index by odd
partitions (weakly decreasing tuples of odd positive integers).
"""

from __future__ import annotations

import math
from collections import Counter
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping

from .series import Multidegree, Series, exp_truncated, format_fraction

OddPartition = tuple


def is_odd_partition(parts) -> bool:
    parts = tuple(parts)
    return all(p >= 1 and p % 2 == 1 for p in parts) and all(
        a >= b for a, b in zip(parts, parts[1:])
    )


def odd_partition(parts: Iterable[int]) -> OddPartition:
    """Canonical (sorted, validated) odd partition from any iterable of parts."""
    out = tuple(sorted((int(p) for p in parts), reverse=True))
    if not all(p >= 1 and p % 2 == 1 for p in out):
        raise ValueError(f"parts must be odd positive integers: {out}")
    return out


@lru_cache(maxsize=None)
def odd_partitions(n: int, max_part: int | None = None) -> tuple[OddPartition, ...]:
    """All odd partitions of ``n`` with parts <= ``max_part``, in descending lex order."""
    if n < 0:
        return ()
    if max_part is None:
        max_part = n if n % 2 else n - 1
    if n == 0:
        return ((),)
    out = []
    for first in range(min(max_part, n), 0, -1):
        if first % 2 == 0:
            continue
        for rest in odd_partitions(n - first, first):
            out.append((first,) + rest)
    return tuple(out)


def multiplicities(pi: OddPartition) -> list[tuple[int, int]]:
    """``[(n_i, r_i)]`` with distinct parts in decreasing order."""
    return sorted(Counter(pi).items(), reverse=True)


def format_partition(pi: OddPartition) -> str:
    """``(3, 3, 1, 1)`` -> ``"3^2,1^2"``; exponent 1 is omitted."""
    if not pi:
        return "0"
    return ",".join(f"{n}^{r}" if r > 1 else str(n) for n, r in multiplicities(pi))


def parse_partition(text: str) -> OddPartition:
    """Inverse of :func:`format_partition`; also accepts plain ``"3,3,1,1"``."""
    text = text.strip()
    if text in ("", "0", "()"):
        return ()
    parts = []
    for chunk in text.replace(" ", "").split(","):
        if "^" in chunk:
            n, r = chunk.split("^")
            parts.extend([int(n)] * int(r))
        else:
            parts.append(int(chunk))
    return odd_partition(parts)


def partition_sort_key(pi: OddPartition) -> tuple:
    # heavier first, then lexicographically larger parts first
    return (-sum(pi), tuple(-p for p in pi))


class TracePoly:
    """Linear combination of ``monomial * prod_i Tr(H^{n_i})``.

    Terms are keyed by ``(Multidegree, OddPartition)``. The monomial is in
    the auxiliary alphabets (``s``/``t``) and is the unit for plain trace
    polynomials.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[tuple[Multidegree, OddPartition], Fraction] | None = None):
        self.terms = {k: Fraction(v) for k, v in (terms or {}).items() if v}

    @classmethod
    def one(cls) -> "TracePoly":
        return cls({(Multidegree.one(), ()): Fraction(1)})

    def __add__(self, other: "TracePoly") -> "TracePoly":
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return TracePoly(out)

    def scale(self, factor) -> "TracePoly":
        return TracePoly({k: v * factor for k, v in self.terms.items()})

    def __mul__(self, other: "TracePoly") -> "TracePoly":
        out: dict = {}
        for (m1, p1), c1 in self.terms.items():
            for (m2, p2), c2 in other.terms.items():
                key = (m1 * m2, merge_partitions(p1, p2))
                out[key] = out.get(key, 0) + c1 * c2
        return TracePoly(out)

    def __eq__(self, other) -> bool:
        return isinstance(other, TracePoly) and self.terms == other.terms

    def coeff(self, pi: OddPartition, extra: Multidegree | None = None) -> Fraction:
        return self.terms.get((extra or Multidegree.one(), tuple(pi)), Fraction(0))

    def to_json(self) -> list:
        items = sorted(self.terms.items(), key=lambda kv: (partition_sort_key(kv[0][1]), kv[0][0].sort_key()))
        return [
            {"partition": list(p), "extra": m.to_json(), "coeff": format_fraction(c)}
            for (m, p), c in items
        ]

    def __repr__(self) -> str:
        if not self.terms:
            return "TracePoly(0)"
        body = " + ".join(
            f"{format_fraction(c)}*{m}*M[{format_partition(p)}]" for (m, p), c in self.terms.items()
        )
        return f"TracePoly({body})"


def merge_partitions(a: OddPartition, b: OddPartition) -> OddPartition:
    if not a:
        return b
    if not b:
        return a
    return tuple(sorted(a + b, reverse=True))


@lru_cache(maxsize=None)
def _q_generator(W: int) -> Series:
    a = Series({Multidegree.var(n): 2 for n in range(1, W + 1, 2)}, W)
    return exp_truncated(a)


def q_poly(j: int, W: int = 10) -> Series:
    """``q_j(t)`` as a homogeneous series of weight ``j``; zero for ``j < 0``."""
    if j < 0:
        return Series({}, W)
    if j > W:
        raise ValueError(f"q_{j} does not fit in truncation weight {W}")
    return _q_generator(W).grade(j)


def _partition_weight_product(pi: OddPartition, per_part) -> Fraction:
    coeff = Fraction(1)
    for n, r in multiplicities(pi):
        coeff *= Fraction(per_part(n)) ** r / math.factorial(r)
    return coeff


@lru_cache(maxsize=None)
def q_on_traces(j: int) -> TracePoly:
    """``q_j`` at ``t_n = Tr(H^n)/n``: coefficient ``prod (2/n_i)^{r_i}/r_i!`` on each partition."""
    if j < 0:
        return TracePoly()
    one = Multidegree.one()
    return TracePoly(
        {(one, pi): _partition_weight_product(pi, lambda n: Fraction(2, n)) for pi in odd_partitions(j)}
    )


@lru_cache(maxsize=None)
def q_on_scaled_traces(j: int, alphabet: str = "s") -> TracePoly:
    """``q_j`` at ``t_n = x_n Tr(H^n)/2`` where ``x`` is the ``alphabet`` variable.

    Each term carries the partition and the monomial ``prod x_{n_i}^{r_i}``
    with coefficient ``prod 1/r_i!``.
    """
    if j < 0:
        return TracePoly()
    return TracePoly(
        {
            (Multidegree.from_indices(pi, alphabet), pi): _partition_weight_product(pi, lambda n: 1)
            for pi in odd_partitions(j)
        }
    )
