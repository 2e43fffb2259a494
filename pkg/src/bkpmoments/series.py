"""Truncated, weight-graded power series in odd time variables.

Variables are ``t_1, t_3, t_5, ...`` and optionally ``s_1, s_3, ...``. A
variable ``t_n`` has weight ``n``; a monomial's weight is additive across
both alphabets. Coefficients are :class:`fractions.Fraction`.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Mapping

ALPHABETS = ("s", "t")
DEFAULT_WEIGHT = 10


class TruncationError(ValueError):
    """A monomial lies above the truncation weight of a series."""


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise TypeError("floats are not accepted as exact coefficients")
    return Fraction(value)


def parse_fraction(text: str) -> Fraction:
    return Fraction(text.strip())


def format_fraction(value: Fraction) -> str:
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


class Multidegree:
    """Exponent vector over odd variables of one or two alphabets.

    Stored as a sorted tuple of ``((alphabet, index), exponent)`` with
    positive exponents only, which makes instances hashable and canonical.
    """

    __slots__ = ("_items", "_weight")

    def __init__(self, exponents: Mapping[tuple[str, int], int] | Iterable = ()):
        items = dict(exponents)
        clean = {}
        for (alpha, index), exp in items.items():
            if alpha not in ALPHABETS:
                raise ValueError(f"unknown alphabet {alpha!r}")
            if index < 1 or index % 2 == 0:
                raise ValueError(f"variable index must be odd and positive, got {index}")
            if exp < 0:
                raise ValueError(f"negative exponent for {alpha}{index}")
            if exp:
                clean[(alpha, int(index))] = int(exp)
        self._items = tuple(sorted(clean.items()))
        self._weight = sum(index * exp for (_, index), exp in self._items)

    @classmethod
    def one(cls) -> "Multidegree":
        return cls()

    @classmethod
    def var(cls, index: int, alphabet: str = "t", exp: int = 1) -> "Multidegree":
        return cls({(alphabet, index): exp})

    @classmethod
    def from_indices(cls, indices: Iterable[int], alphabet: str = "t") -> "Multidegree":
        """Monomial ``prod x_i`` for a list of (repeated) indices."""
        counts: dict[tuple[str, int], int] = {}
        for i in indices:
            counts[(alphabet, i)] = counts.get((alphabet, i), 0) + 1
        return cls(counts)

    @property
    def items(self) -> tuple:
        return self._items

    @property
    def weight(self) -> int:
        return self._weight

    def exponent(self, index: int, alphabet: str = "t") -> int:
        return dict(self._items).get((alphabet, index), 0)

    def restrict(self, alphabet: str) -> "Multidegree":
        return Multidegree({k: e for k, e in self._items if k[0] == alphabet})

    def __mul__(self, other: "Multidegree") -> "Multidegree":
        merged = dict(self._items)
        for key, exp in other._items:
            merged[key] = merged.get(key, 0) + exp
        return Multidegree(merged)

    def __eq__(self, other) -> bool:
        return isinstance(other, Multidegree) and self._items == other._items

    def __hash__(self) -> int:
        return hash(self._items)

    def index_sequence(self) -> tuple:
        """Variable indices with multiplicity, largest first (s before t on ties)."""
        seq = []
        for (alpha, index), exp in self._items:
            seq.extend([(index, alpha)] * exp)
        seq.sort(key=lambda p: (-p[0], p[1]))
        return tuple(seq)

    def sort_key(self) -> tuple:
        # graded; inside a weight the monomial with the largest indices comes first
        return (self._weight, tuple((-i, a) for i, a in self.index_sequence()))

    def __lt__(self, other: "Multidegree") -> bool:
        return self.sort_key() < other.sort_key()

    def to_json(self) -> list:
        return [[alpha, index, exp] for (alpha, index), exp in self._items]

    @classmethod
    def from_json(cls, data) -> "Multidegree":
        return cls({(a, int(i)): int(e) for a, i, e in data})

    def __str__(self) -> str:
        if not self._items:
            return "1"
        parts = []
        for (alpha, index), exp in sorted(self._items, key=lambda kv: (kv[0][0], -kv[0][1])):
            parts.append(f"{alpha}{index}" + (f"^{exp}" if exp > 1 else ""))
        return "*".join(parts)

    __repr__ = __str__


class Series:
    """Immutable truncated power series ``sum c_m x^m`` with ``weight(m) <= W``."""

    __slots__ = ("_terms", "_W")

    def __init__(self, terms: Mapping[Multidegree, Fraction] | None = None, W: int = DEFAULT_WEIGHT):
        if W < 0:
            raise ValueError("truncation weight must be non-negative")
        self._W = int(W)
        clean: dict[Multidegree, Fraction] = {}
        for m, c in (terms or {}).items():
            if m.weight > W:
                raise TruncationError(f"monomial {m} has weight {m.weight} > W={W}")
            c = _as_fraction(c)
            if c:
                clean[m] = c
        self._terms = clean

    @classmethod
    def _raw(cls, terms: dict, W: int) -> "Series":
        s = cls.__new__(cls)
        s._terms = terms
        s._W = W
        return s

    @classmethod
    def constant(cls, value=1, W: int = DEFAULT_WEIGHT) -> "Series":
        return cls({Multidegree.one(): value}, W)

    @classmethod
    def var(cls, index: int, alphabet: str = "t", coeff=1, W: int = DEFAULT_WEIGHT) -> "Series":
        return cls({Multidegree.var(index, alphabet): coeff}, W)

    @property
    def W(self) -> int:
        return self._W

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def __iter__(self):
        return iter(sorted(self._terms.items(), key=lambda kv: kv[0].sort_key()))

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def __eq__(self, other) -> bool:
        if not isinstance(other, Series):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def _coerce(self, other) -> "Series":
        if isinstance(other, Series):
            return other
        return Series.constant(other, self._W)

    def __add__(self, other) -> "Series":
        other = self._coerce(other)
        W = min(self._W, other._W)
        out = {m: c for m, c in self._terms.items() if m.weight <= W}
        for m, c in other._terms.items():
            if m.weight > W:
                continue
            v = out.get(m, 0) + c
            if v:
                out[m] = v
            else:
                out.pop(m, None)
        return Series._raw(out, W)

    __radd__ = __add__

    def __neg__(self) -> "Series":
        return Series._raw({m: -c for m, c in self._terms.items()}, self._W)

    def __sub__(self, other) -> "Series":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Series":
        return self._coerce(other) - self

    def scale(self, factor) -> "Series":
        factor = _as_fraction(factor)
        if not factor:
            return Series._raw({}, self._W)
        return Series._raw({m: c * factor for m, c in self._terms.items()}, self._W)

    def __mul__(self, other) -> "Series":
        if not isinstance(other, Series):
            return self.scale(other)
        W = min(self._W, other._W)
        out: dict[Multidegree, Fraction] = {}
        for m1, c1 in self._terms.items():
            if m1.weight > W:
                continue
            for m2, c2 in other._terms.items():
                if m1.weight + m2.weight > W:
                    continue
                m = m1 * m2
                v = out.get(m, 0) + c1 * c2
                if v:
                    out[m] = v
                else:
                    out.pop(m, None)
        return Series._raw(out, W)

    def __rmul__(self, other) -> "Series":
        return self.scale(other)

    def __pow__(self, p: int) -> "Series":
        if p < 0:
            raise ValueError("negative powers are not supported")
        result = Series.constant(1, self._W)
        for _ in range(p):
            result = result * self
        return result

    def coeff(self, m: Multidegree) -> Fraction:
        if m.weight > self._W:
            raise TruncationError(f"coefficient of {m} (weight {m.weight}) is beyond W={self._W}")
        return self._terms.get(m, Fraction(0))

    def grade(self, w: int) -> "Series":
        return Series._raw({m: c for m, c in self._terms.items() if m.weight == w}, self._W)

    def min_weight(self) -> int | None:
        if not self._terms:
            return None
        return min(m.weight for m in self._terms)

    def exp(self) -> "Series":
        return exp_truncated(self)

    def to_json(self) -> list:
        return [{"monomial": m.to_json(), "coeff": format_fraction(c)} for m, c in self]

    @classmethod
    def from_json(cls, data, W: int) -> "Series":
        return cls({Multidegree.from_json(d["monomial"]): parse_fraction(d["coeff"]) for d in data}, W)

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        out = []
        for m, c in self:
            out.append(f"({format_fraction(c)})" + ("" if not m.items else f"*{m}"))
        return " + ".join(out)

    def __repr__(self) -> str:
        return f"Series({self}, W={self._W})"


def make_series(terms: Iterable[tuple[Multidegree, object]], W: int = DEFAULT_WEIGHT) -> Series:
    """Build a canonical series from ``(monomial, coefficient)`` pairs.

    Repeated monomials are summed and zero coefficients dropped. Raises
    :class:`TruncationError` naming the first monomial heavier than ``W``.
    """
    acc: dict[Multidegree, Fraction] = {}
    for m, c in terms:
        if m.weight > W:
            raise TruncationError(f"monomial {m} has weight {m.weight} > W={W}")
        acc[m] = acc.get(m, 0) + _as_fraction(c)
    return Series({m: c for m, c in acc.items() if c}, W)


def mul(a: Series, b: Series) -> Series:
    return a * b


def coeff(a: Series, m: Multidegree) -> Fraction:
    return a.coeff(m)


def grade(a: Series, w: int) -> Series:
    return a.grade(w)


def exp_truncated(a: Series) -> Series:
    """``sum_p a^p / p!`` truncated at the weight of ``a``.

    ``a`` must have no constant term; since every remaining monomial has
    weight >= 1 the sum terminates after ``W`` powers.
    """
    if a.coeff(Multidegree.one()):
        raise ValueError("exp_truncated needs a series without constant term")
    result = Series.constant(1, a.W)
    power = Series.constant(1, a.W)
    for p in range(1, a.W + 1):
        power = power * a
        if power.is_zero():
            break
        result = result + power.scale(Fraction(1, math.factorial(p)))
    return result

