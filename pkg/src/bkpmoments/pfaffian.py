"""Pfaffians of antisymmetric matrices, exact and floating point."""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations
from typing import Sequence

import numpy as np


class AntisymMatrix:
    """Even-size antisymmetric matrix built from its strict upper triangle.

    ``exact`` matrices hold :class:`Fraction` entries; otherwise entries are
    floats. ``A[i, j] = -A[j, i]`` and the zero diagonal hold by construction.
    """

    def __init__(self, size: int, upper: dict[tuple[int, int], object] | None = None, exact: bool = True):
        if size < 0:
            raise ValueError("size must be non-negative")
        self.size = size
        self.exact = exact
        zero = Fraction(0) if exact else 0.0
        self._a = [[zero] * size for _ in range(size)]
        for (i, j), v in (upper or {}).items():
            self[i, j] = v

    @classmethod
    def from_matrix(cls, rows, exact: bool | None = None, check: bool = True) -> "AntisymMatrix":
        rows = [list(r) for r in rows]
        n = len(rows)
        if exact is None:
            exact = not any(isinstance(x, float) or isinstance(x, np.floating) for r in rows for x in r)
        out = cls(n, exact=exact)
        for i in range(n):
            if len(rows[i]) != n:
                raise ValueError("matrix must be square")
            for j in range(i + 1, n):
                out[i, j] = rows[i][j]
                if check and rows[j][i] != -rows[i][j]:
                    raise ValueError(f"entries ({i},{j}) and ({j},{i}) are not antisymmetric")
            if check and rows[i][i] != 0:
                raise ValueError(f"diagonal entry ({i},{i}) is nonzero")
        return out

    def _conv(self, v):
        return Fraction(v) if self.exact else float(v)

    def __setitem__(self, ij, value):
        i, j = ij
        if i == j:
            if value != 0:
                raise ValueError("diagonal of an antisymmetric matrix is zero")
            return
        v = self._conv(value)
        self._a[i][j] = v
        self._a[j][i] = -v

    def __getitem__(self, ij):
        i, j = ij
        return self._a[i][j]

    def rows(self) -> list[list]:
        return [list(r) for r in self._a]

    def to_numpy(self) -> np.ndarray:
        return np.array(self._a, dtype=object if self.exact else float)


def _as_antisym(A) -> AntisymMatrix:
    if isinstance(A, AntisymMatrix):
        return A
    if isinstance(A, np.ndarray) and A.dtype != object:
        return AntisymMatrix.from_matrix(A.tolist(), exact=False, check=False)
    return AntisymMatrix.from_matrix(A)


def pfaffian_exact(A: AntisymMatrix):
    """First-row expansion memoized on the set of remaining indices."""
    n = A.size
    if n % 2:
        raise ValueError(f"Pfaffian of odd size {n} is undefined")
    a = A.rows()
    memo: dict[int, object] = {0: Fraction(1)}

    def pf(mask: int):
        if mask in memo:
            return memo[mask]
        idx = [k for k in range(n) if mask >> k & 1]
        i = idx[0]
        total = Fraction(0)
        for pos, j in enumerate(idx[1:]):
            if not a[i][j]:
                continue
            sub = pf(mask & ~(1 << i) & ~(1 << j))
            term = a[i][j] * sub
            total += -term if pos % 2 else term
        memo[mask] = total
        return total

    return pf((1 << n) - 1)


def pfaffian_float(A) -> float:
    """Pfaffian by skew Gaussian tridiagonalization with pivoting (Parlett-Reid)."""
    a = np.array(A.rows() if isinstance(A, AntisymMatrix) else A, dtype=float)
    n = a.shape[0]
    if n % 2:
        raise ValueError(f"Pfaffian of odd size {n} is undefined")
    pf = 1.0
    for k in range(0, n - 1, 2):
        kp = k + 1 + int(np.argmax(np.abs(a[k + 1 :, k])))
        if kp != k + 1:
            a[[k + 1, kp], :] = a[[kp, k + 1], :]
            a[:, [k + 1, kp]] = a[:, [kp, k + 1]]
            pf = -pf
        if a[k + 1, k] == 0.0:
            return 0.0
        pf *= a[k, k + 1]
        if k + 2 < n:
            tau = a[k, k + 2 :] / a[k, k + 1]
            a[k + 2 :, k + 2 :] += np.outer(tau, a[k + 2 :, k + 1]) - np.outer(a[k + 2 :, k + 1], tau)
    return float(pf)


def pfaffian(A):
    """Pfaffian in the numeric mode of the entries (exact for rationals)."""
    M = _as_antisym(A)
    if M.size % 2:
        raise ValueError(f"Pfaffian of odd size {M.size} is undefined")
    if M.exact:
        return pfaffian_exact(M)
    return pfaffian_float(M)


def kernel_matrix(xs: Sequence, half: bool = True) -> AntisymMatrix:
    """Entries ``(x_k - x_l)/(x_k + x_l)``, times 1/2 unless ``half`` is False."""
    exact = not any(isinstance(x, float) for x in xs)
    vals = [Fraction(x) if exact else float(x) for x in xs]
    n = len(vals)
    M = AntisymMatrix(n, exact=exact)
    factor = (Fraction(1, 2) if exact else 0.5) if half else 1
    for k, l in combinations(range(n), 2):
        den = vals[k] + vals[l]
        if den == 0:
            raise ZeroDivisionError(f"x_{k} + x_{l} = 0 makes the kernel singular")
        M[k, l] = factor * (vals[k] - vals[l]) / den
    return M


def product_identity_check(xs: Sequence) -> bool:
    """``Pf((x_k - x_l)/(x_k + x_l)) == prod_{k<l} (x_k - x_l)/(x_k + x_l)`` exactly."""
    if len(xs) % 2:
        raise ValueError("product identity needs an even number of points")
    M = kernel_matrix([Fraction(x) for x in xs], half=False)
    rhs = Fraction(1)
    for k, l in combinations(range(len(xs)), 2):
        rhs *= M[k, l]
    return pfaffian_exact(M) == rhs


def det_exact(rows) -> Fraction:
    """Fraction-exact determinant by elimination (used for Pf^2 = det checks)."""
    a = [[Fraction(x) for x in r] for r in rows]
    n = len(a)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        det *= a[c][c]
        for r in range(c + 1, n):
            f = a[r][c] / a[c][c]
            if f:
                for k in range(c, n):
                    a[r][k] -= f * a[c][k]
    return det
