"""Floating-point checks of the Pfaffian formula for the partition function.

The matrix entries are principal-value double integrals

    A_ij = PV int int 1/2 (x - y)/(x + y) exp(-lambda_i x^2/2 - lambda_j y^2/2 + V(x) + V(y)) dx dy

with an even polynomial potential ``V(x) = g x^4`` (``g <= 0``). In the
coordinates ``u = x + y, v = x - y`` the singular factor is ``1/u``. For even
``V`` the part of the integrand that is odd in ``u`` comes only from the
Gaussian cross term, so the antisymmetrized integrand
``(F(u) - F(-u)) / u = 2 exp(E_even) sinh(-(lambda_i - lambda_j) u v / 4) / u``
is smooth and is integrated over ``u > 0``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import integrate

from . import wick
from .pfaffian import pfaffian_float
from .schurq import q_on_traces

MIN_SEPARATION = 1e-6
WARN_SEPARATION = 1e-3


class QuadratureError(RuntimeError):
    def __init__(self, message: str, estimate: float | None = None, error: float | None = None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


@dataclass(frozen=True)
class PVIntegrand:
    lam_i: float
    lam_j: float
    g: float = 0.0

    def __post_init__(self):
        if self.lam_i <= 0 or self.lam_j <= 0:
            raise ValueError("lambda values must be positive")
        if self.g > 0:
            raise ValueError("g > 0 makes exp(g x^4) non-integrable; use the perturbative series")

    def V(self, x):
        return self.g * x ** 4

    def radius(self, tol: float) -> float:
        """Box size beyond which the integrand is below ``tol`` (Gaussian bound)."""
        lam_min = min(self.lam_i, self.lam_j)
        # |integrand| <= |v| exp(-lam_min (u^2 + v^2) / 4) * const
        return math.sqrt(4.0 * (math.log(1.0 / tol) + 10.0) / lam_min) + 2.0


def _quad_checked(func, a, b, tol, what, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(func, a, b, epsabs=tol, epsrel=tol, limit=400, **kw)
        except integrate.IntegrationWarning as exc:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                val, err = integrate.quad(func, a, b, epsabs=tol, epsrel=tol, limit=400, **kw)
            if err > 100 * tol * max(1.0, abs(val)):
                raise QuadratureError(f"{what} did not converge: {exc}", val, err) from exc
    return val, err


def _pv_rotated(p: PVIntegrand, tol: float) -> tuple[float, float]:
    li, lj, g = p.lam_i, p.lam_j, p.g
    delta = li - lj
    if delta == 0:
        return 0.0, 0.0
    R = p.radius(tol)

    def inner(v):
        def f(u):
            x, y = (u + v) / 2, (u - v) / 2
            e_even = -(li + lj) * (u * u + v * v) / 8 + g * (x ** 4 + y ** 4)
            return math.exp(e_even) * math.sinh(-delta * u * v / 4) / u
        val, _ = _quad_checked(f, 0.0, R, tol * 1e-2, "inner u-integral")
        return v * val

    # integrand is even in v; the Jacobian 1/2 and kernel 1/2 combine with
    # the factor 2 of the sinh form and the v-doubling to an overall 1
    return _quad_checked(inner, 0.0, R, tol, "outer v-integral")


def _pv_polar(p: PVIntegrand, tol: float) -> tuple[float, float]:
    li, lj, g = p.lam_i, p.lam_j, p.g
    R = p.radius(tol)

    def radial(th):
        c, s = math.cos(th), math.sin(th)
        a = li * c * c + lj * s * s
        if g == 0:
            return 1.0 / a
        b = g * (c ** 4 + s ** 4)
        val, _ = _quad_checked(lambda r: r * math.exp(-a * r * r / 2 + b * r ** 4), 0.0, R, tol * 1e-2,
                               "radial integral")
        return val

    c0 = 3 * math.pi / 4

    def h(th):
        c, s = math.cos(th), math.sin(th)
        d = c + s
        # (c - s)(th - c0)/(c + s) -> 1 at the singular angle
        ratio = 1.0 if abs(d) < 1e-12 else (c - s) * (th - c0) / d
        return 0.5 * ratio * radial(th)

    # one period of the pi-periodic integrand, not centred on the pole
    a, b = c0 - 0.37 * math.pi, c0 + 0.63 * math.pi
    val, err = _quad_checked(h, a, b, tol, "angular PV integral", weight="cauchy", wvar=c0)
    return 2 * val, 2 * err


def pv_double_integral(p: PVIntegrand | tuple, tol: float = 1e-10, method: str = "rotated") -> float:
    """Principal value of the kernel-weighted Gaussian double integral.

    ``method="rotated"`` integrates the antisymmetrized integrand in
    ``(u, v)``; ``method="polar"`` is an independent scheme using polar
    coordinates and a Cauchy-weighted angular quadrature.
    """
    return pv_double_integral_with_error(p, tol, method)[0]


def pv_double_integral_with_error(p, tol: float = 1e-10, method: str = "rotated") -> tuple[float, float]:
    if not isinstance(p, PVIntegrand):
        p = PVIntegrand(*p)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if method == "rotated":
        return _pv_rotated(p, tol)
    if method == "polar":
        return _pv_polar(p, tol)
    raise ValueError(f"unknown method {method!r}")


def prefactor(lambdas: Sequence[float]) -> float:
    """``(-1)^{N(N-1)/2} sqrt(prod_{i,j}(l_i + l_j)) / ((2 pi)^{N/2} prod_{i<j}(l_j - l_i))``."""
    lam = np.asarray(lambdas, dtype=float)
    N = len(lam)
    log_num = 0.5 * float(np.sum(np.log(lam[:, None] + lam[None, :])))
    vdm = 1.0
    for i in range(N):
        for j in range(i + 1, N):
            vdm *= lam[j] - lam[i]
    sign = -1.0 if (N * (N - 1) // 2) % 2 else 1.0
    return sign * math.exp(log_num - 0.5 * N * math.log(2 * math.pi)) / vdm


@dataclass
class ZReport:
    N: int
    lambdas: list
    g: float
    value: float
    error_estimate: float
    warning: str | None = None

    def to_json(self) -> dict:
        return asdict(self)


def _check_separation(lambdas: Sequence[float]) -> str | None:
    lam = sorted(float(x) for x in lambdas)
    scale = max(lam)
    gap = min((b - a for a, b in zip(lam, lam[1:])), default=scale) / scale
    if gap < MIN_SEPARATION:
        raise ValueError(f"lambda values too close (relative gap {gap:.2e}); the Vandermonde prefactor is singular")
    if gap < WARN_SEPARATION:
        return f"poorly conditioned: relative lambda gap {gap:.2e}"
    return None


def _z_once(lambdas, g, tol) -> tuple[float, float]:
    """``Z`` and a first-order bound on its error propagated from the entry errors."""
    N = len(lambdas)
    A = np.zeros((N, N))
    errs = np.zeros((N, N))
    for i in range(N):
        for j in range(i + 1, N):
            A[i, j], errs[i, j] = pv_double_integral_with_error(PVIntegrand(lambdas[i], lambdas[j], g), tol)
            A[j, i] = -A[i, j]
    # the entry kernel is oriented (y - x)/(x + y) relative to A, i.e. Pf(-A)
    B = -A
    C = prefactor(lambdas)
    spread = 0.0
    for i in range(N):
        for j in range(i + 1, N):
            keep = [k for k in range(N) if k not in (i, j)]
            # |d Pf / d A_ij| = |Pf of the complementary minor|
            spread += abs(pfaffian_float(B[np.ix_(keep, keep)])) * errs[i, j]
    return C * pfaffian_float(B), abs(C) * spread


def z_eval(lambdas: Sequence[float], g: float = 0.0, tol: float = 1e-10) -> ZReport:
    """Partition function ``Z = C(Lambda) Pf(A)`` for even ``N`` and distinct lambdas.

    ``error_estimate`` is the larger of the change under a tenfold tighter
    tolerance and the propagated quadrature error bound.
    """
    lambdas = [float(x) for x in lambdas]
    N = len(lambdas)
    if N == 0 or N % 2:
        raise ValueError("z_eval needs an even, positive N")
    if any(x <= 0 for x in lambdas):
        raise ValueError("lambda values must be positive")
    if g > 0:
        raise ValueError("g > 0 is only available through the perturbative moment series")
    note = _check_separation(lambdas)
    z1, _ = _z_once(lambdas, g, tol)
    z2, e2 = _z_once(lambdas, g, tol / 10)
    err = max(abs(z2 - z1), e2, 1e-14)
    return ZReport(N, lambdas, g, float(z2), float(err), note)


@dataclass
class ResidueReport:
    k: int
    lambdas: list
    lhs: float
    rhs: float
    ratio: float | None
    lhs_exact: str

    def to_json(self) -> dict:
        return asdict(self)


def _gauss_moment(k: int, a: float, tol: float) -> float:
    """``int x^k exp(-a x^2 / 2) dx`` over the real line."""
    R = math.sqrt(2.0 * (math.log(1.0 / tol) + 10.0 + k * 3) / a) + 2.0
    val, _ = _quad_checked(lambda x: x ** k * math.exp(-a * x * x / 2), -R, R, tol, "moment integral")
    return val


def residue_side_check(k: int, lambdas: Sequence, tol: float = 1e-12) -> ResidueReport:
    """Both sides of the residue identity at ``N = 2`` (empty-minor partition function 1).

    Left: ``(-1)^k E[q_k(H~)]`` from the exact Wick engine. Right: the
    explicit double integral with its lambda prefactor, by quadrature.
    """
    if k < 1:
        raise ValueError("k must be positive")
    if len(lambdas) != 2:
        raise ValueError("residue_side_check is defined for N = 2")
    field = wick.ExternalField(tuple(Fraction(x) for x in lambdas))
    lhs_exact = Fraction(0)
    for (_, pi), c in q_on_traces(k).terms.items():
        lhs_exact += c * wick.moment(pi, field, 0).coeffs[0]
    if k % 2:
        lhs_exact = -lhs_exact
    l1, l2 = (float(x) for x in field.lambdas)
    if l1 == l2:
        raise ValueError("lambda_1 == lambda_2 makes the prefactor singular")
    # r = 1, s = 2: x carries lambda_s, y carries lambda_r
    integral = (-1) ** k * (
        _gauss_moment(k, l2, tol) * _gauss_moment(0, l1, tol)
        - _gauss_moment(0, l2, tol) * _gauss_moment(k, l1, tol)
    )
    rhs = math.sqrt(l1 * l2) / math.pi * (l2 + l1) / (l2 - l1) * integral
    lhs = float(lhs_exact)
    ratio = None if abs(rhs) < 1e-300 or lhs == 0 else lhs / rhs
    return ResidueReport(k, [str(x) for x in field.lambdas], lhs, rhs, ratio, str(lhs_exact))
