"""Trapezoid majorants/minorants of target boxes and their Fourier coefficients.

For a radius r and ramp parameter eps the upper trapezoid equals 1 on
[-r, r] and falls linearly to 0 at r(1+eps); the lower one equals 1 on
[-(1-eps)r, (1-eps)r] and reaches 0 at r.  Each is the convolution of the
box [-a, a] with the normalized box of half-width b, where a is the mean
of plateau and support half-widths and b half their difference, so

    T^(k) = 2a sinc(2ak) sinc(2bk),     T^(0) = plateau + support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Sequence

import numpy as np

from ._numeric import e_minus, sinc
from .lattice import dual_coordinates
from .linalg import Matrix, determinant
from .errors import SingularMatrixError
from .orbit import TorusPoint

UPPER, LOWER = "upper", "lower"


def _exactish(v):
    """Keep ints/Fractions exact; leave floats alone."""
    return Fraction(v) if isinstance(v, Rational) else float(v)


@dataclass(frozen=True)
class TrapezoidSpec:
    r: float | Fraction
    eps: float | Fraction
    side: str = UPPER

    def __post_init__(self):
        if self.side not in (UPPER, LOWER):
            raise ValueError("side must be 'upper' or 'lower'")
        if not 0 < self.r <= Fraction(1, 2):
            raise ValueError("r must lie in (0, 1/2]")
        if not 0 < self.eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        object.__setattr__(self, "r", _exactish(self.r))
        object.__setattr__(self, "eps", _exactish(self.eps))

    @property
    def plateau(self):
        return self.r if self.side == UPPER else (1 - self.eps) * self.r

    @property
    def support(self):
        return self.r * (1 + self.eps) if self.side == UPPER else self.r

    @property
    def a(self):
        return (self.plateau + self.support) / 2

    @property
    def b(self):
        return (self.support - self.plateau) / 2


def chi_eval(spec: TrapezoidSpec, x) -> float:
    """Value of the trapezoid at x (piecewise linear, in [0, 1])."""
    ax = abs(x)
    P, S = spec.plateau, spec.support
    if ax <= P:
        return 1
    if ax > S:
        return 0
    # both ramps read 1 + (r - |x|)/(r eps) shifted to their own end point
    return (S - ax) / (spec.r * spec.eps)


def trapezoid_fourier_1d(spec: TrapezoidSpec, k):
    """Integral of T(x) e(-kx) over R; real because T is even."""
    if k == 0:
        return spec.plateau + spec.support
    a, b = spec.a, spec.b
    return 2 * float(a) * sinc(2 * a * k) * sinc(2 * b * k)


def trapezoid_fourier_array(spec: TrapezoidSpec, k: np.ndarray) -> np.ndarray:
    """Vectorized float version of trapezoid_fourier_1d."""
    a, b = float(spec.a), float(spec.b)
    k = np.asarray(k, dtype=float)
    return 2 * a * np.sinc(2 * a * k) * np.sinc(2 * b * k)


def envelope(spec: TrapezoidSpec, k) -> float:
    """min{2 support, 1/(pi^2 k^2 r eps)}: |T^(k)| never exceeds this."""
    cap = 2 * float(spec.support)
    den = math.pi**2 * float(k) ** 2 * float(spec.r) * float(spec.eps)
    # tiny k underflows the denominator; the cap already applies there
    return cap if den == 0 else min(cap, 1.0 / den)


def ramp_shape(spec: TrapezoidSpec, k) -> float:
    """min{r, 1/(k^2 r eps)} with 1/0 read as infinity."""
    r = float(spec.r)
    den = float(k) ** 2 * r * float(spec.eps)
    return r if den == 0 else min(r, 1.0 / den)


def specs_for(radii: Sequence, eps, side: str) -> list[TrapezoidSpec]:
    return [TrapezoidSpec(r, eps, side) for r in radii]


def h_fourier(A, y: TorusPoint | Sequence, radii: Sequence, eps, side: str, k: Sequence[int]):
    """Fourier coefficient at k of the periodized approximant built on A.

    Zero unless k = A^T k' for an integer k'; then e(-<k', y>) prod_i T_i^(k'_i).
    At k = 0 the value psi (1 +- eps/2)^d is returned exactly when the
    radii and eps are rational.
    """
    A = A if isinstance(A, Matrix) else Matrix(A)
    if determinant(A) == 0:
        raise SingularMatrixError("h_fourier needs det(A) != 0")
    specs = specs_for(radii, eps, side)
    if len(specs) != A.dim or len(k) != A.dim:
        raise ValueError("dimension mismatch")
    if all(v == 0 for v in k):
        out = 1
        for s in specs:
            out *= trapezoid_fourier_1d(s, 0)
        return out
    kp = dual_coordinates(A, k)
    if kp is None:
        return 0j
    ys = y.coords if isinstance(y, TorusPoint) else [Fraction(v) for v in y]
    phase = e_minus(sum(Fraction(a) * b for a, b in zip(kp, ys)))
    val = 1.0
    for s, kk in zip(specs, kp):
        val *= float(trapezoid_fourier_1d(s, kk))
    return phase * val


def fourier_l1_check(A, radii: Sequence, eps, side: str, truncation: int | None = None) -> tuple[float, float]:
    """(sum over |k'_i| <= T of |h^(A^T k')|, 2^{2d} + eps^{-d/2}).

    Coefficients off A^T Z^d vanish, so the sum runs over k' and factorizes
    across coordinates.
    """
    A = A if isinstance(A, Matrix) else Matrix(A)
    d = A.dim
    specs = specs_for(radii, eps, side)
    need = math.ceil(4 / (math.sqrt(float(eps)) * min(float(r) for r in radii)))
    T = need if truncation is None else int(truncation)
    if T < need:
        raise ValueError(f"truncation {T} below the required {need}")
    ks = np.arange(-T, T + 1)
    total = 1.0
    for s in specs:
        total *= math.fsum(np.abs(trapezoid_fourier_array(s, ks)))
    return total, 2.0 ** (2 * d) + float(eps) ** (-d / 2)


def l1_tail_bound(spec: TrapezoidSpec, T: int) -> float:
    """Bound on sum_{|k|>T} |T^(k)| from the 1/(pi^2 k^2 r eps) envelope."""
    return 2.0 / (math.pi**2 * float(spec.r) * float(spec.eps) * T)


# ---------------------------------------------------------------------------
# eps schedules


@dataclass(frozen=True)
class ApproxParams:
    """Either mode="expectation" (uses xi) or mode="overlap" (uses delta)."""

    mode: str = "overlap"
    d: int = 1
    xi: float = 0.1
    delta: float | None = None

    def __post_init__(self):
        if self.mode not in ("expectation", "overlap"):
            raise ValueError("mode must be 'expectation' or 'overlap'")
        if not 0 < self.xi <= 1:
            raise ValueError("xi must lie in (0, 1]")
        if self.delta is not None and not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")

    @property
    def exponent(self) -> float:
        if self.mode == "expectation":
            return 1.0 - self.xi
        return self.delta if self.delta is not None else 2.0 / (self.d + 1)


def epsilon_schedule(params: ApproxParams, psi_prefix: Sequence[float]) -> list[float]:
    """eps(n) = min{1, Psi(n)^-exponent} for each prefix sum Psi(n)."""
    e = params.exponent
    out = []
    for P in psi_prefix:
        if not P > 0:
            raise ValueError("prefix sums must be positive")
        out.append(1.0 if P <= 1 else min(1.0, float(P) ** (-e)))
    return out
