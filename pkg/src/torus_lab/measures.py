"""Measures on [0,1)^d with exact-rational samplers and Fourier transforms.

Three models ship: Lebesgue, the smooth density prod(1 - cos 2 pi x_i),
and the middle-third Cantor measure (coordinatewise product for d > 1).
The first two are Rajchman; Cantor is the standard counterexample
(|mu^(3^n)| does not tend to 0).
"""

from __future__ import annotations

import cmath
import itertools
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from numbers import Integral, Rational
from typing import Callable, Sequence

import numpy as np

from ._numeric import e_minus, e_minus_residue, is_integer_value, sinc
from .orbit import TorusPoint

CANTOR_GUARD = 40
LOG2_3 = math.log2(3)
CHUNK = 32


@dataclass(frozen=True)
class DecayClaim:
    kind: str  # "polylog" | "polynomial" | "none"
    exponent: float | None = None


@dataclass
class MeasureModel:
    name: str
    dim: int
    coord_fourier: Callable  # one-dimensional transform, applied per coordinate
    coord_sampler: Callable  # (rng, bits) -> (numerator, denominator) for one coordinate
    decay_claim: DecayClaim | None = None
    # finite set of integer frequencies carrying mass, or None if unbounded
    integer_support_1d: tuple | None = None
    # vectorized 1-d density on floats, None for singular measures
    coord_density: Callable | None = None

    def fourier(self, t: Sequence) -> complex:
        """mu^(t) = integral of e(-<t, x>) d mu(x)."""
        if len(t) != self.dim:
            raise ValueError(f"frequency has {len(t)} entries, expected {self.dim}")
        out = 1 + 0j
        for ti in t:
            if out == 0:
                break
            out *= self.coord_fourier(ti)
        return out

    @property
    def integer_support(self) -> list | None:
        if self.integer_support_1d is None:
            return None
        return list(itertools.product(self.integer_support_1d, repeat=self.dim))

    def density(self, X: np.ndarray) -> np.ndarray:
        """Product density at the rows of X (shape (..., d))."""
        if self.coord_density is None:
            raise ValueError(f"measure {self.name!r} has no density")
        X = np.asarray(X, dtype=float)
        return np.prod(self.coord_density(X), axis=-1)

    def sample(self, seed: int, bits: int) -> TorusPoint:
        return self.sample_many(seed, 1, bits)[0]

    def sampler(self, seed: int, bits: int) -> TorusPoint:
        return self.sample(seed, bits)

    def sample_many(self, seed: int, count: int, bits: int) -> list[TorusPoint]:
        """``count`` independent points at ``bits`` bits of precision; one RNG stream per call."""
        rng = random.Random(seed)
        out = []
        for _ in range(count):
            coords = [self.coord_sampler(rng, bits) for _ in range(self.dim)]
            den = coords[0][1]
            out.append(TorusPoint(tuple(c[0] for c in coords), den))
        return out


# ---------------------------------------------------------------------------
# one-dimensional transforms


def _half_phase(t) -> complex:
    """e^{-pi i t}, reduced exactly for rational t."""
    if isinstance(t, (Integral, Rational)):
        return e_minus(Fraction(t) / 2)
    return cmath.exp(-1j * math.pi * float(t))


def lebesgue_1d(t) -> complex:
    if is_integer_value(t):
        return 1 + 0j if t == 0 else 0j
    return _half_phase(t) * sinc(t)


def smooth_1d(t) -> complex:
    """Transform of 1 - cos(2 pi x) on [0,1): E(t) - E(t-1)/2 - E(t+1)/2 with E = lebesgue_1d."""
    if is_integer_value(t):
        t = int(t)
        if t == 0:
            return 1 + 0j
        return -0.5 + 0j if abs(t) == 1 else 0j
    # the three terms share the factor e^{-pi i t} sin(pi t); collapse them
    tf = float(t)
    return -_half_phase(t) * sinc(t) / (tf * tf - 1.0)


def cantor_1d(t) -> complex:
    """prod_{k=1}^{K} (1 + e(-2t/3^k))/2 with K = ceil(log3|t|) + 40."""
    if t == 0:
        return 1 + 0j
    exact = isinstance(t, (Integral, Rational))
    mag = abs(Fraction(t)) if exact else abs(float(t))
    K = max(0, math.ceil(math.log(mag, 3) if mag >= 1 else 0)) + CANTOR_GUARD
    out = 1 + 0j
    if exact:
        q = Fraction(t)
        for k in range(1, K + 1):
            out *= (1 + e_minus(2 * q / 3**k)) / 2
    else:
        tf = float(t)
        for k in range(1, K + 1):
            out *= (1 + cmath.exp(-2j * math.pi * 2 * tf / 3**k)) / 2
    return out


# ---------------------------------------------------------------------------
# one-dimensional samplers: (rng, bits) -> (num, den)


def _uniform_coord(rng: random.Random, bits: int) -> tuple[int, int]:
    return rng.getrandbits(bits), 1 << bits


def _smooth_inverse_cdf(u: float) -> float:
    """Solve x - sin(2 pi x)/(2 pi) = u on [0, 1] by bisection (monotone CDF)."""
    lo, hi = 0.0, 1.0
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        if mid - math.sin(2 * math.pi * mid) / (2 * math.pi) < u:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _smooth_coord(rng: random.Random, bits: int) -> tuple[int, int]:
    # inverse CDF fixes the leading 53 bits; the density is locally flat below
    # that scale, so the remaining bits are filled uniformly
    top_bits = min(bits, 53)
    u = rng.getrandbits(53) / 2**53
    x = _smooth_inverse_cdf(u)
    top = min(int(x * 2**top_bits), 2**top_bits - 1)
    low = rng.getrandbits(bits - top_bits) if bits > top_bits else 0
    return (top << (bits - top_bits)) | low, 1 << bits


def _cantor_coord(rng: random.Random, bits: int) -> tuple[int, int]:
    L = max(1, math.ceil(bits / LOG2_3))
    digits = rng.getrandbits(L)
    s = format(digits, f"0{L}b").replace("1", "2")
    # chunked base-3 parse: int(s, 3) refuses strings past sys.get_int_max_str_digits()
    num = 0
    for i in range(0, L, CHUNK):
        part = s[i:i + CHUNK]
        num = num * 3 ** len(part) + int(part, 3)
    return num, 3**L


# ---------------------------------------------------------------------------
# constructors


def lebesgue(d: int = 1) -> MeasureModel:
    return MeasureModel("lebesgue", _check_dim(d), lebesgue_1d, _uniform_coord,
                        DecayClaim("polynomial", 1.0), (0,), np.ones_like)


def smooth_density(d: int = 1, density_id: str = "raised-cosine") -> MeasureModel:
    if density_id != "raised-cosine":
        raise ValueError(f"unknown density {density_id!r}")
    return MeasureModel("smooth", _check_dim(d), smooth_1d, _smooth_coord,
                        DecayClaim("polynomial", 3.0), (-1, 0, 1),
                        lambda x: 1.0 - np.cos(2 * np.pi * x))


def cantor_middle_third(d: int = 1) -> MeasureModel:
    return MeasureModel("cantor", _check_dim(d), cantor_1d, _cantor_coord, DecayClaim("none"), None)


def _check_dim(d: int) -> int:
    if int(d) < 1:
        raise ValueError("dimension must be >= 1")
    return int(d)


MEASURES = {"lebesgue": lebesgue, "smooth": smooth_density, "cantor": cantor_middle_third}


def make_measure(name: str, d: int) -> MeasureModel:
    try:
        return MEASURES[name](d)
    except KeyError:
        raise ValueError(f"unknown measure {name!r}") from None




# ---------------------------------------------------------------------------
# Monte Carlo transform and decay fits


def empirical_fourier(m: MeasureModel, t: Sequence, M: int, seed: int,
                      bits: int = 64) -> tuple[complex, float]:
    """(1/M) sum_j e(-<t, x_j>) over M samples, with a 2/sqrt(M) radius."""
    if M < 100:
        raise ValueError("empirical_fourier needs M >= 100")
    if all(v == 0 for v in t):
        return 1 + 0j, 0.0
    pts = m.sample_many(seed, M, bits)
    integral = all(is_integer_value(v) for v in t)
    acc = []
    if integral:
        ti = [int(v) for v in t]
        for p in pts:
            acc.append(e_minus_residue(sum(a * b for a, b in zip(ti, p.nums)), p.den))
    else:
        tf = [float(v) for v in t]
        for p in pts:
            acc.append(cmath.exp(-2j * math.pi * sum(a * x for a, x in zip(tf, p.as_floats()))))
    est = complex(math.fsum(z.real for z in acc), math.fsum(z.imag for z in acc)) / M
    return est, 2.0 / math.sqrt(M)


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    r_squared: float
    model: str
    n_points: int
    degenerate: bool = False
    notice: str = ""


DEGENERATE_FLOOR = 1e-15


def decay_fit(m: MeasureModel, t_grid: Sequence[float], model: str = "polylog",
              direction: Sequence[float] | None = None) -> DecayFit:
    """Least-squares decay exponent of |mu^| along a ray.

    The fitted quantity is the tail envelope sup_{s >= t} |mu^(s e)| taken
    over the grid, regressed on log log t (polylog) or log t (polynomial).
    The slope estimates -s.
    """
    if model not in ("polylog", "polynomial"):
        raise ValueError("model must be 'polylog' or 'polynomial'")
    grid = [g for g in t_grid]
    if len(grid) < 20:
        raise ValueError("decay_fit needs at least 20 grid points")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be strictly increasing")
    if grid[0] <= 1 or float(grid[-1]) / float(grid[0]) < 1e4:
        raise ValueError("grid must start above 1 and span at least 4 decades")
    if direction is None:
        direction = [1] + [0] * (m.dim - 1)
    vals = np.array([abs(m.fourier([g * c for c in direction])) for g in grid])
    env = np.maximum.accumulate(vals[::-1])[::-1]
    keep = env >= DEGENERATE_FLOOR
    if keep.sum() < 20:
        return DecayFit(math.nan, math.nan, math.nan, model, int(keep.sum()), True,
                        "decay too fast to fit; hypothesis trivially satisfied")
    logt = np.log(np.array([float(g) for g in grid]))
    x = np.log(logt) if model == "polylog" else logt
    x, y = x[keep], np.log(env[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot <= 1e-24 else min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)
    return DecayFit(float(slope), float(intercept), r2, model, int(keep.sum()))
