"""Exact orbits A_n x mod 1, shrinking-target hits, R(x, N) and Psi(N).

Points carry a single common denominator: ``TorusPoint(nums, den)`` is
the vector (nums[0]/den, ..., nums[d-1]/den).  On the fast path the
denominator never changes, so every step is a handful of big-integer
multiply/reduce operations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import accumulate
from math import lcm
from typing import Callable, Iterator, Sequence

import numpy as np

from .linalg import Matrix, MatrixSequence, ratio_matrix

HALF = Fraction(1, 2)
REGULARIZATION_CAP = HALF - Fraction(1, 2**20)


@dataclass(frozen=True)
class TorusPoint:
    nums: tuple
    den: int

    def __post_init__(self):
        if self.den <= 0 or not all(0 <= v < self.den for v in self.nums):
            raise ValueError("TorusPoint coordinates must lie in [0, 1)")

    @property
    def dim(self) -> int:
        return len(self.nums)

    @property
    def coords(self) -> tuple:
        return tuple(Fraction(v, self.den) for v in self.nums)

    def as_floats(self) -> tuple:
        return tuple(v / self.den for v in self.nums)

    @classmethod
    def from_fractions(cls, values: Sequence) -> "TorusPoint":
        return reduce_mod1(values)

    @classmethod
    def zero(cls, d: int) -> "TorusPoint":
        return cls((0,) * d, 1)


def reduce_mod1(v: Sequence) -> TorusPoint:
    """Componentwise fractional part of a rational vector, exactly."""
    fr = [Fraction(x) for x in v]
    den = lcm(*(f.denominator for f in fr))
    return TorusPoint(tuple((f.numerator * (den // f.denominator)) % den for f in fr), den)


def _as_fraction(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


# ---------------------------------------------------------------------------
# targets


@dataclass(frozen=True)
class TargetSpec:
    """Center y and radii n -> (r_1(n), ..., r_d(n)) of the targets y + R(r(n))."""

    center: TorusPoint
    radii_fn: Callable[[int], tuple]
    tau: float | None = None
    radii_kind: str = "formula"
    label: str = ""
    # optional fast float evaluation, used only to prefilter hit tests
    radii_float: Callable[[int], tuple] | None = None

    @property
    def dim(self) -> int:
        return self.center.dim

    def radii(self, n: int) -> tuple:
        rs = tuple(_as_fraction(r) for r in self.radii_fn(n))
        if len(rs) != self.dim:
            raise ValueError(f"radii at n={n} have {len(rs)} entries, expected {self.dim}")
        for r in rs:
            if not 0 < r <= HALF:
                raise ValueError(f"radius {r} at n={n} outside (0, 1/2]")
        return rs

    def psi(self, n: int) -> Fraction:
        out = Fraction(1)
        for r in self.radii(n):
            out *= 2 * r
        return out

    @classmethod
    def constant(cls, center, values) -> "TargetSpec":
        center = _point(center)
        vals = tuple(_as_fraction(v) for v in _broadcast(values, center.dim))
        return cls(center, lambda n: vals, radii_kind="constant", label=f"constant {vals}")

    @classmethod
    def power(cls, center, c, exponent) -> "TargetSpec":
        """r_i(n) = c_i * n**exponent_i (exact for integer exponents)."""
        center = _point(center)
        cs = tuple(_as_fraction(v) for v in _broadcast(c, center.dim))
        es = tuple(_exponent(v) for v in _broadcast(exponent, center.dim))

        def fn(n: int) -> tuple:
            return tuple(ci * _pow(n, e) for ci, e in zip(cs, es))

        cf = [float(c) for c in cs]
        ef = [float(e) for e in es]

        def ffn(n: int) -> tuple:
            return tuple(c * float(n) ** e for c, e in zip(cf, ef))

        return cls(center, fn, radii_kind="power", label=f"power c={cs} exponent={es}", radii_float=ffn)

    @classmethod
    def table(cls, center, rows) -> "TargetSpec":
        center = _point(center)
        table = [tuple(_as_fraction(v) for v in _broadcast(row, center.dim)) for row in rows]

        def fn(n: int) -> tuple:
            if not 1 <= n <= len(table):
                raise IndexError(f"radius table has no entry for n={n}")
            return table[n - 1]

        return cls(center, fn, radii_kind="table", label=f"table[{len(table)}]")


def _point(center) -> TorusPoint:
    return center if isinstance(center, TorusPoint) else reduce_mod1(center)


def _broadcast(values, d: int) -> list:
    if isinstance(values, (list, tuple)):
        if len(values) == 1 and d > 1:
            return list(values) * d
        if len(values) != d:
            raise ValueError(f"expected {d} values, got {len(values)}")
        return list(values)
    return [values] * d


def _exponent(e):
    f = Fraction(e) if not isinstance(e, float) else Fraction(e)
    return int(f) if f.denominator == 1 else float(e)


def _pow(n: int, e) -> Fraction:
    if isinstance(e, int):
        return Fraction(n) ** e
    return Fraction(float(n) ** e)


def regularize_radii(target: TargetSpec, tau) -> TargetSpec:
    """r_i(n) -> min{max{r_i(n), n^-tau}, 1/2 - 2^-20}."""
    if not tau > 1:
        raise ValueError("tau must exceed 1")
    e = _exponent(tau)

    def fn(n: int) -> tuple:
        floor = _pow(n, -e) if isinstance(e, int) else Fraction(float(n) ** (-float(tau)))
        return tuple(min(max(_as_fraction(r), floor), REGULARIZATION_CAP) for r in target.radii_fn(n))

    ffn = None
    if target.radii_float is not None:
        inner, cap, tf = target.radii_float, float(REGULARIZATION_CAP), float(tau)

        def ffn(n: int) -> tuple:
            fl = float(n) ** -tf
            return tuple(min(max(r, fl), cap) for r in inner(n))

    return TargetSpec(target.center, fn, tau=float(tau), radii_kind=target.radii_kind,
                      label=f"{target.label} regularized tau={tau}", radii_float=ffn)


@dataclass(frozen=True)
class PsiResult:
    total: float | Fraction
    per_n: list
    cumulative: list


def psi_cumulative(target: TargetSpec, N: int, exact: bool = False) -> PsiResult:
    """Psi(N) = sum_{n<=N} 2^d r_1(n)...r_d(n).

    With ``exact`` the sum is carried in Fractions; otherwise each term is
    rounded once and summed with ``math.fsum``.
    """
    terms = [target.psi(n) for n in range(1, N + 1)]
    if exact:
        cum = list(accumulate(terms))
        return PsiResult(cum[-1] if cum else Fraction(0), terms, cum)
    fl = [float(t) for t in terms]
    cum = np.cumsum(fl).tolist()
    total = math.fsum(fl)
    if cum:
        cum[-1] = total
    return PsiResult(total, fl, cum)


# ---------------------------------------------------------------------------
# orbit engine


def _reducer(den: int):
    if den & (den - 1) == 0:
        mask = den - 1
        return lambda v: v & mask
    return lambda v: v % den


def _apply(M: Matrix, nums: tuple, red) -> tuple:
    return tuple(red(sum(a * b for a, b in zip(row, nums))) for row in M.rows)


def orbit_numerators(x: TorusPoint, seq: MatrixSequence, N: int, fast: bool = True) -> Iterator[tuple]:
    """Yield the numerators of A_n x mod 1 (denominator x.den) for n = 1..N."""
    red = _reducer(x.den)
    nums = x.nums
    if fast and seq.kind == "power":
        A = seq.base
        cur = _apply(A, nums, red)
        yield cur
        if A.dim == 1:
            a = A.rows[0][0]
            c = cur[0]
            if x.den & (x.den - 1) == 0:
                mask = x.den - 1
                for _ in range(N - 1):
                    c = (a * c) & mask
                    yield (c,)
            else:
                for _ in range(N - 1):
                    c = red(a * c)
                    yield (c,)
        elif A.dim == 2:
            (a, b), (c, e) = A.rows
            u, v = cur
            for _ in range(N - 1):
                u, v = red(a * u + b * v), red(c * u + e * v)
                yield (u, v)
        else:
            for _ in range(N - 1):
                cur = _apply(A, cur, red)
                yield cur
        return
    cur = None
    for n in range(1, N + 1):
        if fast and cur is not None:
            R, integral = ratio_matrix(seq, n - 1)
            if integral:
                cur = _apply(R, cur, red)
                yield cur
                continue
        cur = _apply(seq.matrix(n), nums, red)
        yield cur


def orbit_stream(x: TorusPoint, seq: MatrixSequence, N: int, fast: bool = True) -> Iterator[TorusPoint]:
    """The exact orbit (A_n x mod 1)_{n=1..N}.

    The fast path uses A_{n+1} x ≡ (A_{n+1} A_n^{-1})(A_n x mod 1) (mod 1),
    valid whenever the ratio is an integer matrix.
    """
    for nums in orbit_numerators(x, seq, N, fast):
        yield TorusPoint(nums, x.den)


def point_at(x: TorusPoint, A: Matrix) -> TorusPoint:
    """A x mod 1 for a single integer matrix."""
    return TorusPoint(_apply(A, x.nums, _reducer(x.den)), x.den)


# ---------------------------------------------------------------------------
# hits


def _torus_dist_exact(num: int, den: int, y: Fraction) -> Fraction:
    D = den * y.denominator
    a = (num * y.denominator - y.numerator * den) % D
    return Fraction(min(a, D - a), D)


def hit(p: TorusPoint, target: TargetSpec, n: int) -> bool:
    """||p_i - y_i|| <= r_i(n) for every i (closed condition, exact)."""
    if p.dim != target.dim:
        raise ValueError("point and target dimensions differ")
    for num, y, r in zip(p.nums, target.center.coords, target.radii(n)):
        if _torus_dist_exact(num, p.den, y) > r:
            return False
    return True


class _HitTester:
    """Exact hit test with a float prefilter for the clearly-decided cases."""

    MARGIN = 1e-9

    def __init__(self, target: TargetSpec, den: int):
        self.target = target
        self.den = den
        self.ys = target.center.coords
        self.yf = [float(y) for y in self.ys]
        shift = max(den.bit_length() - 62, 0)
        self.shift = shift
        self.den_top = den >> shift
        self.dyadic = den & (den - 1) == 0
        self._radii_cache: tuple | None = None
        self.constant = target.radii_kind == "constant"

    def radii(self, n: int):
        if self.constant:
            if self._radii_cache is None:
                rs = self.target.radii(1)
                self._radii_cache = (rs, [float(r) for r in rs])
            return self._radii_cache
        rs = self.target.radii(n)
        return rs, [float(r) for r in rs]

    def __call__(self, nums: tuple, n: int) -> bool:
        fast = not self.constant and self.target.radii_float is not None
        if fast:
            rs, rf = None, self.target.radii_float(n)
        else:
            rs, rf = self.radii(n)
        for i, num in enumerate(nums):
            pf = (num >> self.shift) / self.den_top
            diff = abs(pf - self.yf[i]) % 1.0
            dist = min(diff, 1.0 - diff)
            if dist > rf[i] + self.MARGIN:
                return False
            if dist < rf[i] - self.MARGIN:
                continue
            if rs is None:
                rs = self.target.radii(n)
            if _torus_dist_exact(num, self.den, self.ys[i]) > rs[i]:
                return False
        return True


@dataclass
class CountResult:
    R: int
    N: int
    hits: list  # indices n with A_n x in the target

    def trace(self) -> np.ndarray:
        """R(x, n) for n = 1..N."""
        marks = np.zeros(self.N, dtype=np.int64)
        if self.hits:
            marks[np.asarray(self.hits) - 1] = 1
        return np.cumsum(marks)

    def at(self, n: int) -> int:
        import bisect

        return bisect.bisect_right(self.hits, n)

    @property
    def last_hit(self) -> int:
        return self.hits[-1] if self.hits else 0


def count_hits(x: TorusPoint, seq: MatrixSequence, target: TargetSpec, N: int,
               fast: bool = True) -> CountResult:
    """R(x, N) = #{1 <= n <= N : A_n x in y + R(r(n)) mod 1}, with hit indices."""
    if x.dim != target.dim or x.dim != seq.dim:
        raise ValueError("dimension mismatch between point, sequence and target")
    tester = _HitTester(target, x.den)
    hits = [n for n, nums in enumerate(orbit_numerators(x, seq, N, fast), start=1) if tester(nums, n)]
    return CountResult(len(hits), N, hits)
