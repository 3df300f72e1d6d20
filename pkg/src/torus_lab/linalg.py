"""Exact integer/rational matrix algebra.

Everything here works over Python ints and ``fractions.Fraction``; no
floating point enters a decision.  Singular values are certified by
bisection on Sturm-sequence root counts of the characteristic polynomial
of ``M^T M``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import lcm
from typing import Callable, Iterable, Sequence, Union

from .errors import GapViolationError, SingularMatrixError

Number = Union[int, Fraction]

DEFAULT_TOL = Fraction(1, 10**12)


def _norm(v) -> Number:
    if isinstance(v, Fraction):
        return v.numerator if v.denominator == 1 else v
    if isinstance(v, int):
        return v
    if isinstance(v, str):
        return _norm(Fraction(v))
    if isinstance(v, float):
        return _norm(Fraction(v))
    # numpy integers and the like
    return int(v)


class Matrix:
    """Immutable square matrix with exact entries.

    Integral entries are stored as ``int``; anything else as ``Fraction``.
    ``IntMatrix`` and ``RationalMatrix`` are the same class; use
    :meth:`is_integral` to tell them apart.
    """

    __slots__ = ("rows", "_hash")

    def __init__(self, rows: Iterable[Iterable]):
        rows = tuple(tuple(_norm(v) for v in row) for row in rows)
        d = len(rows)
        if d == 0 or any(len(r) != d for r in rows):
            raise ValueError("matrix must be square with dimension >= 1")
        self.rows = rows
        self._hash = hash(rows)

    @classmethod
    def identity(cls, d: int) -> "Matrix":
        return cls([[int(i == j) for j in range(d)] for i in range(d)])

    @classmethod
    def diag(cls, values: Sequence) -> "Matrix":
        d = len(values)
        return cls([[values[i] if i == j else 0 for j in range(d)] for i in range(d)])

    @property
    def dim(self) -> int:
        return len(self.rows)

    @property
    def T(self) -> "Matrix":
        return Matrix(zip(*self.rows))

    def is_integral(self) -> bool:
        return all(isinstance(v, int) for row in self.rows for v in row)

    def apply(self, vec: Sequence) -> tuple:
        return tuple(_norm(sum(a * b for a, b in zip(row, vec))) for row in self.rows)

    def __matmul__(self, other: "Matrix") -> "Matrix":
        cols = list(zip(*other.rows))
        return Matrix([[sum(a * b for a, b in zip(row, col)) for col in cols] for row in self.rows])

    def __mul__(self, scalar) -> "Matrix":
        return Matrix([[v * scalar for v in row] for row in self.rows])

    __rmul__ = __mul__

    def __add__(self, other: "Matrix") -> "Matrix":
        return Matrix([[a + b for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)])

    def __sub__(self, other: "Matrix") -> "Matrix":
        return Matrix([[a - b for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)])

    def __pow__(self, n: int) -> "Matrix":
        if n < 0:
            return inverse_rational(self) ** (-n)
        result = Matrix.identity(self.dim)
        base = self
        while n:
            if n & 1:
                result = result @ base
            base = base @ base
            n >>= 1
        return result

    def __eq__(self, other) -> bool:
        return isinstance(other, Matrix) and self.rows == other.rows

    def __hash__(self) -> int:
        return self._hash

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def tolist(self) -> list:
        return [list(r) for r in self.rows]

    def __repr__(self) -> str:
        return f"Matrix({[[str(v) for v in r] for r in self.rows]})"


IntMatrix = Matrix
RationalMatrix = Matrix


def _as_matrix(M) -> Matrix:
    return M if isinstance(M, Matrix) else Matrix(M)


def _clear_denominators(M: Matrix) -> tuple[list[list[int]], int]:
    scale = lcm(*(v.denominator for row in M.rows for v in row if isinstance(v, Fraction)))
    return [[int(v * scale) for v in row] for row in M.rows], scale


def _bareiss_det(a: list[list[int]]) -> int:
    n = len(a)
    a = [row[:] for row in a]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k] != 0:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return 0
        pk = a[k][k]
        for i in range(k + 1, n):
            aik = a[i][k]
            row_i, row_k = a[i], a[k]
            for j in range(k + 1, n):
                row_i[j] = (pk * row_i[j] - aik * row_k[j]) // prev
        prev = pk
    return sign * a[n - 1][n - 1]


def determinant(M) -> Number:
    """Exact determinant by Bareiss fraction-free elimination."""
    M = _as_matrix(M)
    a, scale = _clear_denominators(M)
    det = _bareiss_det(a)
    if scale == 1:
        return det
    return _norm(Fraction(det, scale ** M.dim))


def _adjugate_and_det(a: list[list[int]]) -> tuple[list[list[int]], int]:
    """Fraction-free Gauss-Jordan on [a | I]; returns (adj(a), det(a))."""
    n = len(a)
    aug = [row[:] + [int(i == j) for j in range(n)] for i, row in enumerate(a)]
    prev = 1
    sign = 1
    for k in range(n):
        if aug[k][k] == 0:
            for i in range(k + 1, n):
                if aug[i][k] != 0:
                    aug[k], aug[i] = aug[i], aug[k]
                    sign = -sign
                    break
            else:
                raise SingularMatrixError("matrix is singular")
        pk = aug[k][k]
        row_k = aug[k]
        for i in range(n):
            if i == k:
                continue
            row_i = aug[i]
            aik = row_i[k]
            for j in range(2 * n):
                row_i[j] = (pk * row_i[j] - aik * row_k[j]) // prev
        prev = pk
    # [a | I] ~ [p I | p a^{-1}] with p = sign * det(a)
    det = sign * prev
    adj = [[sign * v for v in row[n:]] for row in aug]
    return adj, det


def adjugate(M) -> Matrix:
    M = _as_matrix(M)
    if not M.is_integral():
        raise TypeError("adjugate is only provided for integer matrices")
    adj, _ = _adjugate_and_det([list(r) for r in M.rows])
    return Matrix(adj)


def inverse_rational(M) -> Matrix:
    """Exact inverse; raises :class:`SingularMatrixError` if det(M) == 0."""
    M = _as_matrix(M)
    a, scale = _clear_denominators(M)
    adj, det = _adjugate_and_det(a)
    # (M)^-1 = (a/scale)^-1 = scale * adj(a) / det(a)
    return Matrix([[Fraction(scale * v, det) for v in row] for row in adj])


# ---------------------------------------------------------------------------
# polynomials (coefficient lists, highest degree first, Fraction entries)


def charpoly(M) -> list[Fraction]:
    """Monic characteristic polynomial det(xI - M) via Faddeev-LeVerrier."""
    M = _as_matrix(M)
    n = M.dim
    A = [[Fraction(v) for v in row] for row in M.rows]
    coeffs = [Fraction(1)]
    Mk = [[Fraction(0)] * n for _ in range(n)]
    c = Fraction(1)
    for k in range(1, n + 1):
        # M_k = A M_{k-1} + c_{k-1} I
        prod = [[sum(A[i][l] * Mk[l][j] for l in range(n)) for j in range(n)] for i in range(n)]
        for i in range(n):
            prod[i][i] += c
        Mk = prod
        AM = [[sum(A[i][l] * Mk[l][j] for l in range(n)) for j in range(n)] for i in range(n)]
        c = -sum(AM[i][i] for i in range(n)) / k
        coeffs.append(c)
    return coeffs


def _strip(p: list[Fraction]) -> list[Fraction]:
    i = 0
    while i < len(p) - 1 and p[i] == 0:
        i += 1
    return p[i:]


def _polyval(p: Sequence[Fraction], x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in p:
        acc = acc * x + c
    return acc


def _deriv(p: list[Fraction]) -> list[Fraction]:
    n = len(p) - 1
    return [c * (n - i) for i, c in enumerate(p[:-1])] or [Fraction(0)]


def _polyrem(a: list[Fraction], b: list[Fraction]) -> list[Fraction]:
    a = list(a)
    while len(a) >= len(b) and any(a):
        q = a[0] / b[0]
        for i in range(len(b)):
            a[i] -= q * b[i]
        a.pop(0)
    return _strip(a) if a else [Fraction(0)]


def _polydiv(a: list[Fraction], b: list[Fraction]) -> list[Fraction]:
    a = list(a)
    out = []
    while len(a) >= len(b):
        q = a[0] / b[0]
        out.append(q)
        for i in range(len(b)):
            a[i] -= q * b[i]
        a.pop(0)
    return out or [Fraction(0)]


def _polygcd(a: list[Fraction], b: list[Fraction]) -> list[Fraction]:
    while any(b):
        a, b = b, _polyrem(a, b)
    return [c / a[0] for c in a]


def sturm_sequence(p: Sequence) -> list[list[Fraction]]:
    """Sturm chain of the squarefree part of ``p``."""
    p = _strip([Fraction(c) for c in p])
    if len(p) > 1:
        g = _polygcd(p, _deriv(p))
        if len(g) > 1:
            p = _polydiv(p, g)
    seq = [p]
    if len(p) == 1:
        return seq
    seq.append(_deriv(p))
    while True:
        r = _polyrem(seq[-2], seq[-1])
        if not any(r):
            break
        seq.append([-c for c in r])
    return seq


def _sign_changes(values: Iterable[Fraction]) -> int:
    last = 0
    changes = 0
    for v in values:
        if v == 0:
            continue
        s = 1 if v > 0 else -1
        if last and s != last:
            changes += 1
        last = s
    return changes


def count_roots_le(seq: list[list[Fraction]], x: Fraction) -> int:
    """Number of distinct real roots in (-inf, x] of the chain's base polynomial."""
    at_minus_inf = _sign_changes(p[0] * (-1) ** (len(p) - 1) for p in seq)
    at_x = _sign_changes(_polyval(p, x) for p in seq)
    return at_minus_inf - at_x


# ---------------------------------------------------------------------------
# singular values


@dataclass(frozen=True)
class Interval:
    lo: Fraction
    hi: Fraction

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return float((self.lo + self.hi) / 2)

    def __contains__(self, x) -> bool:
        return self.lo <= Fraction(x) <= self.hi

    def __float__(self) -> float:
        return self.mid


def _gram(M: Matrix) -> Matrix:
    return M.T @ M


@lru_cache(maxsize=4096)
def _gram_sturm(M: Matrix) -> tuple:
    return tuple(tuple(p) for p in sturm_sequence(charpoly(_gram(M))))


def smallest_singular_value(M, tol=DEFAULT_TOL) -> Interval:
    """Certified enclosure ``(lo, hi]`` of sigma_min(M) with ``hi - lo <= tol``.

    sigma <= c  iff  char(M^T M) has a root in (-inf, c^2]; bisection runs on
    dyadic rationals so the Sturm evaluations stay small.
    """
    M = _as_matrix(M)
    tol = Fraction(tol)
    if tol <= 0:
        raise ValueError("tol must be positive")
    seq = [list(p) for p in _gram_sturm(M)]
    if count_roots_le(seq, Fraction(0)) >= 1:
        return Interval(Fraction(0), Fraction(0))
    G = _gram(M)
    # Rayleigh quotient on basis vectors: lambda_min <= min_i G_ii
    min_diag = min(Fraction(G[i, i]) for i in range(M.dim))
    hi = Fraction(1)
    while hi * hi < min_diag:
        hi *= 2
    lo = Fraction(0)
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if count_roots_le(seq, mid * mid) >= 1:
            hi = mid
        else:
            lo = mid
    # rational singular values (scaled identities, diagonal bases) are pinned exactly
    cand = Fraction(lo / 2 + hi / 2).limit_denominator(10**6)
    if lo <= cand <= hi and _polyval(charpoly(G), cand * cand) == 0:
        return Interval(cand, cand)
    return Interval(lo, hi)


def is_expanding(M) -> bool:
    """True iff every singular value of M exceeds 1 (decided exactly)."""
    M = _as_matrix(M)
    seq = [list(p) for p in _gram_sturm(M)]
    return count_roots_le(seq, Fraction(1)) == 0


# ---------------------------------------------------------------------------
# matrix sequences


@dataclass
class MatrixSequence:
    """The sequence (A_n)_{n>=1} of expanding integer matrices.

    ``generator`` maps n to A_n.  Validation is lazy: :meth:`validate` checks
    the prefix up to an index and remembers how far it got.
    """

    kind: str
    generator: Callable[[int], Matrix]
    dim: int
    claimed_gap: float | None = None
    base: Matrix | None = None
    length: int | None = None
    ratio_fn: Callable[[int], Matrix] | None = None
    _cache: dict = field(default_factory=dict, repr=False)
    _validated: int = field(default=0, repr=False)

    @classmethod
    def power(cls, A) -> "MatrixSequence":
        A = _as_matrix(A)
        if not A.is_integral():
            raise ValueError("power sequences need an integer base")
        return cls("power", lambda n: A ** n, A.dim, base=A)

    @classmethod
    def from_list(cls, matrices: Sequence) -> "MatrixSequence":
        mats = [_as_matrix(m) for m in matrices]
        if not mats:
            raise ValueError("empty matrix list")

        def gen(n: int) -> Matrix:
            if not 1 <= n <= len(mats):
                raise IndexError(f"list sequence has no A_{n} (length {len(mats)})")
            return mats[n - 1]

        return cls("list", gen, mats[0].dim, length=len(mats))

    @classmethod
    def from_ratios(cls, first, ratio: Callable[[int], Matrix]) -> "MatrixSequence":
        """A_1 = first, A_{n+1} = ratio(n) @ A_n."""
        first = _as_matrix(first)
        seq: "MatrixSequence"

        def gen(n: int) -> Matrix:
            if n == 1:
                return first
            return _as_matrix(ratio(n - 1)) @ seq.matrix(n - 1)

        seq = cls("ratio", gen, first.dim, ratio_fn=ratio)
        return seq

    def matrix(self, n: int) -> Matrix:
        if n < 1:
            raise IndexError("sequence indices start at 1")
        m = self._cache.get(n)
        if m is None:
            m = self.generator(n)
            if not m.is_integral():
                raise ValueError(f"A_{n} is not integral")
            self._cache[n] = m
        return m

    def ratio(self, n: int) -> tuple[Matrix, bool]:
        return ratio_matrix(self, n)

    def validate(self, upto: int) -> None:
        """Check A_1..A_upto are nonsingular and expanding."""
        if self.kind == "power":
            # sigma(A^n) >= sigma(A)^n, so one check covers every power
            if self._validated == 0:
                if determinant(self.base) == 0 or not is_expanding(self.base):
                    raise ValueError("power base is not expanding")
            self._validated = max(self._validated, upto)
            return
        for n in range(self._validated + 1, upto + 1):
            m = self.matrix(n)
            if determinant(m) == 0 or not is_expanding(m):
                raise ValueError(f"A_{n} is not an expanding nonsingular matrix")
            self._validated = n


def ratio_matrix(seq: MatrixSequence, n: int) -> tuple[Matrix, bool]:
    """A_{n+1} A_n^{-1} exactly, with a flag telling whether it is integral."""
    if n < 1:
        raise IndexError("ratio index starts at 1")
    if seq.kind == "power":
        return seq.base, True
    if seq.ratio_fn is not None:
        R = _as_matrix(seq.ratio_fn(n))
    else:
        R = seq.matrix(n + 1) @ inverse_rational(seq.matrix(n))
    return R, R.is_integral()


def gap_constant(seq: MatrixSequence, N: int, tol=DEFAULT_TOL) -> float:
    """Certified prefix minimum of sigma(A_{n+1} A_n^{-1}) over 1 <= n < N.

    Returns the smallest lower endpoint; raises :class:`GapViolationError`
    at the first ratio that is not expanding.
    """
    best = None
    for n in range(1, N):
        R, _ = ratio_matrix(seq, n)
        if not is_expanding(R):
            raise GapViolationError(n)
        lo = smallest_singular_value(R, tol).lo
        if best is None or lo < best:
            best = lo
    if best is None:
        raise ValueError("need N >= 2 to observe a ratio")
    return float(best)
