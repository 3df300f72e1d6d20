"""Overlattices Gamma = A^{-1} Z^d: coset representatives, dual membership,
exponential sums, and kernel sums over sigma-discrete lattices."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from ._numeric import e_minus_residue
from .errors import CapacityError, SingularMatrixError
from .linalg import Matrix, adjugate, determinant, inverse_rational, smallest_singular_value

ENUMERATION_CAP = 10**5
BOX_CAP = 10**7
POINT_CAP = 2 * 10**7


def _int_matrix(A) -> Matrix:
    A = A if isinstance(A, Matrix) else Matrix(A)
    if not A.is_integral():
        raise ValueError("expected an integer matrix")
    return A


@dataclass(frozen=True)
class Overlattice:
    """Gamma = A^{-1} Z^d for a nonsingular integer matrix A (so Gamma ⊇ Z^d)."""

    generator: Matrix

    def __post_init__(self):
        if determinant(self.generator) == 0:
            raise SingularMatrixError("overlattice generator must be nonsingular")

    @property
    def index(self) -> int:
        return abs(determinant(self.generator))

    def dual_contains(self, k: Sequence[int]) -> bool:
        return dual_contains(self.generator, k)


@dataclass(frozen=True)
class CosetSet:
    """Integer vectors p with A^{-1} p in [0,1)^d, one per coset of Z^d / A Z^d."""

    reps: tuple
    source: Matrix
    det: int
    # adj(A) @ p for each rep, cached for phase computations
    adj_images: tuple

    def __len__(self) -> int:
        return len(self.reps)

    def __iter__(self):
        return iter(self.reps)


def coset_reps(A, cap: int = ENUMERATION_CAP) -> CosetSet:
    """Scan the integer bounding box of A [0,1)^d with exact membership tests."""
    A = _int_matrix(A)
    det = determinant(A)
    if det == 0:
        raise SingularMatrixError("coset representatives need det(A) != 0")
    if abs(det) > cap:
        raise CapacityError(f"|det A| = {abs(det)} exceeds the enumeration cap {cap}")
    adj = adjugate(A)
    d = A.dim
    ranges = []
    box = 1
    for row in A.rows:
        lo = sum(v for v in row if v < 0)
        hi = sum(v for v in row if v > 0)
        ranges.append(range(lo, hi + 1))
        box *= hi - lo + 1
    if box > BOX_CAP:
        raise CapacityError(f"bounding box of {box} points exceeds {BOX_CAP}")

    sign = 1 if det > 0 else -1
    D = abs(det)
    reps = []
    images = []
    bound = max(abs(v) for row in adj.rows for v in row) * max(
        max(abs(r.start), abs(r.stop)) for r in ranges
    ) * d
    if bound < 2**62:
        grids = np.meshgrid(*[np.arange(r.start, r.stop, dtype=np.int64) for r in ranges], indexing="ij")
        P = np.stack([g.ravel() for g in grids], axis=1)
        W = sign * (P @ np.array(adj.rows, dtype=np.int64).T)
        ok = np.all((W >= 0) & (W < D), axis=1)
        for p, w in zip(P[ok].tolist(), W[ok].tolist()):
            reps.append(tuple(p))
            images.append(tuple(sign * v for v in w))
    else:
        for p in itertools.product(*ranges):
            w = adj.apply(p)
            if all(0 <= sign * v < D for v in w):
                reps.append(tuple(p))
                images.append(tuple(w))
    if len(reps) != D:
        raise AssertionError(f"found {len(reps)} coset representatives, expected {D}")
    return CosetSet(tuple(reps), A, det, tuple(images))


def dual_contains(A, k: Sequence[int]) -> bool:
    """k ∈ Gamma^*  iff  (A^T)^{-1} k is an integer vector."""
    A = _int_matrix(A)
    det = determinant(A)
    if det == 0:
        raise SingularMatrixError("dual lattice needs det(A) != 0")
    # (A^T)^{-1} = adj(A)^T / det
    v = adjugate(A).T.apply([int(x) for x in k])
    return all(x % det == 0 for x in v)


def dual_coordinates(A, k: Sequence[int]) -> tuple | None:
    """k' = (A^T)^{-1} k if integral, else None."""
    A = _int_matrix(A)
    det = determinant(A)
    v = adjugate(A).T.apply([int(x) for x in k])
    if any(x % det for x in v):
        return None
    return tuple(x // det for x in v)


def phase_residues(cosets: CosetSet, k: Sequence[int]) -> list[int]:
    """Residues r_p with <k, A^{-1}p> ≡ r_p / |det A| (mod 1)."""
    D = abs(cosets.det)
    sign = 1 if cosets.det > 0 else -1
    k = [int(x) for x in k]
    return [(sign * sum(a * b for a, b in zip(k, w))) % D for w in cosets.adj_images]


def exp_sum(A, k: Sequence[int], cosets: CosetSet | None = None, cap: int = ENUMERATION_CAP) -> complex:
    """S(k) = sum over p in P of e(-<k, A^{-1} p>).

    Phases are reduced exactly before the exponential is taken, so the
    only floating error comes from cos/sin of each term.
    """
    if cosets is None:
        cosets = coset_reps(A, cap)
    D = abs(cosets.det)
    terms = [e_minus_residue(r, D) for r in phase_residues(cosets, k)]
    return complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))


def translate_cosets(cosets: CosetSet, shifts: Sequence[Sequence[int]]) -> CosetSet:
    """Replace each rep p by p + A m (one m per rep); same cosets, new representatives."""
    A = cosets.source
    adj = adjugate(A)
    reps = []
    images = []
    for p, m in zip(cosets.reps, shifts):
        q = tuple(a + b for a, b in zip(p, A.apply(m)))
        reps.append(q)
        images.append(adj.apply(q))
    return CosetSet(tuple(reps), A, cosets.det, tuple(images))


# ---------------------------------------------------------------------------
# general lattices and the kernel sum


class GeneralLattice:
    """Lattice generated by the columns of a nonsingular rational basis."""

    def __init__(self, basis):
        self.basis = basis if isinstance(basis, Matrix) else Matrix(basis)
        if determinant(self.basis) == 0:
            raise SingularMatrixError("lattice basis must be nonsingular")
        self._sigma: Fraction | None = None

    @classmethod
    def scaled_integer(cls, sigma, d: int) -> "GeneralLattice":
        return cls(Matrix.identity(d) * Fraction(sigma))

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def discreteness_lower_bound(self) -> Fraction:
        if self._sigma is None:
            self._sigma = discreteness_lower_bound(self)
        return self._sigma


def discreteness_lower_bound(L: GeneralLattice) -> Fraction:
    """||B z|| >= sigma_min(B) ||z|| >= sigma_min(B) for nonzero integer z."""
    return smallest_singular_value(L.basis).lo


@dataclass(frozen=True)
class KernelSum:
    value: float
    tail_bound: float
    n_points: int
    radius: float


def _kernel(t: np.ndarray, r: np.ndarray, eps: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        decay = 1.0 / (t * t * r * eps)
    return np.minimum(r, decay).prod(axis=-1)


def _half_line_sums(h: float, r: float, eps: float, limit: float) -> tuple[float, float]:
    """(upper bound on sum_{j>=0} f(hj), sum_{0<=j, hj<=limit} f(hj)) for f(u)=min(r, 1/(u^2 r eps))."""
    cross = 1.0 / (r * math.sqrt(eps))
    J = int(max(2 * cross / h, limit / h, 1000)) + 1
    j = np.arange(0, J + 1, dtype=float)
    u = h * j
    with np.errstate(divide="ignore"):
        f = np.minimum(r, 1.0 / (u * u * r * eps))
    full = math.fsum(f) + 1.0 / (h * h * r * eps * J)
    inside = math.fsum(f[u <= limit]) if limit >= 0 else 0.0
    return full, inside


def kernel_sum(L: GeneralLattice, r: Sequence[float], eps: float, truncation_radius: float,
               point_cap: int = POINT_CAP) -> KernelSum:
    """Sum over nonzero t in L with |t_i| <= R of prod_i min{r_i, 1/(t_i^2 r_i eps)}.

    Coordinates t_i = 0 contribute r_i (1/0 read as +inf).  The tail bound
    covers every omitted point: each cube of side sigma/sqrt(d) holds at
    most one lattice point, and the kernel at a point is dominated by its
    value at the cube corner nearest the origin.
    """
    d = L.dim
    r = np.asarray(r, dtype=float).reshape(-1)
    if r.size == 1 and d > 1:
        r = np.full(d, r[0])
    if r.size != d or np.any(r <= 0) or np.any(r > 1):
        raise ValueError("r must hold d values in (0, 1]")
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    sigma = float(L.discreteness_lower_bound)
    R = float(truncation_radius)
    if sigma <= 0 or R < 10 * sigma:
        raise ValueError("truncation_radius must be at least 10x the discreteness bound")

    B = np.array([[float(v) for v in row] for row in L.basis.rows])
    Binv = np.array([[float(v) for v in row] for row in inverse_rational(L.basis).rows])
    zmax = np.ceil(np.abs(Binv).sum(axis=1) * R).astype(np.int64)
    total = int(np.prod(2 * zmax + 1))
    if total > point_cap:
        raise CapacityError(
            f"kernel_sum would enumerate {total} points (cap {point_cap}); "
            "use a sparser lattice or a smaller radius"
        )

    value_parts = []
    count = 0
    inner = [np.arange(-z, z + 1) for z in zmax[1:]]
    if inner:
        mesh = np.stack([g.ravel() for g in np.meshgrid(*inner, indexing="ij")], axis=1)
    else:
        mesh = np.zeros((1, 0), dtype=np.int64)
    for z0 in range(-int(zmax[0]), int(zmax[0]) + 1):
        Z = np.concatenate([np.full((mesh.shape[0], 1), z0), mesh], axis=1)
        if z0 == 0:
            Z = Z[np.any(Z != 0, axis=1)]
        T = Z @ B.T
        T = T[np.all(np.abs(T) <= R, axis=1)]
        if T.size:
            value_parts.append(math.fsum(_kernel(T, r, eps)))
            count += T.shape[0]
    value = math.fsum(value_parts)

    h = sigma / math.sqrt(d)
    fulls, insides = zip(*(_half_line_sums(h, ri, eps, R - h) for ri in r))
    tail = (2**d) * (math.prod(fulls) - math.prod(insides))
    return KernelSum(value=value, tail_bound=max(float(tail), 0.0), n_points=count, radius=R)
