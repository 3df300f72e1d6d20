"""Monte Carlo experiments over sampled orbits.

Every "for almost every x" statement becomes a statistic over M points
drawn from the measure.  Per-sample seeds come from a SeedSequence keyed
on (master seed, sample_id), so samples are independent of evaluation
order and of the thread count.
"""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from ._numeric import e_minus_residue
from .approxfn import (
    ApproxParams,
    TrapezoidSpec,
    chi_eval,
    h_fourier,
    l1_tail_bound,
    specs_for,
    trapezoid_fourier_array,
)
from .errors import ConfigError, PrecisionError
from .lattice import coset_reps, dual_coordinates
from .linalg import Matrix, MatrixSequence, inverse_rational
from .measures import MeasureModel
from .orbit import (
    CountResult,
    TargetSpec,
    TorusPoint,
    _HitTester,
    _apply,
    _reducer,
    count_hits,
    orbit_numerators,
    psi_cumulative,
)


def sample_seed(master: int, sample_id: int) -> int:
    """64-bit seed for one sample, derived from (master, sample_id) only."""
    state = np.random.SeedSequence([int(master), int(sample_id)]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


def _map(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


# ---------------------------------------------------------------------------
# configuration and records


@dataclass
class ExperimentConfig:
    measure: MeasureModel
    sequence: MatrixSequence
    target: TargetSpec
    N: int
    samples: int = 100
    seed: int = 0
    precision_bits: int | None = None
    precision_override: bool = False
    schedule: ApproxParams | None = None
    err_exponent: float | None = None
    log_power: float = 2.5
    threads: int = 1
    n0: int | None = None

    def __post_init__(self):
        d = self.measure.dim
        if self.sequence.dim != d:
            raise ConfigError("sequence", f"dimension {self.sequence.dim} differs from measure dimension {d}")
        if self.target.dim != d:
            raise ConfigError("target", f"dimension {self.target.dim} differs from measure dimension {d}")
        if self.N < 1:
            raise ConfigError("N", "must be >= 1")
        if self.samples < 1:
            raise ConfigError("samples", "must be >= 1")
        if self.precision_bits is not None and self.precision_bits < 1:
            raise ConfigError("precision_bits", "must be positive")
        if self.schedule is None:
            self.schedule = ApproxParams("overlap", d)

    @property
    def dim(self) -> int:
        return self.measure.dim

    @property
    def required_bits(self) -> int:
        return 2 * self.N + 64

    @property
    def bits(self) -> int:
        return self.precision_bits if self.precision_bits is not None else self.required_bits

    def check_precision(self) -> None:
        if self.bits < self.required_bits and not self.precision_override:
            raise PrecisionError(self.bits, self.required_bits)

    @property
    def exponent(self) -> float:
        return self.err_exponent if self.err_exponent is not None else self.dim / (self.dim + 1)


@dataclass(frozen=True)
class SampleRecord:
    sample_id: int
    seed: int
    N: int
    R: int
    Psi: float
    err: float
    normalized_err: float


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    n_points: int


def normalized_error(err: float, Psi: float, exponent: float, log_power: float) -> float:
    scale = Psi**exponent * (math.log(Psi) + 2) ** log_power
    return err / scale


# ---------------------------------------------------------------------------
# Weyl sums and the Davenport-Erdos-LeVeque series


def weyl_sum(x: TorusPoint, seq: MatrixSequence, k: Sequence[int], N: int) -> complex:
    """(1/N) sum_{n<=N} e(-<k, A_n x>) along the exact orbit.

    Each phase is reduced to a centred integer residue before the
    exponential, so weyl_sum(x, seq, -k, N) is the exact conjugate.
    """
    k = [int(v) for v in k]
    if all(v == 0 for v in k):
        raise ValueError("weyl_sum needs k != 0")
    if len(k) != x.dim:
        raise ValueError("dimension mismatch")
    den = x.den
    re, im = [], []
    for nums in orbit_numerators(x, seq, N):
        z = e_minus_residue(sum(a * b for a, b in zip(k, nums)), den)
        re.append(z.real)
        im.append(z.imag)
    return complex(math.fsum(re), math.fsum(im)) / N


def _transposed_images(seq: MatrixSequence, k: Sequence[int], N: int) -> list[tuple]:
    """A_n^T k for n = 1..N."""
    k = tuple(int(v) for v in k)
    if seq.kind == "power":
        At = seq.base.T
        out = [At.apply(k)]
        for _ in range(N - 1):
            out.append(At.apply(out[-1]))
        return out
    return [seq.matrix(n).T.apply(k) for n in range(1, N + 1)]


def del_series_term(m: MeasureModel, seq: MatrixSequence, k: Sequence[int], N: int) -> float:
    """(1/N^3) sum_{m,n<=N} mu^((A_n - A_m)^T k) = 1/N^2 + (2/N^3) sum_{m<n} Re mu^(...).

    When the measure's transform is supported on a finite set of integer
    frequencies, only pairs whose difference lands in that set are visited.
    """
    if all(v == 0 for v in k):
        raise ValueError("del_series_term needs k != 0")
    u = _transposed_images(seq, k, N)
    support = m.integer_support
    terms = []
    if support is not None:
        seen: dict[tuple, list[int]] = {}
        for n, un in enumerate(u):
            for s in support:
                key = tuple(a - b for a, b in zip(un, s))
                for _ in seen.get(key, ()):
                    terms.append(m.fourier(s).real)
            seen.setdefault(un, []).append(n)
    else:
        for n in range(N):
            for j in range(n):
                terms.append(m.fourier([a - b for a, b in zip(u[n], u[j])]).real)
    return 1.0 / N**2 + 2.0 * math.fsum(terms) / N**3


# ---------------------------------------------------------------------------
# measure of a single target


def _matrix(A) -> Matrix:
    return A if isinstance(A, Matrix) else Matrix(A)


def measure_of_target_fourier(m: MeasureModel, A, target: TargetSpec, n: int, eps, side: str,
                              truncation: int | None = None) -> tuple[float, float]:
    """Truncated sum_k h^(k) mu^(-k) for the trapezoid approximant at step n.

    Returns (value, bound on the omitted terms).  For measures whose
    transform lives on finitely many integers the sum is exact.
    """
    A = _matrix(A)
    d = A.dim
    radii = target.radii(n)
    y = target.center
    support = m.integer_support
    if support is not None:
        acc = []
        for k in support:
            if dual_coordinates(A, k) is None:
                continue
            mk = m.fourier([-v for v in k])
            if mk == 0:
                continue
            acc.append(complex(h_fourier(A, y, radii, eps, side, k)) * mk)
        return math.fsum(z.real for z in acc), 0.0
    if d > 2:
        raise ValueError("truncated Fourier route supports d <= 2")
    specs = specs_for(radii, eps, side)
    need = math.ceil(4 / (math.sqrt(float(eps)) * min(float(r) for r in radii)))
    T = max(need, truncation or 0)
    ks = np.arange(-T, T + 1)
    coeffs = [trapezoid_fourier_array(s, ks) for s in specs]
    ys = [float(v) for v in y.coords]
    acc = []
    for idx in np.ndindex(*(len(ks),) * d):
        kp = [int(ks[i]) for i in idx]
        c = math.prod(float(coeffs[j][i]) for j, i in enumerate(idx))
        if c == 0:
            continue
        k = A.T.apply(kp)
        phase = complex(math.cos(2 * math.pi * sum(a * b for a, b in zip(kp, ys))),
                        -math.sin(2 * math.pi * sum(a * b for a, b in zip(kp, ys))))
        acc.append(phase * c * m.fourier([-v for v in k]))
    inside = [math.fsum(np.abs(c)) for c in coeffs]
    full = [i + l1_tail_bound(s, T) for i, s in zip(inside, specs)]
    return math.fsum(z.real for z in acc), math.prod(full) - math.prod(inside)


def _gl_pieces(spec: TrapezoidSpec, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights (weights times trapezoid value) on [-S, S]."""
    P, S = float(spec.plateau), float(spec.support)
    cuts = [-S, -P, P, S] if P > 0 else [-S, 0.0, S]
    x0, w0 = np.polynomial.legendre.leggauss(nodes)
    xs, ws = [], []
    for lo, hi in zip(cuts, cuts[1:]):
        if hi <= lo:
            continue
        half = (hi - lo) / 2
        x = lo + half * (x0 + 1)
        xs.append(x)
        ws.append(w0 * half * np.array([float(chi_eval(spec, v)) for v in x]))
    return np.concatenate(xs), np.concatenate(ws)


def measure_of_target_quadrature(m: MeasureModel, A, target: TargetSpec, n: int, eps, side: str,
                                 nodes: int = 16) -> float:
    """Integral of the approximant against a measure with a density, by tensor Gauss-Legendre.

    Uses the change of variables u = A x - p - y over every coset
    representative p; the density is periodic so no wrapping is needed.
    """
    A = _matrix(A)
    d = A.dim
    specs = specs_for(target.radii(n), eps, side)
    pts = [_gl_pieces(s, nodes) for s in specs]
    grids = np.meshgrid(*[p[0] for p in pts], indexing="ij")
    wgrids = np.meshgrid(*[p[1] for p in pts], indexing="ij")
    U = np.stack([g.ravel() for g in grids], axis=1)
    W = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    Ainv = np.array([[float(v) for v in row] for row in inverse_rational(A).rows])
    cos = coset_reps(A)
    y = np.array([float(v) for v in target.center.coords])
    total = []
    for p in cos.reps:
        X = (U + np.asarray(p, dtype=float) + y) @ Ainv.T
        total.append(float(np.dot(W, m.density(X))))
    return math.fsum(total) / abs(cos.det)


def _bits_for(A: Matrix) -> int:
    return 64 + max(abs(int(v)).bit_length() for row in A.rows for v in row)


def mc_radius(p: float, M: int) -> float:
    return 2 * math.sqrt(p * (1 - p) / M) + 2 / M


def measure_of_target_mc(m: MeasureModel, A, target: TargetSpec, n: int, M: int, seed: int,
                         bits: int | None = None) -> tuple[float, float]:
    """Fraction of M sampled x with A x mod 1 in the step-n target, and its confidence radius."""
    if M < 1000:
        raise ValueError("measure_of_target_mc needs M >= 1000")
    A = _matrix(A)
    bits = bits or _bits_for(A)
    pts = m.sample_many(seed, M, bits)
    tester = _HitTester(target, pts[0].den)
    red = _reducer(pts[0].den)
    hits = sum(1 for x in pts if tester(_apply(A, x.nums, red), n))
    p = hits / M
    return p, mc_radius(p, M)


@dataclass(frozen=True)
class PairRow:
    m: int
    n: int
    estimate: float
    radius: float
    psi_product: float
    ratio: float


def pair_correlation(mu: MeasureModel, seq: MatrixSequence, target: TargetSpec,
                     pairs: Sequence[tuple[int, int]], M: int, seed: int) -> list[PairRow]:
    """Joint hit frequencies for E_m and E_n against psi(m) psi(n)."""
    if M < 10**4:
        raise ValueError("pair_correlation needs M >= 10^4")
    pairs = [(int(a), int(b)) for a, b in pairs]
    needed = sorted({i for pr in pairs for i in pr})
    mats = {i: seq.matrix(i) for i in needed}
    bits = max(_bits_for(A) for A in mats.values())
    pts = mu.sample_many(seed, M, bits)
    den = pts[0].den
    tester = _HitTester(target, den)
    red = _reducer(den)
    hits = {i: np.zeros(M, dtype=bool) for i in needed}
    for j, x in enumerate(pts):
        for i in needed:
            hits[i][j] = tester(_apply(mats[i], x.nums, red), i)
    rows = []
    for a, b in pairs:
        est = float(np.count_nonzero(hits[a] & hits[b])) / M
        prod = float(target.psi(a) * target.psi(b))
        rows.append(PairRow(a, b, est, mc_radius(est, M), prod, est / prod))
    return rows


# ---------------------------------------------------------------------------
# counting experiment


def checkpoints(N: int, start_exp: int = 6) -> list[int]:
    """n = round(2^{j/2}) for j >= 2 start_exp, up to N (deduplicated)."""
    out = []
    j = 2 * start_exp
    while True:
        n = int(round(2 ** (j / 2)))
        if n > N:
            break
        if not out or n != out[-1]:
            out.append(n)
        j += 1
    return out


def fit_loglog(x: Sequence[float], y: Sequence[float]) -> FitResult:
    x = np.log(np.asarray(x, dtype=float))
    y = np.log(np.asarray(y, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else min(max(1 - float(np.sum(resid**2)) / ss_tot, 0.0), 1.0)
    return FitResult(float(slope), float(intercept), r2, len(x))


@dataclass
class CountingResult:
    records: list[SampleRecord]
    fit: FitResult | None
    variance_budget: list[dict]
    checkpoints: list[int]
    psi_at: list[float]
    # |R - Psi| per sample at each checkpoint, for plots
    curves: list[list[float]] = field(default_factory=list)
    hits: list[list[int]] = field(default_factory=list)


def _run_sample(cfg: ExperimentConfig, sid: int) -> tuple[int, CountResult]:
    s = sample_seed(cfg.seed, sid)
    x = cfg.measure.sample(s, cfg.bits)
    return s, count_hits(x, cfg.sequence, cfg.target, cfg.N)


def _run_all(cfg: ExperimentConfig) -> list[tuple[int, int, CountResult]]:
    cfg.check_precision()
    ids = list(range(cfg.samples))
    out = _map(lambda i: (i,) + _run_sample(cfg, i), ids, cfg.threads)
    return sorted(out, key=lambda t: t[0])


def variance_budget(cfg: ExperimentConfig, psi_terms: Sequence[float], psi_cum: Sequence[float],
                    points: Sequence[int], sq_err: Sequence[float]) -> list[dict]:
    """Prefix sums of phi(n) = psi Psi^{(d-1)/(d+1)} (log+ Psi + 1) + 2 psi beside mean (R-Psi)^2."""
    d = cfg.dim
    e = (d - 1) / (d + 1)
    phi = [p * C**e * (max(math.log(C), 0.0) + 1) + 2 * p for p, C in zip(psi_terms, psi_cum)]
    phi_cum = np.cumsum(phi)
    rows = []
    for n, s2 in zip(points, sq_err):
        budget = float(phi_cum[n - 1])
        rows.append({"n": n, "Psi": psi_cum[n - 1], "phi_sum": budget, "mean_sq_err": s2,
                     "ratio": s2 / budget if budget > 0 else math.inf})
    return rows


def counting_experiment(cfg: ExperimentConfig) -> CountingResult:
    """Per-sample R(x, N) against Psi(N), an error-exponent fit, and the variance budget.

    The fit regresses log of the root-mean-square |R(n) - Psi(n)| over
    samples on log Psi(n), at checkpoints n = 2^6, 2^6.5, ...; its slope
    is the empirical error exponent.
    """
    runs = _run_all(cfg)
    psi = psi_cumulative(cfg.target, cfg.N)
    Psi_N = psi.total
    records = []
    for sid, s, res in runs:
        err = res.R - Psi_N
        records.append(SampleRecord(sid, s, cfg.N, res.R, Psi_N, err,
                                    normalized_error(err, Psi_N, cfg.exponent, cfg.log_power)))
    pts = [n for n in checkpoints(cfg.N) if psi.cumulative[n - 1] > 1]
    if cfg.N not in pts and cfg.N > 1 and psi.cumulative[-1] > 1:
        pts.append(cfg.N)
    traces = [res.trace() for _, _, res in runs]
    curves = [[abs(float(tr[n - 1]) - psi.cumulative[n - 1]) for n in pts] for tr in traces]
    sq = [float(np.mean([c[j] ** 2 for c in curves])) for j in range(len(pts))]
    fit = None
    good = [(psi.cumulative[n - 1], math.sqrt(v)) for n, v in zip(pts, sq) if v > 0]
    if len(good) >= 8:
        fit = fit_loglog(*zip(*good))
    budget = variance_budget(cfg, psi.per_n, psi.cumulative, pts, sq)
    return CountingResult(records, fit, budget, pts, [psi.cumulative[n - 1] for n in pts], curves,
                          [res.hits for _, _, res in runs])


@dataclass
class DichotomySummary:
    regime: str
    max_R: int
    median_ratio: float
    verdict: str
    n0: int
    fraction_settled: float
    Psi: float
    records: list[SampleRecord]
    last_hits: list[int]


def dichotomy_experiment(cfg: ExperimentConfig, regime: str) -> DichotomySummary:
    """Convergent regime: are hits finished by n0?  Divergent: is R/Psi near 1?"""
    if regime not in ("convergent", "divergent"):
        raise ValueError("regime must be 'convergent' or 'divergent'")
    runs = _run_all(cfg)
    Psi = psi_cumulative(cfg.target, cfg.N).total
    records = []
    for sid, s, res in runs:
        err = res.R - Psi
        records.append(SampleRecord(sid, s, cfg.N, res.R, Psi, err,
                                    normalized_error(err, Psi, cfg.exponent, cfg.log_power)))
    last = [res.last_hit for _, _, res in runs]
    n0 = cfg.n0 if cfg.n0 is not None else max(1, cfg.N // 100)
    settled = sum(1 for h in last if h <= n0) / len(last)
    ratio = statistics.median(r.R / Psi for r in records)
    if regime == "convergent":
        verdict = "convergent-consistent" if settled >= 0.9 else "convergent-inconsistent"
    else:
        verdict = "divergent-consistent" if 0.5 <= ratio <= 1.5 else "divergent-inconsistent"
    return DichotomySummary(regime, max(r.R for r in records), ratio, verdict, n0, settled, Psi,
                            records, last)


# ---------------------------------------------------------------------------
# discrepancy

GRID = 256


def star_discrepancy(points: Sequence[TorusPoint], return_error: bool = False):
    """Star discrepancy of a point set in [0,1)^d for d <= 2.

    d = 1 is exact (sorted-points formula, rational arithmetic).  d = 2 takes
    the maximum over the corners of a 256 x 256 grid; the true value lies
    within 2/256 of it.
    """
    if not points:
        raise ValueError("need at least one point")
    d = points[0].dim
    N = len(points)
    if d == 1:
        xs = sorted(p.coords[0] for p in points)
        best = max(max(Fraction(i + 1, N) - x, x - Fraction(i, N)) for i, x in enumerate(xs))
        val, err = float(best), 0.0
    elif d == 2:
        P = np.array([p.as_floats() for p in points])
        edges = np.arange(1, GRID + 1) / GRID
        ix = np.searchsorted(edges, P[:, 0], side="right")
        iy = np.searchsorted(edges, P[:, 1], side="right")
        H = np.zeros((GRID + 1, GRID + 1))
        np.add.at(H, (ix, iy), 1)
        # counts of points with x < u_i and y < v_j
        C = H.cumsum(0).cumsum(1)[:GRID, :GRID] / N
        vol = np.outer(edges, edges)
        val, err = float(np.max(np.abs(C - vol))), 2.0 / GRID
    else:
        raise ValueError(f"star_discrepancy supports d <= 2, got d={d}")
    return (val, err) if return_error else val
