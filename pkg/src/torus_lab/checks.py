"""Randomized exact/property checks behind ``torus-lab verify-lemmas``.

Each family draws ``trials`` random instances and yields one row per
instance.  A failing row carries the offending instance as JSON.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator

from scipy.integrate import quad

from .approxfn import (
    TrapezoidSpec,
    chi_eval,
    fourier_l1_check,
    h_fourier,
    trapezoid_fourier_1d,
)
from .lattice import GeneralLattice, coset_reps, dual_contains, exp_sum, kernel_sum
from .linalg import Matrix, determinant
from .measures import cantor_middle_third, lebesgue, smooth_density
from .orbit import TargetSpec
from .stats import measure_of_target_fourier, measure_of_target_quadrature


@dataclass
class CheckSettings:
    seed: int = 0
    trials: int = 20
    dmax: int = 3
    detmax: int = 60
    exp_sum_tol: float = 1e-9
    quad_rel_tol: float = 1e-8
    parseval_tol: float = 1e-6
    kernel_bound: float = 50.0
    l1_ratio_range: tuple = (0.01, 100.0)


@dataclass
class CheckRow:
    family: str
    trial: int
    passed: bool
    detail: dict = field(default_factory=dict)

    @property
    def status(self) -> str:
        return "pass" if self.passed else "fail"

    def detail_json(self) -> str:
        return json.dumps(self.detail, sort_keys=True, default=str)


def random_matrix(rng: random.Random, d: int, detmax: int, lo: int = -5, hi: int = 5) -> Matrix:
    while True:
        A = Matrix([[rng.randint(lo, hi) for _ in range(d)] for _ in range(d)])
        det = determinant(A)
        if det != 0 and abs(det) <= detmax:
            return A


# ---------------------------------------------------------------------------
# families


def check_cosets_and_exp_sums(s: CheckSettings, rng: random.Random, ks_per_matrix: int = 5):
    for t in range(s.trials):
        d = rng.randint(1, s.dmax)
        A = random_matrix(rng, d, s.detmax)
        D = abs(determinant(A))
        cos = coset_reps(A)
        yield CheckRow("coset_count", t, len(cos) == D, {"A": A.tolist(), "count": len(cos), "det": D})
        for _ in range(ks_per_matrix):
            k = [rng.randint(-20, 20) for _ in range(d)]
            S = exp_sum(A, k, cos)
            if dual_contains(A, k):
                ok = abs(S - D) <= s.exp_sum_tol * D
            else:
                ok = abs(S) < s.exp_sum_tol * D
            yield CheckRow("exp_sum_dichotomy", t, ok,
                           {"A": A.tolist(), "k": k, "value": repr(S), "dual": dual_contains(A, k)})


def _quad_transform(spec: TrapezoidSpec, k: float) -> float:
    P, S = float(spec.plateau), float(spec.support)
    w = 2 * math.pi * k
    f = lambda x: 2.0 * chi_eval(spec, x)  # noqa: E731  (even integrand, doubled half-line)
    total = 0.0
    for lo, hi in ((0.0, P), (P, S)):
        if hi > lo:
            if w == 0:
                total += quad(f, lo, hi, epsabs=0, epsrel=1e-13)[0]
            else:
                total += quad(f, lo, hi, weight="cos", wvar=w, epsabs=0, epsrel=1e-13)[0]
    return total


def check_trapezoid_quadrature(s: CheckSettings, rng: random.Random):
    for t in range(s.trials):
        spec = TrapezoidSpec(rng.uniform(0.01, 0.5), rng.uniform(0.05, 1.0), rng.choice(["upper", "lower"]))
        k = rng.uniform(-60, 60)
        a, b = trapezoid_fourier_1d(spec, k), _quad_transform(spec, k)
        rel = abs(a - b) / max(abs(b), 1e-300)
        yield CheckRow("trapezoid_quadrature", t, rel <= s.quad_rel_tol,
                       {"r": spec.r, "eps": spec.eps, "side": spec.side, "k": k, "closed": a, "quad": b, "rel": rel})


def check_trapezoid_sandwich(s: CheckSettings, rng: random.Random):
    for t in range(s.trials):
        r, eps = rng.uniform(0.01, 0.5), rng.uniform(0.01, 1.0)
        up, lo = TrapezoidSpec(r, eps, "upper"), TrapezoidSpec(r, eps, "lower")
        ok = True
        for _ in range(50):
            x = rng.uniform(-1, 1)
            ind = 1.0 if abs(x) <= r else 0.0
            if not chi_eval(lo, x) <= ind <= chi_eval(up, x):
                ok = False
                break
        yield CheckRow("trapezoid_sandwich", t, ok, {"r": r, "eps": eps})


def _rand_rational(rng: random.Random, lo: Fraction, hi: Fraction, den: int = 97) -> Fraction:
    return lo + (hi - lo) * Fraction(rng.randint(1, den - 1), den)


def check_h_fourier(s: CheckSettings, rng: random.Random):
    for t in range(s.trials):
        d = rng.randint(1, min(s.dmax, 2))
        A = random_matrix(rng, d, s.detmax)
        radii = [_rand_rational(rng, Fraction(0), Fraction(1, 2)) for _ in range(d)]
        eps = _rand_rational(rng, Fraction(0), Fraction(1))
        side = rng.choice(["upper", "lower"])
        y = [Fraction(rng.randint(0, 99), 100) for _ in range(d)]
        psi = math.prod(2 * r for r in radii)
        want = psi * (1 + eps / 2 if side == "upper" else 1 - eps / 2) ** d
        got = h_fourier(A, y, radii, eps, side, [0] * d)
        ok = isinstance(got, Fraction) and got == want
        off = 0
        for _ in range(10):
            k = [rng.randint(-20, 20) for _ in range(d)]
            if not dual_contains(A, k):
                off += 1
                ok = ok and h_fourier(A, y, radii, eps, side, k) == 0
        yield CheckRow("h_fourier_support", t, ok,
                       {"A": A.tolist(), "radii": radii, "eps": eps, "side": side, "h0": got, "off_lattice": off})


def check_fourier_l1(s: CheckSettings, rng: random.Random):
    lo, hi = s.l1_ratio_range
    for t in range(s.trials):
        d = rng.randint(1, 2)
        A = random_matrix(rng, d, s.detmax)
        radii = [rng.choice([0.05, 0.1, 0.25]) for _ in range(d)]
        eps = rng.choice([1.0, 0.5, 0.25])
        total, ref = fourier_l1_check(A, radii, eps, rng.choice(["upper", "lower"]))
        yield CheckRow("fourier_l1", t, lo <= total / ref <= hi,
                       {"A": A.tolist(), "radii": radii, "eps": eps, "sum": total, "reference": ref})


def check_parseval(s: CheckSettings, rng: random.Random):
    for t in range(s.trials):
        d = rng.randint(1, 2)
        A = random_matrix(rng, d, min(s.detmax, 12), -3, 3)
        m = rng.choice([lebesgue(d), smooth_density(d)])
        radii = [Fraction(rng.randint(1, 49), 100) for _ in range(d)]
        y = [Fraction(rng.randint(0, 99), 100) for _ in range(d)]
        eps = Fraction(rng.randint(1, 8), 8)
        side = rng.choice(["upper", "lower"])
        target = TargetSpec.constant(y, radii)
        four, _ = measure_of_target_fourier(m, A, target, 1, eps, side)
        quadv = measure_of_target_quadrature(m, A, target, 1, eps, side)
        yield CheckRow("parseval", t, abs(four - quadv) <= s.parseval_tol,
                       {"measure": m.name, "A": A.tolist(), "radii": radii, "y": y, "eps": eps,
                        "side": side, "fourier": four, "quadrature": quadv})


def check_kernel_sum(s: CheckSettings, rng: random.Random):
    for t in range(s.trials):
        d = rng.randint(1, 2)
        sigma = rng.choice([2, 4, 8, 16])
        eps = rng.choice([Fraction(1), Fraction(1, 4), Fraction(1, 16)])
        r = [rng.choice([0.05, 0.1, 0.25]) for _ in range(d)]
        L = GeneralLattice.scaled_integer(sigma, d)
        res = kernel_sum(L, r, float(eps), 12 * sigma)
        scaled = (res.value + res.tail_bound) * sigma * float(eps) ** (d / 2)
        yield CheckRow("kernel_sum", t, scaled <= s.kernel_bound,
                       {"d": d, "sigma": sigma, "eps": eps, "r": r, "scaled": scaled})


def check_measure_transforms(s: CheckSettings, rng: random.Random):
    for t in range(s.trials):
        d = rng.randint(1, 2)
        m = rng.choice([lebesgue(d), smooth_density(d), cantor_middle_third(d)])
        ok = m.fourier([0] * d) == 1
        for _ in range(5):
            tv = [rng.uniform(-100, 100) for _ in range(d)]
            a, b = m.fourier(tv), m.fourier([-v for v in tv])
            ok = ok and abs(a) <= 1 + 1e-12 and abs(a - b.conjugate()) <= 1e-12
        yield CheckRow("measure_transform", t, ok, {"measure": m.name, "d": d})


FAMILIES: list[tuple[str, Callable]] = [
    ("cosets", check_cosets_and_exp_sums),
    ("trapezoid_quadrature", check_trapezoid_quadrature),
    ("trapezoid_sandwich", check_trapezoid_sandwich),
    ("h_fourier_support", check_h_fourier),
    ("fourier_l1", check_fourier_l1),
    ("parseval", check_parseval),
    ("kernel_sum", check_kernel_sum),
    ("measure_transform", check_measure_transforms),
]


def run_checks(settings: CheckSettings) -> Iterator[CheckRow]:
    for i, (_, fam) in enumerate(FAMILIES):
        # separate stream per family so adding trials to one family leaves the others unchanged
        rng = random.Random(f"{settings.seed}:{i}")
        yield from fam(settings, rng)
