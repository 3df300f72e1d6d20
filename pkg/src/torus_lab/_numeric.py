"""Small numeric helpers shared across modules."""

from __future__ import annotations

import cmath
import math
from fractions import Fraction
from numbers import Integral, Rational

TWO_PI = 2.0 * math.pi


def is_integer_value(t) -> bool:
    if isinstance(t, Integral):
        return True
    if isinstance(t, Rational):
        return t.denominator == 1
    try:
        return float(t).is_integer()
    except OverflowError:
        return False


def e_minus_residue(r: int, modulus: int) -> complex:
    """e(-r/modulus) for an integer residue, symmetric under r -> -r.

    The residue is centred into (-m/2, m/2] first so that negating ``r``
    yields the exact complex conjugate in floating point.
    """
    m = modulus
    r %= m
    if r == 0:
        return 1 + 0j
    if 2 * r == m:
        return -1 + 0j
    if 2 * r > m:
        r -= m
    theta = TWO_PI * (r / m)
    return complex(math.cos(theta), -math.sin(theta))


def e_minus(x) -> complex:
    """e(-x) = exp(-2 pi i x); exact reduction mod 1 for rational input."""
    if isinstance(x, (Integral, Rational)):
        q = Fraction(x)
        return e_minus_residue(q.numerator, q.denominator)
    return cmath.exp(-1j * TWO_PI * float(x))


def sinc(t) -> float:
    """sin(pi t)/(pi t), exactly 0 at nonzero integers and 1 at 0."""
    if is_integer_value(t):
        return 1.0 if t == 0 else 0.0
    t = float(t)
    return math.sin(math.pi * t) / (math.pi * t)
