"""Strict JSON configuration for the command-line experiments.

Unknown keys are rejected.  Big integers may be written as strings, and
rationals as "p/q" strings, [p, q] pairs or decimal literals.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Any

from .approxfn import ApproxParams
from .errors import ConfigError
from .linalg import Matrix, MatrixSequence
from .measures import MEASURES, make_measure
from .orbit import TargetSpec, regularize_radii
from .stats import ExperimentConfig

COMMON_KEYS = {
    "measure", "dim", "sequence", "target", "N", "samples", "seed", "precision_bits",
    "precision_override", "schedule", "threads", "err_exponent", "log_power",
}
COMMAND_KEYS = {
    "count": COMMON_KEYS,
    "weyl": COMMON_KEYS | {"k", "del_N"},
    "dichotomy": COMMON_KEYS | {"regime", "n0"},
    "pairs": COMMON_KEYS | {"pairs"},
    "decay": {"measure", "dim", "grid", "model", "direction", "seed"},
    "verify-lemmas": {
        "seed", "trials", "dmax", "detmax", "exp_sum_tol", "quad_rel_tol", "parseval_tol",
        "kernel_bound", "l1_ratio_range",
    },
}


def load_json(path: str | Path) -> tuple[dict, bytes]:
    raw = Path(path).read_bytes()
    try:
        data = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError("<file>", f"not valid UTF-8 JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError("<root>", "top level must be an object")
    return data, raw


def check_keys(data: dict, allowed: set, where: str = "") -> None:
    extra = sorted(set(data) - allowed)
    if extra:
        raise ConfigError(where + extra[0], "unknown field")


# ---------------------------------------------------------------------------
# scalar parsers


def as_int(v: Any, field: str, lo: int | None = None) -> int:
    if isinstance(v, bool):
        raise ConfigError(field, "expected an integer")
    if isinstance(v, str):
        try:
            v = int(v.strip())
        except ValueError:
            raise ConfigError(field, f"expected an integer, got {v!r}") from None
    if isinstance(v, float) and v.is_integer():
        v = int(v)
    if not isinstance(v, int):
        raise ConfigError(field, f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(field, f"must be >= {lo}")
    return v


def as_rational(v: Any, field: str) -> Fraction:
    try:
        if isinstance(v, bool):
            raise TypeError
        if isinstance(v, list) and len(v) == 2:
            return Fraction(as_int(v[0], field), as_int(v[1], field))
        if isinstance(v, float):
            if not math.isfinite(v):
                raise ValueError
            return Fraction(repr(v))
        if isinstance(v, (int, str)):
            return Fraction(v.strip() if isinstance(v, str) else v)
    except (ValueError, TypeError, ZeroDivisionError):
        pass
    raise ConfigError(field, f"expected a rational number, got {v!r}")


def as_real(v: Any, field: str) -> float:
    return float(as_rational(v, field))


def as_bool(v: Any, field: str) -> bool:
    if not isinstance(v, bool):
        raise ConfigError(field, "expected true or false")
    return v


def as_matrix(v: Any, field: str, d: int) -> Matrix:
    if not isinstance(v, list):
        v = [[v]]
    rows = [r if isinstance(r, list) else [r] for r in v]
    if len(rows) != d or any(len(r) != d for r in rows):
        raise ConfigError(field, f"expected a {d}x{d} integer matrix")
    return Matrix([[as_int(x, field) for x in r] for r in rows])


def _vector(v: Any, field: str, d: int, parse) -> list:
    if not isinstance(v, list):
        v = [v]
    if len(v) == 1 and d > 1:
        v = v * d
    if len(v) != d:
        raise ConfigError(field, f"expected {d} entries")
    return [parse(x, field) for x in v]


# ---------------------------------------------------------------------------
# compound parsers


def parse_measure(data: dict):
    if "measure" not in data:
        raise ConfigError("measure", "missing")
    name = data["measure"]
    if name not in MEASURES:
        raise ConfigError("measure", f"unknown measure {name!r} (choose from {sorted(MEASURES)})")
    d = as_int(data.get("dim", 1), "dim", lo=1)
    return make_measure(name, d)


def parse_sequence(v: Any, d: int) -> MatrixSequence:
    if not isinstance(v, dict):
        raise ConfigError("sequence", "expected an object")
    kind = v.get("kind")
    if kind == "power":
        check_keys(v, {"kind", "base"}, "sequence.")
        A = as_matrix(v.get("base"), "sequence.base", d)
        seq = MatrixSequence.power(A)
    elif kind == "list":
        check_keys(v, {"kind", "matrices"}, "sequence.")
        mats = v.get("matrices")
        if not isinstance(mats, list) or not mats:
            raise ConfigError("sequence.matrices", "expected a non-empty list")
        seq = MatrixSequence.from_list([as_matrix(m, "sequence.matrices", d) for m in mats])
    else:
        raise ConfigError("sequence.kind", "expected 'power' or 'list'")
    try:
        seq.validate(1 if kind == "power" else seq.length)
    except ValueError as exc:
        raise ConfigError("sequence", str(exc)) from None
    return seq


def parse_target(v: Any, d: int) -> TargetSpec:
    if not isinstance(v, dict):
        raise ConfigError("target", "expected an object")
    check_keys(v, {"center", "radii", "tau"}, "target.")
    center = _vector(v.get("center", [0] * d), "target.center", d, as_rational)
    radii = v.get("radii")
    if not isinstance(radii, dict):
        raise ConfigError("target.radii", "expected an object")
    kind = radii.get("kind")
    try:
        if kind == "constant":
            check_keys(radii, {"kind", "values"}, "target.radii.")
            t = TargetSpec.constant(center, _vector(radii.get("values"), "target.radii.values", d, as_rational))
        elif kind == "power":
            check_keys(radii, {"kind", "c", "exponent"}, "target.radii.")
            c = _vector(radii.get("c", 1), "target.radii.c", d, as_rational)
            e = _vector(radii.get("exponent", 0), "target.radii.exponent", d, as_rational)
            t = TargetSpec.power(center, c, e)
        elif kind == "table":
            check_keys(radii, {"kind", "values"}, "target.radii.")
            rows = radii.get("values")
            if not isinstance(rows, list) or not rows:
                raise ConfigError("target.radii.values", "expected a non-empty list")
            t = TargetSpec.table(center, [_vector(r, "target.radii.values", d, as_rational) for r in rows])
        else:
            raise ConfigError("target.radii.kind", "expected 'constant', 'power' or 'table'")
        t.radii(1)
    except ConfigError:
        raise
    except (ValueError, IndexError) as exc:
        raise ConfigError("target.radii", str(exc)) from None
    if v.get("tau") is not None:
        tau = as_rational(v["tau"], "target.tau")
        if not tau > 1:
            raise ConfigError("target.tau", "must exceed 1")
        t = regularize_radii(t, tau if tau.denominator == 1 else float(tau))
    return t


def parse_schedule(v: Any, d: int) -> ApproxParams:
    if v is None:
        return ApproxParams("overlap", d)
    if not isinstance(v, dict):
        raise ConfigError("schedule", "expected an object")
    check_keys(v, {"mode", "xi", "delta"}, "schedule.")
    try:
        return ApproxParams(v.get("mode", "overlap"), d, as_real(v.get("xi", 0.1), "schedule.xi"),
                            None if v.get("delta") is None else as_real(v["delta"], "schedule.delta"))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("schedule", str(exc)) from None


def experiment_config(data: dict, command: str, seed: int | None = None, threads: int = 1) -> ExperimentConfig:
    check_keys(data, COMMAND_KEYS[command])
    measure = parse_measure(data)
    d = measure.dim
    if "sequence" not in data:
        raise ConfigError("sequence", "missing")
    if "target" not in data:
        raise ConfigError("target", "missing")
    seq = parse_sequence(data["sequence"], d)
    target = parse_target(data["target"], d)
    N = as_int(data.get("N"), "N", lo=1) if "N" in data else None
    if N is None:
        raise ConfigError("N", "missing")
    if seq.length is not None and seq.length < N:
        raise ConfigError("sequence.matrices", f"list has {seq.length} matrices but N = {N}")
    try:
        target.radii(N)
    except (ValueError, IndexError) as exc:
        raise ConfigError("target.radii", str(exc)) from None
    cfg = ExperimentConfig(
        measure=measure,
        sequence=seq,
        target=target,
        N=N,
        samples=as_int(data.get("samples", 100), "samples", lo=1),
        seed=seed if seed is not None else as_int(data.get("seed", 0), "seed", lo=0),
        precision_bits=None if data.get("precision_bits") is None else as_int(data["precision_bits"], "precision_bits", lo=1),
        precision_override=as_bool(data.get("precision_override", False), "precision_override"),
        schedule=parse_schedule(data.get("schedule"), d),
        err_exponent=None if data.get("err_exponent") is None else as_real(data["err_exponent"], "err_exponent"),
        log_power=as_real(data.get("log_power", 2.5), "log_power"),
        threads=max(1, threads if threads else as_int(data.get("threads", 1), "threads", lo=1)),
    )
    return cfg


def parse_k_list(v: Any, d: int) -> list[tuple]:
    if v is None:
        raise ConfigError("k", "missing")
    if not isinstance(v, list) or not v:
        raise ConfigError("k", "expected a non-empty list of integer vectors")
    if not isinstance(v[0], list):
        v = [v] if d > 1 else [[x] for x in v]
    out = []
    for vec in v:
        k = tuple(_vector(vec, "k", d, as_int))
        if all(x == 0 for x in k):
            raise ConfigError("k", "the zero frequency is not allowed")
        out.append(k)
    return out


def parse_grid(v: Any) -> list:
    if v is None:
        v = {"kind": "geometric", "start": 2, "stop": 10**6, "points": 60}
    if isinstance(v, list):
        return [as_rational(x, "grid") if not isinstance(x, float) else float(x) for x in v]
    if not isinstance(v, dict):
        raise ConfigError("grid", "expected a list or an object")
    kind = v.get("kind")
    if kind == "geometric":
        check_keys(v, {"kind", "start", "stop", "points"}, "grid.")
        a, b = as_real(v.get("start", 2), "grid.start"), as_real(v.get("stop", 1e6), "grid.stop")
        n = as_int(v.get("points", 60), "grid.points", lo=2)
        if not 0 < a < b:
            raise ConfigError("grid", "need 0 < start < stop")
        return [a * (b / a) ** (i / (n - 1)) for i in range(n)]
    if kind == "powers":
        check_keys(v, {"kind", "base", "start", "stop"}, "grid.")
        base = as_int(v.get("base", 3), "grid.base", lo=2)
        lo, hi = as_int(v.get("start", 1), "grid.start", lo=0), as_int(v.get("stop", 30), "grid.stop")
        return [base**j for j in range(lo, hi + 1)]
    raise ConfigError("grid.kind", "expected 'geometric' or 'powers'")


def check_seed(seed: int) -> int:
    if not 0 <= seed < 2**64:
        raise ConfigError("seed", "must be an unsigned 64-bit integer")
    return seed
