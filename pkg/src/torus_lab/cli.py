"""torus-lab: config-driven experiment runner.

Exit codes: 0 success, 1 check failure, 2 config error, 3 capacity or
precision refusal.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from . import config as C
from .checks import CheckSettings, run_checks
from .errors import CapacityError, ConfigError, PrecisionError
from .measures import decay_fit
from .report import (
    FIT_HEADER,
    PAIRS_HEADER,
    SAMPLES_HEADER,
    RunWriter,
    check_manifest,
    csv_bytes,
    loglog_svg,
)
from .stats import (
    counting_experiment,
    del_series_term,
    dichotomy_experiment,
    pair_correlation,
    sample_seed,
    weyl_sum,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_REFUSED = 0, 1, 2, 3
COMMANDS = ("verify-lemmas", "count", "weyl", "decay", "dichotomy", "pairs")
PLOT_FLOOR = 0.5


def _threads(args) -> int:
    if args.threads:
        return args.threads
    env = os.environ.get("TORUS_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("TORUS_LAB_THREADS", f"expected an integer, got {env!r}") from None
    return 0


def _records_rows(records):
    return [(r.sample_id, r.seed, r.N, r.R, r.Psi, r.err, r.normalized_err) for r in records]


# ---------------------------------------------------------------------------
# commands


def cmd_count(args, data: dict, raw: bytes) -> int:
    cfg = C.experiment_config(data, "count", args.seed, _threads(args))
    cfg.check_precision()
    planned = ["samples.csv", "fit.csv", "variance.csv"] + (["counting.svg"] if args.plot else [])
    w = RunWriter(args.out, "count", raw, cfg.seed, planned)
    res = counting_experiment(cfg)
    w.write("samples.csv", csv_bytes(SAMPLES_HEADER, _records_rows(res.records)))
    fit_rows = [] if res.fit is None else [(res.fit.slope, res.fit.intercept, res.fit.r_squared, res.fit.n_points)]
    w.write("fit.csv", csv_bytes(FIT_HEADER, fit_rows))
    w.write("variance.csv", csv_bytes(["n", "Psi", "phi_sum", "mean_sq_err", "ratio"],
                                      [(b["n"], b["Psi"], b["phi_sum"], b["mean_sq_err"], b["ratio"])
                                       for b in res.variance_budget]))
    if args.plot:
        series = [[(p, max(e, PLOT_FLOOR)) for p, e in zip(res.psi_at, curve)] for curve in res.curves]
        svg = loglog_svg(series, cfg.dim / (cfg.dim + 1), title=f"counting error, d={cfg.dim}, N={cfg.N}")
        w.write("counting.svg", svg.encode("utf-8"))
    w.finish()
    if res.fit is not None:
        print(f"fit slope {res.fit.slope:.4f} over {res.fit.n_points} checkpoints; Psi(N) = {res.records[0].Psi:.6g}")
    else:
        print("too few checkpoints for a fit (need N >= 2^9.5 with Psi > 1)")
    return EXIT_OK


def cmd_weyl(args, data: dict, raw: bytes) -> int:
    cfg = C.experiment_config({k: v for k, v in data.items() if k not in ("k", "del_N")}, "count",
                              args.seed, _threads(args))
    C.check_keys(data, C.COMMAND_KEYS["weyl"])
    ks = C.parse_k_list(data.get("k"), cfg.dim)
    has_support = cfg.measure.integer_support is not None
    del_N = C.as_int(data.get("del_N", cfg.N if has_support else min(cfg.N, 200)), "del_N", lo=1)
    cfg.check_precision()
    w = RunWriter(args.out, "weyl", raw, cfg.seed, ["weyl.csv", "del.csv"])
    rows = []
    bound = 3 / math.sqrt(cfg.N)
    for sid in range(cfg.samples):
        s = sample_seed(cfg.seed, sid)
        x = cfg.measure.sample(s, cfg.bits)
        for k in ks:
            S = weyl_sum(x, cfg.sequence, k, cfg.N)
            rows.append((sid, s, cfg.N, ";".join(map(str, k)), S.real, S.imag, abs(S), bound))
    w.write("weyl.csv", csv_bytes(["sample_id", "seed", "N", "k", "re", "im", "abs", "clt_bound"], rows))
    drows = [(";".join(map(str, k)), del_N, del_series_term(cfg.measure, cfg.sequence, k, del_N), 1 / del_N**2)
             for k in ks]
    w.write("del.csv", csv_bytes(["k", "N", "value", "diagonal"], drows))
    w.finish()
    for k in ks:
        vals = sorted(r[6] for r in rows if r[3] == ";".join(map(str, k)))
        print(f"k={k}: median |S_N| = {vals[len(vals) // 2]:.4g}, fraction <= 3/sqrt(N): "
              f"{sum(v <= bound for v in vals) / len(vals):.2f}")
    return EXIT_OK


def cmd_decay(args, data: dict, raw: bytes) -> int:
    C.check_keys(data, C.COMMAND_KEYS["decay"])
    m = C.parse_measure(data)
    grid = C.parse_grid(data.get("grid"))
    model = data.get("model", "both")
    if model not in ("polylog", "polynomial", "both"):
        raise ConfigError("model", "expected 'polylog', 'polynomial' or 'both'")
    direction = data.get("direction")
    if direction is not None:
        direction = [C.as_real(v, "direction") for v in C._vector(direction, "direction", m.dim, lambda v, f: v)]
    models = ["polylog", "polynomial"] if model == "both" else [model]
    w = RunWriter(args.out, "decay", raw, data.get("seed"), ["decay.csv"])
    rows = []
    for mod in models:
        try:
            f = decay_fit(m, grid, mod, direction)
        except ValueError as exc:
            raise ConfigError("grid", str(exc)) from None
        rows.append((m.name, mod, f.slope, f.intercept, f.r_squared, f.n_points, f.degenerate, f.notice))
        print(f"{m.name} {mod}: slope {f.slope:.4g}" + (f" ({f.notice})" if f.degenerate else ""))
    w.write("decay.csv", csv_bytes(["measure", "model", "slope", "intercept", "r_squared", "n_points",
                                    "degenerate", "notice"], rows))
    w.finish()
    return EXIT_OK


def cmd_dichotomy(args, data: dict, raw: bytes) -> int:
    base = {k: v for k, v in data.items() if k not in ("regime", "n0")}
    C.check_keys(data, C.COMMAND_KEYS["dichotomy"])
    cfg = C.experiment_config(base, "count", args.seed, _threads(args))
    regime = data.get("regime")
    if regime not in ("convergent", "divergent"):
        raise ConfigError("regime", "expected 'convergent' or 'divergent'")
    if data.get("n0") is not None:
        cfg.n0 = C.as_int(data["n0"], "n0", lo=1)
    cfg.check_precision()
    w = RunWriter(args.out, "dichotomy", raw, cfg.seed, ["samples.csv", "last_hits.csv", "dichotomy.csv"])
    res = dichotomy_experiment(cfg, regime)
    w.write("samples.csv", csv_bytes(SAMPLES_HEADER, _records_rows(res.records)))
    w.write("last_hits.csv", csv_bytes(["sample_id", "last_hit"],
                                       [(r.sample_id, h) for r, h in zip(res.records, res.last_hits)]))
    w.write("dichotomy.csv", csv_bytes(
        ["regime", "N", "Psi", "max_R", "median_ratio", "n0", "fraction_settled", "verdict"],
        [(res.regime, cfg.N, res.Psi, res.max_R, res.median_ratio, res.n0, res.fraction_settled, res.verdict)]))
    w.finish()
    print(f"{res.verdict}: max R = {res.max_R}, median R/Psi = {res.median_ratio:.4g}, "
          f"settled by n0={res.n0}: {res.fraction_settled:.2f}")
    return EXIT_OK


def _parse_pairs(v) -> list[tuple[int, int]]:
    if isinstance(v, dict):
        C.check_keys(v, {"kind", "max", "min_gap"}, "pairs.")
        if v.get("kind") != "all":
            raise ConfigError("pairs.kind", "expected 'all'")
        top = C.as_int(v.get("max", 64), "pairs.max", lo=2)
        gap = C.as_int(v.get("min_gap", 1), "pairs.min_gap", lo=0)
        return [(a, b) for b in range(1, top + 1) for a in range(1, b + 1) if b - a >= gap]
    if not isinstance(v, list) or not v:
        raise ConfigError("pairs", "expected a list of [m, n] pairs or {\"kind\": \"all\", ...}")
    out = []
    for p in v:
        if not isinstance(p, list) or len(p) != 2:
            raise ConfigError("pairs", f"bad pair {p!r}")
        out.append((C.as_int(p[0], "pairs", lo=1), C.as_int(p[1], "pairs", lo=1)))
    return out


def cmd_pairs(args, data: dict, raw: bytes) -> int:
    C.check_keys(data, C.COMMAND_KEYS["pairs"])
    pairs = _parse_pairs(data.get("pairs"))
    base = {k: v for k, v in data.items() if k != "pairs"}
    base.setdefault("N", max(max(p) for p in pairs))
    cfg = C.experiment_config(base, "count", args.seed, _threads(args))
    if cfg.samples < 10**4:
        raise ConfigError("samples", "pairs needs at least 10^4 samples")
    if max(max(p) for p in pairs) > cfg.N:
        raise ConfigError("pairs", "pair index exceeds N")
    w = RunWriter(args.out, "pairs", raw, cfg.seed, ["pairs.csv", "pairs_summary.csv"])
    rows = pair_correlation(cfg.measure, cfg.sequence, cfg.target, pairs, cfg.samples, cfg.seed)
    w.write("pairs.csv", csv_bytes(PAIRS_HEADER, [(r.m, r.n, r.estimate, r.radius, r.psi_product, r.ratio)
                                                  for r in rows]))
    off = [r for r in rows if r.m < r.n]
    top = max(r.n for r in rows)
    psi_sum = math.fsum(float(cfg.target.psi(n)) for n in range(1, top + 1))
    total = math.fsum(r.estimate for r in off)
    half_sq = 0.5 * psi_sum**2
    w.write("pairs_summary.csv", csv_bytes(["pairs", "sum_estimates", "half_psi_sum_squared", "ratio"],
                                           [(len(off), total, half_sq, total / half_sq if half_sq else math.nan)]))
    w.finish()
    print(f"{len(rows)} pairs; off-diagonal sum {total:.6g} vs (1/2)(sum psi)^2 = {half_sq:.6g}")
    return EXIT_OK


def cmd_verify_lemmas(args, data: dict | None, raw: bytes | None) -> int:
    s = CheckSettings()
    if data is not None:
        C.check_keys(data, C.COMMAND_KEYS["verify-lemmas"])
        for key in ("seed", "trials", "dmax", "detmax"):
            if key in data:
                setattr(s, key, C.as_int(data[key], key, lo=0))
        for key in ("exp_sum_tol", "quad_rel_tol", "parseval_tol", "kernel_bound"):
            if key in data:
                setattr(s, key, C.as_real(data[key], key))
        if "l1_ratio_range" in data:
            lo, hi = C._vector(data["l1_ratio_range"], "l1_ratio_range", 2, C.as_real)
            s.l1_ratio_range = (lo, hi)
    for key in ("seed", "trials", "dmax", "detmax"):
        v = getattr(args, key, None)
        if v is not None:
            setattr(s, key, v)
    if s.dmax < 1:
        raise ConfigError("dmax", "must be >= 1")
    if s.detmax < 1:
        raise ConfigError("detmax", "must be >= 1")
    rows = list(run_checks(s))
    failed = [r for r in rows if not r.passed]
    if args.out:
        w = RunWriter(args.out, "verify-lemmas", raw or json.dumps(vars(s), default=str).encode(), s.seed,
                      ["checks.csv"])
        w.write("checks.csv", csv_bytes(["family", "trial", "status", "detail"],
                                        [(r.family, r.trial, r.status, r.detail_json()) for r in rows]))
        w.finish()
    families = sorted({r.family for r in rows})
    for fam in families:
        fr = [r for r in rows if r.family == fam]
        print(f"{fam}: {sum(r.passed for r in fr)}/{len(fr)} passed")
    for r in failed[:10]:
        print(f"FAILED {r.family} trial {r.trial}: {r.detail_json()}", file=sys.stderr)
    print(f"{len(families)} check families, {len(rows)} checks, {len(failed)} failures")
    return EXIT_FAIL if failed else EXIT_OK


HANDLERS = {
    "count": cmd_count,
    "weyl": cmd_weyl,
    "decay": cmd_decay,
    "dichotomy": cmd_dichotomy,
    "pairs": cmd_pairs,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="torus-lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, required=name != "verify-lemmas")
        sp.add_argument("--out", type=Path, required=name != "verify-lemmas")
        sp.add_argument("--plot", action="store_true", help="also write an SVG (count only)")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed (unsigned 64-bit)")
        sp.add_argument("--threads", type=int, default=None, help="worker threads (env TORUS_LAB_THREADS)")
        sp.add_argument("--check", action="store_true",
                        help="verify an existing results directory against the config instead of running")
        if name == "verify-lemmas":
            sp.add_argument("--trials", type=int, default=None)
            sp.add_argument("--dmax", type=int, default=None)
            sp.add_argument("--detmax", type=int, default=None)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None:
            C.check_seed(args.seed)
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads", "must be >= 1")
        data = raw = None
        if args.config is not None:
            try:
                data, raw = C.load_json(args.config)
            except OSError as exc:
                raise ConfigError("--config", str(exc)) from None
        if args.check:
            if raw is None or args.out is None:
                raise ConfigError("--check", "needs --config and --out")
            problems = check_manifest(args.out, raw)
            for msg in problems:
                print(msg, file=sys.stderr)
            print("manifest consistent" if not problems else "manifest check failed")
            return EXIT_FAIL if problems else EXIT_OK
        if args.command == "verify-lemmas":
            return cmd_verify_lemmas(args, data, raw)
        return HANDLERS[args.command](args, data, raw)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CapacityError, PrecisionError) as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED


if __name__ == "__main__":
    sys.exit(main())
