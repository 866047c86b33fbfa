"""Command-line harness: configuration, ingestion, experiments, plot data.

Every command reads a single JSON config, derives all randomness from one
master seed, and stamps its primary output with the seed and a hash of the
canonical config, so a run can be reproduced byte-for-byte from its own
header.  ``--threads`` only changes how replicate chunks are scheduled;
results are identical for any value.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from typing import Optional

import numpy as np

from . import __version__, rng as _rng
from .bootstrap import BootstrapConfig, confidence_interval, coverage_experiment
from .coupling import estimate_beta
from .errors import ConfigError, DataError, NumericError
from .estimation import asymptotic_sigma2, t_statistic, theta_bar_mc, theta_hat
from .innovations import compute_constants, innovation_from_json, innovation_to_json, tv_bound_check
from .process import ExogenousSpec, ModelParams, simulate, validate

SCHEMA = "logcount/v1"


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

def _load_config(path: Optional[str]) -> dict:
    if path is None:
        raise ConfigError("--config is required for this command")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    schema = cfg.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise ConfigError(f"unsupported config schema {schema!r}; expected {SCHEMA!r}")
    return cfg


def _require_keys(cfg: dict, required: set[str], optional: set[str], where: str):
    keys = set(cfg)
    missing = required - keys
    unknown = keys - required - optional - {"schema", "seed"}
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def _model_from_config(obj) -> ModelParams:
    if not isinstance(obj, dict):
        raise ConfigError("'model' must be an object")
    _require_keys(obj, {"a", "b", "c", "innovation"}, {"sigma0", "exogenous"}, "model")
    exo = obj.get("exogenous", {"kind": "trend"})
    if not isinstance(exo, dict) or "kind" not in exo:
        raise ConfigError("'exogenous' must be an object with a 'kind' key")
    exo_spec = ExogenousSpec(**exo)
    return ModelParams(
        a=float(obj["a"]),
        b=float(obj["b"]),
        c=float(obj["c"]),
        innovation=innovation_from_json(obj["innovation"]),
        sigma0=float(obj.get("sigma0", 1.0)),
        exogenous=exo_spec,
    )


def _model_to_json(params: ModelParams) -> dict:
    out = {
        "a": params.a, "b": params.b, "c": params.c, "sigma0": params.sigma0,
        "innovation": innovation_to_json(params.innovation),
    }
    if params.exogenous.kind != "trend":
        out["exogenous"] = {
            "kind": params.exogenous.kind,
            "family": params.exogenous.family,
            "mean": params.exogenous.mean,
            "sd": params.exogenous.sd,
            "half_width": params.exogenous.half_width,
        }
    return out


def _canonical(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def _seed_of(args, cfg: dict) -> int:
    if args.seed is not None:
        return args.seed
    seed = cfg.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("config 'seed' must be a non-negative integer")
    return seed


def _fmt(v) -> str:
    """Shortest round-trip formatting; integral floats print as integers."""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    f = float(v)
    if math.isfinite(f) and f == int(f) and abs(f) < 2**53:
        return str(int(f))
    return repr(f)


def _header_lines(command: str, seed: int, cfg: dict, extra: Optional[dict] = None) -> list[str]:
    canon = _canonical(cfg)
    digest = hashlib.sha256(canon.encode()).hexdigest()
    lines = [
        f"# logcount-output: {SCHEMA}",
        f"# command: {command}",
        f"# master_seed: {seed}",
        f"# config_sha256: {digest}",
        f"# config: {canon}",
    ]
    for k, v in (extra or {}).items():
        lines.append(f"# {k}: {v}")
    return lines


def _write_csv(path: Optional[str], header_lines: list[str], columns: list[str], rows):
    out = []
    out.extend(header_lines)
    out.append(",".join(columns))
    for row in rows:
        out.append(",".join(_fmt(v) for v in row))
    text = "\n".join(out) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _write_json(path: Optional[str], payload: dict):
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _json_payload(command: str, seed: int, cfg: dict, result: dict) -> dict:
    canon = _canonical(cfg)
    return {
        "schema": SCHEMA,
        "command": command,
        "master_seed": seed,
        "config_sha256": hashlib.sha256(canon.encode()).hexdigest(),
        "config": cfg,
        "result": result,
    }


def _read_counts(path: str) -> np.ndarray:
    """One count per row; optional single header line; comments allowed."""
    values = []
    header_allowed = True
    try:
        fh = open(path, "r", encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"data file not found: {path}") from None
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                val = float(line)
            except ValueError:
                if header_allowed and not values:
                    header_allowed = False
                    continue  # single leading header row
                raise DataError(f"row {lineno}: not a number: {line!r}") from None
            header_allowed = False
            if val < 0:
                raise DataError(f"row {lineno}: negative count {line!r}")
            if val != math.floor(val):
                raise DataError(f"row {lineno}: non-integer count {line!r}")
            values.append(val)
    if len(values) < 2:
        raise DataError(f"need at least 2 counts, found {len(values)} in {path}")
    return np.asarray(values, dtype=float)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    _require_keys(cfg, {"model", "n"}, set(), "simulate config")
    params = _model_from_config(cfg["model"])
    n = int(cfg["n"])
    seed = _seed_of(args, cfg)
    traj = simulate(params, n, seed)
    fit_info = ""
    if n >= 2:
        fit_info = f", theta_hat={theta_hat(traj.counts()).theta_hat:.6g}"
    rows = zip(range(n + 1), traj.sigma, traj.x, traj.c_exo)
    _write_csv(args.out, _header_lines("simulate", seed, cfg),
               ["t", "sigma", "x", "c_exo"], rows)
    print(f"simulate: n={n}, final sigma={traj.sigma[-1]:.6g}, "
          f"max x={int(traj.x.max())}{fit_info}", file=sys.stderr)
    return 0


def cmd_fit(args) -> int:
    cfg = _load_config(args.config)
    _require_keys(cfg, {"data"}, {"model", "theta_bar", "curve_out"}, "fit config")
    seed = _seed_of(args, cfg)
    x = _read_counts(cfg["data"])
    fit = theta_hat(x)
    result = {"theta_hat": fit.theta_hat, "n": fit.n,
              "weights_denominator": fit.weights_denominator}
    if "model" in cfg:
        params = _model_from_config(cfg["model"])
        result["sigma2_asymptotic"] = asymptotic_sigma2(params)
    if "theta_bar" in cfg:
        result["t_statistic"] = t_statistic(fit, float(cfg["theta_bar"]))
    if "curve_out" in cfg:
        t = np.arange(1, fit.n + 1, dtype=float)
        curve = t ** fit.theta_hat
        _write_csv(cfg["curve_out"], _header_lines("fit", seed, cfg),
                   ["t", "x", "trend"], zip(t, x, curve))
        result["curve_out"] = cfg["curve_out"]
    _write_json(args.out, _json_payload("fit", seed, cfg, result))
    return 0


def _bootstrap_from_config(obj) -> BootstrapConfig:
    if not isinstance(obj, dict):
        raise ConfigError("'bootstrap' must be an object")
    _require_keys(obj, {"l_n", "N_n", "B", "alpha"}, set(), "bootstrap config")
    return BootstrapConfig(l_n=float(obj["l_n"]), N_n=int(obj["N_n"]),
                           B=int(obj["B"]), alpha=float(obj["alpha"]))


def cmd_ci(args) -> int:
    cfg = _load_config(args.config)
    _require_keys(cfg, {"data", "bootstrap"}, set(), "ci config")
    seed = _seed_of(args, cfg)
    x = _read_counts(cfg["data"])
    bcfg = _bootstrap_from_config(cfg["bootstrap"])
    ci = confidence_interval(x, bcfg, seed)
    result = {
        "theta_hat": ci.theta_hat,
        "u_star": ci.u_star,
        "half_width": ci.half_width,
        "lower": ci.lower,
        "upper": ci.upper,
        "level": ci.level,
        "n": len(x),
    }
    _write_json(args.out, _json_payload("ci", seed, cfg, result))
    return 0


def cmd_mc_boxplot(args) -> int:
    from .estimation import ensemble_theta_hats

    cfg = _load_config(args.config)
    _require_keys(cfg, {"model", "n", "replicates"}, {"theta_bar_loops"}, "mc-boxplot config")
    params = _model_from_config(cfg["model"])
    seed = _seed_of(args, cfg)
    n_list = cfg["n"] if isinstance(cfg["n"], list) else [cfg["n"]]
    replicates = int(cfg["replicates"])
    if replicates < 100:
        raise ConfigError(f"mc-boxplot needs at least 100 replicates, got {replicates}")
    tb_loops = int(cfg.get("theta_bar_loops", 20_000))
    rows = []
    summary = {}
    for ni, n in enumerate(int(v) for v in n_list):
        tb = theta_bar_mc(params, n, tb_loops, _rng.derive_seed(seed, _rng.NS_TARGET, ni),
                          threads=args.threads)
        thetas = ensemble_theta_hats(params, n, replicates, _rng.derive_seed(seed, _rng.NS_SIM, ni),
                                     threads=args.threads)
        q1, med, q3 = np.percentile(thetas, [25, 50, 75])
        lo_wh = float(thetas[thetas >= q1 - 1.5 * (q3 - q1)].min())
        hi_wh = float(thetas[thetas <= q3 + 1.5 * (q3 - q1)].max())
        summary[n] = (tb.theta_bar, q1, med, q3, lo_wh, hi_wh)
        rows.extend((n, r, th) for r, th in enumerate(thetas))
    extra = {}
    for n, (tb_val, q1, med, q3, lo_wh, hi_wh) in summary.items():
        extra[f"summary_n{n}"] = (
            f"theta_bar={tb_val!r} q1={q1!r} median={med!r} q3={q3!r} "
            f"whisker_low={lo_wh!r} whisker_high={hi_wh!r}"
        )
    _write_csv(args.out, _header_lines("mc-boxplot", seed, cfg, extra),
               ["n", "replicate", "theta_hat"], rows)
    for n, (tb_val, q1, med, q3, *_ ) in summary.items():
        print(f"mc-boxplot n={n}: theta_bar={tb_val:.5f} median={med:.5f} IQR={q3 - q1:.5f}",
              file=sys.stderr)
    return 0


def cmd_mixing(args) -> int:
    cfg = _load_config(args.config)
    _require_keys(cfg, {"model", "k", "replicates"},
                  {"n_max", "n_grid", "R"}, "mixing config")
    params = _model_from_config(cfg["model"])
    seed = _seed_of(args, cfg)
    if "n_grid" in cfg:
        n_grid = [int(v) for v in cfg["n_grid"]]
    elif "n_max" in cfg:
        n_grid = list(range(1, int(cfg["n_max"]) + 1))
    else:
        raise ConfigError("mixing config needs 'n_grid' or 'n_max'")
    truncation = int(cfg.get("R", 50))
    res = estimate_beta(params, int(cfg["k"]), n_grid, truncation,
                        int(cfg["replicates"]), seed, threads=args.threads)
    slope = res.log_slope()
    extra = {
        "replicates": res.replicates,
        "k": res.k,
        "R": res.truncation,
        "log_slope": "nan" if slope is None else repr(slope),
    }
    rows = zip(res.horizons, res.beta_hat, res.stderr, res.theorem_bound, res.truncation_bound)
    _write_csv(args.out, _header_lines("mixing", seed, cfg, extra),
               ["n", "beta_hat", "stderr", "theorem_bound", "truncation_bound"], rows)
    print(f"mixing: k={res.k} R={res.truncation} replicates={res.replicates} "
          f"log_slope={slope}", file=sys.stderr)
    return 0


def cmd_coverage(args) -> int:
    cfg = _load_config(args.config)
    _require_keys(cfg, {"a", "b", "c", "innovations", "n", "cells", "alphas",
                        "mc_loops", "B"},
                  {"sigma0", "theta_bar_loops"}, "coverage config")
    seed = _seed_of(args, cfg)
    cells = [(float(l), int(w)) for l, w in cfg["cells"]]
    alphas = [float(a) for a in cfg["alphas"]]
    rows = []
    for fi, innov_obj in enumerate(cfg["innovations"]):
        innov = innovation_from_json(innov_obj)
        params = ModelParams(a=float(cfg["a"]), b=float(cfg["b"]), c=float(cfg["c"]),
                             innovation=innov, sigma0=float(cfg.get("sigma0", 1.0)))
        res = coverage_experiment(
            params, int(cfg["n"]), cells, alphas,
            mc_loops=int(cfg["mc_loops"]), B=int(cfg["B"]),
            master_seed=_rng.derive_seed(seed, _rng.NS_SIM, fi),
            theta_bar_loops=int(cfg.get("theta_bar_loops", 20_000)),
            threads=args.threads,
        )
        rows.extend((c.l_n, c.N_n, innov.family, c.alpha, c.coverage, c.mc_loops, c.B)
                    for c in res)
    _write_csv(args.out, _header_lines("coverage", seed, cfg),
               ["l_n", "N_n", "family", "alpha", "coverage", "mc_loops", "B"], rows)
    return 0


def cmd_tv_check(args) -> int:
    cfg = _load_config(args.config)
    _require_keys(cfg, {"sigmas"}, {"innovation", "innovations"}, "tv-check config")
    seed = _seed_of(args, cfg)
    if "innovations" in cfg:
        innov_objs = cfg["innovations"]
    elif "innovation" in cfg:
        innov_objs = [cfg["innovation"]]
    else:
        raise ConfigError("tv-check config needs 'innovation' or 'innovations'")
    sigmas = [float(s) for s in cfg["sigmas"]]
    rows = []
    for obj in innov_objs:
        spec = innovation_from_json(obj)
        report = tv_bound_check(spec, sigmas)
        rows.extend((spec.family, r.sigma, r.sigma_prime, r.tv, r.bound, r.slack)
                    for r in report.rows)
        print(f"tv-check {spec.family}: pairs={len(report.rows)} "
              f"min_slack={report.min_slack:.3g}", file=sys.stderr)
    _write_csv(args.out, _header_lines("tv-check", seed, cfg),
               ["family", "sigma", "sigma_prime", "tv", "bound", "slack"], rows)
    return 0


def cmd_constants(args) -> int:
    cfg = _load_config(args.config)
    _require_keys(cfg, {"innovation"}, set(), "constants config")
    seed = _seed_of(args, cfg)
    spec = innovation_from_json(cfg["innovation"])
    c = compute_constants(spec)
    result = {
        "family": spec.family,
        "monotone_density": bool(spec.monotone_density),
        "gamma": c.gamma,
        "big_gamma": c.big_gamma,
        "p_sup": c.p_sup,
        "e_ln_plus": c.e_ln_plus,
        "var_ln_y": c.var_ln_y,
    }
    _write_json(args.out, _json_payload("constants", seed, cfg, result))
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "ci": cmd_ci,
    "mc-boxplot": cmd_mc_boxplot,
    "mixing": cmd_mixing,
    "coverage": cmd_coverage,
    "tv-check": cmd_tv_check,
    "constants": cmd_constants,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logcount",
        description="Simulation and inference for explosive log-linear count series.",
    )
    parser.add_argument("--version", action="version", version=f"logcount {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", help="path to the JSON run configuration")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (overrides the config's 'seed')")
        p.add_argument("--out", default=None, help="output path (stdout if omitted)")
        p.add_argument("--threads", type=int, default=1,
                       help="worker processes; affects speed only, never results")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be non-negative", file=sys.stderr)
        return 2
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
