"""Command-line entry point.

Subcommands: simulate, excursions, construct, verify, report. Configuration
comes from an optional flat JSON file plus flag overrides; the master seed is
recorded in every output, outputs are written atomically, and exit codes are
0 (all checks pass), 1 (verification failure), 2 (invalid configuration),
3 (numerical failure).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import excursions as exc
from . import signs as sgn
from . import verify as vfy
from .paths import (
    OddPiecewiseCoefficient,
    SamplePath,
    StepCoefficient,
    reflect_skorokhod,
    sample_brownian,
    euler_sde,
    write_csv,
    write_xpth,
)

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_BAD_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


def _atomic_write(path: str, write_fn, binary: bool = False) -> None:
    """Write via temp file + rename so interrupts never leave partial files."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".exlab-tmp-")
    try:
        with os.fdopen(fd, "wb" if binary else "w") as fp:
            write_fn(fp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="exlab")
    parser.add_argument("--config", help="flat JSON config file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--dt", type=float, default=None)
        p.add_argument("--horizon", type=float, default=None)
        p.add_argument("--paths", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--format", choices=["csv", "json", "binary"], default=None)
        p.add_argument("-a", type=float, default=None)
        p.add_argument("-b", type=float, default=None)
        p.add_argument("--levels", default=None, help="comma-separated |σ| levels")
        p.add_argument("--breakpoints", default=None, help="comma-separated breakpoints")
        p.add_argument("--alpha", type=float, default=None)
        p.add_argument("--p", type=float, default=None)
        p.add_argument("--eps", type=float, default=None)
        p.add_argument("--delta-min", dest="delta_min", type=float, default=None)

    p_sim = sub.add_parser("simulate", help="generate a path")
    p_sim.add_argument("--what", choices=["brownian", "reflected", "skew", "sde"],
                       default=None)
    common(p_sim)

    p_exc = sub.add_parser("excursions", help="extract excursion intervals of a reflected path")
    common(p_exc)

    p_con = sub.add_parser("construct", help="build a signed solution")
    p_con.add_argument("--theorem", type=int, choices=[1, 2], default=None)
    common(p_con)

    p_ver = sub.add_parser("verify", help="run a verification suite")
    p_ver.add_argument("--theorem", type=int, choices=[1, 2], default=None)
    p_ver.add_argument("--appendix", action="store_true")
    p_ver.add_argument("--no-rerun", action="store_true",
                       help="disable the single fresh-seed rerun on failure")
    common(p_ver)

    p_rep = sub.add_parser("report", help="merge JSON-lines report files")
    p_rep.add_argument("inputs", nargs="+")
    p_rep.add_argument("--out", default=None)
    return parser


_DEFAULTS = {
    "dt": 1e-4,
    "horizon": 1.0,
    "paths": 1000,
    "workers": 1,
    "format": "csv",
    "what": "brownian",
    "delta_min": None,
    "alpha": None,
    "p": None,
}


def _load_config(args) -> dict:
    cfg = dict(_DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fp:
                cfg.update(json.load(fp))
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config file: {err}") from err
    for key, val in vars(args).items():
        if key in ("config",) or val is None or val is False:
            continue
        cfg[key] = val
    if cfg.get("seed") is None:
        env = os.environ.get("EXLAB_SEED")
        cfg["seed"] = int(env) if env else 0
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    if cfg["dt"] <= 0:
        raise ConfigError(f"invalid parameter dt={cfg['dt']}: must be positive")
    if cfg["horizon"] < 0:
        raise ConfigError(f"invalid parameter horizon={cfg['horizon']}: must be nonnegative")
    if cfg["paths"] <= 0:
        raise ConfigError(f"invalid parameter paths={cfg['paths']}: must be positive")
    if cfg["workers"] <= 0:
        raise ConfigError(f"invalid parameter workers={cfg['workers']}: must be positive")
    if cfg.get("alpha") is not None and not 0.0 <= cfg["alpha"] <= 1.0:
        raise ConfigError(f"invalid parameter alpha={cfg['alpha']}: must lie in [0, 1]")
    if cfg.get("p") is not None and not 0.0 <= cfg["p"] <= 1.0:
        raise ConfigError(f"invalid parameter p={cfg['p']}: must lie in [0, 1]")
    if cfg.get("delta_min") is not None and cfg["delta_min"] < 0:
        raise ConfigError(f"invalid parameter delta-min={cfg['delta_min']}")


def _coefficient(cfg: dict):
    if cfg.get("levels"):
        levels = tuple(float(x) for x in str(cfg["levels"]).split(","))
        bps = tuple(float(x) for x in str(cfg["breakpoints"]).split(",")) \
            if cfg.get("breakpoints") else ()
        try:
            return OddPiecewiseCoefficient(breakpoints=bps, levels=levels)
        except ValueError as err:
            raise ConfigError(f"invalid parameter levels/breakpoints: {err}") from err
    if cfg.get("a") is not None and cfg.get("b") is not None:
        try:
            return StepCoefficient(cfg["a"], cfg["b"], strict=False)
        except ValueError as err:
            raise ConfigError(f"invalid parameter a/b: {err}") from err
    raise ConfigError("missing coefficient: give -a/-b or --levels/--breakpoints")


def _write_path(path_obj: SamplePath, cfg: dict) -> None:
    out = cfg.get("out")
    if not out:
        raise ConfigError("missing parameter --out")
    if cfg["format"] == "binary":
        _atomic_write(out, lambda fp: write_xpth(path_obj, fp), binary=True)
    else:
        _atomic_write(out, lambda fp: write_csv(path_obj, fp))
    print(f"wrote {out} ({len(path_obj)} samples, dt={path_obj.dt}, seed={cfg['seed']})")


def _cmd_simulate(cfg: dict) -> int:
    seed = cfg["seed"]
    B = sample_brownian(seed, cfg["horizon"], cfg["dt"])
    what = cfg.get("what", "brownian")
    if what == "brownian":
        out = B
    elif what == "reflected":
        out, _ = reflect_skorokhod(B)
    elif what == "skew":
        alpha = cfg.get("alpha")
        if alpha is None:
            raise ConfigError("missing parameter --alpha for skew simulation")
        out = sgn.skew_bm(B, alpha, seed + 1)
    elif what == "sde":
        out = euler_sde(_coefficient(cfg), B)
    else:
        raise ConfigError(f"invalid parameter what={what}")
    _write_path(out, cfg)
    return EXIT_OK


def _cmd_excursions(cfg: dict) -> int:
    seed = cfg["seed"]
    B = sample_brownian(seed, cfg["horizon"], cfg["dt"])
    Y, _ = reflect_skorokhod(B)
    delta_min = cfg.get("delta_min")
    if delta_min is None:
        delta_min = 100 * cfg["dt"]
    indexing = exc.extract_indexing(Y, tol=0.0, delta_min=delta_min)
    out = cfg.get("out")
    if not out:
        raise ConfigError("missing parameter --out")
    if cfg["format"] == "json":
        _atomic_write(out, lambda fp: fp.write(exc.indexing_to_json(indexing) + "\n"))
    else:
        _atomic_write(out, lambda fp: exc.indexing_to_csv(indexing, fp))
    print(f"wrote {out} ({len(indexing.intervals)} intervals, "
          f"{indexing.discarded} discarded < {delta_min}, seed={seed})")
    return EXIT_OK


def _cmd_construct(cfg: dict) -> int:
    seed = cfg["seed"]
    B = sample_brownian(seed, cfg["horizon"], cfg["dt"])
    theorem = cfg.get("theorem")
    if theorem == 1:
        coef = _coefficient(cfg)
        if not isinstance(coef, StepCoefficient):
            raise ConfigError("--theorem 1 takes a step coefficient (-a/-b)")
        try:
            sp = sgn.construct_theorem1(B, coef.a, coef.b, sign_seed=seed + 1)
        except ValueError as err:
            raise ConfigError(str(err)) from err
    elif theorem == 2:
        coef = _coefficient(cfg)
        if not isinstance(coef, OddPiecewiseCoefficient):
            raise ConfigError("--theorem 2 takes --levels/--breakpoints")
        sp = sgn.construct_theorem2(B, coef, sign_seed=seed + 1)
    else:
        raise ConfigError("missing parameter --theorem {1,2}")
    out = cfg.get("out")
    if not out:
        raise ConfigError("missing parameter --out")
    _atomic_write(out, sp.export_csv)
    print(f"wrote {out} ({len(sp.X)} samples, seed={seed})")
    return EXIT_OK


def _run_suite(cfg: dict, seed: int) -> list[vfy.VerificationReport]:
    kwargs = dict(n_paths=cfg["paths"], dt=cfg["dt"], master_seed=seed,
                  workers=cfg["workers"])
    if cfg.get("appendix"):
        alpha = cfg.get("alpha")
        if alpha is None:
            raise ConfigError("missing parameter --alpha for the appendix suite")
        return vfy.verify_appendix(alpha, **kwargs)
    theorem = cfg.get("theorem")
    if theorem == 1:
        coef = _coefficient(cfg)
        if not isinstance(coef, StepCoefficient) or not coef.a > 0 > coef.b:
            raise ConfigError("invalid parameter a/b: --theorem 1 needs a > 0 > b")
        return vfy.verify_theorem1(coef.a, coef.b, **kwargs)
    if theorem == 2:
        coef = _coefficient(cfg)
        if not isinstance(coef, OddPiecewiseCoefficient):
            raise ConfigError("--theorem 2 takes --levels/--breakpoints")
        return vfy.verify_theorem2(coef, **kwargs)
    raise ConfigError("missing parameter: --theorem {1,2} or --appendix")


def _cmd_verify(cfg: dict) -> int:
    seed = cfg["seed"]
    reports = _run_suite(cfg, seed)
    # statistical suites carry an inherent false-failure rate near the chosen
    # levels; one rerun with a fresh seed is budgeted before declaring failure
    if not all(r.passed for r in reports) and not cfg.get("no_rerun"):
        fresh = seed + 1
        print(f"suite failed with seed={seed}; rerunning once with seed={fresh}",
              file=sys.stderr)
        reports = _run_suite(cfg, fresh)
    for r in reports:
        print(("PASS" if r.passed else "FAIL") +
              f" {r.name}: statistic={r.statistic:.6g} threshold={r.threshold:.6g} n={r.n}")
    if cfg.get("out"):
        _atomic_write(cfg["out"], lambda fp: vfy.write_reports(reports, fp))
        print(f"wrote {cfg['out']}")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_VERIFY_FAIL


def _cmd_report(cfg: dict, inputs: list[str]) -> int:
    reports: list[vfy.VerificationReport] = []
    warnings = 0
    for name in inputs:
        try:
            with open(name) as fp:
                got, bad = vfy.read_reports(fp)
        except OSError as err:
            raise ConfigError(f"cannot read {name}: {err}") from err
        if bad:
            print(f"warning: {bad} malformed line(s) skipped in {name}", file=sys.stderr)
            warnings += bad
        reports.extend(got)
    if not reports:
        raise ConfigError("no parseable reports in the given files")
    print(vfy.format_table(reports))
    passed = sum(r.passed for r in reports)
    print(f"{passed}/{len(reports)} passed; {warnings} malformed line(s) skipped")
    if cfg.get("out"):
        def write_plot_csv(fp):
            fp.write("name,statistic,threshold,n,passed,seed\n")
            for r in reports:
                fp.write(f"{r.name},{r.statistic!r},{r.threshold!r},{r.n},"
                         f"{int(r.passed)},{r.seed}\n")
        _atomic_write(cfg["out"], write_plot_csv)
        print(f"wrote {cfg['out']}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
        if args.command == "simulate":
            return _cmd_simulate(cfg)
        if args.command == "excursions":
            return _cmd_excursions(cfg)
        if args.command == "construct":
            return _cmd_construct(cfg)
        if args.command == "verify":
            return _cmd_verify(cfg)
        if args.command == "report":
            return _cmd_report(cfg, args.inputs)
        raise ConfigError(f"unknown command {args.command}")
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except (FloatingPointError, np.linalg.LinAlgError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except vfy.InsufficientDataError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
