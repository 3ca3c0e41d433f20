"""Command-line front end.

Subcommands: ``validate``, ``simulate``, ``estimate``, ``asymptotics`` and
``experiment``. Models are read from an INI file::

    [model]
    nu11 = 0.2
    nu22 = 0.7
    nu12 = 0.45
    rho = 0.5

    [experiment]
    n_list = 200, 400, 600, 800, 1000
    R = 300
    m = 50
    kind = gls
    base_seed = 2024

    [output]
    dir = results

Exit codes: 0 ok, 1 configuration or parse error, 2 invalid model,
3 numerical failure, 4 degenerate data.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import asymptotic_law, matern_rate_exponents, phi0_matrix, rate_exponents
from .covariance import (InvalidModelError, MaternModel, MaternParams, check_matern_validity,
                         check_validity, local_expansion, trajectory_dimension)
from .estimator import DegeneratePathError, estimate, gls_weights, ols_weights
from .figures import write_panels
from .montecarlo import ExperimentConfig, ExperimentSummary, ReplicateError, run_experiment
from .simulate import NotPositiveDefiniteError, SeedSpec, read_path_csv, simulate_path, write_paths_csv

EXIT_OK, EXIT_PARSE, EXIT_INVALID, EXIT_NUMERIC, EXIT_DEGENERATE = 0, 1, 2, 3, 4

FULL_SCALE_N = tuple(range(200, 1001, 10))
FULL_SCALE_R = 1000

_MODEL_KEYS = {"nu11", "nu22", "nu12", "a11", "a22", "a12", "sigma1", "sigma2", "rho"}
_EXPERIMENT_KEYS = {"n_list", "r", "m", "kind", "base_seed", "tol", "label"}
_OUTPUT_KEYS = {"dir", "prefix"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    params: MaternParams
    n_list: tuple = (200, 400, 600, 800, 1000)
    R: int = 300
    m: int = 50
    kind: str = "gls"
    base_seed: int = 0
    tol: float = 1e-10
    label: str = ""
    out_dir: Path = field(default_factory=lambda: Path("results"))
    prefix: str = ""


def _get(section, key, conv, where):
    raw = section[key]
    try:
        return conv(raw)
    except ValueError:
        raise ConfigError(f"{where}: [{section.name}] {key} = {raw!r} is not a valid "
                          f"{conv.__name__}") from None


def _int_list(raw: str) -> tuple:
    return tuple(int(v) for v in raw.replace(",", " ").split())


_int_list.__name__ = "list of integers"


def parse_config(text: str, where: str = "<config>") -> RunConfig:
    """Parse INI text into a :class:`RunConfig`; raises :class:`ConfigError`."""
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text, source=where)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    for name, allowed in (("model", _MODEL_KEYS), ("experiment", _EXPERIMENT_KEYS),
                          ("output", _OUTPUT_KEYS)):
        if name in cp:
            unknown = set(cp[name]) - allowed
            if unknown:
                raise ConfigError(f"{where}: unknown key(s) in [{name}]: {', '.join(sorted(unknown))}")
    extra = set(cp.sections()) - {"model", "experiment", "output"}
    if extra:
        raise ConfigError(f"{where}: unknown section(s): {', '.join(sorted(extra))}")
    if "model" not in cp:
        raise ConfigError(f"{where}: missing [model] section")
    mod = cp["model"]
    missing = {"nu11", "nu22", "nu12"} - set(mod)
    if missing:
        raise ConfigError(f"{where}: [model] is missing {', '.join(sorted(missing))}")
    kwargs = {k: _get(mod, k, float, where) for k in mod}
    try:
        params = MaternParams(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: [model] {exc}") from None
    cfg = RunConfig(params=params)
    if "experiment" in cp:
        ex = cp["experiment"]
        if "n_list" in ex:
            cfg.n_list = _get(ex, "n_list", _int_list, where)
        if "r" in ex:
            cfg.R = _get(ex, "r", int, where)
        if "m" in ex:
            cfg.m = _get(ex, "m", int, where)
        if "kind" in ex:
            cfg.kind = ex["kind"].strip().lower()
            if cfg.kind not in ("ols", "gls"):
                raise ConfigError(f"{where}: [experiment] kind must be ols or gls, got {cfg.kind!r}")
        if "base_seed" in ex:
            cfg.base_seed = _get(ex, "base_seed", int, where)
        if "tol" in ex:
            cfg.tol = _get(ex, "tol", float, where)
        cfg.label = ex.get("label", "")
    if "output" in cp:
        out = cp["output"]
        if "dir" in out:
            cfg.out_dir = Path(out["dir"])
        cfg.prefix = out.get("prefix", "")
    return cfg


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, where=str(path))


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: Path | None, name: str):
    sys.stdout.write(text)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text, encoding="utf-8", newline="\n")


def _out_dir(args, cfg: RunConfig | None) -> Path | None:
    if args.out is not None:
        return Path(args.out)
    return cfg.out_dir if cfg is not None else None


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    exp = local_expansion(cfg.params, validate=False)
    print("local expansion:")
    for k, v in exp.to_record().items():
        print(f"  {k} = {v:.6g}")
    rep = check_validity(exp)
    print(f"exponent condition: {'valid' if rep else 'INVALID'}" + ("" if rep else f" ({rep.reason})"))
    spec = check_matern_validity(cfg.params)
    print(f"spectral check: {'valid' if spec else 'INVALID'}" + ("" if spec else f" ({spec.reason})"))
    if exp.is_equality_case:
        case = "equality"
    elif exp.alpha12 > exp.mean_alpha:
        case = "strict"
    else:
        case = "cross exponent below the mean (not admissible)"
    print(f"cross-smoothness case: {case}")
    print(f"trajectory dimension: {trajectory_dimension(exp.alpha11, exp.alpha22):.6g}")
    return EXIT_OK if (rep and spec) else EXIT_INVALID


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    model = MaternModel(cfg.params)
    n = args.n or cfg.n_list[-1]
    seed = cfg.base_seed if args.seed is None else args.seed
    path = simulate_path(model, n, SeedSpec(seed, 0))
    out = Path(args.out) if args.out is not None else cfg.out_dir
    target = out if out.suffix == ".csv" else out / f"path_n{n}_seed{seed}.csv"
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8", newline="") as fh:
        write_paths_csv(path, fh)
    print(f"wrote {target} (n={n}, seed={seed}, jitter={path.jitter:g})")
    for k, x in ((1, path.x1), (2, path.x2)):
        print(f"  x{k}: mean {x.mean():.4f}, sample variance {x.var(ddof=1):.4f}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    try:
        with open(args.path, encoding="utf-8", newline="") as fh:
            path = read_path_csv(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.path}: {exc}") from None
    m = args.m
    if m is not None and path.n < 2 * m + 1:
        raise ConfigError(f"{args.path}: need at least {2 * m + 1} rows for m={m}, got {path.n}")
    est = estimate(path, m, args.kind or "ols")
    _emit(_json(est.to_record()), Path(args.out) if args.out else None, "estimate.json")
    return EXIT_OK


def cmd_asymptotics(args) -> int:
    cfg = load_config(args.config)
    model = MaternModel(cfg.params)
    exp = model.expansion
    m = args.m or cfg.m
    kind = args.kind or cfg.kind
    n_ref = args.n or cfg.n_list[-1]
    phi = phi0_matrix(exp, m, cfg.tol)
    if kind == "gls":
        w1 = gls_weights(m, n_ref, exp.alpha11 / 2)
        w2 = gls_weights(m, n_ref, exp.alpha22 / 2)
    else:
        w1 = w2 = ols_weights(m)
    law = asymptotic_law(exp, w1, w2, phi0=phi)
    rec = {
        "m": m,
        "weights": kind,
        "case": "equality" if exp.is_equality_case else "strict",
        "phi0": phi.to_record(),
        "law": law.to_record(),
        "rates_general": rate_exponents(exp).to_record(),
        "rates_matern": matern_rate_exponents(cfg.params).to_record(),
    }
    _emit(_json(rec), Path(args.out) if args.out else None, "asymptotics.json")
    return EXIT_OK


def _experiment_config(args, cfg: RunConfig) -> ExperimentConfig:
    n_list, R = cfg.n_list, cfg.R
    if args.full_scale:
        n_list, R = FULL_SCALE_N, FULL_SCALE_R
    if args.n:
        n_list = (args.n,)
    if args.reps:
        R = args.reps
    seed = cfg.base_seed if args.seed is None else args.seed
    return ExperimentConfig(MaternModel(cfg.params), n_list, R, args.m or cfg.m,
                            args.kind or cfg.kind, seed, cfg.tol, cfg.label)


def cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    try:
        ec = _experiment_config(args, cfg)
    except ValueError as exc:
        if isinstance(exc, InvalidModelError):
            raise
        raise ConfigError(str(exc)) from None
    if args.dry_run:
        print("n,R,base_seed,stream_key")
        for n in ec.n_list:
            print(f"{n},{ec.R},{ec.base_seed},({ec.base_seed}; {n}; 0..{ec.R - 1})")
        return EXIT_OK
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    prefix = cfg.prefix
    done = []

    def flush(s):
        # partial results are flushed after every completed n
        done.append(s)
        (out / f"{prefix}summary.csv").write_text(ExperimentSummary(ec, list(done)).to_csv(),
                                                 encoding="utf-8", newline="\n")
        print(f"n={s.n}: mean {s.mean.round(4).tolist()}, var {s.var.tolist()}, "
              f"excluded {s.excluded}", flush=True)

    summary = run_experiment(ec, on_n_done=flush)
    (out / f"{prefix}summary.csv").write_text(summary.to_csv(), encoding="utf-8", newline="\n")
    (out / f"{prefix}summary.json").write_text(summary.to_json(), encoding="utf-8", newline="\n")
    if len(summary.per_n) >= 3:
        write_panels(summary, out, prefix)
        for k, f in summary.slopes().items():
            print(f"slope {k}: {f.slope:.3f} (R^2 {f.r_squared:.3f})")
    print(f"results in {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bivfractal",
                                description="Fractal-index estimation for bivariate Gaussian processes.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="INI file with a [model] section")
        sp.add_argument("--out", help="output directory")

    sp = sub.add_parser("validate", help="check model validity and print the local expansion")
    sp.add_argument("--config", required=True)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("simulate", help="simulate one path and write it as CSV")
    common(sp)
    sp.add_argument("--n", type=int)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("estimate", help="estimate fractal indices from a path CSV")
    sp.add_argument("path")
    common(sp, config=False)
    sp.add_argument("--m", type=int)
    sp.add_argument("--kind", choices=("ols", "gls"))
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("asymptotics", help="limit covariance and rate exponents as JSON")
    common(sp)
    sp.add_argument("--m", type=int)
    sp.add_argument("--n", type=int, help="grid size used to build GLS weights")
    sp.add_argument("--kind", choices=("ols", "gls"))
    sp.set_defaults(func=cmd_asymptotics)

    sp = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    common(sp)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--n", type=int, help="run a single grid size")
    sp.add_argument("--m", type=int)
    sp.add_argument("--kind", choices=("ols", "gls"))
    sp.add_argument("--reps", type=int)
    sp.add_argument("--dry-run", action="store_true")
    sp.add_argument("--full-scale", action="store_true",
                    help="R=1000 and n=200,210,...,1000 (several hours)")
    sp.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except InvalidModelError as exc:
        print(f"invalid model: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except DegeneratePathError as exc:
        print(f"degenerate data: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ReplicateError as exc:
        print(f"experiment failed: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE if isinstance(exc.cause, DegeneratePathError) else EXIT_NUMERIC
    except (NotPositiveDefiniteError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
