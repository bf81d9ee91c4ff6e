"""Command-line front end: list, simulate, verify, geometry.

Exit codes: 0 success/pass, 1 usage, 2 domain or validation error,
3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import geometry, kernels, montecarlo
from .catalog import CATALOG, CHART, EMBEDDED, GROUP, catalog_entries, make_manifold
from .errors import ConfigError, EnsembleError, GeometryError
from .lie import canonical_drift, structure_constants
from .sde import (FORMULATIONS, SCHEMES, STRATONOVICH, IntegratorConfig, brownian_problem,
                  resolve_retraction, resolve_scheme, simulate_ensemble)

SCHEMA_VERSION = "1"
EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_VERIFY = 0, 1, 2, 3

VERIFY_TESTS = ("so3-decay", "sphere-decay", "hyperbolic-log-drift", "torus-stationary", "ito-strat",
                "generator", "frame-mixing", "all")

# keys accepted in a --config file; the same names as the flag destinations
CONFIG_KEYS = ("manifold", "param", "backend", "formulation", "scheme", "dt", "t_final", "paths", "seed",
               "thin", "workers", "out", "observable", "tol", "x0", "point", "bins", "no_retraction")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r} (decimal or 0x-hex)")
    if v < 0:
        raise argparse.ArgumentTypeError("seed must be non-negative")
    return v


def _floats(text: str):
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _param(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"--param expects k=v, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k.strip(), float(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--param {k} needs a number, got {v!r}")


def _common(p, sim=True):
    p.add_argument("--config", help="JSON file with default values for the flags below")
    p.add_argument("--manifold", choices=list(CATALOG))
    p.add_argument("--param", type=_param, action="append", metavar="K=V")
    p.add_argument("--n", type=int, help="shorthand for --param n=N")
    p.add_argument("--backend", choices=(CHART, EMBEDDED, GROUP))
    if sim:
        p.add_argument("--formulation", choices=FORMULATIONS)
        p.add_argument("--scheme", choices=SCHEMES)
        p.add_argument("--dt", type=float)
        p.add_argument("--t-final", dest="t_final", type=float)
        p.add_argument("--paths", type=int)
        p.add_argument("--seed", type=_seed)
        p.add_argument("--thin", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--out")
        p.add_argument("--observable", action="append")
        p.add_argument("--x0", type=_floats, help="start point, comma-separated")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="manifold-brownian",
                     description="Brownian motion on Riemannian manifolds: simulate and verify.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    sub.add_parser("list", help="catalog manifolds")
    p = sub.add_parser("simulate", help="simulate an ensemble and write CSV + summary")
    _common(p)
    p.add_argument("--no-retraction", dest="no_retraction", action="store_true", default=None)
    p = sub.add_parser("verify", help="run a verification test")
    p.add_argument("test", choices=VERIFY_TESTS)
    _common(p)
    p.add_argument("--tol", type=float)
    p.add_argument("--bins", type=int)
    p = sub.add_parser("geometry", help="geometric quantities at a point")
    _common(p, sim=False)
    p.add_argument("--point", type=_floats)
    return parser


def _load_config(args):
    """Merge the --config file under the explicit flags (flags win)."""
    if getattr(args, "config", None) is None:
        return args
    try:
        with open(args.config) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {args.config}: {exc}")
    unknown = set(data) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key(s) {sorted(unknown)}; valid: {list(CONFIG_KEYS)}")
    for k, v in data.items():
        if not hasattr(args, k):
            continue
        if getattr(args, k) is None:
            if k == "param" and isinstance(v, dict):
                v = [(a, float(b)) for a, b in v.items()]
            if k == "seed" and isinstance(v, str):
                v = int(v, 0)
            setattr(args, k, v)
    return args


def _manifold_from(args, default="sphere2-chart"):
    params = dict(args.param or [])
    if getattr(args, "n", None) is not None:
        params["n"] = args.n
    return make_manifold(args.manifold or default, **params)


def _opt(args, name, default):
    v = getattr(args, name, None)
    return default if v is None else v


def _write_json(path, doc):
    text = json.dumps(doc, indent=2) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


# ---------------------------------------------------------------- list

def cmd_list(args, out=None) -> int:
    out = out or sys.stdout
    rows = catalog_entries()
    out.write(f"{'name':<14} {'dim':>3}  {'backends':<16} {'parameters':<20} description\n")
    for name, dim, backends, params, desc in rows:
        ptxt = ",".join(f"{k}={v:g}" for k, v in params.items()) or "-"
        out.write(f"{name:<14} {dim:>3}  {'/'.join(backends):<16} {ptxt:<20} {desc}\n")
    return EXIT_OK


# ---------------------------------------------------------------- simulate

def write_csv(path_or_file, ens) -> None:
    """CSV: path_id, step, time, state_0..state_{d-1}, residual; floats as %.17g."""
    N, K, d = ens.states.shape
    header = ["path_id", "step", "time"] + [f"state_{i}" for i in range(d)] + ["residual"]
    fmt = ["%d", "%d"] + ["%.17g"] * (d + 2)
    fh = open(path_or_file, "w", newline="") if isinstance(path_or_file, str) else path_or_file
    try:
        fh.write(",".join(header) + "\n")
        for i in range(N):
            block = np.column_stack([np.full(K, ens.path_ids[i]), ens.steps, ens.times,
                                     ens.states[i], ens.residuals[i]])
            lines = [",".join(f % v for f, v in zip(fmt, row)) for row in block.tolist()]
            fh.write("\n".join(lines) + "\n")
    finally:
        if fh is not path_or_file:
            fh.close()


def _summary_path(out):
    root, _ = os.path.splitext(out)
    return root + ".summary.json"


def cmd_simulate(args) -> int:
    m = _manifold_from(args)
    formulation = _opt(args, "formulation", STRATONOVICH)
    problem = brownian_problem(m, formulation, args.backend)
    retraction = None if not args.no_retraction else False
    cfg = IntegratorConfig(dt=_opt(args, "dt", 1e-3), t_final=_opt(args, "t_final", 1.0),
                           scheme=_opt(args, "scheme", "auto"), thin=args.thin, retraction=retraction)
    scheme = resolve_scheme(problem, cfg)
    n_paths = _opt(args, "paths", 100)
    if n_paths < 1:
        raise ConfigError("--paths must be >= 1")
    seed = _opt(args, "seed", 0)
    x0 = m.check_point(args.x0 if args.x0 is not None else m.start)
    obs = [m.observable(o) for o in (args.observable or [])]
    workers = _opt(args, "workers", os.cpu_count() or 1)
    out = _opt(args, "out", "trajectories.csv")

    t0 = time.perf_counter()
    ens = simulate_ensemble(problem, cfg, n_paths, seed, x0=x0, workers=workers, on_error="collect")
    wall = time.perf_counter() - t0
    write_csv(out, ens)

    final = ens.states[:, -1, :]
    alive = np.all(np.isfinite(final), axis=1)
    observables = {}
    for ob in obs:
        v = ob(final[alive]) if alive.any() else np.array([])
        observables[ob.name] = {"mean": float(np.mean(v)) if v.size else None,
                                "stderr": float(np.std(v, ddof=1) / np.sqrt(v.size)) if v.size > 1 else None}
    summary = {
        "schema_version": SCHEMA_VERSION,
        "command": "simulate",
        "config": {
            "manifold": m.name, "params": dict(m.params), "backend": problem.backend,
            "formulation": formulation, "scheme": scheme,
            "retraction": resolve_retraction(problem, cfg, scheme), "dt": cfg.dt, "t_final": cfg.t_final,
            "paths": n_paths, "seed": seed, "thin": cfg.stride, "x0": x0.tolist(),
            "observable": [o.name for o in obs], "out": out,
        },
        "csv_columns": ["path_id", "step", "time"] + [f"state_{i}" for i in range(m.state_dim)] + ["residual"],
        "stored_times": int(len(ens.times)),
        "max_residual": ens.max_residual,
        "failures": {str(k): v for k, v in ens.failures.items()},
        "observables": observables,
        "kernel_backend": kernels.BACKEND,
        "workers": workers,
        "wall_time_s": round(wall, 3),
    }
    _write_json(_summary_path(out), summary)
    sys.stdout.write(f"wrote {out} ({n_paths} paths x {len(ens.times)} times) and {_summary_path(out)}\n")
    if ens.failures:
        sys.stderr.write(f"{len(ens.failures)} path(s) failed: {sorted(ens.failures)}\n")
    return EXIT_OK


# ---------------------------------------------------------------- verify

def _run_verify(test, args):
    kw = {}
    if args.paths is not None:
        kw["N"] = args.paths
    if args.dt is not None:
        kw["dt"] = args.dt
    if args.seed is not None:
        kw["seed"] = args.seed
    workers = _opt(args, "workers", os.cpu_count() or 1)
    params = dict(args.param or [])
    if args.n is not None:
        params["n"] = args.n
    if test == "so3-decay":
        if args.t_final is not None:
            kw["T"] = args.t_final
        if args.tol is not None:
            kw["tol"] = args.tol
        return [montecarlo.so3_mean_decay(workers=workers, **kw)]
    if test == "sphere-decay":
        if args.t_final is not None:
            kw["T"] = args.t_final
        if args.tol is not None:
            kw["allowance"] = args.tol
        ns = [int(params["n"])] if "n" in params else [2, 3]
        return [montecarlo.sphere_eigen_decay(n, workers=workers, **kw) for n in ns]
    if test == "hyperbolic-log-drift":
        if args.t_final is not None:
            kw["T"] = args.t_final
        ns = [int(params["n"])] if "n" in params else [2, 3]
        return [montecarlo.hyperbolic_log_drift(n, workers=workers, **kw) for n in ns]
    if test == "torus-stationary":
        if args.t_final is not None:
            kw["T"] = args.t_final
        if args.tol is not None:
            kw["tol"] = args.tol
        if args.bins is not None:
            kw["bins"] = args.bins
        geo = {k: params[k] for k in ("R", "r") if k in params}
        return [montecarlo.torus_stationary_test(workers=workers, **geo, **kw)]
    if test in ("ito-strat", "frame-mixing"):
        if args.t_final is not None:
            kw["T"] = args.t_final
        names = [args.manifold] if args.manifold else list(CATALOG)
        reports = []
        for name in names:
            m = make_manifold(name, **(params if args.manifold else {}))
            x0 = None if args.x0 is None else m.check_point(args.x0)
            obs = [m.observable(o) for o in args.observable] if args.observable else [m.observables[0]]
            for ob in obs:
                if test == "ito-strat":
                    if args.tol is not None:
                        kw["kappa"] = args.tol
                    reports.append(montecarlo.ito_strat_agreement(m, ob, x0=x0, backend=args.backend,
                                                                  workers=workers, **kw))
                else:
                    reports.append(montecarlo.frame_mixing_test(m, ob, x0=x0, workers=workers, **kw))
        return reports
    if test == "generator":
        names = [args.manifold] if args.manifold else list(CATALOG)
        if args.tol is not None:
            kw["allowance"] = args.tol
        if "dt" in kw:
            kw["h"] = kw.pop("dt")
        return [montecarlo.generator_check(make_manifold(n, **(params if args.manifold else {})),
                                           workers=workers, **kw) for n in names]
    raise UsageError(f"unknown test {test!r}")


def cmd_verify(args) -> int:
    tests = [t for t in VERIFY_TESTS if t != "all"] if args.test == "all" else [args.test]
    reports = []
    t0 = time.perf_counter()
    for t in tests:
        reports.extend(_run_verify(t, args))
    passed = all(r.verdict for r in reports)
    for r in reports:
        sys.stdout.write(r.summary_line() + "\n")
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "verify",
        "test": args.test,
        "verdict": "pass" if passed else "fail",
        "kernel_backend": kernels.BACKEND,
        "wall_time_s": round(time.perf_counter() - t0, 3),
        "reports": [r.to_dict() for r in reports],
    }
    if args.out:
        _write_json(args.out, doc)
    return EXIT_OK if passed else EXIT_VERIFY


# ---------------------------------------------------------------- geometry

def geometry_dump(m, x) -> dict:
    """Metric, Christoffels, frame drift, projection, H and J at a point (as available)."""
    x = m.check_point(x)
    doc = {"manifold": m.name, "params": dict(m.params), "point": x.tolist()}
    if m.metric is not None:
        doc["metric"] = np.asarray(m.metric(x)).tolist()
    if m.christoffel is not None:
        doc["christoffel"] = np.asarray(m.christoffel(x)).tolist()
    if m.frame is not None:
        doc["frame"] = np.asarray(m.frame(x)).tolist()
        gam = m.christoffel if m.christoffel is not None else (lambda p: np.zeros((m.dim,) * 3))
        doc["frame_drift"] = geometry.frame_drift(m.frame, gam, x).tolist()
        if m.strat_drift is not None:
            doc["strat_drift"] = np.asarray(m.strat_drift(x)).tolist()
    if m.projection is not None:
        doc["projection"] = np.asarray(m.projection(x)).tolist()
        if m.mean_curvature is not None:
            doc["mean_curvature"] = np.asarray(m.mean_curvature(x)).tolist()
        doc["mean_curvature_numeric"] = geometry.mean_curvature_numeric(m, x).tolist()
    if m.algebra is not None:
        c = structure_constants(m.algebra)
        doc["algebra"] = m.algebra.name
        doc["structure_constants"] = c.tolist()
        doc["canonical_drift"] = canonical_drift(c).tolist()
        if m.group_size:
            doc["canonical_drift_matrix"] = m.drift_matrix.tolist()
    return doc


def cmd_geometry(args) -> int:
    m = _manifold_from(args)
    x = args.point if args.point is not None else m.start
    _write_json(None, {"schema_version": SCHEMA_VERSION, **_jsonable(geometry_dump(m, x))})
    return EXIT_OK


COMMANDS = {"list": cmd_list, "simulate": cmd_simulate, "verify": cmd_verify, "geometry": cmd_geometry}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _load_config(args)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except (ConfigError, GeometryError, EnsembleError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_DOMAIN
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
