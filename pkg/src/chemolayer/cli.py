"""Command-line entry point: ``chemolayer <subcommand> [options]``.

Exit codes: 0 success, 1 invalid configuration or usage, 2 solver failure,
3 experiment verdict failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import config as config_mod
from .analysis import error_history, fit_rate, sup_in_time_error
from .eps_solver import run_eps
from .experiments import EXPERIMENTS, default_spec, run_experiment, run_sweep
from .grid import check_compatibility
from .io import write_diagnostics, write_json, write_snapshots, write_table
from .limit_solver import run_limit
from .presets import make_preset
from .scheme import SolverError

logger = logging.getLogger("chemolayer")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERDICT = 0, 1, 2, 3
ERROR_KINDS = ("SupC", "L2", "H1", "H2")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit 2, which is reserved for solver failures
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="sectioned key=value file layered over the defaults")
    p.add_argument("--eps", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--lam", type=float, dest="lam")
    p.add_argument("--preset", help="preset name or file:<path> with 'r w0 c0' rows")
    p.add_argument("--N", type=int, dest="N")
    p.add_argument("--dt", type=float)
    p.add_argument("--T", type=float, dest="T")
    p.add_argument("--out", help="output directory (relative paths honour $%s)" % config_mod.OUTPUT_ROOT_ENV)
    p.add_argument("--stride", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--eps-list", dest="eps_list", help="comma separated, strictly decreasing")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chemolayer", description="Chemotaxis boundary-layer solvers and experiments.")
    sub = parser.add_subparsers(dest="command", metavar="{run,limit,compare,sweep,check-compat,experiment}",
                                parser_class=_Parser)
    sub.required = True
    for name, help_ in (
        ("run", "eps > 0 trajectory to snapshot and diagnostics CSV"),
        ("limit", "eps = 0 trajectory to snapshot and diagnostics CSV"),
        ("compare", "both solvers on one grid, error norms versus time"),
        ("sweep", "error-versus-eps table and rate fits over eps_list"),
        ("check-compat", "print compatibility residuals of the initial data"),
    ):
        _common(sub.add_parser(name, help=help_))
    p = sub.add_parser("experiment", help="run a named experiment and print verdicts")
    p.add_argument("name", choices=EXPERIMENTS)
    _common(p)
    return parser


def _overrides(ns: argparse.Namespace) -> dict:
    out = {
        "model.eps": ns.eps,
        "model.kappa": ns.kappa,
        "model.lambda": ns.lam,
        "init.preset": ns.preset,
        "domain.N": ns.N,
        "time.dt": ns.dt,
        "time.T": ns.T,
        "output.dir": ns.out,
        "output.stride": ns.stride,
        "experiment.workers": ns.workers,
        "experiment.eps_list": ns.eps_list,
    }
    return {k: v for k, v in out.items() if v is not None}


def _run_dir(rc: config_mod.RunConfig, tag: str) -> Path:
    out = Path(rc.output_dir) / tag
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_trajectory(rc, limit: bool) -> int:
    init = make_preset(rc.preset, rc.grid, rc.params, **rc.preset_kwargs)
    if limit:
        params = rc.params.with_eps(0.0)
        rec = run_limit(init, params, rc.scheme, rc.grid, rc.stride)
        out = _run_dir(rc, f"limit_{rc.preset}_k{params.kappa:g}")
    else:
        params = rc.params
        rec = run_eps(init, params, rc.scheme, rc.grid, rc.stride)
        out = _run_dir(rc, f"eps{params.eps:g}_{rc.preset}_k{params.kappa:g}")
    write_snapshots(rec, out / "snapshots.csv")
    write_diagnostics(rec, out / "diagnostics.csv")
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_compare(rc) -> int:
    if rc.params.eps <= 0.0:
        raise config_mod.ConfigError("compare needs eps > 0")
    init = make_preset(rc.preset, rc.grid, rc.params, **rc.preset_kwargs)
    rec_e = run_eps(init, rc.params, rc.scheme, rc.grid, rc.stride)
    rec_0 = run_limit(init, rc.params.with_eps(0.0), rc.scheme, rc.grid, rc.stride)
    hist = {k: error_history(rec_e, rec_0, k) for k in ERROR_KINDS}
    cols = ["t"] + [f"{k}_{f}" for k in ERROR_KINDS for f in ("w", "c")]
    rows = (
        [t] + [hist[k][f][i] for k in ERROR_KINDS for f in ("w", "c")]
        for i, t in enumerate(rec_e.times)
    )
    out = _run_dir(rc, f"compare_eps{rc.params.eps:g}_{rc.preset}_k{rc.params.kappa:g}")
    write_table(out / "errors_vs_t.csv", cols, rows)
    for k in ERROR_KINDS:
        s = sup_in_time_error(rec_e, rec_0, k)
        print(f"{k:>5s}  sup_t |w| {s['w']:.6e}  sup_t |c| {s['c']:.6e}")
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_sweep(rc) -> int:
    spec = default_spec("rate-kpos")
    spec = replace(
        spec,
        eps_list=rc.eps_list,
        grid=rc.grid,
        params=rc.params.with_eps(0.0),
        preset=rc.preset,
        preset_kwargs=rc.preset_kwargs,
        scheme=rc.scheme,
        output_dir=rc.output_dir,
        stride=rc.stride,
        workers=rc.workers,
        delta_exponent=rc.delta_exponent,
    )
    sweep = run_sweep(spec)
    rows = sweep.rows
    cols = list(rows[0].keys())
    out = _run_dir(rc, f"sweep_{rc.preset}_k{rc.params.kappa:g}")
    write_table(out / "errors.csv", cols, ([r[c] for c in cols] for r in rows))
    fits = {}
    for key in ("sup_w", "sup_c", "h1_w", "h1_c", "h2_w", "h2_c"):
        samples = [(r["eps"], r[key]) for r in rows if r[key] > 0.0]
        if len(samples) >= 2:
            fits[key] = fit_rate(samples).as_dict()
    write_json(
        out / "summary.json",
        {
            "defaults_version": config_mod.defaults_version(),
            "eps_list": list(rc.eps_list),
            "errors": rows,
            "fits": fits,
        },
    )
    for key, f in fits.items():
        print(f"{key:>6s}  slope {f['slope']:.4f}  max log-residual {f['max_residual']:.3g}")
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_check(rc) -> int:
    init = make_preset(rc.preset, rc.grid, rc.params, **rc.preset_kwargs)
    rep = check_compatibility(init, rc.params, rc.grid)
    print(f"preset {rc.preset}  eps={rc.params.eps:g} kappa={rc.params.kappa:g} tol={rep.tol:g}")
    for line in rep.lines():
        print(line)
    return EXIT_OK if rep.ok else EXIT_CONFIG


def _cmd_experiment(ns, cp) -> int:
    spec = default_spec(ns.name, cp)
    rc = config_mod.build_run_config(cp)
    changes = {}
    if ns.eps_list is not None:
        changes["eps_list"] = rc.eps_list
    for attr in ("grid", "scheme", "output_dir", "stride", "workers"):
        changes[attr] = getattr(rc, attr)
    params = replace(rc.params, eps=0.0, kappa=spec.params.kappa if ns.kappa is None else rc.params.kappa)
    changes["params"] = params
    if ns.preset is not None:
        changes["preset"] = ns.preset
    spec = replace(spec, **changes)
    res = run_experiment(spec, config_mod.thresholds(cp))
    for note in res.notes:
        print(f"note: {note}")
    for v in res.verdicts:
        print(v.line())
    print(f"experiment {res.name}: {'PASS' if res.passed else 'FAIL'}")
    return EXIT_OK if res.passed else EXIT_VERDICT


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"chemolayer: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cp = config_mod.load_config(ns.config)
        overrides = _overrides(ns)
        if ns.command == "experiment":
            config_mod.build_run_config(cp, overrides)  # validates and applies overrides to cp
            return _cmd_experiment(ns, cp)
        rc = config_mod.build_run_config(cp, overrides)
        if ns.command == "run":
            if rc.params.eps <= 0.0:
                raise config_mod.ConfigError("run needs eps > 0; use 'limit' for eps = 0")
            return _cmd_trajectory(rc, limit=False)
        if ns.command == "limit":
            return _cmd_trajectory(rc, limit=True)
        if ns.command == "compare":
            return _cmd_compare(rc)
        if ns.command == "sweep":
            return _cmd_sweep(rc)
        return _cmd_check(rc)
    except SolverError as exc:
        print(f"chemolayer: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (config_mod.ConfigError, ValueError, OSError) as exc:
        print(f"chemolayer: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
