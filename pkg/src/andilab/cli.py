"""Command-line front end: ``andilab run|compare|gains|list-scenarios``."""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from .error_spec import ErrorDynamicsSpec, hurwitz_verdict
from .report import format_table, run_study, summary_text, write_report
from .scenario import ScenarioError, load_scenario, resolve_scenario, shipped_scenarios, with_dt
from .sim import ConfigError, DivergenceError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def _load(name: str, dt: float | None):
    scen = load_scenario(resolve_scenario(name))
    if dt is not None:
        if not dt > 0:
            raise ScenarioError(f"--dt must be positive, got {dt}")
        scen = with_dt(scen, dt)
    return scen


def _execute(scen, out: Path | None, quiet: bool, plots: bool) -> int:
    out = Path(out) if out is not None else Path("runs") / scen.name
    with warnings.catch_warnings():
        if quiet:
            warnings.simplefilter("ignore")
        res = run_study(scen)
    written = write_report(scen, res, out, plots=plots)
    if not quiet:
        print(summary_text(scen, res), end="")
        print(f"wrote {len(written)} files to {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    scen = _load(args.scenario, args.dt)
    return _execute(scen, args.out, args.quiet, not args.no_plots)


def cmd_compare(args) -> int:
    scen = _load(args.scenario, args.dt)
    if len(scen.controllers) < 2:
        raise ScenarioError("compare needs a scenario listing at least two controller kinds")
    if scen.study != "compare":
        scen.study = "compare"
    return _execute(scen, args.out, args.quiet, not args.no_plots)


def cmd_gains(args) -> int:
    K = [float(k) for k in args.K]
    if not K:
        raise ScenarioError("--K needs at least one gain")
    if not args.omega_y > 0:
        raise ScenarioError(f"--omega-y must be positive, got {args.omega_y}")
    spec = ErrorDynamicsSpec.siso(K, args.omega_y)
    coeffs = [c[0, 0] for c in spec.coefficients]
    roots = np.roots(spec.characteristic_polynomial())
    rows = [{"coefficient": f"k_{i}", "value": float(c)} for i, c in enumerate(coeffs)]
    print(format_table(rows))
    print("roots: " + ", ".join(_fmt_root(r) for r in sorted(roots, key=lambda z: (z.real, z.imag))))
    print(f"verdict: {hurwitz_verdict(roots)}")
    return EXIT_OK


def _fmt_root(z: complex) -> str:
    if abs(z.imag) < 1e-12:
        return f"{z.real:.6g}"
    return f"{z.real:.6g}{z.imag:+.6g}j"


def cmd_list(args) -> int:
    for name, path in shipped_scenarios().items():
        try:
            scen = load_scenario(path)
            desc = scen.values["scenario"]["description"]
            print(f"{name:32s} {scen.study:13s} {desc}")
        except ScenarioError as exc:
            print(f"{name:32s} INVALID: {exc}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="andilab", description="Dynamic-inversion control-law laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_options(p):
        p.add_argument("scenario", help="scenario file, or the name of a shipped scenario")
        p.add_argument("--out", type=Path, help="output directory (default: runs/<scenario name>)")
        p.add_argument("--dt", type=float, help="override the control step dt_control [s]")
        p.add_argument("--quiet", action="store_true", help="suppress the printed summary and warnings")
        p.add_argument("--no-plots", action="store_true", help="skip rendering PNG figures")

    p = sub.add_parser("run", help="run the study a scenario describes")
    add_run_options(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="step and perturbation table for every listed controller")
    add_run_options(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gains", help="expand cascade error dynamics into k_i and roots")
    p.add_argument("--K", nargs="+", required=True, help="system gains K_0 .. K_{r-1}")
    p.add_argument("--omega-y", type=float, required=True, help="innermost bandwidth Omega_y [rad/s]")
    p.set_defaults(func=cmd_gains)

    p = sub.add_parser("list-scenarios", help="list shipped scenarios")
    p.set_defaults(func=cmd_list)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
