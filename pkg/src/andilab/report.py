"""Run a scenario's study and write its artifacts.

A run directory receives CSV traces, a ``summary.txt`` with metadata and
metrics, a standalone ``plot_figures.py`` and the PNG figures it renders.
"""

from __future__ import annotations

import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import figures
from .controllers import ControllerInput, ControllerKind
from .scenario import Scenario, build_plant, build_spec
from .sim import (
    DEG,
    LimitResult,
    SimTrace,
    SweepPoint,
    bandwidth_sweep,
    limit_study,
    perturbation_study,
    run_closed_loop,
    settling_time,
    tracking_error,
)

INVERSION_KINDS = {ControllerKind.ANDI.value, ControllerKind.ANDI_GENERALIZED.value}


@dataclass
class Deviation:
    t: np.ndarray
    e_sim: np.ndarray
    e_design: np.ndarray

    def write(self, path: Path) -> None:
        cols = np.column_stack([self.t, DEG * self.e_sim, DEG * self.e_design, DEG * (self.e_sim - self.e_design)])
        np.savetxt(path, cols, delimiter=",", header="t,e_p,e_design,deviation", comments="", fmt="%.12g")


@dataclass
class StudyResult:
    scenario: str
    study: str
    rows: list[dict] = field(default_factory=list)
    traces: dict[str, SimTrace] = field(default_factory=dict)
    deviations: dict[str, Deviation] = field(default_factory=dict)
    sweeps: dict[str, list[SweepPoint]] = field(default_factory=dict)
    limit: LimitResult | None = None
    notes: list[str] = field(default_factory=list)
    metadata: dict[str, dict] = field(default_factory=dict)


def _step_row(kind: str, trace: SimTrace, amplitude: float) -> dict:
    row = {
        "controller": kind,
        "max_tracking_error_deg_s": tracking_error(trace),
        "settling_time_s": settling_time(trace.t, trace.y[:, 0], amplitude) if amplitude else float("nan"),
    }
    if kind in INVERSION_KINDS:
        row["max_inversion_residual"] = float(np.max(np.abs(trace.y_top[:, 0] - trace.nu[:, 0])))
    return row


def _run_step(s: Scenario, res: StudyResult, prefix: str = "step") -> None:
    for kind, cfg in s.configs.items():
        trace = run_closed_loop(cfg)
        res.traces[f"{prefix}_{kind}"] = trace
        res.metadata[kind] = trace.metadata
        res.rows.append(_step_row(kind, trace, float(cfg.command.amplitude)))


def _run_perturbation(s: Scenario, res: StudyResult) -> None:
    p0, pr0 = s.number("sim", "p0_deg"), s.number("sim", "p_ref0_deg")
    for kind, cfg in s.configs.items():
        trace, metric, design = perturbation_study(cfg, p0, pr0)
        res.traces[f"perturbation_{kind}"] = trace
        res.deviations[kind] = Deviation(trace.t, trace.e_y[:, 0], design)
        res.metadata.setdefault(kind, trace.metadata)
        row = next((r for r in res.rows if r["controller"] == kind), None)
        if row is None:
            row = {"controller": kind}
            res.rows.append(row)
        row["deviation_linf_deg_s"] = metric.linf
        row["deviation_l2"] = metric.l2


def _run_sweep(s: Scenario, res: StudyResult) -> None:
    omegas = s.floats("sweep", "omegas")
    workers = int(s.number("sweep", "workers"))
    p0 = s.number("sim", "p0_deg")
    for kind, cfg in s.configs.items():
        points = bandwidth_sweep(cfg, omegas, p0, max_workers=workers)
        res.sweeps[kind] = points
        res.metadata[kind] = points[0].trace.metadata
        for pt in points:
            res.rows.append(
                {
                    "controller": kind,
                    "omega": pt.omega,
                    "deviation_linf_deg_s": pt.metric.linf,
                    "deviation_l2": pt.metric.l2,
                    "gap_linf_deg_s": pt.design_gap.linf,
                    "gap_l2": pt.design_gap.l2,
                }
            )
        if len(points) > 1:
            first, last = points[0], points[-1]
            res.notes.append(
                f"{kind}: deviation ratio last/first = {last.metric.linf / first.metric.linf:.4g} (max), "
                f"{last.metric.l2 / first.metric.l2:.4g} (L2); design gap ratio = "
                f"{last.design_gap.linf / first.design_gap.linf:.4g} (max)"
            )


def limit_snapshot(s: Scenario) -> ControllerInput:
    plant = build_plant(s)
    x = np.array([s.number("limit", "p_deg") / DEG])
    u = np.array([s.number("limit", "u_deg") / DEG])
    ref = np.array([[s.number("limit", k) / DEG] for k in ("p_ref_deg", "p_ref_dot_deg", "p_ref_ddot_deg")])
    y = plant.output_derivatives(x, u)
    return ControllerInput(x=x, u=u, y=y, y_ref=ref, xdot=plant.f(x, u))


def _run_limit(s: Scenario, res: StudyResult) -> None:
    plant, spec = build_plant(s), build_spec(s)
    scaling = s.number("controller", "scaling") if ControllerKind.INDI_SCALED.value in s.controllers else None
    out = limit_study(limit_snapshot(s), plant, spec, s.floats("limit", "omegas"), scaling)
    res.limit = out
    for w, g in zip(out.omegas, out.gaps):
        res.rows.append({"omega": float(w), "gap_deg": DEG * float(g)})
    slope = "undefined (zero gap)" if out.slope is None else f"{out.slope:.6f}"
    res.notes.append(f"log-log slope of command gap vs bandwidth: {slope}")


def run_study(s: Scenario) -> StudyResult:
    res = StudyResult(s.name, s.study)
    if s.study in ("step", "compare"):
        _run_step(s, res)
    if s.study in ("perturbation", "compare"):
        _run_perturbation(s, res)
    if s.study == "sweep":
        _run_sweep(s, res)
    if s.study == "limit":
        _run_limit(s, res)
    if s.study == "compare":
        best = min(res.rows, key=lambda r: r["deviation_linf_deg_s"])
        res.notes.append(f"smallest deviation from design: {best['controller']}")
    return res


def format_table(rows: list[dict]) -> str:
    if not rows:
        return ""
    cols = list(dict.fromkeys(k for r in rows for k in r))

    def cell(v):
        if isinstance(v, float):
            return f"{v:.6g}"
        return "" if v is None else str(v)

    body = [[cell(r.get(c)) for c in cols] for r in rows]
    widths = [max(len(c), *(len(b[i]) for b in body)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(b, widths)) for b in body]
    return "\n".join(lines)


def summary_text(s: Scenario, res: StudyResult) -> str:
    lines = [f"scenario: {s.name}", f"study: {s.study}", f"controllers: {', '.join(s.controllers)}"]
    if s.source is not None:
        lines.append(f"source: {s.source}")
    for kind, meta in res.metadata.items():
        lines.append(f"[{kind}]")
        for key, val in meta.items():
            if key == "warnings":
                for w in val:
                    lines.append(f"  warning: {w}")
            else:
                lines.append(f"  {key}: {val}")
        if s.study in ("perturbation", "compare", "sweep"):
            lines.append("  deviation metric: first control tick discarded; units deg/s")
    for row in res.rows:
        if "max_tracking_error_deg_s" in row:
            lines.append(f"max tracking error {row['controller']}: {row['max_tracking_error_deg_s']:.6g} deg/s")
    lines.extend(res.notes)
    lines.append("")
    lines.append(format_table(res.rows))
    return "\n".join(lines) + "\n"


def write_report(s: Scenario, res: StudyResult, out: Path, plots: bool = True) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for label, trace in res.traces.items():
        path = out / f"{label}.csv"
        trace.to_csv(path)
        written.append(path)
    for kind, dev in res.deviations.items():
        path = out / f"deviation_{kind}.csv"
        dev.write(path)
        written.append(path)
    for kind, points in res.sweeps.items():
        path = out / f"sweep_{kind}.csv"
        table = np.array([[p.omega, p.metric.linf, p.metric.l2, p.design_gap.linf, p.design_gap.l2] for p in points])
        np.savetxt(path, table, delimiter=",", header="omega,deviation_linf,deviation_l2,gap_linf,gap_l2", comments="", fmt="%.12g")
        written.append(path)
        for p in points:
            path = out / f"deviation_{kind}_w{p.omega:g}.csv"
            Deviation(p.trace.t, p.trace.e_y[:, 0], p.design).write(path)
            written.append(path)
    if res.limit is not None:
        path = out / "limit.csv"
        table = np.column_stack([res.limit.omegas, DEG * res.limit.gaps])
        np.savetxt(path, table, delimiter=",", header="omega,gap", comments="", fmt="%.12g")
        written.append(path)
    summary = out / "summary.txt"
    summary.write_text(summary_text(s, res))
    written.append(summary)
    script = out / "plot_figures.py"
    shutil.copyfile(figures.__file__, script)
    written.append(script)
    if plots:
        written.extend(figures.render_all(out))
    return written
