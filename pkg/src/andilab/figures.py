"""Render figures from the CSV files of a run directory.

This module only needs numpy and matplotlib so it can be copied next to the
CSVs and run on its own::

    python3 plot_figures.py [directory]

File roles are recognised by name:

``step_<controller>.csv``           trace of a command step
``perturbation_<controller>.csv``   trace of an initial-value perturbation
``deviation_<label>.csv``           t, e_p, e_design, deviation
``sweep_<controller>.csv``          omega, deviation_linf, deviation_l2, gap_linf, gap_l2
``limit.csv``                       omega, gap
"""

from __future__ import annotations

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (9.0, 3.6),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.fontsize": 8,
    "font.size": 9,
}


def read_csv(path: Path) -> dict[str, np.ndarray]:
    data = np.genfromtxt(path, delimiter=",", names=True)
    return {name: np.atleast_1d(data[name]) for name in data.dtype.names}


def _label(path: Path, prefix: str) -> str:
    return path.stem[len(prefix):]


def plot_steps(directory: Path) -> Path | None:
    files = sorted(directory.glob("step_*.csv"))
    if not files:
        return None
    fig, (ax_track, ax_err) = plt.subplots(1, 2)
    for i, path in enumerate(files):
        d = read_csv(path)
        label = _label(path, "step_")
        line, = ax_track.plot(d["t"], d["p"], label=f"p ({label})")
        if i == 0:
            ax_track.plot(d["t"], d["p_ref"], "k--", lw=1.0, label="p_ref")
        ax_err.plot(d["t"], d["e_p"], color=line.get_color(), label=label)
    ax_track.set(xlabel="t [s]", ylabel="roll rate [deg/s]", title="command step")
    ax_err.set(xlabel="t [s]", ylabel="e_p = p_ref - p [deg/s]", title="tracking error")
    ax_track.legend()
    ax_err.legend()
    fig.tight_layout()
    out = directory / "step.png"
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_perturbations(directory: Path) -> Path | None:
    files = [p for p in sorted(directory.glob("deviation_*.csv")) if "_w" not in p.stem]
    if not files:
        return None
    fig, (ax_err, ax_dev) = plt.subplots(1, 2)
    for path in files:
        d = read_csv(path)
        label = _label(path, "deviation_")
        line, = ax_err.plot(d["t"], d["e_p"], label=f"simulated ({label})")
        ax_err.plot(d["t"], d["e_design"], "--", color=line.get_color(), lw=1.0, label=f"design ({label})")
        ax_dev.plot(d["t"], d["deviation"], color=line.get_color(), label=label)
    ax_err.set(xlabel="t [s]", ylabel="e_p [deg/s]", title="error after perturbation")
    ax_dev.set(xlabel="t [s]", ylabel="e_p - e_design [deg/s]", title="deviation from design")
    ax_err.legend()
    ax_dev.legend()
    fig.tight_layout()
    out = directory / "perturbation.png"
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_sweeps(directory: Path) -> list[Path]:
    outs = []
    for path in sorted(directory.glob("sweep_*.csv")):
        label = _label(path, "sweep_")
        table = read_csv(path)
        fig, (ax_dev, ax_norm) = plt.subplots(1, 2)
        curves = sorted(directory.glob(f"deviation_{label}_w*.csv"), key=lambda p: float(p.stem.rsplit("_w", 1)[1]))
        for curve in curves:
            d = read_csv(curve)
            ax_dev.plot(d["t"], d["deviation"], label=f"omega = {curve.stem.rsplit('_w', 1)[1]} rad/s")
        ax_dev.set(xlabel="t [s]", ylabel="e_p - e_design [deg/s]", title=f"{label}: deviation per bandwidth")
        ax_dev.legend()
        ax_norm.loglog(table["omega"], table["deviation_linf"], "o-", label="deviation, max")
        ax_norm.loglog(table["omega"], table["deviation_l2"], "s-", label="deviation, L2")
        ax_norm.loglog(table["omega"], table["gap_linf"], "^--", label="cascade vs system design, max")
        ax_norm.set(xlabel="actuator bandwidth [rad/s]", ylabel="[deg/s]", title="norms")
        ax_norm.legend()
        fig.tight_layout()
        out = directory / f"sweep_{label}.png"
        fig.savefig(out, dpi=120)
        plt.close(fig)
        outs.append(out)
    return outs


def plot_limit(directory: Path) -> Path | None:
    path = directory / "limit.csv"
    if not path.exists():
        return None
    d = read_csv(path)
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    ax.loglog(d["omega"], d["gap"], "o-", label="|u_c,inversion - u_c,incremental|")
    if np.all(d["gap"] > 0):
        ref = d["gap"][0] * d["omega"][0] / d["omega"]
        ax.loglog(d["omega"], ref, "k:", lw=1.0, label="1/omega")
    ax.set(xlabel="bandwidth [rad/s]", ylabel="command gap [deg]", title="command gap vs bandwidth")
    ax.legend()
    fig.tight_layout()
    out = directory / "limit.png"
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def render_all(directory) -> list[Path]:
    directory = Path(directory)
    with plt.rc_context(STYLE):
        made = [plot_steps(directory), plot_perturbations(directory), *plot_sweeps(directory), plot_limit(directory)]
    return [p for p in made if p is not None]


def main(argv=None) -> int:
    args = sys.argv[1:] if argv is None else argv
    directory = Path(args[0]) if args else Path(__file__).resolve().parent
    for path in render_all(directory):
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
