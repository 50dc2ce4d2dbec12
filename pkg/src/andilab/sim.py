"""Fixed-step closed-loop simulation and the roll-control studies.

The plant, its actuator chain and the reference model are integrated jointly
at ``dt_integration``.  The controller runs at ``dt_control`` and its command
is held between ticks.  With ``continuous=True`` the law is instead evaluated
inside every integrator stage, which turns the loop into a smooth ODE; this
mode needs ``dt_control == dt_integration`` and samples the trace every step.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .controllers import (
    ContractError,
    Controller,
    ControllerInput,
    IndiActuatorController,
    IndiController,
    RmFeedforwardController,
    ScaledIndiController,
    indi_classic,
    indi_scaled,
    andi_first_order,
)
from .error_spec import ErrorDynamicsSpec, ErrorSolution
from .model import FirstOrderActuatorBank, GeneralizedActuator, PlantModel
from .refmodel import PhysicalRefModel

DEG = 180.0 / math.pi


class ConfigError(ValueError):
    pass


class DivergenceError(RuntimeError):
    def __init__(self, t_last_valid: float, message: str = ""):
        super().__init__(message or f"simulation diverged after t = {t_last_valid:.6g} s")
        self.t_last_valid = t_last_valid


def rk4_step(fun, z, h):
    k1 = fun(z)
    k2 = fun(z + 0.5 * h * k1)
    k3 = fun(z + 0.5 * h * k2)
    k4 = fun(z + h * k3)
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def euler_step(fun, z, h):
    return z + h * fun(z)


INTEGRATORS = {"rk4": rk4_step, "euler": euler_step}


@dataclass(frozen=True)
class Command:
    """Step in the commanded output; ``amplitude`` in internal units (rad/s for roll)."""

    amplitude: float = 0.0
    step_time: float = 0.0

    def value(self, t: float) -> np.ndarray:
        amp = np.atleast_1d(np.asarray(self.amplitude, dtype=float))
        return amp if t >= self.step_time - 1e-12 else np.zeros_like(amp)


@dataclass(frozen=True)
class SimConfig:
    plant: PlantModel
    actuator: FirstOrderActuatorBank | GeneralizedActuator
    reference: object
    controller: Controller
    command: Command = Command()
    x0: tuple | None = None
    actuator0: tuple | None = None
    ref0: tuple | None = None
    dt_integration: float = 1e-4
    dt_control: float = 1e-3
    t_final: float = 2.0
    integrator: str = "rk4"
    continuous: bool = False
    divergence_limit: float = 1e9
    name: str = ""
    output_name: str = "p"

    @property
    def substeps(self) -> int:
        return int(round(self.dt_control / self.dt_integration))

    @property
    def ticks(self) -> int:
        return int(round(self.t_final / self.dt_control))

    def validate(self) -> None:
        if not self.dt_integration > 0 or not self.dt_control > 0:
            raise ConfigError("time steps must be positive")
        ratio = self.dt_control / self.dt_integration
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
            raise ConfigError(
                f"dt_control={self.dt_control} is not an integer multiple of dt_integration={self.dt_integration}"
            )
        if not self.t_final > 0:
            raise ConfigError("t_final must be positive")
        if self.integrator not in INTEGRATORS:
            raise ConfigError(f"unknown integrator {self.integrator!r}; choose from {sorted(INTEGRATORS)}")
        if self.continuous and self.substeps != 1:
            raise ConfigError("continuous control needs dt_control == dt_integration")
        if self.plant.k != self.actuator.k:
            raise ConfigError("actuator count does not match plant input dimension")
        ctrl = self.controller
        if "u_c_ref" in ctrl.requires and not isinstance(self.reference, PhysicalRefModel):
            raise ConfigError(f"{ctrl.kind.value} needs a physical reference model")
        if self.actuator.order > 1 and not hasattr(ctrl, "actuator"):
            raise ConfigError(f"{ctrl.kind.value} cannot drive an actuator of order {self.actuator.order}")
        if getattr(ctrl, "actuator", None) is not None and ctrl.actuator.order != self.actuator.order:
            raise ConfigError("controller actuator model order differs from the simulated actuator")
        if isinstance(self.reference, PhysicalRefModel) and ctrl.ref_order() > self.plant.r + 1:
            raise ConfigError("physical reference model provides derivatives up to r+1 only")


@dataclass
class SimTrace:
    """Signals sampled at every control tick (angles in radians)."""

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    u_c: np.ndarray
    y: np.ndarray
    y_ref: np.ndarray
    e_y: np.ndarray
    xdot: np.ndarray
    nu: np.ndarray
    y_top: np.ndarray
    y_stack: np.ndarray
    ref_stack: np.ndarray
    extras: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    CSV_COLUMNS = ("t", "{y}", "{y}_ref", "u", "u_c", "e_{y}", "nu")

    def __len__(self) -> int:
        return self.t.size

    def csv_header(self, name: str = "p") -> list[str]:
        cols = [c.format(y=name) for c in self.CSV_COLUMNS]
        m = self.y.shape[1]
        k = self.u.shape[1]
        out = ["t"]
        for c, width in zip(cols[1:], (m, m, k, k, m, m)):
            out += [c] if width == 1 else [f"{c}_{i + 1}" for i in range(width)]
        return out

    def csv_rows(self) -> np.ndarray:
        """Columns of :meth:`csv_header`, angular signals converted to degrees."""
        return np.column_stack([self.t, DEG * self.y, DEG * self.y_ref, DEG * self.u, DEG * self.u_c, DEG * self.e_y, DEG * self.nu])

    def to_csv(self, path, name: str | None = None) -> None:
        name = name or self.metadata.get("output_name", "p")
        np.savetxt(path, self.csv_rows(), delimiter=",", header=",".join(self.csv_header(name)), comments="", fmt="%.12g")


@dataclass(frozen=True)
class DeviationMetric:
    """Norms of ``e_sim - e_design`` after discarding the first ``discarded`` ticks."""

    linf: float
    l2: float
    samples: int
    discarded: int = 1
    units: str = "deg/s"

    @classmethod
    def between(cls, e_sim, e_design, dt: float, discard: int = 1, scale: float = DEG, units: str = "deg/s"):
        d = scale * (np.asarray(e_sim, dtype=float).ravel() - np.asarray(e_design, dtype=float).ravel())[discard:]
        if d.size == 0:
            return cls(0.0, 0.0, 0, discard, units)
        return cls(float(np.max(np.abs(d))), float(math.sqrt(np.sum(d * d) * dt)), int(d.size), discard, units)


class _Loop:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        p, a = cfg.plant, cfg.actuator
        self.n, self.k, self.ra = p.n, p.k, a.order
        self.na = self.ra * self.k
        self.ref = cfg.reference
        self.nr = self.ref.state_dim
        self.ctrl = cfg.controller
        self.ref_order = self.ctrl.ref_order()
        self.out_order = max(self.ctrl.output_order(), p.r)
        self.physical = isinstance(self.ref, PhysicalRefModel)

    def initial(self) -> np.ndarray:
        c = self.cfg
        x0 = np.zeros(self.n) if c.x0 is None else np.asarray(c.x0, dtype=float).ravel()
        a0 = np.zeros(self.na) if c.actuator0 is None else np.asarray(c.actuator0, dtype=float).ravel()
        r0 = self.ref.initial_state() if c.ref0 is None else np.asarray(c.ref0, dtype=float).ravel()
        if x0.size != self.n or a0.size != self.na or r0.size != self.nr:
            raise ConfigError("initial condition sizes do not match the models")
        return np.r_[x0, a0, r0]

    def split(self, z):
        n, na = self.n, self.na
        return z[:n], z[n:n + na].reshape(self.ra, self.k), z[n + na:]

    def evaluate(self, z, cmd, prev, internal=None):
        """Controller input and command at state ``z``."""
        plant = self.cfg.plant
        x, chain, s = self.split(z)
        u = chain[0]
        xdot = plant.f(x, u)
        ystack = plant.output_derivatives(x, u)
        x_high = xdot
        if self.out_order > plant.r or self.ra > 1:
            f_x, f_u = plant.state_jacobians(x, u)
            F_x, F_u = plant.F_x(x, u), plant.F_u(x, u)
            xs = [x, xdot]
            for j in range(2, self.ra + 1):
                xs.append(f_x @ xs[-1] + f_u @ chain[j - 1])
            x_high = xs[self.ra]
            rows = [ystack]
            for j in range(1, self.out_order - plant.r + 1):
                rows.append((F_x @ xs[j] + F_u @ chain[j])[None, :])
            ystack = np.vstack(rows)
        if self.physical and internal is None:
            internal = self.ref.internal_command(s, cmd)
        refstack = self.ref.outputs(s, cmd, internal, self.ref_order)
        inp = ControllerInput(
            x=x,
            u=u,
            y=ystack,
            y_ref=refstack,
            xdot=xdot,
            x0=prev[0],
            u0=prev[1],
            y0_r=prev[2],
            u_chain=chain,
            x_highest=x_high,
        )
        if self.physical:
            ex = self.ref.extras(s, cmd, internal)
            inp.u_c_ref = ex["u_c_ref"]
            inp.u_ref = ex["u_ref"]
        u_c, nu = self.ctrl.compute(inp)
        return inp, u_c, nu, internal

    def rhs(self, z, u_c, cmd, internal):
        x, chain, s = self.split(z)
        u = chain[0]
        dx = self.cfg.plant.f(x, u)
        da = self.cfg.actuator.chain_derivative(x, chain, u_c)
        ds = self.ref.derivative(s, cmd, internal)
        return np.concatenate([dx, np.ravel(da), ds])

    def top_derivative(self, inp, u_c):
        """``y^(r + r_a)`` from the plant and actuator equations with command ``u_c``."""
        plant, act = self.cfg.plant, self.cfg.actuator
        chain = inp.u_chain
        u_top = act.chain_derivative(inp.x, chain, u_c)
        u_top = np.ravel(u_top)[-self.k:]
        return plant.F_x(inp.x, inp.u) @ inp.x_highest + plant.F_u(inp.x, inp.u) @ u_top

    def run(self) -> SimTrace:
        cfg = self.cfg
        step = INTEGRATORS[cfg.integrator]
        h = cfg.dt_integration
        z = self.initial()
        x, chain, _ = self.split(z)
        prev = (x.copy(), chain[0].copy(), cfg.plant.F(x, chain[0]))
        rec = {key: [] for key in ("t", "x", "u", "u_c", "y", "y_ref", "xdot", "nu", "y_top", "ys", "rs")}
        extras: dict[str, list] = {}
        t_last = 0.0
        for tick in range(cfg.ticks + 1):
            t = tick * cfg.dt_control
            cmd = cfg.command.value(t)
            inp, u_c, nu, internal = self.evaluate(z, cmd, prev)
            rec["t"].append(t)
            rec["x"].append(inp.x.copy())
            rec["u"].append(inp.u.copy())
            rec["u_c"].append(np.array(u_c, dtype=float))
            rec["y"].append(inp.y[0].copy())
            rec["y_ref"].append(inp.y_ref[0].copy())
            rec["xdot"].append(inp.xdot.copy())
            rec["nu"].append(np.array(nu, dtype=float))
            rec["y_top"].append(self.top_derivative(inp, u_c))
            rec["ys"].append(np.array(inp.y, dtype=float))
            rec["rs"].append(np.array(inp.y_ref, dtype=float))
            if self.physical:
                for key, val in self.ref.extras(self.split(z)[2], cmd, internal).items():
                    extras.setdefault(key, []).append(np.array(val, dtype=float))
            if tick == cfg.ticks:
                break
            latched = (inp.x.copy(), inp.u.copy(), np.array(inp.y[cfg.plant.r], dtype=float))
            if cfg.continuous:
                def fun(w, prev=prev, cmd=cmd):
                    _, uc, _, ic = self.evaluate(w, cmd, prev)
                    return self.rhs(w, uc, cmd, ic)
            else:
                def fun(w, u_c=u_c, cmd=cmd, internal=internal):
                    return self.rhs(w, u_c, cmd, internal)
            for _ in range(cfg.substeps):
                z = step(fun, z, h)
                if not np.all(np.isfinite(z)) or np.max(np.abs(z)) > cfg.divergence_limit:
                    raise DivergenceError(t_last)
                t_last += h
            prev = latched
        arr = {key: np.array(val) for key, val in rec.items()}
        trace = SimTrace(
            t=arr["t"],
            x=arr["x"],
            u=arr["u"],
            u_c=arr["u_c"],
            y=arr["y"],
            y_ref=arr["y_ref"],
            e_y=arr["y_ref"] - arr["y"],
            xdot=arr["xdot"],
            nu=arr["nu"],
            y_top=arr["y_top"],
            y_stack=arr["ys"],
            ref_stack=arr["rs"],
            extras={key: np.array(val) for key, val in extras.items()},
            metadata=run_metadata(cfg),
        )
        return trace


def run_metadata(cfg: SimConfig) -> dict:
    ctrl = cfg.controller
    meta = {
        "name": cfg.name,
        "controller": ctrl.kind.value,
        "integrator": cfg.integrator,
        "dt_integration": cfg.dt_integration,
        "dt_control": cfg.dt_control,
        "t_final": cfg.t_final,
        "control_mode": "continuous" if cfg.continuous else "zero-order hold",
        "output_name": cfg.output_name,
        "warnings": [],
    }
    if cfg.plant.uses_fd_jacobians:
        meta["warnings"].append("plant Jacobians come from finite differences")
    try:
        coeffs = ctrl.design_coefficients()
        roots = np.roots(np.r_[1.0, coeffs[::-1]])
        if np.any(np.real(roots) >= 0):
            meta["warnings"].append(f"design error dynamics are not Hurwitz (roots {np.round(roots, 6).tolist()})")
    except NotImplementedError:
        pass
    return meta


def run_closed_loop(cfg: SimConfig) -> SimTrace:
    cfg.validate()
    return _Loop(cfg).run()


class PerturbationResult(NamedTuple):
    trace: SimTrace
    metric: DeviationMetric
    design: np.ndarray


def design_solution(coeffs, trace: SimTrace, channel: int = 0) -> ErrorSolution:
    """Design error dynamics started from the run's initial error derivatives."""
    N = len(coeffs)
    err0 = trace.ref_stack[0, :, channel][:N] - trace.y_stack[0, :, channel][:N]
    if err0.size < N:
        raise ConfigError(f"run does not record error derivatives up to order {N - 1}")
    return ErrorSolution(coeffs, err0)


def perturbation_study(cfg: SimConfig, p0_deg: float = 5.0, p_ref0_deg: float = 0.0) -> PerturbationResult:
    """Zero-command run from an output offset, compared with the design error dynamics.

    Both the plant output and the reference start at rest (``p0_deg`` and
    ``p_ref0_deg`` are in deg/s); the deviation metric is in deg/s.
    """
    plant = cfg.plant
    x0 = np.zeros(plant.n)
    x0[0] = p0_deg / DEG
    ref = cfg.reference
    if isinstance(ref, PhysicalRefModel):
        ref0 = ref.initial_state(np.r_[p_ref0_deg / DEG, np.zeros(plant.n - 1)])
    else:
        ref0 = ref.initial_state(p_ref0_deg / DEG)
    run_cfg = dataclasses.replace(cfg, command=Command(0.0), x0=tuple(x0), ref0=tuple(ref0))
    trace = run_closed_loop(run_cfg)
    sol = design_solution(cfg.controller.design_coefficients(), trace)
    design = sol(trace.t)
    metric = DeviationMetric.between(trace.e_y[:, 0], design, cfg.dt_control)
    trace.metadata["deviation_discarded_ticks"] = metric.discarded
    trace.metadata["warnings"].extend(sol.warnings)
    return PerturbationResult(trace, metric, design)


def with_bandwidth(cfg: SimConfig, omega: float) -> SimConfig:
    """Same scenario with actuator bandwidth ``omega`` and ``Omega_y = omega``."""
    act = FirstOrderActuatorBank(tuple([float(omega)] * cfg.plant.k))
    ctrl = cfg.controller
    changes = {}
    if hasattr(ctrl, "actuator"):
        changes["actuator"] = act
    spec = getattr(ctrl, "spec", None)
    if isinstance(spec, ErrorDynamicsSpec):
        changes["spec"] = spec.with_omega_y(omega)
    if isinstance(ctrl, RmFeedforwardController):
        raise ConfigError("bandwidth sweeps are not defined for the reference-model feed-forward law")
    return dataclasses.replace(cfg, actuator=act, controller=dataclasses.replace(ctrl, **changes))


class SweepPoint(NamedTuple):
    omega: float
    metric: DeviationMetric
    design_gap: DeviationMetric
    trace: SimTrace
    design: np.ndarray


def bandwidth_sweep(cfg: SimConfig, omegas: Sequence[float], p0_deg: float = 5.0, max_workers: int | None = None) -> list[SweepPoint]:
    """Perturbation study per actuator bandwidth.

    ``metric`` compares each run with its controller's own design dynamics.
    ``design_gap`` compares the cascade design (``Omega_y = omega``) with the
    system-only design ``e^(r) + sum K_i e^(i) = 0`` for the run's initial
    errors.
    """
    omegas = [float(w) for w in omegas]
    if not omegas or any(w <= 0 for w in omegas) or any(b <= a for a, b in zip(omegas, omegas[1:])):
        raise ValueError("bandwidth list must be positive and strictly increasing")
    cfgs = [with_bandwidth(cfg, w) for w in omegas]
    if max_workers and max_workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(perturbation_study, cfgs, [p0_deg] * len(cfgs)))
    else:
        results = [perturbation_study(c, p0_deg) for c in cfgs]
    points = []
    for w, c, res in zip(omegas, cfgs, results):
        spec = c.controller.spec
        cascade = np.array([k[0, 0] for k in spec.with_omega_y(w).coefficients])
        system = np.array([K[0, 0] for K in spec.gains])
        e_cascade = design_solution(cascade, res.trace)(res.trace.t)
        e_system = design_solution(system, res.trace)(res.trace.t)
        gap = DeviationMetric.between(e_cascade, e_system, c.dt_control)
        points.append(SweepPoint(w, res.metric, gap, res.trace, res.design))
    return points


class LimitResult(NamedTuple):
    omegas: np.ndarray
    gaps: np.ndarray
    slope: float | None


def limit_study(
    snapshot: ControllerInput,
    plant: PlantModel,
    spec: ErrorDynamicsSpec,
    omegas: Sequence[float],
    scaling=None,
) -> LimitResult:
    """Command gap between the dynamic-inversion law and its incremental limit.

    The snapshot is frozen; for each ``omega`` the actuators get bandwidth
    ``omega`` and the innermost bandwidth is ``omega`` (``Lambda * omega`` when
    ``scaling`` is given, compared against the scaled incremental law).  The
    slope of log-gap versus log-omega is fitted when all gaps are nonzero.
    """
    current = dataclasses.replace(snapshot, x0=snapshot.x, u0=snapshot.u, y0_r=np.asarray(snapshot.y).reshape(-1, plant.m)[plant.r])
    gaps = []
    for w in omegas:
        act = FirstOrderActuatorBank(tuple([float(w)] * plant.k))
        if scaling is None:
            s = spec.with_omega_y(w)
            incremental = indi_classic(current, plant, spec)
        else:
            lam = np.atleast_2d(np.asarray(scaling, dtype=float))
            lam = np.diag(np.ravel(lam)) if lam.shape[0] != lam.shape[1] else lam
            s = spec.with_omega_y(lam * w)
            incremental = indi_scaled(current, plant, lam, spec)
        full = andi_first_order(current, plant, act, s)
        gaps.append(float(np.linalg.norm(full - incremental)))
    omegas = np.asarray(omegas, dtype=float)
    gaps = np.asarray(gaps)
    slope = None
    if omegas.size >= 2 and np.all(gaps > 0):
        slope = float(np.polyfit(np.log(omegas), np.log(gaps), 1)[0])
    return LimitResult(omegas, gaps, slope)


def tracking_error(trace: SimTrace) -> float:
    """Largest ``|y - y_ref|`` over the run, deg/s."""
    return float(DEG * np.max(np.abs(trace.e_y)))


def settling_time(t, signal, final, band: float = 0.02) -> float:
    """Time after which ``signal`` stays within ``band * |final|`` of ``final``."""
    signal = np.asarray(signal, dtype=float)
    tol = band * max(abs(final), 1e-12)
    outside = np.nonzero(np.abs(signal - final) > tol)[0]
    if outside.size == 0:
        return float(t[0])
    if outside[-1] == len(signal) - 1:
        return float("nan")
    return float(t[outside[-1] + 1])


__all__ = [
    "Command",
    "ConfigError",
    "ContractError",
    "DeviationMetric",
    "DivergenceError",
    "IndiActuatorController",
    "IndiController",
    "LimitResult",
    "PerturbationResult",
    "ScaledIndiController",
    "SimConfig",
    "SimTrace",
    "SweepPoint",
    "bandwidth_sweep",
    "design_solution",
    "limit_study",
    "perturbation_study",
    "run_closed_loop",
    "settling_time",
    "tracking_error",
    "with_bandwidth",
]
