"""Reference models emitting ``y_ref`` and its time derivatives.

All models share the interface the simulator drives:

``state_dim``
    length of the model's integration state.
``internal_command(state, command)``
    command the model generates for itself (only the physical model has one).
``derivative(state, command, internal)``
    state derivative.
``outputs(state, command, internal, order)``
    ``(order + 1, m)`` stack ``y_ref, y_ref', ..., y_ref^(order)``.

Derivatives are taken with the external command held constant, which is how
the simulator applies it between control ticks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .controllers import AndiController, Controller, ControllerInput
from .error_spec import ErrorDynamicsSpec
from .model import FirstOrderActuatorBank, PlantModel


class UnsupportedReferenceModel(ValueError):
    pass


class LinearRefModel:
    """SISO linear reference model ``s' = A s + B c``, ``y_ref = C s``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return 1

    def internal_command(self, state, command):
        return None

    def derivative(self, state, command, internal=None):
        return self.A @ state + self.B * float(np.ravel(command)[0])

    def outputs(self, state, command, internal=None, order: int = 2):
        rows = [self.C @ state]
        d = self.derivative(state, command)
        for _ in range(order):
            rows.append(self.C @ d)
            d = self.A @ d
        return np.array(rows).reshape(order + 1, 1)

    def extras(self, state, command, internal=None) -> dict:
        return {}

    def initial_state(self, y_ref0: float = 0.0) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class FilterRefModel(LinearRefModel):
    """Second-order filter ``y'' = -2 zeta w y' + w^2 (y_c - y)``."""

    zeta: float = 0.7
    omega: float = 20.0

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("filter bandwidth must be positive")
        w = self.omega
        object.__setattr__(self, "A", np.array([[0.0, 1.0], [-w * w, -2 * self.zeta * w]]))
        object.__setattr__(self, "B", np.array([0.0, w * w]))
        object.__setattr__(self, "C", np.array([1.0, 0.0]))

    def initial_state(self, y_ref0=0.0):
        return np.array([y_ref0, 0.0])


@dataclass(frozen=True)
class RollRefModel(LinearRefModel):
    """Roll reference: ``p_ref' = -L_pd (delta - p_ref)``, ``delta' = w_d (p_c - delta)``.

    ``delta`` is a generalized roll acceleration building up with the desired
    actuator-like bandwidth ``omega_d``; in steady state ``p_ref = p_c``.
    """

    L_pd: float = -13.2
    omega_d: float = 20.0

    def __post_init__(self):
        L, w = self.L_pd, self.omega_d
        object.__setattr__(self, "A", np.array([[L, -L], [0.0, -w]]))
        object.__setattr__(self, "B", np.array([0.0, w]))
        object.__setattr__(self, "C", np.array([1.0, 0.0]))

    def initial_state(self, y_ref0=0.0):
        return np.array([y_ref0, y_ref0])

    def outputs(self, state, command, internal=None, order: int = 2):
        if order > 2:
            return super().outputs(state, command, internal, order)
        p_ref, delta = state
        stack = roll_ref_derivatives(self, p_ref, delta, float(np.ravel(command)[0]))
        return np.array(stack[: order + 1]).reshape(order + 1, 1)


def roll_ref_derivatives(m: RollRefModel, p_ref: float, delta: float, p_c: float) -> tuple[float, float, float]:
    """``(p_ref, p_ref', p_ref'')`` of the roll reference model."""
    vals = (p_ref, delta, p_c)
    if not all(np.isfinite(v) for v in vals):
        raise ValueError(f"non-finite reference state {vals}")
    p_dot = -m.L_pd * (delta - p_ref)
    p_ddot = -m.L_pd * (m.omega_d * (p_c - delta) - p_dot)
    return p_ref, p_dot, p_ddot


@dataclass(frozen=True)
class IndiRollRefModel(LinearRefModel):
    """First-order roll reference ``p_ref' = -L_pd (p_c - p_ref)``.

    With a negative ``L_pd`` the pole sits at ``L_pd`` (stable).
    """

    L_pd: float = -13.2

    def __post_init__(self):
        L = self.L_pd
        object.__setattr__(self, "A", np.array([[L]]))
        object.__setattr__(self, "B", np.array([-L]))
        object.__setattr__(self, "C", np.array([1.0]))

    def initial_state(self, y_ref0=0.0):
        return np.array([y_ref0])


def indi_ref_derivative(L_pd: float, p_ref: float, p_c: float) -> float:
    return -L_pd * (p_c - p_ref)


class PhysicalRefModel:
    """Replica of plant and actuator driven by its own reference-model controller.

    The replica state is ``(x_ref, u_ref)``.  The controller tracks the
    external command as a set point; by default it is the first-order
    dynamic inversion law on replica signals, so the reference closed loop
    follows the cascade ``spec`` exactly.

    Several independently allocated effectors with only part of the replica
    state controlled would let the replica drift from the plant, so that
    configuration is rejected.
    """

    def __init__(
        self,
        replica: PlantModel,
        actuator: FirstOrderActuatorBank,
        spec: ErrorDynamicsSpec | None = None,
        controller: Controller | None = None,
    ):
        if replica.k != actuator.k:
            raise ValueError("replica actuator count does not match the plant inputs")
        if replica.k > 1 and replica.m < replica.n:
            raise UnsupportedReferenceModel(
                "physical reference model with several independently allocated effectors "
                "and partially controlled state drifts away from the plant; gang the "
                "effectors into a virtual input or control every state"
            )
        if controller is None:
            if spec is None:
                raise ValueError("need either a reference-model controller or an error spec")
            controller = AndiController(replica, actuator=actuator, spec=spec)
        self.replica = replica
        self.actuator = actuator
        self.controller = controller

    @property
    def state_dim(self) -> int:
        return self.replica.n + self.replica.k

    @property
    def m(self) -> int:
        return self.replica.m

    def split(self, state):
        n = self.replica.n
        return state[:n], state[n:]

    def initial_state(self, x_ref0=None, u_ref0=None) -> np.ndarray:
        x = np.zeros(self.replica.n) if x_ref0 is None else np.atleast_1d(np.asarray(x_ref0, float))
        u = np.zeros(self.replica.k) if u_ref0 is None else np.atleast_1d(np.asarray(u_ref0, float))
        return np.r_[x, u]

    def internal_command(self, state, command):
        x, u = self.split(state)
        m = self.replica.m
        setpoint = np.zeros((self.controller.ref_order() + 1, m))
        setpoint[0] = np.resize(np.ravel(command), m)
        inp = ControllerInput(
            x=x,
            u=u,
            y=self.replica.output_derivatives(x, u),
            y_ref=setpoint,
            xdot=self.replica.f(x, u),
        ).previous_or_current()
        u_c, _ = self.controller.compute(inp)
        return u_c

    def derivative(self, state, command, internal):
        x, u = self.split(state)
        return np.r_[self.replica.f(x, u), self.actuator.chain_derivative(x, u, internal)]

    def outputs(self, state, command, internal, order: int = 2):
        x, u = self.split(state)
        r = self.replica.r
        if order > r + 1:
            raise ValueError(f"physical reference model provides derivatives up to {r + 1}")
        base = self.replica.output_derivatives(x, u)
        if order <= r:
            return base[: order + 1]
        xdot = self.replica.f(x, u)
        top = self.replica.F_x(x, u) @ xdot + self.replica.F_u(x, u) @ (self.actuator.omega @ (internal - u))
        return np.vstack([base, top])

    def extras(self, state, command, internal) -> dict:
        x, u = self.split(state)
        return {"u_ref": u, "u_c_ref": np.asarray(internal), "xdot_ref": self.replica.f(x, u)}


def virtual_input_gang(contributions) -> np.ndarray:
    """Sum effector contributions ``b_j u_j`` into one virtual input."""
    parts = [np.atleast_1d(np.asarray(c, dtype=float)) for c in contributions]
    if not parts:
        raise ValueError("no contributions to gang")
    return np.sum(parts, axis=0)


@dataclass(frozen=True)
class GangedReplica:
    """Input-affine replica ``x' = a(x) + sum_j b_j u_j`` with equal effector lags.

    Either integrate every effector (:meth:`per_effector_derivative`, state
    ``(x, u_1..u_k)``) or only their combined contribution
    (:meth:`ganged_derivative`, state ``(x, u_ydot)``).
    """

    a: Callable
    b: tuple
    bandwidths: tuple
    n: int = field(default=1)

    def __post_init__(self):
        bw = tuple(float(w) for w in self.bandwidths)
        if len(bw) != len(self.b):
            raise ValueError("one bandwidth per effector is required")
        if len(set(bw)) != 1:
            raise UnsupportedReferenceModel(
                "effectors with different dynamics cannot be ganged into one virtual input"
            )
        object.__setattr__(self, "bandwidths", bw)
        object.__setattr__(self, "b", tuple(np.atleast_1d(np.asarray(bj, dtype=float)) for bj in self.b))

    @property
    def omega(self) -> float:
        return self.bandwidths[0]

    def per_effector_derivative(self, state, commands):
        x = state[: self.n]
        u = state[self.n:]
        u_c = np.atleast_1d(commands)
        xdot = np.asarray(self.a(x), dtype=float) + virtual_input_gang(bj * uj for bj, uj in zip(self.b, u))
        return np.r_[xdot, self.omega * (u_c - u)]

    def ganged_derivative(self, state, commands):
        x = state[: self.n]
        u_v = state[self.n:]
        target = virtual_input_gang(bj * cj for bj, cj in zip(self.b, np.atleast_1d(commands)))
        return np.r_[np.asarray(self.a(x), dtype=float) + u_v, self.omega * (target - u_v)]
