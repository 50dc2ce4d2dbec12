"""Control laws producing actuator commands from measurements and references.

Every law maps a :class:`ControllerInput` snapshot to an actuator command
``u_c``.  The free functions implement the laws directly; the controller
classes bundle a law with its model data, declare which signals they consume
and expose the error dynamics they are designed for.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .allocation import allocate, right_inverse
from .error_spec import ErrorDynamicsSpec, chain_pseudo_control, pseudo_control
from .model import FirstOrderActuatorBank, GeneralizedActuator, PlantModel


class MissingSignalError(ValueError):
    pass


class ContractError(ValueError):
    pass


class ControllerKind(str, enum.Enum):
    ANDI = "andi"
    ANDI_GENERALIZED = "andi_generalized"
    INDI = "indi"
    INDI_ACTUATORS_EQUAL_BW = "indi_actuators_equal_bw"
    INDI_ACTUATORS_RAAB = "indi_actuators_raab"
    INDI_SCALED = "indi_scaled"
    RM_FEEDFORWARD = "rm_feedforward"


@dataclass
class ControllerInput:
    """Signals available to a law at one control tick.

    ``y`` stacks ``y, ydot, ...`` and ``y_ref`` stacks ``y_ref, y_ref', ...``
    row by row.  ``x0``/``u0``/``y0_r`` are the samples latched at the previous
    tick and feed the incremental laws.  ``u_chain`` and ``x_highest`` are only
    needed for higher-order actuators; ``u_c_ref``/``u_ref`` only for the
    reference-model feed-forward law.
    """

    x: np.ndarray
    u: np.ndarray
    y: np.ndarray
    y_ref: np.ndarray
    xdot: np.ndarray | None = None
    x0: np.ndarray | None = None
    u0: np.ndarray | None = None
    y0_r: np.ndarray | None = None
    u_chain: np.ndarray | None = None
    x_highest: np.ndarray | None = None
    u_c_ref: np.ndarray | None = None
    u_ref: np.ndarray | None = None

    def need(self, *names: str) -> None:
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise MissingSignalError(f"controller input lacks {', '.join(missing)}")

    def previous_or_current(self) -> "ControllerInput":
        """Copy with unset previous-sample fields filled from the current sample."""
        return ControllerInput(
            **{
                **self.__dict__,
                "x0": self.x if self.x0 is None else self.x0,
                "u0": self.u if self.u0 is None else self.u0,
                "y0_r": self.y[-1] if self.y0_r is None else self.y0_r,
            }
        )


def _omega_matrix(omega) -> np.ndarray:
    if isinstance(omega, FirstOrderActuatorBank):
        return omega.omega
    a = np.asarray(omega, dtype=float)
    if a.ndim == 0:
        return a.reshape(1, 1)
    if a.ndim == 1:
        return np.diag(a)
    return a


def _ref_stack(inp: ControllerInput, count: int, m: int) -> np.ndarray:
    ref = np.asarray(inp.y_ref, dtype=float).reshape(-1, m)
    if ref.shape[0] < count:
        raise MissingSignalError(f"reference stack has {ref.shape[0]} rows, law needs {count}")
    return ref


def _system_error(spec: ErrorDynamicsSpec, ref, y, y_r) -> np.ndarray:
    """``e^(r) + sum_{i<r} K_i e^(i)`` with ``e^(r) = y_ref^(r) - y_r``."""
    r = spec.r
    out = ref[r] - y_r
    for i, K in enumerate(spec.gains):
        out = out + K @ (ref[i] - y[i])
    return out


def andi_pseudo_control(inp: ControllerInput, spec: ErrorDynamicsSpec) -> np.ndarray:
    ref = _ref_stack(inp, spec.r + 2, spec.m)
    return pseudo_control(spec, ref[: spec.r + 2], np.asarray(inp.y).reshape(-1, spec.m)[: spec.r + 1])


def andi_first_order(inp: ControllerInput, model: PlantModel, omega, spec: ErrorDynamicsSpec) -> np.ndarray:
    """Dynamic inversion through first-order actuators.

    ``u_c = (F_u Omega)^+ (nu - F_x xdot) + u``
    """
    inp.need("xdot")
    nu = andi_pseudo_control(inp, spec)
    return _andi_command(inp, model, _omega_matrix(omega), nu)


def _andi_command(inp, model, Om, nu, inverse=None):
    F_x = model.F_x(inp.x, inp.u)
    A = inverse if inverse is not None else right_inverse(model.F_u(inp.x, inp.u) @ Om)
    return A @ (nu - F_x @ inp.xdot) + inp.u


def andi_generalized(
    inp: ControllerInput,
    model: PlantModel,
    act: GeneralizedActuator,
    spec,
    g_term: Callable | None = None,
) -> np.ndarray:
    """Dynamic inversion through an actuator of order ``r_a``.

    ``u_c = C_a(F_u Omega_B, nu - F_x x^(r_a) - F_u Omega_A - g) + u``.
    ``spec`` is either an :class:`ErrorDynamicsSpec` (first-order actuators
    only) or the scalar monic coefficients ``k_0..k_{r+r_a-1}``.
    """
    nu = generalized_pseudo_control(inp, model, act, spec)
    return _generalized_command(inp, model, act, nu, g_term)


def generalized_pseudo_control(inp, model, act, spec) -> np.ndarray:
    N = model.r + act.order
    if isinstance(spec, ErrorDynamicsSpec):
        if spec.r + 1 != N:
            raise ContractError(f"error spec has order {spec.r + 1}, chain needs {N}")
        return andi_pseudo_control(inp, spec)
    ref = _ref_stack(inp, N + 1, model.m)
    y = np.asarray(inp.y).reshape(-1, model.m)
    if y.shape[0] < N:
        raise MissingSignalError(f"output stack has {y.shape[0]} rows, law needs {N}")
    return chain_pseudo_control(spec, ref[: N + 1], y[:N])


def _generalized_command(inp, model, act, nu, g_term=None):
    chain = inp.u_chain
    if chain is None:
        if act.order != 1:
            raise MissingSignalError("controller input lacks u_chain")
        chain = np.asarray(inp.u).reshape(1, -1)
    chain = np.asarray(chain, dtype=float).reshape(act.order, act.k)
    x_high = inp.x_highest if inp.x_highest is not None else inp.xdot
    if x_high is None:
        raise MissingSignalError(f"controller input lacks x^({act.order})")
    F_x = model.F_x(inp.x, inp.u)
    F_u = model.F_u(inp.x, inp.u)
    rhs = nu - F_x @ x_high - F_u @ act.Omega_A(inp.x, chain)
    if g_term is not None:
        rhs = rhs - np.atleast_1d(g_term(inp))
    return allocate(F_u @ act.Omega_B(inp.x, chain), rhs) + inp.u


def indi_classic(inp: ControllerInput, model: PlantModel, spec: ErrorDynamicsSpec) -> np.ndarray:
    """``u_c = F_u^+ (e^(r) + sum K_i e^(i)) + u_0`` with ``e^(r)`` from the latched ``y_0^(r)``."""
    inp.need("x0", "u0", "y0_r")
    ref = _ref_stack(inp, spec.r + 1, spec.m)
    y = np.asarray(inp.y).reshape(-1, spec.m)
    F_u = model.F_u(inp.x0, inp.u0)
    return right_inverse(F_u) @ _system_error(spec, ref, y, inp.y0_r) + inp.u0


def indi_with_actuators(
    inp: ControllerInput,
    model: PlantModel,
    omega,
    spec: ErrorDynamicsSpec,
    variant: str = "raab",
) -> np.ndarray:
    """INDI with the actuator lag folded into the error controller.

    ``variant="equal_bw"`` needs a scalar bandwidth ``omega`` and is the
    incremental law ``F_u^+ (1/omega) nu + u_0`` built on the latched sample;
    ``variant="raab"`` is ``(F_u Omega)^+ nu + u``.  Both are the first-order
    dynamic inversion with ``F_x xdot`` dropped.
    """
    if variant == "equal_bw":
        Om = _omega_matrix(omega)
        w = Om[0, 0]
        if not np.allclose(Om, w * np.eye(Om.shape[0]), rtol=0, atol=0):
            raise ContractError("equal-bandwidth variant needs Omega = omega * I")
        inp.need("x0", "u0", "y0_r")
        return _equal_bw_command(inp, spec.with_omega_y(w), w, right_inverse(model.F_u(inp.x0, inp.u0)))[0]
    if variant == "raab":
        nu = andi_pseudo_control(inp, spec)
        return right_inverse(model.F_u(inp.x, inp.u) @ _omega_matrix(omega)) @ nu + inp.u
    raise ValueError(f"unknown variant {variant!r}")


def _equal_bw_command(inp, spec, w, inverse):
    """Incremental command with the latched ``y_0^(r)``; ``spec`` already has ``Omega_y = w``."""
    ref = _ref_stack(inp, spec.r + 2, spec.m)
    y = np.asarray(inp.y).reshape(-1, spec.m)
    y_meas = np.vstack([y[: spec.r], inp.y0_r])
    nu = pseudo_control(spec, ref[: spec.r + 2], y_meas)
    return inverse @ (nu / w) + inp.u0, nu


def check_scaling(lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if lam.ndim == 0:
        lam = lam.reshape(1, 1)
    elif lam.ndim == 1:
        lam = np.diag(lam)
    if lam.ndim != 2 or np.count_nonzero(lam - np.diag(np.diag(lam))):
        raise ContractError("input scaling Lambda must be diagonal")
    d = np.diag(lam)
    if np.any(d <= 0):
        raise ContractError("input scaling entries must be positive")
    if np.any(d > 1):
        warnings.warn("input scaling above 1 raises the innermost bandwidth beyond the actuator", RuntimeWarning)
    return lam


def indi_scaled(inp: ControllerInput, model: PlantModel, lam, spec: ErrorDynamicsSpec) -> np.ndarray:
    """``u_c = F_u^+ Lambda (e^(r) + sum K_i e^(i)) + u``."""
    lam = check_scaling(lam)
    ref = _ref_stack(inp, spec.r + 1, spec.m)
    y = np.asarray(inp.y).reshape(-1, spec.m)
    return right_inverse(model.F_u(inp.x, inp.u)) @ (lam @ _system_error(spec, ref, y, y[spec.r])) + inp.u


def rm_feedforward(inp: ControllerInput, model_hat: PlantModel, omega_hat, omega_d: float, x_ref=None) -> np.ndarray:
    """Feed-forward from a physical reference model plus derivative feedback.

    ``u_c = u_c,ref - u_ref + (F_u_hat omega_hat)^+ omega_d (y_ref^(n) - y^(n)) + u``;
    for a single channel the gain is ``(1/F_u_hat)(omega_d/omega_hat)``.
    """
    inp.need("u_c_ref", "u_ref")
    n = model_hat.r
    ref = _ref_stack(inp, n + 1, model_hat.m)
    y = np.asarray(inp.y).reshape(-1, model_hat.m)
    xr = inp.x if x_ref is None else x_ref
    F_u_hat = model_hat.F_u(xr, inp.u_ref)
    gain = right_inverse(F_u_hat @ _omega_matrix(omega_hat))
    # grouped so matched signals cancel exactly
    return inp.u_c_ref + (inp.u - inp.u_ref) + gain @ (omega_d * (ref[n] - y[n]))


@dataclass(frozen=True)
class Controller:
    """Common interface used by the simulator.

    ``requires`` names the :class:`ControllerInput` fields the law reads,
    ``ref_order`` the highest reference derivative it consumes and
    ``output_order`` the highest output derivative.  For linear plants the
    effectiveness inverses are computed once and cached.
    """

    plant: PlantModel

    kind = None
    requires = frozenset()

    def ref_order(self) -> int:
        return self.plant.r + 1

    def output_order(self) -> int:
        return self.plant.r

    def compute(self, inp: ControllerInput) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(u_c, nu)``; ``nu`` is the law's virtual control for diagnostics."""
        raise NotImplementedError

    def design_coefficients(self, channel: int = 0) -> np.ndarray:
        """Monic error-dynamics coefficients the law is designed for (low order first)."""
        raise NotImplementedError

    def check_input(self, inp: ControllerInput) -> None:
        inp.need(*self.requires)

    def _inverse(self, key: str, matrix: Callable[[], np.ndarray]) -> np.ndarray:
        cache = self.__dict__.setdefault("_inverses", {})
        if not self.plant.is_linear():
            return right_inverse(matrix())
        if key not in cache:
            cache[key] = right_inverse(matrix())
        return cache[key]


def _coeffs(spec: ErrorDynamicsSpec, channel: int) -> np.ndarray:
    return np.array([c[channel, channel] for c in spec.coefficients])


@dataclass(frozen=True)
class AndiController(Controller):
    actuator: FirstOrderActuatorBank = None
    spec: ErrorDynamicsSpec = None

    kind = ControllerKind.ANDI
    requires = frozenset({"xdot"})

    def compute(self, inp):
        self.check_input(inp)
        nu = andi_pseudo_control(inp, self.spec)
        inv = self._inverse("FuOmega", lambda: self.plant.F_u(inp.x, inp.u) @ self.actuator.omega)
        return _andi_command(inp, self.plant, self.actuator.omega, nu, inv), nu

    def design_coefficients(self, channel=0):
        return _coeffs(self.spec, channel)


@dataclass(frozen=True)
class AndiGeneralizedController(Controller):
    actuator: GeneralizedActuator = None
    spec: object = None
    g_term: Callable | None = None

    kind = ControllerKind.ANDI_GENERALIZED
    requires = frozenset({"xdot"})

    def ref_order(self):
        return self.plant.r + self.actuator.order

    def output_order(self):
        return self.plant.r + self.actuator.order - 1

    def compute(self, inp):
        self.check_input(inp)
        nu = generalized_pseudo_control(inp, self.plant, self.actuator, self.spec)
        return _generalized_command(inp, self.plant, self.actuator, nu, self.g_term), nu

    def design_coefficients(self, channel=0):
        if isinstance(self.spec, ErrorDynamicsSpec):
            return _coeffs(self.spec, channel)
        return np.asarray(self.spec, dtype=float)


@dataclass(frozen=True)
class IndiController(Controller):
    spec: ErrorDynamicsSpec = None

    kind = ControllerKind.INDI
    requires = frozenset({"x0", "u0", "y0_r"})

    def ref_order(self):
        return self.plant.r

    def compute(self, inp):
        self.check_input(inp)
        ref = _ref_stack(inp, self.spec.r + 1, self.spec.m)
        y = np.asarray(inp.y).reshape(-1, self.spec.m)
        inv = self._inverse("Fu", lambda: self.plant.F_u(inp.x0, inp.u0))
        u_c = inv @ _system_error(self.spec, ref, y, inp.y0_r) + inp.u0
        nu = ref[self.spec.r]
        for i, K in enumerate(self.spec.gains):
            nu = nu + K @ (ref[i] - y[i])
        return u_c, nu

    def design_coefficients(self, channel=0):
        return np.array([K[channel, channel] for K in self.spec.gains])


@dataclass(frozen=True)
class IndiActuatorController(Controller):
    actuator: FirstOrderActuatorBank = None
    spec: ErrorDynamicsSpec = None
    variant: str = "raab"

    requires = frozenset({"x0", "u0", "y0_r"})

    @property
    def kind(self):
        if self.variant == "equal_bw":
            return ControllerKind.INDI_ACTUATORS_EQUAL_BW
        return ControllerKind.INDI_ACTUATORS_RAAB

    def __post_init__(self):
        if self.variant not in ("raab", "equal_bw"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == "equal_bw" and len(set(self.actuator.bandwidths)) != 1:
            raise ContractError("equal-bandwidth variant needs identical actuator bandwidths")

    def check_input(self, inp):
        if self.variant == "equal_bw":
            inp.need(*self.requires)

    def _design_spec(self):
        if self.variant != "equal_bw":
            return self.spec
        cache = self.__dict__.setdefault("_design", {})
        if "spec" not in cache:
            cache["spec"] = self.spec.with_omega_y(self.actuator.bandwidths[0])
        return cache["spec"]

    def compute(self, inp):
        self.check_input(inp)
        spec = self._design_spec()
        if self.variant == "equal_bw":
            inv = self._inverse("Fu", lambda: self.plant.F_u(inp.x0, inp.u0))
            return _equal_bw_command(inp, spec, self.actuator.bandwidths[0], inv)
        nu = andi_pseudo_control(inp, spec)
        inv = self._inverse("FuOmega", lambda: self.plant.F_u(inp.x, inp.u) @ self.actuator.omega)
        return inv @ nu + inp.u, nu

    def design_coefficients(self, channel=0):
        return _coeffs(self._design_spec(), channel)


@dataclass(frozen=True)
class ScaledIndiController(Controller):
    actuator: FirstOrderActuatorBank = None
    spec: ErrorDynamicsSpec = None
    scaling: object = 1.0

    kind = ControllerKind.INDI_SCALED

    def ref_order(self):
        return self.plant.r

    def compute(self, inp):
        u_c = indi_scaled(inp, self.plant, self.scaling, self.spec)
        return u_c, np.zeros(self.plant.m)

    def design_coefficients(self, channel=0):
        lam = check_scaling(self.scaling)
        w = self.actuator.bandwidths[min(channel, self.actuator.k - 1)]
        return _coeffs(self.spec.channel(channel).with_omega_y(lam[channel, channel] * w), 0)


@dataclass(frozen=True)
class RmFeedforwardController(Controller):
    """Plant-side law for a physical reference model; ``plant`` holds the hat model."""

    omega_hat: object = None
    omega_d: float = 20.0

    kind = ControllerKind.RM_FEEDFORWARD
    requires = frozenset({"u_c_ref", "u_ref"})

    def compute(self, inp):
        self.check_input(inp)
        u_c = rm_feedforward(inp, self.plant, self.omega_hat, self.omega_d)
        n = self.plant.r
        ref = np.asarray(inp.y_ref).reshape(-1, self.plant.m)
        y = np.asarray(inp.y).reshape(-1, self.plant.m)
        nu = self.omega_d * (ref[n] - y[n])
        if ref.shape[0] > n + 1:
            nu = nu + ref[n + 1]
        return u_c, nu

    def design_coefficients(self, channel=0):
        # derivative-only feedback: e^(n+1) + omega_d e^(n) = 0
        n = self.plant.r
        return np.r_[np.zeros(n), self.omega_d]
