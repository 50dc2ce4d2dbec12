"""Plant and actuator dynamics with their derivative maps.

A plant is ``xdot = f(x, u)``, ``y = h(x)`` with relative degree ``r``, so that
``y^(r) = F(x, u)`` is the first output derivative where the actuator state
``u`` shows up.  Controllers need ``F`` together with its Jacobians ``F_x`` and
``F_u``; built-in models supply them analytically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class DimensionError(ValueError):
    """An array argument does not have the expected shape."""


def as_vector(value, size: int, name: str = "value") -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1 or arr.shape[0] != size:
        raise DimensionError(f"{name}: expected {size} entries, got shape {arr.shape}")
    return arr


def as_matrix(value, rows: int, cols: int, name: str = "value") -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1 and rows == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim == 1 and cols == 1:
        arr = arr.reshape(-1, 1)
    if arr.shape != (rows, cols):
        raise DimensionError(f"{name}: expected shape {(rows, cols)}, got {arr.shape}")
    return arr


class PlantModel:
    """Base class for plants used by the controllers and the simulator.

    Subclasses set ``n``, ``k``, ``m`` and ``r`` and implement :meth:`f`,
    :meth:`h` and :meth:`F`.  :meth:`F_x`, :meth:`F_u` and
    :meth:`state_jacobians` fall back to central differences; a model relying
    on that fallback reports ``uses_fd_jacobians = True`` so runs can flag it.
    """

    n: int
    k: int
    m: int
    r: int
    uses_fd_jacobians: bool = True
    fd_step: float = 1e-6

    def f(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def h(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def F(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def F_x(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return jacobians_fd(self, x, u, self.fd_step)[0]

    def F_u(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return jacobians_fd(self, x, u, self.fd_step)[1]

    def state_jacobians(self, x: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(df/dx, df/du)``."""
        return _central_jacobians(self.f, x, u, self.fd_step)

    def output_derivatives(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Stack ``y, ydot, ..., y^(r)`` as an ``(r+1, m)`` array.

        The default only covers ``r == 1``; higher relative degrees need an
        override since the intermediate derivatives are model specific.
        """
        if self.r != 1:
            raise NotImplementedError(
                f"{type(self).__name__} has relative degree {self.r}; "
                "override output_derivatives"
            )
        return np.vstack([self.h(x), self.F(x, u)])

    def is_linear(self) -> bool:
        return False


@dataclass(frozen=True)
class RollPlant(PlantModel):
    """Roll rate dynamics ``pdot = L_p p + L_u u`` with output ``y = p``."""

    L_p: float = -6.6
    L_u: float = 0.25
    n: int = field(default=1, init=False)
    k: int = field(default=1, init=False)
    m: int = field(default=1, init=False)
    r: int = field(default=1, init=False)
    uses_fd_jacobians: bool = field(default=False, init=False)

    def f(self, x, u):
        return np.array([self.L_p * x[0] + self.L_u * u[0]])

    def h(self, x):
        return np.array([x[0]])

    def F(self, x, u):
        return self.f(x, u)

    def F_x(self, x, u):
        return np.array([[self.L_p]])

    def F_u(self, x, u):
        return np.array([[self.L_u]])

    def state_jacobians(self, x, u):
        return np.array([[self.L_p]]), np.array([[self.L_u]])

    def is_linear(self) -> bool:
        return True


class FunctionPlant(PlantModel):
    """Plant assembled from plain callables.

    ``F_x``/``F_u`` may be omitted, in which case finite differences are used
    and ``uses_fd_jacobians`` is set.
    """

    def __init__(
        self,
        f: Callable,
        h: Callable,
        F: Callable,
        n: int,
        k: int,
        m: int,
        r: int = 1,
        F_x: Callable | None = None,
        F_u: Callable | None = None,
        output_derivatives: Callable | None = None,
        linear: bool = False,
    ):
        self._f, self._h, self._F = f, h, F
        self._F_x, self._F_u = F_x, F_u
        self._outputs = output_derivatives
        self.n, self.k, self.m, self.r = n, k, m, r
        self.uses_fd_jacobians = F_x is None or F_u is None
        self._linear = linear

    def f(self, x, u):
        return np.atleast_1d(np.asarray(self._f(x, u), dtype=float))

    def h(self, x):
        return np.atleast_1d(np.asarray(self._h(x), dtype=float))

    def F(self, x, u):
        return np.atleast_1d(np.asarray(self._F(x, u), dtype=float))

    def F_x(self, x, u):
        if self._F_x is None:
            return super().F_x(x, u)
        return as_matrix(self._F_x(x, u), self.m, self.n, "F_x")

    def F_u(self, x, u):
        if self._F_u is None:
            return super().F_u(x, u)
        return as_matrix(self._F_u(x, u), self.m, self.k, "F_u")

    def output_derivatives(self, x, u):
        if self._outputs is not None:
            return np.asarray(self._outputs(x, u), dtype=float).reshape(self.r + 1, self.m)
        return super().output_derivatives(x, u)

    def is_linear(self) -> bool:
        return self._linear


@dataclass(frozen=True)
class FirstOrderActuatorBank:
    """Independent first-order lags ``udot = Omega (u_c - u)``."""

    bandwidths: tuple[float, ...]

    def __post_init__(self):
        bw = tuple(float(b) for b in np.atleast_1d(self.bandwidths))
        if not bw or any(not np.isfinite(b) or b <= 0.0 for b in bw):
            raise ValueError(f"actuator bandwidths must be positive, got {bw}")
        object.__setattr__(self, "bandwidths", bw)

    @property
    def k(self) -> int:
        return len(self.bandwidths)

    @property
    def order(self) -> int:
        return 1

    @property
    def omega(self) -> np.ndarray:
        return np.diag(self.bandwidths)

    def chain_derivative(self, x, chain: np.ndarray, u_c: np.ndarray) -> np.ndarray:
        return actuator_derivative(self, np.ravel(chain), u_c)


@dataclass(frozen=True)
class GeneralizedActuator:
    """Actuator of order ``r_a``: ``u^(r_a) = Omega_A + Omega_B (u_c - u)``.

    ``omega_a(x, chain)`` returns a k-vector and ``omega_b(x, chain)`` a k-by-k
    matrix, where ``chain`` is the ``(r_a, k)`` stack ``u, udot, ...,
    u^(r_a-1)``.  The lower derivatives play the role of the internal actuator
    states.
    """

    order: int
    k: int
    omega_a: Callable
    omega_b: Callable
    name: str = "generalized"

    def __post_init__(self):
        if self.order < 1:
            raise ValueError(f"actuator order must be >= 1, got {self.order}")
        if self.k < 1:
            raise ValueError(f"actuator count must be >= 1, got {self.k}")

    def Omega_A(self, x, chain) -> np.ndarray:
        return as_vector(self.omega_a(x, chain), self.k, "Omega_A")

    def Omega_B(self, x, chain) -> np.ndarray:
        return as_matrix(self.omega_b(x, chain), self.k, self.k, "Omega_B")

    def chain_derivative(self, x, chain: np.ndarray, u_c: np.ndarray) -> np.ndarray:
        chain = np.asarray(chain, dtype=float).reshape(self.order, self.k)
        top = generalized_actuator_step(self, x, chain, u_c)
        return np.vstack([chain[1:], top[None, :]])


def first_order_as_generalized(act: FirstOrderActuatorBank) -> GeneralizedActuator:
    k = act.k
    zero = np.zeros(k)
    omega = act.omega
    return GeneralizedActuator(
        order=1,
        k=k,
        omega_a=lambda x, chain: zero,
        omega_b=lambda x, chain: omega,
        name="first_order",
    )


def second_order_actuator(omega: float = 20.0, zeta: float = 0.7) -> GeneralizedActuator:
    """Single second-order servo ``xi'' = omega^2 (xi_c - xi) - 2 zeta omega xi'``."""
    if omega <= 0:
        raise ValueError(f"omega must be positive, got {omega}")
    w2 = np.array([[omega * omega]])

    def omega_a(x, chain):
        return np.array([-2.0 * zeta * omega * chain[1][0]])

    def omega_b(x, chain):
        return w2

    return GeneralizedActuator(order=2, k=1, omega_a=omega_a, omega_b=omega_b, name="second_order")


def plant_derivative(model: PlantModel, x, u) -> np.ndarray:
    x = as_vector(x, model.n, "x")
    u = as_vector(u, model.k, "u")
    return model.f(x, u)


def actuator_derivative(act: FirstOrderActuatorBank, u, u_c) -> np.ndarray:
    u = as_vector(u, act.k, "u")
    u_c = as_vector(u_c, act.k, "u_c")
    return np.asarray(act.bandwidths) * (u_c - u)


def generalized_actuator_step(act: GeneralizedActuator, x, chain, u_c) -> np.ndarray:
    """Return the highest actuator derivative ``u^(r_a)``."""
    chain = np.asarray(chain, dtype=float)
    if chain.size == act.order * act.k:
        chain = chain.reshape(act.order, act.k)
    if chain.shape != (act.order, act.k):
        raise DimensionError(
            f"actuator chain: expected shape {(act.order, act.k)}, got {chain.shape}"
        )
    u_c = as_vector(u_c, act.k, "u_c")
    return act.Omega_A(x, chain) + act.Omega_B(x, chain) @ (u_c - chain[0])


def _central_jacobians(fun, x, u, h_step):
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    base = np.atleast_1d(fun(x, u))
    jx = np.empty((base.size, x.size))
    ju = np.empty((base.size, u.size))
    for i in range(x.size):
        d = np.zeros_like(x)
        d[i] = h_step * max(1.0, abs(x[i]))
        jx[:, i] = (np.atleast_1d(fun(x + d, u)) - np.atleast_1d(fun(x - d, u))) / (2 * d[i])
    for j in range(u.size):
        d = np.zeros_like(u)
        d[j] = h_step * max(1.0, abs(u[j]))
        ju[:, j] = (np.atleast_1d(fun(x, u + d)) - np.atleast_1d(fun(x, u - d))) / (2 * d[j])
    if not (np.all(np.isfinite(jx)) and np.all(np.isfinite(ju))):
        raise FloatingPointError("non-finite value while differencing F")
    return jx, ju


def jacobians_fd(model: PlantModel, x, u, h_step: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference ``(F_x, F_u)``; the oracle for analytic Jacobians."""
    if not h_step > 0:
        raise ValueError(f"h_step must be positive, got {h_step}")
    x = as_vector(x, model.n, "x")
    u = as_vector(u, model.k, "u")
    return _central_jacobians(model.F, x, u, h_step)
