import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from andilab.model import (
    DimensionError,
    FirstOrderActuatorBank,
    FunctionPlant,
    GeneralizedActuator,
    RollPlant,
    actuator_derivative,
    first_order_as_generalized,
    generalized_actuator_step,
    jacobians_fd,
    plant_derivative,
    second_order_actuator,
)
from andilab.sim import rk4_step

finite = st.floats(-50.0, 50.0, allow_nan=False)


class TestRollPlant:
    def test_defaults(self):
        plant = RollPlant()
        assert (plant.L_p, plant.L_u) == (-6.6, 0.25)
        assert (plant.n, plant.k, plant.m, plant.r) == (1, 1, 1, 1)
        assert not plant.uses_fd_jacobians

    def test_derivative(self):
        assert plant_derivative(RollPlant(), [2.0], [4.0])[0] == pytest.approx(-6.6 * 2.0 + 0.25 * 4.0)

    def test_output_stack(self):
        stack = RollPlant().output_derivatives(np.array([1.0]), np.array([2.0]))
        np.testing.assert_allclose(stack, [[1.0], [-6.6 + 0.5]])

    @given(finite, finite, st.floats(-10, 10, allow_nan=False))
    def test_linearity(self, x, u, alpha):
        plant = RollPlant()
        lhs = plant.f(np.array([alpha * x]), np.array([alpha * u]))
        rhs = alpha * plant.f(np.array([x]), np.array([u]))
        assert abs(lhs[0] - rhs[0]) <= 1e-12 * max(1.0, abs(rhs[0]))

    def test_fd_jacobians_match_parameters(self):
        F_x, F_u = jacobians_fd(RollPlant(), [0.3], [-0.1])
        assert F_x[0, 0] == pytest.approx(-6.6, rel=1e-9)
        assert F_u[0, 0] == pytest.approx(0.25, rel=1e-9)

    @settings(max_examples=100)
    @given(finite, finite)
    def test_analytic_jacobians_match_fd(self, x, u):
        plant = RollPlant()
        F_x, F_u = jacobians_fd(plant, [x], [u])
        np.testing.assert_allclose(plant.F_x([x], [u]), F_x, rtol=1e-6)
        np.testing.assert_allclose(plant.F_u([x], [u]), F_u, rtol=1e-6)

    def test_dimension_checked(self):
        with pytest.raises(DimensionError):
            plant_derivative(RollPlant(), [1.0, 2.0], [0.0])


class TestFunctionPlant:
    def test_fd_fallback_is_flagged(self):
        plant = FunctionPlant(f=lambda x, u: u, h=lambda x: x, F=lambda x, u: u, n=1, k=1, m=1)
        assert plant.uses_fd_jacobians
        np.testing.assert_allclose(plant.F_x([0.2], [0.1]), [[0.0]], atol=1e-12)
        np.testing.assert_allclose(plant.F_u([0.2], [0.1]), [[1.0]], rtol=1e-9)

    def test_analytic_jacobians_not_flagged(self):
        plant = FunctionPlant(
            f=lambda x, u: -x + u,
            h=lambda x: x,
            F=lambda x, u: -x + u,
            n=1,
            k=1,
            m=1,
            F_x=lambda x, u: [[-1.0]],
            F_u=lambda x, u: [[1.0]],
        )
        assert not plant.uses_fd_jacobians
        assert plant.F_u([0.0], [0.0]).shape == (1, 1)

    def test_nonlinear_fd_agrees(self):
        plant = FunctionPlant(
            f=lambda x, u: np.sin(x) + x * u,
            h=lambda x: x,
            F=lambda x, u: np.sin(x) + x * u,
            n=1,
            k=1,
            m=1,
        )
        F_x, F_u = jacobians_fd(plant, [0.4], [1.5])
        assert F_x[0, 0] == pytest.approx(np.cos(0.4) + 1.5, rel=1e-6)
        assert F_u[0, 0] == pytest.approx(0.4, rel=1e-6)

    def test_higher_relative_degree_needs_override(self):
        plant = FunctionPlant(f=lambda x, u: x, h=lambda x: x, F=lambda x, u: u, n=1, k=1, m=1, r=2)
        with pytest.raises(NotImplementedError):
            plant.output_derivatives(np.zeros(1), np.zeros(1))

    def test_bad_step_rejected(self):
        with pytest.raises(ValueError):
            jacobians_fd(RollPlant(), [0.0], [0.0], h_step=0.0)


class TestActuators:
    def test_first_order_lag(self):
        act = FirstOrderActuatorBank((20.0,))
        assert actuator_derivative(act, [0.0], [1.0])[0] == 20.0
        np.testing.assert_array_equal(act.omega, [[20.0]])

    @pytest.mark.parametrize("bad", [(0.0,), (-1.0,), (), (float("nan"),)])
    def test_bandwidth_validated(self, bad):
        with pytest.raises(ValueError):
            FirstOrderActuatorBank(bad)

    @pytest.mark.parametrize(
        "xi, xi_dot, xi_c, expected",
        [(0.0, 0.0, 0.0, 0.0), (0.0, 1.0, 0.0, -28.0), (0.0, 0.0, 0.1, 40.0)],
    )
    def test_second_order_instance(self, xi, xi_dot, xi_c, expected):
        act = second_order_actuator(20.0, 0.7)
        top = generalized_actuator_step(act, np.zeros(1), np.array([[xi], [xi_dot]]), [xi_c])
        assert top[0] == pytest.approx(expected, abs=1e-12)

    def test_chain_derivative_stacks(self):
        act = second_order_actuator(20.0, 0.7)
        d = act.chain_derivative(None, np.array([[0.0], [1.0]]), np.array([0.1]))
        np.testing.assert_allclose(d, [[1.0], [40.0 - 28.0]])

    def test_order_validated(self):
        with pytest.raises(ValueError):
            GeneralizedActuator(order=0, k=1, omega_a=None, omega_b=None)

    def test_chain_shape_checked(self):
        act = second_order_actuator()
        with pytest.raises(DimensionError):
            generalized_actuator_step(act, None, np.zeros(3), [0.0])

    def test_generalized_first_order_matches_bank(self):
        bank = FirstOrderActuatorBank((20.0, 35.0))
        gen = first_order_as_generalized(bank)
        u_c = np.array([1.0, -0.5])

        def run(act):
            z = np.array([0.2, 0.0])
            out = []
            for _ in range(500):
                z = rk4_step(lambda w: np.ravel(act.chain_derivative(None, w.reshape(1, 2), u_c)), z, 1e-3)
                out.append(z.copy())
            return np.array(out)

        assert np.max(np.abs(run(bank) - run(gen))) <= 1e-12
