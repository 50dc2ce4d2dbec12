import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from andilab.controllers import (
    AndiController,
    AndiGeneralizedController,
    ContractError,
    ControllerInput,
    IndiActuatorController,
    IndiController,
    MissingSignalError,
    RmFeedforwardController,
    ScaledIndiController,
    andi_first_order,
    andi_generalized,
    check_scaling,
    indi_classic,
    indi_scaled,
    indi_with_actuators,
    rm_feedforward,
)
from andilab.error_spec import ErrorDynamicsSpec
from andilab.model import FirstOrderActuatorBank, RollPlant, first_order_as_generalized, second_order_actuator

PLANT = RollPlant()
ACT = FirstOrderActuatorBank((20.0,))
SPEC = ErrorDynamicsSpec.siso([13.2], 20.0)
val = st.floats(-10.0, 10.0, allow_nan=False)


def roll_input(p=0.0, u=0.0, ref=(0.0, 0.0, 0.0), p0=None, u0=None, **extra):
    x = np.array([p])
    uu = np.array([u])
    xdot = PLANT.f(x, uu)
    x0 = x if p0 is None else np.array([p0])
    u0 = uu if u0 is None else np.array([u0])
    return ControllerInput(
        x=x,
        u=uu,
        y=np.array([[p], [xdot[0]]]),
        y_ref=np.array(ref, dtype=float).reshape(-1, 1),
        xdot=xdot,
        x0=x0,
        u0=u0,
        y0_r=PLANT.f(x0, u0),
        **extra,
    )


class TestAndi:
    def test_steady_state_holds(self):
        # p = 4, u = 6.6*4/0.25 puts the plant at rest on the reference
        inp = roll_input(p=4.0, u=105.6, ref=(4.0, 0.0, 0.0))
        np.testing.assert_allclose(andi_first_order(inp, PLANT, ACT, SPEC), [105.6], rtol=1e-12)

    def test_step_onset(self):
        inp = roll_input(ref=(0.0, 0.0, 1320.0))
        assert andi_first_order(inp, PLANT, ACT, SPEC)[0] == pytest.approx(264.0, rel=1e-12)

    @given(val, val, val, val, val)
    def test_roll_closed_form(self, p, u, p_ref, p_ref_dot, p_ref_ddot):
        inp = roll_input(p=p, u=u, ref=(p_ref, p_ref_dot, p_ref_ddot))
        p_dot = -6.6 * p + 0.25 * u
        e, e_dot = p_ref - p, p_ref_dot - p_dot
        expected = (p_ref_ddot + 33.2 * e_dot + 264.0 * e - (-6.6) * p_dot) / (0.25 * 20.0) + u
        assert andi_first_order(inp, PLANT, ACT, SPEC)[0] == pytest.approx(expected, rel=1e-9, abs=1e-9)

    def test_needs_xdot(self):
        inp = roll_input(ref=(0.0, 0.0, 0.0))
        inp.xdot = None
        with pytest.raises(MissingSignalError):
            andi_first_order(inp, PLANT, ACT, SPEC)

    def test_controller_object(self):
        ctrl = AndiController(PLANT, actuator=ACT, spec=SPEC)
        inp = roll_input(p=1.0, u=2.0, ref=(3.0, 4.0, 5.0))
        u_c, nu = ctrl.compute(inp)
        np.testing.assert_allclose(u_c, andi_first_order(inp, PLANT, ACT, SPEC), rtol=1e-14)
        np.testing.assert_allclose(ctrl.design_coefficients(), [264.0, 33.2])
        assert ctrl.ref_order() == 2


class TestAndiGeneralized:
    def test_reduces_to_first_order(self):
        gen = first_order_as_generalized(ACT)
        rng = np.random.default_rng(0)
        for _ in range(20):
            inp = roll_input(p=rng.normal(), u=rng.normal(), ref=rng.normal(size=3))
            a = andi_first_order(inp, PLANT, ACT, SPEC)
            b = andi_generalized(inp, PLANT, gen, SPEC)
            assert abs(a[0] - b[0]) <= 1e-12 * max(1.0, abs(a[0]))

    def test_second_order_closed_form(self):
        act = second_order_actuator(20.0, 0.7)
        coeffs = np.array([5280.0, 769.6, 41.2])
        rng = np.random.default_rng(1)
        for _ in range(20):
            p, xi, xi_dot = rng.normal(size=3)
            ref = rng.normal(size=4)
            x, u = np.array([p]), np.array([xi])
            p_dot = -6.6 * p + 0.25 * xi
            p_ddot = -6.6 * p_dot + 0.25 * xi_dot
            inp = ControllerInput(
                x=x,
                u=u,
                y=np.array([[p], [p_dot], [p_ddot]]),
                y_ref=ref.reshape(-1, 1),
                xdot=np.array([p_dot]),
                u_chain=np.array([[xi], [xi_dot]]),
                x_highest=np.array([p_ddot]),
            )
            e = ref[:3] - np.array([p, p_dot, p_ddot])
            nu = ref[3] + coeffs @ e
            expected = (nu - (-6.6) * p_ddot + 0.25 * 2 * 0.7 * 20.0 * xi_dot) / (0.25 * 400.0) + xi
            got = AndiGeneralizedController(PLANT, actuator=act, spec=coeffs).compute(inp)[0]
            assert got[0] == pytest.approx(expected, rel=1e-12)

    def test_rest_holds(self):
        act = second_order_actuator()
        inp = ControllerInput(
            x=np.zeros(1),
            u=np.zeros(1),
            y=np.zeros((3, 1)),
            y_ref=np.zeros((4, 1)),
            xdot=np.zeros(1),
            u_chain=np.zeros((2, 1)),
            x_highest=np.zeros(1),
        )
        u_c = andi_generalized(inp, PLANT, act, np.array([5280.0, 769.6, 41.2]))
        np.testing.assert_allclose(u_c, inp.u)

    def test_missing_chain(self):
        inp = roll_input(ref=np.zeros(4))
        with pytest.raises(MissingSignalError):
            andi_generalized(inp, PLANT, second_order_actuator(), np.ones(3))


class TestIndi:
    def test_zero_error_holds_previous_input(self):
        inp = roll_input(p=1.0, u=26.4, ref=(1.0, 0.0))
        np.testing.assert_allclose(indi_classic(inp, PLANT, SPEC), inp.u0)

    def test_degree_example(self):
        # e_p = -5, e_p' = 33 (measured p' = -33), u = 0
        inp = ControllerInput(
            x=np.array([5.0]),
            u=np.zeros(1),
            y=np.array([[5.0], [-33.0]]),
            y_ref=np.array([[0.0], [0.0]]),
            x0=np.array([5.0]),
            u0=np.zeros(1),
            y0_r=np.array([-33.0]),
        )
        assert indi_classic(inp, PLANT, SPEC)[0] == pytest.approx(-132.0, rel=1e-12)

    @given(val, val, val, val, val)
    def test_roll_closed_form(self, p, u0, p0, p_ref, p_ref_dot):
        inp = roll_input(p=p, u=u0, ref=(p_ref, p_ref_dot), p0=p0, u0=u0)
        e = p_ref - p
        e_dot = p_ref_dot - (-6.6 * p0 + 0.25 * u0)
        expected = (e_dot - (-13.2) * e) / 0.25 + u0
        got = IndiController(PLANT, spec=SPEC).compute(inp)[0][0]
        assert got == pytest.approx(expected, rel=1e-9, abs=1e-9)

    def test_missing_previous_sample(self):
        inp = roll_input(ref=(0.0, 0.0))
        inp.y0_r = None
        with pytest.raises(MissingSignalError):
            IndiController(PLANT, spec=SPEC).compute(inp)


class TestIndiWithActuators:
    def test_zero_errors(self):
        inp = roll_input(p=0.0, u=0.7, ref=(0.0, 0.175, 0.0), u0=0.7)
        np.testing.assert_allclose(indi_with_actuators(inp, PLANT, ACT, SPEC, "raab"), [0.7], atol=1e-12)
        np.testing.assert_allclose(indi_with_actuators(inp, PLANT, ACT, SPEC, "equal_bw"), [0.7], atol=1e-12)

    @given(val, val, val, val, val)
    def test_raab_is_andi_without_state_term(self, p, u, a, b, c):
        inp = roll_input(p=p, u=u, ref=(a, b, c))
        andi = andi_first_order(inp, PLANT, ACT, SPEC)[0]
        dropped = -6.6 * inp.xdot[0] / (0.25 * 20.0)
        raab = indi_with_actuators(inp, PLANT, ACT, SPEC, "raab")[0]
        assert abs(raab - (andi + dropped)) <= 1e-12 * max(1.0, abs(andi), abs(dropped))

    @given(val, val, val, val, val)
    def test_equal_bw_matches_raab_when_current(self, p, u, a, b, c):
        inp = roll_input(p=p, u=u, ref=(a, b, c))
        eq = indi_with_actuators(inp, PLANT, ACT, SPEC, "equal_bw")[0]
        raab = indi_with_actuators(inp, PLANT, ACT, SPEC.with_omega_y(20.0), "raab")[0]
        assert abs(eq - raab) <= 1e-12 * max(1.0, abs(raab))

    def test_equal_bw_contract(self):
        with pytest.raises(ContractError):
            IndiActuatorController(PLANT, actuator=FirstOrderActuatorBank((20.0, 30.0)), spec=SPEC, variant="equal_bw")
        inp = roll_input(ref=(0.0, 0.0, 0.0))
        with pytest.raises(ContractError):
            indi_with_actuators(inp, PLANT, np.diag([20.0, 30.0]), SPEC, "equal_bw")

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            IndiActuatorController(PLANT, actuator=ACT, spec=SPEC, variant="other")

    def test_kind_follows_variant(self):
        assert IndiActuatorController(PLANT, actuator=ACT, spec=SPEC, variant="equal_bw").kind.value == "indi_actuators_equal_bw"
        assert IndiActuatorController(PLANT, actuator=ACT, spec=SPEC).kind.value == "indi_actuators_raab"


class TestScaledIndi:
    def test_identity_scaling_is_classic_with_current_input(self):
        inp = roll_input(p=1.0, u=2.0, ref=(3.0, 4.0))
        classic = indi_classic(inp, PLANT, SPEC)
        np.testing.assert_allclose(indi_scaled(inp, PLANT, 1.0, SPEC), classic, rtol=1e-14)

    def test_half_scaling_halves_increment(self):
        inp = roll_input(p=1.0, u=2.0, ref=(3.0, 4.0))
        full = indi_scaled(inp, PLANT, 1.0, SPEC) - inp.u
        half = indi_scaled(inp, PLANT, 0.5, SPEC) - inp.u
        np.testing.assert_allclose(half, 0.5 * full, rtol=1e-14)

    def test_scaling_checks(self):
        with pytest.raises(ContractError):
            check_scaling([[1.0, 0.1], [0.0, 1.0]])
        with pytest.raises(ContractError):
            check_scaling(0.0)
        with pytest.warns(RuntimeWarning):
            check_scaling(1.5)

    def test_design(self):
        ctrl = ScaledIndiController(PLANT, actuator=ACT, spec=SPEC, scaling=0.5)
        np.testing.assert_allclose(ctrl.design_coefficients(), [132.0, 23.2])


class TestRmFeedforward:
    def test_pass_through(self):
        inp = roll_input(p=1.0, u=0.4, ref=(1.0, -6.6 + 0.1, 0.0), u_c_ref=np.array([0.9]), u_ref=np.array([0.4]))
        np.testing.assert_allclose(rm_feedforward(inp, PLANT, ACT, 20.0), [0.9], rtol=1e-14)

    def test_feedback_gain(self):
        inp = roll_input(p=0.0, u=0.0, ref=(0.0, 1.0, 0.0), u_c_ref=np.zeros(1), u_ref=np.zeros(1))
        assert rm_feedforward(inp, PLANT, ACT, 20.0)[0] == pytest.approx(4.0)

    def test_requires_reference_signals(self):
        inp = roll_input(ref=(0.0, 0.0, 0.0))
        with pytest.raises(MissingSignalError):
            RmFeedforwardController(PLANT, omega_hat=ACT).compute(inp)


@settings(max_examples=50)
@given(val, val, val, val, val, val, st.floats(-5, 5, allow_nan=False))
def test_increment_consistency(p, u, a, b, c, p0, offset):
    """Shifting both u and u_0 by a constant shifts every command by the same constant."""
    laws = [
        lambda i: andi_first_order(i, PLANT, ACT, SPEC),
        lambda i: indi_classic(i, PLANT, SPEC),
        lambda i: indi_with_actuators(i, PLANT, ACT, SPEC, "raab"),
        lambda i: indi_with_actuators(i, PLANT, ACT, SPEC, "equal_bw"),
        lambda i: indi_scaled(i, PLANT, 0.7, SPEC),
        lambda i: rm_feedforward(i, PLANT, ACT, 20.0),
    ]
    for law in laws:
        # measured signals stay fixed; only the input samples move
        inp = roll_input(p=p, u=u, ref=(a, b, c), p0=p0, u_c_ref=np.array([0.3]), u_ref=np.array([0.1]))
        before = law(inp)[0]
        inp.u = inp.u + offset
        inp.u0 = inp.u0 + offset
        assert law(inp)[0] - before == pytest.approx(offset, abs=1e-9)


class TestLimit:
    def snapshot(self):
        return roll_input(p=0.08, u=0.03, ref=(0.05, 0.17, -0.7))

    def gap(self, w, scaling=None):
        inp = self.snapshot()
        act = FirstOrderActuatorBank((w,))
        if scaling is None:
            return abs(andi_first_order(inp, PLANT, act, SPEC.with_omega_y(w))[0] - indi_classic(inp, PLANT, SPEC)[0])
        return abs(andi_first_order(inp, PLANT, act, SPEC.with_omega_y(scaling * w))[0] - indi_scaled(inp, PLANT, scaling, SPEC)[0])

    @pytest.mark.parametrize("w", [10.0, 20.0, 40.0, 200.0])
    def test_doubling_halves_gap(self, w):
        assert self.gap(2 * w) / self.gap(w) == pytest.approx(0.5, rel=0.05)

    def test_scaled_limit(self):
        gaps = [self.gap(w, 0.5) for w in (10.0, 100.0, 1000.0, 10000.0)]
        assert all(b < a for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] / gaps[0] == pytest.approx(1e-3, rel=0.05)
