"""Step-size schedules, gate functions, and the drift constant E0."""

import numpy as np
import pytest

from adaptix import (ConfigError, NoClosedFormError, constant_gate,
                     constant_schedule, e0_exact, e0_monte_carlo, gamma_eval,
                     gaussian_noise, kesten_gate, plakhov_almeida_gate,
                     power_schedule, reciprocal_schedule,
                     scaled_rademacher_noise, sigmoid_eval, smooth_gate,
                     uniform_ball_noise, validate_schedule)
from adaptix.report import FAIL, NOT_CHECKED, PASS


def verdicts(report, *check_ids):
    return tuple(report.verdict(cid) for cid in check_ids)


# ---------------------------------------------------------------------------
# gamma


def test_reciprocal_values():
    sched = reciprocal_schedule()
    assert gamma_eval(sched, 4.0) == 0.25
    assert gamma_eval(sched, 0.0) == 1.0      # floored at s_floor = 1
    assert gamma_eval(sched, 0.5) == 1.0
    assert gamma_eval(sched, 10.0) == 0.1


def test_reciprocal_custom_floor():
    sched = reciprocal_schedule(s_floor=4.0)
    assert gamma_eval(sched, 0.0) == 0.25
    assert gamma_eval(sched, 8.0) == 0.125


def test_power_values():
    sched = power_schedule(gamma0=1.0, p=0.75)
    assert gamma_eval(sched, 15.0) == pytest.approx(0.125, abs=1e-15)
    assert gamma_eval(sched, 0.0) == 1.0


def test_constant_values():
    sched = constant_schedule(0.3)
    assert gamma_eval(sched, 0.0) == 0.3
    assert gamma_eval(sched, 1e9) == 0.3


def test_gamma_vectorized():
    sched = reciprocal_schedule()
    out = gamma_eval(sched, np.array([0.0, 2.0, 4.0]))
    assert out.shape == (3,)
    assert np.allclose(out, [1.0, 0.5, 0.25])


def test_gamma_rejects_negative_counter():
    with pytest.raises(ValueError):
        gamma_eval(reciprocal_schedule(), -0.5)


def test_schedule_parameter_validation():
    with pytest.raises(ConfigError):
        reciprocal_schedule(s_floor=0.0)
    with pytest.raises(ConfigError):
        power_schedule(gamma0=-1.0, p=1.0)
    with pytest.raises(ConfigError):
        power_schedule(gamma0=1.0, p=0.0)
    with pytest.raises(ConfigError):
        constant_schedule(0.0)


# ---------------------------------------------------------------------------
# step-size conditions (B2.1 positivity, B2.2 divergent sum, B2.3 square
# summability along s ~ t growth)


def test_reciprocal_satisfies_all_conditions():
    report = validate_schedule(reciprocal_schedule())
    assert verdicts(report, "B2.1", "B2.2", "B2.3") == (PASS, PASS, PASS)


@pytest.mark.parametrize("p,b22,b23", [
    (1.0, PASS, PASS),
    (0.75, PASS, PASS),
    (0.5, PASS, FAIL),    # sum of squares diverges at the boundary
    (0.4, PASS, FAIL),
    (1.5, FAIL, PASS),    # steps vanish too quickly to keep moving
])
def test_power_condition_table(p, b22, b23):
    report = validate_schedule(power_schedule(gamma0=1.0, p=p))
    assert report.verdict("B2.1") == PASS
    assert report.verdict("B2.2") == b22
    assert report.verdict("B2.3") == b23


def test_constant_schedule_fails_square_summability():
    report = validate_schedule(constant_schedule(0.5))
    assert report.verdict("B2.1") == PASS
    assert report.verdict("B2.2") == PASS
    assert report.verdict("B2.3") == FAIL
    assert not report.all_pass


# ---------------------------------------------------------------------------
# gates


def test_gate_step_families():
    kesten = kesten_gate(u_plus=2.0)
    assert sigmoid_eval(kesten, -1.0) == 0.0
    assert sigmoid_eval(kesten, 3.0) == 2.0
    assert sigmoid_eval(kesten, 0.0) == 2.0   # right convention by default

    pa = plakhov_almeida_gate(-0.5, 1.0)
    assert sigmoid_eval(pa, -2.0) == -0.5
    assert sigmoid_eval(pa, 0.5) == 1.0


def test_gate_at_zero_conventions():
    left = plakhov_almeida_gate(-0.5, 1.0, at_zero="left")
    mid = plakhov_almeida_gate(-0.5, 1.0, at_zero="midpoint")
    right = plakhov_almeida_gate(-0.5, 1.0, at_zero="right")
    assert sigmoid_eval(left, 0.0) == -0.5
    assert sigmoid_eval(mid, 0.0) == 0.25
    assert sigmoid_eval(right, 0.0) == 1.0
    assert left.u_at_zero == -0.5
    assert right.u_at_zero == 1.0


def test_smooth_gate_values():
    gate = smooth_gate(-0.5, 1.0, beta=0.1)
    # logistic interpolation: halfway between the limits at 0
    assert sigmoid_eval(gate, 0.0) == pytest.approx(0.25, abs=1e-15)
    assert sigmoid_eval(gate, 1e4) == pytest.approx(1.0, abs=1e-12)
    assert sigmoid_eval(gate, -1e4) == pytest.approx(-0.5, abs=1e-12)
    assert gate.u_at_zero == pytest.approx(0.25)


def test_gate_is_monotone_and_bounded():
    grid = np.linspace(-50.0, 50.0, 1001)
    for gate in (kesten_gate(), plakhov_almeida_gate(-0.3, 0.8),
                 smooth_gate(-0.3, 0.8, beta=2.0), constant_gate(0.7)):
        vals = sigmoid_eval(gate, grid)
        assert np.all(np.diff(vals) >= 0.0)
        assert np.all(vals >= gate.u_minus - 1e-12)
        assert np.all(vals <= gate.u_plus + 1e-12)


def test_gate_parameter_validation():
    with pytest.raises(ConfigError) as exc:
        kesten_gate(u_plus=-0.1)
    assert exc.value.assumption == "B4.1"
    assert "B4.1" in str(exc.value)
    with pytest.raises(ConfigError):
        plakhov_almeida_gate(0.0, 1.0)   # needs a strictly negative branch
    with pytest.raises(ConfigError):
        plakhov_almeida_gate(1.0, 0.5)   # u_minus above u_plus
    with pytest.raises(ConfigError):
        smooth_gate(-0.5, 1.0, beta=0.0)
    with pytest.raises(ConfigError):
        constant_gate(0.0)


# ---------------------------------------------------------------------------
# E0 = E[u(-<xi_1, xi_2>)]


def test_e0_constant_gate_is_exact():
    est = e0_exact(constant_gate(0.7), gaussian_noise(np.eye(3)))
    assert est.value == 0.7
    assert est.stderr == 0.0
    assert est.method == "exact"


def test_e0_kesten_gaussian():
    # sign-symmetric continuous noise: the positive branch fires half the time
    est = e0_exact(kesten_gate(u_plus=1.0), gaussian_noise(np.eye(2)))
    assert est.value == 0.5
    est = e0_exact(kesten_gate(u_plus=3.0), gaussian_noise([[2.0]]))
    assert est.value == 1.5


def test_e0_kesten_uniform_ball():
    est = e0_exact(kesten_gate(), uniform_ball_noise(3, radius=2.0))
    assert est.value == 0.5


def test_e0_no_closed_form_cases():
    with pytest.raises(NoClosedFormError):
        e0_exact(kesten_gate(), scaled_rademacher_noise(2, 1.0))
    with pytest.raises(NoClosedFormError):
        e0_exact(plakhov_almeida_gate(-0.5, 1.0), gaussian_noise(np.eye(2)))
    with pytest.raises(NoClosedFormError):
        e0_exact(smooth_gate(-0.5, 1.0, 2.0), gaussian_noise(np.eye(2)))


def sign_symmetric_midpoint(gate):
    # Independent oracle: for noise with -xi distributed like xi, the inner
    # product v = -<xi_1, xi_2> satisfies v ~ -v, so E[u(v)] equals the
    # symmetrised value E[(u(v) + u(-v))/2].  For a step gate on continuous
    # noise that is (u_minus + u_plus)/2; the logistic gate symmetrises to
    # the same midpoint because expit(b) + expit(-b) = 1.
    return 0.5 * (gate.u_minus + gate.u_plus)


def test_e0_monte_carlo_matches_midpoint_oracle():
    noise = gaussian_noise(np.eye(2))
    for gate in (plakhov_almeida_gate(-0.5, 1.0),
                 smooth_gate(-0.5, 1.0, beta=0.7)):
        est = e0_monte_carlo(gate, noise, n_samples=200_000, seed=31)
        expected = sign_symmetric_midpoint(gate)
        assert abs(est.value - expected) <= 4.0 * est.stderr
        assert est.method == "monte_carlo"
        assert est.n_samples == 200_000


def test_e0_monte_carlo_matches_exact_for_kesten():
    est = e0_monte_carlo(kesten_gate(), gaussian_noise(np.eye(2)),
                         n_samples=200_000, seed=7)
    assert abs(est.value - 0.5) <= 4.0 * est.stderr


def test_e0_monte_carlo_deterministic():
    gate = plakhov_almeida_gate(-0.5, 1.0)
    noise = uniform_ball_noise(2, 1.0)
    a = e0_monte_carlo(gate, noise, n_samples=50_000, seed=5)
    b = e0_monte_carlo(gate, noise, n_samples=50_000, seed=5)
    assert a.value == b.value
    assert a.stderr == b.stderr


def test_e0_monte_carlo_constant_integrand_is_exact():
    est = e0_monte_carlo(constant_gate(0.7), gaussian_noise(np.eye(2)),
                         n_samples=10_000, seed=0)
    assert est.value == 0.7
    assert est.stderr == 0.0
    with pytest.raises(ValueError):
        e0_monte_carlo(constant_gate(0.7), gaussian_noise(np.eye(2)),
                       n_samples=1)


def test_e0_monte_carlo_error_scaling():
    gate = kesten_gate()
    noise = gaussian_noise(np.eye(2))
    small = e0_monte_carlo(gate, noise, n_samples=100_000, seed=3)
    double = e0_monte_carlo(gate, noise, n_samples=200_000, seed=3)
    assert small.stderr / double.stderr == pytest.approx(np.sqrt(2), rel=0.05)
    other = e0_monte_carlo(gate, noise, n_samples=100_000, seed=99)
    assert abs(small.value - other.value) <= 4.0 * small.stderr


def test_e0_monte_carlo_rejects_negative_drift():
    # midpoint -0.25: the counter would trend downward
    gate = plakhov_almeida_gate(-1.0, 0.5)
    with pytest.raises(ConfigError) as exc:
        e0_monte_carlo(gate, gaussian_noise(np.eye(2)), n_samples=100_000,
                       seed=2)
    assert exc.value.assumption == "B4.2"
