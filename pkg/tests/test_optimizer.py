"""Barrier optimizer tests: formula evaluators, gradients, descent."""

import math
import random

import pytest

from wbansim.analytics import ack_length_term, data_length, fer_analytic
from wbansim.errors import DomainError, RangeError
from wbansim.optimizer import (barrier_gradient, barrier_objective,
                               epsilon_schedule, epsilon_schedule_exact,
                               grid_search_fer, optimize_payload,
                               penalized_fer, penalized_fer_gradient)


# ------------------------------------------------------- formula evaluators

def test_objective_collapses_at_zero_ber():
    for x, eps in ((1.0, 0.5), (10.0, 2.0), (30.0, 1.0)):
        assert barrier_objective(x, 0.0, eps) == pytest.approx(1.0 + eps / x)


def test_objective_diverges_at_boundary():
    assert barrier_objective(1e-12, 1e-3, 1.0) > 1e9


def test_objective_reference_value():
    # 50-digit evaluation: 0.90559013741503815128...
    assert barrier_objective(10, 1e-3, 1.0) == pytest.approx(
        0.9055901374150382, rel=1e-12)


def test_objective_rejects_bad_domain():
    with pytest.raises(DomainError):
        barrier_objective(0.0, 1e-3, 1.0)
    with pytest.raises(DomainError):
        barrier_objective(-1.0, 1e-3, 1.0)


def test_gradient_zero_ber_is_pure_barrier():
    for x, eps in ((2.0, 1.0), (7.0, 0.25)):
        assert barrier_gradient(x, 0.0, eps) == pytest.approx(-eps / x ** 2)


def test_gradient_negative_at_small_payload():
    assert barrier_gradient(0.5, 1e-3, 1.0) < 0
    assert penalized_fer_gradient(0.5, 1e-3, 1.0) < 0


def test_gradient_reference_value():
    assert barrier_gradient(10, 1e-3, 1.0) == pytest.approx(
        -0.0020756781366998194, rel=1e-12)


def test_gradient_rejects_total_loss_rate():
    with pytest.raises(DomainError):
        barrier_gradient(1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        penalized_fer_gradient(1.0, 1.0, 1.0)


def test_schedule_boundary_values():
    assert epsilon_schedule(10.0, 0.0) == 0.0
    assert epsilon_schedule(0.0, 1e-3) == 0.0


def test_schedule_positive_and_crosschecked():
    # -8 x^2 ln(1-p)(1-p)^x computed independently
    rng = random.Random(8)
    for _ in range(50):
        x = rng.uniform(0.1, 40.0)
        p = rng.uniform(1e-6, 0.2)
        expected = -8.0 * x * x * math.log(1 - p) * (1 - p) ** x
        got = epsilon_schedule(x, p)
        assert got > 0
        assert got == pytest.approx(expected, rel=1e-12)


def test_schedule_reference_value():
    assert epsilon_schedule(10, 1e-3) == pytest.approx(
        0.7924321863300181, rel=1e-12)


# ------------------------------------------------------------ gradient laws

def central_difference(f, x, h):
    return (f(x + h) - f(x - h)) / (2 * h)


def test_exact_gradient_matches_finite_differences():
    rng = random.Random(404)
    for _ in range(50):
        x = rng.uniform(0.5, 40.0)
        p = 10 ** rng.uniform(-5, -2)
        eps = 10 ** rng.uniform(-4, 0.5)
        h = 1e-5 * max(1.0, x)
        fd = central_difference(lambda v: penalized_fer(v, p, eps), x, h)
        grad = penalized_fer_gradient(x, p, eps)
        assert grad == pytest.approx(fd, rel=1e-6)


def test_printed_gradient_matches_its_own_potential():
    # the printed form is the exact derivative of -8(1-p)^x + eps/x
    rng = random.Random(405)
    for _ in range(50):
        x = rng.uniform(0.5, 40.0)
        p = 10 ** rng.uniform(-5, -2)
        eps = 10 ** rng.uniform(-4, 0.5)
        h = 1e-5 * max(1.0, x)
        potential = lambda v: -8.0 * (1 - p) ** v + eps / v
        fd = central_difference(potential, x, h)
        assert barrier_gradient(x, p, eps) == pytest.approx(fd, rel=1e-6)


def test_printed_vs_exact_gradient_deviation_is_the_exponent():
    # the two forms differ exactly by the frame exponent substitution:
    # swap payload -> 8*(payload+8)+L_ack in the power and they coincide
    deviations = []
    for x in (1.0, 5.0, 10.0, 20.0, 30.0):
        for p in (1e-4, 1e-3, 1e-2):
            eps = 1.0
            printed = barrier_gradient(x, p, eps)
            exact = penalized_fer_gradient(x, p, eps)
            deviations.append(abs(printed - exact))
            rebuilt = (-8.0 * math.log(1 - p)
                       * (1 - p) ** (data_length(x) + ack_length_term(p))
                       - eps / x ** 2)
            assert rebuilt == pytest.approx(exact, rel=1e-12)
    assert max(deviations) > 0  # they are genuinely different formulas


# ---------------------------------------------------------------- descent

def test_optimum_beats_integer_grid():
    for p in (1e-4, 1e-3, 1e-2):
        result = optimize_payload(p)
        assert result.converged
        grid = [fer_analytic(payload, p) for payload in range(1, 31)]
        assert result.fer_opt <= min(grid)
        assert result.best_integer.fer <= min(grid)


def test_smaller_payload_means_smaller_fer_along_trace():
    result = optimize_payload(1e-3)
    payloads = [pt.payload for pt in result.trace]
    assert payloads[-1] < payloads[0]
    fers = [fer_analytic(pt.payload, 1e-3) for pt in result.trace]
    assert fers[-1] < fers[0]


def test_iterates_stay_feasible():
    for p in (1e-4, 1e-2):
        for mode in (False, True):
            result = optimize_payload(p, verbatim_gradient=mode)
            assert all(pt.payload > 0 for pt in result.trace)


def test_verbatim_mode_reaches_the_boundary_too():
    result = optimize_payload(1e-3, verbatim_gradient=True)
    assert result.converged
    assert result.payload_opt < 1.0
    assert result.best_integer.payload in (0, 1)


def test_tiny_rate_flat_landscape_terminates():
    result = optimize_payload(1e-15)
    assert result.converged
    assert result.payload_opt > 0


def test_iteration_cap_returns_best_iterate_with_diagnostic():
    result = optimize_payload(1e-3, max_iterations=1)
    assert not result.converged
    assert result.diagnostic is not None
    assert result.payload_opt > 0
    assert result.iterations == 1


def test_input_validation():
    with pytest.raises(RangeError):
        optimize_payload(0.0)
    with pytest.raises(RangeError):
        optimize_payload(1.0)
    with pytest.raises(DomainError):
        optimize_payload(1e-3, payload_0=0.0)


def test_trace_epsilon_shrinks():
    result = optimize_payload(1e-3)
    eps = [abs(pt.epsilon) for pt in result.trace[1:]]
    assert all(b < a for a, b in zip(eps, eps[1:]))


def test_grid_search_oracle():
    # analytic FER increases with payload, so the grid best is payload 1
    for p in (1e-4, 1e-3, 1e-2):
        assert grid_search_fer(p).payload == 1


def test_exact_schedule_matches_at_small_rates():
    # the two schedules agree in the small-rate limit (exponent irrelevant)
    x = 12.0
    a = epsilon_schedule(x, 1e-7)
    b = epsilon_schedule_exact(x, 1e-7)
    assert a == pytest.approx(b, rel=1e-4)
