import logging

import numpy as np
import pytest

from ctdd.config import example_excitation, example_state
from ctdd.exceptions import DimensionMismatch, InsufficientDerivativeOrder, RankDeficient
from ctdd.legendre import LegendreSeries, diff_series, gauss_legendre, project, uniform_rule
from ctdd.lti import (
    CallableInput,
    LtiSystem,
    PolynomialInput,
    SampledTrajectory,
    auxiliary_system,
    observability_matrix,
    simulate,
    simulate_series,
    stack_output_derivatives,
    structural_indices,
    toeplitz_matrix,
)

logger = logging.getLogger()


def test_simulate_example(trajectory: SampledTrajectory):
    """
    Test for `simulate` method on the scalar example.

    Args:
        trajectory (SampledTrajectory): Response to ``t^2`` from ``x(-1) = 0``.
    """
    t = trajectory.rule.nodes
    x = trajectory.state.block(0)[:, 0]
    assert np.allclose(x, example_state(t), atol=1e-12)
    # x' = -x + u
    assert np.allclose(trajectory.state.block(1)[:, 0], -x + t ** 2, atol=1e-12)
    assert np.allclose(trajectory.input.block(2)[:, 0], 2.0)
    assert np.allclose(trajectory.output.block(0), trajectory.state.block(0))


def test_simulate_callable_matches_polynomial(system: LtiSystem, rule):
    """
    Test for `simulate` through the integrator path.

    Args:
        system (LtiSystem): Scalar example.
        rule (QuadratureRule): 200-node rule.
    """
    signal = CallableInput([lambda t: t[:, None] ** 2, lambda t: 2 * t[:, None]], dim=1)
    integrated = simulate(system, signal, [0.0], rule, L=1, K=2)
    exact = simulate(system, example_excitation(), [0.0], rule, L=1, K=2)
    assert np.allclose(integrated.x_derivs, exact.x_derivs, atol=1e-9)


def test_simulate_errors(system: LtiSystem, rule):
    only_values = CallableInput([lambda t: t[:, None] ** 2], dim=1)
    with pytest.raises(InsufficientDerivativeOrder):
        simulate(system, only_values, [0.0], rule, L=2, K=2)
    with pytest.raises(DimensionMismatch):
        simulate(system, example_excitation(), [0.0, 1.0], rule, L=1, K=2)


def test_simulate_series(system: LtiSystem, rule):
    """
    Test for `simulate_series` with the example input given as a Legendre series.
    """
    u_series = project(rule.nodes ** 2, rule, 3, 1)
    x = simulate_series(system, u_series, [0.0], rule)
    assert np.allclose(x[:, 0], example_state(rule.nodes), atol=1e-12)


def test_structural_indices(system: LtiSystem):
    indices = structural_indices(system)
    assert indices.mcmillan == 1
    assert indices.lag == 1
    assert indices.controllable and indices.observable


def test_structural_indices_two_states():
    """
    Test for `structural_indices` on a double integrator observed through its position.
    """
    sys = LtiSystem(A=[[0.0, 1.0], [0.0, 0.0]], B=[[0.0], [1.0]], C=[[1.0, 0.0]], D=[[0.0]])
    indices = structural_indices(sys)
    assert indices.mcmillan == 2
    assert indices.lag == 2
    assert observability_matrix(sys, 1).shape == (2, 2)


def test_toeplitz_and_output_stack():
    """
    Test for `toeplitz_matrix` and `stack_output_derivatives`.
    """
    sys = LtiSystem(A=[[-2.0]], B=[[3.0]], C=[[0.5]], D=[[1.0]])
    T = toeplitz_matrix(sys, 1)
    assert np.allclose(T, [[1.0, 0.0], [1.5, 1.0]])
    # y = 0.5 x + u, y' = 0.5(-2x + 3u) + u'
    stack = stack_output_derivatives(sys, [2.0], [1.0, 4.0], 1)
    assert np.allclose(stack, [2.0, -2.0 + 1.5 + 4.0])
    with pytest.raises(DimensionMismatch):
        stack_output_derivatives(sys, [2.0], [1.0], 1)


def test_auxiliary_system(system: LtiSystem):
    """
    Test for `auxiliary_system` on the scalar example: ``xi = (u, y)``, ``nu = u'``.
    """
    aux = auxiliary_system(system)
    assert aux.lag == 1
    assert np.allclose(aux.A, [[0.0, 0.0], [1.0, -1.0]])
    assert np.allclose(aux.B, [[1.0], [0.0]])
    assert np.allclose(aux.Q, [[0.0, 0.0], [0.0, 1.0]])


def test_auxiliary_system_unobservable():
    sys = LtiSystem(A=[[-1.0, 0.0], [0.0, -2.0]], B=[[1.0], [1.0]], C=[[1.0, 0.0]], D=[[0.0]])
    with pytest.raises(RankDeficient):
        auxiliary_system(sys)


def test_polynomial_input_from_series():
    series = LegendreSeries(np.array([1.0 / 3.0, 0.0, 2.0 / 3.0]))
    signal = PolynomialInput.from_series(series)
    t = np.array([-0.5, 0.0, 0.7])
    assert np.allclose(signal.derivative(0, t)[:, 0], t ** 2)
    assert np.allclose(signal.derivative(1, t)[:, 0], 2 * t)
    assert np.allclose(signal.derivative(3, t), 0.0)


def test_state_recursion_matches_finite_differences():
    """
    Test for `simulate` derivative stacks against central differences on a fine grid.
    """
    sys = LtiSystem(A=[[0.0, 1.0], [-2.0, -3.0]], B=[[0.0], [1.0]], C=[[1.0, 0.0]], D=[[0.0]])
    grid = uniform_rule(2001)
    traj = simulate(sys, PolynomialInput([[1.0, -2.0, 0.5, 1.0]]), [0.3, -0.2], grid, L=3, K=3)
    for k in range(2):
        difference = np.gradient(traj.state.block(k), grid.nodes, axis=0)
        assert np.allclose(difference[1:-1], traj.state.block(k + 1)[1:-1], atol=1e-5)


def test_spectral_state_equation(trajectory: SampledTrajectory):
    """
    Test for the coefficient form ``D x_hat = A x_hat + B u_hat`` of the scalar example.

    Args:
        trajectory (SampledTrajectory): Response to ``t^2`` from ``x(-1) = 0``.
    """
    rule = trajectory.rule
    x_series = project(trajectory.state.block(0), rule, 30, 1)
    u_series = project(trajectory.input.block(0), rule, 30, 1)
    residual = diff_series(x_series).coeffs[:25] - (u_series.coeffs[:25] - x_series.coeffs[:25])
    assert np.max(np.abs(residual)) < 1e-10


def test_simulate_series_long_input(system: LtiSystem):
    """
    Test for `simulate_series` with a 24-coefficient input ``e^t``:
    ``x = e^t / 2 + (x0 - e^{-1} / 2) e^{-(t+1)}``.

    Args:
        system (LtiSystem): Scalar example.
    """
    rule = gauss_legendre(200)
    u_series = project(np.exp(rule.nodes), rule, 24, 1)
    x = simulate_series(system, u_series, [1.0], rule)[:, 0]
    expected = np.exp(rule.nodes) / 2 + (1.0 - np.exp(-1.0) / 2) * np.exp(-(rule.nodes + 1.0))
    assert np.allclose(x, expected, atol=1e-9)


def test_polynomial_input_trims_noise():
    series = LegendreSeries(np.array([1.0 / 3.0, 0.0, 2.0 / 3.0] + [1e-15] * 29))
    assert PolynomialInput.from_series(series).degree == 2
