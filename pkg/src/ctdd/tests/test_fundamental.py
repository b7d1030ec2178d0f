import logging

import numpy as np
import pytest

from ctdd.exceptions import DimensionMismatch, NotPersistentlyExciting, RankDeficient, RankMismatch
from ctdd.fundamental import (
    DataDictionary,
    build_dictionary,
    dd_simulate,
    identify,
    kernel_residual,
    membership_residual,
)
from ctdd.legendre import LegendreSeries, gauss_legendre, project, series_eval
from ctdd.lti import LtiSystem, PolynomialInput, SampledTrajectory, simulate, simulate_series, structural_indices

logger = logging.getLogger()

# u = 2t + t^2 drives x' = -x + u along x = t^2
U_SERIES = LegendreSeries(np.array([1.0 / 3.0, 2.0, 2.0 / 3.0]))
X_SERIES = LegendreSeries(np.array([1.0 / 3.0, 0.0, 2.0 / 3.0]))


def test_build_dictionary(state_dictionary: DataDictionary):
    """
    Test for `build_dictionary` method on the scalar example.

    Args:
        state_dictionary (DataDictionary): ``Gamma_{1,2}`` dictionary.
    """
    assert state_dictionary.rank == 2
    assert state_dictionary.mcmillan == 1
    assert state_dictionary.certificate.is_pe
    assert state_dictionary.certificate.order == 2
    assert state_dictionary.initial_blocks() == ['x^(0)']
    assert set(state_dictionary.blocks) == {'u^(0)', 'x^(0)', 'x^(1)'}


def test_build_io_dictionary(io_dictionary: DataDictionary):
    """
    Test for `build_dictionary` method with input-output data, McMillan degree inferred.
    """
    assert io_dictionary.rank == 3
    assert io_dictionary.mcmillan == 1
    assert io_dictionary.lag == 1
    assert io_dictionary.initial_blocks() == ['u^(0)', 'y^(0)']


def test_build_dictionary_rank_mismatch(trajectory: SampledTrajectory):
    with pytest.raises(RankMismatch):
        build_dictionary(trajectory, 1, 2, mcmillan=2, force=True)


def test_build_dictionary_not_exciting(system: LtiSystem, rule):
    """
    Test for `build_dictionary` method with a constant input at equilibrium.
    """
    traj = simulate(system, PolynomialInput([[1.0]]), [1.0], rule, L=2, K=2)
    with pytest.raises(NotPersistentlyExciting) as error:
        build_dictionary(traj, 1, 2)
    assert error.value.certificate is not None
    assert not error.value.certificate.is_pe
    forced = build_dictionary(traj, 1, 2, force=True)
    assert forced.rank < 2


def test_build_dictionary_orders(trajectory: SampledTrajectory):
    with pytest.raises(ValueError):
        build_dictionary(trajectory, 1, 3)


def test_identify_example(state_dictionary: DataDictionary):
    """
    Test for `identify` method: ``A = -1``, ``B = 1``.
    """
    model = identify(state_dictionary)
    assert model.A_tilde[0, 0] == pytest.approx(-1.0, abs=1e-8)
    assert model.B_tilde[0, 0] == pytest.approx(1.0, abs=1e-8)
    assert model.residual < 1e-8
    assert np.allclose(model.R0, [[-1.0, 1.0]], atol=1e-8)
    assert np.allclose(model.R1, [[0.0, 1.0]])
    assert np.allclose(model.to_system().A, [[-1.0]], atol=1e-8)


def test_identify_requires_state_dictionary(io_dictionary: DataDictionary):
    with pytest.raises(ValueError):
        identify(io_dictionary)


def test_identify_rank_deficient(system: LtiSystem, rule):
    traj = simulate(system, PolynomialInput([[1.0]]), [1.0], rule, L=2, K=2)
    dictionary = build_dictionary(traj, 1, 2, force=True)
    with pytest.raises(RankDeficient):
        identify(dictionary)


@pytest.mark.parametrize("case", range(5))
def test_identify_random_systems(seed: int, case: int):
    """
    Test for `identify` method on random controllable systems with polynomial excitation.

    Args:
        seed (int): Base random seed.
        case (int): Case index.
    """
    rng = np.random.default_rng(seed + 101 * case)
    n, m = int(rng.integers(1, 4)), int(rng.integers(1, 3))
    while True:
        sys = LtiSystem.input_state(rng.normal(size=(n, n)) / np.sqrt(n), rng.normal(size=(n, m)))
        if structural_indices(sys).controllable:
            break
    degree = m * (n + 1) + 1
    signal = PolynomialInput(rng.normal(size=(m, degree + 1)))
    traj = simulate(sys, signal, rng.normal(size=n), gauss_legendre(200), L=n + 1, K=2)

    dictionary = build_dictionary(traj, 1, 2)
    assert dictionary.rank == m + n
    model = identify(dictionary)
    assert np.allclose(model.A_tilde, sys.A, atol=1e-6)
    assert np.allclose(model.B_tilde, sys.B, atol=1e-6)

    candidate_input = PolynomialInput(rng.normal(size=(m, 3)))
    x0 = rng.normal(size=n)
    inside = simulate(sys, candidate_input, x0, traj.rule, L=1, K=2)
    shifted = LtiSystem.input_state(sys.A + 0.5 * np.eye(n), sys.B)
    outside = simulate(shifted, candidate_input, x0, traj.rule, L=1, K=2)
    assert membership_residual(dictionary, inside) <= 1e-6
    assert membership_residual(dictionary, outside) >= 1e-3


def test_membership_residual(state_dictionary: DataDictionary, system: LtiSystem, rule):
    """
    Test for `membership_residual`: small inside the behavior, large for a perturbed system.

    Args:
        state_dictionary (DataDictionary): Scalar example dictionary.
        system (LtiSystem): Scalar example.
        rule (QuadratureRule): 200-node rule.
    """
    signal = PolynomialInput([[1.0, 1.0]])
    inside = simulate(system, signal, [1.0], rule, L=1, K=2)
    perturbed = LtiSystem.input_state([[-1.2]], [[1.0]])
    outside = simulate(perturbed, signal, [1.0], rule, L=1, K=2)
    assert membership_residual(state_dictionary, inside) <= 1e-7
    assert membership_residual(state_dictionary, outside) >= 1e-3


def test_kernel_residual(state_dictionary: DataDictionary):
    """
    Test for `kernel_residual` of the identified kernel representation.
    """
    model = identify(state_dictionary)
    assert kernel_residual(model, U_SERIES, X_SERIES) < 1e-8
    wrong = LegendreSeries(np.array([0.0, 0.0, 0.0, 1.0]))
    assert kernel_residual(model, U_SERIES, wrong) > 1e-1


def test_dd_simulate_state(state_dictionary: DataDictionary):
    """
    Test for `dd_simulate` method: input ``2t + t^2`` from ``x(-1) = 1`` yields ``x = t^2``.
    """
    result = dd_simulate(state_dictionary, U_SERIES, [1.0])
    assert np.allclose(result.output.coeffs, X_SERIES.coeffs, atol=1e-9)
    assert result.residual < 1e-9
    assert result.g_hat.shape == (3, 3)


def test_dd_simulate_io(io_dictionary: DataDictionary):
    """
    Test for `dd_simulate` method with the input-output stack ``xi0 = (u(-1), y(-1))``.
    """
    result = dd_simulate(io_dictionary, U_SERIES, [-1.0, 1.0], order=4)
    assert np.allclose(result.output.coeffs[:3], X_SERIES.coeffs, atol=1e-9)
    assert np.allclose(result.output.coeffs[3:], 0.0, atol=1e-9)


def test_dd_simulate_errors(state_dictionary: DataDictionary):
    with pytest.raises(DimensionMismatch):
        dd_simulate(state_dictionary, U_SERIES, [1.0, 2.0])
    with pytest.raises(DimensionMismatch):
        dd_simulate(state_dictionary, LegendreSeries(np.zeros((3, 2))), [1.0])


def test_identified_model_reproduces_dd_simulate(state_dictionary: DataDictionary, rule):
    """
    Test for `identify` against `dd_simulate`: the identified model driven by the
    same input reproduces the data-driven response.

    Args:
        state_dictionary (DataDictionary): Scalar example dictionary.
        rule (QuadratureRule): 200-node rule.
    """
    u_series = project(np.cos(2.0 * rule.nodes), rule, 20, 1)
    result = dd_simulate(state_dictionary, u_series, [0.5], order=20)
    model = identify(state_dictionary).to_system()
    x = simulate_series(model, u_series, [0.5], rule)
    assert np.allclose(series_eval(result.output, rule.nodes), x, atol=1e-8)
