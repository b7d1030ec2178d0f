import os
import logging

import numpy as np
from dotenv import load_dotenv
import pytest

from ctdd.config import example_excitation, example_system
from ctdd.fundamental import DataDictionary, Variant, build_dictionary
from ctdd.legendre import QuadratureRule, gauss_legendre
from ctdd.lti import LtiSystem, SampledTrajectory, simulate

logger = logging.getLogger()


@pytest.fixture(scope="module")
def seed() -> int:
    load_dotenv()
    return int(os.getenv('CTDD_SEED', '0'))


@pytest.fixture(scope="module")
def system() -> LtiSystem:
    return example_system()


@pytest.fixture(scope="module")
def rule() -> QuadratureRule:
    return gauss_legendre(200)


@pytest.fixture(scope="module")
def trajectory(system: LtiSystem, rule: QuadratureRule) -> SampledTrajectory:
    # input carries u, u', u'' so excitation of order 3 can be certified
    return simulate(system, example_excitation(), np.zeros(1), rule, L=3, K=2)


@pytest.fixture(scope="module")
def state_dictionary(trajectory: SampledTrajectory) -> DataDictionary:
    return build_dictionary(trajectory, L=1, K=2, variant=Variant.INPUT_STATE)


@pytest.fixture(scope="module")
def io_dictionary(trajectory: SampledTrajectory) -> DataDictionary:
    return build_dictionary(trajectory, L=2, K=2, variant=Variant.INPUT_OUTPUT)
