"""
Experiment configuration: one JSON file validated by pydantic, with environment
overrides loaded through python-dotenv.
"""
import hashlib
import json
import logging
import os
from pathlib import Path
from typing import List, Literal, Optional, Union

import numpy as np
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ctdd.exceptions import ConfigError
from ctdd.fundamental import Variant
from ctdd.lti import InputSignal, LtiSystem, PolynomialInput

logger = logging.getLogger(__name__)

BUILTIN_EXAMPLE = 'builtin:scalar'
# names used by earlier configuration files
BUILTIN_ALIASES = ('builtin:example52',)
EXCITATION_ALIASES = {'example52': 't-squared'}

Matrix = List[List[float]]


def example_system() -> LtiSystem:
    """Scalar example ``x' = -x + u``, ``y = x``."""
    return LtiSystem(A=[[-1.0]], B=[[1.0]], C=[[1.0]], D=[[0.0]])


def example_excitation() -> PolynomialInput:
    """Excitation ``u(t) = t^2`` of the scalar example."""
    return PolynomialInput([[0.0, 0.0, 1.0]])


def example_state(t: np.ndarray) -> np.ndarray:
    """Response of the scalar example to ``t^2`` from ``x(-1) = 0``."""
    t = np.asarray(t, dtype=float)
    return t ** 2 - 2.0 * t - 5.0 * np.exp(-(t + 1.0)) + 2.0


class SystemConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    A: Matrix
    B: Matrix
    C: Optional[Matrix] = None
    D: Optional[Matrix] = None

    @model_validator(mode='after')
    def conformable(self) -> 'SystemConfig':
        try:
            self.to_system()
        except Exception as error:
            raise ValueError(f'System matrices are not conformable: {error}')
        return self

    def to_system(self) -> LtiSystem:
        if self.C is None and self.D is None:
            return LtiSystem.input_state(self.A, self.B)
        return LtiSystem(A=self.A, B=self.B, C=self.C, D=self.D)


class ExcitationConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    polynomial: Optional[Matrix] = None
    name: Optional[Literal['t-squared']] = None

    @field_validator('name', mode='before')
    @classmethod
    def name_alias(cls, value):
        return EXCITATION_ALIASES.get(value, value) if isinstance(value, str) else value

    @model_validator(mode='after')
    def exactly_one(self) -> 'ExcitationConfig':
        if (self.polynomial is None) == (self.name is None):
            raise ValueError('Excitation needs exactly one of `polynomial` or `name`.')
        if self.polynomial is not None and not all(self.polynomial):
            raise ValueError('Every input channel needs at least one polynomial coefficient.')
        return self

    def to_signal(self) -> InputSignal:
        if self.name is not None:
            return example_excitation()
        return PolynomialInput(self.polynomial)


class Tolerances(BaseModel):
    model_config = ConfigDict(extra='forbid')

    pe_tol: float = Field(1e-9, gt=0)
    rank_rel_tol: float = Field(1e-10, gt=0)
    kkt_tol: float = Field(1e-9, gt=0)


class LqrConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    variant: Variant = Variant.INPUT_STATE
    x0: Optional[List[float]] = None
    xi0: Optional[List[float]] = None
    Q: Optional[Matrix] = None
    R: Optional[Matrix] = None


class ExperimentConfig(BaseModel):
    """
    Validated experiment configuration.

    Defaults reproduce the scalar example: ``x' = -x + u`` excited by ``t^2`` from
    ``x(-1) = 0``, state dictionary with ``L = 1, K = 2``, LQR from ``x(-1) = 1``.
    """
    model_config = ConfigDict(extra='forbid')

    system: Union[Literal['builtin:scalar'], SystemConfig] = BUILTIN_EXAMPLE
    excitation: ExcitationConfig = Field(default_factory=lambda: ExcitationConfig(name='t-squared'))
    initial_state: List[float] = Field(default_factory=lambda: [0.0])
    L: int = Field(1, ge=1)
    K: int = Field(2, ge=1)
    truncation_orders: List[int] = Field(default_factory=lambda: list(range(1, 11)))
    quadrature: Optional[int] = Field(None, ge=1)
    tolerances: Tolerances = Field(default_factory=Tolerances)
    projection_order: int = Field(32, ge=1)
    lqr: LqrConfig = Field(default_factory=lambda: LqrConfig(x0=[1.0]))
    output_dir: str = 'out'
    seed: int = 0

    @field_validator('system', mode='before')
    @classmethod
    def builtin_alias(cls, value):
        return BUILTIN_EXAMPLE if isinstance(value, str) and value in BUILTIN_ALIASES else value

    @field_validator('truncation_orders')
    @classmethod
    def orders_positive(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError('At least one truncation order is required.')
        if any(order < 1 for order in value):
            raise ValueError(f'Truncation orders must be >= 1, got {value}.')
        return value

    @model_validator(mode='after')
    def consistent(self) -> 'ExperimentConfig':
        sys = self.build_system()
        if len(self.initial_state) != sys.n:
            raise ValueError(f'initial_state must have length {sys.n}, got {len(self.initial_state)}.')
        if self.excitation.polynomial is not None and len(self.excitation.polynomial) != sys.m:
            raise ValueError(f'Excitation must have {sys.m} channels, got {len(self.excitation.polynomial)}.')
        if self.K > self.L + 1:
            raise ValueError(f'Stacking orders need K <= L + 1, got L={self.L}, K={self.K}.')
        if self.lqr.variant is Variant.INPUT_STATE and self.lqr.x0 is not None and len(self.lqr.x0) != sys.n:
            raise ValueError(f'lqr.x0 must have length {sys.n}, got {len(self.lqr.x0)}.')
        return self

    def build_system(self) -> LtiSystem:
        return example_system() if self.system == BUILTIN_EXAMPLE else self.system.to_system()

    def build_signal(self) -> InputSignal:
        return self.excitation.to_signal()

    def node_count(self, order: int) -> int:
        """Quadrature size: the configured one or ``max(2N + 16, 200)``."""
        return self.quadrature or max(2 * order + 16, 200)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form."""
        canonical = json.dumps(self.model_dump(mode='json'), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def _format_validation(error: ValidationError) -> str:
    return '; '.join(
        f"{'.'.join(str(part) for part in item['loc']) or '<root>'}: {item['msg']}" for item in error.errors()
    )


def load_config(path: Optional[Union[str, Path]] = None, **overrides) -> ExperimentConfig:
    """
    Load and validate the experiment configuration.

    Precedence: keyword overrides (CLI flags), then ``CTDD_OUT_DIR``/``CTDD_SEED``
    from the environment (``.env`` files included), then the file, then defaults.

    Args:
        path (str or Path, optional): JSON configuration file.
        **overrides: Top-level fields to replace; ``None`` values are ignored.

    Returns:
        ExperimentConfig: Validated configuration.

    Raises:
        ConfigError: Unreadable file, malformed JSON or failed validation.
    """
    load_dotenv()
    data = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding='utf-8')
        except OSError as error:
            raise ConfigError(f'Cannot read config {path}: {error}')
        try:
            data = json.loads(text)
        except json.JSONDecodeError as error:
            raise ConfigError(f'{path}:{error.lineno}:{error.colno}: {error.msg}')
        if not isinstance(data, dict):
            raise ConfigError(f'{path}: top level must be an object.')

    env = {'output_dir': os.getenv('CTDD_OUT_DIR'), 'seed': os.getenv('CTDD_SEED')}
    data.update({key: value for key, value in env.items() if value})
    data.update({key: value for key, value in overrides.items() if value is not None})

    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as error:
        raise ConfigError(f'Invalid config{f" {path}" if path else ""}: {_format_validation(error)}')
    logger.debug('Loaded config %s.', config.digest()[:12])
    return config
