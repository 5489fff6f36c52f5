"""
Data generating processes with known ground truth, used to validate the estimation stack end to end, and the
quantile Phillips curve template as a candidate pool preset.

Every simulator draws its random numbers up front from a ``numpy`` PCG64 generator seeded with the parameters'
seed, so that reruns are bit identical.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from logging import getLogger
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from tailflation.exceptions import ConfigurationError, ExplosiveConfigurationError
from tailflation.model_selection import CandidatePool
from tailflation.timeseries import Frame, Period, QuarterlySeries, difference, trailing_mean

logger = getLogger(__name__)

__all__ = ['GENERATOR', 'DEFAULT_START', 'nkpc_slope', 'NkpcParams', 'simulate_nkpc', 'PcExpParams',
           'simulate_pc_exp', 'Noise', 'LocationScaleParams', 'TrueQuantile', 'simulate_location_scale',
           'TemplateRole', 'QuantileTemplate', 'lopez_template', 'lopez_frame']

GENERATOR = 'PCG64'
"""
The name of the bit generator behind every simulation, recorded in run metadata
"""
DEFAULT_START = Period(2000, 1)
FORWARD_TERMS = 50
"""
The number of terms of the truncated forward solution of the NKPC
"""
DIVERGENCE_BOUND = 10.0
ADAPTIVE_WINDOW = 4


def _generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _ar1(shocks: np.ndarray, rho: float, scale: float, initial: float = 0.0) -> np.ndarray:
    ret = np.empty(len(shocks))
    previous = initial
    for t, e in enumerate(shocks):
        previous = ret[t] = rho * previous + scale * e
    return ret


def nkpc_slope(theta: float, beta_discount: float) -> float:
    """
    The slope of the New Keynesian Phillips curve under Calvo pricing, theta^-1 (1 - theta) (1 - beta theta)
    """
    return (1 - theta) * (1 - beta_discount * theta) / theta


def _check_persistence(name: str, rho: float) -> None:
    if not abs(rho) < 1:
        raise ExplosiveConfigurationError(f'{name} must be in (-1, 1) for a stationary process, got {rho}')


@dataclass(frozen=True)
class NkpcParams:
    theta: float = 0.75
    """
    Calvo price stickiness, the share of firms that cannot reset their price in a quarter
    """
    beta_discount: float = 0.99
    shock_scale: float = 0.01
    """
    The standard deviation of the innovations of the output gap
    """
    T: int = 200
    seed: int = 0
    gap_persistence: float = 0.9
    initial_gap: float = 0.0
    imported_persistence: float = 0.5
    imported_scale: float = 0.01
    pass_through: float = 0.0
    """
    The coefficient of imported inflation in the inflation equation
    """
    expectations_noise: float = 0.0
    """
    The standard deviation of the error of the observed expectations around the model expectation
    """
    measurement_noise: float = 0.0
    start: Period = DEFAULT_START

    def __post_init__(self):
        if not 0 < self.theta < 1:
            raise ConfigurationError(f'theta must be in (0, 1), got {self.theta}')
        if not 0 < self.beta_discount <= 1:
            raise ConfigurationError(f'the discount factor must be in (0, 1], got {self.beta_discount}')
        for name in ('shock_scale', 'imported_scale', 'expectations_noise', 'measurement_noise'):
            if getattr(self, name) < 0:
                raise ConfigurationError(f'{name} must be nonnegative, got {getattr(self, name)}')
        if self.T < 1:
            raise ConfigurationError(f'T must be positive, got {self.T}')
        _check_persistence('gap_persistence', self.gap_persistence)
        _check_persistence('imported_persistence', self.imported_persistence)

    @property
    def slope(self) -> float:
        return nkpc_slope(self.theta, self.beta_discount)


def _forward_multiplier(beta_discount: float, rho: float) -> float:
    # sum of (beta rho)^k for k < FORWARD_TERMS, the forward solution of an AR(1) driver
    return float(np.sum((beta_discount * rho) ** np.arange(FORWARD_TERMS)))


def simulate_nkpc(params: NkpcParams) -> Frame:
    """
    Simulate the New Keynesian Phillips curve pi_t = beta E_t pi_{t+1} + lambda y_t + gamma m_t.

    The gap y and imported inflation m are AR(1) processes. The model expectation E_t pi_{t+1} follows from the
    forward solution pi_t = sum_k beta^k E_t (lambda y_{t+k} + gamma m_{t+k}), truncated at 50 terms. The observed
    expectation adds an optional noise to the model expectation, and inflation is built from the observed one.

    Returns:
        A frame with the series inflation, gap, expectations and imported
    """
    rng = _generator(params.seed)
    gap_shocks = rng.standard_normal(params.T)
    imported_shocks = rng.standard_normal(params.T)
    expectation_errors = rng.standard_normal(params.T)
    measurement_errors = rng.standard_normal(params.T)

    beta, slope = params.beta_discount, params.slope
    gap = _ar1(gap_shocks, params.gap_persistence, params.shock_scale, params.initial_gap)
    imported = _ar1(imported_shocks, params.imported_persistence, params.imported_scale)
    model_expectation = (
        params.gap_persistence * slope * _forward_multiplier(beta, params.gap_persistence) * gap
        + params.imported_persistence * params.pass_through * _forward_multiplier(beta, params.imported_persistence)
        * imported
    )
    expectations = model_expectation + params.expectations_noise * expectation_errors
    inflation = (beta * expectations + slope * gap + params.pass_through * imported
                 + params.measurement_noise * measurement_errors)
    logger.debug('nkpc simulated', extra={'T': params.T, 'seed': params.seed, 'slope': slope})
    return Frame([
        ('inflation', QuarterlySeries(params.start, inflation)),
        ('gap', QuarterlySeries(params.start, gap)),
        ('expectations', QuarterlySeries(params.start, expectations)),
        ('imported', QuarterlySeries(params.start, imported)),
    ])


@dataclass(frozen=True)
class PcExpParams:
    """
    Parameters of the expectations augmented Phillips curve
    pi_t = beta E_{t-1} pi_t + lambda gap_t + gamma z_t + noise, with adaptive expectations
    """
    beta: float = 0.5
    lambda_: float = 0.1
    gamma: float = 0.1
    T: int = 200
    seed: int = 0
    initial_history: Tuple[float, ...] = (0.0, 0.0, 0.0, 0.0)
    """
    The four inflation values preceding the first simulated quarter, oldest first
    """
    gap: Optional[Tuple[float, ...]] = None
    """
    The gap series, an AR(1) process is generated when missing
    """
    z: Optional[Tuple[float, ...]] = None
    """
    The supply shock series, an AR(1) process is generated when missing
    """
    gap_persistence: float = 0.8
    gap_scale: float = 0.01
    z_persistence: float = 0.5
    z_scale: float = 0.01
    shock_scale: float = 0.0
    start: Period = DEFAULT_START

    def __post_init__(self):
        if self.T < 1:
            raise ConfigurationError(f'T must be positive, got {self.T}')
        if len(self.initial_history) != ADAPTIVE_WINDOW:
            raise ConfigurationError(f'initial history must hold {ADAPTIVE_WINDOW} values, '
                                     f'got {len(self.initial_history)}')
        for name in ('gap', 'z'):
            supplied = getattr(self, name)
            if supplied is not None and len(supplied) != self.T:
                raise ConfigurationError(f'supplied {name} series has {len(supplied)} values, expected {self.T}')
        for name in ('gap_scale', 'z_scale', 'shock_scale'):
            if getattr(self, name) < 0:
                raise ConfigurationError(f'{name} must be nonnegative, got {getattr(self, name)}')
        _check_persistence('gap_persistence', self.gap_persistence)
        _check_persistence('z_persistence', self.z_persistence)
        radius = self.spectral_radius
        if radius > 1 + 1e-12:
            raise ExplosiveConfigurationError(f'the inflation recursion has spectral radius {radius:.6g} > 1')

    @property
    def spectral_radius(self) -> float:
        """
        The spectral radius of the companion matrix of pi_t = beta / 4 * (pi_{t-1} + ... + pi_{t-4})
        """
        companion = np.zeros((ADAPTIVE_WINDOW, ADAPTIVE_WINDOW))
        companion[0, :] = self.beta / ADAPTIVE_WINDOW
        companion[1:, :-1] = np.eye(ADAPTIVE_WINDOW - 1)
        return float(np.max(np.abs(np.linalg.eigvals(companion))))


def simulate_pc_exp(params: PcExpParams) -> Frame:
    """
    Simulate the expectations augmented Phillips curve with adaptive expectations, the mean of the previous four
    inflation values.

    Returns:
        A frame with the series inflation, expectations, gap and imported (the supply shock z)

    Raises:
        ExplosiveConfigurationError if inflation leaves [-10, 10]
    """
    rng = _generator(params.seed)
    gap_shocks = rng.standard_normal(params.T)
    z_shocks = rng.standard_normal(params.T)
    inflation_shocks = rng.standard_normal(params.T)

    gap = (np.asarray(params.gap, dtype=float) if params.gap is not None
           else _ar1(gap_shocks, params.gap_persistence, params.gap_scale))
    z = (np.asarray(params.z, dtype=float) if params.z is not None
         else _ar1(z_shocks, params.z_persistence, params.z_scale))

    history = np.concatenate((np.asarray(params.initial_history, dtype=float), np.empty(params.T)))
    expectations = np.empty(params.T)
    for t in range(params.T):
        expectations[t] = history[t:t + ADAPTIVE_WINDOW].mean()
        value = (params.beta * expectations[t] + params.lambda_ * gap[t] + params.gamma * z[t]
                 + params.shock_scale * inflation_shocks[t])
        if not abs(value) <= DIVERGENCE_BOUND:
            raise ExplosiveConfigurationError(f'simulated inflation diverged at {params.start.shift(t)} ({value:.4g})')
        history[t + ADAPTIVE_WINDOW] = value
    inflation = history[ADAPTIVE_WINDOW:]
    return Frame([
        ('inflation', QuarterlySeries(params.start, inflation)),
        ('expectations', QuarterlySeries(params.start, expectations)),
        ('gap', QuarterlySeries(params.start, gap)),
        ('imported', QuarterlySeries(params.start, z)),
    ])


@dataclass(frozen=True)
class Noise:
    """
    A noise distribution, given by its quantile function
    """
    name: str
    quantile: Callable[[np.ndarray], np.ndarray] = field(compare=False)

    @classmethod
    def normal(cls, scale: float = 1.0) -> Noise:
        return cls(f'normal(0, {scale:g})', lambda u: scale * norm.ppf(u))

    @classmethod
    def uniform(cls, low: float = -1.0, high: float = 1.0) -> Noise:
        if not low < high:
            raise ConfigurationError(f'uniform noise needs low < high, got {low}, {high}')
        return cls(f'uniform({low:g}, {high:g})', lambda u: low + (high - low) * np.asarray(u))


@dataclass(frozen=True)
class LocationScaleParams:
    """
    Parameters of Y = X b + (X g) e, where X is a constant followed by independent uniform covariates.
    The slopes of the quantile planes are all equal to those of b when only the first entry of g is nonzero.
    """
    b: Tuple[float, ...] = (1.0, 2.0)
    g: Tuple[float, ...] = (0.5, 0.1)
    noise: Noise = field(default_factory=Noise.uniform)
    T: int = 2000
    seed: int = 0
    low: float = 0.0
    """
    The lower bound of the support of every covariate
    """
    high: float = 1.0
    start: Period = DEFAULT_START

    def __post_init__(self):
        object.__setattr__(self, 'b', tuple(float(v) for v in self.b))
        object.__setattr__(self, 'g', tuple(float(v) for v in self.g))
        if not self.b or len(self.b) != len(self.g):
            raise ConfigurationError(f'b and g must be nonempty and of equal length, got {len(self.b)} and '
                                     f'{len(self.g)}')
        if self.T < 1:
            raise ConfigurationError(f'T must be positive, got {self.T}')
        if not self.low < self.high:
            raise ConfigurationError(f'the covariate support needs low < high, got {self.low}, {self.high}')


@dataclass(frozen=True, eq=False)
class TrueQuantile:
    """
    The conditional quantile function of a location-scale process, Q(tau | x) = x b + (x g) Q_e(tau)
    """
    b: np.ndarray
    g: np.ndarray
    noise: Noise

    def coefficients(self, tau: float) -> np.ndarray:
        """
        The coefficients of the true quantile plane at tau, intercept first
        """
        return self.b + self.g * float(self.noise.quantile(tau))

    def __call__(self, x: Sequence[float], tau: float) -> float:
        """
        Args:
            x: the covariates, without the constant.
            tau: the quantile level.
        """
        row = np.concatenate(([1.0], np.asarray(x, dtype=float)))
        return float(row @ self.coefficients(tau))


def simulate_location_scale(params: LocationScaleParams) -> Tuple[Frame, TrueQuantile]:
    """
    Simulate a location-scale process with a closed form conditional quantile.

    Returns:
        A frame with the response y and covariates x1, x2, ..., and the true conditional quantile function

    Raises:
        ConfigurationError if the scale x g is not positive at some sampled x
    """
    rng = _generator(params.seed)
    p = len(params.b)
    covariates = rng.uniform(params.low, params.high, size=(params.T, p - 1))
    levels = rng.random(params.T)
    x = np.column_stack((np.ones(params.T), covariates))
    b = np.asarray(params.b)
    g = np.asarray(params.g)
    scale = x @ g
    if not np.all(scale > 0):
        row = int(np.flatnonzero(~(scale > 0))[0])
        raise ConfigurationError(f'the scale x g is not positive at sampled row {row} ({scale[row]:.4g})')
    # keep the levels off 0 so unbounded quantile functions stay finite
    levels = np.clip(levels, np.finfo(float).eps, 1 - np.finfo(float).eps)
    y = x @ b + scale * params.noise.quantile(levels)
    series = [('y', QuarterlySeries(params.start, y))]
    series.extend((f'x{j}', QuarterlySeries(params.start, covariates[:, j - 1])) for j in range(1, p))
    return Frame(series), TrueQuantile(b, g, params.noise)


@dataclass(frozen=True)
class TemplateRole:
    name: str
    """
    The series the role reads from the frame
    """
    lag: int = 0
    optional: bool = False


@dataclass(frozen=True)
class QuantileTemplate:
    """
    A named set of regressor roles that turns into a candidate pool for a given frame
    """
    name: str
    roles: Tuple[TemplateRole, ...]

    def to_pool(self, frame: Frame) -> Tuple[CandidatePool, Tuple[str, ...]]:
        """
        Returns:
            The pool over the roles present in the frame, and the names of the optional roles that were omitted

        Raises:
            ConfigurationError if a required role is missing from the frame
        """
        entries = []
        omitted = []
        for role in self.roles:
            if role.name in frame:
                entries.append((role.name, role.lag))
            elif role.optional:
                omitted.append(role.name)
            else:
                raise ConfigurationError(f'template {self.name!r} requires the series {role.name!r}')
        if omitted:
            logger.info('optional template roles omitted', extra={'template': self.name, 'omitted': omitted})
        return CandidatePool(tuple(entries)), tuple(omitted)


def lopez_template() -> QuantileTemplate:
    """
    The quantile Phillips curve template: the mean inflation of the previous four quarters, long run expectations,
    the output gap, imported minus domestic inflation, and an optional credit spread
    """
    return QuantileTemplate('lopez', (
        TemplateRole('inflation_trailing_mean'),
        TemplateRole('expectations'),
        TemplateRole('gap'),
        TemplateRole('inflation_gap'),
        TemplateRole('credit_spread', optional=True),
    ))


def lopez_frame(frame: Frame, inflation: str = 'inflation', imported: str = 'imported') -> Frame:
    """
    Add the series derived for the quantile Phillips curve template: inflation_trailing_mean and inflation_gap
    (imported minus domestic inflation)
    """
    ret = frame.with_series('inflation_trailing_mean', trailing_mean(frame[inflation], ADAPTIVE_WINDOW))
    return ret.with_series('inflation_gap', difference(frame[imported], frame[inflation]))
