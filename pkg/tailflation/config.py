from __future__ import annotations

from enum import Enum
from logging import getLogger
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import orjson
from ordered_set import OrderedSet
from pydantic import BaseModel, Field, ValidationError, root_validator, validator

from tailflation.exceptions import ConfigurationError
from tailflation.inference import BandwidthRule, Kernel
from tailflation.model_selection import MAX_POOL_SIZE, CandidatePool
from tailflation.synthetic import lopez_template
from tailflation.timeseries import Frame, Period
from tailflation.util import digest

logger = getLogger(__name__)

__all__ = ['ColumnRole', 'ColumnSpec', 'PoolEntry', 'PoolPreset', 'StudyConfig', 'load_config', 'preset_entries',
           'LOWER_GRID', 'UPPER_GRID']


def _grid(first: int, last: int) -> List[float]:
    return [round(i / 100, 2) for i in range(first, last + 1)]


LOWER_GRID = _grid(1, 20)
UPPER_GRID = _grid(80, 99)
IMPORTED = 'imported'
EXCLUDED_FROM_HASH = frozenset({'output', 'workers'})
"""
Fields that do not change the results of a study
"""


class ColumnRole(str, Enum):
    price_level = 'price_level'
    """
    A price index, turned into its quarterly log growth rate
    """
    rate = 'rate'
    gdp_level = 'gdp_level'
    """
    Real output, turned into the gap of its log from the HP trend
    """
    gap = 'gap'
    expectations = 'expectations'
    imported_index = 'imported_index'
    """
    An imported price index, turned into its quarterly log growth rate
    """


class ColumnSpec(BaseModel):
    column: str
    """
    The column of the input file
    """
    role: ColumnRole
    name: Optional[str] = None
    """
    The name of the prepared series, defaults to the column name
    """

    @property
    def target(self) -> str:
        return self.name or self.column


class PoolEntry(BaseModel):
    name: str
    lag: int = Field(0, ge=0)


class PoolPreset(str, Enum):
    broad = 'broad'
    narrow = 'narrow'
    lopez = 'lopez'


def preset_entries(preset: PoolPreset, response: str) -> Tuple[Tuple[str, int], ...]:
    """
    The (series, lag) entries of a fixed preset pool. The lopez preset depends on the frame and is built by
    its template.
    """
    if preset == PoolPreset.broad:
        return (
            *(('gap', k) for k in range(5)),
            ('expectations', 0),
            *((IMPORTED, k) for k in range(4)),
            (response, 1),
        )
    if preset == PoolPreset.narrow:
        return (
            ('gap', 0), ('gap', 3), ('gap', 4),
            ('expectations', 0),
            (IMPORTED, 0), (IMPORTED, 1), (IMPORTED, 3),
            (response, 1),
        )
    raise ValueError(f'preset {preset} has no fixed entries')


class StudyConfig(BaseModel):
    input: Path
    output: Optional[Path] = None
    """
    The report directory, required by run_study
    """
    response: str = 'inflation'
    columns: List[ColumnSpec] = []
    """
    Input columns that need a transformation, the others are used as they are
    """
    hp_lambda: float = Field(1600.0, gt=0)
    pool: Optional[List[PoolEntry]] = None
    """
    An explicit candidate pool, overrides pool_preset
    """
    pool_preset: PoolPreset = PoolPreset.broad
    max_subset_size: Optional[int] = Field(None, ge=1)
    lower_grid: List[float] = Field(default_factory=lambda: list(LOWER_GRID))
    upper_grid: List[float] = Field(default_factory=lambda: list(UPPER_GRID))
    alpha: float = Field(0.05, gt=0, lt=1)
    kernel: Kernel = Kernel.uniform
    bandwidth_rule: BandwidthRule = BandwidthRule.hall_sheather
    split: Optional[str] = '2009Q1'
    """
    The first period of the second subsample of the descriptive tables, no split if None
    """
    threshold: float = 0.01
    """
    The response threshold of the above-threshold dependence tables
    """
    max_lag: int = Field(4, ge=0)
    seed: Optional[int] = None
    audit: bool = False
    workers: int = Field(1, ge=1)
    strict: bool = True

    class Config:
        extra = 'forbid'
        json_loads = orjson.loads

    @validator('lower_grid', 'upper_grid')
    def _check_grid(cls, v: List[float]) -> List[float]:
        bad = [tau for tau in v if not 0 < tau < 1]
        if bad:
            raise ValueError(f'quantile levels must be in (0, 1), got {bad}')
        if len(OrderedSet(v)) != len(v):
            raise ValueError('quantile levels must be unique')
        return sorted(v)

    @validator('pool')
    def _check_pool(cls, v: Optional[List[PoolEntry]]) -> Optional[List[PoolEntry]]:
        if v is None:
            return v
        if not v:
            raise ValueError('the candidate pool is empty')
        if len(v) > MAX_POOL_SIZE:
            raise ValueError(f'the candidate pool has {len(v)} entries, at most {MAX_POOL_SIZE} are allowed')
        if len(OrderedSet((e.name, e.lag) for e in v)) != len(v):
            raise ValueError('candidate pool entries must be unique')
        return v

    @validator('split')
    def _check_split(cls, v: Optional[str]) -> Optional[str]:
        if v is None:
            return v
        return str(Period.parse(v))

    @validator('columns')
    def _check_columns(cls, v: List[ColumnSpec]) -> List[ColumnSpec]:
        targets = [c.target for c in v]
        if len(OrderedSet(targets)) != len(targets):
            raise ValueError(f'prepared series names must be unique, got {targets}')
        return v

    @root_validator(skip_on_failure=True)
    def _check_grids(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        lower, upper = values['lower_grid'], values['upper_grid']
        if not lower and not upper:
            raise ValueError('both quantile grids are empty')
        shared = set(lower) & set(upper)
        if shared:
            raise ValueError(f'quantile levels {sorted(shared)} appear in both grids')
        return values

    @property
    def split_period(self) -> Optional[Period]:
        return None if self.split is None else Period.parse(self.split)

    @property
    def quantiles(self) -> List[Tuple[float, str]]:
        """
        Every requested quantile level with its tail, the lower grid first
        """
        return [(tau, 'lower') for tau in self.lower_grid] + [(tau, 'upper') for tau in self.upper_grid]

    def candidate_pool(self, frame: Frame) -> Tuple[CandidatePool, Tuple[str, ...]]:
        """
        Returns:
            The candidate pool of the study and the optional template roles that were left out
        """
        try:
            if self.pool is not None:
                return CandidatePool(tuple((e.name, e.lag) for e in self.pool), self.max_subset_size), ()
            if self.pool_preset == PoolPreset.lopez:
                pool, omitted = lopez_template().to_pool(frame)
                return CandidatePool(pool.entries, self.max_subset_size), omitted
            return CandidatePool(preset_entries(self.pool_preset, self.response), self.max_subset_size), ()
        except ConfigurationError:
            raise
        except ValueError as e:
            raise ConfigurationError(str(e)) from e

    def canonical(self) -> Dict[str, Any]:
        """
        The JSON form of the settings that determine the results
        """
        return orjson.loads(self.json(exclude=set(EXCLUDED_FROM_HASH)))

    def config_hash(self) -> str:
        return digest(self.canonical())


def _resolve(data: Dict[str, Any], base: Path) -> Dict[str, Any]:
    for key in ('input', 'output'):
        if key in data and data[key] is not None and not Path(data[key]).is_absolute():
            data[key] = str(base / data[key])
    return data


def load_config(path: Optional[Union[str, Path]] = None, overrides: Optional[Mapping[str, Any]] = None) \
        -> StudyConfig:
    """
    Build a study configuration from an optional JSON file and explicit overrides.

    Args:
        path: A JSON object keyed by StudyConfig field names. Relative paths in it are relative to the file.
        overrides: Values that take precedence over the file, None values are ignored.

    Raises:
        ConfigurationError if the file cannot be read or the resulting configuration is invalid, including an
         input path that does not exist
    """
    data: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            loaded = orjson.loads(path.read_bytes())
        except (OSError, orjson.JSONDecodeError) as e:
            raise ConfigurationError(f'could not read config file {path}: {e}') from e
        if not isinstance(loaded, dict):
            raise ConfigurationError(f'config file {path} must hold a JSON object')
        data = _resolve(loaded, path.parent)
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        config = StudyConfig.parse_obj(data)
    except ValidationError as e:
        raise ConfigurationError(f'invalid study configuration:\n{e}') from e
    if not config.input.exists():
        raise ConfigurationError(f'input {config.input} does not exist')
    logger.debug('config loaded', extra={'path': str(path), 'hash': config.config_hash()})
    return config
