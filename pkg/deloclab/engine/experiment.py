"""
Core experiment system providing the foundation for defining lab experiments.

This module defines the base classes and decorators for experiments:
- Experiment base class for implementing experiment families
- Schema decorator declaring an experiment's name and parameters
- Parameter specs that validate and coerce configuration values
- Result containers for standardized experiment outputs
"""

import inspect
import math
from abc import ABC
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from deloclab.engine.base_executor import TrialExecutorBase
from deloclab.errors import ConfigError
from deloclab.streams import MAX_SEED, StreamFactory

PARAMETER_KINDS = ("int", "float", "str", "int_list", "float_list")


def parse_int(value: Any) -> int:
    """Integer from an int, an integral float ("1e6" included) or a decimal string.

    Raises:
        ValueError: If the value is not integral
    """
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        try:
            return int(value.strip())
        except ValueError:
            value = float(value)
    if isinstance(value, float) and value.is_integer():
        return int(value)
    raise ValueError(f"not an integer: {value!r}")


@dataclass
class ParameterSpec:
    """Declaration of one experiment parameter.

    Attributes:
        name (str): Key in the configuration mapping
        kind (str): One of "int", "float", "str", "int_list", "float_list"
        default (Any, optional): Value used when the key is absent
        required (bool): Whether the key must be supplied
        minimum (float, optional): Inclusive lower bound for numbers
        positive (bool): Numbers must be strictly positive
        choices (Sequence[str], optional): Allowed values for strings
        help (str): One-line description
    """
    name: str
    kind: str = "float"
    default: Any = None
    required: bool = False
    minimum: Optional[float] = None
    positive: bool = False
    choices: Optional[Sequence[str]] = None
    help: str = ""

    def __post_init__(self):
        if self.kind not in PARAMETER_KINDS:
            raise ValueError(f"unknown parameter kind {self.kind!r}")

    def _number(self, value: Any, path: str, integer: bool):
        if isinstance(value, bool):
            raise ConfigError(f"expected a number, got {value!r}", path)
        try:
            if integer:
                number = parse_int(value)
            else:
                number = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"malformed number {value!r}", path)
        if not integer and not math.isfinite(number):
            raise ConfigError(f"expected a finite number, got {value!r}", path)
        if self.positive and number <= 0:
            raise ConfigError(f"must be positive, got {number}", path)
        if self.minimum is not None and number < self.minimum:
            raise ConfigError(f"must be >= {self.minimum}, got {number}", path)
        return number

    def coerce(self, value: Any, path: Optional[str] = None) -> Any:
        """Validate and convert a raw configuration value.

        Args:
            value: Raw value from JSON or the command line
            path: Field path used in error messages (defaults to the name)

        Returns:
            The converted value

        Raises:
            ConfigError: If the value has the wrong type or range
        """
        path = path or self.name
        if self.kind == "str":
            if not isinstance(value, str):
                raise ConfigError(f"expected a string, got {value!r}", path)
            if self.choices and value not in self.choices:
                raise ConfigError(f"must be one of {list(self.choices)}, got {value!r}", path)
            return value
        if self.kind in ("int", "float"):
            return self._number(value, path, integer=self.kind == "int")
        if isinstance(value, str):
            value = [item for item in value.replace(';', ',').split(',') if item.strip()]
        elif isinstance(value, (int, float)) and not isinstance(value, bool):
            return [self._number(value, path, self.kind == "int_list")]
        if not isinstance(value, (list, tuple)) or not value:
            raise ConfigError(f"expected a non-empty list, got {value!r}", path)
        integer = self.kind == "int_list"
        return [self._number(item, f"{path}[{i}]", integer) for i, item in enumerate(value)]


@dataclass
class ExperimentSchema:
    """Schema of a registered experiment.

    Attributes:
        name (str): Experiment name used on the command line
        description (str): Human readable summary
        parameters (List[ParameterSpec]): Declared parameters
    """
    name: str
    description: str = ""
    parameters: List[ParameterSpec] = field(default_factory=list)

    def parameter(self, name: str) -> Optional[ParameterSpec]:
        for spec in self.parameters:
            if spec.name == name:
                return spec
        return None


@dataclass
class ResultRecord:
    """Container for one emitted metric.

    Attributes:
        experiment (str): Experiment name
        params (Dict[str, Any]): Parameter echo, in emission order
        metric (str): Metric name
        value (float): Metric value
        ci_radius (float, optional): 95% half-width for stochastic metrics, None for exact ones
        seed (int): Master seed of the run
        wall_time (float, optional): Seconds spent in the experiment
    """
    experiment: str
    params: Dict[str, Any]
    metric: str
    value: float
    ci_radius: Optional[float] = None
    seed: int = 0
    wall_time: Optional[float] = None


@dataclass
class RunContext:
    """Everything an experiment needs besides its parameters.

    Attributes:
        experiment (str): Name of the running experiment
        seed (int): Master seed, echoed in every record
        executor (TrialExecutorBase): Executor for chunked Monte Carlo work
    """
    experiment: str
    seed: int
    executor: TrialExecutorBase

    def __post_init__(self):
        if not 0 <= self.seed <= MAX_SEED:
            raise ConfigError(f"seed must lie in [0, 2^64), got {self.seed}", "seed")

    @property
    def streams(self) -> StreamFactory:
        return StreamFactory(seed=self.seed, label=self.experiment)


class Experiment(ABC):
    """Abstract base class for all experiment families.

    A family groups related experiments; each one is a method decorated with
    `experiment_schema` and called as `method(ctx, params)`.

    Attributes:
        _schemas (Dict[str, ExperimentSchema]): Registered schemas by method name

    Methods:
        get_schemas: Get all registered experiment schemas
        record: Build a ResultRecord for the running experiment
    """

    def __init__(self):
        """Initialize experiment family with empty schema registry."""
        self._schemas: Dict[str, ExperimentSchema] = {}
        self._register_schemas()

    def _register_schemas(self):
        """Register schemas from all decorated methods."""
        for name, method in inspect.getmembers(self, predicate=inspect.ismethod):
            if hasattr(method, 'experiment_schema'):
                self._schemas[name] = method.experiment_schema

    def get_schemas(self) -> Dict[str, ExperimentSchema]:
        """Get all registered experiment schemas.

        Returns:
            Dict mapping method names to their schema definitions
        """
        return self._schemas

    def record(self, ctx: RunContext, metric: str, value: float, ci_radius: Optional[float] = None, **params) -> ResultRecord:
        """Create a result record for the running experiment.

        Args:
            ctx: Context of the running experiment
            metric: Metric name
            value: Metric value
            ci_radius: 95% half-width, required for stochastic metrics
            **params: Parameter echo, emitted in keyword order

        Returns:
            ResultRecord stamped with experiment name and seed
        """
        return ResultRecord(
            experiment=ctx.experiment,
            params=dict(params),
            metric=metric,
            value=float(value),
            ci_radius=None if ci_radius is None else float(ci_radius),
            seed=ctx.seed,
        )


def param(name: str, kind: str = "float", **kwargs) -> ParameterSpec:
    """Shorthand for ParameterSpec."""
    return ParameterSpec(name=name, kind=kind, **kwargs)


def experiment_schema(name: str, parameters: List[ParameterSpec] = None, description: str = ""):
    """
    Decorator declaring an experiment method.

    Args:
        name: Experiment name used on the command line
        parameters: Declared parameters with defaults and ranges
        description: One-line summary shown by `lab --list`

    Example:
        @experiment_schema(
            name="capacity",
            parameters=[param("N", "int", default=256, positive=True)],
        )
        def capacity(self, ctx, params):
            ...
    """
    def decorator(func):
        func.experiment_schema = ExperimentSchema(
            name=name,
            description=description,
            parameters=list(parameters or []),
        )
        return func
    return decorator
