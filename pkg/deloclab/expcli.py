"""
Experiment configuration, dispatch and result serialization.

- parse_config validates a JSON document (or mapping) plus overrides against
  the schema the experiment declared with `experiment_schema`
- run_experiment dispatches to the registered experiment method
- emit writes records as CSV (fixed column order) or as a JSON array
"""

import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, List, Mapping, Optional, Union

import pandas as pd

from deloclab import settings
from deloclab.engine.base_executor import TrialExecutorBase
from deloclab.engine.experiment import ResultRecord, RunContext, parse_int
from deloclab.engine.experiment_registry import ExperimentRegistry
from deloclab.engine.trial_executor import TrialExecutor
from deloclab.errors import ConfigError, ExperimentError, LabError, PreconditionError
from deloclab.experiments import register_all
from deloclab.streams import MAX_SEED, auto_seed

FORMATS = ("csv", "json")
RESERVED_KEYS = ("experiment", "params", "seed", "out", "format", "workers", "timing")
# alternative spellings, used only when the schema lacks the key itself
ALIASES = {"n": "N", "N": "n", "snr": "P", "epsilon": "eps"}
LEADING_COLUMNS = ["experiment"]
TRAILING_COLUMNS = ["metric", "value", "ci_radius", "seed", "wall_time"]
SIGNIFICANT_DIGITS = 12


@dataclass
class ExperimentConfig:
    """Validated experiment configuration.

    Attributes:
        experiment (str): Registered experiment name
        params (Dict[str, Any]): Parameters with defaults filled in
        seed (int): Master seed, generated when absent
        seed_given (bool): Whether the seed came from the configuration
        out (str, optional): Output path, stdout when None or "-"
        format (str): "csv" or "json"
        workers (int): Worker processes for the trial executor
        timing (bool): Stamp wall_time on the records
    """
    experiment: str
    params: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    seed_given: bool = False
    out: Optional[str] = None
    format: str = "csv"
    workers: int = 1
    timing: bool = True


@lru_cache(maxsize=None)
def get_registry() -> ExperimentRegistry:
    """The experiment registry, with every family registered once per process."""
    return register_all(ExperimentRegistry())


def _load_source(source: Union[str, Mapping, None]) -> Dict[str, Any]:
    if source is None:
        return {}
    if isinstance(source, Mapping):
        return dict(source)
    try:
        document = json.loads(source)
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}", "config")
    if not isinstance(document, dict):
        raise ConfigError(f"expected a JSON object, got {type(document).__name__}", "config")
    return document


def _flag(value: Any, path: str) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.lower() in ("1", "true", "yes", "0", "false", "no"):
        return value.lower() in ("1", "true", "yes")
    raise ConfigError(f"expected a boolean, got {value!r}", path)


def parse_config(source: Union[str, Mapping, None], overrides: Optional[Mapping[str, Any]] = None,
                 registry: Optional[ExperimentRegistry] = None) -> ExperimentConfig:
    """Build a validated ExperimentConfig.

    Args:
        source: JSON text, an already parsed mapping, or None
        overrides: Values that win over the source (command line flags); None values are ignored
        registry: Registry to validate against (the populated singleton by default)

    Returns:
        ExperimentConfig with every declared parameter present

    Raises:
        ConfigError: Unknown experiment or parameter, missing required field,
            malformed number or value out of range; `field` names the offending key
    """
    document = _load_source(source)
    nested = document.pop("params", {})
    if not isinstance(nested, Mapping):
        raise ConfigError(f"expected an object, got {nested!r}", "params")
    raw = {**nested, **document}
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})

    registry = registry or get_registry()
    name = raw.get("experiment")
    if not name:
        raise ConfigError("missing required field", "experiment")
    schema = registry.get_schema(name)
    if schema is None:
        raise ConfigError(f"unknown experiment {name!r}; known: {', '.join(registry.names())}", "experiment")

    seed_given = raw.get("seed") is not None
    if seed_given:
        try:
            seed = parse_int(raw["seed"])
        except (TypeError, ValueError):
            raise ConfigError(f"malformed seed {raw['seed']!r}", "seed")
        if not 0 <= seed <= MAX_SEED:
            raise ConfigError(f"must lie in [0, 2^64), got {seed}", "seed")
    else:
        seed = auto_seed()

    fmt = str(raw.get("format", "csv")).lower()
    if fmt not in FORMATS:
        raise ConfigError(f"must be one of {list(FORMATS)}, got {fmt!r}", "format")
    try:
        workers = parse_int(raw.get("workers", settings.LAB_WORKERS))
    except (TypeError, ValueError):
        raise ConfigError(f"malformed number {raw.get('workers')!r}", "workers")
    if workers < 1:
        raise ConfigError(f"must be positive, got {workers}", "workers")

    params = {}
    for key, value in raw.items():
        if key in RESERVED_KEYS:
            continue
        target = key
        if schema.parameter(key) is None and schema.parameter(ALIASES.get(key, "")) is not None:
            target = ALIASES[key]
        spec = schema.parameter(target)
        if spec is None:
            raise ConfigError(f"unknown parameter for experiment {name!r}", key)
        params[target] = spec.coerce(value, key)

    for spec in schema.parameters:
        if spec.name in params:
            continue
        if spec.required:
            raise ConfigError("missing required field", spec.name)
        params[spec.name] = spec.coerce(spec.default) if spec.default is not None else None

    out = raw.get("out")
    return ExperimentConfig(
        experiment=name,
        params=params,
        seed=seed,
        seed_given=seed_given,
        out=None if out in (None, "", "-") else str(out),
        format=fmt,
        workers=workers,
        timing=_flag(raw.get("timing", True), "timing"),
    )


def run_experiment(config: ExperimentConfig, executor: Optional[TrialExecutorBase] = None,
                   registry: Optional[ExperimentRegistry] = None) -> List[ResultRecord]:
    """Run the configured experiment.

    Returns:
        Records in emission order, stamped with the seed (and wall time when enabled)

    Raises:
        ConfigError: If the experiment rejects a parameter combination
        LabError: Module errors, annotated with the experiment name
        ExperimentError: Any other failure, wrapped with the experiment name
    """
    registry = registry or get_registry()
    entry = registry.get_experiment(config.experiment)
    if not entry:
        raise ConfigError(f"unknown experiment {config.experiment!r}", "experiment")
    method = getattr(entry["instance"], entry["method"])
    executor = executor or TrialExecutor(workers=config.workers)
    ctx = RunContext(experiment=config.experiment, seed=config.seed, executor=executor)

    logging.info(f"Running experiment {config.experiment} with seed {config.seed} and params {config.params}")
    start = time.perf_counter()
    try:
        records = method(ctx, dict(config.params))
    except LabError as e:
        logging.error(f"Experiment {config.experiment} failed: {e}")
        e.add_note(f"while running experiment {config.experiment!r} (seed {config.seed})")
        raise
    except Exception as e:
        error_msg = f"{type(e).__name__}: {e}"
        logging.error(f"Experiment {config.experiment} failed: {error_msg}")
        raise ExperimentError(config.experiment, error_msg) from e
    elapsed = time.perf_counter() - start
    logging.info(f"Experiment {config.experiment} produced {len(records)} records in {elapsed:.2f}s")

    if config.timing:
        for record in records:
            record.wall_time = elapsed
    return records


# --- Serialization ---

def _columns(records: List[ResultRecord], timing: bool) -> List[str]:
    params = []
    for record in records:
        for key in record.params:
            if key not in params and key not in LEADING_COLUMNS + TRAILING_COLUMNS:
                params.append(key)
    trailing = TRAILING_COLUMNS if timing else TRAILING_COLUMNS[:-1]
    return LEADING_COLUMNS + params + trailing


def _row(record: ResultRecord, timing: bool) -> Dict[str, Any]:
    row = {"experiment": record.experiment}
    row.update(record.params)
    row.update(metric=record.metric, value=record.value, ci_radius=record.ci_radius, seed=record.seed)
    if timing:
        row["wall_time"] = record.wall_time
    return row


def records_frame(records: List[ResultRecord], timing: bool = True) -> pd.DataFrame:
    """Records as a DataFrame with the fixed column order; absent fields are NaN."""
    return pd.DataFrame([_row(r, timing) for r in records], columns=_columns(records, timing))


def _json_number(value: Any) -> Any:
    if isinstance(value, float):
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return float(f"{value:.{SIGNIFICANT_DIGITS}g}")
    return value


def render(records: List[ResultRecord], fmt: str = "csv", timing: bool = True) -> str:
    """Serialize records to CSV or JSON text, numbers at 12 significant digits.

    Raises:
        PreconditionError: If there are no records
        ConfigError: If the format is unknown
    """
    if not records:
        raise PreconditionError("no records to emit")
    if fmt == "csv":
        frame = records_frame(records, timing)
        return frame.to_csv(index=False, float_format=f"%.{SIGNIFICANT_DIGITS}g", na_rep="", lineterminator="\n")
    if fmt == "json":
        columns = _columns(records, timing)
        rows = []
        for record in records:
            row = _row(record, timing)
            rows.append({key: _json_number(row[key]) for key in columns if key in row})
        return json.dumps(rows, indent=2) + "\n"
    raise ConfigError(f"must be one of {list(FORMATS)}, got {fmt!r}", "format")


def emit(records: List[ResultRecord], fmt: str = "csv", target: Optional[str] = None, timing: bool = True) -> None:
    """Write records to a file, or to stdout when target is None or "-".

    Raises:
        PreconditionError: If there are no records
        ExperimentError: If the target cannot be written
    """
    text = render(records, fmt, timing)
    if target in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    try:
        with open(target, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as e:
        logging.error(f"Cannot write results to {target}: {e}")
        raise ExperimentError("emit", f"cannot write {target}: {e.strerror or e}") from e
    logging.info(f"Wrote {len(records)} records to {target}")
