import pickle

import pytest

from deloclab.engine.experiment import (Experiment, ParameterSpec, RunContext, experiment_schema, param, parse_int)
from deloclab.engine.experiment_registry import ExperimentRegistry
from deloclab.engine.trial_executor import TrialExecutor, chunk_sizes
from deloclab.errors import ConfigError, DomainError, ExperimentError, PreconditionError


class Square:
    def __call__(self, index):
        return index * index


class FailAt:
    def __init__(self, index, error):
        self.index = index
        self.error = error

    def __call__(self, index):
        if index == self.index:
            raise self.error
        return index


class DemoExperiments(Experiment):

    @experiment_schema(
        name="demo",
        description="Echo a few parameters",
        parameters=[
            param("N", "int", default=4, positive=True),
            param("eps", "float_list", default=[0.1]),
        ],
    )
    def demo(self, ctx, params):
        return [self.record(ctx, "n_squared", params["N"] ** 2, N=params["N"])]

    def helper(self):
        return "not an experiment"


# --- Parameters ---

@pytest.mark.parametrize("raw, expected", [(5, 5), (5.0, 5), ("12", 12), ("1e6", 1_000_000), (" 7 ", 7)])
def test_parse_int(raw, expected):
    assert parse_int(raw) == expected


@pytest.mark.parametrize("raw", [2.5, "two", None])
def test_parse_int_rejects(raw):
    with pytest.raises((TypeError, ValueError)):
        parse_int(raw)


def test_coerce_lists_from_strings_and_scalars():
    spec = ParameterSpec("eps", "float_list", positive=True)
    assert spec.coerce("0.05, 0.1;0.2") == [0.05, 0.1, 0.2]
    assert spec.coerce(0.3) == [0.3]
    assert ParameterSpec("N", "int_list").coerce([5, "10", 50.0]) == [5, 10, 50]


def test_coerce_reports_field_paths():
    spec = ParameterSpec("eps", "float_list", positive=True)
    with pytest.raises(ConfigError) as info:
        spec.coerce([0.1, -0.2])
    assert info.value.field == "eps[1]"
    with pytest.raises(ConfigError) as info:
        ParameterSpec("P", "float_list", positive=True).coerce(-1)
    assert info.value.field == "P"


@pytest.mark.parametrize("spec, raw", [
    (ParameterSpec("N", "int", positive=True), 0),
    (ParameterSpec("N", "int"), 2.5),
    (ParameterSpec("N", "int"), True),
    (ParameterSpec("trials", "int", minimum=2), 1),
    (ParameterSpec("P", "float"), "nan"),
    (ParameterSpec("P", "float"), "abc"),
    (ParameterSpec("profile", "str"), 3),
    (ParameterSpec("weights", "str", choices=("flat", "basis")), "other"),
    (ParameterSpec("eps", "float_list"), []),
])
def test_coerce_rejects(spec, raw):
    with pytest.raises(ConfigError):
        spec.coerce(raw)


def test_unknown_parameter_kind():
    with pytest.raises(ValueError):
        ParameterSpec("x", "complex")


# --- Experiments and registry ---

def test_schemas_come_from_decorated_methods():
    schemas = DemoExperiments().get_schemas()
    assert list(schemas) == ["demo"]
    assert schemas["demo"].parameter("N").default == 4
    assert schemas["demo"].parameter("missing") is None


def test_record_stamps_context(executor):
    ctx = RunContext(experiment="demo", seed=11, executor=executor)
    record = DemoExperiments().demo(ctx, {"N": 3, "eps": [0.1]})[0]
    assert record.experiment == "demo"
    assert record.seed == 11
    assert record.value == 9.0
    assert record.ci_radius is None
    assert record.params == {"N": 3}


def test_run_context_checks_seed(executor):
    with pytest.raises(ConfigError):
        RunContext(experiment="demo", seed=-1, executor=executor)


def test_registry_is_a_singleton():
    registry = ExperimentRegistry()
    registry.register_experiment(DemoExperiments)
    assert ExperimentRegistry() is registry
    entry = ExperimentRegistry().get_experiment("demo")
    assert entry["method"] == "demo"
    assert isinstance(entry["instance"], DemoExperiments)
    assert "demo" in registry.names()
    assert registry.get_experiment("nope") == {}
    assert registry.get_schema("nope") is None


def test_registry_name_filter():
    registry = ExperimentRegistry()
    registry.experiments.pop("demo", None)
    registry.register_experiment(DemoExperiments, experiment_names=["other"])
    assert registry.get_schema("demo") is None
    registry.register_experiment(DemoExperiments)


# --- Executor ---

def test_chunk_sizes():
    assert chunk_sizes(10, 4) == [4, 4, 2]
    assert chunk_sizes(8, 4) == [4, 4]
    assert chunk_sizes(0, 4) == []
    with pytest.raises(ValueError):
        chunk_sizes(5, 0)


@pytest.mark.parametrize("workers", [1, 3])
def test_executor_returns_results_in_index_order(workers):
    executor = TrialExecutor(workers=workers, progress=False)
    assert executor.execute(Square(), [4, 0, 2, 1, 3]) == [16, 0, 4, 1, 9]
    assert executor.execute(Square(), []) == []


@pytest.mark.parametrize("workers", [1, 2])
def test_executor_wraps_unexpected_errors(workers):
    executor = TrialExecutor(workers=workers, progress=False)
    with pytest.raises(ExperimentError) as info:
        executor.execute(FailAt(2, RuntimeError("boom")), range(4), label="demo chunks")
    assert info.value.experiment == "demo chunks"
    assert "boom" in str(info.value)


@pytest.mark.parametrize("workers", [1, 2])
def test_executor_passes_lab_errors_through(workers):
    executor = TrialExecutor(workers=workers, progress=False)
    with pytest.raises(DomainError):
        executor.execute(FailAt(1, DomainError("r < 0")), range(3))


def test_lab_errors_pickle():
    for error in (ConfigError("bad", "P"), ExperimentError("capacity", "failed"), PreconditionError("pre")):
        clone = pickle.loads(pickle.dumps(error))
        assert type(clone) is type(error)
        assert str(clone) == str(error)
    assert pickle.loads(pickle.dumps(ConfigError("bad", "P"))).field == "P"
