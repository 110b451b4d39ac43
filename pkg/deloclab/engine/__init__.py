from deloclab.engine.base_executor import TrialExecutorBase
from deloclab.engine.experiment import Experiment, ExperimentSchema, ResultRecord, RunContext, experiment_schema, param
from deloclab.engine.experiment_registry import ExperimentRegistry
from deloclab.engine.trial_executor import TrialExecutor, chunk_sizes
