from typing import Optional

from deloclab.engine.experiment_registry import ExperimentRegistry
from deloclab.experiments.analysis_experiments import AnalysisExperiments
from deloclab.experiments.channel_experiments import ChannelExperiments
from deloclab.experiments.delocalisation_experiments import DelocalisationExperiments

EXPERIMENT_FAMILIES = (ChannelExperiments, DelocalisationExperiments, AnalysisExperiments)


def register_all(registry: Optional[ExperimentRegistry] = None) -> ExperimentRegistry:
    """Register every experiment family with the (singleton) registry."""
    registry = registry or ExperimentRegistry()
    for family in EXPERIMENT_FAMILIES:
        registry.register_experiment(family)
    return registry
