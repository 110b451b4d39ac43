import logging
from typing import Any, Dict, List, Optional, Type

from deloclab.engine.experiment import Experiment, ExperimentSchema


class ExperimentRegistry:
    """Registry for managing and accessing experiments.

    Maintains the experiment family instances and their schemas, keyed by the
    experiment name used on the command line.

    Attributes:
        experiments (Dict[str, Dict[str, Any]]): Experiment name -> instance, method name and schema

    Methods:
        register_experiment: Register an experiment family with optional filtering
        get_experiment: Get a specific experiment by name
        get_schema: Get the schema of an experiment
        names: Names of all registered experiments
    """

    _instance = None

    def __new__(cls):
        """Create or return singleton instance."""
        if cls._instance is None:
            cls._instance = super().__new__(cls)
            cls._instance.experiments = {}
        return cls._instance

    def register_experiment(self, experiment_class: Type[Experiment], experiment_names: Optional[List[str]] = None, **kwargs):
        """Register an experiment family with optional name filtering.

        Args:
            experiment_class: The Experiment subclass to register
            experiment_names: Optional list of experiment names to register
            **kwargs: Additional arguments passed to the family's constructor

        Notes:
            - If experiment_names is None, every decorated method is registered
            - Registering a name twice replaces the earlier entry
        """
        instance = experiment_class(**kwargs)
        schemas = instance.get_schemas()

        logging.info(f"Registering experiment class: {experiment_class.__name__}")

        for method_name, schema in schemas.items():
            if experiment_names is None or schema.name in experiment_names:
                self.experiments[schema.name] = {
                    "instance": instance,
                    "method": method_name,
                    "schema": schema,
                }
                logging.info(f"Registered experiment {schema.name} -> {method_name}")

    def get_experiment(self, name: str) -> Dict[str, Any]:
        """Get a specific experiment by name.

        Returns:
            Dict containing instance, method name and schema, or empty dict if not found
        """
        return self.experiments.get(name, {})

    def get_schema(self, name: str) -> Optional[ExperimentSchema]:
        entry = self.experiments.get(name)
        return entry["schema"] if entry else None

    def names(self) -> List[str]:
        return sorted(self.experiments)
