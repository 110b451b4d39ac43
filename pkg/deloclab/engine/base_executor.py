"""
Abstract interface for running indexed Monte Carlo tasks.

An executor receives a picklable task callable and a list of task indices
(chunk numbers, trial blocks). Each task derives its randomness from its own
index, so executors are free to schedule tasks in any order as long as they
hand back results ordered by index.
"""

from abc import ABC, abstractmethod
from typing import Any, Callable, List, Sequence


class TrialExecutorBase(ABC):
    """Abstract base class defining the interface for task execution strategies.

    Methods:
        execute: Main entry point, returns results ordered by task index
        _execute_parallel: Run tasks on several worker processes
        _execute_sequential: Run tasks one after the other in-process
    """

    @abstractmethod
    def execute(self, task: Callable[[int], Any], indices: Sequence[int], label: str = "tasks") -> List[Any]:
        """Run `task(i)` for every index and return the results in index order.

        Args:
            task: Picklable callable taking a task index
            indices: Task indices to run
            label: Name used in logs, progress bars and error messages

        Returns:
            List of task results, ordered like `indices`

        Raises:
            ExperimentError: If any task fails
        """
        pass

    @abstractmethod
    def _execute_parallel(self, task: Callable[[int], Any], indices: Sequence[int], label: str) -> List[Any]:
        """Run tasks concurrently.

        Notes:
            - Completion order is arbitrary; results must be re-ordered by index
            - Reductions over the results must not depend on completion order
        """
        pass

    @abstractmethod
    def _execute_sequential(self, task: Callable[[int], Any], indices: Sequence[int], label: str) -> List[Any]:
        """Run tasks one at a time, in index order."""
        pass
