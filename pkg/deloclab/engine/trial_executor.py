"""
Standard implementation of task execution with configurable parallelism.

Tasks run either in-process or on a multiprocessing pool. Results are always
re-ordered by task index before they are returned, which keeps every
reduction downstream independent of the degree of parallelism.
"""

import logging
from multiprocessing import Pool
from typing import Any, Callable, List, Sequence, Tuple

from tqdm import tqdm

from deloclab import settings
from deloclab.engine.base_executor import TrialExecutorBase
from deloclab.errors import ExperimentError, LabError

# --- Worker entry point (module level so it pickles) ---

def _run_indexed(payload: Tuple[Callable[[int], Any], int]) -> Tuple[int, Any]:
    task, index = payload
    return index, task(index)


def chunk_sizes(total: int, chunk: int) -> List[int]:
    """Split `total` draws into chunks of at most `chunk` draws.

    The split depends only on (total, chunk), never on the worker count.
    """
    if total < 0 or chunk < 1:
        raise ValueError(f"invalid chunking: total={total}, chunk={chunk}")
    full, rest = divmod(total, chunk)
    return [chunk] * full + ([rest] if rest else [])


class TrialExecutor(TrialExecutorBase):
    """Runs indexed tasks sequentially or on a process pool.

    Attributes:
        workers (int): Number of worker processes; 1 means in-process execution
        progress (bool): Whether to show a tqdm progress bar
    """

    def __init__(self, workers: int = None, progress: bool = None):
        """Initialize the executor.

        Args:
            workers: Worker processes (default: LAB_WORKERS)
            progress: Show progress bars (default: LAB_PROGRESS)
        """
        self.workers = max(1, int(workers if workers is not None else settings.LAB_WORKERS))
        self.progress = settings.LAB_PROGRESS if progress is None else progress

    @property
    def parallel(self) -> bool:
        return self.workers > 1

    def execute(self, task: Callable[[int], Any], indices: Sequence[int], label: str = "tasks") -> List[Any]:
        indices = list(indices)
        if not indices:
            return []
        logging.debug(f"Executing {len(indices)} {label} with {self.workers} worker(s)")
        if self.parallel and len(indices) > 1:
            return self._execute_parallel(task, indices, label)
        return self._execute_sequential(task, indices, label)

    def _execute_parallel(self, task: Callable[[int], Any], indices: Sequence[int], label: str) -> List[Any]:
        results = {}
        pbar = tqdm(total=len(indices), desc=label, disable=not self.progress)
        try:
            with Pool(min(self.workers, len(indices))) as pool:
                for index, result in pool.imap_unordered(_run_indexed, [(task, i) for i in indices]):
                    results[index] = result
                    pbar.update(1)
        except LabError:
            raise
        except Exception as e:
            error_msg = f"Error executing {label}: {str(e)}"
            logging.error(error_msg)
            raise ExperimentError(label, error_msg) from e
        finally:
            pbar.close()
        return [results[i] for i in indices]

    def _execute_sequential(self, task: Callable[[int], Any], indices: Sequence[int], label: str) -> List[Any]:
        results = []
        for index in tqdm(indices, desc=label, disable=not self.progress):
            try:
                results.append(task(index))
            except LabError:
                raise
            except Exception as e:
                error_msg = f"Error executing {label} #{index}: {str(e)}"
                logging.error(error_msg)
                raise ExperimentError(label, error_msg) from e
        return results
