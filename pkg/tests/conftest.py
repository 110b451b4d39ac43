import numpy as np
import pytest

from deloclab.engine.trial_executor import TrialExecutor
from deloclab.streams import StreamFactory


@pytest.fixture
def executor():
    return TrialExecutor(workers=1, progress=False)


@pytest.fixture
def streams():
    return StreamFactory(seed=20240601, label="tests")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
