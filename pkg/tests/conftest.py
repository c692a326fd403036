import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from grmssvdd import data, preprocessing, synthgen  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def synth_events():
    return synthgen.generate(synthgen.SynthConfig(n_events=30, channels=(3, 4, 4), n_timesteps=60, seed=3))


@pytest.fixture(scope="session")
def small_pipeline(synth_events):
    """A preprocessed train/test pair built from small synthetic events."""
    from grmssvdd.pipeline import preprocess

    train_ev, test_ev = data.split_train_test(synth_events, 0.7, 3)
    return preprocess(train_ev, test_ev, preprocessing.WindowSpec(10), 0.0, 10, 3)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
