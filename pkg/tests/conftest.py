import numpy as np
import pytest

from parce.config import CLASS_NAMES, Settings
from parce.data import build_corpus
from parce.pipeline import build_estimator


@pytest.fixture(scope="session")
def small_settings():
    s = Settings()
    s.data = s.data.__class__(tiles_per_class=30, epochs=300, rank=16)
    return s


@pytest.fixture(scope="session")
def small_corpus(small_settings):
    d = small_settings.data
    return build_corpus(d.tiles_per_class, 0, small_settings.camera, d.test_fraction, d.holdout_fraction)


@pytest.fixture(scope="session")
def small_estimator(small_settings, small_corpus):
    """A quickly trained bundle; accuracy is not the point of the tests using it."""
    return build_estimator(small_settings, small_corpus)


@pytest.fixture
def n_classes():
    return len(CLASS_NAMES)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
