import numpy as np
import pytest

from detscore import LabeledScores


@pytest.fixture
def d1():
    """Tiny recurring dataset: hull vertices and every metric known by hand."""
    return LabeledScores([1.0, 2.0], [0.0, 1.5])


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_labeled(rng, n_tar=None, n_non=None, overlap=1.5) -> LabeledScores:
    """Random overlapping two-class scores, sizes drawn if not given."""
    n_tar = int(n_tar if n_tar is not None else rng.integers(2, 60))
    n_non = int(n_non if n_non is not None else rng.integers(2, 60))
    return LabeledScores(
        rng.normal(overlap, 1.0, n_tar), rng.normal(0.0, 1.0, n_non)
    )


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import SCORECARD
    except ImportError:
        return
    if SCORECARD:
        terminalreporter.section("acceptance scorecard")
        for line in sorted(SCORECARD):
            terminalreporter.write_line(line)
