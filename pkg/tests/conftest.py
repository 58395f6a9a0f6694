import numpy as np
import pytest

from anchortopics.evaluation import generate_synthetic
from anchortopics.model import FitConfig, fit


def assert_objective_progress(report):
    """Every fit must end at least as high as it started (within 1e-6)."""
    assert report.tc_history[-1] >= report.tc_history[0] - 1e-6


@pytest.fixture(scope="session")
def two_block_corpus():
    """The standard recovery corpus: 2 factors x 10 words, eps=0.1, N=500."""
    return generate_synthetic(2, 10, 0.1, 500, seed=42)


@pytest.fixture(scope="session")
def fitted_two_block(two_block_corpus):
    config = FitConfig(n_factors=2, seed=1)
    model, report = fit(two_block_corpus.matrix, config)
    assert_objective_progress(report)
    return model, report
