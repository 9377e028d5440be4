"""
Shared fixtures for cfshift tests.
"""

import numpy as np
import pytest

from cfshift.core.data import generate, graded_spec
from cfshift.core.ecf import sample_frequency_bank
from cfshift.core.interfaces.feature_interface import FeatureMatrix


@pytest.fixture
def rng():
    """Fixed generator for test inputs."""
    return np.random.default_rng(1234)


@pytest.fixture
def small_bank():
    """16 Gaussian frequencies over 4 dimensions."""
    return sample_frequency_bank(4, 16, scale=1.0, seed=0)


@pytest.fixture
def gaussian_domains(rng):
    """Three 4-D domains: two from N(0, I) and one shifted by 2 along f0."""
    base = rng.normal(size=(500, 4))
    same = rng.normal(size=(500, 4))
    shifted = rng.normal(size=(500, 4)) + np.array([2.0, 0.0, 0.0, 0.0])
    return [
        FeatureMatrix(base, domain_id="a"),
        FeatureMatrix(same, domain_id="b"),
        FeatureMatrix(shifted, domain_id="c"),
    ]


@pytest.fixture
def synthetic_dataset():
    """Small rotation-graded dataset: 3 domains, 3 classes, d = 6."""
    return generate(graded_spec(n_domains=3, classes=3, d=6, samples_per_class_per_domain=40, seed=7))
