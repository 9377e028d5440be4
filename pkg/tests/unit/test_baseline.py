"""
Unit Tests for the PCA baseline.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from sklearn.decomposition import PCA

from cfshift.core.baseline import pca_fit, pca_project
from cfshift.exceptions.shift_exceptions import (
    ConvergenceWarning,
    DimensionMismatchError,
    InvalidArgumentError,
)


@pytest.fixture
def anisotropic(rng):
    """400 samples in 5-D with well separated variances."""
    scales = np.array([5.0, 3.0, 2.0, 1.0, 0.5])
    mixing = np.linalg.qr(rng.normal(size=(5, 5)))[0]
    return (rng.normal(size=(400, 5)) * scales) @ mixing.T + 2.0


class TestPcaFit:
    """Test suite for power-iteration PCA."""

    def test_points_on_diagonal_line(self):
        t = np.linspace(-2.0, 2.0, 9)
        model = pca_fit(np.column_stack([t, t]), k=1)

        assert_allclose(model.components[0], [np.sqrt(0.5), np.sqrt(0.5)], atol=1e-9)
        assert model.explained_variance[0] == pytest.approx(2 * np.var(t))

    def test_components_orthonormal(self, anisotropic):
        model = pca_fit(anisotropic, k=3)
        assert_allclose(model.components @ model.components.T, np.eye(3), atol=1e-8)

    def test_variances_match_eigvalsh(self, anisotropic):
        model = pca_fit(anisotropic, k=3)
        centered = anisotropic - anisotropic.mean(axis=0)
        eigenvalues = np.linalg.eigvalsh(centered.T @ centered / len(anisotropic))[::-1]

        assert_allclose(model.explained_variance, eigenvalues[:3], rtol=1e-8)
        assert np.all(np.diff(model.explained_variance) <= 0)

    def test_matches_sklearn_up_to_sign(self, anisotropic):
        model = pca_fit(anisotropic, k=2)
        reference = PCA(n_components=2).fit(anisotropic)
        n = len(anisotropic)

        # sklearn reports sample variance (divisor n - 1)
        assert_allclose(model.explained_variance * n / (n - 1), reference.explained_variance_, rtol=1e-8)
        for ours, theirs in zip(model.components, reference.components_):
            assert abs(ours @ theirs) == pytest.approx(1.0, abs=1e-8)

    def test_sign_convention(self, anisotropic):
        model = pca_fit(anisotropic, k=2)
        for component in model.components:
            assert component[np.argmax(np.abs(component))] > 0

    def test_row_order_invariant(self, rng, anisotropic):
        a = pca_fit(anisotropic, k=2)
        b = pca_fit(anisotropic[rng.permutation(len(anisotropic))], k=2)
        assert_allclose(a.components, b.components, atol=1e-8)

    def test_deterministic(self, anisotropic):
        a = pca_fit(anisotropic, k=2)
        b = pca_fit(anisotropic, k=2)
        assert np.array_equal(a.components, b.components)

    def test_iteration_cap_warns(self, anisotropic):
        with pytest.warns(ConvergenceWarning):
            pca_fit(anisotropic, k=1, tolerance=1e-15, max_iterations=1)

    def test_needs_two_samples(self):
        with pytest.raises(InvalidArgumentError):
            pca_fit(np.ones((1, 3)), k=1)

    @pytest.mark.parametrize("k", [0, 6])
    def test_k_out_of_range(self, anisotropic, k):
        with pytest.raises(InvalidArgumentError):
            pca_fit(anisotropic, k=k)


class TestPcaProject:
    """Test suite for projecting onto fitted components."""

    def test_projection_centered(self, anisotropic):
        model = pca_fit(anisotropic, k=2)
        projected = pca_project(model, anisotropic)

        assert projected.shape == (400, 2)
        assert_allclose(projected.mean(axis=0), np.zeros(2), atol=1e-10)
        assert_allclose(projected.var(axis=0), model.explained_variance, rtol=1e-8)

    def test_dimension_mismatch(self, anisotropic):
        model = pca_fit(anisotropic, k=2)
        with pytest.raises(DimensionMismatchError):
            pca_project(model, np.ones((3, 4)))
