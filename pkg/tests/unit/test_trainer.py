"""
Unit Tests for the adapter trainer.

Covers the forward pass, both loss terms, the analytic gradient (checked
against central finite differences) and the SGD loop.
"""

import math
import warnings

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from cfshift.core.ecf import sample_frequency_bank
from cfshift.core.interfaces.model_interface import (
    AdapterModel,
    BankParams,
    DomainSamples,
    LabeledDataset,
    TrainConfig,
)
from cfshift.core.loss import cfl_between
from cfshift.core.trainer import (
    cfl_step_loss,
    erm_loss,
    evaluate,
    forward,
    total_loss,
    train,
)
from cfshift.exceptions.shift_exceptions import (
    DimensionMismatchError,
    InvalidArgumentError,
    SingleDomainWarning,
    UnknownDomainError,
)


def _small_model(seed, input_dim=3, hidden=(4,), embedding=2, classes=2):
    return AdapterModel.initialize(input_dim, hidden, embedding, classes, rng=np.random.default_rng(seed))


class TestForward:
    """Test suite for the forward pass."""

    def test_zero_model_uniform_logits(self, rng):
        model = AdapterModel.initialize(3, [4], 2, 3, zero=True)
        embeddings, logits = forward(model, rng.normal(size=(5, 3)))

        assert embeddings.shape == (5, 2)
        assert_array_equal(logits, np.zeros((5, 3)))
        assert erm_loss(logits, [0, 1, 2, 0, 1]) == pytest.approx(math.log(3))

    def test_no_adapter_embeddings_equal_input(self, rng):
        model = AdapterModel.initialize(4, [], None, 2)
        batch = rng.normal(size=(6, 4))
        embeddings, _ = forward(model, batch)
        assert_array_equal(embeddings, batch)

    def test_identity_layer_applies_tanh(self, rng):
        model = AdapterModel(layers=((np.eye(3), np.zeros(3)),), head=(np.ones((3, 2)), np.zeros(2)))
        batch = rng.normal(size=(4, 3))
        embeddings, logits = forward(model, batch)

        assert_array_equal(embeddings, np.tanh(batch))
        assert_array_equal(logits[:, 0], logits[:, 1])

    def test_repeat_call_bit_identical(self, rng):
        model = _small_model(3)
        batch = rng.normal(size=(5, 3))
        first = forward(model, batch)
        second = forward(model, batch)
        assert_array_equal(first[0], second[0])
        assert_array_equal(first[1], second[1])

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatchError):
            forward(_small_model(0), rng.normal(size=(5, 4)))

    def test_model_shapes(self):
        model = AdapterModel.initialize(16, [64], 32, 5)
        assert model.input_dim == 16
        assert model.hidden_dims == [64]
        assert model.embedding_dim == 32
        assert model.num_classes == 5
        assert len(model.parameters()) == 6

    def test_parameters_read_only(self):
        model = _small_model(0)
        with pytest.raises(ValueError):
            model.parameters()[0][0, 0] = 1.0

    def test_inconsistent_shapes_rejected(self):
        with pytest.raises(DimensionMismatchError):
            AdapterModel(layers=((np.zeros((3, 4)), np.zeros(4)),), head=(np.zeros((5, 2)), np.zeros(2)))


class TestErmLoss:
    """Test suite for softmax cross-entropy."""

    def test_uniform_logits(self):
        assert erm_loss(np.zeros((3, 4)), [0, 1, 3]) == pytest.approx(1.3862943611, abs=1e-10)

    def test_large_margin_vanishes(self):
        assert erm_loss(np.array([[100.0, 0.0]]), [0]) < 1e-40

    def test_hand_evaluated_logits(self):
        """Test logits [1, 2]: ln(1 + e^-1) for the larger class, ln(1 + e) - 1 for the smaller."""
        logits = np.array([[1.0, 2.0]])
        assert erm_loss(logits, [1]) == pytest.approx(0.3132616875, abs=1e-10)
        assert erm_loss(logits, [0]) == pytest.approx(1.3132616875, abs=1e-10)

    def test_extreme_logits_finite(self):
        assert math.isfinite(erm_loss(np.array([[1e4, -1e4]]), [1]))

    def test_label_out_of_range(self):
        with pytest.raises(InvalidArgumentError):
            erm_loss(np.zeros((2, 3)), [0, 3])

    def test_row_count_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            erm_loss(np.zeros((2, 3)), [0])


class TestCflStepLoss:
    """Test suite for the per-step CFL over domain batches."""

    def test_identical_batches_zero(self, rng, small_bank):
        batch = rng.normal(size=(20, 4))
        assert cfl_step_loss([batch, batch.copy()], small_bank) == 0.0

    def test_mean_over_pairs(self, gaussian_domains, small_bank):
        a, b, c = gaussian_domains
        p = cfl_between(a, b, small_bank)
        q = cfl_between(a, c, small_bank)
        r = cfl_between(b, c, small_bank)
        assert cfl_step_loss([a, b, c], small_bank) == pytest.approx((p + q + r) / 3, abs=1e-15)

    def test_shifted_batch_increases_loss(self):
        rng = np.random.default_rng(5)
        bank = sample_frequency_bank(4, 32, seed=5)
        same = [rng.normal(size=(512, 4)) for _ in range(3)]
        shifted = same[:2] + [same[2] + np.array([3.0, 0.0, 0.0, 0.0])]
        assert cfl_step_loss(same, bank) < cfl_step_loss(shifted, bank)

    def test_single_domain_warns(self, rng, small_bank):
        with pytest.warns(SingleDomainWarning):
            assert cfl_step_loss([rng.normal(size=(8, 4))], small_bank) == 0.0

    def test_invariant_to_row_order(self, rng, small_bank):
        a = rng.normal(size=(25, 4))
        b = rng.normal(loc=0.5, size=(25, 4))
        shuffled = a[rng.permutation(25)]
        assert cfl_step_loss([a, b], small_bank) == pytest.approx(cfl_step_loss([shuffled, b], small_bank), abs=1e-14)


class TestTotalLoss:
    """Test suite for the combined objective and its gradient."""

    @pytest.fixture
    def setup(self, rng):
        model = _small_model(11)
        labeled = [(rng.normal(size=(6, 3)), rng.integers(0, 2, size=6))]
        unlabeled = [rng.normal(loc=1.0, size=(6, 3))]
        bank = sample_frequency_bank(2, 8, seed=3)
        return model, labeled, unlabeled, bank

    def test_lambda_zero_equals_erm(self, setup):
        model, labeled, unlabeled, bank = setup
        total, _ = total_loss(model, labeled, unlabeled, bank, 0.0)
        _, logits = forward(model, labeled[0][0])
        assert total == erm_loss(logits, labeled[0][1])

    def test_lambda_zero_gradient_ignores_targets(self, setup):
        model, labeled, unlabeled, bank = setup
        _, with_targets = total_loss(model, labeled, unlabeled, bank, 0.0)
        _, without_targets = total_loss(model, labeled, [], bank, 0.0)
        for g, h in zip(with_targets, without_targets):
            assert_array_equal(g, h)

    def test_identical_source_and_target(self, setup):
        model, labeled, _, bank = setup
        total, _ = total_loss(model, labeled, [labeled[0][0].copy()], bank, 0.5)
        _, logits = forward(model, labeled[0][0])
        assert total == pytest.approx(erm_loss(logits, labeled[0][1]), abs=1e-15)

    def test_nondecreasing_in_lambda(self, setup):
        model, labeled, unlabeled, bank = setup
        values = [total_loss(model, labeled, unlabeled, bank, lam)[0] for lam in (0.0, 0.1, 1.0, 10.0)]
        assert values == sorted(values)

    def test_gradient_shapes(self, setup):
        model, labeled, unlabeled, bank = setup
        _, grads = total_loss(model, labeled, unlabeled, bank, 0.1)
        assert [g.shape for g in grads] == [p.shape for p in model.parameters()]

    def test_requires_labeled_batch(self, setup):
        model, _, unlabeled, bank = setup
        with pytest.raises(InvalidArgumentError):
            total_loss(model, [], unlabeled, bank, 0.1)

    def test_negative_lambda(self, setup):
        model, labeled, unlabeled, bank = setup
        with pytest.raises(InvalidArgumentError):
            total_loss(model, labeled, unlabeled, bank, -0.1)

    @pytest.mark.parametrize("cfl_lambda", [0.0, 0.1, 1.0])
    @pytest.mark.parametrize("case", range(20))
    def test_gradient_matches_finite_differences(self, case, cfl_lambda):
        """Test analytic gradients against central differences (h = 1e-5)."""
        rng = np.random.default_rng(100 + case)
        model = _small_model(case)
        n_sources = 1 + case % 2
        labeled = [(rng.normal(size=(6, 3)), rng.integers(0, 2, size=6)) for _ in range(n_sources)]
        unlabeled = [rng.normal(loc=0.5, scale=1.5, size=(6, 3))]
        bank = sample_frequency_bank(2, 8, scale=1.0 + 0.1 * case, seed=case)

        _, grads = total_loss(model, labeled, unlabeled, bank, cfl_lambda)
        params = [p.copy() for p in model.parameters()]
        h = 1e-5

        for index, param in enumerate(params):
            numeric = np.zeros_like(param)
            for position in np.ndindex(param.shape):
                plus = [p.copy() for p in params]
                minus = [p.copy() for p in params]
                plus[index][position] += h
                minus[index][position] -= h
                f_plus, _ = total_loss(model.with_parameters(plus), labeled, unlabeled, bank, cfl_lambda)
                f_minus, _ = total_loss(model.with_parameters(minus), labeled, unlabeled, bank, cfl_lambda)
                numeric[position] = (f_plus - f_minus) / (2 * h)

            scale = max(np.linalg.norm(grads[index]), np.linalg.norm(numeric), 1e-6)
            assert np.linalg.norm(grads[index] - numeric) / scale <= 1e-4


def _two_domain_dataset(sizes=(10, 7), dim=3, classes=2, seed=0):
    rng = np.random.default_rng(seed)
    domains = {
        f"s{i}": DomainSamples(rng.normal(size=(n, dim)), np.arange(n) % classes)
        for i, n in enumerate(sizes)
    }
    return LabeledDataset(domains=domains, dim=dim, num_classes=classes, source_domains=("s0",), target_domains=("s1",))


class TestTrain:
    """Test suite for the SGD training loop."""

    @pytest.fixture
    def config(self):
        return TrainConfig(
            lr=0.05,
            cfl_lambda=0.5,
            epochs=3,
            batch_per_domain=4,
            bank=BankParams(k=8, seed=2),
            seed=4,
            hidden_dims=(4,),
            embedding_dim=2,
        )

    def test_steps_per_epoch(self, config):
        """Test one epoch runs ceil(min domain size / batch) steps."""
        dataset = _two_domain_dataset(sizes=(10, 7))
        one_epoch = TrainConfig(**{**config.__dict__, "epochs": 1, "batch_per_domain": 3})

        _, history = train(dataset, one_epoch)

        assert len(history) == 2
        assert history[0].epoch == 0
        assert history[0].steps == 0
        assert history[1].steps == math.ceil(7 / 3)

    def test_history_records(self, config):
        dataset = _two_domain_dataset()
        _, history = train(dataset, config)

        assert [r.epoch for r in history] == [0, 1, 2, 3]
        for record in history:
            assert record.total == pytest.approx(record.erm + 0.5 * record.cfl)
            assert record.report.domain_ids == ["s0", "s1"]
            assert record.report.bank_meta["seed"] == 2
            assert set(record.to_dict()) == {"epoch", "erm", "cfl", "total", "steps", "matrix"}

    def test_lambda_zero_history_keeps_cfl(self, config):
        dataset = _two_domain_dataset()
        _, history = train(dataset, TrainConfig(**{**config.__dict__, "cfl_lambda": 0.0}))
        for record in history:
            assert record.total == record.erm
            assert record.cfl >= 0.0

    def test_on_epoch_callback(self, config):
        seen = []
        train(_two_domain_dataset(), config, on_epoch=lambda record: seen.append(record.epoch))
        assert seen == [0, 1, 2, 3]

    @pytest.mark.parametrize("resample", [False, True])
    def test_reproducible(self, config, resample):
        """Test a fixed seed gives a bit-identical trajectory."""
        dataset = _two_domain_dataset()
        config = TrainConfig(**{**config.__dict__, "resample_bank_each_step": resample})

        model_a, history_a = train(dataset, config)
        model_b, history_b = train(dataset, config)

        for p, q in zip(model_a.parameters(), model_b.parameters()):
            assert_array_equal(p, q)
        assert [r.total for r in history_a] == [r.total for r in history_b]
        assert_array_equal(history_a[-1].report.matrix, history_b[-1].report.matrix)

    def test_seed_changes_result(self, config):
        dataset = _two_domain_dataset()
        model_a, _ = train(dataset, config)
        model_b, _ = train(dataset, TrainConfig(**{**config.__dict__, "seed": 5}))
        assert not np.array_equal(model_a.parameters()[0], model_b.parameters()[0])

    def test_separable_single_domain(self):
        """Test plain ERM fits linearly separable data."""
        rng = np.random.default_rng(0)
        features = np.vstack([
            rng.normal(loc=[-3.0, 0.0], scale=0.5, size=(100, 2)),
            rng.normal(loc=[3.0, 0.0], scale=0.5, size=(100, 2)),
        ])
        labels = np.repeat([0, 1], 100)
        dataset = LabeledDataset(
            domains={"only": DomainSamples(features, labels)},
            dim=2,
            num_classes=2,
            source_domains=("only",),
        )
        config = TrainConfig(
            lr=0.1,
            cfl_lambda=0.0,
            epochs=50,
            batch_per_domain=16,
            bank=BankParams(k=8),
            hidden_dims=(8,),
            embedding_dim=4,
        )

        with warnings.catch_warnings():
            warnings.simplefilter("error", SingleDomainWarning)
            model, history = train(dataset, config)

        assert evaluate(model, dataset)["only"] >= 0.99
        assert history[-1].report.domain_ids == ["only"]

    def test_requires_source(self):
        dataset = LabeledDataset(
            domains={"a": DomainSamples(np.zeros((4, 2)), np.zeros(4))},
            dim=2,
            num_classes=1,
        )
        with pytest.raises(InvalidArgumentError):
            train(dataset, TrainConfig(epochs=1, embedding_dim=2, hidden_dims=()))

    @pytest.mark.parametrize(
        "overrides",
        [{"epochs": 0}, {"lr": 0.0}, {"cfl_lambda": -0.1}, {"batch_per_domain": 1}],
    )
    def test_invalid_config(self, overrides):
        with pytest.raises(InvalidArgumentError):
            TrainConfig(**overrides)


class TestEvaluate:
    """Test suite for per-domain accuracy."""

    def test_constant_logits_pick_class_zero(self):
        dataset = LabeledDataset(
            domains={
                "a": DomainSamples(np.ones((4, 2)), [0, 1, 2, 0]),
                "b": DomainSamples(np.ones((5, 2)), [1, 1, 2, 0, 2]),
            },
            dim=2,
            num_classes=3,
        )
        model = AdapterModel.initialize(2, [], None, 3, zero=True)

        assert evaluate(model, dataset) == {"a": 0.5, "b": 0.2}

    def test_domain_subset(self, synthetic_dataset):
        model = AdapterModel.initialize(6, [], None, 3)
        result = evaluate(model, synthetic_dataset, ["d1"])
        assert list(result) == ["d1"]
        assert 0.0 <= result["d1"] <= 1.0

    def test_unknown_domain(self, synthetic_dataset):
        with pytest.raises(UnknownDomainError):
            evaluate(AdapterModel.initialize(6, [], None, 3), synthetic_dataset, ["nope"])

    def test_empty_domain(self):
        dataset = LabeledDataset(
            domains={"a": DomainSamples(np.zeros((0, 2)), np.zeros(0))},
            dim=2,
            num_classes=2,
        )
        with pytest.raises(InvalidArgumentError):
            evaluate(AdapterModel.initialize(2, [], None, 2), dataset)

    def test_dimension_mismatch(self, synthetic_dataset):
        with pytest.raises(DimensionMismatchError):
            evaluate(AdapterModel.initialize(5, [], None, 3), synthetic_dataset)
