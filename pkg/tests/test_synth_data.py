"""Tests for synthetic datasets, splits, jitter and CSV export"""

import csv

import numpy as np
import pytest

from mixconf.errors import ConfigError, SplitSizeError
from mixconf.synth_data import (
    DatasetSpec,
    Generator,
    SplitSpec,
    export_csv,
    generate,
    jitter,
    split,
    subsample,
)


class TestGenerate:
    def test_noise_free_moons_lie_on_half_circles(self):
        data = generate(DatasetSpec(n_samples=200, noise_sd=0.0, seed=1))
        outer = data.x[data.y == 0]
        inner = data.x[data.y == 1]
        np.testing.assert_allclose(np.linalg.norm(outer, axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(inner - np.array([1.0, 0.5]), axis=1), 1.0, atol=1e-12)
        assert np.all(outer[:, 1] >= -1e-12)
        assert np.all(inner[:, 1] <= 0.5 + 1e-12)

    def test_balanced_classes(self):
        data = generate(DatasetSpec(n_samples=100, seed=2))
        np.testing.assert_array_equal(np.bincount(data.y), [50, 50])
        blobs = generate(DatasetSpec(Generator.GAUSSIAN_BLOBS, n_samples=100, n_classes=3, noise_sd=1.0, seed=2))
        counts = np.bincount(blobs.y)
        assert counts.max() - counts.min() <= 1

    def test_same_seed_same_dataset(self):
        spec = DatasetSpec(Generator.GAUSSIAN_BLOBS, n_samples=50, n_classes=4, noise_sd=0.5, seed=3)
        a, b = generate(spec), generate(spec)
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.y, b.y)

    def test_outputs_are_finite(self):
        assert np.all(np.isfinite(generate(DatasetSpec(n_samples=300, noise_sd=0.3)).x))

    def test_moons_have_two_classes(self):
        with pytest.raises(ConfigError):
            DatasetSpec(Generator.TWO_MOONS, n_classes=3)

    def test_needs_one_sample_per_class(self):
        with pytest.raises(ConfigError):
            DatasetSpec(Generator.GAUSSIAN_BLOBS, n_samples=3, n_classes=4)


class TestSplit:
    @pytest.fixture
    def dataset(self):
        return generate(DatasetSpec(Generator.GAUSSIAN_BLOBS, n_samples=600, n_classes=3, noise_sd=1.0, seed=4))

    def test_disjoint_and_complete(self, dataset):
        parts = split(dataset, SplitSpec(30, 100, 150), seed=4)
        index_sets = [set(idx.tolist()) for idx in parts.indices.values()]
        assert sum(len(s) for s in index_sets) == len(dataset)
        assert set().union(*index_sets) == set(range(len(dataset)))
        assert len(parts.labeled) == 30
        assert len(parts.validation) == 100
        assert len(parts.test) == 150
        assert len(parts.unlabeled) == 320

    def test_labeled_split_keeps_priors(self, dataset):
        parts = split(dataset, SplitSpec(30, 100, 150), seed=5)
        priors = np.bincount(dataset.y) / len(dataset)
        counts = np.bincount(parts.labeled.y, minlength=3)
        assert np.all(np.abs(counts - priors * 30) <= 1.0)

    def test_unlabeled_keeps_hidden_labels(self, dataset):
        parts = split(dataset, SplitSpec(30, 0, 0), seed=6)
        np.testing.assert_array_equal(parts.unlabeled.hidden_labels, dataset.y[parts.indices["unlabeled"]])

    def test_everything_labeled(self, dataset):
        parts = split(dataset, SplitSpec(450, 0, 150), seed=7)
        assert len(parts.unlabeled) == 0

    def test_size_overflow(self, dataset):
        with pytest.raises(SplitSizeError):
            split(dataset, SplitSpec(400, 100, 150), seed=8)

    def test_tiny_labeled_split_falls_back(self, dataset):
        parts = split(dataset, SplitSpec(2, 0, 0), seed=9)
        assert len(parts.labeled) == 2


class TestSubsample:
    def test_keeps_priors(self):
        data = generate(DatasetSpec(Generator.GAUSSIAN_BLOBS, n_samples=400, n_classes=4, noise_sd=1.0, seed=10))
        subset = subsample(data, 0.05, seed=10)
        assert len(subset) == 20
        np.testing.assert_array_equal(np.bincount(subset.y, minlength=4), [5, 5, 5, 5])

    def test_full_proportion(self):
        data = generate(DatasetSpec(n_samples=60, seed=11))
        assert len(subsample(data, 1.0, seed=11)) == 60

    def test_rejects_zero(self):
        with pytest.raises(SplitSizeError):
            subsample(generate(DatasetSpec(n_samples=60)), 0.0, seed=0)


class TestJitter:
    def test_zero_magnitude_is_identity(self, rng):
        x = rng.normal(size=(10, 2))
        np.testing.assert_array_equal(jitter(x, 0.0, rng), x)

    def test_noise_standard_deviation(self):
        x = np.zeros((500_000, 2))
        noise = jitter(x, 0.3, np.random.default_rng(12)) - x
        np.testing.assert_allclose(noise.std(axis=0), 0.3, rtol=0.01)

    def test_same_seed_same_noise(self):
        x = np.ones((5, 2))
        np.testing.assert_array_equal(jitter(x, 0.1, np.random.default_rng(13)), jitter(x, 0.1, np.random.default_rng(13)))

    def test_negative_magnitude(self, rng):
        with pytest.raises(ConfigError):
            jitter(np.zeros((1, 2)), -0.1, rng)


def test_export_csv(moons_split, tmp_path):
    path = export_csv(moons_split, tmp_path / "split.csv")
    with path.open() as handle:
        rows = list(csv.DictReader(handle))
    assert list(rows[0]) == ["x0", "x1", "label", "split"]
    assert len(rows) == 400
    assert sum(row["split"] == "labeled" for row in rows) == 10
