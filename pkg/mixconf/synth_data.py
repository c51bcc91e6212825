#!/usr/bin/env python3
"""
Synthetic Data Module

Seeded 2-D classification datasets for desk-scale experiments:
- Two moons (two interleaved half circles) and Gaussian blobs, both
  generated with scikit-learn
- Class-prior-preserving subsampling and labeled/unlabeled/validation/test
  splits (stratified scikit-learn splits)
- Gaussian jitter, the stochastic augmentation averaged over K draws when
  pseudo-labels are estimated
- CSV export of a split for external inspection
"""

import csv
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from sklearn.datasets import make_blobs, make_moons
from sklearn.model_selection import train_test_split

from mixconf.errors import ConfigError, SplitSizeError

logger = logging.getLogger(__name__)

SEED_MODULUS = 2**32  # scikit-learn random_state must fit in 32 bits

# ============================================================================
# DOMAIN TYPES SECTION
# ============================================================================


class Generator(str, Enum):
    TWO_MOONS = "two_moons"
    GAUSSIAN_BLOBS = "gaussian_blobs"


@dataclass(frozen=True)
class DatasetSpec:
    """
    Attributes:
        generator: two_moons or gaussian_blobs
        n_samples: Total points, at least n_classes
        noise_sd: Gaussian noise added to the moons / blob standard deviation
        n_classes: 2 for two moons, any C >= 2 for blobs
        seed: Generation seed
        center_radius: Blob centers sit evenly on a circle of this radius
    """

    generator: Generator = Generator.TWO_MOONS
    n_samples: int = 2000
    noise_sd: float = 0.1
    n_classes: int = 2
    seed: int = 0
    center_radius: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "generator", Generator(self.generator))
        if self.generator is Generator.TWO_MOONS and self.n_classes != 2:
            raise ConfigError(f"two_moons has exactly 2 classes, got n_classes={self.n_classes}")
        if self.n_classes < 2:
            raise ConfigError(f"need at least 2 classes, got {self.n_classes}")
        if self.n_samples < self.n_classes:
            raise ConfigError(f"n_samples={self.n_samples} is smaller than n_classes={self.n_classes}")
        if self.noise_sd < 0.0:
            raise ConfigError(f"noise_sd must be non-negative, got {self.noise_sd}")


@dataclass(frozen=True)
class SplitSpec:
    n_labeled: int
    n_validation: int = 0
    n_test: int = 0


@dataclass
class Dataset:
    x: np.ndarray
    y: np.ndarray

    def __len__(self):
        return len(self.y)

    def take(self, indices) -> "Dataset":
        return Dataset(self.x[indices], self.y[indices])


@dataclass
class UnlabeledPool:
    """Unlabeled features; hidden_labels are kept for diagnostics only"""

    x: np.ndarray
    hidden_labels: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.x)


@dataclass
class DataSplit:
    labeled: Dataset
    unlabeled: UnlabeledPool
    validation: Dataset
    test: Dataset
    indices: dict = field(default_factory=dict)  # split name -> indices into the source dataset


# ============================================================================
# GENERATION SECTION
# ============================================================================


def blob_centers(n_classes: int, radius: float) -> np.ndarray:
    angles = 2.0 * np.pi * np.arange(n_classes) / n_classes
    return radius * np.column_stack([np.cos(angles), np.sin(angles)])


def generate(spec: DatasetSpec) -> Dataset:
    """
    Generate a seeded dataset with class counts balanced within one sample
    """
    if spec.generator is Generator.TWO_MOONS:
        x, y = make_moons(n_samples=spec.n_samples, noise=spec.noise_sd or None, random_state=spec.seed)
    else:
        x, y = make_blobs(
            n_samples=spec.n_samples,
            centers=blob_centers(spec.n_classes, spec.center_radius),
            cluster_std=spec.noise_sd,
            random_state=spec.seed,
        )
    logger.debug(f"Generated {spec.generator.value} dataset: {np.bincount(y).tolist()} per class")
    return Dataset(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.int64))


# ============================================================================
# SPLITTING SECTION
# ============================================================================


def _stratified_take(indices, labels, n: int, seed: int):
    """
    Pick n of the given indices keeping class priors; returns (taken, rest)
    """
    if n == 0:
        return indices[:0], indices
    if n == len(indices):
        return indices, indices[:0]
    try:
        taken, rest = train_test_split(indices, train_size=n, stratify=labels, random_state=seed)
    except ValueError as e:
        # Fewer picks (or leftovers) than classes; a stratified split is impossible
        logger.warning(f"Stratified split of {n}/{len(indices)} failed ({e}); falling back to a plain random split")
        taken, rest = train_test_split(indices, train_size=n, random_state=seed)
    return np.sort(taken), np.sort(rest)


def split(dataset: Dataset, spec: SplitSpec, seed: int) -> DataSplit:
    """
    Carve test, validation and labeled subsets; the remainder is unlabeled

    Each carve is stratified by class so the labeled subset keeps the
    dataset's class priors within one sample per class.

    Raises:
        SplitSizeError: if the requested sizes exceed the dataset
    """
    sizes = (spec.n_labeled, spec.n_validation, spec.n_test)
    if any(s < 0 for s in sizes):
        raise SplitSizeError(f"split sizes must be non-negative, got {sizes}")
    if sum(sizes) > len(dataset):
        raise SplitSizeError(f"split sizes {sizes} add up to more than the {len(dataset)} available samples")

    pool = np.arange(len(dataset))
    test_idx, pool = _stratified_take(pool, dataset.y[pool], spec.n_test, seed)
    val_idx, pool = _stratified_take(pool, dataset.y[pool], spec.n_validation, (seed + 1) % SEED_MODULUS)
    labeled_idx, unlabeled_idx = _stratified_take(pool, dataset.y[pool], spec.n_labeled, (seed + 2) % SEED_MODULUS)

    logger.info(
        f"Split {len(dataset)} samples: {len(labeled_idx)} labeled, {len(unlabeled_idx)} unlabeled, "
        f"{len(val_idx)} validation, {len(test_idx)} test"
    )
    return DataSplit(
        labeled=dataset.take(labeled_idx),
        unlabeled=UnlabeledPool(dataset.x[unlabeled_idx], dataset.y[unlabeled_idx]),
        validation=dataset.take(val_idx),
        test=dataset.take(test_idx),
        indices={"labeled": labeled_idx, "unlabeled": unlabeled_idx, "validation": val_idx, "test": test_idx},
    )


def subsample(dataset: Dataset, proportion: float, seed: int) -> Dataset:
    """Class-prior-preserving subset holding round(proportion * N) samples (at least one per class)"""
    if not 0.0 < proportion <= 1.0:
        raise SplitSizeError(f"proportion must lie in (0, 1], got {proportion}")
    n_classes = len(np.unique(dataset.y))
    n = min(len(dataset), max(n_classes, int(round(proportion * len(dataset)))))
    taken, _ = _stratified_take(np.arange(len(dataset)), dataset.y, n, seed)
    return dataset.take(taken)


# ============================================================================
# AUGMENTATION SECTION
# ============================================================================


def jitter(x_batch, magnitude: float, rng: np.random.Generator) -> np.ndarray:
    """Add isotropic Gaussian noise with standard deviation `magnitude` per coordinate"""
    x = np.asarray(x_batch, dtype=np.float64)
    if magnitude < 0.0:
        raise ConfigError(f"jitter magnitude must be non-negative, got {magnitude}")
    if magnitude == 0.0:
        return x.copy()
    return x + rng.normal(0.0, magnitude, size=x.shape)


# ============================================================================
# EXPORT SECTION
# ============================================================================


def export_csv(data_split: DataSplit, path) -> Path:
    """
    Write every split as rows of (x0, x1, label, split)

    Unlabeled rows carry their hidden label so the file can be used for
    diagnostics.
    """
    path = Path(path)
    parts = [
        ("labeled", data_split.labeled.x, data_split.labeled.y),
        ("unlabeled", data_split.unlabeled.x, data_split.unlabeled.hidden_labels),
        ("validation", data_split.validation.x, data_split.validation.y),
        ("test", data_split.test.x, data_split.test.y),
    ]
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["x0", "x1", "label", "split"])
        for name, x, y in parts:
            for row, label in zip(x, y):
                writer.writerow([repr(float(row[0])), repr(float(row[1])), int(label), name])
    logger.info(f"📄 Dataset exported to {path}")
    return path
