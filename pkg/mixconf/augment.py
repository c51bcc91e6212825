#!/usr/bin/env python3
"""
Augmentation Module - MixConf and Mixup Interpolation

This module produces interpolated training samples:
    x_tilde = lambda_a * x0 + (1 - lambda_a) * x1
    p_tilde = lambda_b * p0 + (1 - lambda_b) * p1

It supports three augmentors:
- none:      lambda_a = lambda_b = 1, originals pass through untouched
- mixup:     lambda_a ~ Beta(alpha, alpha), lambda_b = lambda_a
- mixconf:   lambda_a ~ truncated kernel mixture, lambda_b = kernel posterior
             (Gaussian "mixconf-g" or triangular "mixconf-t" kernel)

Training code works on whole arrays through mix_arrays(); the per-pair and
per-sequence helpers wrap it for Sample objects.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from mixconf.errors import ConfigError, DimensionMismatchError, LengthMismatchError
from mixconf.kernels import (
    KernelFamily,
    KernelSpec,
    LambdaPair,
    compute_lambda_b,
    sample_lambda_a,
)

logger = logging.getLogger(__name__)

PROBABILITY_TOLERANCE = 1e-9

# ============================================================================
# DOMAIN TYPES SECTION
# ============================================================================


@dataclass(frozen=True)
class Sample:
    """
    A single training sample

    Attributes:
        x: Feature vector
        p: Probability vector over the C classes (one-hot for hard labels)
    """

    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        p = np.asarray(self.p, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise DimensionMismatchError("sample features must be finite")
        if np.any(p < 0.0) or abs(p.sum() - 1.0) > PROBABILITY_TOLERANCE:
            raise DimensionMismatchError(f"sample label must be a probability vector, got {p}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)


@dataclass(frozen=True)
class MixedSample:
    x_tilde: np.ndarray
    p_tilde: np.ndarray
    ratios: LambdaPair
    source_indices: tuple


@dataclass
class MixedArrays:
    """Row-aligned result of mixing two equally sized batches"""

    x_tilde: np.ndarray
    p_tilde: np.ndarray
    lambda_a: np.ndarray
    lambda_b: np.ndarray
    partner_indices: np.ndarray = field(default=None)


class AugmentorKind(str, Enum):
    NONE = "none"
    MIXUP = "mixup"
    MIXCONF_G = "mixconf-g"
    MIXCONF_T = "mixconf-t"


@dataclass(frozen=True)
class Augmentor:
    """
    Augmentor choice plus its single hyperparameter

    Attributes:
        kind: none / mixup / mixconf-g / mixconf-t
        param: Beta alpha for mixup, kernel width sigma for MixConf, unused for none
    """

    kind: AugmentorKind
    param: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", AugmentorKind(self.kind))
        object.__setattr__(self, "param", float(self.param))
        if self.kind is not AugmentorKind.NONE and not self.param > 0.0:
            raise ConfigError(f"{self.kind.value} needs a positive parameter, got {self.param}")

    @classmethod
    def parse(cls, text: str) -> "Augmentor":
        """
        Parse 'none', 'mixup:1.0', 'mixconf-g:0.4' or 'mixconf-t:0.6'
        """
        text = text.strip().lower()
        if text == AugmentorKind.NONE.value:
            return cls(AugmentorKind.NONE)
        try:
            kind, param = text.split(":")
            return cls(AugmentorKind(kind.strip()), float(param))
        except ValueError as e:
            raise ConfigError(f"cannot parse augmentor {text!r}: {e}") from e

    @property
    def kernel(self) -> KernelSpec:
        if self.kind is AugmentorKind.MIXCONF_G:
            return KernelSpec(KernelFamily.GAUSSIAN, self.param)
        if self.kind is AugmentorKind.MIXCONF_T:
            return KernelSpec(KernelFamily.TRIANGULAR, self.param)
        raise ConfigError(f"augmentor {self} has no kernel")

    def __str__(self):
        if self.kind is AugmentorKind.NONE:
            return self.kind.value
        return f"{self.kind.value}:{self.param:g}"


# ============================================================================
# RATIO DRAWING SECTION
# ============================================================================


def draw_lambdas(augmentor: Augmentor, rng: np.random.Generator, size: int, lambda_a=None):
    """
    Draw (lambda_a, lambda_b) vectors for a batch of pairs

    Args:
        augmentor: Which interpolation law to use
        rng: Caller-owned generator (not consumed when lambda_a is forced)
        size: Number of pairs
        lambda_a: Optional forced data ratio, scalar or vector (test hook)

    Returns:
        tuple: (lambda_a, lambda_b) arrays of length size
    """
    if augmentor.kind is AugmentorKind.NONE:
        ones = np.ones(size)
        return ones, ones.copy()

    if lambda_a is not None:
        lam_a = np.broadcast_to(np.asarray(lambda_a, dtype=np.float64), (size,)).copy()
    elif augmentor.kind is AugmentorKind.MIXUP:
        lam_a = rng.beta(augmentor.param, augmentor.param, size=size)
    else:
        lam_a = sample_lambda_a(augmentor.kernel, rng, size=size)

    if augmentor.kind is AugmentorKind.MIXUP:
        return lam_a, lam_a.copy()
    return lam_a, np.asarray(compute_lambda_b(augmentor.kernel, lam_a))


# ============================================================================
# MIXING SECTION
# ============================================================================


def mix_arrays(x0, p0, x1, p1, augmentor: Augmentor, rng, lambda_a=None, partner_indices=None) -> MixedArrays:
    """
    Mix row i of (x0, p0) with row i of (x1, p1) using an independent ratio per row
    """
    x0, x1 = np.asarray(x0, dtype=np.float64), np.asarray(x1, dtype=np.float64)
    p0, p1 = np.asarray(p0, dtype=np.float64), np.asarray(p1, dtype=np.float64)
    if len(x0) != len(x1) or len(p0) != len(p1) or len(x0) != len(p0):
        raise LengthMismatchError(f"cannot pair {len(x0)} originals with {len(x1)} partners")
    if x0.shape[1:] != x1.shape[1:] or p0.shape[1:] != p1.shape[1:]:
        raise DimensionMismatchError(f"feature/label shapes differ: {x0.shape}/{p0.shape} vs {x1.shape}/{p1.shape}")

    lam_a, lam_b = draw_lambdas(augmentor, rng, len(x0), lambda_a=lambda_a)
    col_a, col_b = lam_a[:, None], lam_b[:, None]
    x_tilde = col_a * x0 + (1.0 - col_a) * x1
    p_tilde = col_b * p0 + (1.0 - col_b) * p1
    return MixedArrays(x_tilde, p_tilde, lam_a, lam_b, partner_indices)


def _mix_pair(s0: Sample, s1: Sample, augmentor: Augmentor, rng, lambda_a) -> MixedSample:
    if s0.x.shape != s1.x.shape or s0.p.shape != s1.p.shape:
        raise DimensionMismatchError(
            f"samples differ in shape: x {s0.x.shape} vs {s1.x.shape}, p {s0.p.shape} vs {s1.p.shape}"
        )
    mixed = mix_arrays(s0.x[None], s0.p[None], s1.x[None], s1.p[None], augmentor, rng, lambda_a=lambda_a)
    return MixedSample(
        x_tilde=mixed.x_tilde[0],
        p_tilde=mixed.p_tilde[0],
        ratios=LambdaPair(mixed.lambda_a[0], mixed.lambda_b[0]),
        source_indices=(0, 1),
    )


def mixconf_pair(s0: Sample, s1: Sample, spec: KernelSpec, rng, lambda_a=None) -> MixedSample:
    """
    MixConf interpolation of one pair: lambda_a from the kernel mixture,
    lambda_b from the kernel posterior
    """
    kind = AugmentorKind.MIXCONF_G if spec.family is KernelFamily.GAUSSIAN else AugmentorKind.MIXCONF_T
    return _mix_pair(s0, s1, Augmentor(kind, spec.width), rng, lambda_a)


def mixup_pair(s0: Sample, s1: Sample, alpha: float, rng, lambda_a=None) -> MixedSample:
    """Mixup interpolation of one pair: lambda_a ~ Beta(alpha, alpha), lambda_b = lambda_a"""
    return _mix_pair(s0, s1, Augmentor(AugmentorKind.MIXUP, alpha), rng, lambda_a)


def mix_batches(originals, partners, augmentor: Augmentor, rng, lambda_a=None) -> list:
    """
    Pair originals[i] with partners[i] and mix each pair with its own ratio draw

    Order of the originals is preserved. source_indices holds
    (original index, partner index).
    """
    if len(originals) != len(partners):
        raise LengthMismatchError(f"{len(originals)} originals vs {len(partners)} partners")
    if not originals:
        return []

    x0 = np.stack([s.x for s in originals])
    p0 = np.stack([s.p for s in originals])
    try:
        x1 = np.stack([s.x for s in partners])
        p1 = np.stack([s.p for s in partners])
    except ValueError as e:
        raise DimensionMismatchError(f"partners have inconsistent shapes: {e}") from e

    mixed = mix_arrays(x0, p0, x1, p1, augmentor, rng, lambda_a=lambda_a)
    return [
        MixedSample(
            x_tilde=mixed.x_tilde[i],
            p_tilde=mixed.p_tilde[i],
            ratios=LambdaPair(mixed.lambda_a[i], mixed.lambda_b[i]),
            source_indices=(i, i),
        )
        for i in range(len(originals))
    ]
