#!/usr/bin/env python3
"""
Kernel Core Module - Interpolation-Ratio Kernels

This module defines the kernels that live in the space of the data
interpolation ratio (lambda_a) and everything derived from them:
- Kernel evaluation for the Gaussian and triangular families
- The truncated two-component mixture density p(lambda_a) on [0, 1]
- Inverse-CDF sampling of lambda_a from that density
- The label interpolation ratio lambda_b, i.e. the kernel-density
  class posterior of the first endpoint

Kernel widths are expressed directly in lambda-space. The matching x-space
kernel is pair dependent (it scales with |x0 - x1|), so only the
lambda-space kernel is ever needed at runtime.

Everything here is a pure function of an immutable KernelSpec; the random
source is always owned by the caller.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.integrate import cumulative_trapezoid, simpson
from scipy.special import expit

from mixconf.errors import DegenerateKernelError, InvalidKernelError

logger = logging.getLogger(__name__)

# ============================================================================
# NUMERICAL CONSTANTS SECTION
# ============================================================================

QUADRATURE_NODES = 4097  # Simpson nodes on [0, 1] for the normalization constant
CDF_GRID_INTERVALS = 4096  # Cells of the piecewise-linear inverse-CDF table

# ============================================================================
# DOMAIN TYPES SECTION
# ============================================================================


class KernelFamily(str, Enum):
    GAUSSIAN = "gaussian"
    TRIANGULAR = "triangular"


@dataclass(frozen=True)
class KernelSpec:
    """
    Lambda-space kernel k' used by MixConf

    Attributes:
        family: Gaussian or triangular shape
        width: sigma in lambda units (must be positive and finite)
    """

    family: KernelFamily
    width: float

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        width = float(self.width)
        if not np.isfinite(width) or width <= 0.0:
            raise InvalidKernelError(f"kernel width must be a positive finite number, got {self.width!r}")
        object.__setattr__(self, "width", width)

    @classmethod
    def parse(cls, text: str) -> "KernelSpec":
        """Parse the config notation 'gaussian:0.4' / 'triangular:0.6'"""
        try:
            family, width = text.strip().split(":")
            return cls(KernelFamily(family.strip().lower()), float(width))
        except (ValueError, AttributeError) as e:
            raise InvalidKernelError(f"cannot parse kernel spec {text!r}: {e}") from e

    def __str__(self):
        return f"{self.family.value}:{self.width:g}"


@dataclass(frozen=True)
class LambdaPair:
    """Interpolation ratios for data (lambda_a) and labels (lambda_b)"""

    lambda_a: float
    lambda_b: float

    def __post_init__(self):
        for name in ("lambda_a", "lambda_b"):
            value = float(getattr(self, name))
            if not 0.0 <= value <= 1.0:
                raise InvalidKernelError(f"{name} must lie in [0, 1], got {value}")
            object.__setattr__(self, name, value)


# ============================================================================
# KERNEL EVALUATION SECTION
# ============================================================================


def _scalar_or_array(values, like):
    """Return a python float when the caller passed a scalar"""
    if np.ndim(like) == 0:
        return float(values)
    return values


def eval_kernel(spec: KernelSpec, u):
    """
    Evaluate the unnormalized kernel k'(u)

    Gaussian:   exp(-u^2 / (2 sigma^2))
    Triangular: max(0, 1 - |u| / sigma)

    Args:
        spec: Kernel family and width
        u: Scalar or array of lambda-space offsets

    Returns:
        Kernel value(s), same shape as u
    """
    u_arr = np.asarray(u, dtype=np.float64)
    sigma = spec.width
    if spec.family is KernelFamily.GAUSSIAN:
        values = np.exp(-(u_arr * u_arr) / (2.0 * sigma * sigma))
    else:
        values = np.maximum(0.0, 1.0 - np.abs(u_arr) / sigma)
    return _scalar_or_array(values, u)


def _mixture(spec: KernelSpec, lam):
    # 1/2 k'(lam - 1) + 1/2 k'(lam)
    return 0.5 * eval_kernel(spec, lam - 1.0) + 0.5 * eval_kernel(spec, lam)


# ============================================================================
# TRUNCATED MIXTURE DENSITY SECTION
# ============================================================================


@lru_cache(maxsize=64)
def normalization_constant(spec: KernelSpec) -> float:
    """Integral of the untruncated mixture over [0, 1] (composite Simpson)"""
    grid = np.linspace(0.0, 1.0, QUADRATURE_NODES)
    z = float(simpson(_mixture(spec, grid), x=grid))
    logger.debug(f"Normalization constant for {spec}: {z:.15g}")
    return z


@lru_cache(maxsize=64)
def _cdf_table(spec: KernelSpec):
    """Grid and CDF values used by the inverse-CDF sampler"""
    grid = np.linspace(0.0, 1.0, CDF_GRID_INTERVALS + 1)
    cdf = cumulative_trapezoid(_mixture(spec, grid), x=grid, initial=0.0)
    cdf /= cdf[-1]
    grid.setflags(write=False)
    cdf.setflags(write=False)
    return grid, cdf


def lambda_a_pdf(spec: KernelSpec, lambda_a):
    """
    Density of lambda_a: the kernel mixture truncated to [0, 1]

    Returns 0 outside [0, 1]. The density is symmetric about 0.5 for every
    supported kernel.
    """
    lam = np.asarray(lambda_a, dtype=np.float64)
    inside = (lam >= 0.0) & (lam <= 1.0)
    density = np.where(inside, _mixture(spec, lam) / normalization_constant(spec), 0.0)
    return _scalar_or_array(density, lambda_a)


def lambda_a_cdf(spec: KernelSpec, lambda_a):
    """CDF of lambda_a as tabulated for the sampler (piecewise linear)"""
    grid, cdf = _cdf_table(spec)
    lam = np.clip(np.asarray(lambda_a, dtype=np.float64), 0.0, 1.0)
    return _scalar_or_array(np.interp(lam, grid, cdf), lambda_a)


@lru_cache(maxsize=64)
def _support_edges(spec: KernelSpec):
    """
    Innermost floats of a split triangular support [0, left] and [right, 1]

    1 - sigma is rarely representable, so each edge is walked toward the
    support until the kernel term that owns it is positive.
    """
    left = np.nextafter(spec.width, 0.0)
    while eval_kernel(spec, left) <= 0.0:
        left = np.nextafter(left, 0.0)
    right = np.nextafter(1.0 - spec.width, 1.0)
    while eval_kernel(spec, right - 1.0) <= 0.0:
        right = np.nextafter(right, 1.0)
    return float(left), float(right)


def sample_lambda_a(spec: KernelSpec, rng: np.random.Generator, size=None):
    """
    Draw lambda_a from the truncated mixture by inverse-CDF sampling

    The CDF is tabulated on a fixed grid and inverted cell by cell with
    linear interpolation. Zero-density cells (triangular kernels with
    sigma < 0.5) are never selected because the search uses the right
    side of each plateau.

    Args:
        spec: Kernel to sample from
        rng: Caller-owned numpy Generator
        size: None for a single float, otherwise the output shape

    Returns:
        float or ndarray of draws in [0, 1]
    """
    grid, cdf = _cdf_table(spec)
    u = rng.random(size)
    u_arr = np.atleast_1d(u)

    cell = np.searchsorted(cdf, u_arr, side="right") - 1
    cell = np.clip(cell, 0, len(grid) - 2)
    lo, hi = cdf[cell], cdf[cell + 1]
    step = grid[cell + 1] - grid[cell]
    draws = grid[cell] + step * (u_arr - lo) / (hi - lo)
    draws = np.clip(draws, 0.0, 1.0)

    if spec.family is KernelFamily.TRIANGULAR and spec.width < 0.5:
        # The grid cell straddling a support edge can interpolate past it
        left, right = _support_edges(spec)
        draws = np.where(draws < 0.5, np.minimum(draws, left), np.maximum(draws, right))

    if size is None:
        return float(draws[0])
    return draws.reshape(np.shape(u))


# ============================================================================
# LABEL INTERPOLATION RATIO SECTION
# ============================================================================


def compute_lambda_b(spec: KernelSpec, lambda_a):
    """
    Label ratio lambda_b = k'(lambda_a - 1) / (k'(lambda_a - 1) + k'(lambda_a))

    This is the two-sample kernel-density posterior of the first endpoint's
    class at the interpolated point. For the Gaussian family the ratio is
    evaluated in the log domain, expit((2 lambda_a - 1) / (2 sigma^2)),
    which is the same quantity without underflow for narrow kernels.

    Raises:
        DegenerateKernelError: when both triangular terms vanish, which can
            only happen for sigma < 0.5 at lambda_a values that carry zero
            sampling density
    """
    lam = np.asarray(lambda_a, dtype=np.float64)
    if spec.family is KernelFamily.GAUSSIAN:
        sigma2 = spec.width * spec.width
        ratio = expit((2.0 * lam - 1.0) / (2.0 * sigma2))
        return _scalar_or_array(ratio, lambda_a)

    near = eval_kernel(spec, lam - 1.0)
    far = eval_kernel(spec, lam)
    denominator = near + far
    if np.any(denominator == 0.0):
        raise DegenerateKernelError(
            f"kernel {spec} has no support at lambda_a={lam[denominator == 0.0] if lam.ndim else float(lam)}; "
            f"use a triangular width of at least 0.5 or avoid these ratios"
        )
    return _scalar_or_array(near / denominator, lambda_a)
