#!/usr/bin/env python3
"""
Error Types Module

All library failures raise a subclass of MixConfError. It derives from
ValueError so callers that only care about "bad input" can catch that.
main.py maps these onto exit codes and machine-readable stderr lines.
"""


class MixConfError(ValueError):
    """Base class for every error raised by the mixconf library"""

    kind = "mixconf_error"


class InvalidKernelError(MixConfError):
    kind = "invalid_kernel"


class DegenerateKernelError(MixConfError):
    """Both kernel terms of the label-ratio denominator are exactly zero"""

    kind = "degenerate_kernel"


class DimensionMismatchError(MixConfError):
    kind = "dimension_mismatch"


class LengthMismatchError(MixConfError):
    kind = "length_mismatch"


class NonFiniteGradientError(MixConfError):
    """Raised before an optimizer step would write NaN/Inf into the parameters"""

    kind = "non_finite_gradient"


class SplitSizeError(MixConfError):
    kind = "split_size"


class ConfigError(MixConfError):
    kind = "config_invalid"


class StepInvariantError(MixConfError):
    """A per-step training invariant did not hold"""

    kind = "step_invariant"


class CheckpointFormatError(MixConfError):
    kind = "checkpoint_format"


class ReportValidationError(MixConfError):
    """A written report's summary statistics do not recompute from its own data"""

    kind = "report_invalid"
