#!/usr/bin/env python3
"""
Settings Utility Module

This module turns declarative KEY=VALUE experiment files into a validated
ExperimentConfig. Values are layered, later layers winning:

1. Built-in defaults (BASE_DEFAULTS)
2. Per-experiment defaults supplied by the experiment module
3. MIXCONF_<KEY> environment variables (a .env file works too)
4. The config file given with --config (parsed by python-dotenv)
5. Command-line flags (--seed, --out, --repeats)

Keys are case-insensitive. Unknown keys in a config file are rejected so a
typo never silently falls back to a default.
"""

import logging
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from dotenv import dotenv_values

from mixconf.augment import Augmentor
from mixconf.errors import ConfigError, MixConfError
from mixconf.ssl_engine import SelectionRule, SslConfig
from mixconf.synth_data import DatasetSpec, Generator, SplitSpec
from mixconf.tiny_net import Activation

logger = logging.getLogger(__name__)

ENV_PREFIX = "MIXCONF_"

# ============================================================================
# SCHEMA SECTION
# ============================================================================


class ExperimentKind(str, Enum):
    CALIBRATE = "calibrate"
    SSL = "ssl"
    THRESHOLD_SWEEP = "sweep-threshold"
    LAMBDA_DIAGNOSTICS = "lambda-diag"
    ABLATE = "ablate"


# Every accepted key with its default, as it would appear in a config file
BASE_DEFAULTS = {
    "EXPERIMENT": "",
    "DATASET": "two_moons",
    "N_SAMPLES": "2000",
    "NOISE_SD": "0.1",
    "N_CLASSES": "2",
    "CENTER_RADIUS": "2.0",
    "N_LABELED": "10",
    "N_VALIDATION": "0",
    "N_TEST": "500",
    "BATCH_LABELED": "10",
    "C_THR": "0.8",
    "LAMBDA_U": "2.0",
    "K_AUGMENT": "4",
    "ITERATIONS": "5000",
    "LEARN_RATE": "0.003",
    "JITTER": "",  # empty: half of NOISE_SD
    "AUGMENTOR": "mixconf-g:0.4",
    "AUGMENTORS": "none",
    "MIXUP_ALPHA": "1.0",
    "SELECTION": "small_loss",
    "HIDDEN": "32,32",
    "ACTIVATION": "relu",
    "EMA_DECAY": "0.999",
    "EVAL_EVERY": "500",
    "PROPORTIONS": "0.05,0.2,1.0",
    "THRESHOLDS": "0.5,0.6,0.7,0.8,0.9,0.95",
    "N_DRAWS": "1000000",
    "N_BINS": "50",
    "ECE_BINS": "15",
    "REPEATS": "5",
    "SEED": "0",
    "OUTPUT": "",
    "WORKERS": "1",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Fully resolved configuration of one experiment run

    Attributes:
        kind: Which experiment runs
        dataset: Dataset generator settings (seed replaced per repeat)
        split: Labeled / validation / test sizes
        ssl: Training hyperparameters shared by every experiment
        augmentor_arms: Calibration arms, each a tuple of candidate augmentors
        mixup_alpha: Alpha of the Mixup ablation arm
        hidden: Hidden layer sizes of the classifier
        activation: Hidden nonlinearity
        ema_decay: EMA decay of the classifier
        proportions: Training-set proportions of the calibration ladder
        thresholds: c_thr values of the threshold sweep (ascending)
        n_draws: lambda_a draws for diagnostics
        n_bins: Histogram bins for diagnostics
        repeats: Independent repeats per cell
        seed: Master seed
        output: Report path
        workers: Threads used for independent repeats
        raw: The merged key/value strings, embedded in reports
    """

    kind: ExperimentKind
    dataset: DatasetSpec
    split: SplitSpec
    ssl: SslConfig
    augmentor_arms: tuple
    mixup_alpha: float
    hidden: tuple
    activation: Activation
    ema_decay: float
    proportions: tuple
    thresholds: tuple
    n_draws: int
    n_bins: int
    repeats: int
    seed: int
    output: Path
    workers: int
    raw: tuple

    def to_dict(self) -> dict:
        return dict(self.raw)

    def layer_sizes(self) -> tuple:
        return (2, *self.hidden, self.dataset.n_classes)


# ============================================================================
# PARSING HELPERS SECTION
# ============================================================================


def _number_list(text: str, cast):
    return tuple(cast(part) for part in text.split(",") if part.strip())


def parse_augmentor_arms(text: str) -> tuple:
    """
    Parse 'none,mixup:0.2|1.0,mixconf-g:0.2|0.4' into candidate tuples

    Each comma-separated arm may list several '|'-separated parameters;
    the calibration study tunes among them by validation accuracy.
    """
    arms = []
    for arm in text.split(","):
        arm = arm.strip()
        if not arm:
            continue
        if ":" not in arm:
            arms.append((Augmentor.parse(arm),))
            continue
        kind, params = arm.split(":", 1)
        arms.append(tuple(Augmentor.parse(f"{kind}:{param}") for param in params.split("|")))
    if not arms:
        raise ConfigError("AUGMENTORS lists no augmentor")
    return tuple(arms)


def _read_config_file(path) -> dict:
    """Key/value pairs of a config file, keys upper-cased"""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    values = {key.upper(): value for key, value in dotenv_values(path).items()}
    unknown = sorted(set(values) - set(BASE_DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown keys in {path}: {', '.join(unknown)}")
    missing = [key for key, value in values.items() if value is None]
    if missing:
        raise ConfigError(f"keys without a value in {path}: {', '.join(missing)}")
    logger.debug(f"Read {len(values)} keys from {path}")
    return values


def apply_overrides(values: dict, overrides: dict) -> dict:
    """Return values updated with every override that is not None"""
    filtered = {key.upper(): str(value) for key, value in (overrides or {}).items() if value is not None}
    if not filtered:
        return dict(values)
    merged = dict(values)
    merged.update(filtered)
    return merged


def _environment_values() -> dict:
    values = {}
    for key in BASE_DEFAULTS:
        env_value = os.getenv(f"{ENV_PREFIX}{key}")
        if env_value is not None:
            values[key] = env_value
    return values


def default_output(kind: ExperimentKind) -> Path:
    suffix = ".csv" if kind is ExperimentKind.LAMBDA_DIAGNOSTICS else ".json"
    return Path(os.getenv(f"{ENV_PREFIX}OUTPUT_DIR", "reports")) / f"{kind.value}{suffix}"


# ============================================================================
# CONFIG LOADING SECTION
# ============================================================================


def build_config(kind: ExperimentKind, values: dict) -> ExperimentConfig:
    """
    Validate merged string values and build the typed config

    Raises:
        ConfigError: for any unparsable or out-of-range value
    """
    declared = values.get("EXPERIMENT", "").strip()
    if declared and declared != kind.value:
        raise ConfigError(f"config file is for experiment {declared!r}, not {kind.value!r}")

    try:
        noise_sd = float(values["NOISE_SD"])
        jitter_text = values["JITTER"].strip()
        dataset = DatasetSpec(
            generator=Generator(values["DATASET"].strip().lower()),
            n_samples=int(values["N_SAMPLES"]),
            noise_sd=noise_sd,
            n_classes=int(values["N_CLASSES"]),
            seed=int(values["SEED"]),
            center_radius=float(values["CENTER_RADIUS"]),
        )
        split = SplitSpec(int(values["N_LABELED"]), int(values["N_VALIDATION"]), int(values["N_TEST"]))
        ssl = SslConfig(
            batch_labeled=int(values["BATCH_LABELED"]),
            c_thr=float(values["C_THR"]),
            lambda_u=float(values["LAMBDA_U"]),
            k_augment=int(values["K_AUGMENT"]),
            iterations=int(values["ITERATIONS"]),
            augmentor=Augmentor.parse(values["AUGMENTOR"]),
            learn_rate=float(values["LEARN_RATE"]),
            jitter_magnitude=float(jitter_text) if jitter_text else noise_sd / 2.0,
            selection=SelectionRule(values["SELECTION"].strip().lower()),
            eval_every=int(values["EVAL_EVERY"]),
            ece_bins=int(values["ECE_BINS"]),
        )
        repeats = int(values["REPEATS"])
        workers = int(values["WORKERS"])
        n_draws = int(values["N_DRAWS"])
        n_bins = int(values["N_BINS"])
        proportions = _number_list(values["PROPORTIONS"], float)
        thresholds = tuple(sorted(_number_list(values["THRESHOLDS"], float)))
        config = ExperimentConfig(
            kind=kind,
            dataset=dataset,
            split=split,
            ssl=ssl,
            augmentor_arms=parse_augmentor_arms(values["AUGMENTORS"]),
            mixup_alpha=float(values["MIXUP_ALPHA"]),
            hidden=_number_list(values["HIDDEN"], int),
            activation=Activation(values["ACTIVATION"].strip().lower()),
            ema_decay=float(values["EMA_DECAY"]),
            proportions=proportions,
            thresholds=thresholds,
            n_draws=n_draws,
            n_bins=n_bins,
            repeats=repeats,
            seed=int(values["SEED"]),
            output=Path(values["OUTPUT"]) if values["OUTPUT"].strip() else default_output(kind),
            workers=workers,
            raw=tuple(sorted({**values, "EXPERIMENT": kind.value}.items())),
        )
    except MixConfError:
        raise
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"invalid {kind.value} configuration: {e}") from e

    if repeats < 1:
        raise ConfigError(f"REPEATS must be at least 1, got {repeats}")
    if workers < 1:
        raise ConfigError(f"WORKERS must be at least 1, got {workers}")
    if n_draws < 1 or n_bins < 1:
        raise ConfigError(f"N_DRAWS and N_BINS must be positive, got {n_draws} and {n_bins}")
    if not proportions or any(not 0.0 < p <= 1.0 for p in proportions):
        raise ConfigError(f"PROPORTIONS must be values in (0, 1], got {proportions}")
    if not thresholds or any(not 0.0 < t <= 1.0 for t in thresholds):
        raise ConfigError(f"THRESHOLDS must be values in (0, 1], got {thresholds}")
    if not 0.0 <= config.ema_decay < 1.0 or any(h < 1 for h in config.hidden) or config.mixup_alpha <= 0.0:
        raise ConfigError("EMA_DECAY must lie in [0, 1), HIDDEN sizes and MIXUP_ALPHA must be positive")
    return config


def load_experiment_config(kind: ExperimentKind, path=None, overrides: dict = None, defaults: dict = None) -> ExperimentConfig:
    """
    Merge every configuration layer and build the ExperimentConfig

    Args:
        kind: Experiment being configured
        path: Optional KEY=VALUE config file
        overrides: Flag values; None entries are ignored
        defaults: Experiment-specific defaults layered over BASE_DEFAULTS

    Returns:
        ExperimentConfig
    """
    values = dict(BASE_DEFAULTS)
    values.update({key.upper(): value for key, value in (defaults or {}).items()})
    values.update(_environment_values())
    if path is not None:
        values.update(_read_config_file(path))
    values = apply_overrides(values, overrides)
    config = build_config(kind, values)
    logger.info(f"⚙️ Loaded {kind.value} config (seed {config.seed}, {config.repeats} repeat(s), output {config.output})")
    return config

