#!/usr/bin/env python3
"""
Experiment Base - Shared plumbing for every experiment module

Provides:
- The Experiment base class (config loading, naming, logging)
- Per-repeat data preparation and network construction
- map_repeats(), which runs independent repeats sequentially or on a
  thread pool while keeping results in repeat order
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

from mixconf.synth_data import generate, split
from mixconf.tiny_net import NetConfig, init_state
from utils.seeding import repeat_seeds
from utils.settings import ExperimentConfig, ExperimentKind, load_experiment_config

logger = logging.getLogger(__name__)


class Experiment:
    """
    Base class of a registered experiment

    Subclasses set name, kind and defaults and implement run(config).
    """

    name = ""
    kind: ExperimentKind = None
    defaults = {}

    def __init__(self, harness):
        self.harness = harness
        logger.info(f"{self.name} experiment initialized")

    def load_config(self, args) -> ExperimentConfig:
        overrides = {"SEED": args.seed, "OUTPUT": args.out, "REPEATS": args.repeats}
        return load_experiment_config(self.kind, args.config, overrides, self.defaults)

    def run(self, config: ExperimentConfig):
        raise NotImplementedError


# ============================================================================
# REPEAT HELPERS SECTION
# ============================================================================


def seeds_for(config: ExperimentConfig) -> list:
    return repeat_seeds(config.seed, config.repeats)


def prepare_split(config: ExperimentConfig, seed: int):
    """Generate the dataset for one repeat and carve it into its splits"""
    dataset = generate(replace(config.dataset, seed=seed))
    return split(dataset, config.split, seed)


def fresh_state(config: ExperimentConfig, seed: int):
    net_config = NetConfig(config.layer_sizes(), config.activation, seed, config.ema_decay)
    return init_state(net_config)


def map_repeats(fn, seeds, workers: int = 1) -> list:
    """
    Apply fn(repeat_index, seed) to every seed

    With workers > 1 repeats run on a thread pool; results always come back
    in repeat order.
    """
    jobs = list(enumerate(seeds))
    if workers <= 1 or len(jobs) <= 1:
        return [fn(i, seed) for i, seed in jobs]
    logger.info(f"🧵 Running {len(jobs)} repeats on {min(workers, len(jobs))} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))
