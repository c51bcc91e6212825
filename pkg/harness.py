#!/usr/bin/env python3
"""
Experiment Harness Core - Command-line harness and experiment registry

This file contains:
- Harness creation (argparse parser with one subcommand per experiment)
- Command templates used for help output
- The experiment loading system

Experiments are modular: every module in experiments/ exposes an
Experiment subclass and a setup(harness) function that registers it.
"""

import argparse
import importlib
import logging

from mixconf.errors import ConfigError

logger = logging.getLogger(__name__)

EXPERIMENT_MODULES = [
    "experiments.calibrate",    # Calibration study: ECE vs training-set size
    "experiments.ssl_train",    # SSL run with a supervised baseline
    "experiments.sweep",        # Confidence-threshold sweep
    "experiments.lambda_diag",  # Mixing-ratio sampler diagnostics
    "experiments.ablate",       # Ablation variants of the SSL method
]


class HarnessArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that reports bad usage as ConfigError instead of exiting"""

    def error(self, message):
        raise ConfigError(message)


class ExperimentHarness:
    """
    Holds the CLI parser and the registered experiments

    Attributes:
        parser: Top-level argument parser
        experiments: Subcommand name -> Experiment instance
        command_templates: Subcommand name -> usage notes shown in help
    """

    def __init__(self):
        self.parser = HarnessArgumentParser(
            prog="mixconf",
            description="Desk-scale MixConf calibration and semi-supervised learning experiments",
        )
        self.subparsers = self.parser.add_subparsers(dest="experiment", metavar="EXPERIMENT")
        self.experiments = {}

        # ============================================================================
        # COMMAND TEMPLATES SECTION
        # ============================================================================

        self.command_templates = {
            "calibrate": {
                "description": "Test ECE and error per training-set proportion and augmentor",
                "usage": "python main.py calibrate [--config PATH] [--seed N] [--out PATH] [--repeats N]",
                "examples": ["python main.py calibrate --repeats 3", "python main.py calibrate --config calib.env"],
            },
            "ssl": {
                "description": "Semi-supervised training against a supervised (lambda_U = 0) baseline",
                "usage": "python main.py ssl [--config PATH] [--seed N] [--out PATH] [--repeats N]",
                "examples": ["python main.py ssl --seed 7", "python main.py ssl --out reports/ssl_seed7.json"],
            },
            "sweep-threshold": {
                "description": "Test error and final training loss for each confidence threshold",
                "usage": "python main.py sweep-threshold [--config PATH] [--seed N] [--out PATH] [--repeats N]",
                "examples": ["python main.py sweep-threshold --repeats 1"],
            },
            "lambda-diag": {
                "description": "Histogram of sampled mixing ratios against the analytic density",
                "usage": "python main.py lambda-diag [--config PATH] [--seed N] [--out PATH]",
                "examples": ["python main.py lambda-diag --out reports/lambda.csv"],
            },
            "ablate": {
                "description": "Full method against K = 1, halved lambda_U, Mixup and random selection",
                "usage": "python main.py ablate [--config PATH] [--seed N] [--out PATH] [--repeats N]",
                "examples": ["python main.py ablate --repeats 5"],
            },
        }

    def add_experiment(self, experiment):
        """Register an experiment as a subcommand with the common flags"""
        template = self.command_templates.get(experiment.name, {})
        sub = self.subparsers.add_parser(
            experiment.name,
            help=template.get("description", experiment.name),
            description=template.get("description"),
            epilog="examples:\n  " + "\n  ".join(template.get("examples", [])),
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        sub.add_argument("--config", metavar="PATH", help="KEY=VALUE experiment file")
        sub.add_argument("--seed", type=int, help="master seed")
        sub.add_argument("--out", metavar="PATH", help="report path")
        sub.add_argument("--repeats", type=int, help="independent repeats")
        self.experiments[experiment.name] = experiment
        logger.debug(f"Registered experiment {experiment.name}")

    def run(self, argv=None):
        """
        Parse argv, resolve the experiment config and run it

        Returns:
            Path of the written report
        """
        args = self.parser.parse_args(argv)
        if args.experiment is None:
            raise ConfigError(f"no experiment given; choose one of: {', '.join(self.experiments)}")
        experiment = self.experiments[args.experiment]
        config = experiment.load_config(args)
        logger.info(f"🚀 Running {experiment.name} experiment")
        return experiment.run(config)


def create_harness():
    """Create the harness and register every experiment module"""
    harness = ExperimentHarness()
    load_experiments(harness)
    return harness


def load_experiments(harness, modules=None):
    """
    Import experiment modules and call their setup(harness)

    Loading continues past modules that fail; the count of loaded modules
    is logged.

    Returns:
        int: Number of modules loaded
    """
    modules = EXPERIMENT_MODULES if modules is None else modules
    loaded = 0
    total = len(modules)

    for name in modules:
        try:
            module = importlib.import_module(name)
            module.setup(harness)
            logger.debug(f"✅ Loaded experiment module: {name}")
            loaded += 1
        except Exception as e:
            logger.error(f"❌ Failed to load experiment module {name}: {e}")

    logger.info(f"📦 Loaded {loaded}/{total} experiment modules")
    if loaded < total:
        logger.warning(f"⚠️ {total - loaded} experiment module(s) failed to load")
    return loaded
