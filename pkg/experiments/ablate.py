#!/usr/bin/env python3
"""
Ablation Experiment - Which parts of the method matter

Runs the full SSL method and one variant per removed component, all from
the same repeat seeds, splits and initializations:

    full               configured method
    k1                 K = 1 (pseudo-labels from a single jittered copy)
    lambda_u_half      unlabeled weight halved
    mixup              Mixup(MIXUP_ALPHA) instead of the configured augmentor
    no_selection       no small-loss selection: every mixed row is trained on
    random_selection   same n_L / n_U counts, uniformly random samples

MIXUP_ALPHA defaults to 0.2 here, the low end of the calibration study's
Mixup grid.
"""

import logging
from dataclasses import replace

from experiments.base import Experiment, map_repeats, prepare_split, seeds_for
from experiments.ssl_train import run_ssl_repeat, summarize_arm
from mixconf.augment import Augmentor, AugmentorKind
from mixconf.ssl_engine import SelectionRule
from utils.reports import pooled_standard_error, report_metadata, write_json
from utils.settings import ExperimentKind

logger = logging.getLogger(__name__)


def ablation_variants(config) -> dict:
    """Variant name -> SslConfig, full method first"""
    ssl = config.ssl
    return {
        "full": ssl,
        "k1": replace(ssl, k_augment=1),
        "lambda_u_half": replace(ssl, lambda_u=ssl.lambda_u / 2.0),
        "mixup": replace(ssl, augmentor=Augmentor(AugmentorKind.MIXUP, config.mixup_alpha)),
        "no_selection": replace(ssl, selection=SelectionRule.ALL),
        "random_selection": replace(ssl, selection=SelectionRule.RANDOM),
    }


class AblationExperiment(Experiment):
    name = "ablate"
    kind = ExperimentKind.ABLATE
    defaults = {"MIXUP_ALPHA": "0.2"}

    def run_repeat(self, config, variants: dict, repeat: int, seed: int) -> dict:
        split_ = prepare_split(config, seed)
        results = {name: run_ssl_repeat(config, ssl, repeat, seed, split_) for name, ssl in variants.items()}
        summary = ", ".join(f"{name} {result['error']:.4f}" for name, result in results.items())
        logger.info(f"🔁 Repeat {repeat + 1}/{config.repeats}: {summary}")
        return results

    def run(self, config):
        seeds = seeds_for(config)
        variants = ablation_variants(config)
        per_repeat = map_repeats(lambda i, s: self.run_repeat(config, variants, i, s), seeds, config.workers)

        arms = {name: summarize_arm([r[name] for r in per_repeat]) for name in variants}
        full = arms["full"]["error"]
        for name, arm in arms.items():
            arm["error_gap_to_full"] = arm["error"]["mean"] - full["mean"]
            arm["error_gap_se"] = pooled_standard_error(arm["error"], full)
            logger.info(
                f"📊 {name}: error {arm['error']['mean']:.4f} "
                f"({arm['error_gap_to_full']:+.4f} ± {arm['error_gap_se']:.4f} vs full)"
            )

        report = {
            "experiment": self.name,
            "metadata": report_metadata(config, seeds),
            "variants": {name: str(ssl.augmentor) for name, ssl in variants.items()},
            "selection": {name: ssl.selection.value for name, ssl in variants.items()},
            "arms": arms,
        }
        return write_json(config.output, report)


def setup(harness):
    harness.add_experiment(AblationExperiment(harness))
    logger.debug("Ablation experiment setup complete")
