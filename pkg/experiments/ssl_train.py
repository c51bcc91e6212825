#!/usr/bin/env python3
"""
SSL Experiment - Selective semi-supervised training against a baseline

Every repeat draws a fresh dataset and initialization. The SSL arm runs
the full method; the baseline arm runs the same loop with lambda_U = 0
(supervised mixing on the labeled data only) from the same seed, split
and initialization. Test error and ECE come from the EMA model.

run_ssl_repeat() is shared with the threshold sweep and the ablations.
"""

import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from experiments.base import Experiment, fresh_state, map_repeats, prepare_split, seeds_for
from mixconf.ssl_engine import evaluate_state, train_loop
from utils.reports import pooled_standard_error, report_metadata, summarize, write_json, write_step_log
from utils.seeding import make_rng
from utils.settings import ExperimentKind

logger = logging.getLogger(__name__)

FINAL_LOSS_WINDOW = 0.1  # trailing share of iterations averaged into the final training loss


def final_training_loss(step_reports):
    """Mean total loss over the last 10% of iterations (at least one)"""
    if not step_reports:
        return None
    window = max(1, int(round(len(step_reports) * FINAL_LOSS_WINDOW)))
    return float(np.mean([r.loss_total for r in step_reports[-window:]]))


def step_log_path(output, arm: str, repeat: int) -> Path:
    output = Path(output)
    return output.with_name(f"{output.stem}.{arm}.r{repeat}.steps.csv")


def run_ssl_repeat(config, ssl, repeat: int, seed: int, split_=None, log_path=None, metadata=None) -> dict:
    """
    Train one arm for one repeat and score it on the test split

    Args:
        config: ExperimentConfig (data, network and evaluation settings)
        ssl: SslConfig of this arm
        repeat: Repeat index, recorded in the result
        seed: Repeat seed shared by every arm of the repeat
        split_: Pre-built DataSplit (built from the seed when omitted)
        log_path: Where to write the per-step CSV, if anywhere
        metadata: Sidecar metadata for the step log

    Returns:
        dict: repeat, seed, error, ece, calibration, final_loss,
        retained_error (mean over steps that retained anything)
    """
    if split_ is None:
        split_ = prepare_split(config, seed)
    state, log = train_loop(
        fresh_state(config, seed), split_.labeled, split_.unlabeled, ssl, make_rng(seed), evaluation=split_.test
    )
    error, calibration = evaluate_state(state, split_.test, ssl.ece_bins)
    retained = [r.retained_error for r in log if r.retained_error is not None]
    result = {
        "repeat": repeat,
        "seed": seed,
        "error": error,
        "ece": calibration.ece,
        "calibration": calibration.to_dict(),
        "final_loss": final_training_loss(log),
        "retained_error": float(np.mean(retained)) if retained else None,
    }
    if log_path is not None:
        write_step_log(log_path, log, metadata)
        result["step_log"] = str(log_path)
    return result


def summarize_arm(runs) -> dict:
    return {
        "error": summarize([r["error"] for r in runs]),
        "ece": summarize([r["ece"] for r in runs]),
        "final_loss": summarize([r["final_loss"] for r in runs]),
        "retained_error": summarize([r["retained_error"] for r in runs]),
        "runs": runs,
    }


class SslExperiment(Experiment):
    name = "ssl"
    kind = ExperimentKind.SSL
    defaults = {}

    def run_repeat(self, config, repeat: int, seed: int, metadata: dict) -> dict:
        split_ = prepare_split(config, seed)
        baseline_ssl = replace(config.ssl, lambda_u=0.0)
        arms = {
            "ssl": run_ssl_repeat(
                config, config.ssl, repeat, seed, split_, step_log_path(config.output, "ssl", repeat), metadata
            ),
            "baseline": run_ssl_repeat(
                config, baseline_ssl, repeat, seed, split_, step_log_path(config.output, "baseline", repeat), metadata
            ),
        }
        logger.info(
            f"🔁 Repeat {repeat + 1}/{config.repeats}: SSL error {arms['ssl']['error']:.4f}, "
            f"baseline error {arms['baseline']['error']:.4f}"
        )
        return arms

    def run(self, config):
        seeds = seeds_for(config)
        metadata = report_metadata(config, seeds)
        per_repeat = map_repeats(lambda i, s: self.run_repeat(config, i, s, metadata), seeds, config.workers)

        arms = {name: summarize_arm([r[name] for r in per_repeat]) for name in ("ssl", "baseline")}
        improvement = arms["baseline"]["error"]["mean"] - arms["ssl"]["error"]["mean"]
        improvement_se = pooled_standard_error(arms["baseline"]["error"], arms["ssl"]["error"])
        logger.info(
            f"📊 SSL error {arms['ssl']['error']['mean']:.4f} ± {arms['ssl']['error']['sd']:.4f} vs "
            f"baseline {arms['baseline']['error']['mean']:.4f} ± {arms['baseline']['error']['sd']:.4f} "
            f"(improvement {improvement:.4f}, SE {improvement_se:.4f})"
        )
        report = {
            "experiment": self.name,
            "metadata": metadata,
            "arms": arms,
            "improvement": improvement,
            "improvement_se": improvement_se,
        }
        return write_json(config.output, report)


def setup(harness):
    harness.add_experiment(SslExperiment(harness))
    logger.debug("SSL experiment setup complete")
