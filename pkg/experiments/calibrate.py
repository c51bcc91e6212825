#!/usr/bin/env python3
"""
Calibration Experiment - ECE as a function of training-set size

For every training-set proportion and every augmentor arm the classifier is
trained supervised (mixing only, no unlabeled data), then scored on the
test split. When an arm lists several candidate parameters, the candidate
with the lowest validation error is kept. Selection never looks at ECE.

Report layout:
    {"experiment": "calibrate", "metadata": {...}, "cells": [
        {"proportion", "train_size", "augmentor", "candidates",
         "ece": {mean, sd, values}, "error": {mean, sd, values},
         "runs": [{"repeat", "seed", "selected", "validation_error",
                   "error", "ece", "calibration": {bins, ece, n}}]}]}
"""

import logging
from dataclasses import replace

from experiments.base import Experiment, fresh_state, map_repeats, prepare_split, seeds_for
from mixconf.ssl_engine import evaluate_state, train_supervised
from mixconf.synth_data import subsample
from utils.reports import report_metadata, summarize, write_json
from utils.seeding import make_rng
from utils.settings import ExperimentKind

logger = logging.getLogger(__name__)


def arm_label(candidates) -> str:
    return str(candidates[0]) if len(candidates) == 1 else candidates[0].kind.value


class CalibrationExperiment(Experiment):
    name = "calibrate"
    kind = ExperimentKind.CALIBRATE
    defaults = {
        "DATASET": "gaussian_blobs",
        "N_CLASSES": "4",
        "NOISE_SD": "1.0",
        "CENTER_RADIUS": "2.0",
        "N_LABELED": "1000",
        "N_VALIDATION": "500",
        "N_TEST": "500",
        "BATCH_LABELED": "32",
        "ITERATIONS": "1500",
        "EMA_DECAY": "0.99",
        "JITTER": "0",
        "AUGMENTORS": "none,mixup:0.2|1.0,mixconf-g:0.2|0.4|1.0,mixconf-t:0.6|1.0",
        "REPEATS": "10",
    }

    def train_candidate(self, config, subset, augmentor, seed, split_):
        """Train one candidate; returns (validation error, test error, test calibration)"""
        ssl = replace(config.ssl, augmentor=augmentor, batch_labeled=min(config.ssl.batch_labeled, len(subset)))
        state, _ = train_supervised(fresh_state(config, seed), subset, ssl, make_rng(seed))
        validation_error = None
        if len(split_.validation):
            validation_error, _ = evaluate_state(state, split_.validation, ssl.ece_bins)
        test_error, calibration = evaluate_state(state, split_.test, ssl.ece_bins)
        return validation_error, test_error, calibration

    def run_repeat(self, config, repeat: int, seed: int) -> dict:
        """All proportions and arms for one dataset draw; keyed by (proportion, arm index)"""
        split_ = prepare_split(config, seed)
        results = {}
        for proportion in config.proportions:
            subset = subsample(split_.labeled, proportion, seed)
            for arm_index, candidates in enumerate(config.augmentor_arms):
                best = None
                for augmentor in candidates:
                    val_error, test_error, calibration = self.train_candidate(config, subset, augmentor, seed, split_)
                    # Ties keep the earlier candidate
                    score = val_error if val_error is not None else 0.0
                    if best is None or score < best[0]:
                        best = (score, augmentor, val_error, test_error, calibration)
                _, augmentor, val_error, test_error, calibration = best
                results[(proportion, arm_index)] = {
                    "repeat": repeat,
                    "seed": seed,
                    "train_size": len(subset),
                    "selected": str(augmentor),
                    "validation_error": val_error,
                    "error": test_error,
                    "ece": calibration.ece,
                    "calibration": calibration.to_dict(),
                }
        logger.info(f"🔁 Repeat {repeat + 1}/{config.repeats} done (seed {seed})")
        return results

    def run(self, config):
        seeds = seeds_for(config)
        if config.split.n_validation == 0 and any(len(arm) > 1 for arm in config.augmentor_arms):
            logger.warning("⚠️ N_VALIDATION is 0: candidate lists fall back to their first entry")

        per_repeat = map_repeats(lambda i, s: self.run_repeat(config, i, s), seeds, config.workers)

        cells = []
        for proportion in config.proportions:
            for arm_index, candidates in enumerate(config.augmentor_arms):
                runs = []
                for result in per_repeat:
                    run = dict(result[(proportion, arm_index)])
                    runs.append(run)
                cell = {
                    "proportion": proportion,
                    "train_size": runs[0]["train_size"],
                    "augmentor": arm_label(candidates),
                    "candidates": [str(c) for c in candidates],
                    "ece": summarize([r["ece"] for r in runs]),
                    "error": summarize([r["error"] for r in runs]),
                    "runs": [{k: v for k, v in r.items() if k != "train_size"} for r in runs],
                }
                logger.info(
                    f"📊 p={proportion:g} {cell['augmentor']}: ECE {cell['ece']['mean']:.4f} ± {cell['ece']['sd']:.4f}, "
                    f"error {cell['error']['mean']:.4f}"
                )
                cells.append(cell)

        report = {"experiment": self.name, "metadata": report_metadata(config, seeds), "cells": cells}
        return write_json(config.output, report)


def setup(harness):
    harness.add_experiment(CalibrationExperiment(harness))
    logger.debug("Calibration experiment setup complete")
