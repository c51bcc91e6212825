#!/usr/bin/env python3
"""
Threshold Sweep Experiment - Test error and training loss per c_thr

Runs the full SSL method once per (threshold, repeat). Rows are emitted in
ascending c_thr order, each with the test error and the final training
loss, so a sudden drop of the training loss at low thresholds (the model
fitting its own wrong pseudo-labels) can be read off directly.

Outputs the JSON report plus a plot-ready <name>.csv with one row per
threshold.
"""

import logging
from dataclasses import replace
from pathlib import Path

from experiments.base import Experiment, map_repeats, prepare_split, seeds_for
from experiments.ssl_train import run_ssl_repeat
from utils.reports import report_metadata, summarize, write_csv, write_json
from utils.settings import ExperimentKind

logger = logging.getLogger(__name__)

ROW_COLUMNS = ["c_thr", "test_error", "test_error_sd", "final_loss", "final_loss_sd", "retained_error"]


class ThresholdSweepExperiment(Experiment):
    name = "sweep-threshold"
    kind = ExperimentKind.THRESHOLD_SWEEP
    defaults = {"REPEATS": "3"}

    def run_repeat(self, config, repeat: int, seed: int) -> list:
        split_ = prepare_split(config, seed)
        results = []
        for c_thr in config.thresholds:
            ssl = replace(config.ssl, c_thr=c_thr)
            result = run_ssl_repeat(config, ssl, repeat, seed, split_)
            logger.info(f"🔁 Repeat {repeat + 1}/{config.repeats}, c_thr={c_thr:g}: error {result['error']:.4f}")
            results.append(result)
        return results

    def run(self, config):
        seeds = seeds_for(config)
        metadata = report_metadata(config, seeds)
        per_repeat = map_repeats(lambda i, s: self.run_repeat(config, i, s), seeds, config.workers)

        rows = []
        for index, c_thr in enumerate(config.thresholds):
            runs = [results[index] for results in per_repeat]
            rows.append(
                {
                    "c_thr": c_thr,
                    "test_error": summarize([r["error"] for r in runs]),
                    "final_loss": summarize([r["final_loss"] for r in runs]),
                    "retained_error": summarize([r["retained_error"] for r in runs]),
                    "runs": runs,
                }
            )

        flat = [
            {
                "c_thr": row["c_thr"],
                "test_error": row["test_error"]["mean"],
                "test_error_sd": row["test_error"]["sd"],
                "final_loss": row["final_loss"]["mean"],
                "final_loss_sd": row["final_loss"]["sd"],
                "retained_error": row["retained_error"]["mean"],
            }
            for row in rows
        ]
        output = Path(config.output)
        write_csv(output.with_suffix(".csv"), flat, ROW_COLUMNS, metadata)
        report = {"experiment": self.name, "metadata": metadata, "rows": rows}
        return write_json(output, report)


def setup(harness):
    harness.add_experiment(ThresholdSweepExperiment(harness))
    logger.debug("Threshold sweep experiment setup complete")
