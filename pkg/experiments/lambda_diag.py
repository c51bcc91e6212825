#!/usr/bin/env python3
"""
Lambda Diagnostics Experiment - Sampler output against the analytic density

Draws N_DRAWS data ratios from the configured augmentor and writes one CSV
row per histogram bin:

    lambda              bin center
    hist_density        histogram of the draws, normalized to integrate to 1
    pdf                 analytic density at the bin center
    bin_prob_empirical  share of draws in the bin
    bin_prob_exact      probability mass of the bin under the analytic CDF
    lambda_b            label ratio at the bin center (NaN where undefined)

The <name>.meta.json sidecar carries the run metadata plus the sup
deviations between empirical and exact bin masses and CDFs.
"""

import logging

import numpy as np
from scipy import stats

from experiments.base import Experiment
from mixconf.augment import AugmentorKind, draw_lambdas
from mixconf.errors import ConfigError, DegenerateKernelError
from mixconf.kernels import compute_lambda_b, lambda_a_cdf, lambda_a_pdf
from utils.reports import report_metadata, write_csv
from utils.seeding import make_rng
from utils.settings import ExperimentKind

logger = logging.getLogger(__name__)

COLUMNS = ["lambda", "hist_density", "pdf", "bin_prob_empirical", "bin_prob_exact", "lambda_b"]


def analytic_curves(augmentor):
    """(pdf, cdf, lambda_b) callables of the augmentor's data-ratio law"""
    if augmentor.kind is AugmentorKind.MIXUP:
        law = stats.beta(augmentor.param, augmentor.param)
        return law.pdf, law.cdf, lambda lam: np.asarray(lam, dtype=np.float64)
    if augmentor.kind is AugmentorKind.NONE:
        raise ConfigError("lambda-diag needs a mixing augmentor, not 'none'")
    kernel = augmentor.kernel
    return (lambda lam: lambda_a_pdf(kernel, lam)), (lambda lam: lambda_a_cdf(kernel, lam)), (lambda lam: compute_lambda_b(kernel, lam))


def _safe_lambda_b(lambda_b, centers) -> np.ndarray:
    values = np.full(len(centers), np.nan)
    for i, lam in enumerate(centers):
        try:
            values[i] = float(lambda_b(lam))
        except DegenerateKernelError:
            pass
    return values


def ecdf_sup_deviation(draws, cdf) -> float:
    """Kolmogorov distance between the empirical CDF of draws and cdf"""
    ordered = np.sort(draws)
    n = len(ordered)
    exact = np.asarray(cdf(ordered), dtype=np.float64)
    upper = np.arange(1, n + 1) / n
    lower = np.arange(0, n) / n
    return float(max(np.max(upper - exact), np.max(exact - lower)))


def diagnose(augmentor, n_draws: int, n_bins: int, rng):
    """
    Build the diagnostic rows and deviation statistics

    Returns:
        tuple: (rows, stats dict)
    """
    pdf, cdf, lambda_b = analytic_curves(augmentor)
    draws, _ = draw_lambdas(augmentor, rng, n_draws)

    edges = np.linspace(0.0, 1.0, n_bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    density, _ = np.histogram(draws, bins=edges, density=True)
    counts, _ = np.histogram(draws, bins=edges)
    empirical = counts / n_draws
    exact = np.diff(np.asarray(cdf(edges), dtype=np.float64))
    curve = np.asarray(pdf(centers), dtype=np.float64)
    ratios = _safe_lambda_b(lambda_b, centers)

    rows = [
        {
            "lambda": float(centers[i]),
            "hist_density": float(density[i]),
            "pdf": float(curve[i]),
            "bin_prob_empirical": float(empirical[i]),
            "bin_prob_exact": float(exact[i]),
            "lambda_b": float(ratios[i]),
        }
        for i in range(n_bins)
    ]
    deviations = {
        "bin_prob_sup_deviation": float(np.max(np.abs(empirical - exact))),
        "cdf_sup_deviation": ecdf_sup_deviation(draws, cdf),
        "histogram_integral": float(np.sum(density * np.diff(edges))),
        "n_draws": n_draws,
        "n_bins": n_bins,
        "augmentor": str(augmentor),
    }
    return rows, deviations


class LambdaDiagnosticsExperiment(Experiment):
    name = "lambda-diag"
    kind = ExperimentKind.LAMBDA_DIAGNOSTICS
    defaults = {"REPEATS": "1"}

    def run(self, config):
        augmentor = config.ssl.augmentor
        logger.info(f"🎲 Drawing {config.n_draws} ratios from {augmentor}")
        rows, deviations = diagnose(augmentor, config.n_draws, config.n_bins, make_rng(config.seed))
        logger.info(
            f"📊 {augmentor}: bin-mass sup deviation {deviations['bin_prob_sup_deviation']:.5f}, "
            f"CDF sup deviation {deviations['cdf_sup_deviation']:.5f}"
        )
        metadata = report_metadata(config)
        metadata["diagnostics"] = deviations
        return write_csv(config.output, rows, COLUMNS, metadata)


def setup(harness):
    harness.add_experiment(LambdaDiagnosticsExperiment(harness))
    logger.debug("Lambda diagnostics experiment setup complete")
