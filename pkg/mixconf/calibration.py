#!/usr/bin/env python3
"""
Calibration Metrics Module

Confidence read-off, Expected Calibration Error (ECE) and the bin data of a
reliability diagram.

ECE uses M equal-width bins ((m-1)/M, m/M]; a confidence of exactly 0 goes
into the first bin. Empty bins contribute nothing.
"""

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from mixconf.errors import LengthMismatchError

logger = logging.getLogger(__name__)

DEFAULT_NUM_BINS = 15

# ============================================================================
# DOMAIN TYPES SECTION
# ============================================================================


@dataclass
class BinStat:
    lo: float
    hi: float
    count: int
    acc: float
    conf: float


@dataclass
class CalibrationReport:
    """
    Per-bin accuracy/confidence plus the ECE scalar

    Attributes:
        num_bins: M
        bins: One BinStat per bin, low to high; empty bins have acc = conf = 0
        ece: sum_m |B_m| / N * |acc(B_m) - conf(B_m)|
        n: Total sample count N
    """

    num_bins: int
    bins: list = field(default_factory=list)
    ece: float = 0.0
    n: int = 0

    def recompute_ece(self) -> float:
        """ECE recomputed from the stored bins"""
        if self.n == 0:
            return 0.0
        return float(sum(b.count / self.n * abs(b.acc - b.conf) for b in self.bins))

    def merge(self, other: "CalibrationReport") -> "CalibrationReport":
        """Pool the bins of two reports computed with the same bin count"""
        if other.num_bins != self.num_bins:
            raise LengthMismatchError(f"cannot merge {self.num_bins}-bin and {other.num_bins}-bin reports")
        pooled = []
        for a, b in zip(self.bins, other.bins):
            count = a.count + b.count
            if count == 0:
                pooled.append(BinStat(a.lo, a.hi, 0, 0.0, 0.0))
                continue
            pooled.append(
                BinStat(
                    a.lo,
                    a.hi,
                    count,
                    (a.acc * a.count + b.acc * b.count) / count,
                    (a.conf * a.count + b.conf * b.count) / count,
                )
            )
        merged = CalibrationReport(self.num_bins, pooled, 0.0, self.n + other.n)
        merged.ece = merged.recompute_ece()
        return merged

    def to_dict(self) -> dict:
        return {"bins": [asdict(b) for b in self.bins], "ece": self.ece, "n": self.n}

    @classmethod
    def from_dict(cls, data: dict) -> "CalibrationReport":
        bins = [BinStat(**b) for b in data["bins"]]
        return cls(len(bins), bins, float(data["ece"]), int(data["n"]))


# ============================================================================
# CONFIDENCE SECTION
# ============================================================================


def confidence(prob_rows):
    """
    Hard labels and confidences of a probability matrix

    Ties resolve to the smallest class index (numpy argmax semantics).

    Returns:
        tuple: (y_hat int array, c float array)
    """
    probs = np.asarray(prob_rows, dtype=np.float64)
    y_hat = np.argmax(probs, axis=1)
    c = probs[np.arange(len(probs)), y_hat]
    return y_hat, c


# ============================================================================
# EXPECTED CALIBRATION ERROR SECTION
# ============================================================================


def ece(confidences, predictions, labels, num_bins: int = DEFAULT_NUM_BINS) -> CalibrationReport:
    """
    Expected Calibration Error with equal-width bins

    Args:
        confidences: c_i in [0, 1]
        predictions: Predicted labels y_hat_i
        labels: True labels y_i
        num_bins: M >= 1

    Returns:
        CalibrationReport
    """
    c = np.asarray(confidences, dtype=np.float64)
    y_hat = np.asarray(predictions)
    y = np.asarray(labels)
    if not (len(c) == len(y_hat) == len(y)):
        raise LengthMismatchError(f"lengths differ: {len(c)} confidences, {len(y_hat)} predictions, {len(y)} labels")
    if num_bins < 1:
        raise LengthMismatchError(f"need at least one bin, got {num_bins}")

    edges = np.linspace(0.0, 1.0, num_bins + 1)
    # right=True puts c in bin m when edges[m] < c <= edges[m + 1]; c = 0 lands in bin 0
    bin_index = np.digitize(c, edges[1:-1], right=True)
    correct = (y_hat == y).astype(np.float64)

    n = len(c)
    bins = []
    for m in range(num_bins):
        mask = bin_index == m
        count = int(mask.sum())
        if count:
            bins.append(BinStat(float(edges[m]), float(edges[m + 1]), count, float(correct[mask].mean()), float(c[mask].mean())))
        else:
            bins.append(BinStat(float(edges[m]), float(edges[m + 1]), 0, 0.0, 0.0))

    report = CalibrationReport(num_bins, bins, 0.0, n)
    report.ece = report.recompute_ece()
    return report


def top1_error(prob_rows, labels) -> float:
    """Fraction of rows whose argmax differs from the label"""
    y_hat, _ = confidence(prob_rows)
    labels = np.asarray(labels)
    if len(y_hat) != len(labels):
        raise LengthMismatchError(f"{len(y_hat)} predictions vs {len(labels)} labels")
    if len(labels) == 0:
        return 0.0
    return float(np.mean(y_hat != labels))


def evaluate(prob_rows, labels, num_bins: int = DEFAULT_NUM_BINS):
    """Top-1 error and calibration report of one prediction matrix"""
    y_hat, c = confidence(prob_rows)
    return top1_error(prob_rows, labels), ece(c, y_hat, labels, num_bins)
