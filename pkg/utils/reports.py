#!/usr/bin/env python3
"""
Reports Utility Module

Writers and checks for experiment outputs:
- summarize() turns a list of repeat values into mean / sd / values
- write_json() writes a report with its metadata block
- write_csv() writes tabular output plus a <name>.meta.json sidecar
- validate_report() recomputes every derived number from the raw values
  stored next to it

Reports are meant to be diffable artifacts, so keys are sorted and floats
are written with full precision.
"""

import csv
import json
import logging
import math
from pathlib import Path

import numpy as np

from mixconf.calibration import CalibrationReport
from mixconf.errors import ReportValidationError
from mixconf.ssl_engine import CSV_COLUMNS
from utils.timezone import report_timestamp

logger = logging.getLogger(__name__)

VALIDATION_TOLERANCE = 1e-9

# ============================================================================
# SUMMARY SECTION
# ============================================================================


def summarize(values) -> dict:
    """
    Mean and sample standard deviation of repeat values

    A single value has sd 0. None entries (metrics that were not computed)
    are dropped; an empty list summarizes to mean = sd = None.
    """
    kept = [float(v) for v in values if v is not None]
    if not kept:
        return {"mean": None, "sd": None, "values": []}
    sd = float(np.std(kept, ddof=1)) if len(kept) > 1 else 0.0
    return {"mean": float(np.mean(kept)), "sd": sd, "values": kept}


def pooled_standard_error(a: dict, b: dict) -> float:
    """Standard error of the difference between two summarized means"""
    return math.sqrt(a["sd"] ** 2 / len(a["values"]) + b["sd"] ** 2 / len(b["values"]))


def report_metadata(config, seeds=None) -> dict:
    """Config, master seed and timestamp embedded in every output"""
    metadata = {
        "config": config.to_dict(),
        "seed": config.seed,
        "generated_at": report_timestamp(),
    }
    if seeds is not None:
        metadata["repeat_seeds"] = list(seeds)
    return metadata


# ============================================================================
# WRITERS SECTION
# ============================================================================


def write_json(path, report: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as handle:
        json.dump(report, handle, indent=2, sort_keys=True)
        handle.write("\n")
    logger.info(f"📝 Report written to {path}")
    return path


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".meta.json")


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def write_csv(path, rows, columns, metadata: dict = None) -> Path:
    """
    Write rows (dicts) under the given columns; None cells are left empty

    When metadata is given it goes to a sidecar next to the CSV.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(columns), extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _cell(row.get(key)) for key in columns})
    if metadata is not None:
        write_json(sidecar_path(path), metadata)
    logger.info(f"📝 CSV written to {path}")
    return path


def write_step_log(path, step_reports, metadata: dict = None) -> Path:
    """Per-iteration training log (one StepReport per row)"""
    return write_csv(path, [report.to_row() for report in step_reports], CSV_COLUMNS, metadata)


def read_json(path) -> dict:
    with Path(path).open() as handle:
        return json.load(handle)


# ============================================================================
# VALIDATION SECTION
# ============================================================================


def _close(a, b) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return abs(float(a) - float(b)) <= VALIDATION_TOLERANCE


def _check_summary(node: dict, where: str):
    expected = summarize(node["values"])
    for key in ("mean", "sd"):
        if not _close(node[key], expected[key]):
            raise ReportValidationError(f"{where}.{key} = {node[key]} does not recompute ({expected[key]})")


def _check_calibration(node: dict, where: str):
    calibration = node["calibration"]
    report = CalibrationReport.from_dict(calibration)
    recomputed = report.recompute_ece()
    if sum(b.count for b in report.bins) != report.n:
        raise ReportValidationError(f"{where}.calibration bin counts do not add up to n = {report.n}")
    if not _close(calibration["ece"], recomputed):
        raise ReportValidationError(f"{where}.calibration.ece = {calibration['ece']} does not recompute ({recomputed})")
    if "ece" in node and not isinstance(node["ece"], dict) and not _close(node["ece"], recomputed):
        raise ReportValidationError(f"{where}.ece = {node['ece']} disagrees with its bins ({recomputed})")


def _walk(node, where: str) -> int:
    checked = 0
    if isinstance(node, dict):
        if {"mean", "sd", "values"} <= set(node):
            _check_summary(node, where)
            checked += 1
        if isinstance(node.get("calibration"), dict):
            _check_calibration(node, where)
            checked += 1
        for key, child in node.items():
            checked += _walk(child, f"{where}.{key}")
    elif isinstance(node, list):
        for i, child in enumerate(node):
            checked += _walk(child, f"{where}[{i}]")
    return checked


def validate_report(report) -> int:
    """
    Recompute every summary and ECE value of a report

    Args:
        report: Report dict, or a path to a JSON report

    Returns:
        int: Number of derived quantities checked

    Raises:
        ReportValidationError: if any derived value is off by more than 1e-9
    """
    if not isinstance(report, dict):
        report = read_json(report)
    checked = _walk(report, "report")
    logger.debug(f"Validated {checked} derived values")
    return checked
