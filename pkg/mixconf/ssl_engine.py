#!/usr/bin/env python3
"""
SSL Engine Module - Selective Training With Confident Pseudo-Labels

This module implements one training iteration and the loop around it:
1. Estimate pseudo-labels by averaging the softmax over K jittered copies
   of every unlabeled sample; the confidence is the max of that average
2. Discard pseudo-labels whose confidence is below c_thr
3. Derive how many mixed samples may be trusted from the mean retained
   confidence (n_L for the labeled side, n_U per unlabeled mini-batch)
4. Shuffle labeled + retained pseudo-labeled data, mix it against the
   originals (MixConf by default) and score every mixed sample
5. Keep the n_L / n_U smallest losses and take one weighted Adam step

Total loss:
    (1/B_L) * sum(selected labeled losses)
  + lambda_U * (1/B_L) * (1/K) * sum_k sum(selected losses of mini-batch k)

A config with lambda_U = 0 never looks at the unlabeled data, which makes
the step identical to supervised mixing on the labeled batch. The
calibration study trains through train_supervised() for that reason.
"""

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

import numpy as np

from mixconf.augment import Augmentor, AugmentorKind, mix_arrays
from mixconf.calibration import DEFAULT_NUM_BINS, confidence, evaluate
from mixconf.errors import ConfigError, LengthMismatchError, StepInvariantError
from mixconf.synth_data import Dataset, UnlabeledPool, jitter
from mixconf.tiny_net import backward_and_step, ema_forward, forward, per_sample_loss

logger = logging.getLogger(__name__)

FLOOR_TOLERANCE = 1e-9  # absorbs round-off before flooring n_L / n_U
LOSS_TOLERANCE = 1e-12

# ============================================================================
# CONFIGURATION SECTION
# ============================================================================


class SelectionRule(str, Enum):
    SMALL_LOSS = "small_loss"
    RANDOM = "random"  # same counts, uniformly chosen
    ALL = "all"  # no selection: every mixed row is trained on


@dataclass(frozen=True)
class SslConfig:
    """
    Hyperparameters of the selective training loop

    Attributes:
        batch_labeled: B_L
        c_thr: Confidence threshold in (0, 1]
        lambda_u: Weight of the unlabeled term
        k_augment: K jittered copies per unlabeled sample
        iterations: Optimizer steps in train_loop
        augmentor: Mixing law (MixConf-G sigma=0.4 by default)
        learn_rate: Adam step size
        jitter_magnitude: Noise sd of the K augmentations
        selection: small_loss; random (same counts) and all (no selection) for ablations
        eval_every: Evaluate the EMA model every this many iterations
        ece_bins: Bins used for periodic ECE
        check_invariants: Verify the per-step invariants in-process
    """

    batch_labeled: int = 10
    c_thr: float = 0.8
    lambda_u: float = 2.0
    k_augment: int = 4
    iterations: int = 5000
    augmentor: Augmentor = Augmentor(AugmentorKind.MIXCONF_G, 0.4)
    learn_rate: float = 0.003
    jitter_magnitude: float = 0.05
    selection: SelectionRule = SelectionRule.SMALL_LOSS
    eval_every: int = 500
    ece_bins: int = DEFAULT_NUM_BINS
    check_invariants: bool = True

    def __post_init__(self):
        object.__setattr__(self, "selection", SelectionRule(self.selection))
        if self.batch_labeled < 1:
            raise ConfigError(f"batch_labeled must be positive, got {self.batch_labeled}")
        if not 0.0 < self.c_thr <= 1.0:
            raise ConfigError(f"c_thr must lie in (0, 1], got {self.c_thr}")
        if self.lambda_u < 0.0:
            raise ConfigError(f"lambda_u must be non-negative, got {self.lambda_u}")
        if self.k_augment < 1:
            raise ConfigError(f"k_augment must be at least 1, got {self.k_augment}")
        if self.iterations < 0:
            raise ConfigError(f"iterations must be non-negative, got {self.iterations}")
        if not self.learn_rate > 0.0:
            raise ConfigError(f"learn_rate must be positive, got {self.learn_rate}")
        if self.jitter_magnitude < 0.0:
            raise ConfigError(f"jitter_magnitude must be non-negative, got {self.jitter_magnitude}")
        if self.eval_every < 1:
            raise ConfigError(f"eval_every must be positive, got {self.eval_every}")

    @property
    def batch_unlabeled(self) -> int:
        """B_U = round(B_L / c_thr), fixed for the whole run"""
        return max(1, round(self.batch_labeled / self.c_thr))

    @property
    def kernel(self):
        return self.augmentor.kernel


# ============================================================================
# DOMAIN TYPES SECTION
# ============================================================================


@dataclass
class PseudoLabels:
    """K-averaged predictions on an unlabeled batch"""

    x: np.ndarray
    probs: np.ndarray
    y_hat: np.ndarray
    c: np.ndarray
    augmented: list  # K jittered copies of x, each (B_U, d)


@dataclass
class PseudoBatch:
    """
    Pseudo-labeled samples that passed the confidence threshold

    Attributes:
        x: Retained unlabeled features (R, d)
        x_augmented: Retained rows of every jittered copy (K, R, d)
        indices: Positions of the retained rows in the unlabeled batch
        y_hat: Hard pseudo-labels
        c: Confidences, all >= c_thr
        c_ave: Mean of c (0 when nothing is retained)
    """

    x: np.ndarray
    x_augmented: np.ndarray
    indices: np.ndarray
    y_hat: np.ndarray
    c: np.ndarray
    c_ave: float

    @property
    def retained_count(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class SelectionPlan:
    n_l: int
    n_u: int
    fraction: float


@dataclass
class MixedStep:
    """Mixed labeled batch followed by K mixed unlabeled mini-batches, row-aligned"""

    x_tilde: np.ndarray
    p_tilde: np.ndarray
    is_corrupted: np.ndarray  # original row carries a wrong pseudo-label; needs hidden labels
    labeled_rows: slice
    unlabeled_rows: list


@dataclass
class StepReport:
    iteration: int
    c_ave: float
    retained_count: int
    n_l: int
    n_u: int
    loss_labeled: float
    loss_unlabeled: float
    loss_total: float
    retained_error: float = None
    eval_error: float = None
    eval_ece: float = None

    def to_row(self) -> dict:
        row = asdict(self)
        row["n_L"] = row.pop("n_l")
        row["n_U"] = row.pop("n_u")
        return {column: row[column] for column in CSV_COLUMNS}


CSV_COLUMNS = [
    "iteration",
    "c_ave",
    "retained_count",
    "n_L",
    "n_U",
    "loss_labeled",
    "loss_unlabeled",
    "loss_total",
    "retained_error",
    "eval_error",
    "eval_ece",
]

# ============================================================================
# PSEUDO-LABELING SECTION
# ============================================================================


def generate_pseudo_labels(state, x_unlabeled, k: int, rng, jitter_magnitude: float = 0.0) -> PseudoLabels:
    """
    Average the softmax over K jittered copies, then read off label and confidence

    With K = 1 and zero jitter this is a plain forward pass.
    """
    if k < 1:
        raise ConfigError(f"K must be at least 1, got {k}")
    augmented = [jitter(x_unlabeled, jitter_magnitude, rng) for _ in range(k)]
    probs = np.mean([forward(state, xa) for xa in augmented], axis=0)
    y_hat, c = confidence(probs)
    return PseudoLabels(np.asarray(x_unlabeled, dtype=np.float64), probs, y_hat, c, augmented)


def threshold_filter(pseudo: PseudoLabels, c_thr: float) -> PseudoBatch:
    """Keep exactly the samples with c >= c_thr; an empty result is legal"""
    keep = np.flatnonzero(pseudo.c >= c_thr)
    x_augmented = np.stack([xa[keep] for xa in pseudo.augmented])
    c = pseudo.c[keep]
    return PseudoBatch(
        x=pseudo.x[keep],
        x_augmented=x_augmented,
        indices=keep,
        y_hat=pseudo.y_hat[keep],
        c=c,
        c_ave=float(c.mean()) if len(c) else 0.0,
    )


# ============================================================================
# SELECTION SECTION
# ============================================================================


def selection_counts(batch_labeled: int, retained_count: int, c_ave: float) -> SelectionPlan:
    """
    How many mixed samples to trust on each side

    fraction = (B_L + c_ave * R) / (B_L + R)
    n_L      = floor(fraction * B_L)
    n_U      = min(B_L, R, floor(fraction * c_ave * R))

    R is the retained pseudo-label count, standing in for B_U because
    discarded samples never enter mixing.
    """
    if retained_count == 0:
        return SelectionPlan(batch_labeled, 0, 1.0)
    expected_correct = c_ave * retained_count
    fraction = (batch_labeled + expected_correct) / (batch_labeled + retained_count)
    n_l = math.floor(fraction * batch_labeled + FLOOR_TOLERANCE)
    n_u = math.floor(fraction * expected_correct + FLOOR_TOLERANCE)
    return SelectionPlan(min(n_l, batch_labeled), min(n_u, batch_labeled, retained_count), fraction)


def selection_plan(rule: SelectionRule, batch_labeled: int, retained_count: int, c_ave: float) -> SelectionPlan:
    """Counts for a selection rule; ALL keeps the whole labeled batch and every retained row"""
    if rule is SelectionRule.ALL:
        return SelectionPlan(batch_labeled, retained_count, 1.0)
    return selection_counts(batch_labeled, retained_count, c_ave)


def select_small_loss(per_sample_losses, n: int) -> np.ndarray:
    """Indices of the n smallest losses in ascending loss order; ties go to the lower index"""
    losses = np.asarray(per_sample_losses, dtype=np.float64)
    if not 0 <= n <= len(losses):
        raise LengthMismatchError(f"cannot select {n} of {len(losses)} losses")
    return np.argsort(losses, kind="stable")[:n]


def _select(losses, n: int, rule: SelectionRule, rng) -> np.ndarray:
    if rule is SelectionRule.SMALL_LOSS:
        return select_small_loss(losses, n)
    if rule is SelectionRule.ALL:
        return np.arange(len(losses))
    return np.sort(rng.choice(len(losses), size=n, replace=False))


# ============================================================================
# MIXING SECTION
# ============================================================================


def _one_hot(labels, n_classes: int) -> np.ndarray:
    return np.eye(n_classes)[np.asarray(labels, dtype=np.int64)]


def mix_step_batches(x_l, p_l, batch: PseudoBatch, augmentor: Augmentor, rng, hidden_labels=None) -> MixedStep:
    """
    Shuffle labeled + pseudo-labeled data once and mix it against the originals

    The pool concatenates the labeled batch and each of the K augmented
    copies of the retained pseudo-labeled data. After one shuffle the first
    B_L partners go to the labeled originals, the rest to the K unlabeled
    mini-batches in order.
    """
    n_classes = p_l.shape[1]
    b_l = len(x_l)
    x_parts, p_parts, bad_parts = [x_l], [p_l], [np.zeros(b_l, dtype=bool)]
    retained = 0 if batch is None else batch.retained_count
    k = 0 if batch is None else len(batch.x_augmented)

    if retained:
        p_u = _one_hot(batch.y_hat, n_classes)
        wrong = np.zeros(retained, dtype=bool)
        if hidden_labels is not None:
            wrong = batch.y_hat != np.asarray(hidden_labels)[batch.indices]
        for xa in batch.x_augmented:
            x_parts.append(xa)
            p_parts.append(p_u)
            bad_parts.append(wrong)

    x_orig = np.concatenate(x_parts)
    p_orig = np.concatenate(p_parts)
    is_bad = np.concatenate(bad_parts)

    perm = rng.permutation(len(x_orig))
    mixed = mix_arrays(x_orig, p_orig, x_orig[perm], p_orig[perm], augmentor, rng, partner_indices=perm)

    unlabeled_rows = [slice(b_l + i * retained, b_l + (i + 1) * retained) for i in range(k)] if retained else []
    return MixedStep(mixed.x_tilde, mixed.p_tilde, is_bad, slice(0, b_l), unlabeled_rows)


# ============================================================================
# TRAINING STEP SECTION
# ============================================================================


def _check_step_invariants(config: SslConfig, batch: PseudoBatch, plan: SelectionPlan, pools, report: StepReport):
    if batch is not None and np.any(batch.c < config.c_thr):
        raise StepInvariantError(f"iteration {report.iteration}: pseudo-label below c_thr entered mixing")
    n_u_bound = report.retained_count
    if config.selection is not SelectionRule.ALL:
        n_u_bound = min(config.batch_labeled, n_u_bound)
    elif any(len(chosen) != len(losses) for losses, chosen in pools):
        raise StepInvariantError(f"iteration {report.iteration}: a mixed row was left out without selection")
    if plan.n_l > config.batch_labeled or plan.n_u > n_u_bound:
        raise StepInvariantError(f"iteration {report.iteration}: selection counts {plan} exceed their bounds")
    if selection_plan(config.selection, config.batch_labeled, report.retained_count, report.c_ave) != plan:
        raise StepInvariantError(f"iteration {report.iteration}: counts do not recompute from c_ave/retained_count")
    if config.selection is SelectionRule.SMALL_LOSS:
        for losses, chosen in pools:
            mask = np.zeros(len(losses), dtype=bool)
            mask[chosen] = True
            if mask.any() and (~mask).any() and losses[mask].max() > losses[~mask].min():
                raise StepInvariantError(f"iteration {report.iteration}: a selected loss exceeds an unselected one")
    recombined = report.loss_labeled + config.lambda_u * report.loss_unlabeled
    if abs(report.loss_total - recombined) > LOSS_TOLERANCE:
        raise StepInvariantError(f"iteration {report.iteration}: total loss does not decompose")


def train_step(state, x_labeled, y_labeled, x_unlabeled, config: SslConfig, rng, iteration: int = 0, hidden_labels=None):
    """
    One selective-training iteration

    Args:
        state: Current NetState
        x_labeled: (B_L, d) labeled features
        y_labeled: Integer labels or one-hot rows for the labeled batch
        x_unlabeled: (B_U, d) unlabeled features (ignored when lambda_U = 0)
        config: SslConfig
        rng: Step randomness (jitter, shuffle, ratios, random selection)
        iteration: Index recorded in the StepReport
        hidden_labels: True labels of the unlabeled batch, diagnostics only

    Returns:
        tuple: (new NetState, StepReport)
    """
    n_classes = state.config.n_classes
    x_l = np.asarray(x_labeled, dtype=np.float64)
    y_l = np.asarray(y_labeled)
    p_l = _one_hot(y_l, n_classes) if y_l.ndim == 1 else y_l.astype(np.float64)
    b_l = len(x_l)
    if b_l != config.batch_labeled:
        raise LengthMismatchError(f"labeled batch has {b_l} rows, config expects {config.batch_labeled}")

    # (a)-(b) pseudo-labels and thresholding, skipped entirely on the supervised path
    batch = None
    retained_error = None
    if config.lambda_u > 0.0 and x_unlabeled is not None and len(x_unlabeled):
        pseudo = generate_pseudo_labels(state, x_unlabeled, config.k_augment, rng, config.jitter_magnitude)
        batch = threshold_filter(pseudo, config.c_thr)
        if hidden_labels is not None and batch.retained_count:
            retained_error = float(np.mean(batch.y_hat != np.asarray(hidden_labels)[batch.indices]))
    retained = 0 if batch is None else batch.retained_count
    c_ave = 0.0 if batch is None else batch.c_ave

    # (c)-(d) shuffle the pool and mix it against the originals
    mixed = mix_step_batches(x_l, p_l, batch, config.augmentor, rng, hidden_labels)

    # (e)-(f) score every mixed sample, then select per pool
    losses = per_sample_loss(state, mixed.x_tilde, mixed.p_tilde)
    plan = selection_plan(config.selection, b_l, retained, c_ave)
    weights = np.zeros(len(losses))
    pools = []

    labeled_losses = losses[mixed.labeled_rows]
    chosen_l = _select(labeled_losses, plan.n_l, config.selection, rng)
    weights[chosen_l] = 1.0 / b_l
    pools.append((labeled_losses, chosen_l))
    loss_labeled = float(np.sum(labeled_losses[chosen_l])) / b_l

    k = len(mixed.unlabeled_rows)
    unlabeled_sum = 0.0
    for rows in mixed.unlabeled_rows:
        pool_losses = losses[rows]
        chosen_u = _select(pool_losses, plan.n_u, config.selection, rng)
        weights[rows.start + chosen_u] = config.lambda_u / (b_l * k)
        pools.append((pool_losses, chosen_u))
        unlabeled_sum += float(np.sum(pool_losses[chosen_u]))
    loss_unlabeled = unlabeled_sum / (b_l * k) if k else 0.0

    # (g)-(h) one weighted step on the selected rows
    active = weights > 0.0
    new_state, _ = backward_and_step(state, mixed.x_tilde[active], mixed.p_tilde[active], weights[active], config.learn_rate)

    report = StepReport(
        iteration=iteration,
        c_ave=c_ave,
        retained_count=retained,
        n_l=plan.n_l,
        n_u=plan.n_u,
        loss_labeled=loss_labeled,
        loss_unlabeled=loss_unlabeled,
        loss_total=loss_labeled + config.lambda_u * loss_unlabeled,
        retained_error=retained_error,
    )
    if config.check_invariants:
        _check_step_invariants(config, batch, plan, pools, report)
    logger.debug(
        f"step {iteration}: retained={retained} c_ave={c_ave:.3f} n_L={plan.n_l} n_U={plan.n_u} loss={report.loss_total:.4f}"
    )
    return new_state, report


# ============================================================================
# TRAINING LOOP SECTION
# ============================================================================


def epoch_batches(n: int, batch_size: int, rng):
    """
    Endless stream of index batches, reshuffled every epoch

    The last partial batch of each epoch is dropped so every batch has
    exactly batch_size rows.
    """
    if batch_size > n:
        raise ConfigError(f"batch size {batch_size} exceeds the {n} available samples")
    while True:
        order = rng.permutation(n)
        for start in range(0, n - batch_size + 1, batch_size):
            yield order[start:start + batch_size]


def evaluate_state(state, dataset: Dataset, num_bins: int = DEFAULT_NUM_BINS):
    """Top-1 error and calibration report of the EMA model on a dataset"""
    return evaluate(ema_forward(state, dataset.x), dataset.y, num_bins)


def train_loop(state, labeled: Dataset, unlabeled: UnlabeledPool, config: SslConfig, rng, evaluation: Dataset = None):
    """
    Run config.iterations train_step calls over reshuffled minibatches

    Args:
        state: Initial NetState
        labeled: Labeled training set (at least B_L samples)
        unlabeled: Unlabeled pool, or None for supervised training
        config: SslConfig
        rng: Master generator; three child streams are spawned from it
        evaluation: Optional held-out set scored with the EMA model every
            eval_every iterations and after the last one

    Returns:
        tuple: (final NetState, list of StepReport)
    """
    if config.iterations == 0:
        return state, []
    if len(labeled) == 0:
        raise ConfigError("labeled dataset is empty")

    labeled_rng, unlabeled_rng, step_rng = rng.spawn(3)
    labeled_stream = epoch_batches(len(labeled), config.batch_labeled, labeled_rng)

    semi_supervised = config.lambda_u > 0.0 and unlabeled is not None and len(unlabeled) > 0
    unlabeled_stream = None
    if semi_supervised:
        unlabeled_stream = epoch_batches(len(unlabeled), config.batch_unlabeled, unlabeled_rng)

    mode = "semi-supervised" if semi_supervised else "supervised"
    logger.info(f"🏋️ Starting {mode} training: {config.iterations} iterations, augmentor {config.augmentor}")

    log = []
    for iteration in range(config.iterations):
        idx_l = next(labeled_stream)
        x_u, hidden = None, None
        if unlabeled_stream is not None:
            idx_u = next(unlabeled_stream)
            x_u, hidden = unlabeled.x[idx_u], unlabeled.hidden_labels[idx_u]

        state, report = train_step(
            state, labeled.x[idx_l], labeled.y[idx_l], x_u, config, step_rng, iteration=iteration, hidden_labels=hidden
        )

        is_last = iteration == config.iterations - 1
        if evaluation is not None and len(evaluation) and ((iteration + 1) % config.eval_every == 0 or is_last):
            error, calibration = evaluate_state(state, evaluation, config.ece_bins)
            report.eval_error = error
            report.eval_ece = calibration.ece
            logger.info(
                f"📊 iteration {iteration + 1}/{config.iterations}: eval error {error:.4f}, "
                f"ECE {calibration.ece:.4f}, loss {report.loss_total:.4f}"
            )
        log.append(report)

    return state, log


def train_supervised(state, labeled: Dataset, config: SslConfig, rng, evaluation: Dataset = None):
    """Supervised mixing only: train_loop with lambda_U = 0 and no unlabeled data"""
    return train_loop(state, labeled, None, replace(config, lambda_u=0.0), rng, evaluation)
