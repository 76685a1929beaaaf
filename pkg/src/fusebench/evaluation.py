"""Rank-based AUROC, ROC curves, patient-grouped splits, repeated experiments.

AUROC uses the Mann-Whitney formulation with midrank tie handling, so it
equals the probability that a random positive outranks a random negative
with ties counted half. The arithmetic is carried out on exact integers
(doubled rank sums) and divided once at the end, which makes the
complement identity auroc(s, y) + auroc(-s, y) == 1.0 hold exactly in
floating point.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DimensionError,
    FusebenchError,
    InfeasibleSplitError,
    SingleClassError,
    ValidationError,
)
from .featurization import apply_normalizer, fit_normalizer, fusion_matrix
from .record_store import BlockStore, LabeledSample, SourceCatalog


def _doubled_rank_sum(scores: np.ndarray, labels: np.ndarray) -> tuple[int, int, int]:
    """Return (2 * rank sum of positives, n_pos, n_neg) as exact integers.

    Midranks over ties are half-integers, so doubling keeps everything
    integral; tie groups contribute (first_rank + last_rank) per member.
    """
    n = scores.shape[0]
    order = np.argsort(scores, kind="stable")
    s = scores[order]
    y = labels[order]
    # boundaries of tie groups in the sorted order
    starts = np.flatnonzero(np.concatenate(([True], s[1:] != s[:-1])))
    ends = np.concatenate((starts[1:], [n]))
    pos_cum = np.concatenate(([0], np.cumsum(y)))
    doubled = 0
    for a, b in zip(starts.tolist(), ends.tolist()):
        k = int(pos_cum[b] - pos_cum[a])  # positives inside this tie group
        if k:
            doubled += k * (a + 1 + b)  # doubled midrank = first + last rank
    n_pos = int(pos_cum[n])
    return doubled, n_pos, n - n_pos


def _check_scores_labels(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.ndim != 1 or y.ndim != 1 or s.shape[0] != y.shape[0]:
        raise ValidationError(
            f"scores and labels must be 1-D and equal length, got {s.shape} vs {y.shape}"
        )
    if not np.isfinite(s).all():
        raise ValidationError("scores contain non-finite values")
    if not np.isin(y, (0, 1)).all():
        raise ValidationError("labels must be 0 or 1")
    y = y.astype(np.int64)
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == y.shape[0]:
        raise SingleClassError("both classes must be present to rank scores")
    return s, y


def auroc(scores, labels) -> float:
    """Mann-Whitney AUROC with midrank ties, exact on the doubled integers."""
    s, y = _check_scores_labels(scores, labels)
    doubled, n_pos, n_neg = _doubled_rank_sum(s, y)
    # 2U = 2R+ - n+(n+ + 1); C = 2 n+ n-; auroc = 2U / C
    a = doubled - n_pos * (n_pos + 1)
    c = 2 * n_pos * n_neg
    # Divide on the small side so q and 1-q are exact float complements.
    if 2 * a <= c:
        return a / c
    return 1.0 - (c - a) / c


@dataclass(frozen=True)
class RocCurve:
    """ROC points; thresholds[0] is +inf for the origin point."""

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray

    def area(self) -> float:
        return float(np.trapezoid(self.tpr, self.fpr))


def roc_curve(scores, labels) -> RocCurve:
    """ROC points at each distinct score threshold, descending, from (0,0) to (1,1)."""
    s, y = _check_scores_labels(scores, labels)
    order = np.argsort(-s, kind="stable")
    s_desc = s[order]
    y_desc = y[order]
    distinct = np.flatnonzero(
        np.concatenate((s_desc[1:] != s_desc[:-1], [True]))
    )  # last index of each tie group
    tp = np.cumsum(y_desc)[distinct]
    fp = np.cumsum(1 - y_desc)[distinct]
    n_pos = int(y.sum())
    n_neg = y.shape[0] - n_pos
    fpr = np.concatenate(([0.0], fp / n_neg))
    tpr = np.concatenate(([0.0], tp / n_pos))
    thresholds = np.concatenate(([np.inf], s_desc[distinct]))
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds)


def write_roc_csv(curve: RocCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fpr", "tpr", "threshold"])
        for f, t, th in zip(curve.fpr, curve.tpr, curve.thresholds):
            writer.writerow([repr(float(f)), repr(float(t)), repr(float(th))])


@dataclass(frozen=True)
class SplitPlan:
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    seed: int
    test_fraction: float


FRACTION_TOLERANCE = 0.05  # both targets allow a 5-percentage-point slack


def group_stratified_split(
    samples: Sequence[LabeledSample],
    test_fraction: float = 0.2,
    seed: int = 0,
) -> SplitPlan:
    """Greedy seeded patient-level assignment with local repair.

    Patients are ordered positives-first (seeded shuffle among equals) so
    the class quota fills while the sample quota still has room; each
    patient goes to whichever side leaves the running test counts closer
    to their targets. A best-improvement toggle pass then fixes the
    granularity errors a single greedy sweep can leave behind. All samples
    of a patient land on one side.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValidationError(f"test_fraction must be in (0,1), got {test_fraction}")
    if not samples:
        raise InfeasibleSplitError("no samples to split")
    by_patient: dict[str, list[LabeledSample]] = {}
    for s in samples:
        by_patient.setdefault(s.patient_id, []).append(s)
    pos_patients = {p for p, ss in by_patient.items() if any(s.label == 1 for s in ss)}
    neg_patients = {p for p, ss in by_patient.items() if any(s.label == 0 for s in ss)}
    if len(pos_patients) < 2 or len(neg_patients) < 2:
        raise InfeasibleSplitError(
            "need at least 2 patients carrying each class to split without leakage"
        )

    patients = sorted(by_patient)
    k = len(patients)
    rng = np.random.default_rng(seed)
    shuffled_rank = rng.permutation(k)
    sizes = [len(by_patient[p]) for p in patients]
    positives = [sum(1 for s in by_patient[p] if s.label == 1) for p in patients]
    order = sorted(range(k), key=lambda i: (-positives[i], -sizes[i], shuffled_rank[i]))

    n_total = len(samples)
    p_total = sum(positives)
    target_n = test_fraction * n_total
    rate = p_total / n_total
    p_scale = max(target_n * rate, 1.0)

    def smooth(tn: int, tp: int) -> float:
        # sample-count deviation plus positive excess relative to the
        # proportional share of the current test size
        return ((tn - target_n) / target_n) ** 2 + ((tp - rate * tn) / p_scale) ** 2

    def cost(tn: int, tp: int) -> float:
        # tolerance violations dominate; the smooth term breaks plateaus
        frac_dev = abs(tn / n_total - test_fraction)
        rate_dev = abs(tp / tn - rate) if tn > 0 else 0.0
        hinge = max(0.0, frac_dev - FRACTION_TOLERANCE) + max(
            0.0, rate_dev - FRACTION_TOLERANCE
        )
        return 1e6 * hinge + smooth(tn, tp)

    in_test = [False] * k
    tn = 0
    tp = 0
    for i in order:
        if smooth(tn + sizes[i], tp + positives[i]) < smooth(tn, tp):
            in_test[i] = True
            tn += sizes[i]
            tp += positives[i]

    # repair: toggle or swap patients while that reduces the cost; moves are
    # evaluated per (size, positives) profile since same-profile patients are
    # interchangeable, with the seeded rank picking the concrete patient
    prof_members: dict[tuple[int, int], list[int]] = {}
    for i in range(k):
        prof_members.setdefault((sizes[i], positives[i]), []).append(i)
    profiles = sorted(prof_members)

    def representative(profile: tuple[int, int], want_test: bool) -> int:
        best = -1
        for i in prof_members[profile]:
            if in_test[i] == want_test and (
                best < 0 or shuffled_rank[i] < shuffled_rank[best]
            ):
                best = i
        return best

    for _ in range(10 * k):
        current = cost(tn, tp)
        best_gain = 1e-15
        move: tuple[int, ...] | None = None
        for pa in profiles:
            for side in (False, True):
                i = representative(pa, side)
                if i < 0:
                    continue
                sign = -1 if side else 1
                gain = current - cost(tn + sign * pa[0], tp + sign * pa[1])
                if gain > best_gain:
                    best_gain = gain
                    move = (i,)
            i_out = representative(pa, True)
            if i_out < 0:
                continue
            for pb in profiles:
                if pb == pa:
                    continue
                i_in = representative(pb, False)
                if i_in < 0:
                    continue
                gain = current - cost(tn - pa[0] + pb[0], tp - pa[1] + pb[1])
                if gain > best_gain:
                    best_gain = gain
                    move = (i_out, i_in)
        if move is None:
            break
        for i in move:
            sign = -1 if in_test[i] else 1
            in_test[i] = not in_test[i]
            tn += sign * sizes[i]
            tp += sign * positives[i]

    test_patients = {patients[i] for i in range(k) if in_test[i]}
    if tn == 0 or tn == n_total:
        raise InfeasibleSplitError("assignment left one side empty")
    achieved_fraction = tn / n_total
    if abs(achieved_fraction - test_fraction) > FRACTION_TOLERANCE + 1e-12:
        raise InfeasibleSplitError(
            f"test fraction {achieved_fraction:.3f} misses target {test_fraction} "
            f"by more than {FRACTION_TOLERANCE}"
        )
    global_rate = p_total / n_total
    test_rate = tp / tn
    if abs(test_rate - global_rate) > FRACTION_TOLERANCE + 1e-12:
        raise InfeasibleSplitError(
            f"test positive rate {test_rate:.3f} misses global rate "
            f"{global_rate:.3f} by more than {FRACTION_TOLERANCE}"
        )

    train_ids = tuple(
        sorted(s.sample_id for s in samples if s.patient_id not in test_patients)
    )
    test_ids = tuple(
        sorted(s.sample_id for s in samples if s.patient_id in test_patients)
    )
    return SplitPlan(
        train_ids=train_ids,
        test_ids=test_ids,
        seed=seed,
        test_fraction=test_fraction,
    )


@dataclass(frozen=True)
class MetricSummary:
    mean_auroc: float
    sd_auroc: float
    per_repeat: tuple[float, ...]


def summarize(per_repeat: Sequence[float]) -> MetricSummary:
    values = [float(v) for v in per_repeat]
    if not values:
        raise ValidationError("cannot summarize zero repeats")
    mean = math.fsum(values) / len(values)
    if len(values) == 1:
        sd = 0.0
    else:
        sd = math.sqrt(
            math.fsum((v - mean) ** 2 for v in values) / (len(values) - 1)
        )
    return MetricSummary(mean_auroc=mean, sd_auroc=sd, per_repeat=tuple(values))


@dataclass(frozen=True)
class RepeatOutcome:
    repeat: int
    seed: int
    chosen: "object"  # GbdtHyperparams; kept loose to avoid a module cycle
    test_auroc: float
    n_train: int
    n_test: int


@dataclass(frozen=True)
class FittedRepeat:
    """A repeat's outcome plus the artifacts needed to re-score it."""

    outcome: RepeatOutcome
    model: "object"  # TrainedEnsemble; kept loose to avoid a module cycle
    normalizer: "object"
    test_index: np.ndarray
    y_test: np.ndarray


def fit_repeat(
    samples: Sequence[LabeledSample],
    X: np.ndarray,
    grid,
    repeat: int,
    base_seed: int = 0,
    test_fraction: float = 0.2,
) -> FittedRepeat:
    """One split/normalize/grid-search/train/evaluate round.

    Row i of X is the fusion vector of samples[i]. Test rows never touch
    normalizer fitting, cross-validation, or model selection.
    """
    from . import learner

    if X.shape[0] != len(samples):
        raise DimensionError(
            f"feature matrix has {X.shape[0]} rows for {len(samples)} samples"
        )
    seed = base_seed + repeat
    plan = group_stratified_split(samples, test_fraction=test_fraction, seed=seed)
    row = {s.sample_id: i for i, s in enumerate(samples)}
    tr = np.array([row[sid] for sid in plan.train_ids], dtype=np.intp)
    te = np.array([row[sid] for sid in plan.test_ids], dtype=np.intp)
    y = np.array([s.label for s in samples], dtype=np.int64)
    patients = np.array([s.patient_id for s in samples])

    norm = fit_normalizer(X[tr])
    X_tr = apply_normalizer(norm, X[tr])
    X_te = apply_normalizer(norm, X[te])

    chosen = learner.grid_search_cv(X_tr, y[tr], patients[tr], grid, seed=seed)
    model = learner.train_gbdt(X_tr, y[tr], chosen, seed=seed)
    scores = learner.predict_scores(model, X_te)
    outcome = RepeatOutcome(
        repeat=repeat,
        seed=seed,
        chosen=chosen,
        test_auroc=auroc(scores, y[te]),
        n_train=int(tr.shape[0]),
        n_test=int(te.shape[0]),
    )
    return FittedRepeat(
        outcome=outcome, model=model, normalizer=norm, test_index=te, y_test=y[te]
    )


def single_repeat(
    samples: Sequence[LabeledSample],
    X: np.ndarray,
    grid,
    repeat: int,
    base_seed: int = 0,
    test_fraction: float = 0.2,
) -> RepeatOutcome:
    return fit_repeat(
        samples, X, grid, repeat, base_seed=base_seed, test_fraction=test_fraction
    ).outcome


def repeated_experiment(
    store: BlockStore,
    samples: Sequence[LabeledSample],
    source_set,
    catalog: SourceCatalog,
    grid=None,
    repeats: int = 5,
    base_seed: int = 0,
    test_fraction: float = 0.2,
    on_repeat: Callable[[RepeatOutcome], None] | None = None,
) -> MetricSummary:
    """Run `repeats` independent split/train/test rounds and summarize.

    SD uses the n-1 divisor; a single repeat reports SD 0 by convention.
    """
    from . import learner

    if repeats < 1:
        raise ValidationError(f"repeats must be >= 1, got {repeats}")
    if grid is None:
        grid = learner.default_grid()
    ids = [s.sample_id for s in samples]
    X = fusion_matrix(store, ids, source_set, catalog)
    per_repeat = []
    for i in range(repeats):
        try:
            outcome = single_repeat(
                samples, X, grid, repeat=i, base_seed=base_seed,
                test_fraction=test_fraction,
            )
        except FusebenchError as e:
            raise type(e)(f"repeat {i}: {e}") from e
        per_repeat.append(outcome.test_auroc)
        if on_repeat is not None:
            on_repeat(outcome)
    return summarize(per_repeat)
