"""Per-source feature extraction and fusion-vector assembly.

Tabular sources read raw field values in roster order; time-series sources
compress each signal into eleven trend statistics; multi-image sources
average their per-image vectors. Normalization is a per-feature z-score
fitted on the training split only, and fusion concatenates the selected
source vectors in canonical catalog order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionError,
    EmptySetError,
    UnsortedError,
)
from .record_store import (
    BlockStore,
    EmbeddingBlock,
    PatientRecord,
    SourceCatalog,
    sampling_events,
    slice_record,
)

STATS_PER_SIGNAL = 11


@dataclass(frozen=True)
class SignalStats:
    """Eleven trend statistics for one time-series signal, fixed order.

    Dispersion uses the population (divide-by-n) convention; peaks are
    strict interior maxima; the slope is the least-squares fit of value
    against timestamp in hours.
    """

    n_samples: float
    max: float
    min: float
    mean: float
    median: float
    std: float
    variance: float
    n_peaks: float
    slope: float
    mean_succ_diff: float
    mean_abs_succ_diff: float

    def as_vector(self) -> np.ndarray:
        return np.array(
            [
                self.n_samples,
                self.max,
                self.min,
                self.mean,
                self.median,
                self.std,
                self.variance,
                self.n_peaks,
                self.slope,
                self.mean_succ_diff,
                self.mean_abs_succ_diff,
            ]
        )


def featurize_timeseries_signal(points: list[tuple[float, float]]) -> SignalStats:
    """Compute SignalStats for one sorted (timestamp, value) sequence."""
    if not points:
        return SignalStats(0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0)
    times = np.array([t for t, _ in points], dtype=np.float64)
    values = np.array([v for _, v in points], dtype=np.float64)
    if np.any(np.diff(times) < 0):
        raise UnsortedError("signal timestamps decrease")
    n = len(values)
    variance = float(np.var(values))
    std = float(np.sqrt(variance))
    if n >= 3:
        interior = (values[1:-1] > values[:-2]) & (values[1:-1] > values[2:])
        n_peaks = int(np.count_nonzero(interior))
    else:
        n_peaks = 0
    tc = times - times.mean()
    denom = float(tc @ tc)
    slope = float((tc @ values) / denom) if denom > 0.0 else 0.0
    if n >= 2:
        diffs = np.diff(values)
        mean_succ = float(diffs.mean())
        mean_abs_succ = float(np.abs(diffs).mean())
    else:
        mean_succ = 0.0
        mean_abs_succ = 0.0
    return SignalStats(
        n_samples=float(n),
        max=float(values.max()),
        min=float(values.min()),
        mean=float(values.mean()),
        median=float(np.median(values)),
        std=std,
        variance=variance,
        n_peaks=float(n_peaks),
        slope=slope,
        mean_succ_diff=mean_succ,
        mean_abs_succ_diff=mean_abs_succ,
    )


def featurize_tabular(record: PatientRecord, field_roster: list[str]) -> np.ndarray:
    """Raw field values in roster order; absent fields read as zero."""
    return np.array(
        [record.tabular_fields.get(name, 0.0) for name in field_roster],
        dtype=np.float64,
    )


def featurize_event_group(
    record: PatientRecord,
    signal_roster: list[str],
    t: float | None = None,
) -> np.ndarray:
    """Concatenated SignalStats for each roster signal, in roster order."""
    if t is not None:
        record = slice_record(record, t)
    parts = [
        featurize_timeseries_signal(record.event_streams.get(name, [])).as_vector()
        for name in signal_roster
    ]
    if not parts:
        return np.zeros(0)
    return np.concatenate(parts)


def aggregate_multi_image(blocks: list[EmbeddingBlock]) -> np.ndarray:
    """Element-wise arithmetic mean over a family of same-width vectors."""
    if not blocks:
        raise EmptySetError("cannot aggregate an empty image set")
    dims = {len(b.vector) for b in blocks}
    if len(dims) != 1:
        raise DimensionError(f"mixed image vector lengths {sorted(dims)}")
    return np.mean([b.vector for b in blocks], axis=0)


@dataclass(frozen=True)
class Normalizer:
    """Per-feature affine transform fitted on one training split."""

    center: np.ndarray
    scale: np.ndarray
    fitted_on: str = ""

    def __post_init__(self):
        if self.center.shape != self.scale.shape or self.center.ndim != 1:
            raise DimensionError("center and scale must be equal-length vectors")
        if np.any(self.scale <= 0):
            raise DimensionError("every scale entry must be positive")


ZERO_VARIANCE_EPS = 1e-12


def fit_normalizer(train_matrix: np.ndarray, fitted_on: str = "") -> Normalizer:
    """Fit per-feature z-scoring; constant features get unit scale."""
    X = np.asarray(train_matrix, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError("expected a (samples, features) matrix")
    center = X.mean(axis=0)
    std = X.std(axis=0)
    scale = np.where(std < ZERO_VARIANCE_EPS, 1.0, std)
    return Normalizer(center=center, scale=scale, fitted_on=fitted_on)


def apply_normalizer(norm: Normalizer, vector: np.ndarray) -> np.ndarray:
    """(x - center) / scale, for a single vector or a row matrix."""
    X = np.asarray(vector, dtype=np.float64)
    if X.shape[-1] != norm.center.shape[0]:
        raise DimensionError(
            f"vector has {X.shape[-1]} features, normalizer has "
            f"{norm.center.shape[0]}"
        )
    return (X - norm.center) / norm.scale


@dataclass(frozen=True)
class FusionVector:
    sample_id: str
    source_set: tuple[str, ...]  # canonical catalog order
    vector: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])


def canonical_sources(source_set, catalog: SourceCatalog) -> tuple[str, ...]:
    """Order a source subset by catalog position, validating membership."""
    return tuple(sorted(set(source_set), key=catalog.index))


def assemble_fusion(
    blocks: dict[str, EmbeddingBlock],
    source_set,
    catalog: SourceCatalog,
    sample_id: str = "",
) -> FusionVector:
    """Concatenate one sample's blocks for the chosen sources.

    The output order is the canonical catalog order regardless of the order
    source_set was given; a source with no block contributes zeros.
    """
    ordered = canonical_sources(source_set, catalog)
    parts = []
    for sid in ordered:
        block = blocks.get(sid)
        parts.append(
            np.zeros(catalog.dim(sid)) if block is None else np.asarray(block.vector)
        )
    vector = np.concatenate(parts) if parts else np.zeros(0)
    return FusionVector(sample_id=sample_id, source_set=ordered, vector=vector)


def fusion_matrix(
    store: BlockStore,
    sample_ids: list[str],
    source_set,
    catalog: SourceCatalog,
) -> np.ndarray:
    """Stack fusion vectors for many samples into an (n, d) matrix."""
    ordered = canonical_sources(source_set, catalog)
    columns = []
    for sid in ordered:
        columns.append(
            np.stack([store.get(sample, sid).vector for sample in sample_ids])
        )
    return np.concatenate(columns, axis=1)


def make_feature_blocks(
    records: list[PatientRecord], catalog: SourceCatalog
) -> list[EmbeddingBlock]:
    """Featurize tabular and time-series sources for every sampling event.

    Produces blocks in the same shape the ingest path expects, so natively
    extracted features and externally supplied embeddings mix freely.
    """
    for spec in catalog.sources:
        if spec.modality == "tabular" and spec.signals:
            if len(spec.signals) != spec.dim:
                raise DimensionError(
                    f"source {spec.id!r}: {len(spec.signals)} roster fields "
                    f"cannot fill dim {spec.dim}"
                )
        if spec.modality == "timeseries" and spec.signals:
            if STATS_PER_SIGNAL * len(spec.signals) != spec.dim:
                raise DimensionError(
                    f"source {spec.id!r}: {len(spec.signals)} signals yield "
                    f"{STATS_PER_SIGNAL * len(spec.signals)} features, "
                    f"catalog says {spec.dim}"
                )
    blocks = []
    for record in records:
        for sample_id, t in sampling_events(record):
            sliced = slice_record(record, t)
            for spec in catalog.sources:
                if spec.modality == "tabular" and spec.signals:
                    vec = featurize_tabular(sliced, list(spec.signals))
                elif spec.modality == "timeseries" and spec.signals:
                    vec = featurize_event_group(sliced, list(spec.signals))
                else:
                    continue
                blocks.append(EmbeddingBlock(sample_id, spec.id, vec))
    return blocks
