"""Synthetic multimodal cohorts with controllable signal content.

A linear-Gaussian latent model drives every emitted artifact: each sample
draws a latent state, the label is a Bernoulli draw on a logistic score of
that state, and each source observes a noisy linear projection of it. The
knobs (projection sparsity, informativeness, noise, missingness) make
redundancy and signal strength explicit, so statements like "adding
sources helps" become testable hypotheses on known ground truth.

Samples of one patient share a latent offset, so patient-grouped splits
behave differently from row-level splits. Generation is deterministic for
a given seed, and per-patient substreams are derived up front, so a
parallel driver producing patients out of order yields identical output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SpecError
from .record_store import (
    BlockStore,
    EmbeddingBlock,
    LabeledSample,
    PatientRecord,
    SourceCatalog,
)

# Weight of the shared patient offset vs the per-sample draw; both squared
# weights sum to 1 so the marginal latent variance stays 1.
PATIENT_MIX = math.sqrt(0.5)

# Every generated series has this many points; together with dyadic gap
# choices it keeps timestamp means exactly representable, so a noise-free
# series has a bitwise-exact least-squares slope.
SERIES_POINTS = 8
GAP_CHOICES = (0.5, 1.0, 1.5, 2.0, 2.5)


@dataclass(frozen=True)
class SourceModel:
    """Generation knobs for one source.

    ``latent_dims`` pins the projection to specific latent coordinates
    (used to construct redundant or disjoint information across sources);
    when absent, ``sparsity`` picks the fraction of coordinates to use.
    ``drift`` fixes the trend of every raw series from this source; when
    absent the trend follows the sample's latent label score.
    """

    dim: int
    informativeness: float = 1.0
    noise_sd: float = 1.0
    missing_rate: float = 0.0
    sparsity: float = 1.0
    latent_dims: tuple[int, ...] | None = None
    drift: float | None = None


@dataclass(frozen=True)
class CohortSpec:
    n_patients: int
    samples_per_patient: int | tuple[int, int]
    latent_dim: int
    sources: dict[str, SourceModel]
    label_sharpness: float = 2.0
    task_id: str = "synthetic"
    seed: int = 0


@dataclass(frozen=True)
class SampleTruth:
    """Ground truth for one sample: enough to recompute its label odds."""

    sample_id: str
    patient_id: str
    z: np.ndarray
    score: float
    p_label: float
    label: int
    missing: tuple[str, ...]


@dataclass(frozen=True)
class CohortTruth:
    label_weights: np.ndarray
    projections: dict[str, np.ndarray]
    active_dims: dict[str, tuple[int, ...]]
    samples: list[SampleTruth] = field(default_factory=list)


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _check_spec(spec: CohortSpec, catalog: SourceCatalog) -> None:
    if spec.n_patients < 1:
        raise SpecError(f"n_patients must be >= 1, got {spec.n_patients}")
    if spec.latent_dim < 1:
        raise SpecError(f"latent_dim must be >= 1, got {spec.latent_dim}")
    if not math.isfinite(spec.label_sharpness) or spec.label_sharpness < 0:
        raise SpecError(
            f"label_sharpness must be finite and >= 0, got {spec.label_sharpness}"
        )
    spp = spec.samples_per_patient
    if isinstance(spp, int):
        if spp < 1:
            raise SpecError(f"samples_per_patient must be >= 1, got {spp}")
    else:
        if len(spp) != 2 or not all(isinstance(v, int) for v in spp):
            raise SpecError(
                f"samples_per_patient range must be two ints, got {spp!r}"
            )
        lo, hi = spp
        if not 1 <= lo <= hi:
            raise SpecError(f"samples_per_patient range must satisfy 1 <= lo <= hi, got {spp}")
    catalog_ids = [s.id for s in catalog]
    for sid in catalog_ids:
        if sid not in spec.sources:
            raise SpecError(f"spec has no source model for {sid!r}")
    for sid in spec.sources:
        if sid not in catalog_ids:
            raise SpecError(f"spec models unknown source {sid!r}")
    for src in catalog:
        model = spec.sources[src.id]
        if model.dim != src.dim:
            raise SpecError(
                f"source {src.id!r}: spec dim {model.dim} != catalog dim {src.dim}"
            )
        if not 0.0 <= model.missing_rate <= 1.0:
            raise SpecError(
                f"source {src.id!r}: missing_rate must be in [0, 1], "
                f"got {model.missing_rate}"
            )
        if model.noise_sd < 0:
            raise SpecError(
                f"source {src.id!r}: noise_sd must be >= 0, got {model.noise_sd}"
            )
        if not 0.0 < model.sparsity <= 1.0:
            raise SpecError(
                f"source {src.id!r}: sparsity must be in (0, 1], got {model.sparsity}"
            )
        if model.latent_dims is not None:
            dims = model.latent_dims
            if not dims:
                raise SpecError(f"source {src.id!r}: latent_dims is empty")
            if len(set(dims)) != len(dims):
                raise SpecError(f"source {src.id!r}: latent_dims has duplicates")
            if any(d < 0 or d >= spec.latent_dim for d in dims):
                raise SpecError(
                    f"source {src.id!r}: latent_dims out of range for "
                    f"latent_dim {spec.latent_dim}"
                )
        if model.drift is not None and not math.isfinite(model.drift):
            raise SpecError(f"source {src.id!r}: drift must be finite")


def _sample_count(rng: np.random.Generator, spp) -> int:
    if isinstance(spp, int):
        return spp
    lo, hi = spp
    return int(rng.integers(lo, hi + 1))


def _label_weights(params: np.random.Generator, latent_dim: int) -> np.ndarray:
    w = params.standard_normal(latent_dim)
    norm = float(np.linalg.norm(w))
    if norm == 0.0:
        w = np.zeros(latent_dim)
        w[0] = 1.0
        return w
    return w / norm


def _projection(
    params: np.random.Generator, model: SourceModel, latent_dim: int
) -> tuple[np.ndarray, tuple[int, ...]]:
    if model.latent_dims is not None:
        dims = tuple(sorted(model.latent_dims))
    else:
        k = max(1, round(model.sparsity * latent_dim))
        dims = tuple(sorted(params.choice(latent_dim, size=k, replace=False).tolist()))
    proj = np.zeros((model.dim, latent_dim))
    proj[:, dims] = params.standard_normal((model.dim, len(dims))) / math.sqrt(len(dims))
    return proj, dims


def generate_cohort(
    spec: CohortSpec, catalog: SourceCatalog
) -> tuple[BlockStore, list[LabeledSample], CohortTruth]:
    """Emit embedding blocks, labeled samples, and the generating truth.

    Per sample: latent z ~ mixture of a shared patient offset and a fresh
    spherical draw; label ~ Bernoulli(sigmoid(sharpness * w.z)); each
    source emits informativeness * (projection @ z) + noise, and the whole
    block is dropped (read back as zeros) with probability missing_rate.
    Noise and missingness draws happen for every source regardless of the
    knob settings, so cohorts with the same seed share latents, labels,
    and vectors even when rates differ.
    """
    _check_spec(spec, catalog)
    streams = np.random.SeedSequence(spec.seed).spawn(spec.n_patients + 1)
    params = np.random.default_rng(streams[0])
    w = _label_weights(params, spec.latent_dim)
    projections: dict[str, np.ndarray] = {}
    active: dict[str, tuple[int, ...]] = {}
    for src in catalog:
        proj, dims = _projection(params, spec.sources[src.id], spec.latent_dim)
        projections[src.id] = proj
        active[src.id] = dims

    store = BlockStore(catalog)
    samples: list[LabeledSample] = []
    truths: list[SampleTruth] = []
    for p in range(spec.n_patients):
        rng = np.random.default_rng(streams[p + 1])
        patient_id = f"p{p:04d}"
        offset = rng.standard_normal(spec.latent_dim)
        for k in range(_sample_count(rng, spec.samples_per_patient)):
            sample_id = f"{patient_id}s{k:02d}"
            z = PATIENT_MIX * offset + PATIENT_MIX * rng.standard_normal(spec.latent_dim)
            score = float(w @ z)
            p_label = _sigmoid(spec.label_sharpness * score)
            label = int(rng.uniform() < p_label)
            missing: list[str] = []
            for src in catalog:
                model = spec.sources[src.id]
                vector = model.informativeness * (projections[src.id] @ z)
                vector = vector + model.noise_sd * rng.standard_normal(src.dim)
                if rng.uniform() < model.missing_rate:
                    missing.append(src.id)
                else:
                    store.add(
                        EmbeddingBlock(
                            sample_id=sample_id, source_id=src.id, vector=vector
                        )
                    )
            samples.append(
                LabeledSample(sample_id, patient_id, float(k), spec.task_id, label)
            )
            truths.append(
                SampleTruth(
                    sample_id=sample_id,
                    patient_id=patient_id,
                    z=z,
                    score=score,
                    p_label=p_label,
                    label=label,
                    missing=tuple(missing),
                )
            )
    truth = CohortTruth(
        label_weights=w, projections=projections, active_dims=active, samples=truths
    )
    return store, samples, truth


def generate_raw_timeseries(
    spec: CohortSpec, catalog: SourceCatalog
) -> list[PatientRecord]:
    """Emit raw event records whose trends carry the label signal.

    Each sample becomes one record. Every rostered signal of a timeseries
    source gets a random walk with drift on irregular sorted timestamps;
    the drift is the source's fixed ``drift`` when set, otherwise
    informativeness * (w.z) so the fitted slope tracks the label odds.
    Tabular sources get per-field noisy linear readouts of z. With
    noise_sd = 0 a series is exactly linear in its timestamps.
    """
    _check_spec(spec, catalog)
    ts_sources = [s for s in catalog if s.modality == "timeseries" and s.signals]
    if not ts_sources:
        raise SpecError("catalog has no timeseries source with a signal roster")
    tab_sources = [s for s in catalog if s.modality == "tabular"]

    streams = np.random.SeedSequence(spec.seed).spawn(spec.n_patients + 1)
    params = np.random.default_rng(streams[0])
    w = _label_weights(params, spec.latent_dim)
    field_weights: dict[tuple[str, str], np.ndarray] = {}
    for src in tab_sources:
        for name in src.signals:
            field_weights[(src.id, name)] = params.standard_normal(
                spec.latent_dim
            ) / math.sqrt(spec.latent_dim)

    gaps_per_series = SERIES_POINTS - 1
    records: list[PatientRecord] = []
    for p in range(spec.n_patients):
        rng = np.random.default_rng(streams[p + 1])
        patient_id = f"p{p:04d}"
        offset = rng.standard_normal(spec.latent_dim)
        for k in range(_sample_count(rng, spec.samples_per_patient)):
            z = PATIENT_MIX * offset + PATIENT_MIX * rng.standard_normal(spec.latent_dim)
            score = float(w @ z)
            streams_out: dict[str, list[tuple[float, float]]] = {}
            for src in ts_sources:
                model = spec.sources[src.id]
                drift = model.drift
                if drift is None:
                    drift = model.informativeness * score
                for name in src.signals:
                    gaps = rng.choice(GAP_CHOICES, size=gaps_per_series)
                    times = np.concatenate(([0.0], np.cumsum(gaps)))
                    baseline = float(rng.integers(-4, 5))
                    steps = model.noise_sd * np.sqrt(gaps) * rng.standard_normal(
                        gaps_per_series
                    )
                    walk = np.concatenate(([0.0], np.cumsum(steps)))
                    values = baseline + drift * times + walk
                    streams_out[name] = list(
                        zip(times.tolist(), values.tolist())
                    )
            fields: dict[str, float] = {}
            for src in tab_sources:
                model = spec.sources[src.id]
                for name in src.signals:
                    coef = field_weights[(src.id, name)]
                    noise = model.noise_sd * rng.standard_normal()
                    fields[name] = model.informativeness * float(coef @ z) + noise
            records.append(
                PatientRecord(
                    patient_id=patient_id,
                    admission_id=f"{patient_id}s{k:02d}",
                    admit_time=0.0,
                    tabular_fields=fields,
                    event_streams=streams_out,
                )
            )
    return records
