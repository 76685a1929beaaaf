import math

import numpy as np
import pytest

from fusebench.errors import SpecError
from fusebench.evaluation import auroc
from fusebench.featurization import featurize_timeseries_signal
from fusebench.record_store import SourceCatalog, SourceSpec
from fusebench.synthetic import (
    CohortSpec,
    SourceModel,
    generate_cohort,
    generate_raw_timeseries,
)


def _catalog():
    return SourceCatalog(
        [
            SourceSpec("tab", "tabular", 2, ("age", "weight")),
            SourceSpec("vit", "timeseries", 22, ("hr", "rr")),
            SourceSpec("txt", "text", 4),
        ]
    )


def _models(**overrides):
    base = {
        "tab": SourceModel(dim=2),
        "vit": SourceModel(dim=22),
        "txt": SourceModel(dim=4),
    }
    base.update(overrides)
    return base


def _spec(**overrides):
    kw = dict(
        n_patients=8,
        samples_per_patient=2,
        latent_dim=4,
        sources=_models(),
        label_sharpness=2.0,
        seed=11,
    )
    kw.update(overrides)
    return CohortSpec(**kw)


# -- spec validation ---------------------------------------------------------


@pytest.mark.parametrize(
    "spec",
    [
        _spec(n_patients=0),
        _spec(latent_dim=0),
        _spec(label_sharpness=-1.0),
        _spec(label_sharpness=math.inf),
        _spec(samples_per_patient=0),
        _spec(samples_per_patient=(3, 2)),
        _spec(samples_per_patient=(0, 2)),
        _spec(sources={"tab": SourceModel(dim=2), "vit": SourceModel(dim=22)}),
        _spec(sources=_models(txt=SourceModel(dim=5))),
        _spec(sources=_models(txt=SourceModel(dim=4, missing_rate=1.5))),
        _spec(sources=_models(txt=SourceModel(dim=4, noise_sd=-0.1))),
        _spec(sources=_models(txt=SourceModel(dim=4, sparsity=0.0))),
        _spec(sources=_models(txt=SourceModel(dim=4, latent_dims=()))),
        _spec(sources=_models(txt=SourceModel(dim=4, latent_dims=(0, 0)))),
        _spec(sources=_models(txt=SourceModel(dim=4, latent_dims=(7,)))),
        _spec(sources=_models(txt=SourceModel(dim=4, drift=math.nan))),
    ],
)
def test_bad_specs_rejected(spec):
    with pytest.raises(SpecError):
        generate_cohort(spec, _catalog())


def test_unknown_source_model_rejected():
    models = _models()
    models["ghost"] = SourceModel(dim=1)
    with pytest.raises(SpecError):
        generate_cohort(_spec(sources=models), _catalog())


# -- cohort generation -------------------------------------------------------


def test_same_seed_identical_cohort():
    cat = _catalog()
    store1, samples1, truth1 = generate_cohort(_spec(), cat)
    store2, samples2, truth2 = generate_cohort(_spec(), cat)
    assert store1 == store2
    assert samples1 == samples2
    assert np.array_equal(truth1.label_weights, truth2.label_weights)
    for a, b in zip(truth1.samples, truth2.samples):
        assert a.sample_id == b.sample_id
        assert np.array_equal(a.z, b.z)
        assert a.label == b.label


def test_different_seed_differs():
    cat = _catalog()
    store1, _, _ = generate_cohort(_spec(seed=1), cat)
    store2, _, _ = generate_cohort(_spec(seed=2), cat)
    assert store1 != store2


def test_counts_and_ids():
    store, samples, truth = generate_cohort(_spec(n_patients=5, samples_per_patient=3), _catalog())
    assert len(samples) == 15
    assert len({s.sample_id for s in samples}) == 15
    assert len({s.patient_id for s in samples}) == 5
    assert len(truth.samples) == 15


def test_ranged_samples_per_patient():
    _, samples, _ = generate_cohort(
        _spec(n_patients=40, samples_per_patient=(1, 4)), _catalog()
    )
    per_patient: dict[str, int] = {}
    for s in samples:
        per_patient[s.patient_id] = per_patient.get(s.patient_id, 0) + 1
    counts = set(per_patient.values())
    assert counts <= {1, 2, 3, 4}
    assert len(counts) > 1  # the range is actually exercised


def test_block_dims_match_catalog():
    cat = _catalog()
    store, samples, _ = generate_cohort(_spec(), cat)
    for s in samples:
        for src in cat:
            block = store.get(s.sample_id, src.id)
            assert block.present
            assert block.vector.shape == (src.dim,)


def test_truth_recomputes_label_odds():
    spec = _spec()
    _, samples, truth = generate_cohort(spec, _catalog())
    labels = {s.sample_id: s.label for s in samples}
    for t in truth.samples:
        assert t.score == pytest.approx(float(truth.label_weights @ t.z), abs=0)
        expected = 1.0 / (1.0 + math.exp(-spec.label_sharpness * t.score))
        assert t.p_label == pytest.approx(expected, rel=1e-12)
        assert t.label == labels[t.sample_id]


def test_zero_sharpness_gives_even_odds():
    _, _, truth = generate_cohort(_spec(label_sharpness=0.0), _catalog())
    assert all(t.p_label == 0.5 for t in truth.samples)


def test_noise_free_source_recomputable_from_truth():
    models = _models(txt=SourceModel(dim=4, noise_sd=0.0))
    store, _, truth = generate_cohort(_spec(sources=models), _catalog())
    proj = truth.projections["txt"]
    for t in truth.samples:
        stored = store.get(t.sample_id, "txt").vector
        assert np.array_equal(stored, 1.0 * (proj @ t.z))


def test_latent_dims_confine_projection():
    models = _models(txt=SourceModel(dim=4, latent_dims=(1, 3)))
    _, _, truth = generate_cohort(_spec(sources=models), _catalog())
    proj = truth.projections["txt"]
    assert truth.active_dims["txt"] == (1, 3)
    assert np.all(proj[:, [0, 2]] == 0.0)
    assert np.any(proj[:, [1, 3]] != 0.0)


def test_missing_rate_one_drops_every_block():
    models = _models(txt=SourceModel(dim=4, missing_rate=1.0))
    store, samples, truth = generate_cohort(_spec(sources=models), _catalog())
    for s in samples:
        assert not store.has(s.sample_id, "txt")
        assert store.has(s.sample_id, "tab")
    assert all("txt" in t.missing for t in truth.samples)


def test_missingness_leaves_kept_blocks_unchanged():
    cat = _catalog()
    full, samples, _ = generate_cohort(_spec(), cat)
    models = _models(vit=SourceModel(dim=22, missing_rate=0.5))
    partial, _, _ = generate_cohort(_spec(sources=models), cat)
    dropped = 0
    for s in samples:
        for src in cat:
            if partial.has(s.sample_id, src.id):
                assert np.array_equal(
                    partial.get(s.sample_id, src.id).vector,
                    full.get(s.sample_id, src.id).vector,
                )
            else:
                dropped += 1
    assert dropped > 0


def test_patient_offset_correlates_samples():
    _, _, truth = generate_cohort(
        _spec(n_patients=200, samples_per_patient=2, seed=3), _catalog()
    )
    by_patient: dict[str, list[float]] = {}
    for t in truth.samples:
        by_patient.setdefault(t.patient_id, []).append(t.score)
    pairs = np.array([v for v in by_patient.values() if len(v) == 2])
    r = np.corrcoef(pairs[:, 0], pairs[:, 1])[0, 1]
    assert r > 0.3  # shared offset carries half the latent variance


def test_uninformative_source_is_pure_noise():
    models = _models(txt=SourceModel(dim=4, informativeness=0.0))
    store, _, truth = generate_cohort(
        _spec(n_patients=500, samples_per_patient=1, sources=models, seed=9),
        _catalog(),
    )
    xs = np.array([store.get(t.sample_id, "txt").vector[0] for t in truth.samples])
    scores = np.array([t.score for t in truth.samples])
    r = np.corrcoef(xs, scores)[0, 1]
    assert abs(r) < 0.1


def test_sharp_noise_free_cohort_is_separable():
    models = _models(txt=SourceModel(dim=4, noise_sd=0.0))
    _, samples, truth = generate_cohort(
        _spec(
            n_patients=300,
            samples_per_patient=1,
            sources=models,
            label_sharpness=50.0,
            seed=21,
        ),
        _catalog(),
    )
    scores = np.array([t.score for t in truth.samples])
    labels = np.array([s.label for s in samples])
    assert auroc(scores, labels) > 0.99


# -- raw timeseries records --------------------------------------------------


def test_raw_records_deterministic():
    cat = _catalog()
    recs1 = generate_raw_timeseries(_spec(), cat)
    recs2 = generate_raw_timeseries(_spec(), cat)
    assert recs1 == recs2


def test_raw_records_shape():
    cat = _catalog()
    recs = generate_raw_timeseries(_spec(n_patients=6, samples_per_patient=2), cat)
    assert len(recs) == 12
    gap_pool = set()
    for rec in recs:
        assert set(rec.event_streams) == {"hr", "rr"}
        assert set(rec.tabular_fields) == {"age", "weight"}
        for stream in rec.event_streams.values():
            times = [t for t, _ in stream]
            assert len(times) == 8
            assert times[0] == 0.0
            gaps = np.diff(times)
            assert np.all(gaps > 0)
            gap_pool.update(np.round(gaps, 6).tolist())
    assert len(gap_pool) > 1  # irregular spacing


def test_raw_zero_drift_slope_mean_near_zero():
    models = _models(vit=SourceModel(dim=22, drift=0.0, noise_sd=1.0))
    recs = generate_raw_timeseries(
        _spec(n_patients=200, samples_per_patient=1, sources=models, seed=5),
        _catalog(),
    )
    slopes = [
        featurize_timeseries_signal(rec.event_streams[name]).slope
        for rec in recs
        for name in ("hr", "rr")
    ]
    slopes = np.array(slopes)
    se = slopes.std(ddof=1) / math.sqrt(slopes.size)
    assert abs(slopes.mean()) < 3 * se


def test_raw_fixed_drift_noise_free_slope_exact():
    models = _models(vit=SourceModel(dim=22, drift=0.25, noise_sd=0.0))
    recs = generate_raw_timeseries(
        _spec(n_patients=20, samples_per_patient=2, sources=models), _catalog()
    )
    for rec in recs:
        for name in ("hr", "rr"):
            stats = featurize_timeseries_signal(rec.event_streams[name])
            assert stats.slope == 0.25


def test_raw_latent_drift_varies_by_sample():
    recs = generate_raw_timeseries(
        _spec(n_patients=30, samples_per_patient=1), _catalog()
    )
    slopes = {
        round(featurize_timeseries_signal(rec.event_streams["hr"]).slope, 9)
        for rec in recs
    }
    assert len(slopes) > 1


def test_raw_requires_timeseries_source():
    cat = SourceCatalog([SourceSpec("txt", "text", 4)])
    spec = CohortSpec(
        n_patients=2,
        samples_per_patient=1,
        latent_dim=2,
        sources={"txt": SourceModel(dim=4)},
        seed=0,
    )
    with pytest.raises(SpecError):
        generate_raw_timeseries(spec, cat)
