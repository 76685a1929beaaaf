import csv
import json
import subprocess
import sys

import pytest

from fusebench.cli import main
from fusebench.harness import ResultsStore
from fusebench.learner import GbdtHyperparams
from fusebench.record_store import (
    PatientRecord,
    read_samples_jsonl,
    write_records_jsonl,
)

CATALOG = [
    {"id": "alpha", "modality": "tabular", "dim": 2},
    {"id": "beta", "modality": "text", "dim": 2},
    {"id": "gamma", "modality": "image", "dim": 2},
]

CONFIG = {
    "paths": {
        "catalog": "catalog.json",
        "blocks": "blocks",
        "samples": "samples.jsonl",
        "results": "results.jsonl",
        "reports": "reports",
    },
    "tasks": ["demo"],
    "repeats": 2,
    "grid": [{"max_depth": 2, "n_estimators": 10, "learning_rate": 0.3}],
    "seed": 0,
    "parallelism": 1,
    "sweep": {"rates": [0.0, 1.0], "seed": 1},
    "synth": {
        "n_patients": 40,
        "samples_per_patient": 2,
        "latent_dim": 3,
        "label_sharpness": 3.0,
        "task_id": "demo",
        "seed": 3,
        "sources": {
            "alpha": {"noise_sd": 0.5},
            "beta": {"noise_sd": 0.5},
            "gamma": {"noise_sd": 0.5},
        },
    },
}


def _write_workspace(root, config=CONFIG, catalog=CATALOG):
    (root / "catalog.json").write_text(json.dumps(catalog))
    (root / "config.json").write_text(json.dumps(config))
    return root / "config.json"


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """A workspace where synth and matrix have already completed."""
    root = tmp_path_factory.mktemp("cli-pipeline")
    cfg = _write_workspace(root)
    assert main(["synth", "--config", str(cfg)]) == 0
    assert main(["matrix", "--config", str(cfg)]) == 0
    return root


# -- usage and config errors ---------------------------------------------------


def test_usage_exit_codes(tmp_path, capsys):
    assert main([]) == 64
    assert main(["frobnicate", "--config", "x"]) == 64
    assert main(["matrix"]) == 64
    assert main(["matrix", "--config", "x", "--format", "tsv"]) == 64
    assert main(["matrix", "--config", "x", "--parallelism", "many"]) == 64
    err = capsys.readouterr().err
    assert "error:" in err


def test_missing_config_is_a_validation_error(tmp_path, capsys):
    assert main(["validate", "--config", str(tmp_path / "none.json")]) == 1
    assert "does not exist" in capsys.readouterr().err


def test_unknown_config_key_rejected(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"typo_key": 1}))
    assert main(["validate", "--config", str(path)]) == 1
    assert "typo_key" in capsys.readouterr().err


def test_bad_grid_entry_rejected(tmp_path, capsys):
    cfg = dict(CONFIG, grid=[{"depth": 3}])
    path = _write_workspace(tmp_path, cfg)
    assert main(["validate", "--config", str(path)]) == 1
    assert "grid entry 0" in capsys.readouterr().err


def test_malformed_config_json(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text("{not json")
    assert main(["validate", "--config", str(path)]) == 1
    assert "malformed" in capsys.readouterr().err


# -- synth ----------------------------------------------------------------------


def test_synth_writes_blocks_and_samples(tmp_path):
    cfg = _write_workspace(tmp_path)
    assert main(["synth", "--config", str(cfg)]) == 0
    for sid in ("alpha", "beta", "gamma"):
        assert (tmp_path / "blocks" / f"{sid}.jsonl").is_file()
    samples = read_samples_jsonl(tmp_path / "samples.jsonl")
    assert len(samples) == 80
    assert {s.task_id for s in samples} == {"demo"}


def test_synth_is_byte_reproducible(tmp_path):
    cfg = _write_workspace(tmp_path)
    assert main(["synth", "--config", str(cfg)]) == 0
    first = {
        p.name: p.read_bytes() for p in (tmp_path / "blocks").iterdir()
    }
    first["samples"] = (tmp_path / "samples.jsonl").read_bytes()
    assert main(["synth", "--config", str(cfg)]) == 0
    again = {
        p.name: p.read_bytes() for p in (tmp_path / "blocks").iterdir()
    }
    again["samples"] = (tmp_path / "samples.jsonl").read_bytes()
    assert first == again


def test_synth_without_section_fails(tmp_path, capsys):
    cfg = {k: v for k, v in CONFIG.items() if k != "synth"}
    path = _write_workspace(tmp_path, cfg)
    assert main(["synth", "--config", str(path)]) == 1
    assert "synth" in capsys.readouterr().err


# -- validate ---------------------------------------------------------------------


def test_validate_reports_and_never_writes(pipeline, capsys):
    cfg = pipeline / "config.json"
    results = pipeline / "results.jsonl"
    before = results.read_bytes()
    assert main(["validate", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "catalog: 3 sources, total dim 6" in out
    assert "samples: 80" in out
    assert results.read_bytes() == before


def test_validate_absent_results_is_fine(tmp_path, capsys):
    cfg = _write_workspace(tmp_path)
    assert main(["synth", "--config", str(cfg)]) == 0
    assert main(["validate", "--config", str(cfg)]) == 0
    assert "absent" in capsys.readouterr().out
    assert not (tmp_path / "results.jsonl").exists()


def test_validate_names_bad_dimension(tmp_path, capsys):
    cfg = _write_workspace(tmp_path)
    assert main(["synth", "--config", str(cfg)]) == 0
    bad = tmp_path / "blocks" / "alpha.jsonl"
    lines = bad.read_text().splitlines()
    rec = json.loads(lines[0])
    rec["vector"] = [1.0, 2.0, 3.0]
    lines[0] = json.dumps(rec)
    bad.write_text("\n".join(lines) + "\n")
    assert main(["validate", "--config", str(cfg)]) == 1
    err = capsys.readouterr().err
    assert "alpha" in err and "length 3" in err


# -- matrix -----------------------------------------------------------------------


def test_matrix_complete_then_idempotent(pipeline, capsys):
    cfg = pipeline / "config.json"
    store = ResultsStore(pipeline / "results.jsonl")
    assert len(store.results()) == 7 * 2
    assert not store.failures()
    before = (pipeline / "results.jsonl").read_bytes()
    assert main(["matrix", "--config", str(cfg)]) == 0
    assert "0 new unit(s)" in capsys.readouterr().out
    assert (pipeline / "results.jsonl").read_bytes() == before


def test_matrix_results_env_override(tmp_path, monkeypatch):
    cfg = _write_workspace(tmp_path)
    assert main(["synth", "--config", str(cfg)]) == 0
    alt = tmp_path / "elsewhere" / "alt.jsonl"
    monkeypatch.setenv("FUSEBENCH_RESULTS", str(alt))
    assert main(["matrix", "--config", str(cfg)]) == 0
    assert alt.is_file()
    assert len(ResultsStore(alt).results()) == 14
    assert not (tmp_path / "results.jsonl").exists()


def test_matrix_unknown_task_flag(pipeline, capsys):
    cfg = pipeline / "config.json"
    assert main(["matrix", "--config", str(cfg), "--task", "ghost"]) == 1
    assert "ghost" in capsys.readouterr().err


# -- report -----------------------------------------------------------------------


def test_report_emits_grid_delta_roc(pipeline):
    cfg = pipeline / "config.json"
    assert main(["report", "--config", str(cfg)]) == 0
    reports = pipeline / "reports"
    for name in (
        "grid_demo.csv",
        "grid_long_demo.csv",
        "delta_demo.csv",
        "roc_demo.csv",
    ):
        assert (reports / name).is_file(), name
    with open(reports / "grid_long_demo.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert {(r["n_modalities"], r["n_sources"]) for r in rows} == {
        ("1", "1"),
        ("2", "2"),
        ("3", "3"),
    }
    with open(reports / "roc_demo.csv") as fh:
        roc = list(csv.DictReader(fh))
    assert roc[0]["fpr"] == "0.0" and roc[-1]["tpr"] == "1.0"


def test_report_jsonl_format(pipeline):
    cfg = pipeline / "config.json"
    assert main(["report", "--config", str(cfg), "--format", "jsonl"]) == 0
    grid_path = pipeline / "reports" / "grid_demo.jsonl"
    rows = [json.loads(s) for s in grid_path.read_text().splitlines()]
    assert all(0.0 <= r["mean_auroc"] <= 1.0 for r in rows)
    delta_path = pipeline / "reports" / "delta_demo.jsonl"
    rows = [json.loads(s) for s in delta_path.read_text().splitlines()]
    assert all("mean_delta_pct" in r for r in rows)


def test_report_without_store(tmp_path, capsys):
    cfg = _write_workspace(tmp_path)
    assert main(["synth", "--config", str(cfg)]) == 0
    assert main(["report", "--config", str(cfg)]) == 1
    assert "does not exist" in capsys.readouterr().err


# -- shapley ----------------------------------------------------------------------


def test_shapley_outputs(pipeline):
    cfg = pipeline / "config.json"
    assert main(["shapley", "--config", str(cfg)]) == 0
    reports = pipeline / "reports"
    payload = json.loads((reports / "shapley_demo.json").read_text())
    assert set(payload["per_source"]) == {"alpha", "beta", "gamma"}
    assert abs(payload["efficiency_residual"]) < 1e-9
    assert payload["empty_value"] == 0.5
    total = sum(payload["per_source"].values())
    assert total == pytest.approx(payload["full_value"] - 0.5, abs=1e-9)
    assert sum(payload["per_modality_additive"].values()) == pytest.approx(
        total, abs=1e-9
    )
    for name in (
        "waterfall_sources_demo.csv",
        "waterfall_modalities_demo.csv",
        "waterfall_modality_game_demo.csv",
    ):
        assert (reports / name).is_file(), name
    with open(reports / "waterfall_sources_demo.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert float(rows[-1]["cumulative"]) == pytest.approx(
        payload["full_value"], abs=1e-9
    )


def test_shapley_incomplete_store_lists_missing(tmp_path, capsys):
    cfg = _write_workspace(tmp_path)
    store = ResultsStore(tmp_path / "results.jsonl")
    from fusebench.harness import ExperimentRecord

    store.add_result(
        ExperimentRecord(
            task_id="demo",
            subset_id="alpha",
            repeat=0,
            seed=0,
            hyperparams=GbdtHyperparams(),
            test_auroc=0.7,
            n_train=10,
            n_test=5,
        )
    )
    assert main(["shapley", "--config", str(cfg)]) == 1
    err = capsys.readouterr().err
    assert "beta" in err and "lacks" in err


# -- sweep ------------------------------------------------------------------------


def test_sweep_endpoints(pipeline):
    cfg = pipeline / "config.json"
    assert main(["sweep", "--config", str(cfg)]) == 0
    with open(pipeline / "reports" / "sweep_demo.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 * 2  # two rates, two repeats
    full_mask = [r for r in rows if r["rate"] == "1.0"]
    assert all(float(r["auroc"]) == 0.5 for r in full_mask)


# -- ingest and featurize -----------------------------------------------------------


def test_ingest_counts(pipeline, capsys):
    cfg = pipeline / "config.json"
    assert main(["ingest", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "240 blocks for 80 samples" in out
    assert "alpha: 80 blocks (dim 2)" in out


def test_featurize_writes_block_files(tmp_path, capsys):
    catalog = [
        {
            "id": "tab",
            "modality": "tabular",
            "dim": 2,
            "signals": ["age", "weight"],
        },
        {"id": "ts", "modality": "timeseries", "dim": 11, "signals": ["hr"]},
    ]
    config = {
        "paths": {
            "catalog": "catalog.json",
            "blocks": "blocks",
            "samples": "samples.jsonl",
            "records": "records.jsonl",
            "results": "results.jsonl",
        },
    }
    cfg = _write_workspace(tmp_path, config, catalog)
    records = [
        PatientRecord(
            patient_id="p1",
            admission_id="p1a1",
            admit_time=0.0,
            tabular_fields={"age": 61.0, "weight": 70.5},
            event_streams={"hr": [(0.0, 80.0), (1.0, 90.0), (2.0, 85.0)]},
            image_events=[(1.0, "img-1"), (2.0, "img-2")],
        )
    ]
    write_records_jsonl(records, tmp_path / "records.jsonl")
    assert main(["featurize", "--config", str(cfg)]) == 0
    for sid in ("tab", "ts"):
        path = tmp_path / "blocks" / f"{sid}.jsonl"
        assert path.is_file()
        rows = [json.loads(s) for s in path.read_text().splitlines()]
        assert {r["sample_id"] for r in rows} == {"p1a1-s0", "p1a1-s1"}
    assert main(["ingest", "--config", str(cfg)]) == 0


def test_featurize_without_records(tmp_path, capsys):
    cfg = _write_workspace(tmp_path)
    assert main(["featurize", "--config", str(cfg)]) == 1
    assert "records" in capsys.readouterr().err


# -- console entry point -------------------------------------------------------------


def test_module_invocation_subprocess(pipeline):
    proc = subprocess.run(
        [
            sys.executable,
            "-m",
            "fusebench.cli",
            "validate",
            "--config",
            str(pipeline / "config.json"),
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "config: ok" in proc.stdout


def test_help_exits_zero():
    assert main(["--help"]) == 0
