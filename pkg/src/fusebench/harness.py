"""Exhaustive source-subset experiment matrix with resumable results.

The matrix is the cross product (task, non-empty source subset, repeat).
Each unit trains and evaluates one model; results land in an append-only
JSON-lines store keyed by (task, subset, repeat), so an interrupted run
picks up exactly where it stopped and a parallel run produces the same
sealed store as a serial one. Reports aggregate the store into the
modality-by-source-count grids and the percent-change-vs-singles view.
"""

from __future__ import annotations

import hashlib
import json
import math
import multiprocessing
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyStoreError,
    MissingBaselineError,
    ParseError,
    ValidationError,
)
from .evaluation import FittedRepeat, fit_repeat, summarize
from .featurization import apply_normalizer, canonical_sources, fusion_matrix
from .record_store import BlockStore, LabeledSample, SourceCatalog


# -- subset enumeration ------------------------------------------------------


@dataclass(frozen=True)
class SubsetDescriptor:
    """One non-empty source combination, canonically identified."""

    subset_id: str
    bitmask: int
    source_ids: tuple[str, ...]
    n_sources: int
    n_modalities: int


def subset_id_for(source_ids: Iterable[str]) -> str:
    return "+".join(sorted(source_ids))


def enumerate_subsets(
    catalog: SourceCatalog, excluded: Iterable[str] = ()
) -> list[SubsetDescriptor]:
    """All 2^k - 1 non-empty subsets of the non-excluded sources.

    Order is ascending bitmask, where bit i is the catalog position of a
    source; the modality count is the number of distinct modalities the
    subset actually touches.
    """
    excluded = set(excluded)
    for sid in excluded:
        catalog.spec(sid)  # raises UnknownSourceError for stray ids
    all_sources = catalog.sources
    included_bits = [
        i for i, s in enumerate(all_sources) if s.id not in excluded
    ]
    subsets: list[SubsetDescriptor] = []
    for inner in range(1, 1 << len(included_bits)):
        mask = 0
        ids = []
        modalities = set()
        for j, bit in enumerate(included_bits):
            if inner >> j & 1:
                mask |= 1 << bit
                ids.append(all_sources[bit].id)
                modalities.add(all_sources[bit].modality)
        subsets.append(
            SubsetDescriptor(
                subset_id=subset_id_for(ids),
                bitmask=mask,
                source_ids=tuple(ids),
                n_sources=len(ids),
                n_modalities=len(modalities),
            )
        )
    subsets.sort(key=lambda d: d.bitmask)
    return subsets


def modality_count_totals(subsets: Sequence[SubsetDescriptor]) -> dict[int, int]:
    """How many subsets cover exactly m modalities, for each m."""
    totals: dict[int, int] = {}
    for d in subsets:
        totals[d.n_modalities] = totals.get(d.n_modalities, 0) + 1
    return totals


# -- results store -----------------------------------------------------------


@dataclass(frozen=True)
class ExperimentRecord:
    task_id: str
    subset_id: str
    repeat: int
    seed: int
    hyperparams: "object"  # GbdtHyperparams
    test_auroc: float
    n_train: int
    n_test: int
    wall_time: float = 0.0  # informational; never part of store identity


@dataclass(frozen=True)
class FailureRecord:
    task_id: str
    subset_id: str
    repeat: int
    error: str
    message: str


def _record_key(task_id: str, subset_id: str, repeat: int) -> str:
    return f"{task_id}|{subset_id}|{repeat}"


def _record_to_json(rec: ExperimentRecord) -> str:
    hp = rec.hyperparams
    return json.dumps(
        {
            "kind": "result",
            "task_id": rec.task_id,
            "subset_id": rec.subset_id,
            "repeat": rec.repeat,
            "seed": rec.seed,
            "hyperparams": {
                "max_depth": hp.max_depth,
                "n_estimators": hp.n_estimators,
                "learning_rate": hp.learning_rate,
                "l2_leaf_reg": hp.l2_leaf_reg,
                "min_child_weight": hp.min_child_weight,
            },
            "test_auroc": rec.test_auroc,
            "n_train": rec.n_train,
            "n_test": rec.n_test,
        },
        sort_keys=True,
    )


def _failure_to_json(rec: FailureRecord) -> str:
    return json.dumps(
        {
            "kind": "failure",
            "task_id": rec.task_id,
            "subset_id": rec.subset_id,
            "repeat": rec.repeat,
            "error": rec.error,
            "message": rec.message,
        },
        sort_keys=True,
    )


def _line_to_entry(line: str):
    obj = json.loads(line)
    kind = obj.get("kind")
    if kind == "result":
        from .learner import GbdtHyperparams

        hp = obj["hyperparams"]
        return ExperimentRecord(
            task_id=obj["task_id"],
            subset_id=obj["subset_id"],
            repeat=int(obj["repeat"]),
            seed=int(obj["seed"]),
            hyperparams=GbdtHyperparams(
                max_depth=int(hp["max_depth"]),
                n_estimators=int(hp["n_estimators"]),
                learning_rate=float(hp["learning_rate"]),
                l2_leaf_reg=float(hp["l2_leaf_reg"]),
                min_child_weight=float(hp["min_child_weight"]),
            ),
            test_auroc=float(obj["test_auroc"]),
            n_train=int(obj["n_train"]),
            n_test=int(obj["n_test"]),
        )
    if kind == "failure":
        return FailureRecord(
            task_id=obj["task_id"],
            subset_id=obj["subset_id"],
            repeat=int(obj["repeat"]),
            error=obj["error"],
            message=obj["message"],
        )
    raise ParseError(f"unknown record kind {kind!r}")


class ResultsStore:
    """Append-only JSON-lines store of experiment results and failures.

    The data file is the source of truth. Opening scans it, drops a
    half-written trailing line (the normal aftermath of a killed run),
    and rebuilds the sidecar key index used for fast resumption checks.
    Wall-clock timings go to a separate sidecar so the data file stays a
    pure function of the experiment configuration.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.keys_path = self.path.with_suffix(self.path.suffix + ".keys")
        self.timings_path = self.path.with_suffix(self.path.suffix + ".timings")
        self._entries: list[ExperimentRecord | FailureRecord] = []
        self._keys: set[str] = set()
        self._load()

    def _load(self) -> None:
        if not self.path.exists():
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.touch()
            self._rewrite_keys()
            return
        raw = self.path.read_bytes()
        good_end = 0
        for line in raw.splitlines(keepends=True):
            if not line.endswith(b"\n"):
                break  # half-written tail from an interrupted append
            text = line.decode("utf-8").strip()
            if text:
                entry = _line_to_entry(text)
                key = _record_key(entry.task_id, entry.subset_id, entry.repeat)
                if key in self._keys:
                    raise ValidationError(f"duplicate record key {key}")
                self._keys.add(key)
                self._entries.append(entry)
            good_end += len(line)
        if good_end != len(raw):
            with open(self.path, "r+b") as fh:
                fh.truncate(good_end)
        self._rewrite_keys()

    def _rewrite_keys(self) -> None:
        tmp = self.keys_path.with_suffix(".tmp")
        with open(tmp, "w") as fh:
            for key in sorted(self._keys):
                fh.write(key + "\n")
        os.replace(tmp, self.keys_path)

    def has(self, task_id: str, subset_id: str, repeat: int) -> bool:
        return _record_key(task_id, subset_id, repeat) in self._keys

    def _append(self, entry: ExperimentRecord | FailureRecord, line: str) -> None:
        key = _record_key(entry.task_id, entry.subset_id, entry.repeat)
        if key in self._keys:
            raise ValidationError(f"duplicate record key {key}")
        with open(self.path, "a") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        with open(self.keys_path, "a") as fh:
            fh.write(key + "\n")
        self._keys.add(key)
        self._entries.append(entry)

    def add_result(self, rec: ExperimentRecord) -> None:
        self._append(rec, _record_to_json(rec))
        if rec.wall_time:
            self.record_timing(
                _record_key(rec.task_id, rec.subset_id, rec.repeat), rec.wall_time
            )

    def add_failure(self, rec: FailureRecord) -> None:
        self._append(rec, _failure_to_json(rec))

    def record_timing(self, key: str, seconds: float) -> None:
        with open(self.timings_path, "a") as fh:
            fh.write(f"{key}\t{seconds!r}\n")

    def results(self, task_id: str | None = None) -> list[ExperimentRecord]:
        return [
            e
            for e in self._entries
            if isinstance(e, ExperimentRecord)
            and (task_id is None or e.task_id == task_id)
        ]

    def failures(self, task_id: str | None = None) -> list[FailureRecord]:
        return [
            e
            for e in self._entries
            if isinstance(e, FailureRecord)
            and (task_id is None or e.task_id == task_id)
        ]

    def task_ids(self) -> list[str]:
        return sorted({e.task_id for e in self._entries})

    def __len__(self) -> int:
        return len(self._entries)

    def seal(self) -> None:
        """Rewrite the store sorted by key, making the bytes order-free.

        Two runs that completed the same units in different orders (for
        example at different parallelism levels) produce identical files
        after sealing.
        """
        self._entries.sort(key=lambda e: (e.task_id, e.subset_id, e.repeat))
        tmp = self.path.with_suffix(".tmp")
        with open(tmp, "w") as fh:
            for entry in self._entries:
                if isinstance(entry, ExperimentRecord):
                    fh.write(_record_to_json(entry) + "\n")
                else:
                    fh.write(_failure_to_json(entry) + "\n")
        os.replace(tmp, self.path)
        self._rewrite_keys()


# -- matrix runner -----------------------------------------------------------


def task_base_seed(base_seed: int, task_id: str) -> int:
    """Stable per-task seed; every subset of a task shares its split series."""
    digest = hashlib.blake2b(
        f"{base_seed}:{task_id}".encode(), digest_size=4
    ).digest()
    return int.from_bytes(digest, "big")


@dataclass(frozen=True)
class _MatrixJob:
    task_id: str
    subset: SubsetDescriptor
    repeats_needed: tuple[int, ...]
    base_seed: int
    test_fraction: float


# Worker context inherited by forked processes; set only inside run_matrix.
_JOB_CONTEXT: dict = {}


def _run_job(job: _MatrixJob) -> list:
    blocks = _JOB_CONTEXT["blocks"]
    catalog = _JOB_CONTEXT["catalog"]
    grid = _JOB_CONTEXT["grid"]
    samples = _JOB_CONTEXT["samples"][job.task_id]
    ids = [s.sample_id for s in samples]
    out = []
    X = fusion_matrix(blocks, ids, job.subset.source_ids, catalog)
    for repeat in job.repeats_needed:
        start = time.perf_counter()
        try:
            outcome = fit_repeat(
                samples,
                X,
                grid,
                repeat,
                base_seed=job.base_seed,
                test_fraction=job.test_fraction,
            ).outcome
        except Exception as e:  # noqa: BLE001 - converted into a failure row
            out.append(
                FailureRecord(
                    task_id=job.task_id,
                    subset_id=job.subset.subset_id,
                    repeat=repeat,
                    error=type(e).__name__,
                    message=str(e),
                )
            )
            continue
        out.append(
            ExperimentRecord(
                task_id=job.task_id,
                subset_id=job.subset.subset_id,
                repeat=repeat,
                seed=outcome.seed,
                hyperparams=outcome.chosen,
                test_auroc=outcome.test_auroc,
                n_train=outcome.n_train,
                n_test=outcome.n_test,
                wall_time=time.perf_counter() - start,
            )
        )
    return out


def run_matrix(
    blocks: BlockStore,
    samples: Sequence[LabeledSample],
    catalog: SourceCatalog,
    results_path: str | Path,
    *,
    tasks: Sequence[str] | None = None,
    excluded: Iterable[str] = (),
    grid=None,
    repeats: int = 3,
    base_seed: int = 0,
    test_fraction: float = 0.2,
    parallelism: int = 1,
    on_progress=None,
) -> ResultsStore:
    """Train every (task, subset, repeat) unit not already in the store.

    Completed keys are skipped, so rerunning after an interruption only
    does the missing work; the sealed store is identical no matter how
    the run was scheduled or how often it was restarted.
    """
    from . import learner

    if repeats < 1:
        raise ValidationError(f"repeats must be >= 1, got {repeats}")
    if parallelism < 1:
        raise ValidationError(f"parallelism must be >= 1, got {parallelism}")
    if grid is None:
        grid = learner.default_grid()
    store = ResultsStore(results_path)

    by_task: dict[str, list[LabeledSample]] = {}
    for s in samples:
        by_task.setdefault(s.task_id, []).append(s)
    for task_id in by_task:
        by_task[task_id].sort(key=lambda s: s.sample_id)
    if tasks is None:
        tasks = sorted(by_task)
    else:
        for t in tasks:
            if t not in by_task:
                raise ValidationError(f"no samples for task {t!r}")

    subsets = enumerate_subsets(catalog, excluded)
    jobs: list[_MatrixJob] = []
    for task_id in tasks:
        seed = task_base_seed(base_seed, task_id)
        for subset in subsets:
            needed = tuple(
                r
                for r in range(repeats)
                if not store.has(task_id, subset.subset_id, r)
            )
            if needed:
                jobs.append(
                    _MatrixJob(
                        task_id=task_id,
                        subset=subset,
                        repeats_needed=needed,
                        base_seed=seed,
                        test_fraction=test_fraction,
                    )
                )

    _JOB_CONTEXT.update(
        {"blocks": blocks, "catalog": catalog, "grid": grid, "samples": by_task}
    )
    try:
        if parallelism == 1 or len(jobs) <= 1:
            for job in jobs:
                for entry in _run_job(job):
                    _store_entry(store, entry)
                if on_progress is not None:
                    on_progress(job)
        else:
            ctx = multiprocessing.get_context("fork")
            with ctx.Pool(processes=parallelism) as pool:
                for entries in pool.imap_unordered(_run_job, jobs):
                    for entry in entries:
                        _store_entry(store, entry)
                    if on_progress is not None:
                        on_progress(None)
    finally:
        _JOB_CONTEXT.clear()
    store.seal()
    return store


def _store_entry(store: ResultsStore, entry) -> None:
    if isinstance(entry, ExperimentRecord):
        store.add_result(entry)
    else:
        store.add_failure(entry)


# -- reports -----------------------------------------------------------------


@dataclass(frozen=True)
class GridCell:
    n_modalities: int
    n_sources: int
    n_subsets: int
    mean: float
    sd: float


@dataclass(frozen=True)
class GridReport:
    task_id: str
    cells: dict[tuple[int, int], GridCell]
    footer: str = ""


def _subset_means(
    store: ResultsStore, task_id: str
) -> dict[str, float]:
    """Per-subset mean test AUROC over repeats."""
    by_subset: dict[str, list[float]] = {}
    for rec in store.results(task_id):
        by_subset.setdefault(rec.subset_id, []).append(rec.test_auroc)
    return {
        sid: math.fsum(vals) / len(vals) for sid, vals in by_subset.items()
    }


def _subset_shape(subset_id: str, catalog: SourceCatalog) -> tuple[int, int]:
    ids = subset_id.split("+")
    modalities = {catalog.modality(sid) for sid in ids}
    return len(modalities), len(ids)


GRID_FOOTER = (
    "Modality counts use exact cover: a subset counts toward m modalities "
    "when its sources span exactly m distinct modalities. Per-m totals then "
    "satisfy sum over modality choices M of prod_{m in M} (2^size(m) - 1); "
    "for sizes (1,3,3,4) that is 30/288/994/735 (sum 2047). Doubled totals "
    "such as 52/392/972/630 (sum 2046) come from counting modality "
    "selections instead of source subsets and are not used here."
)


def grid_report(
    store: ResultsStore, task_id: str, catalog: SourceCatalog
) -> GridReport:
    """Mean and SD AUROC per (modality count, source count) cell.

    Cell means average repeats into a per-subset value first, then average
    subsets unweighted. Dispersion pools every repeat of every subset in
    the cell (sample SD, n-1), so a single-subset cell reports the spread
    across its repeats.
    """
    by_subset: dict[str, list[float]] = {}
    for rec in store.results(task_id):
        by_subset.setdefault(rec.subset_id, []).append(rec.test_auroc)
    if not by_subset:
        raise EmptyStoreError(f"no results for task {task_id!r}")
    grouped_means: dict[tuple[int, int], list[float]] = {}
    grouped_pool: dict[tuple[int, int], list[float]] = {}
    for sid, vals in by_subset.items():
        key = _subset_shape(sid, catalog)
        grouped_means.setdefault(key, []).append(math.fsum(vals) / len(vals))
        grouped_pool.setdefault(key, []).extend(vals)
    cells: dict[tuple[int, int], GridCell] = {}
    for key in grouped_means:
        means = grouped_means[key]
        pool = grouped_pool[key]
        mean = math.fsum(means) / len(means)
        if len(pool) > 1:
            pool_mean = math.fsum(pool) / len(pool)
            sd = math.sqrt(
                math.fsum((v - pool_mean) ** 2 for v in pool) / (len(pool) - 1)
            )
        else:
            sd = 0.0
        cells[key] = GridCell(
            n_modalities=key[0],
            n_sources=key[1],
            n_subsets=len(means),
            mean=mean,
            sd=sd,
        )
    return GridReport(task_id=task_id, cells=cells, footer=GRID_FOOTER)


@dataclass(frozen=True)
class DeltaCell:
    n_modalities: int
    n_sources: int
    n_subsets: int
    mean_delta_pct: float
    sd_delta_pct: float


@dataclass(frozen=True)
class DeltaReport:
    task_id: str
    baseline: str  # "constituent" or "all-singles"
    per_subset: dict[str, float]
    cells: dict[tuple[int, int], DeltaCell]


def delta_report(
    store: ResultsStore,
    task_id: str,
    catalog: SourceCatalog,
    all_singles: bool = False,
) -> DeltaReport:
    """Percent AUROC change of each multi-source subset vs single sources.

    The default baseline for subset S is the mean AUROC of the
    single-source models of S's own sources; with ``all_singles`` the
    baseline is the mean over every single-source model in the store.
    """
    means = _subset_means(store, task_id)
    if not means:
        raise EmptyStoreError(f"no results for task {task_id!r}")
    singles: dict[str, float] = {
        sid: m for sid, m in means.items() if "+" not in sid
    }
    sources_seen = {s for sid in means for s in sid.split("+")}
    missing = sorted(s for s in sources_seen if s not in singles)
    if missing:
        raise MissingBaselineError(
            f"no single-source baseline for: {', '.join(missing)}"
        )
    if all_singles:
        base_values = list(singles.values())
        global_base = math.fsum(base_values) / len(base_values)
    per_subset: dict[str, float] = {}
    for sid, mean in means.items():
        members = sid.split("+")
        if len(members) < 2:
            continue
        if all_singles:
            base = global_base
        else:
            base = math.fsum(singles[m] for m in members) / len(members)
        per_subset[sid] = 100.0 * (mean - base) / base
    grouped: dict[tuple[int, int], list[float]] = {}
    for sid, delta in per_subset.items():
        grouped.setdefault(_subset_shape(sid, catalog), []).append(delta)
    cells: dict[tuple[int, int], DeltaCell] = {}
    for key, deltas in grouped.items():
        mean = math.fsum(deltas) / len(deltas)
        if len(deltas) > 1:
            sd = math.sqrt(
                math.fsum((v - mean) ** 2 for v in deltas) / (len(deltas) - 1)
            )
        else:
            sd = 0.0
        cells[key] = DeltaCell(
            n_modalities=key[0],
            n_sources=key[1],
            n_subsets=len(deltas),
            mean_delta_pct=mean,
            sd_delta_pct=sd,
        )
    return DeltaReport(
        task_id=task_id,
        baseline="all-singles" if all_singles else "constituent",
        per_subset=per_subset,
        cells=cells,
    )


def write_grid_csv(report: GridReport, path: str | Path) -> None:
    """Wide grid: rows = modality count, columns = source count."""
    mods = sorted({m for m, _ in report.cells})
    srcs = sorted({s for _, s in report.cells})
    with open(path, "w") as fh:
        fh.write("n_modalities\\n_sources," + ",".join(str(s) for s in srcs) + "\n")
        for m in mods:
            row = [str(m)]
            for s in srcs:
                cell = report.cells.get((m, s))
                row.append("" if cell is None else f"{cell.mean!r}|{cell.sd!r}")
            fh.write(",".join(row) + "\n")
        fh.write(f"# {report.footer}\n")


def write_grid_long_csv(report: GridReport, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write("n_modalities,n_sources,n_subsets,mean_auroc,sd_auroc\n")
        for key in sorted(report.cells):
            c = report.cells[key]
            fh.write(
                f"{c.n_modalities},{c.n_sources},{c.n_subsets},"
                f"{c.mean!r},{c.sd!r}\n"
            )


def write_delta_csv(report: DeltaReport, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write("n_modalities,n_sources,n_subsets,mean_delta_pct,sd_delta_pct\n")
        for key in sorted(report.cells):
            c = report.cells[key]
            fh.write(
                f"{c.n_modalities},{c.n_sources},{c.n_subsets},"
                f"{c.mean_delta_pct!r},{c.sd_delta_pct!r}\n"
            )
        fh.write(f"# baseline: {report.baseline}\n")


# -- missingness sweep -------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    rate: float
    repeat: int
    auroc: float


@dataclass(frozen=True)
class SweepReport:
    task_id: str
    rows: list[SweepRow]
    mean_by_rate: dict[float, float]


def _source_column_spans(
    source_ids: Sequence[str], catalog: SourceCatalog
) -> list[tuple[int, int]]:
    spans = []
    offset = 0
    for sid in canonical_sources(source_ids, catalog):
        width = catalog.dim(sid)
        spans.append((offset, offset + width))
        offset += width
    return spans


def missingness_sweep(
    blocks: BlockStore,
    samples: Sequence[LabeledSample],
    catalog: SourceCatalog,
    rates: Sequence[float],
    *,
    excluded: Iterable[str] = (),
    grid=None,
    repeats: int = 3,
    base_seed: int = 0,
    sweep_seed: int = 0,
    test_fraction: float = 0.2,
) -> SweepReport:
    """Test AUROC of full-subset models as source blocks are masked.

    For each repeat a model is trained once on the full included source
    set; for each rate p every (test sample, source) block is zeroed
    independently with probability p before normalization, mirroring how
    a truly absent block enters the pipeline. Rate 0 reproduces the
    unmasked AUROC exactly; rate 1 scores identical all-zero inputs.
    """
    from . import learner
    from .evaluation import auroc as _auroc

    if not rates:
        raise ValidationError("rates must be non-empty")
    for p in rates:
        if not 0.0 <= p <= 1.0:
            raise ValidationError(f"masking rate must be in [0, 1], got {p}")
    if grid is None:
        grid = learner.default_grid()
    excluded = set(excluded)
    source_ids = tuple(s.id for s in catalog if s.id not in excluded)
    task_ids = {s.task_id for s in samples}
    if len(task_ids) != 1:
        raise ValidationError(
            f"sweep expects samples of exactly one task, got {sorted(task_ids)}"
        )
    task_id = next(iter(task_ids))
    ordered = sorted(samples, key=lambda s: s.sample_id)
    ids = [s.sample_id for s in ordered]
    X = fusion_matrix(blocks, ids, source_ids, catalog)
    spans = _source_column_spans(source_ids, catalog)

    rows: list[SweepRow] = []
    for repeat in range(repeats):
        fitted: FittedRepeat = fit_repeat(
            ordered, X, grid, repeat, base_seed=base_seed,
            test_fraction=test_fraction,
        )
        X_te_raw = X[fitted.test_index]
        for r_idx, p in enumerate(rates):
            if p == 0.0:
                rows.append(
                    SweepRow(rate=p, repeat=repeat, auroc=fitted.outcome.test_auroc)
                )
                continue
            rng = np.random.default_rng(
                np.random.SeedSequence(
                    entropy=sweep_seed, spawn_key=(repeat, r_idx)
                )
            )
            masked = X_te_raw.copy()
            drop = rng.uniform(size=(masked.shape[0], len(spans))) < p
            for j, (a, b) in enumerate(spans):
                masked[drop[:, j], a:b] = 0.0
            X_masked = apply_normalizer(fitted.normalizer, masked)
            scores = learner.predict_scores(fitted.model, X_masked)
            rows.append(
                SweepRow(rate=p, repeat=repeat, auroc=_auroc(scores, fitted.y_test))
            )
    mean_by_rate = {
        p: summarize([row.auroc for row in rows if row.rate == p]).mean_auroc
        for p in rates
    }
    return SweepReport(task_id=task_id, rows=rows, mean_by_rate=mean_by_rate)


def write_sweep_csv(report: SweepReport, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write("rate,repeat,auroc\n")
        for row in report.rows:
            fh.write(f"{row.rate!r},{row.repeat},{row.auroc!r}\n")
