"""Command-line front end for the whole pipeline.

One executable with eight subcommands: generate a synthetic cohort,
validate and index embedding block files, featurize raw records, run
the subset experiment matrix, emit grid/delta/ROC reports, attribute
performance with Shapley values, sweep test-time missingness, and
dry-run validate a configuration. Every subcommand reads the same JSON
config; flags override individual fields.

Exit codes: 0 success, 1 validation or data error, 2 matrix finished
with failure rows present, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import learner
from .attribution import (
    build_modality_game,
    shapley_exact,
    shapley_report,
    write_waterfall_csv,
)
from .errors import FusebenchError, ParseError, ValidationError
from .evaluation import fit_repeat, roc_curve, write_roc_csv
from .featurization import apply_normalizer, fusion_matrix, make_feature_blocks
from .harness import (
    ResultsStore,
    delta_report,
    grid_report,
    missingness_sweep,
    run_matrix,
    task_base_seed,
    write_delta_csv,
    write_grid_csv,
    write_grid_long_csv,
    write_sweep_csv,
)
from .record_store import (
    BlockStore,
    SourceCatalog,
    ingest_blocks,
    load_catalog,
    read_records_jsonl,
    read_samples_jsonl,
    write_blocks_jsonl,
    write_records_jsonl,
    write_samples_jsonl,
)
from .synthetic import (
    CohortSpec,
    SourceModel,
    generate_cohort,
    generate_raw_timeseries,
)

USAGE_EXIT = 64
PARTIAL_EXIT = 2

RESULTS_ENV = "FUSEBENCH_RESULTS"

_TOP_KEYS = {
    "paths",
    "tasks",
    "excluded_sources",
    "repeats",
    "grid",
    "seed",
    "parallelism",
    "test_fraction",
    "report",
    "sweep",
    "synth",
}
_PATH_KEYS = {"catalog", "blocks", "samples", "records", "results", "reports"}
_REPORT_KEYS = {"all_singles"}
_SWEEP_KEYS = {"rates", "seed"}
_SYNTH_KEYS = {
    "n_patients",
    "samples_per_patient",
    "latent_dim",
    "label_sharpness",
    "task_id",
    "seed",
    "raw_records",
    "sources",
}
_SOURCE_MODEL_KEYS = {
    "informativeness",
    "noise_sd",
    "missing_rate",
    "sparsity",
    "latent_dims",
    "drift",
}


@dataclass(frozen=True)
class RunConfig:
    """A parsed configuration with paths resolved against the config file."""

    catalog_path: Path
    blocks_dir: Path
    samples_path: Path
    records_path: Path | None
    results_path: Path
    reports_dir: Path
    tasks: tuple[str, ...]
    default_excluded: tuple[str, ...]
    per_task_excluded: dict[str, tuple[str, ...]]
    repeats: int
    grid: tuple | None
    seed: int
    parallelism: int
    test_fraction: float
    delta_all_singles: bool
    sweep_rates: tuple[float, ...]
    sweep_seed: int
    synth: dict | None

    def excluded_for(self, task_id: str) -> tuple[str, ...]:
        return self.per_task_excluded.get(task_id, self.default_excluded)


def _reject_unknown(section: str, keys, allowed) -> None:
    unknown = sorted(set(keys) - allowed)
    if unknown:
        raise ValidationError(f"config {section}: unknown key {unknown[0]!r}")


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValidationError(f"config: {message}")


def _parse_grid(raw) -> tuple | None:
    if raw is None:
        return None
    _require(isinstance(raw, list) and raw, "grid must be a non-empty list")
    points = []
    for i, entry in enumerate(raw):
        _require(isinstance(entry, dict), f"grid entry {i} must be an object")
        try:
            points.append(learner.GbdtHyperparams(**entry))
        except TypeError as exc:
            raise ValidationError(f"config grid entry {i}: {exc}") from None
    return tuple(points)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file {path} does not exist")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"config {path}: malformed JSON: {exc}") from exc
    _require(isinstance(raw, dict), "top level must be a JSON object")
    _reject_unknown("", raw, _TOP_KEYS)

    paths = raw.get("paths", {})
    _require(isinstance(paths, dict), "paths must be an object")
    _reject_unknown("paths", paths, _PATH_KEYS)
    root = path.parent

    def rp(key: str, default: str | None):
        value = paths.get(key, default)
        return None if value is None else root / value

    tasks = raw.get("tasks", [])
    _require(
        isinstance(tasks, list) and all(isinstance(t, str) for t in tasks),
        "tasks must be a list of strings",
    )

    excl = raw.get("excluded_sources", [])
    default_excluded: tuple[str, ...] = ()
    per_task: dict[str, tuple[str, ...]] = {}
    if isinstance(excl, list):
        default_excluded = tuple(excl)
    elif isinstance(excl, dict):
        for task, ids in excl.items():
            _require(
                isinstance(ids, list),
                f"excluded_sources[{task!r}] must be a list",
            )
            if task == "*":
                default_excluded = tuple(ids)
            else:
                per_task[task] = tuple(ids)
    else:
        raise ValidationError(
            "config: excluded_sources must be a list or a task-to-list object"
        )

    repeats = raw.get("repeats", 3)
    _require(isinstance(repeats, int) and repeats >= 1, "repeats must be >= 1")
    seed = raw.get("seed", 0)
    _require(isinstance(seed, int) and seed >= 0, "seed must be a non-negative int")
    parallelism = raw.get("parallelism", 1)
    _require(
        isinstance(parallelism, int) and parallelism >= 1,
        "parallelism must be >= 1",
    )
    test_fraction = raw.get("test_fraction", 0.2)
    _require(
        isinstance(test_fraction, (int, float)) and 0.0 < test_fraction < 1.0,
        "test_fraction must be in (0, 1)",
    )

    report = raw.get("report", {})
    _require(isinstance(report, dict), "report must be an object")
    _reject_unknown("report", report, _REPORT_KEYS)
    all_singles = report.get("all_singles", False)
    _require(isinstance(all_singles, bool), "report.all_singles must be a boolean")

    sweep = raw.get("sweep", {})
    _require(isinstance(sweep, dict), "sweep must be an object")
    _reject_unknown("sweep", sweep, _SWEEP_KEYS)
    rates = sweep.get("rates", [0.0, 0.25, 0.5, 0.75, 1.0])
    _require(
        isinstance(rates, list)
        and all(isinstance(r, (int, float)) and 0.0 <= r <= 1.0 for r in rates),
        "sweep.rates must be numbers in [0, 1]",
    )
    sweep_seed = sweep.get("seed", 0)
    _require(isinstance(sweep_seed, int), "sweep.seed must be an int")

    synth = raw.get("synth")
    if synth is not None:
        _require(isinstance(synth, dict), "synth must be an object")
        _reject_unknown("synth", synth, _SYNTH_KEYS)
        for sid, knobs in synth.get("sources", {}).items():
            _require(
                isinstance(knobs, dict), f"synth.sources[{sid!r}] must be an object"
            )
            _reject_unknown(f"synth.sources[{sid!r}]", knobs, _SOURCE_MODEL_KEYS)

    return RunConfig(
        catalog_path=rp("catalog", "catalog.json"),
        blocks_dir=rp("blocks", "blocks"),
        samples_path=rp("samples", "samples.jsonl"),
        records_path=rp("records", None),
        results_path=rp("results", "results.jsonl"),
        reports_dir=rp("reports", "reports"),
        tasks=tuple(tasks),
        default_excluded=default_excluded,
        per_task_excluded=per_task,
        repeats=repeats,
        grid=_parse_grid(raw.get("grid")),
        seed=seed,
        parallelism=parallelism,
        test_fraction=float(test_fraction),
        delta_all_singles=all_singles,
        sweep_rates=tuple(float(r) for r in rates),
        sweep_seed=sweep_seed,
        synth=synth,
    )


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    updates = {}
    env_results = os.environ.get(RESULTS_ENV)
    if env_results:
        updates["results_path"] = Path(env_results)
    if args.seed is not None:
        updates["seed"] = args.seed
        updates["sweep_seed"] = args.seed
    if args.parallelism is not None:
        if args.parallelism < 1:
            raise ValidationError("parallelism must be >= 1")
        updates["parallelism"] = args.parallelism
    if not updates:
        return cfg
    from dataclasses import replace

    return replace(cfg, **updates)


# -- shared loading steps ------------------------------------------------------


def _catalog(cfg: RunConfig) -> SourceCatalog:
    if not cfg.catalog_path.is_file():
        raise ValidationError(f"catalog manifest {cfg.catalog_path} does not exist")
    return load_catalog(cfg.catalog_path)


def _block_files(cfg: RunConfig) -> list[Path]:
    if not cfg.blocks_dir.is_dir():
        raise ValidationError(f"blocks directory {cfg.blocks_dir} does not exist")
    return sorted(p for p in cfg.blocks_dir.iterdir() if p.is_file())


def _blocks(cfg: RunConfig, catalog: SourceCatalog) -> BlockStore:
    return ingest_blocks(catalog, _block_files(cfg))


def _samples(cfg: RunConfig):
    if not cfg.samples_path.is_file():
        raise ValidationError(f"samples file {cfg.samples_path} does not exist")
    samples = read_samples_jsonl(cfg.samples_path)
    if not samples:
        raise ValidationError(f"samples file {cfg.samples_path} is empty")
    return samples


def _pick_tasks(cfg: RunConfig, args, available) -> list[str]:
    wanted = [args.task] if args.task else list(cfg.tasks)
    if not wanted:
        return sorted(available)
    for task in wanted:
        if task not in available:
            raise ValidationError(
                f"task {task!r} not present; available: {sorted(available)}"
            )
    return wanted


def _validate_excluded(cfg: RunConfig, catalog: SourceCatalog, tasks) -> None:
    for task in tasks:
        for sid in cfg.excluded_for(task):
            catalog.spec(sid)


# -- subcommands ---------------------------------------------------------------


def _cmd_synth(cfg: RunConfig, args) -> int:
    if cfg.synth is None:
        raise ValidationError("config has no 'synth' section")
    catalog = _catalog(cfg)
    synth = dict(cfg.synth)
    knob_map = synth.get("sources", {})
    for sid in knob_map:
        catalog.spec(sid)
    sources = {}
    for spec in catalog:
        knobs = dict(knob_map.get(spec.id, {}))
        if "latent_dims" in knobs and knobs["latent_dims"] is not None:
            knobs["latent_dims"] = tuple(knobs["latent_dims"])
        sources[spec.id] = SourceModel(dim=spec.dim, **knobs)
    spp = synth.get("samples_per_patient", 1)
    if isinstance(spp, list):
        spp = tuple(spp)
    cohort = CohortSpec(
        n_patients=synth.get("n_patients", 100),
        samples_per_patient=spp,
        latent_dim=synth.get("latent_dim", 4),
        sources=sources,
        label_sharpness=synth.get("label_sharpness", 2.0),
        task_id=synth.get("task_id", "synthetic"),
        seed=args.seed if args.seed is not None else synth.get("seed", 0),
    )
    blocks, samples, _ = generate_cohort(cohort, catalog)
    cfg.blocks_dir.mkdir(parents=True, exist_ok=True)
    written = 0
    for spec in catalog:
        rows = [
            blocks.get(s.sample_id, spec.id)
            for s in samples
            if blocks.has(s.sample_id, spec.id)
        ]
        if rows:
            write_blocks_jsonl(rows, cfg.blocks_dir / f"{spec.id}.jsonl")
            written += len(rows)
    cfg.samples_path.parent.mkdir(parents=True, exist_ok=True)
    write_samples_jsonl(samples, cfg.samples_path)
    if synth.get("raw_records"):
        if cfg.records_path is None:
            raise ValidationError(
                "synth.raw_records requires paths.records in the config"
            )
        records = generate_raw_timeseries(cohort, catalog)
        cfg.records_path.parent.mkdir(parents=True, exist_ok=True)
        write_records_jsonl(records, cfg.records_path)
        print(f"wrote {len(records)} raw records to {cfg.records_path}")
    positives = sum(s.label for s in samples)
    print(
        f"wrote {len(samples)} samples ({positives} positive) "
        f"and {written} blocks under {cfg.blocks_dir}"
    )
    return 0


def _cmd_ingest(cfg: RunConfig, args) -> int:
    catalog = _catalog(cfg)
    files = _block_files(cfg)
    store = ingest_blocks(catalog, files)
    per_source = {spec.id: 0 for spec in catalog}
    for sid in store.sample_ids():
        for spec in catalog:
            if store.has(sid, spec.id):
                per_source[spec.id] += 1
    print(
        f"ingested {len(store)} blocks for {len(store.sample_ids())} samples "
        f"from {len(files)} files"
    )
    for spec in catalog:
        print(f"  {spec.id}: {per_source[spec.id]} blocks (dim {spec.dim})")
    return 0


def _cmd_featurize(cfg: RunConfig, args) -> int:
    catalog = _catalog(cfg)
    if cfg.records_path is None or not cfg.records_path.is_file():
        raise ValidationError("featurize needs an existing paths.records file")
    records = read_records_jsonl(cfg.records_path)
    blocks = make_feature_blocks(records, catalog)
    by_source: dict[str, list] = {}
    for block in blocks:
        by_source.setdefault(block.source_id, []).append(block)
    cfg.blocks_dir.mkdir(parents=True, exist_ok=True)
    for sid in sorted(by_source):
        write_blocks_jsonl(by_source[sid], cfg.blocks_dir / f"{sid}.jsonl")
        print(f"wrote {len(by_source[sid])} blocks to {cfg.blocks_dir / (sid + '.jsonl')}")
    if not by_source:
        print("no featurizable sources in the catalog; nothing written")
    return 0


def _cmd_matrix(cfg: RunConfig, args) -> int:
    catalog = _catalog(cfg)
    blocks = _blocks(cfg, catalog)
    samples = _samples(cfg)
    tasks = _pick_tasks(cfg, args, {s.task_id for s in samples})
    _validate_excluded(cfg, catalog, tasks)
    before = 0
    if cfg.results_path.is_file():
        with open(cfg.results_path, "rb") as fh:
            before = sum(1 for line in fh if line.strip())

    store = None
    for task in tasks:
        store = run_matrix(
            blocks,
            samples,
            catalog,
            cfg.results_path,
            tasks=[task],
            excluded=cfg.excluded_for(task),
            grid=cfg.grid,
            repeats=cfg.repeats,
            base_seed=cfg.seed,
            test_fraction=cfg.test_fraction,
            parallelism=cfg.parallelism,
        )
    failures = [f for task in tasks for f in store.failures(task)]
    print(
        f"matrix complete: {len(store) - before} new unit(s), "
        f"{len(store.results())} results, {len(failures)} failure(s) "
        f"in {cfg.results_path}"
    )
    if failures:
        for f in failures[:5]:
            print(
                f"  failed {f.task_id}/{f.subset_id}/r{f.repeat}: "
                f"{f.error}: {f.message}",
                file=sys.stderr,
            )
        return PARTIAL_EXIT
    return 0


def _open_store(cfg: RunConfig) -> ResultsStore:
    if not cfg.results_path.is_file():
        raise ValidationError(f"results store {cfg.results_path} does not exist")
    return ResultsStore(cfg.results_path)


def _write_rows_jsonl(rows: list[dict], path: Path) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _cmd_report(cfg: RunConfig, args) -> int:
    catalog = _catalog(cfg)
    store = _open_store(cfg)
    blocks = _blocks(cfg, catalog)
    samples = _samples(cfg)
    tasks = _pick_tasks(cfg, args, set(store.task_ids()))
    cfg.reports_dir.mkdir(parents=True, exist_ok=True)
    for task in tasks:
        grid = grid_report(store, task, catalog)
        delta = delta_report(store, task, catalog, all_singles=cfg.delta_all_singles)
        if args.format == "jsonl":
            rows = [
                {
                    "n_modalities": c.n_modalities,
                    "n_sources": c.n_sources,
                    "n_subsets": c.n_subsets,
                    "mean_auroc": c.mean,
                    "sd_auroc": c.sd,
                }
                for _, c in sorted(grid.cells.items())
            ]
            _write_rows_jsonl(rows, cfg.reports_dir / f"grid_{task}.jsonl")
            rows = [
                {
                    "n_modalities": c.n_modalities,
                    "n_sources": c.n_sources,
                    "n_subsets": c.n_subsets,
                    "mean_delta_pct": c.mean_delta_pct,
                    "sd_delta_pct": c.sd_delta_pct,
                    "baseline": delta.baseline,
                }
                for _, c in sorted(delta.cells.items())
            ]
            _write_rows_jsonl(rows, cfg.reports_dir / f"delta_{task}.jsonl")
        else:
            write_grid_csv(grid, cfg.reports_dir / f"grid_{task}.csv")
            write_grid_long_csv(grid, cfg.reports_dir / f"grid_long_{task}.csv")
            write_delta_csv(delta, cfg.reports_dir / f"delta_{task}.csv")
        _write_task_roc(cfg, catalog, blocks, samples, task)
        print(f"wrote grid, delta, and ROC reports for task {task!r}")
    return 0


def _write_task_roc(cfg, catalog, blocks, samples, task: str) -> None:
    """Re-score the full included source set (repeat 0) and export its ROC.

    Uses the same per-task seed stream as the matrix, so the curve belongs
    to the stored full-subset repeat-0 model.
    """
    excluded = set(cfg.excluded_for(task))
    included = [s.id for s in catalog if s.id not in excluded]
    task_samples = sorted(
        (s for s in samples if s.task_id == task), key=lambda s: s.sample_id
    )
    if not task_samples:
        raise ValidationError(f"no samples for task {task!r}")
    ids = [s.sample_id for s in task_samples]
    X = fusion_matrix(blocks, ids, included, catalog)
    grid = cfg.grid if cfg.grid is not None else learner.default_grid()
    fitted = fit_repeat(
        task_samples,
        X,
        grid,
        repeat=0,
        base_seed=task_base_seed(cfg.seed, task),
        test_fraction=cfg.test_fraction,
    )
    scores = learner.predict_scores(
        fitted.model, apply_normalizer(fitted.normalizer, X[fitted.test_index])
    )
    curve = roc_curve(scores, fitted.y_test)
    write_roc_csv(curve, cfg.reports_dir / f"roc_{task}.csv")


def _cmd_shapley(cfg: RunConfig, args) -> int:
    catalog = _catalog(cfg)
    store = _open_store(cfg)
    tasks = _pick_tasks(cfg, args, set(store.task_ids()))
    cfg.reports_dir.mkdir(parents=True, exist_ok=True)
    for task in tasks:
        excluded = cfg.excluded_for(task)
        report = shapley_report(store, task, catalog, excluded)
        exact_game = build_modality_game(store, task, catalog, excluded)
        exact_phi = shapley_exact(exact_game)
        within_game = build_modality_game(
            store, task, catalog, excluded, cover="within"
        )
        within_phi = shapley_exact(within_game)
        differ = any(
            abs(exact_phi[m] - within_phi[m]) > 1e-12 for m in exact_phi
        )
        payload = {
            "task_id": task,
            "empty_value": report.empty_value,
            "full_value": report.full_value,
            "efficiency_residual": report.efficiency_residual,
            "per_source": report.per_player,
            "per_modality_additive": report.per_modality,
            "modality_game_exact_cover": exact_phi,
            "modality_game_within_cover": within_phi if differ else None,
        }
        with open(cfg.reports_dir / f"shapley_{task}.json", "w") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")
        write_waterfall_csv(
            report.per_player, cfg.reports_dir / f"waterfall_sources_{task}.csv"
        )
        write_waterfall_csv(
            report.per_modality,
            cfg.reports_dir / f"waterfall_modalities_{task}.csv",
        )
        write_waterfall_csv(
            exact_phi, cfg.reports_dir / f"waterfall_modality_game_{task}.csv"
        )
        if differ:
            write_waterfall_csv(
                within_phi,
                cfg.reports_dir / f"waterfall_modality_game_within_{task}.csv",
            )
        print(
            f"task {task!r}: full AUROC {report.full_value:.4f}, "
            f"efficiency residual {report.efficiency_residual:.2e}"
        )
    return 0


def _cmd_sweep(cfg: RunConfig, args) -> int:
    catalog = _catalog(cfg)
    blocks = _blocks(cfg, catalog)
    samples = _samples(cfg)
    tasks = _pick_tasks(cfg, args, {s.task_id for s in samples})
    _validate_excluded(cfg, catalog, tasks)
    cfg.reports_dir.mkdir(parents=True, exist_ok=True)
    for task in tasks:
        task_samples = [s for s in samples if s.task_id == task]
        report = missingness_sweep(
            blocks,
            task_samples,
            catalog,
            cfg.sweep_rates,
            excluded=cfg.excluded_for(task),
            grid=cfg.grid,
            repeats=cfg.repeats,
            base_seed=task_base_seed(cfg.seed, task),
            sweep_seed=cfg.sweep_seed,
            test_fraction=cfg.test_fraction,
        )
        if args.format == "jsonl":
            rows = [
                {"rate": r.rate, "repeat": r.repeat, "auroc": r.auroc}
                for r in report.rows
            ]
            _write_rows_jsonl(rows, cfg.reports_dir / f"sweep_{task}.jsonl")
        else:
            write_sweep_csv(report, cfg.reports_dir / f"sweep_{task}.csv")
        means = ", ".join(
            f"{rate}: {mean:.4f}" for rate, mean in report.mean_by_rate.items()
        )
        print(f"task {task!r} sweep mean AUROC by rate: {means}")
    return 0


def _cmd_validate(cfg: RunConfig, args) -> int:
    print("config: ok")
    catalog = _catalog(cfg)
    print(f"catalog: {len(catalog.sources)} sources, total dim {catalog.total_dim}")
    blocks = _blocks(cfg, catalog)
    print(
        f"blocks: {len(blocks)} blocks across "
        f"{len(blocks.sample_ids())} samples validated"
    )
    samples = _samples(cfg)
    tasks = _pick_tasks(cfg, args, {s.task_id for s in samples})
    _validate_excluded(cfg, catalog, tasks)
    sample_ids = set(blocks.sample_ids())
    orphaned = sum(1 for s in samples if s.sample_id not in sample_ids)
    print(
        f"samples: {len(samples)} across tasks {sorted({s.task_id for s in samples})}"
        + (f" ({orphaned} with no stored blocks)" if orphaned else "")
    )
    grid = cfg.grid if cfg.grid is not None else learner.default_grid()
    print(f"grid: {len(grid)} hyperparameter point(s)")
    if cfg.results_path.is_file():
        store = ResultsStore(cfg.results_path)
        print(
            f"results: {len(store.results())} result(s), "
            f"{len(store.failures())} failure(s) at {cfg.results_path}"
        )
    else:
        print(f"results: {cfg.results_path} absent (matrix will create it)")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "ingest": _cmd_ingest,
    "featurize": _cmd_featurize,
    "matrix": _cmd_matrix,
    "report": _cmd_report,
    "shapley": _cmd_shapley,
    "sweep": _cmd_sweep,
    "validate": _cmd_validate,
}


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 64 on usage errors, naming the problem."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fusebench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "synth": "generate a synthetic labeled cohort and its block files",
        "ingest": "validate and index embedding block files",
        "featurize": "turn raw patient records into embedding block files",
        "matrix": "train every source-subset model not yet in the store",
        "report": "emit grid, delta, and ROC reports from the store",
        "shapley": "attribute performance to sources and modalities",
        "sweep": "re-score the full model under test-time missingness",
        "validate": "dry-run check of config and data; writes nothing",
    }
    for name, help_text in helps.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="path to the JSON config")
        sp.add_argument("--task", help="restrict to one task id")
        sp.add_argument("--parallelism", type=int, help="worker process count")
        sp.add_argument("--seed", type=int, help="override every configured seed")
        sp.add_argument(
            "--format",
            choices=("csv", "jsonl"),
            default="csv",
            help="tabular report format",
        )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_EXIT
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        return _COMMANDS[args.command](cfg, args)
    except FusebenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
