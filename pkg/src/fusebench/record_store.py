"""Patient-centric multimodal record model and validated embedding ingestion.

A record holds everything known about one hospitalization: static tabular
fields, time-stamped event streams, note references, and image references.
Samples are anchored to imaging time points; per-source embedding vectors
for those samples arrive through block files and are held in a BlockStore.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionError,
    DomainError,
    DuplicateSampleError,
    MissingOutcomeError,
    NonFiniteError,
    ParseError,
    UnknownSourceError,
    ValidationError,
)

MODALITIES = ("tabular", "timeseries", "text", "image")

BINARY_MAGIC = b"HAIMEMB1"


@dataclass(frozen=True)
class SourceSpec:
    """One named input stream: id, modality tag, embedding width, roster.

    ``signals`` lists the field names (tabular) or signal names (timeseries)
    the featurizer should extract for this source; empty for sources whose
    vectors arrive pre-extracted (text, image).
    """

    id: str
    modality: str
    dim: int
    signals: tuple[str, ...] = ()


class SourceCatalog:
    """Ordered roster of sources; the order is the canonical fusion order."""

    def __init__(self, sources: list[SourceSpec]):
        seen: set[str] = set()
        for spec in sources:
            if not spec.id:
                raise ValidationError("source id must be a non-empty string")
            if spec.id in seen:
                raise ValidationError(f"duplicate source id {spec.id!r}")
            seen.add(spec.id)
            if spec.modality not in MODALITIES:
                raise ValidationError(
                    f"source {spec.id!r}: unknown modality {spec.modality!r}"
                )
            if spec.dim <= 0:
                raise ValidationError(f"source {spec.id!r}: dim must be positive")
        self.sources: tuple[SourceSpec, ...] = tuple(sources)
        self._by_id = {s.id: s for s in self.sources}
        self._index = {s.id: i for i, s in enumerate(self.sources)}

    def __len__(self) -> int:
        return len(self.sources)

    def __iter__(self):
        return iter(self.sources)

    def __contains__(self, source_id: str) -> bool:
        return source_id in self._by_id

    def ids(self) -> list[str]:
        return [s.id for s in self.sources]

    def spec(self, source_id: str) -> SourceSpec:
        try:
            return self._by_id[source_id]
        except KeyError:
            raise UnknownSourceError(f"unknown source id {source_id!r}") from None

    def dim(self, source_id: str) -> int:
        return self.spec(source_id).dim

    def modality(self, source_id: str) -> str:
        return self.spec(source_id).modality

    def index(self, source_id: str) -> int:
        self.spec(source_id)
        return self._index[source_id]

    @property
    def total_dim(self) -> int:
        return sum(s.dim for s in self.sources)

    def modality_sizes(self) -> dict[str, int]:
        """Source count per modality, only modalities actually present."""
        sizes: dict[str, int] = {}
        for s in self.sources:
            sizes[s.modality] = sizes.get(s.modality, 0) + 1
        return sizes

    def restricted(self, excluded: set[str]) -> "SourceCatalog":
        for sid in excluded:
            self.spec(sid)
        return SourceCatalog([s for s in self.sources if s.id not in excluded])


# Default chart roster: eight canonically named vital/GCS signals plus a
# ninth slot that keeps the chart embedding 99-wide; rename it through a
# custom manifest if a ninth signal is known for the deployment.
CHART_SIGNALS = (
    "heart_rate",
    "nbp_systolic",
    "nbp_diastolic",
    "respiratory_rate",
    "spo2",
    "gcs_verbal",
    "gcs_eye",
    "gcs_motor",
    "chart_aux",
)

LAB_SIGNALS = (
    "glucose",
    "potassium",
    "sodium",
    "chloride",
    "creatinine",
    "urea_nitrogen",
    "bicarbonate",
    "anion_gap",
    "hemoglobin",
    "hematocrit",
    "magnesium",
    "platelet_count",
    "phosphate",
    "white_blood_cells",
    "total_calcium",
    "mch",
    "red_blood_cells",
    "mchc",
    "mcv",
    "rdw",
    "neutrophils",
    "vancomycin",
)

PROCEDURE_SIGNALS = (
    "foley_catheter",
    "picc_line",
    "intubation",
    "peritoneal_dialysis",
    "bronchoscopy",
    "eeg",
    "crrt_dialysis",
    "catheter_dialysis",
    "chest_tube_removal",
    "hemodialysis",
)

DEMOGRAPHIC_FIELDS = (
    "age",
    "sex",
    "ethnicity",
    "marital_status",
    "insurance",
    "language",
)


def default_catalog() -> SourceCatalog:
    """The stock 11-source catalog (4845 fused dimensions)."""
    return SourceCatalog(
        [
            SourceSpec("de", "tabular", 6, DEMOGRAPHIC_FIELDS),
            SourceSpec("ce", "timeseries", 99, CHART_SIGNALS),
            SourceSpec("le", "timeseries", 242, LAB_SIGNALS),
            SourceSpec("pe", "timeseries", 110, PROCEDURE_SIGNALS),
            SourceSpec("radn", "text", 768),
            SourceSpec("ecgn", "text", 768),
            SourceSpec("econ", "text", 768),
            SourceSpec("vp", "image", 18),
            SourceSpec("vd", "image", 1024),
            SourceSpec("vmp", "image", 18),
            SourceSpec("vmd", "image", 1024),
        ]
    )


def load_catalog(manifest_file: str | Path) -> SourceCatalog:
    """Load and validate a catalog manifest (JSON list of source entries)."""
    path = Path(manifest_file)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ParseError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed manifest {path}: {exc}") from exc
    if not isinstance(raw, list):
        raise ParseError(f"manifest {path}: expected a top-level list")
    sources = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise ParseError(f"manifest entry {i}: expected an object")
        try:
            sid = entry["id"]
            modality = entry["modality"]
            dim = entry["dim"]
        except KeyError as exc:
            raise ParseError(f"manifest entry {i}: missing key {exc}") from None
        if not isinstance(dim, int) or isinstance(dim, bool):
            raise ValidationError(f"source {sid!r}: dim must be an integer")
        signals = tuple(entry.get("signals", ()))
        sources.append(SourceSpec(str(sid), str(modality), dim, signals))
    return SourceCatalog(sources)


def write_catalog(catalog: SourceCatalog, path: str | Path) -> None:
    entries = []
    for s in catalog.sources:
        entry: dict = {"id": s.id, "modality": s.modality, "dim": s.dim}
        if s.signals:
            entry["signals"] = list(s.signals)
        entries.append(entry)
    Path(path).write_text(json.dumps(entries, indent=2) + "\n")


@dataclass
class PatientRecord:
    """All known events for one hospitalization, relative to admit_time.

    Timestamps are real-valued hours on a shared epoch; every event must
    occur at or after admission, and streams are sorted by time.
    """

    patient_id: str
    admission_id: str
    admit_time: float
    tabular_fields: dict[str, float] = field(default_factory=dict)
    event_streams: dict[str, list[tuple[float, float]]] = field(default_factory=dict)
    note_events: dict[str, list[tuple[float, str]]] = field(default_factory=dict)
    image_events: list[tuple[float, str]] = field(default_factory=list)

    def __post_init__(self):
        for name, stream in self.event_streams.items():
            self._check_times(name, [t for t, _ in stream])
        for name, notes in self.note_events.items():
            self._check_times(f"notes:{name}", [t for t, _ in notes])
        self._check_times("images", [t for t, _ in self.image_events])

    def _check_times(self, name: str, times: list[float]) -> None:
        prev = None
        for t in times:
            if t < self.admit_time:
                raise ValidationError(
                    f"record {self.admission_id}: {name} event at {t} "
                    f"precedes admission at {self.admit_time}"
                )
            if prev is not None and t < prev:
                raise ValidationError(
                    f"record {self.admission_id}: {name} timestamps decrease"
                )
            prev = t


def slice_record(record: PatientRecord, t: float) -> PatientRecord:
    """Restrict a record to events at or before t (boundary inclusive)."""
    if t < record.admit_time:
        raise DomainError(
            f"slice time {t} precedes admission at {record.admit_time}"
        )
    return PatientRecord(
        patient_id=record.patient_id,
        admission_id=record.admission_id,
        admit_time=record.admit_time,
        tabular_fields=dict(record.tabular_fields),
        event_streams={
            name: [(ts, v) for ts, v in stream if ts <= t]
            for name, stream in record.event_streams.items()
        },
        note_events={
            name: [(ts, ref) for ts, ref in notes if ts <= t]
            for name, notes in record.note_events.items()
        },
        image_events=[(ts, ref) for ts, ref in record.image_events if ts <= t],
    )


def sampling_events(record: PatientRecord) -> list[tuple[str, float]]:
    """One sample per imaging time point: (sample_id, sampling_time)."""
    return [
        (f"{record.admission_id}-s{i}", t)
        for i, (t, _) in enumerate(record.image_events)
    ]


@dataclass(frozen=True)
class LabeledSample:
    sample_id: str
    patient_id: str
    sampling_time: float
    task_id: str
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValidationError(
                f"sample {self.sample_id}: label must be 0 or 1, got {self.label}"
            )


@dataclass(frozen=True)
class TaskDef:
    """A prediction target: a named pathology or a 48 h horizon task."""

    task_id: str
    kind: str  # "pathology" | "discharge48h" | "mortality48h"

    def __post_init__(self):
        if self.kind not in ("pathology", "discharge48h", "mortality48h"):
            raise ValidationError(f"unknown task kind {self.kind!r}")


@dataclass(frozen=True)
class OutcomeRow:
    sample_id: str
    task_id: str
    value: float
    event_time: float | None


class RawOutcomes:
    """Outcome table keyed by (sample_id, task_id)."""

    def __init__(self, rows: list[OutcomeRow]):
        self._rows: dict[tuple[str, str], OutcomeRow] = {}
        for row in rows:
            key = (row.sample_id, row.task_id)
            if key in self._rows:
                raise ValidationError(
                    f"duplicate outcome row for sample {row.sample_id!r} "
                    f"task {row.task_id!r}"
                )
            self._rows[key] = row

    def get(self, sample_id: str, task_id: str) -> OutcomeRow | None:
        return self._rows.get((sample_id, task_id))

    def __len__(self) -> int:
        return len(self._rows)


def load_outcomes(path: str | Path) -> RawOutcomes:
    """Read the outcome CSV (header sample_id,task_id,value,event_time)."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = {"sample_id", "task_id", "value", "event_time"}
        if reader.fieldnames is None or not expected.issubset(reader.fieldnames):
            raise ParseError(
                f"outcome table {path}: header must contain {sorted(expected)}"
            )
        for line in reader:
            event_time = line["event_time"]
            rows.append(
                OutcomeRow(
                    sample_id=line["sample_id"],
                    task_id=line["task_id"],
                    value=float(line["value"]),
                    event_time=float(event_time) if event_time else None,
                )
            )
    return RawOutcomes(rows)


def write_outcomes(rows: list[OutcomeRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "task_id", "value", "event_time"])
        for row in rows:
            writer.writerow(
                [
                    row.sample_id,
                    row.task_id,
                    repr(row.value),
                    "" if row.event_time is None else repr(row.event_time),
                ]
            )


HORIZON_HOURS = 48.0


def build_labels(
    task: TaskDef, records: list[PatientRecord], raw: RawOutcomes
) -> list[LabeledSample]:
    """Construct 0/1 labels for every sampling event of the given records.

    Pathology tasks keep only samples whose raw value is exactly 0 or 1;
    inconclusive (-1) and unrecorded samples are dropped. The horizon tasks
    label 1 iff the matching exit event (alive discharge, or death) occurs
    within 48 h of the sampling time, boundary inclusive; a sample with no
    outcome row is an error for horizon tasks.
    """
    samples = []
    for record in records:
        for sample_id, sampling_time in sampling_events(record):
            row = raw.get(sample_id, task.task_id)
            if task.kind == "pathology":
                if row is None or row.value not in (0.0, 1.0):
                    continue
                label = int(row.value)
            else:
                if row is None:
                    raise MissingOutcomeError(
                        f"sample {sample_id!r} has no outcome row for "
                        f"task {task.task_id!r}"
                    )
                if row.value == 1.0:
                    if row.event_time is None:
                        raise MissingOutcomeError(
                            f"sample {sample_id!r}: outcome row for task "
                            f"{task.task_id!r} lacks an event time"
                        )
                    label = int(row.event_time - sampling_time <= HORIZON_HOURS)
                else:
                    label = 0
            samples.append(
                LabeledSample(
                    sample_id=sample_id,
                    patient_id=record.patient_id,
                    sampling_time=sampling_time,
                    task_id=task.task_id,
                    label=label,
                )
            )
    return samples


def write_samples_jsonl(
    samples: list[LabeledSample], path: str | Path
) -> None:
    """Persist labeled samples, keeping patient grouping for later splits."""
    with open(path, "w") as fh:
        for s in samples:
            fh.write(
                json.dumps(
                    {
                        "sample_id": s.sample_id,
                        "patient_id": s.patient_id,
                        "sampling_time": s.sampling_time,
                        "task_id": s.task_id,
                        "label": s.label,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_samples_jsonl(path: str | Path) -> list[LabeledSample]:
    samples = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            try:
                samples.append(
                    LabeledSample(
                        sample_id=str(rec["sample_id"]),
                        patient_id=str(rec["patient_id"]),
                        sampling_time=float(rec["sampling_time"]),
                        task_id=str(rec["task_id"]),
                        label=int(rec["label"]),
                    )
                )
            except KeyError as exc:
                raise ParseError(f"{path}:{lineno}: missing key {exc}") from None
    return samples


@dataclass(frozen=True)
class EmbeddingBlock:
    """One source's fixed-width vector for one sample."""

    sample_id: str
    source_id: str
    vector: np.ndarray
    present: bool = True


class BlockStore:
    """Immutable-after-ingest map of (sample, source) to embedding blocks.

    Samples with no stored block for a source read back as a zero vector
    with present=False, preserving fusion dimensions under missing data.
    """

    def __init__(self, catalog: SourceCatalog):
        self.catalog = catalog
        self._blocks: dict[tuple[str, str], EmbeddingBlock] = {}
        self._samples: set[str] = set()

    def add(self, block: EmbeddingBlock) -> None:
        if block.source_id not in self.catalog:
            raise UnknownSourceError(
                f"block for unknown source {block.source_id!r}"
            )
        expected = self.catalog.dim(block.source_id)
        vec = np.asarray(block.vector, dtype=np.float64)
        if vec.ndim != 1 or vec.shape[0] != expected:
            raise DimensionError(
                f"sample {block.sample_id!r} source {block.source_id!r}: "
                f"vector has length {vec.size}, catalog says {expected}"
            )
        if not np.all(np.isfinite(vec)):
            raise NonFiniteError(
                f"sample {block.sample_id!r} source {block.source_id!r}: "
                f"vector contains non-finite entries"
            )
        key = (block.sample_id, block.source_id)
        if key in self._blocks:
            raise DuplicateSampleError(
                f"sample {block.sample_id!r} source {block.source_id!r} "
                f"ingested twice"
            )
        self._blocks[key] = EmbeddingBlock(
            block.sample_id, block.source_id, vec, block.present
        )
        self._samples.add(block.sample_id)

    def get(self, sample_id: str, source_id: str) -> EmbeddingBlock:
        block = self._blocks.get((sample_id, source_id))
        if block is None:
            dim = self.catalog.dim(source_id)
            return EmbeddingBlock(
                sample_id, source_id, np.zeros(dim), present=False
            )
        return block

    def has(self, sample_id: str, source_id: str) -> bool:
        return (sample_id, source_id) in self._blocks

    def sample_ids(self) -> list[str]:
        return sorted(self._samples)

    def __len__(self) -> int:
        return len(self._blocks)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BlockStore):
            return NotImplemented
        if set(self._blocks) != set(other._blocks):
            return False
        return all(
            np.array_equal(blk.vector, other._blocks[key].vector)
            and blk.present == other._blocks[key].present
            for key, blk in self._blocks.items()
        )


def _iter_jsonl_blocks(path: Path):
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            try:
                yield EmbeddingBlock(
                    sample_id=str(rec["sample_id"]),
                    source_id=str(rec["source_id"]),
                    vector=np.asarray(rec["vector"], dtype=np.float64),
                )
            except KeyError as exc:
                raise ParseError(f"{path}:{lineno}: missing key {exc}") from None


def _iter_binary_blocks(path: Path):
    # Binary block files carry one source; the file stem names it.
    source_id = path.stem
    data = path.read_bytes()
    if data[:8] != BINARY_MAGIC:
        raise ParseError(f"{path}: bad magic bytes")
    try:
        dim, count = struct.unpack_from("<IQ", data, 8)
        offset = 8 + 12
        for _ in range(count):
            (id_len,) = struct.unpack_from("<H", data, offset)
            offset += 2
            sample_id = data[offset : offset + id_len].decode("utf-8")
            offset += id_len
            vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset)
            offset += 4 * dim
            yield EmbeddingBlock(
                sample_id=sample_id,
                source_id=source_id,
                vector=vec.astype(np.float64),
            )
    except (struct.error, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: truncated or corrupt block file: {exc}") from exc


def ingest_blocks(catalog: SourceCatalog, files: list[str | Path]) -> BlockStore:
    """Read block files (JSON-lines or binary) into a validated store.

    Ingestion is order-independent: permuting `files` yields an equal store
    (duplicate (sample, source) pairs are rejected rather than overwritten).
    """
    store = BlockStore(catalog)
    for file in files:
        path = Path(file)
        with open(path, "rb") as fh:
            magic = fh.read(8)
        blocks = (
            _iter_binary_blocks(path)
            if magic == BINARY_MAGIC
            else _iter_jsonl_blocks(path)
        )
        for block in blocks:
            store.add(block)
    return store


def write_blocks_jsonl(blocks: list[EmbeddingBlock], path: str | Path) -> None:
    """Write blocks as JSON-lines with full round-trip float precision."""
    with open(path, "w") as fh:
        for block in blocks:
            fh.write(
                json.dumps(
                    {
                        "sample_id": block.sample_id,
                        "source_id": block.source_id,
                        "vector": [float(x) for x in block.vector],
                    }
                )
                + "\n"
            )


def write_blocks_binary(blocks: list[EmbeddingBlock], path: str | Path) -> None:
    """Write one source's blocks in the compact binary layout.

    The file stem must equal the source id; vectors are stored as f32.
    """
    path = Path(path)
    if not blocks:
        raise ValidationError("binary block files must contain at least one block")
    source_ids = {b.source_id for b in blocks}
    if len(source_ids) != 1:
        raise ValidationError(
            f"binary block files hold a single source, got {sorted(source_ids)}"
        )
    (source_id,) = source_ids
    if path.stem != source_id:
        raise ValidationError(
            f"binary block file stem {path.stem!r} must equal the "
            f"source id {source_id!r}"
        )
    dims = {len(b.vector) for b in blocks}
    if len(dims) != 1:
        raise DimensionError(f"mixed vector lengths {sorted(dims)} in one file")
    (dim,) = dims
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<IQ", dim, len(blocks)))
        for block in blocks:
            sid = block.sample_id.encode("utf-8")
            fh.write(struct.pack("<H", len(sid)))
            fh.write(sid)
            fh.write(np.asarray(block.vector, dtype="<f4").tobytes())


def write_records_jsonl(records: list[PatientRecord], path: str | Path) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(
                json.dumps(
                    {
                        "patient_id": r.patient_id,
                        "admission_id": r.admission_id,
                        "admit_time": r.admit_time,
                        "tabular_fields": r.tabular_fields,
                        "event_streams": {
                            k: [[t, v] for t, v in s]
                            for k, s in r.event_streams.items()
                        },
                        "note_events": {
                            k: [[t, ref] for t, ref in s]
                            for k, s in r.note_events.items()
                        },
                        "image_events": [[t, ref] for t, ref in r.image_events],
                    }
                )
                + "\n"
            )


def read_records_jsonl(path: str | Path) -> list[PatientRecord]:
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                records.append(
                    PatientRecord(
                        patient_id=rec["patient_id"],
                        admission_id=rec["admission_id"],
                        admit_time=float(rec["admit_time"]),
                        tabular_fields={
                            k: float(v) for k, v in rec["tabular_fields"].items()
                        },
                        event_streams={
                            k: [(float(t), float(v)) for t, v in s]
                            for k, s in rec["event_streams"].items()
                        },
                        note_events={
                            k: [(float(t), str(ref)) for t, ref in s]
                            for k, s in rec["note_events"].items()
                        },
                        image_events=[
                            (float(t), str(ref)) for t, ref in rec["image_events"]
                        ],
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"{path}:{lineno}: bad record line: {exc}") from exc
    return records
