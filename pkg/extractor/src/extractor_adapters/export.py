"""Block export in the shared formats the fusion core ingests.

Two encodings of the same content: JSON-lines (one block per line, full
float precision) and a compact binary layout (8-byte magic, little-endian
dim and count, then length-prefixed sample ids with f32 vectors; the file
stem names the source). Validation against the catalog manifest happens
before any byte is written, and writes go through a temp file plus rename
so readers never observe a partial file.
"""

import hashlib
import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CatalogMismatchError, ManifestError

BINARY_MAGIC = b"HAIMEMB1"
FORMATS = ("jsonl", "binary")


@dataclass(frozen=True)
class Block:
    sample_id: str
    source_id: str
    vector: np.ndarray


def load_catalog_dims(path: str | Path) -> dict[str, int]:
    """Source id -> dimension from a shared catalog manifest."""
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"catalog manifest {path} does not exist")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"catalog manifest {path}: malformed JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise ManifestError(f"catalog manifest {path}: expected a JSON list")
    dims: dict[str, int] = {}
    for entry in raw:
        if not isinstance(entry, dict) or not {"id", "dim"} <= set(entry):
            raise ManifestError(
                f"catalog manifest {path}: every entry needs 'id' and 'dim'"
            )
        sid, dim = entry["id"], entry["dim"]
        if not isinstance(sid, str) or not isinstance(dim, int) or dim < 1:
            raise ManifestError(f"catalog manifest {path}: bad entry {entry!r}")
        if sid in dims:
            raise ManifestError(f"catalog manifest {path}: duplicate source {sid!r}")
        dims[sid] = dim
    return dims


def _validate(blocks: list[Block], catalog_dims: dict[str, int]) -> None:
    seen: set[tuple[str, str]] = set()
    for block in blocks:
        if block.source_id not in catalog_dims:
            raise CatalogMismatchError(
                f"source {block.source_id!r} is not in the catalog manifest"
            )
        want = catalog_dims[block.source_id]
        got = int(np.asarray(block.vector).shape[0])
        if np.asarray(block.vector).ndim != 1 or got != want:
            raise CatalogMismatchError(
                f"block ({block.sample_id!r}, {block.source_id!r}) has dim {got}, "
                f"catalog says {want}"
            )
        if not np.all(np.isfinite(np.asarray(block.vector, dtype=np.float64))):
            raise CatalogMismatchError(
                f"block ({block.sample_id!r}, {block.source_id!r}) has non-finite values"
            )
        key = (block.sample_id, block.source_id)
        if key in seen:
            raise ManifestError(f"duplicate block for {key}")
        seen.add(key)


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(f"{path.name}.tmp-{os.getpid()}")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _jsonl_payload(blocks: list[Block]) -> bytes:
    lines = []
    for block in blocks:
        lines.append(
            json.dumps(
                {
                    "sample_id": block.sample_id,
                    "source_id": block.source_id,
                    "vector": [float(x) for x in block.vector],
                }
            )
            + "\n"
        )
    return "".join(lines).encode()


def _binary_payload(blocks: list[Block], dim: int) -> bytes:
    parts = [BINARY_MAGIC, struct.pack("<IQ", dim, len(blocks))]
    for block in blocks:
        sid = block.sample_id.encode("utf-8")
        parts.append(struct.pack("<H", len(sid)))
        parts.append(sid)
        parts.append(np.asarray(block.vector, dtype="<f4").tobytes())
    return b"".join(parts)


def export_blocks(
    blocks: list[Block],
    catalog_dims: dict[str, int],
    out_dir: str | Path,
    fmt: str = "jsonl",
) -> list[Path]:
    """Write one file per source; returns the written paths, sorted.

    Every block is validated before the first write, so a bad batch leaves
    the output directory untouched. Blocks are ordered by sample id inside
    each file and sources are written in sorted order, making repeated
    exports of the same content byte-identical.
    """
    if fmt not in FORMATS:
        raise ManifestError(f"format must be one of {FORMATS}, got {fmt!r}")
    _validate(blocks, catalog_dims)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_source: dict[str, list[Block]] = {}
    for block in blocks:
        by_source.setdefault(block.source_id, []).append(block)
    written = []
    for source_id in sorted(by_source):
        rows = sorted(by_source[source_id], key=lambda b: b.sample_id)
        if fmt == "jsonl":
            path = out_dir / f"{source_id}.jsonl"
            _atomic_write(path, _jsonl_payload(rows))
        else:
            path = out_dir / f"{source_id}.bin"
            _atomic_write(path, _binary_payload(rows, catalog_dims[source_id]))
        written.append(path)
    return written


def file_blake2b(path: str | Path) -> str:
    return hashlib.blake2b(Path(path).read_bytes(), digest_size=16).hexdigest()


def write_provenance(
    out_dir: str | Path,
    *,
    kind: str,
    config,
    fmt: str,
    files: list[Path],
    input_manifest: str | Path,
    choices: dict[str, str],
) -> Path:
    """Record what produced the blocks: model, knobs, and content hashes."""
    manifest = {
        "kind": kind,
        "model": config.model_id,
        "format": fmt,
        "config": {
            "token_limit": config.token_limit,
            "image_side": config.image_side,
            "batch_size": config.batch_size,
        },
        "input_manifest_blake2b": file_blake2b(input_manifest),
        "files": {p.name: file_blake2b(p) for p in sorted(files)},
        "choices": choices,
    }
    path = Path(out_dir) / "provenance.json"
    _atomic_write(path, (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode())
    return path
