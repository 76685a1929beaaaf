"""Command-line entry point: turn a sample manifest into block files.

The input manifest is a JSON object with a `catalog` path (the shared
source-catalog manifest, resolved relative to the input file) and a
`samples` list. Text manifests give each sample a `notes` object mapping
note type to a list of texts; image manifests give each sample an
`images` list of {path, time} objects with paths resolved the same way.
Outputs are one block file per source plus a provenance manifest.
"""

import argparse
import json
import sys
from pathlib import Path

from .errors import ExtractorError, ManifestError
from .export import Block, export_blocks, load_catalog_dims, write_provenance
from .images import embed_images
from .text import AdapterConfig, embed_notes

USAGE_EXIT = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="fusebench-extract",
        description="Extract text or image embedding blocks from a sample manifest.",
    )
    parser.add_argument("--kind", required=True, choices=("text", "image"))
    parser.add_argument("--in", dest="manifest", required=True, metavar="MANIFEST")
    parser.add_argument("--out", required=True, metavar="DIR")
    parser.add_argument("--model", required=True, metavar="ID")
    parser.add_argument("--format", default="jsonl", choices=("jsonl", "binary"))
    parser.add_argument("--token-limit", type=int, default=512)
    parser.add_argument("--image-side", type=int, default=224)
    return parser


def _load_manifest(path: Path) -> tuple[Path, list[dict]]:
    if not path.is_file():
        raise ManifestError(f"input manifest {path} does not exist")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"input manifest {path}: malformed JSON: {exc}") from exc
    if not isinstance(raw, dict) or "catalog" not in raw or "samples" not in raw:
        raise ManifestError(
            f"input manifest {path}: expected an object with 'catalog' and 'samples'"
        )
    samples = raw["samples"]
    if not isinstance(samples, list):
        raise ManifestError(f"input manifest {path}: 'samples' must be a list")
    for entry in samples:
        if not isinstance(entry, dict) or not isinstance(entry.get("sample_id"), str):
            raise ManifestError(
                f"input manifest {path}: every sample needs a string 'sample_id'"
            )
    ids = [entry["sample_id"] for entry in samples]
    if len(ids) != len(set(ids)):
        raise ManifestError(f"input manifest {path}: duplicate sample ids")
    return path.parent / raw["catalog"], samples


def _text_blocks(samples: list[dict], config: AdapterConfig) -> list[Block]:
    notes = {}
    for entry in samples:
        by_type = entry.get("notes", {})
        if not isinstance(by_type, dict):
            raise ManifestError(
                f"sample {entry['sample_id']!r}: 'notes' must map note type to texts"
            )
        notes[entry["sample_id"]] = {
            kind: texts if isinstance(texts, list) else [texts]
            for kind, texts in by_type.items()
        }
    embedded = embed_notes(notes, config)
    return [Block(sid, src, vec) for (sid, src), vec in embedded.items()]


def _image_blocks(samples: list[dict], root: Path, config: AdapterConfig) -> list[Block]:
    images = {}
    for entry in samples:
        listed = entry.get("images", [])
        if not isinstance(listed, list):
            raise ManifestError(f"sample {entry['sample_id']!r}: 'images' must be a list")
        pairs = []
        for item in listed:
            if not isinstance(item, dict) or "path" not in item:
                raise ManifestError(
                    f"sample {entry['sample_id']!r}: each image needs a 'path'"
                )
            pairs.append((root / item["path"], float(item.get("time", 0.0))))
        images[entry["sample_id"]] = pairs
    embedded = embed_images(images, config)
    return [Block(sid, src, vec) for (sid, src), vec in embedded.items()]


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_EXIT
    try:
        config = AdapterConfig(
            model_id=args.model,
            token_limit=args.token_limit,
            image_side=args.image_side,
        )
        manifest_path = Path(args.manifest)
        catalog_path, samples = _load_manifest(manifest_path)
        catalog_dims = load_catalog_dims(catalog_path)
        if args.kind == "text":
            blocks = _text_blocks(samples, config)
            choices = {
                "chunking": "minimal count ceil(T/limit), near-equal sizes",
                "chunk_average": "unweighted arithmetic mean",
            }
        else:
            blocks = _image_blocks(samples, manifest_path.parent, config)
            choices = {
                "single_image": "latest timestamp, path as tie-break",
                "multi_image": "feature-wise mean over all decodable images",
            }
        written = export_blocks(blocks, catalog_dims, args.out, args.format)
        provenance = write_provenance(
            args.out,
            kind=args.kind,
            config=config,
            fmt=args.format,
            files=written,
            input_manifest=manifest_path,
            choices=choices,
        )
    except ExtractorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"wrote {len(blocks)} blocks across {len(written)} file(s) to {args.out}; "
        f"provenance at {provenance}"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
