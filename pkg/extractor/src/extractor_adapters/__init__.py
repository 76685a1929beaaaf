"""Adapters that turn raw notes and images into fusion-ready block files."""

from .errors import (
    CatalogMismatchError,
    ConfigError,
    DecodeError,
    EmptyTextError,
    ExtractorError,
    ManifestError,
)
from .export import Block, export_blocks, load_catalog_dims, write_provenance
from .images import decode_image, embed_images, resize_area
from .text import AdapterConfig, chunk_tokens, embed_note_text, embed_notes, tokenize

__all__ = [
    "AdapterConfig",
    "Block",
    "CatalogMismatchError",
    "ConfigError",
    "DecodeError",
    "EmptyTextError",
    "ExtractorError",
    "ManifestError",
    "chunk_tokens",
    "decode_image",
    "embed_images",
    "embed_note_text",
    "embed_notes",
    "export_blocks",
    "load_catalog_dims",
    "resize_area",
    "tokenize",
    "write_provenance",
]
