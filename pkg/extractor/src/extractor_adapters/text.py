"""Note embedding: concatenate, tokenize, chunk minimally, average.

Long notes never get truncated. A note of T tokens is split into exactly
ceil(T / limit) chunks of near-equal size, each chunk is embedded on its
own, and the unweighted arithmetic mean of the chunk vectors becomes the
note-type block for the sample.
"""

import math
from dataclasses import dataclass

import numpy as np

from .backends import embed_chunk
from .errors import ConfigError, EmptyTextError, ManifestError

NOTE_TYPES = ("radn", "ecgn", "econ")


@dataclass(frozen=True)
class AdapterConfig:
    model_id: str
    token_limit: int = 512
    image_side: int = 224
    batch_size: int = 32

    def __post_init__(self):
        if not self.model_id:
            raise ConfigError("model_id must be non-empty")
        if self.token_limit < 1:
            raise ConfigError(f"token_limit must be >= 1, got {self.token_limit}")
        if self.image_side < 1:
            raise ConfigError(f"image_side must be >= 1, got {self.image_side}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")


def tokenize(text: str) -> tuple[str, ...]:
    return tuple(text.split())


def chunk_tokens(tokens: tuple[str, ...], limit: int) -> list[tuple[str, ...]]:
    """Split into the minimal number of chunks, sizes differing by at most 1."""
    if limit < 1:
        raise ConfigError(f"token limit must be >= 1, got {limit}")
    total = len(tokens)
    if total == 0:
        raise EmptyTextError("cannot chunk zero tokens")
    n_chunks = math.ceil(total / limit)
    base, extra = divmod(total, n_chunks)
    chunks = []
    start = 0
    for i in range(n_chunks):
        size = base + (1 if i < extra else 0)
        chunks.append(tokens[start : start + size])
        start += size
    return chunks


def embed_note_text(text: str, config: AdapterConfig) -> np.ndarray:
    """Embed one concatenated note; raises EmptyTextError on no tokens."""
    tokens = tokenize(text)
    if not tokens:
        raise EmptyTextError("note contains no tokens")
    chunks = chunk_tokens(tokens, config.token_limit)
    vectors = np.stack([embed_chunk(config.model_id, chunk) for chunk in chunks])
    return vectors.mean(axis=0)


def embed_notes(
    notes: dict[str, dict[str, list[str]]], config: AdapterConfig
) -> dict[tuple[str, str], np.ndarray]:
    """Blocks for every (sample, note type) with at least one token.

    `notes` maps sample id -> note type -> list of note texts; the texts of
    a type are concatenated with newlines before chunking. Samples whose
    concatenation is empty are omitted rather than embedded, so they read
    back as absent downstream.
    """
    out: dict[tuple[str, str], np.ndarray] = {}
    for sample_id, by_type in notes.items():
        for note_type, texts in by_type.items():
            if note_type not in NOTE_TYPES:
                raise ManifestError(
                    f"unknown note type {note_type!r} for sample {sample_id!r}; "
                    f"expected one of {list(NOTE_TYPES)}"
                )
            if not all(isinstance(t, str) for t in texts):
                raise ManifestError(
                    f"notes for sample {sample_id!r} type {note_type!r} must be strings"
                )
            try:
                out[(sample_id, note_type)] = embed_note_text("\n".join(texts), config)
            except EmptyTextError:
                continue
    return out
