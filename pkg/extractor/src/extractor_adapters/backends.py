"""Deterministic stand-ins for the pretrained encoder families.

A real deployment would load a clinical language model and a chest-image
classifier here. This module instead derives every embedding from a keyed
hash of the content, which keeps the surrounding chunking, averaging,
selection, and export logic fully exercised and bit-reproducible on any
machine with no model weights. Swapping in real models only requires
replacing `embed_chunk` and `embed_image_array`; all shapes and contracts
stay the same.
"""

import hashlib

import numpy as np

TEXT_DIM = 768
PROB_DIM = 18
DENSE_DIM = 1024


def seeded_vector(key: bytes, dim: int) -> np.ndarray:
    digest = hashlib.blake2b(key, digest_size=16).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "big"))
    return rng.standard_normal(dim)


def embed_chunk(model_id: str, tokens: tuple[str, ...]) -> np.ndarray:
    """One 768-dim vector per token chunk; equal chunks embed equally."""
    payload = model_id.encode() + b"\x1f" + " ".join(tokens).encode()
    return seeded_vector(payload, TEXT_DIM)


def embed_image_array(model_id: str, image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Probability head (18, in (0,1)) and dense features (1024) for one image."""
    body = np.ascontiguousarray(image, dtype=np.float32).tobytes()
    header = f"{image.shape[0]}x{image.shape[1]}".encode()
    logits = seeded_vector(model_id.encode() + b":prob\x1f" + header + body, PROB_DIM)
    dense = seeded_vector(model_id.encode() + b":dense\x1f" + header + body, DENSE_DIM)
    prob = 1.0 / (1.0 + np.exp(-logits))
    return prob, dense
