"""Image embedding: decode, area-resample to a square, embed, aggregate.

Each decodable image yields a probability vector and a dense feature
vector. The sample's vp/vd blocks come from its most recent image (by
timestamp, path as the tie-break); vmp/vmd are feature-wise means over
every decodable image. Undecodable files are skipped with a warning, and
a sample with no decodable image produces no blocks at all.
"""

import logging
import math
from pathlib import Path

import numpy as np

from .backends import embed_image_array
from .errors import DecodeError
from .text import AdapterConfig

log = logging.getLogger(__name__)

IMAGE_SOURCES = ("vp", "vd", "vmp", "vmd")


def decode_image(path: str | Path) -> np.ndarray:
    """A 2-D float array from a .npy dump or any common raster format."""
    path = Path(path)
    try:
        if path.suffix == ".npy":
            arr = np.asarray(np.load(path), dtype=np.float64)
        else:
            from PIL import Image

            with Image.open(path) as img:
                arr = np.asarray(img.convert("F"), dtype=np.float64)
    except DecodeError:
        raise
    except Exception as exc:
        raise DecodeError(f"{path}: {exc}") from exc
    if arr.ndim != 2 or arr.size == 0:
        raise DecodeError(f"{path}: expected a non-empty 2-D image, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DecodeError(f"{path}: image contains non-finite values")
    return arr


def _area_weights(n_in: int, n_out: int) -> np.ndarray:
    # row i holds each input cell's fractional overlap with output cell i
    weights = np.zeros((n_out, n_in))
    scale = n_in / n_out
    for i in range(n_out):
        lo = i * scale
        hi = (i + 1) * scale
        for j in range(int(math.floor(lo)), min(int(math.ceil(hi)), n_in)):
            weights[i, j] = min(hi, j + 1.0) - max(lo, float(j))
    return weights / scale


def resize_area(image: np.ndarray, side: int) -> np.ndarray:
    """Area-relation resampling to side x side; preserves the global mean."""
    rows = _area_weights(image.shape[0], side)
    cols = _area_weights(image.shape[1], side)
    return rows @ image @ cols.T


def embed_images(
    images: dict[str, list[tuple[str | Path, float]]], config: AdapterConfig
) -> dict[tuple[str, str], np.ndarray]:
    """Blocks for vp/vd (latest image) and vmp/vmd (mean over all images).

    `images` maps sample id -> list of (path, timestamp) pairs. Averages
    run over images sorted by (timestamp, path), so permuting the input
    list never changes any output bit.
    """
    out: dict[tuple[str, str], np.ndarray] = {}
    for sample_id, entries in images.items():
        decoded = []
        for path, when in entries:
            try:
                arr = resize_area(decode_image(path), config.image_side)
            except DecodeError as exc:
                log.warning("sample %s: skipping image: %s", sample_id, exc)
                continue
            decoded.append((float(when), str(path), arr))
        if not decoded:
            log.warning("sample %s: no decodable images, omitting blocks", sample_id)
            continue
        decoded.sort(key=lambda item: (item[0], item[1]))
        probs, denses = [], []
        for _, _, arr in decoded:
            prob, dense = embed_image_array(config.model_id, arr)
            probs.append(prob)
            denses.append(dense)
        out[(sample_id, "vp")] = probs[-1]
        out[(sample_id, "vd")] = denses[-1]
        out[(sample_id, "vmp")] = np.stack(probs).mean(axis=0)
        out[(sample_id, "vmd")] = np.stack(denses).mean(axis=0)
    return out
