import csv
import json
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
from pydantic import BaseModel

from aixtools.logging.logging_config import get_logger

from wasserstein_lab.core import InvalidArgumentError
from wasserstein_lab.models import SampleBatch

logger = get_logger(__name__)


def _jsonable(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def write_json(path: str | Path, payload: dict[str, Any]) -> Path:
    """Write a report as indented JSON, converting models and arrays."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    logger.info("Wrote %s", path)
    return path


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write rows under a fixed header; floats use repr so values round-trip."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else _jsonable(v) for v in row])
    logger.info("Wrote %s", path)
    return path


def tile_images(batch: SampleBatch, columns: int) -> np.ndarray:
    """
    Arrange the images of `batch` row-major on a grid with `columns` tiles per row.

    Color images are averaged over channels; empty grid cells stay 0.
    """
    if batch.image_shape is None:
        raise InvalidArgumentError("tiling needs a batch with an image_shape")
    if columns < 1:
        raise InvalidArgumentError(f"columns must be >= 1, got {columns}")
    h, w, _ = batch.image_shape
    gray = batch.images().mean(axis=1)
    rows = -(-batch.size // columns)
    canvas = np.zeros((rows * h, columns * w))
    for k, image in enumerate(gray):
        r, c = divmod(k, columns)
        canvas[r * h:(r + 1) * h, c * w:(c + 1) * w] = image
    return canvas


def write_pgm(path: str | Path, image: np.ndarray) -> Path:
    """Binary P5 graymap, one byte per pixel, byte = round(255 * value) for values in [0, 1]."""
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise InvalidArgumentError(f"PGM image must be 2-dimensional, got shape {image.shape}")
    pixels = np.clip(np.rint(255.0 * image), 0, 255).astype(np.uint8)
    height, width = pixels.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(f"P5\n{width} {height}\n255\n".encode("ascii") + pixels.tobytes())
    logger.info("Wrote %s", path)
    return path
