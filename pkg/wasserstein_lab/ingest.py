"""
Dataset loading: CSV matrices, IDX (MNIST) and CIFAR-10 binary files, plus seeded
Gaussian blobs. Pixel formats are rescaled to [0, 1] by config.pixel_scale.
"""
from __future__ import annotations

import io
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from aixtools.logging.logging_config import get_logger

from wasserstein_lab.config import config
from wasserstein_lab.constants import (
    CIFAR_CHANNELS,
    CIFAR_RECORD_BYTES,
    CIFAR_SIDE,
    IDX_IMAGES_MAGIC,
    IDX_LABELS_MAGIC,
    DatasetKind,
)
from wasserstein_lab.core import FormatError, InvalidArgumentError
from wasserstein_lab.models import DatasetSource, SampleBatch
from wasserstein_lab.rng import box_muller, make_rng

logger = get_logger(__name__)


class DatasetValidator:
    """Checks a dataset file before it is parsed."""

    def __init__(self):
        self.max_size_bytes = config.max_dataset_size_mb * 1024 * 1024
        self.allowed_extensions = set(config.allowed_dataset_types)

    def validate_file(self, file_path: Path | str) -> dict[str, Any]:
        """
        Validate existence, extension and size of a dataset file.

        Returns:
            dict: file name, extension and size

        Raises:
            FileNotFoundError: the file does not exist
            FormatError: extension not allowed or file too large
        """
        file_path = Path(file_path)
        if not file_path.is_file():
            raise FileNotFoundError(f"Dataset file does not exist: {file_path}")
        file_extension = self._get_file_extension(file_path)
        self._validate_extension(file_extension)
        file_size = self._validate_size(file_path)
        return {
            'file_name': file_path.name,
            'file_extension': file_extension,
            'file_size': file_size,
        }

    def _get_file_extension(self, file_path: Path) -> str:
        """
        Last dash-separated token of the suffix (or of the name when there is none), so
        train-images-idx3-ubyte and t10k-images.idx3-ubyte both give 'ubyte'.
        """
        extension = file_path.suffix.lower().lstrip('.') or file_path.name.lower()
        return extension.rsplit('-', 1)[-1]

    def _validate_extension(self, extension: str) -> None:
        if extension not in self.allowed_extensions:
            raise FormatError(
                f"File type '{extension}' not allowed. "
                f"Allowed types: {', '.join(sorted(self.allowed_extensions))}"
            )

    def _validate_size(self, file_path: Path) -> int:
        file_size = file_path.stat().st_size
        if file_size > self.max_size_bytes:
            max_mb = self.max_size_bytes / (1024 * 1024)
            actual_mb = file_size / (1024 * 1024)
            raise FormatError(f"File too large: {actual_mb:.1f}MB (max: {max_mb:.1f}MB)")
        return file_size


def resolve_dataset_path(path: Path | str) -> Path:
    """`path` itself when it exists, else the same relative path under config.data_path."""
    path = Path(path)
    if path.exists() or path.is_absolute():
        return path
    candidate = config.get_data_path() / path
    return candidate if candidate.exists() else path


def _read_bytes(path: Path | str) -> bytes:
    path = resolve_dataset_path(path)
    info = DatasetValidator().validate_file(path)
    logger.debug("Reading %s (%d bytes)", info['file_name'], info['file_size'])
    return path.read_bytes()


def sniff_format(path: Path | str) -> DatasetKind:
    """
    Detect the file format from its content: IDX image magic, whole CIFAR-10 records,
    otherwise comma-separated text.

    Raises:
        FormatError: binary content that is neither IDX images nor CIFAR-10 records
    """
    raw = _read_bytes(path)
    if len(raw) >= 4 and int(np.frombuffer(raw[:4], dtype=">u4")[0]) == IDX_IMAGES_MAGIC:
        return DatasetKind.IDX
    try:
        raw.decode("ascii")
    except UnicodeDecodeError:
        if raw and len(raw) % CIFAR_RECORD_BYTES == 0:
            return DatasetKind.CIFAR10
        raise FormatError(f"{path}: binary content is neither IDX images nor CIFAR-10 records") from None
    return DatasetKind.CSV


def _parse_idx(raw: bytes, magic: int, path: Path | str) -> tuple[tuple[int, ...], np.ndarray]:
    if len(raw) < 4:
        raise FormatError(f"{path}: too short for an IDX header")
    found = int(np.frombuffer(raw[:4], dtype=">u4")[0])
    if found != magic:
        raise FormatError(f"{path}: IDX magic 0x{found:08x}, expected 0x{magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise FormatError(f"{path}: truncated IDX header")
    dims = tuple(int(d) for d in np.frombuffer(raw[4:header], dtype=">u4"))
    payload = np.frombuffer(raw[header:], dtype=np.uint8)
    expected = int(np.prod(dims))
    if payload.size != expected:
        raise FormatError(f"{path}: IDX payload has {payload.size} bytes, dimensions {dims} need {expected}")
    return dims, payload


def load_idx(path: Path | str) -> SampleBatch:
    """Images of an IDX file (magic 0x00000803), flattened row-major and rescaled to [0, 1]."""
    (n, h, w), payload = _parse_idx(_read_bytes(path), IDX_IMAGES_MAGIC, path)
    data = payload.reshape(n, h * w) / config.pixel_scale
    logger.info("Loaded %d IDX images of %dx%d from %s", n, h, w, path)
    return SampleBatch(data=data, image_shape=(h, w, 1))


def load_idx_labels(path: Path | str) -> np.ndarray:
    """Labels of an IDX file (magic 0x00000801)."""
    _, payload = _parse_idx(_read_bytes(path), IDX_LABELS_MAGIC, path)
    return payload.copy()


def write_idx(path: Path | str, batch: SampleBatch) -> Path:
    """Write single-channel images as an IDX file, pixels round(value * pixel_scale)."""
    if batch.image_shape is None or batch.image_shape[2] != 1:
        raise InvalidArgumentError("IDX images need a single-channel image_shape")
    h, w, _ = batch.image_shape
    pixels = np.clip(np.rint(batch.data * config.pixel_scale), 0, 255).astype(np.uint8)
    header = np.array([IDX_IMAGES_MAGIC, batch.size, h, w], dtype=">u4").tobytes()
    path = Path(path)
    path.write_bytes(header + pixels.tobytes())
    return path


def load_cifar10(path: Path | str) -> SampleBatch:
    """CIFAR-10 binary batch: 3073-byte records of one label and R, G, B planes of 32x32; labels dropped."""
    raw = _read_bytes(path)
    if not raw or len(raw) % CIFAR_RECORD_BYTES:
        raise FormatError(f"{path}: length {len(raw)} is not a multiple of {CIFAR_RECORD_BYTES}")
    records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
    logger.info("Loaded %d CIFAR-10 records from %s", len(records), path)
    return SampleBatch(data=records[:, 1:] / config.pixel_scale,
                       image_shape=(CIFAR_SIDE, CIFAR_SIDE, CIFAR_CHANNELS),
                       channels_first=True)


def load_csv(path: Path | str, rescale: bool = False) -> SampleBatch:
    """Comma-separated floats, one sample per line, no header; optionally divided by pixel_scale."""
    raw = _read_bytes(path)
    try:
        data = np.loadtxt(io.StringIO(raw.decode("utf-8")), delimiter=",", ndmin=2, dtype=float)
    except (ValueError, UnicodeDecodeError) as e:
        raise FormatError(f"{path}: {e}") from e
    if data.size == 0:
        raise FormatError(f"{path}: no samples")
    return SampleBatch(data=data / config.pixel_scale if rescale else data)


def synth_blobs(centers: Sequence[Sequence[float]], scale: float, n_per: int, seed: int,
                *stream: int) -> SampleBatch:
    """
    `n_per` Gaussian samples of standard deviation `scale` around every center, blob after blob.

    Draws come from the Philox stream (seed, *stream) through Box-Muller, so the output
    is identical on every platform.
    """
    centers = np.asarray(centers, dtype=float)
    if centers.ndim != 2 or len(centers) == 0:
        raise InvalidArgumentError("synthetic blobs need a non-empty list of centers")
    if scale <= 0 or n_per < 1:
        raise InvalidArgumentError(f"need scale > 0 and n_per >= 1, got {scale}, {n_per}")
    noise = box_muller(make_rng(seed, *stream), (len(centers) * n_per, centers.shape[1]))
    return SampleBatch(data=np.repeat(centers, n_per, axis=0) + scale * noise)


def load_dataset(source: DatasetSource) -> SampleBatch:
    match source.kind:
        case DatasetKind.CSV:
            return load_csv(source.path)
        case DatasetKind.IDX:
            return load_idx(source.path)
        case DatasetKind.CIFAR10:
            return load_cifar10(source.path)
        case DatasetKind.SYNTHETIC_BLOBS:
            return synth_blobs(source.centers, source.scale, source.n_per, source.seed, *source.stream)


def sample_rows(batch: SampleBatch, size: int, count: int, seed: int, *stream: int) -> list[SampleBatch]:
    """`count` disjoint batches of `size` rows drawn without replacement."""
    if size < 1 or size * count > batch.size:
        raise InvalidArgumentError(f"cannot draw {count} disjoint batches of {size} from {batch.size} rows")
    order = make_rng(seed, *stream).permutation(batch.size)
    return [batch.take(order[k * size:(k + 1) * size]) for k in range(count)]
