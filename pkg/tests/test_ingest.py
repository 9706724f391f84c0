import numpy as np
import pytest
from pydantic import ValidationError

from wasserstein_lab.config import config
from wasserstein_lab.constants import CIFAR_RECORD_BYTES, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC, DatasetKind
from wasserstein_lab.core import FormatError, InvalidArgumentError
from wasserstein_lab.ingest import (
    DatasetValidator,
    load_cifar10,
    load_csv,
    load_dataset,
    load_idx,
    load_idx_labels,
    resolve_dataset_path,
    sample_rows,
    sniff_format,
    synth_blobs,
    write_idx,
)
from wasserstein_lab.models import DatasetSource, SampleBatch


def _idx_bytes(magic, dims, payload):
    return np.array([magic, *dims], dtype=">u4").tobytes() + bytes(payload)


def test_idx_images(tmp_path):
    path = tmp_path / "train-images-idx3-ubyte"
    path.write_bytes(_idx_bytes(IDX_IMAGES_MAGIC, [2, 2, 3], range(0, 120, 10)))
    batch = load_idx(path)
    assert batch.image_shape == (2, 3, 1)
    assert batch.data.shape == (2, 6)
    assert batch.data[1, 0] == pytest.approx(60 / 255)


def test_idx_written_images_reload(tmp_path):
    images = SampleBatch(data=np.linspace(0, 1, 8).reshape(2, 4), image_shape=(2, 2, 1))
    path = write_idx(tmp_path / "digits.idx", images)
    again = load_idx(path)
    assert np.allclose(again.data, np.rint(images.data * 255) / 255)
    with pytest.raises(InvalidArgumentError):
        write_idx(tmp_path / "rgb.idx", SampleBatch(data=np.zeros((1, 12)), image_shape=(2, 2, 3)))


def test_idx_labels(tmp_path):
    path = tmp_path / "labels.idx"
    path.write_bytes(_idx_bytes(IDX_LABELS_MAGIC, [3], [7, 1, 4]))
    assert load_idx_labels(path).tolist() == [7, 1, 4]


@pytest.mark.parametrize("raw", [
    b"\x00\x00",
    _idx_bytes(IDX_LABELS_MAGIC, [2, 2, 2], range(8)),
    _idx_bytes(IDX_IMAGES_MAGIC, [2, 2, 2], range(7)),
    np.array([IDX_IMAGES_MAGIC, 1], dtype=">u4").tobytes(),
])
def test_idx_format_errors(tmp_path, raw):
    path = tmp_path / "broken.idx"
    path.write_bytes(raw)
    with pytest.raises(FormatError):
        load_idx(path)


def test_cifar_records(tmp_path):
    record = bytearray(CIFAR_RECORD_BYTES)
    record[0] = 3
    record[1] = 255          # red plane, pixel (0, 0)
    record[1 + 1024] = 51    # green plane, pixel (0, 0)
    path = tmp_path / "data_batch_1.bin"
    path.write_bytes(bytes(record) * 2)
    batch = load_cifar10(path)
    assert batch.size == 2
    assert batch.channels_first
    images = batch.images()
    assert images.shape == (2, 3, 32, 32)
    assert images[0, 0, 0, 0] == 1.0
    assert images[0, 1, 0, 0] == pytest.approx(0.2)


def test_cifar_bad_length(tmp_path):
    path = tmp_path / "short.bin"
    path.write_bytes(bytes(CIFAR_RECORD_BYTES + 5))
    with pytest.raises(FormatError):
        load_cifar10(path)


def test_csv(tmp_path):
    path = tmp_path / "points.csv"
    path.write_text("0,255\n51,102\n")
    assert load_csv(path).data.tolist() == [[0.0, 255.0], [51.0, 102.0]]
    assert load_csv(path, rescale=True).data[1].tolist() == pytest.approx([0.2, 0.4])
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\nx,y\n")
    with pytest.raises(FormatError):
        load_csv(bad)


def test_validator(tmp_path, monkeypatch):
    validator = DatasetValidator()
    with pytest.raises(FileNotFoundError):
        validator.validate_file(tmp_path / "missing.csv")
    odd = tmp_path / "notes.pdf"
    odd.write_bytes(b"x")
    with pytest.raises(FormatError):
        validator.validate_file(odd)
    ubyte = tmp_path / "t10k-images-idx3-ubyte"
    ubyte.write_bytes(b"x")
    assert validator.validate_file(ubyte)["file_extension"] == "ubyte"

    monkeypatch.setattr(config, "max_dataset_size_mb", 0)
    with pytest.raises(FormatError):
        DatasetValidator().validate_file(ubyte)


def test_synth_blobs():
    first = synth_blobs([[0.0, 0.0], [10.0, 10.0]], 0.5, 500, 3)
    assert first.data.shape == (1000, 2)
    assert np.array_equal(first.data, synth_blobs([[0.0, 0.0], [10.0, 10.0]], 0.5, 500, 3).data)
    assert np.allclose(first.data[:500].mean(axis=0), [0.0, 0.0], atol=0.1)
    assert np.allclose(first.data[500:].mean(axis=0), [10.0, 10.0], atol=0.1)
    assert not np.array_equal(first.data, synth_blobs([[0.0, 0.0], [10.0, 10.0]], 0.5, 500, 3, 1).data)
    with pytest.raises(InvalidArgumentError):
        synth_blobs([], 1.0, 3, 0)


def test_load_dataset_dispatch(tmp_path):
    blobs = load_dataset(DatasetSource(kind=DatasetKind.SYNTHETIC_BLOBS, centers=[[1.0]], n_per=4))
    assert blobs.data.shape == (4, 1)
    path = tmp_path / "one.csv"
    path.write_text("1,2,3\n")
    assert load_dataset(DatasetSource(kind="csv", path=str(path))).dim == 3
    with pytest.raises(ValidationError):
        DatasetSource(kind="idx")


def test_sample_rows_are_disjoint():
    batch = SampleBatch(data=np.arange(20, dtype=float).reshape(10, 2))
    first, second = sample_rows(batch, 4, 2, 0)
    rows = {tuple(r) for r in first.data} | {tuple(r) for r in second.data}
    assert len(rows) == 8
    with pytest.raises(InvalidArgumentError):
        sample_rows(batch, 6, 2, 0)


@pytest.mark.parametrize("name", ["t10k-images.idx3-ubyte", "train-images-idx3-ubyte", "digits.idx"])
def test_idx_canonical_names(tmp_path, name):
    images = SampleBatch(data=np.full((3, 4), 0.2), image_shape=(2, 2, 1))
    path = write_idx(tmp_path / name, images)
    assert load_idx(path).size == 3
    assert sniff_format(path) is DatasetKind.IDX


def test_sniff_format(tmp_path):
    csv_path = tmp_path / "points.txt"
    csv_path.write_text("1,2\n3,4\n")
    assert sniff_format(csv_path) is DatasetKind.CSV
    record = bytearray(CIFAR_RECORD_BYTES)
    record[1] = 200
    cifar = tmp_path / "test_batch.bin"
    cifar.write_bytes(bytes(record) * 2)
    assert sniff_format(cifar) is DatasetKind.CIFAR10
    junk = tmp_path / "junk.bin"
    junk.write_bytes(b"\xff\x00\x01")
    with pytest.raises(FormatError):
        sniff_format(junk)


def test_relative_paths_resolve_under_data_path(tmp_path, monkeypatch):
    monkeypatch.setattr(config, "data_path", str(tmp_path))
    (tmp_path / "mnist").mkdir()
    write_idx(tmp_path / "mnist" / "t10k-images.idx3-ubyte",
              SampleBatch(data=np.zeros((2, 4)), image_shape=(2, 2, 1)))
    assert resolve_dataset_path("mnist/t10k-images.idx3-ubyte") == tmp_path / "mnist" / "t10k-images.idx3-ubyte"
    assert load_idx("mnist/t10k-images.idx3-ubyte").size == 2
    assert resolve_dataset_path("nowhere.csv").name == "nowhere.csv"
