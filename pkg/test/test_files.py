# .phyn checkpoints and .phyd datasets: layout, bit-exact reload, corruption

import struct

import numpy as np
import pytest

from phybench.checkpoint import load_checkpoint, save_checkpoint
from phybench.dataset import Dataset, SplitTag, load_dataset, save_dataset
from phybench.errors import FileFormatError, InvalidInputError
from phybench.fileformat import (CKPT_HDR_SIZE, DATA_HDR_SIZE, LAYER_SIZE, CheckpointHeader,
                                 DatasetHeader, NoiseFlag)
from phybench.nn import Activation, MlpSpec, NoiseLayerSpec, init_xavier


def _noisy_mlp():
    noise = NoiseLayerSpec(position=2, normalize_energy=True, snr_db_range=(1.25, 7.5), per_example=True)
    spec = MlpSpec(layer_sizes=(16, 32, 7, 32, 16),
                   activations=(Activation.RELU, Activation.LINEAR, Activation.RELU, Activation.SOFTMAX),
                   noise_layer=noise)
    return init_xavier(spec, 42)


def _dataset():
    rng = np.random.default_rng(1)
    x, y = rng.standard_normal((10, 3)), rng.standard_normal((10, 2))
    return Dataset.from_splits({
        SplitTag.TRAIN: (x[:6], y[:6], np.arange(6)),
        SplitTag.VALIDATION: (x[6:8], y[6:8], np.arange(6, 8)),
        SplitTag.TEST: (x[8:], y[8:], np.arange(8, 10)),
    }, seed=77)


def test_header_sizes():
    assert (CKPT_HDR_SIZE, LAYER_SIZE, DATA_HDR_SIZE) == (28, 10, 34)
    raw = CheckpointHeader(num_layers=3, noise_position=1, noise_flags=NoiseFlag.NORMALIZE_ENERGY,
                           snr_low_db=0.5, snr_high_db=2.0).pack()
    assert raw[:4] == b"PHYN" and len(raw) == CKPT_HDR_SIZE
    hdr = DatasetHeader(input_dim=3, output_dim=2, n_train=6, n_validation=2, n_test=2, seed=5)
    assert hdr.payload_size == 10 * (5 * 8 + 8)


def test_checkpoint_reload_is_bit_exact(tmp_path):
    mlp = _noisy_mlp()
    path = save_checkpoint(mlp, tmp_path / "ae.phyn")
    expected_size = CKPT_HDR_SIZE + 4 * LAYER_SIZE + 8 * mlp.num_parameters
    back = load_checkpoint(path)
    results = [
        ("file size", path.stat().st_size == expected_size),
        ("spec", back.spec == mlp.spec),
        ("weights", all(np.array_equal(a, b) for a, b in zip(back.weights, mlp.weights))),
        ("biases", all(np.array_equal(a, b) for a, b in zip(back.biases, mlp.biases))),
    ]
    x = np.eye(16)
    results.append(("same outputs", np.array_equal(back.predict(x), mlp.predict(x))))
    plain = init_xavier(MlpSpec.dense(3, (4,), 2), 0)
    results.append(("no noise layer", load_checkpoint(save_checkpoint(plain, tmp_path / "p.phyn")).spec == plain.spec))
    failures = [desc for desc, passed in results if not passed]
    assert not failures, f"Failed: {failures}"


def test_checkpoint_corruption(tmp_path):
    path = save_checkpoint(_noisy_mlp(), tmp_path / "c.phyn")
    data = path.read_bytes()
    cases = {
        "truncated": data[:-1],
        "trailing": data + b"\x00",
        "magic": b"XXXX" + data[4:],
        "version": data[:4] + struct.pack("<H", 9) + data[6:],
        "activation": data[:CKPT_HDR_SIZE] + struct.pack("<H", 9) + data[CKPT_HDR_SIZE + 2:],
        "fan mismatch": data[:CKPT_HDR_SIZE + 6] + struct.pack("<I", 31) + data[CKPT_HDR_SIZE + 10:],
    }
    results = []
    for desc, blob in cases.items():
        bad = tmp_path / f"{desc}.phyn"
        bad.write_bytes(blob)
        try:
            load_checkpoint(bad)
            results.append((desc, False))
        except FileFormatError:
            results.append((desc, True))
    failures = [desc for desc, passed in results if not passed]
    assert not failures, f"Failed: {failures}"


def test_dataset_reload(tmp_path):
    ds = _dataset()
    path = save_dataset(ds, tmp_path / "d.phyd")
    assert path.stat().st_size == DATA_HDR_SIZE + 10 * (5 * 8 + 8)
    back = load_dataset(path)
    assert back.seed == 77
    for tag in SplitTag:
        x0, y0 = ds.subset(tag)
        x1, y1 = back.subset(tag)
        assert np.array_equal(x0, x1) and np.array_equal(y0, y1), tag
    assert np.array_equal(back.source_ids, ds.source_ids)

    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(FileFormatError):
        load_dataset(path)


def test_split_audit():
    x, y = np.zeros((4, 2)), np.zeros((4, 1))
    with pytest.raises(InvalidInputError):
        Dataset.from_splits({SplitTag.TRAIN: (x[:2], y[:2], [0, 1]), SplitTag.TEST: (x[2:], y[2:], [1, 2])})
    # repeated ids inside one split are fine
    ds = Dataset.from_splits({SplitTag.TRAIN: (x, y, [0, 0, 1, 1])})
    assert ds.split_size(SplitTag.TRAIN) == 4 and ds.split_size(SplitTag.TEST) == 0
    with pytest.raises(InvalidInputError):
        Dataset(features=x, labels=y[:3], split=np.zeros(4), source_ids=np.arange(4))
    with pytest.raises(InvalidInputError):
        Dataset.training_only(np.array([[np.inf, 0.0]]), np.zeros((1, 1)))
