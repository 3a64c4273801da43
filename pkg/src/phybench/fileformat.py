# Binary layouts of model checkpoints (.phyn) and datasets (.phyd).
#
# Both are little-endian: a fixed struct header, then row-major <f8
# payloads. Readers check magic, version and payload size before
# touching the arrays.

import enum
import struct
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

from .errors import FileFormatError

CKPT_MAGIC = b"PHYN"
CKPT_VERSION = 1
CKPT_HDR_FMT = "<4sHHHHdd"
CKPT_HDR_SIZE = struct.calcsize(CKPT_HDR_FMT)  # 28

LAYER_FMT = "<HII"
LAYER_SIZE = struct.calcsize(LAYER_FMT)  # 10

NO_NOISE_LAYER = 0xFFFF

DATA_MAGIC = b"PHYD"
DATA_VERSION = 1
DATA_HDR_FMT = "<4sHIIIIIQ"
DATA_HDR_SIZE = struct.calcsize(DATA_HDR_FMT)  # 34

F8 = np.dtype("<f8")
I8 = np.dtype("<i8")


class NoiseFlag(enum.IntFlag):
    NONE = 0
    NORMALIZE_ENERGY = 1
    PER_EXAMPLE = 2


def _check_magic(magic: bytes, expected: bytes, version: int, supported: int):
    if magic != expected:
        raise FileFormatError(f"bad magic {magic!r}, expected {expected!r}")
    if version != supported:
        raise FileFormatError(f"unsupported {expected.decode()} version {version} (reader is v{supported})")


@dataclass
class CheckpointHeader:
    num_layers: int
    noise_position: int = NO_NOISE_LAYER
    noise_flags: NoiseFlag = NoiseFlag.NONE
    snr_low_db: float = 0.0
    snr_high_db: float = 0.0
    version: int = CKPT_VERSION

    def pack(self) -> bytes:
        return struct.pack(CKPT_HDR_FMT, CKPT_MAGIC, self.version, self.num_layers,
                           self.noise_position, int(self.noise_flags),
                           self.snr_low_db, self.snr_high_db)

    @classmethod
    def unpack(cls, data: bytes) -> "CheckpointHeader":
        magic, version, layers, pos, flags, lo, hi = struct.unpack(CKPT_HDR_FMT, data)
        _check_magic(magic, CKPT_MAGIC, version, CKPT_VERSION)
        return cls(num_layers=layers, noise_position=pos, noise_flags=NoiseFlag(flags),
                   snr_low_db=lo, snr_high_db=hi, version=version)


@dataclass
class LayerDescriptor:
    activation: int
    fan_in: int
    fan_out: int

    @property
    def param_count(self) -> int:
        return self.fan_in * self.fan_out + self.fan_out

    def pack(self) -> bytes:
        return struct.pack(LAYER_FMT, self.activation, self.fan_in, self.fan_out)

    @classmethod
    def unpack(cls, data: bytes) -> "LayerDescriptor":
        act, fan_in, fan_out = struct.unpack(LAYER_FMT, data)
        return cls(activation=act, fan_in=fan_in, fan_out=fan_out)


@dataclass
class DatasetHeader:
    input_dim: int
    output_dim: int
    n_train: int
    n_validation: int
    n_test: int
    seed: int
    version: int = DATA_VERSION

    @property
    def num_rows(self) -> int:
        return self.n_train + self.n_validation + self.n_test

    @property
    def payload_size(self) -> int:
        # rows of features+labels, then one int64 source index per row
        return self.num_rows * ((self.input_dim + self.output_dim) * F8.itemsize + I8.itemsize)

    def pack(self) -> bytes:
        return struct.pack(DATA_HDR_FMT, DATA_MAGIC, self.version, self.input_dim, self.output_dim,
                           self.n_train, self.n_validation, self.n_test, self.seed)

    @classmethod
    def unpack(cls, data: bytes) -> "DatasetHeader":
        magic, version, din, dout, ntr, nva, nte, seed = struct.unpack(DATA_HDR_FMT, data)
        _check_magic(magic, DATA_MAGIC, version, DATA_VERSION)
        return cls(input_dim=din, output_dim=dout, n_train=ntr, n_validation=nva,
                   n_test=nte, seed=seed, version=version)


def read_exact(f: BinaryIO, n: int, what: str) -> bytes:
    """Read exactly n bytes or fail naming the truncated section."""
    data = f.read(n)
    if len(data) != n:
        raise FileFormatError(f"truncated {what}: wanted {n} bytes, got {len(data)}")
    return data


def read_array(f: BinaryIO, dtype: np.dtype, shape: tuple[int, ...], what: str) -> np.ndarray:
    count = int(np.prod(shape, dtype=np.int64))
    raw = read_exact(f, count * dtype.itemsize, what)
    return np.frombuffer(raw, dtype=dtype).astype(dtype.newbyteorder("="), copy=True).reshape(shape)


def write_array(f: BinaryIO, arr: np.ndarray, dtype: np.dtype = F8) -> None:
    f.write(np.ascontiguousarray(arr, dtype=dtype).tobytes())


def expect_eof(f: BinaryIO, what: str) -> None:
    if f.read(1):
        raise FileFormatError(f"trailing bytes after {what}")
