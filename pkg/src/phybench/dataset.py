# Supervised datasets with train/validation/test splits and the .phyd file.

import enum
import itertools
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .fileformat import DATA_HDR_SIZE, F8, I8, DatasetHeader, expect_eof, read_array, read_exact, write_array

logger = logging.getLogger(__name__)


class SplitTag(enum.IntEnum):
    TRAIN = 0
    VALIDATION = 1
    TEST = 2


@dataclass
class Dataset:
    """Rows of real features/labels, each tagged with a split.

    source_ids identify the generated sample behind each row; the audit
    requires every id to belong to exactly one split.
    """

    features: np.ndarray     # (rows, input_dim)
    labels: np.ndarray       # (rows, output_dim)
    split: np.ndarray        # (rows,) SplitTag values
    source_ids: np.ndarray   # (rows,) int64
    seed: int = 0

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        self.labels = np.atleast_2d(np.asarray(self.labels, dtype=np.float64))
        self.split = np.asarray(self.split, dtype=np.int64)
        self.source_ids = np.asarray(self.source_ids, dtype=np.int64)
        rows = self.features.shape[0]
        if self.labels.shape[0] != rows or self.split.shape != (rows,) or self.source_ids.shape != (rows,):
            raise InvalidInputError(
                f"row counts differ: features {rows}, labels {self.labels.shape[0]}, "
                f"split {self.split.size}, source ids {self.source_ids.size}")
        if rows and not np.isin(self.split, [t.value for t in SplitTag]).all():
            raise InvalidInputError("unknown split tag")
        if not (np.all(np.isfinite(self.features)) and np.all(np.isfinite(self.labels))):
            raise InvalidInputError("dataset contains non-finite values")
        self.audit_splits()

    @classmethod
    def from_splits(cls, parts: dict, seed: int = 0) -> "Dataset":
        """Build from {SplitTag: (features, labels, source_ids)}."""
        feats, labs, tags, ids = [], [], [], []
        for tag in SplitTag:
            if tag not in parts:
                continue
            x, y, src = parts[tag]
            x = np.atleast_2d(np.asarray(x, dtype=np.float64))
            feats.append(x)
            labs.append(np.atleast_2d(np.asarray(y, dtype=np.float64)))
            tags.append(np.full(x.shape[0], tag.value, dtype=np.int64))
            ids.append(np.asarray(src, dtype=np.int64))
        if not feats:
            raise InvalidInputError("dataset has no splits")
        return cls(features=np.concatenate(feats), labels=np.concatenate(labs),
                   split=np.concatenate(tags), source_ids=np.concatenate(ids), seed=seed)

    @classmethod
    def training_only(cls, features, labels, seed: int = 0) -> "Dataset":
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        return cls.from_splits({SplitTag.TRAIN: (x, labels, np.arange(x.shape[0]))}, seed=seed)

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    @property
    def output_dim(self) -> int:
        return self.labels.shape[1]

    def split_size(self, tag: SplitTag) -> int:
        return int(np.count_nonzero(self.split == tag))

    def subset(self, tag: SplitTag) -> tuple[np.ndarray, np.ndarray]:
        mask = self.split == tag
        return self.features[mask], self.labels[mask]

    def audit_splits(self) -> None:
        """Raise if any source id appears in more than one split."""
        ids = {tag: np.unique(self.source_ids[self.split == tag]) for tag in SplitTag}
        for a, b in itertools.combinations(SplitTag, 2):
            both = np.intersect1d(ids[a], ids[b])
            if both.size:
                raise InvalidInputError(
                    f"{both.size} source ids shared by {a.name} and {b.name} (first: {int(both[0])})")


def save_dataset(ds: Dataset, path) -> Path:
    path = Path(path)
    hdr = DatasetHeader(input_dim=ds.input_dim, output_dim=ds.output_dim,
                        n_train=ds.split_size(SplitTag.TRAIN),
                        n_validation=ds.split_size(SplitTag.VALIDATION),
                        n_test=ds.split_size(SplitTag.TEST), seed=ds.seed)
    # stable sort keeps the generation order inside each split
    order = np.argsort(ds.split, kind="stable")
    rows = np.concatenate([ds.features[order], ds.labels[order]], axis=1)
    with open(path, "wb") as f:
        f.write(hdr.pack())
        write_array(f, rows, F8)
        write_array(f, ds.source_ids[order], I8)
    logger.info("wrote dataset %s (%d/%d/%d rows)", path, hdr.n_train, hdr.n_validation, hdr.n_test)
    return path


def load_dataset(path) -> Dataset:
    with open(path, "rb") as f:
        hdr = DatasetHeader.unpack(read_exact(f, DATA_HDR_SIZE, "dataset header"))
        width = hdr.input_dim + hdr.output_dim
        rows = read_array(f, F8, (hdr.num_rows, width), "dataset rows")
        ids = read_array(f, I8, (hdr.num_rows,), "dataset source ids")
        expect_eof(f, "dataset payload")
    split = np.repeat([t.value for t in SplitTag], [hdr.n_train, hdr.n_validation, hdr.n_test])
    return Dataset(features=rows[:, :hdr.input_dim], labels=rows[:, hdr.input_dim:],
                   split=split, source_ids=ids, seed=hdr.seed)
