"""Synthetic labeled clusters on the unit sphere.

Class centers are drawn uniformly on the sphere; members are the centers
plus isotropic Gaussian noise, re-projected onto the sphere. The noise
scale (intra_spread) tunes the intra-class variance relative to the fixed
inter-class geometry: small spreads give tight, easily separated classes,
large spreads the overlapping high-variance regime where hard triplets
dominate. Generation is a pure function of the config.

Datasets serialize to CSV with header ``label,x0,...,x{d-1}`` and values
at 12 significant digits.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.12g"


class DatasetParseError(ValueError):
    """Malformed dataset file; message carries the 1-based line number."""


@dataclass(frozen=True)
class DatasetConfig:
    num_classes: int
    per_class: int
    input_dim: int
    intra_spread: float
    seed: int

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.per_class < 2:
            raise ValueError("per_class must be >= 2")
        if self.input_dim < 2:
            raise ValueError("input_dim must be >= 2")
        if self.intra_spread < 0:
            raise ValueError("intra_spread must be >= 0")


@dataclass(frozen=True)
class LabeledDataset:
    points: np.ndarray  # (n, input_dim), unit rows
    labels: np.ndarray  # (n,), int class ids

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)
        if points.ndim != 2 or points.shape[0] != labels.shape[0]:
            raise ValueError("points and labels must be parallel arrays")

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def num_classes(self) -> int:
        return int(np.unique(self.labels).size)


def generate(config: DatasetConfig) -> LabeledDataset:
    """Draw a dataset from the config's seed.

    Centers are normalized standard-Gaussian draws (uniform on the
    sphere); each member is normalize(center + intra_spread * noise)
    where the Gaussian noise vector has expected norm ~1, so intra_spread
    is the noise magnitude relative to the unit class center (0.1 gives
    tight clusters, 2.0 noise twice as strong as the class signal).
    """
    rng = np.random.default_rng(config.seed)
    centers = rng.standard_normal((config.num_classes, config.input_dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    noise = rng.standard_normal(
        (config.num_classes, config.per_class, config.input_dim)
    ) / np.sqrt(config.input_dim)
    points = centers[:, None, :] + config.intra_spread * noise
    points = points.reshape(-1, config.input_dim)
    points /= np.linalg.norm(points, axis=1, keepdims=True)
    labels = np.repeat(np.arange(config.num_classes), config.per_class)
    return LabeledDataset(points=points, labels=labels)


def save(ds: LabeledDataset, path: str | Path) -> None:
    """Write the dataset as a deterministic CSV."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["label"] + [f"x{i}" for i in range(ds.dim)]
        )
        for label, row in zip(ds.labels, ds.points):
            writer.writerow([int(label)] + [FLOAT_FMT % x for x in row])


def load(path: str | Path) -> LabeledDataset:
    """Read a dataset CSV, reporting malformed lines by number."""
    path = Path(path)
    with path.open("r", newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows:
        raise DatasetParseError(f"{path}: empty dataset file")
    header = rows[0]
    if len(header) < 3 or header[0] != "label":
        raise DatasetParseError(
            f"{path}: line 1: expected header 'label,x0,...', got {header!r}"
        )
    dim = len(header) - 1
    points = []
    labels = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != dim + 1:
            raise DatasetParseError(
                f"{path}: line {lineno}: expected {dim + 1} columns, "
                f"got {len(row)}"
            )
        try:
            labels.append(int(row[0]))
            points.append([float(x) for x in row[1:]])
        except ValueError as exc:
            raise DatasetParseError(
                f"{path}: line {lineno}: {exc}"
            ) from exc
    if not points:
        raise DatasetParseError(f"{path}: no data rows")
    return LabeledDataset(
        points=np.asarray(points), labels=np.asarray(labels)
    )
