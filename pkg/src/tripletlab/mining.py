"""Batch triplet mining on the similarity matrix.

A batch is a set of unit embeddings with class labels. Each strategy emits
one triplet per eligible anchor (an anchor is eligible when its class has a
second member; singleton-class anchors are skipped). Ties are always broken
toward the lowest index, and any randomness is driven by the caller's seed,
so mining is a pure function of (batch, strategy, seed).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np

from .geometry import TripletCoord
from .losses import is_hard

__all__ = [
    "Batch",
    "MinedTriplet",
    "MiningStrategy",
    "NoNegativesError",
    "hard_fraction",
    "is_hard",
    "mine",
    "similarity_matrix",
]


class NoNegativesError(ValueError):
    """Raised when a batch has no second class to mine negatives from."""


@dataclass(frozen=True)
class Batch:
    """Unit embeddings with parallel class labels."""

    embeddings: np.ndarray  # (n, d), rows unit-norm
    labels: np.ndarray  # (n,)

    def __post_init__(self):
        emb = np.asarray(self.embeddings, dtype=np.float64)
        labels = np.asarray(self.labels)
        object.__setattr__(self, "embeddings", emb)
        object.__setattr__(self, "labels", labels)
        if emb.ndim != 2 or emb.shape[0] != labels.shape[0]:
            raise ValueError("embeddings and labels must be parallel arrays")
        if emb.shape[0] < 2:
            raise ValueError("a batch needs at least 2 items")
        norms = np.linalg.norm(emb, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise ValueError("batch embeddings must be unit vectors")

    def __len__(self) -> int:
        return self.embeddings.shape[0]


class MiningStrategy(str, Enum):
    RANDOM = "random"
    HARD_NEGATIVE = "hn"
    SEMI_HARD_NEGATIVE = "shn"
    EASY_POSITIVE = "ep"
    EASY_POSITIVE_HARD_NEGATIVE = "ephn"


class MinedTriplet(NamedTuple):
    anchor: int
    positive: int
    negative: int
    coord: TripletCoord


def similarity_matrix(batch: Batch) -> np.ndarray:
    """Pairwise cosine matrix, clamped to [-1, 1]."""
    return np.clip(batch.embeddings @ batch.embeddings.T, -1.0, 1.0)


def _coord(sims: np.ndarray, a: int, p: int, n: int) -> TripletCoord:
    return TripletCoord(float(sims[a, p]), float(sims[a, n]))


def mine(
    batch: Batch, strategy: MiningStrategy, seed: int
) -> list[MinedTriplet]:
    """Select one triplet per eligible anchor.

    hn   : most similar different-class negative, random positive
    shn  : most similar negative still below the chosen positive's
           similarity; falls back to the least similar negative when no
           candidate qualifies
    ep   : most similar positive, random negative
    ephn : most similar positive and most similar negative
    random: seeded-uniform positive and negative

    argmax/argmin resolve ties at the lowest index. Raises
    NoNegativesError when the batch holds a single class.
    """
    labels = batch.labels
    if len(np.unique(labels)) < 2:
        raise NoNegativesError("batch contains a single class; no negatives")
    sims = similarity_matrix(batch)
    rng = np.random.default_rng(seed)
    triplets: list[MinedTriplet] = []
    n_items = len(batch)
    for a in range(n_items):
        same = labels == labels[a]
        pos_idx = np.flatnonzero(same)
        pos_idx = pos_idx[pos_idx != a]
        if pos_idx.size == 0:
            continue  # singleton class: nothing to anchor against
        neg_idx = np.flatnonzero(~same)
        row = sims[a]
        if strategy == MiningStrategy.RANDOM:
            p = int(rng.choice(pos_idx))
            n = int(rng.choice(neg_idx))
        elif strategy == MiningStrategy.HARD_NEGATIVE:
            p = int(rng.choice(pos_idx))
            n = int(neg_idx[np.argmax(row[neg_idx])])
        elif strategy == MiningStrategy.SEMI_HARD_NEGATIVE:
            p = int(rng.choice(pos_idx))
            feasible = neg_idx[row[neg_idx] < row[p]]
            if feasible.size > 0:
                n = int(feasible[np.argmax(row[feasible])])
            else:
                n = int(neg_idx[np.argmin(row[neg_idx])])
        elif strategy == MiningStrategy.EASY_POSITIVE:
            p = int(pos_idx[np.argmax(row[pos_idx])])
            n = int(rng.choice(neg_idx))
        elif strategy == MiningStrategy.EASY_POSITIVE_HARD_NEGATIVE:
            p = int(pos_idx[np.argmax(row[pos_idx])])
            n = int(neg_idx[np.argmax(row[neg_idx])])
        else:
            raise ValueError(f"unknown strategy {strategy!r}")
        triplets.append(MinedTriplet(a, p, n, _coord(sims, a, p, n)))
    return triplets


def hard_fraction(triplets: Sequence[MinedTriplet]) -> float:
    """Fraction of triplets whose negative outranks the positive."""
    if len(triplets) == 0:
        raise ValueError("hard_fraction of an empty triplet list")
    return sum(is_hard(t.coord) for t in triplets) / len(triplets)
