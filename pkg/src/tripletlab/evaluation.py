"""Retrieval metrics and whole-batch diagram extraction.

Recall@K counts a query as a hit when at least one of its top-K gallery
neighbors (by cosine, self excluded on request) shares the query label.
Ranking ties break toward the lower gallery index so results are exactly
reproducible.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .geometry import TripletCoord
from .mining import Batch, MinedTriplet, similarity_matrix


class RetrievalResult(NamedTuple):
    k: int
    recall: float
    num_queries: int


def recall_at_k(
    queries: Batch, gallery: Batch, k: int, exclude_self: bool = False
) -> RetrievalResult:
    """Fraction of queries with a same-label item in their top-k neighbors.

    With exclude_self the query and gallery sets must be the same points
    in the same order; entry i of the gallery is masked out for query i.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n_q = len(queries)
    n_g = len(gallery)
    if n_q == 0:
        raise ValueError("empty query set")
    if exclude_self:
        if n_q != n_g:
            raise ValueError(
                "exclude_self requires query and gallery sets of equal size"
            )
        if n_g <= k:
            raise ValueError("gallery size must exceed k when excluding self")
    sims = queries.embeddings @ gallery.embeddings.T
    if exclude_self:
        np.fill_diagonal(sims, -np.inf)
    hits = 0
    for i in range(n_q):
        order = np.argsort(-sims[i], kind="stable")[:k]
        if np.any(gallery.labels[order] == queries.labels[i]):
            hits += 1
    return RetrievalResult(k=k, recall=hits / n_q, num_queries=n_q)


def collapse_metric(batch: Batch) -> float:
    """Mean off-diagonal pairwise cosine; 1.0 means fully collapsed."""
    n = len(batch)
    sims = similarity_matrix(batch)
    return float((sims.sum() - np.trace(sims)) / (n * (n - 1)))


def diagram_extract(batch: Batch) -> list[MinedTriplet]:
    """Easiest-positive / hardest-negative diagram point for every item.

    For each item: s_ap is the maximum same-class similarity (self
    excluded) and s_an the maximum different-class similarity. Items whose
    class has no second member, or with no different-class item at all,
    are skipped.
    """
    sims = similarity_matrix(batch)
    labels = batch.labels
    out: list[MinedTriplet] = []
    for i in range(len(batch)):
        same = labels == labels[i]
        pos_idx = np.flatnonzero(same)
        pos_idx = pos_idx[pos_idx != i]
        neg_idx = np.flatnonzero(~same)
        if pos_idx.size == 0 or neg_idx.size == 0:
            continue
        p = int(pos_idx[np.argmax(sims[i, pos_idx])])
        n = int(neg_idx[np.argmax(sims[i, neg_idx])])
        out.append(
            MinedTriplet(
                i, p, n, TripletCoord(float(sims[i, p]), float(sims[i, n]))
            )
        )
    return out
