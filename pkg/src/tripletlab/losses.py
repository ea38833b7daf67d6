"""Triplet losses with exact gradients.

Three losses over the diagram point (s_ap, s_an):

* softmax-ratio loss  -log(exp(s_ap) / (exp(s_ap) + exp(s_an)))
* margin hinge        max(2*(s_an - s_ap) + margin, 0) on the unit sphere
* selectively contrastive: lam * s_an while the triplet is hard
  (s_an > s_ap, strict), otherwise the configured base loss

Gradients come in two flavors: with respect to the diagram coordinates
(CoordGrad) and with respect to the raw feature vectors (FeatureGrads).
The learning rate is deliberately NOT folded in here; dynamics and the
trainer apply their own step sizes to the same gradient code.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .geometry import TripletCoord, TripletFeatures, coord_of


class LossKind(str, Enum):
    NCA = "nca"
    MARGIN = "margin"
    SCT = "sct"


@dataclass(frozen=True)
class LossSpec:
    """Which loss to run and its parameters.

    lam is the contrastive weight of the selective loss's hard branch,
    margin is the hinge offset of the margin loss (not the learning rate),
    base selects the easy-branch loss of the selective variant, and
    sct_moves_anchor controls whether the hard branch also updates the
    anchor (on by default) or only the negative.
    """

    kind: LossKind = LossKind.NCA
    lam: float = 1.0
    margin: float = 0.0
    base: LossKind = LossKind.NCA
    sct_moves_anchor: bool = True

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError(f"lam must be finite and >= 0, got {self.lam}")
        if not np.isfinite(self.margin) or self.margin < 0:
            raise ValueError(
                f"margin must be finite and >= 0, got {self.margin}"
            )
        if self.base == LossKind.SCT:
            raise ValueError("base loss must be nca or margin")


class CoordGrad(NamedTuple):
    d_sap: float
    d_san: float


class FeatureGrads(NamedTuple):
    g_a: np.ndarray
    g_p: np.ndarray
    g_n: np.ndarray


def softmax_weight(coord: TripletCoord) -> float:
    """exp(s_an) / (exp(s_ap) + exp(s_an)), computed stably.

    This sigma is the shared magnitude of every softmax-ratio gradient
    component; the paper-style step size is learning_rate * sigma.
    """
    # sigma = sigmoid(s_an - s_ap)
    x = coord.s_an - coord.s_ap
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


def nca_loss(coord: TripletCoord) -> float:
    """Softmax-ratio loss, always positive."""
    return float(np.logaddexp(0.0, coord.s_an - coord.s_ap))


def hinge_argument(coord: TripletCoord, margin: float) -> float:
    """Squared-distance hinge argument on the unit sphere.

    ||f_a - f_p||^2 - ||f_a - f_n||^2 + margin collapses to
    2*(s_an - s_ap) + margin for unit vectors.
    """
    return 2.0 * (coord.s_an - coord.s_ap) + margin


def margin_loss(coord: TripletCoord, margin: float) -> float:
    """Hinged squared-distance triplet loss."""
    return max(hinge_argument(coord, margin), 0.0)


def is_hard(coord: TripletCoord) -> bool:
    """True iff the negative ranks above the positive (strict s_an > s_ap)."""
    return coord.s_an > coord.s_ap


def sct_loss(coord: TripletCoord, spec: LossSpec) -> float:
    """Selectively contrastive loss: lam*s_an when hard, base loss otherwise."""
    if is_hard(coord):
        return spec.lam * coord.s_an
    if spec.base == LossKind.MARGIN:
        return margin_loss(coord, spec.margin)
    return nca_loss(coord)


def loss_value(coord: TripletCoord, spec: LossSpec) -> float:
    """Evaluate whichever loss the spec selects."""
    if spec.kind == LossKind.NCA:
        return nca_loss(coord)
    if spec.kind == LossKind.MARGIN:
        return margin_loss(coord, spec.margin)
    return sct_loss(coord, spec)


def coord_grad(coord: TripletCoord, spec: LossSpec) -> CoordGrad:
    """Gradient of the selected loss with respect to (s_ap, s_an).

    The margin hinge uses the inactive-side subgradient (zero) exactly at
    the boundary. The selective loss's hard branch reads off s_an only.
    """
    if spec.kind == LossKind.SCT and is_hard(coord):
        return CoordGrad(0.0, spec.lam)
    kind = spec.base if spec.kind == LossKind.SCT else spec.kind
    if kind == LossKind.MARGIN:
        if hinge_argument(coord, spec.margin) > 0.0:
            return CoordGrad(-2.0, 2.0)
        return CoordGrad(0.0, 0.0)
    sigma = softmax_weight(coord)
    return CoordGrad(-sigma, sigma)


def feature_grads(t: TripletFeatures, spec: LossSpec) -> FeatureGrads:
    """Gradient of the selected loss with respect to the feature vectors.

    For the softmax-ratio loss: g_p = -sigma*f_a, g_n = +sigma*f_a,
    g_a = sigma*(f_n - f_p). For the margin loss with an active hinge:
    g_p = -2(f_a - f_p), g_n = +2(f_a - f_n), g_a = 2(f_n - f_p); all zero
    when inactive. The selective hard branch differentiates lam * f_a.f_n
    directly: g_n = lam*f_a, g_a = lam*f_n (or zero if the anchor is
    frozen), g_p = 0.
    """
    coord = coord_of(t)
    zero = np.zeros(t.dim)
    if spec.kind == LossKind.SCT and is_hard(coord):
        g_a = spec.lam * t.negative if spec.sct_moves_anchor else zero
        return FeatureGrads(g_a=g_a, g_p=zero, g_n=spec.lam * t.anchor)
    kind = spec.base if spec.kind == LossKind.SCT else spec.kind
    if kind == LossKind.MARGIN:
        if hinge_argument(coord, spec.margin) > 0.0:
            return FeatureGrads(
                g_a=2.0 * (t.negative - t.positive),
                g_p=-2.0 * (t.anchor - t.positive),
                g_n=2.0 * (t.anchor - t.negative),
            )
        return FeatureGrads(g_a=zero, g_p=zero, g_n=zero)
    sigma = softmax_weight(coord)
    return FeatureGrads(
        g_a=sigma * (t.negative - t.positive),
        g_p=-sigma * t.anchor,
        g_n=sigma * t.anchor,
    )
