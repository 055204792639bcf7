"""Edge-band compositing with its analytic backward pass, and the losses.

The compositor keeps the interior of a silhouette fixed at 1 and lets the
segmentation probability through only on the edge band::

    composite = edge * prob + interior

Because it is linear in ``prob`` the Jacobian is the diagonal edge mask, so
the gradient reaching the segmentation output is exactly zero off the band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Grid, GridKind, as_grid
from .exceptions import DimensionMismatch, NonBinaryInput, NonFiniteInput, OverlappingMasks

__all__ = [
    "BCE_EPS",
    "SynthesisResult",
    "LossWeights",
    "synthesize",
    "synthesize_backward",
    "bce_loss",
    "joint_loss",
]

BCE_EPS = 1e-7


@dataclass(frozen=True)
class SynthesisResult:
    composite: Grid
    saved_edge: Grid


@dataclass(frozen=True)
class LossWeights:
    lambda_seg: float = 10.0

    def __post_init__(self):
        if not (self.lambda_seg >= 0 and math.isfinite(self.lambda_seg)):
            raise ValueError(f"lambda_seg must be a finite non-negative number, got {self.lambda_seg}")


def _require_binary(g: Grid, name: str) -> None:
    if not g.is_binary:
        raise NonBinaryInput(f"{name} mask must be binary")


def synthesize(edge, interior, prob) -> SynthesisResult:
    """Composite ``edge * prob + interior``.

    Raises
    ------
    DimensionMismatch
        If the three grids differ in shape.
    OverlappingMasks
        If ``edge`` and ``interior`` share a foreground pixel; the composite
        could then leave [0, 1], which signals an upstream bug.
    """
    edge, interior, prob = as_grid(edge), as_grid(interior), as_grid(prob)
    if not edge.shape == interior.shape == prob.shape:
        raise DimensionMismatch(
            f"edge {edge.shape}, interior {interior.shape} and prob {prob.shape} must match"
        )
    _require_binary(edge, "edge")
    _require_binary(interior, "interior")
    if np.any(edge.values * interior.values):
        raise OverlappingMasks("edge and interior masks overlap")
    composite = edge.values * prob.values + interior.values
    return SynthesisResult(Grid(composite, GridKind.FLOAT), edge)


def synthesize_backward(result: SynthesisResult, grad_composite) -> np.ndarray:
    """Gradient of a downstream loss with respect to ``prob``."""
    g = np.asarray(grad_composite, dtype=np.float64)
    if g.shape != result.saved_edge.shape:
        raise DimensionMismatch(
            f"upstream gradient {g.shape} does not match composite {result.saved_edge.shape}"
        )
    return result.saved_edge.values * g


def bce_loss(prob, target) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy and its gradient with respect to ``prob``.

    ``prob`` is clamped to ``[BCE_EPS, 1 - BCE_EPS]`` and the gradient is
    evaluated at the clamped value.
    """
    p = np.asarray(prob.values if isinstance(prob, Grid) else prob, dtype=np.float64)
    t = np.asarray(target.values if isinstance(target, Grid) else target, dtype=np.float64)
    if p.shape != t.shape:
        raise DimensionMismatch(f"prob {p.shape} and target {t.shape} must match")
    p = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    n = p.size
    loss = -np.mean(t * np.log(p) + (1.0 - t) * np.log1p(-p))
    grad = (p - t) / (p * (1.0 - p) * n)
    return float(loss), grad


def joint_loss(seg_loss: float, rec_loss: float, weights: LossWeights | None = None) -> float:
    """Weighted sum ``lambda_seg * seg_loss + rec_loss``."""
    if weights is None:
        weights = LossWeights()
    if not (math.isfinite(seg_loss) and math.isfinite(rec_loss)):
        raise NonFiniteInput(f"losses must be finite, got seg={seg_loss}, rec={rec_loss}")
    return weights.lambda_seg * seg_loss + rec_loss
