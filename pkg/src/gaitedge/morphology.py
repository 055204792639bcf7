"""Flat square binary morphology and the edge/interior decomposition.

Pixels outside the frame count as background for both erosion and dilation,
so eroding an all-ones mask clears its border.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import Grid, GridKind, StructuringElement, as_grid
from .exceptions import NonBinaryInput

__all__ = ["EdgeInteriorPair", "erode", "dilate", "preprocess"]


def _binary_values(mask) -> np.ndarray:
    g = as_grid(mask)
    if not g.is_binary:
        raise NonBinaryInput("morphology requires a binary mask; binarize probability maps first")
    return g.values


def _se(se) -> StructuringElement:
    return se if isinstance(se, StructuringElement) else StructuringElement(int(se))


def erode(mask, se=3) -> Grid:
    """Binary erosion by a ``se`` x ``se`` square with zero padding."""
    k = _se(se).size
    out = ndimage.minimum_filter(_binary_values(mask), size=k, mode="constant", cval=0.0)
    return Grid(out, GridKind.BINARY)


def dilate(mask, se=3) -> Grid:
    """Binary dilation by a ``se`` x ``se`` square with zero padding."""
    k = _se(se).size
    out = ndimage.maximum_filter(_binary_values(mask), size=k, mode="constant", cval=0.0)
    return Grid(out, GridKind.BINARY)


@dataclass(frozen=True)
class EdgeInteriorPair:
    edge: Grid
    interior: Grid

    def __iter__(self):
        yield self.edge
        yield self.interior


def preprocess(mask, se=3) -> EdgeInteriorPair:
    """Split a silhouette into its interior (erosion) and edge band.

    The edge band is the exclusive-or of the interior with the dilation, i.e.
    the ring of pixels within ``se // 2`` of the silhouette boundary.

    Parameters
    ----------
    mask : Grid or array_like
        Binary silhouette.
    se : StructuringElement or int, default 3
        Side length of the square footprint.

    Returns
    -------
    EdgeInteriorPair
        Binary ``edge`` and ``interior`` grids, disjoint by construction.
    """
    interior = erode(mask, se)
    dilated = dilate(mask, se)
    edge = np.logical_xor(interior.values, dilated.values).astype(np.float64)
    return EdgeInteriorPair(Grid(edge, GridKind.BINARY), interior)
