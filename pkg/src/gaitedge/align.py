"""Differentiable silhouette alignment and its offline counterpart.

``gait_align`` pads the frame horizontally, binarizes it to locate the body,
computes a crop box that makes the body fill the output vertically while
keeping the pixel aspect ratio, and bilinearly resamples the *float* input
inside that box.  Sampling is separable, so the forward pass is
``out = Wy @ S @ Wx.T`` and the backward pass is ``Wy.T @ G @ Wx`` with the
box held fixed.

Coordinates: a box edge at ``x`` is a continuous coordinate where pixel ``i``
covers ``[i, i + 1)``.  Output cell ``j`` of ``W`` samples the source index
``left + (j + 0.5) * (right - left) / W - 0.5``; samples that fall outside
the frame read zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import Grid, GridKind, _as_target_size, as_grid, binarize, round_half_up
from .exceptions import BodyTooWide, DegenerateBox, DimensionMismatch, EmptyMask

__all__ = [
    "AlignmentBox",
    "AlignContext",
    "pad_horizontal",
    "compute_bbox",
    "roi_resample",
    "resize",
    "gait_align",
    "gait_align_backward",
    "size_normalize",
    "translate",
    "disturb",
    "default_max_offset",
    "DISTURB_PROBABILITY",
]

DISTURB_PROBABILITY = 0.5


@dataclass(frozen=True)
class AlignmentBox:
    left: float
    top: float
    right: float
    bottom: float

    def __post_init__(self):
        if not (self.right > self.left and self.bottom > self.top):
            raise DegenerateBox(f"box has zero or negative area: {self}")

    @property
    def width(self) -> float:
        return self.right - self.left

    @property
    def height(self) -> float:
        return self.bottom - self.top


@dataclass(frozen=True)
class AlignContext:
    """Everything the backward pass needs: the frozen box and sampling weights."""

    box: AlignmentBox
    source_shape: tuple
    padded_width: int
    pad: int
    row_weights: np.ndarray
    col_weights: np.ndarray

    @property
    def target_shape(self) -> tuple:
        return (self.row_weights.shape[0], self.col_weights.shape[0])


def pad_horizontal(sil) -> Grid:
    """Zero-pad ``w // 2`` columns on each side of the frame."""
    g = as_grid(sil)
    p = g.width // 2
    return Grid(np.pad(g.values, ((0, 0), (p, p))), g.kind)


def _foreground(binary_mask) -> np.ndarray:
    arr = as_grid(binary_mask).values
    if not np.any(arr):
        raise EmptyMask("mask has no foreground pixel")
    return arr


def compute_bbox(binary_mask, r: float | None = None, size=(64, 44)) -> AlignmentBox:
    """Crop box that scales the body to full output height without distortion.

    Top and bottom are the first foreground row and one past the last.  The
    box is centred horizontally on the mean foreground column and its width
    is ``height * W / H``, so resampling to ``size`` uses one scale factor on
    both axes.

    ``r`` is the body height / width ratio; when omitted it is measured from
    the mask's bounding box.  A body wider than the box (``height / r`` >
    crop width) widens the box, and its height grows around the same centre
    to keep the scale uniform; such a body then no longer fills the height.
    """
    size = _as_target_size(size)
    arr = _foreground(binary_mask)
    rows = np.flatnonzero(arr.any(axis=1))
    cols = np.flatnonzero(arr.any(axis=0))
    top = float(rows[0])
    bottom = float(rows[-1] + 1)
    if r is None:
        r = (bottom - top) / float(cols[-1] - cols[0] + 1)
    if not r > 0:
        raise ValueError(f"aspect ratio must be positive, got {r}")

    _, xs = np.nonzero(arr)
    center_x = xs.mean() + 0.5
    crop_h = bottom - top
    crop_w = crop_h * size.width / size.height
    body_w = crop_h / r
    if body_w > crop_w:
        center_y = 0.5 * (top + bottom)
        crop_w = body_w
        crop_h = crop_w * size.height / size.width
        top, bottom = center_y - 0.5 * crop_h, center_y + 0.5 * crop_h
    return AlignmentBox(center_x - 0.5 * crop_w, top, center_x + 0.5 * crop_w, bottom)


def _axis_weights(start: float, extent: float, n_out: int, n_in: int) -> np.ndarray:
    """(n_out, n_in) linear-interpolation matrix for one axis."""
    pos = start + (np.arange(n_out) + 0.5) * (extent / n_out) - 0.5
    lo = np.floor(pos).astype(np.int64)
    frac = pos - lo
    w = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    for idx, wt in ((lo, 1.0 - frac), (lo + 1, frac)):
        ok = (idx >= 0) & (idx < n_in)
        np.add.at(w, (rows[ok], idx[ok]), wt[ok])
    return w


def roi_resample(sil, box: AlignmentBox, size=(64, 44)) -> tuple[Grid, AlignContext]:
    """Bilinearly resample ``box`` of ``sil`` onto a ``size`` grid."""
    size = _as_target_size(size)
    g = as_grid(sil)
    if not (box.width > 0 and box.height > 0):
        raise DegenerateBox(f"box has zero area: {box}")
    h, w = g.shape
    wy = _axis_weights(box.top, box.height, size.height, h)
    wx = _axis_weights(box.left, box.width, size.width, w)
    out = np.clip(wy @ g.values @ wx.T, 0.0, 1.0)
    ctx = AlignContext(box, (h, w), w, 0, wy, wx)
    return Grid(out, GridKind.FLOAT), ctx


def resize(sil, size=(64, 44)) -> Grid:
    """Plain whole-frame bilinear resize (no body alignment)."""
    g = as_grid(sil)
    box = AlignmentBox(0.0, 0.0, float(g.width), float(g.height))
    return roi_resample(g, box, size)[0]


def gait_align(sil, r: float | None = None, size=(64, 44)) -> tuple[Grid, AlignContext]:
    """Centre the body and scale it to fill ``size`` vertically.

    Parameters
    ----------
    sil : Grid or array_like
        Float (or binary) silhouette in [0, 1].
    r : float, optional
        Body height / width ratio.  Measured from the binarized frame when
        omitted.
    size : TargetSize or (H, W), default (64, 44)

    Returns
    -------
    out : Grid
        Float grid of exactly ``size``.
    ctx : AlignContext
        Input to :func:`gait_align_backward`.
    """
    size = _as_target_size(size)
    g = as_grid(sil)
    padded = pad_horizontal(g)
    box = compute_bbox(binarize(padded), r, size)
    out, ctx = roi_resample(padded, box, size)
    pad = g.width // 2
    ctx = AlignContext(box, g.shape, padded.width, pad, ctx.row_weights, ctx.col_weights)
    return out, ctx


def gait_align_backward(ctx: AlignContext, grad_out) -> np.ndarray:
    """Gradient with respect to the unpadded input, box held constant."""
    g = np.asarray(grad_out, dtype=np.float64)
    if g.shape != ctx.target_shape:
        raise DimensionMismatch(f"gradient {g.shape} does not match output {ctx.target_shape}")
    grad_padded = ctx.row_weights.T @ g @ ctx.col_weights
    return grad_padded[:, ctx.pad : ctx.pad + ctx.source_shape[1]]


def size_normalize(sil, size=(64, 44), on_too_wide: str = "crop") -> Grid:
    """Classic offline size normalization of a binary silhouette.

    The rows spanning the body are scaled to height ``H`` with the aspect
    ratio kept (bilinear, then thresholded at 0.5), and a ``W``-column window
    centred on the mean foreground column is cut out, zero-filled where it
    leaves the frame.  Bodies wider than ``W`` are cropped symmetrically
    around that column, or rejected with ``on_too_wide="raise"``.
    """
    size = _as_target_size(size)
    arr = _foreground(binarize(sil))
    rows = np.flatnonzero(arr.any(axis=1))
    band = arr[rows[0] : rows[-1] + 1]
    hb, wb = band.shape
    new_w = max(1, int(round_half_up(wb * size.height / hb)))
    scaled = ndimage.zoom(
        band,
        (size.height / hb, new_w / wb),
        order=1,
        mode="grid-constant",
        cval=0.0,
        grid_mode=True,
    )
    scaled = round_half_up(np.clip(scaled, 0.0, 1.0))
    if not np.any(scaled):
        raise EmptyMask("body vanished while scaling")
    cols = np.flatnonzero(scaled.any(axis=0))
    if on_too_wide == "raise" and cols[-1] - cols[0] + 1 > size.width:
        raise BodyTooWide(f"scaled body is {cols[-1] - cols[0] + 1} px wide, target {size.width}")
    center = np.nonzero(scaled)[1].mean()
    start = int(round_half_up(center - (size.width - 1) / 2.0))
    out = np.zeros(size.as_tuple())
    src_lo, src_hi = max(start, 0), min(start + size.width, scaled.shape[1])
    if src_hi > src_lo:
        out[:, src_lo - start : src_hi - start] = scaled[:, src_lo:src_hi]
    return Grid(out, GridKind.BINARY)


def translate(sil, dx: int, dy: int) -> Grid:
    """Shift content ``dx`` columns right and ``dy`` rows down, zero-filling."""
    g = as_grid(sil)
    h, w = g.shape
    out = np.zeros_like(g.values)
    ys, yd = (slice(0, max(h - dy, 0)), slice(dy, h)) if dy >= 0 else (slice(-dy, h), slice(0, h + dy))
    xs, xd = (slice(0, max(w - dx, 0)), slice(dx, w)) if dx >= 0 else (slice(-dx, w), slice(0, w + dx))
    if abs(dx) < w and abs(dy) < h:
        out[yd, xd] = g.values[ys, xs]
    return Grid(out, g.kind)


def default_max_offset(shape) -> int:
    return int(0.1 * max(shape))


def disturb(sil, rng_seed, max_offset: int | None = None) -> Grid:
    """Simulate detector jitter: with probability 0.5 shift the frame.

    The shift ``(dx, dy)`` is drawn uniformly from the integers in
    ``[-max_offset, max_offset]``.  ``max_offset`` defaults to 10% of the
    larger frame dimension.
    """
    g = as_grid(sil)
    if max_offset is None:
        max_offset = default_max_offset(g.shape)
    if max_offset < 0:
        raise ValueError(f"max_offset must be non-negative, got {max_offset}")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    apply = rng.random() < DISTURB_PROBABILITY
    dx, dy = (int(v) for v in rng.integers(-max_offset, max_offset + 1, size=2))
    if not apply or (dx == 0 and dy == 0):
        return g
    return translate(g, dx, dy)

