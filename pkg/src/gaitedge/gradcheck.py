"""Central finite differences for checking analytic gradients over grids.

Functions here take plain ``float64`` arrays: perturbed points may leave
[0, 1], and keeping them inside a function's valid domain is the caller's
job.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .exceptions import DimensionMismatch, NonFiniteResult

__all__ = [
    "DEFAULT_STEP",
    "TOLERANCES",
    "GradReport",
    "central_diff",
    "check_gradient",
    "threshold_skip_mask",
    "run_target",
]

DEFAULT_STEP = 1e-4


@dataclass(frozen=True)
class GradReport:
    max_abs_error: float
    max_rel_error: float
    worst_pixel: tuple | None
    n_checked: int
    n_skipped: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["worst_pixel"] = list(self.worst_pixel) if self.worst_pixel is not None else None
        return d


def central_diff(f: Callable[[np.ndarray], float], at, pixel, step: float = DEFAULT_STEP) -> float:
    """``(f(at + step e_p) - f(at - step e_p)) / (2 step)`` for pixel ``p``."""
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    x = np.array(at, dtype=np.float64, copy=True)
    pixel = tuple(pixel)
    x0 = x[pixel]
    x[pixel] = x0 + step
    f_plus = float(f(x))
    x[pixel] = x0 - step
    f_minus = float(f(x))
    d = (f_plus - f_minus) / (2.0 * step)
    if not math.isfinite(d):
        raise NonFiniteResult(f"finite difference at {pixel} is not finite (f+={f_plus}, f-={f_minus})")
    return d


def check_gradient(
    f: Callable[[np.ndarray], float],
    analytic_grad,
    at,
    step: float = DEFAULT_STEP,
    skip_mask=None,
) -> GradReport:
    """Compare ``analytic_grad`` with central differences of ``f`` at ``at``.

    Every pixel where ``skip_mask`` is true is left out.  The relative error at
    a pixel is ``|a - n| / max(|a|, |n|, 1e-12)``; ``worst_pixel`` is where
    the absolute error peaks.
    """
    at = np.asarray(at, dtype=np.float64)
    analytic = np.asarray(analytic_grad, dtype=np.float64)
    if analytic.shape != at.shape:
        raise DimensionMismatch(f"analytic gradient {analytic.shape} does not match input {at.shape}")
    skip = np.zeros(at.shape, dtype=bool) if skip_mask is None else np.asarray(skip_mask, dtype=bool)
    if skip.shape != at.shape:
        raise DimensionMismatch(f"skip mask {skip.shape} does not match input {at.shape}")

    max_abs = 0.0
    max_rel = 0.0
    worst = None
    n_checked = 0
    for pixel in np.ndindex(at.shape):
        if skip[pixel]:
            continue
        num = central_diff(f, at, pixel, step)
        a = analytic[pixel]
        err = abs(a - num)
        rel = err / max(abs(a), abs(num), 1e-12)
        if worst is None or err > max_abs:
            max_abs, worst = err, pixel
        max_rel = max(max_rel, rel)
        n_checked += 1
    return GradReport(float(max_abs), float(max_rel), worst, n_checked, int(skip.sum()))


def threshold_skip_mask(x, step: float = DEFAULT_STEP, threshold: float = 0.5) -> np.ndarray:
    """Pixels whose +-step perturbation could cross the binarization threshold."""
    return np.abs(np.asarray(x, dtype=np.float64) - threshold) <= step


# --------------------------------------------------------------------------
# ready-made checks for the differentiable operators

# target -> (error field, bound)
TOLERANCES = {
    "synthesize": ("max_abs_error", 1e-8),
    "bce": ("max_rel_error", 1e-6),
    "align": ("max_rel_error", 1e-5),
}


def _blob(rng: np.random.Generator, shape=(16, 12)) -> np.ndarray:
    h, w = shape
    m = np.zeros(shape)
    top, left = rng.integers(1, 4), rng.integers(1, 3)
    m[top : h - rng.integers(1, 4), left : w - rng.integers(1, 3)] = 1.0
    return m


def _check_synthesize(rng, step):
    from .morphology import preprocess
    from .synthesis import synthesize, synthesize_backward

    edge, interior = preprocess(_blob(rng), 3)
    prob = rng.uniform(0.05, 0.95, edge.shape)
    weights = rng.standard_normal(edge.shape)
    result = synthesize(edge, interior, prob)

    def f(x):
        return float(np.sum(weights * synthesize(edge, interior, x).composite.values))

    return check_gradient(f, synthesize_backward(result, weights), prob, step)


def _check_bce(rng, step):
    from .synthesis import bce_loss

    # away from 0 and 1 the third derivative of log stays small enough for step 1e-4
    prob = rng.uniform(0.2, 0.8, (16, 12))
    target = (rng.random((16, 12)) < 0.5).astype(np.float64)
    return check_gradient(lambda x: bce_loss(x, target)[0], bce_loss(prob, target)[1], prob, step)


def _check_align(rng, step):
    from .align import gait_align, gait_align_backward

    x = np.clip(_blob(rng) * 0.8 + 0.1 + 0.08 * rng.standard_normal((16, 12)), step, 1.0 - step)
    out, ctx = gait_align(x)
    weights = rng.standard_normal(out.shape)

    # the box depends on x only through its binarization, which no checked pixel can flip
    def f(z):
        return float(np.sum(weights * gait_align(z)[0].values))

    return check_gradient(
        f, gait_align_backward(ctx, weights), x, step, skip_mask=threshold_skip_mask(x, step)
    )


_TARGETS = {"synthesize": _check_synthesize, "bce": _check_bce, "align": _check_align}


def run_target(target: str, seed: int = 0, step: float = DEFAULT_STEP) -> tuple[GradReport, bool]:
    """Check one operator on a random 16x12 instance; returns (report, within tolerance)."""
    if target not in _TARGETS:
        raise ValueError(f"unknown gradcheck target {target!r}; choose from {sorted(_TARGETS)}")
    report = _TARGETS[target](np.random.default_rng(seed), step)
    field_name, bound = TOLERANCES[target]
    return report, getattr(report, field_name) < bound
