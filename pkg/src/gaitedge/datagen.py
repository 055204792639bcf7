"""Deterministic synthetic walking silhouettes.

A walker is a 2-D articulated figure: a flat-topped head, a rounded-box
torso, two capsule legs with axis-aligned feet and two capsule arms.  Legs
swing in antiphase; arms swing a quarter cycle behind them so the figure
never collapses to the width of the torso.  Identity lives in the body
proportions and swing amplitudes, which are drawn per subject.  The camera
view is a horizontal scale plus shear applied to the whole figure.

Random streams are keyed by ``(seed, subject, condition, view)`` so any
subset of a domain can be regenerated independently and bit-identically.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from .core import DatasetLayout, GaitSequence, Grid, GridKind, scan_dataset, write_sequence
from .exceptions import BodyOutOfFrame, ConfigError

__all__ = [
    "WalkerParams",
    "DomainSpec",
    "CASIA_CONDITIONS",
    "view_transform",
    "subject_params",
    "render_frame",
    "generate_sequence",
    "generate_sequences",
    "generate_domain",
    "load_domain_spec",
    "read_domain_file",
    "clean_domain",
    "jittered_domain",
]

CASIA_CONDITIONS = ("NM#01", "NM#02", "NM#03", "NM#04", "NM#05", "NM#06", "BG#01", "BG#02", "CL#01", "CL#02")
MARGIN = 2


@dataclass(frozen=True)
class WalkerParams:
    """Geometry of one walker in one recording.  Lengths are in pixels."""

    frame_height: int = 128
    frame_width: int = 88
    body_height: float = 96.0
    head_radius: float = 9.0
    torso_length: float = 32.0
    torso_half_width: float = 13.0
    leg_width: float = 7.0
    arm_length: float = 30.0
    arm_width: float = 5.0
    foot_length: float = 10.0
    foot_height: float = 3.0
    leg_swing: float = 0.38
    arm_swing: float = 0.5
    lean: float = 0.0
    period: int = 16
    phase_offset: float = 0.0
    center_x: float = 44.0
    top_y: float = 16.0
    view_scale: float = 1.0
    view_shear: float = 0.0
    carry: bool = False
    coat: float = 1.0
    shape_seed: int = 0
    subject_id: str = "001"
    condition: str = "NM#01"
    view: str = "090"

    def __post_init__(self):
        positive = (
            "frame_height", "frame_width", "body_height", "head_radius", "torso_length",
            "torso_half_width", "leg_width", "arm_length", "arm_width", "foot_length",
            "foot_height", "period", "view_scale", "coat",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.leg_length <= 0:
            raise ValueError("body_height is too small for the head and torso")

    @property
    def hip_y(self) -> float:
        return 1.5 * self.head_radius + self.torso_length

    @property
    def leg_length(self) -> float:
        return self.body_height - self.hip_y - self.foot_height - 0.5 * self.leg_width


@dataclass(frozen=True)
class DomainSpec:
    """Distributions and capture settings for one synthetic dataset."""

    name: str = "A"
    frame_height: int = 128
    frame_width: int = 88
    body_scale: tuple = (0.70, 0.80)
    views: tuple = ("036", "072", "108", "144")
    shear_gain: float = 0.06
    jitter: float = 0.0
    clutter: bool = False
    n_frames: int = 16
    period: int = 16
    placement_jitter: float = 2.0

    def __post_init__(self):
        if len(set(self.views)) != len(self.views):
            raise ConfigError(f"view labels must be unique: {self.views}")
        lo, hi = self.body_scale
        if not 0 < lo <= hi < 1:
            raise ConfigError(f"body_scale must satisfy 0 < lo <= hi < 1, got {self.body_scale}")
        if not 0 <= self.jitter <= 1:
            raise ConfigError("jitter is a probability")
        if self.n_frames < 1 or self.period < 1:
            raise ConfigError("n_frames and period must be positive")
        object.__setattr__(self, "views", tuple(str(v) for v in self.views))
        object.__setattr__(self, "body_scale", (float(lo), float(hi)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["body_scale"] = list(self.body_scale)
        d["views"] = list(self.views)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DomainSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown domain spec keys: {sorted(unknown)}")
        d = dict(d)
        if "body_scale" in d:
            d["body_scale"] = tuple(d["body_scale"])
        if "views" in d:
            d["views"] = tuple(d["views"])
        return cls(**d)


def clean_domain(**overrides) -> DomainSpec:
    """Studio-like domain: no boundary noise, mild view shear."""
    return replace(DomainSpec(name="A"), **overrides)


def jittered_domain(**overrides) -> DomainSpec:
    """Noisy domain: boundary pixels flip and views are strongly sheared."""
    base = DomainSpec(name="B", shear_gain=0.14, jitter=0.3, body_scale=(0.66, 0.78))
    return replace(base, **overrides)


def read_domain_file(path) -> tuple[DomainSpec, dict]:
    """Read a JSON domain file.

    Besides the :class:`DomainSpec` fields the file may carry ``n_subjects``
    and ``conditions``; those come back in the second element.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    extras = {k: data.pop(k) for k in ("n_subjects", "conditions") if k in data}
    return DomainSpec.from_dict(data), extras


def load_domain_spec(path) -> DomainSpec:
    """Read a :class:`DomainSpec` from a JSON file."""
    return read_domain_file(path)[0]


def view_transform(view: str, shear_gain: float) -> tuple[float, float]:
    """Horizontal (scale, shear) standing in for camera azimuth ``view`` (degrees)."""
    try:
        angle = math.radians(float(view))
    except ValueError:
        angle = (sum(map(ord, view)) % 180) * math.pi / 180
    scale = 1.0 + 0.1 * (1.0 - abs(math.cos(angle)))
    shear = shear_gain * math.cos(angle)
    return scale, shear


def subject_params(shape_seed: int, body_height: float) -> dict:
    """Per-subject proportions, deterministic in ``shape_seed``."""
    rng = np.random.default_rng([0x5EED, shape_seed])
    u = rng.uniform
    h = body_height
    return dict(
        head_radius=h * u(0.075, 0.105),
        torso_length=h * u(0.26, 0.36),
        torso_half_width=h * u(0.13, 0.17),
        leg_width=h * u(0.06, 0.09),
        arm_length=h * u(0.28, 0.36),
        arm_width=h * u(0.045, 0.065),
        foot_length=h * u(0.08, 0.12),
        foot_height=max(3.0, h * u(0.03, 0.045)),
        leg_swing=u(0.26, 0.36),
        arm_swing=u(0.25, 0.40),
        lean=u(-0.10, 0.10),
    )


def _superellipse(u, v):
    u2, v2 = u * u, v * v
    return u2 * u2 + v2 * v2 <= 1.0


def _segment_distance(px, py, ax, ay, bx, by):
    dx, dy = bx - ax, by - ay
    t = np.clip(((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy), 0.0, 1.0)
    return np.hypot(px - ax - t * dx, py - ay - t * dy)


def _body_window(p: WalkerParams) -> tuple[slice, slice]:
    """Generous frame window that holds the whole figure."""
    h = p.body_height
    half = 0.5 * h * p.view_scale + abs(p.view_shear) * h + 4.0
    r0 = max(0, int(math.floor(p.top_y)) - 2)
    r1 = min(p.frame_height, int(math.ceil(p.top_y + h)) + 3)
    c0 = max(0, int(math.floor(p.center_x - half)))
    c1 = min(p.frame_width, int(math.ceil(p.center_x + half)) + 1)
    return slice(r0, r1), slice(c0, c1)


def _body_mask(p: WalkerParams, phase: float, window=None) -> np.ndarray:
    rows, cols = window or (slice(0, p.frame_height), slice(0, p.frame_width))
    ys, xs = np.mgrid[rows, cols].astype(np.float64)
    # pixel centres -> body coordinates (origin at the top of the head, y down)
    by = ys + 0.5 - p.top_y
    bx = ((xs + 0.5 - p.center_x) - p.view_shear * (by - p.hip_y)) / p.view_scale

    r = p.head_radius
    head_cy = 0.8 * r
    lean_dx = p.lean * (p.hip_y - by)  # forward lean grows towards the head
    hx = bx - lean_dx
    head = ((hx) ** 2 + (by - head_cy) ** 2 <= r * r) & (by >= 0.0)

    torso_top = 1.5 * r
    tcy = torso_top + 0.5 * p.torso_length
    tw = p.torso_half_width * p.coat
    th = 0.5 * p.torso_length * (1.0 + 0.25 * (p.coat - 1.0)) + 0.1 * r
    torso = _superellipse(hx / tw, (by - tcy) / th)

    s = math.sin(phase)
    c = math.cos(phase)
    mask = head | torso
    hip_y = p.hip_y
    for sign in (1.0, -1.0):
        theta = sign * p.leg_swing * s
        ex = p.leg_length * math.sin(theta)
        ey = hip_y + p.leg_length * math.cos(theta)
        mask |= _segment_distance(bx, by, 0.0, hip_y, ex, ey) <= 0.5 * p.leg_width
        heel = ex - 0.5 * p.leg_width
        # flat sole below the rounded end of the leg
        mask |= (bx >= heel) & (bx <= heel + p.foot_length + 0.5 * p.leg_width) & (
            by >= ey - 0.5 * p.leg_width
        ) & (by <= ey + 0.5 * p.leg_width + p.foot_height)

        alpha = -sign * p.arm_swing * c
        sy = torso_top + 0.15 * p.torso_length
        sx = p.lean * (hip_y - sy)
        ax = sx + p.arm_length * math.sin(alpha)
        ay = sy + p.arm_length * math.cos(alpha)
        mask |= _segment_distance(bx, by, sx, sy, ax, ay) <= 0.5 * p.arm_width

    if p.carry:
        bag_r = 0.45 * p.torso_half_width
        bag_cx = -(p.torso_half_width * p.coat + 0.2 * bag_r)
        bag_cy = torso_top + 0.75 * p.torso_length
        mask |= _superellipse((hx - bag_cx) / bag_r, (by - bag_cy) / (1.3 * bag_r))
    return mask


def render_frame(params: WalkerParams, phase: float) -> Grid:
    """Rasterize the walker at gait ``phase`` (radians).

    Raises
    ------
    BodyOutOfFrame
        If the figure comes closer than 2 px to the frame border.
    """
    if not math.isfinite(phase):
        raise ValueError(f"phase must be finite, got {phase}")
    phase = math.fmod(phase, 2.0 * math.pi)
    rows, cols = _body_window(params)
    sub = _body_mask(params, phase, (rows, cols))
    spill = (
        (rows.start > 0 and sub[0].any())
        or (rows.stop < params.frame_height and sub[-1].any())
        or (cols.start > 0 and sub[:, 0].any())
        or (cols.stop < params.frame_width and sub[:, -1].any())
    )
    if spill:  # window guess too tight; draw the whole frame
        mask = _body_mask(params, phase)
    else:
        mask = np.zeros((params.frame_height, params.frame_width), dtype=bool)
        mask[rows, cols] = sub
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    h, w = mask.shape
    if (
        rows.size == 0
        or rows[0] < MARGIN
        or cols[0] < MARGIN
        or rows[-1] > h - 1 - MARGIN
        or cols[-1] > w - 1 - MARGIN
    ):
        raise BodyOutOfFrame(
            f"walker {params.subject_id}/{params.condition}/{params.view} leaves the frame margin"
        )
    return Grid(mask.astype(np.float64), GridKind.BINARY)


def _phase(params: WalkerParams, t: int) -> float:
    return 2.0 * math.pi * t / params.period + params.phase_offset


def generate_sequence(params: WalkerParams, n_frames: int) -> GaitSequence:
    """Render ``n_frames`` consecutive frames at phases ``2 pi t / period``."""
    if n_frames < 1:
        raise ValueError("n_frames must be at least 1")
    frames = tuple(render_frame(params, _phase(params, t)) for t in range(n_frames))
    return GaitSequence(frames, params.subject_id, params.condition, params.view)


def _jitter_boundary(mask: np.ndarray, prob: float, rng: np.random.Generator) -> np.ndarray:
    boundary = ndimage.binary_dilation(mask) & ~ndimage.binary_erosion(mask, border_value=0)
    flip = boundary & (rng.random(mask.shape) < prob)
    return mask ^ flip


def _clutter(mask: np.ndarray, rng: np.random.Generator, n_blobs: int = 3) -> np.ndarray:
    out = mask.copy()
    h, w = mask.shape
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    for _ in range(n_blobs):
        # keep clutter inside the body's row span so vertical extent is unchanged
        y = int(rng.integers(rows[0], max(rows[-1] - 2, rows[0] + 1)))
        side = rng.integers(2)
        x = int(rng.integers(MARGIN, max(cols[0] - 4, MARGIN + 1))) if side == 0 else int(
            rng.integers(min(cols[-1] + 4, w - MARGIN - 3), w - MARGIN - 2)
        )
        out[y : y + 2, x : x + 2] = True
    return out


def _sequence_params(spec: DomainSpec, seed: int, s_idx: int, subject: str, condition: str, view: str) -> WalkerParams:
    subj_rng = np.random.default_rng([seed, 0, s_idx])
    body_h = spec.frame_height * subj_rng.uniform(*spec.body_scale)
    shape_seed = int(subj_rng.integers(2**31))
    coat = float(subj_rng.uniform(1.15, 1.3))
    geometry = subject_params(shape_seed, body_h)

    cond_idx = sum(ord(ch) * 31**i for i, ch in enumerate(condition)) % 100003
    view_idx = sum(ord(ch) * 37**i for i, ch in enumerate(view)) % 100003
    seq_rng = np.random.default_rng([seed, 1, s_idx, cond_idx, view_idx])
    scale, shear = view_transform(view, spec.shear_gain)
    jit = spec.placement_jitter
    ctype = condition.split("#", 1)[0]
    return WalkerParams(
        frame_height=spec.frame_height,
        frame_width=spec.frame_width,
        body_height=body_h,
        period=spec.period,
        phase_offset=float(seq_rng.uniform(0, 2 * math.pi)),
        center_x=spec.frame_width / 2 + seq_rng.uniform(-jit, jit),
        top_y=(spec.frame_height - body_h) / 2 + seq_rng.uniform(-jit, jit),
        view_scale=scale,
        view_shear=shear,
        carry=ctype == "BG",
        coat=coat if ctype == "CL" else 1.0,
        shape_seed=shape_seed,
        subject_id=subject,
        condition=condition,
        view=view,
        **geometry,
    )


def _subject_label(i: int) -> str:
    return f"{i + 1:03d}"


def generate_sequences(
    spec: DomainSpec,
    n_subjects: int,
    conditions=CASIA_CONDITIONS,
    seed: int = 0,
) -> list[GaitSequence]:
    """Generate every (subject, condition, view) sequence of a domain in memory.

    The list is ordered by (subject, condition, view).
    """
    if n_subjects < 2:
        raise ValueError("a domain needs at least two subjects")
    out = []
    for s_idx in range(n_subjects):
        subject = _subject_label(s_idx)
        for condition in sorted(conditions):
            for view in sorted(spec.views):
                params = _sequence_params(spec, seed, s_idx, subject, condition, view)
                seq = generate_sequence(params, spec.n_frames)
                if spec.jitter > 0 or spec.clutter:
                    noise_rng = np.random.default_rng([seed, 2, s_idx, *map(ord, condition + view)])
                    frames = []
                    for f in seq.frames:
                        m = f.values.astype(bool)
                        if spec.jitter > 0:
                            m = _jitter_boundary(m, spec.jitter, noise_rng)
                        if spec.clutter:
                            m = _clutter(m, noise_rng)
                        frames.append(Grid(m.astype(np.float64), GridKind.BINARY))
                    seq = seq.with_frames(frames)
                out.append(seq)
    return out


def generate_domain(
    spec: DomainSpec,
    n_subjects: int,
    conditions=CASIA_CONDITIONS,
    seed: int = 0,
    out_dir=None,
) -> DatasetLayout:
    """Materialize a domain on disk under ``out_dir`` and return its layout."""
    if out_dir is None:
        raise ValueError("out_dir is required")
    root = Path(out_dir)
    for seq in generate_sequences(spec, n_subjects, conditions, seed):
        write_sequence(seq, root)
    return scan_dataset(root)

