"""Raster and sequence containers, PGM I/O and the on-disk dataset layout.

Every pixel container in the package is a :class:`Grid`: an immutable H x W
array of float64 values in [0, 1] tagged as either binary or float.  Grids
are stored on disk as binary PGM (P5) files; binary grids use maxval 255 and
float grids are quantized to 16 bits (maxval 65535).
"""

from __future__ import annotations

import enum
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exceptions import (
    DimensionMismatch,
    DuplicateEntry,
    EmptyDataset,
    EmptyMask,
    IoFailure,
    MalformedFile,
    NonBinaryInput,
    ValueOutOfRange,
)

__all__ = [
    "GridKind",
    "Grid",
    "StructuringElement",
    "TargetSize",
    "GaitSequence",
    "DatasetEntry",
    "DatasetLayout",
    "round_half_up",
    "binarize",
    "as_grid",
    "load_grid",
    "save_grid",
    "encode_pgm",
    "decode_pgm",
    "scan_dataset",
    "load_sequence",
    "write_sequence",
    "frame_filename",
    "body_aspect_ratio",
]

FRAME_PATTERN = re.compile(r"^frame_(\d+)\.pgm$")


class GridKind(str, enum.Enum):
    BINARY = "binary"
    FLOAT = "float"


def round_half_up(x):
    """Round to the nearest integer with ties going up (project-wide rule)."""
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5)


@dataclass(frozen=True, eq=False)
class Grid:
    """Immutable H x W raster with values in [0, 1].

    Parameters
    ----------
    values : array_like
        2-D array of finite values in [0, 1].
    kind : GridKind or str, optional
        ``"binary"`` requires every value to be exactly 0 or 1.  When omitted
        the kind is inferred: binary if all values are 0 or 1, float otherwise.
    """

    values: np.ndarray
    kind: GridKind = None  # type: ignore[assignment]

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionMismatch(f"grid must be a non-empty 2-D array, got shape {arr.shape}")
        lo, hi = arr.min(), arr.max()
        # NaN fails both comparisons, +-inf fails one
        if not (lo >= 0.0 and hi <= 1.0):
            if not np.all(np.isfinite(arr)):
                raise ValueOutOfRange("grid values must be finite")
            raise ValueOutOfRange(f"grid values must lie in [0, 1], got range [{lo}, {hi}]")
        is_binary = bool(np.count_nonzero(arr * (1.0 - arr)) == 0)
        kind = self.kind
        if kind is None:
            kind = GridKind.BINARY if is_binary else GridKind.FLOAT
        kind = GridKind(kind)
        if kind is GridKind.BINARY and not is_binary:
            raise NonBinaryInput("binary grid contains values other than 0 and 1")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "kind", kind)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def is_binary(self) -> bool:
        return self.kind is GridKind.BINARY

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return self.kind is other.kind and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.kind, self.shape, self.values.tobytes()))

    def __repr__(self):
        return f"Grid({self.height}x{self.width}, kind={self.kind.value})"

    @classmethod
    def zeros(cls, height: int, width: int) -> "Grid":
        return cls(np.zeros((height, width)), GridKind.BINARY)


def as_grid(x, kind=None) -> Grid:
    """Return ``x`` as a :class:`Grid`, validating plain arrays."""
    if isinstance(x, Grid):
        if kind is not None and GridKind(kind) is not x.kind:
            return Grid(x.values, kind)
        return x
    return Grid(x, kind)


def binarize(x) -> Grid:
    """Threshold a grid at 0.5 with ties going to foreground."""
    g = as_grid(x)
    return Grid(round_half_up(g.values), GridKind.BINARY)


@dataclass(frozen=True)
class StructuringElement:
    """Flat square footprint of odd side length ``size`` (>= 3)."""

    size: int = 3

    def __post_init__(self):
        if isinstance(self.size, bool) or int(self.size) != self.size:
            raise ValueError(f"structuring element size must be an integer, got {self.size!r}")
        if self.size < 3 or self.size % 2 == 0:
            raise ValueError(f"structuring element size must be odd and >= 3, got {self.size}")
        object.__setattr__(self, "size", int(self.size))

    @property
    def radius(self) -> int:
        return self.size // 2


@dataclass(frozen=True)
class TargetSize:
    """Output raster size (height, width) of alignment and normalization."""

    height: int = 64
    width: int = 44

    def __post_init__(self):
        if self.height < 2 or self.width < 2:
            raise ValueError(f"target size must be at least 2x2, got {self.height}x{self.width}")

    @classmethod
    def parse(cls, text: str) -> "TargetSize":
        """Parse ``"HxW"`` (for example ``"64x44"``)."""
        m = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*", text)
        if m is None:
            raise ValueError(f"target size must look like HxW, got {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    def __str__(self):
        return f"{self.height}x{self.width}"

    def as_tuple(self) -> tuple[int, int]:
        return (self.height, self.width)


def _as_target_size(size) -> TargetSize:
    if isinstance(size, TargetSize):
        return size
    if isinstance(size, str):
        return TargetSize.parse(size)
    h, w = size
    return TargetSize(int(h), int(w))


@dataclass(frozen=True)
class GaitSequence:
    """An ordered list of equally sized frames with identity metadata.

    ``condition`` is the full sequence label such as ``"NM#01"``; its walking
    type (``NM``, ``BG``, ``CL`` or anything else) is :attr:`condition_type`.
    """

    frames: tuple
    subject_id: str
    condition: str
    view: str
    aspect_ratio: float | None = None

    def __post_init__(self):
        frames = tuple(as_grid(f) for f in self.frames)
        if not frames:
            raise ValueError("a gait sequence needs at least one frame")
        shape = frames[0].shape
        for f in frames[1:]:
            if f.shape != shape:
                raise DimensionMismatch(f"frame shape {f.shape} differs from {shape}")
        if self.aspect_ratio is not None and not self.aspect_ratio > 0:
            raise ValueError("aspect_ratio must be positive")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "subject_id", str(self.subject_id))
        object.__setattr__(self, "condition", str(self.condition))
        object.__setattr__(self, "view", str(self.view))

    @property
    def condition_type(self) -> str:
        return self.condition.split("#", 1)[0]

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.subject_id, self.condition, self.view)

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames[0].shape

    def __len__(self):
        return len(self.frames)

    def to_array(self) -> np.ndarray:
        """Stack frames into a (T, H, W) float64 array."""
        return np.stack([f.values for f in self.frames])

    def with_frames(self, frames: Iterable) -> "GaitSequence":
        return GaitSequence(tuple(frames), self.subject_id, self.condition, self.view, self.aspect_ratio)


# --------------------------------------------------------------------------
# PGM codec


def encode_pgm(grid) -> bytes:
    g = as_grid(grid)
    h, w = g.shape
    if g.is_binary:
        header = f"P5 {w} {h} 255\n".encode("ascii")
        payload = (g.values * 255).astype(np.uint8).tobytes()
    else:
        header = f"P5 {w} {h} 65535\n".encode("ascii")
        payload = round_half_up(g.values * 65535).astype(">u2").tobytes()
    return header + payload


def _read_header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    tokens: list[bytes] = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise MalformedFile("truncated PGM header")
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    if pos >= n or not data[pos : pos + 1].isspace():
        raise MalformedFile("missing whitespace after PGM header")
    return tokens, pos + 1


def decode_pgm(data: bytes) -> Grid:
    """Decode a binary PGM (P5) byte string into a Grid."""
    if data[:2] != b"P5":
        raise MalformedFile(f"bad magic number {data[:2]!r}, expected b'P5'")
    tokens, offset = _read_header_tokens(data, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise MalformedFile(f"non-numeric PGM header fields {tokens[1:]!r}") from None
    if width < 1 or height < 1:
        raise MalformedFile(f"bad PGM dimensions {width}x{height}")
    if not 1 <= maxval <= 65535:
        raise MalformedFile(f"bad PGM maxval {maxval}")
    dtype = np.dtype(np.uint8) if maxval < 256 else np.dtype(">u2")
    expected = width * height * dtype.itemsize
    payload = data[offset : offset + expected]
    if len(payload) < expected:
        raise MalformedFile(f"truncated PGM payload: {len(payload)} of {expected} bytes")
    raw = np.frombuffer(payload, dtype=dtype).reshape(height, width).astype(np.int64)
    if raw.max() > maxval:
        raise ValueOutOfRange(f"PGM sample {raw.max()} exceeds maxval {maxval}")
    if np.all((raw == 0) | (raw == maxval)):
        return Grid((raw == maxval).astype(np.float64), GridKind.BINARY)
    return Grid(raw / maxval, GridKind.FLOAT)


def load_grid(path) -> Grid:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    try:
        return decode_pgm(data)
    except MalformedFile as exc:
        raise MalformedFile(f"{path}: {exc}") from None


def save_grid(grid, path) -> None:
    """Write ``grid`` as PGM, creating missing parent directories."""
    data = encode_pgm(grid)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# --------------------------------------------------------------------------
# dataset layout: root/<subject>/<condition>/<view>/frame_%04d.pgm


def frame_filename(index: int) -> str:
    return f"frame_{index:04d}.pgm"


@dataclass(frozen=True)
class DatasetEntry:
    subject_id: str
    condition: str
    view: str
    path: Path
    frames: tuple = field(default=())

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.subject_id, self.condition, self.view)

    @property
    def condition_type(self) -> str:
        return self.condition.split("#", 1)[0]


@dataclass(frozen=True)
class DatasetLayout:
    root: Path
    entries: tuple

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.key in seen:
                raise DuplicateEntry(f"duplicate dataset entry {e.key}")
            seen.add(e.key)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def subjects(self) -> list[str]:
        return sorted({e.subject_id for e in self.entries})

    @property
    def views(self) -> list[str]:
        return sorted({e.view for e in self.entries})


def _subdirs(path: Path) -> list[Path]:
    return sorted(p for p in path.iterdir() if p.is_dir() and not p.name.startswith("."))


def scan_dataset(root) -> DatasetLayout:
    """Index a dataset tree.

    Entries come back sorted by (subject, condition, view) and the frames of
    each entry are sorted by their numeric index, not by file name.
    """
    root = Path(root)
    if not root.is_dir():
        raise EmptyDataset(f"{root} is not a directory")
    entries = []
    for subject in _subdirs(root):
        for condition in _subdirs(subject):
            for view in _subdirs(condition):
                indexed = {}
                for f in view.iterdir():
                    m = FRAME_PATTERN.match(f.name)
                    if m is None:
                        continue
                    idx = int(m.group(1))
                    if idx in indexed:
                        raise DuplicateEntry(f"frame index {idx} appears twice in {view}")
                    indexed[idx] = f
                if not indexed:
                    continue
                frames = tuple(indexed[i] for i in sorted(indexed))
                entries.append(DatasetEntry(subject.name, condition.name, view.name, view, frames))
    if not entries:
        raise EmptyDataset(f"no frame files found under {root}")
    entries.sort(key=lambda e: e.key)
    return DatasetLayout(root, tuple(entries))


def load_sequence(entry: DatasetEntry) -> GaitSequence:
    frames = tuple(load_grid(p) for p in entry.frames)
    return GaitSequence(frames, entry.subject_id, entry.condition, entry.view)


def write_sequence(seq: GaitSequence, root) -> Path:
    """Write ``seq`` under ``root`` using the standard layout; return its directory."""
    d = Path(root) / seq.subject_id / seq.condition / seq.view
    try:
        os.makedirs(d, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {d}: {exc}") from exc
    for i, frame in enumerate(seq.frames):
        save_grid(frame, d / frame_filename(i))
    return d


def body_aspect_ratio(mask) -> float:
    """Height / width of the foreground bounding box of a binary mask."""
    arr = np.asarray(as_grid(mask).values)
    rows = np.flatnonzero(arr.any(axis=1))
    cols = np.flatnonzero(arr.any(axis=0))
    if rows.size == 0:
        raise EmptyMask("mask has no foreground pixel")
    return (rows[-1] - rows[0] + 1) / (cols[-1] - cols[0] + 1)


def check_same_shape(*grids: Sequence) -> None:
    shapes = {tuple(g.shape) for g in grids}
    if len(shapes) != 1:
        raise DimensionMismatch(f"grid dimensions differ: {sorted(shapes)}")

