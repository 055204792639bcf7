"""Gallery/probe rank-1 identification with identical-view exclusion.

Accuracy is reported per (probe subset, probe view) cell.  Subset means
average a subset's views, and the overall mean averages the subset means,
so every mean recomputes exactly from the cells below it.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .core import GaitSequence, TargetSize, _as_target_size
from .exceptions import ConfigError, DimensionMismatch, EmptyProtocol, NoValidCandidates

__all__ = [
    "Embedding",
    "EvalProtocol",
    "EvalReport",
    "parse_conditions",
    "gei",
    "gei_embed",
    "distance",
    "nearest",
    "rank1",
]


@dataclass(frozen=True, eq=False)
class Embedding:
    vector: np.ndarray
    source: tuple  # (subject_id, condition, view)

    def __post_init__(self):
        v = np.array(self.vector, dtype=np.float64, copy=True).ravel()
        if not np.all(np.isfinite(v)):
            raise ValueError("embedding entries must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)
        object.__setattr__(self, "source", tuple(str(s) for s in self.source))

    @property
    def subject_id(self) -> str:
        return self.source[0]

    @property
    def condition(self) -> str:
        return self.source[1]

    @property
    def view(self) -> str:
        return self.source[2]


_RANGE = re.compile(r"^([^#]+)#(\d+)-(\d+)$")


def parse_conditions(text) -> tuple:
    """Expand ``"NM#01-04"`` or ``"BG#01, BG#02"`` into condition labels."""
    if isinstance(text, (list, tuple)):
        items = [str(t) for t in text]
    else:
        items = [t.strip() for t in str(text).split(",") if t.strip()]
    out = []
    for item in items:
        m = _RANGE.match(item)
        if m is None:
            out.append(item)
            continue
        prefix, lo, hi = m.group(1), m.group(2), m.group(3)
        width = len(lo)
        if int(hi) < int(lo):
            raise ConfigError(f"empty condition range {item!r}")
        out.extend(f"{prefix}#{i:0{width}d}" for i in range(int(lo), int(hi) + 1))
    if not out:
        raise ConfigError(f"no conditions in {text!r}")
    return tuple(out)


@dataclass(frozen=True)
class EvalProtocol:
    """Which conditions form the gallery and each named probe subset.

    The default is the CASIA-B split: NM#01-04 as gallery and NM#05-06,
    BG#01-02, CL#01-02 as the three probe subsets.
    """

    gallery: tuple = parse_conditions("NM#01-04")
    probe_subsets: tuple = (
        ("NM", parse_conditions("NM#05-06")),
        ("BG", parse_conditions("BG#01-02")),
        ("CL", parse_conditions("CL#01-02")),
    )
    exclude_identical_view: bool = True

    def __post_init__(self):
        subsets = self.probe_subsets
        if isinstance(subsets, dict):
            subsets = tuple(subsets.items())
        subsets = tuple((str(name), parse_conditions(conds)) for name, conds in subsets)
        gallery = parse_conditions(self.gallery)
        if not subsets:
            raise EmptyProtocol("protocol has no probe subsets")
        names = [n for n, _ in subsets]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate probe subset names {names}")
        object.__setattr__(self, "gallery", gallery)
        object.__setattr__(self, "probe_subsets", subsets)

    @property
    def subset_names(self) -> list[str]:
        return [n for n, _ in self.probe_subsets]

    def subset_of(self, condition: str) -> str | None:
        for name, conds in self.probe_subsets:
            if condition in conds:
                return name
        return None

    def split(self, items):
        """Partition items with a ``condition`` attribute into (gallery, probes)."""
        gallery = [x for x in items if x.condition in self.gallery]
        probes = [x for x in items if self.subset_of(x.condition) is not None]
        return gallery, probes


@dataclass
class EvalReport:
    """Rank-1 accuracies (percent) of one gallery/probe evaluation."""

    subsets: list
    views: list
    correct: dict = field(default_factory=dict)  # (subset, view) -> int
    total: dict = field(default_factory=dict)  # (subset, view) -> int
    n_comparisons: int = 0

    def accuracy(self, subset: str, view: str) -> float:
        return 100.0 * self.correct[(subset, view)] / self.total[(subset, view)]

    @property
    def cells(self) -> dict:
        return {key: 100.0 * self.correct[key] / self.total[key] for key in self.total}

    def subset_mean(self, subset: str) -> float:
        accs = [self.accuracy(subset, v) for v in self.views if (subset, v) in self.total]
        return float(np.mean(accs)) if accs else math.nan

    @property
    def subset_means(self) -> dict:
        return {s: self.subset_mean(s) for s in self.subsets}

    @property
    def mean(self) -> float:
        vals = [m for m in self.subset_means.values() if not math.isnan(m)]
        return float(np.mean(vals)) if vals else math.nan

    def to_dict(self) -> dict:
        return {
            "subsets": list(self.subsets),
            "views": list(self.views),
            "cells": {
                s: {v: self.accuracy(s, v) for v in self.views if (s, v) in self.total}
                for s in self.subsets
            },
            "counts": {
                s: {v: [self.correct[(s, v)], self.total[(s, v)]] for v in self.views if (s, v) in self.total}
                for s in self.subsets
            },
            "subset_means": self.subset_means,
            "mean": self.mean,
            "n_comparisons": self.n_comparisons,
        }

    def to_csv(self) -> str:
        """Per-view table: one row per probe subset, one column per probe view, then Mean."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["probe", *self.views, "Mean"])
        for s in self.subsets:
            row = [s]
            for v in self.views:
                row.append(f"{self.accuracy(s, v):.2f}" if (s, v) in self.total else "")
            row.append(f"{self.subset_mean(s):.2f}")
            w.writerow(row)
        return buf.getvalue()


def gei(frames) -> np.ndarray:
    """Gait energy image: per-pixel temporal mean of a (T, H, W) stack."""
    arr = np.asarray(frames, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] == 0:
        raise DimensionMismatch(f"expected a non-empty (T, H, W) stack, got {arr.shape}")
    return arr.mean(axis=0)


def gei_embed(seq: GaitSequence, size=TargetSize()) -> Embedding:
    """Flattened GEI of a sequence whose frames are already at ``size``."""
    size = _as_target_size(size)
    if seq.shape != size.as_tuple():
        raise DimensionMismatch(f"frames are {seq.shape}, expected {size.as_tuple()}; align first")
    return Embedding(gei(seq.to_array()).ravel(), seq.key)


def distance(a: Embedding, b: Embedding) -> float:
    """Euclidean distance between two embeddings."""
    if a.vector.shape != b.vector.shape:
        raise DimensionMismatch(f"embedding lengths differ: {a.vector.size} vs {b.vector.size}")
    return float(np.sqrt(np.sum((a.vector - b.vector) ** 2)))


def _distances(matrix: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum((matrix - v) ** 2, axis=1))


def nearest(dists: np.ndarray, keys: list) -> int:
    """Index of the smallest distance; ties go to the smallest key."""
    best = dists.min()
    tied = np.flatnonzero(dists == best)
    if tied.size == 1:
        return int(tied[0])
    return int(min(tied, key=lambda i: keys[i]))


def rank1(gallery, probes, protocol: EvalProtocol = EvalProtocol(), log: list | None = None) -> EvalReport:
    """Rank-1 accuracy of ``probes`` against ``gallery``.

    Each probe is matched to its nearest gallery embedding (Euclidean), among
    gallery entries with a different view when ``exclude_identical_view`` is
    set.  Ties go to the lexicographically smallest (subject_id, view,
    condition).
    Probes whose condition is in no probe subset are ignored.

    Parameters
    ----------
    gallery, probes : list of Embedding
    protocol : EvalProtocol
    log : list, optional
        When given, every (probe source, gallery source) comparison is appended.

    Raises
    ------
    NoValidCandidates
        If a probe has no candidate left after view exclusion.
    EmptyProtocol
        If the gallery is empty or some probe subset has no probe.
    """
    gallery = list(gallery)
    if not gallery:
        raise EmptyProtocol("gallery is empty")
    dims = {e.vector.size for e in gallery} | {e.vector.size for e in probes}
    if len(dims) > 1:
        raise DimensionMismatch(f"embeddings of different lengths: {sorted(dims)}")
    matrix = np.stack([e.vector for e in gallery])
    gviews = np.array([e.view for e in gallery], dtype=object)
    keys = [(e.subject_id, e.view, e.condition) for e in gallery]

    assigned = [(p, protocol.subset_of(p.condition)) for p in probes]
    assigned = [(p, s) for p, s in assigned if s is not None]
    if not assigned:
        raise EmptyProtocol("no probe belongs to any probe subset")

    present = {s for _, s in assigned}
    missing = [s for s in protocol.subset_names if s not in present]
    if missing:
        raise EmptyProtocol(f"probe subsets without probes: {missing}")
    views = sorted({p.view for p, _ in assigned})
    subsets = list(protocol.subset_names)
    report = EvalReport(subsets=subsets, views=views)
    for probe, subset in assigned:
        if protocol.exclude_identical_view:
            idx = np.flatnonzero(gviews != probe.view)
        else:
            idx = np.arange(len(gallery))
        if idx.size == 0:
            raise NoValidCandidates(
                f"probe {probe.source} has no gallery candidate outside view {probe.view}"
            )
        dists = _distances(matrix[idx], probe.vector)
        best = idx[nearest(dists, [keys[i] for i in idx])]
        cell = (subset, probe.view)
        report.total[cell] = report.total.get(cell, 0) + 1
        report.correct[cell] = report.correct.get(cell, 0) + int(gallery[best].subject_id == probe.subject_id)
        report.n_comparisons += idx.size
        if log is not None:
            log.extend((probe.source, gallery[i].source) for i in idx)
    return report
