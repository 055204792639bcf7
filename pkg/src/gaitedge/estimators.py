"""scikit-learn compatible wrappers around the silhouette operators.

Frame transformers take ``X`` of shape (n_frames, H, W) with values in
[0, 1] and return a stack of the same length, so they chain with
:class:`sklearn.pipeline.Pipeline`::

    pipe = make_pipeline(SegmentationNoise(), EdgeSynthesizer(se_size=3), GaitAligner())
    aligned = pipe.fit_transform(frames)

Sequence-level estimators (:class:`GEIEmbedder`, :class:`GalleryMatcher`)
take a list of (T, H, W) stacks or an (n, D) embedding matrix respectively.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.decomposition import PCA
from sklearn.utils.validation import check_is_fitted

from . import align as _align
from .core import Grid, _as_target_size, binarize
from .evaluation import gei, nearest
from .exceptions import DimensionMismatch, NoValidCandidates, ValueOutOfRange
from .morphology import preprocess
from .synthesis import synthesize

__all__ = [
    "check_frames",
    "Disturber",
    "SegmentationNoise",
    "EdgeSynthesizer",
    "GaitAligner",
    "SizeNormalizer",
    "GEIEmbedder",
    "GalleryMatcher",
]


def check_frames(X) -> np.ndarray:
    """Validate a frame stack: 3-D, finite, values in [0, 1]; returns float64."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[np.newaxis]
    if X.ndim != 3 or X.shape[0] == 0 or X.shape[1] == 0 or X.shape[2] == 0:
        raise DimensionMismatch(f"expected a (n_frames, H, W) stack, got shape {X.shape}")
    if not np.all(np.isfinite(X)) or X.min() < 0.0 or X.max() > 1.0:
        raise ValueOutOfRange("frame values must be finite and lie in [0, 1]")
    return X


class _FrameTransformer(TransformerMixin, BaseEstimator):
    """Stateless per-frame transformer; ``fit`` only validates."""

    def fit(self, X, y=None):
        check_frames(X)
        return self

    def transform(self, X):
        X = check_frames(X)
        return np.stack([self._transform_frame(i, f) for i, f in enumerate(X)])

    def _transform_frame(self, index, frame):  # pragma: no cover - abstract
        raise NotImplementedError

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.requires_fit = False
        return tags


class Disturber(_FrameTransformer):
    """Random integer translation of each frame with probability 0.5.

    Frame ``i`` uses the RNG stream ``(random_state, i)``, so a stack is
    disturbed identically however it is batched.
    """

    def __init__(self, max_offset=None, random_state=0):
        self.max_offset = max_offset
        self.random_state = random_state

    def _transform_frame(self, index, frame):
        rng = np.random.default_rng([int(self.random_state), index])
        return _align.disturb(frame, rng, self.max_offset).values


class SegmentationNoise(_FrameTransformer):
    """Turn a binary mask into a soft probability map.

    Stands in for a segmentation network's output: Gaussian blur of width
    ``blur`` plus additive Gaussian noise of std ``noise``, clipped to [0, 1].
    ``noise=0`` and ``blur=0`` returns the mask unchanged.
    """

    def __init__(self, noise=0.1, blur=1.0, random_state=0):
        self.noise = noise
        self.blur = blur
        self.random_state = random_state

    def _transform_frame(self, index, frame):
        p = ndimage.gaussian_filter(frame, self.blur, mode="constant") if self.blur > 0 else frame
        if self.noise > 0:
            rng = np.random.default_rng([int(self.random_state), index])
            p = p + self.noise * rng.standard_normal(frame.shape)
        return np.clip(p, 0.0, 1.0)


class EdgeSynthesizer(_FrameTransformer):
    """Binarize a probability map, split it into edge/interior, composite.

    Output is ``edge * P + interior`` where edge and interior come from the
    morphology of ``round(P)`` with a ``se_size`` square.
    """

    def __init__(self, se_size=3):
        self.se_size = se_size

    def _transform_frame(self, index, frame):
        prob = Grid(frame)
        edge, interior = preprocess(binarize(prob), self.se_size)
        return synthesize(edge, interior, prob).composite.values


class GaitAligner(_FrameTransformer):
    """Resample frames to ``target_size``, body-aligned or plainly resized."""

    def __init__(self, target_size=(64, 44), align=True):
        self.target_size = target_size
        self.align = align

    def _transform_frame(self, index, frame):
        size = _as_target_size(self.target_size)
        if self.align:
            return _align.gait_align(frame, None, size)[0].values
        return _align.resize(frame, size).values


class SizeNormalizer(_FrameTransformer):
    """Classic non-differentiable size normalization (binary output)."""

    def __init__(self, target_size=(64, 44)):
        self.target_size = target_size

    def _transform_frame(self, index, frame):
        return _align.size_normalize(binarize(frame), self.target_size).values


class GEIEmbedder(TransformerMixin, BaseEstimator):
    """Gait energy image features, optionally projected with PCA.

    ``X`` is a list of (T, H, W) sequences.  With ``n_components=None`` the
    embedding is the flattened GEI and fitting learns nothing; otherwise a PCA
    basis is fitted on the training GEIs.
    """

    def __init__(self, n_components=None):
        self.n_components = n_components

    def _geis(self, X) -> np.ndarray:
        seqs = [check_frames(s) for s in X]
        if not seqs:
            raise DimensionMismatch("no sequences given")
        shapes = {s.shape[1:] for s in seqs}
        if len(shapes) != 1:
            raise DimensionMismatch(f"sequences have different frame sizes: {sorted(shapes)}")
        return np.stack([gei(s).ravel() for s in seqs])

    def fit(self, X, y=None):
        G = self._geis(X)
        self.n_features_in_ = G.shape[1]
        if self.n_components is None:
            self.pca_ = None
        else:
            k = min(int(self.n_components), G.shape[0], G.shape[1])
            self.pca_ = PCA(n_components=k, svd_solver="full").fit(G)
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        G = self._geis(X)
        if G.shape[1] != self.n_features_in_:
            raise DimensionMismatch(f"expected {self.n_features_in_} pixels per GEI, got {G.shape[1]}")
        return G if self.pca_ is None else self.pca_.transform(G)


class GalleryMatcher(ClassifierMixin, BaseEstimator):
    """Nearest-neighbour identification with optional identical-view exclusion.

    ``fit(X, y, views=...)`` enrols the gallery; ``predict(X, views=...)``
    returns the subject of the nearest gallery row (Euclidean), skipping
    gallery rows that share the probe's view when ``exclude_identical_view``
    is set.  Ties go to the smallest (subject, view).
    """

    def __init__(self, exclude_identical_view=True):
        self.exclude_identical_view = exclude_identical_view

    def fit(self, X, y, views=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or len(X) != len(y):
            raise DimensionMismatch("X must be (n_gallery, n_features) with one label per row")
        self.gallery_ = X
        self.classes_ = np.unique(np.asarray(y).astype(str))
        self.labels_ = np.asarray(y).astype(str)
        self.views_ = np.asarray(views if views is not None else [""] * len(X)).astype(str)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X, views=None):
        check_is_fitted(self, "gallery_")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(f"expected (n, {self.n_features_in_}) probes, got {X.shape}")
        pviews = np.asarray(views if views is not None else [""] * len(X)).astype(str)
        keys = list(zip(self.labels_, self.views_))
        out = []
        for x, v in zip(X, pviews):
            idx = np.flatnonzero(self.views_ != v) if self.exclude_identical_view else np.arange(len(keys))
            if idx.size == 0:
                raise NoValidCandidates(f"no gallery entry outside view {v!r}")
            d = np.sqrt(np.sum((self.gallery_[idx] - x) ** 2, axis=1))
            out.append(self.labels_[idx[nearest(d, [keys[i] for i in idx])]])
        return np.array(out)

    def score(self, X, y, views=None):
        return float(np.mean(self.predict(X, views) == np.asarray(y).astype(str)))

