"""Silhouette pipeline for gait recognition: edge/interior synthesis,
differentiable alignment and rank-1 evaluation on synthetic walkers."""

__version__ = "0.1.0"

from .align import (
    AlignContext,
    AlignmentBox,
    compute_bbox,
    disturb,
    gait_align,
    gait_align_backward,
    resize,
    roi_resample,
    size_normalize,
    translate,
)
from .config import ExperimentConfig, PipelineConfig, load_config, parse_config
from .core import (
    DatasetLayout,
    GaitSequence,
    Grid,
    GridKind,
    StructuringElement,
    TargetSize,
    binarize,
    decode_pgm,
    encode_pgm,
    load_grid,
    save_grid,
    scan_dataset,
)
from .datagen import DomainSpec, clean_domain, generate_domain, generate_sequences, jittered_domain
from .estimators import (
    Disturber,
    EdgeSynthesizer,
    GaitAligner,
    GalleryMatcher,
    GEIEmbedder,
    SegmentationNoise,
    SizeNormalizer,
)
from .evaluation import Embedding, EvalProtocol, EvalReport, gei_embed, rank1
from .exceptions import GaitEdgeError
from .experiments import CrossDomainReport, run_cross_domain, run_single_domain
from .gradcheck import GradReport, check_gradient
from .morphology import dilate, erode, preprocess
from .synthesis import bce_loss, joint_loss, synthesize, synthesize_backward

__all__ = [
    "__version__",
    "AlignContext",
    "AlignmentBox",
    "compute_bbox",
    "disturb",
    "gait_align",
    "gait_align_backward",
    "resize",
    "roi_resample",
    "size_normalize",
    "translate",
    "ExperimentConfig",
    "PipelineConfig",
    "load_config",
    "parse_config",
    "DatasetLayout",
    "GaitSequence",
    "Grid",
    "GridKind",
    "StructuringElement",
    "TargetSize",
    "binarize",
    "decode_pgm",
    "encode_pgm",
    "load_grid",
    "save_grid",
    "scan_dataset",
    "DomainSpec",
    "clean_domain",
    "generate_domain",
    "generate_sequences",
    "jittered_domain",
    "Disturber",
    "EdgeSynthesizer",
    "GaitAligner",
    "GalleryMatcher",
    "GEIEmbedder",
    "SegmentationNoise",
    "SizeNormalizer",
    "Embedding",
    "EvalProtocol",
    "EvalReport",
    "gei_embed",
    "rank1",
    "GaitEdgeError",
    "CrossDomainReport",
    "run_cross_domain",
    "run_single_domain",
    "GradReport",
    "check_gradient",
    "dilate",
    "erode",
    "preprocess",
    "bce_loss",
    "joint_loss",
    "synthesize",
    "synthesize_backward",
]
