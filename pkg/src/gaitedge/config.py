"""Pipeline settings and the INI-style experiment config file.

An empty config reproduces the reference settings: 3x3 structuring element,
64x44 output, segmentation loss weight 10 and a 0.5 disturbance probability.

Example::

    [pipeline]
    se_size = 3
    target_size = 64x44
    align = true
    disturb = false

    [protocol]
    gallery = NM#01-04
    probes = NM:NM#05-06; BG:BG#01-02; CL:CL#01-02
    exclude_identical_view = true

    [data]
    domain = data/A          # single-domain run
    # domain_a = data/A      # cross-domain run
    # domain_b = data/B
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from .align import DISTURB_PROBABILITY
from .core import StructuringElement, TargetSize, _as_target_size
from .evaluation import EvalProtocol, parse_conditions
from .exceptions import ConfigError
from .synthesis import LossWeights

__all__ = ["PipelineConfig", "ExperimentConfig", "load_config", "parse_config"]

EMBEDDINGS = ("gei", "gei_pca")
PROB_SOURCES = ("mask", "noisy")


@dataclass(frozen=True)
class PipelineConfig:
    se_size: int = 3
    target_size: TargetSize = TargetSize(64, 44)
    lambda_seg: float = 10.0
    disturb: bool = False
    disturb_probability: float = DISTURB_PROBABILITY
    max_offset: int | None = None
    align: bool = True
    embedding: str = "gei"
    pca_components: int = 32
    prob_source: str = "mask"
    prob_noise: float = 0.1
    prob_blur: float = 1.0
    train_subjects: int = 0
    seed: int = 0
    protocol: EvalProtocol = field(default_factory=EvalProtocol)

    def __post_init__(self):
        try:
            StructuringElement(self.se_size)
            object.__setattr__(self, "target_size", _as_target_size(self.target_size))
            LossWeights(self.lambda_seg)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.disturb_probability != DISTURB_PROBABILITY:
            raise ConfigError(f"disturb_probability is fixed at {DISTURB_PROBABILITY}")
        if self.max_offset is not None and self.max_offset < 0:
            raise ConfigError("max_offset must be non-negative")
        if self.embedding not in EMBEDDINGS:
            raise ConfigError(f"embedding must be one of {EMBEDDINGS}, got {self.embedding!r}")
        if self.prob_source not in PROB_SOURCES:
            raise ConfigError(f"prob_source must be one of {PROB_SOURCES}, got {self.prob_source!r}")
        if self.train_subjects < 0:
            raise ConfigError("train_subjects must be non-negative")
        if self.embedding == "gei_pca" and self.train_subjects < 2:
            raise ConfigError("gei_pca needs at least two training subjects")

    @property
    def method_name(self) -> str:
        name = "GEI+PCA" if self.embedding == "gei_pca" else "GEI"
        name += f"/se{self.se_size}"
        name += "/align" if self.align else "/resize"
        if self.disturb:
            name += "/disturbed"
        return name

    def with_overrides(self, **kw) -> "PipelineConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


@dataclass(frozen=True)
class ExperimentConfig:
    pipeline: PipelineConfig
    domain: Path | None = None
    domain_a: Path | None = None
    domain_b: Path | None = None

    @property
    def is_cross_domain(self) -> bool:
        return self.domain_a is not None


_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def _bool(key, text) -> bool:
    try:
        return _BOOL[text.strip().lower()]
    except KeyError:
        raise ConfigError(f"{key}: expected a boolean, got {text!r}") from None


def _int(key, text) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


def _float(key, text) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None


_PIPELINE_KEYS = {
    "se_size": _int,
    "target_size": lambda k, t: _as_target_size(t),
    "lambda_seg": _float,
    "disturb": _bool,
    "disturb_probability": _float,
    "max_offset": lambda k, t: None if t.strip().lower() in ("", "auto", "none") else _int(k, t),
    "align": _bool,
    "embedding": lambda k, t: t.strip(),
    "pca_components": _int,
    "prob_source": lambda k, t: t.strip(),
    "prob_noise": _float,
    "prob_blur": _float,
    "train_subjects": _int,
    "seed": _int,
}


def _parse_probes(text: str) -> tuple:
    subsets = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        if ":" not in part:
            raise ConfigError(f"probe subset {part!r} must look like NAME:CONDITIONS")
        name, conds = part.split(":", 1)
        subsets.append((name.strip(), parse_conditions(conds)))
    return tuple(subsets)


def parse_config(text: str, base_dir=".") -> ExperimentConfig:
    # ';' separates probe subsets, so only '#' starts inline comments there
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    unknown_sections = set(cp.sections()) - {"pipeline", "protocol", "data"}
    if unknown_sections:
        raise ConfigError(f"unknown config sections {sorted(unknown_sections)}")

    kw = {}
    if cp.has_section("pipeline"):
        for key, value in cp.items("pipeline"):
            if key not in _PIPELINE_KEYS:
                raise ConfigError(f"unknown pipeline key {key!r}")
            try:
                kw[key] = _PIPELINE_KEYS[key](key, value)
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None

    if cp.has_section("protocol"):
        sec = cp["protocol"]
        unknown = set(sec) - {"gallery", "probes", "exclude_identical_view"}
        if unknown:
            raise ConfigError(f"unknown protocol keys {sorted(unknown)}")
        default = EvalProtocol()
        kw["protocol"] = EvalProtocol(
            gallery=parse_conditions(sec.get("gallery", ",".join(default.gallery))),
            probe_subsets=_parse_probes(sec["probes"]) if "probes" in sec else default.probe_subsets,
            exclude_identical_view=_bool("exclude_identical_view", sec.get("exclude_identical_view", "true")),
        )
    pipeline = PipelineConfig(**kw)

    paths = {}
    if cp.has_section("data"):
        for key, value in cp.items("data"):
            if key not in ("domain", "domain_a", "domain_b"):
                raise ConfigError(f"unknown data key {key!r}")
            p = Path(value.strip())
            paths[key] = p if p.is_absolute() else Path(base_dir) / p
    if ("domain_a" in paths) != ("domain_b" in paths):
        raise ConfigError("cross-domain runs need both domain_a and domain_b")
    if "domain" in paths and "domain_a" in paths:
        raise ConfigError("give either domain or domain_a/domain_b, not both")
    return ExperimentConfig(pipeline, **paths)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, base_dir=path.parent)

