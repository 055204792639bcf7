"""Single-domain and cross-domain rank-1 experiments over silhouette datasets.

Every sequence goes through the same chain: optional detector jitter, the
probability map (the mask itself or a noisy soft version), edge synthesis,
then either body alignment or a plain resize to the target size.  The
embedding is a GEI, optionally projected on a PCA basis fitted to the
training split; that fit is the only data-dependent step, so "training" on
one domain and testing on another means reusing that basis.
"""

from __future__ import annotations

import csv
import io
import zlib
from dataclasses import dataclass, field
from pathlib import Path

from sklearn.pipeline import make_pipeline

from .config import PipelineConfig
from .core import DatasetLayout, GaitSequence, load_sequence, scan_dataset
from .estimators import Disturber, EdgeSynthesizer, GaitAligner, GEIEmbedder, SegmentationNoise
from .evaluation import Embedding, EvalReport, rank1
from .exceptions import EmptyProtocol

__all__ = [
    "sequence_seed",
    "build_frame_pipeline",
    "process_sequence",
    "load_sequences",
    "split_subjects",
    "evaluate",
    "run_single_domain",
    "CrossDomainReport",
    "run_cross_domain",
    "single_domain_csv",
]


def sequence_seed(config: PipelineConfig, key: tuple) -> int:
    """Stable per-sequence seed, independent of processing order."""
    return zlib.crc32(f"{config.seed}/{'/'.join(key)}".encode())


def build_frame_pipeline(config: PipelineConfig, seed: int = 0):
    steps = []
    if config.disturb:
        steps.append(Disturber(max_offset=config.max_offset, random_state=seed))
    if config.prob_source == "noisy":
        steps.append(SegmentationNoise(noise=config.prob_noise, blur=config.prob_blur, random_state=seed + 1))
    steps.append(EdgeSynthesizer(se_size=config.se_size))
    steps.append(GaitAligner(target_size=config.target_size.as_tuple(), align=config.align))
    return make_pipeline(*steps)


def process_sequence(seq: GaitSequence, config: PipelineConfig) -> GaitSequence:
    pipe = build_frame_pipeline(config, sequence_seed(config, seq.key))
    out = pipe.fit_transform(seq.to_array())
    return GaitSequence(tuple(out), seq.subject_id, seq.condition, seq.view)


def load_sequences(dataset) -> list[GaitSequence]:
    """Accept a list of sequences, a DatasetLayout or a dataset directory."""
    if isinstance(dataset, (str, Path)):
        dataset = scan_dataset(dataset)
    if isinstance(dataset, DatasetLayout):
        return [load_sequence(e) for e in dataset]
    return list(dataset)


def split_subjects(seqs, n_train: int) -> tuple[list, list]:
    """First ``n_train`` subjects (sorted) for fitting, the rest for testing."""
    subjects = sorted({s.subject_id for s in seqs})
    if n_train >= len(subjects):
        raise EmptyProtocol(f"train split takes all {len(subjects)} subjects, none left to test")
    train = set(subjects[:n_train])
    return [s for s in seqs if s.subject_id in train], [s for s in seqs if s.subject_id not in train]


def _embedder(config: PipelineConfig) -> GEIEmbedder:
    return GEIEmbedder(n_components=config.pca_components if config.embedding == "gei_pca" else None)


def evaluate(train: list, test: list, config: PipelineConfig, log: list | None = None) -> EvalReport:
    """Fit the embedding on processed ``train`` sequences, rank-1 on ``test``."""
    protocol = config.protocol
    gallery, probes = protocol.split(test)
    if not gallery:
        raise EmptyProtocol(f"no test sequence has a gallery condition {protocol.gallery}")
    if not probes:
        raise EmptyProtocol("no test sequence falls in any probe subset")
    embedder = _embedder(config)
    embedder.fit([s.to_array() for s in (train if train else gallery)])

    def embed(items):
        vecs = embedder.transform([s.to_array() for s in items])
        return [Embedding(v, s.key) for v, s in zip(vecs, items)]

    return rank1(embed(gallery), embed(probes), protocol, log=log)


def run_single_domain(dataset, config: PipelineConfig = PipelineConfig(), log: list | None = None) -> EvalReport:
    seqs = [process_sequence(s, config) for s in load_sequences(dataset)]
    train, test = split_subjects(seqs, config.train_subjects)
    return evaluate(train, test, config, log=log)


@dataclass
class CrossDomainReport:
    """The 2x2 train-domain by test-domain grid of rank-1 reports."""

    names: tuple
    method: str
    reports: dict = field(default_factory=dict)  # (train, test) -> EvalReport

    def __getitem__(self, key) -> EvalReport:
        return self.reports[key]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "domains": list(self.names),
            "runs": [
                {"train": tr, "test": te, "report": self.reports[(tr, te)].to_dict()}
                for tr in self.names
                for te in self.names
            ],
        }

    def to_csv(self) -> str:
        """Rows: training set x method.  Columns: subset accuracies and mean per test set."""
        subsets = self.reports[(self.names[0], self.names[0])].subsets
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["train", "method"]
        for te in self.names:
            header += [f"{te}:{s}" for s in subsets] + [f"{te}:Mean"]
        w.writerow(header)
        for tr in self.names:
            row = [tr, self.method]
            for te in self.names:
                rep = self.reports[(tr, te)]
                row += [f"{rep.subset_mean(s):.2f}" for s in subsets] + [f"{rep.mean:.2f}"]
            w.writerow(row)
        return buf.getvalue()


def run_cross_domain(
    domain_a,
    domain_b,
    config: PipelineConfig = PipelineConfig(),
    names: tuple = ("A", "B"),
) -> CrossDomainReport:
    """Fit on each domain's training subjects and test on each domain's test subjects."""
    split = {}
    for name, data in zip(names, (domain_a, domain_b)):
        seqs = [process_sequence(s, config) for s in load_sequences(data)]
        split[name] = split_subjects(seqs, config.train_subjects)
    result = CrossDomainReport(tuple(names), config.method_name)
    for tr in names:
        for te in names:
            result.reports[(tr, te)] = evaluate(split[tr][0], split[te][1], config)
    return result


def single_domain_csv(report: EvalReport, name: str, method: str) -> str:
    """One-row version of the cross-domain table for a single-domain run."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["train", "method", *[f"{name}:{s}" for s in report.subsets], f"{name}:Mean"])
    w.writerow([name, method, *[f"{report.subset_mean(s):.2f}" for s in report.subsets], f"{report.mean:.2f}"])
    return buf.getvalue()

