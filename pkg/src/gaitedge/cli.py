"""``gaitedge`` command line: data generation, preprocessing, alignment,
gradient checks and rank-1 evaluation.

Exit status is 0 on success, 1 on a runtime failure and 2 on a usage or
configuration error.  Every output is a pure function of the inputs and
``--seed``.
"""

from __future__ import annotations

import argparse
import json
import sys
import zlib
from pathlib import Path

import numpy as np

from . import __version__
from .align import DISTURB_PROBABILITY, gait_align, resize
from .config import ExperimentConfig, PipelineConfig, load_config
from .core import StructuringElement, TargetSize, load_grid, save_grid, scan_dataset
from .datagen import CASIA_CONDITIONS, clean_domain, generate_domain, jittered_domain, read_domain_file
from .estimators import EdgeSynthesizer, SegmentationNoise
from .evaluation import parse_conditions
from .exceptions import ConfigError, GaitEdgeError
from .experiments import run_cross_domain, run_single_domain, single_domain_csv
from .gradcheck import TOLERANCES, run_target
from .morphology import preprocess
from .synthesis import BCE_EPS, LossWeights

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
PRESETS = {"clean": clean_domain, "jittered": jittered_domain}


class UsageError(Exception):
    """Bad arguments detected after parsing; maps to exit status 2."""


def _print_json(obj, out=None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out is not None:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    return text


def _se_size(text: str) -> int:
    try:
        return StructuringElement(int(text)).size
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _se_sweep(text: str) -> list[int]:
    return [_se_size(t) for t in text.split(",") if t.strip()]


def _target_size(text: str) -> TargetSize:
    try:
        return TargetSize.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _frames(layout):
    """(relative sequence directory, frame path) for every frame of a dataset."""
    for entry in layout:
        rel = Path(entry.subject_id, entry.condition, entry.view)
        for f in entry.frames:
            yield rel, f


# --------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> int:
    if args.spec in PRESETS:
        spec, extras = PRESETS[args.spec](), {}
    else:
        path = Path(args.spec)
        if not path.is_file():
            raise UsageError(f"domain spec not found: {path}")
        spec, extras = read_domain_file(path)
    n_subjects = args.n_subjects or int(extras.get("n_subjects", 10))
    conditions = parse_conditions(args.conditions or extras.get("conditions", CASIA_CONDITIONS))
    if n_subjects < 2:
        raise ConfigError("n_subjects must be at least 2")
    layout = generate_domain(spec, n_subjects, conditions, seed=args.seed, out_dir=args.out)
    meta = {
        "spec": spec.to_dict(),
        "n_subjects": n_subjects,
        "conditions": list(conditions),
        "seed": args.seed,
        "n_sequences": len(layout),
    }
    _print_json(meta, Path(args.out) / "domain.json")
    print(f"wrote {len(layout)} sequences to {args.out}")
    return EXIT_OK


def cmd_preprocess(args) -> int:
    sizes = args.sweep or [args.se_size]
    layout = scan_dataset(args.input)
    out = Path(args.out)
    counts = {size: 0 for size in sizes}
    failures = []
    for rel, frame in _frames(layout):
        try:
            mask = load_grid(frame)
            for size in sizes:
                edge, interior = preprocess(mask, size)
                base = (out / f"se{size}" if args.sweep else out) / rel
                save_grid(edge, base / f"{frame.stem}_edge.pgm")
                save_grid(interior, base / f"{frame.stem}_interior.pgm")
                counts[size] += int(edge.values.sum())
        except GaitEdgeError as exc:
            failures.append(f"{rel / frame.name}: {exc}")
    summary = {
        "edge_pixels": {str(k): v for k, v in counts.items()},
        "n_frames": sum(len(e.frames) for e in layout),
        "n_failed": len(failures),
    }
    _print_json(summary, out / "summary.json")
    for size in sizes:
        print(f"se={size}: {counts[size]} edge pixels")
    for msg in failures:
        print(f"error: {msg}", file=sys.stderr)
    return EXIT_FAILURE if failures else EXIT_OK


def cmd_synthesize(args) -> int:
    layout = scan_dataset(args.input)
    synth = EdgeSynthesizer(se_size=args.se_size)
    n = 0
    for rel, frame in _frames(layout):
        x = load_grid(frame).values[np.newaxis]
        if args.noise > 0 or args.blur > 0:
            state = zlib.crc32(f"{args.seed}/{rel.as_posix()}/{frame.name}".encode())
            x = SegmentationNoise(noise=args.noise, blur=args.blur, random_state=state).transform(x)
        save_grid(synth.transform(x)[0], Path(args.out) / rel / frame.name)
        n += 1
    print(f"synthesized {n} frames into {args.out}")
    return EXIT_OK


def cmd_align(args) -> int:
    layout = scan_dataset(args.input)
    n = 0
    for rel, frame in _frames(layout):
        g = load_grid(frame)
        out = gait_align(g, None, args.target_size)[0] if args.align else resize(g, args.target_size)
        save_grid(out, Path(args.out) / rel / frame.name)
        n += 1
    mode = "aligned" if args.align else "resized"
    print(f"{mode} {n} frames to {args.target_size} into {args.out}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    report, ok = run_target(args.target, seed=args.seed)
    field_name, bound = TOLERANCES[args.target]
    payload = {"target": args.target, "seed": args.seed, "tolerance": {field_name: bound}, "passed": ok}
    payload.update(report.to_dict())
    sys.stdout.write(_print_json(payload, args.out))
    return EXIT_OK if ok else EXIT_FAILURE


def _experiment(args) -> ExperimentConfig:
    exp = load_config(args.config) if args.config else ExperimentConfig(PipelineConfig())
    pipeline = exp.pipeline.with_overrides(
        seed=args.seed,
        se_size=args.se_size,
        target_size=args.target_size,
        align=args.align,
        disturb=True if args.disturb else None,
        max_offset=args.max_offset,
    )
    if args.data:
        return ExperimentConfig(pipeline, domain=Path(args.data))
    if args.domain_a or args.domain_b:
        if not (args.domain_a and args.domain_b):
            raise UsageError("--domain-a and --domain-b go together")
        return ExperimentConfig(pipeline, domain_a=Path(args.domain_a), domain_b=Path(args.domain_b))
    if exp.domain is None and exp.domain_a is None:
        raise UsageError("no dataset given: use --data, --domain-a/--domain-b or a [data] config section")
    return ExperimentConfig(pipeline, exp.domain, exp.domain_a, exp.domain_b)


def cmd_eval(args) -> int:
    exp = _experiment(args)
    cfg = exp.pipeline
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if exp.is_cross_domain:
        names = (exp.domain_a.name or "A", exp.domain_b.name or "B")
        if names[0] == names[1]:
            names = ("A", "B")
        result = run_cross_domain(exp.domain_a, exp.domain_b, cfg, names=names)
        table = result.to_csv()
        payload = result.to_dict()
        (out / "per_view.csv").write_text(
            "".join(f"# train={tr} test={te}\n" + result[(tr, te)].to_csv() for tr in names for te in names),
            encoding="utf-8",
        )
    else:
        report = run_single_domain(exp.domain, cfg)
        name = exp.domain.name or "A"
        table = single_domain_csv(report, name, cfg.method_name)
        payload = {"method": cfg.method_name, "domain": name, "report": report.to_dict()}
        (out / "per_view.csv").write_text(report.to_csv(), encoding="utf-8")
    payload["config"] = {
        "se_size": cfg.se_size,
        "target_size": str(cfg.target_size),
        "align": cfg.align,
        "disturb": cfg.disturb,
        "max_offset": cfg.max_offset,
        "embedding": cfg.embedding,
        "seed": cfg.seed,
    }
    (out / "report.csv").write_text(table, encoding="utf-8")
    _print_json(payload, out / "report.json")
    sys.stdout.write(table)
    return EXIT_OK


def cmd_selftest(args) -> int:
    cfg = PipelineConfig()
    checks = [
        ("structuring element 3x3", cfg.se_size == 3),
        ("target size 64x44", cfg.target_size == TargetSize(64, 44)),
        ("segmentation loss weight 10", cfg.lambda_seg == 10.0 and LossWeights().lambda_seg == 10.0),
        ("disturbance probability 0.5", cfg.disturb_probability == DISTURB_PROBABILITY == 0.5),
        ("alignment on", cfg.align is True),
        ("gallery NM#01-04", cfg.protocol.gallery == parse_conditions("NM#01-04")),
        ("probe subsets NM/BG/CL", cfg.protocol.subset_names == ["NM", "BG", "CL"]),
        ("identical-view exclusion on", cfg.protocol.exclude_identical_view),
        ("BCE clamp 1e-7", BCE_EPS == 1e-7),
    ]
    for name, ok in checks:
        print(f"{'ok  ' if ok else 'FAIL'} {name}")
    return EXIT_OK if all(ok for _, ok in checks) else EXIT_FAILURE


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="RNG seed (default 0, or the config's for eval)")

    parser = argparse.ArgumentParser(prog="gaitedge", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic silhouette dataset")
    p.add_argument("spec", help="JSON domain spec, or a preset: clean, jittered")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--n-subjects", type=int, default=None)
    p.add_argument("--conditions", default=None, help='e.g. "NM#01-06,BG#01-02,CL#01-02"')
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("preprocess", parents=[common], help="write edge/interior masks for every frame")
    p.add_argument("input", help="dataset directory")
    p.add_argument("--out", required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--se-size", type=_se_size, default=3)
    g.add_argument("--sweep", type=_se_sweep, default=None, help="comma-separated sizes, e.g. 3,5,7,9")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("synthesize", parents=[common], help="composite edge band and interior")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--se-size", type=_se_size, default=3)
    p.add_argument("--noise", type=float, default=0.0, help="std of noise added to the probability map")
    p.add_argument("--blur", type=float, default=0.0, help="Gaussian blur of the probability map")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("align", parents=[common], help="align (or resize) every frame")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--target-size", type=_target_size, default=TargetSize())
    p.add_argument("--align", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient check")
    p.add_argument("target", choices=sorted(TOLERANCES))
    p.add_argument("--out", default=None, help="also write the JSON report here")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("eval", parents=[common], help="rank-1 evaluation on one or two datasets")
    p.add_argument("--config", default=None)
    p.add_argument("--data", default=None, help="single-domain dataset directory")
    p.add_argument("--domain-a", default=None)
    p.add_argument("--domain-b", default=None)
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--se-size", type=_se_size, default=None)
    p.add_argument("--target-size", type=_target_size, default=None)
    p.add_argument("--align", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--disturb", action="store_true")
    p.add_argument("--max-offset", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("selftest", parents=[common], help="check the built-in defaults")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.seed is None and args.command != "eval":
        args.seed = 0
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"gaitedge {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GaitEdgeError, OSError) as exc:
        print(f"gaitedge {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
