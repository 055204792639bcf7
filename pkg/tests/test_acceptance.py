"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines inline; they
are also repeated in the terminal summary.
"""

import json
import time
from fractions import Fraction

import numpy as np
import pytest
from conftest import batch_dilate, batch_erode, brute_dilate, brute_erode, random_masks
from test_evaluation import EXPECTED_CELLS, FIXTURE_PROTOCOL, brute_force, fixture_embeddings

from gaitedge.align import gait_align, gait_align_backward, translate
from gaitedge.cli import main
from gaitedge.config import PipelineConfig
from gaitedge.core import binarize
from gaitedge.datagen import clean_domain, generate_sequences, jittered_domain
from gaitedge.evaluation import EvalProtocol, rank1
from gaitedge.experiments import run_cross_domain, run_single_domain
from gaitedge.gradcheck import TOLERANCES, run_target
from gaitedge.morphology import dilate, erode, preprocess
from gaitedge.synthesis import synthesize

SE_SIZES = (3, 5, 7)
GRAD_SEEDS = range(5)


@pytest.fixture(scope="module")
def corpus():
    return random_masks(1000, (16, 16), seed=2022)


def test_01_morphology_matches_brute_force(corpus, verdict):
    t0 = time.perf_counter()
    mismatches = 0
    for k in SE_SIZES:
        ero, dil = batch_erode(corpus, k), batch_dilate(corpus, k)
        for i, m in enumerate(corpus):
            mismatches += not np.array_equal(erode(m, k).values, ero[i])
            mismatches += not np.array_equal(dilate(m, k).values, dil[i])
        # the vectorized oracle itself is pinned to the double loop on a sample
        for m, e, d in zip(corpus[:20], ero[:20], dil[:20]):
            mismatches += not np.array_equal(brute_erode(m, k), e)
            mismatches += not np.array_equal(brute_dilate(m, k), d)
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 10.0
    verdict(1, "morphology oracle equivalence", ok, f"{len(corpus)} masks x se{SE_SIZES}, {mismatches} mismatches, {elapsed:.2f}s")


def test_02_preprocess_identities(corpus, verdict):
    bad = 0
    for k in SE_SIZES:
        for m in corpus:
            edge, interior = preprocess(m, k)
            e, i = edge.values.astype(bool), interior.values.astype(bool)
            bad += bool(np.any(e & i))
            bad += not np.array_equal((e | i).astype(float), dilate(m, k).values)
    verdict(2, "edge/interior disjoint and union equals dilation", bad == 0, f"{bad} violations")


def test_03_edge_area_monotone(walkers, verdict):
    frames = walkers[:100]
    violations = 0
    for f in frames:
        areas = [preprocess(f, k).edge.values.sum() for k in (3, 5, 7, 9)]
        violations += any(b < a for a, b in zip(areas, areas[1:]))
    verdict(3, "edge area non-decreasing in se", violations == 0, f"{len(frames)} walker frames, {violations} violations")


def test_04_synthesis_identity(walkers, verdict):
    masks = list(random_masks(100, (16, 16), seed=7)) + [f.values for f in walkers[:100]]
    bad = 0
    for m in masks:
        edge, interior = preprocess(m, 3)
        out = synthesize(edge, interior, m).composite.values
        bad += not (out.dtype == m.dtype and out.tobytes() == m.tobytes())
    verdict(4, "synthesize(preprocess(M), P=M) == M bitwise", bad == 0, f"{len(masks)} masks, {bad} differ")


def test_05_synthesis_and_bce_gradients(verdict):
    synth = max(run_target("synthesize", seed=s)[0].max_abs_error for s in GRAD_SEEDS)
    bce = max(run_target("bce", seed=s)[0].max_rel_error for s in GRAD_SEEDS)
    ok = synth < TOLERANCES["synthesize"][1] and bce < TOLERANCES["bce"][1]
    verdict(5, "synthesis / BCE gradients", ok, f"synth max abs {synth:.2e} (<1e-8), bce max rel {bce:.2e} (<1e-6)")


def test_06_align_geometry(walkers, verdict):
    shapes_ok, rows_ok, worst_centre, worst_aspect = True, True, 0.0, 0.0
    for f in walkers:
        out = gait_align(f)[0]
        shapes_ok &= out.shape == (64, 44)
        b = binarize(out).values
        ys, xs = np.nonzero(b)
        rows_ok &= bool(ys.min() == 0 and ys.max() == 63)
        worst_centre = max(worst_centre, abs(xs.mean() - 21.5))
        yi, xi = np.nonzero(f.values)
        a_in = (np.ptp(xi) + 1) / (np.ptp(yi) + 1)
        a_out = (np.ptp(xs) + 1) / (np.ptp(ys) + 1)
        worst_aspect = max(worst_aspect, abs(a_out / a_in - 1.0))
    ok = shapes_ok and rows_ok and worst_centre <= 1.0 and worst_aspect < 0.05
    detail = (
        f"{len(walkers)} frames, shape ok={shapes_ok}, rows 0/63 ok={rows_ok}, "
        f"centre dev {worst_centre:.3f}px, aspect dev {100 * worst_aspect:.2f}%"
    )
    verdict(6, "GaitAlign geometry", ok, detail)


def test_07_align_differentiable(verdict):
    rel = max(run_target("align", seed=s)[0].max_rel_error for s in GRAD_SEEDS)
    leaks = 0
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = np.zeros((32, 48))
        top, left = rng.integers(2, 10), rng.integers(5, 30)
        x[top : top + rng.integers(8, 20), left : left + rng.integers(3, 10)] = 1.0
        out, ctx = gait_align(x, None, (16, 11))
        g = gait_align_backward(ctx, rng.standard_normal(out.shape))
        rows = ctx.row_weights.sum(axis=0) > 0
        cols = (ctx.col_weights.sum(axis=0) > 0)[ctx.pad : ctx.pad + x.shape[1]]
        leaks += int(np.count_nonzero(g[~(rows[:, None] & cols[None, :])]))
    ok = rel < TOLERANCES["align"][1] and leaks == 0
    verdict(7, "GaitAlign frozen-box gradient", ok, f"max rel {rel:.2e} (<1e-5), {leaks} nonzero outside support")


def test_08_align_idempotent_and_translation_invariant(walkers, verdict):
    frames = walkers[:100]
    idem, trans, clipped = [], [], 0
    for f in frames:
        a = gait_align(f)[0].values
        idem.append(np.mean(np.abs(gait_align(a)[0].values - a)))
        moved = translate(f, 5, 3)
        clipped += moved.values.sum() != f.values.sum()
        trans.append(np.mean(np.abs(gait_align(moved)[0].values - a)))
    ok = np.mean(idem) < 0.02 and np.mean(trans) < 0.02 and clipped == 0
    detail = f"idempotence {np.mean(idem):.4f} (max {max(idem):.4f}), translation {np.mean(trans):.4f}, {clipped} clipped"
    verdict(8, "GaitAlign idempotence / translation", ok, detail)


def test_09_rank1_oracle(verdict):
    gallery, probes = fixture_embeddings()
    report = rank1(gallery, probes, FIXTURE_PROTOCOL)
    got = {k: Fraction(100 * report.correct[k], report.total[k]) for k in report.total}
    ok = got == EXPECTED_CELLS == brute_force(gallery, probes, FIXTURE_PROTOCOL)
    verdict(9, "rank-1 oracle", ok, f"{len(got)} cells, mean {report.mean:.4f}")


def test_10_identical_view_exclusion(verdict):
    gallery, probes = fixture_embeddings()
    log = []
    rank1(gallery, probes, FIXTURE_PROTOCOL, log=log)
    seqs = generate_sequences(clean_domain(n_frames=2), 3, ("NM#01", "NM#05", "BG#01"), seed=0)
    protocol = EvalProtocol(("NM#01",), (("NM", ("NM#05",)), ("BG", ("BG#01",))))
    run_single_domain(seqs, PipelineConfig(protocol=protocol), log=log)
    same = sum(p[2] == g[2] for p, g in log)
    verdict(10, "identical-view exclusion", same == 0 and len(log) > 0, f"{len(log)} comparisons, {same} same-view")


def test_11_alignment_beats_resize_under_disturbance(verdict):
    t0 = time.perf_counter()
    with_align, without = [], []
    for seed in range(5):
        seqs = generate_sequences(clean_domain(n_frames=8), 10, seed=seed)
        base = PipelineConfig(disturb=True, max_offset=6, seed=seed)
        with_align.append(run_single_domain(seqs, base.with_overrides(align=True)).mean)
        without.append(run_single_domain(seqs, base.with_overrides(align=False)).mean)
    elapsed = time.perf_counter() - t0
    ok = np.mean(with_align) >= np.mean(without) and elapsed < 120.0
    detail = (
        f"align {np.mean(with_align):.2f} vs resize {np.mean(without):.2f} "
        f"(per seed {[round(a - b, 2) for a, b in zip(with_align, without)]}), {elapsed:.1f}s"
    )
    verdict(11, "alignment >= no alignment under disturbance", ok, detail)


def test_12_cross_domain_structure(verdict):
    conds = ("NM#01", "NM#02", "NM#05", "BG#01", "CL#01")
    protocol = EvalProtocol(("NM#01", "NM#02"), (("NM", ("NM#05",)), ("BG", ("BG#01",)), ("CL", ("CL#01",))))
    cfg = PipelineConfig(protocol=protocol, embedding="gei_pca", pca_components=8, train_subjects=3)
    a = generate_sequences(clean_domain(n_frames=4), 8, conds, seed=0)
    b = generate_sequences(jittered_domain(n_frames=4), 8, conds, seed=0)
    cross = run_cross_domain(a, b, cfg)
    keys = sorted(cross.reports)
    table = cross.to_csv().splitlines()
    shaped = keys == [("A", "A"), ("A", "B"), ("B", "A"), ("B", "B")] and len(table) == 3
    shaped &= len(table[0].split(",")) == 2 + 2 * 4
    single = run_single_domain(a, cfg)
    same = run_cross_domain(a, a, cfg)
    equal = all(same[k].cells == single.cells and same[k].mean == single.mean for k in same.reports)
    verdict(12, "cross-domain 2x2 report, A==B reproduces single-domain", shaped and equal, f"2x2={shaped}, degenerate equal={equal}")


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_13_cli_determinism(tmp_path, capsys, verdict):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"name": "A", "n_frames": 3, "views": ["000", "090"]}))
    conds = "NM#01-04,NM#05,BG#01,CL#01"

    def commands(run):
        d = tmp_path / run
        return {
            "gen": ["gen", str(spec), "--out", str(d / "A"), "--n-subjects", "3", "--conditions", conds, "--seed", "4"],
            "gen-b": ["gen", "jittered", "--out", str(d / "B"), "--n-subjects", "3", "--conditions", conds],
            "preprocess": ["preprocess", str(d / "A"), "--out", str(d / "pre"), "--sweep", "3,5"],
            "synthesize": ["synthesize", str(d / "A"), "--out", str(d / "syn"), "--noise", "0.1", "--blur", "1", "--seed", "9"],
            "align": ["align", str(d / "syn"), "--out", str(d / "al")],
            "gradcheck": ["gradcheck", "align", "--seed", "3", "--out", str(d / "grad.json")],
            "eval": ["eval", "--data", str(d / "A"), "--out", str(d / "ev"), "--disturb", "--seed", "2"],
            "eval-cross": ["eval", "--domain-a", str(d / "A"), "--domain-b", str(d / "B"), "--out", str(d / "cx")],
            "selftest": ["selftest"],
        }

    stdout, codes = {}, []
    for run in ("r1", "r2"):
        for name, argv in commands(run).items():
            codes.append(main(argv))
            stdout[(run, name)] = capsys.readouterr().out.replace(str(tmp_path / run), "<run>")
    differ = [n for n in commands("r1") if stdout[("r1", n)] != stdout[("r2", n)]]
    t1, t2 = _tree(tmp_path / "r1"), _tree(tmp_path / "r2")
    differ += sorted(set(t1) ^ set(t2)) + [k for k in t1 if k in t2 and t1[k] != t2[k]]
    ok = not differ and all(c == 0 for c in codes)
    verdict(13, "CLI determinism", ok, f"{len(commands('r1'))} commands, {len(t1)} files, differing: {differ[:5]}")
