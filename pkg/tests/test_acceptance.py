"""The eleven acceptance criteria at their stated tolerances, one PASS/FAIL line each."""
from __future__ import annotations

import time
from math import comb
from pathlib import Path

import numpy as np

from conftest import FC_CLASS, FC_STATES, random_ep_free, record
from nhtopo.cli import main
from nhtopo.model import (TWO_PI, BlockModel, SumModel, builtin_FA, builtin_FC, builtin_TEST,
                          random_trigonometric, sup_norm, torus_distance)
from nhtopo.scan import ModelFamily, sweep, threading_report
from nhtopo.spectral import compose, monodromy
from nhtopo.topology import (braid_word, classify, contour_residual, degeneracy_contours,
                             excitation_type_count, invariants, locate_eps, two_band_bit,
                             winding_phase)


def test_criterion_01_four_state_classification():
    t0 = time.perf_counter()
    labels, eps_counts = {}, []
    for ab in FC_STATES:
        m = builtin_FC(*ab)
        eps = locate_eps(m, (256, 256))
        eps_counts.append(len(eps))
        labels[ab] = invariants(m, eps=eps).class_label
    elapsed = time.perf_counter() - t0
    ok = (eps_counts == [0, 0, 0, 0] and set(labels.values()) == {(0, 0), (1, 0), (0, 1), (1, 1)}
          and labels == FC_CLASS and elapsed < 30)
    mapping = " ".join(f"FC{a}{b}->{labels[(a, b)]}" for a, b in FC_STATES)
    record(1, "four-state classification", ok, f"{mapping} in {elapsed:.2f}s")
    assert ok


def test_criterion_02_snapping_arc():
    fa0 = builtin_FA(0.0)
    real0 = degeneracy_contours(fa0, "real", (128, 128))
    real_pos = degeneracy_contours(builtin_FA(0.1), "real", (128, 128))
    trivial = (monodromy(fa0, "x", 1.0) == (0, 1) and monodromy(fa0, "y", 1.0) == (0, 1))
    resid = max(contour_residual(fa0, c) for c in real0) if real0 else np.inf
    ok = (len(real0) == 1 and real0[0].winding == (0, 1) and real_pos == [] and trivial
          and resid < 1e-6)
    record(2, "snapping Fermi arc", ok,
           f"FA(0) contours={len(real0)} winding={real0[0].winding if real0 else None} "
           f"max|Re de|={resid:.1e}; FA(+0.1) contours={len(real_pos)}; trivial={trivial}")
    assert ok


def test_criterion_03_winding_quantization():
    m = builtin_TEST(0.5)
    eps = locate_eps(m, (64, 64))
    x = np.arcsin(0.5)
    analytic = [(kx % TWO_PI, ky) for kx in (x, np.pi - x, np.pi + x, -x) for ky in (0, np.pi)]
    pos_err = max(min(float(torus_distance(p, e.k.as_array())) for e in eps) for p in analytic)
    resid = max(e.residual for e in eps)
    nus = np.array([winding_phase(m, e, 0.02, 1024, eps=eps) for e in eps])
    snapped = np.round(2 * nus) / 2
    snap_err = float(np.abs(nus - snapped).max())
    total = float(snapped.sum())
    ok = (len(eps) == 8 and resid < 1e-10 and snap_err < 1e-3
          and np.all(np.abs(snapped) == 0.5) and total == 0 and pos_err < 1e-8)
    record(3, "winding quantization", ok,
           f"eps={len(eps)} max|D|={resid:.1e} snap_err={snap_err:.1e} total={total:g} "
           f"pos_err={pos_err:.1e}")
    assert ok


def test_criterion_04_pair_bit_matches_two_band_bit():
    rng = np.random.default_rng(4)
    models = [builtin_FC(*ab) for ab in FC_STATES] + random_ep_free(rng, 20)
    mismatches, nontrivial = 0, 0
    for m in models:
        r = invariants(m)
        for axis, pi in (("x", r.pi_x), ("y", r.pi_y)):
            mismatches += int(r.m[axis][0, 1] != two_band_bit(pi))
            nontrivial += two_band_bit(pi)
    ok = mismatches == 0 and len(models) == 24
    record(4, "m^12 equals m (2-band)", ok,
           f"models={len(models)} mismatches={mismatches} swapping loops={nontrivial}")
    assert ok


def test_criterion_05_monodromy_robustness():
    rng = np.random.default_rng(5)
    bad = 0
    checks = 0
    for ab in FC_STATES:
        m = builtin_FC(*ab)
        ref = {axis: monodromy(m, axis, 1.0, 512) for axis in ("x", "y")}
        for axis in ("x", "y"):
            for off in rng.uniform(0, TWO_PI, 8):
                for samples in (256, 512, 1024):
                    checks += 1
                    bad += int(monodromy(m, axis, float(off), samples) != ref[axis])
    ok = bad == 0
    record(5, "monodromy robustness", ok, f"checks={checks} disagreements={bad}")
    assert ok


def test_criterion_06_braid_homomorphism():
    rng = np.random.default_rng(6)
    bad = 0
    for _ in range(50):
        ab = FC_STATES[int(rng.integers(4))]
        m = builtin_FC(*ab)
        axis = "x" if rng.random() < 0.5 else "y"
        off = float(rng.uniform(0, TWO_PI))
        bw = braid_word(m, axis, off, 512)
        bad += int(bw.permutation() != monodromy(m, axis, off, 512, start=bw.start))
    ok = bad == 0
    record(6, "braid-permutation homomorphism", ok, f"loops=50 mismatches={bad}")
    assert ok


def _perturbation(rng, bound=0.05):
    p = random_trigonometric(2, rng, sup_norm=bound, reach=2)
    # rescale to just under the bound as measured on a fine grid
    return SumModel((p,), (0.998 * bound / sup_norm(p, 256),))


def test_criterion_07_perturbation_stability():
    rng = np.random.default_rng(7)
    stable, broken, norms = 0, 0, []
    for _ in range(20):
        p = _perturbation(rng)
        norms.append(sup_norm(p, 256))
        r = invariants(builtin_FC(1, 0) + p)
        stable += int(r.ground_state and r.class_label == FC_CLASS[(1, 0)])
        cs = degeneracy_contours(builtin_FA(0.0) + p, "real", (128, 128))
        broken += int(not any(not c.contractible for c in cs))
    ok = stable == 20 and broken >= 1 and max(norms) <= 0.05
    record(7, "perturbation stability", ok,
           f"FC(1,0) stable {stable}/20; FA(0) arc lost in {broken}/20; "
           f"max sup-norm={max(norms):.4f}")
    assert ok


def test_criterion_08_protected_transitions():
    lines, ok = [], True
    endpoint = {ab: invariants(builtin_FC(*ab)).class_label for ab in FC_STATES}
    for a in FC_STATES:
        for b in FC_STATES:
            if a == b:
                continue
            t0 = time.perf_counter()
            res = sweep(ModelFamily.linear(builtin_FC(*a), builtin_FC(*b)), 64, (128, 128))
            elapsed = time.perf_counter() - t0
            rep = threading_report(res)
            ends = (res.intervals[0]["report"].class_label, res.intervals[-1]["report"].class_label)
            this = (max(res.ep_counts()) > 0 and ends == (endpoint[a], endpoint[b])
                    and res.intervals[0]["t_start"] == 0.0 and res.intervals[-1]["t_end"] == 1.0
                    and rep["total_flipped_bits"] >= 1 and elapsed < 300)
            ok &= this
            lines.append(f"{a}->{b}:{rep['total_flipped_bits']}bit/{elapsed:.1f}s")
    record(8, "protected transitions", ok, " ".join(lines))
    assert ok


def test_criterion_09_excitation_counting():
    agree = all(excitation_type_count(n) == sum(comb(n, j) for j in range(2, n + 1))
                for n in range(2, 11))
    ok = agree and excitation_type_count(2) == 1 and excitation_type_count(3) == 4
    record(9, "excitation counting", ok,
           f"n=2..10 agree={agree}; n=2->{excitation_type_count(2)} n=3->{excitation_type_count(3)}")
    assert ok


def test_criterion_10_commuting_monodromies():
    rng = np.random.default_rng(10)
    corpus = [builtin_FC(*ab) for ab in FC_STATES] + [builtin_FA(0.0), builtin_FA(0.1)]
    corpus += random_ep_free(rng, 10)
    block = BlockModel((builtin_FC(1, 0), 5.0))
    corpus.append(block)
    failures = 0
    for m in corpus:
        r = invariants(m)
        failures += int(not r.ground_state or compose(r.pi_x, r.pi_y) != compose(r.pi_y, r.pi_x))
    pairs = classify(invariants(block)).pair_bits
    nonzero = [pq for pq, bits in pairs.items() if any(bits)]
    ok = failures == 0 and len(nonzero) == 1
    record(10, "commuting monodromies", ok,
           f"models={len(corpus)} failures={failures}; 3-band nonzero pairs={nonzero}")
    assert ok


def test_criterion_11_cli_determinism(tmp_path, capsys):
    builtins = {"FA": "0", "FC": "1,1", "TEST": "0.5"}
    scan = {"FA": ["--sweep-index", "0", "--range=-0.1,0.1"],
            "FC": ["--to-builtin", "FC", "--to-params", "0,0"],
            "TEST": ["--sweep-index", "0", "--range=0.3,0.6"]}
    differing = []
    for command in ("classify", "eps", "arcs", "braid", "scan", "surface"):
        for name, params in builtins.items():
            args = [command, "--builtin", name, "--params", params, "--grid", "32x32"]
            if command == "scan":
                args += scan[name] + ["--t-count", "8"]
            outs = []
            for rep in range(2):
                d = tmp_path / f"{command}-{name}-{rep}"
                code = main(args + ["--out", str(d)])
                files = {p.name: p.read_bytes() for p in sorted(Path(d).iterdir())}
                outs.append((code, capsys.readouterr().out, files))
            if outs[0] != outs[1] or outs[0][0] != 0:
                differing.append(f"{command}/{name}")
    ok = not differing
    record(11, "CLI determinism", ok, f"runs=18x2 differing={differing}")
    assert ok
