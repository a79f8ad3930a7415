"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS, FAIL or SKIP line (shown in the terminal summary under
"acceptance criteria") and then asserts the criterion, so a miss stays red.
"""

import os
import time
from pathlib import Path

import numpy as np
import oracles
import pytest
from conftest import random_rotation

from skelmap import cli, growgrid, som
from skelmap.classify import evaluate, predict, train_map, train_pipeline
from skelmap.config import RunConfig
from skelmap.growgrid import GGParams, GrowingGrid
from skelmap.pattern import pattern_vector
from skelmap.preprocess import fit_preprocess, preprocess_sequence
from skelmap.segment import segment_stream
from skelmap.skeleton import ActionSequence, LabeledDataset, load_dataset, split_dataset
from skelmap.som import Lattice, SomParams
from skelmap.synth import concatenate, generate_dataset

SEEDS = range(5)


def lcs(a, b):
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            table[i + 1][j + 1] = table[i][j] + 1 if x == y else max(table[i][j + 1], table[i + 1][j])
    return table[-1][-1]


def held_out_stream(test: LabeledDataset, seed: int, n: int = 10) -> list:
    """``n`` distinct test sequences in random order, no label twice in a row."""
    rng = np.random.default_rng(100 + seed)
    pool, picks = list(test), []
    while len(picks) < n:
        cand = pool[int(rng.integers(len(pool)))]
        if any(cand is p for p in picks) or (picks and picks[-1].label == cand.label):
            continue
        picks.append(cand)
    return picks


@pytest.fixture(scope="module")
def seed_runs():
    """Per seed: SOM, SOM with second-order dynamics and GG pipelines with their test accuracy."""
    runs = []
    for seed in SEEDS:
        ds = generate_dataset(5, 40, seed=seed)
        train, test = split_dataset(ds, 0.8, seed)
        row = {"test": test}
        for name, over in (("som", {}), ("som_dyn2", {"preprocess.dynamics_order": 2}),
                           ("gg", {"first_map.kind": "gg"})):
            model = train_pipeline(train, RunConfig().with_overrides(over))
            row[name] = model
            row[name + "_acc"] = evaluate(model, test)["accuracy"]
        runs.append(row)
    return runs


def test_criterion_1_equation_oracles(criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst, n = 0.0, 0
    for _ in range(120):
        rows, cols, dim = (int(v) for v in rng.integers(1, [5, 5, 7]))
        w = rng.random((rows, cols, dim))
        x = rng.random(dim)
        wl, xl = oracles.to_lists(w), x.tolist()
        lat = Lattice(w)
        sigma = float(rng.uniform(0.2, 2.0))
        act = som.activity(lat, x, sigma)
        ref = oracles.activity(wl, xl, sigma)
        worst = max(worst, float(np.max(np.abs(act - np.array(ref)))))
        assert som.winner(act) == oracles.winner(ref)
        t, total = int(rng.integers(0, 30)), 30
        for squared in (False, True):
            p = SomParams(alpha0=0.5, alpha_min=0.01, sigma_r_min=0.5,
                          neighborhood="squared" if squared else "as-printed")
            out = som.train_step(lat, x, t, p, total)
            radius = oracles.decay(max(max(rows, cols) / 2.0, 0.5), 0.5, t, total)
            ref_w = oracles.som_step(wl, xl, oracles.decay(0.5, 0.01, t, total), radius, squared=squared)
            worst = max(worst, oracles.max_abs_diff(out.weights, ref_w))
        counters = rng.integers(0, 20, size=(rows, cols))
        g = GrowingGrid(Lattice(w), counters)
        stepped = growgrid.gg_step(g, x, GGParams(alpha_growth=0.1))
        ref_w, ref_c = oracles.gg_step(wl, counters.tolist(), xl, 0.1)
        worst = max(worst, oracles.max_abs_diff(stepped.lattice.weights, ref_w))
        assert stepped.counters.tolist() == ref_c
        if rows * cols > 1:
            c1, c2 = growgrid.find_insertion_pair(g)
            assert (c1, c2) == oracles.insertion_pair(wl, counters.tolist())
            grown = growgrid.insert_between(g, c1, c2)
            worst = max(worst, oracles.max_abs_diff(grown.lattice.weights, oracles.insert(wl, c1, c2)))
        n += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 5.0
    criterion("1", ok, f"{n} instances, max abs diff {worst:.2e} (tol 1e-12), {elapsed:.2f} s (limit 5 s)")
    assert ok


def test_criterion_2_preprocess_invariance(criterion, som_model, synthetic):
    ds, _, _ = synthetic
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    worst_in, worst_conf, label_changes = 0.0, 0.0, 0
    for seq in ds:
        moved = ActionSequence(rng.uniform(0.3, 3.0) * seq.positions @ random_rotation(rng).T
                               + rng.normal(scale=3.0, size=3), seq.label)
        a, b = som_model.inputs(seq), som_model.inputs(moved)
        worst_in = max(worst_in, float(np.max(np.abs(a - b))))
        pa, pb = predict(som_model, seq), predict(som_model, moved)
        label_changes += pa.label != pb.label
        worst_conf = max(worst_conf, abs(pa.confidence - pb.confidence))
    elapsed = time.perf_counter() - start
    ok = worst_in < 1e-6 and worst_conf < 1e-6 and label_changes == 0 and elapsed < 30.0
    criterion("2", ok, f"{len(ds)} sequences, input diff {worst_in:.2e}, confidence diff {worst_conf:.2e}, "
                       f"{label_changes} label changes, {elapsed:.1f} s (limit 30 s)")
    assert ok


def test_criterion_3_time_invariance(criterion, som_model, synthetic):
    _, _, test = synthetic
    rng = np.random.default_rng(3)
    pattern_mismatch, stream_mismatch, n_events = 0, 0, 0
    for _ in range(50):
        picks = [test.sequences[int(k)] for k in rng.choice(len(test), size=3, replace=False)]
        warped = []
        for seq in picks:
            reps = rng.integers(1, 4, size=len(seq))
            slow = ActionSequence(np.repeat(seq.positions, reps, axis=0), seq.label)
            warped.append(slow)
            same = np.array_equal(pattern_vector(som_model.first_map, som_model.inputs(seq), som_model.k),
                                  pattern_vector(som_model.first_map, som_model.inputs(slow), som_model.k))
            pattern_mismatch += not same
        plain = [e.label for e in segment_stream(som_model, concatenate(picks))]
        slow = [e.label for e in segment_stream(som_model, concatenate(warped))]
        stream_mismatch += plain != slow
        n_events += len(plain)
    ok = pattern_mismatch == 0 and stream_mismatch == 0
    criterion("3", ok, f"50 streams (warp up to 3x, {n_events} events): {pattern_mismatch} pattern "
                       f"mismatches, {stream_mismatch} event-sequence mismatches")
    assert ok


def test_criterion_4_topographic_ordering(criterion):
    start = time.perf_counter()
    x = np.random.default_rng(0).random((5000, 2))
    init = som.init_lattice(10, 10, 2, 0)
    trained = som.train(init, x, SomParams(epochs=10))
    te = som.topographic_error(trained, x)
    ratio = som.quantization_error(trained, x) / som.quantization_error(init, x)
    elapsed = time.perf_counter() - start
    sq = som.train(init, x, SomParams(epochs=10, neighborhood="squared"))
    sq_ratio = som.quantization_error(sq, x) / som.quantization_error(init, x)
    ok = te < 0.25 and ratio < 0.6 and elapsed < 30.0
    criterion("4", ok, f"TE {te:.3f} (< 0.25), QE final/initial {ratio:.3f} (< 0.6), {elapsed:.1f} s; "
                       f"squared neighborhood for comparison: QE ratio {sq_ratio:.3f}")
    assert ok


def test_criterion_5_growing_grid_mechanics(criterion):
    rng = np.random.default_rng(0)
    centers = rng.random((8, 2))
    x = np.concatenate([c + 0.04 * rng.normal(size=(250, 2)) for c in centers])
    checked = []

    def on_insert(before, after, c1, c2):
        wb, wa = before.lattice.weights, after.lattice.weights
        if c1[0] == c2[0]:
            lo = min(c1[1], c2[1])
            mid_ok = np.array_equal(wa[:, lo + 1], 0.5 * (wb[:, lo] + wb[:, lo + 1]))
            kept = np.array_equal(np.delete(wa, lo + 1, axis=1), wb)
        else:
            lo = min(c1[0], c2[0])
            mid_ok = np.array_equal(wa[lo + 1], 0.5 * (wb[lo] + wb[lo + 1]))
            kept = np.array_equal(np.delete(wa, lo + 1, axis=0), wb)
        reset = not after.counters.any() and after.presentations_since_insertion == 0
        assert mid_ok and kept and reset, f"insertion {len(checked)} at {c1}-{c2} broke an invariant"
        checked.append(after.shape)

    start = growgrid.init_gg(2, 0)
    out = growgrid.grow(start, x, GGParams(max_neurons=400), on_insert=on_insert)
    ok = start.shape == (2, 2) and min(out.shape) >= 8 and len(checked) > 0
    criterion("5", ok, f"2x2 -> {out.shape[0]}x{out.shape[1]} over {len(checked)} insertions, "
                       "midpoint and counter-reset invariants held at each")
    assert ok


def test_criterion_6_end_to_end_recognition(criterion, tmp_path):
    start = time.perf_counter()
    data = tmp_path / "synth"
    assert cli.main(["synth", "--out", str(data), "--classes", "5", "--per-class", "40", "--seed", "0"]) == 0
    ds = load_dataset(data)
    train, test = split_dataset(ds, 0.8, 0)
    acc = {}
    for kind in ("som", "gg"):
        model = train_pipeline(train, RunConfig().with_overrides({"first_map.kind": kind}))
        acc[kind] = evaluate(model, test)["accuracy"]
    elapsed = time.perf_counter() - start
    ok = len(ds) == 200 and acc["som"] >= 0.9 and acc["gg"] >= 0.9 and elapsed < 120
    criterion("6", ok, f"SOM {acc['som']:.3f}, GG {acc['gg']:.3f} (>= 0.90) on {len(test)} held-out "
                       f"sequences, {elapsed:.1f} s (limit 120 s)")
    assert ok


def test_criterion_7_online_segmentation(criterion, seed_runs):
    per_seed = []
    for seed, run in zip(SEEDS, seed_runs):
        picks = held_out_stream(run["test"], seed)
        truth = [p.label for p in picks]
        got = [e.label for e in segment_stream(run["som"], concatenate(picks))]
        hit = lcs(got, truth)
        per_seed.append((hit, len(got) - hit))
    ok = all(hit >= 8 and extra == 0 for hit, extra in per_seed)
    detail = ", ".join(f"seed {s}: {h}/10 in order, {e} extra" for s, (h, e) in zip(SEEDS, per_seed))
    criterion("7", ok, f"theta 0.5, M 3; {detail}")
    assert ok


def test_criterion_8_learning_speed(criterion, synthetic, topology):
    _, train, _ = synthetic
    cfg = RunConfig()
    pre = fit_preprocess(train, topology, cfg.preprocess.attention_joints, cfg.preprocess.dynamics_order)
    x = np.vstack([preprocess_sequence(s, pre, topology) for s in train])
    _, som_info = train_map(x, cfg.first_map)
    target, som_count = som_info["quantization_error"], som_info["presentations"]
    # context only: the same comparison against a squared-neighborhood SOM
    _, sq_info = train_map(x, cfg.with_overrides({"first_map.neighborhood": "squared"}).first_map)
    sq_target = sq_info["quantization_error"]
    reached, reached_sq = [], []

    def watch(n, grid):
        qe = som.quantization_error(grid.lattice, x)
        if not reached and qe <= target:
            reached.append(n)
        if not reached_sq and qe <= sq_target:
            reached_sq.append(n)

    params = cfg.with_overrides({"first_map.kind": "gg"}).first_map.gg_params()
    grid = growgrid.fit_grid(x, params, callback=watch, callback_every=500)
    gg_count = reached[0] if reached else None
    ok = gg_count is not None and gg_count <= 1.2 * som_count
    criterion("8", ok, f"SOM {cfg.first_map.rows}x{cfg.first_map.cols}: {som_count} presentations to QE "
                       f"{target:.4f}; GG (max {params.max_neurons}, final {grid.n_neurons} neurons): "
                       f"{gg_count} presentations to the same QE (limit {1.2 * som_count:.0f}); "
                       f"context: squared-neighborhood SOM QE {sq_target:.4f}, GG reaches it after "
                       f"{reached_sq[0] if reached_sq else None}")
    assert ok


def test_criterion_9a_reference_dataset_report(criterion):
    root = os.environ.get("SKELMAP_MSR_DIR")
    if not root or not Path(root).is_dir():
        criterion("9a", None, "reference dataset not present (set SKELMAP_MSR_DIR); report skipped")
        pytest.skip("no reference dataset")
    ds = load_dataset(root)
    keep = ds.label_set[:10]
    subset = LabeledDataset(tuple(s for s in ds if s.label in keep), keep)
    train, test = split_dataset(subset, 0.8, 0)
    model = train_pipeline(train, RunConfig())
    acc = evaluate(model, test)["accuracy"]
    criterion("9a", True, f"10-action subset: accuracy {acc:.3f} (reference 0.83; no threshold)")


def test_criterion_9b_dynamics_ordering(criterion, seed_runs):
    base = [r["som_acc"] for r in seed_runs]
    dyn = [r["som_dyn2_acc"] for r in seed_runs]
    ok = np.mean(dyn) >= np.mean(base)
    criterion("9b", ok, f"dynamics order 2 mean {np.mean(dyn):.3f} {dyn} vs order 0 mean "
                        f"{np.mean(base):.3f} {base} over 5 seeds (need >=)")
    assert ok


def test_criterion_9c_gg_vs_som_ordering(criterion, seed_runs):
    base = [r["som_acc"] for r in seed_runs]
    gg = [r["gg_acc"] for r in seed_runs]
    ok = np.mean(gg) >= np.mean(base) - 0.02
    criterion("9c", ok, f"GG mean {np.mean(gg):.3f} {gg} vs SOM mean {np.mean(base):.3f} {base} "
                        "over 5 seeds (need GG >= SOM - 0.02)")
    assert ok
