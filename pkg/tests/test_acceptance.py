"""Acceptance suite: one test per release criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion. The toy sweeps train 25 ensembles for 50K steps each, so
this module dominates the suite's runtime (roughly ten minutes on two
cores; sweeps parallelize across worker slots).
"""

import math
import os

import numpy as np
import pytest
from scipy import stats

from paretohull.balancing import gradient_balance
from paretohull.experiments import (
    ablation_cells,
    resolve_config,
    run_ablation_grid,
    run_mlp_pml,
    run_toy_baseline,
    run_toy_sweep,
)
from paretohull.fileio import read_csv
from paretohull.metrics import (
    FrontSample,
    HypervolumeSpec,
    hypervolume,
    hypervolume_monte_carlo,
)
from paretohull.objectives import (
    MlpSpec,
    MlpTaskObjective,
    ToyConfig,
    init_mlp_params,
    make_synthetic_dataset,
    toy_loss,
    toy_loss_and_grad,
)
from paretohull.trainer import (
    build_multiforward_graph,
    combine_pcgrad,
    pml_step_terms,
    regularization,
)

from conftest import central_difference
from test_cli import tree_digest
from test_objectives import smooth_toy_points

JOBS = max(1, min(os.cpu_count() or 1, 8))

SWEEP_50K = {
    "trainer": {
        "iterations": 50_000,
        "learning_rate": 2e-3,
        "window": 1,
        "lambda": 0.0,
        "dirichlet": [1.0, 1.0],
        "log_every": 10_000,
    },
    "seed": 0,
    "eval": {"segment_points": 101, "oracle_resolution": 1201},
}


def report(number, name, passed, detail=""):
    verdict = "PASS" if passed else "FAIL"
    print(f"[acceptance] criterion {number} ({name}): {verdict} {detail}".rstrip())
    assert passed, f"criterion {number} ({name}): {detail}"


def sweep_config(out, scale_c, balancing):
    raw = {
        "kind": "toy-sweep",
        "out": str(out),
        "toy": {"scale_c": scale_c},
        **SWEEP_50K,
    }
    raw["trainer"] = dict(SWEEP_50K["trainer"], balancing=balancing)
    return resolve_config(raw)


@pytest.fixture(scope="module")
def equal_scale_sweep(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep-c1")
    return run_toy_sweep(sweep_config(out, 1.0, "none"), jobs=JOBS)


@pytest.fixture(scope="module")
def small_scale_sweeps(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep-c01")
    return {
        balancing: run_toy_sweep(sweep_config(out / balancing, 0.1, balancing), jobs=JOBS)
        for balancing in ("none", "loss", "gradient")
    }


def test_criterion_1_front_recovery_equal_scales(equal_scale_sweep):
    ratios = np.array([p["oracle_ratio"] for p in equal_scale_sweep["pairs"]])
    hits = int((ratios >= 0.95).sum())
    report(
        1,
        "toy front recovery, equal scales",
        hits >= 21,
        f"{hits}/25 pairs at oracle ratio >= 0.95, median {np.median(ratios):.4f}",
    )


def test_criterion_2_scale_sensitivity(small_scale_sweeps):
    ratios = {
        k: np.array([p["oracle_ratio"] for p in v["pairs"]])
        for k, v in small_scale_sweeps.items()
    }
    median_gap = np.median(ratios["none"]) < np.median(ratios["loss"])
    loss_hits = int((ratios["loss"] >= 0.95).sum())
    grad_hits = int((ratios["gradient"] >= 0.90).sum())
    passed = median_gap and loss_hits >= 20 and grad_hits >= 20
    report(
        2,
        "scale sensitivity at c=0.1",
        passed,
        f"median none {np.median(ratios['none']):.3f} < loss {np.median(ratios['loss']):.3f}: "
        f"{median_gap}; loss {loss_hits}/25 at 0.95; gradient {grad_hits}/25 at 0.90",
    )


def test_criterion_3_hypervolume_correctness(rng):
    spec = HypervolumeSpec(reference=np.array([1.0, 1.0]))
    hand = hypervolume(
        [FrontSample(losses=np.array([0.2, 0.5])), FrontSample(losses=np.array([0.5, 0.2]))],
        spec,
    )
    hand_ok = abs(hand - 0.55) <= 1e-12

    max_sigma = 0.0
    for dim in (2, 3):
        ref = np.ones(dim)
        hv_spec = HypervolumeSpec(reference=ref)
        for trial in range(50):
            points = rng.uniform(0.0, 1.0, size=(rng.integers(2, 30), dim))
            samples = [FrontSample(losses=p) for p in points]
            exact = hypervolume(samples, hv_spec)
            estimate, stderr = hypervolume_monte_carlo(
                samples, hv_spec, num_points=100_000, seed=1000 * dim + trial
            )
            if stderr == 0.0:
                assert abs(estimate - exact) <= 1e-12
                continue
            max_sigma = max(max_sigma, abs(estimate - exact) / stderr)
    passed = hand_ok and max_sigma <= 3.0
    report(
        3,
        "hypervolume correctness",
        passed,
        f"hand case {hand:.15f}; max |z| over 100 Monte-Carlo cross-checks {max_sigma:.2f}",
    )


def test_criterion_4_regularizer_semantics(rng):
    ok = True
    # order-consistent losses give exactly zero
    for trial in range(20):
        window = int(rng.integers(2, 7))
        alphas_1 = np.sort(rng.uniform(0.0, 1.0, size=window))
        nodes = np.array([[a, 1.0 - a] for a in alphas_1])
        base = rng.uniform(0.5, 2.0)
        losses = np.array([[base - a, base + a] for a in alphas_1])
        graph = build_multiforward_graph(nodes, mode="lex")
        ok &= regularization(graph, losses) == 0.0

    # a single violated edge returns exactly its gap
    nodes = np.array([[0.3, 0.7], [0.7, 0.3]])
    losses = np.array([[1.0, 1.0], [1.2, 2.0]])
    graph = build_multiforward_graph(nodes, mode="lex")
    gap = regularization(graph, losses)
    ok &= abs(gap - 0.2) <= 1e-12

    # lex graphs keep one outgoing edge per node
    counts_ok = True
    for window in range(2, 7):
        for tasks in (2, 3):
            nodes = np.random.default_rng(window * 7 + tasks).dirichlet(
                np.ones(tasks), size=window
            )
            graph = build_multiforward_graph(nodes, mode="lex")
            counts_ok &= all(len(e) == window - 1 for e in graph.edges)
    ok &= counts_ok
    report(4, "ordering regularizer semantics", bool(ok), f"one-edge gap {gap:.12f}")


def test_criterion_5_differentiation_correctness(rng):
    worst_toy = 0.0
    for theta in smooth_toy_points(rng, 100):
        _, grads = toy_loss_and_grad(theta)
        for task in range(2):
            numeric = central_difference(lambda x, t=task: toy_loss(x)[t], theta, h=1e-6)
            rel = np.abs(grads[task] - numeric) / np.maximum(np.abs(numeric), 1.0)
            worst_toy = max(worst_toy, float(rel.max()))

    spec = MlpSpec(input_dim=2, hidden_dims=(4,), task_count=2)
    ds = make_synthetic_dataset(0.9, 12, 0.0, seed=3)
    objective = MlpTaskObjective(spec, ds)
    theta = np.stack([init_mlp_params(spec, np.random.default_rng(5)) for _ in range(2)])
    alphas = np.array([[0.8, 0.2], [0.45, 0.55], [0.2, 0.8]])
    terms = pml_step_terms(objective, theta, alphas, reg_strength=2.0)
    numeric = central_difference(
        lambda flat: pml_step_terms(
            objective, flat.reshape(theta.shape), alphas, reg_strength=2.0
        ).total,
        theta.ravel(),
        h=1e-6,
    )
    rel = np.abs(terms.member_grad.ravel() - numeric) / np.maximum(np.abs(numeric), 1.0)
    worst_step = float(rel.max())
    passed = worst_toy <= 1e-5 and worst_step <= 1e-4
    report(
        5,
        "differentiation correctness",
        passed,
        f"toy max rel err {worst_toy:.2e} (100 points); "
        f"full-step max rel err {worst_step:.2e} ({theta.size} parameters)",
    )


def test_criterion_6_baseline_sanity(tmp_path, rng):
    mgda = run_toy_baseline(
        resolve_config(
            {
                "kind": "toy-baseline",
                "method": "MGDA2",
                "out": str(tmp_path / "mgda"),
                "seed": 0,
                "trainer": {"iterations": 50_000, "log_every": 10_000},
            }
        )
    )
    mgda_norms = [row["final_grad_norm"] for row in mgda["inits"]]
    mgda_ok = all(norm <= 1e-3 for norm in mgda_norms)

    # the two saturated starting points need the longer schedule to settle
    ls = run_toy_baseline(
        resolve_config(
            {
                "kind": "toy-baseline",
                "method": "LS",
                "out": str(tmp_path / "ls"),
                "seed": 0,
                "trainer": {"iterations": 200_000, "log_every": 50_000},
            }
        )
    )
    ls_drifts = [row["final_loss_drift"] for row in ls["inits"]]
    ls_ok = all(drift < 1e-6 for drift in ls_drifts)

    pcgrad_ok = True
    for _ in range(200):
        g1 = rng.standard_normal(6)
        g2 = rng.standard_normal(6)
        if g1 @ g2 < 0.0:
            g2 = -g2
        combined = combine_pcgrad(np.stack([g1, g2]), rng)
        pcgrad_ok &= np.array_equal(combined, (g1 + g2) / 2.0)

    passed = mgda_ok and ls_ok and bool(pcgrad_ok)
    report(
        6,
        "baseline sanity",
        passed,
        f"MGDA2 max min-norm {max(mgda_norms):.2e}; LS max drift {max(ls_drifts):.2e}; "
        f"PCGrad exact on agreeing pairs: {bool(pcgrad_ok)}",
    )


def test_criterion_7_mlp_tradeoff(tmp_path):
    results = []
    for seed in (0, 1, 2):
        summary = run_mlp_pml(
            resolve_config(
                {
                    "kind": "mlp-pml",
                    "out": str(tmp_path / f"seed-{seed}"),
                    "seed": seed,
                    "trainer": {"iterations": 5000, "log_every": 1000},
                    "dataset": {
                        "conflict_angle": math.pi / 3,
                        "sample_count": 4000,
                        "noise_std": 0.0,
                        "seed": 1234,
                    },
                    "mlp": {"hidden_dims": [16], "batch_size": 256},
                    "eval": {"segment_points": 11},
                }
            )
        )
        alpha_1 = np.array([w[0] for w in summary["segment_weights"]])
        losses = np.array(summary["segment_losses"])
        rho_1 = stats.spearmanr(alpha_1, losses[:, 0]).statistic
        rho_2 = stats.spearmanr(alpha_1, losses[:, 1]).statistic
        seg_hv = summary["accuracy_hypervolume"]
        ls_hv = summary["ls_baseline"]["accuracy_hypervolume"]
        results.append((seed, rho_1, rho_2, seg_hv, ls_hv))
    passed = all(
        r1 <= -0.9 and r2 >= 0.9 and seg >= ls for _, r1, r2, seg, ls in results
    )
    detail = "; ".join(
        f"seed {s}: rho1 {r1:.2f}, rho2 {r2:.2f}, hv {seg:.4f} vs ls {ls:.4f}"
        for s, r1, r2, seg, ls in results
    )
    report(7, "synthetic-MLP tradeoff", passed, detail)


def test_criterion_8_ablation_grid_shape(tmp_path):
    seeds = [0, 1]
    summary = run_ablation_grid(
        resolve_config(
            {
                "kind": "ablation-grid",
                "out": str(tmp_path),
                "seed": 0,
                "trainer": {"iterations": 100, "log_every": 50},
                "eval": {"segment_points": 11},
                "ablation": {"seeds": seeds, "init_pair": [0, 4]},
            }
        ),
        jobs=JOBS,
    )
    header, rows = read_csv(tmp_path / "ablation-grid" / "cells.csv")
    expected_cells = ablation_cells([2, 3, 4, 5], [0.0, 2.0, 5.0, 10.0])
    shape_ok = (
        summary["cell_count"] == 17
        and len(rows) == 17
        and header
        == ["window", "lambda"]
        + [f"hv_seed_{s}" for s in seeds]
        + ["mean_hv", "max_hv", "std_hv"]
        and [(int(r[0]), float(r[1])) for r in rows] == expected_cells
    )
    # per-row statistics recomputed with the two-pass formula
    stats_ok = True
    for row in rows:
        values = np.array([float(v) for v in row[2 : 2 + len(seeds)]])
        mean = values.sum() / len(values)
        std = math.sqrt(((values - mean) ** 2).sum() / len(values))
        stats_ok &= abs(float(row[-3]) - mean) <= 1e-12
        stats_ok &= abs(float(row[-2]) - values.max()) <= 1e-12
        stats_ok &= abs(float(row[-1]) - std) <= 1e-12
    report(
        8,
        "ablation grid plumbing",
        shape_ok and stats_ok,
        f"17 cells x {len(seeds)} seeds, base case first, stats verified",
    )


def test_criterion_9_determinism(tmp_path):
    raw = {
        "kind": "toy-sweep",
        "seed": 5,
        "trainer": {"iterations": 150, "log_every": 50, "window": 2, "lambda": 2.0},
        "eval": {"segment_points": 11, "oracle_resolution": 151},
    }
    out = tmp_path / "run"
    run_toy_sweep(resolve_config({**raw, "out": str(out)}), jobs=JOBS)
    first = tree_digest(out)
    run_toy_sweep(resolve_config({**raw, "out": str(out)}), jobs=1)
    passed = tree_digest(out) == first
    report(9, "determinism", passed, "re-run outputs byte-identical across worker counts")
