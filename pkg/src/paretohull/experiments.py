"""Experiment presets behind the command-line interface.

Each runner consumes a resolved JSON config, writes CSV/JSON artifacts
under ``<out>/<kind>/`` and returns the summary dictionary it wrote.
Workers of a sweep derive their seeds from the root seed and their cell
index, so results are byte-identical for any worker count.
"""

import itertools
import os
from multiprocessing import get_context

import numpy as np

from . import __version__
from .ensemble import load_parameter_matrix, save_parameter_matrix
from .fileio import fmt, write_csv, write_json
from .metrics import (
    FrontSample,
    HypervolumeSpec,
    evaluate_subspace,
    hypervolume,
    hypervolume_monte_carlo,
    load_front_csv,
    oracle_front_toy,
    save_front_csv,
    toy_reference_point,
)
from .objectives import (
    TOY_INIT_POINTS,
    MlpSpec,
    MlpTaskObjective,
    ToyConfig,
    ToyObjective,
    load_dataset_csv,
    make_synthetic_dataset,
    save_dataset_csv,
)
from .simplex import DirichletParams, make_grid
from .trainer import BASELINE_METHODS, TrainerConfig, run_baseline, run_pml

EXPERIMENT_KINDS = (
    "toy-sweep",
    "toy-baseline",
    "mlp-pml",
    "ablation-grid",
    "subspace-eval",
    "hypervolume",
)


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


TRAINER_DEFAULTS = {
    "iterations": 50_000,
    "learning_rate": 2e-3,
    "adam_beta1": 0.9,
    "adam_beta2": 0.999,
    "adam_eps": 1e-8,
    "window": 1,
    "lambda": 0.0,
    "dirichlet": [1.0, 1.0],
    "balancing": "none",
    "loss_window": 10,
    "lr_scale_by_members": False,
    "optimizer": "adam",
    "log_every": 1000,
}


def resolve_config(raw):
    """Fill defaults and validate; returns a canonical config dict."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    kind = raw.get("kind")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"kind must be one of {EXPERIMENT_KINDS}, got {kind!r}")
    cfg = {
        "kind": kind,
        "seed": int(raw.get("seed", 0)),
        "out": str(raw.get("out", "runs")),
    }
    trainer = dict(TRAINER_DEFAULTS)
    if kind == "mlp-pml":
        # benchmark-style preset: member-scaled rate, shorter schedule
        trainer.update(
            {"iterations": 5000, "learning_rate": 1e-3, "lr_scale_by_members": True}
        )
    trainer.update(raw.get("trainer", {}))
    unknown = set(trainer) - set(TRAINER_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown trainer keys: {sorted(unknown)}")
    cfg["trainer"] = trainer
    cfg["toy"] = {"scale_c": float(raw.get("toy", {}).get("scale_c", 1.0))}
    eval_raw = raw.get("eval", {})
    cfg["eval"] = {
        "segment_points": int(eval_raw.get("segment_points", 101)),
        "oracle_resolution": int(eval_raw.get("oracle_resolution", 1201)),
    }
    if kind == "toy-baseline":
        method = raw.get("method", "MGDA2")
        if method not in BASELINE_METHODS:
            raise ConfigError(f"method must be one of {BASELINE_METHODS}")
        cfg["method"] = method
    if kind == "mlp-pml":
        ds = raw.get("dataset", {})
        cfg["dataset"] = {
            "conflict_angle": float(ds.get("conflict_angle", np.pi / 3)),
            "sample_count": int(ds.get("sample_count", 4000)),
            "noise_std": float(ds.get("noise_std", 0.0)),
            "seed": int(ds.get("seed", 1234)),
        }
        mlp = raw.get("mlp", {})
        cfg["mlp"] = {
            "hidden_dims": [int(h) for h in mlp.get("hidden_dims", [16])],
            "batch_size": int(mlp.get("batch_size", 256)),
        }
        cfg["include_ls_baseline"] = bool(raw.get("include_ls_baseline", True))
    if kind == "ablation-grid":
        ab = raw.get("ablation", {})
        cfg["ablation"] = {
            "windows": [int(w) for w in ab.get("windows", [2, 3, 4, 5])],
            "lambdas": [float(v) for v in ab.get("lambdas", [0.0, 2.0, 5.0, 10.0])],
            "seeds": [int(s) for s in ab.get("seeds", [0, 1, 2])],
            "init_pair": [int(v) for v in ab.get("init_pair", [0, 1])],
        }
        for v in cfg["ablation"]["init_pair"]:
            if not 0 <= v < len(TOY_INIT_POINTS):
                raise ConfigError("init_pair indices must address the toy init set")
    if kind == "subspace-eval":
        if "theta_path" not in raw:
            raise ConfigError("subspace-eval needs theta_path")
        cfg["theta_path"] = str(raw["theta_path"])
        cfg["objective"] = raw.get("objective", "toy")
        if cfg["objective"] not in ("toy", "mlp"):
            raise ConfigError("objective must be toy or mlp")
        if cfg["objective"] == "mlp":
            if "dataset_path" not in raw:
                raise ConfigError("mlp subspace-eval needs dataset_path")
            cfg["dataset_path"] = str(raw["dataset_path"])
            mlp = raw.get("mlp", {})
            cfg["mlp"] = {"hidden_dims": [int(h) for h in mlp.get("hidden_dims", [16])]}
    if kind == "hypervolume":
        if "front_path" not in raw:
            raise ConfigError("hypervolume needs front_path")
        cfg["front_path"] = str(raw["front_path"])
        if "reference" not in raw:
            raise ConfigError("hypervolume needs a reference point")
        cfg["reference"] = [float(v) for v in raw["reference"]]
        cfg["direction"] = raw.get("direction", "minimize")
        cfg["method"] = raw.get("method", "exact")
        if cfg["method"] not in ("exact", "monte-carlo"):
            raise ConfigError("method must be exact or monte-carlo")
        cfg["mc_points"] = int(raw.get("mc_points", 1_000_000))
    return cfg


def trainer_config(cfg, seed, overrides=None):
    t = dict(cfg["trainer"])
    if overrides:
        t.update(overrides)
    return TrainerConfig(
        iterations=int(t["iterations"]),
        learning_rate=float(t["learning_rate"]),
        adam_beta1=float(t["adam_beta1"]),
        adam_beta2=float(t["adam_beta2"]),
        adam_eps=float(t["adam_eps"]),
        window=int(t["window"]),
        reg_strength=float(t["lambda"]),
        dirichlet=DirichletParams(np.asarray(t["dirichlet"], dtype=np.float64)),
        balancing=str(t["balancing"]),
        loss_window=int(t["loss_window"]),
        lr_scale_by_members=bool(t["lr_scale_by_members"]),
        optimizer=str(t["optimizer"]),
        seed=int(seed),
        log_every=int(t["log_every"]),
    )


def derive_seed(root, *key):
    """Stable per-cell seed from the root seed and a cell index."""
    return int(np.random.SeedSequence(root, spawn_key=tuple(key)).generate_state(1)[0])


def _experiment_dir(cfg):
    path = os.path.join(cfg["out"], cfg["kind"])
    os.makedirs(path, exist_ok=True)
    return path


def _write_manifest(cfg, out_dir):
    write_json(
        os.path.join(out_dir, "manifest.json"),
        {"experiment": cfg["kind"], "config": cfg, "version": __version__},
    )


def _map_jobs(worker, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [worker(item) for item in items]
    ctx = get_context("spawn")
    with ctx.Pool(min(jobs, len(items))) as pool:
        return pool.map(worker, items)


# ---------------------------------------------------------------------------
# toy sweep over all ordered initialization pairs
# ---------------------------------------------------------------------------


def _toy_pair_worker(args):
    cfg, idx, pair_dir, oracle_hv, reference = args
    init_a, init_b = _toy_pairs()[idx]
    seed = derive_seed(cfg["seed"], idx)
    toy = ToyConfig(cfg["toy"]["scale_c"])
    objective = ToyObjective(toy)
    result = run_pml(objective, np.array([init_a, init_b]), trainer_config(cfg, seed))
    os.makedirs(pair_dir, exist_ok=True)
    result.trajectory.to_csv(os.path.join(pair_dir, "trajectory.csv"))
    save_parameter_matrix(os.path.join(pair_dir, "members.bin"), result.theta)
    grid = make_grid(2, cfg["eval"]["segment_points"])
    segment = evaluate_subspace(result.theta, grid, objective)
    save_front_csv(os.path.join(pair_dir, "front.csv"), segment)
    hv = hypervolume(segment, HypervolumeSpec(reference=np.asarray(reference)))
    init_losses = np.stack([objective.loss(np.array(p)) for p in (init_a, init_b)])
    return {
        "id": f"pair-{idx:02d}",
        "init_a": list(init_a),
        "init_b": list(init_b),
        "seed": seed,
        "hypervolume": hv,
        "oracle_ratio": hv / oracle_hv,
        "initial_loss_sum": float(init_losses.sum()),
    }


def _toy_pairs():
    return list(itertools.product(TOY_INIT_POINTS, repeat=2))


def run_toy_sweep(cfg, jobs=1):
    out_dir = _experiment_dir(cfg)
    _write_manifest(cfg, out_dir)
    toy = ToyConfig(cfg["toy"]["scale_c"])
    reference = toy_reference_point(toy)
    oracle = oracle_front_toy(toy, cfg["eval"]["oracle_resolution"])
    oracle_hv = hypervolume(oracle, HypervolumeSpec(reference=reference))
    items = [
        (cfg, idx, os.path.join(out_dir, f"pair-{idx:02d}"), oracle_hv, list(reference))
        for idx in range(len(_toy_pairs()))
    ]
    pair_rows = _map_jobs(_toy_pair_worker, items, jobs)
    ratios = np.array([row["oracle_ratio"] for row in pair_rows])
    worst = max(pair_rows, key=lambda row: row["initial_loss_sum"])
    summary = {
        "kind": cfg["kind"],
        "scale_c": cfg["toy"]["scale_c"],
        "balancing": cfg["trainer"]["balancing"],
        "seed": cfg["seed"],
        "reference": list(reference),
        "oracle_hypervolume": oracle_hv,
        "pairs": pair_rows,
        "pairs_at_95": int((ratios >= 0.95).sum()),
        "median_ratio": float(np.median(ratios)),
        "worst_initial_pair": worst["id"],
    }
    write_json(os.path.join(out_dir, "summary.json"), summary)
    return summary


# ---------------------------------------------------------------------------
# single-model baselines on the toy starting points
# ---------------------------------------------------------------------------


def run_toy_baseline(cfg, jobs=1):
    out_dir = _experiment_dir(cfg)
    _write_manifest(cfg, out_dir)
    toy = ToyConfig(cfg["toy"]["scale_c"])
    rows = []
    for idx, init in enumerate(TOY_INIT_POINTS):
        seed = derive_seed(cfg["seed"], idx)
        result = run_baseline(
            ToyObjective(toy), np.array(init), cfg["method"], trainer_config(cfg, seed)
        )
        init_dir = os.path.join(out_dir, f"init-{idx}")
        os.makedirs(init_dir, exist_ok=True)
        result.trajectory.to_csv(os.path.join(init_dir, "trajectory.csv"))
        rows.append(
            {
                "id": f"init-{idx}",
                "init": list(init),
                "seed": seed,
                "final_losses": [float(v) for v in result.final_losses],
                "final_grad_norm": result.final_grad_norm,
                "final_loss_drift": result.final_loss_drift,
                "final_theta": [float(v) for v in result.theta],
            }
        )
    summary = {
        "kind": cfg["kind"],
        "method": cfg["method"],
        "scale_c": cfg["toy"]["scale_c"],
        "seed": cfg["seed"],
        "inits": rows,
    }
    write_json(os.path.join(out_dir, "summary.json"), summary)
    return summary


# ---------------------------------------------------------------------------
# shared-bottom MLP on the synthetic dataset
# ---------------------------------------------------------------------------


def run_mlp_pml(cfg, jobs=1):
    out_dir = _experiment_dir(cfg)
    _write_manifest(cfg, out_dir)
    ds_cfg = cfg["dataset"]
    dataset = make_synthetic_dataset(
        ds_cfg["conflict_angle"],
        ds_cfg["sample_count"],
        ds_cfg["noise_std"],
        ds_cfg["seed"],
    )
    save_dataset_csv(os.path.join(out_dir, "dataset.csv"), dataset)
    spec = MlpSpec(input_dim=2, hidden_dims=tuple(cfg["mlp"]["hidden_dims"]), task_count=2)
    objective = MlpTaskObjective(spec, dataset, batch_size=cfg["mlp"]["batch_size"])
    rng = np.random.default_rng(np.random.SeedSequence(cfg["seed"], spawn_key=(0,)))
    theta0 = objective.init_members(2, rng)
    result = run_pml(objective, theta0, trainer_config(cfg, derive_seed(cfg["seed"], 1)))
    result.trajectory.to_csv(os.path.join(out_dir, "trajectory.csv"))
    save_parameter_matrix(os.path.join(out_dir, "members.bin"), result.theta)

    grid = make_grid(2, cfg["eval"]["segment_points"])
    segment = evaluate_subspace(result.theta, grid, objective)
    save_front_csv(os.path.join(out_dir, "front.csv"), segment)
    accuracies = np.stack(
        [objective.accuracies(s.weighting @ result.theta) for s in segment]
    )
    acc_rows = [
        [fmt(a) for a in s.weighting] + [fmt(v) for v in acc]
        for s, acc in zip(segment, accuracies)
    ]
    write_csv(
        os.path.join(out_dir, "accuracy.csv"),
        [f"alpha_{m + 1}" for m in range(2)] + [f"acc_{t + 1}" for t in range(2)],
        acc_rows,
    )
    acc_spec = HypervolumeSpec(reference=np.zeros(2), direction="maximize")
    summary = {
        "kind": cfg["kind"],
        "seed": cfg["seed"],
        "dataset": ds_cfg,
        "segment_losses": [[float(v) for v in s.losses] for s in segment],
        "segment_weights": [[float(v) for v in s.weighting] for s in segment],
        "segment_accuracies": [[float(v) for v in row] for row in accuracies],
        "accuracy_hypervolume": hypervolume(
            [FrontSample(losses=row) for row in accuracies], acc_spec
        ),
    }
    if cfg["include_ls_baseline"]:
        ls_objective = MlpTaskObjective(spec, dataset, batch_size=cfg["mlp"]["batch_size"])
        ls = run_baseline(
            ls_objective,
            theta0[0],
            "LS",
            trainer_config(
                cfg, derive_seed(cfg["seed"], 2), overrides={"lr_scale_by_members": False}
            ),
        )
        ls_acc = ls_objective.accuracies(ls.theta)
        summary["ls_baseline"] = {
            "final_losses": [float(v) for v in ls_objective.loss(ls.theta)],
            "accuracies": [float(v) for v in ls_acc],
            "accuracy_hypervolume": hypervolume(
                [FrontSample(losses=ls_acc)], acc_spec
            ),
        }
    write_json(os.path.join(out_dir, "summary.json"), summary)
    return summary


# ---------------------------------------------------------------------------
# multi-forward ablation grid
# ---------------------------------------------------------------------------


def ablation_cells(windows, lambdas):
    """The base case plus the full window/strength product."""
    return [(1, 0.0)] + [(w, v) for w in windows for v in lambdas]


def _ablation_worker(args):
    cfg, cell_idx, window, lam, seed_idx, seed_value = args
    toy = ToyConfig(cfg["toy"]["scale_c"])
    objective = ToyObjective(toy)
    i, j = cfg["ablation"]["init_pair"]
    theta0 = np.array([TOY_INIT_POINTS[i], TOY_INIT_POINTS[j]])
    seed = derive_seed(cfg["seed"], cell_idx, seed_idx)
    overrides = {"window": window, "lambda": lam}
    result = run_pml(objective, theta0, trainer_config(cfg, seed, overrides))
    grid = make_grid(2, cfg["eval"]["segment_points"])
    segment = evaluate_subspace(result.theta, grid, objective)
    reference = toy_reference_point(toy)
    hv = hypervolume(segment, HypervolumeSpec(reference=reference))
    return cell_idx, seed_value, hv


def run_ablation_grid(cfg, jobs=1):
    out_dir = _experiment_dir(cfg)
    _write_manifest(cfg, out_dir)
    ab = cfg["ablation"]
    cells = ablation_cells(ab["windows"], ab["lambdas"])
    items = [
        (cfg, cell_idx, window, lam, seed_idx, seed_value)
        for cell_idx, (window, lam) in enumerate(cells)
        for seed_idx, seed_value in enumerate(ab["seeds"])
    ]
    results = _map_jobs(_ablation_worker, items, jobs)
    per_cell = {idx: {} for idx in range(len(cells))}
    for cell_idx, seed_value, hv in results:
        per_cell[cell_idx][seed_value] = hv

    header = ["window", "lambda"]
    header += [f"hv_seed_{s}" for s in ab["seeds"]]
    header += ["mean_hv", "max_hv", "std_hv"]
    rows = []
    table = []
    for cell_idx, (window, lam) in enumerate(cells):
        values = np.array([per_cell[cell_idx][s] for s in ab["seeds"]])
        # population standard deviation, matching the reported tables
        stats = {
            "window": window,
            "lambda": lam,
            "hv": {str(s): float(per_cell[cell_idx][s]) for s in ab["seeds"]},
            "mean_hv": float(values.mean()),
            "max_hv": float(values.max()),
            "std_hv": float(values.std(ddof=0)),
        }
        table.append(stats)
        rows.append(
            [str(window), fmt(lam)]
            + [fmt(per_cell[cell_idx][s]) for s in ab["seeds"]]
            + [fmt(stats["mean_hv"]), fmt(stats["max_hv"]), fmt(stats["std_hv"])]
        )
    write_csv(os.path.join(out_dir, "cells.csv"), header, rows)
    summary = {
        "kind": cfg["kind"],
        "seed": cfg["seed"],
        "seeds": ab["seeds"],
        "cells": table,
        "cell_count": len(cells),
    }
    write_json(os.path.join(out_dir, "summary.json"), summary)
    return summary


# ---------------------------------------------------------------------------
# subspace evaluation and hypervolume over stored artifacts
# ---------------------------------------------------------------------------


def run_subspace_eval(cfg, jobs=1):
    theta = load_parameter_matrix(cfg["theta_path"])
    if cfg["objective"] == "toy":
        objective = ToyObjective(ToyConfig(cfg["toy"]["scale_c"]))
    else:
        dataset = load_dataset_csv(cfg["dataset_path"])
        spec = MlpSpec(
            input_dim=2, hidden_dims=tuple(cfg["mlp"]["hidden_dims"]), task_count=2
        )
        if theta.shape[1] != spec.param_count:
            raise ConfigError("stored members do not match the declared architecture")
        objective = MlpTaskObjective(spec, dataset)
    out_dir = _experiment_dir(cfg)
    _write_manifest(cfg, out_dir)
    grid = make_grid(theta.shape[0], cfg["eval"]["segment_points"])
    segment = evaluate_subspace(theta, grid, objective)
    save_front_csv(os.path.join(out_dir, "front.csv"), segment)
    summary = {
        "kind": cfg["kind"],
        "theta_path": cfg["theta_path"],
        "points": len(segment),
        "losses": [[float(v) for v in s.losses] for s in segment],
    }
    write_json(os.path.join(out_dir, "summary.json"), summary)
    return summary


def run_hypervolume_cmd(cfg, jobs=1):
    samples = load_front_csv(cfg["front_path"])
    spec = HypervolumeSpec(
        reference=np.asarray(cfg["reference"], dtype=np.float64),
        direction=cfg["direction"],
    )
    if cfg["method"] == "exact":
        value = hypervolume(samples, spec)
        stderr = None
    else:
        value, stderr = hypervolume_monte_carlo(
            samples, spec, num_points=cfg["mc_points"], seed=cfg["seed"]
        )
    out_dir = _experiment_dir(cfg)
    _write_manifest(cfg, out_dir)
    summary = {
        "kind": cfg["kind"],
        "front_path": cfg["front_path"],
        "method": cfg["method"],
        "hypervolume": float(value),
    }
    if stderr is not None:
        summary["standard_error"] = float(stderr)
    write_json(os.path.join(out_dir, "summary.json"), summary)
    return summary


RUNNERS = {
    "toy-sweep": run_toy_sweep,
    "toy-baseline": run_toy_baseline,
    "mlp-pml": run_mlp_pml,
    "ablation-grid": run_ablation_grid,
    "subspace-eval": run_subspace_eval,
    "hypervolume": run_hypervolume_cmd,
}


def run_experiment(raw_config, jobs=1):
    cfg = resolve_config(raw_config)
    return RUNNERS[cfg["kind"]](cfg, jobs=jobs)
