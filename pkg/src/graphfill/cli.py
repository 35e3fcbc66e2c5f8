"""Command-line pipeline: prefill, train, eval, sweeps, ablation, synth data.

Reports are deterministic JSON (sorted keys): two identical invocations
produce byte-identical report files. Wall-clock time, which cannot be
deterministic, goes to a timing.json sidecar referenced from the report.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import RunConfig
from .confidence import confidence_weights, topo_position
from .data import (
    KIND_BINARY,
    Dataset,
    gen_sbm,
    load_binary_dataset,
    load_content_format,
    make_split_mask,
    read_feature_matrix,
    save_binary_dataset,
    write_feature_matrix,
)
from .errors import GraphfillError, InputError
from .graphs import sym_normalize
from .metrics import classify_cv, clustering_metrics, kmeans, knn_homogeneity, ranking_metrics, rmse_and_corr
from .model import decode, encode, load_checkpoint, save_checkpoint
from .propagation import run_propagation
from .training import TrainingInputs, train

HISTORY_COLUMNS = ("epoch", "recon", "nhs", "nlsc", "total", "val_recall@10")

HOMOGENEITY_K_LIST = (1, 10, 20, 50, 100, 200)

# ablation variants, weakest to strongest (pre-fill, then the embedding terms)
ABLATION_VARIANTS = {
    "baseline": dict(iters=0, lambda1=0.0, lambda2=0.0, epsilon=0.0),
    "fp": dict(mode="fp", lambda1=0.0, lambda2=0.0, epsilon=0.0),
    "anchored": dict(mode="anchored", lambda1=0.0, lambda2=0.0, epsilon=0.0),
    "anchored-nhs": dict(mode="anchored", lambda2=0.0),
    "anchored-nlsc": dict(mode="anchored", lambda1=0.0),
    "full": dict(mode="anchored"),
}

DEFAULT_SWEEP_RATES = (0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8)


# --------------------------------------------------------------------------
# library-level pipeline pieces (the CLI handlers are thin wrappers)


def masked_input(dataset: Dataset, known: np.ndarray) -> np.ndarray:
    """Model-side attribute matrix: known rows + zeros, nothing else.

    Built with a select so that masked values (even NaN poison) are never
    read; this is the leak barrier the whole pipeline relies on.
    """
    return np.where(known[:, None], dataset.features, 0.0).astype(np.float64)


def prepare_split(dataset: Dataset, cfg: RunConfig):
    return make_split_mask(dataset.graph.n_nodes, cfg.split_fractions(),
                           cfg.seed, cfg.known_within_train)


def run_prefill(dataset: Dataset, cfg: RunConfig):
    """Propagation pre-fill; returns (x_tilde float32, split, provenance)."""
    cfg = cfg.resolved()
    split = prepare_split(dataset, cfg)
    a_hat = sym_normalize(dataset.graph)
    x_init = masked_input(dataset, split.mask.known)
    refined = run_propagation(x_init, split.mask, a_hat, cfg.propagation_config())
    return refined.x_tilde.astype(np.float32), split, refined.provenance


def build_training_inputs(dataset: Dataset, cfg: RunConfig, x_tilde, split):
    cfg = cfg.resolved()
    a_hat = sym_normalize(dataset.graph)
    mask = split.mask
    conf_w = None
    if cfg.epsilon > 0 and (cfg.lambda1 > 0 or cfg.lambda2 > 0):
        conf_w = confidence_weights(topo_position(dataset.graph, mask),
                                    cfg.gamma_decay)
    x0_known = np.ascontiguousarray(dataset.features[mask.known_idx],
                                    dtype=x_tilde.dtype)
    return TrainingInputs(
        x_tilde=x_tilde,
        graph=dataset.graph,
        a_hat=a_hat,
        mask=mask,
        feature_kind=dataset.feature_kind,
        conf_w=conf_w,
        epsilon=cfg.epsilon,
        x0_known=x0_known,
    )


def reconstruction_metrics(dataset: Dataset, x_hat, node_idx, k_list):
    """Ranking metrics for binary features, RMSE/CORR for continuous."""
    truth = dataset.features[node_idx]
    pred = x_hat[node_idx]
    if dataset.feature_kind == KIND_BINARY:
        rm = ranking_metrics(pred, truth, k_list=k_list)
        return {
            "recall": {str(k): v for k, v in rm.recall_at.items()},
            "ndcg": {str(k): v for k, v in rm.ndcg_at.items()},
            "n_evaluated": rm.n_evaluated,
        }
    rmse, corr = rmse_and_corr(pred, truth)
    return {"rmse": rmse, "corr": corr, "n_evaluated": int(len(node_idx))}


def run_train(dataset: Dataset, cfg: RunConfig, x_tilde=None):
    """Full pipeline run; returns (report dict, artifacts dict).

    x_tilde, when given, skips the pre-fill stage (it must match what
    run_prefill would produce for the same config and dataset).
    """
    cfg = cfg.resolved()
    t0 = time.perf_counter()
    split = prepare_split(dataset, cfg)
    if x_tilde is None:
        x_tilde, split, _ = run_prefill(dataset, cfg)
    inputs = build_training_inputs(dataset, cfg, x_tilde, split)
    val_truth = dataset.features[split.val_idx]
    result = train(inputs, cfg.train_config(), cfg.loss_config(),
                   val_idx=split.val_idx, x_val_true=val_truth)
    recon = reconstruction_metrics(dataset, result.x_hat, split.test_idx,
                                   cfg.k_list)
    wall = time.perf_counter() - t0
    final = result.history[-1]
    report = {
        "subcommand": "train",
        "dataset": dataset_block(dataset),
        "config": cfg.echo(),
        "sign_mode": cfg.sign_mode,
        "split": {
            "n_known": int(split.mask.n_known),
            "n_val": int(split.val_idx.size),
            "n_test": int(split.test_idx.size),
            "n_masked_train": int(split.masked_train_idx.size),
        },
        "metrics": {"reconstruction": recon},
        "losses_final": {
            "recon": final.recon,
            "nhs": final.nhs,
            "nlsc": final.nlsc,
            "total": final.total,
            "nhs_score": final.nhs_score,
            "nlsc_score": final.nlsc_score,
        },
        "artifacts": {
            "history": "history.csv",
            "checkpoint": "model.ckpt",
            "z": "z.bin",
            "x_hat": "x_hat.bin",
            "x_tilde": "x_tilde.bin",
            "timing": "timing.json",
        },
    }
    artifacts = {
        "result": result,
        "split": split,
        "x_tilde": x_tilde,
        "wall_clock_s": wall,
    }
    return report, artifacts


def dataset_block(dataset: Dataset) -> dict:
    return {
        "name": dataset.name,
        "n_nodes": int(dataset.graph.n_nodes),
        "n_edges": int(dataset.graph.n_edges),
        "n_features": int(dataset.features.shape[1]),
        "n_classes": int(np.unique(dataset.labels).size),
        "feature_kind": dataset.feature_kind,
    }


def run_eval(dataset: Dataset, cfg: RunConfig, x_hat, z=None, tasks=("reconstruction",)):
    """All requested metrics from reconstructed attributes / embeddings."""
    cfg = cfg.resolved()
    split = prepare_split(dataset, cfg)
    metrics = {}
    for task in tasks:
        if task == "reconstruction":
            metrics["reconstruction"] = reconstruction_metrics(
                dataset, x_hat, split.test_idx, cfg.k_list)
        elif task == "classification":
            metrics["classification"] = {
                "acc_5fold": classify_cv(x_hat, dataset.labels, cfg.seed)
            }
        elif task == "clustering":
            if z is None:
                raise InputError("clustering evaluation needs the embedding (--z)")
            n_classes = int(np.unique(dataset.labels).size)
            assign = kmeans(z, n_classes, cfg.seed)
            cm = clustering_metrics(assign, dataset.labels)
            metrics["clustering"] = {"acc": cm.acc, "nmi": cm.nmi,
                                     "ari": cm.ari, "f1": cm.f1}
        elif task == "homogeneity":
            ks = [k for k in HOMOGENEITY_K_LIST if k < dataset.graph.n_nodes]
            metrics["homogeneity"] = {
                str(k): v for k, v in knn_homogeneity(x_hat, dataset.labels,
                                                      k_list=ks).items()
            }
        else:
            raise InputError(f"unknown evaluation task {task!r}")
    return {
        "subcommand": "eval",
        "dataset": dataset_block(dataset),
        "config": cfg.echo(),
        "sign_mode": cfg.sign_mode,
        "metrics": metrics,
    }


# --------------------------------------------------------------------------
# report / artifact writing


def write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def write_history_csv(history, val_recall, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(HISTORY_COLUMNS) + "\n")
        for epoch, (rep, vr) in enumerate(zip(history, val_recall), start=1):
            row = (epoch, rep.recon, rep.nhs, rep.nlsc, rep.total, vr)
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v):
    if isinstance(v, int):
        return str(v)
    return f"{float(v):.10g}"


def write_train_artifacts(out_dir, report, artifacts):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = artifacts["result"]
    write_feature_matrix(artifacts["x_tilde"], out / "x_tilde.bin")
    write_feature_matrix(result.z, out / "z.bin")
    write_feature_matrix(result.x_hat, out / "x_hat.bin")
    save_checkpoint(result.params, out / "model.ckpt")
    write_history_csv(result.history, result.val_recall, out / "history.csv")
    write_json({"wall_clock_s": artifacts["wall_clock_s"]}, out / "timing.json")
    write_json(report, out / "report.json")


# --------------------------------------------------------------------------
# argument parsing


def _add_data_args(p):
    g = p.add_argument_group("data source")
    g.add_argument("--dataset-dir", help="native binary dataset directory")
    g.add_argument("--content", help="content file of the text format")
    g.add_argument("--cites", help="cites file of the text format")


def _add_hyper_args(p):
    g = p.add_argument_group("hyperparameters")
    g.add_argument("--profile", choices=["citation", "large"], default="citation")
    g.add_argument("--seed", type=int, default=72)
    g.add_argument("--mode", choices=["fp", "anchored"], default="anchored",
                   help="pre-fill propagation mode")
    g.add_argument("--iters", type=int, default=10, help="pre-fill iterations")
    g.add_argument("--alpha-global", type=float, default=0.05)
    g.add_argument("--beta-reset", type=float, default=0.1)
    g.add_argument("--gamma-decay", type=float, default=0.9)
    g.add_argument("--epsilon", type=float, default=0.01)
    g.add_argument("--lambda1", type=float, default=0.1)
    g.add_argument("--lambda2", type=float, default=0.1)
    g.add_argument("--tau", type=float, default=0.2)
    g.add_argument("--sign-mode", choices=["intent-consistent", "as-written"],
                   default="intent-consistent")
    g.add_argument("--nlsc-mode", choices=["auto", "exact", "sampled"],
                   default="auto")
    g.add_argument("--nlsc-sample-count", type=int, default=100_000)
    g.add_argument("--recon-target", choices=["refined", "original"],
                   default="refined")
    g.add_argument("--lr", type=float, default=None)
    g.add_argument("--epochs", type=int, default=None)
    g.add_argument("--dropout", type=float, default=None)
    g.add_argument("--arch", choices=["gcn2-mlp2", "mlp1-mlp1"], default=None)
    g.add_argument("--hidden", type=int, default=256)
    g.add_argument("--latent", type=int, default=256)
    g.add_argument("--known-frac", type=float, default=0.4)
    g.add_argument("--missing-rate", type=float, default=None)
    g.add_argument("--known-within-train", action="store_true")
    g.add_argument("--k-list", default="10,20,50",
                   help="comma-separated K values for ranking metrics")


def config_from_args(args) -> RunConfig:
    return RunConfig(
        profile=args.profile,
        seed=args.seed,
        mode=args.mode,
        iters=args.iters,
        alpha_global=args.alpha_global,
        beta_reset=args.beta_reset,
        gamma_decay=args.gamma_decay,
        epsilon=args.epsilon,
        lambda1=args.lambda1,
        lambda2=args.lambda2,
        tau=args.tau,
        sign_mode=args.sign_mode,
        nlsc_mode=args.nlsc_mode,
        nlsc_sample_count=args.nlsc_sample_count,
        recon_target=args.recon_target,
        lr=args.lr,
        epochs=args.epochs,
        dropout=args.dropout,
        arch=args.arch,
        hidden=args.hidden,
        latent=args.latent,
        known_frac=args.known_frac,
        missing_rate=args.missing_rate,
        known_within_train=args.known_within_train,
        k_list=tuple(int(k) for k in str(args.k_list).split(",") if k),
    )


def load_dataset_from_args(args) -> Dataset:
    if args.dataset_dir:
        return load_binary_dataset(args.dataset_dir)
    if args.content and args.cites:
        return load_content_format(args.content, args.cites)
    raise InputError("need either --dataset-dir or both --content and --cites")


# --------------------------------------------------------------------------
# subcommand handlers


def cmd_prefill(args) -> int:
    dataset = load_dataset_from_args(args)
    cfg = config_from_args(args)
    t0 = time.perf_counter()
    x_tilde, split, provenance = run_prefill(dataset, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_feature_matrix(x_tilde, out / "x_tilde.bin")
    report = {
        "subcommand": "prefill",
        "dataset": dataset_block(dataset),
        "config": cfg.resolved().echo(),
        "split": {"n_known": int(split.mask.n_known),
                  "n_val": int(split.val_idx.size),
                  "n_test": int(split.test_idx.size)},
        "provenance_counts": {
            "original_known": int((provenance == 0).sum()),
            "refined_known": int((provenance == 1).sum()),
            "prefilled_unknown": int((provenance == 2).sum()),
        },
        "artifacts": {"x_tilde": "x_tilde.bin", "timing": "timing.json"},
    }
    write_json({"wall_clock_s": time.perf_counter() - t0}, out / "timing.json")
    write_json(report, out / "report.json")
    return 0


def cmd_train(args) -> int:
    dataset = load_dataset_from_args(args)
    cfg = config_from_args(args)
    x_tilde = None
    if args.skip_prefill:
        path = Path(args.xtilde) if args.xtilde else Path(args.out_dir) / "x_tilde.bin"
        x_tilde, _ = read_feature_matrix(path)
    report, artifacts = run_train(dataset, cfg, x_tilde=x_tilde)
    write_train_artifacts(args.out_dir, report, artifacts)
    return 0


def cmd_eval(args) -> int:
    dataset = load_dataset_from_args(args)
    cfg = config_from_args(args)
    z = None
    if args.xhat:
        x_hat, _ = read_feature_matrix(args.xhat)
    elif args.checkpoint:
        if not args.xtilde:
            raise InputError("eval from a checkpoint also needs --xtilde")
        params = load_checkpoint(args.checkpoint)
        x_tilde, _ = read_feature_matrix(args.xtilde)
        a_hat = sym_normalize(dataset.graph)
        z = encode(x_tilde, a_hat, params)
        x_hat = decode(z, params, dataset.feature_kind)
    else:
        raise InputError("eval needs --xhat or --checkpoint")
    if args.z:
        z, _ = read_feature_matrix(args.z)
    tasks = tuple(t for t in args.tasks.split(",") if t)
    t0 = time.perf_counter()
    report = run_eval(dataset, cfg, x_hat, z=z, tasks=tasks)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json({"wall_clock_s": time.perf_counter() - t0}, out / "timing.json")
    write_json(report, out / "report.json")
    return 0


def _summary_value(report):
    recon = report["metrics"]["reconstruction"]
    if "recall" in recon:
        return {"recall": recon["recall"], "ndcg": recon["ndcg"]}
    return {"rmse": recon["rmse"], "corr": recon["corr"]}


def cmd_sweep_missing(args) -> int:
    dataset = load_dataset_from_args(args)
    base = config_from_args(args)
    rates = [float(r) for r in args.rates.split(",") if r]
    seeds = [int(s) for s in args.seeds.split(",") if s]
    out = Path(args.out_dir)
    t0 = time.perf_counter()
    summary = {"subcommand": "sweep-missing", "dataset": dataset_block(dataset),
               "rates": {}}
    for rate in rates:
        per_seed = {}
        for seed in seeds:
            cfg = replace(base, missing_rate=rate, seed=seed)
            report, artifacts = run_train(dataset, cfg)
            run_dir = out / f"rate_{rate:g}" / f"seed_{seed}"
            write_train_artifacts(run_dir, report, artifacts)
            per_seed[str(seed)] = _summary_value(report)
        summary["rates"][f"{rate:g}"] = per_seed
    out.mkdir(parents=True, exist_ok=True)
    write_json({"wall_clock_s": time.perf_counter() - t0}, out / "timing.json")
    write_json(summary, out / "summary.json")
    return 0


def cmd_ablate(args) -> int:
    dataset = load_dataset_from_args(args)
    base = config_from_args(args)
    seeds = [int(s) for s in args.seeds.split(",") if s]
    out = Path(args.out_dir)
    t0 = time.perf_counter()
    summary = {"subcommand": "ablate", "dataset": dataset_block(dataset),
               "variants": {}}
    for name, overrides in ABLATION_VARIANTS.items():
        per_seed = {}
        for seed in seeds:
            cfg = replace(base, seed=seed, **overrides)
            report, artifacts = run_train(dataset, cfg)
            run_dir = out / name / f"seed_{seed}"
            write_train_artifacts(run_dir, report, artifacts)
            per_seed[str(seed)] = _summary_value(report)
        summary["variants"][name] = per_seed
    out.mkdir(parents=True, exist_ok=True)
    write_json({"wall_clock_s": time.perf_counter() - t0}, out / "timing.json")
    write_json(summary, out / "summary.json")
    return 0


def cmd_gen_synth(args) -> int:
    dataset = gen_sbm(blocks=args.blocks, per_block=args.per_block,
                      p_in=args.p_in, p_out=args.p_out,
                      feature_dim=args.feature_dim, seed=args.seed,
                      noise=args.noise)
    out = Path(args.out_dir)
    save_binary_dataset(dataset, out)
    write_json({
        "subcommand": "gen-synth",
        "dataset": dataset_block(dataset),
        "config": {"blocks": args.blocks, "per_block": args.per_block,
                   "p_in": args.p_in, "p_out": args.p_out,
                   "feature_dim": args.feature_dim, "noise": args.noise,
                   "seed": args.seed},
    }, out / "report.json")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphfill",
        description="Recover missing node attributes on graphs and evaluate "
                    "the reconstruction on downstream tasks.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("prefill", help="propagation pre-fill only, writes x_tilde")
    _add_data_args(p)
    _add_hyper_args(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_prefill)

    p = sub.add_parser("train", help="full pipeline: pre-fill, train, reconstruct")
    _add_data_args(p)
    _add_hyper_args(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--skip-prefill", action="store_true",
                   help="load x_tilde.bin instead of running the pre-fill")
    p.add_argument("--xtilde", help="path of the pre-filled matrix "
                                    "(default: <out-dir>/x_tilde.bin)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="metrics from written x_hat / z files")
    _add_data_args(p)
    _add_hyper_args(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--xhat", help="reconstructed attribute file")
    p.add_argument("--checkpoint", help="model checkpoint (alternative to --xhat)")
    p.add_argument("--xtilde", help="pre-filled matrix, required with --checkpoint")
    p.add_argument("--z", help="embedding file (needed for clustering)")
    p.add_argument("--tasks", default="reconstruction",
                   help="comma list: reconstruction,classification,clustering,homogeneity")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-missing", help="train across a missing-rate grid")
    _add_data_args(p)
    _add_hyper_args(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--rates", default=",".join(str(r) for r in DEFAULT_SWEEP_RATES))
    p.add_argument("--seeds", default="72")
    p.set_defaults(func=cmd_sweep_missing)

    p = sub.add_parser("ablate", help="train every ablation variant")
    _add_data_args(p)
    _add_hyper_args(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seeds", default="72")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gen-synth", help="write a synthetic block-model dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--blocks", type=int, default=4)
    p.add_argument("--per-block", type=int, default=50)
    p.add_argument("--p-in", type=float, default=0.15)
    p.add_argument("--p-out", type=float, default=0.01)
    p.add_argument("--feature-dim", type=int, default=64)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=72)
    p.set_defaults(func=cmd_gen_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GraphfillError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
