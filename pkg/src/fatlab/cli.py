"""Command-line entry point.

Commands: gen-data, train, distill, eval, bench. Each takes --config (JSON)
plus flag overrides and writes its artifacts under --out with the resolved
config embedded (minus the output path, so re-runs into a different
directory stay byte-identical). Exit codes: 0 ok, 1 config/validation
error, 2 runtime error.
"""

import argparse
import os
import sys

import numpy as np

from . import io
from .backend import available_backends
from .bench import benchmark_loss_scaling
from .config import (build_model, build_train_config, batch_spec_dict,
                     build_batch_spec, model_dict, train_config_dict,
                     validate_config)
from .data import split_query_gallery
from .distill import (NoiseSpec, SelectionMode, generate_soft_labels,
                      generate_synthetic_dataset, inject_noise, train_student,
                      train_teacher)
from .errors import ConfigError, FatLabError
from .evaluation import evaluate_model
from .model import EmbeddingModel  # noqa: F401  (re-export for scripts)
from .trainer import TrainConfig, train


def _embedded(config):
    """The config recorded inside artifacts: resolved, without 'out'."""
    return {k: v for k, v in config.items() if k != "out"}


def _ensure_out(config):
    out = config.get("out")
    if not out:
        raise ConfigError("an output directory is required (--out)")
    os.makedirs(out, exist_ok=True)
    return out


def run_gen_data(config):
    out = _ensure_out(config)
    seed = int(config.get("seed", 0))
    data = dict(config.get("data") or {})
    data.setdefault("identities", 20)
    data.setdefault("samples_per_identity", 10)
    data.setdefault("input_dim", 16)
    data.setdefault("separation", 10.0)
    resolved = {"command": "gen-data", "seed": seed, "data": data}
    ds = generate_synthetic_dataset(
        data["identities"], data["samples_per_identity"], data["input_dim"],
        data["separation"], seed=seed)
    mask = np.zeros(len(ds), dtype=np.int64)
    if config.get("noise"):
        noise = dict(config["noise"])
        noise.setdefault("seed", seed)
        resolved["noise"] = noise
        ds, mask = inject_noise(ds, NoiseSpec(**noise))
    io.write_dataset(os.path.join(out, "dataset.bin"), ds, resolved)
    io.write_noise_mask(os.path.join(out, "noise_mask.csv"), ds, mask,
                        resolved)
    io.write_json(os.path.join(out, "config.json"), resolved)
    print(f"gen-data: wrote {len(ds)} samples "
          f"({int(mask.astype(bool).sum())} corrupted) to {out}")
    return 0


def _load_split(config, seed):
    dataset_path = config.get("dataset")
    if not dataset_path:
        raise ConfigError("a dataset path is required")
    dataset, _ = io.read_dataset(dataset_path)
    queries_per_id = int((config.get("eval") or {})
                         .get("queries_per_identity", 2))
    gallery, queries = split_query_gallery(dataset, queries_per_id, seed=seed)
    return dataset, gallery, queries, queries_per_id


def run_train(config):
    out = _ensure_out(config)
    seed = int(config.get("seed", 0))
    dataset, gallery, queries, queries_per_id = _load_split(config, seed)
    tcfg = build_train_config(config.get("train"), seed)
    model = build_model(config.get("model"), dataset.input_dim, seed)
    resolved = {"command": "train", "seed": seed,
                "dataset": config["dataset"], "model": model_dict(model),
                "train": train_config_dict(tcfg),
                "eval": {"queries_per_identity": queries_per_id}}
    model, head, log = train(model, gallery, tcfg)
    report = evaluate_model(model, gallery, queries)
    io.write_checkpoint(os.path.join(out, "checkpoint.bin"), model, head,
                        resolved)
    io.write_trainlog(os.path.join(out, "trainlog.csv"), log, resolved)
    io.write_json(os.path.join(out, "eval.json"),
                  {"config": resolved, "report": report.to_dict()})
    io.write_json(os.path.join(out, "config.json"), resolved)
    print(f"train: {tcfg.loss} for {tcfg.epochs} epochs; held-out "
          f"top1={report.top1:.3f} mAP={report.mean_ap:.3f}")
    return 0


def run_distill(config):
    out = _ensure_out(config)
    seed = int(config.get("seed", 0))
    dataset, gallery, queries, queries_per_id = _load_split(config, seed)

    teacher_raw = dict(config.get("teacher") or {})
    selection_raw = dict(teacher_raw.pop("selection", None) or
                         {"mode": "softPercentage"})
    cycle_length = int(teacher_raw.pop("cycle_length", 5))
    teacher_raw.setdefault("epochs", 15)
    teacher_raw["loss"] = "CE"
    tcfg = build_train_config(teacher_raw, seed)
    selection = SelectionMode(**selection_raw)

    student_raw = dict(config.get("student") or {})
    student_raw.setdefault("loss", "CE-FAT")
    student_raw.setdefault("epochs", 40)
    scfg = build_train_config(student_raw, seed)

    teacher = build_model(config.get("model"), dataset.input_dim, seed)
    resolved = {
        "command": "distill", "seed": seed, "dataset": config["dataset"],
        "model": model_dict(teacher),
        "teacher": {"epochs": tcfg.epochs,
                    "learning_rate": tcfg.learning_rate,
                    "schedule": tcfg.schedule,
                    "cycle_length": cycle_length,
                    "batch": batch_spec_dict(tcfg.batch),
                    "selection": {"mode": selection.mode,
                                  "threshold": selection.threshold,
                                  "keep_fraction": selection.keep_fraction,
                                  "statistic": selection.statistic}},
        "student": train_config_dict(scfg),
        "eval": {"queries_per_identity": queries_per_id},
    }
    teacher, t_head, t_log, history = train_teacher(
        teacher, gallery, tcfg, selection=selection,
        cycle_length=cycle_length)
    trusted = history[-1] if history else None
    table = generate_soft_labels(teacher, t_head, gallery, trusted)

    student = build_model(config.get("model"), dataset.input_dim, seed)
    baseline = student.copy()
    student, s_head, s_log = train_student(student, gallery, table, scfg)
    baseline, b_head, b_log = train(baseline, gallery, scfg)

    reports = {
        "teacher": evaluate_model(teacher, gallery, queries).to_dict(),
        "distilled": evaluate_model(student, gallery, queries).to_dict(),
        "baseline": evaluate_model(baseline, gallery, queries).to_dict(),
    }
    io.write_checkpoint(os.path.join(out, "teacher.bin"), teacher, t_head,
                        resolved)
    io.write_checkpoint(os.path.join(out, "student.bin"), student, s_head,
                        resolved)
    io.write_checkpoint(os.path.join(out, "baseline.bin"), baseline, b_head,
                        resolved)
    io.write_soft_labels(os.path.join(out, "soft_labels.csv"), table,
                         resolved)
    io.write_trainlog(os.path.join(out, "trainlog_teacher.csv"), t_log,
                      resolved)
    io.write_trainlog(os.path.join(out, "trainlog_student.csv"), s_log,
                      resolved)
    io.write_trainlog(os.path.join(out, "trainlog_baseline.csv"), b_log,
                      resolved)
    io.write_json(os.path.join(out, "eval_pair.json"),
                  {"config": resolved, "reports": reports})
    io.write_json(os.path.join(out, "config.json"), resolved)
    print("distill: mAP distilled={:.3f} baseline={:.3f} teacher={:.3f}"
          .format(reports["distilled"]["mAP"], reports["baseline"]["mAP"],
                  reports["teacher"]["mAP"]))
    return 0


def run_eval(config):
    out = _ensure_out(config)
    seed = int(config.get("seed", 0))
    checkpoint = config.get("checkpoint")
    if not checkpoint:
        raise ConfigError("a checkpoint path is required")
    model, _, _ = io.read_checkpoint(checkpoint)
    eval_cfg = dict(config)
    transfer = config.get("transfer")
    if transfer:
        eval_cfg["dataset"] = transfer
    if not eval_cfg.get("dataset"):
        raise ConfigError("a dataset path is required")
    _, gallery, queries, queries_per_id = _load_split(eval_cfg, seed)
    report = evaluate_model(model, gallery, queries)
    resolved = {"command": "eval", "seed": seed,
                "dataset": config.get("dataset"), "checkpoint": checkpoint,
                "transfer": transfer,
                "eval": {"queries_per_identity": queries_per_id}}
    io.write_json(os.path.join(out, "eval.json"),
                  {"config": resolved, "report": report.to_dict()})
    io.write_json(os.path.join(out, "config.json"), resolved)
    kind = "transfer" if transfer else "eval"
    print(f"{kind}: top1={report.top1:.3f} top5={report.top5:.3f} "
          f"top10={report.top10:.3f} mAP={report.mean_ap:.3f}")
    return 0


DEFAULT_BENCH_RUNS = [
    {"loss": "FAT", "sizes": [512, 1024, 2048, 4096, 8192]},
    {"loss": "tripletBatchAll", "sizes": [64, 128, 256, 512]},
]


def run_bench(config):
    out = _ensure_out(config)
    seed = int(config.get("seed", 0))
    bench = dict(config.get("bench") or {})
    runs = bench.get("runs", DEFAULT_BENCH_RUNS)
    repeats = int(bench.get("repeats", 5))
    k = int(bench.get("k_per_identity", 8))
    dim = int(bench.get("dim", 16))
    margin = float(bench.get("margin", 1.0))
    backends = bench.get("backends") or ["auto"]
    if backends == ["all"]:
        backends = available_backends()
    resolved = {"command": "bench", "seed": seed,
                "bench": {"runs": runs, "repeats": repeats,
                          "k_per_identity": k, "dim": dim, "margin": margin,
                          "backends": backends}}
    reports = []
    for backend in backends:
        for spec in runs:
            rep = benchmark_loss_scaling(
                spec["loss"], spec["sizes"], repeats=repeats, seed=seed,
                k_per_identity=k, dim=dim, margin=margin, backend=backend)
            reports.append(rep)
            print(f"bench: {rep.loss:>16s} [{rep.backend}] slope="
                  f"{rep.slope:.2f} times(ms)="
                  + ",".join(f"{t * 1e3:.2f}" for t in rep.min_seconds))
    io.write_bench(out, reports, resolved)
    io.write_json(os.path.join(out, "config.json"), resolved)
    return 0


RUNNERS = {"gen-data": run_gen_data, "train": run_train,
           "distill": run_distill, "eval": run_eval, "bench": run_bench}


def _add_common(parser):
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, help="override config seed")
    parser.add_argument("--out", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fatlab",
        description="Point-to-set metric learning lab: train, distill, "
                    "evaluate and benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    _add_common(p)
    p.add_argument("--identities", type=int)
    p.add_argument("--samples-per-identity", type=int)
    p.add_argument("--input-dim", type=int)
    p.add_argument("--separation", type=float)
    p.add_argument("--flip-rate", type=float)

    p = sub.add_parser("train", help="train a model and evaluate held-out")
    _add_common(p)
    p.add_argument("--dataset")
    p.add_argument("--loss")

    p = sub.add_parser("distill", help="teacher/student distillation with a "
                                       "non-distilled baseline arm")
    _add_common(p)
    p.add_argument("--dataset")

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    _add_common(p)
    p.add_argument("--dataset")
    p.add_argument("--checkpoint")
    p.add_argument("--transfer", metavar="DATASET_B",
                   help="evaluate on a second dataset (direct transfer)")

    p = sub.add_parser("bench", help="loss-computation scaling benchmark")
    _add_common(p)
    p.add_argument("--backend", choices=["auto", "python", "compiled", "all"])
    return parser


def _merge_flags(config, args):
    if args.seed is not None:
        config["seed"] = args.seed
    if args.out is not None:
        config["out"] = args.out
    cmd = args.command
    if cmd == "gen-data":
        data = config.setdefault("data", {})
        for flag, key in (("identities", "identities"),
                          ("samples_per_identity", "samples_per_identity"),
                          ("input_dim", "input_dim"),
                          ("separation", "separation")):
            val = getattr(args, flag)
            if val is not None:
                data[key] = val
        if args.flip_rate is not None:
            config.setdefault("noise", {})["flip_rate"] = args.flip_rate
    elif cmd in ("train", "distill"):
        if args.dataset:
            config["dataset"] = args.dataset
        if cmd == "train" and args.loss:
            config.setdefault("train", {})["loss"] = args.loss
    elif cmd == "eval":
        if args.dataset:
            config["dataset"] = args.dataset
        if args.checkpoint:
            config["checkpoint"] = args.checkpoint
        if args.transfer:
            config["transfer"] = args.transfer
    elif cmd == "bench" and args.backend:
        config.setdefault("bench", {})["backends"] = [args.backend]
    return config


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = io.read_json(args.config) if args.config else {}
        config["command"] = args.command
        config = _merge_flags(config, args)
        validate_config(config)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        return RUNNERS[args.command](config)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except FatLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
