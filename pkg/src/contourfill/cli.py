"""Command-line entry point.

Subcommands: ``generate`` (benchmark datasets), ``complete`` (single-image
completion), ``eval`` (experiment harness). Every run echoes its effective
configuration into the output directory as config.json so it can be
reproduced from that file alone.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import evaluation
from .energy import VARIANTS, EnergyConfig
from .engine import RunConfig, ScoreTrace, complete, gamma_from_truth
from .errors import ConfigError, DivergenceError
from .generator import GeneratorConfig
from .pngio import load_image, save_image
from .scores import ScoreConfig
from .shapes import DATASET_NAMES, generate_dataset, load_dataset, save_dataset

# flag name -> (config section, field, type)
_CONFIG_FLAGS = [
    ("depth", "generator", "depth", int),
    ("down-channels", "generator", "down_channels", int),
    ("up-channels", "generator", "up_channels", int),
    ("skip-channels", "generator", "skip_channels", int),
    ("main-kernel", "generator", "main_kernel", int),
    ("skip-kernel", "generator", "skip_kernel", int),
    ("noise-channels", "generator", "noise_channels", int),
    ("channels", "generator", "output_channels", int),
    ("slope", "generator", "leaky_slope", float),
    ("alpha", "energy", "alpha", float),
    ("variant", "energy", "variant", str),
    ("threshold", "scores", "binarize_threshold", float),
    ("match-radius", "scores", "match_radius", float),
    ("iters", "run", "max_iterations", int),
    ("lr", "run", "learning_rate", float),
    ("score-every", "run", "score_every", int),
    ("snapshot-every", "run", "snapshot_every", int),
    ("seed", "run", "seed", int),
]

_SECTIONS = {
    "generator": GeneratorConfig,
    "energy": EnergyConfig,
    "scores": ScoreConfig,
    "run": RunConfig,
}


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="JSON config file (sections: generator, energy, scores, run)")
    for flag, section, key, typ in _CONFIG_FLAGS:
        kwargs = {"type": typ, "default": None, "help": f"{section}.{key}"}
        if key == "variant":
            kwargs["choices"] = VARIANTS
        parser.add_argument(f"--{flag}", dest=f"{section}__{key}", **kwargs)
    parser.add_argument(
        "--normalize", dest="generator__normalize", action=argparse.BooleanOptionalAction,
        default=None, help="generator.normalize",
    )
    parser.add_argument("--gamma", default=None, help="scores.gamma, or 'auto' to derive from ground truth")


def _section_values(file_cfg: dict, args: argparse.Namespace) -> dict[str, dict]:
    values = {name: {} for name in _SECTIONS}
    for name, cls in _SECTIONS.items():
        known = {f.name for f in dataclasses.fields(cls)} - {"generator", "energy", "scores"}
        for key, val in file_cfg.get(name, {}).items():
            if key not in known:
                raise ConfigError(f"unknown key {name}.{key!r} in config file")
            values[name][key] = val
    unknown_sections = set(file_cfg) - set(_SECTIONS)
    if unknown_sections:
        raise ConfigError(f"unknown config sections: {sorted(unknown_sections)}")
    for attr, val in vars(args).items():
        if "__" in attr and val is not None:
            section, key = attr.split("__", 1)
            values[section][key] = val
    return values


def _build_run_config(args: argparse.Namespace) -> tuple[RunConfig, str | float | None]:
    file_cfg = {}
    if args.config is not None:
        with open(args.config) as fh:
            file_cfg = json.load(fh)
    values = _section_values(file_cfg, args)
    gamma = getattr(args, "gamma", None)
    if gamma is None:
        gamma = values["scores"].pop("gamma", None)
    elif gamma != "auto":
        gamma = float(gamma)
    if gamma is not None and gamma != "auto":
        values["scores"]["gamma"] = float(gamma)
    run_kwargs = values["run"]
    cfg = RunConfig(
        generator=GeneratorConfig(**values["generator"]),
        energy=EnergyConfig(**values["energy"]),
        scores=ScoreConfig(**values["scores"]),
        **run_kwargs,
    )
    return cfg, gamma


def _config_dict(cfg: RunConfig) -> dict:
    return {
        "generator": dataclasses.asdict(cfg.generator),
        "energy": dataclasses.asdict(cfg.energy),
        "scores": dataclasses.asdict(cfg.scores),
        "run": {
            "max_iterations": cfg.max_iterations,
            "learning_rate": cfg.learning_rate,
            "score_every": cfg.score_every,
            "snapshot_every": cfg.snapshot_every,
            "seed": cfg.seed,
        },
    }


def _echo_config(out_dir: Path, payload: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config.json", "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)


def _pad_to_multiple(img: np.ndarray, step: int) -> tuple[np.ndarray, tuple[int, int]]:
    h, w = img.shape
    ph = (-h) % step
    pw = (-w) % step
    if ph or pw:
        img = np.pad(img, ((0, ph), (0, pw)), constant_values=1.0)
    return img, (h, w)


def _write_trace_csv(path: Path, trace: ScoreTrace) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "energy", "rho", "omega", "delta"])
        for row in trace.rows:
            writer.writerow([row.iteration, repr(row.energy), repr(row.rho), repr(row.omega), repr(row.delta)])


# ----------------------------------------------------------------------
# subcommands


def cmd_generate(args: argparse.Namespace) -> int:
    if args.count < 1:
        raise ConfigError(f"--count must be >= 1, got {args.count}")
    samples = generate_dataset(args.dataset, args.count, canvas=args.size, seed=args.seed, stroke_width=args.stroke)
    root = save_dataset(samples, args.out, args.dataset, canvas=args.size, seed=args.seed)
    _echo_config(
        Path(args.out),
        {
            "command": "generate",
            "dataset": args.dataset,
            "count": args.count,
            "size": args.size,
            "seed": args.seed,
            "stroke": args.stroke,
            "out": str(args.out),
        },
    )
    print(f"wrote {len(samples)} sample pairs to {root}")
    return 0


def cmd_complete(args: argparse.Namespace) -> int:
    cfg, gamma_mode = _build_run_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    img = load_image(args.input)
    step = 2 ** cfg.generator.depth
    padded, original = _pad_to_multiple(img, step)

    gt_padded = None
    if args.gt is not None:
        gt = load_image(args.gt)
        if gt.shape != original:
            raise ConfigError(f"ground truth size {gt.shape} differs from input {original}")
        gt_padded, _ = _pad_to_multiple(gt, step)

    warnings = []
    if gamma_mode == "auto":
        if gt_padded is not None:
            gamma = gamma_from_truth(gt_padded, padded, cfg.scores)
            cfg = dataclasses.replace(cfg, scores=dataclasses.replace(cfg.scores, gamma=gamma))
        else:
            warnings.append(
                f"gamma=auto needs --gt to derive a gap estimate; using default gamma={cfg.scores.gamma}"
            )

    if args.emit_frames:
        every = max(1, cfg.max_iterations // args.emit_frames)
        cfg = dataclasses.replace(cfg, snapshot_every=every)

    best, trace = complete(padded, cfg)
    completed = best[: original[0], : original[1]]
    save_image(out_dir / "completed.png", completed)
    _write_trace_csv(out_dir / "trace.csv", trace)

    payload = _config_dict(cfg)
    payload["io"] = {
        "command": "complete",
        "input": str(args.input),
        "gt": str(args.gt) if args.gt else None,
        "out": str(args.out),
        "original_size": list(original),
        "padded_size": list(padded.shape),
        "gamma_mode": gamma_mode if gamma_mode is not None else "config",
        "emit_frames": args.emit_frames,
        "best_iteration": trace.best_iteration,
        "warnings": warnings,
    }
    _echo_config(out_dir, payload)

    if gt_padded is not None:
        gt_img = gt_padded[: original[0], : original[1]]
        eval_payload = {
            "mse": evaluation.mse(completed, gt_img),
            "iou": evaluation.iou(completed, gt_img, cfg.scores.binarize_threshold),
            "raw_mse": evaluation.mse(img, gt_img),
            "raw_iou": evaluation.iou(img, gt_img, cfg.scores.binarize_threshold),
        }
        with open(out_dir / "eval.json", "w") as fh:
            json.dump(eval_payload, fh, indent=1, sort_keys=True)

    if args.emit_frames and trace.snapshots:
        frames_dir = out_dir / "frames"
        frames_dir.mkdir(exist_ok=True)
        idx = np.unique(np.linspace(0, len(trace.snapshots) - 1, args.emit_frames).round().astype(int))
        for i in idx:
            iteration, frame = trace.snapshots[i]
            save_image(frames_dir / f"frame_{iteration:05d}.png", frame[: original[0], : original[1]])

    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(
        f"completed {args.input} in {cfg.max_iterations} iterations "
        f"(best at {trace.best_iteration}, delta {trace.best_delta:.3f}) -> {out_dir / 'completed.png'}"
    )
    return 0


def _parse_floats(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part]


def _parse_ints(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part]


def cmd_eval(args: argparse.Namespace) -> int:
    cfg, _ = _build_run_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    payload = _config_dict(cfg)
    payload["io"] = {
        "command": "eval",
        "experiment": args.experiment,
        "dataset": str(args.dataset) if args.dataset else None,
        "out": str(args.out),
        "samples": args.samples,
        "workers": args.workers,
    }

    if args.experiment == "rf":
        kernels = _parse_ints(args.kernels)
        gaps = _parse_ints(args.gaps)
        payload["io"].update({"kernels": kernels, "gaps": gaps, "trials": args.trials, "canvas": args.canvas})
        _echo_config(out_dir, payload)
        table = evaluation.sweep_receptive_field(
            gaps, kernels, args.trials, cfg, canvas=args.canvas, seed=cfg.seed, workers=args.workers
        )
        evaluation.write_rf_csv(out_dir / "rf_sweep.csv", table)
        print(f"wrote {out_dir / 'rf_sweep.csv'}")
        return 0

    if args.dataset is None:
        raise ConfigError(f"--dataset is required for the {args.experiment} experiment")
    samples = load_dataset(args.dataset)
    if args.samples:
        samples = samples[: args.samples]

    if args.experiment == "comparison":
        _echo_config(out_dir, payload)
        records, summary = evaluation.run_comparison(samples, cfg, workers=args.workers)
        evaluation.write_comparison_csv(out_dir / "comparison.csv", records)
        with open(out_dir / "summary.json", "w") as fh:
            json.dump(summary, fh, indent=1, sort_keys=True)
        print(f"wrote {out_dir / 'comparison.csv'}")
        for method, stats in summary["methods"].items():
            print(f"  {method}: mse {stats['mse']:.2f}, iou {stats['iou']:.3f}, iters {stats['iterations']:.0f}")
    elif args.experiment == "alpha":
        alphas = _parse_floats(args.alphas)
        payload["io"]["alphas"] = alphas
        _echo_config(out_dir, payload)
        table = evaluation.sweep_alpha(samples, alphas, cfg.max_iterations, cfg, workers=args.workers)
        evaluation.write_alpha_csv(out_dir / "alpha_sweep.csv", table)
        print(f"wrote {out_dir / 'alpha_sweep.csv'}")
    elif args.experiment == "correlation":
        _echo_config(out_dir, payload)
        r, n = evaluation.gamma_gap_correlation(samples, cfg.scores)
        with open(out_dir / "correlation.json", "w") as fh:
            json.dump({"pearson_r": r, "n": n}, fh, indent=1, sort_keys=True)
        print(f"pearson_r {r:.4f} over {n} samples -> {out_dir / 'correlation.json'}")
    else:
        raise ConfigError(f"unknown experiment {args.experiment!r}")
    return 0


# ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contourfill", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a benchmark dataset")
    gen.add_argument("--dataset", choices=DATASET_NAMES, required=True)
    gen.add_argument("--count", type=int, required=True)
    gen.add_argument("--size", type=int, default=128)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--stroke", type=int, default=1)
    gen.add_argument("--out", type=Path, default=Path("datasets"))
    gen.set_defaults(func=cmd_generate)

    comp = sub.add_parser("complete", help="complete one contour image")
    comp.add_argument("--input", type=Path, required=True)
    comp.add_argument("--gt", type=Path, default=None)
    comp.add_argument("--out", type=Path, default=Path("out"))
    comp.add_argument("--emit-frames", type=int, default=0, help="write N evenly spaced evolution frames")
    _add_run_flags(comp)
    comp.set_defaults(func=cmd_complete)

    ev = sub.add_parser("eval", help="run an experiment over a dataset")
    ev.add_argument("--dataset", type=Path, default=None, help="dataset directory containing manifest.json")
    ev.add_argument("--experiment", choices=("comparison", "alpha", "correlation", "rf"), required=True)
    ev.add_argument("--out", type=Path, default=Path("eval_out"))
    ev.add_argument("--samples", type=int, default=0, help="cap the number of samples (0 = all)")
    ev.add_argument("--workers", type=int, default=None)
    ev.add_argument("--alphas", default="0,0.05,0.15,0.5,0.95,1")
    ev.add_argument("--kernels", default="3,5,7")
    ev.add_argument("--gaps", default="6,10,14")
    ev.add_argument("--trials", type=int, default=10)
    ev.add_argument("--canvas", type=int, default=64)
    _add_run_flags(ev)
    ev.set_defaults(func=cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except DivergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
