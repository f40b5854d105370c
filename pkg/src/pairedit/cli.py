"""Command line interface: data generation, training, editing, ablation and attention visualization."""
import argparse
import dataclasses
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

from pairedit.backbone.latent import encode_pair
from pairedit.backbone.model import EditingModel
from pairedit.datagen.dataset import generate_dataset, load_dataset
from pairedit.diffusion.sampler import DEFAULT_STEPS, euler_sample
from pairedit.diffusion.schedule import NoiseSchedule
from pairedit.diffusion.trainer import Trainer
from pairedit.evalkit.ablation import (
    AblationConfig,
    run_ablation,
    train_ablation_model,
    write_ablation_table,
)
from pairedit.evalkit.heatmap import export_attention_heatmap
from pairedit.interfaces.enums import AttentionMode, SignalType
from pairedit.interfaces.parameters import Config
from pairedit.interfaces.sample_pair import EditSignal
from pairedit.utilities.load_config import load_config
from pairedit.utilities.netpbm import read_drag_points, read_pnm, write_pnm
from pairedit.utilities.plot import plot_attention_overlay

log = logging.getLogger("CLI")

LOG_LEVELS = [
    logging.DEBUG,
    logging.INFO,
    logging.WARNING,
    logging.ERROR,
    logging.CRITICAL,
]


def _setup_logging(console_level: int, log_file: str | None = None, file_level: int = logging.DEBUG) -> None:
    # Check if log levels are valid
    if console_level not in LOG_LEVELS:
        raise ValueError("Invalid console log level")
    if file_level not in LOG_LEVELS:
        raise ValueError("Invalid file log level")

    root = logging.getLogger("")
    for handler in list(root.handlers):
        root.removeHandler(handler)

    # Set up logging to file
    if log_file is not None:
        logging.basicConfig(
            level=min(file_level, console_level),
            format="%(asctime)s %(name)-7s: %(levelname)-8s >> %(message)s",
            datefmt="%d-%m-%Y, %H:%M",
            filename=log_file,
            filemode="a",
        )
        root.handlers[0].setLevel(file_level)
    else:
        root.setLevel(console_level)

    # Define a Handler which writes messages of the console level or higher to the sys.stderr
    console = logging.StreamHandler()
    console.setLevel(console_level)
    formatter = logging.Formatter("%(name)-7s: %(levelname)-8s >> %(message)s")
    console.setFormatter(formatter)
    root.addHandler(console)


def parse_size(text: str) -> tuple[int, int]:
    """Parse an image size given as ``HxW``."""
    try:
        height, width = (int(v) for v in text.lower().split("x"))
    except ValueError as exc:
        raise ValueError(f"Invalid size '{text}', expected HxW") from exc
    if height < 1 or width < 1:
        raise ValueError(f"Invalid size '{text}', dims must be positive")
    return height, width


def read_signal_file(path: str | Path, height: int, width: int) -> EditSignal:
    """Read an editing signal, the format follows from the suffix (.pgm sketch, .ppm coarse edit, .txt drag)."""
    path = Path(path)
    match path.suffix.lower():
        case ".txt":
            return EditSignal.drag(read_drag_points(path, height, width))
        case ".pgm":
            return EditSignal.sketch(read_pnm(path))
        case ".ppm":
            return EditSignal.coarse(read_pnm(path))
    raise ValueError(f"Unknown signal file format: {path}")


def _strides(config: Config) -> list[int]:
    return [config.model.token_stride(level) for level in config.model.attention_levels]


def _with_image_size(config: Config, height: int, width: int) -> Config:
    return dataclasses.replace(
        config,
        data=dataclasses.replace(config.data, image_height=height, image_width=width),
        model=dataclasses.replace(config.model, image_height=height, image_width=width),
    )


def _load_source(path: str, model: EditingModel) -> np.ndarray:
    source = read_pnm(path)
    expected = (3, model.config.image_height, model.config.image_width)
    if source.shape != expected:
        raise ValueError(f"Source image {path} has shape {source.shape}, model expects {expected}")
    return source


def _load_signal(path: str, model: EditingModel) -> EditSignal:
    signal = read_signal_file(path, model.config.image_height, model.config.image_width)
    if signal.kind is not model.signal_type:
        raise ValueError(f"Checkpoint expects {model.signal_type.value} signals, {path} holds {signal.kind.value}")
    return signal


def cmd_gen_data(args: argparse.Namespace) -> int:
    """Generate a synthetic dataset."""
    config = load_config(args.config)
    if args.size is not None:
        config = _with_image_size(config, *parse_size(args.size))
    num_pairs = args.num_pairs if args.num_pairs is not None else config.data.num_pairs
    generate_dataset(args.out, num_pairs, SignalType(args.signal), _strides(config), config.data, args.seed)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    """Train a model for one signal type."""
    config = load_config(args.config)
    signal = SignalType(args.signal)
    pairs = load_dataset(args.data, signal)
    height, width = pairs[0].image_size
    config = _with_image_size(config, height, width)
    train = config.train
    if args.steps is not None:
        train = dataclasses.replace(train, steps=args.steps)
    if args.seed is not None:
        train = dataclasses.replace(train, seed=args.seed)

    model = EditingModel(config.model, signal, seed=train.seed)
    loss_log = args.loss_log or f"{args.ckpt_out}.loss.txt"
    summary = Trainer(model, pairs, train).run(log_path=loss_log, progress=not args.quiet)
    model.save(args.ckpt_out, summary.dict())
    log.info("Wrote checkpoint %s and loss log %s", args.ckpt_out, loss_log)
    return 0


def cmd_edit(args: argparse.Namespace) -> int:
    """Edit a source image with a trained model."""
    model = EditingModel.load(args.ckpt)
    source = _load_source(args.source, model)
    signal = _load_signal(args.signal_file, model)
    edited = euler_sample(model, source, signal, steps=args.steps, seed=args.seed)
    write_pnm(args.out, edited)
    log.info("Wrote edited image %s", args.out)
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    """Train (optionally) and evaluate the ablation arms."""
    config = load_config(args.config)
    signal = SignalType(args.signal)
    recon = {"on": [True], "off": [False], "both": [True, False]}[args.recon]
    arms = [AblationConfig(AttentionMode(mode), r) for mode in args.modes for r in recon]
    eval_pairs = load_dataset(args.eval_data, signal)
    if args.steps is not None:
        config = dataclasses.replace(config, train=dataclasses.replace(config.train, steps=args.steps))

    if args.train:
        if args.data is None:
            raise ValueError("--train requires --data")
        pairs = load_dataset(args.data, signal)
        config = _with_image_size(config, *pairs[0].image_size)
        for arm in arms:
            for seed in args.seeds:
                path = train_ablation_model(pairs, signal, config, arm, seed, args.ckpt_dir, progress=not args.quiet)
                log.info("Trained %s", path.name)

    table = run_ablation(args.ckpt_dir, eval_pairs, signal, arms, args.seeds, config.sample)
    csv_path, text_path = write_ablation_table(table, args.out)
    log.info("Wrote %s and %s\n%s", csv_path, text_path, table.to_string(index=False))
    return 0


def cmd_viz_attn(args: argparse.Namespace) -> int:
    """Export matching attention heatmaps of query tokens."""
    model = EditingModel.load(args.ckpt)
    source = _load_source(args.source, model)
    target = _load_source(args.target, model)
    signal = _load_signal(args.signal_file, model)

    schedule = NoiseSchedule()
    latents = encode_pair(source, target, model.config.patch_factor)
    eps = np.random.default_rng(args.seed).standard_normal(latents.stacked().shape)
    noisy = schedule.add_noise(latents, args.timestep, eps)
    _, records = model.predict_noise(noisy, args.timestep, source, signal)
    if not records:
        raise ValueError(f"Checkpoint {args.ckpt} uses {model.config.attention_mode.value} attention, no matching maps")
    by_layer = {record.layer_id: record for record in records}
    layer = args.layer or records[0].layer_id
    if layer not in by_layer:
        raise ValueError(f"Unknown layer {layer}, available: {', '.join(by_layer)}")
    record = by_layer[layer]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    size = (model.config.image_height, model.config.image_width)
    for query in args.queries:
        path = out / f"attn_{layer}_q{query}.pgm"
        export_attention_heatmap(record, query, size, path)
        if args.overlay:
            fig, _ = plot_attention_overlay(source, target, record, query)
            fig.savefig(out / f"attn_{layer}_q{query}.png", dpi=100)
            plt.close(fig)
    log.info("Wrote %d heatmaps of layer %s to %s", len(args.queries), layer, out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    """Construct the argument parser with one sub-command per operation."""
    parser = argparse.ArgumentParser(prog="pairedit", description=__doc__)
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"])
    parser.add_argument("--log-file", default=None, help="Append log messages to this file")
    commands = parser.add_subparsers(dest="command", required=True)
    signals = [kind.value for kind in SignalType]

    gen = commands.add_parser("gen-data", help="Generate synthetic sample pairs")
    gen.add_argument("--out", required=True)
    gen.add_argument("--num-pairs", type=int, default=None)
    gen.add_argument("--size", default=None, help="Image size HxW")
    gen.add_argument("--signal", required=True, choices=signals)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--config", default=None)
    gen.set_defaults(func=cmd_gen_data)

    train = commands.add_parser("train", help="Train a model for one signal type")
    train.add_argument("--data", required=True)
    train.add_argument("--config", default=None)
    train.add_argument("--signal", required=True, choices=signals)
    train.add_argument("--ckpt-out", required=True)
    train.add_argument("--steps", type=int, default=None)
    train.add_argument("--seed", type=int, default=None)
    train.add_argument("--loss-log", default=None, help="Loss log path, <ckpt-out>.loss.txt by default")
    train.add_argument("--quiet", action="store_true", help="Hide the progress bar")
    train.set_defaults(func=cmd_train)

    edit = commands.add_parser("edit", help="Edit an image with a trained model")
    edit.add_argument("--ckpt", required=True)
    edit.add_argument("--source", required=True)
    edit.add_argument("--signal-file", required=True)
    edit.add_argument("--out", required=True)
    edit.add_argument("--steps", type=int, default=DEFAULT_STEPS)
    edit.add_argument("--seed", type=int, default=0)
    edit.set_defaults(func=cmd_edit)

    ablate = commands.add_parser("ablate", help="Evaluate attention and reconstruction ablations")
    ablate.add_argument("--eval-data", required=True)
    ablate.add_argument("--ckpt-dir", required=True)
    ablate.add_argument("--signal", required=True, choices=signals)
    ablate.add_argument("--out", required=True)
    ablate.add_argument("--modes", nargs="+", default=[m.value for m in AttentionMode],
                        choices=[m.value for m in AttentionMode])
    ablate.add_argument("--recon", default="on", choices=["on", "off", "both"])
    ablate.add_argument("--seeds", nargs="+", type=int, default=[0, 1, 2])
    ablate.add_argument("--train", action="store_true", help="Train the arms before evaluation")
    ablate.add_argument("--data", default=None, help="Training data for --train")
    ablate.add_argument("--steps", type=int, default=None)
    ablate.add_argument("--config", default=None)
    ablate.add_argument("--quiet", action="store_true", help="Hide the progress bar")
    ablate.set_defaults(func=cmd_ablate)

    viz = commands.add_parser("viz-attn", help="Export matching attention heatmaps")
    viz.add_argument("--ckpt", required=True)
    viz.add_argument("--source", required=True)
    viz.add_argument("--target", required=True)
    viz.add_argument("--signal-file", required=True)
    viz.add_argument("--queries", nargs="+", type=int, required=True)
    viz.add_argument("--out", required=True)
    viz.add_argument("--layer", default=None, help="Attention site, the first one by default")
    viz.add_argument("--timestep", type=int, default=200)
    viz.add_argument("--seed", type=int, default=0)
    viz.add_argument("--overlay", action="store_true", help="Also write matplotlib overlays as PNG")
    viz.set_defaults(func=cmd_viz_attn)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Run the command line interface and return the exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(getattr(logging, args.log_level), args.log_file)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, OSError, RuntimeError) as exc:
        log.exception("%s failed: %s", args.command, exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
