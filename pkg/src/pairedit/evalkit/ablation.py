"""Evaluation of trained models and the attention / reconstruction ablation."""
import dataclasses
import hashlib
import json
import logging
import math
import os
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from pairedit.backbone.latent import encode_pair
from pairedit.backbone.model import EditingModel
from pairedit.diffusion.sampler import euler_sample
from pairedit.diffusion.schedule import NoiseSchedule
from pairedit.diffusion.trainer import Trainer
from pairedit.evalkit.matching import record_hits
from pairedit.evalkit.ssim import ssim
from pairedit.interfaces.enums import AttentionMode, SignalType
from pairedit.interfaces.parameters import Config, SampleParameter
from pairedit.interfaces.sample_pair import SamplePair, correspondence_for_grid
from pairedit.utilities.atomic import atomic_write
from pairedit.utilities.json_encoder import JSONEncoder

log = logging.getLogger("Ablation")

TABLE_COLUMNS = [
    "config", "attention_mode", "reconstruct_source", "seed", "mean_ssim", "matching_accuracy", "matching_count",
]
MEAN_SEED = "mean"
"""Seed label of the cross-seed mean rows."""


@dataclass(frozen=True)
class AblationConfig:
    """One arm of the ablation."""

    attention_mode: AttentionMode
    reconstruct_source: bool = True

    def __post_init__(self) -> None:
        """Normalize the attention mode."""
        object.__setattr__(self, "attention_mode", AttentionMode(self.attention_mode))

    @property
    def name(self) -> str:
        """Label used in tables and checkpoint names, e.g. ``matching_recon``."""
        return f"{self.attention_mode.value}_{'recon' if self.reconstruct_source else 'norecon'}"


def default_ablation_configs() -> list[AblationConfig]:
    """All attention modes with source reconstruction plus matching attention without it."""
    configs = [AblationConfig(mode) for mode in AttentionMode]
    return [*configs, AblationConfig(AttentionMode.MATCHING, reconstruct_source=False)]


def checkpoint_name(signal: SignalType, config: AblationConfig, seed: int) -> str:
    """File name of the checkpoint of one ablation run."""
    return f"{SignalType(signal).value}_{config.name}_seed{seed}.fpck"


@dataclass
class EvalReport:
    """Edit quality and matching accuracy of one model on an evaluation set."""

    config: str
    fingerprint: str
    """Short hash of the model configuration."""

    seeds: list[int]
    ssim: list[float] = field(default_factory=list)
    """SSIM of every edited image against its target."""

    mean_ssim: float = math.nan
    matching_accuracy: float = math.nan
    """Argmax accuracy over visible target tokens, NaN without matching records."""

    matching_count: int = 0
    """Visible target tokens the accuracy was measured on."""

    def to_json(self, path: str | os.PathLike | None = None) -> str:
        """Serialize the report, optionally writing it to ``path``."""
        text = json.dumps(self, cls=JSONEncoder, indent=2)
        if path is not None:
            with atomic_write(path, "w") as file:
                file.write(text + "\n")
        return text

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        """Parse a serialized report."""
        values = json.loads(text)
        return cls(**{f.name: values[f.name] for f in dataclasses.fields(cls)})


def config_fingerprint(model: EditingModel) -> str:
    """Short stable hash of a model's signal type and configuration."""
    payload = json.dumps({"signal": model.signal_type.value, **model.config.dict()}, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


def evaluate_model(
    model: EditingModel,
    pairs: Sequence[SamplePair],
    sample: SampleParameter | None = None,
    name: str = "",
    schedule: NoiseSchedule | None = None,
) -> EvalReport:
    """Edit every evaluation pair and measure SSIM and matching accuracy.

    Pair ``i`` is sampled with seed ``sample.seed + i``. Matching accuracy is pooled per attention
    site over all pairs from one denoiser pass at ``sample.eval_timestep`` and averaged over sites.
    """
    sample = sample or SampleParameter()
    schedule = schedule or NoiseSchedule()
    config = model.config
    scores = []
    hits: dict[str, list[int]] = {}
    for index, pair in enumerate(pairs):
        edited = euler_sample(model, pair.source, pair.signal, sample.steps, sample.seed + index, schedule)
        scores.append(ssim(edited, pair.target))

        latents = encode_pair(pair.source, pair.target, config.patch_factor)
        eps = np.random.default_rng([sample.seed, index]).standard_normal(latents.stacked().shape)
        noisy = schedule.add_noise(latents, sample.eval_timestep, eps)
        _, records = model.predict_noise(noisy, sample.eval_timestep, pair.source, pair.signal)
        for record in records:
            corr = correspondence_for_grid(pair.correspondences, record.height_tokens, record.width_tokens)
            correct, visible = record_hits(record, corr)
            counts = hits.setdefault(record.layer_id, [0, 0])
            counts[0] += correct
            counts[1] += visible

    per_site = [correct / visible for correct, visible in hits.values() if visible]
    report = EvalReport(
        config=name or config.attention_mode.value,
        fingerprint=config_fingerprint(model),
        seeds=[sample.seed + index for index in range(len(pairs))],
        ssim=scores,
        mean_ssim=math.fsum(scores) / len(scores) if scores else math.nan,
        matching_accuracy=math.fsum(per_site) / len(per_site) if per_site else math.nan,
        matching_count=sum(visible for _, visible in hits.values()),
    )
    log.info("%s: mean SSIM %.4f, matching accuracy %.4f on %d tokens",
             report.config, report.mean_ssim, report.matching_accuracy, report.matching_count)
    return report


def train_ablation_model(
    pairs: Sequence[SamplePair],
    signal: SignalType,
    config: Config,
    arm: AblationConfig,
    seed: int,
    checkpoint_dir: str | os.PathLike,
    progress: bool = False,
) -> Path:
    """Train one ablation arm with identical data and steps and write its checkpoint and loss log."""
    model_config = dataclasses.replace(config.model, attention_mode=arm.attention_mode)
    train = dataclasses.replace(config.train, reconstruct_source=arm.reconstruct_source, seed=seed)
    model = EditingModel(model_config, signal, seed=seed)
    path = Path(checkpoint_dir) / checkpoint_name(signal, arm, seed)
    summary = Trainer(model, pairs, train).run(log_path=path.with_suffix(".loss.txt"), progress=progress)
    model.save(path, summary.dict())
    return path


def run_ablation(
    checkpoint_dir: str | os.PathLike,
    pairs: Sequence[SamplePair],
    signal: SignalType,
    configs: Sequence[AblationConfig],
    seeds: Sequence[int],
    sample: SampleParameter | None = None,
) -> pd.DataFrame:
    """Evaluate every (config, seed) checkpoint and tabulate per-seed rows followed by one mean row per config.

    Raises
    ------
    FileNotFoundError
        Checkpoint of a config and seed missing, naming the config.
    """
    checkpoint_dir = Path(checkpoint_dir)
    paths = {}
    for arm in configs:
        for seed in seeds:
            path = checkpoint_dir / checkpoint_name(signal, arm, seed)
            if not path.exists():
                raise FileNotFoundError(f"Missing checkpoint of config {arm.name} with seed {seed}: {path}")
            paths[arm, seed] = path

    rows = []
    for (arm, seed), path in paths.items():
        report = evaluate_model(EditingModel.load(path), pairs, sample, name=arm.name)
        rows.append({
            "config": arm.name,
            "attention_mode": arm.attention_mode.value,
            "reconstruct_source": arm.reconstruct_source,
            "seed": str(seed),
            "mean_ssim": report.mean_ssim,
            "matching_accuracy": report.matching_accuracy,
            "matching_count": report.matching_count,
        })
    per_seed = pd.DataFrame(rows, columns=TABLE_COLUMNS)
    means = (
        per_seed.groupby(["config", "attention_mode", "reconstruct_source"], sort=False)
        .agg(mean_ssim=("mean_ssim", "mean"), matching_accuracy=("matching_accuracy", "mean"),
             matching_count=("matching_count", "sum"))
        .reset_index()
        .assign(seed=MEAN_SEED)
    )
    table = pd.concat([per_seed, means[TABLE_COLUMNS]], ignore_index=True)
    log.info("Ablation over %d configs and %d seeds done", len(configs), len(seeds))
    return table


def write_ablation_table(table: pd.DataFrame, out_dir: str | os.PathLike, stem: str = "ablation") -> tuple[Path, Path]:
    """Write the table as CSV and as fixed-width text.

    Returns
    -------
        Paths of the CSV and the text file
    """
    out_dir = Path(out_dir)
    csv_path, text_path = out_dir / f"{stem}.csv", out_dir / f"{stem}.txt"
    with atomic_write(csv_path, "w") as file:
        table.to_csv(file, index=False, lineterminator="\n")
    with atomic_write(text_path, "w") as file:
        file.write(table.to_string(index=False, float_format=lambda v: f"{v:.4f}") + "\n")
    return csv_path, text_path


def read_ablation_table(path: str | os.PathLike) -> pd.DataFrame:
    """Read a table written by ``write_ablation_table``, floats are restored exactly."""
    return pd.read_csv(path, dtype={"seed": str, "config": str, "attention_mode": str}, float_precision="round_trip")
