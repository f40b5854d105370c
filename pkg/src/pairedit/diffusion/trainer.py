"""Training loop of the editing model."""
import logging
import os
from collections.abc import Sequence
from dataclasses import asdict, dataclass
from typing import IO, Any

import numpy as np
from tqdm import tqdm

from pairedit.backbone.latent import encode_pair
from pairedit.backbone.model import EditingModel
from pairedit.diffusion.losses import LossReport, combined_loss, diffusion_loss, matching_loss
from pairedit.diffusion.schedule import NoiseSchedule
from pairedit.interfaces.parameters import TrainParameter
from pairedit.interfaces.sample_pair import SamplePair
from pairedit.numerics.optim import AdamW
from pairedit.numerics.tensor import Tensor
from pairedit.utilities.atomic import atomic_write

log = logging.getLogger("Trainer")


@dataclass
class TrainingSummary:
    """Outcome of a training run, stored in the checkpoint sidecar."""

    steps: int
    lambda_match: float
    reconstruct_source: bool
    seed: int
    initial_loss: float
    """Mean total loss over the first 10% of steps."""

    final_loss: float
    """Mean total loss over the last 10% of steps."""

    def dict(self) -> dict[str, Any]:
        """Return the summary as dictionary."""
        return asdict(self)


def loss_log_header(lambda_match: float) -> str:
    """Header line of the loss log."""
    return f"# step l_diff l_match l_total lambda_match={lambda_match}"


def format_loss_line(step: int, report: LossReport) -> str:
    """Format one line of the loss log."""
    return f"{step} {report.l_diff:.8e} {report.l_match:.8e} {report.l_total:.8e}"


class Trainer:
    """Optimizes an editing model on sample pairs of its signal type.

    Every step draws ``batch_size`` pairs, noise steps and noise from one generator seeded by the
    training seed, accumulates their gradients and applies a single AdamW update.
    """

    def __init__(
        self,
        model: EditingModel,
        pairs: Sequence[SamplePair],
        params: TrainParameter | None = None,
        schedule: NoiseSchedule | None = None,
    ):
        """Construct the trainer.

        Raises
        ------
        ValueError
            No pairs or pairs of another signal type than the model's.
        """
        if not pairs:
            raise ValueError("Training requires at least one sample pair")
        kinds = {pair.signal.kind for pair in pairs}
        if kinds != {model.signal_type}:
            names = sorted(kind.value for kind in kinds)
            raise ValueError(f"Model for {model.signal_type.value} signals cannot train on {names} pairs")
        self.model = model
        self.pairs = list(pairs)
        self.params = params or TrainParameter()
        self.schedule = schedule or NoiseSchedule()
        self.optimizer = AdamW(model.state(), lr=self.params.learning_rate, weight_decay=self.params.weight_decay)
        self.rng = np.random.default_rng(self.params.seed)
        self.history: list[LossReport] = []

    def compute_loss(self, pair: SamplePair, t: int, eps: np.ndarray) -> LossReport:
        """Forward one pair at noise step ``t`` and return its losses with a differentiable objective."""
        latents = encode_pair(pair.source, pair.target, self.model.config.patch_factor)
        noisy = self.schedule.add_noise(latents, t, eps)
        eps_hat, records = self.model.predict_noise(noisy, t, pair.source, pair.signal)
        l_diff = diffusion_loss(eps_hat, eps, self.params.reconstruct_source)
        l_match = matching_loss(records, pair.correspondences)
        return combined_loss(l_diff, l_match, self.params.lambda_match)

    def step(self) -> LossReport:
        """Run one optimizer step and return the losses averaged over the accumulated pairs."""
        config = self.model.config
        shape = (2, config.latent_channels, config.image_height // config.patch_factor,
                 config.image_width // config.patch_factor)
        self.optimizer.zero_grad()
        reports = []
        for _ in range(self.params.batch_size):
            pair = self.pairs[int(self.rng.integers(len(self.pairs)))]
            t = int(self.rng.integers(self.schedule.num_steps))
            eps = self.rng.standard_normal(shape).astype(np.float32)
            report = self.compute_loss(pair, t, eps)
            report.objective.backward()
            reports.append(report)
        self.optimizer.step(grad_scale=1.0 / len(reports))

        l_diff = float(np.mean([r.l_diff for r in reports]))
        l_match = float(np.mean([r.l_match for r in reports]))
        l_total = float(np.mean([r.l_total for r in reports]))
        report = LossReport(l_diff, l_match, l_total, self.params.lambda_match, Tensor(np.float32(l_total)))
        self.history.append(report)
        return report

    def run(
        self,
        steps: int | None = None,
        log_path: str | os.PathLike | None = None,
        progress: bool = True,
    ) -> TrainingSummary:
        """Train for ``steps`` steps, by default the configured number.

        Parameters
        ----------
        steps, optional
            Number of optimizer steps
        log_path, optional
            Loss log destination, renamed into place when training completes
        progress, optional
            Show a progress bar, by default True

        Returns
        -------
            Summary of the run
        """
        steps = self.params.steps if steps is None else steps
        if steps < 1:
            raise ValueError(f"At least one training step required, got {steps}")
        log.info(
            "Training %s model (%s attention) for %d steps on %d pairs",
            self.model.signal_type.value, self.model.config.attention_mode.value, steps, len(self.pairs),
        )
        if log_path is None:
            self._loop(steps, None, progress)
        else:
            with atomic_write(log_path, "w") as file:
                file.write(loss_log_header(self.params.lambda_match) + "\n")
                self._loop(steps, file, progress)

        totals = np.array([r.l_total for r in self.history[-steps:]])
        window = max(1, steps // 10)
        summary = TrainingSummary(
            steps=steps,
            lambda_match=self.params.lambda_match,
            reconstruct_source=self.params.reconstruct_source,
            seed=self.params.seed,
            initial_loss=float(totals[:window].mean()),
            final_loss=float(totals[-window:].mean()),
        )
        log.info("Mean loss %.5f over the first and %.5f over the last %d steps",
                 summary.initial_loss, summary.final_loss, window)
        return summary

    def _loop(self, steps: int, file: IO[str] | None, progress: bool) -> None:
        start = self.optimizer.step_count
        with tqdm(range(start + 1, start + steps + 1), desc="train", disable=not progress) as bar:
            for step in bar:
                report = self.step()
                if file is not None:
                    file.write(format_loss_line(step, report) + "\n")
                bar.set_postfix(loss=f"{report.l_total:.4f}")
                log.debug("step %d: l_diff=%.5f l_match=%.5f", step, report.l_diff, report.l_match)
