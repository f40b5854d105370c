"""Deterministic euler sampler."""
import logging

import numpy as np

from pairedit.backbone.latent import decode_latent
from pairedit.backbone.model import EditingModel
from pairedit.diffusion.schedule import NoiseSchedule
from pairedit.interfaces.sample_pair import EditSignal
from pairedit.numerics.tensor import Tensor

log = logging.getLogger("Sampler")

DEFAULT_STEPS = 25


def sampling_timesteps(schedule: NoiseSchedule, steps: int) -> np.ndarray:
    """Integer noise steps from the last training step down to zero."""
    if steps < 1:
        raise ValueError(f"At least one sampling step required, got {steps}")
    return np.round(np.linspace(schedule.num_steps - 1, 0, steps)).astype(np.int64)


def euler_sample(
    model: EditingModel,
    source_image: np.ndarray,
    signal: EditSignal | None,
    steps: int = DEFAULT_STEPS,
    seed: int = 0,
    schedule: NoiseSchedule | None = None,
) -> np.ndarray:
    """Generate the edited image by first order integration of the probability flow.

    The pair is integrated in the rescaled space ``x = z / signal(t)`` whose noise level is
    ``sigma(t)``, where the noise prediction is the derivative ``dx / dsigma``. The source latent
    conditions every step through channel concatenation.

    Parameters
    ----------
    model
        Editing model
    source_image
        Source image [3, H, W] in [0, 1]
    signal
        Editing signal matching the model's signal type
    steps, optional
        Number of euler steps, by default 25
    seed, optional
        Seed of the initial noise, by default 0
    schedule, optional
        Noise schedule, cosine with 1000 steps by default

    Returns
    -------
        Edited target image [3, H, W] clipped to [0, 1]

    Raises
    ------
    ValueError
        Signal type mismatch or invalid step count.
    """
    if signal is not None and signal.kind is not model.signal_type:
        raise ValueError(f"Model trained for {model.signal_type.value} signals got a {signal.kind.value} signal")
    schedule = schedule or NoiseSchedule()
    timesteps = sampling_timesteps(schedule, steps)
    config = model.config
    shape = (2, config.latent_channels, config.image_height // config.patch_factor,
             config.image_width // config.patch_factor)

    rng = np.random.default_rng(seed)
    sigmas = [schedule.sigma(int(t)) for t in timesteps] + [0.0]
    x = sigmas[0] * rng.standard_normal(shape)
    for k, t in enumerate(timesteps):
        z = Tensor((x * schedule.signal(int(t))).astype(np.float32))
        eps_hat, _ = model.predict_noise(z, int(t), source_image, signal)
        x = x + (sigmas[k + 1] - sigmas[k]) * eps_hat.data.astype(np.float64)
        log.debug("step %d/%d, t=%d, sigma=%.4f", k + 1, len(timesteps), t, sigmas[k])
    return decode_latent(x[1].astype(np.float32), config.patch_factor)
