"""Cosine noise schedule and the forward noising process."""
from dataclasses import dataclass, field

import numpy as np

from pairedit.backbone.latent import LatentPair
from pairedit.numerics.tensor import ShapeError, Tensor, as_tensor


@dataclass
class NoiseSchedule:
    """Cosine cumulative signal schedule over ``num_steps`` training steps.

    ``alpha_bar[t] = f(t) / f(0)`` with ``f(t) = cos(((t / T + s) / (1 + s)) * pi / 2) ** 2``,
    so step 0 is noise free and the signal coefficient decreases strictly.
    """

    num_steps: int = 1000
    offset: float = 0.008
    alpha_bar: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        """Tabulate the cumulative signal coefficients."""
        if self.num_steps < 2:
            raise ValueError("Noise schedule needs at least two steps")
        steps = np.arange(self.num_steps, dtype=np.float64)
        f = np.cos(((steps / self.num_steps + self.offset) / (1 + self.offset)) * np.pi / 2) ** 2
        self.alpha_bar = f / f[0]

    def _check(self, t: int) -> int:
        if not 0 <= int(t) < self.num_steps or int(t) != t:
            raise ValueError(f"Noise step {t} outside of [0, {self.num_steps})")
        return int(t)

    def signal(self, t: int) -> float:
        """Signal coefficient ``sqrt(alpha_bar[t])``."""
        return float(np.sqrt(self.alpha_bar[self._check(t)]))

    def noise(self, t: int) -> float:
        """Noise coefficient ``sqrt(1 - alpha_bar[t])``."""
        return float(np.sqrt(1.0 - self.alpha_bar[self._check(t)]))

    def sigma(self, t: int) -> float:
        """Noise to signal ratio, the noise level of the rescaled latent ``z_t / signal(t)``."""
        return self.noise(t) / self.signal(t)

    def add_noise(self, z0: Tensor | LatentPair | np.ndarray, t: int, eps: np.ndarray) -> Tensor:
        """Return ``signal(t) * z0 + noise(t) * eps``, applied identically to both frames.

        Raises
        ------
        ValueError
            Step out of range.
        ShapeError
            Noise shape differs from the latent shape.
        """
        clean = z0.stacked() if isinstance(z0, LatentPair) else as_tensor(z0)
        eps = np.asarray(eps, dtype=clean.dtype)
        if eps.shape != clean.shape:
            raise ShapeError("add_noise", f"noise {eps.shape} differs from latent {clean.shape}")
        a, b = self.signal(t), self.noise(t)
        return Tensor((a * clean.data + b * eps).astype(clean.dtype))
