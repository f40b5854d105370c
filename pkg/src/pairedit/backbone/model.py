"""Editing model bundling source embedder, denoiser and control encoder for one signal type."""
import logging
import os
from typing import Any

import numpy as np
import yaml

from pairedit.attention.attention import AttentionRecord
from pairedit.backbone.embedder import ImageEmbedder, embed_source
from pairedit.backbone.latent import encode_image
from pairedit.backbone.unet import Denoiser
from pairedit.control.encoder import ControlEncoder
from pairedit.interfaces.enums import SignalType
from pairedit.interfaces.parameters import BackboneConfig
from pairedit.interfaces.sample_pair import EditSignal
from pairedit.numerics.modules import Module
from pairedit.numerics.tensor import Param, Tensor
from pairedit.utilities.atomic import atomic_write
from pairedit.utilities.binary_formats import load_checkpoint, save_checkpoint
from pairedit.utilities.load_config import ConfigError

log = logging.getLogger("Model")


class EditingModel(Module):
    """Two-frame editing model trained for a single editing signal type.

    Parameter names are dotted attribute paths (e.g. ``denoiser.down_sites.1.interaction.w_q``)
    and stable across save and load.
    """

    def __init__(self, config: BackboneConfig, signal_type: SignalType, seed: int = 0):
        """Construct a freshly initialized model.

        Parameters
        ----------
        config
            Backbone architecture
        signal_type
            Editing signal the model consumes
        seed, optional
            Seed of the parameter initialization, by default 0
        """
        self.config = config
        self.signal_type = SignalType(signal_type)
        rng = np.random.default_rng(seed)
        self.embedder = ImageEmbedder(config.patch_factor, config.embed_dim, rng)
        self.denoiser = Denoiser(config, rng)
        self.control = ControlEncoder(self.signal_type.channels, config, rng) if self.signal_type.is_raster else None
        self.state()
        log.debug("Model for %s signals with %d parameters", self.signal_type.value, self.parameter_count)

    def predict_noise(
        self,
        noisy: Tensor,
        t: float,
        source_image: np.ndarray,
        signal: EditSignal | None,
    ) -> tuple[Tensor, list[AttentionRecord]]:
        """Predict the noise of both frames.

        Parameters
        ----------
        noisy
            Noisy latents of source and target, shape [2, C_lat, h, w]
        t
            Noise step
        source_image
            Clean source image, shape [3, H, W]
        signal
            Editing signal, None for the unconditioned model

        Returns
        -------
            Predicted noise and matching attention records

        Raises
        ------
        ValueError
            Signal type differs from the model's signal type.
        """
        if signal is not None and signal.kind is not self.signal_type:
            raise ValueError(f"Model trained for {self.signal_type.value} signals got a {signal.kind.value} signal")
        embedding = embed_source(self.embedder, source_image)
        source_latent = encode_image(source_image, self.config.patch_factor)
        control = None
        drag_points = None
        if signal is not None and self.control is not None:
            control = self.control.encode_signal(signal.raster)  # type: ignore
        elif signal is not None:
            drag_points = signal.points
        return self.denoiser(noisy, t, source_latent, embedding, control, drag_points)

    def arrays(self) -> dict[str, np.ndarray]:
        """Return a copy of all parameter values keyed by name."""
        return {name: param.data.copy() for name, param in self.state().items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        """Assign parameter values by name.

        Raises
        ------
        ValueError
            Missing or unexpected parameter names or shapes.
        """
        params: dict[str, Param] = self.state()
        missing = sorted(set(params) - set(arrays))
        unexpected = sorted(set(arrays) - set(params))
        if missing or unexpected:
            raise ValueError(f"Parameter mismatch, missing: {missing[:5]}, unexpected: {unexpected[:5]}")
        for name, param in params.items():
            param.assign(arrays[name])
            param.zero_grad()

    def save(self, path: str | os.PathLike, summary: dict[str, Any] | None = None) -> None:
        """Write the checkpoint and its ``<path>.yaml`` sidecar with configuration and signal type."""
        save_checkpoint(path, self.arrays())
        sidecar = {
            "signal_type": self.signal_type.value,
            "model": self.config.dict(),
            "summary": summary or {},
        }
        with atomic_write(f"{os.fspath(path)}.yaml", "w") as file:
            yaml.safe_dump(sidecar, file, sort_keys=False)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "EditingModel":
        """Load a model written by ``save``.

        Raises
        ------
        FileNotFoundError
            Checkpoint or sidecar missing.
        ConfigError
            Sidecar invalid.
        """
        sidecar_path = f"{os.fspath(path)}.yaml"
        if not os.path.exists(sidecar_path):
            raise FileNotFoundError(f"Checkpoint sidecar not found: {sidecar_path}")
        arrays = load_checkpoint(path)
        with open(sidecar_path, encoding="utf-8") as file:
            sidecar = yaml.safe_load(file)
        try:
            config = BackboneConfig(**sidecar["model"])
            signal_type = SignalType(sidecar["signal_type"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"Invalid checkpoint sidecar {sidecar_path}: {exc}") from exc
        model = cls(config, signal_type)
        model.load_arrays(arrays)
        log.info("Loaded %s model (%s attention) from %s", signal_type.value, config.attention_mode.value, path)
        return model

    @staticmethod
    def read_summary(path: str | os.PathLike) -> dict[str, Any]:
        """Return the training summary stored in the sidecar of a checkpoint."""
        with open(f"{os.fspath(path)}.yaml", encoding="utf-8") as file:
            return yaml.safe_load(file).get("summary", {})
