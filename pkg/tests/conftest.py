"""Test configuration file."""

from collections.abc import Callable

import numpy as np
import pytest

from pairedit.backbone.model import EditingModel
from pairedit.datagen.dataset import build_sample_pair
from pairedit.datagen.pairs import PairDecision
from pairedit.datagen.render import RenderedScene, render_scene
from pairedit.datagen.scene import SceneObject, SyntheticScene, Texture, affine_trajectory
from pairedit.interfaces.enums import AttentionMode, ShapeKind, SignalType
from pairedit.interfaces.parameters import BackboneConfig, DataParameter
from pairedit.interfaces.sample_pair import SamplePair


@pytest.fixture()
def rng() -> np.random.Generator:
    """Seeded random generator."""
    return np.random.default_rng(seed=0)


@pytest.fixture()
def tiny_config() -> Callable:
    """Construct a small backbone configuration using factory function.

    Arguments:
    attention_mode: AttentionMode, image_size: int

    Returns
    -------
        Two-level configuration with attention sites at both levels (token strides 2 and 4)
    """

    def _tiny_config(attention_mode: AttentionMode = AttentionMode.MATCHING, image_size: int = 16) -> BackboneConfig:
        return BackboneConfig(
            base_channels=8,
            channel_multipliers=[1, 2],
            attention_levels=[0, 1],
            head_count=2,
            attention_mode=attention_mode,
            patch_factor=2,
            embed_dim=8,
            image_height=image_size,
            image_width=image_size,
            group_count=2,
        )

    return _tiny_config


@pytest.fixture()
def tiny_model(tiny_config: Callable) -> Callable:
    """Construct a freshly initialized small editing model using factory function.

    Arguments:
    signal_type: SignalType, attention_mode: AttentionMode, seed: int
    """

    def _tiny_model(
        signal_type: SignalType = SignalType.SKETCH,
        attention_mode: AttentionMode = AttentionMode.MATCHING,
        seed: int = 0,
    ) -> EditingModel:
        return EditingModel(tiny_config(attention_mode), signal_type, seed=seed)

    return _tiny_model


@pytest.fixture()
def random_image() -> Callable:
    """Construct random images with values in [0, 1] using factory function.

    Arguments:
    channels: int, height: int, width: int
    """
    rng = np.random.default_rng(seed=0)

    def _random_image(channels: int = 3, height: int = 16, width: int = 16) -> np.ndarray:
        return rng.random(size=(channels, height, width)).astype(np.float32)

    return _random_image


@pytest.fixture()
def translated_rect_scene() -> Callable:
    """Render a scene with one textured rectangle under pure translation using factory function.

    Arguments:
    velocity: tuple[float, float], size: int, frame_count: int

    Returns
    -------
        Rendered scene of a rectangle of half extent 6 px starting at the canvas center
    """

    def _translated_rect_scene(
        velocity: tuple[float, float] = (1.0, 0.0), size: int = 32, frame_count: int = 8
    ) -> RenderedScene:
        rng = np.random.default_rng(seed=0)
        obj = SceneObject(
            shape=ShapeKind.RECT,
            size=(6.0, 6.0),
            texture=Texture.random(rng, cell=2.0, contrast=0.2),
            trajectory=affine_trajectory((size / 2, size / 2), velocity=velocity, frame_count=frame_count),
        )
        scene = SyntheticScene(size, size, Texture.random(rng, cell=4.0, contrast=0.15), [obj], frame_count)
        return render_scene(scene)

    return _translated_rect_scene


@pytest.fixture()
def small_data_parameter() -> DataParameter:
    """Data parameters for 16 x 16 scenes."""
    return DataParameter(image_height=16, image_width=16, frame_count=10, min_interval=2, tau_lo=0.8, max_speed=1.0)


@pytest.fixture()
def tiny_pair(translated_rect_scene: Callable) -> Callable:
    """Construct a 16 x 16 sample pair with token strides 2 and 4 using factory function.

    Arguments:
    kind: SignalType, seed: int
    """

    def _tiny_pair(kind: SignalType = SignalType.SKETCH, seed: int = 0) -> SamplePair:
        rendered = translated_rect_scene(velocity=(1.0, 0.5), size=16, frame_count=8)
        decision = PairDecision(True, 0, 4, 4.0)
        params = DataParameter(image_height=16, image_width=16)
        return build_sample_pair(rendered, decision, kind, [2, 4], np.random.default_rng(seed), params)

    return _tiny_pair
