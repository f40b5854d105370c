"""Test the euler sampler."""
import numpy as np
import pytest

from pairedit.diffusion.sampler import euler_sample, sampling_timesteps
from pairedit.diffusion.schedule import NoiseSchedule
from pairedit.interfaces.enums import SignalType
from pairedit.interfaces.sample_pair import EditSignal


def test_sampling_timesteps():
    """Steps run from the last training step down to zero."""
    timesteps = sampling_timesteps(NoiseSchedule(), 25)
    assert len(timesteps) == 25
    assert timesteps[0] == 999 and timesteps[-1] == 0
    assert np.all(np.diff(timesteps) < 0)
    np.testing.assert_array_equal(sampling_timesteps(NoiseSchedule(), 1), [999])
    with pytest.raises(ValueError):
        sampling_timesteps(NoiseSchedule(), 0)


def test_sample_shape_and_range(tiny_model, random_image):
    """Samples are images of the configured size in [0, 1]."""
    model = tiny_model(SignalType.SKETCH)
    signal = EditSignal.sketch((random_image(1) > 0.7).astype(np.float32))
    image = euler_sample(model, random_image(), signal, steps=3)
    assert image.shape == (3, 16, 16)
    assert image.min() >= 0 and image.max() <= 1


def test_sample_deterministic(tiny_model, random_image):
    """Identical seeds reproduce samples, other seeds change them."""
    model = tiny_model(SignalType.COARSE)
    source = random_image()
    signal = EditSignal.coarse(random_image())
    first = euler_sample(model, source, signal, steps=3, seed=1)
    second = euler_sample(model, source, signal, steps=3, seed=1)
    other = euler_sample(model, source, signal, steps=3, seed=2)
    np.testing.assert_array_equal(first, second)
    assert not np.array_equal(first, other)


def test_sample_signal_mismatch(tiny_model, random_image):
    """The signal must be of the model's signal type."""
    model = tiny_model(SignalType.DRAG)
    with pytest.raises(ValueError, match="drag"):
        euler_sample(model, random_image(), EditSignal.sketch(np.zeros((1, 16, 16), dtype=np.float32)), steps=2)
