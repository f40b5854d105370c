"""Test the frame pair filter."""
import numpy as np
import pytest

from pairedit.datagen.pairs import check_pair, find_training_pair, moving_magnitude
from pairedit.interfaces.enums import FlowDirection
from pairedit.interfaces.parameters import DataParameter
from pairedit.interfaces.sample_pair import FlowField


def _constant_flow(dx: float, dy: float, size: int = 8) -> FlowField:
    displacement = np.stack([np.full((size, size), dx), np.full((size, size), dy)])
    return FlowField(displacement, FlowDirection.TARGET_TO_SOURCE, np.ones((size, size), dtype=bool))


def test_moving_magnitude():
    """Only pixels moving by more than half a pixel count."""
    flow = _constant_flow(3.0, 4.0)
    flow.displacement[:, :4] = 0.2
    assert moving_magnitude(flow) == pytest.approx(5.0)
    assert moving_magnitude(_constant_flow(0.1, 0.1)) == 0.0


@pytest.mark.parametrize(
    "target_index, tau_lo, tau_hi, reason",
    [
        (6, 2.0, 8.0, ""),
        (5, 2.0, 8.0, "interval"),
        (6, 6.0, 8.0, "below"),
        (6, 2.0, 4.0, "above"),
    ],
)
def test_check_pair(target_index, tau_lo, tau_hi, reason):
    """Pairs are accepted iff interval and flow magnitude are in range."""
    decision = check_pair(0, target_index, _constant_flow(3.0, 4.0), tau_lo, tau_hi, min_interval=5)
    assert decision.accepted == (reason == "")
    assert reason in decision.reason
    assert decision.mean_magnitude == pytest.approx(5.0)


def test_backward_pairs_count_interval():
    """The interval is symmetric in the frame order."""
    decision = check_pair(9, 2, _constant_flow(3.0, 0.0), 1.0, 8.0, min_interval=5)
    assert decision.interval == 7 and decision.accepted


def test_find_training_pair(small_data_parameter):
    """Accepted pairs satisfy the filter and are reproducible."""
    rendered, decision = find_training_pair(np.random.default_rng(3), small_data_parameter)
    assert decision.accepted
    assert decision.interval > small_data_parameter.min_interval
    assert small_data_parameter.tau_lo <= decision.mean_magnitude <= small_data_parameter.flow_upper_bound
    _, again = find_training_pair(np.random.default_rng(3), small_data_parameter)
    assert (again.source_index, again.target_index) == (decision.source_index, decision.target_index)
    assert rendered.frames.shape[2:] == (16, 16)


def test_no_pair_found():
    """Generation gives up after the attempt budget."""
    params = DataParameter(image_height=16, image_width=16, tau_lo=100.0, scene_attempts=2, pair_attempts=2)
    with pytest.raises(RuntimeError, match="2 scenes"):
        find_training_pair(np.random.default_rng(0), params)


# >> Rendered scenes through the filter (32 x 32 canvas, tau_hi = W / 4 = 8 px, frames 0 -> 7)


@pytest.mark.parametrize(
    "shift, reason",
    [
        (0.0, "below"),
        (5.0, ""),
        (8.75, "above"),
        (80.0, "below"),
    ],
)
def test_rendered_translation_filter(shift, reason, translated_rect_scene):
    """Static pairs and objects leaving the canvas are rejected, in-canvas shifts are judged by magnitude."""
    rendered = translated_rect_scene(velocity=(shift / 7, 0.0), size=32, frame_count=8)
    flow = rendered.flow(0, 7, FlowDirection.TARGET_TO_SOURCE)
    decision = check_pair(0, 7, flow, tau_lo=2.0, tau_hi=8.0, min_interval=5)
    assert decision.accepted == (reason == "")
    assert reason in decision.reason
    if 0.0 < shift < 32.0:
        assert decision.mean_magnitude == pytest.approx(shift)
