"""Selection of source and target frames by frame interval and flow magnitude."""
import logging
from dataclasses import dataclass

import numpy as np

from pairedit.datagen.render import RenderedScene, render_scene
from pairedit.datagen.scene import random_scene
from pairedit.interfaces.enums import FlowDirection
from pairedit.interfaces.parameters import DataParameter
from pairedit.interfaces.sample_pair import FlowField

log = logging.getLogger("DataGen")

MOVING_THRESHOLD = 0.5
"""Flow magnitude in pixels above which a pixel counts as moving."""


@dataclass
class PairDecision:
    """Outcome of the pair filter, rejection is a value and not an error."""

    accepted: bool
    source_index: int
    target_index: int
    mean_magnitude: float
    """Mean flow magnitude over moving pixels, 0 without moving pixels."""

    reason: str = ""
    """Rejection reason, empty for accepted pairs."""

    @property
    def interval(self) -> int:
        """Frame gap between source and target."""
        return abs(self.target_index - self.source_index)


def moving_magnitude(flow: FlowField) -> float:
    """Mean flow magnitude over valid pixels which move by more than half a pixel."""
    magnitude = flow.magnitude[flow.valid]
    moving = magnitude[magnitude > MOVING_THRESHOLD]
    return float(moving.mean()) if moving.size else 0.0


def check_pair(
    source_index: int,
    target_index: int,
    flow: FlowField,
    tau_lo: float,
    tau_hi: float,
    min_interval: int,
) -> PairDecision:
    """Accept iff the interval exceeds ``min_interval`` and the moving flow magnitude is in [tau_lo, tau_hi]."""
    magnitude = moving_magnitude(flow)
    decision = PairDecision(True, source_index, target_index, magnitude)
    if decision.interval <= min_interval:
        decision.accepted, decision.reason = False, f"interval {decision.interval} <= {min_interval}"
    elif magnitude < tau_lo:
        decision.accepted, decision.reason = False, f"flow magnitude {magnitude:.2f} below {tau_lo}"
    elif magnitude > tau_hi:
        decision.accepted, decision.reason = False, f"flow magnitude {magnitude:.2f} above {tau_hi}"
    return decision


def sample_pair(rendered: RenderedScene, rng: np.random.Generator, params: DataParameter) -> PairDecision:
    """Draw a random ordered frame pair of a rendered scene and run the filter on it."""
    source_index, target_index = (int(k) for k in rng.integers(rendered.frame_count, size=2))
    flow = rendered.flow(source_index, target_index, FlowDirection.TARGET_TO_SOURCE)
    return check_pair(
        source_index, target_index, flow, params.tau_lo, params.flow_upper_bound, params.min_interval
    )


def find_training_pair(rng: np.random.Generator, params: DataParameter) -> tuple[RenderedScene, PairDecision]:
    """Draw scenes and frame pairs until a pair passes the filter.

    Raises
    ------
    RuntimeError
        No pair accepted within the scene and pair attempt budget.
    """
    for scene_attempt in range(params.scene_attempts):
        rendered = render_scene(random_scene(rng, params))
        for _ in range(params.pair_attempts):
            decision = sample_pair(rendered, rng, params)
            if decision.accepted:
                return rendered, decision
            log.debug("Rejected frames %d -> %d: %s", decision.source_index, decision.target_index, decision.reason)
        log.debug("Scene %d yielded no pair, drawing a new scene", scene_attempt)
    raise RuntimeError(f"No frame pair accepted within {params.scene_attempts} scenes")
