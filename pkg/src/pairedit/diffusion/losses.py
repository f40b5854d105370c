"""Diffusion, matching and combined training objectives."""
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from pairedit.attention.attention import AttentionRecord
from pairedit.interfaces.sample_pair import Correspondence, correspondence_for_grid
from pairedit.numerics import functional as F
from pairedit.numerics.tensor import ShapeError, Tensor, as_tensor


@dataclass
class LossReport:
    """Loss components of one step, ``l_total = l_diff + lambda_match * l_match``."""

    l_diff: float
    l_match: float
    l_total: float
    lambda_match: float
    objective: Tensor
    """Differentiable total loss."""


def diffusion_loss(eps_hat: Tensor, eps: Tensor | np.ndarray, reconstruct_source: bool = True) -> Tensor:
    """Squared noise prediction error of a [2, ...] frame pair.

    The sum of squared errors is divided by the element count of both frames in either mode;
    without source reconstruction the source frame is weighted zero.

    Raises
    ------
    ShapeError
        Shapes differ or the leading axis is not the two-frame axis.
    """
    target = as_tensor(eps, dtype=eps_hat.dtype)
    if eps_hat.shape != target.shape or eps_hat.ndim < 1 or eps_hat.shape[0] != 2:
        raise ShapeError("diffusion_loss", f"expected equal [2, ...] shapes, got {eps_hat.shape} and {target.shape}")
    weight = np.full(eps_hat.shape, 1.0 / eps_hat.data.size, dtype=eps_hat.dtype)
    if not reconstruct_source:
        weight[0] = 0.0
    return F.masked_squared_error(eps_hat, target, weight)


def _record_loss(record: AttentionRecord, correspondence: Correspondence) -> Tensor:
    mask = correspondence.mask
    weight = np.repeat(mask[:, None], correspondence.num_tokens, axis=1) / max(1.0, float(mask.sum()))
    return F.masked_squared_error(record.a_match, correspondence.matrix.astype(record.a_match.dtype), weight)


def matching_loss(
    records: Sequence[AttentionRecord],
    correspondences: Mapping[int, Correspondence] | Sequence[Correspondence],
) -> Tensor:
    """Masked squared error between matching attention maps and correspondence matrices.

    Per record ``sum_ij m_i (A_ij - C_ij)**2 / max(1, sum_i m_i)``, averaged over records.
    Zero without records.

    Raises
    ------
    ValueError
        No correspondence at the token resolution of a record.
    """
    lookup = correspondences if isinstance(correspondences, Mapping) else dict(enumerate(correspondences))
    if not records:
        return Tensor(np.zeros((), dtype=np.float32))
    losses = [
        _record_loss(record, correspondence_for_grid(lookup, record.height_tokens, record.width_tokens))
        for record in records
    ]
    total = losses[0]
    for loss in losses[1:]:
        total = F.add(total, loss)
    return F.scale(total, 1.0 / len(losses))


def combined_loss(l_diff: Tensor | float, l_match: Tensor | float, lambda_match: float = 1.0) -> LossReport:
    """Combine the objectives as ``l_diff + lambda_match * l_match``.

    Raises
    ------
    FloatingPointError
        A component is not finite.
    """
    diff = as_tensor(l_diff)
    match = as_tensor(l_match, dtype=diff.dtype)
    if not (np.isfinite(diff.data).all() and np.isfinite(match.data).all()):
        raise FloatingPointError("Loss components must be finite")
    diff = F.reshape(diff, ())
    match = F.reshape(match, ())
    objective = F.add(diff, F.scale(match, lambda_match))
    return LossReport(
        l_diff=diff.item(),
        l_match=match.item(),
        l_total=objective.item(),
        lambda_match=float(lambda_match),
        objective=objective,
    )
