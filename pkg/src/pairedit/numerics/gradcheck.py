"""Gradient evaluation and finite-difference verification."""
import logging
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from pairedit.numerics.tensor import Param, ShapeError, Tensor

log = logging.getLogger("GradChk")

LossFunction = Callable[[], Tensor]
ParamCollection = Mapping[str, Param] | Sequence[Param]

# Floor of the relative error denominator, avoids dividing numerical noise by vanishing gradients
RELATIVE_ERROR_FLOOR = 1e-2
KINK_THRESHOLD = 1e-2


@dataclass
class ParamCheck:
    """Result of the finite-difference check of one parameter."""

    name: str
    """Parameter name."""

    max_rel_err: float
    """Largest relative error between analytic and numeric gradient over the checked entries."""

    tolerance: float
    """Tolerance the relative error was compared against."""

    checked_entries: int = 0
    """Number of entries which were perturbed."""

    flagged: list[int] = field(default_factory=list)
    """Flat indices of entries where the loss is not differentiable (one-sided slopes disagree)."""

    @property
    def passed(self) -> bool:
        """True if the relative error is below tolerance and no entry was flagged."""
        return self.max_rel_err < self.tolerance and not self.flagged


@dataclass
class GradCheckReport:
    """Per-parameter finite-difference report."""

    params: list[ParamCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        """True if every parameter passed."""
        return all(p.passed for p in self.params)

    @property
    def max_rel_err(self) -> float:
        """Largest relative error over all parameters."""
        return max((p.max_rel_err for p in self.params), default=0.0)

    def __getitem__(self, name: str) -> ParamCheck:
        """Return the check of a parameter by name."""
        for check in self.params:
            if check.name == name:
                return check
        raise KeyError(name)

    def summary(self) -> str:
        """Return a human readable multi-line summary."""
        lines = [
            f"{p.name:<40s} max_rel_err={p.max_rel_err:.3e} entries={p.checked_entries} "
            f"flagged={len(p.flagged)} {'pass' if p.passed else 'FAIL'}"
            for p in self.params
        ]
        return "\n".join(lines)


def _as_named(params: ParamCollection) -> dict[str, Param]:
    if isinstance(params, Mapping):
        return dict(params)
    return {p.name or f"param_{k}": p for k, p in enumerate(params)}


def forward_backward(loss_fn: LossFunction, params: ParamCollection) -> dict[str, np.ndarray]:
    """Evaluate a scalar loss and return the gradient of every parameter.

    Parameter gradient buffers are reset before the backward pass, so the result
    only holds the gradient of this evaluation.

    Parameters
    ----------
    loss_fn
        Closure which builds the graph from the parameters and returns a scalar tensor
    params
        Parameters to differentiate with respect to, mapping from name or sequence

    Returns
    -------
        Copy of the gradient per parameter name

    Raises
    ------
    ShapeError
        Loss is not a scalar.
    """
    named = _as_named(params)
    for param in named.values():
        param.zero_grad()
    loss = loss_fn()
    if loss.data.size != 1:
        raise ShapeError("forward_backward", f"loss must be a scalar, got shape {loss.shape}")
    loss.backward()
    return {name: param.gradient.copy() for name, param in named.items()}


def _evaluate(loss_fn: LossFunction) -> float:
    return float(loss_fn().data.reshape(-1)[0])


def grad_check(
    loss_fn: LossFunction,
    params: ParamCollection,
    tolerance: float = 1e-5,
    step: float = 1e-4,
    max_entries: int | None = None,
    seed: int = 0,
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    Every entry (or a seeded random subset of ``max_entries`` entries per parameter) is
    perturbed by ``±step``. The relative error of an entry is
    ``|analytic - numeric| / max(|analytic|, |numeric|, 1e-2)``.
    An entry where the forward and backward one-sided slopes disagree by more than
    ``1e-2 * max(1, |numeric|)`` sits on a kink (e.g. a relu at exactly zero) and is flagged,
    which fails the parameter regardless of its relative error.

    Parameters
    ----------
    loss_fn
        Closure returning a scalar loss tensor, re-evaluated for every perturbation
    params
        Parameters to check, all in double precision
    tolerance, optional
        Relative error tolerance, by default 1e-5
    step, optional
        Finite-difference step, by default 1e-4
    max_entries, optional
        Maximum number of entries checked per parameter, by default all
    seed, optional
        Seed of the entry subset selection, by default 0

    Returns
    -------
        Report listing every parameter

    Raises
    ------
    TypeError
        A parameter or the loss is not double precision.
    """
    named = _as_named(params)
    for name, param in named.items():
        if param.dtype != np.float64:
            raise TypeError(f"Gradient check requires float64 parameters, {name} is {param.dtype}")

    analytic = forward_backward(loss_fn, named)
    if loss_fn().dtype != np.float64:
        raise TypeError("Gradient check requires a float64 loss")
    rng = np.random.default_rng(seed)
    report = GradCheckReport()

    for name, param in named.items():
        flat = param.data.reshape(-1)
        grad = analytic[name].reshape(-1)
        entries = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            entries = np.sort(rng.choice(flat.size, size=max_entries, replace=False))

        check = ParamCheck(name=name, max_rel_err=0.0, tolerance=tolerance, checked_entries=int(entries.size))
        for entry in entries:
            original = flat[entry]
            flat[entry] = original + step
            f_plus = _evaluate(loss_fn)
            flat[entry] = original - step
            f_minus = _evaluate(loss_fn)
            flat[entry] = original
            f_center = _evaluate(loss_fn)

            numeric = (f_plus - f_minus) / (2 * step)
            slope_fwd = (f_plus - f_center) / step
            slope_bwd = (f_center - f_minus) / step
            if abs(slope_fwd - slope_bwd) > KINK_THRESHOLD * max(1.0, abs(numeric)):
                check.flagged.append(int(entry))
                continue
            denominator = max(abs(grad[entry]), abs(numeric), RELATIVE_ERROR_FLOOR)
            check.max_rel_err = max(check.max_rel_err, abs(grad[entry] - numeric) / denominator)

        if check.flagged:
            log.warning("%s: %d entries on a non-differentiable point", name, len(check.flagged))
        log.debug("%s: max relative error %.3e", name, check.max_rel_err)
        report.params.append(check)

    return report
