"""Neural building blocks with named parameters."""
from collections.abc import Iterator
from typing import Any

import numpy as np

from pairedit.numerics import functional as F
from pairedit.numerics.tensor import DEFAULT_DTYPE, Param, Tensor


def _collect(value: Any, name: str, out: dict[str, Param]) -> None:
    if isinstance(value, Param):
        out[name] = value
    elif isinstance(value, Module):
        out.update(value.named_parameters(prefix=f"{name}."))
    elif isinstance(value, list | tuple):
        for k, item in enumerate(value):
            _collect(item, f"{name}.{k}", out)
    elif isinstance(value, dict):
        for key in sorted(value):
            _collect(value[key], f"{name}.{key}", out)


class Module:
    """Base class of parametrized blocks.

    Parameters are discovered from instance attributes (including lists and string keyed dicts of
    parameters or modules) in attribute definition order, which makes the dotted names stable.
    """

    def named_parameters(self, prefix: str = "") -> dict[str, Param]:
        """Return all parameters keyed by dotted attribute path."""
        out: dict[str, Param] = {}
        for key, value in vars(self).items():
            if not key.startswith("_"):
                _collect(value, f"{prefix}{key}", out)
        return out

    def parameters(self) -> Iterator[Param]:
        """Iterate over all parameters."""
        yield from self.named_parameters().values()

    def state(self) -> dict[str, Param]:
        """Return the named parameters and write the dotted names into each ``Param.name``."""
        named = self.named_parameters()
        for name, param in named.items():
            param.name = name
        return named

    def zero_grad(self) -> None:
        """Reset all gradient buffers."""
        for param in self.parameters():
            param.zero_grad()

    def astype(self, dtype: np.dtype | type) -> "Module":
        """Convert all parameters to the given float precision in place."""
        for param in self.parameters():
            param.data = param.data.astype(dtype)
            param.zero_grad()
        return self

    @property
    def parameter_count(self) -> int:
        """Total number of scalar parameters."""
        return int(sum(p.data.size for p in self.parameters()))


def _normal(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    return (rng.standard_normal(shape) / np.sqrt(fan_in)).astype(DEFAULT_DTYPE)


class Linear(Module):
    """Affine map ``x @ weight + bias`` over the last axis of an input with arbitrary leading axes."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True):
        self.weight = Param(_normal(rng, (in_features, out_features), in_features))
        self.bias = Param(np.zeros(out_features, dtype=DEFAULT_DTYPE)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        """Apply the layer."""
        lead = x.shape[:-1]
        flat = F.reshape(x, (int(np.prod(lead, dtype=np.int64)), x.shape[-1]))
        out = F.matmul(flat, self.weight)
        if self.bias is not None:
            out = F.add_bias(out, self.bias, axis=-1)
        return F.reshape(out, (*lead, self.weight.shape[1]))


class Conv2d(Module):
    """Square-kernel 2D convolution on [B, C, H, W] inputs with 'same' padding by default."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        rng: np.random.Generator,
        kernel_size: int = 3,
        stride: int = 1,
        padding: int | None = None,
        bias: bool = True,
    ):
        self.stride = stride
        self.padding = kernel_size // 2 if padding is None else padding
        fan_in = in_channels * kernel_size * kernel_size
        self.weight = Param(_normal(rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in))
        self.bias = Param(np.zeros(out_channels, dtype=DEFAULT_DTYPE)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        """Apply the convolution."""
        out = F.conv2d(x, self.weight, stride=self.stride, padding=self.padding)
        if self.bias is not None:
            out = F.add_bias(out, self.bias, axis=1)
        return out


class LayerNorm(Module):
    """Layer normalization over the last axis with learnable gain and offset."""

    def __init__(self, dim: int, eps: float = 1e-5):
        self.eps = eps
        self.gamma = Param(np.ones(dim, dtype=DEFAULT_DTYPE))
        self.beta = Param(np.zeros(dim, dtype=DEFAULT_DTYPE))

    def __call__(self, x: Tensor) -> Tensor:
        """Normalize ``x``."""
        out = F.layer_norm(x, eps=self.eps)
        return F.add_bias(F.mul_bias(out, self.gamma, axis=-1), self.beta, axis=-1)


class GroupNorm(Module):
    """Group normalization of [B, C, H, W] feature maps with per-channel gain and offset."""

    def __init__(self, groups: int, channels: int, eps: float = 1e-5):
        if channels % groups:
            raise ValueError(f"{channels} channels cannot be split into {groups} groups")
        self.groups = groups
        self.eps = eps
        self.gamma = Param(np.ones(channels, dtype=DEFAULT_DTYPE))
        self.beta = Param(np.zeros(channels, dtype=DEFAULT_DTYPE))

    def __call__(self, x: Tensor) -> Tensor:
        """Normalize ``x``."""
        batch = x.shape[0]
        grouped = F.reshape(x, (batch, self.groups, x.data.size // (batch * self.groups)))
        out = F.reshape(F.layer_norm(grouped, eps=self.eps), x.shape)
        return F.add_bias(F.mul_bias(out, self.gamma, axis=1), self.beta, axis=1)
