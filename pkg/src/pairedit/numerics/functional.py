"""Differentiable primitives.

Every public function checks operand shapes before any compute and raises ``ShapeError``
naming the primitive. Broadcasting is limited to scalar times tensor (``scale``, ``scale_by``)
and per-axis bias vectors (``add_bias``, ``mul_bias``); everything else requires equal shapes
or an explicit ``reshape``.
"""
from collections.abc import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from pairedit.numerics.tensor import Function, ShapeError, Tensor, as_tensor

Index = int | slice | tuple[int | slice, ...]


def _require_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(op, f"operand shapes differ: {a.shape} vs {b.shape}")


def _normalize_axis(op: str, axis: int, ndim: int) -> int:
    if not -ndim <= axis < ndim:
        raise ShapeError(op, f"axis {axis} out of range for {ndim} dimensions")
    return axis % ndim


def _bias_shape(ndim: int, axis: int, size: int) -> tuple[int, ...]:
    shape = [1] * ndim
    shape[axis] = size
    return tuple(shape)


# >> Elementwise arithmetic

class _Add(Function):
    def forward(self, a, b):
        return a + b

    def backward(self, grad):
        return grad, grad


class _Sub(Function):
    def forward(self, a, b):
        return a - b

    def backward(self, grad):
        return grad, -grad


class _Mul(Function):
    def forward(self, a, b):
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return grad * self.b, grad * self.a


class _Scale(Function):
    factor: float

    def forward(self, x):
        return x * x.dtype.type(self.factor)

    def backward(self, grad):
        return (grad * grad.dtype.type(self.factor),)


class _ScaleBy(Function):
    def forward(self, x, s):
        self.x, self.s = x, s
        return x * s.reshape(())

    def backward(self, grad):
        return grad * self.s.reshape(()), np.sum(grad * self.x).reshape(self.s.shape)


class _AddBias(Function):
    axis: int

    def forward(self, x, b):
        return x + b.reshape(_bias_shape(x.ndim, self.axis, b.shape[0]))

    def backward(self, grad):
        axes = tuple(k for k in range(grad.ndim) if k != self.axis)
        return grad, grad.sum(axis=axes)


class _MulBias(Function):
    axis: int

    def forward(self, x, g):
        self.x = x
        self.g = g.reshape(_bias_shape(x.ndim, self.axis, g.shape[0]))
        return x * self.g

    def backward(self, grad):
        axes = tuple(k for k in range(grad.ndim) if k != self.axis)
        return grad * self.g, (grad * self.x).sum(axis=axes)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum of two tensors with identical shape."""
    _require_same_shape("add", a, b)
    return _Add.apply(a, b)


def sub(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise difference of two tensors with identical shape."""
    _require_same_shape("sub", a, b)
    return _Sub.apply(a, b)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of two tensors with identical shape."""
    _require_same_shape("mul", a, b)
    return _Mul.apply(a, b)


def scale(x: Tensor, factor: float) -> Tensor:
    """Multiply a tensor by a constant scalar."""
    return _Scale.apply(x, factor=float(factor))


def scale_by(x: Tensor, s: Tensor) -> Tensor:
    """Multiply a tensor by a single-element tensor which may require a gradient."""
    if s.data.size != 1:
        raise ShapeError("scale_by", f"scale must have a single element, got shape {s.shape}")
    return _ScaleBy.apply(x, s)


def add_bias(x: Tensor, b: Tensor, axis: int = -1) -> Tensor:
    """Add a bias vector along one axis of ``x``."""
    axis = _normalize_axis("add_bias", axis, x.ndim)
    if b.ndim != 1 or b.shape[0] != x.shape[axis]:
        raise ShapeError("add_bias", f"bias shape {b.shape} does not match axis {axis} of {x.shape}")
    return _AddBias.apply(x, b, axis=axis)


def mul_bias(x: Tensor, g: Tensor, axis: int = -1) -> Tensor:
    """Scale ``x`` by a gain vector along one axis."""
    axis = _normalize_axis("mul_bias", axis, x.ndim)
    if g.ndim != 1 or g.shape[0] != x.shape[axis]:
        raise ShapeError("mul_bias", f"gain shape {g.shape} does not match axis {axis} of {x.shape}")
    return _MulBias.apply(x, g, axis=axis)


# >> Linear algebra

class _MatMul(Function):
    def forward(self, a, b):
        self.a, self.b = a, b
        return np.matmul(a, b)

    def backward(self, grad):
        return np.matmul(grad, np.swapaxes(self.b, -1, -2)), np.matmul(np.swapaxes(self.a, -1, -2), grad)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes; leading (batch) axes must be identical."""
    if a.ndim < 2 or a.ndim != b.ndim:
        raise ShapeError("matmul", f"expected operands with equal rank >= 2, got {a.shape} and {b.shape}")
    if a.shape[:-2] != b.shape[:-2]:
        raise ShapeError("matmul", f"batch axes differ: {a.shape[:-2]} vs {b.shape[:-2]}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", f"inner dimensions differ: {a.shape} @ {b.shape}")
    return _MatMul.apply(a, b)


class _Conv2d(Function):
    stride: int
    padding: int

    def forward(self, x, w):
        self.x_shape = x.shape
        self.w = w
        pad = self.padding
        padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        kh, kw = w.shape[2:]
        windows = sliding_window_view(padded, (kh, kw), axis=(2, 3))[:, :, :: self.stride, :: self.stride]
        self.windows = windows
        self.padded_shape = padded.shape
        return np.einsum("bchwij,ocij->bohw", windows, w, optimize=True)

    def backward(self, grad):
        grad_w = np.einsum("bohw,bchwij->ocij", grad, self.windows, optimize=True)
        grad_padded = np.zeros(self.padded_shape, dtype=grad.dtype)
        out_h, out_w = grad.shape[2:]
        s = self.stride
        kh, kw = self.w.shape[2:]
        for i in range(kh):
            for j in range(kw):
                contribution = np.einsum("bohw,oc->bchw", grad, self.w[:, :, i, j], optimize=True)
                grad_padded[:, :, i : i + s * out_h : s, j : j + s * out_w : s] += contribution
        pad = self.padding
        height, width = self.x_shape[2:]
        return grad_padded[:, :, pad : pad + height, pad : pad + width], grad_w


def conv2d(x: Tensor, w: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """2D cross-correlation of a batch of feature maps.

    Parameters
    ----------
    x
        Input of shape [B, C, H, W], or [C, H, W] for a single map
    w
        Kernel of shape [O, C, kh, kw]
    stride, optional
        Step of the sliding window, by default 1
    padding, optional
        Zero padding added on every border, by default 0

    Returns
    -------
        Output of shape [B, O, H', W'] (or [O, H', W'] for unbatched input)
    """
    if x.ndim == 3:
        out = conv2d(reshape(x, (1, *x.shape)), w, stride=stride, padding=padding)
        return reshape(out, out.shape[1:])
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError("conv2d", f"expected input [B,C,H,W] and kernel [O,C,kh,kw], got {x.shape}, {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise ShapeError("conv2d", f"input has {x.shape[1]} channels, kernel expects {w.shape[1]}")
    if stride < 1 or padding < 0:
        raise ShapeError("conv2d", f"invalid stride {stride} or padding {padding}")
    if x.shape[2] + 2 * padding < w.shape[2] or x.shape[3] + 2 * padding < w.shape[3]:
        raise ShapeError("conv2d", f"kernel {w.shape[2:]} larger than padded input {x.shape[2:]}")
    return _Conv2d.apply(x, w, stride=stride, padding=padding)


class _UpsampleNearest(Function):
    factor: int

    def forward(self, x):
        return x.repeat(self.factor, axis=-2).repeat(self.factor, axis=-1)

    def backward(self, grad):
        f = self.factor
        *lead, h, w = grad.shape
        return (grad.reshape(*lead, h // f, f, w // f, f).sum(axis=(-3, -1)),)


def upsample_nearest(x: Tensor, factor: int = 2) -> Tensor:
    """Nearest neighbour upsampling of the last two axes."""
    if x.ndim < 2 or factor < 1:
        raise ShapeError("upsample_nearest", f"invalid input {x.shape} or factor {factor}")
    return _UpsampleNearest.apply(x, factor=factor)


# >> Normalization and nonlinearities

class _Softmax(Function):
    axis: int

    def forward(self, x):
        shifted = x - x.max(axis=self.axis, keepdims=True)
        e = np.exp(shifted)
        self.y = e / e.sum(axis=self.axis, keepdims=True)
        return self.y

    def backward(self, grad):
        y = self.y
        return (y * (grad - (grad * y).sum(axis=self.axis, keepdims=True)),)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax (max subtraction) along one axis."""
    axis = _normalize_axis("softmax", axis, x.ndim)
    return _Softmax.apply(x, axis=axis)


class _LayerNorm(Function):
    eps: float

    def forward(self, x):
        mean = x.mean(axis=-1, keepdims=True)
        centered = x - mean
        var = (centered * centered).mean(axis=-1, keepdims=True)
        self.inv_std = 1.0 / np.sqrt(var + x.dtype.type(self.eps))
        self.x_hat = centered * self.inv_std
        return self.x_hat

    def backward(self, grad):
        x_hat = self.x_hat
        mean_grad = grad.mean(axis=-1, keepdims=True)
        mean_grad_xhat = (grad * x_hat).mean(axis=-1, keepdims=True)
        return (self.inv_std * (grad - mean_grad - x_hat * mean_grad_xhat),)


def layer_norm(x: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean and unit variance (no affine part)."""
    if x.ndim < 1 or x.shape[-1] < 1:
        raise ShapeError("layer_norm", f"invalid input shape {x.shape}")
    return _LayerNorm.apply(x, eps=eps)


class _SiLU(Function):
    def forward(self, x):
        self.x = x
        self.sig = 1.0 / (1.0 + np.exp(-x))
        return x * self.sig

    def backward(self, grad):
        sig = self.sig
        return (grad * (sig + self.x * sig * (1.0 - sig)),)


class _ReLU(Function):
    def forward(self, x):
        self.mask = x > 0
        return np.where(self.mask, x, 0).astype(x.dtype)

    def backward(self, grad):
        return (np.where(self.mask, grad, 0).astype(grad.dtype),)


def silu(x: Tensor) -> Tensor:
    """Sigmoid linear unit ``x * sigmoid(x)``."""
    return _SiLU.apply(x)


def relu(x: Tensor) -> Tensor:
    """Rectified linear unit, not differentiable at exactly zero."""
    return _ReLU.apply(x)


# >> Shape manipulation

class _Reshape(Function):
    shape: tuple[int, ...]

    def forward(self, x):
        self.in_shape = x.shape
        return x.reshape(self.shape)

    def backward(self, grad):
        return (grad.reshape(self.in_shape),)


class _Transpose(Function):
    axes: tuple[int, ...]

    def forward(self, x):
        return np.ascontiguousarray(np.transpose(x, self.axes))

    def backward(self, grad):
        return (np.ascontiguousarray(np.transpose(grad, np.argsort(self.axes))),)


class _Index(Function):
    key: Index

    def forward(self, x):
        self.in_shape = x.shape
        return np.ascontiguousarray(x[self.key])

    def backward(self, grad):
        out = np.zeros(self.in_shape, dtype=grad.dtype)
        out[self.key] = grad
        return (out,)


class _Concat(Function):
    axis: int

    def forward(self, *arrays):
        self.sizes = [a.shape[self.axis] for a in arrays]
        return np.concatenate(arrays, axis=self.axis)

    def backward(self, grad):
        bounds = np.cumsum(self.sizes)[:-1]
        return tuple(np.ascontiguousarray(g) for g in np.split(grad, bounds, axis=self.axis))


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    """Row-major reshape; the element count must be preserved."""
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape)) != x.data.size or any(s < 0 for s in shape):
        raise ShapeError("reshape", f"cannot reshape {x.shape} into {shape}")
    return _Reshape.apply(x, shape=shape)


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    """Permute axes."""
    axes = tuple(int(a) for a in axes)
    if sorted(axes) != list(range(x.ndim)):
        raise ShapeError("transpose", f"axes {axes} are not a permutation for {x.ndim} dimensions")
    return _Transpose.apply(x, axes=axes)


def index(x: Tensor, key: Index) -> Tensor:
    """Basic slicing with integers and slices."""
    keys = key if isinstance(key, tuple) else (key,)
    if len(keys) > x.ndim or not all(isinstance(k, int | slice) for k in keys):
        raise ShapeError("index", f"unsupported key {key!r} for shape {x.shape}")
    for k, size in zip(keys, x.shape):
        if isinstance(k, int) and not -size <= k < size:
            raise ShapeError("index", f"index {k} out of range for axis of size {size}")
    return _Index.apply(x, key=key)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate tensors along an existing axis."""
    if not tensors:
        raise ShapeError("concat", "no tensors to concatenate")
    axis = _normalize_axis("concat", axis, tensors[0].ndim)
    reference = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != len(reference) or any(
            s != r for k, (s, r) in enumerate(zip(t.shape, reference)) if k != axis
        ):
            raise ShapeError("concat", f"shapes {reference} and {t.shape} differ outside axis {axis}")
    return _Concat.apply(*tensors, axis=axis)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Stack equally shaped tensors along a new axis."""
    if not tensors:
        raise ShapeError("stack", "no tensors to stack")
    shape = tensors[0].shape
    axis = axis % (len(shape) + 1)
    expanded = [reshape(t, (*t.shape[:axis], 1, *t.shape[axis:])) for t in tensors]
    return concat(expanded, axis=axis)


# >> Row gather / scatter

class _GatherRows(Function):
    rows: np.ndarray

    def forward(self, x):
        self.num_rows = x.shape[0]
        return x[self.rows]

    def backward(self, grad):
        out = np.zeros((self.num_rows, *grad.shape[1:]), dtype=grad.dtype)
        np.add.at(out, self.rows, grad)
        return (out,)


class _ScatterAddRows(Function):
    rows: np.ndarray
    num_rows: int

    def forward(self, values):
        out = np.zeros((self.num_rows, *values.shape[1:]), dtype=values.dtype)
        np.add.at(out, self.rows, values)
        return out

    def backward(self, grad):
        return (grad[self.rows],)


def gather_rows(x: Tensor, rows: Sequence[int] | np.ndarray) -> Tensor:
    """Select rows of ``x`` (repetitions allowed)."""
    rows = np.asarray(rows, dtype=np.int64)
    if rows.ndim != 1 or (rows.size and (rows.min() < 0 or rows.max() >= x.shape[0])):
        raise ShapeError("gather_rows", f"row indices out of range for {x.shape[0]} rows")
    return _GatherRows.apply(x, rows=rows)


def scatter_add_rows(values: Tensor, rows: Sequence[int] | np.ndarray, num_rows: int) -> Tensor:
    """Sum ``values`` into a zero tensor with ``num_rows`` rows at the given row indices."""
    rows = np.asarray(rows, dtype=np.int64)
    if rows.ndim != 1 or rows.size != values.shape[0]:
        raise ShapeError("scatter_add_rows", f"{rows.size} indices for {values.shape[0]} rows")
    if rows.size and (rows.min() < 0 or rows.max() >= num_rows):
        raise ShapeError("scatter_add_rows", f"row indices out of range for {num_rows} rows")
    return _ScatterAddRows.apply(values, rows=rows, num_rows=int(num_rows))


# >> Reductions and losses

class _Sum(Function):
    axis: int | None

    def forward(self, x):
        self.in_shape = x.shape
        return np.asarray(x.sum(axis=self.axis))

    def backward(self, grad):
        if self.axis is None:
            return (np.broadcast_to(grad, self.in_shape).copy(),)
        return (np.broadcast_to(np.expand_dims(grad, self.axis), self.in_shape).copy(),)


class _MaskedSquaredError(Function):
    weight: np.ndarray

    def forward(self, pred, target):
        self.diff = pred - target
        return np.asarray(np.sum(self.weight * self.diff * self.diff))

    def backward(self, grad):
        g = grad.reshape(()) * 2.0 * self.weight * self.diff
        return g, -g


def sum_all(x: Tensor) -> Tensor:
    """Sum over all elements, returns a scalar tensor."""
    return _Sum.apply(x, axis=None)


def mean_all(x: Tensor) -> Tensor:
    """Mean over all elements, returns a scalar tensor."""
    return scale(sum_all(x), 1.0 / x.data.size)


def sum_axis(x: Tensor, axis: int) -> Tensor:
    """Sum over one axis, which is removed."""
    axis = _normalize_axis("sum_axis", axis, x.ndim)
    return _Sum.apply(x, axis=axis)


def mean_axis(x: Tensor, axis: int) -> Tensor:
    """Mean over one axis, which is removed."""
    axis = _normalize_axis("mean_axis", axis, x.ndim)
    return scale(sum_axis(x, axis), 1.0 / x.shape[axis])


def masked_squared_error(pred: Tensor, target: "Tensor | np.ndarray", weight: np.ndarray) -> Tensor:
    """Weighted sum of squared differences ``sum(weight * (pred - target)^2)``.

    Parameters
    ----------
    pred
        Prediction
    target
        Target values, constant arrays are wrapped
    weight
        Constant per-element weights with the shape of ``pred``

    Returns
    -------
        Scalar tensor
    """
    target_t = as_tensor(target, dtype=pred.dtype)
    _require_same_shape("masked_squared_error", pred, target_t)
    weight = np.asarray(weight, dtype=pred.dtype)
    if weight.shape != pred.shape:
        raise ShapeError("masked_squared_error", f"weight shape {weight.shape} differs from {pred.shape}")
    return _MaskedSquaredError.apply(pred, target_t, weight=weight)
