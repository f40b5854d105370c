"""Tensor and parameter types with a reverse-mode gradient tape."""
from collections.abc import Sequence
from typing import Any

import numpy as np

DEFAULT_DTYPE = np.float32


class ShapeError(ValueError):
    """Operand shapes rejected by a primitive before any compute happens."""

    def __init__(self, op: str, message: str):
        super().__init__(f"{op}: {message}")
        self.op = op


class Tensor:
    """Immutable n-dimensional float array which remembers the primitive that produced it.

    The values are held in a C-ordered numpy array, so ``shape`` and the flat row-major
    ``data.ravel()`` view correspond exactly to the dense tensor layout used repo-wide.
    A tensor is part of the gradient tape if it requires a gradient itself or if any
    of its inputs does.
    """

    def __init__(self, data: Any, requires_grad: bool = False, ctx: "Function | None" = None):
        """Construct a tensor.

        Parameters
        ----------
        data
            Array-like values. Integer input is promoted to the default float precision.
        requires_grad, optional
            Flag which indicates if gradients are accumulated into ``grad``, by default False
        ctx, optional
            Primitive which produced the tensor, set by ``Function.apply``
        """
        array = np.asarray(data)
        if not np.issubdtype(array.dtype, np.floating):
            array = array.astype(DEFAULT_DTYPE)
        self.data: np.ndarray = np.ascontiguousarray(array)
        self.requires_grad: bool = requires_grad
        self.grad: np.ndarray | None = None
        self._ctx = ctx

    def __repr__(self) -> str:
        """Short representation with shape and dtype."""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple[int, ...]:
        """Shape of the tensor."""
        return self.data.shape

    @property
    def ndim(self) -> int:
        """Number of dimensions."""
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        """Float precision of the tensor."""
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        """Return a copy of the tensor values."""
        return self.data.copy()

    def item(self) -> float:
        """Return the value of a single-element tensor as python float."""
        if self.data.size != 1:
            raise ShapeError("item", f"tensor with shape {self.shape} is not a scalar")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        """Return a tensor with the same values which is cut from the gradient tape."""
        return Tensor(self.data)

    def backward(self) -> None:
        """Propagate gradients from this scalar tensor to every leaf which requires a gradient.

        Gradients are accumulated, call ``zero_grad`` on parameters between steps.

        Raises
        ------
        ShapeError
            Tensor is not a scalar.
        """
        if self.data.size != 1:
            raise ShapeError("backward", f"loss must be a scalar, got shape {self.shape}")

        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(self._topological_order()):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue
            if node._ctx is None:
                node.grad = grad.copy() if node.grad is None else node.grad + grad
                continue
            for parent, parent_grad in zip(node._ctx.parents, node._ctx.backward(grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = parent_grad if key not in grads else grads[key] + parent_grad

    def _topological_order(self) -> list["Tensor"]:
        # Iterative post-order, inputs always precede their consumers
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            if node._ctx is not None:
                for parent in node._ctx.parents:
                    if parent.requires_grad and id(parent) not in visited:
                        stack.append((parent, False))
        return order


class Param(Tensor):
    """Learnable tensor which is only mutated by the optimizer between steps.

    The gradient buffer always exists and has the shape of the value.
    """

    def __init__(self, data: Any, name: str = ""):
        """Construct a parameter.

        Parameters
        ----------
        data
            Initial values, copied.
        name, optional
            Dotted parameter name, assigned by ``Module.state`` if empty
        """
        super().__init__(np.array(data, copy=True), requires_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        """Short representation with name and shape."""
        return f"Param(name={self.name!r}, shape={self.shape}, dtype={self.dtype})"

    @property
    def value(self) -> np.ndarray:
        """Current parameter values."""
        return self.data

    @property
    def gradient(self) -> np.ndarray:
        """Accumulated gradient of the last backward passes."""
        assert self.grad is not None  # noqa: S101
        return self.grad

    def zero_grad(self) -> None:
        """Reset the gradient buffer."""
        self.grad = np.zeros_like(self.data)

    def assign(self, values: np.ndarray) -> None:
        """Replace the parameter values, keeping shape and precision.

        Raises
        ------
        ShapeError
            Shape of new values differs from the parameter shape.
        """
        if values.shape != self.data.shape:
            raise ShapeError("assign", f"{self.name}: expected {self.data.shape}, got {values.shape}")
        self.data = np.ascontiguousarray(values, dtype=self.data.dtype)


class Function:
    """Primitive of the gradient tape.

    Subclasses implement ``forward`` on numpy arrays, storing what ``backward`` needs on ``self``,
    and ``backward`` returning one gradient (or None) per input tensor.
    """

    parents: tuple[Tensor, ...] = ()

    def forward(self, *arrays: np.ndarray) -> np.ndarray:
        """Compute the output values."""
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> Sequence[np.ndarray | None]:
        """Map the output gradient to input gradients."""
        raise NotImplementedError

    @classmethod
    def apply(cls, *parents: Tensor, **options: Any) -> Tensor:
        """Run the primitive on tensors and record it on the tape if gradients are required.

        Raises
        ------
        FloatingPointError
            The primitive produced NaN or Inf values.
        """
        ctx = cls()
        for key, value in options.items():
            setattr(ctx, key, value)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            out = ctx.forward(*(p.data for p in parents))
        if not np.isfinite(out).all():
            raise FloatingPointError(f"{cls.__name__} produced non-finite values")
        requires_grad = any(p.requires_grad for p in parents)
        if requires_grad:
            ctx.parents = parents
            return Tensor(out, requires_grad=True, ctx=ctx)
        return Tensor(out)


def as_tensor(value: "Tensor | np.ndarray | float", dtype: np.dtype | None = None) -> Tensor:
    """Wrap constants into a tensor which does not require gradients."""
    if isinstance(value, Tensor):
        return value
    array = np.asarray(value, dtype=dtype)
    return Tensor(array)
