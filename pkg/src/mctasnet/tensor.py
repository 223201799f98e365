"""Dense tensors with a reverse-mode gradient tape.

Only the handful of operations the separator needs are differentiable
(see :mod:`mctasnet.ops`).  A :class:`Tensor` wraps a numpy array; ops
record their parents and a local vector-Jacobian product, and
:func:`backward` walks the recorded graph in reverse topological order.

Gradient semantics after ``backward``:

* leaves (tensors created by the user with ``requires_grad=True``)
  *accumulate*, so calling ``backward`` twice without :meth:`Tensor.zero_grad`
  sums both passes, which is how mini-batch gradients are built;
* intermediate tensors hold the gradient of the most recent pass only.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .errors import InvalidArgument, NonFiniteError

_state = {"dtype": np.dtype(np.float32), "debug": False}


def default_dtype() -> np.dtype:
    return _state["dtype"]


@contextlib.contextmanager
def precision(dtype) -> Iterator[None]:
    """Temporarily change the dtype new leaf tensors are created with.

    ``with precision(np.float64): ...`` is the verification mode used by
    the finite-difference checks.
    """
    previous = _state["dtype"]
    _state["dtype"] = np.dtype(dtype)
    try:
        yield
    finally:
        _state["dtype"] = previous


def set_debug(enabled: bool) -> None:
    """Turn NaN/Inf checks on every op output on or off."""
    _state["debug"] = bool(enabled)


def debug_enabled() -> bool:
    return _state["debug"]


VJP = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """A numpy array plus an optional slot in a computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: str = ""):
        arr = np.array(data, dtype=dtype or default_dtype(), copy=True)
        if any(d <= 0 for d in arr.shape):
            raise InvalidArgument(f"tensor dimensions must be positive, got {arr.shape}")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._parents: tuple = ()
        self._vjp: Optional[VJP] = None
        if _state["debug"]:
            _check_finite(self.data, name or "tensor")

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: Sequence["Tensor"], vjp: VJP, op: str) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.name = op
        out.requires_grad = any(p.requires_grad for p in parents)
        out._parents = tuple(parents) if out.requires_grad else ()
        out._vjp = vjp if out.requires_grad else None
        if _state["debug"]:
            _check_finite(data, op)
        return out

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._vjp is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    # arithmetic sugar; implementations live in ops
    def __add__(self, other):
        from . import ops

        return ops.add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops

        return ops.mul(self, -1.0)

    def __sub__(self, other):
        from . import ops

        return ops.add(self, ops.mul(other, -1.0) if isinstance(other, Tensor) else -other)

    def sum(self):
        from . import ops

        return ops.sum(self)

    def __matmul__(self, other):
        from . import ops

        return ops.matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_finite(arr: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite values produced by {where}")


def _topological_order(root: Tensor) -> list:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root: Tensor) -> None:
    """Populate ``.grad`` of every tensor reachable from scalar ``root``."""
    if root.size != 1:
        raise InvalidArgument(f"backward needs a scalar root, got shape {root.shape}")
    if not root.requires_grad:
        raise InvalidArgument("root does not depend on any tensor requiring grad")
    order = _topological_order(root)
    grads = {id(root): np.ones_like(root.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        node.grad = g
        for parent, pg in zip(node._parents, node._vjp(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
