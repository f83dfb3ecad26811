"""Minimal reverse-mode autodiff over dense float64 numpy arrays.

Conventions, fixed across the whole package:

* everything is double precision; float32 appears only in file export,
* row-major semantics; softmax / one-hot / log act on the last axis,
* argmax ties break to the lowest index,
* randomness always comes from an explicitly passed ``numpy.random.Generator``.

A computation is expressed by calling ops on ``Tensor`` values; calling
``backward()`` on a scalar result accumulates vector-Jacobian products into
``.grad`` of every node it depends on.  Two ops deliberately lie to the
gradient: ``stop_gradient`` (backward is zero) and ``straight_through``
(forward is the hard argmax one-hot, backward is the identity), so both are
rejected by the finite-difference checker when they sit on the checked path.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

LOG_FLOOR = 1e-12


class Tensor:
    __slots__ = ("data", "grad", "op", "name", "_parents", "_backward")

    def __init__(self, data, parents: tuple = (), op: str = "leaf", name: str | None = None):
        arr = np.asarray(data, dtype=np.float64)
        label = name or op
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError(f"non-finite values in node '{label}'")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.op = op
        self.name = label
        self._parents = parents
        self._backward: Callable[[], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(op={self.op!r}, shape={self.shape})"

    # operator sugar; every rule lives in a module-level function below
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return subtract(self, _as_tensor(other))

    def __rsub__(self, other):
        return subtract(_as_tensor(other), self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return multiply(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def select(self, index: int) -> "Tensor":
        return select(self, index)

    def reshape(self, shape: Sequence[int]) -> "Tensor":
        return reshape(self, shape)

    def backward(self) -> None:
        """Reverse accumulation from this scalar into .grad of all ancestors."""
        if self.data.shape != ():
            raise ValueError(f"backward requires a scalar loss, got shape {self.shape}")
        order = topo_order(self)
        for node in order:
            node.grad = np.zeros_like(node.data)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward()


def _as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, op="const")


def topo_order(root: Tensor) -> list[Tensor]:
    """Parents-before-children ordering of the graph below ``root`` (iterative)."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def _shape_error(op: str, *shapes) -> ValueError:
    return ValueError(f"{op}: incompatible shapes {' and '.join(str(s) for s in shapes)}")


def add(a: Tensor, b) -> Tensor:
    """Elementwise add; also accepts a 1-D bias matching the last axis of ``a``."""
    a, b = _as_tensor(a), _as_tensor(b)
    bias = a.data.shape != b.data.shape
    if bias:
        if b.data.ndim != 1 or a.data.ndim < 1 or a.data.shape[-1] != b.data.shape[0]:
            raise _shape_error("add", a.shape, b.shape)
    out = Tensor(a.data + b.data, (a, b), op="add")

    def _back():
        a.grad += out.grad
        if bias:
            b.grad += out.grad.reshape(-1, b.data.shape[0]).sum(axis=0)
        else:
            b.grad += out.grad

    out._backward = _back
    return out


def subtract(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise _shape_error("subtract", a.shape, b.shape)
    out = Tensor(a.data - b.data, (a, b), op="subtract")

    def _back():
        a.grad += out.grad
        b.grad -= out.grad

    out._backward = _back
    return out


def multiply(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape != b.data.shape:
        raise _shape_error("multiply", a.shape, b.shape)
    out = Tensor(a.data * b.data, (a, b), op="multiply")

    def _back():
        a.grad += out.grad * b.data
        b.grad += out.grad * a.data

    out._backward = _back
    return out


def scale(a: Tensor, s: float) -> Tensor:
    out = Tensor(a.data * s, (a,), op="scale")

    def _back():
        a.grad += out.grad * s

    out._backward = _back
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise _shape_error("matmul", a.shape, b.shape)
    out = Tensor(a.data @ b.data, (a, b), op="matmul")

    def _back():
        a.grad += out.grad @ b.data.T
        b.grad += a.data.T @ out.grad

    out._backward = _back
    return out


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise _shape_error("transpose", a.shape)
    out = Tensor(a.data.T.copy(), (a,), op="transpose")

    def _back():
        a.grad += out.grad.T

    out._backward = _back
    return out


def gather_rows(a: Tensor, indices) -> Tensor:
    """Select rows along axis 0; duplicate indices accumulate gradient."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ValueError(f"gather_rows: indices must be 1-D, got shape {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= a.data.shape[0]):
        raise ValueError(f"gather_rows: index out of range for {a.data.shape[0]} rows")
    out = Tensor(a.data[idx], (a,), op="gather_rows")

    def _back():
        np.add.at(a.grad, idx, out.grad)

    out._backward = _back
    return out


def select(a: Tensor, index: int) -> Tensor:
    """Pick one slice along axis 1, e.g. (N, D, K) -> (N, K)."""
    if a.data.ndim < 2 or not (0 <= index < a.data.shape[1]):
        raise ValueError(f"select: index {index} invalid for shape {a.shape}")
    out = Tensor(a.data[:, index].copy(), (a,), op="select")

    def _back():
        a.grad[:, index] += out.grad

    out._backward = _back
    return out


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    out = Tensor(a.data.reshape(shape).copy(), (a,), op="reshape")

    def _back():
        a.grad += out.grad.reshape(a.data.shape)

    out._backward = _back
    return out


def concat(parts: Iterable[Tensor], axis: int = -1) -> Tensor:
    parts = list(parts)
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), op="concat")
    sizes = [p.data.shape[axis] for p in parts]

    def _back():
        offset = 0
        for p, size in zip(parts, sizes):
            index = [slice(None)] * out.grad.ndim
            index[axis if axis >= 0 else out.grad.ndim + axis] = slice(offset, offset + size)
            p.grad += out.grad[tuple(index)]
            offset += size

    out._backward = _back
    return out


def softmax_t(a: Tensor, tau: float) -> Tensor:
    """Rowwise (last axis) softmax of ``a / tau``; tau -> 0 approaches hard argmax."""
    if tau <= 0:
        raise ValueError(f"softmax_t: temperature must be positive, got {tau}")
    z = a.data / tau
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(s, (a,), op="softmax_t")

    def _back():
        inner = (out.grad * s).sum(axis=-1, keepdims=True)
        a.grad += (out.grad - inner) * s / tau

    out._backward = _back
    return out


def hard_one_hot(values: np.ndarray) -> np.ndarray:
    """one_hot(argmax) along the last axis; ties go to the lowest index."""
    idx = np.argmax(values, axis=-1)
    out = np.zeros_like(values)
    np.put_along_axis(out, idx[..., None], 1.0, axis=-1)
    return out


def straight_through(a: Tensor) -> Tensor:
    """Forward: one_hot(argmax) on the last axis.  Backward: identity."""
    out = Tensor(hard_one_hot(a.data), (a,), op="straight_through")

    def _back():
        a.grad += out.grad

    out._backward = _back
    return out


def stop_gradient(a: Tensor) -> Tensor:
    """Forward identity, backward exactly zero."""
    return Tensor(a.data.copy(), (a,), op="stop_gradient")


def sigmoid(a: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-a.data))
    out = Tensor(s, (a,), op="sigmoid")

    def _back():
        a.grad += out.grad * s * (1.0 - s)

    out._backward = _back
    return out


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)
    out = Tensor(t, (a,), op="tanh")

    def _back():
        a.grad += out.grad * (1.0 - t * t)

    out._backward = _back
    return out


def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.data, 0.0), (a,), op="relu")

    def _back():
        a.grad += out.grad * (a.data > 0)

    out._backward = _back
    return out


def log(a: Tensor, floor: float = LOG_FLOOR) -> Tensor:
    """log with a small floor inside; the floor region gets zero gradient."""
    clipped = np.maximum(a.data, floor)
    out = Tensor(np.log(clipped), (a,), op="log")

    def _back():
        a.grad += out.grad * (a.data >= floor) / clipped

    out._backward = _back
    return out


def tsum(a: Tensor) -> Tensor:
    out = Tensor(a.data.sum(), (a,), op="sum")

    def _back():
        a.grad += out.grad

    out._backward = _back
    return out


def tmean(a: Tensor) -> Tensor:
    n = a.data.size
    out = Tensor(a.data.mean(), (a,), op="mean")

    def _back():
        a.grad += out.grad / n

    out._backward = _back
    return out


def squared_error(a: Tensor, b: Tensor) -> Tensor:
    """Sum of squared differences (a scalar)."""
    if a.data.shape != b.data.shape:
        raise _shape_error("squared_error", a.shape, b.shape)
    diff = a.data - b.data
    out = Tensor((diff * diff).sum(), (a, b), op="squared_error")

    def _back():
        a.grad += 2.0 * diff * out.grad
        b.grad -= 2.0 * diff * out.grad

    out._backward = _back
    return out


def cross_entropy_logits(logits: Tensor, labels) -> Tensor:
    """Mean softmax cross-entropy of 2-D logits against integer labels."""
    y = np.asarray(labels, dtype=np.int64)
    if logits.data.ndim != 2 or y.ndim != 1 or y.shape[0] != logits.data.shape[0]:
        raise _shape_error("cross_entropy_logits", logits.shape, y.shape)
    if y.size and (y.min() < 0 or y.max() >= logits.data.shape[1]):
        raise ValueError("cross_entropy_logits: label out of range")
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1))
    rows = np.arange(y.shape[0])
    losses = lse - z[rows, y]
    out = Tensor(losses.mean(), (logits,), op="cross_entropy_logits")
    probs = np.exp(z - lse[:, None])

    def _back():
        g = probs.copy()
        g[rows, y] -= 1.0
        logits.grad += g * (out.grad / y.shape[0])

    out._backward = _back
    return out


def gradients(loss: Tensor, params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    """Backward pass returning a fresh grad array per requested parameter.

    Raises if the loss is not scalar or a parameter is not part of the graph.
    """
    order = topo_order(loss)
    members = {id(node) for node in order}
    for pname, p in params.items():
        if id(p) not in members:
            raise ValueError(f"parameter '{pname}' is not in the graph")
    loss.backward()
    return {pname: p.grad.copy() for pname, p in params.items()}


_FD_OPAQUE = ("straight_through", "stop_gradient")


def _opaque_op_on_path(loss: Tensor, param: Tensor) -> str | None:
    """Name of an STE/stop-gradient op lying between param and loss, if any."""
    order = topo_order(loss)
    downstream = {id(param)}
    for node in order:
        if id(node) in downstream:
            continue
        if any(id(p) in downstream for p in node._parents):
            downstream.add(id(node))
            if node.op in _FD_OPAQUE:
                return node.op
    return None


def finite_difference_check(
    build_loss: Callable[[], Tensor], param: Tensor, eps: float = 3e-5
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``build_loss`` must rebuild the scalar loss from the current value of
    ``param`` (which is perturbed in place entry by entry).  Error metric per
    entry: |analytic - numeric| / (|analytic| + |numeric| + 1e-12).  The
    default step balances truncation against roundoff so that entries whose
    true gradient is near zero still compare cleanly in double precision.
    """
    if not 0.0 < eps <= 1e-2:
        raise ValueError(f"eps must be in (0, 1e-2], got {eps}")
    loss = build_loss()
    opaque = _opaque_op_on_path(loss, param)
    if opaque is not None:
        raise ValueError(f"finite differences invalid through '{opaque}' on the checked path")
    loss.backward()
    analytic = param.grad.reshape(-1).copy()
    flat = param.data.reshape(-1)
    worst = 0.0
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = build_loss().item()
        flat[i] = orig - eps
        down = build_loss().item()
        flat[i] = orig
        numeric = (up - down) / (2.0 * eps)
        err = abs(analytic[i] - numeric) / (abs(analytic[i]) + abs(numeric) + 1e-12)
        worst = max(worst, err)
    return worst


def global_norm_clip(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Rescale all grads in place so their joint L2 norm is at most max_norm."""
    total = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    if total > max_norm > 0:
        factor = max_norm / total
        for g in grads.values():
            g *= factor
    return total
