"""Dense double precision tensors with reverse-mode differentiation.

Every differentiable operation produces a new :class:`Tensor` that remembers
its parents and a closure mapping the output gradient to one gradient per
parent. :func:`backward` records those tensors into a :class:`ComputationTape`
in topological order and walks it once in reverse.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ShapeError

log = logging.getLogger(__name__)

Scalar = Union[int, float]
GradFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "op", "_parents", "_grad_fn")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self.op = "leaf"
        self._parents: Tuple[Tensor, ...] = ()
        self._grad_fn: Optional[GradFn] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def is_leaf(self) -> bool:
        return self._grad_fn is None

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError("item", self.shape, detail="tensor is not a scalar")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def backward(self) -> None:
        backward(self)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op!r}{flag})"

    def __getitem__(self, index) -> "Tensor":
        return take(self, index)

    def __neg__(self):
        return elementwise("neg", self)

    def __add__(self, other):
        return elementwise("add", self, other)

    def __radd__(self, other):
        return elementwise("add", self, other)

    def __sub__(self, other):
        return elementwise("sub", self, other)

    def __rsub__(self, other):
        return elementwise("add", elementwise("neg", self), other)

    def __mul__(self, other):
        return elementwise("mul", self, other)

    def __rmul__(self, other):
        return elementwise("mul", self, other)

    def __truediv__(self, other):
        return elementwise("div", self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def make_op(op: str, data: np.ndarray, parents: Sequence[Tensor], grad_fn: GradFn) -> Tensor:
    """Wrap a forward result and its gradient rule into a graph node.

    ``grad_fn`` receives the gradient of the output and returns one array
    (or None) per parent, each shaped like that parent.
    """
    out = Tensor.__new__(Tensor)
    out.data = np.asarray(data, dtype=np.float64)
    out.op = op
    out.grad = None
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._grad_fn = grad_fn
    else:
        out._parents = ()
        out._grad_fn = None
    return out


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _sigmoid(x: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


# forward, d(out)/d(in) given (input, output)
_UNARY: Dict[str, Tuple[Callable, Callable]] = {
    "neg": (np.negative, lambda x, y: -np.ones_like(x)),
    "exp": (np.exp, lambda x, y: y),
    "log": (np.log, lambda x, y: 1.0 / x),
    "sqrt": (np.sqrt, lambda x, y: 0.5 / y),
    "square": (np.square, lambda x, y: 2.0 * x),
    "sigmoid": (_sigmoid, lambda x, y: y * (1.0 - y)),
    "softplus": (_softplus, lambda x, y: _sigmoid(x)),
    "tanh": (np.tanh, lambda x, y: 1.0 - y * y),
    "relu": (lambda x: np.maximum(x, 0.0), lambda x, y: (x > 0).astype(np.float64)),
}

_BINARY = ("add", "sub", "mul", "div")


def elementwise(op_kind: str, a: Tensor, b: Union[Tensor, Scalar, None] = None) -> Tensor:
    """Apply a unary or binary elementwise operation.

    Binary operands follow numpy broadcasting, but the result must keep the
    shape of ``a``: ``b`` may be a scalar or broadcast onto ``a``.
    """
    if op_kind in _UNARY:
        if b is not None:
            raise TypeError(f"{op_kind} takes a single operand")
        forward, derivative = _UNARY[op_kind]
        x = a.data
        y = forward(x)
        return make_op(op_kind, y, (a,), lambda g: (g * derivative(x, y),))

    if op_kind not in _BINARY:
        raise ValueError(f"Unknown elementwise operation {op_kind!r}")

    b = as_tensor(b)
    try:
        shape = np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        shape = None
    if shape != a.shape:
        raise ShapeError(op_kind, a.shape, b.shape, detail="second operand must broadcast onto the first")

    x, y = a.data, b.data
    if op_kind == "add":
        return make_op("add", x + y, (a, b), lambda g: (g, _unbroadcast(g, y.shape)))
    if op_kind == "sub":
        return make_op("sub", x - y, (a, b), lambda g: (g, _unbroadcast(-g, y.shape)))
    if op_kind == "mul":
        return make_op(
            "mul", x * y, (a, b), lambda g: (g * y, _unbroadcast(g * x, y.shape))
        )
    return make_op(
        "div",
        x / y,
        (a, b),
        lambda g: (g / y, _unbroadcast(-g * x / (y * y), y.shape)),
    )


def exp(x: Tensor) -> Tensor:
    return elementwise("exp", x)


def log(x: Tensor) -> Tensor:
    return elementwise("log", x)


def sqrt(x: Tensor) -> Tensor:
    return elementwise("sqrt", x)


def square(x: Tensor) -> Tensor:
    return elementwise("square", x)


def sigmoid(x: Tensor) -> Tensor:
    return elementwise("sigmoid", x)


def softplus(x: Tensor) -> Tensor:
    return elementwise("softplus", x)


def tanh(x: Tensor) -> Tensor:
    return elementwise("tanh", x)


def relu(x: Tensor) -> Tensor:
    return elementwise("relu", x)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError("matmul", a.shape, b.shape, detail="both operands must be rank 2")
    if a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape, detail="inner extents differ")
    x, y = a.data, b.data
    return make_op("matmul", x @ y, (a, b), lambda g: (g @ y.T, x.T @ g))


def _check_axis(op: str, x: Tensor, axis: int) -> int:
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(op, x.shape, detail=f"axis {axis} is out of range")
    return axis % x.ndim


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    axis = _check_axis("softmax", x, axis)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def grad_fn(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return make_op("softmax", y, (x,), grad_fn)


def reduce(x: Tensor, axis: Optional[int] = None, kind: str = "sum", keepdims: bool = False) -> Tensor:
    if kind not in ("sum", "mean"):
        raise ValueError(f"Unknown reduction {kind!r}")
    if axis is None:
        count = x.data.size
        y = x.data.sum()
        if kind == "mean":
            y = y / count

        def grad_fn(g):
            g = np.broadcast_to(g, x.shape)
            return (g / count if kind == "mean" else g.copy(),)

        return make_op(kind, y, (x,), grad_fn)

    axis = _check_axis(kind, x, axis)
    count = x.shape[axis]
    y = x.data.sum(axis=axis, keepdims=keepdims)
    if kind == "mean":
        y = y / count

    def grad_fn(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        g = np.broadcast_to(g, x.shape)
        return (g / count if kind == "mean" else g.copy(),)

    return make_op(kind, y, (x,), grad_fn)


def sum(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    return reduce(x, axis, "sum", keepdims)


def mean(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    return reduce(x, axis, "mean", keepdims)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        y = x.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", x.shape, tuple(shape)) from None
    return make_op("reshape", y, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise ShapeError("transpose", x.shape, detail="tensor must be rank 2")
    return make_op("transpose", x.data.T, (x,), lambda g: (g.T,))


def take(x: Tensor, index) -> Tensor:
    y = x.data[index]

    def grad_fn(g):
        full = np.zeros_like(x.data)
        np.add.at(full, index, g)
        return (full,)

    return make_op("take", y, (x,), grad_fn)


def broadcast_to(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    try:
        y = np.broadcast_to(x.data, shape)
    except ValueError:
        raise ShapeError("broadcast_to", x.shape, shape) from None
    return make_op("broadcast", y.copy(), (x,), lambda g: (_unbroadcast(g, x.shape),))


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    if not tensors:
        raise ValueError("concat needs at least one tensor")
    axis = _check_axis("concat", tensors[0], axis)
    try:
        y = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError("concat", *(t.shape for t in tensors)) from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def grad_fn(g):
        return tuple(np.split(g, bounds, axis=axis))

    return make_op("concat", y, tuple(tensors), grad_fn)


def stack_sum(tensors: Sequence[Tensor]) -> Tensor:
    """Sum equally shaped tensors independently of their order.

    The addends are sorted elementwise before summation, so any permutation
    of ``tensors`` produces bit-identical output.
    """
    if not tensors:
        raise ValueError("stack_sum needs at least one tensor")
    shape = tensors[0].shape
    for t in tensors[1:]:
        if t.shape != shape:
            raise ShapeError("stack_sum", shape, t.shape)
    stacked = np.sort(np.stack([t.data for t in tensors]), axis=0)
    y = np.add.reduce(stacked, axis=0)
    return make_op("stack_sum", y, tuple(tensors), lambda g: tuple(g for _ in tensors))


def l2_normalize_rows(x: Tensor) -> Tensor:
    """Scale each row of a rank-2 tensor to unit L2 norm; zero rows stay zero."""
    if x.ndim != 2:
        raise ShapeError("l2_normalize_rows", x.shape, detail="tensor must be rank 2")
    norms = np.sqrt((x.data * x.data).sum(axis=1, keepdims=True))
    safe = np.where(norms > 0, norms, 1.0)
    y = np.where(norms > 0, x.data / safe, 0.0)

    def grad_fn(g):
        inner = (g * y).sum(axis=1, keepdims=True)
        return (np.where(norms > 0, (g - y * inner) / safe, 0.0),)

    return make_op("l2_normalize", y, (x,), grad_fn)


@dataclass
class ComputationTape:
    """Topologically ordered record of the operations a tensor depends on."""

    entries: List[Tensor] = field(default_factory=list)

    @classmethod
    def record(cls, root: Tensor) -> "ComputationTape":
        order: List[Tensor] = []
        seen = set()
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
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        return cls(order)

    def __len__(self):
        return len(self.entries)

    def backward(self, seed: np.ndarray) -> None:
        root = self.entries[-1]
        pending: Dict[int, np.ndarray] = {id(root): seed}
        for node in reversed(self.entries):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            if node.is_leaf:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._grad_fn(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                pending[key] = pending[key] + pg if key in pending else pg


def backward(loss: Tensor) -> ComputationTape:
    """Accumulate d(loss)/d(leaf) into ``grad`` of every reachable leaf."""
    if loss.data.size != 1 or loss.ndim > 1:
        raise ShapeError("backward", loss.shape, detail="loss must be a scalar")
    tape = ComputationTape.record(loss)
    if loss.requires_grad:
        tape.backward(np.ones_like(loss.data))
    return tape


@dataclass
class GradCheckReport:
    errors: np.ndarray
    analytic: np.ndarray
    numeric: np.ndarray
    tolerance: float

    @property
    def max_error(self) -> float:
        return float(self.errors.max()) if self.errors.size else 0.0

    @property
    def passed(self) -> bool:
        return bool(self.max_error <= self.tolerance)

    @property
    def failures(self) -> List[Tuple[int, ...]]:
        return [tuple(i) for i in np.argwhere(self.errors > self.tolerance)]


def _relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float) -> np.ndarray:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / scale


def grad_check(
    f: Callable[[Tensor], Tensor],
    x,
    step: float = 1e-5,
    tol: float = 1e-5,
    floor: float = 1e-2,
) -> GradCheckReport:
    """Compare the analytic gradient of scalar ``f`` at ``x`` against central differences.

    The error of each element is ``|analytic - numeric| / max(|analytic|, |numeric|, floor)``.
    Gradients smaller than ``floor`` are therefore held to an absolute bound of
    ``tol * floor``; pass ``floor=0`` for a purely relative check.
    """
    base = np.array(as_tensor(x).data, dtype=np.float64)
    probe = Tensor(base, requires_grad=True)
    backward(f(probe))
    analytic = probe.grad.copy()

    numeric = np.zeros_like(base)
    for index in np.ndindex(base.shape):
        shifted = base.copy()
        shifted[index] += step
        upper = f(Tensor(shifted)).item()
        shifted[index] -= 2 * step
        lower = f(Tensor(shifted)).item()
        numeric[index] = (upper - lower) / (2 * step)
    return GradCheckReport(_relative_error(analytic, numeric, floor), analytic, numeric, tol)


def grad_check_parameter(
    loss_fn: Callable[[], Tensor],
    param: Tensor,
    *,
    indices: Optional[Sequence[Tuple[int, ...]]] = None,
    step: float = 1e-5,
    tol: float = 1e-5,
    floor: float = 1e-2,
) -> GradCheckReport:
    """Finite-difference check of a parameter that ``loss_fn`` closes over.

    ``param.data`` is perturbed in place and restored afterwards; ``indices``
    limits the check to a subset of elements.
    """
    if indices is None:
        indices = list(np.ndindex(param.shape))
    param.zero_grad()
    backward(loss_fn())
    analytic_full = param.grad.copy()

    analytic = np.array([analytic_full[i] for i in indices])
    numeric = np.zeros(len(indices))
    for n, index in enumerate(indices):
        original = param.data[index]
        try:
            param.data[index] = original + step
            upper = loss_fn().item()
            param.data[index] = original - step
            lower = loss_fn().item()
        finally:
            param.data[index] = original
        numeric[n] = (upper - lower) / (2 * step)
    param.zero_grad()
    return GradCheckReport(_relative_error(analytic, numeric, floor), analytic, numeric, tol)


@dataclass
class AdamState:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    state: AdamState,
    params: Mapping[str, Tensor],
    grads: Optional[Mapping[str, np.ndarray]] = None,
) -> AdamState:
    """Apply one bias-corrected Adam update to ``params`` in place.

    Gradients default to each parameter's ``grad`` buffer.
    """
    if grads is None:
        grads = {name: p.grad for name, p in params.items()}

    for name, param in params.items():
        g = grads[name]
        if g is None:
            g = np.zeros_like(param.data)
        if g.shape != param.shape:
            raise ShapeError(f"adam_step[{name}]", param.shape, g.shape)
        m = state.first_moment.setdefault(name, np.zeros_like(param.data))
        v = state.second_moment.setdefault(name, np.zeros_like(param.data))
        if m.shape != param.shape or v.shape != param.shape:
            raise ShapeError(f"adam_step[{name}]", param.shape, m.shape, detail="moment buffers")

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1**state.step
    correction2 = 1.0 - b2**state.step
    for name, param in params.items():
        g = grads[name] if grads[name] is not None else np.zeros_like(param.data)
        m = state.first_moment[name]
        v = state.second_moment[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        param.data -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return state
