"""Reverse-mode automatic differentiation on dense float64 arrays.

A Tape records every tensor produced during a forward pass in creation
order, which is already a valid topological order, so backward() is a
single reverse sweep. Operands may be Tensors or plain numpy arrays;
plain arrays are treated as constants and receive no gradient.
"""
from __future__ import annotations

import numpy as np


class AutodiffError(Exception):
    """Base class for differentiation failures."""


class ShapeError(AutodiffError):
    pass


class NumericError(AutodiffError):
    """NaN or Inf appeared in a tensor value."""


class NonDeterministicError(AutodiffError):
    pass


class Tape:
    """Recording of one forward pass. One backward sweep per tape."""

    def __init__(self, check_finite: bool = True):
        self.nodes: list[Tensor] = []
        self.check_finite = check_finite
        self.consumed = False

    def leaf(self, value, name: str = "leaf") -> "Tensor":
        return Tensor(value, self, name=name)


class Tensor:
    __slots__ = ("value", "grad", "tape", "parents", "vjp", "name")

    def __init__(self, value, tape: Tape, parents=(), vjp=None, name: str = ""):
        value = np.asarray(value, dtype=np.float64)
        if tape.check_finite and not np.isfinite(value).all():
            raise NumericError(f"non-finite values produced by op '{name or 'leaf'}'")
        self.value = value
        self.grad = None
        self.tape = tape
        self.parents = parents
        self.vjp = vjp
        self.name = name
        tape.nodes.append(self)

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Tensor({self.name or 'unnamed'}, shape={self.value.shape})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)


def _value(x):
    return x.value if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def _tape_of(*operands) -> Tape:
    for x in operands:
        if isinstance(x, Tensor):
            return x.tape
    raise TypeError("at least one operand must be a Tensor")


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _binary(name, a, b, value_fn, grad_a, grad_b):
    tape = _tape_of(a, b)
    av, bv = _value(a), _value(b)
    try:
        value = value_fn(av, bv)
    except ValueError as exc:
        raise ShapeError(f"{name}: incompatible shapes {av.shape} and {bv.shape}") from exc
    parents, slots = [], []
    if isinstance(a, Tensor):
        parents.append(a)
        slots.append(0)
    if isinstance(b, Tensor):
        parents.append(b)
        slots.append(1)

    def vjp(g):
        outs = []
        for slot in slots:
            outs.append(grad_a(g, av, bv) if slot == 0 else grad_b(g, av, bv))
        return outs

    return Tensor(value, tape, tuple(parents), vjp, name)


def add(a, b):
    return _binary(
        "add", a, b,
        lambda av, bv: av + bv,
        lambda g, av, bv: _unbroadcast(g, av.shape),
        lambda g, av, bv: _unbroadcast(g, bv.shape),
    )


def sub(a, b):
    return _binary(
        "sub", a, b,
        lambda av, bv: av - bv,
        lambda g, av, bv: _unbroadcast(g, av.shape),
        lambda g, av, bv: _unbroadcast(-g, bv.shape),
    )


def mul(a, b):
    """Hadamard (elementwise, broadcasting) product."""
    return _binary(
        "mul", a, b,
        lambda av, bv: av * bv,
        lambda g, av, bv: _unbroadcast(g * bv, av.shape),
        lambda g, av, bv: _unbroadcast(g * av, bv.shape),
    )


def matmul(a, b):
    av, bv = _value(a), _value(b)
    if av.ndim != 2 or bv.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {av.shape} and {bv.shape}")
    if av.shape[1] != bv.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {av.shape} @ {bv.shape}")
    return _binary(
        "matmul", a, b,
        lambda av, bv: av @ bv,
        lambda g, av, bv: g @ bv.T,
        lambda g, av, bv: av.T @ g,
    )


def weighted_row_sum(weights: np.ndarray, x) -> Tensor:
    """Rows of the output are fixed-weight combinations of rows of x.

    `weights` is a constant (no gradient flows into it); gradients flow
    into x only. Used by the pooling stages where the combination
    weights come from the snapshot, not from learnable parameters.
    """
    w = np.asarray(weights, dtype=np.float64)
    return matmul(w, x)


def transpose(a: Tensor) -> Tensor:
    return Tensor(a.value.T, a.tape, (a,), lambda g: [g.T], "transpose")


def concat_cols(*parts) -> Tensor:
    """Concatenate 2-D blocks along columns."""
    tape = _tape_of(*parts)
    values = [_value(p) for p in parts]
    rows = {v.shape[0] for v in values}
    if len(rows) != 1 or any(v.ndim != 2 for v in values):
        raise ShapeError(f"concat_cols: row counts differ: {[v.shape for v in values]}")
    value = np.concatenate(values, axis=1)
    widths = [v.shape[1] for v in values]
    offsets = np.cumsum([0] + widths)
    parents, spans = [], []
    for k, p in enumerate(parts):
        if isinstance(p, Tensor):
            parents.append(p)
            spans.append((offsets[k], offsets[k + 1]))

    def vjp(g):
        return [g[:, s0:s1] for (s0, s1) in spans]

    return Tensor(value, tape, tuple(parents), vjp, "concat_cols")


def _slice_op(a: Tensor, key, name) -> Tensor:
    def vjp(g):
        out = np.zeros_like(a.value)
        out[key] = g
        return [out]

    return Tensor(a.value[key], a.tape, (a,), vjp, name)


def row_slice(a: Tensor, start: int, stop: int) -> Tensor:
    return _slice_op(a, np.s_[start:stop], "row_slice")


def col_slice(a: Tensor, start: int, stop: int) -> Tensor:
    return _slice_op(a, np.s_[:, start:stop], "col_slice")


def _unary(name, a: Tensor, value, deriv):
    return Tensor(value, a.tape, (a,), lambda g: [g * deriv], name)


def relu(a: Tensor) -> Tensor:
    v = np.maximum(a.value, 0.0)
    return _unary("relu", a, v, (a.value > 0.0).astype(np.float64))


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    v = np.where(a.value > 0.0, a.value, slope * a.value)
    return _unary("leaky_relu", a, v, np.where(a.value > 0.0, 1.0, slope))


def elu(a: Tensor, alpha: float = 1.0) -> Tensor:
    v = np.where(a.value > 0.0, a.value, alpha * np.expm1(np.minimum(a.value, 0.0)))
    return _unary("elu", a, v, np.where(a.value > 0.0, 1.0, v + alpha))


def sigmoid(a: Tensor) -> Tensor:
    x = a.value
    v = np.empty_like(x)
    pos = x >= 0.0
    v[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    v[~pos] = ex / (1.0 + ex)
    return _unary("sigmoid", a, v, v * (1.0 - v))


def tanh(a: Tensor) -> Tensor:
    v = np.tanh(a.value)
    return _unary("tanh", a, v, 1.0 - v * v)


def square(a: Tensor) -> Tensor:
    return _unary("square", a, a.value * a.value, 2.0 * a.value)


def abs_(a: Tensor) -> Tensor:
    return _unary("abs", a, np.abs(a.value), np.sign(a.value))


def sum_all(a: Tensor) -> Tensor:
    def vjp(g):
        return [np.full(a.value.shape, float(g))]

    return Tensor(a.value.sum(), a.tape, (a,), vjp, "sum")


def masked_row_softmax(a: Tensor, mask: np.ndarray) -> Tensor:
    """Softmax over the active entries of each row; inactive entries are 0.

    Every row of `mask` must have at least one active entry.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.value.shape:
        raise ShapeError(f"softmax mask shape {mask.shape} != value shape {a.value.shape}")
    if not mask.any(axis=1).all():
        raise ShapeError("masked_row_softmax: a row has no active entries")
    z = np.where(mask, a.value, -np.inf)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    v = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        dot = (g * v).sum(axis=1, keepdims=True)
        return [v * (g - dot)]

    return Tensor(v, a.tape, (a,), vjp, "masked_row_softmax")


def backward(loss: Tensor) -> None:
    """Fill .grad of every tensor the loss depends on (reverse sweep)."""
    if loss.value.shape != ():
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.value.shape}")
    tape = loss.tape
    if tape.consumed:
        raise AutodiffError("backward already ran on this tape; build a fresh tape")
    tape.consumed = True
    loss.grad = np.array(1.0)
    for node in reversed(tape.nodes):
        if node.grad is None or node.vjp is None:
            continue
        for parent, g in zip(node.parents, node.vjp(node.grad)):
            parent.grad = g if parent.grad is None else parent.grad + g


class ParamStore:
    """Named learnable parameters with paired gradient buffers."""

    def __init__(self):
        self._values: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def add(self, name: str, value) -> None:
        if name in self._values:
            raise ValueError(f"duplicate parameter name: {name}")
        arr = np.array(value, dtype=np.float64)
        self._values[name] = arr
        self.grads[name] = np.zeros_like(arr)

    def __contains__(self, name):
        return name in self._values

    def __getitem__(self, name) -> np.ndarray:
        return self._values[name]

    def names(self):
        return list(self._values)

    def items(self):
        return self._values.items()

    @property
    def size(self) -> int:
        return sum(v.size for v in self._values.values())

    def zero_grads(self) -> None:
        for g in self.grads.values():
            g[...] = 0.0

    def bind(self, tape: Tape) -> dict[str, Tensor]:
        """Create leaf tensors for every parameter on the given tape."""
        return {name: tape.leaf(value, name) for name, value in self._values.items()}

    def harvest(self, binding: dict[str, Tensor]) -> None:
        """Copy leaf gradients into the store; unused parameters get zero."""
        for name, grad in self.grads.items():
            leaf = binding[name]
            if leaf.grad is None:
                grad[...] = 0.0
            else:
                grad[...] = leaf.grad

    def copy(self) -> "ParamStore":
        out = ParamStore()
        for name, value in self._values.items():
            out.add(name, value)
        return out


def grad_check(build_loss, store: ParamStore, eps: float = 1e-4,
               coords_per_param: int = 4, seed: int = 0) -> float:
    """Compare tape gradients against central differences.

    `build_loss(tape, binding)` must rebuild the scalar loss from scratch
    on the given tape. A sampled subset of coordinates of every parameter
    is perturbed by +-eps; returns the worst relative error, with a
    max(|analytic|, |numeric|) + 1e-8 denominator guard.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")

    def eval_value() -> float:
        tape = Tape()
        loss = build_loss(tape, store.bind(tape))
        if loss.value.shape != ():
            raise ShapeError("build_loss must return a scalar tensor")
        return float(loss.value)

    if eval_value() != eval_value():
        raise NonDeterministicError("build_loss returned different values on repeat calls")

    tape = Tape()
    binding = store.bind(tape)
    backward(build_loss(tape, binding))

    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, value in store.items():
        leaf = binding[name]
        analytic = np.zeros_like(value) if leaf.grad is None else leaf.grad
        flat = value.reshape(-1)
        aflat = analytic.reshape(-1)
        count = min(coords_per_param, flat.size)
        for idx in rng.choice(flat.size, size=count, replace=False):
            orig = flat[idx]
            flat[idx] = orig + eps
            f_plus = eval_value()
            flat[idx] = orig - eps
            f_minus = eval_value()
            flat[idx] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            rel = abs(aflat[idx] - numeric) / (max(abs(aflat[idx]), abs(numeric)) + 1e-8)
            worst = max(worst, rel)
    return worst
