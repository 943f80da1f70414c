"""A small reverse-mode differentiation engine over numpy arrays.

Graphs are built eagerly: every op computes its forward value immediately and
records a closure that maps the output adjoint to input adjoints. The op set is
just what the game models need. Channel stacks use the layout
``(batch, channel, n, m)`` and behaviors ``(batch, n)``.

Max pooling routes gradient to the lowest-index maximizer; relu and abs use 0
as the subgradient at 0.
"""

from __future__ import annotations

from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import NotScalarRoot, ShapeMismatch


class Node:
    __slots__ = ("value", "parents", "backward_fn", "grad", "op", "name", "requires_grad")

    def __init__(self, value, parents=(), backward_fn=None, op="const", name=None):
        self.value = np.asarray(value, dtype=float)
        self.parents: tuple[Node, ...] = tuple(parents)
        self.requires_grad = op == "var" or any(p.requires_grad for p in self.parents)
        self.backward_fn = backward_fn if self.requires_grad else None
        self.grad: np.ndarray | None = None
        self.op = op
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node(op={self.op}, shape={self.value.shape})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)


def as_node(x) -> Node:
    return x if isinstance(x, Node) else Node(x)


def constant(x) -> Node:
    return Node(x)


def variable(x, name=None) -> Node:
    return Node(np.array(x, dtype=float), op="var", name=name)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# elementwise ----------------------------------------------------------------


def add(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    out = a.value + b.value
    return Node(
        out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add"
    )


def sub(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    return Node(
        a.value - b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)),
        "sub",
    )


def mul(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    av, bv = a.value, b.value
    return Node(
        av * bv,
        (a, b),
        lambda g: (_unbroadcast(g * bv, a.shape), _unbroadcast(g * av, b.shape)),
        "mul",
    )


def div(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    av, bv = a.value, b.value
    out = av / bv
    return Node(
        out,
        (a, b),
        lambda g: (_unbroadcast(g / bv, a.shape), _unbroadcast(-g * out / bv, b.shape)),
        "div",
    )


def neg(a) -> Node:
    a = as_node(a)
    return Node(-a.value, (a,), lambda g: (-g,), "neg")


def exp(a) -> Node:
    a = as_node(a)
    out = np.exp(a.value)
    return Node(out, (a,), lambda g: (g * out,), "exp")


def log(a) -> Node:
    a = as_node(a)
    av = a.value
    return Node(np.log(av), (a,), lambda g: (g / av,), "log")


def square(a) -> Node:
    a = as_node(a)
    av = a.value
    return Node(av * av, (a,), lambda g: (2.0 * g * av,), "square")


def abs_(a) -> Node:
    a = as_node(a)
    av = a.value
    return Node(np.abs(av), (a,), lambda g: (g * np.sign(av),), "abs")


def relu(a) -> Node:
    a = as_node(a)
    av = a.value
    mask = av > 0
    return Node(np.where(mask, av, 0.0), (a,), lambda g: (g * mask,), "relu")


# pooling ----------------------------------------------------------------------


def _max_pool(a: Node, axis: int, op: str) -> Node:
    av = a.value
    idx = np.expand_dims(np.argmax(av, axis=axis), axis)
    best = np.take_along_axis(av, idx, axis=axis)
    out = np.broadcast_to(best, av.shape).copy()

    def backward(g):
        gin = np.zeros_like(av)
        np.put_along_axis(gin, idx, g.sum(axis=axis, keepdims=True), axis=axis)
        return (gin,)

    return Node(out, (a,), backward, op)


def rowmax(a) -> Node:
    """Replace every entry with the maximum of its row (last axis)."""
    return _max_pool(as_node(a), -1, "rowmax")


def colmax(a) -> Node:
    """Replace every entry with the maximum of its column (second-to-last axis)."""
    return _max_pool(as_node(a), -2, "colmax")


# reductions and reshaping -------------------------------------------------------


def sum_(a, axis=None) -> Node:
    a = as_node(a)
    av = a.value
    out = av.sum(axis=axis)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, av.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), av.shape).copy(),)

    return Node(out, (a,), backward, "sum")


def rowsum(a) -> Node:
    return sum_(a, axis=-1)


def reshape(a, shape) -> Node:
    a = as_node(a)
    old = a.shape
    return Node(a.value.reshape(shape), (a,), lambda g: (g.reshape(old),), "reshape")


def take(a, index) -> Node:
    """Index or slice the last axis."""
    a = as_node(a)
    av = a.value

    def backward(g):
        gin = np.zeros_like(av)
        gin[..., index] += g
        return (gin,)

    return Node(av[..., index], (a,), backward, "take")


def concat(nodes: Sequence, axis: int) -> Node:
    nodes = [as_node(n) for n in nodes]
    values = [n.value for n in nodes]
    ref = values[0].shape
    ax = axis % len(ref)
    for v in values[1:]:
        if v.ndim != len(ref) or any(s != r for i, (s, r) in enumerate(zip(v.shape, ref)) if i != ax):
            raise ShapeMismatch(f"cannot concatenate shapes {ref} and {v.shape} on axis {axis}")
    bounds = np.cumsum([v.shape[ax] for v in values])[:-1]
    return Node(
        np.concatenate(values, axis=ax),
        nodes,
        lambda g: tuple(np.split(g, bounds, axis=ax)),
        "concat",
    )


def stack(nodes: Sequence, axis: int) -> Node:
    nodes = [as_node(n) for n in nodes]
    shapes = {n.shape for n in nodes}
    if len(shapes) != 1:
        raise ShapeMismatch(f"cannot stack shapes {sorted(shapes)}")
    out = np.stack([n.value for n in nodes], axis=axis)
    ax = axis % out.ndim
    return Node(
        out,
        nodes,
        lambda g: tuple(np.moveaxis(g, ax, 0)),
        "stack",
    )


# network layers ---------------------------------------------------------------


def softmax(a) -> Node:
    """Softmax over the last axis, with max subtraction."""
    a = as_node(a)
    z = a.value - a.value.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return Node(out, (a,), backward, "softmax")


def channel_mix(w, x, b) -> Node:
    """Affine combination of channels: ``out[:, o] = sum_c w[o, c] x[:, c] + b[o]``.

    ``w`` is (O, C), ``x`` is (B, C, n, m), ``b`` is (O,).
    """
    w, x, b = as_node(w), as_node(x), as_node(b)
    wv, xv = w.value, x.value
    if wv.ndim != 2 or xv.ndim != 4 or wv.shape[1] != xv.shape[1] or b.shape != (wv.shape[0],):
        raise ShapeMismatch(
            f"channel_mix: weights {wv.shape}, input {xv.shape}, bias {b.shape}"
        )
    out = np.einsum("oc,bcnm->bonm", wv, xv) + b.value[None, :, None, None]

    def backward(g):
        return (
            np.einsum("bonm,bcnm->oc", g, xv),
            np.einsum("oc,bonm->bcnm", wv, g),
            g.sum(axis=(0, 2, 3)),
        )

    return Node(out, (w, x, b), backward, "channel_mix")


def mix(w, x) -> Node:
    """Weighted sum over the channel axis: ``w`` (C,), ``x`` (B, C, k) -> (B, k)."""
    w, x = as_node(w), as_node(x)
    wv, xv = w.value, x.value
    if wv.ndim != 1 or xv.ndim != 3 or xv.shape[1] != wv.shape[0]:
        raise ShapeMismatch(f"mix: weights {wv.shape}, input {xv.shape}")
    out = np.einsum("c,bck->bk", wv, xv)
    return Node(
        out,
        (w, x),
        lambda g: (np.einsum("bk,bck->c", g, xv), wv[None, :, None] * g[:, None, :]),
        "mix",
    )


def matvec(u, s) -> Node:
    """Batched expected utilities: ``u`` (B, n, m) times ``s`` (B, m) -> (B, n)."""
    u, s = as_node(u), as_node(s)
    uv, sv = u.value, s.value
    if uv.ndim != 3 or sv.shape != (uv.shape[0], uv.shape[2]):
        raise ShapeMismatch(f"matvec: matrix {uv.shape}, vector {sv.shape}")
    out = np.einsum("bnm,bm->bn", uv, sv)
    return Node(
        out,
        (u, s),
        lambda g: (g[:, :, None] * sv[:, None, :], np.einsum("bnm,bn->bm", uv, g)),
        "matvec",
    )


def linear_potential(theta, x, y) -> Node:
    """``(t_x x + t_y y) / ||t||`` elementwise, for ``theta`` of shape (2,)."""
    theta, x, y = as_node(theta), as_node(x), as_node(y)
    tv, xv, yv = theta.value, x.value, y.value
    r = float(np.hypot(tv[0], tv[1]))
    c = tv / r
    out = c[0] * xv + c[1] * yv

    def backward(g):
        raw = np.array([(g * xv).sum(), (g * yv).sum()])
        gtheta = (raw - c * (c @ raw)) / r
        return (gtheta, _unbroadcast(g * c[0], x.shape), _unbroadcast(g * c[1], y.shape))

    return Node(out, (theta, x, y), backward, "linear_potential")


# backward pass ----------------------------------------------------------------


def topological_order(root: Node) -> list[Node]:
    order: list[Node] = []
    seen: set[int] = set()
    stack_: list[tuple[Node, bool]] = [(root, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack_.append((p, False))
    return order


def backward(root: Node) -> None:
    """Populate ``.grad`` on every node reachable from a scalar ``root``."""
    if root.value.size != 1:
        raise NotScalarRoot(f"backward needs a scalar root, got shape {root.shape}")
    order = topological_order(root)
    for node in order:
        node.grad = None
    root.grad = np.ones_like(root.value)
    for node in reversed(order):
        if node.backward_fn is None or node.grad is None:
            continue
        for parent, g in zip(node.parents, node.backward_fn(node.grad)):
            if not parent.requires_grad:
                continue
            parent.grad = g if parent.grad is None else parent.grad + g


def gradients(root: Node, params: Mapping[str, Node]) -> dict[str, np.ndarray]:
    backward(root)
    return {
        k: (np.zeros_like(v.value) if v.grad is None else np.asarray(v.grad).reshape(v.shape))
        for k, v in params.items()
    }


def kink_margin(root: Node) -> float:
    """Distance of the current point from the nearest non-differentiability.

    Looks at relu/abs inputs (distance from 0) and max pooling (gap between the
    two largest entries along the pooled axis).
    """
    margin = np.inf
    for node in topological_order(root):
        if node.op in ("relu", "abs"):
            margin = min(margin, float(np.min(np.abs(node.parents[0].value))))
        elif node.op in ("rowmax", "colmax"):
            v = node.parents[0].value
            axis = -1 if node.op == "rowmax" else -2
            if v.shape[axis] > 1:
                part = np.sort(v, axis=axis)
                top = np.take(part, -1, axis=axis) - np.take(part, -2, axis=axis)
                margin = min(margin, float(np.min(top)))
    return margin


def grad_check(
    loss_fn: Callable[[Mapping[str, Node]], Node],
    params: Mapping[str, np.ndarray],
    epsilon: float = 1e-5,
    floor: float | None = None,
) -> float:
    """Max relative error between backward and central finite differences.

    ``loss_fn`` builds a scalar graph from variable nodes keyed like ``params``.
    The relative error of each coordinate is ``|a - f| / max(|a|, |f|, floor)``.
    The default floor, ``1e-6 * max(1, |loss|)``, sits well above the rounding
    noise of central differences so that exactly-zero gradients (dead units)
    do not register as errors.
    """
    base = {k: np.array(v, dtype=float) for k, v in params.items()}
    nodes = {k: variable(v, k) for k, v in base.items()}
    root = loss_fn(nodes)
    analytic = gradients(root, nodes)
    if floor is None:
        floor = 1e-6 * max(1.0, abs(float(root.value)))
    worst = 0.0
    for key, value in base.items():
        for idx in np.ndindex(value.shape):
            vals, points = [], []
            for step in (epsilon, -epsilon):
                shifted = {k: v.copy() for k, v in base.items()}
                shifted[key][idx] += step
                points.append(shifted[key][idx])
                vals.append(float(loss_fn({k: constant(v) for k, v in shifted.items()}).value))
            # divide by the representable step, not the nominal 2 * epsilon
            fd = (vals[0] - vals[1]) / (points[0] - points[1])
            a = float(analytic[key][idx])
            err = abs(a - fd) / max(abs(a), abs(fd), floor)
            worst = max(worst, err)
    return worst


def forward(root: Node) -> np.ndarray:
    """Graphs evaluate eagerly, so this only hands back the cached value."""
    return root.value
