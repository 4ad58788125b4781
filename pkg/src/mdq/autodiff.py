"""Minimal reverse-mode autodiff over dense float64 arrays.

The graph is rebuilt on every forward pass (define-by-run). Only the
operations the codec's fixed computation graph needs are provided:
affine layers, ReLU, matrix products (upsampling), gather/stack/concat
glue, the discretized Laplace likelihood, and weighted squared error.
Adam updates live here too.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _dist

LN2 = float(np.log(2.0))


class Tensor:
    """Node in the computation graph: float64 data plus an optional gradient."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def values(self):
        """Flat row-major view of the data."""
        return self.data.reshape(-1)

    @property
    def gradient(self):
        """Flat view of the gradient, or None if not populated."""
        return None if self.grad is None else self.grad.reshape(-1)

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _accumulate(t: Tensor, g) -> None:
    # Constants never allocate a gradient buffer.
    if not t.requires_grad:
        return
    if t.grad is None:
        # First contribution: own a copy (closures may hand us views or
        # buffers they will reuse).
        t.grad = np.array(np.broadcast_to(g, t.data.shape))
    else:
        t.grad += g


def _accumulate_owned(t: Tensor, g: np.ndarray) -> None:
    """Accumulate a gradient buffer the caller guarantees is fresh."""
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = g
    else:
        t.grad += g


def _node(data, parents, backward) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def backward(loss: Tensor) -> None:
    """Populate gradients of every requires_grad tensor reachable from loss.

    Contributions from multiple uses of a tensor accumulate additively.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward expects a scalar loss, got shape {loss.data.shape}")
    # Iterative post-order DFS; the graph is a DAG so each node is visited once.
    topo = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            stack.append((parent, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# Elementwise and reduction ops


def add(a: Tensor, b) -> Tensor:
    """a + b for matching shapes, a trailing bias vector, or a python scalar."""
    if isinstance(b, (int, float)):
        return _node(a.data + b, (a,), lambda g: _accumulate(a, g))
    out_data = a.data + b.data
    bias = b.data.shape != out_data.shape

    def bw(g):
        _accumulate(a, g)
        if b.requires_grad:
            _accumulate(b, g.sum(axis=0) if bias else g)

    return _node(out_data, (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    def bw(g):
        _accumulate(a, g)
        _accumulate(b, -g)

    return _node(a.data - b.data, (a, b), bw)


def mul(a: Tensor, b) -> Tensor:
    """Elementwise product with a matching tensor or a python scalar."""
    if isinstance(b, (int, float)):
        return _node(a.data * b, (a,), lambda g: _accumulate_owned(a, g * b))

    def bw(g):
        _accumulate_owned(a, g * b.data)
        _accumulate_owned(b, g * a.data)

    return _node(a.data * b.data, (a, b), bw)


def relu(x: Tensor) -> Tensor:
    """Elementwise max(0, x); the subgradient at exactly 0 is 0."""
    out_data = np.maximum(x.data, 0.0)
    return _node(out_data, (x,), lambda g: _accumulate_owned(x, g * (out_data > 0.0)))


def exp(x: Tensor) -> Tensor:
    out_data = np.exp(x.data)
    return _node(out_data, (x,), lambda g: _accumulate_owned(x, g * out_data))


def log(x: Tensor) -> Tensor:
    return _node(np.log(x.data), (x,), lambda g: _accumulate_owned(x, g / x.data))


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clip to [lo, hi]; gradient passes only strictly inside the interval."""
    mask = (x.data > lo) & (x.data < hi)
    return _node(np.clip(x.data, lo, hi), (x,), lambda g: _accumulate_owned(x, g * mask))


def tsum(x: Tensor) -> Tensor:
    def bw(g):
        _accumulate(x, np.broadcast_to(g, x.data.shape))

    return _node(np.asarray(x.data.sum()), (x,), bw)


def weighted_sum(x: Tensor, w: np.ndarray) -> Tensor:
    """Scalar sum(x * w) for a constant weight array."""
    def bw(g):
        _accumulate_owned(x, g * w)

    return _node(np.asarray(np.sum(x.data * w)), (x,), bw)


def weighted_sq_error(pred: Tensor, target: np.ndarray, row_weights: np.ndarray) -> Tensor:
    """Scalar sum over rows/cols of row_weights * (pred - target)^2."""
    diff = pred.data - target

    def bw(g):
        _accumulate_owned(pred, (2.0 * g) * diff * row_weights)

    return _node(np.asarray(np.sum(diff * diff * row_weights)), (pred,), bw)


# ---------------------------------------------------------------------------
# Linear algebra and shape glue


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape[-1] != b.data.shape[0]:
        raise ValueError(
            f"matmul: inner dimensions differ, {a.data.shape[-1]} vs {b.data.shape[0]}"
        )

    def bw(g):
        if a.requires_grad:
            _accumulate_owned(a, g @ b.data.T)
        if b.requires_grad:
            _accumulate_owned(b, a.data.T @ g)

    return _node(a.data @ b.data, (a, b), bw)


def affine_forward(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """x @ weight + bias for x (B, I), weight (I, O), bias (O,)."""
    if x.data.shape[-1] != weight.data.shape[0]:
        raise ValueError(
            f"affine: input width {x.data.shape[-1]} != weight rows {weight.data.shape[0]}"
        )
    if weight.data.shape[1] != bias.data.shape[0]:
        raise ValueError(
            f"affine: weight cols {weight.data.shape[1]} != bias size {bias.data.shape[0]}"
        )
    out_data = x.data @ weight.data + bias.data

    def bw(g):
        if x.requires_grad:
            _accumulate_owned(x, g @ weight.data.T)
        if weight.requires_grad:
            _accumulate_owned(weight, x.data.T @ g)
        if bias.requires_grad:
            _accumulate_owned(bias, g.sum(axis=0))

    return _node(out_data, (x, weight, bias), bw)


def reshape(x: Tensor, shape) -> Tensor:
    return _node(
        x.data.reshape(shape), (x,), lambda g: _accumulate(x, g.reshape(x.data.shape))
    )


def concat_rows(parts) -> Tensor:
    parts = list(parts)
    sizes = [p.data.shape[0] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                _accumulate(p, g[lo:hi])

    return _node(np.concatenate([p.data for p in parts], axis=0), tuple(parts), bw)


def stack_columns(cols) -> Tensor:
    """Stack 1-D tensors of equal length into a (P, N) matrix."""
    cols = list(cols)

    def bw(g):
        for j, c in enumerate(cols):
            if c.requires_grad:
                _accumulate(c, g[:, j])

    return _node(np.stack([c.data for c in cols], axis=1), tuple(cols), bw)


def select_column(x: Tensor, j: int) -> Tensor:
    def bw(g):
        if x.requires_grad:
            full = np.zeros_like(x.data)
            full[:, j] = g
            _accumulate_owned(x, full)

    return _node(x.data[:, j].copy(), (x,), bw)


def gather(x: Tensor, idx: np.ndarray) -> Tensor:
    """out[p, c] = x.flat[idx[p, c]]; entries with idx < 0 contribute 0."""
    flat = x.data.reshape(-1)
    oob = idx < 0
    out_data = flat[np.maximum(idx, 0)]
    if oob.any():
        out_data = np.where(oob, 0.0, out_data)

    def bw(g):
        if x.requires_grad:
            valid = ~oob
            contrib = np.bincount(
                idx[valid].ravel(), weights=g[valid].ravel(), minlength=flat.size
            )
            _accumulate_owned(x, contrib.reshape(x.data.shape))

    return _node(out_data, (x,), bw)


def laplace_interval_logp(y: Tensor, mu: Tensor, b: Tensor, p_min: float) -> Tensor:
    """-log2 P[y-0.5, y+0.5] under Laplace(mu, b), with P floored at p_min.

    Differentiable in y, mu and b. The floor (and the cap at 1) zero the
    gradient exactly where they are active.
    """
    p, pdf_lo, pdf_hi, t_lo, t_hi = _dist.interval_prob_parts(y.data, mu.data, b.data)
    clipped = np.clip(p, p_min, 1.0)
    inside = (p > p_min) & (p < 1.0)
    out_data = -np.log2(clipped)

    def bw(g):
        # d(-log2 p)/dp = -1 / (p ln 2); chain into the interval bounds.
        gp = np.where(inside, -g / (clipped * LN2), 0.0)
        d_y = pdf_hi - pdf_lo
        if y.requires_grad:
            _accumulate_owned(y, gp * d_y)
        if mu.requires_grad:
            _accumulate_owned(mu, -gp * d_y)
        if b.requires_grad:
            _accumulate_owned(b, gp * (t_lo * pdf_lo - t_hi * pdf_hi))

    return _node(out_data, (y, mu, b), bw)


def laplace_rate_pair(pair: Tensor, y: Tensor, p_min: float, log_b_lo: float, log_b_hi: float) -> Tensor:
    """Fused rate head: pair[:, 0] is mu, pair[:, 1] the raw scale, with
    the scale mapped through exp(clip(raw, log_b_lo, log_b_hi)).

    Equivalent to exp/clamp/select + laplace_interval_logp but touching
    the (P, 2) prediction tensor once (hot path of the training loop).
    """
    raw = pair.data[:, 1]
    raw_inside = (raw > log_b_lo) & (raw < log_b_hi)
    b = np.exp(np.clip(raw, log_b_lo, log_b_hi))
    mu = pair.data[:, 0]
    p, pdf_lo, pdf_hi, t_lo, t_hi = _dist.interval_prob_parts(y.data, mu, b)
    clipped = np.clip(p, p_min, 1.0)
    inside = (p > p_min) & (p < 1.0)
    out_data = -np.log2(clipped)

    def bw(g):
        gp = np.where(inside, -g / (clipped * LN2), 0.0)
        d_y = pdf_hi - pdf_lo
        if y.requires_grad:
            _accumulate_owned(y, gp * d_y)
        if pair.requires_grad:
            gpair = np.empty_like(pair.data)
            gpair[:, 0] = -gp * d_y
            gpair[:, 1] = np.where(
                raw_inside, gp * (t_lo * pdf_lo - t_hi * pdf_hi) * b, 0.0
            )
            _accumulate_owned(pair, gpair)

    return _node(out_data, (pair, y), bw)


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    """Per-parameter Adam accumulator."""

    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    lr: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie strictly in (0, 1)")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")

    @classmethod
    def for_param(cls, param: Tensor, lr: float = 0.1, **kwargs) -> "AdamState":
        return cls(
            first_moment=np.zeros_like(param.data),
            second_moment=np.zeros_like(param.data),
            lr=lr,
            **kwargs,
        )


def adam_step(param: Tensor, state: AdamState) -> None:
    """Standard bias-corrected Adam update; clears the gradient afterwards."""
    if param.grad is None:
        raise ValueError("adam_step: parameter has no gradient")
    g = param.grad
    state.step_count += 1
    state.first_moment *= state.beta1
    state.first_moment += (1.0 - state.beta1) * g
    state.second_moment *= state.beta2
    state.second_moment += (1.0 - state.beta2) * (g * g)
    m_hat = state.first_moment / (1.0 - state.beta1 ** state.step_count)
    v_hat = state.second_moment / (1.0 - state.beta2 ** state.step_count)
    param.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    param.grad = None
