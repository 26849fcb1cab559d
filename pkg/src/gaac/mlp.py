"""Minimal dense feedforward network with exact reverse-mode gradients.

Backs every function approximator in the pipeline: the online value and
policy networks, the parameter-fitness regressor and the final policy
network. Everything is float64 and seeded, so training trajectories are
bit-reproducible on a given platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.blas import dger

ACTIVATIONS = ("linear", "tanh", "elu", "softplus")

ELU_ALPHA = 1.0


@dataclass(frozen=True)
class LayerSpec:
    """Widths and activation tag of one dense layer."""

    input_width: int
    output_width: int
    activation: str = "linear"

    def __post_init__(self):
        if self.input_width < 1 or self.output_width < 1:
            raise ValueError(f"layer widths must be >= 1, got {self.input_width}->{self.output_width}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}, expected one of {ACTIVATIONS}")


def layer_chain(widths: list[int], hidden: str, output: str = "linear") -> list[LayerSpec]:
    """Build LayerSpecs for widths [in, h1, ..., out] with a shared hidden activation."""
    if len(widths) < 2:
        raise ValueError("need at least input and output widths")
    specs = []
    for i in range(len(widths) - 1):
        act = output if i == len(widths) - 2 else hidden
        specs.append(LayerSpec(widths[i], widths[i + 1], act))
    return specs


@dataclass
class Mlp:
    """Dense network: per-layer (output_width x input_width) weights and bias vectors."""

    layers: list[LayerSpec]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def input_width(self) -> int:
        return self.layers[0].input_width

    @property
    def output_width(self) -> int:
        return self.layers[-1].output_width

    def copy(self) -> "Mlp":
        return Mlp(list(self.layers), [w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass
class GradientBundle:
    """Per-layer weight and bias gradients, shape-congruent with the owning Mlp."""

    weight_grads: list[np.ndarray]
    bias_grads: list[np.ndarray]

    def scaled(self, factor: float) -> "GradientBundle":
        return GradientBundle([factor * g for g in self.weight_grads], [factor * g for g in self.bias_grads])


def _check_chain(spec: list[LayerSpec]) -> None:
    if not spec:
        raise ValueError("empty layer spec")
    for a, b in zip(spec, spec[1:]):
        if a.output_width != b.input_width:
            raise ValueError(f"width mismatch between consecutive layers: {a.output_width} -> {b.input_width}")


def init_xavier(spec: list[LayerSpec], seed: int) -> Mlp:
    """Glorot-normal weights, variance 2/(fan_in+fan_out); zero biases; seeded."""
    _check_chain(spec)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for layer in spec:
        std = np.sqrt(2.0 / (layer.input_width + layer.output_width))
        weights.append(rng.normal(0.0, std, size=(layer.output_width, layer.input_width)))
        biases.append(np.zeros(layer.output_width))
    return Mlp(list(spec), weights, biases)


def _activate(z: np.ndarray, tag: str) -> np.ndarray:
    if tag == "linear":
        return z
    if tag == "tanh":
        return np.tanh(z)
    if tag == "elu":
        return np.where(z > 0.0, z, ELU_ALPHA * np.expm1(z))
    # softplus, overflow-safe: log(1+e^z) = max(z,0) + log1p(e^-|z|)
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _activate_grad(z: np.ndarray, a: np.ndarray, tag: str) -> np.ndarray:
    if tag == "linear":
        return np.ones_like(z)
    if tag == "tanh":
        return 1.0 - a * a
    if tag == "elu":
        return np.where(z > 0.0, 1.0, a + ELU_ALPHA)
    return 1.0 / (1.0 + np.exp(-z))  # softplus' = sigmoid


def forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Evaluate the network on one input vector."""
    a = np.asarray(x, dtype=np.float64)
    if a.shape != (net.input_width,):
        raise ValueError(f"input shape {a.shape} does not match input width {net.input_width}")
    for layer, w, b in zip(net.layers, net.weights, net.biases):
        a = _activate(w @ a + b, layer.activation)
    return a


def forward_batch(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Evaluate the network on a (n, input_width) batch; returns (n, output_width)."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != net.input_width:
        raise ValueError(f"batch shape {a.shape} does not match input width {net.input_width}")
    for layer, w, b in zip(net.layers, net.weights, net.biases):
        a = _activate(a @ w.T + b, layer.activation)
    return a


def backward(net: Mlp, x: np.ndarray, upstream: np.ndarray) -> GradientBundle:
    """Gradients of upstream . output with respect to all weights and biases.

    Recomputes the forward pass internally; exact reverse-mode derivatives.
    """
    up = np.asarray(upstream, dtype=np.float64)
    if up.shape != (net.output_width,):
        raise ValueError(f"upstream shape {up.shape} does not match output width {net.output_width}")
    a = np.asarray(x, dtype=np.float64)
    if a.shape != (net.input_width,):
        raise ValueError(f"input shape {a.shape} does not match input width {net.input_width}")

    inputs, pre, post = [], [], []
    for layer, w, b in zip(net.layers, net.weights, net.biases):
        inputs.append(a)
        z = w @ a + b
        a = _activate(z, layer.activation)
        pre.append(z)
        post.append(a)

    weight_grads: list = [None] * len(net.layers)
    bias_grads: list = [None] * len(net.layers)
    delta = up
    for i in range(len(net.layers) - 1, -1, -1):
        delta = delta * _activate_grad(pre[i], post[i], net.layers[i].activation)
        weight_grads[i] = delta[:, None] * inputs[i][None, :]
        bias_grads[i] = delta
        if i > 0:
            delta = net.weights[i].T @ delta
    return GradientBundle(weight_grads, bias_grads)


def _backward_batch(net: Mlp, x: np.ndarray, upstream: np.ndarray) -> GradientBundle:
    """Summed per-sample gradients of upstream_i . output_i over a batch."""
    inputs, pre, post = [], [], []
    a = x
    for layer, w, b in zip(net.layers, net.weights, net.biases):
        inputs.append(a)
        z = a @ w.T + b
        a = _activate(z, layer.activation)
        pre.append(z)
        post.append(a)

    weight_grads = []
    bias_grads = []
    delta = upstream
    for i in range(len(net.layers) - 1, -1, -1):
        delta = delta * _activate_grad(pre[i], post[i], net.layers[i].activation)
        weight_grads.append(delta.T @ inputs[i])
        bias_grads.append(delta.sum(axis=0))
        if i > 0:
            delta = delta @ net.weights[i]
    weight_grads.reverse()
    bias_grads.reverse()
    return GradientBundle(weight_grads, bias_grads)


def sgd_step(net: Mlp, grads: GradientBundle, lr: float) -> Mlp:
    """In-place descent step: weights <- weights - lr * grads. Callers negate lr for ascent.

    Shapes and finiteness are checked before any mutation.
    """
    if len(grads.weight_grads) != len(net.weights):
        raise ValueError("gradient layer count does not match network")
    for w, gw, b, gb in zip(net.weights, grads.weight_grads, net.biases, grads.bias_grads):
        if gw.shape != w.shape or gb.shape != b.shape:
            raise ValueError(f"gradient shape {gw.shape}/{gb.shape} does not match layer {w.shape}")
        # scalar-sum probe: any NaN/Inf entry makes the sum non-finite
        if not (math.isfinite(float(gw.sum())) and math.isfinite(float(gb.sum()))):
            raise ValueError("non-finite gradient entries")
    for w, gw, b, gb in zip(net.weights, grads.weight_grads, net.biases, grads.bias_grads):
        w -= lr * gw
        b -= lr * gb
    return net


def apply_rank1_update(net: Mlp, x: np.ndarray, upstream: np.ndarray, scale: float) -> None:
    """Fused backward pass and in-place update: weights += scale * d(upstream.output)/dweights.

    Equivalent to sgd_step(net, backward(net, x, upstream), -scale) but without
    materializing gradient matrices - the per-step workhorse of online training.
    """
    if not math.isfinite(scale):
        raise ValueError(f"non-finite update scale {scale!r}")
    a = np.asarray(x, dtype=np.float64)
    if a.shape != (net.input_width,):
        raise ValueError(f"input shape {a.shape} does not match input width {net.input_width}")
    up = np.asarray(upstream, dtype=np.float64)
    if up.shape != (net.output_width,):
        raise ValueError(f"upstream shape {up.shape} does not match output width {net.output_width}")
    if not np.all(np.isfinite(a)) or not np.all(np.isfinite(up)):
        raise ValueError("non-finite inputs to update")

    inputs, pre, post = [], [], []
    for layer, w, b in zip(net.layers, net.weights, net.biases):
        inputs.append(a)
        z = w @ a + b
        a = _activate(z, layer.activation)
        pre.append(z)
        post.append(a)

    delta = up
    for i in range(len(net.layers) - 1, -1, -1):
        delta = delta * _activate_grad(pre[i], post[i], net.layers[i].activation)
        back = net.weights[i].T @ delta if i > 0 else None  # propagate through pre-update weights
        # W += scale * delta (x) input, done in place on the transposed (Fortran) view
        dger(scale, inputs[i], delta, a=net.weights[i].T, overwrite_a=1)
        net.biases[i] += scale * delta
        delta = back


def mse_fit(
    net: Mlp,
    inputs: np.ndarray,
    targets: np.ndarray,
    lr: float,
    epochs: int,
    seed: int,
    batch_size: int = 64,
) -> tuple[Mlp, list[float]]:
    """Mini-batch SGD on mean squared error; returns the trained net and per-epoch mean loss.

    The loss recorded per epoch is the mean over batches of the pre-update batch
    MSE, so an already-perfect fit reports 0.0 at epoch 0. Batch order is drawn
    from the given seed.
    """
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError(f"inputs {x.shape} and targets {y.shape} must be matching 2-d arrays")
    if x.shape[0] == 0:
        raise ValueError("empty dataset")
    if x.shape[1] != net.input_width or y.shape[1] != net.output_width:
        raise ValueError(
            f"dataset dims {x.shape[1]}->{y.shape[1]} do not match network {net.input_width}->{net.output_width}"
        )
    n = x.shape[0]
    rng = np.random.default_rng(seed)
    history: list[float] = []
    with np.errstate(over="ignore", invalid="ignore"):  # divergence is caught by the finite checks
        for _ in range(epochs):
            order = rng.permutation(n)
            batch_losses = []
            for start in range(0, n, batch_size):
                idx = order[start:start + batch_size]
                xb, yb = x[idx], y[idx]
                out = forward_batch(net, xb)
                err = out - yb
                batch_losses.append(float(np.mean(err * err)))
                # d(mean sq err)/d out, averaged over batch and output dims
                upstream = (2.0 / err.size) * err
                grads = _backward_batch(net, xb, upstream)
                sgd_step(net, grads, lr)
            epoch_loss = float(np.mean(batch_losses))
            if not np.isfinite(epoch_loss):
                raise ValueError("training diverged to non-finite loss")
            history.append(epoch_loss)
    return net, history


def batch_mse(net: Mlp, inputs: np.ndarray, targets: np.ndarray) -> float:
    """Mean squared error of the net over a dataset."""
    err = forward_batch(net, np.asarray(inputs, dtype=np.float64)) - np.asarray(targets, dtype=np.float64)
    return float(np.mean(err * err))


def save_mlp(net: Mlp, path) -> None:
    """Line-oriented text dump; floats written with repr so loading is bit-exact."""
    lines = [f"mlp {len(net.layers)}"]
    for layer, w, b in zip(net.layers, net.weights, net.biases):
        lines.append(f"layer {layer.input_width} {layer.output_width} {layer.activation}")
        for row in w:
            lines.append("w " + " ".join(repr(float(v)) for v in row))
        lines.append("b " + " ".join(repr(float(v)) for v in b))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mlp(path) -> Mlp:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    head = lines[0].split()
    if head[0] != "mlp":
        raise ValueError(f"not an mlp file: {path}")
    n_layers = int(head[1])
    specs, weights, biases = [], [], []
    pos = 1
    for _ in range(n_layers):
        _, in_w, out_w, act = lines[pos].split()
        spec = LayerSpec(int(in_w), int(out_w), act)
        pos += 1
        rows = []
        for _ in range(spec.output_width):
            parts = lines[pos].split()
            if parts[0] != "w":
                raise ValueError(f"malformed mlp file at line {pos + 1}")
            rows.append([float(v) for v in parts[1:]])
            pos += 1
        parts = lines[pos].split()
        if parts[0] != "b":
            raise ValueError(f"malformed mlp file at line {pos + 1}")
        biases.append(np.array([float(v) for v in parts[1:]], dtype=np.float64))
        weights.append(np.array(rows, dtype=np.float64))
        specs.append(spec)
        pos += 1
    net = Mlp(specs, weights, biases)
    _check_chain(specs)
    return net
