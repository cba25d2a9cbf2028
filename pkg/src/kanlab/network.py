"""Layered Kolmogorov-Arnold network: forward pass, Jacobian, backprop.

A layer maps n_p inputs to n_q outputs through a grid of per-edge spline
activations sharing one (degree, grid_size) but with a knot range fixed per
input component.  Output q is the plain sum over p of edge functions
``phi[q,p](x_p)``; layers compose by function composition.

Parameters flatten in a fixed canonical order (layer, then output index, then
input index, then ``[coeffs..., w_base, w_spline]``) so that optimizers,
gradients, and serialized models all agree.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, ShapeError
from .splines import (
    SplineActivation,
    SplineSpec,
    basis_derivative,
    basis_eval,
    make_knots,
    silu,
    silu_prime,
)

__all__ = [
    "KanLayer",
    "KanNetwork",
    "layer_forward",
    "forward",
    "jacobian",
    "backprop",
    "param_vector",
    "set_param_vector",
    "param_count",
]


class KanLayer:
    """Dense grid of spline activations from n_p inputs to n_q outputs."""

    def __init__(self, specs, coeffs, w_base, w_spline, frozen=None):
        self.specs = list(specs)
        degree = self.specs[0].degree
        grid = self.specs[0].grid_size
        for s in self.specs:
            if s.degree != degree or s.grid_size != grid:
                raise ShapeError("all activations in a layer must share degree and grid size")
        self.degree = degree
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.w_base = np.asarray(w_base, dtype=float)
        self.w_spline = np.asarray(w_spline, dtype=float)
        n_q, n_p, m = self.coeffs.shape
        if n_p != len(self.specs):
            raise ShapeError("one spline spec is required per input component")
        if m != self.specs[0].n_basis:
            raise ShapeError(
                f"expected {self.specs[0].n_basis} coefficients per edge, got {m}"
            )
        if self.w_base.shape != (n_q, n_p) or self.w_spline.shape != (n_q, n_p):
            raise ShapeError("w_base/w_spline must have shape (out_dim, in_dim)")
        self.knots = np.stack([make_knots(s) for s in self.specs])
        self.frozen = (
            np.zeros((n_q, n_p), dtype=bool) if frozen is None else np.asarray(frozen, bool)
        )

    @property
    def in_dim(self):
        return self.coeffs.shape[1]

    @property
    def out_dim(self):
        return self.coeffs.shape[0]

    @property
    def n_basis(self):
        return self.coeffs.shape[2]

    def activation(self, q, p) -> SplineActivation:
        """Standalone copy of the edge function feeding output q from input p."""
        return SplineActivation(
            self.specs[p],
            self.knots[p].copy(),
            self.coeffs[q, p].copy(),
            float(self.w_base[q, p]),
            float(self.w_spline[q, p]),
        )

    def basis(self, x):
        """Stacked basis values for a batch: shape (n, in_dim, n_basis)."""
        return np.stack(
            [basis_eval(self.knots[p], self.degree, x[:, p]) for p in range(self.in_dim)],
            axis=1,
        )

    def basis_deriv(self, x):
        return np.stack(
            [
                basis_derivative(self.knots[p], self.degree, x[:, p])
                for p in range(self.in_dim)
            ],
            axis=1,
        )

    def copy(self):
        return KanLayer(
            self.specs,
            self.coeffs.copy(),
            self.w_base.copy(),
            self.w_spline.copy(),
            self.frozen.copy(),
        )


class KanNetwork:
    """Stack of KanLayers with matching dimensions."""

    def __init__(self, layers):
        self.layers = list(layers)
        if not self.layers:
            raise ShapeError("a network needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise ShapeError(
                    f"layer output dim {a.out_dim} does not match next input dim {b.in_dim}"
                )

    @property
    def shape(self):
        return [self.layers[0].in_dim] + [layer.out_dim for layer in self.layers]

    @property
    def n_edges(self):
        return sum(l.in_dim * l.out_dim for l in self.layers)

    def copy(self):
        return KanNetwork([layer.copy() for layer in self.layers])

    def __call__(self, x):
        return forward(self, x)


def _as_batch(x, dim, what="input"):
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    batch = np.atleast_2d(arr)
    if batch.ndim != 2 or batch.shape[1] != dim:
        raise ShapeError(f"{what} must have {dim} components, got shape {arr.shape}")
    return batch, single


def layer_forward(layer: KanLayer, x):
    """Evaluate one layer.

    Returns ``(y, cache)`` where the cache keeps the per-edge basis values and
    activation values needed by the backward pass and by the regularizer.
    """
    batch, single = _as_batch(x, layer.in_dim)
    b = layer.basis(batch)  # (n, n_p, m)
    s = silu(batch)  # (n, n_p)
    spline_vals = np.einsum("npm,qpm->nqp", b, layer.coeffs)
    phi = layer.w_base[None] * s[:, None, :] + layer.w_spline[None] * spline_vals
    y = phi.sum(axis=2)
    cache = {"x": batch, "basis": b, "silu": s, "spline": spline_vals, "phi": phi}
    return (y[0] if single else y), cache


def forward(net: KanNetwork, x):
    """Full network evaluation; accepts a single state or a batch."""
    batch, single = _as_batch(x, net.layers[0].in_dim)
    for layer in net.layers:
        batch, _ = layer_forward(layer, batch)
    return batch[0] if single else batch


def forward_with_caches(net: KanNetwork, x):
    batch, _ = _as_batch(x, net.layers[0].in_dim)
    caches = []
    for layer in net.layers:
        batch, cache = layer_forward(layer, batch)
        caches.append(cache)
    return batch, caches


def layer_jacobian(layer: KanLayer, x):
    """Per-sample layer Jacobians d y_q / d x_p, shape (n, n_q, n_p)."""
    batch, single = _as_batch(x, layer.in_dim)
    db = layer.basis_deriv(batch)
    dspline = np.einsum("npm,qpm->nqp", db, layer.coeffs)
    jac = layer.w_base[None] * silu_prime(batch)[:, None, :] + layer.w_spline[None] * dspline
    return jac[0] if single else jac


def jacobian(net: KanNetwork, x) -> np.ndarray:
    """Analytic Jacobian of the network at one point: (n_L, n_0) matrix."""
    batch, single = _as_batch(x, net.layers[0].in_dim)
    if not single and batch.shape[0] != 1:
        return jacobian_batch(net, batch)
    jac = None
    state = batch
    for layer in net.layers:
        jl = layer_jacobian(layer, state)[0]
        jac = jl if jac is None else jl @ jac
        state, _ = layer_forward(layer, state)
    return jac


def jacobian_batch(net: KanNetwork, x) -> np.ndarray:
    """Jacobians at every row of `x`, shape (n, n_L, n_0)."""
    batch, _ = _as_batch(x, net.layers[0].in_dim)
    jac = None
    state = batch
    for layer in net.layers:
        jl = layer_jacobian(layer, state)
        jac = jl if jac is None else np.matmul(jl, jac)
        state, _ = layer_forward(layer, state)
    return jac


def layer_backward(layer: KanLayer, cache, grad_y, grad_phi=None, need_input_grad=True):
    """Reverse one layer.

    Parameters
    ----------
    grad_y : (n, n_q) gradient of the loss w.r.t. the layer outputs.
    grad_phi : optional (n, n_q, n_p) gradient attached directly to the edge
        values (used by the magnitude regularizers).

    Returns
    -------
    (grad_x, grads) where grads is a dict with 'coeffs', 'w_base', 'w_spline'.
    """
    x, b, s, spline_vals = cache["x"], cache["basis"], cache["silu"], cache["spline"]
    g = np.repeat(grad_y[:, :, None], layer.in_dim, axis=2)
    if grad_phi is not None:
        g = g + grad_phi
    grads = {
        "w_base": np.einsum("nqp,np->qp", g, s),
        "w_spline": np.einsum("nqp,nqp->qp", g, spline_vals),
        "coeffs": layer.w_spline[:, :, None] * np.einsum("nqp,npm->qpm", g, b),
    }
    grad_x = None
    if need_input_grad:
        db = layer.basis_deriv(x)
        dspline = np.einsum("npm,qpm->nqp", db, layer.coeffs)
        grad_x = silu_prime(x) * np.einsum("nqp,qp->np", g, layer.w_base) + np.einsum(
            "nqp,nqp->np", g * layer.w_spline[None], dspline
        )
    return grad_x, grads


def backward(net: KanNetwork, caches, grad_out, grad_phi_per_layer=None):
    """Reverse-mode sweep through the whole network.

    ``grad_out`` is dL/d(output batch); ``grad_phi_per_layer`` optionally adds
    direct per-edge-value gradients (one (n, n_q, n_p) array or None per
    layer).  Returns the flat gradient vector in canonical parameter order.
    """
    per_layer = [None] * len(net.layers)
    g = grad_out
    for idx in range(len(net.layers) - 1, -1, -1):
        gphi = grad_phi_per_layer[idx] if grad_phi_per_layer is not None else None
        g, grads = layer_backward(net.layers[idx], caches[idx], g, gphi, need_input_grad=idx > 0)
        per_layer[idx] = grads
    return _flatten_grads(net, per_layer)


def backprop(net: KanNetwork, inputs, targets) -> np.ndarray:
    """Gradient of the mean-squared loss over a batch w.r.t. all parameters.

    The loss is the mean over samples *and* output components of the squared
    error, matching `kanlab.training.mse_loss`.
    """
    x, _ = _as_batch(inputs, net.layers[0].in_dim)
    t, _ = _as_batch(targets, net.layers[-1].out_dim, "target")
    if x.shape[0] == 0:
        raise InvalidInputError("backprop requires a nonempty batch")
    if x.shape[0] != t.shape[0]:
        raise ShapeError("inputs and targets must have the same length")
    y, caches = forward_with_caches(net, x)
    grad_out = 2.0 * (y - t) / y.size
    return backward(net, caches, grad_out)


def _layer_param_matrix(layer):
    n_q, n_p, m = layer.coeffs.shape
    return np.concatenate(
        [
            layer.coeffs.reshape(n_q * n_p, m),
            layer.w_base.reshape(-1, 1),
            layer.w_spline.reshape(-1, 1),
        ],
        axis=1,
    )


def _flatten_grads(net, per_layer):
    parts = []
    for layer, grads in zip(net.layers, per_layer):
        n_q, n_p, m = layer.coeffs.shape
        block = np.concatenate(
            [
                grads["coeffs"].reshape(n_q * n_p, m),
                grads["w_base"].reshape(-1, 1),
                grads["w_spline"].reshape(-1, 1),
            ],
            axis=1,
        )
        parts.append(block.ravel())
    return np.concatenate(parts)


def param_vector(net: KanNetwork) -> np.ndarray:
    """All parameters in canonical flattening order."""
    return np.concatenate([_layer_param_matrix(l).ravel() for l in net.layers])


def set_param_vector(net: KanNetwork, vec):
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (param_count(net),):
        raise ShapeError(f"expected {param_count(net)} parameters, got {vec.shape}")
    offset = 0
    for layer in net.layers:
        n_q, n_p, m = layer.coeffs.shape
        size = n_q * n_p * (m + 2)
        block = vec[offset : offset + size].reshape(n_q * n_p, m + 2)
        layer.coeffs = block[:, :m].reshape(n_q, n_p, m).copy()
        layer.w_base = block[:, m].reshape(n_q, n_p).copy()
        layer.w_spline = block[:, m + 1].reshape(n_q, n_p).copy()
        offset += size


def param_count(net: KanNetwork) -> int:
    return sum(l.in_dim * l.out_dim * (l.n_basis + 2) for l in net.layers)


def frozen_param_mask(net: KanNetwork) -> np.ndarray:
    """Boolean vector marking parameters of pruned (frozen) edges."""
    parts = []
    for layer in net.layers:
        n_q, n_p, m = layer.coeffs.shape
        edge = layer.frozen.reshape(-1, 1)
        parts.append(np.repeat(edge, m + 2, axis=1).ravel())
    return np.concatenate(parts)
