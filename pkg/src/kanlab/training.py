"""Initialization, loss, magnitude regularization, training loop, pruning.

Training is deterministic full-batch optimization: the dataset is split
temporally (earliest fraction trains), every step uses the whole training
partition, and the optimizer state evolves without any stochastic shuffling.
The objective follows the reference KAN composition

    mse + lambda * (l1 + lambda_entropy * entropy)

where l1 is the sum over edges of the mean absolute edge value on the batch
and entropy is the Shannon entropy of the normalized edge-magnitude
distribution (the sparsification pressure that makes pruning meaningful).
With lambda = 0 the regularizers are off entirely, whatever lambda_entropy is.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInputError, TrainingDivergedError
from .network import (
    KanLayer,
    KanNetwork,
    backward,
    forward,
    forward_with_caches,
    frozen_param_mask,
    param_vector,
    set_param_vector,
)
from .splines import SplineSpec
from .systems import Dataset

__all__ = [
    "TrainingConfig",
    "TrainingReport",
    "init_network",
    "mse_loss",
    "regularization",
    "train",
    "prune",
]


@dataclass
class TrainingConfig:
    shape: list
    spec: SplineSpec
    steps: int = 50
    learning_rate: float = 0.1
    lam: float = 0.0
    lambda_entropy: float = 10.0
    seed: int = 0
    split_fraction: float = 0.8
    optimizer: str = "adam"

    def __post_init__(self):
        if len(self.shape) < 2 or any(int(n) != n or n < 1 for n in self.shape):
            raise InvalidInputError(f"shape must list at least two positive widths, got {self.shape}")
        if self.steps < 1:
            raise InvalidInputError("steps must be positive")
        if not (np.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise InvalidInputError("learning_rate must be positive and finite")
        if self.lam < 0 or self.lambda_entropy < 0:
            raise InvalidInputError("regularization weights must be nonnegative")
        if not 0.0 < self.split_fraction < 1.0:
            raise InvalidInputError("split_fraction must lie in (0, 1)")
        if self.optimizer not in ("lbfgs", "adam", "gradient-descent"):
            raise InvalidInputError(f"unknown optimizer '{self.optimizer}'")


@dataclass
class TrainingReport:
    train_loss: np.ndarray
    test_loss: np.ndarray
    final_params: np.ndarray
    l1: float = 0.0
    entropy: float = 0.0


def _padded_range(values, pad=0.1):
    lo, hi = float(np.min(values)), float(np.max(values))
    span = hi - lo
    if span <= 0:
        return lo - 0.5, hi + 0.5
    return lo - pad * span, hi + pad * span


def init_network(shape, spec: SplineSpec, seed: int, sample_inputs=None) -> KanNetwork:
    """Build a network with seeded random spline coefficients (scale 0.1).

    Base and spline mixing weights start at one.  When `sample_inputs` is
    given, each layer's knot ranges are set from the min/max of the values
    that actually reach it (training data for layer 0, then the propagated
    samples for deeper layers), padded by 10% of the span.
    """
    if len(shape) < 2 or any(int(n) != n or n < 1 for n in shape):
        raise InvalidInputError(f"invalid network shape {shape}")
    rng = np.random.default_rng(seed)
    x = None
    if sample_inputs is not None:
        x = np.asarray(sample_inputs, dtype=float)
        if x.ndim != 2 or x.shape[1] != shape[0]:
            raise InvalidInputError("sample_inputs must be an (n, shape[0]) array")
    layers = []
    for n_p, n_q in zip(shape, shape[1:]):
        if x is None:
            specs = [spec] * n_p
        else:
            specs = [spec.with_range(*_padded_range(x[:, p])) for p in range(n_p)]
        coeffs = rng.normal(0.0, 0.1, size=(n_q, n_p, spec.n_basis))
        layer = KanLayer(specs, coeffs, np.ones((n_q, n_p)), np.ones((n_q, n_p)))
        layers.append(layer)
        if x is not None:
            from .network import layer_forward

            x, _ = layer_forward(layer, x)
    return KanNetwork(layers)


def mse_loss(net: KanNetwork, dataset: Dataset) -> float:
    """Mean over samples and output components of the squared error."""
    if len(dataset) == 0:
        raise InvalidInputError("mse_loss requires a nonempty dataset")
    residual = forward(net, dataset.inputs) - dataset.targets
    return float(np.mean(residual**2))


def _edge_magnitudes(net, caches):
    """Mean |phi_e| per edge, one (n_q, n_p) array per layer."""
    return [np.mean(np.abs(c["phi"]), axis=0) for c in caches]


def _entropy_of(mags):
    total = sum(float(m.sum()) for m in mags)
    if total <= 0.0:
        return 0.0, 0.0
    h = 0.0
    for m in mags:
        rho = m[m > 0] / total
        h -= float(np.sum(rho * np.log(rho)))
    return total, h


def regularization(net: KanNetwork, batch) -> tuple:
    """(l1, entropy) of the edge-magnitude distribution over `batch` inputs."""
    x = batch.inputs if isinstance(batch, Dataset) else np.asarray(batch, dtype=float)
    if x.size == 0:
        raise InvalidInputError("regularization requires a nonempty batch")
    _, caches = forward_with_caches(net, x)
    mags = _edge_magnitudes(net, caches)
    l1, entropy = _entropy_of(mags)
    return l1, entropy


def _objective_gradient(net, x, t, lam, lam_entropy):
    """Loss pieces and the flat gradient of the full objective."""
    y, caches = forward_with_caches(net, x)
    mse = float(np.mean((y - t) ** 2))
    grad_out = 2.0 * (y - t) / y.size
    phi_grads = None
    l1, entropy = 0.0, 0.0
    if lam > 0:
        mags = _edge_magnitudes(net, caches)
        l1, entropy = _entropy_of(mags)
        if l1 > 0:
            n = x.shape[0]
            phi_grads = []
            for m, cache in zip(mags, caches):
                # d(objective)/d m_e; edges with zero magnitude contribute no
                # parameter gradient (sign is zero there), so mask the log
                with np.errstate(divide="ignore", invalid="ignore"):
                    log_rho = np.where(m > 0, np.log(np.maximum(m, 1e-300) / l1), 0.0)
                coeff = lam * (1.0 + lam_entropy * (-(log_rho + entropy) / l1))
                coeff = np.where(m > 0, coeff, 0.0)
                phi_grads.append(coeff[None, :, :] * np.sign(cache["phi"]) / n)
    grad = backward(net, caches, grad_out, phi_grads)
    return mse, l1, entropy, grad


def train(net: KanNetwork, dataset: Dataset, config: TrainingConfig):
    """Full-batch training; returns ``(trained_net, TrainingReport)``.

    The input network is not mutated.  Loss curves record the mean-squared
    one-step error on the train and held-out partitions after every step.
    The 'lbfgs' optimizer counts outer quasi-Newton iterations as steps and
    ignores `learning_rate`; 'adam' and 'gradient-descent' are plain
    first-order loops (the latter mainly serves descent-property oracles).
    """
    net = net.copy()
    train_set, test_set = dataset.split(config.split_fraction)
    if config.optimizer == "lbfgs":
        return _train_lbfgs(net, train_set, test_set, config)
    return _train_first_order(net, train_set, test_set, config)


def _train_first_order(net, train_set, test_set, config):
    x, t = train_set.inputs, train_set.targets
    theta = param_vector(net)
    frozen = frozen_param_mask(net)
    train_curve = np.empty(config.steps)
    test_curve = np.empty(config.steps)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    l1 = entropy = 0.0
    for step in range(config.steps):
        mse, l1, entropy, grad = _objective_gradient(
            net, x, t, config.lam, config.lambda_entropy
        )
        if not np.isfinite(mse):
            raise TrainingDivergedError(step)
        grad[frozen] = 0.0
        if config.optimizer == "adam":
            m = beta1 * m + (1 - beta1) * grad
            v = beta2 * v + (1 - beta2) * grad**2
            m_hat = m / (1 - beta1 ** (step + 1))
            v_hat = v / (1 - beta2 ** (step + 1))
            theta = theta - config.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
        else:
            theta = theta - config.learning_rate * grad
        if not np.all(np.isfinite(theta)):
            raise TrainingDivergedError(step)
        set_param_vector(net, theta)
        train_curve[step] = mse_loss(net, train_set)
        test_curve[step] = mse_loss(net, test_set)
        if not (np.isfinite(train_curve[step]) and np.isfinite(test_curve[step])):
            raise TrainingDivergedError(step)
    report = TrainingReport(train_curve, test_curve, theta.copy(), l1, entropy)
    return net, report


def _train_lbfgs(net, train_set, test_set, config):
    from scipy.optimize import minimize

    x, t = train_set.inputs, train_set.targets
    frozen = frozen_param_mask(net)
    state = {"l1": 0.0, "entropy": 0.0, "nit": 0}
    train_curve = np.empty(config.steps)
    test_curve = np.empty(config.steps)

    def objective(theta):
        set_param_vector(net, theta)
        mse, l1, entropy, grad = _objective_gradient(
            net, x, t, config.lam, config.lambda_entropy
        )
        if not np.isfinite(mse):
            raise TrainingDivergedError(state["nit"])
        state["l1"], state["entropy"] = l1, entropy
        grad[frozen] = 0.0
        reg = config.lam * (l1 + config.lambda_entropy * entropy)
        return mse + reg, grad

    def record(theta):
        set_param_vector(net, theta)
        i = state["nit"]
        train_curve[i] = mse_loss(net, train_set)
        test_curve[i] = mse_loss(net, test_set)
        if not (np.isfinite(train_curve[i]) and np.isfinite(test_curve[i])):
            raise TrainingDivergedError(i)
        state["nit"] = i + 1

    theta0 = param_vector(net)
    bounds = None
    if frozen.any():
        # pin pruned-edge parameters exactly; zero gradients alone do not stop
        # the quasi-Newton direction from moving them
        bounds = [(v, v) if f else (None, None) for v, f in zip(theta0, frozen)]
    result = minimize(
        objective,
        theta0,
        jac=True,
        method="L-BFGS-B",
        callback=record,
        bounds=bounds,
        options={"maxiter": config.steps, "maxcor": 20, "ftol": 0.0, "gtol": 0.0},
    )
    set_param_vector(net, result.x)
    # a converged run may stop short of the requested step count; hold the
    # final losses so the curves keep their contracted length
    nit = state["nit"]
    if nit == 0:
        train_curve[:] = mse_loss(net, train_set)
        test_curve[:] = mse_loss(net, test_set)
    elif nit < config.steps:
        train_curve[nit:] = train_curve[nit - 1]
        test_curve[nit:] = test_curve[nit - 1]
    report = TrainingReport(
        train_curve, test_curve, param_vector(net), state["l1"], state["entropy"]
    )
    return net, report


def prune(net: KanNetwork, threshold: float, batch) -> KanNetwork:
    """Zero and freeze every edge whose mean |phi_e| over `batch` is below `threshold`.

    Returns a new network; the input is untouched.  Frozen edges stay at zero
    through any further training.
    """
    if threshold < 0:
        raise InvalidInputError("prune threshold must be nonnegative")
    x = batch.inputs if isinstance(batch, Dataset) else np.asarray(batch, dtype=float)
    _, caches = forward_with_caches(net, x)
    mags = _edge_magnitudes(net, caches)
    pruned = net.copy()
    for layer, m in zip(pruned.layers, mags):
        kill = m < threshold
        layer.coeffs[kill] = 0.0
        layer.w_base[kill] = 0.0
        layer.w_spline[kill] = 0.0
        layer.frozen |= kill
    return pruned
