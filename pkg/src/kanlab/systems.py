"""Ground-truth chaotic systems, integration, datasets, and model rollout.

Two reference systems: the Ikeda optical-cavity map and the three-species
food-chain flow (producer N, herbivore P, carnivore Q).  Both expose exact
analytic Jacobians for Lyapunov computations.  Flow sampling integrates with
fixed-step RK4 substeps, so every trajectory is a deterministic function of
its arguments.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DivergenceError,
    IntegrationError,
    InvalidInputError,
    RolloutDivergedError,
)
from .network import forward

__all__ = [
    "IkedaParams",
    "FoodChainParams",
    "IkedaMap",
    "FoodChain",
    "Trajectory",
    "Dataset",
    "ikeda_step",
    "ikeda_jacobian",
    "food_chain_rhs",
    "food_chain_jacobian",
    "rk4_step",
    "generate_trajectory",
    "rollout",
    "model_error",
    "IKEDA_BOX",
]

# phase-space domain of the chaotic Ikeda attractor at mu = 0.9
IKEDA_BOX = np.array([[-1.0, 2.0], [-2.5, 1.0]])


@dataclass(frozen=True)
class IkedaParams:
    mu: float = 0.9

    def __post_init__(self):
        if not (0.0 < self.mu < 1.0):
            raise InvalidInputError(f"dissipative Ikeda regime needs 0 < mu < 1, got {self.mu}")


@dataclass(frozen=True)
class FoodChainParams:
    K: float = 0.98
    x_p: float = 0.4
    y_p: float = 2.009
    x_q: float = 0.08
    y_q: float = 2.876
    N_0: float = 0.16129
    P_0: float = 0.5

    def __post_init__(self):
        for name in ("K", "x_p", "y_p", "x_q", "y_q", "N_0", "P_0"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"food-chain parameter {name} must be positive")


def ikeda_step(s, p: IkedaParams = IkedaParams()) -> np.ndarray:
    """One application of the Ikeda map; broadcasts over leading axes."""
    s = np.asarray(s, dtype=float)
    x, y = s[..., 0], s[..., 1]
    phi = 0.4 - 6.0 / (1.0 + x * x + y * y)
    c, sn = np.cos(phi), np.sin(phi)
    return np.stack([1.0 + p.mu * (x * c - y * sn), p.mu * (x * sn + y * c)], axis=-1)


def ikeda_jacobian(s, p: IkedaParams = IkedaParams()) -> np.ndarray:
    """Exact Jacobian of the Ikeda map (chain terms through phi included)."""
    s = np.asarray(s, dtype=float)
    x, y = s[..., 0], s[..., 1]
    r = 1.0 + x * x + y * y
    phi = 0.4 - 6.0 / r
    dphi_dx = 12.0 * x / (r * r)
    dphi_dy = 12.0 * y / (r * r)
    c, sn = np.cos(phi), np.sin(phi)
    # d/dphi of the rotated coordinates
    u = -x * sn - y * c
    v = x * c - y * sn
    jac = np.empty(s.shape[:-1] + (2, 2))
    jac[..., 0, 0] = p.mu * (c + u * dphi_dx)
    jac[..., 0, 1] = p.mu * (-sn + u * dphi_dy)
    jac[..., 1, 0] = p.mu * (sn + v * dphi_dx)
    jac[..., 1, 1] = p.mu * (c + v * dphi_dy)
    return jac


def food_chain_rhs(s, p: FoodChainParams = FoodChainParams()) -> np.ndarray:
    """Vector field of the three-species food chain; broadcasts like `ikeda_step`."""
    s = np.asarray(s, dtype=float)
    n, pp, q = s[..., 0], s[..., 1], s[..., 2]
    a = n + p.N_0
    b = pp + p.P_0
    dn = n * (1.0 - n / p.K) - p.x_p * p.y_p * n * pp / a
    dp = p.x_p * pp * (p.y_p * n / a - 1.0) - p.x_q * p.y_q * pp * q / b
    dq = p.x_q * q * (p.y_q * pp / b - 1.0)
    return np.stack([dn, dp, dq], axis=-1)


def food_chain_jacobian(s, p: FoodChainParams = FoodChainParams()) -> np.ndarray:
    """Exact Jacobian of the food-chain vector field."""
    s = np.asarray(s, dtype=float)
    n, pp, q = s[..., 0], s[..., 1], s[..., 2]
    a = n + p.N_0
    b = pp + p.P_0
    zeros = np.zeros_like(n)
    jac = np.empty(s.shape[:-1] + (3, 3))
    jac[..., 0, 0] = 1.0 - 2.0 * n / p.K - p.x_p * p.y_p * pp * p.N_0 / (a * a)
    jac[..., 0, 1] = -p.x_p * p.y_p * n / a
    jac[..., 0, 2] = zeros
    jac[..., 1, 0] = p.x_p * p.y_p * pp * p.N_0 / (a * a)
    jac[..., 1, 1] = p.x_p * (p.y_p * n / a - 1.0) - p.x_q * p.y_q * q * p.P_0 / (b * b)
    jac[..., 1, 2] = -p.x_q * p.y_q * pp / b
    jac[..., 2, 0] = zeros
    jac[..., 2, 1] = p.x_q * p.y_q * q * p.P_0 / (b * b)
    jac[..., 2, 2] = p.x_q * (p.y_q * pp / b - 1.0)
    return jac


def rk4_step(rhs, s, dt: float) -> np.ndarray:
    """Classical fourth-order Runge-Kutta update for an autonomous field."""
    s = np.asarray(s, dtype=float)
    k1 = rhs(s)
    k2 = rhs(s + 0.5 * dt * k1)
    k3 = rhs(s + 0.5 * dt * k2)
    k4 = rhs(s + dt * k3)
    out = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise IntegrationError("RK4 step produced a non-finite state")
    return out


@dataclass
class Trajectory:
    """Ordered state samples; `dt` is the sampling interval for flow data."""

    states: np.ndarray
    kind: str = "map-iterates"
    dt: Optional[float] = None

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim != 2:
            raise InvalidInputError("trajectory states must be a 2-D (n, dim) array")
        if self.kind not in ("map-iterates", "flow-samples"):
            raise InvalidInputError(f"unknown trajectory kind '{self.kind}'")
        if self.kind == "flow-samples" and not (self.dt and self.dt > 0):
            raise InvalidInputError("flow-sample trajectories require dt > 0")
        if not np.all(np.isfinite(self.states)):
            raise InvalidInputError("trajectory contains non-finite states")

    def __len__(self):
        return self.states.shape[0]

    @property
    def dim(self):
        return self.states.shape[1]


@dataclass
class Dataset:
    """One-step prediction pairs x_i -> x_{i+1} from consecutive samples."""

    inputs: np.ndarray
    targets: np.ndarray
    dt: Optional[float] = None

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.targets = np.asarray(self.targets, dtype=float)
        if self.inputs.shape != self.targets.shape or self.inputs.ndim != 2:
            raise InvalidInputError("dataset inputs/targets must be matching (n, dim) arrays")

    @classmethod
    def from_trajectory(cls, traj: Trajectory) -> "Dataset":
        if len(traj) < 2:
            raise InvalidInputError("need at least two samples to form prediction pairs")
        return cls(traj.states[:-1].copy(), traj.states[1:].copy(), dt=traj.dt)

    def __len__(self):
        return self.inputs.shape[0]

    def split(self, fraction: float):
        """Temporal split: the earliest `fraction` of pairs forms the train set."""
        if not 0.0 < fraction < 1.0:
            raise InvalidInputError("split fraction must lie in (0, 1)")
        n_train = int(fraction * len(self))
        if n_train == 0 or n_train == len(self):
            raise InvalidInputError("split produces an empty partition")
        return (
            Dataset(self.inputs[:n_train], self.targets[:n_train], self.dt),
            Dataset(self.inputs[n_train:], self.targets[n_train:], self.dt),
        )


class IkedaMap:
    """Discrete-time Ikeda system wrapper used by trajectory generation."""

    kind = "map"
    dim = 2

    def __init__(self, params: IkedaParams = IkedaParams()):
        self.params = params

    def step(self, s):
        return ikeda_step(s, self.params)

    def jacobian(self, s):
        return ikeda_jacobian(s, self.params)

    def orbit(self, x0, n_points: int, transient: int = 0) -> np.ndarray:
        """Fast scalar iteration; returns (n_points, 2) post-transient samples."""
        mu = self.params.mu
        x, y = float(x0[0]), float(x0[1])
        out = np.empty((n_points, 2))
        total = transient + n_points
        for i in range(total):
            if not (math.isfinite(x) and math.isfinite(y)):
                raise DivergenceError(f"orbit escaped to a non-finite state at iterate {i}")
            if i >= transient:
                out[i - transient, 0] = x
                out[i - transient, 1] = y
            phi = 0.4 - 6.0 / (1.0 + x * x + y * y)
            c, sn = math.cos(phi), math.sin(phi)
            x, y = 1.0 + mu * (x * c - y * sn), mu * (x * sn + y * c)
        return out


class FoodChain:
    """Continuous-time food chain with fixed-step RK4 sampling."""

    kind = "flow"
    dim = 3

    def __init__(self, params: FoodChainParams = FoodChainParams()):
        self.params = params

    def rhs(self, s):
        return food_chain_rhs(s, self.params)

    def jacobian(self, s):
        return food_chain_jacobian(s, self.params)

    def _rk4_scalar(self, n, pp, q, h):
        p = self.params

        def f(a, b, c):
            na = a + p.N_0
            nb = b + p.P_0
            return (
                a * (1.0 - a / p.K) - p.x_p * p.y_p * a * b / na,
                p.x_p * b * (p.y_p * a / na - 1.0) - p.x_q * p.y_q * b * c / nb,
                p.x_q * c * (p.y_q * b / nb - 1.0),
            )

        k1 = f(n, pp, q)
        k2 = f(n + 0.5 * h * k1[0], pp + 0.5 * h * k1[1], q + 0.5 * h * k1[2])
        k3 = f(n + 0.5 * h * k2[0], pp + 0.5 * h * k2[1], q + 0.5 * h * k2[2])
        k4 = f(n + h * k3[0], pp + h * k3[1], q + h * k3[2])
        return (
            n + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            pp + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            q + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        )

    def sample(self, x0, n_points: int, dt_sample: float, transient: float = 0.0,
               substeps: int = 20) -> np.ndarray:
        """Sample the flow every `dt_sample` after discarding `transient` time."""
        if substeps < 10:
            raise InvalidInputError("internal step must be at most dt_sample/10")
        h = dt_sample / substeps
        n, pp, q = float(x0[0]), float(x0[1]), float(x0[2])
        try:
            n_transient_steps = int(round(transient / h))
            for _ in range(n_transient_steps):
                n, pp, q = self._rk4_scalar(n, pp, q, h)
            out = np.empty((n_points, 3))
            for i in range(n_points):
                out[i] = (n, pp, q)
                for _ in range(substeps):
                    n, pp, q = self._rk4_scalar(n, pp, q, h)
        except OverflowError as exc:
            raise DivergenceError("flow escaped to a non-finite state") from exc
        return out

    def flow_map(self, s, dt: float, substeps: int = 20):
        """The time-dt flow map (the ground truth a dt-sampled surrogate learns)."""
        n, pp, q = float(s[0]), float(s[1]), float(s[2])
        h = dt / substeps
        for _ in range(substeps):
            n, pp, q = self._rk4_scalar(n, pp, q, h)
        return np.array([n, pp, q])


def _check_finite_states(states):
    finite = np.isfinite(states).all(axis=1)
    if not finite.all():
        first_bad = int(np.argmin(finite))
        raise DivergenceError(f"trajectory escaped to a non-finite state at sample {first_bad}")


def generate_trajectory(system, x0, n_points: int, transient=0, dt_sample=None,
                        substeps: int = 20) -> Trajectory:
    """Simulate `system` from `x0` and return `n_points` post-transient samples.

    For maps, `transient` counts discarded iterates.  For flows, `transient`
    is in time units, `dt_sample` is the sampling interval, and integration
    uses `substeps` internal RK4 steps per sample (at least 10).
    """
    if n_points < 1:
        raise InvalidInputError("n_points must be at least 1")
    if transient < 0:
        raise InvalidInputError("transient must be nonnegative")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (system.dim,):
        raise InvalidInputError(f"x0 must have {system.dim} components")
    if system.kind == "map":
        if hasattr(system, "orbit"):
            states = system.orbit(x0, n_points, int(transient))
        else:
            states = np.empty((n_points, system.dim))
            s = x0
            for i in range(int(transient) + n_points):
                if i >= transient:
                    states[i - int(transient)] = s
                s = system.step(s)
        _check_finite_states(states)
        return Trajectory(states, "map-iterates")
    if dt_sample is None or dt_sample <= 0:
        raise InvalidInputError("flow sampling requires dt_sample > 0")
    states = system.sample(x0, n_points, dt_sample, float(transient), substeps)
    _check_finite_states(states)
    return Trajectory(states, "flow-samples", dt_sample)


def rollout(net, x0, n_steps: int, bound: float = 1e3, dt=None) -> Trajectory:
    """Closed-loop orbit of a surrogate: feed each output back as the next input.

    Returns ``n_steps + 1`` states starting at `x0`.  Raises
    `RolloutDivergedError` when the state norm exceeds `bound`.
    """
    x0 = np.asarray(x0, dtype=float)
    states = np.empty((n_steps + 1, x0.size))
    states[0] = x0
    x = x0
    for i in range(1, n_steps + 1):
        x = forward(net, x)
        if not np.all(np.isfinite(x)) or float(np.linalg.norm(x)) > bound:
            raise RolloutDivergedError(i, float(np.linalg.norm(x)))
        states[i] = x
    return Trajectory(states, "map-iterates", dt)


def model_error(net, true_step, sample_points):
    """Pointwise Euclidean error of the surrogate against the true one-step map.

    Returns ``(sup_error, mean_error)`` over the sample points.
    """
    pts = np.asarray(sample_points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise InvalidInputError("sample_points must be a nonempty (n, dim) array")
    predicted = forward(net, pts)
    truth = np.stack([np.asarray(true_step(p), dtype=float) for p in pts])
    errs = np.linalg.norm(predicted - truth, axis=1)
    return float(errs.max()), float(errs.mean())
