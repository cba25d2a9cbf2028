"""Uniform B-spline basis and the per-edge spline activation.

The basis lives on a uniform knot grid with ``grid_size`` intervals covering
``[lo, hi]``, extended ``degree`` knots past each end.  Evaluation outside
``[lo, hi]`` does not clamp or vanish: the span index is pinned to the nearest
boundary interval, which continues the outermost polynomial pieces smoothly to
the whole real line.  That keeps activations (and their derivatives) smooth
when a closed-loop orbit leaves the training box.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvalidSpecError, UnsupportedDegreeError

__all__ = [
    "SplineSpec",
    "SplineActivation",
    "make_knots",
    "basis_eval",
    "basis_derivative",
    "silu",
    "silu_prime",
    "activation_eval",
    "activation_grad",
    "fit_coeffs",
]


@dataclass(frozen=True)
class SplineSpec:
    """Degree, interior-interval count and core range of one spline basis."""

    degree: int
    grid_size: int
    lo: float
    hi: float

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 0:
            raise InvalidSpecError(f"degree must be a nonnegative integer, got {self.degree}")
        if int(self.grid_size) != self.grid_size or self.grid_size < 1:
            raise InvalidSpecError(f"grid_size must be a positive integer, got {self.grid_size}")
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise InvalidSpecError("range endpoints must be finite")
        if not self.lo < self.hi:
            raise InvalidSpecError(f"range must satisfy lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def n_basis(self):
        """Number of basis functions (grid_size + degree)."""
        return self.grid_size + self.degree

    def with_range(self, lo, hi):
        return SplineSpec(self.degree, self.grid_size, float(lo), float(hi))


def make_knots(spec: SplineSpec) -> np.ndarray:
    """Uniform extended knot vector for `spec`.

    Returns ``G + 2k + 1`` knots with spacing ``h = (hi - lo)/G`` covering
    ``[lo - k*h, hi + k*h]``.
    """
    k, g = spec.degree, spec.grid_size
    h = (spec.hi - spec.lo) / g
    return spec.lo + h * np.arange(-k, g + k + 1, dtype=float)


def _check_knots(knots, degree):
    knots = np.asarray(knots, dtype=float)
    if knots.ndim != 1 or knots.size < 2 * degree + 2:
        raise InvalidSpecError(f"knot vector too short for degree {degree}")
    return knots


def _local_basis(knots, degree, x, spans):
    """Nonzero basis values at pinned spans.

    Triangular Cox-de Boor recursion, vectorized over `x`.  Returns an
    ``(n, degree+1)`` array whose column r holds ``B_{span-degree+r}(x)``.
    """
    n = x.shape[0]
    k = degree
    vals = np.zeros((n, k + 1))
    vals[:, 0] = 1.0
    left = np.empty((n, k + 1))
    right = np.empty((n, k + 1))
    for j in range(1, k + 1):
        left[:, j] = x - knots[spans + 1 - j]
        right[:, j] = knots[spans + j] - x
        saved = np.zeros(n)
        for r in range(j):
            temp = vals[:, r] / (right[:, r + 1] + left[:, j - r])
            vals[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        vals[:, j] = saved
    return vals


def _spans(knots, degree, x):
    """Span index per point, pinned to the boundary intervals of [lo, hi]."""
    n_basis = knots.size - degree - 1
    h = (knots[-1] - knots[0]) / (knots.size - 1)
    raw = np.floor((x - knots[0]) / h).astype(np.int64)
    return np.clip(raw, degree, n_basis - 1)


def _as_points(x):
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    pts = np.atleast_1d(arr)
    if not np.all(np.isfinite(pts)):
        raise DomainError("cannot evaluate basis at non-finite x")
    return pts, scalar


def basis_eval(knots, degree: int, x) -> np.ndarray:
    """Evaluate all basis functions at `x`.

    Parameters
    ----------
    knots : array of G + 2*degree + 1 uniform knots (see `make_knots`).
    degree : spline degree k >= 0.
    x : scalar or 1-D array of finite evaluation points.

    Returns
    -------
    ``(G + degree,)`` array for scalar `x`, else ``(len(x), G + degree)``.
    At most ``degree + 1`` entries per point are nonzero.
    """
    knots = _check_knots(knots, degree)
    pts, scalar = _as_points(x)
    n_basis = knots.size - degree - 1
    spans = _spans(knots, degree, pts)
    local = _local_basis(knots, degree, pts, spans)
    out = np.zeros((pts.size, n_basis))
    cols = spans[:, None] + np.arange(-degree, 1)
    np.put_along_axis(out, cols, local, axis=1)
    return out[0] if scalar else out


def basis_derivative(knots, degree: int, x) -> np.ndarray:
    """First derivative of every basis function at `x`.

    Uses the degree-lowering identity
    ``B'_{i,k} = k * (B_{i,k-1}/(t_{i+k}-t_i) - B_{i+1,k-1}/(t_{i+k+1}-t_{i+1}))``
    evaluated at the same pinned span as `basis_eval`, so the derivative is
    consistent with the polynomial extension outside the core range.
    """
    if degree < 1:
        raise UnsupportedDegreeError("basis_derivative requires degree >= 1")
    knots = _check_knots(knots, degree)
    pts, scalar = _as_points(x)
    n_basis = knots.size - degree - 1
    spans = _spans(knots, degree, pts)
    lower = _local_basis(knots, degree - 1, pts, spans)
    # pad the degree-(k-1) values with a zero column on each side so that
    # column r of `padded` is B_{span-degree+r, degree-1}
    padded = np.zeros((pts.size, degree + 2))
    padded[:, 1:-1] = lower
    idx = spans[:, None] + np.arange(-degree, 1)
    denom_a = knots[idx + degree] - knots[idx]
    denom_b = knots[idx + degree + 1] - knots[idx + 1]
    local = degree * (padded[:, :-1] / denom_a - padded[:, 1:] / denom_b)
    out = np.zeros((pts.size, n_basis))
    np.put_along_axis(out, idx, local, axis=1)
    return out[0] if scalar else out


def silu(x):
    """x * sigmoid(x), the residual base function of each activation."""
    x = np.asarray(x, dtype=float)
    return x / (1.0 + np.exp(-x))


def silu_prime(x):
    x = np.asarray(x, dtype=float)
    s = 1.0 / (1.0 + np.exp(-x))
    return s * (1.0 + x * (1.0 - s))


@dataclass
class SplineActivation:
    """One learnable edge function: w_base*silu(x) + w_spline*sum_i c_i B_i(x)."""

    spec: SplineSpec
    knots: np.ndarray
    coeffs: np.ndarray
    w_base: float = 1.0
    w_spline: float = 1.0

    def __post_init__(self):
        self.knots = np.asarray(self.knots, dtype=float)
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        k, g = self.spec.degree, self.spec.grid_size
        if self.knots.shape != (g + 2 * k + 1,):
            raise InvalidSpecError(
                f"expected {g + 2 * k + 1} knots, got {self.knots.shape}"
            )
        steps = np.diff(self.knots)
        span = self.knots[-1] - self.knots[0]
        if np.any(steps <= 0) or np.max(np.abs(steps - steps[0])) > 1e-12 * max(span, 1.0):
            raise InvalidSpecError("knots must be strictly increasing and uniform")
        if self.coeffs.shape != (g + k,):
            raise InvalidSpecError(f"expected {g + k} coefficients, got {self.coeffs.shape}")
        if not (
            np.all(np.isfinite(self.coeffs))
            and np.isfinite(self.w_base)
            and np.isfinite(self.w_spline)
        ):
            raise InvalidSpecError("activation parameters must be finite")


def activation_eval(act: SplineActivation, x):
    """Evaluate the activation at scalar or array `x`."""
    b = basis_eval(act.knots, act.spec.degree, x)
    return act.w_base * silu(x) + act.w_spline * (b @ act.coeffs)


def activation_grad(act: SplineActivation, x: float):
    """Gradient of the activation at scalar `x`.

    Returns ``(dy_dx, dy_dcoeffs, dy_dw_base, dy_dw_spline)``.
    """
    x = float(x)
    b = basis_eval(act.knots, act.spec.degree, x)
    spline_val = float(b @ act.coeffs)
    if act.spec.degree >= 1:
        db = basis_derivative(act.knots, act.spec.degree, x)
        dspline = float(db @ act.coeffs)
    else:
        dspline = 0.0
    dy_dx = act.w_base * float(silu_prime(x)) + act.w_spline * dspline
    return dy_dx, act.w_spline * b, float(silu(x)), spline_val


def fit_coeffs(knots, degree, x, y):
    """Least-squares spline coefficients so that sum_i c_i B_i(x) ~ y."""
    design = basis_eval(knots, degree, np.asarray(x, dtype=float))
    coeffs, *_ = np.linalg.lstsq(design, np.asarray(y, dtype=float), rcond=None)
    return coeffs
