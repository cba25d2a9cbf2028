"""Exception types shared across the package.

Every error class carries a distinct process exit code so that the CLI can
map failures to diagnosable return values (0 is reserved for success, 2 for
argparse usage errors).
"""


class KanLabError(Exception):
    """Base class for all kanlab errors."""

    exit_code = 1


class ConfigError(KanLabError):
    """Invalid, incomplete, or unknown experiment configuration."""

    exit_code = 3


class InvalidSpecError(KanLabError, ValueError):
    """Spline specification violates its invariants (G=0, bad range, ...)."""

    exit_code = 4


class ShapeError(KanLabError, ValueError):
    """Dimension mismatch between arrays, layers, or histograms."""

    exit_code = 5


class InvalidInputError(KanLabError, ValueError):
    """Empty batch/dataset or otherwise unusable input values."""

    exit_code = 6


class DomainError(KanLabError, ValueError):
    """Evaluation requested at a non-finite point."""

    exit_code = 7


class UnsupportedDegreeError(KanLabError, ValueError):
    """Operation undefined for the requested spline degree."""

    exit_code = 8


class TrainingDivergedError(KanLabError, RuntimeError):
    """Loss or parameters became non-finite during training."""

    exit_code = 9

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"training diverged at step {step}")


class IntegrationError(KanLabError, RuntimeError):
    """An integrator step produced a non-finite state."""

    exit_code = 10


class DivergenceError(KanLabError, RuntimeError):
    """A generated trajectory escaped to a non-finite state."""

    exit_code = 11


class RolloutDivergedError(KanLabError, RuntimeError):
    """Closed-loop model orbit exceeded the divergence bound."""

    exit_code = 12

    def __init__(self, step, norm=None, message=None):
        self.step = step
        self.norm = norm
        super().__init__(
            message or f"rollout diverged at step {step}"
            + (f" (state norm {norm:.3g})" if norm is not None else "")
        )


class NumericalDegeneracyError(KanLabError, RuntimeError):
    """Tangent frame collapsed during Lyapunov accumulation."""

    exit_code = 13


class ModelFormatError(KanLabError, ValueError):
    """Model file is malformed or inconsistent."""

    exit_code = 14


class VersionMismatchError(ModelFormatError):
    """Model file format version is not supported."""

    exit_code = 15


class StageError(KanLabError, RuntimeError):
    """Wraps a failure inside a named experiment stage."""

    exit_code = 16

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
