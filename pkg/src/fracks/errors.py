"""Exception types shared across the package.

Every refusal carries enough context to reconstruct which precondition
failed; hypothesis violations name the inequality in the message.
"""


class ParameterError(ValueError):
    """A parameter is outside its admissible domain."""


class HypothesisError(ParameterError):
    """A named hypothesis of an estimate is violated.

    The message always contains the inequality with the offending
    numbers substituted, e.g. ``theta >= 1 + (n - theta1)/3``.
    """

    def __init__(self, inequality, message=""):
        self.inequality = inequality
        super().__init__(f"{inequality}: {message}" if message else inequality)


class SeriesRangeError(ArithmeticError):
    """A series evaluation left its convergence-managed range."""


class BranchError(ValueError):
    """An evaluation branch was requested outside its validity region."""


class QuadratureError(ArithmeticError):
    """A quadrature failed to meet its tolerance or detected a divergent tail."""


class PoleError(ParameterError):
    """Evaluation requested exactly at a pole."""


class GridError(ParameterError):
    """Grid is malformed or too small for the requested decomposition."""


class SpectrumSupportError(ParameterError):
    """A field's spectrum does not satisfy a support precondition."""


class MeshError(ParameterError):
    """Time mesh is malformed or too small."""


class BlowUpError(RuntimeError):
    """A fixed-point iteration produced non-finite values.

    ``iteration`` is the index of the offending iterate.
    """

    def __init__(self, iteration, message=""):
        self.iteration = iteration
        super().__init__(message or f"iterate {iteration} is non-finite")


class ScalingError(ParameterError):
    """Self-similar rescaling is not applicable (e.g. gamma != 0)."""


class InsufficientRangeError(RuntimeError):
    """A scaling window spans less than the required number of decades."""


class ConfigError(ValueError):
    """Run configuration failed to parse or validate."""
