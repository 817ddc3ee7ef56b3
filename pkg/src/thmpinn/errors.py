"""Exception types shared across the package."""


class ThmPinnError(Exception):
    """Base class for all package errors."""


# -- autodiff / numerics


class NonFiniteValueError(ThmPinnError):
    """A forward evaluation produced NaN or Inf (bad sample or parameters)."""


class NonFiniteGradientError(ThmPinnError):
    """A gradient entry is NaN or Inf; the optimizer step is aborted."""


class NonFiniteLossError(ThmPinnError):
    """A loss term evaluated to NaN or Inf; carries the offending term name."""


class ZeroNormError(ThmPinnError):
    """Relative convergence error is undefined for a zero-norm iterate."""


# -- network


class InvalidArchitectureError(ThmPinnError):
    """Layer size list is empty, too short, or contains non-positive sizes."""


class ShapeMismatchError(ThmPinnError):
    """Input point length does not match the network input layer."""


class CorruptStreamError(ThmPinnError):
    """Parameter byte stream is truncated or has a bad header."""


class ArchitectureMismatchError(ThmPinnError):
    """Loaded parameters do not match the expected layer sizes."""


# -- physics


class MissingPropertyError(ThmPinnError):
    """A required material property is absent; carries the field name."""


class DivisionByZeroError(ThmPinnError):
    """A characteristic scale is zero."""


class SaturationOutOfRangeError(ThmPinnError):
    """Wetting saturation outside the valid Brooks-Corey range."""


class MissingDerivativeError(ThmPinnError):
    """A residual needs a field derivative that was not supplied."""


# -- trainer


class EmptyDomainError(ThmPinnError):
    """Collocation sampling was asked for a degenerate domain."""


class InvalidConfigError(ThmPinnError):
    """A training configuration value is out of range."""


class MaxPassesExceededWarning(UserWarning):
    """Sequential split hit the pass cap before reaching TOL."""


class AllZeroGradientsWarning(UserWarning):
    """Adaptive weight update received all-zero gradient norms."""


class SaturationClampWarning(UserWarning):
    """Capillary pressure below entry pressure was clamped to full saturation."""


# -- oracle


class UnstableConfigError(ThmPinnError):
    """Finite-difference scheme violates its stability/positivity condition."""


class NonConvergedSplitError(ThmPinnError):
    """Fixed-stress inner iterations exceeded the cap."""


# -- cli


class ParseError(ThmPinnError):
    """Configuration file is unreadable or not valid JSON."""


class ValidationError(ThmPinnError):
    """Configuration contents violate the schema; carries the key path."""


class SchemaMismatchError(ThmPinnError):
    """Two CSV tables cannot be compared (different columns)."""
