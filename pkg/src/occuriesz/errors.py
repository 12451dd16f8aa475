"""Exception types shared across the package."""


class OccurieszError(Exception):
    """Base class for all package errors."""


class ParameterError(OccurieszError, ValueError):
    """An argument is outside its documented domain."""


class ResolutionError(ParameterError):
    """A grid resolution requirement is violated (e.g. not a power of two)."""


class CapacityError(OccurieszError):
    """A fallback code path would exceed its memory or size budget."""


class UnsupportedRegimeError(OccurieszError):
    """Requested parameters fall in a regime this package deliberately
    does not cover (rough-path drivers with H < 1/2)."""


class RedirectError(OccurieszError):
    """The requested operation is defined, but must be computed through a
    different entry point; the message names it."""


class ModelError(OccurieszError):
    """A covariance model failed a consistency check (e.g. non-PSD Gram)."""


class ConfigValidationError(OccurieszError):
    """An experiment configuration is invalid.  ``violations`` lists every
    violated constraint, not just the first."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n" + "\n".join(
            f"  - {v}" for v in self.violations))


class ReproducibilityError(OccurieszError):
    """A replay produced different output checksums than the manifest."""

    def __init__(self, mismatches):
        self.mismatches = dict(mismatches)
        lines = [f"  {name}: {old} -> {new}" for name, (old, new) in self.mismatches.items()]
        super().__init__("replay checksum mismatch:\n" + "\n".join(lines))
