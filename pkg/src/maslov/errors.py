"""Exception taxonomy.

Every failure mode surfaced by the library carries a short machine-readable
``code`` so the CLI can classify numerical failures (exit status 2) without
string matching.
"""


class MaslovError(Exception):
    """Base class for all library errors."""

    code = "error"


class InvalidInputError(MaslovError):
    code = "invalid-input"


class NotPositiveDefiniteError(MaslovError):
    code = "not-positive-definite"


class DegenerateFrameError(MaslovError):
    code = "degenerate-frame"


class EssentialSpectrumError(MaslovError):
    """The spectral parameter does not lie above the essential spectrum."""

    code = "lambda-in-essential-spectrum"


class PotentialParseError(MaslovError):
    """Malformed tabulated-potential CSV; carries the offending line number."""

    code = "parse-error"

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NearSingularError(MaslovError):
    """X is too close to singular for S = YX^-1; use the continuous surrogate."""

    code = "near-singular"


class InvalidKernelError(MaslovError):
    code = "invalid-kernel"


class NonRegularCrossingError(MaslovError):
    """Crossing form has a near-zero eigenvalue; no sign can be assigned."""

    code = "non-regular-crossing"


class AmbiguousMatchError(MaslovError):
    """Branch overlap fell below 1/sqrt(2); the step is too large to track."""

    code = "ambiguous-matching"


class SpuriousDetectionError(MaslovError):
    code = "spurious-detection"


class PoleOrderError(MaslovError):
    """An eigenvalue branch does not blow up like a simple pole."""

    code = "non-order-one-singularity"


class SignConsistencyError(MaslovError):
    """One-sided limit classification disagrees with the crossing form."""

    code = "inconsistency"


class BoundaryCrossingError(MaslovError):
    """A crossing sits at the edge of the truncated domain; enlarge it."""

    code = "crossing-at-boundary"


class BlowupError(MaslovError):
    """Non-finite values during integration; renormalize more often."""

    code = "blowup"
