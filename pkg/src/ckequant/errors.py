"""Exception hierarchy for the laboratory.

Every numerical failure mode has a named exception so the CLI can map it to a
stable machine-readable error code. Nothing here is recoverable in-place: the
degenerate-input policy is to abort the operation, never to regularize
silently.
"""


class CkeError(Exception):
    """Base class; `code` feeds the CLI error JSON."""

    code = "CKE_ERROR"
    exit_status = 3


class SpecInvalid(CkeError):
    code = "SPEC_INVALID"
    exit_status = 2


class UnsupportedSymmetry(CkeError):
    code = "UNSUPPORTED_SYMMETRY"
    exit_status = 2


class QuadratureFailure(CkeError):
    code = "QUADRATURE_FAILURE"


class SingularGram(CkeError):
    code = "SINGULAR_GRAM"


class NormalizationFailure(CkeError):
    code = "NORMALIZATION_FAILURE"


class DegenerateMetric(CkeError):
    code = "DEGENERATE_METRIC"


class NotConverged(CkeError):
    code = "NOT_CONVERGED"
    exit_status = 4

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class StepRejected(CkeError):
    code = "STEP_REJECTED"


class IllPosed(CkeError):
    code = "ILL_POSED"


class EigenFailure(CkeError):
    code = "EIGEN_FAILURE"


class FitFailure(CkeError):
    code = "FIT_FAILURE"


class SingularFit(CkeError):
    code = "SINGULAR_FIT"


class Blowup(CkeError):
    code = "BLOWUP"
