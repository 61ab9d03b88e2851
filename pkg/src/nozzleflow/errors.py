"""Exception types shared across the package."""


class NozzleFlowError(Exception):
    """Base class for all package errors."""


class ValidationError(NozzleFlowError, ValueError):
    """Input data violates a structural requirement.

    ``condition`` carries the stable identifier of the failed check.
    """

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class ParameterError(NozzleFlowError, ValueError):
    pass


class DomainError(NozzleFlowError, ValueError):
    pass


class BranchError(NozzleFlowError, ValueError):
    """Requested state is sonic or supersonic."""


class ConvergenceError(NozzleFlowError, RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class TransformError(NozzleFlowError, ValueError):
    pass


class ExtractionError(NozzleFlowError, ValueError):
    pass
