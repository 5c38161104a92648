class ParameterError(ValueError):
    """Invalid model or experiment parameters."""


class DomainError(ValueError):
    """Argument outside the domain of a map or metric."""


class ContaminationError(RuntimeError):
    """A tracked path came within reach of the spatial truncation window."""


class DegenerateFitError(ValueError):
    pass
