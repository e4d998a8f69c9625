"""Exception types shared across the toolkit."""


class DebaError(Exception):
    """Base class for all toolkit errors."""


class InvalidInput(DebaError, ValueError):
    pass


class KTooLarge(InvalidInput):
    """Requested more tail triplets than the matrix has."""


class FormatError(DebaError):
    """A file on disk does not match the expected layout."""


class TrainingDiverged(DebaError, RuntimeError):
    pass
