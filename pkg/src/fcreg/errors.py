"""Exception types shared across the package."""


class FcregError(Exception):
    """Base class for all fcreg-specific errors."""


class CloudFormatError(FcregError):
    """A point-cloud file could not be parsed (bad header, truncated body, ...)."""


class DatasetNotFoundError(FcregError):
    """A named dataset is not available locally."""


class DegenerateInputError(FcregError):
    """Input admits no meaningful solution (zero total weight, empty cloud, ...)."""


class TooFewKeypointsError(DegenerateInputError):
    """Keypoint detection produced fewer points than the solver needs.

    Callers should fall back to full-cloud registration (register_cf).
    """
