"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Inputs have inconsistent or invalid dimensions."""


class ConfigError(ValueError):
    """A configuration value is outside its legal range."""


class RegimeError(ValueError):
    """Parameters fall outside the regime where a formula or bound applies."""


class NumericError(ArithmeticError):
    """A computation produced or received non-finite values."""


class DataFormatError(ValueError):
    """An input file does not match the expected format."""
