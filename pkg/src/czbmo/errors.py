class ConfigError(ValueError):
    """Bad tag, missing file, malformed family or quadrature settings."""


class NumericalError(ArithmeticError):
    """A quantity could not be computed to the requested accuracy."""


class SingularPointError(NumericalError):
    """Evaluation requested at (or within the guard margin of) a singular point."""
