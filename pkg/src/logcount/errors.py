"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration: bad parameter values or inconsistent inputs."""


class DataError(ValueError):
    """Malformed input data (count series files, CSV payloads)."""


class NumericError(RuntimeError):
    """A numeric routine failed to reach its accuracy or stability target."""


class ExplosionError(NumericError):
    """The intensity recursion left the representable range."""

    def __init__(self, t: int, log_sigma: float):
        super().__init__(
            f"intensity recursion exploded at t={t}: |ln(sigma)| = {abs(log_sigma):.4g} > 700"
        )
        self.t = t
        self.log_sigma = log_sigma
