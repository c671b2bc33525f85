"""Exception types raised across the package."""


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""

    def __init__(self, message: str, field: str | None = None) -> None:
        super().__init__(message)
        self.field = field


class ExplosiveParametersError(FloatingPointError):
    """The simulated volatility left the finite range."""

    def __init__(self, index: int, burn_in: int) -> None:
        self.index = index
        self.burn_in = burn_in
        where = f"burn-in step {index}" if index < burn_in else f"t={index - burn_in + 1}"
        super().__init__(f"non-finite sigma^2 at {where} (step {index} of the simulation)")


class NonStationaryError(RuntimeError):
    """Estimated top Lyapunov exponent is not negative."""

    def __init__(self, rho_hat: float, std_err: float) -> None:
        self.rho_hat = rho_hat
        self.std_err = std_err
        super().__init__(
            f"parameters are not stationary: estimated Lyapunov exponent "
            f"rho_hat={rho_hat:.6g} (s.e. {std_err:.3g}) is not negative"
        )
