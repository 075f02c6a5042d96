from typing import Optional


class SoapBridgeError(Exception):
    def __init__(self, message: str, error_type: str):
        self.message = message
        self.error_type = error_type
        super().__init__(self.message)


class InvalidArgument(SoapBridgeError):
    def __init__(self, message: str):
        super().__init__(message, "INVALID_ARGUMENT")


class DegenerateCoefficients(SoapBridgeError):
    def __init__(self, message: str, node: int, value: float, side: str):
        self.node = node
        self.value = value
        self.side = side
        super().__init__(message, "DEGENERATE")


class SolverFailure(SoapBridgeError):
    def __init__(self, message: str, iterations: int = 0, residual: float = float("nan")):
        self.iterations = iterations
        self.residual = residual
        super().__init__(message, "SOLVER_FAILURE")


class NoCatenoid(SoapBridgeError):
    def __init__(self, sigma: float, sigma_min: float):
        self.sigma = sigma
        super().__init__(
            f"No catenoid exists for sigma={sigma:.6g} (sigma_min={sigma_min:.6g})", "NO_CATENOID"
        )


class EnergyDomainError(SoapBridgeError):
    def __init__(self, message: str):
        super().__init__(message, "DOMAIN")


class ConfigError(SoapBridgeError):
    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        where = f" (key '{key}'" + (f", line {line})" if line else ")") if key else ""
        super().__init__(f"{message}{where}", "CONFIG")


class VerificationFailure(SoapBridgeError):
    def __init__(self, message: str):
        super().__init__(message, "VERIFICATION")


EXIT_CODES: dict[str, int] = {
    "CONFIG": 1,
    "INVALID_ARGUMENT": 1,
    "NO_CATENOID": 1,
    "SOLVER_FAILURE": 2,
    "DEGENERATE": 2,
    "DOMAIN": 2,
    "VERIFICATION": 3,
}
