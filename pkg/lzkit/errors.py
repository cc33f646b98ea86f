from typing import Optional


class LZKitError(Exception):
    """Root of every error raised by lzkit."""


class ModelError(LZKitError, ValueError):
    """Invalid physical input: bad parameters or an operator outside the allowed sector."""


class IntegratorError(LZKitError, RuntimeError):
    """The adaptive stepper could not reach the end of the interval.

    Attributes:
        s: Position where the stepper gave up
        step: Step size that was rejected last
        min_step: Smallest step the run was allowed to take
    """

    def __init__(self, message: str, s: float, step: float, min_step: float) -> None:
        super().__init__(f"{message} (s={s:.6g}, step={step:.3e}, min_step={min_step:.3e})")
        self.s = s
        self.step = step
        self.min_step = min_step


class QuadratureError(LZKitError, RuntimeError):
    """Adaptive quadrature did not reach the requested accuracy."""

    def __init__(self, estimate: float, tolerance: float) -> None:
        super().__init__(f"quadrature error estimate {estimate:.3e} exceeds tolerance {tolerance:.3e}")
        self.estimate = estimate
        self.tolerance = tolerance


class PositivityError(LZKitError, RuntimeError):
    """A propagated state, channel or probability left its allowed range beyond roundoff.

    Attributes:
        quantity: Name of the violated quantity
        value: Offending value
        tolerance: Allowed violation
    """

    def __init__(self, quantity: str, value: float, tolerance: float) -> None:
        super().__init__(f"{quantity} = {value:.3e} violates positivity beyond {tolerance:.0e}")
        self.quantity = quantity
        self.value = value
        self.tolerance = tolerance


class ConfigError(LZKitError, ValueError):
    """Sweep configuration could not be parsed or validated.

    Attributes:
        key: Offending configuration key
        grammar: Accepted grammar for that key
    """

    def __init__(self, key: str, message: str, grammar: Optional[str] = None) -> None:
        text = f"{key}: {message}"
        if grammar:
            text += f" (accepted: {grammar})"
        super().__init__(text)
        self.key = key
        self.grammar = grammar


class FitError(LZKitError, ValueError):
    """Too few usable points for an order fit."""
