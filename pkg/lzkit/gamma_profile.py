import math
from abc import ABC, abstractmethod
from typing import Dict, Tuple, Type

from scipy.special import expit

from .errors import ConfigError, ModelError

GAMMA_GRAMMAR = "const:A | gauss:A:W[:C] | logistic:A:W[:C] (A >= 0, W > 0)"


class GammaProfile(ABC):
    """Abstract base class for dephasing-rate profiles ``s -> gamma_s``.

    A profile is smooth, nonnegative and bounded by its amplitude, and exposes its
    first two derivatives in closed form so that the second-order expansion terms
    and their rate bounds can be evaluated without numerical differentiation.

    Attributes:
        amplitude: Supremum of the profile, ``gamma_0 >= 0``
    """

    kind: str = ""

    def __init__(self, amplitude: float) -> None:
        """Initialize a new profile.

        Args:
            amplitude: Supremum of the profile

        Raises:
            ModelError: If the amplitude is negative or not finite
        """
        if not math.isfinite(amplitude) or amplitude < 0:
            raise ModelError(f"gamma amplitude must be >= 0, got {amplitude!r}")
        self.amplitude: float = float(amplitude)

    @abstractmethod
    def value(self, s: float) -> float:
        """Dephasing rate at ``s``."""
        pass

    @abstractmethod
    def rate(self, s: float) -> float:
        """First derivative of the rate at ``s``."""
        pass

    @abstractmethod
    def curvature(self, s: float) -> float:
        """Second derivative of the rate at ``s``."""
        pass

    @abstractmethod
    def describe(self) -> str:
        """Canonical descriptor string, parseable by :func:`parse_gamma_spec`."""
        pass

    def __call__(self, s: float) -> float:
        return self.value(s)

    @property
    def sup(self) -> float:
        return self.amplitude

    @property
    def is_zero(self) -> bool:
        """True when the profile vanishes identically."""
        return self.amplitude == 0.0

    def weight_sup(self) -> float:
        """Upper bound of ``gamma / (1 + gamma^2)`` over the range of the profile."""
        g0 = self.amplitude
        return g0 / (1.0 + g0 * g0) if g0 <= 1.0 else 0.5

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.describe()!r})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, GammaProfile) and self.describe() == other.describe()

    def __hash__(self) -> int:
        return hash(self.describe())


class ConstantGamma(GammaProfile):
    """定数の減衰率"""

    kind = "const"

    def value(self, s: float) -> float:
        return self.amplitude

    def rate(self, s: float) -> float:
        return 0.0

    def curvature(self, s: float) -> float:
        return 0.0

    def describe(self) -> str:
        return f"const:{float(self.amplitude)!r}"


class GaussianBumpGamma(GammaProfile):
    """Gaussian bump ``A exp(-(s - C)^2 / (2 W^2))`` localized near the crossing."""

    kind = "gauss"

    def __init__(self, amplitude: float, width: float, center: float = 0.0) -> None:
        super().__init__(amplitude)
        if not math.isfinite(width) or width <= 0:
            raise ModelError(f"gamma width must be > 0, got {width!r}")
        self.width: float = float(width)
        self.center: float = float(center)

    def value(self, s: float) -> float:
        x = (s - self.center) / self.width
        return self.amplitude * math.exp(-0.5 * x * x)

    def rate(self, s: float) -> float:
        x = s - self.center
        return -self.value(s) * x / (self.width ** 2)

    def curvature(self, s: float) -> float:
        x = s - self.center
        w2 = self.width ** 2
        return self.value(s) * (x * x / (w2 * w2) - 1.0 / w2)

    def describe(self) -> str:
        text = f"gauss:{self.amplitude!r}:{self.width!r}"
        if self.center != 0.0:
            text += f":{self.center!r}"
        return text


class LogisticGamma(GammaProfile):
    """ロジスティック関数による減衰率の立ち上がり"""

    kind = "logistic"

    def __init__(self, amplitude: float, width: float, center: float = 0.0) -> None:
        super().__init__(amplitude)
        if not math.isfinite(width) or width <= 0:
            raise ModelError(f"gamma width must be > 0, got {width!r}")
        self.width: float = float(width)
        self.center: float = float(center)

    def _sigma(self, s: float) -> float:
        return float(expit((s - self.center) / self.width))

    def value(self, s: float) -> float:
        return self.amplitude * self._sigma(s)

    def rate(self, s: float) -> float:
        sig = self._sigma(s)
        return self.amplitude * sig * (1.0 - sig) / self.width

    def curvature(self, s: float) -> float:
        sig = self._sigma(s)
        return self.amplitude * sig * (1.0 - sig) * (1.0 - 2.0 * sig) / self.width ** 2

    def describe(self) -> str:
        text = f"logistic:{self.amplitude!r}:{self.width!r}"
        if self.center != 0.0:
            text += f":{self.center!r}"
        return text


# 便利なプリセット
class GammaPresets:
    """よく使用される減衰率プロファイル"""

    @staticmethod
    def none() -> ConstantGamma:
        """減衰なし（コヒーレント）"""
        return ConstantGamma(0.0)

    @staticmethod
    def constant(amplitude: float = 0.5) -> ConstantGamma:
        return ConstantGamma(amplitude)

    @staticmethod
    def bump(amplitude: float = 1.0, width: float = 4.0) -> GaussianBumpGamma:
        """交差点付近だけで働く減衰"""
        return GaussianBumpGamma(amplitude, width)

    @staticmethod
    def switch_on(amplitude: float = 0.5, width: float = 2.0) -> LogisticGamma:
        """交差点を過ぎてから立ち上がる減衰"""
        return LogisticGamma(amplitude, width)


_KINDS: Dict[str, Tuple[Type[GammaProfile], int, int]] = {
    "const": (ConstantGamma, 1, 1),
    "gauss": (GaussianBumpGamma, 2, 3),
    "logistic": (LogisticGamma, 2, 3),
}


def parse_gamma_spec(text: str) -> GammaProfile:
    """Parse a profile descriptor such as ``const:0.5`` or ``gauss:1.0:4.0``.

    Args:
        text: Descriptor string

    Returns:
        The corresponding profile

    Raises:
        ConfigError: If the kind is unknown, the arity is wrong or a value is invalid
    """
    head, *fields = text.strip().split(":")
    if head not in _KINDS:
        raise ConfigError("gamma", f"unknown profile kind {head!r}", GAMMA_GRAMMAR)
    cls, min_args, max_args = _KINDS[head]
    if not (min_args <= len(fields) <= max_args):
        raise ConfigError("gamma", f"{head} takes {min_args} to {max_args} numbers, got {len(fields)}", GAMMA_GRAMMAR)
    try:
        numbers = [float(field) for field in fields]
    except ValueError:
        raise ConfigError("gamma", f"non-numeric field in {text!r}", GAMMA_GRAMMAR) from None
    if numbers[0] < 0:
        raise ConfigError("gamma", "gamma amplitude must be ≥ 0", GAMMA_GRAMMAR)
    try:
        return cls(*numbers)
    except ModelError as exc:
        raise ConfigError("gamma", str(exc), GAMMA_GRAMMAR) from exc
