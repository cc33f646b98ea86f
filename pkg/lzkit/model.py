import math
import numbers
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .algebra import dagger
from .errors import ModelError


@dataclass(frozen=True)
class LZFamily:
    """The Landau-Zener family ``H_s = 1/2 [[s, g], [g, -s]]``.

    Every quantity is available in closed form. Off-diagonal combinations such as
    ``2 e_s - s`` are evaluated through ``g^2 / (2 e_s + s)`` when ``s > 0`` so that
    large ``|s|`` does not lose precision.

    Attributes:
        g: Minimal gap of the avoided crossing, strictly positive
    """

    g: float

    def __post_init__(self) -> None:
        if not (isinstance(self.g, numbers.Real) and math.isfinite(self.g)) or self.g <= 0:
            raise ModelError(f"gap parameter g must be a finite number > 0, got {self.g!r}")

    # 2e +/- s without cancellation
    def _split(self, s: float) -> Tuple[float, float, float]:
        e2 = math.hypot(s, self.g)
        if s >= 0:
            plus = e2 + s
            minus = self.g * self.g / plus
        else:
            minus = e2 - s
            plus = self.g * self.g / minus
        return e2, plus, minus

    def hamiltonian(self, s: float) -> np.ndarray:
        """Hamiltonian at parameter ``s``."""
        return 0.5 * np.array([[s, self.g], [self.g, -s]], dtype=complex)

    def gap_energy(self, s: float) -> float:
        """Positive eigenvalue ``e_s = sqrt(s^2 + g^2) / 2``."""
        return 0.5 * math.hypot(s, self.g)

    def projectors(self, s: float) -> Tuple[np.ndarray, np.ndarray]:
        """Spectral projections ``(P+, P-)`` onto the eigenvalues ``+e_s`` and ``-e_s``."""
        e2, plus, minus = self._split(s)
        norm = 2.0 * e2
        p_plus = np.array([[plus, self.g], [self.g, minus]], dtype=complex) / norm
        p_minus = np.array([[minus, -self.g], [-self.g, plus]], dtype=complex) / norm
        return p_plus, p_minus

    def coherence_op(self, s: float) -> np.ndarray:
        """Real coherence operator ``E_s = |psi+><psi-|``.

        ``E E* = P+``, ``E* E = P-`` and ``tr E = 0``.
        """
        e2, plus, minus = self._split(s)
        return np.array([[self.g, -plus], [minus, -self.g]], dtype=complex) / (2.0 * e2)

    def projector_rate(self, s: float) -> Tuple[np.ndarray, np.ndarray]:
        """Derivatives ``(dP+/ds, dP-/ds) = +/- (g / 8 e^2)(E + E*)``."""
        e = self.gap_energy(s)
        E = self.coherence_op(s)
        rate = (self.g / (8.0 * e * e)) * (E + dagger(E))
        return rate, -rate

    def edot(self, s: float) -> np.ndarray:
        """Derivative of the coherence operator, ``-(g / 8 e^2)(P+ - P-)``."""
        e = self.gap_energy(s)
        p_plus, p_minus = self.projectors(s)
        return -(self.g / (8.0 * e * e)) * (p_plus - p_minus)

    def fs_velocity(self, s: float) -> float:
        """Fubini-Study velocity ``tr(P- (dP+/ds)^2 P-) = g^2 / (64 e^4)``."""
        e = self.gap_energy(s)
        return self.g * self.g / (64.0 * e ** 4)

    def sqrt_hamiltonian(self, s: float) -> np.ndarray:
        """``sgn(H) sqrt|H|``, which for this family equals ``H / sqrt(e_s)``."""
        return self.hamiltonian(s) / math.sqrt(self.gap_energy(s))
