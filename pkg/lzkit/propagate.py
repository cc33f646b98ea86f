import logging
import math
import warnings
from dataclasses import dataclass, replace
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from .algebra import (
    DEFAULT_TOL,
    IDENTITY2,
    apply,
    choi_matrix,
    dual_superop,
    identity_superop,
    is_density,
)
from .errors import ConfigError, ModelError, PositivityError
from .gamma_profile import GammaProfile
from .integrator import Solution, integrate
from .lindblad import dephasing_lindbladian, dual_dephasing_lindbladian
from .model import LZFamily

logger = logging.getLogger(__name__)

# 品質設定に基づく許容誤差
QUALITY_PRESETS: Dict[str, Tuple[float, float]] = {
    "low": (1e-6, 1e-8),
    "medium": (1e-8, 1e-10),
    "high": (1e-10, 1e-12),
}
DEFAULT_QUALITY = "high"
# 固有値の負側の許容（丸め誤差の蓄積分）
POSITIVITY_TOL = 1e-8


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and step bounds for every propagation.

    Attributes:
        rtol: Relative tolerance of the local error
        atol: Absolute tolerance of the local error
        max_step: Largest step in ``s``
        min_step: Step underflow threshold; ``None`` means ``1e-9 * (s1 - s0)``
        initial_step: First trial step
    """

    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = 0.5
    min_step: Optional[float] = None
    initial_step: float = 1e-3

    def __post_init__(self) -> None:
        for key in ("rtol", "atol", "max_step", "initial_step"):
            value = getattr(self, key)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(key, f"must be a finite number > 0, got {value!r}")
        if self.initial_step > self.max_step:
            raise ConfigError("initial_step", "must not exceed max_step")
        if self.min_step is not None and not (0 < self.min_step <= self.initial_step):
            raise ConfigError("min_step", "must satisfy 0 < min_step <= initial_step")

    @classmethod
    def from_quality(cls, quality: str) -> "IntegratorConfig":
        """Build a configuration from a named preset ("low", "medium", "high").

        Unknown names fall back to "high" with a RuntimeWarning.
        """
        if quality not in QUALITY_PRESETS:
            warnings.warn(f"Warning: Invalid quality '{quality}'. Using '{DEFAULT_QUALITY}' instead.",
                          RuntimeWarning, stacklevel=2)
            quality = DEFAULT_QUALITY
        rtol, atol = QUALITY_PRESETS[quality]
        return cls(rtol=rtol, atol=atol)

    def with_tolerances(self, rtol: Optional[float] = None, atol: Optional[float] = None) -> "IntegratorConfig":
        """Copy with replaced tolerances."""
        return replace(self, rtol=self.rtol if rtol is None else rtol,
                       atol=self.atol if atol is None else atol)

    def run(self, f, s0: float, s1: float, y0: np.ndarray, checkpoints: Iterable[float] = ()) -> Solution:
        return integrate(f, s0, s1, y0, rtol=self.rtol, atol=self.atol,
                         initial_step=self.initial_step, max_step=self.max_step,
                         min_step=self.min_step, checkpoints=checkpoints)


@dataclass(frozen=True)
class PropagationResult:
    """Outcome of one propagation.

    ``checkpoints`` lists the positions in ``s`` at which ``samples`` were taken,
    in the order the integrator passed them.
    """

    value: np.ndarray
    steps_accepted: int
    steps_rejected: int
    max_local_error: float
    checkpoints: np.ndarray
    samples: np.ndarray


@dataclass(frozen=True)
class CPTPReport:
    """Trace preservation and complete positivity diagnostics of a superoperator."""

    trace_defect: float
    choi_min_eig: float

    def is_cptp(self, trace_tol: float = 1e-9, positivity_tol: float = POSITIVITY_TOL) -> bool:
        return self.trace_defect <= trace_tol and self.choi_min_eig >= -positivity_tol


def _check_interval(eps: float, s0: float, s1: float) -> None:
    if not (math.isfinite(eps) and eps > 0):
        raise ModelError(f"adiabatic parameter epsilon must be > 0, got {eps!r}")
    if s1 < s0:
        raise ModelError(f"propagation requires s1 >= s0, got s0={s0}, s1={s1}")


def _result(sol: Solution, positions: np.ndarray) -> PropagationResult:
    return PropagationResult(value=sol.y, steps_accepted=sol.stats.accepted,
                             steps_rejected=sol.stats.rejected,
                             max_local_error=sol.stats.max_local_error,
                             checkpoints=positions, samples=sol.values)


def evolve_state(fam: LZFamily, gamma: GammaProfile, eps: float, rho0: np.ndarray,
                 s0: float, s1: float, cfg: IntegratorConfig = IntegratorConfig(),
                 raw: bool = False, checkpoints: Iterable[float] = ()) -> PropagationResult:
    """Solve ``eps d(rho)/ds = L_s rho`` from ``s0`` to ``s1``.

    Args:
        fam: Landau-Zener family
        gamma: Dephasing profile
        eps: Adiabatic parameter
        rho0: Initial operator, a density matrix unless ``raw``
        s0: Initial parameter
        s1: Final parameter
        cfg: Integrator settings
        raw: Accept any 2x2 operator as initial value
        checkpoints: Positions in ``[s0, s1]`` at which the state is sampled

    Returns:
        The final state with step diagnostics

    Raises:
        ModelError: On invalid parameters or a non-density ``rho0``
        IntegratorError: On step-size underflow
        PositivityError: If a density ``rho0`` ends with an eigenvalue below ``-POSITIVITY_TOL``
    """
    _check_interval(eps, s0, s1)
    rho0 = np.array(rho0, dtype=complex)
    if not raw and not is_density(rho0, DEFAULT_TOL):
        raise ModelError("initial state is not a density matrix (pass raw=True for general operators)")

    def rhs(s: float, rho: np.ndarray) -> np.ndarray:
        return apply(dephasing_lindbladian(fam, s, gamma), rho) / eps

    sol = cfg.run(rhs, s0, s1, rho0, checkpoints)
    if not raw:
        min_eig = float(np.linalg.eigvalsh(0.5 * (sol.y + np.conj(sol.y).T))[0])
        if min_eig < -POSITIVITY_TOL:
            raise PositivityError("final state min eigenvalue", min_eig, POSITIVITY_TOL)
    return _result(sol, sol.checkpoints)


def evolve_superop(fam: LZFamily, gamma: GammaProfile, eps: float, s0: float, s1: float,
                   cfg: IntegratorConfig = IntegratorConfig(),
                   checkpoints: Iterable[float] = ()) -> PropagationResult:
    """Propagator ``U_eps(s1, s0)`` evolved as one 16-component system."""
    _check_interval(eps, s0, s1)

    def rhs(s: float, U: np.ndarray) -> np.ndarray:
        return dephasing_lindbladian(fam, s, gamma) @ U / eps

    sol = cfg.run(rhs, s0, s1, identity_superop(), checkpoints)
    return _result(sol, sol.checkpoints)


def evolve_dual(fam: LZFamily, gamma: GammaProfile, eps: float, A0: np.ndarray,
                s_top: float, s_bottom: float, cfg: IntegratorConfig = IntegratorConfig(),
                checkpoints: Iterable[float] = ()) -> PropagationResult:
    """Dual propagation ``A(s) = U_eps*(s_top, s) A0`` down to ``s = s_bottom``.

    The observable is integrated in the reversed variable ``t = -s`` where it obeys
    ``eps dA/dt = L*_{-t} A``. Samples are returned in decreasing ``s``.
    """
    _check_interval(eps, s_bottom, s_top)

    def rhs(t: float, A: np.ndarray) -> np.ndarray:
        return apply(dual_dephasing_lindbladian(fam, -t, gamma), A) / eps

    times = [-float(c) for c in checkpoints]
    sol = cfg.run(rhs, -s_top, -s_bottom, np.array(A0, dtype=complex), times)
    return _result(sol, -sol.checkpoints)


def cptp_report(U: np.ndarray) -> CPTPReport:
    """Trace defect ``max |U*(1) - 1|`` and the smallest Choi eigenvalue."""
    defect = float(np.max(np.abs(apply(dual_superop(U), IDENTITY2) - IDENTITY2)))
    choi = choi_matrix(U)
    eigs = np.linalg.eigvalsh(0.5 * (choi + np.conj(choi).T))
    return CPTPReport(trace_defect=defect, choi_min_eig=float(eigs[0]))
