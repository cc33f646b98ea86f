"""Transition probabilities of the dephasing Landau-Zener problem.

The measured probability ``tr(P+_T U_eps(T, -T) P-_{-T})`` is compared with the
prediction ``exp(-pi g^2 / 2 eps) + eps * int gamma/(1+gamma^2) g^2/(64 e^5)``.
The exact Duhamel split separates the measured value into its Hamiltonian part
and the dephasing-driven integral.
"""
import logging
import math
import time
import warnings
from dataclasses import asdict, dataclass
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.integrate import quad, simpson
from scipy.stats import linregress

from .adiabatic import DEFAULT_QTOL, dimensionless_weight_integral, first_order_a, first_order_a_hat
from .algebra import apply, trace_norm
from .errors import FitError, ModelError, PositivityError, QuadratureError
from .gamma_profile import ConstantGamma, GammaProfile
from .lindblad import dephasing_part, kernel_projection
from .model import LZFamily
from .propagate import POSITIVITY_TOL, IntegratorConfig, cptp_report, evolve_dual, evolve_state, evolve_superop

logger = logging.getLogger(__name__)

# 出力CSVの列（順序固定）
CSV_FIELDS = (
    "g", "epsilon", "gamma_spec", "T", "p_measured", "p_coherent", "incoherent_integral",
    "p_predicted", "residual", "tail_bound", "cptp_trace_defect", "steps_accepted", "wall_time_s",
)

HORIZON_FACTOR = 25.0
PHASE_RESOLUTION = 0.05
MAX_PANEL_HALF_WIDTH = 0.05
DUHAMEL_QTOL = 1e-7
MAX_REFINEMENTS = 3
AVERAGING_SAMPLES = 33


@dataclass(frozen=True)
class TransitionRecord:
    """One cell of a sweep: inputs, measured and predicted probabilities, diagnostics.

    ``p_predicted == p_coherent + epsilon * incoherent_integral`` and
    ``residual == p_measured - p_predicted``.
    """

    g: float
    epsilon: float
    gamma_spec: str
    T: float
    p_measured: float
    p_coherent: float
    incoherent_integral: float
    p_predicted: float
    residual: float
    tail_bound: float
    cptp_trace_defect: float
    steps_accepted: int
    wall_time_s: float
    p_averaged: float = math.nan
    choi_min_eig: float = math.nan
    rtol: float = 1e-10
    qtol: float = DEFAULT_QTOL

    @property
    def noise_floor(self) -> float:
        """Residuals below this are indistinguishable from numerical error."""
        return 10.0 * (self.rtol * self.steps_accepted + self.qtol)

    def as_row(self) -> Dict[str, object]:
        """Fields of :data:`CSV_FIELDS` in order."""
        data = asdict(self)
        return {key: data[key] for key in CSV_FIELDS}


@dataclass(frozen=True)
class OrderFit:
    """Least-squares fit of ``log|residual|`` against ``log eps``.

    Attributes:
        epsilons: Epsilon values that survived the noise-floor filter
        residuals: Corresponding residuals
        slope: Fitted order
        intercept: Fitted ``log C``
        r_squared: Coefficient of determination
        excluded: Epsilon values dropped as below the noise floor
    """

    epsilons: List[float]
    residuals: List[float]
    slope: float
    intercept: float
    r_squared: float
    excluded: List[float]

    @property
    def constant(self) -> float:
        """Measured ``C`` in ``|R| ~ C eps^slope``."""
        return math.exp(self.intercept)


class DuhamelSplit(NamedTuple):
    coherent_part: float
    incoherent_part: float

    @property
    def total(self) -> float:
        return self.coherent_part + self.incoherent_part


def default_horizon(g: float) -> float:
    """Horizon ``T = 25 / g``."""
    return HORIZON_FACTOR / g


def coherent_lz(g: float, eps: float) -> float:
    """Landau-Zener probability ``exp(-pi g^2 / (2 eps))``."""
    if not (g > 0 and eps > 0):
        raise ModelError(f"coherent_lz requires g > 0 and eps > 0, got g={g!r}, eps={eps!r}")
    return math.exp(-math.pi * g * g / (2.0 * eps))


def incoherent_integral(fam: LZFamily, gamma: GammaProfile, T: float = math.inf,
                        qtol: float = DEFAULT_QTOL) -> float:
    """``int_{-T}^{T} gamma/(1+gamma^2) tr(P-(dP+)^2 P-)/e dtau``.

    The integrand equals ``g^2 gamma / (64 (1 + gamma^2) e^5)``; after ``tau = g sinh u``
    the integral is ``F / (2 g^2)`` with ``F`` the dimensionless weight integral.
    """
    if qtol <= 0:
        raise ModelError(f"qtol must be > 0, got {qtol!r}")
    if not T > 0:
        raise ModelError(f"horizon T must be > 0, got {T!r}")
    return dimensionless_weight_integral(fam, gamma, -T, T, qtol) / (2.0 * fam.g ** 2)


def tail_bound(fam: LZFamily, gamma: GammaProfile, T: float) -> float:
    """Certified bound on ``incoherent_integral(inf) - incoherent_integral(T)``.

    Uses ``gamma/(1+gamma^2) <= kappa`` and ``e_tau >= |tau| / 2`` on both tails.
    """
    if not T > 0:
        raise ModelError(f"horizon T must be > 0, got {T!r}")
    if gamma.is_zero:
        return 0.0
    return gamma.weight_sup() * fam.g ** 2 / (4.0 * T ** 4)


def predicted_p(fam: LZFamily, gamma: GammaProfile, eps: float, qtol: float = DEFAULT_QTOL,
                T: float = math.inf) -> float:
    """``coherent_lz + eps * incoherent_integral``."""
    return coherent_lz(fam.g, eps) + eps * incoherent_integral(fam, gamma, T, qtol)


def offdiagonal_weight(fam: LZFamily, s: float, rho: np.ndarray) -> float:
    """Trace norm of the coherences of ``rho`` in the eigenbasis of ``H_s``."""
    return trace_norm(rho - apply(kernel_projection(fam, s), rho))


def _clamp_probability(p: float) -> float:
    if 0.0 <= p <= 1.0:
        return p
    if not (-POSITIVITY_TOL <= p <= 1.0 + POSITIVITY_TOL):
        raise PositivityError("transition probability", p, POSITIVITY_TOL)
    warnings.warn(f"Warning: transition probability {p:.3e} clamped into [0, 1]", RuntimeWarning, stacklevel=3)
    return min(1.0, max(0.0, p))


def measured_p(fam: LZFamily, gamma: GammaProfile, eps: float, T: Optional[float] = None,
               cfg: IntegratorConfig = IntegratorConfig(), qtol: float = DEFAULT_QTOL) -> TransitionRecord:
    """Propagate from ``-T`` to ``T`` and measure the excitation probability.

    The full superpropagator is evolved so that the record carries CPTP diagnostics.
    ``p_averaged`` is the mean over the final phase period ``[T - pi eps / e_T, T]``.

    Raises:
        ModelError: On invalid parameters
        IntegratorError: If the stepper underflows
        PositivityError: If ``p`` leaves ``[-1e-8, 1 + 1e-8]`` or the propagator is not CP within 1e-8
    """
    T = default_horizon(fam.g) if T is None else T
    if not T > 0:
        raise ModelError(f"horizon T must be > 0, got {T!r}")
    started = time.perf_counter()

    p_start = fam.projectors(-T)[1]
    period_start = max(-T, T - math.pi * eps / fam.gap_energy(T))
    grid = np.linspace(period_start, T, AVERAGING_SAMPLES)
    result = evolve_superop(fam, gamma, eps, -T, T, cfg, checkpoints=grid)

    def excitation(s: float, U: np.ndarray) -> float:
        return float(np.real(np.trace(fam.projectors(s)[0] @ apply(U, p_start))))

    p = _clamp_probability(excitation(T, result.value))
    series = [excitation(s, U) for s, U in zip(result.checkpoints, result.samples)]
    p_averaged = float(simpson(series, x=result.checkpoints) / (T - period_start))

    report = cptp_report(result.value)
    if report.choi_min_eig < -POSITIVITY_TOL:
        raise PositivityError("choi_min_eig", report.choi_min_eig, POSITIVITY_TOL)
    p_coherent = coherent_lz(fam.g, eps)
    incoherent = incoherent_integral(fam, gamma, math.inf, qtol)
    p_predicted = p_coherent + eps * incoherent
    elapsed = time.perf_counter() - started
    logger.info("cell g=%g eps=%g gamma=%s T=%g: p=%.10f (%d steps, %.2fs)",
                fam.g, eps, gamma.describe(), T, p, result.steps_accepted, elapsed)
    return TransitionRecord(
        g=fam.g, epsilon=eps, gamma_spec=gamma.describe(), T=T,
        p_measured=p, p_coherent=p_coherent, incoherent_integral=incoherent,
        p_predicted=p_predicted, residual=p - p_predicted,
        tail_bound=tail_bound(fam, gamma, T), cptp_trace_defect=report.trace_defect,
        steps_accepted=result.steps_accepted, wall_time_s=elapsed,
        p_averaged=p_averaged, choi_min_eig=report.choi_min_eig,
        rtol=cfg.rtol, qtol=qtol,
    )


def duhamel_grid(fam: LZFamily, eps: float, T: float, phase_resolution: float = PHASE_RESOLUTION,
                 max_half_width: float = MAX_PANEL_HALF_WIDTH) -> np.ndarray:
    """Simpson grid on ``[-T, T]`` with an odd number of points.

    Each panel has two equal halves of width ``min(max_half_width, phase_resolution eps / (2 e))``
    so that the fast phase advances by at most ``phase_resolution`` per half-panel.
    """
    points = [-T]
    x = -T
    while x < T:
        hw = min(max_half_width, phase_resolution * eps / (2.0 * fam.gap_energy(x)))
        if x + 2.0 * hw >= T:
            points.extend((0.5 * (x + T), T))
            break
        points.extend((x + hw, x + 2.0 * hw))
        x += 2.0 * hw
    return np.array(points)


def duhamel_split(fam: LZFamily, gamma: GammaProfile, eps: float, T: Optional[float] = None,
                  cfg: IntegratorConfig = IntegratorConfig(), qtol: float = DUHAMEL_QTOL,
                  phase_resolution: float = PHASE_RESOLUTION) -> DuhamelSplit:
    """Exact split of the measured probability into Hamiltonian and dephasing parts.

    ``p = tr(P+_T U0(T,-T) P-_{-T}) + 1/(2 eps) int gamma_tau tr(A(tau) D_tau rho0(tau)) dtau``
    where ``rho0`` is the coherent evolution of ``P-_{-T}`` and ``A`` the dual evolution
    of ``P+_T``. Two propagations sample both on a shared grid.

    The quadrature error of the incoherent part is estimated by Richardson comparison with
    Simpson on every other point; the grid is refined by halving until the estimate is
    at most ``qtol``.

    Raises:
        ModelError: On invalid parameters
        QuadratureError: If the estimate still exceeds ``qtol`` after ``MAX_REFINEMENTS`` halvings
    """
    T = default_horizon(fam.g) if T is None else T
    if not T > 0:
        raise ModelError(f"horizon T must be > 0, got {T!r}")
    if not qtol > 0:
        raise ModelError(f"qtol must be > 0, got {qtol!r}")
    p_start = fam.projectors(-T)[1]
    p_end = fam.projectors(T)[0]
    coherent_gamma = ConstantGamma(0.0)

    if gamma.is_zero:
        forward = evolve_state(fam, coherent_gamma, eps, p_start, -T, T, cfg)
        return DuhamelSplit(float(np.real(np.trace(p_end @ forward.value))), 0.0)

    resolution, half_width = phase_resolution, MAX_PANEL_HALF_WIDTH
    for refinement in range(MAX_REFINEMENTS + 1):
        grid = duhamel_grid(fam, eps, T, resolution, half_width)
        forward = evolve_state(fam, coherent_gamma, eps, p_start, -T, T, cfg, checkpoints=grid)
        dual = evolve_dual(fam, gamma, eps, p_end, T, -T, cfg, checkpoints=grid)
        # dual samples come in decreasing s
        observables = dual.samples[::-1]
        integrand = np.array([
            gamma.value(tau) * np.real(np.trace(A @ apply(dephasing_part(fam, tau), rho)))
            for tau, A, rho in zip(grid, observables, forward.samples)
        ])
        incoherent = float(simpson(integrand, x=grid)) / (2.0 * eps)
        coarse = float(simpson(integrand[::2], x=grid[::2])) / (2.0 * eps)
        estimate = abs(incoherent - coarse) / 15.0
        if estimate <= qtol:
            coherent = float(np.real(np.trace(p_end @ forward.value)))
            logger.debug("duhamel split on %d points: coherent %.12f, incoherent %.12f (error %.1e)",
                         grid.size, coherent, incoherent, estimate)
            return DuhamelSplit(coherent, incoherent)
        logger.info("duhamel quadrature error %.2e > %.2e on %d points, refining (%d)",
                    estimate, qtol, grid.size, refinement + 1)
        resolution, half_width = 0.5 * resolution, 0.5 * half_width
    raise QuadratureError(estimate, qtol)


def t11_contribution(fam: LZFamily, gamma: GammaProfile, eps: float, T: float,
                     qtol: float = 1e-10) -> float:
    """``eps int (gamma/2) tr(a_hat+_{T,tau} D_tau a-_{tau,-T,0}) dtau`` from the operators.

    Equals ``eps * incoherent_integral(T)`` for the leading Duhamel contribution.
    """
    if gamma.is_zero:
        return 0.0
    g = fam.g
    coherent = ConstantGamma(0.0)

    def integrand(u: float) -> float:
        tau = g * math.sinh(u)
        a_hat = first_order_a_hat(fam, gamma, tau, T, 1, qtol)
        a_zero = first_order_a(fam, coherent, tau, -T, -1)
        value = np.trace(a_hat @ apply(dephasing_part(fam, tau), a_zero))
        return 0.5 * gamma.value(tau) * float(np.real(value)) * g * math.cosh(u)

    bound = math.asinh(T / g)
    value, error = quad(integrand, -bound, bound, epsabs=qtol, epsrel=0.0, limit=500)
    if error > qtol:
        raise QuadratureError(error, qtol)
    return eps * value


def fit_order(epsilons: Sequence[float], residuals: Sequence[float],
              floors: Optional[Sequence[float]] = None) -> OrderFit:
    """Fit ``log|residual| = slope log eps + intercept`` on points above their noise floor.

    Raises:
        FitError: If fewer than three points survive or the epsilons are not distinct
    """
    floors = [0.0] * len(epsilons) if floors is None else list(floors)
    if not (len(epsilons) == len(residuals) == len(floors)):
        raise FitError("epsilons, residuals and floors must have equal length")
    kept_eps, kept_res, excluded = [], [], []
    for eps, res, floor in zip(epsilons, residuals, floors):
        if abs(res) > floor and res != 0.0:
            kept_eps.append(float(eps))
            kept_res.append(float(res))
        else:
            excluded.append(float(eps))
    if len(kept_eps) < 3:
        raise FitError(f"only {len(kept_eps)} residuals above the noise floor; need at least 3")
    if len(set(kept_eps)) != len(kept_eps):
        raise FitError("order fit needs distinct epsilon values")
    fit = linregress(np.log(kept_eps), np.log(np.abs(kept_res)))
    return OrderFit(epsilons=kept_eps, residuals=kept_res, slope=float(fit.slope),
                    intercept=float(fit.intercept), r_squared=float(fit.rvalue ** 2), excluded=excluded)


def order_fit(records: Iterable[TransitionRecord]) -> OrderFit:
    """Order of the residual in ``eps`` across records sharing ``(g, gamma_spec, T)``."""
    records = sorted(records, key=lambda r: r.epsilon, reverse=True)
    keys = {(r.g, r.gamma_spec, r.T) for r in records}
    if len(keys) > 1:
        raise FitError(f"records mix {len(keys)} (g, gamma, T) groups")
    return fit_order([r.epsilon for r in records], [r.residual for r in records],
                     [r.noise_floor for r in records])
