"""Parallel transport and the closed-form adiabatic expansion of the dephasing LZ problem.

Solutions of ``eps d(rho)/ds = L_s rho`` that start on an eigenprojection are
expanded as ``P_s + eps a_{s,s'} + eps^2 r(s, s')``. This module provides the
first-order terms ``a`` (forward) and ``a_hat`` (dual, reversed time), the
second-order kernel ``b`` that controls the remainder, and the same objects built
directly from their definitions through parallel transport and ``L^-1`` so that
the closed forms can be cross-checked.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .algebra import apply, dagger, devectorize, trace_norm, vectorize
from .errors import ModelError, QuadratureError
from .gamma_profile import GammaProfile
from .integrator import integrate
from .lindblad import dephasing_lindbladian, inverse_on_range, kernel_projection, kernel_projection_rate
from .model import LZFamily
from .propagate import IntegratorConfig, evolve_state

logger = logging.getLogger(__name__)

Direction = Literal["forward", "dual"]

DEFAULT_QTOL = 1e-12
TRANSPORT_TOL = 1e-10
# cosh(u)^-4 < 1e-69 beyond this
_U_MAX = 40.0


@dataclass(frozen=True)
class ExpansionTerm:
    """First- and second-order terms of the adiabatic expansion at ``(s, s')``.

    Attributes:
        a: First-order correction, Hermitian and traceless
        b: Second-order kernel
        s: Evaluation point
        s_prime: Reference point of the expansion
        sign: +1 for the upper level, -1 for the lower one
        direction: "forward" or "dual"
    """

    a: np.ndarray
    b: np.ndarray
    s: float
    s_prime: float
    sign: int
    direction: Direction = "forward"


@dataclass(frozen=True)
class TransportResult:
    """Parallel transport ``T(s, s')`` with its diagnostics."""

    transport: np.ndarray
    s: float
    s_prime: float
    steps_accepted: int
    intertwining_defect: float


@dataclass(frozen=True)
class BoundReport:
    """Largest ``||X_s||_1 e_s^3`` over a grid of ``s`` for a scanned kernel ``X``."""

    constant: float
    at_s: float
    values: np.ndarray = field(repr=False)

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))


@dataclass(frozen=True)
class ExpansionRow:
    s: float
    e: float
    a_norm: float
    a_hat_norm: float
    b_norm: float
    b_scaled: float


def _check_sign(sign: int) -> int:
    if sign not in (1, -1):
        raise ModelError(f"sign must be +1 or -1, got {sign!r}")
    return sign


def _check_order(lo: float, hi: float, what: str) -> None:
    if hi < lo:
        raise ModelError(f"{what} requires s >= s' (got s={hi}, s'={lo})")


def dimensionless_weight_integral(fam: LZFamily, gamma: GammaProfile, lo: float, hi: float,
                                  qtol: float = DEFAULT_QTOL) -> float:
    """``int gamma/(1+gamma^2) cosh(u)^-4 du`` over ``tau = g sinh(u)`` in ``[lo, hi]``.

    ``qtol`` bounds the absolute quadrature error of this dimensionless integral.
    """
    _check_order(lo, hi, "gap integral")
    if gamma.is_zero or lo == hi:
        return 0.0
    g = fam.g
    u_lo = max(math.asinh(lo / g), -_U_MAX) if math.isfinite(lo) else -_U_MAX
    u_hi = min(math.asinh(hi / g), _U_MAX) if math.isfinite(hi) else _U_MAX
    if u_hi <= u_lo:
        return 0.0

    def integrand(u: float) -> float:
        gam = gamma.value(g * math.sinh(u))
        return gam / (1.0 + gam * gam) / math.cosh(u) ** 4

    value, error = quad(integrand, u_lo, u_hi, epsabs=qtol, epsrel=0.0, limit=500)
    logger.debug("gap integral [%g, %g] = %.17g (error estimate %.3e)", lo, hi, value, error)
    if error > qtol:
        raise QuadratureError(error, qtol)
    return value


def weighted_gap_integral(fam: LZFamily, gamma: GammaProfile, lo: float, hi: float,
                          qtol: float = DEFAULT_QTOL) -> float:
    """``int_lo^hi gamma_tau / ((1 + gamma_tau^2) e_tau^5) dtau`` (``lo`` may be ``-inf``)."""
    return 32.0 / fam.g ** 4 * dimensionless_weight_integral(fam, gamma, lo, hi, qtol)


def parallel_transport(fam: LZFamily, s_prime: float, s: float, tol: float = TRANSPORT_TOL) -> TransportResult:
    """Solve ``dT/ds = [dP/ds, P_s] T`` with ``T(s', s') = 1``.

    Raises:
        ModelError: If ``s < s'``
        IntegratorError: On step-size underflow
    """
    _check_order(s_prime, s, "parallel transport")

    def rhs(x: float, T: np.ndarray) -> np.ndarray:
        P = kernel_projection(fam, x)
        Pd = kernel_projection_rate(fam, x)
        return (Pd @ P - P @ Pd) @ T

    sol = integrate(rhs, s_prime, s, np.eye(4, dtype=complex), rtol=tol, atol=1e-2 * tol, max_step=0.5)
    T = sol.y
    defect = float(np.max(np.abs(T @ kernel_projection(fam, s_prime) - kernel_projection(fam, s) @ T)))
    return TransportResult(transport=T, s=s, s_prime=s_prime,
                           steps_accepted=sol.stats.accepted, intertwining_defect=defect)


def _coherent_part(fam: LZFamily, gamma: GammaProfile, s: float, conjugate: bool) -> np.ndarray:
    gam = gamma.value(s)
    e = fam.gap_energy(s)
    E = fam.coherence_op(s)
    c = (1j - gam) if not conjugate else (-1j - gam)
    return fam.g * (c * E + np.conj(c) * dagger(E)) / (16.0 * (1.0 + gam * gam) * e ** 3)


def _population_part(fam: LZFamily, s: float, integral: float) -> np.ndarray:
    p_plus, p_minus = fam.projectors(s)
    return fam.g ** 2 * (p_minus - p_plus) / 64.0 * integral


def first_order_a(fam: LZFamily, gamma: GammaProfile, s: float, s_prime: float, sign: int,
                  qtol: float = DEFAULT_QTOL) -> np.ndarray:
    """First-order term ``a^+-_{s,s'}`` of the forward expansion (``s >= s'``)."""
    sign = _check_sign(sign)
    _check_order(s_prime, s, "first_order_a")
    integral = weighted_gap_integral(fam, gamma, s_prime, s, qtol)
    return sign * (_coherent_part(fam, gamma, s, False) + _population_part(fam, s, integral))


def first_order_a_hat(fam: LZFamily, gamma: GammaProfile, tau: float, top: float, sign: int,
                      qtol: float = DEFAULT_QTOL) -> np.ndarray:
    """First-order term of the dual expansion run backwards from ``top`` to ``tau <= top``.

    The coherent coefficient is conjugated and enters with the opposite sign; the
    population integral runs over ``[tau, top]``.
    """
    sign = _check_sign(sign)
    _check_order(tau, top, "first_order_a_hat")
    integral = weighted_gap_integral(fam, gamma, tau, top, qtol)
    return sign * (-_coherent_part(fam, gamma, tau, True) + _population_part(fam, tau, integral))


def _b_closed_form(fam: LZFamily, gamma: GammaProfile, s: float, integral: float,
                   sign: int, conjugate: bool) -> np.ndarray:
    g = fam.g
    e = fam.gap_energy(s)
    gam = gamma.value(s)
    gam_dot = gamma.rate(s)
    q = 1.0 + gam * gam
    c = (-1j - gam) if conjugate else (1j - gam)
    E = fam.coherence_op(s)
    Ed = dagger(E)
    transported = g ** 3 * (c * E + np.conj(c) * Ed) / (512.0 * q * e ** 3) * integral
    coef = g * c / (32.0 * q * q * e ** 4) * (3.0 * s * c / (4.0 * e * e) + gam_dot + 2.0 * gam_dot * gam * c / q)
    return -sign * (transported + coef * E + np.conj(coef) * Ed)


def second_order_b(fam: LZFamily, gamma: GammaProfile, s: float, s_prime: float, sign: int,
                   direction: Direction = "forward", qtol: float = DEFAULT_QTOL) -> np.ndarray:
    """Second-order kernel ``b^+-_{s,s'}`` in closed form.

    For ``direction="dual"`` every coefficient is complex conjugated and the
    gamma-integral runs the other way, over ``[s, s']`` with ``s <= s'``.
    """
    sign = _check_sign(sign)
    if direction == "forward":
        _check_order(s_prime, s, "second_order_b")
        integral = weighted_gap_integral(fam, gamma, s_prime, s, qtol)
        return _b_closed_form(fam, gamma, s, integral, sign, conjugate=False)
    if direction == "dual":
        _check_order(s, s_prime, "dual second_order_b")
        integral = weighted_gap_integral(fam, gamma, s, s_prime, qtol)
        return _b_closed_form(fam, gamma, s, integral, sign, conjugate=True)
    raise ModelError(f"direction must be 'forward' or 'dual', got {direction!r}")


def expansion_term(fam: LZFamily, gamma: GammaProfile, s: float, s_prime: float, sign: int,
                   direction: Direction = "forward", qtol: float = DEFAULT_QTOL) -> ExpansionTerm:
    """Both closed-form terms at ``(s, s')``; for the dual direction ``s <= s'``."""
    if direction == "forward":
        a = first_order_a(fam, gamma, s, s_prime, sign, qtol)
    else:
        a = first_order_a_hat(fam, gamma, s, s_prime, sign, qtol)
    b = second_order_b(fam, gamma, s, s_prime, sign, direction, qtol)
    return ExpansionTerm(a=a, b=b, s=s, s_prime=s_prime, sign=sign, direction=direction)


def _inv_pdot(fam: LZFamily, gamma: GammaProfile, s: float, sign: int) -> np.ndarray:
    rate = fam.projector_rate(s)[0 if sign > 0 else 1]
    return inverse_on_range(fam, s, gamma, rate)


def _range_part(fam: LZFamily, s: float, X: np.ndarray) -> np.ndarray:
    return X - apply(kernel_projection(fam, s), X)


def definitional_terms(fam: LZFamily, gamma: GammaProfile, s: float, s_prime: float, sign: int,
                       h: float = 1e-3, tol: float = 1e-12) -> ExpansionTerm:
    """``a`` and ``b`` built from their defining expressions instead of the closed forms.

    ``J(s) = int_{s'}^s T(s, tau) dP_tau L_tau^-1 dP_tau dtau`` is obtained from the
    augmented equation ``dJ/ds = [dP_s, P_s] J + dP_s L_s^-1 dP_s`` with ``J(s') = 0``;
    ``d/ds (L^-1 dP)`` uses a fourth-order central difference of step ``h``.
    """
    sign = _check_sign(sign)
    _check_order(s_prime, s, "definitional_terms")

    def source(x: float) -> np.ndarray:
        return kernel_projection_rate(fam, x) @ vectorize(_inv_pdot(fam, gamma, x, sign))

    def rhs(x: float, J: np.ndarray) -> np.ndarray:
        P = kernel_projection(fam, x)
        Pd = kernel_projection_rate(fam, x)
        return (Pd @ P - P @ Pd) @ J + source(x)

    J = devectorize(integrate(rhs, s_prime, s, np.zeros(4, dtype=complex),
                              rtol=tol, atol=tol, max_step=0.25).y)
    first = _inv_pdot(fam, gamma, s, sign)
    a = first + J

    def f(x: float) -> np.ndarray:
        return _inv_pdot(fam, gamma, x, sign)

    derivative = (-f(s + 2 * h) + 8 * f(s + h) - 8 * f(s - h) + f(s - 2 * h)) / (12.0 * h)
    transported = apply(kernel_projection_rate(fam, s), J)
    b = (inverse_on_range(fam, s, gamma, _range_part(fam, s, transported), tol=1e-8)
         + inverse_on_range(fam, s, gamma, _range_part(fam, s, derivative), tol=1e-8))
    return ExpansionTerm(a=a, b=b, s=s, s_prime=s_prime, sign=sign, direction="forward")


def b_bound_check(fam: LZFamily, gamma: GammaProfile, s_grid: Sequence[float],
                  s_prime: Optional[float] = None, direction: Direction = "forward") -> BoundReport:
    """Scan ``||b_{s,s'}||_1 e_s^3`` over ``s_grid``.

    ``s_prime`` defaults to one below the smallest grid point (forward) or one
    above the largest (dual).
    """
    grid = np.asarray(s_grid, dtype=float)
    if s_prime is None:
        s_prime = grid.min() - 1.0 if direction == "forward" else grid.max() + 1.0
    values = np.array([trace_norm(second_order_b(fam, gamma, s, s_prime, 1, direction)) * fam.gap_energy(s) ** 3
                       for s in grid])
    k = int(np.argmax(values))
    return BoundReport(constant=float(values[k]), at_s=float(grid[k]), values=values)


def b_rate_bound_check(fam: LZFamily, gamma: GammaProfile, s_grid: Sequence[float],
                       s_prime: Optional[float] = None, h: float = 1e-4,
                       direction: Direction = "forward") -> BoundReport:
    """Scan ``||d/ds b_{s,s'}||_1 e_s^3`` with a central difference of step ``h``."""
    grid = np.asarray(s_grid, dtype=float)
    if s_prime is None:
        s_prime = grid.min() - 1.0 if direction == "forward" else grid.max() + 1.0
    values = []
    for s in grid:
        upper = second_order_b(fam, gamma, s + h, s_prime, 1, direction)
        lower = second_order_b(fam, gamma, s - h, s_prime, 1, direction)
        values.append(trace_norm((upper - lower) / (2.0 * h)) * fam.gap_energy(s) ** 3)
    values = np.array(values)
    k = int(np.argmax(values))
    logger.debug("b rate bound constant %.6g at s=%g", values[k], grid[k])
    return BoundReport(constant=float(values[k]), at_s=float(grid[k]), values=values)


def expansion_initial_state(fam: LZFamily, gamma: GammaProfile, eps: float, s_prime: float,
                            sign: int) -> np.ndarray:
    """``P^+-_{s'} + eps a^+-_{s',s'}``, the initial value of the expanded solution."""
    projector = fam.projectors(s_prime)[0 if _check_sign(sign) > 0 else 1]
    return projector + eps * first_order_a(fam, gamma, s_prime, s_prime, sign)


def remainder_extract(fam: LZFamily, gamma: GammaProfile, eps: float, s_prime: float, s: float,
                      sign: int, rho_numeric: np.ndarray) -> np.ndarray:
    """Second-order remainder ``(rho - P_s - eps a_{s,s'}) / eps^2``."""
    projector = fam.projectors(s)[0 if _check_sign(sign) > 0 else 1]
    return (rho_numeric - projector - eps * first_order_a(fam, gamma, s, s_prime, sign)) / (eps * eps)


def remainder_profile(fam: LZFamily, gamma: GammaProfile, eps: float, s_prime: float,
                      s_grid: Sequence[float], sign: int = -1,
                      cfg: IntegratorConfig = IntegratorConfig()) -> np.ndarray:
    """Trace norms of the remainder along ``s_grid`` from one propagation starting at ``s'``."""
    grid = np.asarray(s_grid, dtype=float)
    rho0 = expansion_initial_state(fam, gamma, eps, s_prime, sign)
    result = evolve_state(fam, gamma, eps, rho0, s_prime, float(grid.max()), cfg,
                          raw=True, checkpoints=grid)
    return np.array([trace_norm(remainder_extract(fam, gamma, eps, s_prime, s, sign, rho))
                     for s, rho in zip(result.checkpoints, result.samples)])


def adiabatic_residual(fam: LZFamily, gamma: GammaProfile, eps: float, s: float, s_prime: float,
                       sign: int = -1, h: float = 1e-3) -> float:
    """``||L_s(P_s + eps a) - eps d/ds(P_s + eps a)||_1``; of order ``eps^2``."""
    idx = 0 if _check_sign(sign) > 0 else 1

    def expanded(x: float) -> np.ndarray:
        return fam.projectors(x)[idx] + eps * first_order_a(fam, gamma, x, s_prime, sign)

    derivative = (-expanded(s + 2 * h) + 8 * expanded(s + h) - 8 * expanded(s - h) + expanded(s - 2 * h)) / (12.0 * h)
    generator = dephasing_lindbladian(fam, s, gamma)
    return trace_norm(apply(generator, expanded(s)) - eps * derivative)


def expansion_table(fam: LZFamily, gamma: GammaProfile, s_grid: Sequence[float],
                    s_prime: Optional[float] = None, top: Optional[float] = None) -> List[ExpansionRow]:
    """Norms of ``a^+``, ``a_hat^+`` and ``b^+`` along ``s_grid`` for plotting."""
    grid = np.asarray(s_grid, dtype=float)
    lo = float(grid.min()) if s_prime is None else s_prime
    hi = float(grid.max()) if top is None else top
    rows = []
    for s in grid:
        e = fam.gap_energy(s)
        b_norm = trace_norm(second_order_b(fam, gamma, s, lo, 1))
        rows.append(ExpansionRow(
            s=float(s),
            e=e,
            a_norm=trace_norm(first_order_a(fam, gamma, s, lo, 1)),
            a_hat_norm=trace_norm(first_order_a_hat(fam, gamma, s, hi, 1)),
            b_norm=b_norm,
            b_scaled=b_norm * e ** 3,
        ))
    return rows
