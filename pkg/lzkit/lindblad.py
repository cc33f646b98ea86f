"""Lindblad generators as 4x4 superoperators.

All builders use the row-major vectorization of :mod:`lzkit.algebra`.
"""
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Tuple

import numpy as np

from .algebra import (
    DEFAULT_TOL,
    IDENTITY2,
    apply,
    commutator_superop,
    dagger,
    identity_superop,
    is_hermitian,
    left_multiplication,
    right_multiplication,
    sandwich_superop,
    trace_norm,
)
from .errors import ModelError
from .gamma_profile import GammaProfile
from .model import LZFamily

logger = logging.getLogger(__name__)

# Hermiticity check for GeneralLindblad.H
HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class GeneralLindblad:
    """A Lindbladian given by its Hamiltonian and jump operators.

    Attributes:
        H: Hermitian 2x2 Hamiltonian
        jumps: Jump operators ``Gamma_alpha``
    """

    H: np.ndarray
    jumps: Tuple[np.ndarray, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        H = np.array(self.H, dtype=complex)
        if H.shape != (2, 2):
            raise ModelError(f"Hamiltonian must be 2x2, got shape {H.shape}")
        scale = max(1.0, float(np.max(np.abs(H))))
        if not is_hermitian(H, HERMITIAN_TOL * scale):
            raise ModelError("Hamiltonian is not Hermitian")
        jumps = tuple(np.array(j, dtype=complex) for j in self.jumps)
        for j in jumps:
            if j.shape != (2, 2):
                raise ModelError(f"jump operators must be 2x2, got shape {j.shape}")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "jumps", jumps)


@dataclass(frozen=True)
class MinimalDephasingForm:
    """Canonical parameters of a minimally degenerate two-level dephasing Lindbladian.

    The nonzero eigenvalue on the coherence ``|+><-|`` is ``lam = -2i kappa - 2 gamma |kappa|``.
    """

    kappa: float
    gamma: float
    lam: complex

    def lindbladian(self, p_plus: np.ndarray, p_minus: np.ndarray) -> np.ndarray:
        """Superoperator of this form in the eigenbasis ``(p_plus, p_minus)``."""
        return canonical_lindbladian(self.kappa, self.gamma, p_plus, p_minus)


@dataclass(frozen=True)
class GaugeParams:
    """Affine gauge ``Gamma_alpha -> Gamma_alpha + c_alpha``, ``H -> H + e`` plus compensation."""

    c: Tuple[complex, ...]
    e: float = 0.0


def general_lindbladian(L: GeneralLindblad) -> np.ndarray:
    """Superoperator ``-i[H, .] + sum_a G rho G* - 1/2 {G* G, rho}``."""
    S = -1j * commutator_superop(L.H)
    for jump in L.jumps:
        jj = dagger(jump) @ jump
        S = S + sandwich_superop(jump, dagger(jump))
        S = S - 0.5 * (left_multiplication(jj) + right_multiplication(jj))
    return S


def hamiltonian_part(fam: LZFamily, s: float) -> np.ndarray:
    """Coherent generator ``-i[H_s, .]``."""
    return -1j * commutator_superop(fam.hamiltonian(s))


def dephasing_part(fam: LZFamily, s: float) -> np.ndarray:
    """Dephasing superoperator ``D rho = -[sqrt H, [sqrt H, rho]]``.

    Self-dual, annihilates ``P+-`` and has eigenvalue ``-4 e_s`` on ``E`` and ``E*``.
    """
    ad = commutator_superop(fam.hamiltonian(s))
    return -(ad @ ad) / fam.gap_energy(s)


def dephasing_lindbladian(fam: LZFamily, s: float, gamma: GammaProfile) -> np.ndarray:
    """Generator ``L_s = -i[H_s, .] + (gamma_s / 2) D_s``."""
    ad = commutator_superop(fam.hamiltonian(s))
    g_s = gamma.value(s)
    return -1j * ad - (0.5 * g_s / fam.gap_energy(s)) * (ad @ ad)


def dual_dephasing_lindbladian(fam: LZFamily, s: float, gamma: GammaProfile) -> np.ndarray:
    """Dual generator ``L_s*`` for the pairing ``tr(A rho)``: ``+i[H_s, .] + (gamma_s / 2) D_s``."""
    ad = commutator_superop(fam.hamiltonian(s))
    g_s = gamma.value(s)
    return 1j * ad - (0.5 * g_s / fam.gap_energy(s)) * (ad @ ad)


def coherence_eigenvalue(fam: LZFamily, s: float, gamma: GammaProfile) -> complex:
    """Eigenvalue ``2(-i - gamma_s) e_s`` of ``L_s`` on ``E_s``."""
    return 2.0 * (-1j - gamma.value(s)) * fam.gap_energy(s)


def minimal_form(e_plus: float, e_minus: float,
                 fvals: Iterable[Tuple[complex, complex]]) -> MinimalDephasingForm:
    """Reduce a diagonal dephasing Lindbladian to its canonical ``(kappa, gamma, lam)``.

    The input is the Lindbladian with ``H = diag(e_plus, e_minus)`` and jumps
    ``Gamma_alpha = diag(f_alpha^+, f_alpha^-)``.

    Args:
        e_plus: Upper eigenvalue
        e_minus: Lower eigenvalue
        fvals: Pairs ``(f_alpha^+, f_alpha^-)``

    Returns:
        The canonical form

    Raises:
        ModelError: If the Hamiltonian is degenerate or the result is not minimally degenerate
    """
    if e_plus == e_minus:
        raise ModelError("degenerate Hamiltonian: e+ == e-")
    pairs = [(complex(fp), complex(fm)) for fp, fm in fvals]
    split = e_plus - e_minus
    lam = -1j * split
    cross_im = 0.0
    spread = 0.0
    for fp, fm in pairs:
        lam += fp * fm.conjugate() - 0.5 * (abs(fp) ** 2 + abs(fm) ** 2)
        cross_im += (fp * fm.conjugate()).imag
        spread += abs(fp - fm) ** 2
    kappa = 0.5 * (split - cross_im)
    if abs(lam.imag) <= 1e-14 * max(1.0, abs(split)):
        raise ModelError("Im(lambda) == 0: Lindbladian is not minimally degenerate")
    gamma = spread / (4.0 * abs(kappa))
    return MinimalDephasingForm(kappa=kappa, gamma=gamma, lam=lam)


def canonical_lindbladian(kappa: float, gamma: float,
                          p_plus: np.ndarray, p_minus: np.ndarray) -> np.ndarray:
    """``L_0 + (gamma / 2) D`` for ``H = kappa (P+ - P-)``.

    Here ``sqrt H = sgn(kappa) sqrt|kappa| (P+ - P-)`` so ``D = -|kappa| ad_{P+ - P-}^2``.
    """
    if gamma < 0:
        raise ModelError(f"gamma must be >= 0, got {gamma!r}")
    ad = commutator_superop(p_plus - p_minus)
    return -1j * kappa * ad - 0.5 * gamma * abs(kappa) * (ad @ ad)


def gauge_transform(L: GeneralLindblad, gp: GaugeParams) -> GeneralLindblad:
    """Apply an affine gauge transformation that leaves :func:`general_lindbladian` unchanged.

    ``Gamma_a -> Gamma_a + c_a`` and ``H -> H + e - (i/2) sum_a (conj(c_a) Gamma_a - c_a Gamma_a*)``.
    """
    if len(gp.c) != len(L.jumps):
        raise ModelError(f"gauge has {len(gp.c)} shifts for {len(L.jumps)} jump operators")
    H = L.H + gp.e * IDENTITY2
    jumps = []
    for c, jump in zip(gp.c, L.jumps):
        c = complex(c)
        H = H - 0.5j * (c.conjugate() * jump - c * dagger(jump))
        jumps.append(jump + c * IDENTITY2)
    # 数値誤差でわずかに非エルミートになるのを防ぐ
    H = 0.5 * (H + dagger(H))
    return GeneralLindblad(H=H, jumps=tuple(jumps))


def mix_jumps(L: GeneralLindblad, U: Sequence[Sequence[complex]], tol: float = DEFAULT_TOL) -> GeneralLindblad:
    """Unitary mixing ``Gamma_a -> sum_b U_ab Gamma_b``; the generator is unchanged."""
    U = np.array(U, dtype=complex)
    k = len(L.jumps)
    if U.shape != (k, k):
        raise ModelError(f"mixing matrix must be {k}x{k}, got shape {U.shape}")
    if k and np.max(np.abs(U @ dagger(U) - np.eye(k))) > tol:
        raise ModelError("mixing matrix is not unitary")
    stacked = np.array(L.jumps, dtype=complex).reshape(k, 4)
    mixed = (U @ stacked).reshape(k, 2, 2)
    return GeneralLindblad(H=L.H, jumps=tuple(mixed))


def kernel_projection(fam: LZFamily, s: float) -> np.ndarray:
    """Projection ``P rho = P+ rho P+ + P- rho P-`` onto the kernel of ``L_s``."""
    p_plus, p_minus = fam.projectors(s)
    return sandwich_superop(p_plus, p_plus) + sandwich_superop(p_minus, p_minus)


def range_projection(fam: LZFamily, s: float) -> np.ndarray:
    """Complementary projection ``Q = 1 - P`` onto the off-diagonal sector."""
    return identity_superop() - kernel_projection(fam, s)


def kernel_projection_rate(fam: LZFamily, s: float) -> np.ndarray:
    """Derivative of :func:`kernel_projection` with respect to ``s``."""
    p_plus, p_minus = fam.projectors(s)
    d_plus, d_minus = fam.projector_rate(s)
    return (sandwich_superop(d_plus, p_plus) + sandwich_superop(p_plus, d_plus)
            + sandwich_superop(d_minus, p_minus) + sandwich_superop(p_minus, d_minus))


def inverse_on_range(fam: LZFamily, s: float, gamma: GammaProfile, X: np.ndarray,
                     tol: float = DEFAULT_TOL) -> np.ndarray:
    """Solve ``L_s Y = X`` for ``Y`` in the off-diagonal sector.

    ``X`` is decomposed as ``x E + y E*`` and each coefficient is divided by the
    corresponding eigenvalue ``2(-/+ i - gamma_s) e_s``.

    Raises:
        ModelError: If ``X`` has a diagonal part (trace norm of ``P X`` above ``tol``)
    """
    p_plus, p_minus = fam.projectors(s)
    diagonal = p_plus @ X @ p_plus + p_minus @ X @ p_minus
    defect = trace_norm(diagonal)
    if defect > tol:
        raise ModelError(f"operator is not in the range of L_s: diagonal part has trace norm {defect:.3e}")
    E = fam.coherence_op(s)
    Ed = dagger(E)
    x = np.trace(Ed @ X)
    y = np.trace(E @ X)
    lam = coherence_eigenvalue(fam, s, gamma)
    return (x / lam) * E + (y / lam.conjugate()) * Ed


def induced_trace_norm_sample(S: np.ndarray, samples: int = 200, seed: int = 0) -> float:
    """Largest ``||S rho||_1 / ||rho||_1`` over random matrices, a lower estimate of the induced norm."""
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(samples):
        rho = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        norm = trace_norm(rho)
        if norm == 0.0:
            continue
        best = max(best, trace_norm(apply(S, rho)) / norm)
    logger.debug("induced trace norm estimate %.6g from %d samples", best, samples)
    return best


def dephasing_norm_ratio(fam: LZFamily, s: float, samples: int = 200, seed: int = 0) -> float:
    """Sampled ``||D_s||_1 / (4 e_s)``; never exceeds one."""
    return induced_trace_norm_sample(dephasing_part(fam, s), samples, seed) / (4.0 * fam.gap_energy(s))


def is_dephasing_stationary(fam: LZFamily, s: float, gamma: GammaProfile, tol: float = DEFAULT_TOL) -> bool:
    """Both spectral projections of ``H_s`` lie in the kernel of ``L_s``."""
    L = dephasing_lindbladian(fam, s, gamma)
    return all(trace_norm(apply(L, P)) <= tol for P in fam.projectors(s))

