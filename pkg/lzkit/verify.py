"""Built-in verification suites.

Every check measures one quantity and compares it against a tolerance; a check
passes when ``value <= tolerance``. Lower bounds are expressed by negating the
measured value (for example ``-min_eig <= 1e-8``).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Tuple

import numpy as np
from scipy.stats import linregress, unitary_group
from tqdm import tqdm

from .adiabatic import (
    adiabatic_residual,
    b_bound_check,
    b_rate_bound_check,
    definitional_terms,
    first_order_a,
    first_order_a_hat,
    parallel_transport,
    second_order_b,
)
from .algebra import (
    IDENTITY2,
    apply,
    choi_matrix,
    dagger,
    dual_superop,
    hs_inner,
    operator_norm,
    sandwich_superop,
    trace_norm,
    vectorize,
)
from .errors import ConfigError, LZKitError
from .gamma_profile import ConstantGamma, GammaProfile, GaussianBumpGamma, LogisticGamma
from .lindblad import (
    GaugeParams,
    GeneralLindblad,
    coherence_eigenvalue,
    dephasing_lindbladian,
    dephasing_norm_ratio,
    gauge_transform,
    general_lindbladian,
    inverse_on_range,
    kernel_projection,
    minimal_form,
    mix_jumps,
)
from .model import LZFamily
from .propagate import IntegratorConfig, cptp_report, evolve_dual, evolve_state, evolve_superop
from .transition import (
    duhamel_split,
    incoherent_integral,
    measured_p,
    offdiagonal_weight,
    t11_contribution,
    tail_bound,
)

logger = logging.getLogger(__name__)

MODULE_SUITES = ("algebra", "model", "lindblad", "adiabatic", "propagate", "transition")
SUITE_NAMES = MODULE_SUITES + ("all",)

FAMILY = LZFamily(1.0)
PROFILES: Tuple[GammaProfile, ...] = (ConstantGamma(0.5), GaussianBumpGamma(1.0, 4.0), LogisticGamma(0.5, 2.0))
S_GRID = (-8.0, -2.5, -0.7, 0.0, 0.3, 1.2, 4.0, 15.0)
SAMPLES = 1000
# 有界性スキャンの上限（理論上の定数は未知なので緩めに取る）
BOUND_CAP = 10.0

Check = Callable[[], Tuple[float, float]]
SUITES: Dict[str, List[Tuple[str, Check]]] = {name: [] for name in MODULE_SUITES}


@dataclass(frozen=True)
class CheckResult:
    """Measured value of one check against its tolerance."""

    suite: str
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""


@dataclass
class VerificationReport:
    results: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failures(self) -> List[CheckResult]:
        return [r for r in self.results if not r.passed]

    def format_table(self) -> str:
        lines = []
        for r in self.results:
            status = "PASS" if r.passed else "FAIL"
            line = f"{status} {r.suite}/{r.name}: value={r.value:.3e} tolerance={r.tolerance:.1e}"
            if r.detail:
                line += f" ({r.detail})"
            lines.append(line)
        lines.append(f"{len(self.results) - len(self.failures)}/{len(self.results)} checks passed")
        return "\n".join(lines)


def _check(suite: str, name: str) -> Callable[[Check], Check]:
    def register(fn: Check) -> Check:
        SUITES[suite].append((name, fn))
        return fn
    return register


def _random_operators(rng: np.random.Generator, count: int) -> np.ndarray:
    return rng.normal(size=(count, 2, 2)) + 1j * rng.normal(size=(count, 2, 2))


def _random_hermitian(rng: np.random.Generator) -> np.ndarray:
    M = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    return 0.5 * (M + dagger(M))


# --- algebra -------------------------------------------------------------

@_check("algebra", "trace_norm_matches_svd")
def _trace_norm_svd() -> Tuple[float, float]:
    rng = np.random.default_rng(1)
    worst = 0.0
    for M in _random_operators(rng, SAMPLES):
        reference = float(np.sum(np.linalg.svd(M, compute_uv=False)))
        worst = max(worst, abs(trace_norm(M) - reference) / max(1.0, reference))
    return worst, 1e-12


@_check("algebra", "trace_norm_triangle_inequality")
def _triangle() -> Tuple[float, float]:
    rng = np.random.default_rng(2)
    ops = _random_operators(rng, 2 * SAMPLES)
    excess = max(trace_norm(A + B) - trace_norm(A) - trace_norm(B) for A, B in zip(ops[::2], ops[1::2]))
    return excess, 1e-12


@_check("algebra", "trace_pairing_holder_bound")
def _holder() -> Tuple[float, float]:
    rng = np.random.default_rng(3)
    ops = _random_operators(rng, 2 * SAMPLES)
    excess = max(abs(np.trace(A @ B)) - operator_norm(A) * trace_norm(B) for A, B in zip(ops[::2], ops[1::2]))
    return excess, 1e-12


@_check("algebra", "sandwich_vectorization")
def _sandwich() -> Tuple[float, float]:
    rng = np.random.default_rng(4)
    ops = _random_operators(rng, 300)
    worst = 0.0
    for A, X, B in zip(ops[::3], ops[1::3], ops[2::3]):
        worst = max(worst, float(np.max(np.abs(sandwich_superop(A, B) @ vectorize(X) - vectorize(A @ X @ B)))))
    return worst, 1e-12


@_check("algebra", "dual_pairing")
def _dual_pairing() -> Tuple[float, float]:
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(200):
        S = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        A, rho = _random_operators(rng, 2)
        worst = max(worst, abs(np.trace(apply(dual_superop(S), A) @ rho) - np.trace(A @ apply(S, rho))))
    return worst, 1e-12


@_check("algebra", "choi_positive_for_kraus_map")
def _choi() -> Tuple[float, float]:
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(200):
        K1, K2 = _random_operators(rng, 2)
        S = sandwich_superop(K1, dagger(K1)) + sandwich_superop(K2, dagger(K2))
        choi = choi_matrix(S)
        worst = max(worst, -float(np.linalg.eigvalsh(0.5 * (choi + dagger(choi)))[0]))
    return worst, 1e-10


# --- model ---------------------------------------------------------------

@_check("model", "spectral_identity")
def _spectral() -> Tuple[float, float]:
    worst = 0.0
    for g in (0.3, 1.0, 2.5):
        fam = LZFamily(g)
        for s in S_GRID:
            p_plus, p_minus = fam.projectors(s)
            worst = max(worst, float(np.max(np.abs(fam.hamiltonian(s) - fam.gap_energy(s) * (p_plus - p_minus)))))
    return worst, 1e-12


@_check("model", "eigenbasis_orthonormal")
def _gram() -> Tuple[float, float]:
    worst = 0.0
    for s in S_GRID:
        p_plus, p_minus = FAMILY.projectors(s)
        E = FAMILY.coherence_op(s)
        basis = (p_plus, p_minus, E, dagger(E))
        gram = np.array([[hs_inner(A, B) for B in basis] for A in basis])
        worst = max(worst, float(np.max(np.abs(gram - np.eye(4)))))
    return worst, 1e-12


def _central(f: Callable[[float], np.ndarray], s: float, h: float = 1e-5) -> np.ndarray:
    return (f(s + h) - f(s - h)) / (2.0 * h)


@_check("model", "projector_rate_finite_difference")
def _projector_rate() -> Tuple[float, float]:
    worst = 0.0
    for s in S_GRID:
        numeric = _central(lambda x: FAMILY.projectors(x)[0], s)
        worst = max(worst, float(np.max(np.abs(FAMILY.projector_rate(s)[0] - numeric))))
    return worst, 1e-7


@_check("model", "edot_finite_difference")
def _edot() -> Tuple[float, float]:
    worst = 0.0
    for s in S_GRID:
        numeric = _central(FAMILY.coherence_op, s)
        worst = max(worst, float(np.max(np.abs(FAMILY.edot(s) - numeric))))
    return worst, 1e-7


@_check("model", "fubini_study_velocity")
def _fs() -> Tuple[float, float]:
    worst = 0.0
    for s in S_GRID:
        p_minus = FAMILY.projectors(s)[1]
        rate = FAMILY.projector_rate(s)[0]
        direct = float(np.real(np.trace(p_minus @ rate @ rate @ p_minus)))
        worst = max(worst, abs(direct - FAMILY.fs_velocity(s)))
    return worst, 1e-12


@_check("model", "sqrt_hamiltonian_square")
def _sqrt_h() -> Tuple[float, float]:
    worst = 0.0
    for s in S_GRID:
        root = FAMILY.sqrt_hamiltonian(s)
        e = FAMILY.gap_energy(s)
        worst = max(worst, float(np.max(np.abs(root @ root - e * IDENTITY2))) / max(1.0, e))
    return worst, 1e-12


# --- lindblad ------------------------------------------------------------

@_check("lindblad", "projections_stationary")
def _stationary() -> Tuple[float, float]:
    worst = 0.0
    for gamma in PROFILES:
        for s in S_GRID:
            L = dephasing_lindbladian(FAMILY, s, gamma)
            worst = max(worst, *(trace_norm(apply(L, P)) for P in FAMILY.projectors(s)))
    return worst, 1e-12


@_check("lindblad", "coherence_spectrum")
def _spectrum() -> Tuple[float, float]:
    worst = 0.0
    for gamma in PROFILES:
        for s in S_GRID:
            L = dephasing_lindbladian(FAMILY, s, gamma)
            lam = coherence_eigenvalue(FAMILY, s, gamma)
            E = FAMILY.coherence_op(s)
            defect = max(trace_norm(apply(L, E) - lam * E),
                         trace_norm(apply(L, dagger(E)) - np.conj(lam) * dagger(E)))
            worst = max(worst, defect / max(1.0, abs(lam)))
    return worst, 1e-12


@_check("lindblad", "dephasing_induced_norm_at_most_4e")
def _dephasing_norm() -> Tuple[float, float]:
    worst = max(dephasing_norm_ratio(FAMILY, s, samples=SAMPLES, seed=7) for s in S_GRID)
    return worst - 1.0, 1e-12


@_check("lindblad", "trace_and_hermiticity_preserved")
def _preservation() -> Tuple[float, float]:
    worst = 0.0
    for gamma in PROFILES:
        for s in S_GRID:
            L = dephasing_lindbladian(FAMILY, s, gamma)
            worst = max(worst, float(np.max(np.abs(apply(dual_superop(L), IDENTITY2)))))
            for X in (np.array([[0, 1], [0, 0]], dtype=complex), np.array([[1, 2j], [0.5, -1]])):
                worst = max(worst, float(np.max(np.abs(apply(L, dagger(X)) - dagger(apply(L, X))))))
    return worst, 1e-12


def _random_diagonal_form(rng: np.random.Generator):
    e_plus, e_minus = rng.normal(size=2)
    fvals = [tuple(rng.normal(size=2) + 1j * rng.normal(size=2)) for _ in range(2)]
    return float(e_plus), float(e_minus), fvals


@_check("lindblad", "minimal_form_two_constructions")
def _minimal_form() -> Tuple[float, float]:
    rng = np.random.default_rng(8)
    p_plus = np.diag([1.0, 0.0]).astype(complex)
    p_minus = np.diag([0.0, 1.0]).astype(complex)
    worst = 0.0
    for _ in range(200):
        e_plus, e_minus, fvals = _random_diagonal_form(rng)
        direct = general_lindbladian(GeneralLindblad(
            H=np.diag([e_plus, e_minus]), jumps=tuple(np.diag([fp, fm]) for fp, fm in fvals)))
        form = minimal_form(e_plus, e_minus, fvals)
        canonical = form.lindbladian(p_plus, p_minus)
        worst = max(worst, float(np.max(np.abs(direct - canonical))) / max(1.0, float(np.max(np.abs(direct)))))
        consistency = abs(form.lam - (-2j * form.kappa - 2.0 * form.gamma * abs(form.kappa)))
        worst = max(worst, consistency / max(1.0, abs(form.lam)), form.lam.real)
    return worst, 1e-12


def _random_lindblad(rng: np.random.Generator, jumps: int = 2) -> GeneralLindblad:
    return GeneralLindblad(H=_random_hermitian(rng), jumps=tuple(_random_operators(rng, jumps)))


@_check("lindblad", "gauge_invariance")
def _gauge() -> Tuple[float, float]:
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(200):
        L = _random_lindblad(rng)
        gp = GaugeParams(c=tuple(rng.normal(size=2) + 1j * rng.normal(size=2)), e=float(rng.normal()))
        worst = max(worst, float(np.max(np.abs(general_lindbladian(gauge_transform(L, gp)) - general_lindbladian(L)))))
    return worst, 1e-10


@_check("lindblad", "unitary_mixing_invariance")
def _mixing() -> Tuple[float, float]:
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(200):
        L = _random_lindblad(rng, 3)
        U = unitary_group.rvs(3, random_state=rng)
        worst = max(worst, float(np.max(np.abs(general_lindbladian(mix_jumps(L, U)) - general_lindbladian(L)))))
    return worst, 1e-10


@_check("lindblad", "kernel_part_of_inverse_vanishes")
def _p_inverse() -> Tuple[float, float]:
    worst = 0.0
    for gamma in PROFILES:
        for s in S_GRID:
            for rate in FAMILY.projector_rate(s):
                Y = inverse_on_range(FAMILY, s, gamma, rate)
                worst = max(worst, trace_norm(apply(kernel_projection(FAMILY, s), Y)),
                            trace_norm(apply(dephasing_lindbladian(FAMILY, s, gamma), Y) - rate))
    return worst, 1e-12


# --- adiabatic -----------------------------------------------------------

TRANSPORT_SPAN = (-6.0, 4.0)


@_check("adiabatic", "transport_intertwining")
def _intertwining() -> Tuple[float, float]:
    return parallel_transport(FAMILY, *TRANSPORT_SPAN).intertwining_defect, 1e-8


@_check("adiabatic", "transport_maps_kernel")
def _kernel_transport() -> Tuple[float, float]:
    s_prime, s = TRANSPORT_SPAN
    T = parallel_transport(FAMILY, s_prime, s).transport
    worst = 0.0
    for start, end in zip(FAMILY.projectors(s_prime), FAMILY.projectors(s)):
        worst = max(worst, trace_norm(apply(T, start) - end))
    start_plus, start_minus = FAMILY.projectors(s_prime)
    rho = 0.3 * start_plus - 0.7 * start_minus
    worst = max(worst, abs(trace_norm(apply(T, rho)) - trace_norm(rho)))
    return worst, 1e-8


@_check("adiabatic", "closed_forms_match_definitions")
def _definitional() -> Tuple[float, float]:
    worst = 0.0
    for gamma in PROFILES:
        for s, s_prime in ((0.5, -3.0), (2.0, -1.0)):
            for sign in (1, -1):
                term = definitional_terms(FAMILY, gamma, s, s_prime, sign)
                a = first_order_a(FAMILY, gamma, s, s_prime, sign)
                b = second_order_b(FAMILY, gamma, s, s_prime, sign)
                worst = max(worst, trace_norm(a - term.a), trace_norm(b - term.b))
    return worst, 1e-8


@_check("adiabatic", "first_order_norms")
def _a_norms() -> Tuple[float, float]:
    worst = 0.0
    coherent = ConstantGamma(0.0)
    for s in S_GRID:
        e = FAMILY.gap_energy(s)
        expected = FAMILY.g / (8.0 * e ** 3)
        worst = max(worst, abs(trace_norm(first_order_a(FAMILY, coherent, s, s - 5.0, -1)) - expected) / expected)
        for gamma in PROFILES:
            damped = expected / math.sqrt(1.0 + gamma.value(s) ** 2)
            worst = max(worst,
                        abs(trace_norm(first_order_a(FAMILY, gamma, s, s, -1)) - damped) / damped,
                        abs(trace_norm(first_order_a_hat(FAMILY, gamma, s, s, 1)) - damped) / damped)
    return worst, 1e-12


@_check("adiabatic", "b_trace_norm_identity")
def _b_identity() -> Tuple[float, float]:
    worst = 0.0
    for gamma in PROFILES:
        for s in S_GRID:
            E = FAMILY.coherence_op(s)
            for sign in (1, -1):
                for direction, s_prime in (("forward", s - 3.0), ("dual", s + 3.0)):
                    b = second_order_b(FAMILY, gamma, s, s_prime, sign, direction)
                    split = abs(np.trace(dagger(E) @ b)) + abs(np.trace(E @ b))
                    worst = max(worst, abs(trace_norm(b) - split) / max(split, 1e-300))
    return worst, 1e-12


B_SCAN = np.concatenate([np.linspace(-200.0, -10.0, 20), np.linspace(-10.0, 10.0, 81), np.linspace(10.0, 200.0, 20)])


@_check("adiabatic", "b_scaled_bounded")
def _b_bound() -> Tuple[float, float]:
    worst = 0.0
    for gamma in PROFILES:
        for direction in ("forward", "dual"):
            report = b_bound_check(FAMILY, gamma, B_SCAN, direction=direction)
            worst = max(worst, report.constant if report.finite else math.inf)
    return worst, BOUND_CAP


@_check("adiabatic", "b_rate_scaled_bounded")
def _b_rate_bound() -> Tuple[float, float]:
    worst = 0.0
    for gamma in PROFILES:
        for direction in ("forward", "dual"):
            report = b_rate_bound_check(FAMILY, gamma, B_SCAN, direction=direction)
            worst = max(worst, report.constant if report.finite else math.inf)
    return worst, BOUND_CAP


@_check("adiabatic", "residual_is_second_order")
def _residual_slope() -> Tuple[float, float]:
    epsilons = (0.2, 0.1, 0.05)
    gamma = PROFILES[1]
    residuals = [adiabatic_residual(FAMILY, gamma, eps, 0.5, -4.0) for eps in epsilons]
    fit = linregress(np.log(epsilons), np.log(residuals))
    return abs(fit.slope - 2.0), 0.05


# --- propagate -----------------------------------------------------------

PROPAGATION_EPS = 0.5
PROPAGATION_SPAN = (-6.0, 6.0)


@_check("propagate", "propagators_cptp")
def _cptp() -> Tuple[float, float]:
    worst = 0.0
    for gamma in (ConstantGamma(0.0),) + PROFILES:
        U = evolve_superop(FAMILY, gamma, PROPAGATION_EPS, *PROPAGATION_SPAN).value
        report = cptp_report(U)
        # 1e-9 の trace 許容と -1e-8 の正値性許容を同じ尺度に揃える
        worst = max(worst, report.trace_defect / 1e-9, -report.choi_min_eig / 1e-8)
    return worst, 1.0


@_check("propagate", "semigroup_composition")
def _semigroup() -> Tuple[float, float]:
    gamma = PROFILES[1]
    s0, s1 = PROPAGATION_SPAN
    mid = 0.7
    whole = evolve_superop(FAMILY, gamma, PROPAGATION_EPS, s0, s1).value
    first = evolve_superop(FAMILY, gamma, PROPAGATION_EPS, s0, mid).value
    second = evolve_superop(FAMILY, gamma, PROPAGATION_EPS, mid, s1).value
    return float(np.max(np.abs(whole - second @ first))), 1e-7


@_check("propagate", "trace_norm_contraction")
def _contraction() -> Tuple[float, float]:
    rng = np.random.default_rng(11)
    U = evolve_superop(FAMILY, PROFILES[0], PROPAGATION_EPS, *PROPAGATION_SPAN).value
    worst = 0.0
    for _ in range(SAMPLES):
        rho = _random_hermitian(rng)
        worst = max(worst, trace_norm(apply(U, rho)) / trace_norm(rho) - 1.0)
    return worst, 1e-8


@_check("propagate", "dual_pairing_of_propagations")
def _dual_propagation() -> Tuple[float, float]:
    gamma = PROFILES[2]
    s0, s1 = PROPAGATION_SPAN
    rho0 = FAMILY.projectors(s0)[1]
    observable = FAMILY.projectors(s1)[0]
    forward = evolve_state(FAMILY, gamma, PROPAGATION_EPS, rho0, s0, s1).value
    backward = evolve_dual(FAMILY, gamma, PROPAGATION_EPS, observable, s1, s0).value
    return abs(np.trace(observable @ forward) - np.trace(backward @ rho0)), 1e-8


@_check("propagate", "tolerance_self_consistency")
def _tolerance() -> Tuple[float, float]:
    gamma = PROFILES[0]
    s0, s1 = PROPAGATION_SPAN
    rho0 = FAMILY.projectors(s0)[1]
    coarse = evolve_state(FAMILY, gamma, PROPAGATION_EPS, rho0, s0, s1, IntegratorConfig(rtol=1e-8, atol=1e-10))
    fine = evolve_state(FAMILY, gamma, PROPAGATION_EPS, rho0, s0, s1, IntegratorConfig(rtol=5e-9, atol=5e-11))
    budget = coarse.steps_accepted * coarse.max_local_error
    change = float(np.max(np.abs(coarse.value - fine.value)))
    return change / budget, 10.0


# --- transition ----------------------------------------------------------

@_check("transition", "incoherent_integral_closed_form")
def _incoherent() -> Tuple[float, float]:
    worst = 0.0
    for amplitude in (0.25, 0.5, 1.0, 2.0):
        closed = 2.0 * amplitude / (3.0 * (1.0 + amplitude ** 2))
        worst = max(worst, abs(incoherent_integral(FAMILY, ConstantGamma(amplitude)) - closed))
    return worst, 1e-10


@_check("transition", "tail_bound_dominates_truncation")
def _tail() -> Tuple[float, float]:
    worst = 0.0
    for gamma in PROFILES:
        for T in (5.0, 10.0, 25.0):
            missing = incoherent_integral(FAMILY, gamma) - incoherent_integral(FAMILY, gamma, T)
            worst = max(worst, missing / tail_bound(FAMILY, gamma, T))
    return worst, 1.0


@_check("transition", "t11_matches_incoherent_integral")
def _t11() -> Tuple[float, float]:
    eps, T = 0.2, 10.0
    worst = 0.0
    for gamma in PROFILES[:2]:
        worst = max(worst, abs(t11_contribution(FAMILY, gamma, eps, T) - eps * incoherent_integral(FAMILY, gamma, T)))
    return worst, 1e-9


@_check("transition", "duhamel_identity_cell")
def _duhamel() -> Tuple[float, float]:
    gamma = ConstantGamma(0.5)
    eps, T = 0.3, 20.0
    split = duhamel_split(FAMILY, gamma, eps, T)
    record = measured_p(FAMILY, gamma, eps, T)
    return abs(split.total - record.p_measured), 1e-6


@_check("transition", "coherence_suppressed_monotonically")
def _suppression() -> Tuple[float, float]:
    eps, T = 0.5, 10.0
    rho0 = FAMILY.projectors(-T)[1]
    weights = []
    for amplitude in (0.0, 0.5, 1.0, 2.0):
        rho = evolve_state(FAMILY, ConstantGamma(amplitude), eps, rho0, -T, T).value
        weights.append(offdiagonal_weight(FAMILY, T, rho))
    return max(b - a for a, b in zip(weights, weights[1:])), 1e-10


def verify(suite: str = "all", progress: bool = True) -> VerificationReport:
    """Run a verification suite.

    Args:
        suite: One of :data:`SUITE_NAMES`
        progress: Show a progress bar

    Returns:
        A report with one :class:`CheckResult` per check

    Raises:
        ConfigError: For an unknown suite name
    """
    if suite not in SUITE_NAMES:
        raise ConfigError("suite", f"unknown suite {suite!r}", " | ".join(SUITE_NAMES))
    names = MODULE_SUITES if suite == "all" else (suite,)
    checks = [(name, label, fn) for name in names for label, fn in SUITES[name]]
    report = VerificationReport()
    for name, label, fn in tqdm(checks, desc="Verifying", unit="checks", disable=not progress):
        try:
            value, tolerance = fn()
        except LZKitError as exc:
            logger.error("check %s/%s raised: %s", name, label, exc)
            report.results.append(CheckResult(name, label, math.nan, math.nan, False, f"{type(exc).__name__}: {exc}"))
            continue
        passed = bool(value <= tolerance)
        if not passed:
            logger.warning("check %s/%s failed: %.3e > %.1e", name, label, value, tolerance)
        report.results.append(CheckResult(name, label, float(value), float(tolerance), passed))
    return report
