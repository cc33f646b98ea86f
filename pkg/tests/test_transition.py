import math

import numpy as np
import pytest

import lzkit.transition as transition
from lzkit.errors import FitError, ModelError, PositivityError, QuadratureError
from lzkit.gamma_profile import ConstantGamma, GaussianBumpGamma
from lzkit.model import LZFamily
from lzkit.propagate import IntegratorConfig, PropagationResult, evolve_state
from lzkit.transition import (
    CSV_FIELDS,
    MAX_REFINEMENTS,
    TransitionRecord,
    _clamp_probability,
    coherent_lz,
    default_horizon,
    duhamel_grid,
    duhamel_split,
    fit_order,
    incoherent_integral,
    measured_p,
    offdiagonal_weight,
    order_fit,
    predicted_p,
    t11_contribution,
    tail_bound,
)

FAM = LZFamily(1.0)


def _record(eps, residual, gamma_spec="const:0.5", steps=1000, g=1.0, T=25.0):
    return TransitionRecord(
        g=g, epsilon=eps, gamma_spec=gamma_spec, T=T,
        p_measured=0.1 + residual, p_coherent=0.05, incoherent_integral=0.25,
        p_predicted=0.1, residual=residual, tail_bound=1e-7, cptp_trace_defect=1e-13,
        steps_accepted=steps, wall_time_s=0.5,
    )


def test_coherent_lz_values():
    assert coherent_lz(1.0, 0.5) == pytest.approx(math.exp(-math.pi))
    assert coherent_lz(1.0, 50.0) == pytest.approx(math.exp(-math.pi / 100))
    with pytest.raises(ModelError):
        coherent_lz(1.0, 0.0)
    with pytest.raises(ModelError):
        coherent_lz(-1.0, 0.2)


def test_default_horizon():
    assert default_horizon(1.0) == 25.0
    assert default_horizon(2.0) == 12.5


@pytest.mark.parametrize("g", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("amplitude", [0.25, 0.5, 1.0, 2.0])
def test_incoherent_integral_closed_form(g, amplitude):
    value = incoherent_integral(LZFamily(g), ConstantGamma(amplitude))
    assert value == pytest.approx(2 * amplitude / (3 * g * g * (1 + amplitude ** 2)), abs=1e-10)


def test_incoherent_integral_edge_cases():
    assert incoherent_integral(FAM, ConstantGamma(0.0)) == 0.0
    with pytest.raises(ModelError):
        incoherent_integral(FAM, ConstantGamma(0.5), T=0.0)
    with pytest.raises(ModelError):
        incoherent_integral(FAM, ConstantGamma(0.5), qtol=0.0)


def test_tail_bound():
    assert tail_bound(FAM, ConstantGamma(1.0), 25.0) == pytest.approx(3.2e-7)
    assert tail_bound(FAM, ConstantGamma(0.0), 25.0) == 0.0
    for gamma in (ConstantGamma(0.5), GaussianBumpGamma(1.0, 4.0)):
        for T in (5.0, 10.0, 25.0):
            missing = incoherent_integral(FAM, gamma) - incoherent_integral(FAM, gamma, T)
            assert -1e-11 <= missing <= tail_bound(FAM, gamma, T)
    with pytest.raises(ModelError):
        tail_bound(FAM, ConstantGamma(0.5), -1.0)


def test_predicted_p_values():
    assert predicted_p(FAM, ConstantGamma(0.5), 0.2) == pytest.approx(0.0537215, rel=1e-4)
    assert predicted_p(FAM, ConstantGamma(1.0), 0.2) == pytest.approx(0.0670549, rel=1e-4)
    assert predicted_p(FAM, ConstantGamma(0.0), 0.2) == coherent_lz(1.0, 0.2)


def test_clamp_probability():
    assert _clamp_probability(0.3) == 0.3
    with pytest.warns(RuntimeWarning, match="clamped"):
        assert _clamp_probability(-1e-12) == 0.0
    with pytest.warns(RuntimeWarning, match="clamped"):
        assert _clamp_probability(1.0 + 1e-12) == 1.0


def test_record_row_and_noise_floor():
    record = _record(0.2, 1e-3)
    assert list(record.as_row()) == list(CSV_FIELDS)
    assert record.noise_floor == pytest.approx(10 * (1e-10 * 1000 + 1e-12))


def test_fit_order_on_exact_power():
    eps = [0.4, 0.3, 0.2, 0.15, 0.1]
    fit = fit_order(eps, [3.0 * e ** 2 for e in eps])
    assert fit.slope == pytest.approx(2.0, abs=1e-12)
    assert fit.constant == pytest.approx(3.0, rel=1e-12)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.excluded == []


def test_fit_order_uses_absolute_residuals():
    eps = [0.4, 0.2, 0.1]
    fit = fit_order(eps, [-0.5 * e ** 2 for e in eps])
    assert fit.slope == pytest.approx(2.0)


def test_fit_order_excludes_points_below_floor():
    eps = [0.4, 0.3, 0.2, 0.1]
    residuals = [e ** 2 for e in eps[:3]] + [1e-9]
    fit = fit_order(eps, residuals, floors=[1e-6] * 4)
    assert fit.excluded == [0.1]
    assert fit.epsilons == [0.4, 0.3, 0.2]


def test_fit_order_errors():
    with pytest.raises(FitError):
        fit_order([0.4, 0.2], [0.1, 0.01])
    with pytest.raises(FitError):
        fit_order([0.4, 0.4, 0.2], [0.1, 0.1, 0.01])
    with pytest.raises(FitError):
        fit_order([0.4, 0.2, 0.1], [0.1, 0.01])
    # 全点がノイズ以下なら当てはめを拒否する
    with pytest.raises(FitError):
        fit_order([0.4, 0.2, 0.1], [1e-12, 0.0, 1e-13], floors=[1e-9] * 3)


def test_order_fit_from_records():
    records = [_record(e, 2.0 * e ** 2) for e in (0.1, 0.4, 0.2)]
    fit = order_fit(records)
    assert fit.epsilons == [0.4, 0.2, 0.1]
    assert fit.slope == pytest.approx(2.0)
    with pytest.raises(FitError):
        order_fit(records + [_record(0.3, 0.2, gamma_spec="const:1")])


def test_duhamel_grid_shape():
    grid = duhamel_grid(FAM, 0.3, 5.0)
    assert grid.size % 2 == 1
    assert grid[0] == -5.0 and grid[-1] == 5.0
    assert np.all(np.diff(grid) > 0)
    halves = np.diff(grid)
    assert np.allclose(halves[0::2], halves[1::2])


def test_duhamel_split_without_dephasing_is_coherent():
    record = measured_p(FAM, ConstantGamma(0.0), 1.0, 6.0)
    split = duhamel_split(FAM, ConstantGamma(0.0), 1.0, 6.0)
    assert split.incoherent_part == 0.0
    assert split.coherent_part == pytest.approx(record.p_measured, abs=1e-8)


def test_measured_p_record_is_consistent():
    gamma = ConstantGamma(0.5)
    record = measured_p(FAM, gamma, 1.0, 6.0)
    assert 0.0 <= record.p_measured <= 1.0
    assert record.p_predicted == record.p_coherent + record.epsilon * record.incoherent_integral
    assert record.residual == record.p_measured - record.p_predicted
    assert record.gamma_spec == gamma.describe()
    assert record.cptp_trace_defect <= 1e-9
    assert record.choi_min_eig >= -1e-8
    assert record.steps_accepted > 0
    assert 0.0 <= record.p_averaged <= 1.0
    with pytest.raises(ModelError):
        measured_p(FAM, gamma, 1.0, -1.0)


def test_sudden_limit():
    # ε=50 では exp(-π/100) ≈ 0.969 で、まだ 1 から 3e-2 離れている
    record = measured_p(FAM, ConstantGamma(0.0), 50.0, 25.0)
    assert record.p_measured == pytest.approx(coherent_lz(1.0, 50.0), abs=5e-3)
    assert record.p_measured > 0.95


def _transpose_superop():
    # 行優先ベクトル化で (01) と (10) を入れ替える: トレース保存だが完全正値でない
    return np.eye(4, dtype=complex)[[0, 2, 1, 3]]


def _fake_superop(U):
    def fake_evolve_superop(fam, gamma, eps, s0, s1, cfg, checkpoints=()):
        grid = np.asarray(checkpoints, dtype=float)
        return PropagationResult(value=U, steps_accepted=1, steps_rejected=0, max_local_error=0.0,
                                 checkpoints=grid, samples=np.array([U] * grid.size))
    return fake_evolve_superop


def test_probability_beyond_roundoff_fails():
    with pytest.raises(PositivityError):
        _clamp_probability(-1e-6)
    with pytest.raises(PositivityError) as info:
        _clamp_probability(1.0 + 1e-6)
    assert info.value.quantity == "transition probability"


def test_measured_p_rejects_non_cp_propagator(monkeypatch):
    monkeypatch.setattr(transition, "evolve_superop", _fake_superop(_transpose_superop()))
    with pytest.raises(PositivityError) as info:
        measured_p(FAM, ConstantGamma(0.5), 1.0, 6.0)
    assert info.value.quantity == "choi_min_eig"
    assert info.value.value == pytest.approx(-1.0)


def test_measured_p_rejects_probability_above_one(monkeypatch):
    T = 6.0
    p_plus, p_minus = FAM.projectors(T)
    target = 1.1 * p_plus - 0.1 * p_minus
    # ρ ↦ tr(ρ) target
    U = np.outer(target.reshape(4), np.eye(2).reshape(4))
    monkeypatch.setattr(transition, "evolve_superop", _fake_superop(U))
    with pytest.raises(PositivityError) as info:
        measured_p(FAM, ConstantGamma(0.5), 1.0, T)
    assert info.value.value == pytest.approx(1.1)


def test_duhamel_split_quadrature_tolerance(monkeypatch):
    sizes = []

    def recording_grid(*args, **kwargs):
        grid = duhamel_grid(*args, **kwargs)
        sizes.append(grid.size)
        return grid

    monkeypatch.setattr(transition, "duhamel_grid", recording_grid)
    with pytest.raises(QuadratureError) as info:
        duhamel_split(FAM, ConstantGamma(0.5), 1.0, 4.0, qtol=1e-30)
    assert info.value.tolerance == 1e-30
    assert len(sizes) == MAX_REFINEMENTS + 1
    assert all(later > earlier for earlier, later in zip(sizes, sizes[1:]))
    with pytest.raises(ModelError):
        duhamel_split(FAM, ConstantGamma(0.5), 1.0, 4.0, qtol=0.0)


def test_duhamel_split_short_cell():
    gamma = ConstantGamma(0.5)
    split = duhamel_split(FAM, gamma, 1.0, 6.0)
    record = measured_p(FAM, gamma, 1.0, 6.0)
    assert split.total == pytest.approx(record.p_measured, abs=1e-6)


def test_t11_matches_incoherent_integral():
    eps, T = 0.2, 10.0
    for gamma in (ConstantGamma(0.5), GaussianBumpGamma(1.0, 4.0)):
        expected = eps * incoherent_integral(FAM, gamma, T)
        assert t11_contribution(FAM, gamma, eps, T) == pytest.approx(expected, abs=1e-9)
    assert t11_contribution(FAM, ConstantGamma(0.0), eps, T) == 0.0


def test_offdiagonal_weight():
    p_plus, p_minus = FAM.projectors(0.7)
    assert offdiagonal_weight(FAM, 0.7, 0.4 * p_plus + 0.6 * p_minus) < 1e-14
    E = FAM.coherence_op(0.7)
    assert offdiagonal_weight(FAM, 0.7, 0.1 * (E + E.conj().T)) == pytest.approx(0.2)


@pytest.mark.slow
def test_coherent_landau_zener():
    record = measured_p(FAM, ConstantGamma(0.0), 0.5, 30.0, IntegratorConfig(rtol=1e-10))
    assert record.p_measured == pytest.approx(math.exp(-math.pi), abs=1e-3)


@pytest.mark.slow
def test_duhamel_identity():
    gamma = ConstantGamma(0.5)
    split = duhamel_split(FAM, gamma, 0.3, 20.0)
    record = measured_p(FAM, gamma, 0.3, 20.0)
    assert split.total == pytest.approx(record.p_measured, abs=1e-6)
    assert split.incoherent_part > 0


@pytest.mark.slow
def test_scale_invariance():
    gamma = ConstantGamma(0.5)
    small = measured_p(LZFamily(1.0), gamma, 0.5, 30.0)
    large = measured_p(LZFamily(2.0), gamma, 2.0, 15.0)
    assert small.p_measured == pytest.approx(large.p_measured, abs=5e-3)


@pytest.mark.slow
def test_dephasing_suppresses_coherences():
    eps, T = 0.5, 10.0
    rho0 = FAM.projectors(-T)[1]
    weights = [offdiagonal_weight(FAM, T, evolve_state(FAM, ConstantGamma(a), eps, rho0, -T, T).value)
               for a in (0.0, 0.5, 1.0, 2.0)]
    assert all(later <= earlier + 1e-10 for earlier, later in zip(weights, weights[1:]))


ORDER_EPSILONS = (0.4, 0.3, 0.2, 0.15, 0.1)
# |R| <= C γ ε² の C の緩い上限（γ=0.5 では実測で 0.11 程度）
RESIDUAL_CONSTANT = 0.5


@pytest.mark.slow
def test_residual_is_second_order():
    gamma = ConstantGamma(0.5)
    assert incoherent_integral(FAM, gamma) == pytest.approx(2 * 0.5 / (3 * 1.25), abs=1e-10)
    records = [measured_p(FAM, gamma, eps, 25.0) for eps in ORDER_EPSILONS]
    fit = order_fit(records)
    assert fit.slope >= 1.7
    for record in records:
        assert abs(record.residual) <= RESIDUAL_CONSTANT * 0.5 * record.epsilon ** 2


@pytest.mark.slow
@pytest.mark.parametrize("amplitude", [0.25, 0.5, 1.0, 2.0])
def test_incoherent_term_scales_with_gamma(amplitude):
    eps = 0.2
    record = measured_p(FAM, ConstantGamma(amplitude), eps, 25.0)
    measured = (record.p_measured - coherent_lz(1.0, eps)) / eps
    expected = 2 * amplitude / (3 * (1 + amplitude ** 2))
    assert measured == pytest.approx(expected, rel=0.15)


@pytest.mark.slow
def test_order_fit_refuses_without_dephasing():
    records = [measured_p(FAM, ConstantGamma(0.0), eps, 25.0) for eps in ORDER_EPSILONS]
    assert all(abs(r.residual) <= r.noise_floor for r in records)
    with pytest.raises(FitError):
        order_fit(records)


@pytest.mark.slow
def test_strong_dephasing_cell_is_near_prediction():
    record = measured_p(FAM, ConstantGamma(1.0), 0.2, 25.0)
    assert record.p_predicted == pytest.approx(0.067054, abs=2e-6)
    assert abs(record.residual) <= RESIDUAL_CONSTANT * 1.0 * 0.2 ** 2
    assert record.tail_bound == pytest.approx(3.2e-7)
