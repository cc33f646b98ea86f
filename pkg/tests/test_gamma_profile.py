import numpy as np
import pytest

from lzkit.errors import ConfigError, ModelError
from lzkit.gamma_profile import (
    ConstantGamma,
    GammaPresets,
    GaussianBumpGamma,
    LogisticGamma,
    parse_gamma_spec,
)

PROFILES = [
    ConstantGamma(0.5),
    GaussianBumpGamma(1.0, 4.0),
    GaussianBumpGamma(0.3, 1.5, -2.0),
    LogisticGamma(0.5, 2.0),
    LogisticGamma(2.0, 0.5, 1.0),
]


def test_parse_constant():
    gamma = parse_gamma_spec("const:0.5")
    assert isinstance(gamma, ConstantGamma)
    assert gamma.amplitude == 0.5
    assert gamma.value(-100.0) == gamma.value(3.0) == 0.5


def test_parse_bump_and_logistic():
    bump = parse_gamma_spec("gauss:1.0:4.0")
    assert isinstance(bump, GaussianBumpGamma)
    assert bump.value(0.0) == 1.0
    assert bump.value(4.0) == pytest.approx(np.exp(-0.5))
    switch = parse_gamma_spec(" logistic:0.5:2.0:1.0 ")
    assert isinstance(switch, LogisticGamma)
    assert switch.value(1.0) == pytest.approx(0.25)


def test_negative_amplitude_rejected():
    with pytest.raises(ConfigError, match="gamma amplitude must be ≥ 0") as info:
        parse_gamma_spec("const:-1")
    assert info.value.key == "gamma"


@pytest.mark.parametrize("text", ["linear:1", "const", "const:1:2", "gauss:1", "gauss:a:2", "logistic:1:0", ""])
def test_invalid_descriptors(text):
    with pytest.raises(ConfigError) as info:
        parse_gamma_spec(text)
    assert "accepted:" in str(info.value)


def test_constructors_validate():
    with pytest.raises(ModelError):
        ConstantGamma(-0.1)
    with pytest.raises(ModelError):
        GaussianBumpGamma(1.0, 0.0)
    with pytest.raises(ModelError):
        LogisticGamma(float("nan"), 1.0)


@pytest.mark.parametrize("gamma", PROFILES, ids=repr)
def test_describe_round_trip(gamma):
    again = parse_gamma_spec(gamma.describe())
    assert again == gamma
    assert hash(again) == hash(gamma)


@pytest.mark.parametrize("gamma", PROFILES, ids=repr)
def test_derivatives_match_finite_differences(gamma):
    h = 1e-4
    for s in np.linspace(-6.0, 6.0, 13):
        rate = (gamma.value(s + h) - gamma.value(s - h)) / (2 * h)
        curvature = (gamma.value(s + h) - 2 * gamma.value(s) + gamma.value(s - h)) / h ** 2
        assert gamma.rate(s) == pytest.approx(rate, abs=1e-7)
        assert gamma.curvature(s) == pytest.approx(curvature, abs=1e-5)


@pytest.mark.parametrize("gamma", PROFILES, ids=repr)
def test_weight_sup_bounds_profile(gamma):
    grid = np.linspace(-30.0, 30.0, 601)
    values = np.array([gamma(s) for s in grid])
    assert np.all(values >= 0)
    assert np.all(values <= gamma.sup + 1e-15)
    assert np.all(values / (1 + values ** 2) <= gamma.weight_sup() + 1e-15)


def test_presets():
    assert GammaPresets.none().is_zero
    assert GammaPresets.constant().describe() == "const:0.5"
    assert GammaPresets.bump().describe() == "gauss:1.0:4.0"
    assert GammaPresets.switch_on().describe() == "logistic:0.5:2.0"
    assert not GammaPresets.bump().is_zero
