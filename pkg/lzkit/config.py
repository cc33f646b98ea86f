import math
import os
from typing import Callable, Dict, List, Mapping, Optional, Tuple, Union

from .errors import ConfigError
from .gamma_profile import GAMMA_GRAMMAR, GammaProfile, parse_gamma_spec
from .propagate import QUALITY_PRESETS, IntegratorConfig
from .transition import HORIZON_FACTOR

ALIASES: Dict[str, str] = {
    "g_values": "g",
    "epsilon_values": "epsilon",
    "gamma_specs": "gamma",
}
KEYS = ("g", "epsilon", "gamma", "T", "rtol", "atol", "qtol", "quality", "output", "format", "workers")
FORMATS = ("csv", "json")

Cell = Tuple[Tuple[int, int, int], float, float, str]


class SweepConfig:
    """スイープ設定 - グリッド、許容誤差、出力先を管理

    Setters return ``self`` so a configuration can be built in one chain::

        cfg = SweepConfig().set_grid(epsilon_values=[0.4, 0.2]).set_output("out.csv")
    """

    def __init__(self) -> None:
        self.g_values: List[float] = [1.0]
        self.epsilon_values: List[float] = [0.2]
        self.gamma_specs: List[str] = ["const:0.5"]
        self.T: Union[float, str] = "auto"
        self.rtol: float = 1e-10
        self.atol: float = 1e-12
        self.qtol: float = 1e-12
        self.quality: Optional[str] = None
        self.output: Optional[str] = None
        self.format: str = "csv"
        self.workers: Union[int, str] = 1

    def set_grid(self, g_values: Optional[List[float]] = None,
                 epsilon_values: Optional[List[float]] = None,
                 gamma_specs: Optional[List[str]] = None) -> "SweepConfig":
        """グリッドを設定（Noneの軸は変更しない）"""
        if g_values is not None:
            self.g_values = [float(v) for v in g_values]
        if epsilon_values is not None:
            self.epsilon_values = [float(v) for v in epsilon_values]
        if gamma_specs is not None:
            self.gamma_specs = [spec.strip() for spec in gamma_specs]
        return self

    def set_tolerances(self, rtol: Optional[float] = None, atol: Optional[float] = None,
                       qtol: Optional[float] = None) -> "SweepConfig":
        if rtol is not None:
            self.rtol = float(rtol)
        if atol is not None:
            self.atol = float(atol)
        if qtol is not None:
            self.qtol = float(qtol)
        return self

    def set_quality(self, quality: str) -> "SweepConfig":
        """Apply an integrator preset ("low", "medium", "high") to rtol and atol."""
        preset = IntegratorConfig.from_quality(quality)
        self.quality = quality if quality in QUALITY_PRESETS else "high"
        self.rtol, self.atol = preset.rtol, preset.atol
        return self

    def set_horizon(self, T: Union[float, str]) -> "SweepConfig":
        self.T = T if T == "auto" else float(T)
        return self

    def set_output(self, path: Optional[str], fmt: Optional[str] = None) -> "SweepConfig":
        """出力ファイルと形式を設定（形式は拡張子からも推定）"""
        self.output = path
        if fmt is not None:
            self.format = fmt
        elif path and path.endswith(".json"):
            self.format = "json"
        return self

    def set_workers(self, workers: Union[int, str]) -> "SweepConfig":
        self.workers = workers if workers == "auto" else int(workers)
        return self

    def validate(self) -> "SweepConfig":
        """Check every field.

        Raises:
            ConfigError: Naming the first offending key
        """
        for key, values in (("g", self.g_values), ("epsilon", self.epsilon_values)):
            if not values:
                raise ConfigError(key, "list must not be empty")
            for value in values:
                if not (math.isfinite(value) and value > 0):
                    raise ConfigError(key, f"values must be finite and > 0, got {value!r}")
        if not self.gamma_specs:
            raise ConfigError("gamma", "list must not be empty", GAMMA_GRAMMAR)
        for spec in self.gamma_specs:
            parse_gamma_spec(spec)
        if self.T != "auto" and not (isinstance(self.T, float) and math.isfinite(self.T) and self.T > 0):
            raise ConfigError("T", f"must be 'auto' or a number > 0, got {self.T!r}", "auto | <float>")
        for key in ("rtol", "atol", "qtol"):
            value = getattr(self, key)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(key, f"must be > 0, got {value!r}")
        if self.format not in FORMATS:
            raise ConfigError("format", f"unknown format {self.format!r}", " | ".join(FORMATS))
        if self.workers != "auto" and not (isinstance(self.workers, int) and self.workers >= 1):
            raise ConfigError("workers", f"must be 'auto' or an integer >= 1, got {self.workers!r}", "auto | <int>")
        return self

    def horizon(self) -> float:
        """Horizon ``T``; "auto" means ``25 / min(g)``."""
        if self.T == "auto":
            return HORIZON_FACTOR / min(self.g_values)
        return float(self.T)

    def worker_count(self) -> int:
        if self.workers == "auto":
            return os.cpu_count() or 1
        return int(self.workers)

    def integrator_config(self) -> IntegratorConfig:
        return IntegratorConfig(rtol=self.rtol, atol=self.atol)

    def gammas(self) -> List[GammaProfile]:
        return [parse_gamma_spec(spec) for spec in self.gamma_specs]

    def cells(self) -> List[Cell]:
        """Grid cells in lexicographic index order ``(i_g, i_eps, i_gamma)``."""
        return [((i, j, k), g, eps, spec)
                for i, g in enumerate(self.g_values)
                for j, eps in enumerate(self.epsilon_values)
                for k, spec in enumerate(self.gamma_specs)]


def _float_list(key: str) -> Callable[[str], List[float]]:
    def parse(text: str) -> List[float]:
        try:
            return [float(item) for item in text.split(",") if item.strip()]
        except ValueError:
            raise ConfigError(key, f"expected comma-separated numbers, got {text!r}", "<float>[, <float> ...]") from None
    return parse


def _positive_float(key: str) -> Callable[[str], float]:
    def parse(text: str) -> float:
        try:
            return float(text)
        except ValueError:
            raise ConfigError(key, f"expected a number, got {text!r}", "<float> > 0") from None
    return parse


def _apply(cfg: SweepConfig, key: str, text: str) -> None:
    if key == "g":
        cfg.set_grid(g_values=_float_list(key)(text))
    elif key == "epsilon":
        cfg.set_grid(epsilon_values=_float_list(key)(text))
    elif key == "gamma":
        specs = [item.strip() for item in text.split(",") if item.strip()]
        for spec in specs:
            parse_gamma_spec(spec)
        cfg.set_grid(gamma_specs=specs)
    elif key == "T":
        cfg.set_horizon("auto" if text == "auto" else _positive_float(key)(text))
    elif key in ("rtol", "atol", "qtol"):
        cfg.set_tolerances(**{key: _positive_float(key)(text)})
    elif key == "quality":
        cfg.set_quality(text)
    elif key == "output":
        cfg.set_output(text)
    elif key == "format":
        cfg.format = text
    elif key == "workers":
        if text == "auto":
            cfg.set_workers("auto")
        else:
            try:
                cfg.set_workers(int(text))
            except ValueError:
                raise ConfigError(key, f"expected an integer, got {text!r}", "auto | <int>") from None


def _read_lines(text: str) -> Dict[str, str]:
    values: Dict[str, str] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {number}", f"expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[_canonical(key)] = value
    return values


def _canonical(key: str) -> str:
    key = ALIASES.get(key, key)
    if key not in KEYS:
        raise ConfigError(key, "unknown key", ", ".join(KEYS))
    return key


def parse_config(text: str = "", overrides: Optional[Mapping[str, object]] = None) -> SweepConfig:
    """Build a validated :class:`SweepConfig` from ``key = value`` text.

    Command-line ``overrides`` win over the file. A quality preset is applied
    before explicit tolerances so that ``rtol``/``atol`` can refine it.

    Raises:
        ConfigError: Naming the offending key and the accepted grammar
    """
    values = _read_lines(text)
    for key, value in (overrides or {}).items():
        if value is not None:
            values[_canonical(key)] = str(value).strip()
    cfg = SweepConfig()
    # 明示された format は拡張子からの推定より優先
    order = sorted(values, key=lambda k: (k != "quality", k == "format", KEYS.index(k)))
    for key in order:
        _apply(cfg, key, values[key])
    return cfg.validate()
