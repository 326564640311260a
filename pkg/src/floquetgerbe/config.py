"""Run configuration: JSON in, validated frozen dataclasses out.

Every block rejects unknown keys recursively, reporting the offending key
with its dotted path, so a typo in a config file fails loudly instead of
silently running defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .numerics import TWO_PI, is_power_of_two

HOLONOMY_METHODS = ("substitution", "pullback")
VERIFY_SUITES = ("gluing", "cocycles", "gauge", "convergence", "transitions")


@dataclass(frozen=True)
class ModelConfig:
    omega0: float = 1.0
    omega1: float = 1.0


@dataclass(frozen=True)
class AtlasConfig:
    """Charts as (lo, hi) ranges on the double-period parameter circle;
    None selects the built-in three-chart cover."""

    charts: tuple | None = None


@dataclass(frozen=True)
class GridConfig:
    n_lambda: int = 512
    n_theta: int = 1024


@dataclass(frozen=True)
class ScheduleConfig:
    kick_counts: tuple = (64, 128, 256, 512)
    chart_path: tuple = (1, 2, 3, 1)
    handoff_points: tuple = (0.5 * np.pi, 2.5 * np.pi, 3.5 * np.pi)
    nodes_per_kick: float = 1.0
    method: str = "substitution"


@dataclass(frozen=True)
class FrequenciesConfig:
    """Quasienergy sweep: one family per omega0/omega1 ratio."""

    ratios: tuple = (1.0, 0.5)
    lambda_min: float = 0.0
    lambda_max: float = 2.0 * TWO_PI
    n_points: int = 512


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "."


@dataclass(frozen=True)
class CorruptPhiConfig:
    """Deliberate fault injection into one stored transition record."""

    pair: tuple = (1, 3)
    magnitude: float = 0.1


@dataclass(frozen=True)
class VerifyConfig:
    suites: tuple = VERIFY_SUITES
    gluing_tol: float = 1e-5
    refine: bool = False
    n_gauges: int = 10
    seed: int = 20260818
    gauge_kicks: int = 16
    phase_floor: float = 1e-8
    corrupt_phi: CorruptPhiConfig | None = None


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    atlas: AtlasConfig = field(default_factory=AtlasConfig)
    grids: GridConfig = field(default_factory=GridConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    frequencies: FrequenciesConfig = field(default_factory=FrequenciesConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)


def _require_mapping(data, path: str) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must be an object", field=path)
    return data


def _reject_unknown(data: dict, allowed, path: str):
    for key in data:
        if key not in allowed:
            where = f"{path}.{key}" if path else str(key)
            raise ConfigError(f"unknown config key {where!r}", field=where)


def _number(data, key, path, default, positive=False):
    if key not in data:
        return default
    v = data[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key} must be a number", field=f"{path}.{key}")
    v = float(v)
    if not np.isfinite(v):
        raise ConfigError(f"{path}.{key} must be finite", field=f"{path}.{key}")
    if positive and v <= 0:
        raise ConfigError(f"{path}.{key} must be positive", field=f"{path}.{key}")
    return v


def _integer(data, key, path, default, minimum=None):
    if key not in data:
        return default
    v = data[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}.{key} must be an integer", field=f"{path}.{key}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{path}.{key} must be >= {minimum}", field=f"{path}.{key}")
    return int(v)


def _pow2_grid(data, key, path, default):
    v = _integer(data, key, path, default, minimum=64)
    if not is_power_of_two(v):
        raise ConfigError(f"{path}.{key} must be a power of two", field=f"{path}.{key}")
    return v


def _model_config(data, path="model") -> ModelConfig:
    data = _require_mapping(data, path)
    _reject_unknown(data, {"omega0", "omega1"}, path)
    return ModelConfig(
        omega0=_number(data, "omega0", path, 1.0, positive=True),
        omega1=_number(data, "omega1", path, 1.0, positive=True),
    )


def _atlas_config(data, path="atlas") -> AtlasConfig:
    data = _require_mapping(data, path)
    _reject_unknown(data, {"charts"}, path)
    charts = data.get("charts")
    if charts is None:
        return AtlasConfig(charts=None)
    if not isinstance(charts, list) or len(charts) < 2:
        raise ConfigError(f"{path}.charts must be a list of at least two [lo, hi] pairs",
                          field=f"{path}.charts")
    parsed = []
    for i, pair in enumerate(charts):
        where = f"{path}.charts[{i}]"
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in pair)
        ):
            raise ConfigError(f"{where} must be a [lo, hi] pair of numbers", field=where)
        lo, hi = float(pair[0]), float(pair[1])
        if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
            raise ConfigError(f"{where} must satisfy lo < hi with finite values", field=where)
        parsed.append((lo, hi))
    return AtlasConfig(charts=tuple(parsed))


def _grid_config(data, path="grids") -> GridConfig:
    data = _require_mapping(data, path)
    _reject_unknown(data, {"n_lambda", "n_theta"}, path)
    return GridConfig(
        n_lambda=_pow2_grid(data, "n_lambda", path, 512),
        n_theta=_pow2_grid(data, "n_theta", path, 1024),
    )


def _int_list(data, key, path, default, minimum):
    if key not in data:
        return default
    v = data[key]
    where = f"{path}.{key}"
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{where} must be a non-empty list of integers", field=where)
    out = []
    for item in v:
        if isinstance(item, bool) or not isinstance(item, int):
            raise ConfigError(f"{where} must contain only integers", field=where)
        if item < minimum:
            raise ConfigError(f"{where} entries must be >= {minimum}", field=where)
        out.append(int(item))
    return tuple(out)


def _float_list(data, key, path, default):
    if key not in data:
        return default
    v = data[key]
    where = f"{path}.{key}"
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{where} must be a non-empty list of numbers", field=where)
    out = []
    for item in v:
        if isinstance(item, bool) or not isinstance(item, (int, float)) or not np.isfinite(item):
            raise ConfigError(f"{where} must contain only finite numbers", field=where)
        out.append(float(item))
    return tuple(out)


def _schedule_config(data, path="schedule") -> ScheduleConfig:
    data = _require_mapping(data, path)
    _reject_unknown(
        data, {"kick_counts", "chart_path", "handoff_points", "nodes_per_kick", "method"}, path
    )
    default = ScheduleConfig()
    method = data.get("method", default.method)
    if method not in HOLONOMY_METHODS:
        raise ConfigError(
            f"{path}.method must be one of {HOLONOMY_METHODS}", field=f"{path}.method"
        )
    cfg = ScheduleConfig(
        kick_counts=_int_list(data, "kick_counts", path, default.kick_counts, minimum=1),
        chart_path=_int_list(data, "chart_path", path, default.chart_path, minimum=1),
        handoff_points=_float_list(data, "handoff_points", path, default.handoff_points),
        nodes_per_kick=_number(data, "nodes_per_kick", path, default.nodes_per_kick, positive=True),
        method=method,
    )
    if len(cfg.handoff_points) != len(cfg.chart_path) - 1:
        raise ConfigError(
            f"{path}.handoff_points must have exactly one entry per chart change "
            f"({len(cfg.chart_path) - 1} for this chart_path)",
            field=f"{path}.handoff_points",
        )
    return cfg


def _frequencies_config(data, path="frequencies") -> FrequenciesConfig:
    data = _require_mapping(data, path)
    _reject_unknown(data, {"ratios", "lambda_min", "lambda_max", "n_points"}, path)
    default = FrequenciesConfig()
    ratios = _float_list(data, "ratios", path, default.ratios)
    for r in ratios:
        if r <= 0:
            raise ConfigError(f"{path}.ratios must be positive", field=f"{path}.ratios")
    cfg = FrequenciesConfig(
        ratios=ratios,
        lambda_min=_number(data, "lambda_min", path, default.lambda_min),
        lambda_max=_number(data, "lambda_max", path, default.lambda_max),
        n_points=_integer(data, "n_points", path, default.n_points, minimum=2),
    )
    if cfg.lambda_max <= cfg.lambda_min:
        raise ConfigError(
            f"{path}.lambda_max must exceed {path}.lambda_min", field=f"{path}.lambda_max"
        )
    return cfg


def _output_config(data, path="output") -> OutputConfig:
    data = _require_mapping(data, path)
    _reject_unknown(data, {"directory"}, path)
    directory = data.get("directory", ".")
    if not isinstance(directory, str) or not directory:
        raise ConfigError(f"{path}.directory must be a non-empty string",
                          field=f"{path}.directory")
    return OutputConfig(directory=directory)


def _corrupt_phi_config(data, path="verify.corrupt_phi") -> CorruptPhiConfig:
    data = _require_mapping(data, path)
    _reject_unknown(data, {"pair", "magnitude"}, path)
    pair = data.get("pair", [1, 3])
    where = f"{path}.pair"
    if (
        not isinstance(pair, list)
        or len(pair) != 2
        or any(isinstance(v, bool) or not isinstance(v, int) for v in pair)
        or pair[0] == pair[1]
    ):
        raise ConfigError(f"{where} must be a pair of two distinct chart indices", field=where)
    magnitude = _number(data, "magnitude", path, 0.1)
    if magnitude == 0:
        raise ConfigError(f"{path}.magnitude must be nonzero", field=f"{path}.magnitude")
    return CorruptPhiConfig(pair=(int(pair[0]), int(pair[1])), magnitude=magnitude)


def _verify_config(data, path="verify") -> VerifyConfig:
    data = _require_mapping(data, path)
    _reject_unknown(
        data,
        {"suites", "gluing_tol", "refine", "n_gauges", "seed", "gauge_kicks",
         "phase_floor", "corrupt_phi"},
        path,
    )
    default = VerifyConfig()
    suites = data.get("suites", list(default.suites))
    where = f"{path}.suites"
    if not isinstance(suites, list) or not suites:
        raise ConfigError(f"{where} must be a non-empty list", field=where)
    for s in suites:
        if s not in VERIFY_SUITES:
            raise ConfigError(
                f"{where} entries must be among {VERIFY_SUITES}; got {s!r}", field=where
            )
    refine = data.get("refine", default.refine)
    if not isinstance(refine, bool):
        raise ConfigError(f"{path}.refine must be true or false", field=f"{path}.refine")
    corrupt = data.get("corrupt_phi")
    return VerifyConfig(
        suites=tuple(suites),
        gluing_tol=_number(data, "gluing_tol", path, default.gluing_tol, positive=True),
        refine=refine,
        n_gauges=_integer(data, "n_gauges", path, default.n_gauges, minimum=1),
        seed=_integer(data, "seed", path, default.seed, minimum=0),
        gauge_kicks=_integer(data, "gauge_kicks", path, default.gauge_kicks, minimum=8),
        phase_floor=_number(data, "phase_floor", path, default.phase_floor, positive=True),
        corrupt_phi=None if corrupt is None else _corrupt_phi_config(corrupt),
    )


_BLOCKS = {
    "model": _model_config,
    "atlas": _atlas_config,
    "grids": _grid_config,
    "schedule": _schedule_config,
    "frequencies": _frequencies_config,
    "output": _output_config,
    "verify": _verify_config,
}


def config_from_dict(data: dict) -> RunConfig:
    data = _require_mapping(data, "config")
    _reject_unknown(data, set(_BLOCKS), "")
    kwargs = {}
    for name, parser in _BLOCKS.items():
        if name in data:
            kwargs[name] = parser(data[name])
    return RunConfig(**kwargs)


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {p} does not exist")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    return config_from_dict(data)
