"""JSON run-configuration parsing.

A config file looks like::

    {
      "plant": {"m": 1.0, "dt": 0.02},
      "gains": {"kp": 50, "kd": 40},
      "noise": {"kind": "gaussian", "sigma_roll": 1.0},
      "mc": {"n_rollouts": 50000, "horizon": 50, "seed": 42},
      "query": {"r": 0.3, "t_horizon": 50, "l_va": 1.0},
      "output_dir": "out"
    }

``m`` may be a scalar, a vector (diagonal mass) or a full matrix. ``gains``
may be replaced by ``regimes`` (``{"alpha": [lo, hi], "beta": [lo, hi]}``)
or ``grid`` (``{"kp": [lo, hi], "kd": [lo, hi], "resolution": 50}``).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bounds import FailureBoundQuery
from .canonical import RegimeQuad
from .dynamics import GainSetting, PlantModel
from .errors import ConfigError
from .montecarlo import EnsembleConfig, NoiseModel

__all__ = ["RunConfig", "GridSpec", "load_config", "parse_config", "default_output_dir"]

OUTPUT_ENV = "BCGAIN_OUTPUT_DIR"


def default_output_dir():
    return Path(os.environ.get(OUTPUT_ENV, "bcgain-out"))


@dataclass(frozen=True)
class GridSpec:
    kp: tuple = (5.0, 200.0)
    kd: tuple = (5.0, 200.0)
    resolution: int = 50
    spacing: str = "log"


@dataclass(frozen=True, eq=False)
class RunConfig:
    plant: PlantModel | None = None
    gains: GainSetting | None = None
    regimes: RegimeQuad | None = None
    grid: GridSpec | None = None
    noise: NoiseModel | None = None
    mc: EnsembleConfig | None = None
    query: FailureBoundQuery | None = None
    output_dir: Path | None = None
    raw: dict | None = None


def _field(path, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _pair(path, v):
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ConfigError(f"{path}: expected a two-element array")
    return float(v[0]), float(v[1])


def parse_plant(d, path="plant"):
    if "dt" not in d or "m" not in d:
        raise ConfigError(f"{path}: needs 'm' and 'dt'")
    m = np.asarray(d["m"], dtype=float) if not isinstance(d["m"], (int, float)) else d["m"]
    if np.ndim(m) == 0:
        return _field(path, PlantModel.scalar, float(m), float(d["dt"]))
    if np.ndim(m) == 1:
        return _field(path, PlantModel.diagonal, m, float(d["dt"]))
    return _field(path, PlantModel, m, float(d["dt"]))


def parse_gains(d, path="gains"):
    if "kp" not in d or "kd" not in d:
        raise ConfigError(f"{path}: needs 'kp' and 'kd'")
    return _field(path, GainSetting, d["kp"], d["kd"])


def parse_noise(d, path="noise"):
    kind = d.get("kind", "gaussian")
    if kind == "gaussian":
        return _field(path, NoiseModel.gaussian, d.get("sigma_roll", 1.0))
    if kind in ("bounded_uniform", "rademacher_scaled"):
        if "scale" not in d:
            raise ConfigError(f"{path}: {kind} needs 'scale'")
        return _field(path, getattr(NoiseModel, kind), d["scale"])
    raise ConfigError(f"{path}.kind: unknown noise kind {kind!r}")


def parse_config(raw: dict, source="<config>") -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be an object")
    known = {"plant", "gains", "regimes", "grid", "noise", "mc", "query", "output_dir"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{source}: unknown field(s) {sorted(unknown)}")
    modes = [k for k in ("gains", "regimes", "grid") if k in raw]
    if len(modes) > 1:
        raise ConfigError(f"{source}: exactly one of gains/regimes/grid may be given, got {modes}")
    out = {"raw": raw}
    if "plant" in raw:
        out["plant"] = parse_plant(raw["plant"])
    if "gains" in raw:
        out["gains"] = parse_gains(raw["gains"])
    if "regimes" in raw:
        r = raw["regimes"]
        a = _pair("regimes.alpha", r.get("alpha"))
        b = _pair("regimes.beta", r.get("beta"))
        out["regimes"] = _field("regimes", RegimeQuad, a[0], a[1], b[0], b[1])
    if "grid" in raw:
        g = raw["grid"]
        out["grid"] = GridSpec(
            kp=_pair("grid.kp", g.get("kp", (5.0, 200.0))),
            kd=_pair("grid.kd", g.get("kd", (5.0, 200.0))),
            resolution=int(g.get("resolution", 50)),
            spacing=g.get("spacing", "log"),
        )
    if "noise" in raw:
        out["noise"] = parse_noise(raw["noise"])
    if "mc" in raw:
        out["mc"] = _field("mc", EnsembleConfig, **raw["mc"])
    if "query" in raw:
        out["query"] = _field("query", FailureBoundQuery, **raw["query"])
    if "output_dir" in raw:
        out["output_dir"] = Path(raw["output_dir"])
    if out.get("plant") is not None and out.get("gains") is not None:
        if out["plant"].n != out["gains"].n:
            raise ConfigError(f"{source}: plant has {out['plant'].n} joints but gains have {out['gains'].n}")
    return RunConfig(**out)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return parse_config(raw, str(path))
