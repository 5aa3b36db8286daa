"""Flat ``key = value`` run configuration with strict validation.

Example file::

    # population map at D = 0.2
    n_sites = 51
    directionality = 0.2
    xi = 0            # radians; "pi/2" or "0.125pi" also accepted
    w_bar = 0.2
    d_grid = 0.05, 0.2, 0.6, 1.0

Unknown keys, malformed values and out-of-range values raise ConfigError
naming the key and where it came from.  Command-line overrides win over
file values, which win over the defaults in ``SCHEMA``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np


class ConfigError(ValueError):
    def __init__(self, key: str | None, location: str, message: str):
        self.key = key
        self.location = location
        where = f"{location}: " if location else ""
        prefix = f"{key}: " if key else ""
        super().__init__(f"{where}{prefix}{message}")

    def record(self) -> dict:
        return {"error": "config", "key": self.key, "location": self.location, "message": str(self)}


_ANGLE = re.compile(
    r"^\s*(?P<coef>[-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?)?\s*\*?\s*pi\s*(/\s*(?P<den>\d+(\.\d*)?))?\s*$"
)


def parse_angle(text: str) -> float:
    """Radians from '0.3', 'pi', 'pi/2', '0.125pi' or '0.5*pi'."""
    text = str(text).strip()
    m = _ANGLE.match(text)
    if m:
        coef = float(m.group("coef")) if m.group("coef") else 1.0
        den = float(m.group("den")) if m.group("den") else 1.0
        return coef * math.pi / den
    return float(text)


def _parse_bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


def _list_of(item: Callable[[str], Any]) -> Callable[[str], tuple]:
    def parse(text):
        if isinstance(text, (list, tuple)):
            return tuple(item(v) for v in text)
        parts = [p for p in str(text).replace(";", ",").split(",") if p.strip()]
        if not parts:
            raise ValueError("empty list")
        return tuple(item(p) for p in parts)

    return parse


def _in(lo, hi, lo_open=False):
    def check(v):
        values = v if isinstance(v, tuple) else (v,)
        for x in values:
            if not math.isfinite(x):
                raise ValueError(f"value {x!r} is not finite")
            if (x <= lo if lo_open else x < lo) or (hi is not None and x > hi):
                left = "(" if lo_open else "["
                right = f"{hi}]" if hi is not None else "inf)"
                raise ValueError(f"value {x!r} outside {left}{lo}, {right}")
    return check


def _choice(*options):
    def check(v):
        if v not in options:
            raise ValueError(f"must be one of {', '.join(options)}, got {v!r}")
    return check


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    check: Callable[[Any], None] | None
    doc: str


_D_GRID = tuple(float(x) for x in np.linspace(0.05, 1.0, 9))
_W_GRID = tuple(float(x) for x in np.logspace(math.log10(0.005), 0.0, 12))
_XI_GRID = tuple(float(x) for x in np.linspace(0.0, math.pi, 9))

SCHEMA: dict[str, Key] = {
    "n_sites": Key(_parse_int, 51, _in(1, None), "number of emitters N"),
    "gamma": Key(float, 1.0, _in(0, None, lo_open=True), "total decay rate; sets the time unit"),
    "directionality": Key(float, 0.2, _in(-1.0, 1.0), "D = (gamma_R - gamma_L) / gamma"),
    "xi": Key(parse_angle, 0.0, _in(0.0, math.pi), "neighbour propagation phase in radians"),
    "w_bar": Key(float, 0.2, _in(0.0, 1.0), "disorder strength; phases uniform on pi*[-w, w]"),
    "disorder_mode": Key(str, "phase", _choice("phase", "onsite"), "phase factor or onsite potential"),
    "gamma_nr": Key(float, 0.0, _in(0.0, None), "nonradiative loss rate"),
    "initial_site": Key(_parse_int, 0, _in(0, None), "1-based excited site; 0 = centre"),
    "horizon": Key(float, 1500.0, _in(0.0, None, lo_open=True), "final gamma*t"),
    "stride": Key(float, 1.0, _in(0.0, None, lo_open=True), "snapshot spacing in gamma*t"),
    "step": Key(float, 5e-3, _in(0.0, None, lo_open=True), "RK4 step in gamma*t"),
    "realizations": Key(_parse_int, 200, _in(1, None), "disorder realizations per ensemble"),
    "seed": Key(_parse_int, 0, _in(0, 2**64 - 1), "base seed"),
    "workers": Key(_parse_int, 0, _in(0, None), "worker threads; 0 = CHIRALOC_WORKERS or CPU count"),
    "edge_margin": Key(_parse_int, 2, _in(0, None), "transport criterion tolerance in sites"),
    "reference_level": Key(float, 0.1, _in(0.0, 1.0, lo_open=True), "P_t level fixing the reference time"),
    "t_cut": Key(float, 0.0, _in(0.0, None), "time of the spatial cut; 0 = horizon"),
    "d_grid": Key(_list_of(float), _D_GRID, _in(-1.0, 1.0), "directionality grid for scans"),
    "w_grid": Key(_list_of(float), _W_GRID, _in(0.0, 1.0), "disorder grid for the boundary scan"),
    "xi_grid": Key(_list_of(parse_angle), _XI_GRID, _in(0.0, math.pi), "xi grid for the re-entrance scan"),
    "xi_set": Key(_list_of(parse_angle), (0.0, math.pi / 8, math.pi / 2), _in(0.0, math.pi),
                  "xi values for the zeta_L scan"),
    "spectral_xi": Key(parse_angle, math.pi / 2, _in(0.0, math.pi), "xi of spectral-stats (D is fixed to 0)"),
    "w_list": Key(_list_of(float), (0.05, 0.1, 0.2, 0.5), _in(0.0, 1.0),
                  "disorder strengths for spectral-stats"),
    "map_w_list": Key(_list_of(float), (0.0, 0.01, 0.02, 0.2), _in(0.0, 1.0),
                      "disorder strengths for simulate --map"),
    "zeta_w_bar": Key(float, 0.5, _in(0.0, 1.0), "disorder strength of the zeta_L scan"),
    "reentrance_horizon": Key(float, 5000.0, _in(0.0, None, lo_open=True), "horizon of the re-entrance scan"),
    "reentrance_stride": Key(float, 5.0, _in(0.0, None, lo_open=True), "snapshot stride of the re-entrance scan"),
    "tail_fraction": Key(float, 0.2, _in(0.0, 1.0), "fallback tail start as a fraction of the horizon"),
    "bins": Key(_parse_int, 50, _in(1, None), "histogram bins on [0, 1]"),
    "plot": Key(_parse_bool, False, None, "also render PNG figures"),
}


def defaults() -> dict:
    return {k: spec.default for k, spec in SCHEMA.items()}


def coerce(key: str, raw: Any, location: str) -> Any:
    spec = SCHEMA.get(key)
    if spec is None:
        raise ConfigError(key, location, "unknown key")
    try:
        value = spec.parse(raw if isinstance(raw, (list, tuple)) else str(raw))
        if spec.check:
            spec.check(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, location, str(exc)) from None
    return value


def read_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(None, str(path), "configuration file not found")
    values = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        loc = f"{path}:{lineno}"
        if "=" not in body:
            raise ConfigError(None, loc, f"expected 'key = value', got {body!r}")
        key, raw = (s.strip() for s in body.split("=", 1))
        key = key.replace("-", "_")
        if key in values:
            raise ConfigError(key, loc, "duplicate key")
        values[key] = coerce(key, raw, loc)
    return values


def resolve(path=None, overrides: dict | None = None) -> dict:
    """Defaults <- file <- overrides (already typed or raw strings)."""
    cfg = defaults()
    if path is not None:
        cfg.update(read_config_file(path))
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        cfg[key] = coerce(key, raw, "command line")
    if cfg["initial_site"] > cfg["n_sites"]:
        raise ConfigError("initial_site", "resolved configuration",
                          f"{cfg['initial_site']} exceeds n_sites = {cfg['n_sites']}")
    return cfg


def to_params(cfg: dict):
    from chiraloc.model import SystemParams

    return SystemParams(
        n_sites=cfg["n_sites"],
        gamma=cfg["gamma"],
        directionality=cfg["directionality"],
        xi=cfg["xi"],
        disorder_strength=cfg["w_bar"],
        disorder_mode=cfg["disorder_mode"],
        gamma_nr=cfg["gamma_nr"],
        initial_site=cfg["initial_site"] or None,
    )


def describe() -> str:
    """Schema listing for ``--help``."""
    lines = []
    for key, spec in SCHEMA.items():
        default = spec.default
        if isinstance(default, tuple):
            default = ", ".join(f"{v:.6g}" for v in default)
        lines.append(f"  {key:<20} {spec.doc} (default: {default})")
    return "\n".join(lines)
