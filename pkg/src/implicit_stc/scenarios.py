"""Scenario configuration files, single runs and parameter sweeps.

A scenario is a small YAML document::

    name: fig3_unsaturated
    controller: implicit_stc        # implicit_stc | conditioned_stc | brogliato | explicit_euler | fosm
    gains: {k1: 27.0, k2: 10.0, T: 0.01, u_max: null}
    disturbance: {kind: sawtooth, L: 5.0, W: 0.25}
    x0: 1.0
    v0: 0.0
    horizon: 2000
    seeds: [0]
    fosm_c: null

Disturbance kinds are ``zero``, ``constant`` (``value``), ``sawtooth``
(``L``, ``W``), ``pwl`` (``times``, ``values``, optional ``periodic``) and
``random`` (``L``, ``W``, optional ``min_seg``/``max_seg`` in multiples of
``T``; seeded from ``seeds[0]``).  A sweep file is a scenario plus a
``grid`` mapping dotted keys (``gains.k1``, ``fosm_c``, ...) to value lists.
"""

from __future__ import annotations

import copy
import csv
import io
import itertools
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .analysis import conditioned_conditions, convergence_metrics, unsaturated_conditions
from .core import CONTROLLERS, Gains
from .errors import ParameterError, SimulationError
from .plant import (
    PiecewiseLinearSignal,
    constant_disturbance,
    random_disturbance,
    run_closed_loop,
    sawtooth_disturbance,
)

__all__ = [
    "ConfigError",
    "DisturbanceSpec",
    "ScenarioConfig",
    "SweepConfig",
    "load_scenario",
    "load_sweep",
    "bundled_configs",
    "resolve_config_path",
    "simulate",
    "scenario_metrics",
    "run_sweep",
    "METRIC_KEYS",
]

DISTURBANCE_KINDS = {
    "zero": (),
    "constant": ("value",),
    "sawtooth": ("L", "W"),
    "pwl": ("times", "values"),
    "random": ("L", "W"),
}
OPTIONAL_DISTURBANCE_KEYS = {"pwl": ("periodic",), "random": ("min_seg", "max_seg")}
SCENARIO_KEYS = ("name", "controller", "gains", "disturbance", "x0", "v0", "horizon", "seeds", "fosm_c")

METRIC_KEYS = ("converged", "K_star", "max_abs_x_after", "max_x_sup_after", "v_identity_residual", "lt2_bound")


class ConfigError(ValueError):
    """Malformed scenario file; the message names the field and, when known, the line."""


@dataclass(frozen=True)
class DisturbanceSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def build(self, T: float, seed: int = 0, t_end: float = 0.0) -> PiecewiseLinearSignal:
        p = self.params
        if self.kind == "zero":
            return constant_disturbance(0.0)
        if self.kind == "constant":
            return constant_disturbance(p["value"])
        if self.kind == "sawtooth":
            return sawtooth_disturbance(p["L"], p["W"], T)
        if self.kind == "pwl":
            return PiecewiseLinearSignal(p["times"], p["values"], periodic=p.get("periodic", False))
        rng = np.random.default_rng(seed)
        return random_disturbance(rng, p["L"], p["W"], t_end,
                                  p.get("min_seg", 0.5) * T, p.get("max_seg", 5.0) * T)

    def bounds(self, T: float):
        """Declared slope and amplitude bounds ``(L, W)``."""
        p = self.params
        if self.kind == "zero":
            return 0.0, 0.0
        if self.kind == "constant":
            return 0.0, abs(p["value"])
        if self.kind in ("sawtooth", "random"):
            return float(p["L"]), float(p["W"])
        sig = self.build(T)
        return sig.slope_bound, sig.amplitude_bound


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    controller: str
    gains: Gains
    disturbance: DisturbanceSpec
    x0: float = 0.0
    v0: float = 0.0
    horizon: int = 1000
    seeds: tuple = (0,)
    fosm_c: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "controller": self.controller,
            "gains": {"k1": self.gains.k1, "k2": self.gains.k2, "T": self.gains.T, "u_max": self.gains.u_max},
            "disturbance": {"kind": self.disturbance.kind, **copy.deepcopy(self.disturbance.params)},
            "x0": self.x0,
            "v0": self.v0,
            "horizon": self.horizon,
            "seeds": list(self.seeds),
            "fosm_c": self.fosm_c,
        }

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def signal(self) -> PiecewiseLinearSignal:
        seed = self.seeds[0] if self.seeds else 0
        return self.disturbance.build(self.gains.T, seed, (self.horizon + 1) * self.gains.T)

    @property
    def bounds(self):
        return self.disturbance.bounds(self.gains.T)

    def condition_warnings(self) -> list:
        """Stability conditions the chosen gains violate (advisory only)."""
        L, W = self.bounds
        g = self.gains
        out = []
        if self.controller in ("implicit_stc", "brogliato", "explicit_euler") and not unsaturated_conditions(g, L):
            out.append(f"gains violate k1 > sqrt(k2 + L), k2 > L (k1={g.k1}, k2={g.k2}, L={L})")
        if self.controller == "conditioned_stc" and not conditioned_conditions(g, L, W):
            out.append(f"gains violate the saturated stability conditions (k1={g.k1}, k2={g.k2}, U={g.u_max}, "
                       f"L={L}, W={W}, T={g.T})")
        if self.controller == "fosm":
            c = self.fosm_c if self.fosm_c is not None else g.u_max
            if c is not None and not c > W:
                out.append(f"fosm gain c={c} does not exceed W={W}")
        return out


@dataclass(frozen=True)
class SweepConfig:
    base: ScenarioConfig
    grid: tuple  # ((dotted_key, (values...)), ...)

    def points(self):
        """Scenario for each grid point, last key varying fastest."""
        keys = [k for k, _ in self.grid]
        base = self.base.to_dict()
        for combo in itertools.product(*(vals for _, vals in self.grid)):
            d = copy.deepcopy(base)
            for key, val in zip(keys, combo):
                _set_path(d, key, val)
            yield dict(zip(keys, combo)), d


def _set_path(d, dotted, value):
    parts = dotted.split(".")
    for p in parts[:-1]:
        d = d[p]
    d[parts[-1]] = value


def _node_line(root, path) -> Optional[int]:
    node = root
    line = None
    for key in path:
        if not isinstance(node, yaml.MappingNode):
            break
        for k, v in node.value:
            if k.value == key:
                line = k.start_mark.line + 1
                node = v
                break
        else:
            break
    return line


class _Reader:
    def __init__(self, data, root, source):
        self.data, self.root, self.source = data, root, source

    def fail(self, path, msg):
        line = _node_line(self.root, path) if self.root is not None else None
        where = f"{self.source}:{line}" if line else self.source
        raise ConfigError(f"{where}: field '{'.'.join(path)}': {msg}")

    def get(self, mapping, path, required=True, default=None):
        if not isinstance(mapping, dict):
            self.fail(path[:-1], "expected a mapping")
        if path[-1] not in mapping:
            if required:
                self.fail(path, "missing")
            return default
        return mapping[path[-1]]

    def number(self, mapping, path, required=True, default=None, positive=False, allow_none=False):
        val = self.get(mapping, path, required, default)
        if val is None:
            if allow_none:
                return None
            self.fail(path, "expected a number, got null")
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            self.fail(path, f"expected a number, got {val!r}")
        if not math.isfinite(val) and not (allow_none and val == math.inf):
            self.fail(path, f"expected a finite number, got {val!r}")
        if positive and not val > 0:
            self.fail(path, f"must be positive, got {val!r}")
        return float(val)


def _parse_scenario(data, root=None, source="<config>") -> ScenarioConfig:
    r = _Reader(data, root, source)
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    unknown = set(data) - set(SCENARIO_KEYS) - {"grid"}
    if unknown:
        r.fail((sorted(unknown)[0],), "unknown field")
    name = str(r.get(data, ("name",), required=False, default="scenario"))
    controller = r.get(data, ("controller",))
    if controller not in CONTROLLERS:
        r.fail(("controller",), f"unknown controller {controller!r}; expected one of {sorted(CONTROLLERS)}")
    g = r.get(data, ("gains",))
    if not isinstance(g, dict):
        r.fail(("gains",), "expected a mapping")
    for key in set(g) - {"k1", "k2", "T", "u_max"}:
        r.fail(("gains", key), "unknown field")
    k1 = r.number(g, ("gains", "k1"), positive=True)
    k2 = r.number(g, ("gains", "k2"), positive=True)
    T = r.number(g, ("gains", "T"), positive=True)
    u_max = r.number(g, ("gains", "u_max"), required=False, positive=True, allow_none=True)
    if controller == "conditioned_stc" and u_max is None:
        r.fail(("gains", "u_max"), "conditioned_stc needs a saturation bound")
    if controller in ("implicit_stc", "brogliato") and u_max is not None:
        r.fail(("gains", "u_max"), f"{controller} is unsaturated; drop u_max or use conditioned_stc")
    gains = Gains(k1, k2, T, u_max)

    dist = r.get(data, ("disturbance",))
    if not isinstance(dist, dict):
        r.fail(("disturbance",), "expected a mapping")
    kind = r.get(dist, ("disturbance", "kind"))
    if kind not in DISTURBANCE_KINDS:
        r.fail(("disturbance", "kind"), f"unknown disturbance kind {kind!r}; expected one of {sorted(DISTURBANCE_KINDS)}")
    allowed = set(DISTURBANCE_KINDS[kind]) | set(OPTIONAL_DISTURBANCE_KEYS.get(kind, ()))
    for key in set(dist) - allowed - {"kind"}:
        r.fail(("disturbance", key), f"not a parameter of disturbance kind {kind!r}")
    params = {}
    for key in DISTURBANCE_KINDS[kind]:
        if kind == "pwl":
            seq = r.get(dist, ("disturbance", key))
            if not isinstance(seq, list) or not all(isinstance(s, (int, float)) and not isinstance(s, bool) for s in seq):
                r.fail(("disturbance", key), "expected a list of numbers")
            params[key] = [float(s) for s in seq]
        else:
            params[key] = r.number(dist, ("disturbance", key), positive=key in ("L", "W"))
    for key in OPTIONAL_DISTURBANCE_KEYS.get(kind, ()):
        if key in dist:
            params[key] = bool(dist[key]) if key == "periodic" else r.number(dist, ("disturbance", key), positive=True)
    spec = DisturbanceSpec(kind, params)
    if kind in ("pwl", "sawtooth"):
        try:
            spec.build(T)
        except ParameterError as exc:
            r.fail(("disturbance",), str(exc))

    x0 = r.number(data, ("x0",), required=False, default=0.0)
    v0 = r.number(data, ("v0",), required=False, default=0.0)
    horizon = r.get(data, ("horizon",), required=False, default=1000)
    if isinstance(horizon, bool) or not isinstance(horizon, int) or horizon < 1:
        r.fail(("horizon",), f"expected a positive integer, got {horizon!r}")
    seeds = r.get(data, ("seeds",), required=False, default=[0])
    if not isinstance(seeds, list) or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        r.fail(("seeds",), "expected a list of integers")
    fosm_c = r.number(data, ("fosm_c",), required=False, positive=True, allow_none=True)
    if controller == "fosm" and fosm_c is None and u_max is None:
        r.fail(("fosm_c",), "fosm needs fosm_c or gains.u_max")
    return ScenarioConfig(name, controller, gains, spec, x0, v0, horizon, tuple(seeds), fosm_c)


def _load_yaml(text, source):
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark else source
        raise ConfigError(f"{where}: YAML syntax error: {getattr(exc, 'problem', exc)}") from None
    return data, root


def bundled_configs() -> list:
    return sorted(p.name[:-5] for p in resources.files("implicit_stc").joinpath("configs").iterdir()
                  if p.name.endswith(".yaml"))


def resolve_config_path(ref) -> Path:
    """A filesystem path, or the name of a bundled configuration."""
    path = Path(ref)
    if path.exists():
        return path
    bundled = resources.files("implicit_stc").joinpath("configs").joinpath(f"{ref}.yaml")
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"{ref}: no such file or bundled config (bundled: {', '.join(bundled_configs())})")


def load_scenario(ref=None, text: Optional[str] = None) -> ScenarioConfig:
    """Parse a scenario from a path / bundled name or from YAML ``text``."""
    if text is None:
        path = resolve_config_path(ref)
        text, source = path.read_text(), str(path)
    else:
        source = "<string>"
    data, root = _load_yaml(text, source)
    return _parse_scenario(data, root, source)


def load_sweep(ref=None, text: Optional[str] = None) -> SweepConfig:
    if text is None:
        path = resolve_config_path(ref)
        text, source = path.read_text(), str(path)
    else:
        source = "<string>"
    data, root = _load_yaml(text, source)
    base = _parse_scenario(data, root, source)
    r = _Reader(data, root, source)
    grid = r.get(data, ("grid",))
    if not isinstance(grid, dict) or not grid:
        r.fail(("grid",), "expected a non-empty mapping of dotted keys to value lists")
    base_dict = base.to_dict()
    items = []
    for key, values in grid.items():
        d = base_dict
        for part in key.split("."):
            if not isinstance(d, dict) or part not in d:
                r.fail(("grid", key), "does not name a scenario field")
            d = d[part]
        if not isinstance(values, list) or not values:
            r.fail(("grid", key), "expected a non-empty list")
        items.append((key, tuple(values)))
    sweep = SweepConfig(base, tuple(items))
    for _, point in sweep.points():
        _parse_scenario(point, None, f"{source} (grid point)")
    return sweep


def scenario_metrics(config: ScenarioConfig, traj, signal) -> dict:
    L, W = config.bounds
    T = config.gains.T
    report = convergence_metrics(traj, signal, L, T)
    metrics = {key: report[key] for key in METRIC_KEYS}
    metrics.update(
        name=config.name,
        controller=config.controller,
        horizon=config.horizon,
        within_lt2=report["within_lt2"],
        max_abs_x_tail=report["max_abs_x_tail"],
        max_abs_u=report["max_abs_u"],
        wt_bound=W * T,
        gain_conditions_hold=not config.condition_warnings(),
    )
    return metrics


def simulate(config: ScenarioConfig, warn: bool = True):
    """Run one scenario; returns ``(trajectory, metrics)``."""
    if warn:
        for msg in config.condition_warnings():
            warnings.warn(msg, stacklevel=2)
    signal = config.signal()
    traj = run_closed_loop(config.controller, config.gains, signal, config.x0, config.v0,
                           config.horizon, c=config.fosm_c)
    return traj, scenario_metrics(config, traj, signal)


def _sweep_point(point_dict):
    config = _parse_scenario(point_dict)
    try:
        _, metrics = simulate(config, warn=False)
        metrics["error"] = ""
    except SimulationError as exc:
        metrics = {key: None for key in METRIC_KEYS}
        metrics.update(name=config.name, controller=config.controller, error=str(exc))
    return metrics


def run_sweep(sweep: SweepConfig, jobs: int = 1) -> str:
    """Evaluate every grid point and return the aggregated CSV text (grid order)."""
    points = list(sweep.points())
    dicts = [d for _, d in points]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_point, dicts))
    else:
        results = [_sweep_point(d) for d in dicts]
    keys = [k for k, _ in sweep.grid]
    columns = ["point"] + keys + list(METRIC_KEYS) + ["within_lt2", "max_abs_x_tail", "max_abs_u",
                                                      "wt_bound", "gain_conditions_hold", "error"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for i, ((values, _), metrics) in enumerate(zip(points, results)):
        row = {"point": i, **values, **metrics}
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def _fmt(val):
    if val is None:
        return ""
    if isinstance(val, float):
        return repr(val)
    return str(val)
