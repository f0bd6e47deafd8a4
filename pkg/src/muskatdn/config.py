"""Structured-text run configuration: named sections of ``key = value``
lines, parsed with full validation and line-numbered errors.  Unknown
sections or keys are errors, never silently ignored."""
from __future__ import annotations

import dataclasses
import math

import numpy as np

from .dynamics import FluidParams
from .elliptic import EllipticSolveConfig
from .errors import ConfigError, ValidationError
from .geometry import Boundary, DomainSpec, Interface
from .grid import PeriodicGrid, SpectralField
from .timestepping import SimConfig

__all__ = ["RunConfig", "parse_config", "parse_config_text"]

_PRESETS = {
    "flat": (),
    "single-mode": ((1, 0.1),),
    "headline": ((1, 0.1), (3, 0.02)),
}


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Everything one simulation or sweep needs, in picklable form."""

    scenario: str                      # "one-phase" | "two-phase"
    params: FluidParams
    dom: DomainSpec
    sim: SimConfig
    solver: EllipticSolveConfig
    grid: PeriodicGrid
    modes: tuple                       # ((k, amplitude) cosine modes, ...)
    sweep: tuple                       # strictly decreasing positive s values
    norm_s: float = 3.0                # compare H^{s-1} and H^{s-2}
    out_dir: str = "out"

    def __post_init__(self):
        if self.scenario not in ("one-phase", "two-phase"):
            raise ValidationError("scenario must be one-phase or two-phase")
        if (self.scenario == "one-phase") != self.params.is_one_phase:
            raise ValidationError(
                "scenario and fluid parameters disagree about the phases")
        sw = tuple(float(s) for s in self.sweep)
        if any(s <= 0 for s in sw):
            raise ValidationError("sweep values must be positive "
                                  "(the 0 reference is implicit)")
        if any(b >= a for a, b in zip(sw, sw[1:])):
            raise ValidationError("sweep values must be strictly decreasing")
        object.__setattr__(self, "sweep", sw)
        for k, a in self.modes:
            if int(k) != k or k < 0 or k >= self.grid.n_points // 2:
                raise ValidationError(
                    f"initial mode {k} not resolved on the grid")
            if not np.isfinite(a):
                raise ValidationError("initial amplitudes must be finite")

    def initial_interface(self) -> Interface:
        x = self.grid.nodes
        vals = np.zeros_like(x)
        for k, a in self.modes:
            vals += a * np.cos(2.0 * np.pi * k * x / self.grid.length)
        return Interface(SpectralField.from_values(self.grid, vals),
                         self.norm_s)


def _parse_sections(text: str):
    """-> {section: {key: (value, line)}} with duplicate detection."""
    sections = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if not current:
                raise ConfigError("empty section name", line=lineno)
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}",
                              line=lineno)
        if current is None:
            raise ConfigError("key outside any [section]", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", line=lineno)
        if key in sections[current]:
            raise ConfigError(f"duplicate key {key!r} in [{current}]",
                              line=lineno)
        sections[current][key] = (value, lineno)
    return sections


class _Section:
    def __init__(self, name, entries):
        self.name = name
        self.entries = dict(entries)

    def take(self, key, default=None, required=False):
        if key in self.entries:
            return self.entries.pop(key)
        if required:
            raise ConfigError(f"missing required key {key!r} in "
                              f"[{self.name}]")
        return (default, None)

    def take_float(self, key, default=None, required=False):
        value, line = self.take(key, required=required)
        if value is None:
            return default
        try:
            out = float(value)
        except ValueError:
            raise ConfigError(f"{key} must be a number, got {value!r}",
                              line=line) from None
        if not math.isfinite(out):
            raise ConfigError(f"{key} must be finite", line=line)
        return out

    def take_int(self, key, default=None):
        value, line = self.take(key)
        if value is None:
            return default
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {value!r}",
                              line=line) from None

    def take_str(self, key, default=None, required=False, choices=None):
        value, line = self.take(key, required=required)
        if value is None:
            return default
        if choices and value not in choices:
            raise ConfigError(f"{key} must be one of {sorted(choices)}, "
                              f"got {value!r}", line=line)
        return value

    def finish(self):
        if self.entries:
            key, (_, line) = next(iter(self.entries.items()))
            raise ConfigError(f"unknown key {key!r} in [{self.name}]",
                              line=line)


def _parse_boundary(text: str, line) -> Boundary:
    parts = text.split()
    kind = parts[0] if parts else ""
    if kind == "vacuum" and len(parts) == 1:
        return Boundary.vacuum()
    if kind == "infinite" and len(parts) == 1:
        return Boundary.infinite()
    if kind == "flat" and len(parts) == 2:
        try:
            depth = float(parts[1])
        except ValueError:
            raise ConfigError(f"flat boundary needs a numeric distance, "
                              f"got {parts[1]!r}", line=line) from None
        if depth <= 0:
            raise ConfigError("flat boundary distance must be positive",
                              line=line)
        return Boundary.flat_at(depth)
    raise ConfigError(f"boundary must be 'flat <distance>', 'infinite' or "
                      f"'vacuum', got {text!r}", line=line)


def _parse_modes(text: str, line):
    modes = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" not in chunk:
            raise ConfigError(f"modes are 'k:amplitude' pairs, got "
                              f"{chunk!r}", line=line)
        k_str, a_str = chunk.split(":", 1)
        try:
            modes.append((int(k_str), float(a_str)))
        except ValueError:
            raise ConfigError(f"bad mode entry {chunk!r}",
                              line=line) from None
    return tuple(modes)


def parse_config_text(text: str) -> RunConfig:
    sections = _parse_sections(text)
    known = {"scenario", "fluid", "domain", "grid", "initial", "time",
             "solver", "sweep", "output"}
    for name in sections:
        if name not in known:
            raise ConfigError(f"unknown section [{name}]")

    def section(name):
        return _Section(name, sections.get(name, {}))

    scen = section("scenario")
    scenario = scen.take_str("type", required=True,
                             choices={"one-phase", "two-phase"})
    scen.finish()

    fl = section("fluid")
    try:
        params = FluidParams(
            mu_minus=fl.take_float("mu_minus", 1.0),
            mu_plus=fl.take_float("mu_plus", 0.0),
            rho_minus=fl.take_float("rho_minus", 1.0),
            rho_plus=fl.take_float("rho_plus", 0.0),
            g=fl.take_float("g", 1.0),
            surface_tension=fl.take_float("surface_tension", 0.0))
    except ConfigError:
        raise
    except ValidationError as exc:
        raise ConfigError(f"[fluid] invalid: {exc}") from exc
    fl.finish()

    do = section("domain")
    bottom_txt, bottom_line = do.take("bottom", default="flat 1.0")
    top_default = "vacuum" if scenario == "one-phase" else "flat 1.0"
    top_txt, top_line = do.take("top", default=top_default)
    h = do.take_float("h", 0.5)
    do.finish()
    try:
        dom = DomainSpec(_parse_boundary(bottom_txt, bottom_line),
                         _parse_boundary(top_txt, top_line), h)
    except ConfigError:
        raise
    except ValidationError as exc:
        raise ConfigError(f"[domain] invalid: {exc}") from exc

    gr = section("grid")
    n_points = gr.take_int("n_points", 256)
    length = gr.take_float("length", 2.0 * math.pi)
    gr.finish()
    try:
        grid = PeriodicGrid(n_points, length)
    except ConfigError:
        raise
    except ValidationError as exc:
        raise ConfigError(f"[grid] invalid: {exc}") from exc

    init = section("initial")
    preset_txt, preset_line = init.take("preset")
    modes_txt, modes_line = init.take("modes")
    init.finish()
    if preset_txt is not None and modes_txt is not None:
        raise ConfigError("give either preset or modes, not both",
                          line=modes_line)
    if preset_txt is not None:
        if preset_txt not in _PRESETS:
            raise ConfigError(f"unknown preset {preset_txt!r} (have "
                              f"{sorted(_PRESETS)})", line=preset_line)
        modes = _PRESETS[preset_txt]
    elif modes_txt is not None:
        modes = _parse_modes(modes_txt, modes_line)
    else:
        modes = _PRESETS["headline"]

    tm = section("time")
    try:
        sim = SimConfig(
            dt_init=tm.take_float("dt_init", 1e-3),
            dt_min=tm.take_float("dt_min", 1e-10),
            dt_max=tm.take_float("dt_max", 0.05),
            t_end=tm.take_float("t_end", 0.05),
            tolerance=tm.take_float("tolerance", 1e-7),
            a_min=tm.take_float("a_min", 0.1),
            h_min=tm.take_float("h_min", 0.05))
    except ConfigError:
        raise
    except ValidationError as exc:
        raise ConfigError(f"[time] invalid: {exc}") from exc
    tm.finish()

    so = section("solver")
    try:
        solver = EllipticSolveConfig(
            n_z=so.take_int("n_z", 64),
            tol=so.take_float("tol", 1e-10),
            max_iter=so.take_int("max_iter", 2000))
    except ConfigError:
        raise
    except ValidationError as exc:
        raise ConfigError(f"[solver] invalid: {exc}") from exc
    so.finish()

    sw = section("sweep")
    sweep_txt, sweep_line = sw.take("s_values")
    norm_s = sw.take_float("norm_s", 3.0)
    sw.finish()
    sweep = ()
    if sweep_txt is not None:
        try:
            sweep = tuple(float(v) for v in sweep_txt.split(",") if v.strip())
        except ValueError:
            raise ConfigError(f"bad sweep list {sweep_txt!r}",
                              line=sweep_line) from None

    out = section("output")
    out_dir, _ = out.take("directory", default="out")
    out.finish()

    try:
        return RunConfig(scenario=scenario, params=params, dom=dom, sim=sim,
                         solver=solver, grid=grid, modes=modes, sweep=sweep,
                         norm_s=norm_s, out_dir=out_dir)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config_text(fh.read())
