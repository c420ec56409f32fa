"""Run configuration: flat ``key = value`` files with section prefixes.

Recognised keys (``#`` starts a comment)::

    scenario.name            landau1d | twostream1d | landau2d
    scenario.beta            perturbation amplitude
    scenario.wavenumber      k (or omega in 2D)
    scenario.v0              two-stream drift velocity
    scenario.x_length        period of each space axis
    scenario.v_max           velocity box half-width
    scenario.n_x, n_v        points per axis
    scenario.x_derivative    fd | spectral
    scenario.t_f             final time
    scenario.n_steps         number of steps  (give this or scenario.dt)
    scenario.dt              time step        (give this or scenario.n_steps)
    solver.epsilon           greedy tolerance
    solver.eta               ALS stagnation tolerance
    solver.max_rank          greedy iteration cap
    solver.max_als_iters     ALS iteration cap
    solver.seed              ALS initialisation seed
    solver.force_convention  physical | boxed
    solver.recompress        true | false
    output.dir               output directory
    output.snapshot_stride   steps between snapshots (0 = none)
    output.diagnostics_stride steps between diagnostics rows
    output.reference         reference run directory for eps_f
    output.save_reference    true | false

Unknown keys, repeated keys and unparsable values raise
:class:`ConfigError` naming the key and line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

from pgdvlasov.pgd import SolverTolerances
from pgdvlasov.scenarios import PRESETS, ScenarioParams, preset
from pgdvlasov.stepper import FORCE_CONVENTIONS


class ConfigError(ValueError):
    def __init__(self, message, key=None, line=None):
        loc = []
        if key is not None:
            loc.append(f"key {key!r}")
        if line is not None:
            loc.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.key = key
        self.line = line


@dataclass(frozen=True)
class OutputSettings:
    directory: str | None = "out"
    snapshot_stride: int = 0
    diagnostics_stride: int = 1
    reference: str | None = None
    save_reference: bool = False


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioParams
    tolerances: SolverTolerances = field(default_factory=SolverTolerances)
    force_convention: str = "physical"
    recompress: bool = True
    output: OutputSettings = field(default_factory=OutputSettings)

    @property
    def dt(self) -> float:
        return self.scenario.dt

    @property
    def n_steps(self) -> int:
        return self.scenario.n_steps

    @property
    def seed(self) -> int:
        return self.tolerances.seed


_SCENARIO_KEYS = {
    "beta": float, "wavenumber": float, "v0": float, "x_length": float,
    "v_max": float, "n_x": int, "n_v": int, "x_derivative": str, "t_f": float,
    "n_steps": int,
}
_SOLVER_KEYS = {
    "epsilon": float, "eta": float, "max_rank": int, "max_als_iters": int, "seed": int,
}


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int(text: str) -> int:
    val = float(text)
    if not val.is_integer():
        raise ValueError(f"not an integer: {text!r}")
    return int(val)


def _convert(kind, text):
    if kind is int:
        return _int(text)
    if kind is float:
        val = float(text)
        if not math.isfinite(val):
            raise ValueError(f"not finite: {text!r}")
        return val
    return text.strip()


def parse_pairs(text: str, source: str = "<config>") -> list:
    """``[(key, value, line_no)]`` from config text, rejecting duplicates."""
    out, seen = [], {}
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: expected 'key = value'", line=no)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}: empty key", line=no)
        if key in seen:
            raise ConfigError(f"{source}: duplicate (first on line {seen[key]})", key, no)
        seen[key] = no
        out.append((key, value, no))
    return out


def build_config(pairs) -> RunConfig:
    """Resolve ``(key, value, line)`` triples into a validated :class:`RunConfig`.

    Later pairs override earlier ones, which is how command-line flags take
    precedence over file entries.
    """
    merged = {}
    for key, value, line in pairs:
        merged[key] = (value, line)

    def take(key, kind, default=None):
        if key not in merged:
            return default
        value, line = merged.pop(key)
        try:
            return _convert(kind, value)
        except ValueError as exc:
            raise ConfigError(f"bad value {value!r}: {exc}", key, line) from None

    def line_of(key):
        return merged.get(key, (None, None))[1]

    name_line = line_of("scenario.name")
    name = take("scenario.name", str, "landau1d").lower()
    if name not in PRESETS:
        raise ConfigError(f"unknown scenario, choose from {sorted(PRESETS)}", "scenario.name", name_line)
    sc_over = {}
    for k, kind in _SCENARIO_KEYS.items():
        val = take(f"scenario.{k}", kind)
        if val is not None:
            sc_over[k] = val
    dt_line = line_of("scenario.dt")
    dt = take("scenario.dt", float)
    if dt is not None:
        if "n_steps" in sc_over:
            raise ConfigError("give either scenario.dt or scenario.n_steps, not both",
                              "scenario.dt", dt_line)
        if not dt > 0:
            raise ConfigError("dt must be positive", "scenario.dt", dt_line)
        n = sc_over.get("t_f", preset(name).t_f) / dt
        if abs(n - round(n)) > 1e-9 * max(n, 1.0) or round(n) < 1:
            raise ConfigError(f"t_f / dt = {n} is not a positive integer", "scenario.dt", dt_line)
        sc_over["n_steps"] = int(round(n))

    tol_over = {}
    for k, kind in _SOLVER_KEYS.items():
        val = take(f"solver.{k}", kind)
        if val is not None:
            tol_over[k] = val
    conv_line = line_of("solver.force_convention")
    convention = take("solver.force_convention", str, "physical")
    if convention not in FORCE_CONVENTIONS:
        raise ConfigError(f"must be one of {FORCE_CONVENTIONS}", "solver.force_convention", conv_line)
    rec_line = line_of("solver.recompress")
    recompress = take("solver.recompress", str, "true")

    out_kw = {}
    directory = take("output.dir", str)
    if directory is not None:
        out_kw["directory"] = directory
    for k in ("snapshot_stride", "diagnostics_stride"):
        ln = line_of(f"output.{k}")
        val = take(f"output.{k}", int)
        if val is not None:
            if val < 0 or (k == "diagnostics_stride" and val < 1):
                raise ConfigError("stride out of range", f"output.{k}", ln)
            out_kw[k] = val
    ref = take("output.reference", str)
    if ref:
        out_kw["reference"] = ref
    sr_line = line_of("output.save_reference")
    save_ref = take("output.save_reference", str)

    if merged:
        key, (_, line) = next(iter(merged.items()))
        raise ConfigError("unknown key", key, line)

    try:
        recompress = _bool(recompress)
    except ValueError as exc:
        raise ConfigError(str(exc), "solver.recompress", rec_line) from None
    if save_ref is not None:
        try:
            out_kw["save_reference"] = _bool(save_ref)
        except ValueError as exc:
            raise ConfigError(str(exc), "output.save_reference", sr_line) from None

    try:
        scenario = preset(name, **sc_over)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), "scenario.*") from None
    try:
        tolerances = SolverTolerances(**tol_over)
    except ValueError as exc:
        raise ConfigError(str(exc), "solver.*") from None
    output = OutputSettings(**out_kw)
    if output.save_reference and output.snapshot_stride == 0:
        output = replace(output, snapshot_stride=max(1, scenario.n_steps // 100))
    return RunConfig(
        scenario=scenario,
        tolerances=tolerances,
        force_convention=convention,
        recompress=recompress,
        output=output,
    )


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    return build_config(parse_pairs(text, source))


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read(), str(path))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_config(cfg: RunConfig) -> str:
    """Fully resolved configuration; :func:`parse_config` reads it back exactly."""
    sc = cfg.scenario
    lines = [f"scenario.name = {sc.kind.value}"]
    for f in fields(ScenarioParams):
        if f.name == "kind":
            continue
        lines.append(f"scenario.{f.name} = {_fmt(getattr(sc, f.name))}")
    tol = cfg.tolerances
    for k in _SOLVER_KEYS:
        lines.append(f"solver.{k} = {_fmt(getattr(tol, k))}")
    lines.append(f"solver.force_convention = {cfg.force_convention}")
    lines.append(f"solver.recompress = {_fmt(cfg.recompress)}")
    out = cfg.output
    if out.directory is not None:
        lines.append(f"output.dir = {out.directory}")
    lines.append(f"output.snapshot_stride = {out.snapshot_stride}")
    lines.append(f"output.diagnostics_stride = {out.diagnostics_stride}")
    if out.reference:
        lines.append(f"output.reference = {out.reference}")
    lines.append(f"output.save_reference = {_fmt(out.save_reference)}")
    return "\n".join(lines) + "\n"
