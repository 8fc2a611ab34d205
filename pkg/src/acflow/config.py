"""Flat key=value run configuration with a closed key registry.

Every recognized key has a typed default; a key outside the registry is a
hard error (with line and file diagnostics) because a silently ignored
knob can make a misconfigured stability experiment look like a finding.
Keys that belong to a schedule other than the selected one are accepted
and ignored, so one file can describe several experiments.
"""

from __future__ import annotations

import difflib
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping

from .convection import NonlinearityForm
from .grid import BC, GridSpec
from .schedules import AdaptiveDiv, Constant, Oscillating, ScheduleKind, SmoothRamp
from .stepper import SolverParams


class ConfigError(Exception):
    """Raised for unreadable, unparsable, or inconsistent configuration."""


SCHEMES = ("standard", "new", "bdf2_new")
FORCINGS = ("none", "rotational2d", "manufactured_printed",
            "manufactured_divfree_alt")
INITS = ("rest", "exact", "random_smooth")
SCHEDULE_KINDS = ("constant", "oscillating", "adaptive_div", "smooth_ramp")
BCS = ("periodic", "noslip")


def scheme_order(scheme: str) -> int:
    """Formal temporal order used to pair eps with k (k for order 1, k^2 for 2)."""
    return 2 if scheme == "bdf2_new" else 1


def _parse_int(raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"expected an integer, got {raw!r}")


def _parse_float(raw: str) -> float:
    # plain literals plus a/b fractions, so step lists can be written the
    # way they are usually quoted (1/20, 1/40, ...)
    try:
        if "/" in raw:
            return float(Fraction(raw))
        return float(raw)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"expected a number, got {raw!r}")


def _parse_choice(options):
    def parse(raw: str) -> str:
        if raw not in options:
            raise ValueError(f"expected one of {', '.join(options)}; got {raw!r}")
        return raw
    return parse


def _parse_float_list(raw: str) -> tuple:
    items = [s.strip() for s in raw.split(",") if s.strip()]
    if not items:
        raise ValueError("expected a comma-separated list of numbers")
    return tuple(_parse_float(s) for s in items)


# key -> (parser, default).  Defaults are already-parsed Python values.
_REGISTRY: dict[str, tuple[Callable[[str], object], object]] = {
    "grid.nx": (_parse_int, 64),
    "grid.ny": (_parse_int, 64),
    "grid.lx": (_parse_float, 1.0),
    "grid.ly": (_parse_float, 1.0),
    "grid.bc": (_parse_choice(BCS), "periodic"),
    "scheme": (_parse_choice(SCHEMES), "new"),
    "form": (_parse_choice(tuple(f.value for f in NonlinearityForm)), "skew"),
    "nu": (_parse_float, 0.01),
    "t_final": (_parse_float, 1.0),
    "schedule": (_parse_choice(SCHEDULE_KINDS), "constant"),
    "constant.k": (_parse_float, 0.01),
    "oscillating.k_base": (_parse_float, 0.01),
    "oscillating.amp": (_parse_float, 0.002),
    "oscillating.freq": (_parse_float, 10.0),
    "oscillating.warmup_steps": (_parse_int, 10),
    "adaptive.tol_lo": (_parse_float, 0.001),
    "adaptive.tol_hi": (_parse_float, 0.01),
    "adaptive.k0": (_parse_float, 0.001),
    "adaptive.k_min": (_parse_float, 1e-6),
    "adaptive.k_max": (_parse_float, 0.1),
    "ramp.k0": (_parse_float, 0.001),
    "ramp.k1": (_parse_float, 0.01),
    "ramp.time": (_parse_float, 1.0),
    "solver.picard_tol": (_parse_float, 1e-11),
    "solver.picard_max": (_parse_int, 100),
    "solver.krylov_tol": (_parse_float, 1e-11),
    "solver.krylov_max": (_parse_int, 20000),
    "solver.picard_damping": (_parse_float, 1.0),
    "forcing": (_parse_choice(FORCINGS), "none"),
    "init": (_parse_choice(INITS), "rest"),
    "init.seed": (_parse_int, 0),
    "init.amplitude": (_parse_float, 1.0),
    "snapshot_every": (_parse_int, 0),
    "convergence.k_list": (_parse_float_list, (0.05, 0.025, 0.0125, 0.00625)),
    "acoustic.eps0": (_parse_float, 1.0),
    "acoustic.growth": (_parse_float, 0.0),
    "acoustic.k": (_parse_float, 0.01),
    "acoustic.steps": (_parse_int, 200),
    "acoustic.mode": (_parse_int, 1),
    "validate.steps": (_parse_int, 100),
    "validate.beta": (_parse_float, 3.0),
}


@dataclass(frozen=True)
class AcousticLab:
    eps0: float
    growth: float
    k: float
    steps: int
    mode: int

    def eps_fn(self):
        eps0, growth = self.eps0, self.growth
        return lambda t: eps0 * math.exp(growth * t)


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec
    scheme: str
    form: NonlinearityForm
    nu: float
    t_final: float
    schedule: ScheduleKind
    solver: SolverParams
    forcing: str
    init: str
    init_seed: int
    init_amplitude: float
    snapshot_every: int
    convergence_k: tuple
    acoustic: AcousticLab
    validate_steps: int
    validate_beta: float


def parse_pairs(text: str, source: str = "<config>") -> dict:
    """Parse key=value lines into {key: (raw value, line number)}.

    Full and trailing '#' comments are stripped; blank lines skipped.
    Unknown and duplicate keys are rejected here, before typing.
    """
    seen: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line.strip()!r}")
        key, _, raw = body.partition("=")
        key = key.strip()
        raw = raw.strip()
        if not key or not raw:
            raise ConfigError(f"{source}:{lineno}: empty key or value")
        if key not in _REGISTRY:
            hint = difflib.get_close_matches(key, _REGISTRY, n=1)
            extra = f" (did you mean {hint[0]!r}?)" if hint else ""
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}{extra}")
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r} "
                              f"(first set on line {seen[key][1]})")
        seen[key] = (raw, lineno)
    return seen


def _typed_values(pairs: Mapping, source: str) -> dict:
    values = {k: default for k, (_, default) in _REGISTRY.items()}
    for key, (raw, lineno) in pairs.items():
        parser = _REGISTRY[key][0]
        try:
            values[key] = parser(raw)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: key {key!r}: {exc}")
    return values


def _build_schedule(v: Mapping) -> ScheduleKind:
    kind = v["schedule"]
    if kind == "constant":
        return Constant(k=v["constant.k"])
    if kind == "oscillating":
        return Oscillating(k_base=v["oscillating.k_base"], amp=v["oscillating.amp"],
                           freq=v["oscillating.freq"],
                           warmup_steps=v["oscillating.warmup_steps"])
    if kind == "adaptive_div":
        return AdaptiveDiv(tol_lo=v["adaptive.tol_lo"], tol_hi=v["adaptive.tol_hi"],
                           k0=v["adaptive.k0"], k_min=v["adaptive.k_min"],
                           k_max=v["adaptive.k_max"])
    return SmoothRamp(k0=v["ramp.k0"], k1=v["ramp.k1"], ramp_time=v["ramp.time"])


def config_from_text(text: str, source: str = "<config>") -> RunConfig:
    pairs = parse_pairs(text, source)
    v = _typed_values(pairs, source)
    try:
        grid = GridSpec(v["grid.nx"], v["grid.ny"], v["grid.lx"], v["grid.ly"],
                        BC.PERIODIC if v["grid.bc"] == "periodic" else BC.NO_SLIP)
        schedule = _build_schedule(v)
        solver = SolverParams(picard_tol=v["solver.picard_tol"],
                              picard_max=v["solver.picard_max"],
                              krylov_tol=v["solver.krylov_tol"],
                              krylov_max=v["solver.krylov_max"],
                              picard_damping=v["solver.picard_damping"])
        acoustic = AcousticLab(eps0=v["acoustic.eps0"], growth=v["acoustic.growth"],
                               k=v["acoustic.k"], steps=v["acoustic.steps"],
                               mode=v["acoustic.mode"])
        if v["acoustic.eps0"] <= 0 or v["acoustic.k"] <= 0 or v["acoustic.steps"] < 1:
            raise ValueError("acoustic.eps0 and acoustic.k must be positive, "
                             "acoustic.steps at least 1")
        if v["acoustic.mode"] < 1:
            raise ValueError("acoustic.mode must be a positive mode number")
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}")

    if v["t_final"] <= 0:
        raise ConfigError(f"{source}: t_final must be positive, got {v['t_final']}")
    if v["nu"] < 0:
        raise ConfigError(f"{source}: nu must be nonnegative, got {v['nu']}")
    if v["snapshot_every"] < 0:
        raise ConfigError(f"{source}: snapshot_every must be >= 0")
    if v["validate.steps"] < 2:
        raise ConfigError(f"{source}: validate.steps must be at least 2")
    if v["validate.beta"] <= 0:
        raise ConfigError(f"{source}: validate.beta must be positive")
    if any(k <= 0 for k in v["convergence.k_list"]):
        raise ConfigError(f"{source}: convergence.k_list entries must be positive")
    if v["init"] == "exact" and not v["forcing"].startswith("manufactured"):
        raise ConfigError(f"{source}: init = exact needs a manufactured forcing "
                          "to supply the exact fields")
    if v["forcing"].startswith("manufactured") and v["grid.bc"] != "noslip":
        # the manufactured pressures are not periodic, so only the walled
        # domain admits them
        raise ConfigError(f"{source}: manufactured forcing requires grid.bc = noslip")

    return RunConfig(
        grid=grid,
        scheme=v["scheme"],
        form=NonlinearityForm(v["form"]),
        nu=v["nu"],
        t_final=v["t_final"],
        schedule=schedule,
        solver=solver,
        forcing=v["forcing"],
        init=v["init"],
        init_seed=v["init.seed"],
        init_amplitude=v["init.amplitude"],
        snapshot_every=v["snapshot_every"],
        convergence_k=v["convergence.k_list"],
        acoustic=acoustic,
        validate_steps=v["validate.steps"],
        validate_beta=v["validate.beta"],
    )


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    return config_from_text(text, source=str(path))
