"""Scenario and sweep configuration loaded from TOML.

Schema (every section optional, defaults shown)::

    engine = "semiclassical"     # semiclassical | quantum | oracle
    trials = 1                   # detuning redraws averaged per point
    seed = 0                     # root seed for every random substream

    [ensemble]
    atom_count = 1000
    box_dimensions = [100.0, 100.0, 100.0]
    detuning_distribution = "gaussian"
    width = 1.0

    [wave_vectors]
    stokes_angle = 0.05          # or explicit k_write / k_stokes / k_read
    wavelength = 1.0
    direction_angle = 0.0        # readout tilt from the matched direction, rad
    direction_azimuth = 0.0

    [timeline]
    kind = "single_echo"         # single_echo | cpmg
    tau1 = 20.0
    tau2 = 20.0                  # defaults to tau1
    m = 1
    spacing = 20.0

    [pulse_error]
    model = "global"             # ideal | global | gradient | random
    epsilon = 0.0
    axis = [1.0, 0.0, 0.0]
    # gradient: epsilon_max, gradient_axis; random: epsilon_scale, axis_mode,
    # independent_per_pulse

    [pumping_defect]
    defect_count = 0             # or defect_fraction
    selection = "first"

    [quantum]
    mode = "exact"               # exact | pairwise | random_phase

    [angular]
    mode = "sphere"              # sphere | arc
    count = 400
    exclude_deg = 20.0
    theta_max_deg = 2.0          # arc mode
    points = 41

    [sweep]
    parameter = "epsilon"        # epsilon | m | defect_fraction | tau | direction_angle
    values = [0.0, 0.01]
    overrides = []               # optional per-value tables merged into the scenario

Validation failures raise :class:`ValidationError` with the dotted key path.
"""

from __future__ import annotations

import copy
import sys
from dataclasses import dataclass, field
from pathlib import Path

from echomem.ensemble import EnsembleSpec, WaveVectorSet
from echomem.errors import (
    GlobalOverRotation,
    GradientAcrossSample,
    Ideal,
    PumpingDefect,
    RandomPerAtom,
)
from echomem.exceptions import OracleCapError, ValidationError
from echomem.oracle import MAX_ATOMS
from echomem.quantum import MODES

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ENGINES = ("semiclassical", "quantum", "oracle")
SWEEP_PARAMETERS = ("epsilon", "m", "defect_fraction", "tau", "direction_angle")
TIMELINE_KINDS = ("single_echo", "cpmg")
ERROR_MODELS = ("ideal", "global", "gradient", "random")

_SECTIONS = {
    "ensemble": {"atom_count", "box_dimensions", "detuning_distribution", "width"},
    "wave_vectors": {"stokes_angle", "wavelength", "k_write", "k_stokes", "k_read",
                     "direction_angle", "direction_azimuth"},
    "timeline": {"kind", "tau1", "tau2", "m", "spacing"},
    "pulse_error": {"model", "epsilon", "axis", "epsilon_max", "gradient_axis",
                    "epsilon_scale", "axis_mode", "independent_per_pulse"},
    "pumping_defect": {"defect_count", "defect_fraction", "selection"},
    "quantum": {"mode"},
    "angular": {"mode", "count", "exclude_deg", "theta_max_deg", "points"},
    "sweep": {"parameter", "values", "overrides"},
    "oracle_check": {"instances", "max_atoms"},
}
_TOP = {"engine", "trials", "seed", *_SECTIONS}


@dataclass(frozen=True)
class TimelineSpec:
    kind: str = "single_echo"
    tau1: float = 20.0
    tau2: float = 20.0
    m: int = 1
    spacing: float = 20.0


@dataclass(frozen=True)
class AngularSpec:
    mode: str = "sphere"
    count: int = 400
    exclude_deg: float = 20.0
    theta_max_deg: float = 2.0
    points: int = 41


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    ensemble: EnsembleSpec
    wave_vectors: WaveVectorSet
    timeline: TimelineSpec
    pulse_error: object
    pumping_defect: PumpingDefect
    engine: str = "semiclassical"
    trials: int = 1
    seed: int = 0
    direction_angle: float = 0.0
    direction_azimuth: float = 0.0
    quantum_mode: str = "exact"
    angular: AngularSpec = field(default_factory=AngularSpec)
    raw: dict = field(default_factory=dict, repr=False)


@dataclass(frozen=True, eq=False)
class SweepSpec:
    parameter: str
    values: tuple
    base: dict
    overrides: tuple = ()


def _get(section: dict, key: str, path: str, kind, default):
    if key not in section:
        return default
    value = section[key]
    try:
        if kind is int:
            if isinstance(value, bool) or int(value) != value:
                raise TypeError
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if kind is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind is str:
            if not isinstance(value, str):
                raise TypeError
            return value
        if kind == "vec3":
            vec = tuple(float(v) for v in value)
            if len(vec) != 3:
                raise TypeError
            return vec
    except (TypeError, ValueError):
        where = f"{path}.{key}" if path else key
        raise ValidationError(f"expected {getattr(kind, '__name__', kind)}", where) from None
    raise AssertionError(kind)


def _check_keys(raw: dict) -> None:
    for key, value in raw.items():
        if key not in _TOP:
            raise ValidationError("unknown key", key)
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ValidationError("expected a table", key)
            for sub in value:
                if sub not in _SECTIONS[key]:
                    raise ValidationError("unknown key", f"{key}.{sub}")


def _rewrap(exc: ValidationError, section: str) -> ValidationError:
    return type(exc)(exc.message, f"{section}.{exc.field}" if exc.field else section)


def _ensemble(sec: dict, seed: int) -> EnsembleSpec:
    try:
        return EnsembleSpec(
            atom_count=_get(sec, "atom_count", "ensemble", int, 1000),
            box_dimensions=_get(sec, "box_dimensions", "ensemble", "vec3", (100.0, 100.0, 100.0)),
            detuning_distribution=_get(sec, "detuning_distribution", "ensemble", str, "gaussian"),
            width=_get(sec, "width", "ensemble", float, 1.0),
            seed=seed,
        )
    except ValidationError as exc:
        if exc.field and exc.field.startswith("ensemble."):
            raise
        raise _rewrap(exc, "ensemble") from None


def _wave_vectors(sec: dict) -> WaveVectorSet:
    explicit = [k for k in ("k_write", "k_stokes", "k_read") if k in sec]
    try:
        if explicit:
            if len(explicit) != 3:
                raise ValidationError("give all of k_write, k_stokes, k_read", "k_write")
            return WaveVectorSet(*(_get(sec, k, "wave_vectors", "vec3", None)
                                   for k in ("k_write", "k_stokes", "k_read")))
        wavelength = _get(sec, "wavelength", "wave_vectors", float, 1.0)
        if not wavelength > 0:
            raise ValidationError("must be positive", "wavelength")
        return WaveVectorSet.counter_propagating(
            _get(sec, "stokes_angle", "wave_vectors", float, 0.05), wavelength)
    except ValidationError as exc:
        if exc.field and exc.field.startswith("wave_vectors."):
            raise
        raise _rewrap(exc, "wave_vectors") from None


def _timeline(sec: dict) -> TimelineSpec:
    p = "timeline"
    kind = _get(sec, "kind", p, str, "single_echo")
    if kind not in TIMELINE_KINDS:
        raise ValidationError(f"must be one of {TIMELINE_KINDS}", f"{p}.kind")
    tau1 = _get(sec, "tau1", p, float, 20.0)
    spec = TimelineSpec(kind, tau1, _get(sec, "tau2", p, float, tau1),
                        _get(sec, "m", p, int, 1), _get(sec, "spacing", p, float, 20.0))
    for name in ("tau1", "tau2", "spacing"):
        if getattr(spec, name) < 0:
            raise ValidationError("must be non-negative", f"{p}.{name}")
    if spec.m < 0:
        raise ValidationError("must be non-negative", f"{p}.m")
    return spec


def _pulse_error(sec: dict, seed: int):
    p = "pulse_error"
    model = _get(sec, "model", p, str, "global")
    try:
        if model == "ideal":
            return Ideal()
        if model == "global":
            return GlobalOverRotation(_get(sec, "epsilon", p, float, 0.0),
                                      _get(sec, "axis", p, "vec3", (1.0, 0.0, 0.0)))
        if model == "gradient":
            return GradientAcrossSample(
                _get(sec, "epsilon_max", p, float, _get(sec, "epsilon", p, float, 0.0)),
                _get(sec, "gradient_axis", p, "vec3", (0.0, 0.0, 1.0)),
                _get(sec, "axis", p, "vec3", (1.0, 0.0, 0.0)))
        if model == "random":
            return RandomPerAtom(
                _get(sec, "epsilon_scale", p, float, _get(sec, "epsilon", p, float, 0.0)),
                _get(sec, "axis_mode", p, str, "fixed"),
                _get(sec, "axis", p, "vec3", (1.0, 0.0, 0.0)),
                _get(sec, "independent_per_pulse", p, bool, False),
                seed)
    except ValidationError as exc:
        if exc.field and exc.field.startswith(p + "."):
            raise
        raise _rewrap(exc, p) from None
    raise ValidationError(f"must be one of {ERROR_MODELS}", f"{p}.model")


def _pumping(sec: dict, n_atoms: int, seed: int) -> PumpingDefect:
    p = "pumping_defect"
    if "defect_count" in sec and "defect_fraction" in sec:
        raise ValidationError("give defect_count or defect_fraction, not both", f"{p}.defect_fraction")
    if "defect_fraction" in sec:
        frac = _get(sec, "defect_fraction", p, float, 0.0)
        if not 0 <= frac <= 1:
            raise ValidationError("must lie in [0, 1]", f"{p}.defect_fraction")
        count = int(round(frac * n_atoms))
    else:
        count = _get(sec, "defect_count", p, int, 0)
    if not 0 <= count <= n_atoms:
        raise ValidationError(f"must lie in [0, {n_atoms}]", f"{p}.defect_count")
    try:
        return PumpingDefect(count, _get(sec, "selection", p, str, "first"), seed)
    except ValidationError as exc:
        raise _rewrap(exc, p) from None


def _angular(sec: dict) -> AngularSpec:
    p = "angular"
    spec = AngularSpec(
        _get(sec, "mode", p, str, "sphere"),
        _get(sec, "count", p, int, 400),
        _get(sec, "exclude_deg", p, float, 20.0),
        _get(sec, "theta_max_deg", p, float, 2.0),
        _get(sec, "points", p, int, 41),
    )
    if spec.mode not in ("sphere", "arc"):
        raise ValidationError("must be 'sphere' or 'arc'", f"{p}.mode")
    if spec.count < 2 or spec.points < 2:
        raise ValidationError("need at least two directions", f"{p}.count" if spec.count < 2 else f"{p}.points")
    if not 0 <= spec.exclude_deg < 180:
        raise ValidationError("must lie in [0, 180)", f"{p}.exclude_deg")
    return spec


def scenario_from_dict(raw: dict) -> ScenarioConfig:
    """Validate a raw mapping (as parsed from TOML) into a :class:`ScenarioConfig`."""
    _check_keys(raw)
    seed = _get(raw, "seed", "", int, 0) if "seed" in raw else 0
    if not 0 <= seed < 2**64:
        raise ValidationError("must be an unsigned 64-bit integer", "seed")
    engine = _get(raw, "engine", "", str, "semiclassical") if "engine" in raw else "semiclassical"
    if engine not in ENGINES:
        raise ValidationError(f"must be one of {ENGINES}", "engine")
    trials = raw.get("trials", 1)
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 1:
        raise ValidationError("must be an integer >= 1", "trials")

    ens = _ensemble(raw.get("ensemble", {}), seed)
    if engine == "oracle" and ens.atom_count > MAX_ATOMS:
        raise OracleCapError(f"oracle cap exceeded: {ens.atom_count} atoms > {MAX_ATOMS}",
                             "ensemble.atom_count")
    wv_sec = raw.get("wave_vectors", {})
    timeline = _timeline(raw.get("timeline", {}))
    pumping = _pumping(raw.get("pumping_defect", {}), ens.atom_count, seed)
    if engine != "semiclassical":
        if timeline.kind != "single_echo":
            raise ValidationError(f"engine '{engine}' supports only single_echo", "timeline.kind")
        if timeline.tau1 != timeline.tau2:
            raise ValidationError(f"engine '{engine}' needs tau2 == tau1", "timeline.tau2")
    elif pumping.defect_count:
        raise ValidationError("pumping defects need the quantum or oracle engine",
                              "pumping_defect.defect_count")
    mode = _get(raw.get("quantum", {}), "mode", "quantum", str, "exact")
    if mode not in MODES:
        raise ValidationError(f"must be one of {MODES}", "quantum.mode")
    return ScenarioConfig(
        ensemble=ens,
        wave_vectors=_wave_vectors(wv_sec),
        timeline=timeline,
        pulse_error=_pulse_error(raw.get("pulse_error", {}), seed),
        pumping_defect=pumping,
        engine=engine,
        trials=trials,
        seed=seed,
        direction_angle=_get(wv_sec, "direction_angle", "wave_vectors", float, 0.0),
        direction_azimuth=_get(wv_sec, "direction_azimuth", "wave_vectors", float, 0.0),
        quantum_mode=mode,
        angular=_angular(raw.get("angular", {})),
        raw=copy.deepcopy(raw),
    )


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def apply_parameter(raw: dict, parameter: str, value) -> dict:
    """Raw config with one sweep parameter set."""
    if parameter == "epsilon":
        model = raw.get("pulse_error", {}).get("model", "global")
        key = {"gradient": "epsilon_max", "random": "epsilon_scale"}.get(model, "epsilon")
        patch = {"pulse_error": {key: value}}
    elif parameter == "m":
        patch = {"timeline": {"kind": "cpmg", "m": value}}
    elif parameter == "defect_fraction":
        patch = {"pumping_defect": {"defect_fraction": value}}
    elif parameter == "tau":
        kind = raw.get("timeline", {}).get("kind", "single_echo")
        patch = {"timeline": {"spacing": value} if kind == "cpmg" else {"tau1": value, "tau2": value}}
    elif parameter == "direction_angle":
        patch = {"wave_vectors": {"direction_angle": value}}
    else:
        raise ValidationError(f"must be one of {SWEEP_PARAMETERS}", "sweep.parameter")
    merged = deep_merge(raw, patch)
    if parameter == "defect_fraction":
        merged["pumping_defect"].pop("defect_count", None)
    return merged


def sweep_from_dict(raw: dict) -> SweepSpec:
    _check_keys(raw)
    sec = raw.get("sweep")
    if sec is None:
        raise ValidationError("missing [sweep] table", "sweep")
    parameter = _get(sec, "parameter", "sweep", str, None)
    if parameter not in SWEEP_PARAMETERS:
        raise ValidationError(f"must be one of {SWEEP_PARAMETERS}", "sweep.parameter")
    values = sec.get("values")
    if not isinstance(values, list) or not values:
        raise ValidationError("must be a non-empty list", "sweep.values")
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValidationError("must be a number", f"sweep.values[{i}]")
        if parameter == "m" and int(v) != v:
            raise ValidationError("m must be an integer", f"sweep.values[{i}]")
    overrides = sec.get("overrides", [])
    if not isinstance(overrides, list) or (overrides and len(overrides) != len(values)):
        raise ValidationError("must be a list with one table per value", "sweep.overrides")
    base = {k: v for k, v in raw.items() if k != "sweep"}
    if parameter == "m":
        values = [int(v) for v in values]
    return SweepSpec(parameter, tuple(values), base, tuple(overrides))


def point_config(sweep: SweepSpec, index: int) -> ScenarioConfig:
    raw = apply_parameter(sweep.base, sweep.parameter, sweep.values[index])
    if sweep.overrides:
        raw = deep_merge(raw, sweep.overrides[index])
    return scenario_from_dict(raw)


def load_toml(path) -> dict:
    try:
        with open(Path(path), "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ValidationError("file not found", "config") from None
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"invalid TOML: {exc}", "config") from None
