"""Scenario execution, parameter sweeps and engine comparisons.

Every report carries the closed-form reference next to the simulated
numbers.  ``formula_kind`` says how to read it: ``exact`` (the simulation
should reproduce it to rounding), ``closed_form`` (small-error expansion),
``bound`` (an inequality the simulation should respect) or ``none``.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from echomem import oracle, quantum, rng
from echomem.config import ScenarioConfig, SweepSpec, point_config
from echomem.ensemble import (
    Ensemble,
    angles_from_matched,
    direction_at_angle,
    draw_detunings,
    sample_ensemble,
)
from echomem.errors import (
    AtomRotation,
    GlobalOverRotation,
    Ideal,
    realize_initial_state,
    realize_rotations,
)
from echomem.exceptions import DivergentRatioError, ValidationError
from echomem.semiclassical import (
    PulseTimeline,
    angular_pattern,
    bang_bang_closed_form,
    incoherent_background,
    random_directions,
    run_timeline,
)

EXACT_TOL = 1e-10
ZERO_TOL = 1e-12


@dataclass
class SimulationReport:
    engine: str
    atom_count: int
    echo: float
    noise: float
    nsr: float
    efficiency: float
    formula_echo: float
    formula_noise: float
    formula_nsr: float
    formula_kind: str
    abs_dev: float
    rel_dev: float
    seed: int
    trials: int
    wall_ms: float = 0.0
    sectors: dict | None = None

    def to_dict(self, timing: bool = False) -> dict:
        out = asdict(self)
        if not timing:
            out["wall_ms"] = None
        return out


def _ratio(noise: float, echo: float) -> float:
    if echo > 0:
        return noise / echo
    return 0.0 if noise == 0 else float("inf")


def readout_direction(cfg: ScenarioConfig):
    if cfg.direction_angle == 0.0:
        return None
    return direction_at_angle(cfg.wave_vectors, cfg.direction_angle, cfg.direction_azimuth)


def build_timeline(cfg: ScenarioConfig) -> PulseTimeline:
    t = cfg.timeline
    if t.kind == "cpmg":
        return PulseTimeline.cpmg(t.m, t.spacing, cfg.pulse_error)
    return PulseTimeline.single_echo(t.tau1, t.tau2, cfg.pulse_error)


def _single_pulse_forms(model, n: int) -> tuple:
    if isinstance(model, Ideal):
        return float(n), 0.0, "exact"
    if isinstance(model, GlobalOverRotation):
        c2, s2 = np.cos(model.epsilon / 2) ** 2, np.sin(model.epsilon / 2) ** 2
        nz2 = model.axis[2] ** 2
        return n * (c2 + s2 * nz2) ** 2, n * s2 * (1 - nz2), "exact"
    eps = model.nominal_max
    return n * quantum.echo_efficiency_bound(eps), n * (eps / 2) ** 2, "bound"


def formulas(cfg: ScenarioConfig) -> tuple:
    """``(echo, noise, nsr, kind)`` reference values for ``cfg``."""
    n = cfg.ensemble.atom_count
    model = cfg.pulse_error
    eps = getattr(model, "nominal_max", 0.0)
    defects = cfg.pumping_defect.defect_count
    if cfg.engine == "semiclassical" and cfg.timeline.kind == "cpmg":
        form = bang_bang_closed_form(cfg.timeline.m, eps)
        kind = "exact" if eps == 0 and cfg.timeline.m == 0 else "closed_form"
        return n * form.efficiency, n * form.noise_per_atom, form.nsr, kind
    if defects == 0:
        echo, noise, kind = _single_pulse_forms(model, n)
        if cfg.engine != "semiclassical" and kind == "exact" and eps > 0:
            kind = "closed_form"  # the double-excitation sector adds O(eps^4)
        return echo, noise, _ratio(noise, echo), kind
    echo = (n - defects) ** 2 / n * quantum.echo_efficiency_bound(eps)
    nsr = quantum.pumping_noise_ratio_bound(n, defects, eps)
    return echo, nsr * echo, nsr, "exact" if eps == 0 else "bound"


def _trial_detunings(cfg: ScenarioConfig, ens: Ensemble, trial: int):
    return ens.detunings if trial == 0 else draw_detunings(cfg.ensemble, trial)


def _collective_run(cfg: ScenarioConfig, ens: Ensemble, threads: int, engine: str, mode: str):
    rot = realize_rotations(cfg.pulse_error, ens, 0)
    ideal = AtomRotation.uniform(ens.atom_count, 0.0)
    excited = realize_initial_state(cfg.pumping_defect, ens.atom_count)
    direction = readout_direction(cfg)
    tau = cfg.timeline.tau1
    acc = np.zeros(4)
    ref = 0.0
    for trial in range(cfg.trials):
        e = ens.with_detunings(_trial_detunings(cfg, ens, trial))
        if engine == "oracle":
            norms = oracle.component_norms(e, cfg.wave_vectors, rot, tau, excited, direction)
            ref += oracle.component_norms(e, cfg.wave_vectors, ideal, tau, (), direction).echo_norm
        else:
            norms = quantum.quantum_norms(e, cfg.wave_vectors, rot, tau, excited, direction, mode, threads)
            ref += quantum.quantum_norms(e, cfg.wave_vectors, ideal, tau, (), direction, mode,
                                         threads).echo_norm
        acc += norms.as_array()
    acc /= cfg.trials
    ref /= cfg.trials
    norms = quantum.ComponentNorms(*acc, mode="oracle" if engine == "oracle" else mode)
    return norms, ref


def run_scenario(cfg: ScenarioConfig, threads: int = 1) -> SimulationReport:
    """Run one scenario with its configured engine."""
    start = time.perf_counter()
    ens = sample_ensemble(cfg.ensemble)
    sectors = None
    if cfg.engine == "semiclassical":
        try:
            res = run_timeline(ens, build_timeline(cfg), cfg.wave_vectors, readout_direction(cfg),
                               cfg.trials, threads)
            echo, noise, nsr, eff = (res.echo_intensity, res.noise_intensity,
                                     res.noise_to_signal, res.efficiency_factor)
        except DivergentRatioError:
            echo, noise, nsr, eff = 0.0, float("nan"), float("inf"), 0.0
    else:
        norms, ref = _collective_run(cfg, ens, threads, cfg.engine, cfg.quantum_mode)
        echo, noise = norms.echo_norm, norms.noise_norm
        nsr, eff = _ratio(noise, echo), (echo / ref if ref > 0 else 0.0)
        sectors = {
            "echo_norm": norms.echo_norm,
            "single_exc_norm": norms.single_exc_norm,
            "double_exc_norm": norms.double_exc_norm,
            "pumping_norm": norms.pumping_norm,
            "mode": norms.mode,
        }
    f_echo, f_noise, f_nsr, kind = formulas(cfg)
    f_echo, f_noise, f_nsr = float(f_echo), float(f_noise), float(f_nsr)
    echo, noise, nsr, eff = float(echo), float(noise), float(nsr), float(eff)
    abs_dev = abs(nsr - f_nsr)
    rel_dev = abs_dev / abs(f_nsr) if f_nsr else abs_dev
    wall = (time.perf_counter() - start) * 1e3
    return SimulationReport(cfg.engine, cfg.ensemble.atom_count, echo, noise, nsr, eff,
                            f_echo, f_noise, f_nsr, kind, abs_dev, rel_dev, cfg.seed,
                            cfg.trials, wall, sectors)


SWEEP_COLUMNS = ["param", "value", "engine", "echo", "noise", "nsr", "efficiency",
                 "formula_echo", "formula_noise", "formula_nsr", "abs_dev", "rel_dev",
                 "seed", "wall_ms"]


@dataclass
class SweepResult:
    parameter: str
    rows: list
    failures: list = field(default_factory=list)


def sweep_row(parameter: str, value, report: SimulationReport, timing: bool = False) -> dict:
    row = {"param": parameter, "value": value}
    d = report.to_dict(timing)
    for col in SWEEP_COLUMNS[2:]:
        row[col] = d[col]
    return row


def run_sweep(sweep: SweepSpec, threads: int = 1, timing: bool = False) -> SweepResult:
    """Run every sweep point; failures are recorded and the rest continue.

    Points run concurrently on up to ``threads`` workers and are collected in
    point order, so the table is independent of the worker count.
    """

    def one(i):
        try:
            rep = run_scenario(point_config(sweep, i), threads=1)
            return sweep_row(sweep.parameter, sweep.values[i], rep, timing), None
        except (ValidationError, ArithmeticError) as exc:
            info = exc.to_dict() if isinstance(exc, ValidationError) else {"error": type(exc).__name__,
                                                                           "message": str(exc)}
            return None, {"index": i, "value": sweep.values[i], **info}

    idx = range(len(sweep.values))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, idx))
    else:
        results = [one(i) for i in idx]
    rows = [r for r, _ in results if r is not None]
    failures = [f for _, f in results if f is not None]
    return SweepResult(sweep.parameter, rows, failures)


# ---------------------------------------------------------------- comparisons

ENGINE_LABELS = ("semiclassical", "quantum", "quantum_avg", "oracle", "oracle_avg")
REALIZED = {"quantum", "oracle"}


@dataclass
class EngineComparison:
    engines: dict
    pairs: list
    passed: bool

    def to_dict(self) -> dict:
        return {"engines": self.engines, "pairs": self.pairs, "passed": self.passed}


def _engine_values(label: str, cfg: ScenarioConfig, ens: Ensemble, threads: int):
    """``(echo, noise)`` or a skip reason string."""
    t = cfg.timeline
    if label != "semiclassical" and (t.kind != "single_echo" or t.tau1 != t.tau2):
        return "collective engines need a single echo with tau1 == tau2"
    if label == "semiclassical":
        if cfg.pumping_defect.defect_count:
            return "semiclassical engine has no pumping defects"
        tl = build_timeline(cfg)
        res = run_timeline(ens, tl, cfg.wave_vectors, readout_direction(cfg), threads=threads)
        return res.echo_intensity, res.noise_intensity
    if label.startswith("oracle") and ens.atom_count > oracle.MAX_ATOMS:
        return f"oracle cap exceeded ({ens.atom_count} > {oracle.MAX_ATOMS})"
    rot = realize_rotations(cfg.pulse_error, ens, 0)
    excited = realize_initial_state(cfg.pumping_defect, ens.atom_count)
    direction = readout_direction(cfg)
    if label in ("quantum", "quantum_avg"):
        mode = "exact" if label == "quantum" else "random_phase"
        n = quantum.quantum_norms(ens, cfg.wave_vectors, rot, t.tau1, excited, direction, mode, threads)
        return n.echo_norm, n.noise_norm
    n = oracle.component_norms(ens, cfg.wave_vectors, rot, t.tau1, excited, direction)
    if label == "oracle":
        return n.echo_norm, n.noise_norm
    total = oracle.phase_averaged_total_norm(ens, cfg.wave_vectors, rot, excited, direction)
    return n.echo_norm, total - n.echo_norm


def compare_engines(cfg: ScenarioConfig, engines=ENGINE_LABELS, threads: int = 1) -> EngineComparison:
    """Pairwise deviations between engines on one realized ensemble.

    Engines fall in two classes: ``quantum`` and ``oracle`` describe the drawn
    detunings, the others the average over dephasing phases.  Only pairs in
    the same class are compared; the deviation is the largest echo or noise
    difference divided by ``N`` (the ideal echo).  Semiclassical pairs are
    held to ``eps**4`` (the neglected double-excitation order), all others to
    ``1e-10``.
    """
    for e in engines:
        if e not in ENGINE_LABELS:
            raise ValidationError(f"must be among {ENGINE_LABELS}", "engines")
    ens = sample_ensemble(cfg.ensemble)
    values = {e: _engine_values(e, cfg, ens, threads) for e in engines}
    table = {
        e: ({"status": "skip", "reason": v} if isinstance(v, str) else {"echo": v[0], "noise": v[1]})
        for e, v in values.items()
    }
    eps = getattr(cfg.pulse_error, "nominal_max", 0.0)
    pairs = []
    for i, a in enumerate(engines):
        for b in engines[i + 1:]:
            entry = {"a": a, "b": b}
            if isinstance(values[a], str) or isinstance(values[b], str):
                entry.update(status="skip", reason="engine unavailable")
            elif (a in REALIZED) != (b in REALIZED):
                entry.update(status="skip", reason="realized vs phase-averaged")
            else:
                dev = max(abs(values[a][0] - values[b][0]), abs(values[a][1] - values[b][1]))
                dev /= ens.atom_count
                tol = max(eps**4, ZERO_TOL) if "semiclassical" in (a, b) else EXACT_TOL
                entry.update(deviation=dev, tolerance=tol, status="pass" if dev <= tol else "fail")
            pairs.append(entry)
    passed = all(p["status"] != "fail" for p in pairs)
    return EngineComparison(table, pairs, passed)


# ------------------------------------------------------------------- angular

@dataclass
class AngularResult:
    rows: list
    peak: float
    background: float
    mean_off_peak: float
    enhancement: float
    enhancement_sem: float


ANGULAR_COLUMNS = ["theta_deg", "phi_deg", "intensity", "intensity_over_background"]


def run_angular(cfg: ScenarioConfig, threads: int = 1) -> AngularResult:
    """Echo intensity versus readout direction.

    ``sphere`` mode samples isotropic directions outside a cone around the
    matched direction (the first row is the matched direction itself);
    ``arc`` mode scans a great circle through it.
    """
    ens = sample_ensemble(cfg.ensemble)
    wv = cfg.wave_vectors
    tl = build_timeline(cfg)
    spec = cfg.angular
    peak_dir = wv.matched_direction
    if spec.mode == "sphere":
        off = random_directions(spec.count, cfg.seed, peak_dir, np.radians(spec.exclude_deg))
        dirs = np.vstack([peak_dir, off])
    else:
        thetas = np.radians(np.linspace(-spec.theta_max_deg, spec.theta_max_deg, spec.points))
        dirs = np.array([direction_at_angle(wv, th, cfg.direction_azimuth) for th in thetas])
    intensity = angular_pattern(ens, wv, dirs, tl, threads)
    background = incoherent_background(ens, tl, threads)
    theta, phi = angles_from_matched(wv, dirs)
    rows = [
        {"theta_deg": float(np.degrees(t)), "phi_deg": float(np.degrees(p)),
         "intensity": float(i), "intensity_over_background": float(i / background) if background > 0 else 0.0}
        for t, p, i in zip(theta, phi, intensity)
    ]
    peak = float(angular_pattern(ens, wv, peak_dir, tl, threads)[0])
    if spec.mode == "sphere":
        off_vals = intensity[1:]
    else:
        off_vals = intensity[np.degrees(theta) > spec.exclude_deg] if spec.exclude_deg < spec.theta_max_deg \
            else intensity[1:]
    mean_off = float(np.mean(off_vals))
    sem = float(np.std(off_vals, ddof=1) / np.sqrt(len(off_vals)))
    ratio = peak / mean_off if mean_off > 0 else float("inf")
    return AngularResult(rows, peak, background, mean_off, ratio,
                         ratio * sem / mean_off if mean_off > 0 else float("inf"))


# -------------------------------------------------------------- oracle check

def sector_deviation(ref: quantum.ComponentNorms, other: quantum.ComponentNorms) -> float:
    a, b = ref.as_array(), other.as_array()
    scale = np.maximum(np.abs(a), 1e-12 * ref.total)
    return float(np.max(np.abs(a - b) / scale))


@dataclass(frozen=True, eq=False)
class OracleInstance:
    ensemble: Ensemble
    rotations: AtomRotation
    tau: float
    excited: frozenset


def random_oracle_instance(seed: int, index: int, max_atoms: int = 10,
                           gamma_tau=(0.0, 1.0, 10.0), eps_max: float = 0.3,
                           with_defects: bool = True) -> OracleInstance:
    """Random small instance: positions, unit-width Gaussian detunings, per-atom errors."""
    gen = rng.substream(seed, rng.INSTANCES, index)
    n = int(gen.integers(2, max_atoms + 1))
    positions = gen.random((n, 3)) * 10.0
    detunings = gen.standard_normal(n)
    axes = gen.standard_normal((n, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    rot = AtomRotation(gen.uniform(0.0, eps_max, n), axes)
    tau = float(gen.choice(gamma_tau))
    k = int(gen.integers(0, n // 2 + 1)) if with_defects else 0
    excited = frozenset(int(i) for i in gen.choice(n, size=k, replace=False))
    return OracleInstance(Ensemble(positions, detunings), rot, tau, excited)


def oracle_check(wv, instances: int = 100, max_atoms: int = 10, seed: int = 0,
                 tol: float = EXACT_TOL) -> dict:
    """Quantum engine against the dense oracle on random instances.

    Deviations are per sector and relative to that sector, with a floor of
    ``1e-12`` times the total norm for (near-)empty sectors.
    """
    if max_atoms > oracle.MAX_ATOMS or max_atoms < 2:
        raise ValidationError(f"must lie in [2, {oracle.MAX_ATOMS}]", "oracle_check.max_atoms")
    if instances < 1:
        raise ValidationError("must be at least 1", "oracle_check.instances")
    worst = 0.0
    failures = []
    for i in range(instances):
        inst = random_oracle_instance(seed, i, max_atoms)
        o = oracle.component_norms(inst.ensemble, wv, inst.rotations, inst.tau, inst.excited)
        q = quantum.quantum_norms(inst.ensemble, wv, inst.rotations, inst.tau, inst.excited)
        dev = sector_deviation(o, q)
        worst = max(worst, dev)
        if dev > tol:
            failures.append({"index": i, "atoms": inst.ensemble.atom_count, "deviation": dev})
    return {"instances": instances, "max_atoms": max_atoms, "seed": seed, "tolerance": tol,
            "worst_relative_deviation": worst, "failures": failures, "passed": not failures}
