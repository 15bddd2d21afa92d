"""Product-state engine: per-atom 2x2 propagators on the spin levels (g, s).

Each atom starts as ``|g> + xi e^{i dk1.X}|s>`` after the write pulse, with
``N xi**2 = 1``.  Free evolution multiplies ``s`` by ``exp(-i Delta t)`` and a
pulse with error ``(eps, n)`` is ``exp(-i pi/2 sigma_x) exp(-i eps/2 sigma.n)``,
i.e. a rotation by ``pi + eps`` when ``n = x``.  After an odd number of pulses
the stored excitation sits in ``g``, after an even number in ``s``; the read
pulse transfers that level to ``e`` with phase ``exp(i k_r.X)``.

The echo comes from the write-phase part of the optical polarization
``<e|psi><psi|other level>`` and the noise is the population that the read
pulse would find in the read level without any write excitation.  Intensities
are in units of the single-atom intensity ``I0 = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from echomem.ensemble import Ensemble, WaveVectorSet, draw_detunings
from echomem import rng
from echomem.errors import GlobalOverRotation, Ideal, realize_rotations
from echomem.exceptions import DivergentRatioError, ValidationError
from echomem.reduction import deterministic_sum

SIGMA = np.array(
    [[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex
)
NEG_I_SIGMA_X = np.array([[0, -1j], [-1j, 0]])  # exp(-i pi/2 sigma_x)


@dataclass(frozen=True)
class AtomAmplitudes:
    amp_g: complex
    amp_s: complex
    amp_e: complex = 0.0

    @classmethod
    def after_write(cls, xi: float, write_phase: complex = 1.0) -> "AtomAmplitudes":
        """Normalized ``sqrt(1-xi^2)|g> + xi e^{i dk1.X}|s>``."""
        if not 0 <= xi <= 1:
            raise ValidationError("must lie in [0, 1]", "xi")
        return cls(np.sqrt(1 - xi**2), xi * write_phase, 0.0)

    @property
    def norm(self) -> float:
        return abs(self.amp_g) ** 2 + abs(self.amp_s) ** 2 + abs(self.amp_e) ** 2


@dataclass(frozen=True)
class PulseTimeline:
    """Free-evolution intervals with pi pulses between them.

    ``pulse_after[i]`` is the index of the interval that precedes pulse ``i``;
    ``models[i]`` is its error model (or an explicit ``AtomRotation``).
    """

    tau_intervals: tuple
    pulse_after: tuple = ()
    models: tuple = ()
    read_at_end: bool = True

    def __post_init__(self):
        object.__setattr__(self, "tau_intervals", tuple(float(t) for t in self.tau_intervals))
        object.__setattr__(self, "pulse_after", tuple(int(p) for p in self.pulse_after))
        object.__setattr__(self, "models", tuple(self.models))
        if any(t < 0 for t in self.tau_intervals):
            raise ValidationError("intervals must be non-negative", "timeline.tau_intervals")
        if len(self.pulse_after) != len(self.models):
            raise ValidationError("one error model per pulse", "timeline.models")
        if list(self.pulse_after) != sorted(self.pulse_after) or any(
            not 0 <= p < len(self.tau_intervals) for p in self.pulse_after
        ):
            raise ValidationError("pulse positions must be sorted interval indices", "timeline.pulse_after")

    @classmethod
    def single_echo(cls, tau1: float, tau2: float, model) -> "PulseTimeline":
        return cls((tau1, tau2), (0,), (model,))

    @classmethod
    def cpmg(cls, m: int, spacing: float, model) -> "PulseTimeline":
        """``m`` pulse pairs: ``spacing/2, pi, spacing, pi, ..., spacing/2``.

        ``m = 0`` is plain free evolution for one ``spacing``.
        """
        if m < 0:
            raise ValidationError("must be non-negative", "m")
        if m == 0:
            return cls((spacing,))
        intervals = (spacing / 2,) + (spacing,) * (2 * m - 1) + (spacing / 2,)
        return cls(intervals, tuple(range(2 * m)), (model,) * (2 * m))

    @property
    def pulse_count(self) -> int:
        return len(self.pulse_after)

    @property
    def total_time(self) -> float:
        return sum(self.tau_intervals)

    @property
    def read_level(self) -> int:
        """0 for ``g`` (odd pulse count), 1 for ``s``."""
        return 1 - self.pulse_count % 2


@dataclass(frozen=True)
class SemiclassicalResult:
    echo_intensity: float
    noise_intensity: float
    noise_to_signal: float
    efficiency_factor: float


def pulse_propagators(epsilon, axis) -> np.ndarray:
    """``(N, 2, 2)`` pulse matrices ``exp(-i pi/2 sx) exp(-i eps/2 sigma.n)``."""
    eps = np.asarray(epsilon, dtype=float)
    axis = np.asarray(axis, dtype=float)
    c, s = np.cos(eps / 2), np.sin(eps / 2)
    n_dot_sigma = np.einsum("ka,abc->kbc", axis, SIGMA)
    err = c[:, None, None] * np.eye(2) - 1j * s[:, None, None] * n_dot_sigma
    return NEG_I_SIGMA_X @ err


def _dephase(u: np.ndarray, detunings: np.ndarray, t: float) -> np.ndarray:
    out = u.copy()
    out[:, 1, :] *= np.exp(-1j * detunings * t)[:, None]
    return out


def evolve_atoms(ensemble: Ensemble, timeline: PulseTimeline, detunings=None) -> np.ndarray:
    """Total spin propagator of every atom, shape ``(N, 2, 2)``."""
    det = ensemble.detunings if detunings is None else np.asarray(detunings, dtype=float)
    u = np.broadcast_to(np.eye(2, dtype=complex), (ensemble.atom_count, 2, 2)).copy()
    pulses = {}
    for i, after in enumerate(timeline.pulse_after):
        pulses.setdefault(after, []).append(i)
    for k, t in enumerate(timeline.tau_intervals):
        u = _dephase(u, det, t)
        for i in pulses.get(k, []):
            rot = realize_rotations(timeline.models[i], ensemble, i)
            u = pulse_propagators(rot.epsilon, rot.axis) @ u
    return u


def evolve_atom(initial: AtomAmplitudes, detuning: float, rotations, timeline: PulseTimeline,
                read_phase: complex = 1.0) -> AtomAmplitudes:
    """Propagate one atom through ``timeline`` and the read pulse.

    ``rotations`` is one ``(epsilon, axis)`` pair per pulse.  The read pulse
    moves the read level to ``e`` and picks up ``read_phase``.
    """
    if len(rotations) != timeline.pulse_count:
        raise ValidationError("one rotation per pulse", "rotations")
    psi = np.array([initial.amp_g, initial.amp_s], dtype=complex)
    pulse_iter = iter(rotations)
    for k, t in enumerate(timeline.tau_intervals):
        psi[1] *= np.exp(-1j * detuning * t)
        for _ in range(timeline.pulse_after.count(k)):
            eps, axis = next(pulse_iter)
            psi = pulse_propagators([eps], [axis])[0] @ psi
    amp_e = initial.amp_e
    if timeline.read_at_end:
        r = timeline.read_level
        amp_e, psi[r] = -1j * read_phase * psi[r], -1j * np.conj(read_phase) * amp_e
    return AtomAmplitudes(complex(psi[0]), complex(psi[1]), complex(amp_e))


def _echo_polarization(u: np.ndarray, read_level: int) -> np.ndarray:
    """Per-atom echo polarization without spatial phases or ``xi``."""
    other = 1 - read_level
    return -1j * u[:, read_level, 1] * np.conj(u[:, other, 0])


def echo_intensity(ensemble: Ensemble, timeline: PulseTimeline, wv: WaveVectorSet,
                   direction=None, detunings=None, threads: int = 1) -> float:
    """``|sum_k P_k exp(-i k_ro.X_k)|**2`` with ``N xi**2 = 1``."""
    u = evolve_atoms(ensemble, timeline, detunings)
    return _echo_from_propagators(u, ensemble, timeline, wv, direction, threads)


def _spatial_phase(ensemble: Ensemble, wv: WaveVectorSet, direction) -> np.ndarray:
    d = wv.matched_direction if direction is None else np.asarray(direction, dtype=float)
    return np.exp(1j * ensemble.positions @ (wv.dk1 + wv.k_read - wv.readout_vector(d)))


def _echo_from_propagators(u, ensemble, timeline, wv, direction, threads) -> float:
    p = _echo_polarization(u, timeline.read_level) * _spatial_phase(ensemble, wv, direction)
    return abs(deterministic_sum(p, threads)) ** 2 / ensemble.atom_count


def noise_intensity(ensemble: Ensemble, timeline: PulseTimeline, detunings=None,
                    threads: int = 1) -> float:
    """Read-level population with no write excitation, summed over atoms."""
    u = evolve_atoms(ensemble, timeline, detunings)
    return deterministic_sum(np.abs(u[:, timeline.read_level, 0]) ** 2, threads)


def noise_to_signal(epsilon: float) -> float:
    """``sin^2(eps/2) / cos^4(eps/2)`` for a uniform error."""
    eps = abs(float(epsilon))
    if eps > np.pi:
        raise ValidationError("must lie in [0, pi]", "epsilon")
    c = np.cos(eps / 2)
    if eps == np.pi or c == 0.0:
        raise DivergentRatioError("echo vanishes at epsilon = pi")
    return np.sin(eps / 2) ** 2 / c**4


def _ratio(noise: float, echo: float) -> float:
    if echo <= 0.0:
        if noise == 0.0:
            return 0.0
        raise DivergentRatioError("no echo intensity")
    return noise / echo


def _ideal_timeline(timeline: PulseTimeline) -> PulseTimeline:
    return PulseTimeline(timeline.tau_intervals, timeline.pulse_after,
                         (Ideal(),) * timeline.pulse_count, timeline.read_at_end)


def run_timeline(ensemble: Ensemble, timeline: PulseTimeline, wv: WaveVectorSet | None = None,
                 direction=None, trials: int = 1, threads: int = 1) -> SemiclassicalResult:
    """Echo and noise averaged over ``trials`` detuning realizations.

    Trial 0 uses the ensemble's own detunings; later trials redraw them from
    the ensemble spec with independent substreams.  The efficiency factor is
    the mean echo over the mean ideal (error-free) echo on the same draws.
    """
    if trials < 1:
        raise ValidationError("must be at least 1", "trials")
    if trials > 1 and ensemble.spec is None:
        raise ValidationError("redrawing detunings needs an ensemble spec", "trials")
    wv = WaveVectorSet.counter_propagating() if wv is None else wv
    ideal = _ideal_timeline(timeline)
    echo = noise = ref = 0.0
    for trial in range(trials):
        det = ensemble.detunings if trial == 0 else draw_detunings(ensemble.spec, trial)
        u = evolve_atoms(ensemble, timeline, det)
        echo += _echo_from_propagators(u, ensemble, timeline, wv, direction, threads)
        noise += deterministic_sum(np.abs(u[:, timeline.read_level, 0]) ** 2, threads)
        u0 = evolve_atoms(ensemble, ideal, det)
        ref += _echo_from_propagators(u0, ensemble, ideal, wv, direction, threads)
    echo, noise, ref = echo / trials, noise / trials, ref / trials
    eff = echo / ref if ref > 0 else 0.0
    return SemiclassicalResult(echo, noise, _ratio(noise, echo), eff)


def single_echo_run(ensemble: Ensemble, model, tau1: float, tau2: float | None = None,
                    wv: WaveVectorSet | None = None, direction=None,
                    threads: int = 1) -> SemiclassicalResult:
    tau2 = tau1 if tau2 is None else tau2
    return run_timeline(ensemble, PulseTimeline.single_echo(tau1, tau2, model), wv, direction,
                        threads=threads)


def multi_pulse_run(ensemble: Ensemble, model, m: int, spacing: float,
                    wv: WaveVectorSet | None = None, trials: int = 1,
                    threads: int = 1) -> SemiclassicalResult:
    """Full ``2m``-pulse product-state simulation on a CPMG timeline."""
    return run_timeline(ensemble, PulseTimeline.cpmg(m, spacing, model), wv, None, trials, threads)


@dataclass(frozen=True)
class BangBangForm:
    efficiency: float
    noise_per_atom: float
    nsr: float


def bang_bang_closed_form(m: int, epsilon: float) -> BangBangForm:
    """Small-error forms after ``m`` pulse pairs.

    efficiency ``1 - (2m^2 - m + 1) eps^2/2``, noise per atom and ratio both
    ``m^2 eps^2/2``.
    """
    if m < 0:
        raise ValidationError("must be non-negative", "m")
    e2 = epsilon**2
    if m == 0:
        return BangBangForm(1.0, 0.0, 0.0)
    return BangBangForm(1.0 - (2 * m * m - m + 1) * e2 / 2, m * m * e2 / 2, m * m * e2 / 2)


def angular_pattern(ensemble: Ensemble, wv: WaveVectorSet, directions, timeline: PulseTimeline,
                    threads: int = 1) -> np.ndarray:
    """Echo intensity in each of ``directions`` (``(M, 3)`` unit vectors).

    Normalized with ``N xi**2 = 1``, so the phase-matched direction gives the
    collective value (``N cos^4(eps/2)`` for a uniform error) and random
    directions scatter around the incoherent background ``sum_k |P_k|**2 / N``.
    """
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    u = evolve_atoms(ensemble, timeline)
    base = _echo_polarization(u, timeline.read_level) * np.exp(
        1j * ensemble.positions @ (wv.dk1 + wv.k_read)
    )
    ks = np.linalg.norm(wv.k_stokes)
    out = np.empty(len(directions))
    for i, d in enumerate(directions):
        p = base * np.exp(-1j * ks * (ensemble.positions @ d))
        out[i] = abs(deterministic_sum(p, threads)) ** 2 / ensemble.atom_count
    return out


def incoherent_background(ensemble: Ensemble, timeline: PulseTimeline, threads: int = 1) -> float:
    """Direction-averaged echo intensity for random atomic phases."""
    u = evolve_atoms(ensemble, timeline)
    p2 = np.abs(_echo_polarization(u, timeline.read_level)) ** 2
    return deterministic_sum(p2, threads) / ensemble.atom_count


def collective_enhancement(peak: float, off_peak) -> tuple[float, float]:
    """Peak over mean off-peak intensity and its standard error."""
    off = np.asarray(off_peak, dtype=float)
    if off.size < 2:
        raise ValidationError("need at least two off-peak directions", "directions")
    mean = off.mean()
    sem = off.std(ddof=1) / np.sqrt(off.size)
    ratio = peak / mean
    return ratio, ratio * sem / mean


def random_directions(count: int, seed: int, exclude_around=None, min_angle: float = 0.0) -> np.ndarray:
    """Isotropic unit vectors, optionally outside a cone around ``exclude_around``."""
    gen = rng.substream(seed, rng.DIRECTIONS)
    out = []
    while len(out) < count:
        v = gen.standard_normal(3)
        v /= np.linalg.norm(v)
        if exclude_around is not None and np.dot(v, exclude_around) > np.cos(min_angle):
            continue
        out.append(v)
    return np.array(out)


def cpmg_phase_average(m: int, epsilon: float, axis=(1.0, 0.0, 0.0)) -> BangBangForm:
    """Large-N, fully dephased limit of a CPMG run with a uniform error.

    Every propagator entry is a Laurent polynomial in ``z = exp(-i Delta
    spacing/2)`` of span at most ``4m + 2``.  Averaging over a uniform phase
    keeps only the constant term, which the mean over enough roots of unity
    extracts exactly.  Efficiency is ``|<P>|**2`` over the ideal value 1.
    """
    k = 16 * (m + 1)
    z_phase = 2 * np.pi * np.arange(k) / k
    det = z_phase / 0.5  # spacing = 1, so Delta * spacing/2 runs over the circle
    ens = Ensemble(np.zeros((k, 3)), det)
    axis = np.asarray(axis, dtype=float)
    rot = realize_rotations(GlobalOverRotation(abs(epsilon), axis), ens, 0) if epsilon else Ideal()
    tl = PulseTimeline.cpmg(m, 1.0, rot)
    u = evolve_atoms(ens, tl)
    p = _echo_polarization(u, tl.read_level).mean()
    noise = float(np.mean(np.abs(u[:, tl.read_level, 0]) ** 2))
    eff = float(abs(p) ** 2)
    return BangBangForm(eff, noise, noise / eff if eff > 0 else float("inf"))
