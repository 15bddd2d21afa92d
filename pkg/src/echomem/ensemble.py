"""Atomic ensemble: positions, inhomogeneous spin detunings, beam geometry.

Lengths are in optical wavelengths and wave vectors in rad per wavelength, so
a unit-wavelength beam has ``|k| = 2*pi``.  Detunings are angular
frequencies in whatever unit the caller uses for ``1/time``.

Width convention for ``width`` (the inhomogeneous linewidth):

* ``gaussian``   standard deviation
* ``lorentzian`` half width at half maximum (the variance is infinite)
* ``uniform``    standard deviation, i.e. support ``[-sqrt(3) w, sqrt(3) w]``
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from echomem import rng
from echomem.exceptions import ValidationError

DISTRIBUTIONS = ("gaussian", "lorentzian", "uniform")
UNIT_TOL = 1e-12


@dataclass(frozen=True)
class EnsembleSpec:
    atom_count: int
    box_dimensions: tuple = (100.0, 100.0, 100.0)
    detuning_distribution: str = "gaussian"
    width: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "box_dimensions", tuple(float(b) for b in self.box_dimensions))
        if not isinstance(self.atom_count, (int, np.integer)) or self.atom_count < 1:
            raise ValidationError("must be a positive integer", "atom_count")
        if len(self.box_dimensions) != 3 or min(self.box_dimensions) <= 0:
            raise ValidationError("must be three positive lengths", "box_dimensions")
        if self.detuning_distribution not in DISTRIBUTIONS:
            raise ValidationError(f"must be one of {DISTRIBUTIONS}", "detuning_distribution")
        if not self.width > 0:
            raise ValidationError("must be positive", "width")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("must be an unsigned 64-bit integer", "seed")


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Immutable atom positions ``(N, 3)`` and detunings ``(N,)``."""

    positions: np.ndarray
    detunings: np.ndarray
    spec: EnsembleSpec | None = field(default=None, repr=False)

    def __post_init__(self):
        pos = _frozen(self.positions)
        det = _frozen(self.detunings)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValidationError("positions must have shape (N, 3)", "positions")
        if det.shape != (pos.shape[0],):
            raise ValidationError("need one detuning per atom", "detunings")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "detunings", det)

    @property
    def atom_count(self) -> int:
        return self.positions.shape[0]

    def with_detunings(self, detunings) -> "Ensemble":
        return Ensemble(self.positions, detunings, self.spec)


def draw_detunings(spec: EnsembleSpec, trial: int = 0) -> np.ndarray:
    """Detunings for ``spec``; ``trial`` selects an independent redraw."""
    gen = rng.substream(spec.seed, rng.DETUNINGS, trial)
    n, w = spec.atom_count, spec.width
    if spec.detuning_distribution == "gaussian":
        return w * gen.standard_normal(n)
    if spec.detuning_distribution == "lorentzian":
        return w * gen.standard_cauchy(n)
    half = np.sqrt(3.0) * w
    return gen.uniform(-half, half, n)


def sample_ensemble(spec: EnsembleSpec) -> Ensemble:
    """Uniform positions in the box and i.i.d. detunings centred on zero."""
    gen = rng.substream(spec.seed, rng.POSITIONS)
    positions = gen.random((spec.atom_count, 3)) * np.asarray(spec.box_dimensions)
    return Ensemble(positions, draw_detunings(spec), spec)


def _vec3(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise ValidationError("must be a finite 3-vector", name)
    return v


def unit_vector(v, name: str = "direction") -> np.ndarray:
    v = _vec3(v, name)
    if abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
        raise ValidationError("must be unit-norm within 1e-12", name)
    return v


def normalized(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


@dataclass(frozen=True, eq=False)
class WaveVectorSet:
    """Write, Stokes and read wave vectors.

    The readout photon is taken to be elastic with the Stokes photon, so the
    readout wave vector in direction ``d`` is ``|k_stokes| * d``.
    """

    k_write: np.ndarray
    k_stokes: np.ndarray
    k_read: np.ndarray

    def __post_init__(self):
        for name in ("k_write", "k_stokes", "k_read"):
            v = _vec3(getattr(self, name), name)
            if not np.linalg.norm(v) > 0:
                raise ValidationError("must be non-zero", name)
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @classmethod
    def counter_propagating(cls, stokes_angle: float = 0.05, wavelength: float = 1.0):
        """Write along +z, read along -z, Stokes tilted by ``stokes_angle`` in x-z."""
        k = 2 * np.pi / wavelength
        return cls(
            k_write=[0.0, 0.0, k],
            k_stokes=[k * np.sin(stokes_angle), 0.0, k * np.cos(stokes_angle)],
            k_read=[0.0, 0.0, -k],
        )

    @property
    def dk1(self) -> np.ndarray:
        return self.k_write - self.k_stokes

    @property
    def matched_readout(self) -> np.ndarray:
        """Phase-matched readout wave vector ``k_w + k_r - k_s``."""
        return self.k_write + self.k_read - self.k_stokes

    @property
    def matched_direction(self) -> np.ndarray:
        return normalized(self.matched_readout)

    @property
    def phase_matchable(self) -> bool:
        """Whether an elastic readout can satisfy phase matching exactly."""
        k_s = np.linalg.norm(self.k_stokes)
        return abs(np.linalg.norm(self.matched_readout) - k_s) <= 1e-9 * k_s

    def readout_vector(self, direction) -> np.ndarray:
        return np.linalg.norm(self.k_stokes) * np.asarray(direction, dtype=float)

    def dk2(self, direction) -> np.ndarray:
        return self.k_read - self.readout_vector(direction)


def phase_mismatch(wv: WaveVectorSet, readout_direction) -> np.ndarray:
    """``dk1 + dk2`` for a unit readout direction; zero when phase matched."""
    d = unit_vector(readout_direction, "readout_direction")
    return wv.dk1 + wv.dk2(d)


def matched_frame(wv: WaveVectorSet) -> tuple:
    """Orthonormal ``(d0, e1, e2)`` with ``d0`` the matched readout direction."""
    d0 = wv.matched_direction
    helper = np.array([1.0, 0.0, 0.0]) if abs(d0[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = normalized(np.cross(d0, helper))
    return d0, e1, np.cross(d0, e1)


def angles_from_matched(wv: WaveVectorSet, directions) -> tuple:
    """Polar angle from the matched direction and azimuth about it, radians."""
    d0, e1, e2 = matched_frame(wv)
    d = np.atleast_2d(np.asarray(directions, dtype=float))
    theta = np.arccos(np.clip(d @ d0, -1.0, 1.0))
    phi = np.mod(np.arctan2(d @ e2, d @ e1), 2 * np.pi)
    return theta, phi


def direction_at_angle(wv: WaveVectorSet, angle: float, azimuth: float = 0.0) -> np.ndarray:
    """Unit vector ``angle`` radians away from the matched direction.

    ``azimuth`` picks the plane of the tilt around the matched direction.
    """
    d0, e1, e2 = matched_frame(wv)
    tilt = np.cos(azimuth) * e1 + np.sin(azimuth) * e2
    return normalized(np.cos(angle) * d0 + np.sin(angle) * tilt)


ENSEMBLE_HEADER = ["atom_index", "x", "y", "z", "detuning"]


def ensemble_csv_text(ensemble: Ensemble) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ENSEMBLE_HEADER)
    for i, (p, d) in enumerate(zip(ensemble.positions, ensemble.detunings)):
        w.writerow([i, repr(float(p[0])), repr(float(p[1])), repr(float(p[2])), repr(float(d))])
    return buf.getvalue()


def write_ensemble_csv(ensemble: Ensemble, path) -> None:
    Path(path).write_text(ensemble_csv_text(ensemble), encoding="utf-8")


def read_ensemble_csv(path) -> Ensemble:
    with open(Path(path), newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ENSEMBLE_HEADER:
            raise ValidationError(f"expected header {ENSEMBLE_HEADER}", "ensemble_csv")
        rows = [[float(x) for x in row] for row in reader]
    data = np.array(rows, dtype=float).reshape(-1, 5)
    if not np.array_equal(data[:, 0], np.arange(len(data))):
        raise ValidationError("atom_index must run 0..N-1 in order", "ensemble_csv")
    return Ensemble(data[:, 1:4], data[:, 4])
