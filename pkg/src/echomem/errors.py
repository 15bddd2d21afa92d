"""Pulse-error models and optical-pumping defects.

A pulse error is an extra rotation by ``epsilon_k`` about ``axis_k`` applied
to atom ``k`` on top of the ideal pi pulse.  Models here turn a compact
description (global, linear gradient, random) into those per-atom arrays.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from echomem import rng
from echomem.ensemble import Ensemble, unit_vector
from echomem.exceptions import ValidationError

X_AXIS = (1.0, 0.0, 0.0)
Z_AXIS = (0.0, 0.0, 1.0)


def _check_angle(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= np.pi:
        raise ValidationError("must lie in [0, pi]", name)
    return value


def _check_axis(obj, name: str) -> None:
    axis = unit_vector(getattr(obj, name), name)
    axis.setflags(write=False)
    object.__setattr__(obj, name, axis)


@dataclass(frozen=True, eq=False)
class Ideal:
    nominal_max = 0.0


@dataclass(frozen=True, eq=False)
class GlobalOverRotation:
    epsilon: float
    axis: tuple = X_AXIS

    def __post_init__(self):
        object.__setattr__(self, "epsilon", _check_angle(self.epsilon, "epsilon"))
        _check_axis(self, "axis")

    @property
    def nominal_max(self) -> float:
        return self.epsilon


@dataclass(frozen=True, eq=False)
class GradientAcrossSample:
    """Error rising linearly from 0 to ``epsilon_max`` across the box."""

    epsilon_max: float
    gradient_axis: tuple = Z_AXIS
    axis: tuple = X_AXIS

    def __post_init__(self):
        object.__setattr__(self, "epsilon_max", _check_angle(self.epsilon_max, "epsilon_max"))
        _check_axis(self, "gradient_axis")
        _check_axis(self, "axis")

    @property
    def nominal_max(self) -> float:
        return self.epsilon_max


@dataclass(frozen=True, eq=False)
class RandomPerAtom:
    """``epsilon_k ~ U[0, epsilon_scale]`` with a fixed or isotropic random axis.

    With ``independent_per_pulse`` false (the default) every pulse sees the
    same realization, as for a static rf inhomogeneity.
    """

    epsilon_scale: float
    axis_mode: str = "fixed"
    axis: tuple = X_AXIS
    independent_per_pulse: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "epsilon_scale", _check_angle(self.epsilon_scale, "epsilon_scale"))
        if self.axis_mode not in ("fixed", "uniform"):
            raise ValidationError("must be 'fixed' or 'uniform'", "axis_mode")
        _check_axis(self, "axis")

    @property
    def nominal_max(self) -> float:
        return self.epsilon_scale


PulseErrorModel = Ideal | GlobalOverRotation | GradientAcrossSample | RandomPerAtom


@dataclass(frozen=True, eq=False)
class AtomRotation:
    """Per-atom error angles ``(N,)`` and unit axes ``(N, 3)``."""

    epsilon: np.ndarray
    axis: np.ndarray

    def __post_init__(self):
        eps = np.array(self.epsilon, dtype=float)
        axis = np.array(self.axis, dtype=float)
        if eps.ndim != 1 or axis.shape != (eps.shape[0], 3):
            raise ValidationError("need epsilon (N,) and axis (N, 3)", "rotation")
        if np.any(np.abs(eps) > np.pi):
            raise ValidationError("|epsilon_k| must not exceed pi", "rotation.epsilon")
        if np.any(np.abs(np.linalg.norm(axis, axis=1) - 1.0) > 1e-12):
            raise ValidationError("axes must be unit-norm", "rotation.axis")
        eps.setflags(write=False)
        axis.setflags(write=False)
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "axis", axis)

    @classmethod
    def uniform(cls, n: int, epsilon: float, axis=X_AXIS) -> "AtomRotation":
        return cls(np.full(n, float(epsilon)), np.tile(np.asarray(axis, float), (n, 1)))

    @property
    def atom_count(self) -> int:
        return self.epsilon.shape[0]

    @property
    def max_epsilon(self) -> float:
        return float(np.max(np.abs(self.epsilon))) if self.atom_count else 0.0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["atom_index", "epsilon", "nx", "ny", "nz"])
            for i, (e, n) in enumerate(zip(self.epsilon, self.axis)):
                w.writerow([i, repr(float(e)), *(repr(float(c)) for c in n)])


def _box_span(ensemble: Ensemble, direction: np.ndarray) -> tuple[float, float]:
    if ensemble.spec is not None:
        corners = np.array(np.meshgrid(*[[0.0, b] for b in ensemble.spec.box_dimensions]))
        proj = corners.reshape(3, -1).T @ direction
    else:
        proj = ensemble.positions @ direction
    return float(proj.min()), float(proj.max())


def _isotropic_axes(gen: np.random.Generator, n: int) -> np.ndarray:
    v = gen.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def realize_rotations(model, ensemble: Ensemble, pulse_index: int = 0) -> AtomRotation:
    """Per-atom rotation errors of pulse ``pulse_index`` under ``model``.

    An :class:`AtomRotation` passed as ``model`` is returned unchanged, which
    lets callers inject arbitrary error profiles.
    """
    if pulse_index < 0:
        raise ValidationError("must be non-negative", "pulse_index")
    n = ensemble.atom_count
    if isinstance(model, AtomRotation):
        if model.atom_count != n:
            raise ValidationError(f"{model.atom_count} rotations for {n} atoms", "rotation")
        return model
    if isinstance(model, Ideal):
        return AtomRotation.uniform(n, 0.0)
    if isinstance(model, GlobalOverRotation):
        return AtomRotation.uniform(n, model.epsilon, model.axis)
    if isinstance(model, GradientAcrossSample):
        lo, hi = _box_span(ensemble, model.gradient_axis)
        frac = (ensemble.positions @ model.gradient_axis - lo) / (hi - lo) if hi > lo else np.zeros(n)
        eps = model.epsilon_max * np.clip(frac, 0.0, 1.0)
        return AtomRotation(eps, np.tile(model.axis, (n, 1)))
    if isinstance(model, RandomPerAtom):
        key = pulse_index if model.independent_per_pulse else 0
        eps = rng.substream(model.seed, rng.ROTATION_ANGLES, key).uniform(0.0, model.epsilon_scale, n)
        if model.axis_mode == "fixed":
            axes = np.tile(model.axis, (n, 1))
        else:
            axes = _isotropic_axes(rng.substream(model.seed, rng.ROTATION_AXES, key), n)
        return AtomRotation(eps, axes)
    raise ValidationError(f"unknown pulse error model {type(model).__name__}", "pulse_error")


@dataclass(frozen=True)
class PumpingDefect:
    """``defect_count`` atoms left in ``s`` by imperfect optical pumping."""

    defect_count: int = 0
    selection: str = "first"
    seed: int = 0

    def __post_init__(self):
        if int(self.defect_count) != self.defect_count or self.defect_count < 0:
            raise ValidationError("must be a non-negative integer", "defect_count")
        if self.selection not in ("first", "random"):
            raise ValidationError("must be 'first' or 'random'", "selection")


def realize_initial_state(defect: PumpingDefect, n_atoms: int) -> frozenset:
    """Indices of atoms initially in ``s``.

    ``first`` selects the trailing block ``{N-n, ..., N-1}``.
    """
    n = int(defect.defect_count)
    if n > n_atoms:
        raise ValidationError(f"{n} defects exceed {n_atoms} atoms", "defect_count")
    if defect.selection == "first":
        return frozenset(range(n_atoms - n, n_atoms))
    chosen = rng.substream(defect.seed, rng.PUMPING).choice(n_atoms, size=n, replace=False)
    return frozenset(int(i) for i in chosen)


def excited_mask(excited, n_atoms: int) -> np.ndarray:
    mask = np.zeros(n_atoms, dtype=bool)
    mask[list(excited)] = True
    return mask
