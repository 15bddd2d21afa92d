"""Collective-operator engine for a single pi pulse at the midpoint.

After the pulse is moved to the left and the error rotation is conjugated
through the dephasing, the retrieved state is ``O J+ |initial>`` with

    O = N**-0.5 * sum_k exp(i dk2.X_k) (alpha_k s-_k + beta_k s^z_k + gamma_k s+_k)

where ``(alpha_k, beta_k, gamma_k)`` expand ``R_k^dag s-_k R_k`` for the error
rotation ``R_k = exp(i eps_k/2 sigma.n'_k)`` about the dephasing-rotated axis
``n'_k``.  With ``c = cos(eps/2)``, ``s = sin(eps/2)`` and
``mu = n'_x + i n'_y``:

    alpha = c**2 - s**2 n_z**2 - 2i c s n_z
    beta  = (i c s + s**2 n_z) mu
    gamma = s**2 mu**2

(operators in the basis ``(g, s)``: ``s+ = |s><g|``, ``s^z = |g><g| - |s><s|``).
The sector norms below are closed-form O(N) reductions of the exact double
sums; the literal O(N**2) sums are kept as ``mode="pairwise"`` for checking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from echomem.ensemble import Ensemble, WaveVectorSet
from echomem.exceptions import NoSignalError, ValidationError
from echomem.reduction import deterministic_sum

MODES = ("exact", "pairwise", "random_phase")
PAIRWISE_CHUNK = 256


@dataclass(frozen=True)
class ComponentNorms:
    """Norm of the retrieved state split by excitation content.

    ``pumping_norm`` collects states with the initial excitation number that
    differ from the initial configuration (an atom left in ``s`` by the pumping
    swaps with the stored excitation); it is zero without pumping defects.
    """

    echo_norm: float
    single_exc_norm: float
    double_exc_norm: float
    pumping_norm: float = 0.0
    mode: str = "exact"

    @property
    def noise_norm(self) -> float:
        return self.single_exc_norm + self.double_exc_norm + self.pumping_norm

    @property
    def total(self) -> float:
        return self.echo_norm + self.noise_norm

    @property
    def noise_to_signal(self) -> float:
        if self.echo_norm <= 0:
            return float("inf")
        return self.noise_norm / self.echo_norm

    def as_array(self) -> np.ndarray:
        return np.array([self.echo_norm, self.single_exc_norm, self.double_exc_norm, self.pumping_norm])


@dataclass(frozen=True, eq=False)
class ObeCoefficients:
    """Per-atom ``alpha``, ``beta``, ``gamma`` with dephasing phases included."""

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray


def rotate_axis_by_dephasing(axis, detuning, tau):
    """Axis seen by an error rotation conjugated with ``tau`` of dephasing.

    ``(n_x cos + n_y sin, -n_x sin + n_y cos, n_z)`` at angle ``detuning * tau``;
    broadcasts over leading dimensions.
    """
    axis = np.asarray(axis, dtype=float)
    phi = np.asarray(detuning, dtype=float) * tau
    c, s = np.cos(phi), np.sin(phi)
    nx, ny, nz = axis[..., 0], axis[..., 1], axis[..., 2]
    return np.stack([nx * c + ny * s, -nx * s + ny * c, np.broadcast_to(nz, np.broadcast(nx, c).shape)], axis=-1)


def obo_coefficients(rotations, detunings, tau: float) -> ObeCoefficients:
    eps = np.asarray(rotations.epsilon, dtype=float)
    m = rotate_axis_by_dephasing(rotations.axis, detunings, tau)
    c, s = np.cos(eps / 2), np.sin(eps / 2)
    mz = m[:, 2]
    mu = m[:, 0] + 1j * m[:, 1]
    alpha = c**2 - s**2 * mz**2 - 2j * c * s * mz
    beta = (1j * c * s + s**2 * mz) * mu
    gamma = s**2 * mu**2
    return ObeCoefficients(alpha, beta, gamma)


def _phases(ensemble: Ensemble, wv: WaveVectorSet, direction):
    d = wv.matched_direction if direction is None else np.asarray(direction, dtype=float)
    a = np.exp(1j * ensemble.positions @ wv.dk1)
    b = np.exp(1j * ensemble.positions @ wv.dk2(d))
    return a, b


def _mask(excited, n: int) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    for k in excited:
        if not 0 <= k < n:
            raise ValidationError(f"atom index {k} out of range", "initial_excited")
        mask[k] = True
    return mask


def component_norms(coeffs: ObeCoefficients, ensemble: Ensemble, wv: WaveVectorSet,
                    initial_excited=(), direction=None, mode: str = "exact",
                    threads: int = 1) -> ComponentNorms:
    """Sector norms of ``O J+ |initial>``.

    ``exact`` and ``pairwise`` give the same numbers (O(N) vs O(N**2)).
    ``random_phase`` is the mean over independent uniform dephasing phases,
    valid once ``Gamma * tau >> 1``.
    """
    if mode not in MODES:
        raise ValidationError(f"must be one of {MODES}", "mode")
    n = ensemble.atom_count
    exc = _mask(initial_excited, n)
    free = ~exc
    n_free = int(free.sum())
    a, b = _phases(ensemble, wv, direction)
    al, be, ga = coeffs.alpha, coeffs.beta, coeffs.gamma
    fsum = lambda v: deterministic_sum(v, threads)  # noqa: E731

    echo = abs(fsum((al * a * b)[free])) ** 2 / n
    pumping = fsum(np.abs(al[exc]) ** 2) * fsum(np.abs(a[free]) ** 2) / n

    if mode == "pairwise":
        single, double = _pairwise_sectors(a, b, be, ga, exc)
        return ComponentNorms(echo, single / n, double / n, pumping, mode)

    bb = be * b
    gg2 = fsum(np.abs(ga[free]) ** 2)
    if mode == "random_phase":
        single = fsum(np.abs(a[free]) ** 2) * fsum(np.abs(bb) ** 2) / n
        double = (n_free - 1) * gg2 / n if n_free > 1 else 0.0
        return ComponentNorms(echo, single, double, pumping, mode)

    # amplitude on |initial + j> is a_j (T - 2 beta_j b_j) / sqrt(N)
    t = fsum(bb[free]) - fsum(bb[exc])
    ab2 = np.abs(a[free]) ** 2
    single = (
        fsum(ab2) * abs(t) ** 2
        - 4 * (np.conj(t) * fsum(ab2 * bb[free])).real
        + 4 * fsum(ab2 * np.abs(bb[free]) ** 2)
    ) / n
    # pair {j, k}: gamma_k a_j b_k + gamma_j a_k b_j; cross terms through w_k
    w = (ga * b * np.conj(a))[free]
    w_total = fsum(w)
    double = ((n_free - 1) * gg2 + abs(w_total) ** 2 - fsum(np.abs(w) ** 2)) / n if n_free > 1 else 0.0
    return ComponentNorms(echo, max(single, 0.0), max(double, 0.0), pumping, mode)


def _pairwise_sectors(a, b, beta, gamma, exc):
    """Literal double sums over atom pairs, accumulated in fixed row chunks."""
    n = len(a)
    idx = np.arange(n)
    free_idx = idx[~exc]
    bb = beta * b
    single_parts, double_parts = [], []
    for start in range(0, len(free_idx), PAIRWISE_CHUNK):
        rows = free_idx[start:start + PAIRWISE_CHUNK]
        sign = np.where(exc[None, :] | (idx[None, :] == rows[:, None]), -1.0, 1.0)
        amp = a[rows] * (sign * bb[None, :]).sum(axis=1)
        single_parts.append(np.sum(np.abs(amp) ** 2))
        cols = free_idx
        pair = gamma[None, cols] * a[rows, None] * b[None, cols] + gamma[rows, None] * a[None, cols] * b[rows, None]
        upper = cols[None, :] > rows[:, None]
        double_parts.append(np.sum(np.abs(pair[upper]) ** 2))
    return float(np.sum(single_parts)), float(np.sum(double_parts))


def quantum_norms(ensemble: Ensemble, wv: WaveVectorSet, rotations, tau: float,
                  initial_excited=(), direction=None, mode: str = "exact",
                  threads: int = 1) -> ComponentNorms:
    coeffs = obo_coefficients(rotations, ensemble.detunings, tau)
    return component_norms(coeffs, ensemble, wv, initial_excited, direction, mode, threads)


def echo_efficiency_bound(epsilon_max: float) -> float:
    """Small-error echo efficiency ``1 - 2 (eps_max/2)**2`` (exact to O(eps**3) at n_z = 0)."""
    return 1.0 - 2.0 * (epsilon_max / 2.0) ** 2


def pumping_noise_ratio_bound(n_atoms: int, n_defects: int, epsilon: float) -> float:
    """Upper bound on noise-to-signal with ``n_defects`` atoms left in ``s``."""
    if n_defects >= n_atoms:
        raise NoSignalError("every atom starts in s; no echo")
    if n_defects < 0:
        raise ValidationError("must be non-negative", "defect_count")
    x2 = (epsilon / 2.0) ** 2
    num = (n_atoms - n_defects) * n_defects + n_atoms**2 * x2
    return num / ((n_atoms - n_defects) ** 2 * (1.0 - 2.0 * x2))
