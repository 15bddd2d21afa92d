"""Dense state-vector oracle for small ensembles (N <= 14).

Basis index bit ``k`` set means atom ``k`` is in ``s`` (little-endian in the
atom index).  Operators are applied literally:

* collective raising ``J+(dk) = sum_k exp(i dk.X_k) sigma+_k``
* dephasing ``exp(i t sum_k Delta_k |s><s|_k)``
* pulses ``exp(i pi/2 sigma_x) exp(i eps_k/2 sigma.n_k)`` built with ``expm``

This module is deliberately naive; it exists to check the collective engine.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

from echomem.ensemble import Ensemble, WaveVectorSet
from echomem.errors import AtomRotation
from echomem.exceptions import OracleCapError, ValidationError
from echomem.quantum import ComponentNorms

MAX_ATOMS = 14

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)  # |s><g|
SIGMA_MINUS = SIGMA_PLUS.T.copy()  # |g><s|


def check_size(n: int) -> None:
    if n > MAX_ATOMS:
        raise OracleCapError(f"oracle cap exceeded: {n} atoms > {MAX_ATOMS}", "ensemble.atom_count")


def _n_atoms(state: np.ndarray) -> int:
    n = int(state.shape[0]).bit_length() - 1
    if state.ndim != 1 or 2**n != state.shape[0]:
        raise ValidationError("state length must be a power of two", "state")
    return n


def bit_table(n: int) -> np.ndarray:
    """``(2**n, n)`` array of occupation bits."""
    idx = np.arange(2**n)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(np.int8)


def basis_state(n: int, excited=()) -> np.ndarray:
    check_size(n)
    psi = np.zeros(2**n, dtype=complex)
    psi[sum(1 << k for k in excited)] = 1.0
    return psi


def _ladder(state, positions, dk, raising: bool) -> np.ndarray:
    n = _n_atoms(state)
    phases = np.exp(1j * (np.asarray(positions) @ np.asarray(dk, dtype=float)))
    idx = np.arange(state.shape[0])
    out = np.zeros_like(state)
    for k in range(n):
        mask = 1 << k
        src = idx[(idx & mask) == 0] if raising else idx[(idx & mask) != 0]
        out[src ^ mask] += phases[k] * state[src]
    return out


def apply_jplus(state: np.ndarray, ensemble: Ensemble, dk) -> np.ndarray:
    """``sum_k exp(i dk.X_k) sigma+_k`` applied to ``state``."""
    return _ladder(state, ensemble.positions, dk, raising=True)


def apply_jminus(state: np.ndarray, ensemble: Ensemble, dk) -> np.ndarray:
    """``sum_k exp(i dk.X_k) sigma-_k`` (phases not conjugated)."""
    return _ladder(state, ensemble.positions, dk, raising=False)


def apply_dephasing(state: np.ndarray, detunings, t: float) -> np.ndarray:
    n = _n_atoms(state)
    energy = bit_table(n) @ np.asarray(detunings, dtype=float)
    return state * np.exp(1j * t * energy)


def apply_single_atom(state: np.ndarray, mats) -> np.ndarray:
    """Apply ``mats[k]`` (2x2, basis g, s) to atom ``k`` for every ``k``."""
    n = _n_atoms(state)
    psi = state.reshape((2,) * n)
    for k, m in enumerate(mats):
        ax = n - 1 - k
        psi = np.moveaxis(np.tensordot(m, psi, axes=([1], [ax])), 0, ax)
    return psi.reshape(-1)


def rotation_matrix(angle: float, axis) -> np.ndarray:
    """``exp(i angle/2 sigma.axis)``."""
    nx, ny, nz = axis
    return expm(0.5j * angle * (nx * SIGMA_X + ny * SIGMA_Y + nz * SIGMA_Z))


def dephasing_matrix(detuning: float, t: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * detuning * t)])


def pulse_matrices(rotations: AtomRotation, base_angle: float = np.pi,
                   composition: str = "sequential") -> list:
    """Per-atom pulse unitaries.

    ``sequential``: ideal x rotation after the error rotation.
    ``combined``: one rotation about ``base_angle x + eps n`` by its length.
    """
    out = []
    for eps, n in zip(rotations.epsilon, rotations.axis):
        if composition == "sequential":
            out.append(rotation_matrix(base_angle, (1, 0, 0)) @ rotation_matrix(eps, n))
        elif composition == "combined":
            v = base_angle * np.array([1.0, 0.0, 0.0]) + eps * np.asarray(n)
            length = np.linalg.norm(v)
            out.append(rotation_matrix(length, v / length) if length > 0 else np.eye(2, dtype=complex))
        else:
            raise ValidationError("must be 'sequential' or 'combined'", "composition")
    return out


def apply_rotations(state, rotations: AtomRotation, base_angle: float = np.pi,
                    composition: str = "sequential") -> np.ndarray:
    return apply_single_atom(state, pulse_matrices(rotations, base_angle, composition))


def _geometry(ensemble, wv, direction):
    d = wv.matched_direction if direction is None else np.asarray(direction, float)
    return wv.dk1, wv.dk2(d)


def echo_pipeline(ensemble: Ensemble, wv: WaveVectorSet, rotations: AtomRotation,
                  tau1: float, tau2: float, excited=(), direction=None,
                  form: str = "literal", composition: str = "sequential") -> np.ndarray:
    """Final atomic state after write, dephasing, pi pulse, rephasing and read.

    ``literal`` applies ``J+(dk2) D(tau2) P D(tau1) J+(dk1)``.  ``simplified``
    is the same state with the ideal pulse moved to the left and dropped:
    ``J-(dk2) D(-tau2) P_err D(tau1) J+(dk1)``; norms agree exactly.
    """
    n = ensemble.atom_count
    check_size(n)
    dk1, dk2 = _geometry(ensemble, wv, direction)
    psi = apply_jplus(basis_state(n, excited), ensemble, dk1) / np.sqrt(n)
    psi = apply_dephasing(psi, ensemble.detunings, tau1)
    pulses = pulse_matrices(rotations, np.pi, composition)
    if form == "literal":
        psi = apply_single_atom(psi, pulses)
        psi = apply_dephasing(psi, ensemble.detunings, tau2)
        return apply_jplus(psi, ensemble, dk2)
    if form == "simplified":
        undo_ideal = np.linalg.inv(rotation_matrix(np.pi, (1, 0, 0)))
        psi = apply_single_atom(psi, [undo_ideal @ p for p in pulses])
        psi = apply_dephasing(psi, ensemble.detunings, -tau2)
        return apply_jminus(psi, ensemble, dk2)
    raise ValidationError("must be 'literal' or 'simplified'", "form")


def operator_frame(ensemble: Ensemble, rotations: AtomRotation, tau: float,
                   form: str = "literal", composition: str = "sequential") -> list:
    """Per-atom unitaries mapping the final state onto the collective-operator frame.

    In that frame the retrieved state is ``O J+ |initial>`` and excitation
    number separates echo from noise.  Built from the literal 2x2 matrices.
    """
    ideal = rotation_matrix(np.pi, (1, 0, 0))
    undo_ideal = np.linalg.inv(ideal)
    frames = []
    for det, p in zip(ensemble.detunings, pulse_matrices(rotations, np.pi, composition)):
        err = undo_ideal @ p
        conj = dephasing_matrix(det, -tau) @ err @ dephasing_matrix(det, tau)
        f = conj.conj().T
        frames.append(f @ undo_ideal if form == "literal" else f)
    return frames


def project_sectors(state: np.ndarray, excited=()) -> ComponentNorms:
    """Split a collective-operator-frame state by excitation number.

    Echo is the amplitude on the initial configuration; the remaining states
    with the same excitation count are pumping noise; one and two extra
    excitations are the single and double sectors.
    """
    n = _n_atoms(state)
    weight = bit_table(n).sum(axis=1)
    prob = np.abs(state) ** 2
    start = sum(1 << k for k in excited)
    base = len(set(excited))
    echo = float(prob[start])
    same = float(prob[weight == base].sum()) - echo
    return ComponentNorms(
        echo_norm=echo,
        single_exc_norm=float(prob[weight == base + 1].sum()),
        double_exc_norm=float(prob[weight == base + 2].sum()),
        pumping_norm=max(same, 0.0),
        mode="oracle",
    )


def sector_weights(state: np.ndarray) -> np.ndarray:
    """Total probability per excitation number."""
    n = _n_atoms(state)
    return np.bincount(bit_table(n).sum(axis=1), weights=np.abs(state) ** 2, minlength=n + 1)


def component_norms(ensemble: Ensemble, wv: WaveVectorSet, rotations: AtomRotation,
                    tau: float, excited=(), direction=None, form: str = "literal",
                    composition: str = "sequential") -> ComponentNorms:
    """Run the echo pipeline with ``tau1 = tau2 = tau`` and project onto sectors."""
    psi = echo_pipeline(ensemble, wv, rotations, tau, tau, excited, direction, form, composition)
    frame = operator_frame(ensemble, rotations, tau, form, composition)
    return project_sectors(apply_single_atom(psi, frame), excited)


def phase_averaged_total_norm(ensemble: Ensemble, wv: WaveVectorSet, rotations: AtomRotation,
                              excited=(), direction=None,
                              composition: str = "sequential") -> float:
    """Exact mean of the final-state norm over independent uniform phases ``Delta_k tau``.

    The final amplitude is a polynomial in ``z_k = exp(i Delta_k tau)``; only
    monomials with equal exponent vectors survive the average, which reduces
    the mean to N dense products instead of a 5**N phase grid.
    """
    n = ensemble.atom_count
    check_size(n)
    excited = set(excited)
    dk1, dk2 = _geometry(ensemble, wv, direction)
    a = np.exp(1j * ensemble.positions @ dk1)
    b = np.exp(1j * ensemble.positions @ dk2)
    pulses = pulse_matrices(rotations, np.pi, composition)
    idx = np.arange(2**n)
    bits = bit_table(n)
    empty_weight = (1 - bits) @ (np.abs(b) ** 2)  # sum of |b_k|^2 over atoms in g

    coherent = np.zeros(2**n, dtype=complex)
    incoherent = 0.0
    for j in range(n):
        if j in excited:
            continue
        cols = [p[:, 1 if (k in excited or k == j) else 0] for k, p in enumerate(pulses)]
        psi_j = cols[n - 1]
        for k in range(n - 2, -1, -1):
            psi_j = np.kron(psi_j, cols[k])
        src = idx[(idx >> j) & 1 == 0]
        coherent[src | (1 << j)] += a[j] * b[j] * psi_j[src]
        weights = empty_weight - np.where(bits[:, j] == 0, np.abs(b[j]) ** 2, 0.0)
        incoherent += abs(a[j]) ** 2 * float(np.sum(np.abs(psi_j) ** 2 * weights))
    return (float(np.sum(np.abs(coherent) ** 2)) + incoherent) / n
