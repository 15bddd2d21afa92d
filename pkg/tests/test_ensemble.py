import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from echomem.ensemble import (
    Ensemble,
    EnsembleSpec,
    WaveVectorSet,
    angles_from_matched,
    direction_at_angle,
    draw_detunings,
    phase_mismatch,
    read_ensemble_csv,
    sample_ensemble,
    write_ensemble_csv,
)
from echomem.exceptions import ValidationError


def test_single_atom_is_reproducible():
    spec = EnsembleSpec(1, width=1.0, seed=7)
    a, b = sample_ensemble(spec), sample_ensemble(spec)
    assert a.atom_count == 1
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.detunings, b.detunings)


def test_different_seeds_differ():
    a = sample_ensemble(EnsembleSpec(10, seed=1))
    b = sample_ensemble(EnsembleSpec(10, seed=2))
    assert not np.array_equal(a.positions, b.positions)


def test_positions_inside_box():
    ens = sample_ensemble(EnsembleSpec(10_000, box_dimensions=(100, 100, 100), seed=3))
    assert np.all(ens.positions >= 0) and np.all(ens.positions < 100)


def test_adding_atoms_keeps_earlier_positions():
    small = sample_ensemble(EnsembleSpec(50, seed=9))
    big = sample_ensemble(EnsembleSpec(80, seed=9))
    # positions come from one stream in row-major order
    assert np.array_equal(small.positions, big.positions[:50])


def test_gaussian_width_statistics():
    width = 2 * np.pi * 25e3
    ens = sample_ensemble(EnsembleSpec(100_000, width=width, seed=4))
    assert abs(ens.detunings.std() / width - 1) < 0.02
    assert abs(ens.detunings.mean()) < 5 * width / np.sqrt(100_000)


def test_uniform_width_is_standard_deviation():
    spec = EnsembleSpec(100_000, detuning_distribution="uniform", width=3.0, seed=1)
    det = draw_detunings(spec)
    assert abs(det.std() / 3.0 - 1) < 5 / np.sqrt(100_000)
    assert np.max(np.abs(det)) <= np.sqrt(3) * 3.0


def test_lorentzian_width_is_hwhm():
    det = draw_detunings(EnsembleSpec(200_000, detuning_distribution="lorentzian", width=2.0, seed=1))
    hwhm = np.median(np.abs(det))
    assert abs(hwhm / 2.0 - 1) < 0.02


def test_trials_draw_independent_detunings():
    spec = EnsembleSpec(100, seed=1)
    assert not np.array_equal(draw_detunings(spec, 0), draw_detunings(spec, 1))
    assert np.array_equal(draw_detunings(spec, 3), draw_detunings(spec, 3))


@pytest.mark.parametrize("kwargs,field", [
    ({"atom_count": 0}, "atom_count"),
    ({"atom_count": 5, "width": 0.0}, "width"),
    ({"atom_count": 5, "box_dimensions": (1, -1, 1)}, "box_dimensions"),
    ({"atom_count": 5, "detuning_distribution": "cauchy"}, "detuning_distribution"),
])
def test_spec_validation(kwargs, field):
    with pytest.raises(ValidationError) as err:
        EnsembleSpec(**kwargs)
    assert err.value.field == field


def test_counter_propagating_matches_minus_stokes(wv):
    assert np.allclose(wv.matched_direction, -wv.k_stokes / np.linalg.norm(wv.k_stokes), atol=1e-15)
    assert wv.phase_matchable
    assert np.allclose(phase_mismatch(wv, wv.matched_direction), 0.0, atol=1e-12)


def test_forward_scattering_mismatch_vanishes():
    k = 2 * np.pi
    wv = WaveVectorSet([0, 0, k], [0, 0, k], [0, 0, -k])
    assert np.array_equal(phase_mismatch(wv, [0, 0, -1.0]), np.zeros(3))


def test_perpendicular_direction_magnitude():
    k = 2 * np.pi
    wv = WaveVectorSet([0, 0, k], [0, 0, k], [0, 0, -k])
    mism = phase_mismatch(wv, [1.0, 0, 0])
    assert np.isclose(np.linalg.norm(mism), np.sqrt(2) * k)


def test_non_unit_direction_rejected(wv):
    with pytest.raises(ValidationError):
        phase_mismatch(wv, [1.0, 0.0, 1e-5])


def test_zero_wave_vector_rejected():
    with pytest.raises(ValidationError):
        WaveVectorSet([0, 0, 0], [0, 0, 1], [0, 0, -1])


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(0.0, 2 * np.pi))
def test_direction_at_angle_roundtrip(angle, azimuth):
    wv = WaveVectorSet.counter_propagating()
    d = direction_at_angle(wv, angle, azimuth)
    assert np.isclose(np.linalg.norm(d), 1.0)
    theta, phi = angles_from_matched(wv, d)
    assert np.isclose(theta[0], angle, atol=1e-7)
    if 1e-6 < angle < np.pi - 1e-6:
        assert np.isclose(np.cos(phi[0] - azimuth), 1.0, atol=1e-7)


def test_csv_roundtrip(tmp_path):
    ens = sample_ensemble(EnsembleSpec(20, seed=2))
    path = tmp_path / "ens.csv"
    write_ensemble_csv(ens, path)
    assert path.read_text().splitlines()[0] == "atom_index,x,y,z,detuning"
    back = read_ensemble_csv(path)
    assert np.array_equal(back.positions, ens.positions)
    assert np.array_equal(back.detunings, ens.detunings)


def test_ensemble_is_immutable():
    ens = Ensemble(np.zeros((2, 3)), np.zeros(2))
    with pytest.raises(ValueError):
        ens.positions[0, 0] = 1.0
