import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from echomem.ensemble import Ensemble, EnsembleSpec, WaveVectorSet, sample_ensemble
from echomem.errors import AtomRotation, GlobalOverRotation, GradientAcrossSample, Ideal
from echomem.exceptions import DivergentRatioError, ValidationError
from echomem.semiclassical import (
    AtomAmplitudes,
    PulseTimeline,
    angular_pattern,
    bang_bang_closed_form,
    cpmg_phase_average,
    echo_intensity,
    evolve_atom,
    evolve_atoms,
    incoherent_background,
    multi_pulse_run,
    noise_intensity,
    noise_to_signal,
    pulse_propagators,
    random_directions,
    single_echo_run,
)

WV = WaveVectorSet.counter_propagating()


def test_pulse_is_rotation_by_pi_plus_eps():
    u = pulse_propagators([0.2], [[1.0, 0, 0]])[0]
    theta = np.pi + 0.2
    expected = np.array([[np.cos(theta / 2), -1j * np.sin(theta / 2)],
                         [-1j * np.sin(theta / 2), np.cos(theta / 2)]])
    assert np.allclose(u, expected, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.floats(-np.pi, np.pi), st.floats(-5, 5), st.floats(0, 20), st.floats(0, 20))
def test_each_step_is_unitary(eps, det, t1, t2):
    amp = AtomAmplitudes.after_write(0.3, np.exp(0.4j))
    tl = PulseTimeline.single_echo(t1, t2, None)
    out = evolve_atom(amp, det, [(eps, [1.0, 0, 0])], tl, np.exp(1.1j))
    assert abs(out.norm - 1.0) < 1e-12


def test_perfect_pulse_leaves_no_noise():
    tl = PulseTimeline.single_echo(3.0, 3.0, None)
    out = evolve_atom(AtomAmplitudes.after_write(0.0), 0.7, [(0.0, [1.0, 0, 0])], tl)
    assert abs(out.amp_g) < 1e-15 and abs(out.amp_e) < 1e-15


def test_noise_population_single_atom():
    tl = PulseTimeline.single_echo(3.0, 3.0, None)
    tl = PulseTimeline(tl.tau_intervals, tl.pulse_after, (None,), read_at_end=False)
    out = evolve_atom(AtomAmplitudes.after_write(0.0), 0.7, [(0.2, [1.0, 0, 0])], tl)
    assert np.isclose(abs(out.amp_g) ** 2, np.sin(0.1) ** 2)
    assert np.isclose(np.sin(0.1) ** 2, 9.97e-3, atol=1e-5)


@pytest.mark.parametrize("tau", [0.5, 3.0, 40.0])
def test_rephasing_is_detuning_independent(tau):
    ens = sample_ensemble(EnsembleSpec(1000, seed=2))
    tl = PulseTimeline.single_echo(tau, tau, Ideal())
    assert np.isclose(echo_intensity(ens, tl, WV), 1000.0, rtol=1e-12)


def test_rephased_phase_is_common():
    ens = sample_ensemble(EnsembleSpec(50, seed=3))
    u = evolve_atoms(ens, PulseTimeline.single_echo(4.0, 4.0, Ideal()))
    phase = u[:, 0, 1] * np.conj(u[:, 1, 0])
    assert np.allclose(phase, phase[0])


def test_unequal_intervals_destroy_echo():
    ens = sample_ensemble(EnsembleSpec(1000, width=1.0, seed=4))
    tl = PulseTimeline.single_echo(5.0, 15.0, Ideal())
    assert echo_intensity(ens, tl, WV) < 10.0


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 1.0), st.integers(0, 50))
def test_uniform_error_collapses(eps, seed):
    ens = sample_ensemble(EnsembleSpec(200, seed=seed))
    tl = PulseTimeline.single_echo(7.0, 7.0, GlobalOverRotation(eps))
    assert np.isclose(echo_intensity(ens, tl, WV), 200 * np.cos(eps / 2) ** 4, rtol=1e-10)
    assert np.isclose(noise_intensity(ens, tl), 200 * np.sin(eps / 2) ** 2, rtol=1e-10, atol=1e-300)


def test_sign_of_error_is_irrelevant():
    ens = sample_ensemble(EnsembleSpec(100, seed=1))
    plus = PulseTimeline.single_echo(2.0, 2.0, AtomRotation.uniform(100, 0.2))
    minus = PulseTimeline.single_echo(2.0, 2.0, AtomRotation.uniform(100, -0.2))
    assert np.isclose(echo_intensity(ens, plus, WV), echo_intensity(ens, minus, WV), rtol=1e-12)
    assert np.isclose(noise_intensity(ens, plus), noise_intensity(ens, minus), rtol=1e-12)


def test_noise_for_a_million_atoms():
    n = 1_000_000
    ens = Ensemble(np.zeros((n, 3)), np.zeros(n))
    tl = PulseTimeline.single_echo(1.0, 1.0, GlobalOverRotation(0.01))
    assert np.isclose(noise_intensity(ens, tl), n * np.sin(0.005) ** 2, rtol=1e-10)
    assert np.isclose(noise_intensity(ens, tl), 25.0, rtol=1e-4)


def test_gradient_noise_below_bound():
    ens = sample_ensemble(EnsembleSpec(1000, seed=6))
    tl = PulseTimeline.single_echo(5.0, 5.0, GradientAcrossSample(0.1))
    noise = noise_intensity(ens, tl)
    assert 0 < noise <= 1000 * np.sin(0.05) ** 2


def test_noise_to_signal_values():
    assert noise_to_signal(0.0) == 0.0
    assert np.isclose(noise_to_signal(0.01), 2.5e-5, rtol=1e-4)
    assert np.isclose(noise_to_signal(np.pi / 2), 2.0)
    with pytest.raises(DivergentRatioError):
        noise_to_signal(np.pi)
    with pytest.raises(ValidationError):
        noise_to_signal(4.0)


def test_single_echo_run_report():
    ens = sample_ensemble(EnsembleSpec(1000, seed=7))
    res = single_echo_run(ens, GlobalOverRotation(0.01), 3.0)
    assert np.isclose(res.efficiency_factor, np.cos(0.005) ** 4, rtol=1e-12)
    assert np.isclose(res.noise_to_signal, noise_to_signal(0.01), rtol=1e-10)


def test_timeline_construction():
    tl = PulseTimeline.cpmg(2, 4.0, Ideal())
    assert tl.tau_intervals == (2.0, 4.0, 4.0, 4.0, 2.0)
    assert tl.pulse_count == 4 and tl.read_level == 1 and tl.total_time == 16.0
    assert PulseTimeline.single_echo(1, 1, Ideal()).read_level == 0
    with pytest.raises(ValidationError):
        PulseTimeline((-1.0,))
    with pytest.raises(ValidationError):
        PulseTimeline((1.0, 1.0), (1, 0), (Ideal(), Ideal()))
    with pytest.raises(ValidationError):
        PulseTimeline.cpmg(-1, 1.0, Ideal())


def test_m_zero_is_free_evolution():
    ens = sample_ensemble(EnsembleSpec(500, width=1.0, seed=8))
    res = multi_pulse_run(ens, GlobalOverRotation(0.01), 0, 1e-4)
    assert np.isclose(res.efficiency_factor, 1.0, atol=1e-6)
    assert res.noise_intensity == 0.0


def test_m_one_closed_form():
    assert np.isclose(bang_bang_closed_form(1, 0.1).efficiency, 0.990)
    sim = cpmg_phase_average(1, 0.1)
    assert abs(sim.efficiency - 0.990) < 0.1**4


def test_m_pairs_recover_each_time():
    ens = sample_ensemble(EnsembleSpec(300, seed=9))
    for m in (1, 2, 5):
        res = multi_pulse_run(ens, Ideal(), m, 10.0)
        assert np.isclose(res.echo_intensity, 300.0, rtol=1e-12)


def test_trials_need_spec():
    ens = Ensemble(np.zeros((3, 3)), np.zeros(3))
    with pytest.raises(ValidationError):
        multi_pulse_run(ens, Ideal(), 1, 1.0, trials=2)


GRID = [(eps, m) for eps in (0.005, 0.01, 0.02) for m in (1, 5, 10, 30)]


def _fitted_constants(attr):
    out = []
    for eps, m in GRID:
        sim = cpmg_phase_average(m, eps)
        form = bang_bang_closed_form(m, eps)
        out.append((getattr(sim, attr) - getattr(form, attr)) / (m * eps) ** 4)
    return np.array(out)


@pytest.mark.parametrize("attr", ["noise_per_atom", "nsr"])
def test_multi_pulse_noise_within_fourth_order(attr):
    assert np.max(np.abs(_fitted_constants(attr))) < 1.0


@pytest.mark.xfail(strict=True, reason="simulated efficiency is 1 - m^2 eps^2; the printed closed form "
                   "differs at second order by (m-1) eps^2 / 2")
def test_multi_pulse_efficiency_within_fourth_order():
    assert np.max(np.abs(_fitted_constants("efficiency"))) < 1.0


def test_efficiency_second_order_offset():
    for eps, m in GRID:
        sim = cpmg_phase_average(m, eps)
        assert abs(sim.efficiency - (1 - (m * eps) ** 2)) < 2 * (m * eps) ** 4


def test_angular_peak_and_background():
    ens = sample_ensemble(EnsembleSpec(2000, box_dimensions=(1000, 1000, 1000), seed=10))
    tl = PulseTimeline.single_echo(2.0, 2.0, GlobalOverRotation(0.1))
    peak = angular_pattern(ens, WV, WV.matched_direction, tl)[0]
    assert np.isclose(peak, 2000 * np.cos(0.05) ** 4, rtol=1e-10)
    assert np.isclose(incoherent_background(ens, tl), np.cos(0.05) ** 4)
    dirs = random_directions(300, 1, WV.matched_direction, np.radians(20))
    off = angular_pattern(ens, WV, dirs, tl)
    assert abs(off.mean() / np.cos(0.05) ** 4 - 1) < 4 * off.std() / np.sqrt(300)


def test_single_emitter_is_flat():
    ens = Ensemble([[1.0, 2.0, 3.0]], [0.3])
    tl = PulseTimeline.single_echo(1.0, 1.0, Ideal())
    dirs = random_directions(20, 3)
    assert np.allclose(angular_pattern(ens, WV, dirs, tl), 1.0)


def test_random_directions_exclusion():
    d = random_directions(200, 4, np.array([0, 0, 1.0]), np.radians(30))
    assert np.all(d @ [0, 0, 1.0] <= np.cos(np.radians(30)))
    assert np.allclose(np.linalg.norm(d, axis=1), 1.0)
