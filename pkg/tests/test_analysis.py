import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nucspin import analysis as an
from nucspin.analysis import Correlators
from nucspin.errors import FitDiverged, OutOfRange
from nucspin.oracles import bell_circuit_branches, bell_mixture_oracle

KHZ = 2 * math.pi * 1e3


# -- decays -----------------------------------------------------------------------------------------

def test_stretched_exponential_round_trip():
    t = np.linspace(0, 300e-6, 80)
    y = an.stretched_exponential(t, 1.0, 76e-6, 1.3)
    fit = an.fit_stretched_exponential(t, y)
    assert fit["tau"] == pytest.approx(76e-6, rel=1e-3)
    assert fit["n"] == pytest.approx(1.3, rel=1e-3)
    assert fit["A"] == pytest.approx(1.0, rel=1e-3)
    assert all(u >= 0 for u in fit.uncertainties.values())


def test_plain_exponential_and_offset():
    t = np.linspace(0, 5e-3, 60)
    y = an.stretched_exponential(t, 0.8, 1e-3, 1.0, 0.1)
    fit = an.fit_stretched_exponential(t, y)
    assert fit["n"] == pytest.approx(1.0, rel=1e-3)
    assert fit["c"] == pytest.approx(0.1, abs=1e-4)
    fixed = an.fit_stretched_exponential(t, y, fix_offset=0.1)
    assert fixed["tau"] == pytest.approx(1e-3, rel=1e-4)


def test_constant_data_diverges():
    with pytest.raises(FitDiverged):
        an.fit_stretched_exponential(np.linspace(0, 1, 10), np.ones(10))
    with pytest.raises(FitDiverged):
        an.fit_stretched_exponential([0, 1], [1, 0])


def test_dd_scaling_round_trip_and_prediction():
    n = np.array([1, 2, 4, 8, 16, 32, 64])
    fit = an.fit_dd_scaling(n, 129e-6 * n**0.47)
    assert fit["t2_echo"] == pytest.approx(129e-6, rel=1e-12)
    assert fit["chi"] == pytest.approx(0.47, rel=1e-12)
    t256 = fit["t2_echo"] * 256 ** fit["chi"]
    assert t256 == pytest.approx(1.75e-3, abs=0.005e-3)
    assert abs(t256 - 1.7e-3) <= 0.5e-3
    with pytest.raises(FitDiverged):
        an.fit_dd_scaling([8, 8, 8], [1e-3, 1.1e-3, 0.9e-3])


# -- Ramsey ------------------------------------------------------------------------------------------

def test_electron_ramsey_two_tones():
    t = np.linspace(0, 6e-6, 301)
    centre, split = 2 * math.pi * 3e6, 312 * KHZ
    freqs = [centre - split / 2, centre + split / 2]
    y = an.ramsey_model(t, 0.45, 2.42e-6, 2.8, freqs, [0.3, 1.1], 0.5)
    fit = an.ramsey_model_fit(t, y, n_tones=2, freq_bracket=(2 * math.pi * 2e6, 2 * math.pi * 4e6),
                              split_bracket=(100 * KHZ, 600 * KHZ))
    assert fit["T2_star"] == pytest.approx(2.42e-6, rel=0.01)
    assert fit["n"] == pytest.approx(2.8, rel=0.01)
    assert fit["omega2"] - fit["omega1"] == pytest.approx(split, rel=0.01)


def test_single_tone_ramsey():
    t = np.linspace(0, 20e-6, 200)
    y = an.ramsey_model(t, 0.5, 8e-6, 2.0, [2 * math.pi * 1e6], [0.7], 0.5)
    fit = an.ramsey_model_fit(t, y)
    assert fit["omega1"] == pytest.approx(2 * math.pi * 1e6, rel=1e-4)
    assert fit["T2_star"] == pytest.approx(8e-6, rel=0.01)


def test_nuclear_ramsey_with_beating():
    t = np.linspace(0, 40e-3, 801)
    w = 2 * math.pi * 400.0
    y = an.ramsey_model(t, 0.2, 17.2e-3, 2.0, [w], [0.4], 0.5, couplings=(67.0, 71.0))
    fit = an.ramsey_model_fit(t, y, freq_bracket=(2 * math.pi * 300, 2 * math.pi * 500),
                              n_couplings=2, coupling_bracket=(40.0, 100.0))
    assert fit["T2_star"] == pytest.approx(17.2e-3, rel=0.01)
    assert fit["n"] == pytest.approx(2.0, rel=0.01)
    assert fit["J1"] == pytest.approx(67.0, rel=0.01)
    assert fit["J2"] == pytest.approx(71.0, rel=0.01)


def test_flat_ramsey_diverges():
    with pytest.raises(FitDiverged):
        an.ramsey_model_fit(np.linspace(0, 1, 20), np.full(20, 0.5))


# -- readout ------------------------------------------------------------------------------------------

def test_povm_inversion():
    assert an.gate_fidelity_from_contrast(0.559) == pytest.approx(0.874, abs=0.004)
    assert an.gate_fidelity_from_contrast(1.0) == 1.0
    assert an.gate_fidelity_from_contrast(0.0) == 0.5
    with pytest.raises(OutOfRange):
        an.gate_fidelity_from_contrast(1.2)


@given(st.floats(0.5, 1.0))
def test_contrast_inversion_is_identity(f):
    assert an.gate_fidelity_from_contrast(an.nuclear_contrast(f)) == pytest.approx(f, abs=1e-12)


def test_readout_identity_at_unit_fidelity():
    c = Correlators(0.5, -0.4, 0.3, nuclear=(0.1, 0.0, 0.2))
    out = an.readout_correct(c, (1.0, 1.0), 1.0)
    np.testing.assert_allclose(out.as_array(), c.as_array(), atol=0)


@settings(deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(0.6, 1.0), st.floats(0.6, 1.0),
       st.floats(0.6, 1.0), st.booleans())
def test_readout_round_trip(xx, yy, zz, f0, f1, fg, prep):
    true = Correlators(xx, yy, zz, electron=(0.1, -0.2, 0.3), nuclear=(0.2, 0.1, -0.4))
    meas = an.readout_forward(true, (f0, f1), fg, prep)
    back = an.readout_correct(meas, (f0, f1), fg, prep)
    np.testing.assert_allclose(back.as_array(), true.as_array(), atol=1e-12)
    np.testing.assert_allclose(back.nuclear, true.nuclear, atol=1e-12)


def test_symmetric_povm_scale():
    out = an.readout_correct(Correlators(0.5, 0.5, 0.5), (1.0, 1.0), 0.874, include_preparation=True)
    assert out.xx == pytest.approx(0.5 / (2 * 0.874 - 1) ** 2, rel=1e-12)
    assert (2 * 0.874 - 1) ** 2 == pytest.approx(0.559, abs=1e-3)


def test_readout_out_of_range():
    with pytest.raises(OutOfRange):
        an.readout_correct(Correlators(0.9, 0, 0), (0.777, 0.777), 1.0)
    with pytest.raises(OutOfRange):
        an.readout_correct(Correlators(0, 0, 0), (0.4, 0.9), 1.0)


# -- Bell fidelity ---------------------------------------------------------------------------------

def test_bell_formula():
    assert an.bell_fidelity(Correlators(1, -1, 1)).value == 1.0
    assert an.bell_fidelity(Correlators(0, 0, 0)).value == 0.25


def test_bell_uncertainty_against_finite_differences():
    c = Correlators(0.5, -0.4, 0.6, errors=(0.03, 0.05, 0.02))
    h = 1e-6
    grads = []
    for k in range(3):
        v = list(c.as_array())
        v[k] += h
        up = an.bell_fidelity(Correlators(*v)).value
        v[k] -= 2 * h
        dn = an.bell_fidelity(Correlators(*v)).value
        grads.append((up - dn) / (2 * h))
    expected = math.sqrt(sum((g * e) ** 2 for g, e in zip(grads, c.errors)))
    assert an.bell_fidelity(c).uncertainty == pytest.approx(expected, rel=1e-6)


def test_bell_symmetric_in_xx_zz():
    a = an.bell_fidelity(Correlators(0.3, -0.2, 0.7)).value
    b = an.bell_fidelity(Correlators(0.7, -0.2, 0.3)).value
    assert a == b


def test_error_budget_values():
    assert an.error_budget_bell(1.0) == pytest.approx(1.0, abs=1e-12)
    assert an.error_budget_bell(0.874) == pytest.approx(0.76, abs=0.01)
    with pytest.raises(OutOfRange):
        an.error_budget_bell(0.4)


@given(st.floats(0.5, 1.0))
def test_error_budget_matches_mixture_oracle(f):
    assert an.error_budget_bell(f) == pytest.approx(bell_mixture_oracle(f, bell_circuit_branches), abs=1e-12)


def test_error_budget_monotone():
    f = np.linspace(0.5, 1.0, 51)
    vals = [an.error_budget_bell(x) for x in f]
    assert np.all(np.diff(vals) >= -1e-12)


# -- excited state and field ------------------------------------------------------------------------

def test_excited_state_fraction():
    assert an.excited_state_fraction(0.5) == 0.25
    assert an.excited_state_fraction(0.1) == pytest.approx(0.0833, abs=5e-5)
    s = np.logspace(-3, 6, 200)
    f = an.excited_state_fraction(s)
    assert np.all(np.diff(f) > 0) and np.all(f < 0.5)
    assert an.excited_state_fraction(1e9) == pytest.approx(0.5, abs=1e-9)


@pytest.mark.parametrize("delta_khz", [208.0, -13.0, 0.0])
def test_delta_hyperfine_round_trip(delta_khz):
    frac = an.excited_state_fraction(np.array([0.1, 0.2, 0.5, 1.0, 2.0]))
    fit = an.delta_hyperfine(frac, delta_khz * KHZ * frac)
    assert fit["delta_a"] == pytest.approx(delta_khz * KHZ, rel=0.01, abs=1e-9)


def test_delta_hyperfine_needs_two_fractions():
    with pytest.raises(FitDiverged):
        an.delta_hyperfine([0.25, 0.25], [1.0, 1.0])


def test_binned_ramsey_phase():
    d = 208 * KHZ
    assert an.binned_ramsey_phase(0.0, 0.5, d) == 0.0
    up = an.binned_ramsey_phase(3e-6, 0.5, d, "up")
    assert an.binned_ramsey_phase(3e-6, 0.5, d, "down") == -up
    assert an.binned_ramsey_phase(6e-6, 0.5, d) == pytest.approx(2 * up, rel=1e-15)


def test_field_rescale_and_g_factor():
    assert an.field_rescale(2.7e9, 2.7e9, 1.0) == 1.0
    assert an.field_rescale(1.0, 1.01, 1048.52 * KHZ) == pytest.approx(1.01 * 1048.52 * KHZ, rel=1e-15)
    g = an.g_factor(2.7446e9, 97.884e-3)
    assert g == pytest.approx(2.003, abs=0.001)
    assert abs(g - 2.0) / 2.0 < 0.002
