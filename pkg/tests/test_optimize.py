import math

import numpy as np
import pytest

from nucspin import DDSequence, ElectronSpec, HyperfineParams, NuclearSpinConfig
from nucspin import dd
from nucspin import optimize as opt
from nucspin.bath import sample_baths, statistical_bath
from nucspin.errors import Infeasible, InvalidTiming, NoFeasiblePoint
from nucspin.spin import average_frequency, resonance_tau

KHZ = 2 * math.pi * 1e3
TAUS = np.arange(4.5e-6, 5.01e-6, 0.25e-6)
NS = range(8, 41, 4)


@pytest.fixture(scope="module")
def cb_bath(request):
    spin = NuclearSpinConfig.from_khz(1048.255, 304.47, 0.0)
    return spin, statistical_bath(sample_baths(3, spin.larmor, 2), spin.larmor)


def device(max_rabi=3.1 * KHZ, min_coh=0.5):
    return opt.GateConstraints(max_rabi=max_rabi, min_electron_coherence=min_coh)


def test_constraints_validation():
    with pytest.raises(ValueError):
        opt.GateConstraints(max_total_time=0.0)
    with pytest.raises(ValueError):
        opt.GateConstraints(min_electron_coherence=1.5)


def test_pulses_for():
    assert opt.pulses_for(5e-6, 160e-6) == 16
    with pytest.raises(InvalidTiming):
        opt.pulses_for(5e-6, 150e-6)


def test_required_rabi_matches_sweep(c_b, e_half):
    tau, n = 5e-6, 16
    rabi = opt.required_rabi(tau, 2 * tau * n, c_b, e_half)
    gate = opt.ddrf_gate(c_b, e_half, tau, n)
    amps = np.linspace(0, 2 * rabi, 20001)
    sig = np.asarray(gate.with_rabi(amps).per_spin_signal(c_b.larmor, 304.47 * KHZ, 0.0))
    i = int(np.nonzero(np.sign(sig[:-1]) != np.sign(sig[1:]))[0][0])
    brute = amps[i] - sig[i] * (amps[i + 1] - amps[i]) / (sig[i + 1] - sig[i])
    assert rabi == pytest.approx(brute, rel=1e-3)
    assert abs(float(gate.with_rabi(rabi).per_spin_signal(c_b.larmor, 304.47 * KHZ, 0.0))) < 1e-9


def test_required_rabi_scales_inversely_with_time(c_b, e_half):
    # at this tau the other transition sits on a zero of the sinc response
    tau = 3 * math.pi / (304.47 * KHZ)
    r16 = opt.required_rabi(tau, 32 * tau, c_b, e_half)
    r32 = opt.required_rabi(tau, 64 * tau, c_b, e_half)
    assert r16 == pytest.approx(2 * r32, rel=0.01)


def test_required_rabi_infeasible(c_b, e_half):
    with pytest.raises(Infeasible):
        opt.required_rabi(5e-6, 160e-6, c_b, e_half, max_rabi=0.0)
    with pytest.raises(Infeasible):
        opt.required_rabi(5e-6, 160e-6, c_b, e_half, max_rabi=1.0, n_scan=4)


def test_off_resonant_tail_sets_required_rabi(c_b, e_half):
    split = 304.47 * KHZ
    area = lambda t: opt.required_rabi(t, 32 * t, c_b, e_half) * t

    # on the nulls of the sinc response the other transition drops out
    nulls = [area(k * math.pi / split) for k in (2, 3, 4)]
    assert max(nulls) == pytest.approx(min(nulls), rel=0.01)
    # a positive lobe raises the requirement, a negative lobe lowers it
    pos = area(2.46 * math.pi / split)
    neg = area(3.5 * math.pi / split)
    assert pos > 1.1 * nulls[1] and neg < 0.95 * nulls[1]


def test_estimate_limits_and_monotonicity(c_b, e_half, cb_bath):
    _, sb = cb_bath
    tiny = opt.gate_fidelity_estimate(opt.ddrf_gate(c_b, e_half, 1e-12, 2))
    assert tiny.fidelity_estimate == pytest.approx(1.0, abs=1e-12)
    est = [opt.gate_fidelity_estimate(opt.ddrf_gate(c_b, e_half, t, 16)).fidelity_estimate
           for t in np.linspace(1e-6, 10e-6, 19)]
    assert np.all(np.diff(est) < 0)
    b = opt.gate_fidelity_estimate(opt.ddrf_gate(c_b, e_half, 5e-6, 16, 3 * KHZ), sb)
    assert b.fidelity_estimate == pytest.approx(0.5 * (1 + b.electron_coherence * b.bath_survival), abs=0)
    assert 0 <= b.bath_survival <= 1 and 0 <= b.electron_coherence <= 1


def test_no_feasible_point(cb_bath):
    spin, sb = cb_bath
    with pytest.raises(NoFeasiblePoint):
        opt.optimize_gate(spin, sb, device(max_rabi=0.0), TAUS, NS)
    with pytest.raises(NoFeasiblePoint):
        opt.optimize_gate(spin, sb, device(min_coh=1.0), TAUS, NS)


def test_relaxing_rabi_never_hurts(cb_bath):
    spin, sb = cb_bath
    best = [opt.optimize_gate(spin, sb, device(max_rabi=m * KHZ), TAUS, NS).fidelity_estimate
            for m in (2.0, 3.1, 5.0, 10.0)]
    assert np.all(np.diff(best) >= 0)


def test_single_feasible_point_returned_exactly(cb_bath):
    spin, sb = cb_bath
    e = ElectronSpec()
    best = opt.optimize_gate(spin, sb, device(), [5e-6], [16])
    rabi = opt.required_rabi(5e-6, 160e-6, spin, e, 3.1 * KHZ)
    direct = opt.gate_fidelity_estimate(opt.ddrf_gate(spin, e, 5e-6, 16, rabi), sb, e, rabi)
    assert best == direct


def test_optimizer_thread_invariant(cb_bath):
    spin, sb = cb_bath
    a = opt.optimize_gate(spin, sb, device(), TAUS, NS, threads=1)
    b = opt.optimize_gate(spin, sb, device(), TAUS, NS, threads=4)
    assert a == b


def test_device_working_point(cb_bath):
    spin, sb = cb_bath
    best = opt.optimize_gate(spin, sb, device(), np.arange(2e-6, 10.01e-6, 0.5e-6), range(4, 81, 4), threads=4)
    assert best.rabi <= 3.1 * KHZ
    assert 0.87 <= best.fidelity_estimate <= 0.95


# -- crosstalk --------------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def comparison_gates():
    tgt = HyperfineParams(100 * KHZ, 50 * KHZ)
    e = ElectronSpec.spin_half(t2_echo=1e-3, chi=2 / 3)
    c = opt.GateConstraints(1e-3, 0.99, 5 * KHZ, e)
    spin = NuclearSpinConfig(opt.COMPARISON_LARMOR, tgt)
    return tgt, e, opt.dd_candidates(spin, c), opt.ddrf_candidates(spin, c, tau_grid=[4e-6, 6e-6])


def test_candidates_are_gates(comparison_gates):
    tgt, e, dds, ddrfs = comparison_gates
    assert dds and ddrfs
    for b in dds:
        assert abs(b.target_signal) <= 0.1 and b.electron_coherence >= 0.99 and b.total_time <= 1e-3
    for b in ddrfs:
        assert b.rabi <= 5 * KHZ


@pytest.mark.parametrize("method", ["dd", "ddrf"])
def test_crosstalk_at_target_and_uncoupled(comparison_gates, method):
    tgt, e, dds, ddrfs = comparison_gates
    gate = (dds if method == "dd" else ddrfs)[0]
    axes = (np.array([0.0, tgt.a_par]), np.array([0.0, tgt.a_perp]))
    m = opt.crosstalk_map(method, e, tgt, gate, axes)
    assert m.values[1, 1] and not m.values[0, 0]


def test_crosstalk_grid_order_independent(comparison_gates):
    tgt, e, dds, _ = comparison_gates
    axis = opt.bystander_grid(n=12)
    m = opt.crosstalk_map("dd", e, tgt, dds[0], (axis, axis)).values
    r = opt.crosstalk_map("dd", e, tgt, dds[0], (axis[::-1], axis[::-1])).values
    assert np.array_equal(m, r[::-1, ::-1])


def test_single_candidate_selectivity(comparison_gates):
    tgt, e, dds, _ = comparison_gates
    axis = opt.bystander_grid(n=10)
    c = opt.GateConstraints(1e-3, 0.99, 5 * KHZ, e)
    res = opt.optimize_selectivity("dd", e, tgt, c, (axis, axis), candidates=[dds[0]])
    assert res.gate == dds[0] and res.n_candidates == 1
    with pytest.raises(NoFeasiblePoint):
        opt.optimize_selectivity("dd", e, tgt, c, (axis, axis), candidates=[])


def test_parallel_shift_order_spin_one_vs_half():
    # flank of the bath resonance, where the loss is sensitive to the mean frequency
    wl = opt.COMPARISON_LARMOR
    seq = DDSequence(resonance_tau(wl, 6) + 8e-9, 64)
    a_perp, h = 20 * KHZ, 0.2 * KHZ

    def slope(e):
        loss = [1 - float(dd.dd_signal_arrays(wl, a, a_perp, e, seq.tau, seq.n_pulses)) for a in (-h, h)]
        return (loss[1] - loss[0]) / (2 * h)

    half, one = slope(ElectronSpec.spin_half()), slope(ElectronSpec.spin_one())
    assert abs(half) < 1e-12
    assert abs(one) * h > 1e-3
    # mean-frequency shift: first order for spin-1, second order for spin-1/2
    def wbar(e, a):
        return average_frequency(NuclearSpinConfig(wl, HyperfineParams(a, a_perp)), e)
    d_one = (wbar(ElectronSpec.spin_one(), h) - wbar(ElectronSpec.spin_one(), -h)) / (2 * h)
    d_half = (wbar(ElectronSpec.spin_half(), h) - wbar(ElectronSpec.spin_half(), -h)) / (2 * h)
    assert d_one == pytest.approx(0.5, rel=1e-3)
    assert abs(d_half) < 1e-6
