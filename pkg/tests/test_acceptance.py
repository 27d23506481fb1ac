"""Acceptance checks, one test per criterion.

Run ``pytest tests/test_acceptance.py`` (or this file directly); the terminal
summary lists a PASS/FAIL line for each criterion.
"""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from nucspin import DDSequence, ElectronSpec, HyperfineParams, NuclearSpinConfig, cli, dd, ddrf
from nucspin import analysis as an
from nucspin import optimize as opt
from nucspin.analysis import Correlators
from nucspin.bath import bystander_density_annuli, count_in_annuli, sample_bath
from nucspin.ddrf import DoubleDrive, PropagationConfig, SingleDrive, build_ddrf_schedule, propagate_ddrf
from nucspin.oracles import bell_circuit_branches, bell_mixture_oracle, dd_oracle
from nucspin.spin import average_frequency, conditional_frequencies, hyperfine_from_frequencies, resonance_tau

KHZ = 2 * math.pi * 1e3
CONFIGS = Path(__file__).resolve().parent.parent / "configs"
C_A = NuclearSpinConfig.from_khz(1048.52, -130.9, 137.0)
C_B = NuclearSpinConfig.from_khz(1048.255, 304.47, 0.0)
E = ElectronSpec()
criterion = pytest.mark.criterion


@criterion(1, "conditional frequencies of C_A are 1116.1 / 985.4 kHz within 0.1 kHz")
def test_c01_kinematics():
    w0, w1 = conditional_frequencies(C_A, E)
    assert abs(w0 / KHZ - 1116.1) <= 0.1
    assert abs(w1 / KHZ - 985.4) <= 0.1


@criterion(2, "hyperfine inversion gives A_par -130.9 +- 0.2 kHz and |A_perp| 137 +- 3 kHz")
def test_c02_inversion():
    hf = hyperfine_from_frequencies(1116.1 * KHZ, 985.4 * KHZ, 1048.52 * KHZ, E)
    assert abs(hf.a_par / KHZ + 130.9) <= 0.2
    assert abs(abs(hf.a_perp) / KHZ - 137) <= 3


@criterion(3, "series mean frequency matches exact within 0.01 kHz; exact mean 1050.75 within 0.02 kHz")
def test_c03_expansion():
    exact = average_frequency(C_A, E) / KHZ
    series = average_frequency(C_A, E, "expansion") / KHZ
    assert abs(exact - series) <= 0.01
    assert abs(exact - 1050.75) <= 0.02


@criterion(4, "p=13 resonance at 1050.75 kHz is 6.424 us, within 0.02% of 6.425 us")
def test_c04_resonance_order():
    tau = resonance_tau(1050.75 * KHZ, 13)
    assert round(tau * 1e6, 3) == 6.424
    assert abs(tau - 6.425e-6) / 6.425e-6 <= 2e-4


@criterion(5, "T2_DD(256) = 1.75 ms from (129 us, 0.47), inside 1.7(5) ms")
def test_c05_eq1():
    t = float(dd.t2_dd(256, ElectronSpec(t2_echo=129e-6, chi=0.47)))
    assert abs(t - 1.75e-3) <= 0.005e-3
    assert abs(t - 1.7e-3) <= 0.5e-3


@criterion(6, "analytic DD agrees with the density-matrix oracle within 1e-9 on 1000 cases")
def test_c06_dd_oracle():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(1000):
        e = ElectronSpec() if rng.random() < 0.5 else ElectronSpec.spin_one()
        spin = NuclearSpinConfig(KHZ * rng.uniform(200, 2000),
                                 HyperfineParams(KHZ * rng.uniform(-300, 300), KHZ * rng.uniform(0, 300)))
        tau = rng.uniform(0.2e-6, 10e-6)
        n = 2 * int(rng.integers(1, 33))
        worst = max(worst, abs(dd.dd_coherence([spin], e, DDSequence(tau, n)) - dd_oracle([spin], e, tau, n)))
    assert worst <= 1e-9


@criterion(7, "C_A N=32 spectrum dips below 0 within 0.5% of the p=13 resonance")
def test_c07_dd_spectrum():
    target = resonance_tau(average_frequency(C_A, E), 13)
    taus = np.linspace(6.2e-6, 6.65e-6, 901)
    vals = dd.dd_spectrum([C_A], E, taus, 32).values
    i = int(np.argmin(vals))
    assert vals[i] < 0
    assert abs(taus[i] - target) / target <= 0.005


@criterion(8, "zero-amplitude DDRF equals DD within 1e-6 on 100 random cases")
def test_c08_ddrf_degenerates():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        spin = NuclearSpinConfig(KHZ * rng.uniform(300, 2000),
                                 HyperfineParams(KHZ * rng.uniform(-200, 200), KHZ * rng.uniform(0, 200)))
        tau = rng.uniform(0.5e-6, 10e-6)
        n = 2 * int(rng.integers(1, 33))
        sched = build_ddrf_schedule(DDSequence(tau, n), average_frequency(spin, E), SingleDrive(spin.larmor, 0.0))
        # the tilted branch axes are what DD uses, so they must be kept here
        res = propagate_ddrf(sched, [spin], E, PropagationConfig(branch_tilt="include"))
        worst = max(worst, abs(res.signal - dd.dd_coherence([spin], E, DDSequence(tau, n))))
    assert worst <= 1e-6


@criterion(9, "double drive (W/2, W/2) matches single drive W within 1% on resonant phase-matched gates")
def test_c09_double_drive():
    w0, w1 = conditional_frequencies(C_B, E)
    wbar = 0.5 * (w0 + w1)
    hf = C_B.hyperfine
    for tau, n in ((5e-6, 16), (5.7e-6, 24), (8e-6, 8)):
        for rabi in np.array([1.0, 1.64, 3.0, 6.0]) * KHZ:
            s = ddrf.DDRFGate(DDSequence(tau, n), wbar, SingleDrive(w1, rabi), E)
            d = ddrf.DDRFGate(DDSequence(tau, n), wbar, DoubleDrive(w0, w1, rabi), E)
            a = float(s.per_spin_signal(C_B.larmor, hf.a_par, hf.a_perp))
            b = float(d.per_spin_signal(C_B.larmor, hf.a_par, hf.a_perp))
            assert abs(a - b) <= 0.01


@criterion(10, "C_B DDRF dips at 896.02 and 1200.49 +- 2 kHz on the phase-matched row, splitting 304 +- 5 kHz")
def test_c10_ddrf_spectrum():
    rf = np.arange(860, 1240.5, 1.0) * KHZ
    wbar = np.array([1040.0, 1044.0, 1048.255, 1052.0, 1056.0]) * KHZ
    tau = ddrf.stationary_tail_tau(304.47 * KHZ)
    vals = ddrf.ddrf_spectrum([C_B], E, tau, 16, rf, wbar, 1.64 * KHZ).values
    row = vals[:, 2]
    lo = rf < average_frequency(C_B, E)
    d0 = rf[lo][np.argmin(row[lo])] / KHZ
    d1 = rf[~lo][np.argmin(row[~lo])] / KHZ
    assert abs(d0 - 896.02) <= 2 and abs(d1 - 1200.49) <= 2
    assert abs(d1 - d0 - 304) <= 5
    assert int(np.argmin(vals.min(axis=0))) == 2


@criterion(11, "contrast 0.559 inverts to F = 0.874 +- 0.004")
def test_c11_povm():
    assert abs(an.gate_fidelity_from_contrast(0.559) - 0.874) <= 0.004


@criterion(12, "F_gate 0.874 gives a Bell estimate 0.76 +- 0.01 equal to the mixture oracle within 1e-12")
def test_c12_budget():
    f = an.error_budget_bell(0.874)
    assert abs(f - 0.76) <= 0.01
    assert abs(f - bell_mixture_oracle(0.874, bell_circuit_branches)) <= 1e-12


@criterion(13, "Bell formula values and uncertainty propagation against finite differences")
def test_c13_bell_formula():
    assert an.bell_fidelity(Correlators(1, -1, 1)).value == pytest.approx(1.0, abs=1e-15)
    assert an.bell_fidelity(Correlators(0, 0, 0)).value == pytest.approx(0.25, abs=1e-15)
    c = Correlators(0.6, -0.5, 0.7, errors=(0.04, 0.03, 0.05))
    h = 1e-6
    grad = []
    for k in range(3):
        v = c.as_array().copy()
        v[k] += h
        up = an.bell_fidelity(Correlators(*v)).value
        v[k] -= 2 * h
        grad.append((up - an.bell_fidelity(Correlators(*v)).value) / (2 * h))
    want = math.sqrt(sum((g * e) ** 2 for g, e in zip(grad, c.errors)))
    assert an.bell_fidelity(c).uncertainty == pytest.approx(want, rel=1e-6)


@pytest.fixture(scope="module")
def selectivity():
    tgt = HyperfineParams(100 * KHZ, 50 * KHZ)
    axis = opt.bystander_grid(0.1e3, 1000e3, 50)
    out = {}
    for kind, e in (("half", ElectronSpec.spin_half(t2_echo=1e-3, chi=2 / 3)),
                    ("one", ElectronSpec.spin_one(t2_echo=1e-3, chi=2 / 3))):
        c = opt.GateConstraints(1e-3, 0.99, 5 * KHZ, e)
        for method in ("dd", "ddrf"):
            out[method, kind] = opt.optimize_selectivity(method, e, tgt, c, (axis, axis), threads=8).area
    return out


@criterion(14, "crosstalk cells: DDRF(1) <= DDRF(1/2) <= DD(1/2) and DD(1) <= DD(1/2) on a 50x50 grid")
def test_c14_selectivity(selectivity):
    s = selectivity
    print("crosstalk cells", {f"{m}:{k}": v for (m, k), v in s.items()})
    assert s["ddrf", "one"] <= s["ddrf", "half"] <= s["dd", "half"]
    assert s["dd", "one"] <= s["dd", "half"]


@criterion(15, "mean bath size 2.2e5 +- 2% over 100 seeds; annulus recount 1.0 +- 0.3 on held-out baths")
def test_c15_bath_statistics():
    wl = 1048.52 * KHZ
    counts = [len(sample_bath(15, wl, index=i)) for i in range(100)]
    assert abs(np.mean(counts) / 2.2e5 - 1) <= 0.02
    radii = bystander_density_annuli(100, seed=15, larmor=wl)
    held = [sample_bath(15, wl, index=10_000 + i).coupling for i in range(100)]
    recount = np.mean([count_in_annuli(radii, c) for c in held], axis=0)
    assert recount.size >= 5 and np.all(np.abs(recount - 1.0) <= 0.3)


@criterion(16, "fit round trips recover noiseless synthetic parameters within 1%")
def test_c16_fits():
    t = np.linspace(0, 300e-6, 80)
    fit = an.fit_stretched_exponential(t, an.stretched_exponential(t, 1.0, 76e-6, 1.3))
    assert fit["tau"] == pytest.approx(76e-6, rel=0.01) and fit["n"] == pytest.approx(1.3, rel=0.01)

    n = np.array([1, 4, 16, 64, 256])
    fit = an.fit_dd_scaling(n, 129e-6 * n**0.47)
    assert fit["t2_echo"] == pytest.approx(129e-6, rel=0.01) and fit["chi"] == pytest.approx(0.47, rel=0.01)

    t = np.linspace(0, 6e-6, 301)
    split = 312 * KHZ
    y = an.ramsey_model(t, 0.45, 2.42e-6, 2.8, [2 * math.pi * 3e6 - split / 2, 2 * math.pi * 3e6 + split / 2],
                        [0.3, 1.1], 0.5)
    fit = an.ramsey_model_fit(t, y, n_tones=2, freq_bracket=(2 * math.pi * 2e6, 2 * math.pi * 4e6),
                              split_bracket=(100 * KHZ, 600 * KHZ))
    assert fit["T2_star"] == pytest.approx(2.42e-6, rel=0.01) and fit["n"] == pytest.approx(2.8, rel=0.01)
    assert fit["omega2"] - fit["omega1"] == pytest.approx(split, rel=0.01)

    t = np.linspace(0, 40e-3, 801)
    y = an.ramsey_model(t, 0.2, 17.2e-3, 2.0, [2 * math.pi * 400], [0.4], 0.5, couplings=(67.0, 71.0))
    fit = an.ramsey_model_fit(t, y, freq_bracket=(2 * math.pi * 300, 2 * math.pi * 500), n_couplings=2,
                              coupling_bracket=(40.0, 100.0))
    assert fit["T2_star"] == pytest.approx(17.2e-3, rel=0.01) and fit["n"] == pytest.approx(2.0, rel=0.01)
    assert fit["J1"] == pytest.approx(67, rel=0.01) and fit["J2"] == pytest.approx(71, rel=0.01)

    frac = an.excited_state_fraction(np.array([0.1, 0.3, 0.5, 1.0]))
    for d in (208.0, -13.0):
        assert an.delta_hyperfine(frac, d * KHZ * frac)["delta_a"] == pytest.approx(d * KHZ, rel=0.01)


@criterion(17, "excited-state fraction 0.0833 / 0.25, monotone, asymptote 0.5; Ramsey phase sign flips")
def test_c17_eq8():
    assert round(an.excited_state_fraction(0.1), 4) == 0.0833
    assert an.excited_state_fraction(0.5) == 0.25
    f = an.excited_state_fraction(np.logspace(-4, 8, 500))
    assert np.all(np.diff(f) > 0) and np.all(f < 0.5) and f[-1] == pytest.approx(0.5, abs=1e-8)
    up = an.binned_ramsey_phase(5e-6, 0.5, 208 * KHZ, "up")
    assert up != 0 and an.binned_ramsey_phase(5e-6, 0.5, 208 * KHZ, "down") == -up


@criterion(18, "every CLI subcommand gives byte-identical CSVs on a repeated run")
def test_c18_determinism(tmp_path):
    seen = set()
    for path in sorted(CONFIGS.glob("*.json")):
        command = json.loads(path.read_text())["command"]
        seen.add(command)
        outs = []
        for k in range(2):
            d = tmp_path / f"{path.stem}_{k}"
            assert cli.main([command, "--config", str(path), "--out", str(d)]) == 0
            outs.append({p.name: p.read_bytes() for p in sorted(d.glob("*.csv"))})
        assert outs[0] and outs[0] == outs[1], path.name
    assert seen == set(cli.COMMANDS)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
