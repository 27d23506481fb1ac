"""Two-dimensional DDRF spectrum of C_B on a statistical 13C bath.

Half-spacing tau is placed where the drive's sinc tail on the other
transition is flat, so the dips sit on the conditional frequencies.  Also
calibrates the entangling amplitude on the upper dip.
"""

import math

import numpy as np
from _common import parser, plt, save, write_csv

from nucspin import ElectronSpec, NuclearSpinConfig, ddrf
from nucspin.bath import sample_baths, statistical_bath
from nucspin.optimize import ddrf_gate
from nucspin.spin import conditional_frequencies

KHZ = 2 * math.pi * 1e3


def main():
    ap = parser(__doc__, "ddrf_c_b")
    ap.add_argument("--n-pulses", type=int, default=16)
    ap.add_argument("--rabi-khz", type=float, default=1.64)
    args = ap.parse_args()
    e = ElectronSpec()
    c_b = NuclearSpinConfig.from_khz(1048.255, 304.47, 0.0)
    w0, w1 = conditional_frequencies(c_b, e)
    tau = ddrf.stationary_tail_tau(w1 - w0)
    sb = statistical_bath(sample_baths(args.seed, c_b.larmor, 2 if args.quick else 10), c_b.larmor)

    rf = np.arange(860, 1240.5, 4.0 if args.quick else 1.0) * KHZ
    wbar = np.linspace(1030, 1066, 13 if args.quick else 37) * KHZ
    cmap = ddrf.ddrf_spectrum([c_b], e, tau, args.n_pulses, rf, wbar, args.rabi_khz * KHZ, bath=sb)
    bath_only = ddrf.ddrf_spectrum([], e, tau, args.n_pulses, rf, wbar, args.rabi_khz * KHZ, bath=sb)
    rows = [(f / KHZ, w / KHZ, cmap.values[i, j], bath_only.values[i, j])
            for i, f in enumerate(rf) for j, w in enumerate(wbar)]
    write_csv(args.out / "ddrf_spectrum.csv", ["rf_khz", "omega_bar_khz", "with_c_b", "bath_only"], rows)

    j = int(np.argmin(np.abs(wbar - 0.5 * (w0 + w1))))
    row = cmap.values[:, j]
    lo = rf < 0.5 * (w0 + w1)
    d0, d1 = rf[lo][np.argmin(row[lo])] / KHZ, rf[~lo][np.argmin(row[~lo])] / KHZ
    print(f"tau = {tau * 1e6:.3f} us; dips at {d0:.1f} and {d1:.1f} kHz (splitting {d1 - d0:.1f} kHz)")

    gate = ddrf_gate(c_b, e, tau, args.n_pulses)
    amps = np.linspace(0, 10 * KHZ, 401)
    sweep = ddrf.ddrf_amplitude_sweep(c_b, gate, amps)
    star = ddrf.calibrate_ddrf_amplitude(c_b, gate, amps)
    write_csv(args.out / "amplitude_sweep.csv", ["rabi_hz", "signal"], zip(amps / (2 * math.pi), sweep))
    print(f"entangling Rabi frequency {star / KHZ:.4f} kHz")

    fig, ax = plt.subplots(1, 3, figsize=(14, 3.8))
    ext = [rf[0] / KHZ, rf[-1] / KHZ, wbar[0] / KHZ, wbar[-1] / KHZ]
    for a, m, title in ((ax[0], cmap.values, "C_B + bath"), (ax[1], bath_only.values, "bath only")):
        im = a.imshow(m.T, origin="lower", aspect="auto", extent=ext, vmin=0, vmax=1)
        a.axvline(c_b.larmor / KHZ, c="w", ls="--", lw=0.8)
        a.set(xlabel="RF frequency (kHz)", title=title)
    ax[0].set_ylabel("targeted mean frequency (kHz)")
    fig.colorbar(im, ax=ax[:2], label="|<sigma>|")
    ax[2].plot(amps / KHZ, sweep)
    ax[2].axvline(star / KHZ, ls="--", c="k", lw=0.8)
    ax[2].set(xlabel="Rabi frequency (kHz)", ylabel="signal", title="amplitude calibration")
    save(fig, args.out / "ddrf_c_b.png")


if __name__ == "__main__":
    main()
