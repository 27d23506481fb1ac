"""DD detection of the strongly coupled spin C_A on top of a random 13C bath.

Writes the N=32 tau sweep (spin alone, bath envelope, spin plus bath) and the
pulse-number calibration at the dip, then fits the Larmor frequency back.
"""

import math

import numpy as np
from _common import parser, plt, save, write_csv

from nucspin import ElectronSpec, NuclearSpinConfig, dd
from nucspin.bath import dd_bath_filter, sample_baths
from nucspin.spin import average_frequency, conditional_frequencies, resonance_tau

KHZ = 2 * math.pi * 1e3


def main():
    ap = parser(__doc__, "dd_c_a")
    ap.add_argument("--realizations", type=int, default=10)
    args = ap.parse_args()
    e = ElectronSpec()
    c_a = NuclearSpinConfig.from_khz(1048.52, -130.9, 137.0)
    taus = np.linspace(6.2e-6, 6.7e-6, 101 if args.quick else 501)
    n = 32

    alone = dd.dd_spectrum([c_a], e, taus, n).values
    baths = [dd_bath_filter(b) for b in sample_baths(args.seed, c_a.larmor, 2 if args.quick else args.realizations)]
    bath = np.array([dd.bath_product_over_tau(*b.weighted_arrays()[:3], e, taus, n) for b in baths])
    total = alone * bath
    write_csv(args.out / "tau_sweep.csv", ["tau_s", "c_a", "bath_min", "bath_max", "total_min", "total_max"],
              zip(taus, alone, bath.min(0), bath.max(0), total.min(0), total.max(0)))

    tau_star = resonance_tau(average_frequency(c_a, e), 13)
    cal = dd.dd_gate_calibration(c_a, e, tau_star, range(2, 162, 2))
    write_csv(args.out / "pulse_sweep.csv", ["n_pulses", "signal"], zip(cal.curve.axes[0].values, cal.curve.values))
    w0, w1 = conditional_frequencies(c_a, e)
    fit = dd.fit_larmor_from_calibration(cal.curve, w0, w1, e)
    print(f"dip at tau = {taus[np.argmin(alone)] * 1e6:.3f} us, resonance {tau_star * 1e6:.3f} us")
    print(f"entangling gate at N* = {cal.n_star:.1f}; fitted Larmor {fit['larmor'] / KHZ:.3f} kHz")

    fig, ax = plt.subplots(1, 2, figsize=(10, 3.5))
    ax[0].fill_between(taus * 1e6, total.min(0), total.max(0), color="0.7", label="C_A + bath")
    ax[0].plot(taus * 1e6, alone, label="C_A")
    ax[0].axvline(tau_star * 1e6, ls="--", c="k", lw=0.8)
    ax[0].set(xlabel="tau (us)", ylabel="<sigma_x>", title=f"N = {n}")
    ax[0].legend()
    ax[1].plot(cal.curve.axes[0].values, cal.curve.values, ".-")
    ax[1].axhline(0, c="k", lw=0.5)
    ax[1].set(xlabel="N", ylabel="<sigma_x>", title=f"tau = {tau_star * 1e6:.3f} us")
    save(fig, args.out / "dd_c_a.png")


if __name__ == "__main__":
    main()
