"""Required Rabi frequency and fidelity estimate over (tau, total time) for C_B.

Picks the best gate under the 3.1 kHz amplitude limit, then runs the Bell
error budget and the readout inversion for that gate fidelity.
"""

import math

import numpy as np
from _common import parser, plt, save, write_csv

from nucspin import NuclearSpinConfig
from nucspin import analysis as an
from nucspin import optimize as opt
from nucspin.bath import sample_baths, statistical_bath

KHZ = 2 * math.pi * 1e3


def main():
    ap = parser(__doc__, "gate_c_b")
    args = ap.parse_args()
    c_b = NuclearSpinConfig.from_khz(1048.255, 304.47, 0.0)
    sb = statistical_bath(sample_baths(args.seed, c_b.larmor, 2), c_b.larmor)
    cons = opt.GateConstraints(max_rabi=3.1 * KHZ, min_electron_coherence=0.5)
    taus = np.arange(2e-6, 10.01e-6, 0.5e-6 if args.quick else 0.25e-6)
    ns = range(4, 81, 4 if args.quick else 2)
    best, feasible = opt.optimize_gate(c_b, sb, cons, taus, ns, return_all=True)
    write_csv(args.out / "candidates.csv", list(best.to_dict()), [b.to_dict().values() for b in feasible])

    f_bell = an.error_budget_bell(best.fidelity_estimate)
    print(f"best gate: tau = {best.tau * 1e6:.2f} us, N = {best.n_pulses}, "
          f"Rabi = {best.rabi / KHZ:.3f} kHz, F = {best.fidelity_estimate:.3f}")
    print(f"Bell estimate from that gate: {f_bell:.3f}")
    f_meas = an.gate_fidelity_from_contrast(0.559)
    print(f"contrast 0.559 -> F_gate = {f_meas:.4f} -> Bell estimate {an.error_budget_bell(f_meas):.4f}")

    fig, ax = plt.subplots(figsize=(5.5, 4))
    t = np.array([b.total_time for b in feasible]) * 1e6
    sc = ax.scatter([b.tau * 1e6 for b in feasible], t, c=[b.fidelity_estimate for b in feasible], s=12)
    ax.plot(best.tau * 1e6, best.total_time * 1e6, "rx", ms=10)
    ax.set(xlabel="tau (us)", ylabel="gate duration (us)", title="feasible gates (Rabi <= 3.1 kHz)")
    fig.colorbar(sc, label="fidelity estimate")
    save(fig, args.out / "gate_c_b.png")


if __name__ == "__main__":
    main()
