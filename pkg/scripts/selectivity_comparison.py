"""Bystander crosstalk of DD and DDRF gates for spin-1/2 and spin-1 electrons.

Target (A_par, A_perp) = (100, 50) kHz, 1 ms gate budget, 99% electron
coherence and at most 5 kHz drive.  Annuli mark where one bystander is
expected on average.
"""

import math

import numpy as np
from _common import parser, plt, save, write_csv

from nucspin import ElectronSpec, HyperfineParams
from nucspin import optimize as opt
from nucspin.bath import bystander_density_annuli

KHZ = 2 * math.pi * 1e3


def main():
    ap = parser(__doc__, "selectivity")
    ap.add_argument("--grid", type=int, default=100)
    args = ap.parse_args()
    n = 30 if args.quick else args.grid
    axis = opt.bystander_grid(0.1e3, 1000e3, n)
    target = HyperfineParams(100 * KHZ, 50 * KHZ)
    annuli = bystander_density_annuli(20 if args.quick else 100, seed=args.seed)
    write_csv(args.out / "annuli.csv", ["radius_khz"], [[r / KHZ] for r in annuli])

    fig, axes = plt.subplots(2, 2, figsize=(9, 8), sharex=True, sharey=True)
    ext = [axis[0] / KHZ, axis[-1] / KHZ, axis[0] / KHZ, axis[-1] / KHZ]
    phi = np.linspace(0, math.pi / 2, 100)
    for row, (kind, e) in enumerate((("spin-1/2", ElectronSpec.spin_half(t2_echo=1e-3, chi=2 / 3)),
                                     ("spin-1", ElectronSpec.spin_one(t2_echo=1e-3, chi=2 / 3)))):
        cons = opt.GateConstraints(1e-3, 0.99, 5 * KHZ, e)
        for col, method in enumerate(("dd", "ddrf")):
            res = opt.optimize_selectivity(method, e, target, cons, (axis, axis))
            g = res.gate
            print(f"{method:4s} {kind:8s} cells = {res.area:5d}  tau = {g.tau * 1e6:.3f} us, N = {g.n_pulses}, "
                  f"Rabi = {g.rabi / KHZ:.3f} kHz")
            tag = f"{method}_{kind.replace('/', '_')}"
            write_csv(args.out / f"crosstalk_{tag}.csv", ["a_par_khz", "a_perp_khz", "crosstalk"],
                      [(p / KHZ, q / KHZ, int(res.crosstalk.values[i, j]))
                       for i, p in enumerate(axis) for j, q in enumerate(axis)])
            a = axes[row, col]
            a.imshow(res.crosstalk.values.T, origin="lower", extent=ext, cmap="Blues", aspect="auto")
            for r in annuli / KHZ:
                a.plot(r * np.cos(phi), r * np.sin(phi), c="0.6", lw=0.5)
            a.plot(100, 50, "r*")
            a.set(xscale="log", yscale="log", title=f"{method.upper()} {kind}: {res.area} cells")
            a.set_xlim(ext[:2])
            a.set_ylim(ext[2:])
    for a in axes[-1]:
        a.set_xlabel("|A_par| (kHz)")
    for a in axes[:, 0]:
        a.set_ylabel("A_perp (kHz)")
    save(fig, args.out / "selectivity.png")


if __name__ == "__main__":
    main()
