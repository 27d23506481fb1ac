"""Gate-parameter search and the DD / DDRF bystander-selectivity comparison."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy import optimize as sopt

from .bath import bath_signal
from .constants import TWO_PI
from .dd import DDGate, DDSequence, dd_signal_arrays, electron_dd_coherence
from .ddrf import DDRFGate, DoubleDrive, PropagationConfig, SingleDrive
from .errors import Infeasible, InvalidTiming, NoFeasiblePoint
from .results import Axis, CoherenceMap
from .spin import ElectronSpec, HyperfineParams, NuclearSpinConfig, average_frequency, conditional_frequencies, resonance_tau

CROSSTALK_THRESHOLD = 0.05
COMPARISON_LARMOR = TWO_PI * 1048.52e3


@dataclass(frozen=True)
class GateConstraints:
    max_total_time: float = 1e-3
    min_electron_coherence: float = 0.99
    max_rabi: float = TWO_PI * 5e3
    electron: ElectronSpec = ElectronSpec()

    def __post_init__(self):
        if not (self.max_total_time > 0 and self.max_rabi >= 0):
            raise ValueError("max_total_time must be > 0 and max_rabi >= 0")
        if not 0 < self.min_electron_coherence <= 1:
            raise ValueError("min_electron_coherence must lie in (0, 1]")


@dataclass(frozen=True)
class GateBudget:
    """A candidate gate and its fidelity estimate.

    The estimate is ``(1 + electron_coherence * bath_survival) / 2``: the
    electron coherence left after the gate, turned into the fidelity of a
    qubit state whose Bloch vector shrank by that factor.
    """

    tau: float
    n_pulses: int
    rabi: float
    electron_coherence: float
    bath_survival: float
    fidelity_estimate: float
    method: str = "ddrf"
    target_signal: float = 0.0

    @property
    def total_time(self) -> float:
        return 2.0 * self.tau * self.n_pulses

    def to_dict(self):
        return {
            "method": self.method,
            "tau_s": self.tau,
            "n_pulses": int(self.n_pulses),
            "rabi_hz": self.rabi / TWO_PI,
            "total_time_s": self.total_time,
            "electron_coherence": self.electron_coherence,
            "bath_survival": self.bath_survival,
            "fidelity_estimate": self.fidelity_estimate,
            "target_signal": self.target_signal,
        }


def _sort_key(b: GateBudget):
    return (-b.fidelity_estimate, b.total_time, b.rabi, b.tau)


def pulses_for(tau: float, total_time: float) -> int:
    n = total_time / (2.0 * tau)
    k = int(round(n))
    if abs(n - k) > 1e-6 * max(1.0, n) or k <= 0 or k % 2:
        raise InvalidTiming(f"total_time {total_time!r} and tau {tau!r} do not give an even pulse count")
    return k


def ddrf_gate(spin: NuclearSpinConfig, e: ElectronSpec, tau: float, n_pulses: int, rabi=0.0,
              drive: Literal["single", "double"] = "single", cfg: PropagationConfig = PropagationConfig()) -> DDRFGate:
    """Phase-tracked DDRF gate on ``spin``; a single tone sits on the branch-1 frequency."""
    w0, w1 = conditional_frequencies(spin, e)
    wbar = 0.5 * (w0 + w1)
    drv = SingleDrive(w1, rabi) if drive == "single" else DoubleDrive(w0, w1, rabi)
    return DDRFGate(DDSequence(tau, n_pulses), wbar, drv, e, cfg)


def _target_signal(gate: DDRFGate, spin: NuclearSpinConfig, rabi):
    hf = spin.hyperfine
    return np.asarray(gate.with_rabi(rabi).per_spin_signal(spin.larmor, hf.a_par, hf.a_perp))


def required_rabi(
    tau: float,
    total_time: float,
    spin: NuclearSpinConfig,
    e: ElectronSpec,
    max_rabi: float = TWO_PI * 5e3,
    drive: Literal["single", "double"] = "single",
    cfg: PropagationConfig = PropagationConfig(),
    n_scan: int = 200,
) -> float:
    """Smallest Rabi frequency giving a fully entangling (pi/2 conditional) DDRF gate.

    The target signal is evaluated on an amplitude grid up to ``10*max_rabi``
    in one vectorized pass; the first sign change is polished with Brent's
    method.  Off-resonant driving of the other transition is included because
    the full gate is simulated.
    """
    n = pulses_for(tau, total_time)
    gate = ddrf_gate(spin, e, tau, n, 0.0, drive, cfg)
    top = 10.0 * max_rabi
    if not top > 0:
        raise Infeasible("max_rabi is zero")
    amps = np.linspace(0.0, top, n_scan + 1)
    vals = _target_signal(gate, spin, amps)
    sign = np.sign(vals)
    idx = np.nonzero(sign[:-1] * sign[1:] <= 0)[0]
    if idx.size == 0:
        raise Infeasible(f"no Rabi frequency below {top / TWO_PI:.4g} Hz entangles at tau={tau:.4g} s, N={n}")
    i = int(idx[0])
    if vals[i] == 0.0:
        return float(amps[i])
    f = lambda a: float(_target_signal(gate, spin, np.array([a]))[0])
    return float(sopt.brentq(f, amps[i], amps[i + 1], xtol=1e-12 * top, rtol=1e-13))


def gate_fidelity_estimate(gate, bath=None, electron: ElectronSpec | None = None, rabi: float = 0.0,
                           target_signal: float = 0.0) -> GateBudget:
    """Combine the DD electron envelope with the bath loss of ``gate``."""
    e = electron or gate.electron
    t = gate.total_duration
    ec = float(electron_dd_coherence(t, gate.n_pulses, e))
    bs = 1.0 if bath is None else abs(bath_signal(bath, gate))
    method = "dd" if isinstance(gate, DDGate) else "ddrf"
    tau = gate.sequence.tau if isinstance(gate.sequence, DDSequence) else t / (2 * gate.n_pulses)
    return GateBudget(tau, gate.n_pulses, float(rabi), ec, bs, 0.5 * (1.0 + ec * bs), method, float(target_signal))


def default_tau_grid(lo=1.0e-6, hi=10.0e-6, step=0.05e-6):
    return np.round(np.arange(lo, hi + 0.5 * step, step), 12)


def optimize_gate(
    spin: NuclearSpinConfig,
    bath,
    constraints: GateConstraints,
    tau_grid=None,
    n_grid=None,
    drive: Literal["single", "double"] = "single",
    cfg: PropagationConfig = PropagationConfig(),
    threads: int = 1,
    return_all: bool = False,
):
    """Grid search over (tau, N) for the DDRF gate with the best fidelity estimate.

    With ``return_all`` the feasible candidates are returned too, in grid order.
    """
    e = constraints.electron
    taus = default_tau_grid() if tau_grid is None else np.asarray(tau_grid, dtype=float)
    if constraints.max_rabi <= 0:
        raise NoFeasiblePoint("max_rabi = 0 admits no driven gate")

    def candidates():
        for tau in taus:
            if n_grid is None:
                ns = range(4, int(constraints.max_total_time / (2 * tau)) + 1, 4)
            else:
                ns = n_grid
            for n in ns:
                yield float(tau), int(n)

    def evaluate(point):
        tau, n = point
        t = 2 * tau * n
        if t > constraints.max_total_time * (1 + 1e-12):
            return None
        if electron_dd_coherence(t, n, e) < constraints.min_electron_coherence:
            return None
        try:
            rabi = required_rabi(tau, t, spin, e, constraints.max_rabi, drive, cfg)
        except (Infeasible, InvalidTiming, ValueError):
            return None
        if rabi > constraints.max_rabi:
            return None
        gate = ddrf_gate(spin, e, tau, n, rabi, drive, cfg)
        return gate_fidelity_estimate(gate, bath, e, rabi)

    points = list(candidates())
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(evaluate, points))
    else:
        results = [evaluate(p) for p in points]
    feasible = [r for r in results if r is not None]
    if not feasible:
        raise NoFeasiblePoint("no (tau, N) on the grid satisfies the constraints")
    best = min(feasible, key=_sort_key)
    return (best, feasible) if return_all else best


# -- selectivity -----------------------------------------------------------------------------------

def bystander_grid(lo_hz=0.1e3, hi_hz=1000e3, n=100):
    """Log-spaced |A_par| and A_perp axes (rad/s)."""
    return TWO_PI * np.logspace(math.log10(lo_hz), math.log10(hi_hz), n)


def _per_bystander_signal(gate, larmor, a_par, a_perp):
    return np.asarray(gate.per_spin_signal(larmor, a_par, a_perp))


def crosstalk_loss(gate, a_par_axis, a_perp_axis, larmor=COMPARISON_LARMOR, chunk=4096):
    """Electron coherence loss ``1 - M`` caused by one bystander at each grid point."""
    ap, aq = np.meshgrid(np.asarray(a_par_axis, float), np.asarray(a_perp_axis, float), indexing="ij")
    flat_p, flat_q = ap.ravel(), aq.ravel()
    out = np.empty(flat_p.size)
    for s in range(0, flat_p.size, chunk):
        sl = slice(s, s + chunk)
        out[sl] = 1.0 - _per_bystander_signal(gate, larmor, flat_p[sl], flat_q[sl])
    return out.reshape(ap.shape)


def crosstalk_map(
    method: Literal["dd", "ddrf"],
    e: ElectronSpec,
    target: HyperfineParams,
    gate: GateBudget,
    bystander_axes=None,
    larmor: float = COMPARISON_LARMOR,
    threshold: float = CROSSTALK_THRESHOLD,
    cfg: PropagationConfig = PropagationConfig(branch_tilt="include"),
) -> CoherenceMap:
    """True where a single bystander would cost more than ``threshold`` electron coherence."""
    g = _gate_object(method, e, NuclearSpinConfig(larmor, target), gate, cfg)
    if bystander_axes is None:
        axis = bystander_grid()
        bystander_axes = (axis, axis)
    a_par_axis, a_perp_axis = (np.asarray(a, float) for a in bystander_axes)
    loss = crosstalk_loss(g, a_par_axis, a_perp_axis, larmor)
    return CoherenceMap(
        (Axis("a_par", a_par_axis, "rad/s"), Axis("a_perp", a_perp_axis, "rad/s")),
        loss > threshold,
        quantity="crosstalk",
        meta={"method": method, "threshold": threshold, "gate": gate.to_dict()},
    )


def _gate_object(method, e, spin, budget: GateBudget, cfg):
    if method == "dd":
        return DDGate(DDSequence(budget.tau, budget.n_pulses), e)
    if method == "ddrf":
        return ddrf_gate(spin, e, budget.tau, budget.n_pulses, budget.rabi, "single", cfg)
    raise ValueError(f"unknown method {method!r}")


def dd_candidates(spin: NuclearSpinConfig, constraints: GateConstraints, orders: Iterable[int] | None = None,
                  half_width: float = 0.1e-6, step: float = 10e-9, max_pulses: int = 2048,
                  signal_tol: float = 0.1) -> list[GateBudget]:
    """DD gates near the target resonances whose best even N nearly zeroes the target signal."""
    e = constraints.electron
    wbar = average_frequency(spin, e)
    hf = spin.hyperfine
    if orders is None:
        p_max = int(2 * wbar * constraints.max_total_time / (2 * math.pi * 4))
        orders = range(0, max(p_max, 1) + 1)
    out = []
    for p in orders:
        tp = resonance_tau(wbar, p)
        taus = tp + np.arange(-half_width, half_width + 0.5 * step, step)
        taus = taus[taus > 0]
        for tau in taus:
            n_lim = min(max_pulses, int(constraints.max_total_time / (2 * tau)))
            ns = np.arange(2, n_lim + 1, 2)
            if ns.size == 0:
                continue
            t = 2 * tau * ns
            ec = electron_dd_coherence(t, ns, e)
            ok = ec >= constraints.min_electron_coherence
            if not np.any(ok):
                continue
            ns, ec = ns[ok], ec[ok]
            m = dd_signal_arrays(spin.larmor, hf.a_par, hf.a_perp, e, tau, ns)
            idx = np.nonzero(np.sign(m[:-1]) * np.sign(m[1:]) <= 0)[0]
            if idx.size == 0:
                continue
            i = int(idx[0])
            j = i if abs(m[i]) <= abs(m[i + 1]) else i + 1
            if abs(m[j]) > signal_tol:
                continue
            out.append(GateBudget(float(tau), int(ns[j]), 0.0, float(ec[j]), 1.0, 0.5 * (1 + float(ec[j])),
                                  "dd", float(m[j])))
    return out


def ddrf_candidates(spin: NuclearSpinConfig, constraints: GateConstraints, tau_grid=None, n_grid=None,
                    cfg: PropagationConfig = PropagationConfig(branch_tilt="include")) -> list[GateBudget]:
    e = constraints.electron
    taus = default_tau_grid(2e-6, 12e-6, 0.5e-6) if tau_grid is None else np.asarray(tau_grid, float)
    out = []
    for tau in taus:
        ns = range(8, int(constraints.max_total_time / (2 * tau)) + 1, 8) if n_grid is None else n_grid
        for n in ns:
            t = 2 * tau * n
            if t > constraints.max_total_time * (1 + 1e-12):
                continue
            ec = float(electron_dd_coherence(t, n, e))
            if ec < constraints.min_electron_coherence:
                continue
            try:
                rabi = required_rabi(float(tau), t, spin, e, constraints.max_rabi, "single", cfg)
            except Infeasible:
                continue
            if rabi > constraints.max_rabi:
                continue
            out.append(GateBudget(float(tau), int(n), rabi, ec, 1.0, 0.5 * (1 + ec), "ddrf", 0.0))
    return out


@dataclass
class SelectivityResult:
    gate: GateBudget
    area: int
    crosstalk: CoherenceMap
    n_candidates: int
    annuli: np.ndarray | None = None

    def summary(self):
        return {"gate": self.gate.to_dict(), "crosstalk_cells": int(self.area), "n_candidates": self.n_candidates}


def optimize_selectivity(
    method: Literal["dd", "ddrf"],
    e: ElectronSpec,
    target: HyperfineParams,
    constraints: GateConstraints,
    bystander_axes=None,
    annuli=None,
    larmor: float = COMPARISON_LARMOR,
    candidates: Sequence[GateBudget] | None = None,
    cfg: PropagationConfig = PropagationConfig(branch_tilt="include"),
    threads: int = 1,
    **candidate_kw,
) -> SelectivityResult:
    """Feasible gate on ``target`` with the fewest crosstalk cells on the bystander grid.

    The area is an unweighted cell count.  Ties go to the shorter gate, then
    the lower Rabi frequency, then the smaller tau.
    """
    constraints = replace(constraints, electron=e)
    spin = NuclearSpinConfig(larmor, target)
    if candidates is None:
        if method == "dd":
            candidates = dd_candidates(spin, constraints, **candidate_kw)
        elif method == "ddrf":
            candidates = ddrf_candidates(spin, constraints, cfg=cfg, **candidate_kw)
        else:
            raise ValueError(f"unknown method {method!r}")
    candidates = list(candidates)
    if not candidates:
        raise NoFeasiblePoint(f"no feasible {method} gate on the target")
    if bystander_axes is None:
        axis = bystander_grid()
        bystander_axes = (axis, axis)

    def score(b):
        m = crosstalk_map(method, e, target, b, bystander_axes, larmor, cfg=cfg)
        return int(np.count_nonzero(m.values)), m

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            scored = list(ex.map(score, candidates))
    else:
        scored = [score(b) for b in candidates]
    order = sorted(range(len(candidates)), key=lambda i: (scored[i][0], candidates[i].total_time,
                                                         candidates[i].rabi, candidates[i].tau))
    best = order[0]
    return SelectivityResult(candidates[best], scored[best][0], scored[best][1], len(candidates),
                             None if annuli is None else np.asarray(annuli))
