"""Analytic dynamical-decoupling (DD) gate physics.

Pulses are instantaneous and perfect.  One DD unit is ``tau - pi - 2tau - pi - tau``;
with the electron starting in level i the nucleus sees
``U_i = R_i(tau) R_j(2 tau) R_i(tau)`` (j = 1 - i).  After N/2 units the
electron coherence from one nuclear spin starting maximally mixed is
``M = Re Tr(U0 U1^dagger) / 2``; independent spins multiply.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import optimize

from . import rotations as rot
from .errors import FitDiverged, NoCrossing, NoRealSolution
from .results import Axis, CoherenceMap, FitResult
from .spin import (
    ElectronSpec,
    NuclearSpinConfig,
    hyperfine_from_frequencies,
    precession_arrays,
)

# spins per chunk when sweeping large baths over a tau grid
_CHUNK = 1 << 21


@dataclass(frozen=True)
class DDSequence:
    tau: float
    n_pulses: int

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("DDSequence: tau must be > 0")
        if self.n_pulses <= 0 or self.n_pulses % 2:
            raise ValueError(f"DDSequence: n_pulses must be even and positive (got {self.n_pulses})")

    @property
    def total_duration(self) -> float:
        return 2.0 * self.tau * self.n_pulses


def spin_arrays(spins: Sequence[NuclearSpinConfig]):
    """Split a list of spins into (larmor, a_par, a_perp) arrays."""
    larmor = np.array([s.larmor for s in spins], dtype=float)
    a_par = np.array([s.hyperfine.a_par for s in spins], dtype=float)
    a_perp = np.array([s.hyperfine.a_perp for s in spins], dtype=float)
    return larmor, a_par, a_perp


def unit_quaternions(larmor, a_par, a_perp, e: ElectronSpec, tau):
    """Branch propagators of one DD unit, broadcast over spins and ``tau``."""
    v0 = precession_arrays(larmor, a_par, a_perp, e.s0)
    v1 = precession_arrays(larmor, a_par, a_perp, e.s1)
    tau = np.asarray(tau, dtype=float)
    r0 = rot.qexp(v0, tau)
    r1 = rot.qexp(v1, tau)
    r0_2 = rot.qexp(v0, 2 * tau)
    r1_2 = rot.qexp(v1, 2 * tau)
    u0 = rot.qmul(r0, rot.qmul(r1_2, r0))
    u1 = rot.qmul(r1, rot.qmul(r0_2, r1))
    return u0, u1


def dd_signal_arrays(larmor, a_par, a_perp, e: ElectronSpec, tau, n_pulses):
    """Per-spin coherence signal M for every broadcast (spin, tau) pair."""
    u0, u1 = unit_quaternions(larmor, a_par, a_perp, e, tau)
    m = np.asarray(n_pulses, dtype=float) / 2.0
    q0 = rot.qpow(u0, m)
    q1 = rot.qpow(u1, m)
    # Re Tr(U0 U1^dag)/2 is the 4-vector dot product of the quaternions
    return np.clip(np.sum(q0 * q1, axis=-1), -1.0, 1.0)


def dd_unit_propagators(spin: NuclearSpinConfig, e: ElectronSpec, tau: float):
    """(U0, U1) of a single ``tau - pi - 2tau - pi - tau`` unit."""
    if not tau > 0:
        raise ValueError("tau must be > 0")
    hf = spin.hyperfine
    u0, u1 = unit_quaternions(spin.larmor, hf.a_par, hf.a_perp, e, tau)
    return rot.AxisAngleRotation.from_quaternion(u0), rot.AxisAngleRotation.from_quaternion(u1)


def dd_coherence(spins: Sequence[NuclearSpinConfig], e: ElectronSpec, seq: DDSequence) -> float:
    if len(spins) == 0:
        return 1.0
    larmor, a_par, a_perp = spin_arrays(spins)
    return float(np.prod(dd_signal_arrays(larmor, a_par, a_perp, e, seq.tau, seq.n_pulses)))


def electron_dd_coherence(total_time, n_pulses, e: ElectronSpec):
    """Stretched-exponential electron survival under N decoupling pulses."""
    total_time = np.asarray(total_time, dtype=float)
    if np.any(total_time < 0):
        raise ValueError("total_time must be >= 0")
    t2 = e.t2_echo * np.asarray(n_pulses, dtype=float) ** e.chi
    out = np.exp(-((total_time / t2) ** e.decay_exponent))
    return float(out) if out.ndim == 0 else out


def t2_dd(n_pulses, e: ElectronSpec):
    """Characteristic coherence time ``t2_echo * N**chi``."""
    return e.t2_echo * np.asarray(n_pulses, dtype=float) ** e.chi


def bath_product_over_tau(larmor, a_par, a_perp, e, tau_grid, n_pulses):
    """Product over spins of M for each tau, chunked to bound memory."""
    larmor, a_par, a_perp = (np.atleast_1d(np.asarray(x, float)) for x in (larmor, a_par, a_perp))
    tau_grid = np.atleast_1d(np.asarray(tau_grid, float))
    out = np.ones(tau_grid.shape)
    if larmor.size == 0:
        return out
    per = max(1, _CHUNK // larmor.size)
    for start in range(0, tau_grid.size, per):
        tau = tau_grid[start : start + per, None]
        m = dd_signal_arrays(larmor[None], a_par[None], a_perp[None], e, tau, n_pulses)
        out[start : start + per] = np.prod(m, axis=-1)
    return out


def dd_spectrum(
    spins: Sequence[NuclearSpinConfig],
    e: ElectronSpec,
    tau_grid,
    n_pulses: int,
    envelope: bool = False,
) -> CoherenceMap:
    tau_grid = np.asarray(tau_grid, dtype=float)
    if tau_grid.ndim != 1 or np.any(np.diff(tau_grid) <= 0):
        raise ValueError("tau_grid must be strictly increasing")
    DDSequence(float(tau_grid[0]), n_pulses)  # validates N and tau > 0
    if len(spins):
        values = bath_product_over_tau(*spin_arrays(spins), e, tau_grid, n_pulses)
    else:
        values = np.ones_like(tau_grid)
    if envelope:
        values = values * electron_dd_coherence(2 * tau_grid * n_pulses, n_pulses, e)
    return CoherenceMap(
        (Axis("tau", tau_grid, "s"),),
        values,
        meta={"n_pulses": int(n_pulses), "envelope": bool(envelope)},
    )


@dataclass
class GateCalibration:
    curve: CoherenceMap
    n_star: float
    bracket: tuple[int, int]


def first_zero_crossing(x, y):
    """First sign change of ``y`` along ``x`` with linear interpolation.

    Returns ``(x_star, (x_lo, x_hi))`` or None.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    for i in range(len(y) - 1):
        if y[i] == 0.0:
            return x[i], (x[i], x[i])
        if y[i] * y[i + 1] < 0:
            x_star = x[i] + (x[i + 1] - x[i]) * y[i] / (y[i] - y[i + 1])
            return x_star, (x[i], x[i + 1])
    if len(y) and y[-1] == 0.0:
        return x[-1], (x[-1], x[-1])
    return None


def dd_gate_calibration(
    spin: NuclearSpinConfig,
    e: ElectronSpec,
    tau: float,
    n_grid: Iterable[int] = range(2, 202, 2),
    envelope: bool = False,
) -> GateCalibration:
    """Signal versus pulse number at fixed tau; N* is the first zero crossing."""
    n_grid = np.asarray(list(n_grid), dtype=int)
    if np.any(n_grid <= 0) or np.any(n_grid % 2):
        raise ValueError("n_grid must contain positive even integers")
    if np.any(np.diff(n_grid) <= 0):
        raise ValueError("n_grid must be strictly increasing")
    hf = spin.hyperfine
    values = dd_signal_arrays(spin.larmor, hf.a_par, hf.a_perp, e, tau, n_grid)
    if envelope:
        values = values * electron_dd_coherence(2 * tau * n_grid, n_grid, e)
    curve = CoherenceMap(
        (Axis("n_pulses", n_grid, ""),), values, meta={"tau": float(tau), "envelope": bool(envelope)}
    )
    hit = first_zero_crossing(n_grid, values)
    if hit is None:
        raise NoCrossing(f"signal never crosses 0 for N in [{n_grid[0]}, {n_grid[-1]}]")
    n_star, (lo, hi) = hit
    return GateCalibration(curve, float(n_star), (int(lo), int(hi)))


def fit_larmor_from_calibration(
    curve: CoherenceMap,
    w0: float,
    w1: float,
    e: ElectronSpec = ElectronSpec(),
    bracket: tuple[float, float] | None = None,
    n_scan: int = 4001,
    max_rms: float = 0.05,
) -> FitResult:
    """Least-squares fit of the Larmor frequency to a DD calibration curve.

    For every trial Larmor frequency the hyperfine pair is re-derived from the
    independently measured (w0, w1), so the Larmor frequency is the only free
    parameter.  A dense scan locates the global minimum before a bounded
    refinement.
    """
    n = np.asarray(curve.axis("n_pulses").values, dtype=float)
    y = np.asarray(curve.values, dtype=float)
    tau = curve.meta["tau"]
    envelope = curve.meta.get("envelope", False)
    if np.ptp(y) < 1e-9:
        raise FitDiverged("calibration curve has no contrast")
    if bracket is None:
        mid = 0.5 * (w0 + w1)
        bracket = (mid - 0.05 * mid, mid + 0.05 * mid)
    env = electron_dd_coherence(2 * tau * n, n, e) if envelope else 1.0

    def model(larmor):
        hf = hyperfine_from_frequencies(w0, w1, larmor, e)
        return env * dd_signal_arrays(larmor, hf.a_par, hf.a_perp, e, tau, n)

    def ssr(larmor):
        try:
            return float(np.sum((model(larmor) - y) ** 2))
        except NoRealSolution:
            return math.inf

    grid = np.linspace(bracket[0], bracket[1], n_scan)
    costs = np.array([ssr(g) for g in grid])
    if not np.any(np.isfinite(costs)):
        raise FitDiverged("no Larmor frequency in the bracket is consistent with (w0, w1)")
    i = int(np.nanargmin(costs))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, n_scan - 1)]
    res = optimize.minimize_scalar(ssr, bounds=(lo, hi), method="bounded", options={"xatol": 1e-9 * grid[i]})
    best = float(res.x) if res.fun <= costs[i] else float(grid[i])
    cost = ssr(best)
    rms = math.sqrt(cost / len(y))
    if not math.isfinite(rms) or rms > max_rms:
        raise FitDiverged(f"rms residual {rms:.3g} exceeds {max_rms}")
    # curvature of the cost gives a 1-sigma estimate
    h = 1e-6 * best
    c_hi, c_lo = ssr(best + h), ssr(best - h)
    curv = (c_hi - 2 * cost + c_lo) / (h * h)
    dof = max(len(y) - 1, 1)
    sigma = math.sqrt(2 * (cost / dof) / curv) if curv > 0 and math.isfinite(curv) else math.inf
    return FitResult({"larmor": best}, {"larmor": sigma}, rms, True, {"larmor": "rad/s"})


@dataclass(frozen=True)
class DDGate:
    """A DD sequence bound to an electron, usable wherever a gate is expected."""

    sequence: DDSequence
    electron: ElectronSpec = ElectronSpec()

    @property
    def total_duration(self) -> float:
        return self.sequence.total_duration

    @property
    def n_pulses(self) -> int:
        return self.sequence.n_pulses

    def per_spin_signal(self, larmor, a_par, a_perp):
        return dd_signal_arrays(larmor, a_par, a_perp, self.electron, self.sequence.tau, self.sequence.n_pulses)
