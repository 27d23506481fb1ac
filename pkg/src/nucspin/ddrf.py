"""Dynamically decoupled radio-frequency (DDRF) gates and direct RF driving.

The nucleus in each electron branch is a two-level system driven by the lab
field ``2*Omega*cos(w_rf*(t - ref) + phase) * Ix``.  Electron pi pulses are
instantaneous and swap the branch precession vector; RF continues across
them.

RF phases follow the nuclear spin at the mean precession frequency
``omega_bar``.  Every interval k gets a reference time ``r_k`` (0 for the
first interval, the total duration for the last and the midpoint otherwise);
the tone phase at ``r_k`` is ``phi_k = phi_{k-1} + omega_bar*(r_k - r_{k-1}) + pi``.
For equal spacing ``r_k - r_{k-1} = 2*tau`` and the increment is
:func:`phase_update`.  Both branches carry the nuclear phase ``omega_bar*r_k``
at those points, so the extra pi turns the drive axis over on alternate
intervals and the rotation becomes conditional on the electron.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence, Union

import numpy as np
from scipy import optimize

from . import rotations as rot
from .dd import DDSequence, first_zero_crossing, spin_arrays
from .errors import InvalidTiming, NoCrossing, StepTooCoarse
from .results import Axis, CoherenceMap
from .spin import ElectronSpec, NuclearSpinConfig, precession_arrays

TWO_PI = 2 * math.pi


# -- schedule types -----------------------------------------------------------

@dataclass(frozen=True)
class Tone:
    frequency: float
    amplitude: float
    phase: float = 0.0


@dataclass(frozen=True)
class RFSegment:
    """Square RF pulse. Tone phases are quoted at ``reference`` (default: ``start``)."""

    start: float
    duration: float
    tones: tuple[Tone, ...]
    reference: float | None = None

    def __post_init__(self):
        if not self.duration > 0:
            raise InvalidTiming(f"RF segment at {self.start!r} has non-positive duration")
        for t in self.tones:
            if np.any(np.asarray(t.amplitude) < 0):
                raise ValueError("tone amplitudes must be >= 0")

    @property
    def end(self) -> float:
        return self.start + self.duration

    @property
    def ref(self) -> float:
        return self.start if self.reference is None else self.reference


@dataclass(frozen=True)
class PulseSchedule:
    pi_pulse_times: tuple[float, ...]
    rf_segments: tuple[RFSegment, ...]
    total_duration: float
    target_omega_bar: float

    def __post_init__(self):
        times = np.asarray(self.pi_pulse_times, dtype=float)
        if np.any(np.diff(times) <= 0):
            raise InvalidTiming("pi-pulse times must be strictly increasing")
        if times.size and (times[0] < 0 or times[-1] > self.total_duration):
            raise InvalidTiming("pi pulses fall outside [0, total_duration]")
        prev_end = 0.0
        for seg in self.rf_segments:
            if seg.start < prev_end - 1e-15 * max(1.0, self.total_duration):
                raise InvalidTiming("RF segments overlap or are out of order")
            prev_end = seg.end
        if self.rf_segments and (self.rf_segments[0].start < 0 or prev_end > self.total_duration * (1 + 1e-12)):
            raise InvalidTiming("RF segments fall outside [0, total_duration]")


@dataclass(frozen=True)
class UDD:
    """Uhrig sequence: pulse j at ``T*sin^2(j*pi/(2N+2))``."""

    total_duration: float
    n_pulses: int

    def __post_init__(self):
        if not self.total_duration > 0 or self.n_pulses < 1:
            raise InvalidTiming("UDD needs total_duration > 0 and n_pulses >= 1")


@dataclass(frozen=True)
class SingleDrive:
    frequency: float
    rabi: float
    phase_offset: float = 0.0

    def tones(self):
        return [(self.frequency, self.rabi, self.phase_offset)]

    def with_rabi(self, rabi):
        return replace(self, rabi=rabi)


@dataclass(frozen=True)
class DoubleDrive:
    """Tones at both conditional frequencies, each with half the Rabi frequency.

    The tone at ``freq0`` is shifted by pi: in the branch that is resonant with
    it the drive must point opposite to the ``freq1`` tone for the two halves
    to add up.
    """

    freq0: float
    freq1: float
    rabi: float

    def tones(self):
        half = 0.5 * np.asarray(self.rabi)
        return [(self.freq0, half, math.pi), (self.freq1, half, 0.0)]

    def with_rabi(self, rabi):
        return replace(self, rabi=rabi)


Drive = Union[SingleDrive, DoubleDrive]


@dataclass(frozen=True)
class PropagationConfig:
    mode: Literal["rotating-wave", "full-drive"] = "rotating-wave"
    time_step: float | None = None
    steps_per_period: int = 200
    branch_tilt: Literal["ignore", "include"] = "ignore"
    electron_phase: float = 0.0
    # substeps per detuning period for several simultaneous tones in rotating-wave mode
    substeps_per_period: int = 100

    def __post_init__(self):
        if self.mode not in ("rotating-wave", "full-drive"):
            raise ValueError(f"unknown propagation mode {self.mode!r}")
        if self.branch_tilt not in ("ignore", "include"):
            raise ValueError(f"unknown branch_tilt {self.branch_tilt!r}")


# -- elementary formulas --------------------------------------------------------

def phase_update(tau: float, omega_bar: float) -> float:
    """RF phase step per pi pulse, ``(2*tau*omega_bar + pi) mod 2pi``."""
    if not tau > 0:
        raise ValueError("tau must be > 0")
    return math.fmod(2.0 * tau * omega_bar + math.pi, TWO_PI) % TWO_PI


def rf_frequency_response(delta, tau):
    """Relative drive strength ``sinc(delta*tau)`` of a square pulse of length 2*tau."""
    if not np.all(np.asarray(tau) > 0):
        raise ValueError("tau must be > 0")
    x = np.asarray(delta, dtype=float) * np.asarray(tau, dtype=float)
    out = np.sinc(x / math.pi)
    return float(out) if out.ndim == 0 else out


def stationary_tail_tau(splitting: float, order: int = 3) -> float:
    """Half-spacing at which the drive on the other transition has zero slope.

    A tone near one transition also drives the other one, ``splitting`` away,
    with strength ``sinc(splitting*tau)``.  Where that tail has a slope in the
    detuning, it pulls the coherence dips away from the true transition
    frequencies.  The slope vanishes at the ``order``-th positive root of
    ``tan x = x``, which this returns as ``tau = x / splitting``.
    """
    if not splitting > 0 or order < 1:
        raise ValueError("need splitting > 0 and order >= 1")
    lo, hi = order * math.pi, order * math.pi + 0.5 * math.pi - 1e-12
    x = optimize.brentq(lambda v: math.sin(v) - v * math.cos(v), lo + 1e-9, hi)
    return x / splitting


def udd_pulse_times(total_duration: float, n_pulses: int) -> np.ndarray:
    j = np.arange(1, n_pulses + 1)
    return total_duration * np.sin(j * math.pi / (2 * n_pulses + 2)) ** 2


def cpmg_pulse_times(tau: float, n_pulses: int) -> np.ndarray:
    return tau * (2 * np.arange(1, n_pulses + 1) - 1)


def _intervals(seq):
    if isinstance(seq, DDSequence):
        times = cpmg_pulse_times(seq.tau, seq.n_pulses)
        total = seq.total_duration
    elif isinstance(seq, UDD):
        times = udd_pulse_times(seq.total_duration, seq.n_pulses)
        total = seq.total_duration
    else:
        raise TypeError(f"unsupported sequence {seq!r}")
    edges = np.concatenate([[0.0], times, [total]])
    if np.any(np.diff(edges) <= 0):
        raise InvalidTiming("sequence produces non-positive intervals")
    refs = 0.5 * (edges[:-1] + edges[1:])
    refs[0] = 0.0
    refs[-1] = total
    return times, edges, refs, total


def interval_phases(seq, omega_bar: float, phase0: float = 0.0) -> np.ndarray:
    """RF phase of every interval (at its reference time), wrapped to [0, 2pi)."""
    _, edges, refs, _ = _intervals(seq)
    n = len(edges) - 1
    if isinstance(seq, DDSequence):
        steps = np.full(n - 1, phase_update(seq.tau, omega_bar))
    else:
        steps = np.mod(omega_bar * np.diff(refs) + math.pi, TWO_PI)
    phases = np.empty(n)
    phases[0] = phase0 % TWO_PI
    for k in range(1, n):
        phases[k] = (phases[k - 1] + steps[k - 1]) % TWO_PI
    return phases


def build_ddrf_schedule(seq, omega_bar: float, drive: Drive, phase0: float = 0.0) -> PulseSchedule:
    """One RF segment per interpulse interval with phase-tracked tones."""
    times, edges, refs, total = _intervals(seq)
    phases = interval_phases(seq, omega_bar, phase0)
    tones = drive.tones()
    segments = []
    for k in range(len(edges) - 1):
        seg_tones = tuple(
            Tone(float(f), float(a), float((phases[k] + off) % TWO_PI)) for f, a, off in tones
        )
        segments.append(RFSegment(float(edges[k]), float(edges[k + 1] - edges[k]), seg_tones, float(refs[k])))
    return PulseSchedule(tuple(float(t) for t in times), tuple(segments), float(total), float(omega_bar))


# -- propagation core ---------------------------------------------------------------------

@dataclass
class _Piece:
    ta: float
    tb: float
    parity: int
    # (frequency, amplitude, global phase) with the global phase quoted at t = 0
    tones: list = field(default_factory=list)


def _schedule_pieces(schedule: PulseSchedule) -> list[_Piece]:
    events = {0.0, schedule.total_duration}
    events.update(schedule.pi_pulse_times)
    for seg in schedule.rf_segments:
        events.update((seg.start, seg.end))
    events = sorted(t for t in events if 0.0 <= t <= schedule.total_duration)
    pulses = np.asarray(schedule.pi_pulse_times, dtype=float)
    pieces = []
    for ta, tb in zip(events[:-1], events[1:]):
        if tb <= ta:
            continue
        tm = 0.5 * (ta + tb)
        parity = int(np.searchsorted(pulses, tm)) % 2
        tones = []
        for seg in schedule.rf_segments:
            if seg.start <= tm <= seg.end:
                tones = [(t.frequency, t.amplitude, t.phase - t.frequency * seg.ref) for t in seg.tones]
                break
        pieces.append(_Piece(ta, tb, parity, tones))
    return pieces


def _sequence_pieces(seq, omega_bar, drive: Drive, phase0=0.0) -> list[_Piece]:
    """Pieces for a phase-tracked sequence; drive parameters may be arrays."""
    _, edges, refs, _ = _intervals(seq)
    phases = interval_phases(seq, omega_bar, phase0)
    pieces = []
    for k in range(len(edges) - 1):
        tones = []
        for f, a, off in drive.tones():
            f = np.asarray(f, dtype=float)
            tones.append((f, np.asarray(a, dtype=float), phases[k] + off - f * refs[k]))
        pieces.append(_Piece(float(edges[k]), float(edges[k + 1]), k % 2, tones))
    return pieces


def _frame_back(q_rot_frame, w_frame, ta, tb, beta):
    """Lab propagator from a frame tilted by ``beta`` about y and rotating at ``w_frame``."""
    w = rot.qy(beta)
    out = rot.qmul(q_rot_frame, rot.qz(-w_frame * ta))
    out = rot.qmul(rot.qz(w_frame * tb), out)
    return rot.qmul(w, rot.qmul(out, rot.qconj(w)))


def _piece_quaternion(piece: _Piece, vec, cfg: PropagationConfig):
    """Propagator of one piece for precession vectors ``vec`` (..., 3)."""
    ta, tb = piece.ta, piece.tb
    dt = tb - ta
    wmag = np.linalg.norm(vec, axis=-1)
    if cfg.branch_tilt == "include":
        beta = np.arctan2(vec[..., 0], vec[..., 2])
    else:
        beta = np.zeros_like(wmag)
    tones = [(f, a, p) for f, a, p in piece.tones if np.any(np.asarray(a) != 0)]

    if cfg.mode == "full-drive" and tones:
        return _full_drive_piece(piece, wmag, beta, tones, cfg)

    if not tones:
        axis = np.stack([np.sin(beta), np.zeros_like(beta), np.cos(beta)], axis=-1)
        return rot.qrot(axis, wmag * dt)

    cosb = np.cos(beta)
    if len(tones) == 1:
        f, a, psi = tones[0]
        a_eff = a * cosb
        h = np.stack(np.broadcast_arrays(a_eff * np.cos(psi), a_eff * np.sin(psi), wmag - f), axis=-1)
        return _frame_back(rot.qexp(h, dt), f, ta, tb, beta)

    # several tones: co-rotating terms only, stepped in the frame of the nucleus
    det_max = max(float(np.max(np.abs(np.asarray(f) - wmag))) for f, _, _ in tones)
    n_sub = max(8, math.ceil(cfg.substeps_per_period * det_max * dt / TWO_PI))
    step = dt / n_sub
    tm = ta + step * (np.arange(n_sub) + 0.5)
    tm = tm.reshape((n_sub,) + (1,) * np.ndim(wmag))
    hx = 0.0
    hy = 0.0
    for f, a, psi in tones:
        arg = (f - wmag) * tm + psi
        hx = hx + a * cosb * np.cos(arg)
        hy = hy + a * cosb * np.sin(arg)
    hx, hy = np.broadcast_arrays(hx, hy)
    h = np.stack([hx, hy, np.zeros_like(hx)], axis=-1)
    q = rot.chain(rot.qexp(h, step), axis=0)
    return _frame_back(q, wmag, ta, tb, beta)


def _full_drive_piece(piece, wmag, beta, tones, cfg):
    f_max = max(float(np.max(np.abs(np.asarray(f)))) for f, _, _ in tones)
    f_max = max(f_max, float(np.max(wmag)))
    period = TWO_PI / f_max
    if cfg.time_step is not None:
        if cfg.time_step > period / 50:
            raise StepTooCoarse(
                f"time_step {cfg.time_step:.3g} s exceeds 1/50 of the drive period ({period:.3g} s)"
            )
        dt_max = cfg.time_step
    else:
        dt_max = period / cfg.steps_per_period
    dt = piece.tb - piece.ta
    n = max(1, math.ceil(dt / dt_max))
    step = dt / n
    tm = piece.ta + step * (np.arange(n) + 0.5)
    tm = tm.reshape((n,) + (1,) * np.ndim(wmag))
    drive = 0.0
    for f, a, psi in tones:
        drive = drive + 2 * a * np.cos(f * tm + psi)
    hx = wmag * np.sin(beta) + drive
    hz = wmag * np.cos(beta)
    hx, hz = np.broadcast_arrays(hx, hz)
    h = np.stack([hx, np.zeros_like(hx), hz], axis=-1)
    return rot.chain(rot.qexp(h, step), axis=0)


def _batched_single_tone(pieces, vecs, branch, cfg):
    """All pieces at once when each carries at most one tone (rotating-wave only)."""
    parity = np.array([p.parity for p in pieces])
    shape = np.broadcast_shapes(
        np.shape(vecs[0]), *[np.shape(x) + (1,) for p in pieces for x in (p.tones[0] if p.tones else ())]
    )
    ext = (len(pieces),) + (1,) * (len(shape) - 1)
    sel = (parity ^ branch).reshape(ext + (1,))
    vec = np.where(sel == 1, vecs[1][None], vecs[0][None])
    f = np.stack([np.broadcast_to(p.tones[0][0] if p.tones else 0.0, shape[:-1]) for p in pieces])
    a = np.stack([np.broadcast_to(p.tones[0][1] if p.tones else 0.0, shape[:-1]) for p in pieces])
    psi = np.stack([np.broadcast_to(p.tones[0][2] if p.tones else 0.0, shape[:-1]) for p in pieces])
    ta = np.array([p.ta for p in pieces]).reshape(ext)
    tb = np.array([p.tb for p in pieces]).reshape(ext)
    wmag = np.linalg.norm(vec, axis=-1)
    if cfg.branch_tilt == "include":
        beta = np.arctan2(vec[..., 0], vec[..., 2])
    else:
        beta = np.zeros_like(wmag)
    a_eff = a * np.cos(beta)
    h = np.stack(np.broadcast_arrays(a_eff * np.cos(psi), a_eff * np.sin(psi), wmag - f), axis=-1)
    q = rot.qexp(h, tb - ta)
    f, ta, tb, beta = np.broadcast_arrays(f, ta, tb, beta)
    q = _frame_back(q, f, ta, tb, beta)
    return rot.chain(q, axis=0)


def _branch_quaternions(pieces, larmor, a_par, a_perp, e: ElectronSpec, cfg: PropagationConfig):
    vecs = (
        precession_arrays(larmor, a_par, a_perp, e.s0),
        precession_arrays(larmor, a_par, a_perp, e.s1),
    )
    if not pieces:
        q = np.broadcast_to(rot.IDENTITY, np.shape(vecs[0])[:-1] + (4,)).copy()
        return q, q.copy()
    batch = cfg.mode == "rotating-wave" and all(len(p.tones) <= 1 for p in pieces)
    out = []
    for branch in (0, 1):
        if batch:
            out.append(_batched_single_tone(pieces, vecs, branch, cfg))
            continue
        q = None
        for piece in pieces:
            qp = _piece_quaternion(piece, vecs[branch ^ piece.parity], cfg)
            q = qp if q is None else rot.qmul(qp, q)
        out.append(q)
    return out[0], out[1]


def _overlap(q0, q1):
    """Tr(U0 U1^dagger)/2, which is real for SU(2)."""
    return np.clip(np.sum(q0 * q1, axis=-1), -1.0, 1.0)


def weighted_product(values, weights=None):
    """Product of per-spin signals, raising each to its weight.

    For non-integer weights the magnitude is exponentiated and the sign enters
    with the rounded weight.
    """
    values = np.asarray(values, dtype=float)
    if weights is None:
        return np.prod(values, axis=-1)
    weights = np.asarray(weights, dtype=float)
    mag = np.prod(np.abs(values) ** weights, axis=-1)
    n_neg = np.sum(np.where(values < 0, np.rint(weights), 0.0), axis=-1)
    return mag * np.where(np.mod(n_neg, 2) == 1, -1.0, 1.0)


@dataclass
class DDRFResult:
    u0: np.ndarray
    u1: np.ndarray
    per_spin: np.ndarray
    signal: float
    magnitude: float

    def branch_rotations(self):
        return [
            (rot.AxisAngleRotation.from_quaternion(a), rot.AxisAngleRotation.from_quaternion(b))
            for a, b in zip(self.u0.reshape(-1, 4), self.u1.reshape(-1, 4))
        ]


def propagate_ddrf(
    schedule: PulseSchedule,
    spins: Sequence[NuclearSpinConfig],
    e: ElectronSpec,
    cfg: PropagationConfig = PropagationConfig(),
) -> DDRFResult:
    """Branch propagators and electron coherence for an explicit schedule."""
    if len(spins) == 0:
        empty = np.zeros((0, 4))
        return DDRFResult(empty, empty, np.zeros(0), math.cos(cfg.electron_phase), 1.0)
    pieces = _schedule_pieces(schedule)
    larmor, a_par, a_perp = spin_arrays(spins)
    q0, q1 = _branch_quaternions(pieces, larmor, a_par, a_perp, e, cfg)
    per = _overlap(q0, q1)
    total = float(np.prod(per))
    return DDRFResult(q0, q1, per, total * math.cos(cfg.electron_phase), abs(total))


def sequence_signal_arrays(seq, omega_bar, drive: Drive, larmor, a_par, a_perp, e, cfg=PropagationConfig(), phase0=0.0):
    """Per-spin overlaps for a phase-tracked sequence, broadcast over array-valued drives."""
    pieces = _sequence_pieces(seq, omega_bar, drive, phase0)
    q0, q1 = _branch_quaternions(pieces, larmor, a_par, a_perp, e, cfg)
    return _overlap(q0, q1)


# -- gates -------------------------------------------------------------------------------------

@dataclass(frozen=True)
class DDRFGate:
    sequence: Union[DDSequence, UDD]
    omega_bar: float
    drive: Drive
    electron: ElectronSpec = ElectronSpec()
    config: PropagationConfig = PropagationConfig()
    phase0: float = 0.0

    @property
    def total_duration(self) -> float:
        return self.sequence.total_duration

    @property
    def n_pulses(self) -> int:
        return self.sequence.n_pulses

    def schedule(self) -> PulseSchedule:
        return build_ddrf_schedule(self.sequence, self.omega_bar, self.drive, self.phase0)

    def with_rabi(self, rabi) -> "DDRFGate":
        return replace(self, drive=self.drive.with_rabi(rabi))

    def per_spin_signal(self, larmor, a_par, a_perp):
        return sequence_signal_arrays(
            self.sequence, self.omega_bar, self.drive, larmor, a_par, a_perp,
            self.electron, self.config, self.phase0,
        )


# -- experiments --------------------------------------------------------------------------------

def _bath_arrays(bath):
    if bath is None:
        return None
    return bath.weighted_arrays()


def ddrf_spectrum(
    spins: Sequence[NuclearSpinConfig],
    e: ElectronSpec,
    tau: float,
    n_pulses: int,
    rf_grid,
    omega_bar_grid,
    rabi: float,
    bath=None,
    drive: Literal["single", "double"] = "single",
    cfg: PropagationConfig = PropagationConfig(),
    threads: int = 1,
) -> CoherenceMap:
    """Electron coherence magnitude over (RF frequency, targeted omega_bar).

    For a double drive the second tone sits ``rf - 2*(rf - omega_bar)``, i.e.
    mirrored about the targeted mean frequency.
    """
    rf_grid = np.asarray(rf_grid, dtype=float)
    wbar_grid = np.asarray(omega_bar_grid, dtype=float)
    for name, g in (("rf_grid", rf_grid), ("omega_bar_grid", wbar_grid)):
        if g.ndim != 1 or np.any(np.diff(g) <= 0):
            raise ValueError(f"{name} must be strictly increasing")
    seq = DDSequence(tau, n_pulses)
    groups = []
    if len(spins):
        groups.append(spin_arrays(spins) + (None,))
    extra = _bath_arrays(bath)
    if extra is not None and len(extra[0]):
        groups.append(extra)

    def row(wbar):
        f = rf_grid[:, None]
        if drive == "single":
            drv = SingleDrive(f, rabi)
        elif drive == "double":
            drv = DoubleDrive(2 * wbar - f, f, rabi)
        else:
            raise ValueError(f"unknown drive {drive!r}")
        total = np.ones(rf_grid.shape)
        for larmor, a_par, a_perp, w in groups:
            per = sequence_signal_arrays(seq, wbar, drv, larmor[None], a_par[None], a_perp[None], e, cfg)
            total = total * weighted_product(per, None if w is None else w[None])
        return np.abs(total)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(row, wbar_grid))
    else:
        rows = [row(w) for w in wbar_grid]
    values = np.array(rows).T
    return CoherenceMap(
        (Axis("rf_frequency", rf_grid, "rad/s"), Axis("omega_bar", wbar_grid, "rad/s")),
        values,
        quantity="magnitude",
        meta={"tau": tau, "n_pulses": n_pulses, "rabi": rabi, "drive": drive},
    )


def ddrf_amplitude_sweep(spin: NuclearSpinConfig, gate: DDRFGate, amplitude_grid):
    amps = np.asarray(amplitude_grid, dtype=float)
    hf = spin.hyperfine
    g = gate.with_rabi(amps)
    return np.asarray(g.per_spin_signal(spin.larmor, hf.a_par, hf.a_perp)) * math.cos(gate.config.electron_phase)


def calibrate_ddrf_amplitude(spin: NuclearSpinConfig, gate: DDRFGate, amplitude_grid, refine: bool = True):
    """Smallest Rabi frequency at which the coherence signal crosses zero.

    The crossing is bracketed on ``amplitude_grid`` and, with ``refine``,
    polished by Brent's method on the exact simulation.
    """
    amps = np.asarray(amplitude_grid, dtype=float)
    if np.any(np.diff(amps) <= 0):
        raise ValueError("amplitude_grid must be strictly increasing")
    values = ddrf_amplitude_sweep(spin, gate, amps)
    hit = first_zero_crossing(amps, values)
    if hit is None:
        raise NoCrossing("coherence never crosses 0 on the amplitude grid")
    a_star, (lo, hi) = hit
    if refine and lo != hi:
        f = lambda a: float(ddrf_amplitude_sweep(spin, gate, np.array([a]))[0])
        a_star = optimize.brentq(f, lo, hi, xtol=1e-12 * hi)
    return float(a_star)


def _drive_rwa_quaternion(w_nuc, f, rabi, phase, duration):
    """Rotating-frame propagator (frame at ``f``) of a square resonant-ish pulse."""
    f, rabi, w_nuc = np.broadcast_arrays(np.asarray(f, float), np.asarray(rabi, float), np.asarray(w_nuc, float))
    h = np.stack([rabi * np.cos(phase), rabi * np.sin(phase), w_nuc - f], axis=-1)
    return rot.qexp(h, duration)


def direct_rf_nmr(
    spin: NuclearSpinConfig,
    e: ElectronSpec,
    electron_state: int,
    freq_grid,
    rabi: float,
    drive_duration: float = 300e-6,
    phase: float = math.pi / 2,
) -> CoherenceMap:
    """x-basis survival after a square RF pulse, with the electron held in one level.

    Readout is taken in the frame precessing with the free nucleus, so an
    undriven spin stays in |x>.
    """
    freq = np.asarray(freq_grid, dtype=float)
    s = e.projections[electron_state]
    w = float(np.linalg.norm(precession_arrays(spin.larmor, spin.hyperfine.a_par, spin.hyperfine.a_perp, s)))
    q = _drive_rwa_quaternion(w, freq, rabi, phase, drive_duration)
    q = rot.qmul(rot.qz((freq - w) * drive_duration), q)
    bloch = rot.to_matrix(q)[..., :, 0]
    survival = 0.5 * (1 + bloch[..., 0])
    return CoherenceMap(
        (Axis("rf_frequency", freq, "rad/s"),), survival, quantity="survival",
        meta={"electron_state": electron_state, "rabi": rabi, "duration": drive_duration},
    )


def rf_rabi(
    spin: NuclearSpinConfig,
    rabi: float,
    duration_grid,
    e: ElectronSpec = ElectronSpec(),
    electron_state: int = 0,
) -> CoherenceMap:
    """Population of the initial nuclear level under a resonant drive."""
    t = np.asarray(duration_grid, dtype=float)
    s = e.projections[electron_state]
    w = float(np.linalg.norm(precession_arrays(spin.larmor, spin.hyperfine.a_par, spin.hyperfine.a_perp, s)))
    q = _drive_rwa_quaternion(w, w, rabi, 0.0, t)
    bloch_z = rot.to_matrix(q)[..., 2, 2]
    return CoherenceMap(
        (Axis("duration", t, "s"),), 0.5 * (1 + bloch_z), quantity="population",
        meta={"rabi": rabi, "electron_state": electron_state},
    )


def nuclear_ramsey(
    spin: NuclearSpinConfig,
    e: ElectronSpec,
    electron_state: int,
    dt_grid,
    extra_couplings: Sequence[float] = (),
    t2_star: float = math.inf,
    decay_exponent: float = 2.0,
    contrast: float = 1.0,
    frame_frequency: float = 0.0,
) -> CoherenceMap:
    """x-basis Ramsey signal of a nucleus prepared in |x>.

    ``extra_couplings`` (Hz) are nuclear-nuclear couplings to unpolarized
    partners; each splits the line by +-J/2 and multiplies the fringe by
    ``cos(pi*J*t)``.  ``contrast`` models imperfect preparation and readout
    gates.  ``frame_frequency`` (rad/s) sets the demodulation frame.
    """
    t = np.asarray(dt_grid, dtype=float)
    s = e.projections[electron_state]
    vec = precession_arrays(spin.larmor, spin.hyperfine.a_par, spin.hyperfine.a_perp, s)
    q = rot.qexp(np.broadcast_to(vec, t.shape + (3,)), t)
    q = rot.qmul(rot.qz(-frame_frequency * t), q)
    signal = rot.to_matrix(q)[..., 0, 0]
    for j in extra_couplings:
        signal = signal * np.cos(math.pi * j * t)
    if math.isfinite(t2_star):
        signal = signal * np.exp(-((t / t2_star) ** decay_exponent))
    return CoherenceMap(
        (Axis("dt", t, "s"),), contrast * signal, quantity="sigma_x",
        meta={"electron_state": electron_state},
    )
