"""Brute-force reference simulations used to check the fast engines.

Everything here works with dense matrices on the full electron (x) nuclei
Hilbert space and shares no code with the quaternion propagators.
"""

from __future__ import annotations

import math
from functools import reduce

import numpy as np
from scipy.linalg import expm

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)


def _kron(*ops):
    return reduce(np.kron, ops)


def _nuclear_op(op, k, n_nuclei):
    ops = [I2] * (n_nuclei + 1)
    ops[k + 1] = op
    return _kron(*ops)


def hyperfine_hamiltonian(spins, s0, s1):
    """Secular Hamiltonian on electron (x) nuclei; electron levels (|0>, |1>) -> (s0, s1)."""
    n = len(spins)
    sz_e = _kron(np.diag([s0, s1]).astype(complex), *([I2] * n))
    dim = 2 ** (n + 1)
    h = np.zeros((dim, dim), dtype=complex)
    for k, sp in enumerate(spins):
        iz = _nuclear_op(SZ / 2, k, n)
        ix = _nuclear_op(SX / 2, k, n)
        h += sp.larmor * iz + sp.hyperfine.a_par * sz_e @ iz + sp.hyperfine.a_perp * sz_e @ ix
    return h


def _electron_x(n):
    return _kron(SX, *([I2] * n))


def _coherence(u, n):
    """<sigma_x> of the electron after ``u`` acting on |+><+| (x) maximally mixed nuclei."""
    plus = np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex)
    rho = _kron(plus, *([I2 / 2] * n))
    rho = u @ rho @ u.conj().T
    return float(np.real(np.trace(rho @ _electron_x(n))))


def dd_oracle(spins, e, tau, n_pulses):
    """Electron coherence after ``tau - (pi - 2tau)^(N-1) - pi - tau`` with explicit pulses."""
    n = len(spins)
    if n == 0:
        return 1.0
    h = hyperfine_hamiltonian(spins, e.s0, e.s1)
    u_tau = expm(-1j * h * tau)
    u_2tau = expm(-1j * h * 2 * tau)
    x = _electron_x(n)
    block = u_2tau @ x
    u = u_tau @ x @ np.linalg.matrix_power(block, n_pulses - 1) @ u_tau
    return _coherence(u, n)


def _expm_hermitian_batch(h, dt):
    w, v = np.linalg.eigh(h)
    phase = np.exp(-1j * w * dt[..., None])
    return np.einsum("...ij,...j,...kj->...ik", v, phase, v.conj())


def _ordered_product(us):
    # us[0] acts first
    while len(us) > 1:
        if len(us) % 2:
            us = np.concatenate([us, np.eye(us.shape[-1])[None]], axis=0)
        us = us[1::2] @ us[0::2]
    return us[0]


def ddrf_oracle(schedule, spin, e, steps_per_period=400):
    """Electron coherence for one nuclear spin under the full lab-frame RF drive.

    The RF field couples to the nuclear ``Ix`` as ``2*Omega*cos(w*(t - ref) + phase)``;
    the Hamiltonian is sampled at step midpoints and exponentiated exactly.
    """
    h0 = hyperfine_hamiltonian([spin], e.s0, e.s1)
    ix = _nuclear_op(SX / 2, 0, 1)
    x = _electron_x(1)
    f_max = max([spin.larmor] + [abs(t.frequency) for seg in schedule.rf_segments for t in seg.tones])
    dt_max = 2 * math.pi / f_max / steps_per_period

    events = sorted(set([0.0, schedule.total_duration, *schedule.pi_pulse_times]
                        + [s.start for s in schedule.rf_segments]
                        + [s.start + s.duration for s in schedule.rf_segments]))
    pulses = set(schedule.pi_pulse_times)
    u = np.eye(4, dtype=complex)
    for ta, tb in zip(events[:-1], events[1:]):
        if ta in pulses:
            u = x @ u
        if tb - ta <= 0:
            continue
        n = max(1, math.ceil((tb - ta) / dt_max))
        dt = (tb - ta) / n
        tm = ta + dt * (np.arange(n) + 0.5)
        drive = np.zeros(n)
        tmid = 0.5 * (ta + tb)
        for seg in schedule.rf_segments:
            if seg.start <= tmid <= seg.start + seg.duration:
                ref = seg.start if seg.reference is None else seg.reference
                for tone in seg.tones:
                    drive += 2 * tone.amplitude * np.cos(tone.frequency * (tm - ref) + tone.phase)
        hs = h0[None] + drive[:, None, None] * ix[None]
        u = _ordered_product(_expm_hermitian_batch(hs, np.full(n, dt))) @ u
    if schedule.total_duration in pulses:
        u = x @ u
    return _coherence(u, 1)


# -- Bell-state circuit oracle ---------------------------------------------

def _rx(theta):
    return math.cos(theta / 2) * I2 - 1j * math.sin(theta / 2) * SX


def _rz(theta):
    return math.cos(theta / 2) * I2 - 1j * math.sin(theta / 2) * SZ


def _ry(theta):
    return math.cos(theta / 2) * I2 - 1j * math.sin(theta / 2) * SY


P0 = np.diag([1, 0]).astype(complex)
P1 = np.diag([0, 1]).astype(complex)
CRX = np.kron(P0, _rx(math.pi / 2)) + np.kron(P1, _rx(-math.pi / 2))
PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)


def bell_mixture_oracle(f_gate, circuit):
    """Average over the four error patterns of the two entangling gates.

    ``circuit(errors)`` returns the (unnormalized) post-selected pure state for a
    tuple of booleans saying which gate is followed by an electron Z flip.
    """
    rho = np.zeros((4, 4), dtype=complex)
    for e1 in (False, True):
        for e2 in (False, True):
            p = (f_gate if not e1 else 1 - f_gate) * (f_gate if not e2 else 1 - f_gate)
            for psi in circuit((e1, e2)):
                rho += p * np.outer(psi, psi.conj())
    rho /= np.real(np.trace(rho))
    return float(np.real(PHI_PLUS.conj() @ rho @ PHI_PLUS))


def bell_circuit_branches(errors):
    """Unnormalized post-selected states for one error pattern.

    The unpolarized nucleus is unravelled into |0> and |1> starts (weight 1/2 each).
    """
    ze = np.kron(SZ, I2)
    ye = np.kron(_ry(math.pi / 2), I2)
    xe = np.kron(_rx(math.pi / 2), I2)
    zn = np.kron(I2, _rz(math.pi / 2))
    frame = np.kron(_rz(-math.pi / 2), I2)
    herald = np.kron(P0, I2)
    out = []
    for n0 in (np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)):
        psi = np.kron(np.array([1, 0], dtype=complex), n0) / math.sqrt(2)
        psi = CRX @ (ye @ psi)
        if errors[0]:
            psi = ze @ psi
        psi = herald @ (xe @ psi)
        psi = CRX @ (zn @ (ye @ psi))
        if errors[1]:
            psi = ze @ psi
        out.append(frame @ psi)
    return out
