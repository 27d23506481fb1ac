"""Kinematics of one 13C spin coupled to a central electron spin.

Secular hyperfine Hamiltonian ``wL*Iz + A_par*Sz*Iz + A_perp*Sz*Ix``.  With the
electron in qubit level i (spin projection s_i) the nucleus precesses about
``(s_i*A_perp, 0, wL + s_i*A_par)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .constants import GAMMA_C, TWO_PI
from .errors import NoRealSolution


@dataclass(frozen=True)
class HyperfineParams:
    """Hyperfine pair in rad/s. ``a_perp`` is non-negative by frame choice."""

    a_par: float
    a_perp: float = 0.0

    def __post_init__(self):
        if self.a_perp < 0:
            raise ValueError(f"a_perp must be >= 0 (got {self.a_perp!r}); absorb the sign in the frame")

    @classmethod
    def from_khz(cls, a_par_khz, a_perp_khz=0.0):
        return cls(TWO_PI * 1e3 * a_par_khz, TWO_PI * 1e3 * abs(a_perp_khz))

    @property
    def magnitude(self) -> float:
        return math.hypot(self.a_par, self.a_perp)


@dataclass(frozen=True)
class NuclearSpinConfig:
    larmor: float
    hyperfine: HyperfineParams = HyperfineParams(0.0, 0.0)

    def __post_init__(self):
        if not self.larmor > 0:
            raise ValueError(f"larmor must be > 0 (got {self.larmor!r})")

    @classmethod
    def from_khz(cls, larmor_khz, a_par_khz=0.0, a_perp_khz=0.0):
        return cls(TWO_PI * 1e3 * larmor_khz, HyperfineParams.from_khz(a_par_khz, a_perp_khz))

    @classmethod
    def from_field(cls, b_tesla, hyperfine=HyperfineParams(0.0, 0.0)):
        return cls(GAMMA_C * b_tesla, hyperfine)


@dataclass(frozen=True)
class ElectronSpec:
    """Qubit-level spin projections and the coherence model of the electron.

    ``t2_echo``, ``chi`` and ``decay_exponent`` parametrize the DD envelope
    ``exp(-(T / (t2_echo * N**chi))**decay_exponent)``.
    """

    s0: float = -0.5
    s1: float = 0.5
    t2_echo: float = 129e-6
    chi: float = 0.47
    decay_exponent: float = 2.0

    def __post_init__(self):
        if self.s0 == self.s1:
            raise ValueError("s0 and s1 must differ")
        if not self.t2_echo > 0:
            raise ValueError("t2_echo must be > 0")
        if not 0 < self.chi <= 1:
            raise ValueError("chi must lie in (0, 1]")
        if not self.decay_exponent > 0:
            raise ValueError("decay_exponent must be > 0")

    @property
    def projections(self) -> tuple[float, float]:
        return (self.s0, self.s1)

    @classmethod
    def spin_half(cls, **kw):
        return cls(s0=-0.5, s1=0.5, **kw)

    @classmethod
    def spin_one(cls, s1=1.0, **kw):
        return cls(s0=0.0, s1=s1, **kw)


@dataclass(frozen=True)
class PrecessionVector:
    x: float
    z: float

    @property
    def magnitude(self) -> float:
        return math.hypot(self.x, self.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, 0.0, self.z])


def precession_vector(spin: NuclearSpinConfig, s: float) -> PrecessionVector:
    hf = spin.hyperfine
    return PrecessionVector(s * hf.a_perp, spin.larmor + s * hf.a_par)


def precession_arrays(larmor, a_par, a_perp, s):
    """Vectorized precession vectors, shape (..., 3)."""
    larmor, a_par, a_perp = np.broadcast_arrays(
        np.asarray(larmor, float), np.asarray(a_par, float), np.asarray(a_perp, float)
    )
    return np.stack([s * a_perp, np.zeros_like(larmor), larmor + s * a_par], axis=-1)


def conditional_frequencies(spin: NuclearSpinConfig, e: ElectronSpec) -> tuple[float, float]:
    return (
        precession_vector(spin, e.s0).magnitude,
        precession_vector(spin, e.s1).magnitude,
    )


def average_frequency(
    spin: NuclearSpinConfig,
    e: ElectronSpec,
    mode: Literal["exact", "expansion"] = "exact",
) -> float:
    """Mean conditional precession frequency (rad/s).

    ``expansion`` is the second-order high-field series in the hyperfine
    parameters; only meaningful for ``wL >> A_par, A_perp``.
    """
    if mode == "exact":
        w0, w1 = conditional_frequencies(spin, e)
        return 0.5 * (w0 + w1)
    if mode == "expansion":
        wl = spin.larmor
        hf = spin.hyperfine
        s0, s1 = e.s0, e.s1
        return wl * (
            1.0
            + 0.5 * (s0 + s1) * hf.a_par / wl
            + 0.25 * (s0 * s0 + s1 * s1) * (hf.a_perp / wl) ** 2
        )
    raise ValueError(f"unknown mode {mode!r}")


def resonance_tau(omega_bar: float, p: int) -> float:
    """Interpulse delay of the p-th DD resonance, ``(2p+1)*pi / (2*omega_bar)``."""
    if not omega_bar > 0:
        raise ValueError("omega_bar must be > 0")
    if p < 0:
        raise ValueError("resonance order must be >= 0")
    return (2 * p + 1) * math.pi / (2.0 * omega_bar)


def hyperfine_from_frequencies(w0: float, w1: float, larmor: float, e: ElectronSpec) -> HyperfineParams:
    """Invert the magnitudes of the two conditional precession vectors.

    Writing ``q = A_par**2 + A_perp**2``, each branch gives the linear equation
    ``2*s_i*wL*A_par + s_i**2*q = w_i**2 - wL**2``.
    """
    s0, s1 = e.s0, e.s1
    det = 2.0 * larmor * s0 * s1 * (s1 - s0)
    if s0 == 0.0 or s1 == 0.0:
        raise NoRealSolution(
            "a zero spin projection leaves one branch at the Larmor frequency; "
            "(A_par, A_perp) cannot both be recovered"
        )
    r0 = w0 * w0 - larmor * larmor
    r1 = w1 * w1 - larmor * larmor
    # Cramer's rule on [[2 s0 wL, s0^2], [2 s1 wL, s1^2]] @ (a, q) = (r0, r1)
    a_par = (r0 * s1 * s1 - r1 * s0 * s0) / det
    q = (2.0 * larmor * s0 * r1 - 2.0 * larmor * s1 * r0) / det
    perp_sq = q - a_par * a_par
    if perp_sq < -((1e-6 * larmor) ** 2):
        raise NoRealSolution(f"implied A_perp^2 = {perp_sq:.6g} (rad/s)^2 is negative")
    return HyperfineParams(a_par, math.sqrt(max(perp_sq, 0.0)))
