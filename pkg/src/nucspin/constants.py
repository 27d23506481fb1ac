"""Physical constants. Angular units (rad/s) unless the name says otherwise."""

import math

TWO_PI = 2.0 * math.pi

GAMMA_C = TWO_PI * 10.71e6  # 13C gyromagnetic ratio, rad/s/T
GAMMA_E = TWO_PI * 28.02e9  # free electron, rad/s/T
MU0_OVER_4PI = 1e-7  # T m / A
HBAR = 1.054571817e-34  # J s
PLANCK = 6.62607015e-34  # J s
BOHR_MAGNETON = 9.2740100783e-24  # J/T

CARBON_DENSITY = 1.763e29  # diamond, atoms / m^3 (1.763e23 cm^-3)
NATURAL_ABUNDANCE = 0.011


def hz(f):
    """Convert a frequency in Hz (omega/2pi) to rad/s."""
    return TWO_PI * f


def khz(f):
    return TWO_PI * 1e3 * f


def to_hz(omega):
    """Convert rad/s to Hz."""
    return omega / TWO_PI


def to_khz(omega):
    return omega / (TWO_PI * 1e3)
