"""Random 13C baths around the electron and their binned statistical stand-in."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .constants import CARBON_DENSITY, GAMMA_C, GAMMA_E, HBAR, MU0_OVER_4PI, NATURAL_ABUNDANCE, TWO_PI
from .ddrf import weighted_product
from .spin import HyperfineParams, NuclearSpinConfig

DEFAULT_RADIUS = 30e-9
DD_CUTOFF = TWO_PI * 100e3
STAT_CUTOFF = TWO_PI * 20e3
STAT_BIN = TWO_PI * 2e3


def dipolar_prefactor(r):
    """``b = (mu0/4pi) * gamma_e * gamma_c * hbar / r^3`` in rad/s."""
    return MU0_OVER_4PI * GAMMA_E * GAMMA_C * HBAR / np.asarray(r, dtype=float) ** 3


def dipolar_hyperfine(r, theta):
    b = dipolar_prefactor(r)
    c = np.cos(theta)
    return b * (3 * c * c - 1), np.abs(3 * b * np.sin(theta) * c)


@dataclass(frozen=True)
class BathRealization:
    """Arrays of spin positions and couplings; all spins share one Larmor frequency."""

    seed: int
    larmor: float
    r: np.ndarray
    theta: np.ndarray
    a_par: np.ndarray
    a_perp: np.ndarray
    radius: float = DEFAULT_RADIUS

    def __len__(self):
        return int(self.r.size)

    @property
    def coupling(self) -> np.ndarray:
        return np.hypot(self.a_par, self.a_perp)

    @property
    def spins(self) -> list[NuclearSpinConfig]:
        return [
            NuclearSpinConfig(self.larmor, HyperfineParams(float(a), float(b)))
            for a, b in zip(self.a_par, self.a_perp)
        ]

    def weighted_arrays(self):
        return (np.full(self.r.shape, self.larmor), self.a_par, self.a_perp, None)

    def subset(self, mask) -> "BathRealization":
        return BathRealization(
            self.seed, self.larmor, self.r[mask], self.theta[mask], self.a_par[mask], self.a_perp[mask], self.radius
        )


def _rng(seed: int, index: int = 0) -> np.random.Generator:
    # counter-based generator, one substream per realization index
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


def expected_spin_count(radius=DEFAULT_RADIUS, abundance=NATURAL_ABUNDANCE, density=CARBON_DENSITY) -> float:
    return density * abundance * 4.0 / 3.0 * math.pi * radius**3


def sample_bath(
    seed: int,
    larmor: float,
    radius: float = DEFAULT_RADIUS,
    abundance: float = NATURAL_ABUNDANCE,
    index: int = 0,
    density: float = CARBON_DENSITY,
) -> BathRealization:
    """Poisson-distributed number of spins placed uniformly in a sphere."""
    if not radius > 0:
        raise ValueError("radius must be > 0")
    if not 0.0 <= abundance <= 1.0:
        raise ValueError("abundance must lie in [0, 1]")
    rng = _rng(seed, index)
    n = int(rng.poisson(expected_spin_count(radius, abundance, density)))
    # 1 - U lies in (0, 1], so no spin sits on the electron
    r = radius * (1.0 - rng.random(n)) ** (1.0 / 3.0)
    theta = np.arccos(1.0 - 2.0 * rng.random(n))
    a_par, a_perp = dipolar_hyperfine(r, theta)
    return BathRealization(int(seed), float(larmor), r, theta, a_par, a_perp, float(radius))


def sample_baths(seed, larmor, n_realizations, start=0, **kw) -> list[BathRealization]:
    return [sample_bath(seed, larmor, index=start + i, **kw) for i in range(n_realizations)]


def dd_bath_filter(bath: BathRealization, cutoff: float = DD_CUTOFF) -> BathRealization:
    """Keep spins with total coupling below ``cutoff`` (rad/s)."""
    return bath.subset(bath.coupling < cutoff)


@dataclass(frozen=True)
class StatisticalBath:
    larmor: float
    centers: np.ndarray
    weights: np.ndarray
    bin_width: float = STAT_BIN

    def __post_init__(self):
        if np.any(np.asarray(self.weights) < 0):
            raise ValueError("bin weights must be >= 0")

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.weights))

    def weighted_arrays(self):
        keep = np.asarray(self.weights) > 0
        c = np.asarray(self.centers)[keep]
        return (np.full(c.shape, self.larmor), c, np.zeros_like(c), np.asarray(self.weights)[keep])


def bin_edges(bin_width=STAT_BIN, cutoff=STAT_CUTOFF) -> np.ndarray:
    """Bins centred on multiples of ``bin_width``, clipped to ``[-cutoff, cutoff]``.

    Centring one bin on zero keeps the bulk of the bath, whose couplings are
    far below the bin width, at zero coupling instead of half a bin away.
    """
    if not (bin_width > 0 and cutoff > 0.5 * bin_width):
        raise ValueError("need bin_width > 0 and cutoff > bin_width/2")
    k = int(math.floor(cutoff / bin_width - 0.5 + 1e-12))
    inner = (np.arange(-k, k + 2) - 0.5) * bin_width
    edges = np.unique(np.clip(np.concatenate([[-cutoff], inner, [cutoff]]), -cutoff, cutoff))
    return edges


def statistical_bath(
    source,
    larmor: float,
    bin_width: float = STAT_BIN,
    cutoff: float = STAT_CUTOFF,
) -> StatisticalBath:
    """Bin the parallel couplings of a bath into an expected count per bin.

    ``source`` is either a sequence of :class:`BathRealization` (averaged) or a
    tabulated density: a pair ``(a_par_values, density)`` sampled on any grid,
    integrated over each bin with the trapezoid rule.  A perpendicular coupling
    only shifts the branch frequencies at second order and is set to zero.
    """
    edges = bin_edges(bin_width, cutoff)
    centers = np.clip(bin_width * np.round(0.5 * (edges[:-1] + edges[1:]) / bin_width), -cutoff, cutoff)
    # clipped outer bins keep their own midpoint
    outer = np.abs(np.diff(edges) - bin_width) > 1e-9 * bin_width
    centers[outer] = 0.5 * (edges[:-1] + edges[1:])[outer]
    if isinstance(source, tuple):
        x, dens = (np.asarray(v, dtype=float) for v in source)
        weights = np.zeros(centers.size)
        for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
            xs = np.concatenate([[lo], x[(x > lo) & (x < hi)], [hi]])
            weights[i] = np.trapezoid(np.interp(xs, x, dens, left=0, right=0), xs)
    else:
        realizations = list(source)
        weights = np.zeros(centers.size)
        for b in realizations:
            weights += np.histogram(b.a_par[np.abs(b.a_par) < cutoff], bins=edges)[0]
        if realizations:
            weights /= len(realizations)
    return StatisticalBath(float(larmor), centers, weights, float(bin_width))


def bath_signal(bath, gate) -> float:
    """Product of per-spin (or per-bin, weight-exponentiated) signals under ``gate``.

    ``gate`` needs a ``per_spin_signal(larmor, a_par, a_perp)`` method, as on
    :class:`nucspin.dd.DDGate` and :class:`nucspin.ddrf.DDRFGate`.
    """
    larmor, a_par, a_perp, w = bath.weighted_arrays()
    if len(a_par) == 0:
        return 1.0
    per = gate.per_spin_signal(larmor, a_par, a_perp)
    return float(weighted_product(per, w))


def bystander_density_annuli(
    n_realizations: int = 100,
    seed: int = 0,
    larmor: float = TWO_PI * 1048.52e3,
    n_annuli: int = 10,
    **bath_kw,
) -> np.ndarray:
    """Coupling-magnitude radii (ascending) with one spin per annulus on average.

    Radius j (counting from the strongest coupling) is placed where the mean
    number of spins with larger total coupling equals j.
    """
    if n_realizations < 1:
        raise ValueError("n_realizations must be >= 1")
    top = []
    for i in range(n_realizations):
        c = sample_bath(seed, larmor, index=i, **bath_kw).coupling
        # generous margin so Poisson spread in the top counts is not truncated
        k = min(c.size, 4 * n_annuli + 20)
        top.append(np.sort(np.partition(c, c.size - k)[c.size - k:]) if k else np.empty(0))
    pooled = np.sort(np.concatenate(top))[::-1]
    radii = []
    for j in range(1, n_annuli + 1):
        idx = j * n_realizations
        if idx > pooled.size:
            break
        # midpoint between the idx-th and (idx+1)-th strongest pooled couplings
        hi = pooled[idx - 1]
        lo = pooled[idx] if idx < pooled.size else hi
        radii.append(0.5 * (hi + lo))
    return np.array(radii[::-1])


def count_in_annuli(radii, couplings) -> np.ndarray:
    """Number of couplings in each ``[r_k, r_{k+1})`` interval."""
    return np.histogram(np.asarray(couplings), bins=np.asarray(radii))[0]


CSV_COLUMNS = ("r_m", "theta_rad", "a_par_hz", "a_perp_hz")


def export_bath_csv(bath: BathRealization, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in zip(bath.r, bath.theta, bath.a_par / TWO_PI, bath.a_perp / TWO_PI):
            w.writerow([format(float(v), ".17g") for v in row])


def import_bath_csv(path, larmor: float, seed: int = 0, radius: float | None = None) -> BathRealization:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"{Path(path).name}: expected columns {CSV_COLUMNS}, got {tuple(header)}")
        data = np.array([[float(v) for v in row] for row in reader if row]).reshape(-1, 4)
    r, theta, a_par, a_perp = data.T
    rad = float(radius) if radius is not None else (float(r.max()) if r.size else DEFAULT_RADIUS)
    return BathRealization(seed, larmor, r, theta, TWO_PI * a_par, TWO_PI * a_perp, rad)
