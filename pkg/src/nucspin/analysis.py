"""Fit models and post-processing: decays, Ramsey fringes, readout correction, Bell budget."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Literal, NamedTuple, Sequence

import numpy as np
from scipy import optimize

from .constants import BOHR_MAGNETON, PLANCK, TWO_PI
from .errors import FitDiverged, OutOfRange
from .results import FitResult


class Estimate(NamedTuple):
    value: float
    uncertainty: float


def _clean(t, y, min_points):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("t and y must be 1-D arrays of equal length")
    if t.size < min_points:
        raise FitDiverged(f"need at least {min_points} points, got {t.size}")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
        raise FitDiverged("data contain non-finite values")
    return t, y


def _uncertainties(res, n_data):
    """1-sigma from the Jacobian, scaled by the residual variance."""
    jac = res.jac
    dof = max(n_data - jac.shape[1], 1)
    s2 = float(np.sum(res.fun**2)) / dof
    try:
        cov = np.linalg.pinv(jac.T @ jac) * s2
    except np.linalg.LinAlgError:
        return np.full(jac.shape[1], math.inf)
    return np.sqrt(np.clip(np.diag(cov), 0.0, None))


def _lsq(fun, x0, lb, ub, n_data):
    res = optimize.least_squares(fun, x0, bounds=(lb, ub), method="trf", x_scale="jac",
                                 xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
    if not res.success and res.status <= 0:
        raise FitDiverged(res.message)
    return res, _uncertainties(res, n_data)


# -- stretched exponential --------------------------------------------------------------------

def stretched_exponential(t, a, tau, n, c=0.0):
    return a * np.exp(-((np.asarray(t, dtype=float) / tau) ** n)) + c


def fit_stretched_exponential(t, y, fix_offset: float | None = None) -> FitResult:
    """Fit ``A*exp(-(t/tau)^n) + c``.

    Starting point: ``A`` from the data range (signed by the decay direction),
    ``c`` from the last sample, ``tau`` at the first 1/e crossing and ``n = 1.5``.
    """
    t, y = _clean(t, y, 5)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    if np.ptp(y) <= 1e-12 * max(1.0, float(np.max(np.abs(y)))):
        raise FitDiverged("constant data carry no decay information")
    order = np.argsort(t)
    t, y = t[order], y[order]
    c0 = float(y[-1]) if fix_offset is None else float(fix_offset)
    a0 = float(y[0] - c0)
    if a0 == 0:
        a0 = float(np.ptp(y))
    rel = (y - c0) / a0
    below = np.nonzero(rel < math.exp(-1))[0]
    tau0 = float(t[below[0]]) if below.size and t[below[0]] > 0 else float(np.median(t[t > 0]))
    fixed = fix_offset is not None

    def model(p):
        a, tau, n = p[:3]
        c = fix_offset if fixed else p[3]
        return stretched_exponential(t, a, tau, n, c)

    x0 = [a0, tau0, 1.5] + ([] if fixed else [c0])
    big = 1e3 * (abs(a0) + abs(c0) + 1)
    lb = [-big, 1e-6 * tau0, 0.1] + ([] if fixed else [-big])
    ub = [big, 1e6 * tau0, 10.0] + ([] if fixed else [big])
    res, err = _lsq(lambda p: model(p) - y, x0, lb, ub, t.size)
    names = ["A", "tau", "n"] + ([] if fixed else ["c"])
    params = dict(zip(names, map(float, res.x)))
    if fixed:
        params["c"] = float(fix_offset)
    unc = dict(zip(names, map(float, err)))
    unc.setdefault("c", 0.0)
    rms = math.sqrt(float(np.mean(res.fun**2)))
    return FitResult(params, unc, rms, True, {"A": "", "tau": "s", "n": "", "c": ""})


# -- DD coherence scaling ------------------------------------------------------------------------------

def fit_dd_scaling(n_pulses, t2) -> FitResult:
    """Log-log regression of ``T2(N) = t2_echo * N**chi``."""
    n = np.asarray(n_pulses, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    if n.size < 2 or n.shape != t2.shape:
        raise FitDiverged("need at least two (N, T2) points")
    if np.any(n < 1) or np.any(t2 <= 0):
        raise ValueError("N must be >= 1 and T2 > 0")
    x = np.log(n)
    if np.ptp(x) == 0:
        raise FitDiverged("all points share one N; chi is unidentifiable")
    design = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(design, np.log(t2), rcond=None)
    resid = np.log(t2) - design @ coef
    dof = max(n.size - 2, 1)
    s2 = float(resid @ resid) / dof
    cov = np.linalg.inv(design.T @ design) * s2
    t2e = math.exp(coef[0])
    return FitResult(
        {"t2_echo": t2e, "chi": float(coef[1])},
        {"t2_echo": t2e * math.sqrt(cov[0, 0]), "chi": math.sqrt(cov[1, 1])},
        math.sqrt(float(np.mean(resid**2))),
        True,
        {"t2_echo": "s", "chi": ""},
    )


# -- Ramsey fringes ---------------------------------------------------------------------------------

def ramsey_model(t, a, t2_star, n, freqs, phases, c=0.0, couplings=()):
    """Sum of equal-amplitude sines under a shared stretched envelope.

    ``freqs`` are angular; ``couplings`` (Hz) multiply the fringe by
    ``prod_j cos(pi*J_j*t)``.
    """
    t = np.asarray(t, dtype=float)
    osc = sum(np.sin(w * t + p) for w, p in zip(freqs, phases))
    for j in couplings:
        osc = osc * np.cos(math.pi * j * t)
    return a * np.exp(-((t / t2_star) ** n)) * osc + c


def _periodogram_peak(t, y, w_lo, w_hi, n_grid=4096):
    w = np.linspace(w_lo, w_hi, n_grid)
    z = np.exp(-1j * np.outer(w, t)) @ (y - y.mean())
    power = np.abs(z) ** 2
    i = int(np.argmax(power))
    return float(w[i]), float(w[1] - w[0])


def _linear_scan(t, y, blocks):
    """Best residual of ``y ~ c + sum_k (a_k*sin_k + b_k*cos_k)*env`` per candidate.

    ``blocks`` has shape (n_candidates, n_basis, n_t).  Returns residual sums.
    """
    ones = np.ones((blocks.shape[0], 1, t.size))
    basis = np.concatenate([blocks, ones], axis=1)
    gram = np.einsum("cit,cjt->cij", basis, basis)
    rhs = np.einsum("cit,t->ci", basis, y)
    gram = gram + 1e-12 * np.trace(gram, axis1=1, axis2=2)[:, None, None] * np.eye(gram.shape[1])
    coef = np.linalg.solve(gram, rhs[..., None])[..., 0]
    fit = np.einsum("ci,cit->ct", coef, basis)
    return np.sum((fit - y) ** 2, axis=1), coef


def _env_grid(t):
    span = float(np.max(t) - np.min(t[t >= 0])) if np.any(t > 0) else 1.0
    t2 = span * np.logspace(-1.2, 0.8, 24)
    ns = np.array([1.0, 1.5, 2.0, 2.5, 3.0])
    return [(a, b) for a in t2 for b in ns]


def ramsey_model_fit(
    t,
    y,
    n_tones: Literal[1, 2] = 1,
    freq_bracket: tuple[float, float] | None = None,
    n_couplings: int = 0,
    coupling_bracket: tuple[float, float] | None = None,
    split_bracket: tuple[float, float] | None = None,
) -> FitResult:
    """Least-squares fit of the multi-tone Ramsey model with a stretched envelope.

    Initial values come from deterministic grid scans: the fringe frequency
    from a periodogram inside ``freq_bracket`` (angular; defaults to the
    Nyquist band), envelope and tone splitting (or the coupling pair, Hz)
    from a scan with the linear amplitudes solved exactly.  Under-sampled data
    need a bracket that excludes the aliases.
    """
    t, y = _clean(t, y, 8)
    if n_tones not in (1, 2):
        raise ValueError("n_tones must be 1 or 2")
    if n_tones == 2 and n_couplings:
        raise ValueError("couplings are only supported with a single tone")
    if np.ptp(y) <= 1e-12 * max(1.0, float(np.max(np.abs(y)))):
        raise FitDiverged("flat data: no fringe to fit")
    if freq_bracket is None:
        dt = float(np.median(np.diff(np.sort(t))))
        freq_bracket = (0.0, math.pi / dt)
    w_lo, w_hi = freq_bracket
    w0, dw = _periodogram_peak(t, y, w_lo, w_hi)
    envs = _env_grid(t)

    if n_tones == 1 and n_couplings == 0:
        cands = [(w0 + k * dw / 4, ()) for k in range(-4, 5)]
    elif n_tones == 2:
        span = float(np.ptp(t))
        lo, hi = split_bracket if split_bracket else (0.5 * TWO_PI / span, 0.25 * (w_hi - w_lo))
        cands = [(w0, (d,)) for d in np.linspace(lo, hi, 121)]
    else:
        if coupling_bracket is None:
            raise ValueError("coupling fits need coupling_bracket (Hz)")
        grid = np.linspace(*coupling_bracket, 41)
        cands = [(w0, js) for js in itertools.combinations_with_replacement(grid, n_couplings)]

    best = None
    for t2, n in envs:
        env = np.exp(-((t / t2) ** n))
        blocks = []
        for w, extra in cands:
            if n_tones == 2:
                d = extra[0]
                ws = (w - d / 2, w + d / 2)
                rows = [f(wk * t) * env for wk in ws for f in (np.sin, np.cos)]
            else:
                beat = np.prod([np.cos(math.pi * j * t) for j in extra], axis=0) if extra else 1.0
                rows = [np.sin(w * t) * env * beat, np.cos(w * t) * env * beat]
            blocks.append(rows)
        ssr, coef = _linear_scan(t, y, np.asarray(blocks))
        i = int(np.argmin(ssr))
        if best is None or ssr[i] < best[0]:
            best = (float(ssr[i]), t2, n, cands[i], coef[i])
    _, t2_0, n_0, (w_c, extra), coef = best

    if n_tones == 2:
        d = extra[0]
        freqs0 = [w_c - d / 2, w_c + d / 2]
        amps = [math.hypot(coef[0], coef[1]), math.hypot(coef[2], coef[3])]
        phases0 = [math.atan2(coef[1], coef[0]), math.atan2(coef[3], coef[2])]
        js0 = []
    else:
        freqs0 = [w_c]
        amps = [math.hypot(coef[0], coef[1])]
        phases0 = [math.atan2(coef[1], coef[0])]
        js0 = list(extra)
    a0 = float(np.mean(amps))
    c0 = float(coef[-1])
    if a0 <= 1e-12 * max(1.0, float(np.max(np.abs(y)))):
        raise FitDiverged("no oscillating component found")

    nt = len(freqs0)
    nj = len(js0)

    def unpack(p):
        a, t2, n = p[0], p[1], p[2]
        freqs = p[3 : 3 + nt]
        phases = p[3 + nt : 3 + 2 * nt]
        js = p[3 + 2 * nt : 3 + 2 * nt + nj]
        c = p[-1]
        return a, t2, n, freqs, phases, js, c

    def resid(p):
        a, t2, n, freqs, phases, js, c = unpack(p)
        return ramsey_model(t, a, t2, n, freqs, phases, c, js) - y

    x0 = np.array([a0, t2_0, n_0, *freqs0, *phases0, *js0, c0])
    big = 1e3 * (abs(a0) + abs(c0) + 1)
    lb = [0.0, 1e-3 * t2_0, 0.3] + [w_lo] * nt + [-4 * math.pi] * nt + [0.0] * nj + [-big]
    ub = [big, 1e3 * t2_0, 10.0] + [w_hi] * nt + [4 * math.pi] * nt + [np.inf] * nj + [big]
    x0 = np.clip(x0, np.array(lb) + 1e-12 * np.abs(lb), ub)
    res, err = _lsq(resid, x0, lb, ub, t.size)
    a, t2, n, freqs, phases, js, c = unpack(res.x)
    e_a, e_t2, e_n, e_f, e_p, e_j, e_c = unpack(err)

    params = {"A": a, "T2_star": t2, "n": n, "c": c}
    unc = {"A": e_a, "T2_star": e_t2, "n": e_n, "c": e_c}
    units = {"A": "", "T2_star": "s", "n": "", "c": ""}
    order = np.argsort(freqs)
    for k, i in enumerate(order, start=1):
        params[f"omega{k}"] = freqs[i]
        params[f"phi{k}"] = float(np.mod(phases[i], TWO_PI))
        unc[f"omega{k}"] = e_f[i]
        unc[f"phi{k}"] = e_p[i]
        units[f"omega{k}"] = "rad/s"
        units[f"phi{k}"] = "rad"
    for k, i in enumerate(np.argsort(js), start=1):
        params[f"J{k}"] = js[i]
        unc[f"J{k}"] = e_j[i]
        units[f"J{k}"] = "Hz"
    params = {k: float(v) for k, v in params.items()}
    unc = {k: float(v) for k, v in unc.items()}
    return FitResult(params, unc, math.sqrt(float(np.mean(res.fun**2))), True, units)


# -- nuclear readout model and correction ---------------------------------------------------------

def nuclear_contrast(f_gate: float) -> float:
    """Ramsey amplitude when both preparation and readout pass through the gate."""
    return 1.0 - 4.0 * f_gate + 4.0 * f_gate * f_gate


def gate_fidelity_from_contrast(sigma_x_amplitude: float) -> float:
    """Invert ``<sigma_x> = (2F-1)^2`` on the branch ``F >= 1/2``."""
    c = float(sigma_x_amplitude)
    if not 0.0 <= c <= 1.0:
        raise OutOfRange(f"contrast {c!r} outside [0, 1]")
    return 0.5 * (1.0 + math.sqrt(c))


@dataclass(frozen=True)
class Correlators:
    """Two-qubit correlators (electron, nucleus) with optional single-qubit marginals.

    Marginals are ordered (x, y, z).  Only the nuclear marginals enter the
    correction of the correlators, through the electron readout offset.
    """

    xx: float
    yy: float
    zz: float
    errors: tuple[float, float, float] = (0.0, 0.0, 0.0)
    electron: tuple[float, float, float] = (0.0, 0.0, 0.0)
    nuclear: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def as_array(self):
        return np.array([self.xx, self.yy, self.zz])


def _electron_map(f0, f1):
    # measured <O> = scale * <O> + offset
    return f0 + f1 - 1.0, f0 - f1


def _nuclear_scale(f_gate, include_preparation):
    s = 2.0 * f_gate - 1.0
    return s * s if include_preparation else s


def readout_forward(true: Correlators, electron_fidelities=(1.0, 1.0), nuclear_gate_fidelity=1.0,
                    include_preparation: bool = False) -> Correlators:
    """What an imperfect readout reports for a given two-qubit state."""
    se, oe = _electron_map(*electron_fidelities)
    sn = _nuclear_scale(nuclear_gate_fidelity, include_preparation)
    nuc = np.asarray(true.nuclear, dtype=float)
    ele = np.asarray(true.electron, dtype=float)
    corr = se * sn * true.as_array() + oe * sn * nuc
    return Correlators(*corr, errors=true.errors, electron=tuple(se * ele + oe), nuclear=tuple(sn * nuc))


def readout_correct(measured: Correlators, electron_fidelities=(0.777, 0.777), nuclear_gate_fidelity=1.0,
                    include_preparation: bool = False) -> Correlators:
    """Linear inversion of the electron and nuclear readout models.

    The electron readout maps ``<O>`` to ``(F0+F1-1)<O> + (F0-F1)``; the
    nuclear readout through the entangling gate scales by ``2F-1`` (or
    ``(2F-1)^2`` with ``include_preparation``, when the state preparation also
    relies on the gate).  Correlators combine both maps, so the electron
    offset couples to the nuclear marginal.
    """
    f0, f1 = electron_fidelities
    for f in (f0, f1, nuclear_gate_fidelity):
        if not 0.5 < f <= 1.0:
            raise OutOfRange(f"fidelity {f!r} outside (0.5, 1]")
    se, oe = _electron_map(f0, f1)
    sn = _nuclear_scale(nuclear_gate_fidelity, include_preparation)
    nuc = np.asarray(measured.nuclear, dtype=float) / sn
    ele = (np.asarray(measured.electron, dtype=float) - oe) / se
    corr = (measured.as_array() - oe * sn * nuc) / (se * sn)
    errs = np.asarray(measured.errors, dtype=float) / abs(se * sn)
    tol = 1e-9
    if np.any(np.abs(corr) > 1.0 + errs + tol):
        raise OutOfRange(f"corrected correlators {corr.tolist()} exceed [-1, 1] beyond their uncertainty")
    return Correlators(*map(float, corr), errors=tuple(map(float, errs)),
                       electron=tuple(map(float, ele)), nuclear=tuple(map(float, nuc)))


def bell_fidelity(c: Correlators) -> Estimate:
    """Overlap with Phi+ from the three correlators, error added in quadrature."""
    value = (c.xx - c.yy + c.zz + 1.0) / 4.0
    err = 0.25 * math.sqrt(sum(float(e) ** 2 for e in c.errors))
    return Estimate(float(value), err)


# -- Bell error budget ---------------------------------------------------------------------------------

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.diag([1.0, -1.0]).astype(complex)


def _r(pauli, theta):
    return math.cos(theta / 2) * _I2 - 1j * math.sin(theta / 2) * pauli


def _crx():
    p0 = np.diag([1.0, 0.0]).astype(complex)
    p1 = np.diag([0.0, 1.0]).astype(complex)
    return np.kron(p0, _r(_X, math.pi / 2)) + np.kron(p1, _r(_X, -math.pi / 2))


def _dephase_electron(rho, f):
    z = np.kron(_Z, _I2)
    return f * rho + (1.0 - f) * z @ rho @ z


def _conj(u, rho):
    return u @ rho @ u.conj().T


def bell_circuit_density(f_gate: float) -> np.ndarray:
    """Final two-qubit state (electron (x) nucleus) of the MBI + entangling circuit.

    Every controlled gate is followed by an electron phase flip with
    probability ``1 - f_gate``; all other operations are ideal.
    """
    crx = _crx()
    ye = np.kron(_r(_Y, math.pi / 2), _I2)
    # MBI: electron |0>, nucleus unpolarized; heralded on electron |0>
    rho = np.kron(np.diag([1.0, 0.0]), 0.5 * _I2).astype(complex)
    rho = _conj(ye, rho)
    rho = _dephase_electron(_conj(crx, rho), f_gate)
    # the nuclear x state has written a +-pi/2 phase on the electron; map it to z
    rho = _conj(np.kron(_r(_X, MBI_READ_ANGLE), _I2), rho)
    proj = np.kron(np.diag([1.0, 0.0]), _I2)
    rho = proj @ rho @ proj
    rho = rho / np.trace(rho)
    # entangling block
    rho = _conj(ye, rho)
    rho = _conj(np.kron(_I2, _r(_Z, math.pi / 2)), rho)
    rho = _dephase_electron(_conj(crx, rho), f_gate)
    return _conj(np.kron(_r(_Z, BELL_FRAME_PHASE), _I2), rho)


MBI_READ_ANGLE = math.pi / 2
# electron z-rotation that takes the ideal circuit output onto Phi+
BELL_FRAME_PHASE = -math.pi / 2

PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)


def error_budget_bell(f_gate: float) -> float:
    """Fidelity to Phi+ of the circuit with noisy controlled gates."""
    if not 0.5 <= f_gate <= 1.0:
        raise OutOfRange(f"f_gate {f_gate!r} outside [0.5, 1]")
    rho = bell_circuit_density(f_gate)
    return float(np.real(PHI_PLUS.conj() @ rho @ PHI_PLUS))


# -- excited-state hyperfine and field bookkeeping -----------------------------------------------------

def excited_state_fraction(s):
    """Fraction of resonant-readout time spent in the excited state, ``s/(2s+1)``."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("saturation parameter must be >= 0")
    out = s / (2.0 * s + 1.0)
    return float(out) if out.ndim == 0 else out


def delta_hyperfine(fractions, phase_rates) -> FitResult:
    """Slope through the origin of phase rate (rad/s) against excited-state fraction."""
    x = np.asarray(fractions, dtype=float)
    y = np.asarray(phase_rates, dtype=float)
    if x.shape != y.shape or np.unique(x).size < 2:
        raise FitDiverged("need at least two distinct excited-state fractions")
    sxx = float(x @ x)
    slope = float(x @ y) / sxx
    resid = y - slope * x
    dof = max(x.size - 1, 1)
    sigma = math.sqrt(float(resid @ resid) / dof / sxx)
    return FitResult({"delta_a": slope}, {"delta_a": sigma}, math.sqrt(float(np.mean(resid**2))), True,
                     {"delta_a": "rad/s"})


def binned_ramsey_phase(t_readout, s, delta_a, transition: Literal["up", "down"] = "up"):
    """Extra nuclear phase picked up during a readout window of length ``t_readout``."""
    t_readout = np.asarray(t_readout, dtype=float)
    if np.any(t_readout < 0):
        raise ValueError("t_readout must be >= 0")
    if transition not in ("up", "down"):
        raise ValueError("transition must be 'up' or 'down'")
    sign = 1.0 if transition == "up" else -1.0
    out = sign * delta_a * t_readout * excited_state_fraction(s)
    return float(out) if np.ndim(out) == 0 else out


def field_rescale(f_mw_reference: float, f_mw_now: float, omega):
    """Scale a field-proportional frequency by the ratio of MW transition frequencies."""
    if not (f_mw_reference > 0 and f_mw_now > 0):
        raise ValueError("MW frequencies must be > 0")
    return np.asarray(omega) * (f_mw_now / f_mw_reference) if np.ndim(omega) else omega * (f_mw_now / f_mw_reference)


def g_factor(resonance_hz: float, field_tesla: float) -> float:
    """Electron g-factor implied by a spin resonance at a known field."""
    return PLANCK * resonance_hz / (BOHR_MAGNETON * field_tesla)
