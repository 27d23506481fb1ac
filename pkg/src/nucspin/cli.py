"""Command-line entry point: ``nucspin <subcommand> --config run.json``."""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from . import analysis as an
from . import bath as bt
from . import dd
from . import ddrf
from . import optimize as opt
from .config import Reader, load_config
from .constants import TWO_PI
from .errors import ConfigError, NuclearSpinError
from .spin import ElectronSpec, HyperfineParams, NuclearSpinConfig, average_frequency, conditional_frequencies


# -- output -----------------------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


@dataclass
class Table:
    name: str
    header: list[str]
    rows: Any

    def render(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()


@dataclass
class Outputs:
    tables: list[Table] = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o))


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _atomic_write(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _map_table(name, cmap, value_name=None):
    """CSV rows of a CoherenceMap with angular axes reported in Hz."""
    grids = np.meshgrid(*[a.values for a in cmap.axes], indexing="ij")
    header, cols = [], []
    for a, g in zip(cmap.axes, grids):
        if a.unit == "rad/s":
            header.append(f"{a.name}_hz")
            cols.append(g.ravel() / TWO_PI)
        elif a.unit:
            header.append(f"{a.name}_{a.unit}")
            cols.append(g.ravel())
        else:
            header.append(a.name)
            cols.append(g.ravel())
    header.append(value_name or cmap.quantity)
    cols.append(np.asarray(cmap.values).ravel())
    return Table(name, header, list(zip(*cols)))


# -- shared config blocks ---------------------------------------------------------------------------

def read_electron(r: Reader) -> ElectronSpec | None:
    if r.data is None:
        return ElectronSpec()
    preset = r.choice("preset", ("spin-1/2", "spin-1"), "spin-1/2")
    s0d, s1d = (-0.5, 0.5) if preset != "spin-1" else (0.0, 1.0)
    s0 = r.number("s0", s0d)
    s1 = r.number("s1", s1d)
    t2 = r.quantity("t2_echo", "time", 129e-6)
    chi = r.number("chi", 0.47)
    n = r.number("decay_exponent", 2.0)
    return r.build(ElectronSpec, s0, s1, t2, chi, n)


def read_spin(r: Reader) -> NuclearSpinConfig | None:
    larmor = r.quantity("larmor", "frequency")
    a_par = r.quantity("a_par", "frequency", 0.0)
    a_perp = r.quantity("a_perp", "frequency", 0.0)
    hf = r.build(HyperfineParams, a_par, a_perp, key="a_perp")
    return r.build(NuclearSpinConfig, larmor, hf, key="larmor")


def read_spins(r: Reader, key="spins"):
    return [read_spin(s) for s in r.items(key, [])]


def read_constraints(r: Reader, e: ElectronSpec | None, defaults=None):
    d = defaults or {}
    t = r.quantity("max_total_time", "time", d.get("max_total_time", 1e-3), positive=True)
    c = r.number("min_electron_coherence", d.get("min_electron_coherence", 0.99))
    m = r.quantity("max_rabi", "frequency", d.get("max_rabi", TWO_PI * 5e3), nonnegative=True)
    return r.build(opt.GateConstraints, t, c, m, e)


def read_int_grid(r: Reader, key, default=None, even=False):
    value = r.raw(key, default)
    if value is None:
        return None
    sub = Reader(value, r._p(key), r.diags)
    if isinstance(value, list):
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            r.error(key, "expected a list of integers")
            return None
        arr = np.asarray(value, dtype=int)
    elif isinstance(value, dict):
        start = sub.integer("start", positive=True)
        stop = sub.integer("stop", positive=True)
        step = sub.integer("step", 2 if even else 1, positive=True)
        if None in (start, stop, step):
            return None
        arr = np.arange(start, stop + 1, step)
    else:
        r.error(key, "expected {start, stop, step} or a list of integers")
        return None
    if arr.size == 0:
        r.error(key, "grid is empty")
        return None
    if even and np.any(arr % 2):
        r.error(key, "DDSequence: n_pulses must be even")
    if np.any(arr <= 0) or np.any(np.diff(arr) <= 0):
        r.error(key, "must be positive and strictly increasing")
    return arr


def read_sampled_bath(r: Reader, larmor, seed):
    if r.data is None:
        return None
    radius = r.quantity("radius", "length", bt.DEFAULT_RADIUS, positive=True)
    abundance = r.number("abundance", bt.NATURAL_ABUNDANCE, 0.0, 1.0)
    cutoff = r.quantity("filter_cutoff", "frequency", bt.DD_CUTOFF, positive=True)
    index = r.integer("realization", 0, nonnegative=True)
    lar = r.quantity("larmor", "frequency", larmor, positive=True)
    return {"radius": radius, "abundance": abundance, "cutoff": cutoff, "index": index, "larmor": lar, "seed": seed}


def read_statistical_bath(r: Reader, larmor, seed):
    if r.data is None:
        return None
    n = r.integer("n_realizations", 20, positive=True)
    radius = r.quantity("radius", "length", bt.DEFAULT_RADIUS, positive=True)
    abundance = r.number("abundance", bt.NATURAL_ABUNDANCE, 0.0, 1.0)
    lar = r.quantity("larmor", "frequency", larmor, positive=True)
    return {"n": n, "radius": radius, "abundance": abundance, "larmor": lar, "seed": seed}


def _make_sampled(spec):
    if spec is None:
        return None
    b = bt.sample_bath(spec["seed"], spec["larmor"], spec["radius"], spec["abundance"], index=spec["index"])
    return bt.dd_bath_filter(b, spec["cutoff"])


def _make_statistical(spec):
    if spec is None:
        return None
    baths = bt.sample_baths(spec["seed"], spec["larmor"], spec["n"], radius=spec["radius"], abundance=spec["abundance"])
    return bt.statistical_bath(baths, spec["larmor"])


def _first_larmor(spins, default=TWO_PI * 1048.52e3):
    for s in spins:
        if s is not None:
            return s.larmor
    return default


# -- subcommands --------------------------------------------------------------------------------------

@dataclass
class Command:
    parse: Callable[[Reader, int], dict]
    run: Callable[[dict, int], Outputs]
    help: str


def _p_dd_spectrum(r, seed):
    spins = read_spins(r)
    return {
        "spins": spins,
        "electron": read_electron(r.child("electron", None)),
        "tau_grid": r.grid("tau_grid", "time", positive=True),
        "n_pulses": r.integer("n_pulses", positive=True, even=True),
        "envelope": r.boolean("envelope", False),
        "bath": read_sampled_bath(r.child("bath", None), _first_larmor(spins), seed),
    }


def _r_dd_spectrum(p, threads):
    spins = list(p["spins"])
    b = _make_sampled(p["bath"])
    if b is not None:
        larmor, a_par, a_perp, _ = b.weighted_arrays()
    cmap = dd.dd_spectrum(spins, p["electron"], p["tau_grid"], p["n_pulses"], p["envelope"])
    values = np.asarray(cmap.values, dtype=float)
    if b is not None and len(b):
        values = values * dd.bath_product_over_tau(larmor, a_par, a_perp, p["electron"], p["tau_grid"], p["n_pulses"])
    rows = list(zip(p["tau_grid"], values))
    i = int(np.argmin(values))
    return Outputs([Table("dd_spectrum.csv", ["tau_s", "signal"], rows)],
                   {"min_signal": float(values[i]), "tau_at_min_s": float(p["tau_grid"][i]),
                    "bath_spins": 0 if b is None else len(b)})


def _p_dd_calibrate(r, seed):
    return {
        "spin": read_spin(r.child("spin")),
        "electron": read_electron(r.child("electron", None)),
        "tau": r.quantity("tau", "time", positive=True),
        "n_grid": read_int_grid(r, "n_grid", {"start": 2, "stop": 200, "step": 2}, even=True),
        "envelope": r.boolean("envelope", False),
        "fit": _read_fit_larmor(r.child("fit_larmor", None)),
    }


def _read_fit_larmor(r):
    if r.data is None:
        return None
    return {"w0": r.quantity("w0", "frequency", positive=True), "w1": r.quantity("w1", "frequency", positive=True)}


def _r_dd_calibrate(p, threads):
    cal = dd.dd_gate_calibration(p["spin"], p["electron"], p["tau"], p["n_grid"], p["envelope"])
    summary = {"n_star": cal.n_star, "bracket": list(cal.bracket)}
    if p["fit"]:
        fit = dd.fit_larmor_from_calibration(cal.curve, p["fit"]["w0"], p["fit"]["w1"], p["electron"])
        d = fit.to_dict()
        d["params"]["larmor_hz"] = d["params"].pop("larmor") / TWO_PI
        d["uncertainties"]["larmor_hz"] = d["uncertainties"].pop("larmor") / TWO_PI
        d["units"] = {"larmor_hz": "Hz"}
        summary["larmor_fit"] = d
    return Outputs([_map_table("dd_calibration.csv", cal.curve)], summary)


def _p_ddrf_spectrum(r, seed):
    spins = read_spins(r)
    return {
        "spins": spins,
        "electron": read_electron(r.child("electron", None)),
        "tau": r.quantity("tau", "time", positive=True),
        "n_pulses": r.integer("n_pulses", positive=True, even=True),
        "rf_grid": r.grid("rf_grid", "frequency", positive=True),
        "omega_bar_grid": r.grid("omega_bar_grid", "frequency", positive=True),
        "rabi": r.quantity("rabi", "frequency", nonnegative=True),
        "drive": r.choice("drive", ("single", "double"), "single"),
        "tilt": r.choice("branch_tilt", ("ignore", "include"), "ignore"),
        "bath": read_statistical_bath(r.child("bath", None), _first_larmor(spins), seed),
    }


def _r_ddrf_spectrum(p, threads):
    cfg = ddrf.PropagationConfig(branch_tilt=p["tilt"])
    cmap = ddrf.ddrf_spectrum(p["spins"], p["electron"], p["tau"], p["n_pulses"], p["rf_grid"],
                              p["omega_bar_grid"], p["rabi"], _make_statistical(p["bath"]), p["drive"], cfg, threads)
    return Outputs([_map_table("ddrf_spectrum.csv", cmap)], {"min_magnitude": float(np.min(cmap.values))})


def _p_ddrf_calibrate(r, seed):
    return {
        "spin": read_spin(r.child("spin")),
        "electron": read_electron(r.child("electron", None)),
        "tau": r.quantity("tau", "time", positive=True),
        "n_pulses": r.integer("n_pulses", positive=True, even=True),
        "amplitude_grid": r.grid("amplitude_grid", "frequency"),
        "drive": r.choice("drive", ("single", "double"), "single"),
        "rf": r.quantity("rf_frequency", "frequency", None),
        "omega_bar": r.quantity("omega_bar", "frequency", None),
    }


def _r_ddrf_calibrate(p, threads):
    spin, e = p["spin"], p["electron"]
    w0, w1 = conditional_frequencies(spin, e)
    wbar = p["omega_bar"] if p["omega_bar"] is not None else 0.5 * (w0 + w1)
    if p["drive"] == "single":
        drv = ddrf.SingleDrive(p["rf"] if p["rf"] is not None else w1, 0.0)
    else:
        drv = ddrf.DoubleDrive(w0, w1, 0.0)
    gate = ddrf.DDRFGate(dd.DDSequence(p["tau"], p["n_pulses"]), wbar, drv, e)
    values = ddrf.ddrf_amplitude_sweep(spin, gate, p["amplitude_grid"])
    star = ddrf.calibrate_ddrf_amplitude(spin, gate, p["amplitude_grid"])
    rows = list(zip(p["amplitude_grid"] / TWO_PI, values))
    return Outputs([Table("ddrf_calibration.csv", ["rabi_hz", "signal"], rows)], {"rabi_star_hz": star / TWO_PI})


def _p_nmr(r, seed):
    return {
        "spin": read_spin(r.child("spin")),
        "electron": read_electron(r.child("electron", None)),
        "state": r.choice("electron_state", (0, 1), 0),
        "freq_grid": r.grid("freq_grid", "frequency", positive=True),
        "rabi": r.quantity("rabi", "frequency", nonnegative=True),
        "duration": r.quantity("drive_duration", "time", 300e-6, positive=True),
    }


def _r_nmr(p, threads):
    cmap = ddrf.direct_rf_nmr(p["spin"], p["electron"], p["state"], p["freq_grid"], p["rabi"], p["duration"])
    i = int(np.argmin(cmap.values))
    return Outputs([_map_table("nmr.csv", cmap)], {"dip_frequency_hz": float(p["freq_grid"][i] / TWO_PI)})


def _p_rabi(r, seed):
    return {
        "spin": read_spin(r.child("spin")),
        "electron": read_electron(r.child("electron", None)),
        "state": r.choice("electron_state", (0, 1), 0),
        "rabi": r.quantity("rabi", "frequency", positive=True),
        "durations": r.grid("duration_grid", "time", increasing=True),
    }


def _r_rabi(p, threads):
    cmap = ddrf.rf_rabi(p["spin"], p["rabi"], p["durations"], p["electron"], p["state"])
    return Outputs([_map_table("rabi.csv", cmap)], {"period_s": TWO_PI / p["rabi"]})


def _p_ramsey(r, seed):
    couplings = []
    for i, item in enumerate(r.items("extra_couplings", [])):
        from .config import parse_quantity
        v = parse_quantity(item.data, "raw_frequency")
        if isinstance(v, str):
            r.diags.append(f"{item.path}: {v}")
        couplings.append(v)
    return {
        "spin": read_spin(r.child("spin")),
        "electron": read_electron(r.child("electron", None)),
        "state": r.choice("electron_state", (0, 1), 0),
        "dt_grid": r.grid("dt_grid", "time"),
        "couplings": couplings,
        "t2_star": r.quantity("t2_star", "time", math.inf, positive=True),
        "decay_exponent": r.number("decay_exponent", 2.0),
        "frame": r.quantity("frame_frequency", "frequency", 0.0),
    }


def _r_ramsey(p, threads):
    cmap = ddrf.nuclear_ramsey(p["spin"], p["electron"], p["state"], p["dt_grid"], p["couplings"],
                               p["t2_star"], p["decay_exponent"], 1.0, p["frame"])
    return Outputs([_map_table("ramsey.csv", cmap)], {})


def _p_bath_gen(r, seed):
    return {
        "seed": seed,
        "larmor": r.quantity("larmor", "frequency", TWO_PI * 1048.52e3, positive=True),
        "n": r.integer("n_realizations", 1, positive=True),
        "radius": r.quantity("radius", "length", bt.DEFAULT_RADIUS, positive=True),
        "abundance": r.number("abundance", bt.NATURAL_ABUNDANCE, 0.0, 1.0),
        "cutoff": r.quantity("filter_cutoff", "frequency", None, positive=True),
        "statistical": r.boolean("statistical", True),
        "annuli": r.integer("annuli", 0, nonnegative=True),
    }


def _r_bath_gen(p, threads):
    tables, counts = [], []
    baths = bt.sample_baths(p["seed"], p["larmor"], p["n"], radius=p["radius"], abundance=p["abundance"])
    for i, b in enumerate(baths):
        if p["cutoff"] is not None:
            b = bt.dd_bath_filter(b, p["cutoff"])
        rows = zip(b.r, b.theta, b.a_par / TWO_PI, b.a_perp / TWO_PI)
        tables.append(Table(f"bath_{i:04d}.csv", list(bt.CSV_COLUMNS), rows))
        counts.append(len(b))
    summary = {"seed": p["seed"], "counts": counts, "mean_count": float(np.mean(counts)),
               "expected_count": bt.expected_spin_count(p["radius"], p["abundance"])}
    if p["statistical"]:
        sb = bt.statistical_bath(baths, p["larmor"])
        tables.append(Table("statistical_bath.csv", ["a_par_hz", "weight"], zip(sb.centers / TWO_PI, sb.weights)))
    if p["annuli"]:
        radii = bt.bystander_density_annuli(p["n"], p["seed"], p["larmor"], p["annuli"],
                                            radius=p["radius"], abundance=p["abundance"])
        tables.append(Table("annuli.csv", ["coupling_hz"], ((x,) for x in radii / TWO_PI)))
    return Outputs(tables, summary)


def _p_optimize_gate(r, seed):
    spin = read_spin(r.child("spin"))
    e = read_electron(r.child("electron", None))
    return {
        "spin": spin,
        "electron": e,
        "constraints": read_constraints(r.child("constraints", {}), e,
                                        {"max_rabi": TWO_PI * 3.1e3, "min_electron_coherence": 0.5}),
        "tau_grid": r.grid("tau_grid", "time", None, positive=True),
        "n_grid": read_int_grid(r, "n_grid", None, even=True),
        "drive": r.choice("drive", ("single", "double"), "single"),
        "bath": read_statistical_bath(r.child("bath", None), spin.larmor if spin else 1.0, seed),
    }


def _r_optimize_gate(p, threads):
    sb = _make_statistical(p["bath"])
    ng = None if p["n_grid"] is None else [int(n) for n in p["n_grid"]]
    best, feasible = opt.optimize_gate(p["spin"], sb, p["constraints"], p["tau_grid"], ng, p["drive"],
                                       threads=threads, return_all=True)
    header = ["tau_s", "n_pulses", "rabi_hz", "total_time_s", "electron_coherence", "bath_survival",
              "fidelity_estimate"]
    rows = [(b.tau, b.n_pulses, b.rabi / TWO_PI, b.total_time, b.electron_coherence, b.bath_survival,
             b.fidelity_estimate) for b in feasible]
    return Outputs([Table("gate_candidates.csv", header, rows)], {"best": best.to_dict()})


def _p_compare(r, seed):
    tgt = r.child("target", {})
    a_par = tgt.quantity("a_par", "frequency", TWO_PI * 100e3)
    a_perp = tgt.quantity("a_perp", "frequency", TWO_PI * 50e3, nonnegative=True)
    el = r.child("electron", {})
    t2 = el.quantity("t2_echo", "time", 1e-3, positive=True)
    chi = el.number("chi", 2.0 / 3.0)
    n_exp = el.number("decay_exponent", 2.0)
    grid = r.child("grid", {})
    scen = r.raw("scenarios", ["dd:spin-1/2", "ddrf:spin-1/2", "dd:spin-1", "ddrf:spin-1"])
    ok = {"dd:spin-1/2", "ddrf:spin-1/2", "dd:spin-1", "ddrf:spin-1"}
    if not isinstance(scen, list) or not all(s in ok for s in scen):
        r.error("scenarios", f"entries must be drawn from {sorted(ok)}")
        scen = []
    e_half = r.build(ElectronSpec, -0.5, 0.5, t2, chi, n_exp, key="electron")
    e_one = r.build(ElectronSpec, 0.0, 1.0, t2, chi, n_exp, key="electron")
    return {
        "target": r.build(HyperfineParams, a_par, a_perp, key="target"),
        "larmor": r.quantity("larmor", "frequency", opt.COMPARISON_LARMOR, positive=True),
        "electrons": {"spin-1/2": e_half, "spin-1": e_one},
        "constraints": read_constraints(r.child("constraints", {}), e_half),
        "grid": (grid.quantity("lo", "frequency", TWO_PI * 0.1e3, positive=True),
                 grid.quantity("hi", "frequency", TWO_PI * 1000e3, positive=True),
                 grid.integer("n", 50, positive=True)),
        "scenarios": scen,
        "ddrf_tau_grid": r.grid("ddrf_tau_grid", "time", None, positive=True),
    }


def _r_compare(p, threads):
    lo, hi, n = p["grid"]
    axis = opt.bystander_grid(lo / TWO_PI, hi / TWO_PI, n)
    tables, summary = [], {"scenarios": {}}
    for sc in p["scenarios"]:
        method, kind = sc.split(":")
        e = p["electrons"][kind]
        kw = {"tau_grid": p["ddrf_tau_grid"]} if method == "ddrf" and p["ddrf_tau_grid"] is not None else {}
        res = opt.optimize_selectivity(method, e, p["target"], p["constraints"], (axis, axis),
                                       larmor=p["larmor"], threads=threads, **kw)
        tag = f"{method}_{'spin_half' if kind == 'spin-1/2' else 'spin_one'}"
        tables.append(_map_table(f"crosstalk_{tag}.csv", res.crosstalk))
        summary["scenarios"][sc] = res.summary()
    summary["constraints"] = {"max_total_time_s": p["constraints"].max_total_time,
                              "min_electron_coherence": p["constraints"].min_electron_coherence,
                              "max_rabi_hz": p["constraints"].max_rabi / TWO_PI}
    return Outputs(tables, summary)


def _p_fit(r, seed):
    model = r.choice("model", ("stretched-exponential", "dd-scaling", "ramsey", "delta-hyperfine"))
    data = r.child("data")
    t = y = None
    if isinstance(data.data, dict) and "path" in data.data:
        path = Path(data.string("path"))
        if not path.is_absolute():
            path = Path(r.data.get("_config_dir", ".")) / path
        try:
            arr = np.genfromtxt(path, delimiter=",", names=True)
            t, y = np.asarray(arr[arr.dtype.names[0]], float), np.asarray(arr[arr.dtype.names[1]], float)
        except (OSError, ValueError, IndexError) as exc:
            data.error("path", f"cannot read data file ({exc})")
    elif isinstance(data.data, dict):
        t = data.raw("t")
        y = data.raw("y")
        if not (isinstance(t, list) and isinstance(y, list) and len(t) == len(y)):
            data.error(None, "inline data need equal-length 't' and 'y' lists (SI units)")
            t = y = None
        else:
            t, y = np.asarray(t, float), np.asarray(y, float)
    opts = r.child("options", {})
    o = {}
    if model == "ramsey":
        o["n_tones"] = opts.choice("n_tones", (1, 2), 1)
        fb = opts.raw("freq_bracket", None)
        if fb is not None:
            o["freq_bracket"] = tuple(opts.grid("freq_bracket", "frequency"))
        o["n_couplings"] = opts.integer("n_couplings", 0, nonnegative=True)
        cb = opts.raw("coupling_bracket", None)
        if cb is not None:
            o["coupling_bracket"] = tuple(opts.grid("coupling_bracket", "raw_frequency"))
    return {"model": model, "t": t, "y": y, "options": o}


def _r_fit(p, threads):
    t, y, model = p["t"], p["y"], p["model"]
    if model == "stretched-exponential":
        fit = an.fit_stretched_exponential(t, y)
        curve = an.stretched_exponential(t, fit["A"], fit["tau"], fit["n"], fit["c"])
    elif model == "dd-scaling":
        fit = an.fit_dd_scaling(t, y)
        curve = fit["t2_echo"] * t ** fit["chi"]
    elif model == "ramsey":
        fit = an.ramsey_model_fit(t, y, **p["options"])
        k = p["options"].get("n_tones", 1)
        freqs = [fit[f"omega{i}"] for i in range(1, k + 1)]
        phases = [fit[f"phi{i}"] for i in range(1, k + 1)]
        js = [fit[f"J{i}"] for i in range(1, p["options"].get("n_couplings", 0) + 1)]
        curve = an.ramsey_model(t, fit["A"], fit["T2_star"], fit["n"], freqs, phases, fit["c"], js)
    else:
        fit = an.delta_hyperfine(t, y)
        curve = fit["delta_a"] * t
    return Outputs([Table("fit_curve.csv", ["x", "y", "model"], zip(t, y, curve))], {"fit": fit.to_dict()})


def _p_bell(r, seed):
    c = r.child("correlators", None)
    corr = None
    if c.data is not None:
        def triple(key):
            v = c.raw(key, [0.0, 0.0, 0.0])
            if not (isinstance(v, list) and len(v) == 3 and all(isinstance(x, (int, float)) for x in v)):
                c.error(key, "expected three numbers (x, y, z)")
                return (0.0, 0.0, 0.0)
            return tuple(float(x) for x in v)
        corr = r.build(an.Correlators, c.number("xx", lo=-1.5, hi=1.5), c.number("yy", lo=-1.5, hi=1.5),
                       c.number("zz", lo=-1.5, hi=1.5), errors=triple("errors"), electron=triple("electron"),
                       nuclear=triple("nuclear"), key="correlators")
    ef = r.raw("electron_fidelities", [0.777, 0.777])
    if not (isinstance(ef, list) and len(ef) == 2 and all(isinstance(x, (int, float)) for x in ef)):
        r.error("electron_fidelities", "expected [F0, F1]")
        ef = [0.777, 0.777]
    return {
        "contrast": r.number("contrast", None, 0.0, 1.0),
        "f_gate": r.number("f_gate", None, 0.5, 1.0),
        "correlators": corr,
        "electron_fidelities": tuple(float(x) for x in ef),
        "include_preparation": r.boolean("include_preparation", False),
    }


def _r_bell(p, threads):
    if p["f_gate"] is not None:
        f = p["f_gate"]
    elif p["contrast"] is not None:
        f = an.gate_fidelity_from_contrast(p["contrast"])
    else:
        f = 1.0
    summary = {"f_gate": f, "error_budget_fidelity": an.error_budget_bell(f)}
    tables = []
    if p["correlators"] is not None:
        corr = an.readout_correct(p["correlators"], p["electron_fidelities"], f, p["include_preparation"])
        est = an.bell_fidelity(corr)
        summary["bell_fidelity"] = est.value
        summary["bell_fidelity_uncertainty"] = est.uncertainty
        tables.append(Table("correlators.csv", ["correlator", "measured", "corrected", "corrected_error"], [
            (name, m, cv, ce) for name, m, cv, ce in zip(
                ("xx", "yy", "zz"), p["correlators"].as_array(), corr.as_array(), corr.errors)
        ]))
    return Outputs(tables, summary)


def _p_excited(r, seed):
    s_vals = r.raw("s_values", [0.1, 0.5])
    if not (isinstance(s_vals, list) and all(isinstance(x, (int, float)) and x >= 0 for x in s_vals)):
        r.error("s_values", "expected a list of non-negative saturation parameters")
        s_vals = []
    slopes = []
    for item in r.items("slopes", []):
        frac = item.number("fraction", lo=0.0, hi=0.5)
        rate = item.quantity("rate", "frequency")
        slopes.append((frac, rate))
    return {
        "s": [float(x) for x in s_vals],
        "delta_a": r.quantity("delta_a", "frequency", 0.0),
        "t_grid": r.grid("t_readout_grid", "time", [0.0], increasing=False),
        "transition": r.choice("transition", ("up", "down"), "up"),
        "slopes": slopes,
    }


def _r_excited(p, threads):
    rows = []
    for s in p["s"]:
        frac = an.excited_state_fraction(s)
        for t in p["t_grid"]:
            rows.append((s, frac, t, an.binned_ramsey_phase(t, s, p["delta_a"], p["transition"])))
    summary = {}
    if p["slopes"]:
        fit = an.delta_hyperfine([a for a, _ in p["slopes"]], [b for _, b in p["slopes"]])
        summary["delta_a_hz"] = fit["delta_a"] / TWO_PI
        summary["delta_a_uncertainty_hz"] = fit.uncertainties["delta_a"] / TWO_PI
    return Outputs([Table("excited_state.csv", ["s", "excited_fraction", "t_readout_s", "phase_rad"], rows)], summary)


COMMANDS: dict[str, Command] = {
    "dd-spectrum": Command(_p_dd_spectrum, _r_dd_spectrum, "DD coherence versus tau"),
    "dd-calibrate": Command(_p_dd_calibrate, _r_dd_calibrate, "DD gate calibration versus N"),
    "ddrf-spectrum": Command(_p_ddrf_spectrum, _r_ddrf_spectrum, "2-D DDRF spectrum"),
    "ddrf-calibrate": Command(_p_ddrf_calibrate, _r_ddrf_calibrate, "DDRF amplitude calibration"),
    "nmr": Command(_p_nmr, _r_nmr, "direct RF NMR spectrum"),
    "rabi": Command(_p_rabi, _r_rabi, "direct RF Rabi oscillation"),
    "ramsey": Command(_p_ramsey, _r_ramsey, "nuclear Ramsey signal"),
    "bath-gen": Command(_p_bath_gen, _r_bath_gen, "sample 13C bath realizations"),
    "optimize-gate": Command(_p_optimize_gate, _r_optimize_gate, "DDRF gate parameter search"),
    "compare-selectivity": Command(_p_compare, _r_compare, "DD/DDRF bystander crosstalk comparison"),
    "fit": Command(_p_fit, _r_fit, "fit a model to (t, y) data"),
    "analyze-bell": Command(_p_bell, _r_bell, "readout correction and Bell fidelity"),
    "excited-state": Command(_p_excited, _r_excited, "excited-state fraction and binned phases"),
}


# -- driver --------------------------------------------------------------------------------------------

def _seed(data, override, diags):
    if override is not None:
        return int(override)
    s = data.get("seed", 0)
    if isinstance(s, bool) or not isinstance(s, int) or not 0 <= s < 2**64:
        diags.append("seed: must be an integer in [0, 2^64)")
        return 0
    return s


def prepare(command: str, data: dict, seed_override=None):
    """Validate ``data`` for ``command``; returns (params, seed) or raises ConfigError."""
    diags: list[str] = []
    seed = _seed(data, seed_override, diags)
    if command not in COMMANDS:
        raise ConfigError("command", f"unknown subcommand {command!r}")
    r = Reader(data, "", diags)
    params = COMMANDS[command].parse(r, seed)
    r.raise_if_errors()
    return params, seed


def config_hash(data: dict, seed: int) -> str:
    canon = json.dumps({k: v for k, v in data.items() if not k.startswith("_")} | {"seed": seed},
                       sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def execute(command: str, config_path, out_dir=None, seed=None, threads=1, validate_only=False) -> int:
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    try:
        data = load_config(config_path)
        data["_config_dir"] = str(Path(config_path).resolve().parent)
        if command == "validate":
            command = data.get("command")
            if not isinstance(command, str):
                raise ConfigError("command", "validate needs a 'command' field naming the subcommand")
        elif "command" in data and data["command"] != command:
            raise ConfigError("command", f"config is for {data['command']!r}, not {command!r}")
        params, seed = prepare(command, data, seed)
    except ConfigError as exc:
        for line in exc.diagnostics:
            print(f"config error: {line}", file=sys.stderr)
        return 1
    if validate_only:
        return 0
    try:
        result = COMMANDS[command].run(params, max(1, int(threads)))
    except (NuclearSpinError, ValueError, ArithmeticError) as exc:
        print(f"computation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    out = Path(out_dir if out_dir is not None else data.get("output_dir", "."))
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for table in result.tables:
        _atomic_write(out / table.name, table.render())
        files.append(table.name)
    _atomic_write(out / "summary.json", _dumps(result.summary))
    files.append("summary.json")
    manifest = {
        "tool": "nucspin",
        "version": __version__,
        "command": command,
        "config_hash": config_hash(data, seed),
        "seed": seed,
        "threads": int(threads),
        "started": started,
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "outputs": files,
    }
    _atomic_write(out / "manifest.json", _dumps(manifest))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nucspin", description="Nuclear-spin control simulations.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, cmd in [*COMMANDS.items(), ("validate", Command(None, None, "check a config without running"))]:
        p = sub.add_parser(name, help=cmd.help)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--validate-only", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return execute(args.command, args.config, args.out, args.seed, args.threads,
                   args.validate_only or args.command == "validate")


if __name__ == "__main__":
    sys.exit(main())
