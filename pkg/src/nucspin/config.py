"""JSON run configurations with explicit units.

Physical quantities are written either as a string ``"1048.52 kHz"`` or as an
object ``{"value": 1048.52, "unit": "kHz"}``.  Frequencies are quoted as
omega/2pi and converted to rad/s on reading.  Problems are collected as
diagnostics that carry the JSON path of the offending field.
"""

from __future__ import annotations

import json
import math
import re
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .errors import ConfigError

UNITS = {
    "frequency": {"Hz": 2 * math.pi, "kHz": 2 * math.pi * 1e3, "MHz": 2 * math.pi * 1e6,
                  "GHz": 2 * math.pi * 1e9, "rad/s": 1.0},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9},
    "length": {"m": 1.0, "um": 1e-6, "µm": 1e-6, "nm": 1e-9},
    "angle": {"rad": 1.0, "deg": math.pi / 180},
    "field": {"T": 1.0, "mT": 1e-3},
    "raw_frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
}

_MISSING = object()
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S+)\s*$")


class Reader:
    """Walks a JSON object while recording diagnostics instead of raising."""

    def __init__(self, data: Any, path: str = "", diags: list[str] | None = None):
        self.data = data
        self.path = path
        self.diags = [] if diags is None else diags

    # plumbing ------------------------------------------------------------------------
    def _p(self, key):
        if isinstance(key, int):
            return f"{self.path}[{key}]"
        return f"{self.path}.{key}" if self.path else str(key)

    def error(self, key, message):
        self.diags.append(f"{self._p(key) if key is not None else self.path or '<root>'}: {message}")

    def has(self, key) -> bool:
        return isinstance(self.data, dict) and key in self.data

    def raw(self, key, default=_MISSING):
        if not isinstance(self.data, dict):
            self.diags.append(f"{self.path or '<root>'}: expected an object")
            return None
        if key not in self.data:
            if default is _MISSING:
                self.error(key, "required field is missing")
                return None
            return default
        return self.data[key]

    def child(self, key, default=_MISSING) -> "Reader":
        return Reader(self.raw(key, default), self._p(key), self.diags)

    def items(self, key, default=_MISSING) -> list["Reader"]:
        value = self.raw(key, default)
        if value is None:
            return []
        if not isinstance(value, list):
            self.error(key, "expected a list")
            return []
        return [Reader(v, f"{self._p(key)}[{i}]", self.diags) for i, v in enumerate(value)]

    def raise_if_errors(self):
        if self.diags:
            raise ConfigError(None, "", self.diags)

    # typed accessors --------------------------------------------------------------------
    def quantity(self, key, kind: str, default=_MISSING, positive=False, nonnegative=False):
        value = self.raw(key, default)
        if value is None or value is default and default is not _MISSING:
            return value
        got = parse_quantity(value, kind)
        if isinstance(got, str):
            self.error(key, got)
            return None
        if positive and not got > 0:
            self.error(key, "must be > 0")
        if nonnegative and got < 0:
            self.error(key, "must be >= 0")
        return got

    def number(self, key, default=_MISSING, lo=None, hi=None):
        value = self.raw(key, default)
        if value is None or (value is default and default is not _MISSING):
            return value
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.error(key, f"expected a number, got {value!r}")
            return None
        if (lo is not None and value < lo) or (hi is not None and value > hi):
            self.error(key, f"must lie in [{lo}, {hi}]")
        return float(value)

    def integer(self, key, default=_MISSING, positive=False, even=False, nonnegative=False):
        value = self.raw(key, default)
        if value is None or (value is default and default is not _MISSING):
            return value
        if isinstance(value, bool) or not isinstance(value, int):
            self.error(key, f"expected an integer, got {value!r}")
            return None
        if positive and value <= 0:
            self.error(key, "must be a positive integer")
        if nonnegative and value < 0:
            self.error(key, "must be >= 0")
        if even and value % 2:
            self.error(key, f"DDSequence: n_pulses must be even (got {value})")
        return value

    def boolean(self, key, default=_MISSING):
        value = self.raw(key, default)
        if value is None or isinstance(value, bool):
            return value
        self.error(key, f"expected true/false, got {value!r}")
        return None

    def choice(self, key, options, default=_MISSING):
        value = self.raw(key, default)
        if value is None or value in options:
            return value
        self.error(key, f"must be one of {list(options)}, got {value!r}")
        return None

    def string(self, key, default=_MISSING):
        value = self.raw(key, default)
        if value is None or isinstance(value, str):
            return value
        self.error(key, f"expected a string, got {value!r}")
        return None

    def grid(self, key, kind: str, default=_MISSING, positive=False, increasing=True):
        """A grid given as ``{start, stop, num}`` (or ``step``) or as an explicit list."""
        value = self.raw(key, default)
        if value is None or (value is default and default is not _MISSING):
            return None if value is None else np.asarray(value)
        sub = Reader(value, self._p(key), self.diags)
        if isinstance(value, list):
            vals = [parse_quantity(v, kind) for v in value]
            bad = [i for i, v in enumerate(vals) if isinstance(v, str)]
            for i in bad:
                self.diags.append(f"{self._p(key)}[{i}]: {vals[i]}")
            if bad:
                return None
            arr = np.asarray(vals, dtype=float)
        elif isinstance(value, dict):
            start = sub.quantity("start", kind)
            stop = sub.quantity("stop", kind)
            if sub.has("step"):
                step = sub.quantity("step", kind, positive=True)
                if None in (start, stop, step):
                    return None
                arr = start + step * np.arange(int(math.floor((stop - start) / step + 1e-9)) + 1)
            else:
                num = sub.integer("num", positive=True)
                if None in (start, stop, num):
                    return None
                arr = np.linspace(start, stop, num)
        else:
            self.error(key, "expected {start, stop, num|step} or a list")
            return None
        if arr.size == 0:
            self.error(key, "grid is empty")
            return None
        if positive and np.any(arr <= 0):
            self.error(key, "grid values must be > 0")
        if increasing and np.any(np.diff(arr) <= 0):
            self.error(key, "grid must be strictly increasing")
        return arr

    def build(self, factory: Callable, *args, key=None, **kwargs):
        """Construct a domain object, turning invariant violations into diagnostics."""
        if any(a is None for a in args) or any(v is None for v in kwargs.values()):
            return None
        try:
            return factory(*args, **kwargs)
        except (ValueError, TypeError) as exc:
            name = getattr(factory, "__name__", str(factory))
            msg = str(exc)
            if not msg.startswith(name):
                msg = f"{name}: {msg}"
            self.diags.append(f"{self._p(key) if key is not None else self.path or '<root>'}: {msg}")
            return None


def parse_quantity(value, kind: str):
    """Value in SI / rad/s, or an error string."""
    table = UNITS[kind]
    if isinstance(value, dict):
        if set(value) != {"value", "unit"}:
            return "quantity objects need exactly 'value' and 'unit'"
        number, unit = value["value"], value["unit"]
        if isinstance(number, bool) or not isinstance(number, (int, float)):
            return f"quantity value must be a number, got {number!r}"
    elif isinstance(value, str):
        m = _QUANTITY.match(value)
        if not m:
            return f"cannot parse quantity {value!r}; write e.g. '5 us' or '1048.52 kHz'"
        number, unit = float(m.group(1)), m.group(2)
    else:
        return f"expected a quantity with an explicit unit, got {value!r}"
    if unit not in table:
        return f"invalid unit {unit!r} for a {kind.replace('_', ' ')}; allowed: {sorted(table)}"
    return float(number) * table[unit]


def load_config(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError("config", f"file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a JSON object")
    return data
