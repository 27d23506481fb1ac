"""Result containers shared by the engines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

SIGNAL_EPS = 1e-9


@dataclass(frozen=True)
class Axis:
    name: str
    values: np.ndarray
    unit: str


@dataclass
class CoherenceMap:
    """Signal on a 1-D or 2-D grid; ``values.shape`` matches the axis lengths."""

    axes: tuple[Axis, ...]
    values: np.ndarray
    quantity: str = "signal"
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        shape = tuple(len(a.values) for a in self.axes)
        if self.values.shape != shape:
            raise ValueError(f"values shape {self.values.shape} does not match axes {shape}")

    def axis(self, name: str) -> Axis:
        for a in self.axes:
            if a.name == name:
                return a
        raise KeyError(name)

    def columns(self) -> tuple[list[str], np.ndarray]:
        """Flatten to (header, rows) for tabular output; first axis varies slowest."""
        grids = np.meshgrid(*[a.values for a in self.axes], indexing="ij")
        header = [f"{a.name}_{a.unit}" if a.unit else a.name for a in self.axes]
        header.append(self.quantity)
        rows = np.column_stack([g.ravel() for g in grids] + [self.values.ravel().astype(float)])
        return header, rows


@dataclass
class FitResult:
    params: dict[str, float]
    uncertainties: dict[str, float]
    residual: float
    converged: bool = True
    units: dict[str, str] = field(default_factory=dict)

    def __getitem__(self, key):
        return self.params[key]

    def to_dict(self) -> dict[str, Any]:
        return {
            "params": {k: float(v) for k, v in self.params.items()},
            "uncertainties": {k: float(v) for k, v in self.uncertainties.items()},
            "units": dict(self.units),
            "residual": float(self.residual) if math.isfinite(self.residual) else None,
            "converged": bool(self.converged),
        }
