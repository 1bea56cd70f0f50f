"""Residual series container shared by the verification routines."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np


@dataclass
class ResidualSeries:
    """Per-step (or per-cell) residuals with summary statistics.

    ``values`` is 1D for step series and 2D ``(steps, cells)`` for lattice runs.
    ``slope`` is the least-squares trend per step of the per-step maxima (or of
    the values themselves for 1D series).
    """

    values: np.ndarray
    grid: Any = None
    label: str = ""
    max: float = field(init=False)
    mean: float = field(init=False)
    slope: float = field(init=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        v = self.values
        if v.size == 0:
            self.max = self.mean = self.slope = 0.0
            return
        self.max = float(np.max(np.abs(v)))
        self.mean = float(np.mean(np.abs(v)))
        trend = v if v.ndim == 1 else np.max(np.abs(v), axis=tuple(range(1, v.ndim)))
        if trend.size >= 2:
            self.slope = float(np.polyfit(np.arange(trend.size, dtype=float), trend, 1)[0])
        else:
            self.slope = 0.0

    def summary(self) -> dict[str, float]:
        return {"max": self.max, "mean": self.mean, "slope": self.slope}
