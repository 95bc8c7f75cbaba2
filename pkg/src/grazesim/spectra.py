"""Diffraction spectra shared by the quantum solvers and the classical histogram."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class DiffractionSpectrum:
    """Probabilities per diffraction order ``n`` (parallel wavevector ``ky0 + n G``).

    ``probabilities`` are flux normalized, so for a converged quantum solve
    they sum to one over the open channels.  Closed channels are listed with
    zero probability.
    """

    n: np.ndarray
    ky: np.ndarray
    probabilities: np.ndarray
    open: np.ndarray
    G: float
    meta: dict = field(default_factory=dict)
    s_matrix: np.ndarray | None = None
    open_orders: np.ndarray | None = None

    def __post_init__(self):
        self.n = np.asarray(self.n, dtype=int)
        self.ky = np.asarray(self.ky, dtype=float)
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        self.open = np.asarray(self.open, dtype=bool)

    @property
    def total(self) -> float:
        return float(self.probabilities[self.open].sum())

    def probability(self, order: int) -> float:
        hit = np.nonzero(self.n == order)[0]
        return float(self.probabilities[hit[0]]) if hit.size else 0.0

    def as_dict(self) -> dict[int, float]:
        return {int(a): float(b) for a, b in zip(self.n, self.probabilities)}


def quantum_moments(spectrum: DiffractionSpectrum, tol: float = 1e-6) -> tuple[float, float]:
    """Mean and root-mean-square of ``Delta k_y = n G`` over the spectrum."""
    total = spectrum.total
    if abs(total - 1.0) > tol:
        raise ValueError(f"spectrum is not unitary: sum P = {total!r}")
    p = np.where(spectrum.open, spectrum.probabilities, 0.0)
    dk = spectrum.n * spectrum.G
    return float(np.dot(p, dk)), math.sqrt(float(np.dot(p, dk * dk)))
