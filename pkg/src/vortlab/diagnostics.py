"""Scalar functionals of the vorticity: norms, energy, Casimirs, entropy.

Physical-space functionals (L^p norms, Casimirs, the entropy) are quadratures
over the oversample-2 collocation grid; for band-limited fields the factor-2
zero padding makes products up to degree four alias-free, and the remaining
aliasing error for higher powers is documented as an approximation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import SpectralField, linf_norm, to_physical

__all__ = [
    "energy",
    "casimir",
    "entropy_two_level",
    "lp_norm",
    "two_level_entropy_density",
    "DiagnosticsRecord",
    "DiagnosticsStream",
]


def energy(omega: SpectralField) -> float:
    """Kinetic energy per unit mass, E = (1/2) sum_k |omegahat_k|^2 / |k|^2."""
    lat = omega.lattice
    w = lat.mode_weight * lat.inv_ksq / lat.kscale**2
    return 0.5 * float(np.sum(w * np.abs(omega.coeffs) ** 2))


def casimir(omega: SpectralField, F, oversample: int = 2) -> float:
    """Normalized integral (1/|T^2|) int F(omega) dx by grid quadrature."""
    vals = to_physical(omega, oversample)
    return float(np.mean(F(vals)))


def two_level_entropy_density(s: np.ndarray) -> np.ndarray:
    """The two-set mixing entropy with levels +/-1, extended by 0 at s = +/-1.

    F(s) = -((1+s)/2) log((1+s)/2) - ((1-s)/2) log((1-s)/2), F(0) = log 2.
    """
    s = np.asarray(s, dtype=np.float64)
    p = np.clip((1.0 + s) / 2.0, 0.0, 1.0)
    q = 1.0 - p
    out = np.zeros_like(p)
    np.subtract(out, p * np.log(p, out=np.zeros_like(p), where=p > 0), out=out, where=p > 0)
    np.subtract(out, q * np.log(q, out=np.zeros_like(q), where=q > 0), out=out, where=q > 0)
    return out


def entropy_two_level(omega: SpectralField) -> float | None:
    """Two-level entropy Casimir, or None when |omega| > 1 somewhere.

    Values outside [-1, 1] put the field outside the entropy's domain;
    clamping would silently bias the statistic, so the record flags the value
    as absent instead.
    """
    vals = to_physical(omega, 2)
    if np.max(np.abs(vals)) > 1.0:
        return None
    return float(np.mean(two_level_entropy_density(vals)))


def lp_norm(omega: SpectralField, p: float) -> float:
    """Normalized-integral L^p norm via oversample-2 grid quadrature."""
    if p < 1:
        raise ValueError("p must be >= 1")
    vals = np.abs(to_physical(omega, 2))
    return float(np.mean(vals**p) ** (1.0 / p))


@dataclass
class DiagnosticsRecord:
    """One row of instantaneous functionals at time t."""

    t: float
    l2_sq: float
    h1_sq: float
    linf: float
    energy: float
    lp: dict = field(default_factory=dict)
    casimirs: dict = field(default_factory=dict)
    entropy2: float | None = None

    @classmethod
    def measure(cls, t: float, omega: SpectralField, p_values=(), casimir_fns=None):
        rec = cls(
            t=t,
            l2_sq=omega.l2_sq(),
            h1_sq=omega.h1_sq(),
            linf=linf_norm(omega),
            energy=energy(omega),
            entropy2=entropy_two_level(omega),
        )
        rec.lp = {p: lp_norm(omega, p) for p in p_values}
        for label, F in (casimir_fns or {}).items():
            rec.casimirs[label] = casimir(omega, F)
        return rec

    def validate(self):
        vals = [self.l2_sq, self.h1_sq, self.linf, self.energy]
        vals += list(self.lp.values()) + list(self.casimirs.values())
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("non-finite diagnostic entry")
        if self.l2_sq > self.linf**2 * (1 + 1e-10) + 1e-14:
            raise ValueError("norm comparison violated: ||w||_2^2 > ||w||_inf^2")
        if self.energy < -1e-14:
            raise ValueError("negative energy")


class DiagnosticsStream:
    """Appends records as CSV rows with a fixed, documented header.

    Header: t,l2_sq,h1_sq,linf,energy,entropy2[,lp_<p>...][,casimir_<label>...]
    An absent entropy is written as an empty cell.
    """

    def __init__(self, fh, p_values=(), casimir_labels=()):
        self.fh = fh
        self.p_values = tuple(p_values)
        self.casimir_labels = tuple(casimir_labels)
        cols = ["t", "l2_sq", "h1_sq", "linf", "energy", "entropy2"]
        cols += [f"lp_{p:g}" for p in self.p_values]
        cols += [f"casimir_{lab}" for lab in self.casimir_labels]
        self.writer = csv.writer(fh, lineterminator="\n")
        self.writer.writerow(cols)

    def append(self, rec: DiagnosticsRecord):
        row = [
            f"{rec.t:.12g}",
            f"{rec.l2_sq:.17g}",
            f"{rec.h1_sq:.17g}",
            f"{rec.linf:.17g}",
            f"{rec.energy:.17g}",
            "" if rec.entropy2 is None else f"{rec.entropy2:.17g}",
        ]
        row += [f"{rec.lp[p]:.17g}" for p in self.p_values]
        row += [f"{rec.casimirs[lab]:.17g}" for lab in self.casimir_labels]
        self.writer.writerow(row)
