"""Exact analytic ground truth for the solver and the statistics pipeline.

Three oracles are kept deliberately independent of the fast code paths:

* a brute-force O(n^4) convolution sum for the advection term, checking the
  dealiased pseudo-spectral product;
* the Ornstein-Uhlenbeck law of the eigenfunction-forced equation, whose
  stationary eigen-coefficient is N(0, 1/(2 lambda)) for every nu > 0;
* the per-mode stationary variance of the linear (Stokes) dynamics, which
  also fixes the forcing normalization constants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forcing import NoiseSpec, _canonical
from .integrator import SolverConfig, linear_multiplier
from .spectral import Lattice, SpectralField, _symmetrize, nonlinear_term

__all__ = [
    "OuOracle",
    "ou_stationary_law",
    "StokesVariance",
    "stokes_mode_variance",
    "convolution_nonlinearity",
    "damped_velocity_floor",
]


@dataclass
class OuOracle:
    """A Laplacian eigenfunction with vanishing self-advection.

    omega_E = cos(j x1) satisfies -Lap omega_E = j^2 omega_E and, being a
    shear flow, u_E . grad omega_E = 0; forcing the equation with omega_E
    keeps the solution on the ray span{omega_E} where the dynamics reduce to
    a scalar Ornstein-Uhlenbeck process.
    """

    omega_E: SpectralField
    lam: float
    nu: float

    @classmethod
    def shear(cls, lattice: Lattice, nu: float, j: int = 1) -> "OuOracle":
        if j < 1 or j > lattice.dealias_cutoff:
            raise ValueError("eigen index outside the resolved band")
        fld = SpectralField.from_modes(lattice, {(j, 0): 0.5})  # cos(j x1)
        return cls(omega_E=fld, lam=float(j * j), nu=nu)

    def validate(self, tol: float = 1e-13):
        lat = self.omega_E.lattice
        eig = (lat.ksq * lat.kscale**2 - self.lam) * self.omega_E.coeffs
        if np.max(np.abs(eig)) > tol:
            raise ValueError("omega_E is not a Laplacian eigenfunction")
        resid = np.max(np.abs(nonlinear_term(self.omega_E).coeffs))
        if resid > tol:
            raise ValueError(f"self-advection does not vanish: {resid:.3e}")

    def projection(self, omega: SpectralField) -> float:
        """Eigen-coefficient <omega, omega_E> / ||omega_E||^2."""
        w = self.omega_E.lattice.mode_weight
        num = np.sum(w * (np.conj(self.omega_E.coeffs) * omega.coeffs).real)
        den = self.omega_E.l2_sq()
        return float(num / den)


def ou_stationary_law(oracle: OuOracle) -> tuple[float, float]:
    """Stationary law of the eigen-coefficient under forcing sqrt(nu) omega_E.

    dz + nu lambda z dt = sqrt(nu) dW has stationary mean 0 and variance
    1/(2 lambda), independent of nu.
    """
    oracle.validate()
    return 0.0, 1.0 / (2.0 * oracle.lam)


@dataclass
class StokesVariance:
    """Exact stationary variances of a forced mode for the linear dynamics.

    per_channel is the variance of each cos/sin coefficient,
    c^2 nu^(2 alpha) g_k^2 / (2 mu_k).  Summed over a Hermitian pair the
    spectral coefficients satisfy E[|what_k|^2 + |what_-k|^2] = per_channel,
    and the velocity carries pair_velocity = per_channel / |k|^2.
    """

    per_channel: float
    pair_omega: float
    pair_velocity: float


def stokes_mode_variance(spec: NoiseSpec, config: SolverConfig, k) -> StokesVariance:
    """Analytic stationary variance of mode k under stokes_linear dynamics.

    Under the sqrt(nu) scaling (alpha = 1/2, tau = 0, Laplacian dissipation) the
    result is independent of nu; with damping tau > 0 or alpha > 1/2 it
    vanishes as nu -> 0, and for alpha < 1/2 it grows.
    """
    if config.mode != "stokes_linear":
        raise ValueError("Stokes variances apply to stokes_linear dynamics")
    key = _canonical(k)
    if key not in spec.modes:
        raise ValueError(f"mode {k} is not forced")
    i = spec.modes.index(key)
    mu = linear_multiplier(config, key)
    amp = spec.amplitude(config.nu)
    per_channel = (amp * spec.g[i]) ** 2 / (2.0 * mu)
    ksq = float(key[0] ** 2 + key[1] ** 2) * config.lattice.kscale**2
    return StokesVariance(
        per_channel=per_channel,
        pair_omega=per_channel,
        pair_velocity=per_channel / ksq,
    )


def convolution_nonlinearity(omega: SpectralField) -> SpectralField:
    """-(u . grad omega) by the exact double sum over wavenumber pairs.

    O(n^4) cost, so restricted to n <= 16.  No dealiasing truncation is
    applied beyond the resolved band; on inputs supported inside the 2/3
    band the retained coefficients agree with the fast pseudo-spectral
    product to round-off.
    """
    lat = omega.lattice
    if lat.n > 16:
        raise ValueError("convolution oracle is restricted to n <= 16")
    n = lat.n
    K = lat.wavenumbers()  # (m, 2), all active modes, both signs
    m = K.shape[0]

    # Full-grid coefficient lookup.
    full = np.zeros((n, n), dtype=np.complex128)
    full[:, : lat.nh] = omega.coeffs
    for j in range(lat.nh, n):
        full[:, j] = np.conj(omega.coeffs[(-np.arange(n)) % n, n - j])
    W = full[K[:, 0] % n, K[:, 1] % n]

    ksq = (K[:, 0] ** 2 + K[:, 1] ** 2).astype(np.float64)
    u1 = 1j * K[:, 1] / ksq * W
    u2 = -1j * K[:, 0] / ksq * W

    lim = n // 2 - 1
    out = np.zeros((n, n), dtype=np.complex128)
    for i in range(m):
        # ( uhat_p . i r ) what_r  at  q = p + r; the kscale factors of the
        # Biot-Savart inverse and the gradient cancel.
        terms = (u1[i] * (1j * K[:, 0]) + u2[i] * (1j * K[:, 1])) * W
        q1 = K[i, 0] + K[:, 0]
        q2 = K[i, 1] + K[:, 1]
        ok = (np.abs(q1) <= lim) & (np.abs(q2) <= lim) & ((q1 != 0) | (q2 != 0))
        np.add.at(out, (q1[ok] % n, q2[ok] % n), terms[ok])

    coeffs = np.ascontiguousarray(-out[:, : lat.nh])
    return SpectralField(lat, _symmetrize(lat, coeffs))


def damped_velocity_floor(spec: NoiseSpec, nu: float, tau: float, gamma: float) -> float:
    """Analytic lower bound for E||u_S||^2 of the damped model at alpha = 0.

    From the stationary vorticity balance and the interpolation
    |k|^0 <= (|k|^-gamma)^theta (|k|^2)^(1-theta) with theta = 2/(2+gamma):

        E||u||^2 >= (nu^(2 alpha)/tau) ( ||rho||^2/2
                     - nu^(2/(2+gamma)) max(1, 1/tau)/2 ||sigma||^2 ),

    evaluated here at alpha = 0 with ||rho||^2 = c^2 sum b_k^2 and
    ||sigma||^2 = c^2 sum g_k^2 (channel weighted).  The bound holds for the
    full nonlinear dynamics; it may be vacuous (negative) at large nu.
    """
    if tau <= 0:
        raise ValueError("the damped floor requires tau > 0")
    rho_sq = spec.c**2 * spec.b_sq_sum()
    sig_sq = spec.c**2 * spec.g_sq_sum()
    interp = nu ** (2.0 / (2.0 + gamma)) * max(1.0, 1.0 / tau) / 2.0
    return (rho_sq / 2.0 - interp * sig_sq) / tau
