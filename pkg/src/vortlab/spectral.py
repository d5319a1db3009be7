"""Fourier representation of real scalar fields on the square torus.

Fields live on [0, side)^2 (default side 2*pi) and are stored as rfft2
half-spectra normalized so that

    v(x) = sum_k vhat_k exp(i k.x),

with the sum over integer wavenumbers k = (k1, k2).  Under this convention
the squared L2 norm is the normalized integral:

    ||v||^2 = (1/|T^2|) int |v|^2 dx = sum_k |vhat_k|^2.

All fields are mean-free (the k = 0 coefficient is pinned to zero) and the
Nyquist row/column is always zeroed so Hermitian symmetry is unambiguous.
Quadratic products are dealiased with the 2/3 rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as _fft

__all__ = [
    "Lattice",
    "SpectralField",
    "VelocityField",
    "biot_savart",
    "nonlinear_term",
    "advection_term",
    "to_physical",
    "from_physical",
    "linf_norm",
    "random_smooth_field",
    "random_divfree_velocity",
]

_OVERSAMPLE_ALLOWED = (1, 2, 4)


@lru_cache(maxsize=32)
def _lattice_arrays(n: int, dealias_fraction: float):
    """Wavenumber bookkeeping for an n x n grid, rfft2 layout (k2 >= 0)."""
    nh = n // 2 + 1
    k1 = np.fft.fftfreq(n, 1.0 / n).astype(np.int64)[:, None]   # (n, 1), signed
    k2 = np.arange(nh, dtype=np.int64)[None, :]                  # (1, nh)
    ksq = (k1 * k1 + k2 * k2).astype(np.float64)
    inv_ksq = np.zeros_like(ksq)
    np.divide(1.0, ksq, out=inv_ksq, where=ksq > 0)

    # Active modes: |k_i| <= n/2 - 1; the Nyquist row/column stays zero.
    lim = n // 2 - 1
    active = (np.abs(k1) <= lim) & (k2 <= lim)
    active[0, 0] = False  # mean-free

    cut = int(np.floor(dealias_fraction * (n // 2)))
    dealias = (np.abs(k1) <= cut) & (k2 <= cut) & active

    # Multiplicity of each stored slot in the full spectrum: columns with
    # k2 > 0 stand for a +/-k pair; the k2 = 0 column stores both signs of
    # k1 explicitly.
    weight = np.where(k2 > 0, 2.0, 1.0) * active
    return k1, k2, ksq, inv_ksq, active, dealias, weight


@dataclass(frozen=True)
class Lattice:
    """Square-torus collocation grid and its dual wavenumber set."""

    n: int
    side_length: float = 2.0 * np.pi
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        if self.n < 8 or self.n % 2 != 0:
            raise ValueError(f"grid size must be even and >= 8, got {self.n}")
        if not 0 < self.dealias_fraction <= 1:
            raise ValueError("dealias_fraction must lie in (0, 1]")
        if self.side_length <= 0:
            raise ValueError("side_length must be positive")

    @property
    def nh(self) -> int:
        return self.n // 2 + 1

    @property
    def kscale(self) -> float:
        """Physical wavenumber per integer mode (1 for the 2*pi torus)."""
        return 2.0 * np.pi / self.side_length

    # Cached integer-wavenumber arrays in rfft2 layout.
    @property
    def k1(self):
        return _lattice_arrays(self.n, self.dealias_fraction)[0]

    @property
    def k2(self):
        return _lattice_arrays(self.n, self.dealias_fraction)[1]

    @property
    def ksq(self):
        return _lattice_arrays(self.n, self.dealias_fraction)[2]

    @property
    def inv_ksq(self):
        return _lattice_arrays(self.n, self.dealias_fraction)[3]

    @property
    def active_mask(self):
        return _lattice_arrays(self.n, self.dealias_fraction)[4]

    @property
    def dealias_mask(self):
        return _lattice_arrays(self.n, self.dealias_fraction)[5]

    @property
    def mode_weight(self):
        return _lattice_arrays(self.n, self.dealias_fraction)[6]

    @property
    def dealias_cutoff(self) -> int:
        return int(np.floor(self.dealias_fraction * (self.n // 2)))

    def grid(self, oversample: int = 1):
        """Collocation coordinates (x1, x2) as (m,1) and (1,m) arrays."""
        m = self.n * oversample
        x = np.arange(m) * (self.side_length / m)
        return x[:, None], x[None, :]

    def wavenumbers(self):
        """All active integer wavenumbers as an (m, 2) array (full spectrum)."""
        kk1 = np.fft.fftfreq(self.n, 1.0 / self.n).astype(np.int64)
        K1, K2 = np.meshgrid(kk1, kk1, indexing="ij")
        lim = self.n // 2 - 1
        keep = (np.abs(K1) <= lim) & (np.abs(K2) <= lim) & ((K1 != 0) | (K2 != 0))
        return np.stack([K1[keep], K2[keep]], axis=1)


def _symmetrize(lattice: Lattice, coeffs: np.ndarray) -> np.ndarray:
    """Enforce Hermitian symmetry, zero mean and inactive-mode zeros in place.

    Only the k2 = 0 column stores redundant information in the rfft2 layout;
    there F[-k1, 0] must equal conj(F[k1, 0]).
    """
    coeffs *= lattice.active_mask
    col = coeffs[..., :, 0]
    flipped = np.conj(np.roll(col[..., ::-1], 1, axis=-1))
    coeffs[..., :, 0] = 0.5 * (col + flipped)
    coeffs[..., 0, 0] = 0.0
    return coeffs


def hermitian_residual(lattice: Lattice, coeffs: np.ndarray) -> float:
    """Max deviation from Hermitian symmetry in the redundant k2 = 0 column."""
    col = coeffs[..., :, 0]
    flipped = np.conj(np.roll(col[..., ::-1], 1, axis=-1))
    return float(np.max(np.abs(col - flipped), initial=0.0))


@dataclass
class SpectralField:
    """Mean-free real scalar field in half-spectrum form.

    ``coeffs`` has shape (n, n//2 + 1) with axis 0 the signed k1 frequency in
    numpy fft order and axis 1 the non-negative k2 frequency.
    """

    lattice: Lattice
    coeffs: np.ndarray

    @classmethod
    def zeros(cls, lattice: Lattice) -> "SpectralField":
        return cls(lattice, np.zeros((lattice.n, lattice.nh), dtype=np.complex128))

    @classmethod
    def from_modes(cls, lattice: Lattice, modes: dict) -> "SpectralField":
        """Build a field from {(k1, k2): coefficient}; conjugate pairs implied.

        Each entry sets vhat at +k and conj at -k, so ``{(1, 0): 0.5}`` is
        cos(x1).
        """
        f = cls.zeros(lattice)
        for (a, b), val in modes.items():
            f.add_pair((a, b), complex(val))
        f.coeffs = _symmetrize(f.lattice, f.coeffs)
        return f

    def add_pair(self, k, val: complex):
        """Add ``val`` at +k and conj(val) at -k."""
        a, b = int(k[0]), int(k[1])
        n = self.lattice.n
        if (a, b) == (0, 0):
            raise ValueError("k = 0 is excluded (mean-free fields)")
        if b > 0:
            self.coeffs[a % n, b] += val
        elif b < 0:
            self.coeffs[(-a) % n, -b] += np.conj(val)
        else:
            self.coeffs[a % n, 0] += val
            self.coeffs[(-a) % n, 0] += np.conj(val)

    def coeff(self, k) -> complex:
        """Read vhat_k for any active wavenumber (either sign)."""
        a, b = int(k[0]), int(k[1])
        n = self.lattice.n
        if b > 0:
            return complex(self.coeffs[a % n, b])
        if b < 0:
            return complex(np.conj(self.coeffs[(-a) % n, -b]))
        return complex(self.coeffs[a % n, 0])

    def copy(self) -> "SpectralField":
        return SpectralField(self.lattice, self.coeffs.copy())

    def dealiased(self) -> "SpectralField":
        return SpectralField(self.lattice, self.coeffs * self.lattice.dealias_mask)

    def l2_sq(self) -> float:
        w = self.lattice.mode_weight
        return float(np.sum(w * np.abs(self.coeffs) ** 2))

    def h1_sq(self) -> float:
        lat = self.lattice
        w = lat.mode_weight * lat.ksq * lat.kscale**2
        return float(np.sum(w * np.abs(self.coeffs) ** 2))

    def sobolev_sq(self, s: float) -> float:
        """Homogeneous Sobolev sum  sum_k |k|^(2s) |vhat_k|^2."""
        lat = self.lattice
        mult = np.zeros_like(lat.ksq)
        np.power(lat.ksq * lat.kscale**2, s, out=mult, where=lat.ksq > 0)
        return float(np.sum(lat.mode_weight * mult * np.abs(self.coeffs) ** 2))

    def validate(self, tol: float = 1e-12):
        lat = self.lattice
        if self.coeffs.shape != (lat.n, lat.nh):
            raise ValueError("coefficient array has the wrong shape")
        if np.any(np.abs(self.coeffs * ~lat.active_mask) > tol):
            raise ValueError("inactive (Nyquist or k=0) modes carry energy")
        res = hermitian_residual(lat, self.coeffs)
        scale = max(1.0, float(np.max(np.abs(self.coeffs))))
        if res > tol * scale:
            raise ValueError(f"Hermitian symmetry violated: residual {res:.3e}")


@dataclass
class VelocityField:
    """Divergence-free velocity with components (u1, u2)."""

    u1: SpectralField
    u2: SpectralField

    @property
    def lattice(self) -> Lattice:
        return self.u1.lattice

    def divergence_residual(self) -> float:
        lat = self.lattice
        div = lat.k1 * self.u1.coeffs + lat.k2 * self.u2.coeffs
        return float(np.max(np.abs(div)))

    def curl(self) -> SpectralField:
        lat = self.lattice
        c = 1j * lat.kscale * (lat.k1 * self.u2.coeffs - lat.k2 * self.u1.coeffs)
        return SpectralField(lat, _symmetrize(lat, c))

    def max_speed(self, oversample: int = 2) -> float:
        s1 = to_physical(self.u1, oversample)
        s2 = to_physical(self.u2, oversample)
        return float(np.sqrt(np.max(s1 * s1 + s2 * s2)))


# ---------------------------------------------------------------------------
# Core operations.  The underscore variants act on raw (..., n, nh) arrays so
# trajectory ensembles can share one vectorized transform; the public
# functions wrap single fields.
# ---------------------------------------------------------------------------

def _to_physical(lattice: Lattice, coeffs: np.ndarray, oversample: int = 1) -> np.ndarray:
    n, m = lattice.n, lattice.n * oversample
    if oversample == 1:
        return _fft.irfft2(coeffs * (n * n), s=(n, n), axes=(-2, -1))
    half = n // 2
    shape = coeffs.shape[:-2] + (m, m // 2 + 1)
    padded = np.zeros(shape, dtype=np.complex128)
    padded[..., :half, : lattice.nh] = coeffs[..., :half, :]
    padded[..., m - half :, : lattice.nh] = coeffs[..., half:, :]
    return _fft.irfft2(padded * (m * m), s=(m, m), axes=(-2, -1))


def _from_physical(lattice: Lattice, values: np.ndarray) -> np.ndarray:
    m = values.shape[-1]
    if values.shape[-2] != m or m % lattice.n != 0:
        raise ValueError("grid must be square with size a multiple of n")
    raw = _fft.rfft2(values, axes=(-2, -1)) / (m * m)
    if m == lattice.n:
        coeffs = raw.astype(np.complex128)
    else:
        half = lattice.n // 2
        coeffs = np.zeros(values.shape[:-2] + (lattice.n, lattice.nh), dtype=np.complex128)
        coeffs[..., :half, :] = raw[..., :half, : lattice.nh]
        coeffs[..., half:, :] = raw[..., m - half :, : lattice.nh]
    return _symmetrize(lattice, coeffs)


def _velocity(lattice: Lattice, omega: np.ndarray):
    """Biot-Savart multipliers: uhat = -i k-perp omega-hat / |k|^2."""
    mult = lattice.inv_ksq / lattice.kscale
    u1 = (1j * lattice.k2 * mult) * omega
    u2 = (-1j * lattice.k1 * mult) * omega
    return u1, u2


def _advect(lattice: Lattice, v1: np.ndarray, v2: np.ndarray, scalar: np.ndarray) -> np.ndarray:
    """Dealiased -(v . grad) scalar for half-spectrum inputs."""
    ks = lattice.kscale
    g1 = _fft.irfft2(1j * ks * lattice.k1 * scalar, s=(lattice.n, lattice.n), axes=(-2, -1))
    g2 = _fft.irfft2(1j * ks * lattice.k2 * scalar, s=(lattice.n, lattice.n), axes=(-2, -1))
    p1 = _fft.irfft2(v1, s=(lattice.n, lattice.n), axes=(-2, -1))
    p2 = _fft.irfft2(v2, s=(lattice.n, lattice.n), axes=(-2, -1))
    # Physical values are n^2 * irfft2(coeffs) and coeffs are rfft2/n^2, so
    # the quadratic product picks up one factor n^2 overall.
    out = _fft.rfft2(p1 * g1 + p2 * g2, axes=(-2, -1))
    out *= lattice.dealias_mask * float(lattice.n * lattice.n)
    np.negative(out, out=out)
    return out


def _nonlinear(lattice: Lattice, omega: np.ndarray) -> np.ndarray:
    u1, u2 = _velocity(lattice, omega)
    return _advect(lattice, u1, u2, omega)


def biot_savart(omega: SpectralField) -> VelocityField:
    """Recover the mean-free divergence-free velocity from the vorticity.

    In spectral form uhat_k = -i k-perp omegahat_k / |k|^2 with
    k-perp = (-k2, k1); equivalently u = grad-perp psi with Delta psi = omega.
    """
    lat = omega.lattice
    u1, u2 = _velocity(lat, omega.coeffs)
    return VelocityField(SpectralField(lat, u1), SpectralField(lat, u2))


def nonlinear_term(omega: SpectralField) -> SpectralField:
    """Dealiased advection term N(omega) = -(u . grad) omega.

    Computed pseudo-spectrally: u and grad(omega) are evaluated on the n x n
    collocation grid, multiplied pointwise, transformed back, and truncated
    with the 2/3 rule (alias terms from the quadratic product land outside
    the retained band, so retained coefficients are exact).
    """
    lat = omega.lattice
    return SpectralField(lat, _nonlinear(lat, omega.coeffs))


def advection_term(velocity: VelocityField, scalar: SpectralField) -> SpectralField:
    """Dealiased -(v . grad) scalar for an arbitrary velocity field."""
    lat = scalar.lattice
    out = _advect(lat, velocity.u1.coeffs, velocity.u2.coeffs, scalar.coeffs)
    return SpectralField(lat, out)


def to_physical(fieldobj: SpectralField, oversample: int = 1) -> np.ndarray:
    """Evaluate the field on an (oversample*n)^2 collocation grid.

    Zero padding makes this exact for band-limited fields; entry [i, j] is
    the value at x = (i*h, j*h) with h = side/(oversample*n).
    """
    if oversample != int(oversample):
        raise ValueError("oversample must be an integer")
    if int(oversample) not in _OVERSAMPLE_ALLOWED:
        raise ValueError(f"oversample must be one of {_OVERSAMPLE_ALLOWED}")
    return _to_physical(fieldobj.lattice, fieldobj.coeffs, int(oversample))


def from_physical(lattice: Lattice, values: np.ndarray) -> SpectralField:
    """Forward transform from a collocation grid (n x n or oversampled)."""
    return SpectralField(lattice, _from_physical(lattice, values))


def field_to_csv(fieldobj: SpectralField, fh) -> None:
    """Debug dump of the full coefficient set as k1,k2,re,im rows."""
    lat = fieldobj.lattice
    fh.write("k1,k2,re,im\n")
    for a, b in lat.wavenumbers():
        c = fieldobj.coeff((int(a), int(b)))
        fh.write(f"{a},{b},{c.real:.17g},{c.imag:.17g}\n")


def field_from_csv(lattice: Lattice, fh) -> SpectralField:
    """Inverse of field_to_csv; rows may cover either or both of a pair."""
    header = fh.readline().strip()
    if header != "k1,k2,re,im":
        raise ValueError(f"unexpected field CSV header: {header!r}")
    f = SpectralField.zeros(lattice)
    n = lattice.n
    for line in fh:
        if not line.strip():
            continue
        a, b, re, im = line.split(",")
        a, b = int(a), int(b)
        val = complex(float(re), float(im))
        if b > 0:
            f.coeffs[a % n, b] = val
        elif b == 0 and a > 0:
            f.coeffs[a % n, 0] = val
            f.coeffs[(-a) % n, 0] = np.conj(val)
    f.coeffs = _symmetrize(lattice, f.coeffs)
    return f


def linf_norm(fieldobj: SpectralField) -> float:
    """Sup norm approximated by the max over the oversample-2 grid.

    The exact supremum of a trigonometric polynomial is expensive; factor-2
    zero padding is the documented accuracy/cost compromise.
    """
    return float(np.max(np.abs(to_physical(fieldobj, 2))))


def _linf_batch(lattice: Lattice, coeffs: np.ndarray) -> np.ndarray:
    vals = _to_physical(lattice, coeffs, 2)
    return np.max(np.abs(vals), axis=(-2, -1))


def random_smooth_field(
    lattice: Lattice,
    normals,
    band: int = 4,
    l2_norm: float = 1.0,
) -> SpectralField:
    """Random mean-free field supported on 1 <= |k_i| <= band, given L2 size.

    ``normals`` supplies standard Gaussian draws (a callable taking a count);
    coefficients get a smooth |k|^-1 profile so the field looks like large
    eddies rather than grid noise.
    """
    band = min(band, lattice.dealias_cutoff)
    reps = [
        (a, b)
        for a in range(-band, band + 1)
        for b in range(0, band + 1)
        if (b > 0 or a > 0) and max(abs(a), abs(b)) <= band
    ]
    draws = np.asarray(normals(2 * len(reps)), dtype=np.float64)
    f = SpectralField.zeros(lattice)
    for i, (a, b) in enumerate(reps):
        amp = 1.0 / np.hypot(a, b)
        f.add_pair((a, b), amp * (draws[2 * i] + 1j * draws[2 * i + 1]))
    f.coeffs = _symmetrize(lattice, f.coeffs)
    size = np.sqrt(f.l2_sq())
    if size > 0:
        f.coeffs *= l2_norm / size
    return f


def random_divfree_velocity(
    lattice: Lattice,
    normals,
    band: int = 3,
    sup_norm: float = 1.0,
) -> VelocityField:
    """Random divergence-free velocity with pointwise speed normalized.

    Built as grad-perp of a random band-limited stream function, so the
    divergence-free constraint holds exactly in spectral space; the max speed
    over the oversample-2 grid is scaled to ``sup_norm``.
    """
    psi = random_smooth_field(lattice, normals, band=band, l2_norm=1.0)
    lat = lattice
    ks = lat.kscale
    u1 = SpectralField(lat, _symmetrize(lat, -1j * ks * lat.k2 * psi.coeffs))
    u2 = SpectralField(lat, _symmetrize(lat, 1j * ks * lat.k1 * psi.coeffs))
    vel = VelocityField(u1, u2)
    speed = vel.max_speed(oversample=2)
    if speed > 0:
        vel.u1.coeffs *= sup_norm / speed
        vel.u2.coeffs *= sup_norm / speed
    return vel
