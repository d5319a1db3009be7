"""Finite-mode white-in-time forcing for the vorticity equation.

A forced wavenumber k carries a velocity amplitude b_k; the matching
vorticity amplitude is g_k = |k| b_k.  For real fields each Hermitian pair
+/-k is driven through two independent channels,

    d(forcing) = c nu^alpha g_k ( dW_cos cos(k.x) + dW_sin sin(k.x) ),

with independent standard Wiener processes per channel.  The unit cos/sin
amplitudes fix the Ito-correction constant: in stationarity the enstrophy
balance reads  nu E||grad omega||^2 = (c^2 nu^(2 alpha)/2) sum_k g_k^2  with
the sum over the listed modes (one representative per pair), and the Stokes
oracle in ``vortlab.oracles`` validates the normalization exactly.

Randomness is counter-based (Philox): the draw for (seed, step, trajectory,
mode, channel) is a pure function of those indices, so ensembles are
reproducible and parallel-safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from .spectral import Lattice, SpectralField, _symmetrize

__all__ = [
    "NoiseSpec",
    "NoiseIncrement",
    "RngState",
    "counter_normals",
    "sample_increment",
    "forcing_field",
    "default_noise",
]

# Stream tags keep draws for different purposes disjoint.
TAG_STEP = 0
TAG_INIT = 1
TAG_FIELD = 2


def counter_normals(seed: int, step: int, shape, tag: int = TAG_STEP) -> np.ndarray:
    """Standard normals addressed by (seed, tag, step); pure and stateless.

    Row j of a (rows, ...) request is the same no matter how many rows are
    drawn, so trajectory j may be recomputed in isolation.
    """
    bitgen = Philox(
        key=np.array([seed & 0xFFFFFFFFFFFFFFFF, tag], dtype=np.uint64),
        counter=np.array([0, step, 0, 0], dtype=np.uint64),
    )
    return Generator(bitgen).standard_normal(shape)


def _canonical(mode) -> tuple[int, int]:
    """Representative of the Hermitian pair: k2 > 0, or k2 = 0 and k1 > 0."""
    a, b = int(mode[0]), int(mode[1])
    if (a, b) == (0, 0):
        raise ValueError("k = 0 cannot be forced")
    if b < 0 or (b == 0 and a < 0):
        a, b = -a, -b
    return a, b


@dataclass(frozen=True)
class NoiseSpec:
    """Forced mode set with velocity amplitudes b_k, global amplitude c and
    noise scaling exponent alpha (forcing amplitude c * nu^alpha)."""

    modes: tuple
    b: tuple
    c: float = 1.0
    alpha: float = 0.5
    channels: tuple = ()  # per-mode "both" or "cos"; empty means all "both"

    def __post_init__(self):
        modes = tuple(_canonical(m) for m in self.modes)
        if len(set(modes)) != len(modes):
            raise ValueError("forced modes must be distinct Hermitian pairs")
        if len(self.b) != len(modes):
            raise ValueError("need one amplitude b_k per forced mode")
        chans = self.channels or ("both",) * len(modes)
        if len(chans) != len(modes) or any(ch not in ("both", "cos") for ch in chans):
            raise ValueError("channels must be 'both' or 'cos', one per mode")
        if self.c < 0:
            raise ValueError("global amplitude c must be >= 0")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "b", tuple(float(x) for x in self.b))
        object.__setattr__(self, "channels", tuple(chans))

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def k_norms(self) -> np.ndarray:
        return np.array([np.hypot(a, b) for a, b in self.modes])

    @property
    def g(self) -> np.ndarray:
        """Vorticity amplitudes g_k = |k| b_k."""
        return self.k_norms * np.asarray(self.b)

    def channel_mask(self) -> np.ndarray:
        """(n_modes, 2) mask over (cos, sin) channels."""
        mask = np.ones((self.n_modes, 2))
        for i, ch in enumerate(self.channels):
            if ch == "cos":
                mask[i, 1] = 0.0
        return mask

    def _weights(self) -> np.ndarray:
        # A single-channel mode injects half the Ito correction of a pair.
        return self.channel_mask().sum(axis=1) / 2.0

    def g_sq_sum(self) -> float:
        """sum_k g_k^2 weighted by active channels; the est1-type constant."""
        return float(np.sum(self._weights() * self.g**2))

    def b_sq_sum(self) -> float:
        """sum_k b_k^2 = sum_k (g_k/|k|)^2, channel weighted."""
        return float(np.sum(self._weights() * np.asarray(self.b) ** 2))

    def hminus_sq_sum(self, s: float) -> float:
        """sum_k |k|^(-2s) g_k^2, channel weighted (damped-model constants)."""
        return float(np.sum(self._weights() * self.k_norms ** (-2 * s) * self.g**2))

    def g_abs_sum(self) -> float:
        """sum_k |g_k|; the sup-norm noise scale used by the Moser ratio."""
        return float(np.sum(np.abs(self.g)))

    def amplitude(self, nu: float) -> float:
        """Forcing amplitude c * nu^alpha with the nu = 0 edge cases pinned.

        alpha > 0 with nu = 0 returns 0 (the forcing vanishes continuously);
        alpha < 0 with nu = 0 has no finite limit and is rejected.
        """
        if nu < 0:
            raise ValueError("nu must be >= 0")
        if nu == 0:
            if self.alpha > 0:
                return 0.0
            if self.alpha < 0:
                raise ValueError("amplitude diverges: nu = 0 with alpha < 0")
            return self.c
        return self.c * float(nu) ** self.alpha

    def validate_on(self, lattice: Lattice):
        cut = lattice.dealias_cutoff
        for a, b in self.modes:
            if max(abs(a), abs(b)) > cut:
                raise ValueError(f"forced mode {(a, b)} outside the dealiased band")

    def channel_fields(self, lattice: Lattice):
        """Unit-amplitude channel shapes as spectral fields.

        Yields (mode_index, channel_name, SpectralField) where the field is
        cos(k.x) or sin(k.x); multiply by c nu^alpha g_k for physical size.
        """
        out = []
        for i, (k, ch) in enumerate(zip(self.modes, self.channels)):
            out.append((i, "cos", SpectralField.from_modes(lattice, {k: 0.5})))
            if ch == "both":
                out.append((i, "sin", SpectralField.from_modes(lattice, {k: -0.5j})))
        return out

    def sigma_sq_grid(self, lattice: Lattice, nu: float, oversample: int = 2) -> np.ndarray:
        """Pointwise sum over channels of sigma_ch(x)^2 on the sampling grid."""
        from .spectral import to_physical

        amp = self.amplitude(nu)
        m = lattice.n * oversample
        total = np.zeros((m, m))
        for i, _, fld in self.channel_fields(lattice):
            total += (amp * self.g[i] * to_physical(fld, oversample)) ** 2
        return total


def default_noise(c: float = 1.0, alpha: float = 0.5) -> NoiseSpec:
    """Default forced set: all pairs with 1 <= |k|^2 <= 4 and b_k = 1/|k|.

    With g_k = 1 on six modes the enstrophy balance constant is
    (c^2/2) sum g_k^2 = 3 c^2.
    """
    modes = [(1, 0), (2, 0), (0, 1), (0, 2), (1, 1), (-1, 1)]
    b = [1.0 / np.hypot(a, bb) for a, bb in modes]
    return NoiseSpec(modes=tuple(modes), b=tuple(b), c=c, alpha=alpha)


@dataclass
class RngState:
    """Position in the counter-based stream: (seed, trajectory, step)."""

    seed: int
    traj: int = 0
    step: int = 0


@dataclass
class NoiseIncrement:
    """Wiener increments over one step: dw[mode, 0] cos, dw[mode, 1] sin."""

    dw: np.ndarray
    dt: float


def sample_increment(spec: NoiseSpec, rng: RngState, dt: float) -> NoiseIncrement:
    """Draw per-channel increments ~ N(0, dt) and advance the stream."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    draws = counter_normals(rng.seed, rng.step, (rng.traj + 1, spec.n_modes, 2))
    rng.step += 1
    dw = draws[rng.traj] * np.sqrt(dt) * spec.channel_mask()
    return NoiseIncrement(dw=dw, dt=dt)


class ModeInjector:
    """Precomputed slot indices to add per-mode (cos, sin) amounts into a
    half-spectrum array."""

    def __init__(self, spec: NoiseSpec, lattice: Lattice):
        spec.validate_on(lattice)
        n = lattice.n
        rows, cols, mirror_rows = [], [], []
        for a, b in spec.modes:
            rows.append(a % n)
            cols.append(b)
            mirror_rows.append((-a) % n if b == 0 else -1)
        self.rows = np.array(rows)
        self.cols = np.array(cols)
        self.mirror = np.array(mirror_rows)
        self.has_mirror = self.mirror >= 0

    def inject(self, coeffs: np.ndarray, amounts: np.ndarray):
        """Add amounts[..., m, 2] (cos, sin channel weights) into coeffs.

        The pair contribution at +k is (cos - i sin)/2; modes on the k2 = 0
        axis also receive the conjugate at the explicitly stored -k slot.
        """
        vals = 0.5 * (amounts[..., 0] - 1j * amounts[..., 1])
        coeffs[..., self.rows, self.cols] += vals
        if np.any(self.has_mirror):
            hm = self.has_mirror
            coeffs[..., self.mirror[hm], 0] += np.conj(vals[..., hm])
        return coeffs


def forcing_field(
    lattice: Lattice, spec: NoiseSpec, inc: NoiseIncrement, nu: float
) -> SpectralField:
    """Assemble c nu^alpha sum_k g_k (dW_cos cos(k.x) + dW_sin sin(k.x)).

    The result is Hermitian and mean-free by construction;
    E ||field||^2 = c^2 nu^(2 alpha) (sum_k w_k g_k^2) dt with w_k the
    channel weight, so per unit time the L2 input rate matches the balance
    constants above.
    """
    amp = spec.amplitude(nu)
    out = SpectralField.zeros(lattice)
    inj = ModeInjector(spec, lattice)
    inj.inject(out.coeffs, amp * spec.g[:, None] * inc.dw)
    _symmetrize(lattice, out.coeffs)
    return out
