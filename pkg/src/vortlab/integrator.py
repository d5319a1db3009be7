"""Time stepping for the stochastic vorticity equation

    d omega + ( advect * u.grad omega + Y omega - nu Lap omega ) dt
        = c nu^alpha sum_k g_k dW_k,

with Y = tau * |k|^(-gamma) (a weak large-scale damping) and the Laplacian
generalized to |k|^diss_exponent.  The stepper is exponential (integrating
factor) Euler-Maruyama: the linear multiplier and the noise are integrated
exactly per Fourier mode,

    what_k <- exp(-mu_k dt) (what_k + dt Nhat_k) + xi_k,
    Var(xi per channel) = c^2 nu^(2 alpha) g_k^2 (1 - exp(-2 mu_k dt)) / (2 mu_k),

so stationary variances of the linear dynamics carry no dt bias.  The
nonlinear increment is weak order 1.  The deterministic Euler limit uses
classical RK4 instead (no noise, clean conservation).
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .forcing import ModeInjector, NoiseSpec, counter_normals
from .spectral import (
    Lattice,
    SpectralField,
    VelocityField,
    _advect,
    _nonlinear,
    _symmetrize,
)

__all__ = [
    "SolverConfig",
    "State",
    "DriftSpec",
    "Observer",
    "BlowUpError",
    "linear_multiplier",
    "step",
    "integrate",
    "run_ensemble",
    "rescale_time_equivalence",
    "write_checkpoint",
    "read_checkpoint",
]

MODES = ("full_nonlinear", "stokes_linear", "prescribed_drift", "deterministic_euler")


class BlowUpError(RuntimeError):
    """Raised when ||omega||_L2 exceeds the guard; signals a bug or a dt that
    is too large (the 2D equation itself does not blow up)."""

    def __init__(self, t: float, l2: float):
        super().__init__(f"numerical blow-up: ||omega|| = {l2:.3e} at t = {t:.6g}")
        self.t = t
        self.l2 = l2


@dataclass
class DriftSpec:
    """Time-independent divergence-free drift for prescribed_drift mode."""

    velocity: VelocityField
    amplitude: float = 1.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("drift amplitude must be >= 0")
        res = self.velocity.divergence_residual()
        if res > 1e-13:
            raise ValueError(f"drift is not divergence-free: residual {res:.3e}")


@dataclass(frozen=True)
class SolverConfig:
    lattice: Lattice
    noise: NoiseSpec
    nu: float
    dt: float
    t_end: float
    tau: float = 0.0
    gamma: float = 0.0
    diss_exponent: float = 2.0
    mode: str = "full_nonlinear"
    seed: int = 0
    advect_coeff: float = 1.0
    drift: DriftSpec | None = None
    guard: float = 1e6
    damping_mask: np.ndarray | None = None  # optional Y_low hook, multiplies tau term
    drift_scheme: str = "heun"  # "heun" (two-stage) or "euler" (single evaluation)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.drift_scheme not in ("heun", "euler"):
            raise ValueError(f"unknown drift scheme {self.drift_scheme!r}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.nu < 0 or self.tau < 0:
            raise ValueError("nu and tau must be >= 0")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0 < self.diss_exponent <= 2:
            raise ValueError("diss_exponent must lie in (0, 2]")
        if self.mode == "prescribed_drift" and self.drift is None:
            raise ValueError("prescribed_drift mode needs a DriftSpec")
        if self.mode == "deterministic_euler":
            if self.nu != 0 or self.tau != 0 or self.noise.c != 0:
                raise ValueError("deterministic_euler requires nu = tau = 0 and zero noise")
        self.noise.validate_on(self.lattice)


@dataclass
class State:
    t: float
    omega: SpectralField
    step_index: int = 0
    traj: int = 0


@dataclass
class Observer:
    """Callback invoked every ``stride`` steps with (t, omega) read-only."""

    fn: object
    stride: int = 1


def linear_multiplier(config: SolverConfig, k) -> float:
    """mu_k = nu |k|^diss_exponent + tau |k|^(-gamma) for a single mode."""
    kn = float(np.hypot(k[0], k[1])) * config.lattice.kscale
    if kn == 0:
        raise ValueError("k = 0 has no multiplier (mean-free fields)")
    return config.nu * kn**config.diss_exponent + config.tau * kn**-config.gamma


def _mu_array(config: SolverConfig) -> np.ndarray:
    lat = config.lattice
    kn = np.sqrt(lat.ksq) * lat.kscale
    mu = np.zeros_like(kn)
    np.power(kn, config.diss_exponent, out=mu, where=kn > 0)
    mu *= config.nu
    if config.tau > 0:
        damp = np.zeros_like(kn)
        np.power(kn, -config.gamma, out=damp, where=kn > 0)
        if config.damping_mask is not None:
            damp *= config.damping_mask
        mu += config.tau * damp
    return mu


class _Workspace:
    """Per-config precomputed arrays for the stochastic stepper."""

    def __init__(self, config: SolverConfig):
        lat = config.lattice
        self.config = config
        self.mu = _mu_array(config)
        self.decay = np.exp(-self.mu * config.dt) * lat.active_mask
        self.l2_weight = lat.mode_weight
        self.injector = ModeInjector(config.noise, lat)
        mu_modes = self.mu[self.injector.rows, self.injector.cols]
        amp = config.noise.amplitude(config.nu)
        var = np.where(
            mu_modes * config.dt > 1e-12,
            (1.0 - np.exp(-2.0 * mu_modes * config.dt)) / (2.0 * mu_modes),
            config.dt,
        )
        self.noise_std = amp * config.noise.g * np.sqrt(var)  # per channel, per mode
        self.channel_mask = config.noise.channel_mask()
        if config.mode == "prescribed_drift":
            d = config.drift
            self.drift1 = d.amplitude * d.velocity.u1.coeffs
            self.drift2 = d.amplitude * d.velocity.u2.coeffs
        self.stochastic = self.noise_std.size > 0 and np.any(self.noise_std > 0)

    def drift_term(self, w: np.ndarray) -> np.ndarray | None:
        cfg = self.config
        if cfg.mode == "full_nonlinear":
            nl = _nonlinear(cfg.lattice, w)
            if cfg.advect_coeff != 1.0:
                nl *= cfg.advect_coeff
            return nl
        if cfg.mode == "prescribed_drift":
            return _advect(cfg.lattice, self.drift1, self.drift2, w)
        return None  # stokes_linear

    def advance(self, w: np.ndarray, step_index: int, first_traj: int = 0) -> np.ndarray:
        """One exponential Euler-Maruyama step on a (batch, n, nh) array.

        Batch row i is trajectory ``first_traj + i`` and consumes that row of
        the (seed, step)-keyed draw block, so per-trajectory results do not
        depend on how trajectories are grouped into batches.
        """
        cfg = self.config
        nl = self.drift_term(w)
        if nl is None:
            w = w * self.decay
        elif cfg.drift_scheme == "euler":
            w = (w + cfg.dt * nl) * self.decay
        else:
            # Exponential Heun: a trapezoid on the integrating-factor form.
            # A single explicit evaluation is linearly unstable under strong
            # advection (imaginary symbol); the second stage restores a
            # usable stability region at unchanged weak order.
            predictor = (w + cfg.dt * nl) * self.decay
            nl *= self.decay
            nl += self.drift_term(predictor)
            w = w * self.decay + (0.5 * cfg.dt) * nl
        if self.stochastic:
            rows = first_traj + w.shape[0]
            draws = counter_normals(cfg.seed, step_index, (rows, cfg.noise.n_modes, 2))
            if first_traj:
                draws = draws[first_traj:]
            draws *= self.noise_std[:, None] * self.channel_mask
            self.injector.inject(w, draws)
        return w

    def l2_norms(self, w: np.ndarray) -> np.ndarray:
        return np.sqrt(np.sum(self.l2_weight * (w.real**2 + w.imag**2), axis=(-2, -1)))

    def check_guard(self, w: np.ndarray, t: float):
        norms = self.l2_norms(w)
        if not np.all(np.isfinite(norms)) or np.any(norms > self.config.guard):
            raise BlowUpError(t, float(np.max(norms[np.isfinite(norms)], initial=np.inf)))


def _rk4_step(config: SolverConfig, w: np.ndarray) -> np.ndarray:
    lat, dt, a = config.lattice, config.dt, config.advect_coeff

    def f(x):
        out = _nonlinear(lat, x)
        if a != 1.0:
            out *= a
        return out

    k1 = f(w)
    k2 = f(w + 0.5 * dt * k1)
    k3 = f(w + 0.5 * dt * k2)
    k4 = f(w + dt * k3)
    return w + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step(state: State, config: SolverConfig, workspace: _Workspace | None = None) -> State:
    """Advance one time step, preserving the field invariants."""
    w = state.omega.coeffs[None, ...].copy()
    if config.mode == "deterministic_euler":
        w = _rk4_step(config, w)
    else:
        ws = workspace or _Workspace(config)
        w = ws.advance(w, state.step_index, first_traj=state.traj)
        ws.check_guard(w, state.t + config.dt)
    fld = SpectralField(config.lattice, w[0])
    return State(t=state.t + config.dt, omega=fld, step_index=state.step_index + 1, traj=state.traj)


def integrate(state: State, config: SolverConfig, observers=()) -> State:
    """Step from state.t to t_end, invoking observers on their strides."""
    if config.t_end <= state.t:
        raise ValueError("t_end must exceed the current time")
    nsteps = int(round((config.t_end - state.t) / config.dt))
    obs = [o if isinstance(o, Observer) else Observer(o) for o in observers]
    ws = None if config.mode == "deterministic_euler" else _Workspace(config)
    w = state.omega.coeffs[None, ...].copy()
    t = state.t
    sindex = state.step_index
    for i in range(nsteps):
        if ws is None:
            w = _rk4_step(config, w)
        else:
            w = ws.advance(w, sindex, first_traj=state.traj)
            ws.check_guard(w, state.t + (i + 1) * config.dt)
        sindex += 1
        t = state.t + (i + 1) * config.dt
        for o in obs:
            if (i + 1) % o.stride == 0:
                o.fn(t, SpectralField(config.lattice, w[0]))
    return State(t=t, omega=SpectralField(config.lattice, w[0]), step_index=sindex, traj=state.traj)


def run_ensemble(
    config: SolverConfig,
    n_traj: int,
    init: np.ndarray,
    nsteps: int,
    callback=None,
    stride: int = 1,
    t0: float = 0.0,
    step0: int = 0,
) -> np.ndarray:
    """Advance ``n_traj`` trajectories in one vectorized batch.

    ``init`` is broadcast to (n_traj, n, nh); trajectory j consumes row j of
    the per-step draw block, so results per trajectory do not depend on the
    batch size.  ``callback(step_index, t, w_batch)`` fires every ``stride``
    steps with the raw coefficient batch (read-only by convention).
    """
    lat = config.lattice
    ws = _Workspace(config)
    w = np.broadcast_to(init, (n_traj, lat.n, lat.nh)).astype(np.complex128).copy()
    for i in range(nsteps):
        w = ws.advance(w, step0 + i)
        t = t0 + (i + 1) * config.dt
        ws.check_guard(w, t)
        if callback is not None and (i + 1) % stride == 0:
            callback(step0 + i + 1, t, w)
    return w


def rescale_time_equivalence(config: SolverConfig) -> SolverConfig:
    """Map the (nu, sqrt-nu noise) problem to unit diffusion with drift u/nu.

    Time is rescaled by nu, so the returned config has diffusion coefficient
    1, the advection scaled by 1/nu, noise amplitude c at alpha = 0, and
    (dt, t_end) shrunk by nu.  With these choices the discrete trajectories
    coincide draw-for-draw and the two parameterizations share one invariant
    measure.
    """
    if config.mode != "full_nonlinear":
        raise ValueError("rescaling is defined for the full nonlinear equation")
    if config.tau != 0:
        raise ValueError("rescaling requires tau = 0")
    if abs(config.noise.alpha - 0.5) > 1e-14:
        raise ValueError("rescaling requires the sqrt-nu noise scaling (alpha = 1/2)")
    if config.nu <= 0:
        raise ValueError("nu must be positive")
    nu = config.nu
    noise = replace(config.noise, alpha=0.0)
    return replace(
        config,
        nu=1.0,
        noise=noise,
        advect_coeff=config.advect_coeff / nu,
        dt=config.dt * nu,
        t_end=config.t_end * nu,
    )


# ---------------------------------------------------------------------------
# Checkpoints: little-endian header (t, config hash, rng position) followed by
# the full n x n complex grid, interleaved re/im, row-major k order.
# ---------------------------------------------------------------------------

_MAGIC = b"VLC1"


def _full_grid(field: SpectralField) -> np.ndarray:
    lat = field.lattice
    n, nh = lat.n, lat.nh
    full = np.zeros((n, n), dtype=np.complex128)
    full[:, :nh] = field.coeffs
    rows = (-np.arange(n)) % n
    for j in range(nh, n):
        full[:, j] = np.conj(field.coeffs[rows, n - j])
    return full


def write_checkpoint(path, state: State, config_hash: str = ""):
    lat = state.omega.lattice
    digest = hashlib.sha256(config_hash.encode()).digest()
    full = _full_grid(state.omega)
    payload = np.empty((lat.n, lat.n, 2))
    payload[..., 0] = full.real
    payload[..., 1] = full.imag
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IdQQ", lat.n, state.t, state.step_index, state.traj))
        fh.write(digest)
        fh.write(payload.astype("<f8").tobytes())


def read_checkpoint(path, lattice: Lattice | None = None):
    """Return (State, config_hash_digest_hex)."""
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a vortlab checkpoint")
        n, t, step_index, traj = struct.unpack("<IdQQ", fh.read(28))
        digest = fh.read(32).hex()
        raw = np.frombuffer(fh.read(), dtype="<f8").reshape(n, n, 2)
    lat = lattice or Lattice(n=n)
    if lat.n != n:
        raise ValueError(f"checkpoint grid {n} does not match lattice {lat.n}")
    full = raw[..., 0] + 1j * raw[..., 1]
    coeffs = np.ascontiguousarray(full[:, : lat.nh])
    _symmetrize(lat, coeffs)
    fld = SpectralField(lat, coeffs)
    return State(t=t, omega=fld, step_index=step_index, traj=traj), digest
