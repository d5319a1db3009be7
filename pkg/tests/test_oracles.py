"""Analytic oracles: OU law, Stokes variances, convolution sum, damped floor."""

import numpy as np
import pytest
from dataclasses import replace

from vortlab.forcing import NoiseSpec, default_noise
from vortlab.integrator import SolverConfig, rescale_time_equivalence, run_ensemble
from vortlab.oracles import (
    OuOracle,
    convolution_nonlinearity,
    damped_velocity_floor,
    ou_stationary_law,
    stokes_mode_variance,
)
from vortlab.spectral import Lattice, SpectralField, nonlinear_term, random_smooth_field


def stokes_config(lat, nu, alpha=0.5, tau=0.0, gamma=0.0, **kw):
    spec = kw.pop("noise", default_noise(alpha=alpha))
    if spec.alpha != alpha:
        spec = replace(spec, alpha=alpha)
    return SolverConfig(lattice=lat, noise=spec, nu=nu, tau=tau, gamma=gamma,
                        dt=kw.pop("dt", 0.02), t_end=1.0, mode="stokes_linear", **kw)


class TestOuLaw:
    def test_law_values(self):
        lat = Lattice(n=8)
        assert ou_stationary_law(OuOracle.shear(lat, nu=0.3, j=1)) == (0.0, 0.5)
        assert ou_stationary_law(OuOracle.shear(lat, nu=2.0, j=2)) == (0.0, 0.125)

    def test_validation(self):
        lat = Lattice(n=8)
        oracle = OuOracle.shear(lat, nu=1.0)
        oracle.validate()
        broken = OuOracle(omega_E=oracle.omega_E, lam=2.0, nu=1.0)
        with pytest.raises(ValueError):
            broken.validate()

    def test_ray_is_invariant_and_variance_close(self):
        # short full-solver check; the acceptance suite runs the strict one
        lat = Lattice(n=8)
        spec = NoiseSpec(modes=((1, 0),), b=(1.0,), c=1.0, alpha=0.5, channels=("cos",))
        cfg = SolverConfig(lattice=lat, noise=spec, nu=1.0, dt=0.02, t_end=1.0,
                           mode="full_nonlinear", seed=17)
        oracle = OuOracle.shear(lat, nu=1.0)
        samples = []

        def cb(si, t, w):
            samples.append(2.0 * w[:, 1, 0].real.copy())

        w = run_ensemble(cfg, 16, np.zeros((lat.n, lat.nh)), 20000, callback=cb, stride=5)
        off_ray = w.copy()
        off_ray[:, 1, 0] = 0.0
        off_ray[:, -1, 0] = 0.0
        assert np.max(np.abs(off_ray)) <= 1e-12
        z = np.asarray(samples[1000:])
        assert z.var() == pytest.approx(0.5, rel=0.10)

    def test_projection(self):
        lat = Lattice(n=8)
        oracle = OuOracle.shear(lat, nu=1.0)
        f = SpectralField.from_modes(lat, {(1, 0): 0.5 * 3.0})
        assert oracle.projection(f) == pytest.approx(3.0)


class TestStokesVariance:
    def test_sqrt_nu_scaling_is_nu_independent(self):
        lat = Lattice(n=16)
        vals = []
        for nu in (1.0, 0.1, 0.01):
            sv = stokes_mode_variance(default_noise(), stokes_config(lat, nu), (1, 0))
            vals.append(sv.pair_omega)
            assert sv.pair_velocity == pytest.approx(sv.pair_omega)  # |k| = 1
        assert np.ptp(vals) < 1e-15
        assert vals[0] == pytest.approx(0.5)

    def test_alpha_one_vanishes_linearly(self):
        lat = Lattice(n=16)
        sv = stokes_mode_variance(default_noise(alpha=1.0),
                                  stokes_config(lat, 0.25, alpha=1.0), (1, 0))
        assert sv.pair_omega == pytest.approx(0.25 / 2.0)

    def test_damping_kills_the_limit(self):
        lat = Lattice(n=16)
        prev = np.inf
        for nu in (0.1, 0.01, 0.001):
            cfg = stokes_config(lat, nu, tau=2.0, gamma=0.5)
            sv = stokes_mode_variance(cfg.noise, cfg, (1, 0))
            expected = nu * 1.0 / (2.0 * (nu + 2.0))
            assert sv.pair_omega == pytest.approx(expected)
            assert sv.pair_omega < prev
            prev = sv.pair_omega

    def test_rejects_unforced_mode_and_wrong_mode(self):
        lat = Lattice(n=16)
        cfg = stokes_config(lat, 0.1)
        with pytest.raises(ValueError):
            stokes_mode_variance(cfg.noise, cfg, (5, 5))
        full = replace(cfg, mode="full_nonlinear")
        with pytest.raises(ValueError):
            stokes_mode_variance(full.noise, full, (1, 0))

    def test_invariant_under_time_rescaling(self):
        lat = Lattice(n=16)
        base = SolverConfig(lattice=lat, noise=default_noise(), nu=0.05, dt=0.01,
                            t_end=1.0, mode="full_nonlinear")
        rescaled = replace(rescale_time_equivalence(base), mode="stokes_linear")
        cfg = replace(base, mode="stokes_linear")
        for k in cfg.noise.modes:
            a = stokes_mode_variance(cfg.noise, cfg, k).pair_omega
            b = stokes_mode_variance(rescaled.noise, rescaled, k).pair_omega
            assert a == pytest.approx(b, rel=1e-12)


class TestConvolutionOracle:
    def test_shear_and_eigenfunction(self):
        lat = Lattice(n=8)
        shear = SpectralField.from_modes(lat, {(0, 1): 0.5})
        assert np.max(np.abs(convolution_nonlinearity(shear).coeffs)) <= 1e-15
        eig = SpectralField.from_modes(lat, {(1, 0): 0.5})
        assert np.max(np.abs(convolution_nonlinearity(eig).coeffs)) <= 1e-15

    def test_matches_fast_path(self):
        lat = Lattice(n=16)
        rng = np.random.default_rng(3)
        f = random_smooth_field(lat, rng.standard_normal, band=lat.dealias_cutoff).dealiased()
        diff = (nonlinear_term(f).coeffs - convolution_nonlinearity(f).coeffs)
        assert np.max(np.abs(diff * lat.dealias_mask)) <= 1e-12

    def test_rejects_large_grids(self):
        with pytest.raises(ValueError):
            convolution_nonlinearity(SpectralField.zeros(Lattice(n=32)))


class TestDampedFloor:
    def test_hand_value(self):
        # defaults: ||rho||^2 = 3.5, ||sigma||^2 = 6; tau = 1, gamma = 0.5, nu = 0.1
        spec = default_noise()
        floor = damped_velocity_floor(spec, nu=0.1, tau=1.0, gamma=0.5)
        expect = 3.5 / 2.0 - 0.1 ** (2.0 / 2.5) * 0.5 * 6.0
        assert floor == pytest.approx(expect)

    def test_requires_damping(self):
        with pytest.raises(ValueError):
            damped_velocity_floor(default_noise(), nu=0.1, tau=0.0, gamma=0.0)
