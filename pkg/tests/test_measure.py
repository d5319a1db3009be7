"""Time-average estimator, batch means, balance identities, exp moments."""

import math

import pytest

from vortlab.forcing import NoiseSpec, default_noise
from vortlab.integrator import SolverConfig
from vortlab.measure import (
    _stat_from_batches,
    balance_check,
    default_burn_in,
    estimate_stationary,
    exp_moment_estimate,
    label_sobolev,
)
from vortlab.oracles import stokes_mode_variance
from vortlab.spectral import Lattice


def stokes_cfg(nu=0.1, seed=7, **kw):
    kw.setdefault("noise", default_noise())
    return SolverConfig(lattice=Lattice(n=16), nu=nu, dt=0.02, t_end=1.0,
                        mode="stokes_linear", seed=seed, **kw)


class TestEstimator:
    def test_constant_functional(self):
        est = estimate_stationary(stokes_cfg(), ["one"], burn_in=2.0, total=80.0, replicas=4)
        assert est.mean("one") == 1.0
        assert est.stderr("one") == 0.0

    def test_matches_stokes_oracle(self):
        cfg = stokes_cfg(nu=0.25)
        est = estimate_stationary(cfg, ["l2_sq", "h1_sq"], burn_in=20.0,
                                  total=3200.0, replicas=8)
        expected = sum(
            stokes_mode_variance(cfg.noise, cfg, k).pair_omega for k in cfg.noise.modes
        )
        st = est.stats["l2_sq"]
        assert abs(st.mean - expected) <= 3.0 * st.stderr
        assert st.stationary

    def test_determinism(self):
        cfg = stokes_cfg()
        kw = dict(burn_in=5.0, total=200.0, replicas=4,
                  histogram_modes=((1, 0),))
        a = estimate_stationary(cfg, ["l2_sq", "linf"], **kw)
        b = estimate_stationary(cfg, ["l2_sq", "linf"], **kw)
        assert a.to_json() == b.to_json()

    def test_batches_and_validation(self):
        cfg = stokes_cfg()
        est = estimate_stationary(cfg, ["l2_sq"], burn_in=5.0, total=100.0, replicas=4)
        assert est.stats["l2_sq"].n_batches >= 8
        with pytest.raises(ValueError):
            estimate_stationary(cfg, ["l2_sq"], burn_in=50.0, total=100.0, replicas=4)

    def test_doubling_total_shrinks_stderr(self):
        cfg = stokes_cfg(seed=3)
        short = estimate_stationary(cfg, ["l2_sq"], burn_in=10.0, total=400.0, replicas=4)
        long = estimate_stationary(cfg, ["l2_sq"], burn_in=10.0, total=800.0, replicas=4)
        ratio = long.stderr("l2_sq") ** 2 / short.stderr("l2_sq") ** 2
        assert ratio < 0.9  # about 1/2, deterministic for this seed

    def test_merge_pools_means(self):
        a = _stat_from_batches([1.0, 2.0, 3.0, 4.0] * 2)
        b = _stat_from_batches([10.0] * 8)
        merged = a.merged(b)
        assert merged.n_batches == 16
        assert merged.mean == pytest.approx((a.mean * 8 + b.mean * 8) / 16)

    def test_stderr_flagging(self):
        noisy = _stat_from_batches([1.0, -1.0, 2.0, -2.0, 1.5, -1.5, 0.5, -0.5])
        assert noisy.flagged_stderr
        clean = _stat_from_batches([1.0, 1.01, 0.99, 1.0, 1.02, 0.98, 1.0, 1.0])
        assert not clean.flagged_stderr

    def test_histograms_deterministic_counts(self):
        cfg = stokes_cfg()
        est = estimate_stationary(cfg, ["l2_sq"], burn_in=5.0, total=200.0, replicas=4,
                                  histogram_modes=((1, 0), (0, 1)))
        assert set(est.histograms) == {"re_w(1,0)", "im_w(1,0)", "re_w(0,1)", "im_w(0,1)"}
        edges, counts = est.histograms["re_w(1,0)"]
        assert len(edges) == len(counts) + 1
        assert counts.sum() > 0

    def test_default_burn_in(self):
        cfg = stokes_cfg(nu=0.002)  # slowest forced mode mu = 0.002
        assert default_burn_in(cfg) == pytest.approx(10.0 / 0.002)
        cfg = stokes_cfg(nu=1.0)
        assert default_burn_in(cfg) == 100.0


class TestBalance:
    def test_stokes_identities_within_error(self):
        cfg = stokes_cfg(nu=0.2, seed=5)
        est = estimate_stationary(cfg, ["l2_sq", "h1_sq"], burn_in=20.0,
                                  total=3200.0, replicas=8)
        rep = balance_check(cfg, est)
        assert rep.entries["enstrophy_balance"]["rhs_exact"] == pytest.approx(3.0)
        assert rep.entries["l2_balance"]["rhs_exact"] == pytest.approx(1.75)
        for entry in rep.entries.values():
            assert abs(entry["lhs_estimate"] - entry["rhs_exact"]) <= 3.0 * entry["stderr"]

    def test_zero_noise_residual_zero(self):
        spec = NoiseSpec(modes=((1, 0),), b=(1.0,), c=0.0, alpha=0.5)
        cfg = stokes_cfg(noise=spec)
        est = estimate_stationary(cfg, ["l2_sq", "h1_sq"], burn_in=1.0, total=40.0, replicas=4)
        rep = balance_check(cfg, est)
        for entry in rep.entries.values():
            assert entry["rhs_exact"] == 0.0
            assert entry["residual"] == 0.0

    def test_damped_identities(self):
        cfg = stokes_cfg(nu=0.05, tau=1.0, gamma=0.5, seed=11)
        labels = ["l2_sq", "h1_sq", label_sobolev(-0.25), label_sobolev(-1.25)]
        est = estimate_stationary(cfg, labels, burn_in=10.0, total=1600.0, replicas=8)
        rep = balance_check(cfg, est)
        assert set(rep.entries) == {"damped_vorticity_balance", "damped_velocity_balance"}
        amp_sq = cfg.noise.c**2 * cfg.nu  # alpha = 1/2
        assert rep.entries["damped_vorticity_balance"]["rhs_exact"] == pytest.approx(amp_sq * 3.0)
        for entry in rep.entries.values():
            assert abs(entry["residual"]) <= 0.15

    def test_missing_functional_raises(self):
        cfg = stokes_cfg()
        est = estimate_stationary(cfg, ["l2_sq"], burn_in=2.0, total=50.0, replicas=2)
        with pytest.raises(ValueError, match="h1_sq"):
            balance_check(cfg, est)


class TestExpMoment:
    def test_small_delta_tends_to_one(self):
        cfg = stokes_cfg(seed=2)
        tiny = exp_moment_estimate(cfg, delta=1e-8, burn_in=5.0, total=100.0, replicas=4)
        assert tiny.mean == pytest.approx(1.0, abs=1e-6)

    def test_zero_noise_exactly_one(self):
        spec = NoiseSpec(modes=((1, 0),), b=(1.0,), c=0.0, alpha=0.5)
        cfg = stokes_cfg(noise=spec)
        stat = exp_moment_estimate(cfg, delta=0.5, burn_in=1.0, total=40.0, replicas=2)
        assert stat.mean == 1.0

    def test_overflow_flagged(self):
        cfg = stokes_cfg(seed=6)
        stat = exp_moment_estimate(cfg, delta=1e6, burn_in=5.0, total=100.0, replicas=4)
        assert stat.flagged_stderr or not math.isfinite(stat.mean)

    def test_rejects_nonpositive_delta(self):
        with pytest.raises(ValueError):
            exp_moment_estimate(stokes_cfg(), delta=0.0, burn_in=1.0, total=10.0)
