"""Acceptance suite: every quantitative criterion at its stated tolerance.

Desk scale: n = 64, dt = 2.5e-3 (halved at the two smallest viscosities),
total simulated time >= 2000 per sweep point split over 8 trajectories.
The full module is compute-heavy (roughly an hour on one laptop core); run
it with ``pytest -s tests/test_acceptance.py`` to see one verdict line per
criterion as it completes.

Seeds are frozen; every assertion uses the tolerance stated with the
criterion, never a recalibrated one.
"""

import math

import numpy as np
import pytest
from dataclasses import replace

from vortlab.diagnostics import energy
from vortlab.elliptic import (
    EllipticProblem,
    energy_bound_check,
    modulus_of_continuity,
    residual_norm,
    solve_stationary,
)
from vortlab.experiments import (
    SweepPlan,
    damped_scaling_sweep,
    inviscid_sweep,
    lp_ito_ledger,
    moser_regularization_experiment,
    reference_initial_field,
)
from vortlab.forcing import NoiseSpec, counter_normals, default_noise
from vortlab.integrator import SolverConfig, State, integrate, run_ensemble
from vortlab.measure import balance_check, estimate_stationary
from vortlab.oracles import (
    OuOracle,
    convolution_nonlinearity,
    ou_stationary_law,
    stokes_mode_variance,
)
from vortlab.spectral import (
    Lattice,
    nonlinear_term,
    random_divfree_velocity,
    random_smooth_field,
)

_VERDICTS = []


def record(name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    _VERDICTS.append(line)
    print("\n" + line)
    assert ok, line


def seeded_field(lat, seed, band=4, norm=1.0, tag=1):
    return random_smooth_field(lat, lambda m: counter_normals(seed, 0, m, tag=tag),
                               band=band, l2_norm=norm)


# ---------------------------------------------------------------------------
# 1. Nonlinearity oracle
# ---------------------------------------------------------------------------

def test_nonlinearity_oracle():
    lat = Lattice(n=8)
    worst = 0.0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        f = random_smooth_field(lat, rng.standard_normal,
                                band=lat.dealias_cutoff, l2_norm=1.5).dealiased()
        fast = nonlinear_term(f).coeffs
        slow = convolution_nonlinearity(f).coeffs
        worst = max(worst, float(np.max(np.abs((fast - slow) * lat.dealias_mask))))
    record("nonlinearity oracle (n=8, 5 random dealiased fields)",
           worst <= 1e-12, f"max coefficient error {worst:.2e} <= 1e-12")


# ---------------------------------------------------------------------------
# 2. Euler conservation
# ---------------------------------------------------------------------------

def test_euler_conservation():
    lat = Lattice(n=64)
    zero_noise = NoiseSpec(modes=((1, 0),), b=(1.0,), c=0.0, alpha=0.0)
    cfg = SolverConfig(lattice=lat, noise=zero_noise, nu=0.0, dt=1e-3, t_end=10.0,
                       mode="deterministic_euler", seed=5)
    f0 = seeded_field(lat, 5)
    out = integrate(State(t=0.0, omega=f0.copy()), cfg)
    de = abs(energy(out.omega) / energy(f0) - 1.0)
    di = abs(out.omega.l2_sq() / f0.l2_sq() - 1.0)
    record("Euler conservation (n=64, t=10, dt=1e-3)",
           de <= 1e-6 and di <= 1e-6,
           f"relative drift: energy {de:.2e}, enstrophy {di:.2e} <= 1e-6")


# ---------------------------------------------------------------------------
# 3. OU stationary law
# ---------------------------------------------------------------------------

def test_ou_stationary_law():
    lat = Lattice(n=8)
    details = []
    ok = True
    for nu, nsteps in ((1.0, 40_000), (0.1, 220_000)):
        spec = NoiseSpec(modes=((1, 0),), b=(1.0,), c=1.0, alpha=0.5, channels=("cos",))
        cfg = SolverConfig(lattice=lat, noise=spec, nu=nu, dt=0.02, t_end=1.0,
                           mode="full_nonlinear", seed=42)
        oracle = OuOracle.shear(lat, nu=nu)
        _, target = ou_stationary_law(oracle)
        samples = []
        off_ray_max = [0.0]
        ray_mask = np.ones((lat.n, lat.nh), dtype=bool)
        ray_mask[1, 0] = False
        ray_mask[(-1) % lat.n, 0] = False

        def cb(si, t, w):
            samples.append(2.0 * w[:, 1, 0].real.copy())
            off_ray_max[0] = max(off_ray_max[0], float(np.max(np.abs(w * ray_mask))))

        run_ensemble(cfg, 16, np.zeros((lat.n, lat.nh)), nsteps, callback=cb, stride=1)
        z = np.asarray(samples[nsteps // 5 :])
        var = float(z.var())
        rel = abs(var / target - 1.0)
        ok = ok and rel <= 0.05 and off_ray_max[0] <= 1e-12
        details.append(f"nu={nu:g}: var={var:.4f} (target {target}) rel={rel:.2%}, "
                       f"ray residual {off_ray_max[0]:.1e}")
    record("OU stationary law (sigma = cos x1, variance 1/(2 lambda))",
           ok, "; ".join(details))


# ---------------------------------------------------------------------------
# 4. Stokes spectrum
# ---------------------------------------------------------------------------

def test_stokes_spectrum():
    lat = Lattice(n=32)
    spec = default_noise()
    slots = [((a % lat.n), b) for a, b in spec.modes]
    measured = {}
    errs = {}
    for nu, horizon, burn in ((1.0, 60.0, 5.0), (0.1, 400.0, 30.0), (0.01, 1500.0, 150.0)):
        cfg = SolverConfig(lattice=lat, noise=spec, nu=nu, dt=0.05, t_end=1.0,
                           mode="stokes_linear", seed=11)
        nsteps = int(round(horizon / cfg.dt))
        burn_steps = int(round(burn / cfg.dt))
        acc = []

        def cb(si, t, w):
            if si > burn_steps:
                acc.append(2.0 * np.abs(w[:, [r for r, c in slots], [c for r, c in slots]]) ** 2)

        run_ensemble(cfg, 256, np.zeros((lat.n, lat.nh)), nsteps, callback=cb, stride=4)
        series = np.asarray(acc)  # (T, 256, m)
        rep_means = series.mean(axis=0)  # (256, m)
        measured[nu] = rep_means.mean(axis=0)
        errs[nu] = rep_means.std(axis=0, ddof=1) / math.sqrt(rep_means.shape[0])

    ok = True
    worst = 0.0
    for nu in measured:
        cfg = SolverConfig(lattice=lat, noise=spec, nu=nu, dt=0.05, t_end=1.0,
                           mode="stokes_linear", seed=11)
        for i, k in enumerate(spec.modes):
            target = stokes_mode_variance(spec, cfg, k).pair_omega
            rel = abs(measured[nu][i] / target - 1.0)
            worst = max(worst, rel)
            ok = ok and rel <= 0.05
    spread_ok = True
    for i, k in enumerate(spec.modes):
        vals = np.array([measured[nu][i] for nu in measured])
        ses = np.array([errs[nu][i] for nu in measured])
        allowed = 0.02 * vals.mean() + 3.0 * math.sqrt(float(np.sum(ses**2)))
        spread_ok = spread_ok and (vals.max() - vals.min()) <= allowed
    record("Stokes spectrum (per-mode variance, nu in {1, 0.1, 0.01})",
           ok and spread_ok,
           f"worst per-mode error {worst:.2%} <= 5%; "
           f"alpha=1/2 nu-variation within 2% + 3 MC sigma: {spread_ok}")


# ---------------------------------------------------------------------------
# 5 & 6. Enstrophy and L2 balances at nu = 0.05, confirmed at dt and dt/2
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def balance_runs():
    lat = Lattice(n=64)
    runs = {}
    for dt, total in ((2.5e-3, 2000.0), (1.25e-3, 1000.0)):
        cfg = SolverConfig(lattice=lat, noise=default_noise(), nu=0.05, dt=dt,
                           t_end=1.0, seed=42)
        est = estimate_stationary(cfg, ["l2_sq", "h1_sq"], burn_in=100.0, total=total,
                                  replicas=8, init=reference_initial_field(cfg))
        runs[dt] = balance_check(cfg, est)
    return runs


def test_enstrophy_balance(balance_runs):
    details = []
    ok = True
    for dt, rep in balance_runs.items():
        r = rep.residual("enstrophy_balance")
        ok = ok and abs(r) <= 0.10
        details.append(f"dt={dt:g}: {r:+.2%}")
    record("enstrophy balance E||grad w||^2 = (c^2/2) sum g^2 (nu=0.05)",
           ok, "; ".join(details) + " (tolerance 10%)")


def test_l2_balance(balance_runs):
    details = []
    ok = True
    for dt, rep in balance_runs.items():
        r = rep.residual("l2_balance")
        ok = ok and abs(r) <= 0.10
        details.append(f"dt={dt:g}: {r:+.2%}")
    record("L2 balance E||w||^2 = (1/2) sum (g/|k|)^2 (nu=0.05)",
           ok, "; ".join(details) + " (tolerance 10%)")


# ---------------------------------------------------------------------------
# 7. Uniform L-infinity moment and exponential moment across nu
# ---------------------------------------------------------------------------

def test_uniform_linf_moment():
    lat = Lattice(n=64)
    base = SolverConfig(lattice=lat, noise=default_noise(), nu=0.1, dt=2.5e-3,
                        t_end=1.0, seed=7)
    values = (0.1, 0.05, 0.02, 0.01)
    plan = SweepPlan("nu", values, base, burn_in=100.0, total=2000.0, replicas=8,
                     dt_map={v: 1.25e-3 for v in values if v < 0.021})
    res = inviscid_sweep(plan)
    ratio = res.summary["linf_max_min_ratio"]
    eratio = res.summary["exp_moment_max_min_ratio"]
    finite = all(math.isfinite(p.extras["E_exp_moment"]) for p in res.points)
    linfs = {p.coords["nu"]: p.extras["E_linf"] for p in res.points}
    flagged = [f for p in res.points for f in p.flags]
    record("uniform Linf moment (nu in {0.1, 0.05, 0.02, 0.01})",
           ratio <= 2.0 and eratio <= 2.0 and finite,
           f"E||w||_inf = {[round(linfs[v], 3) for v in values]}, max/min {ratio:.3f} <= 2; "
           f"exp moment finite with ratio {eratio:.3f} <= 2; flags={flagged or 'none'}")


# ---------------------------------------------------------------------------
# 8. Damped-model scaling trichotomy
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def damped_result():
    lat = Lattice(n=32)
    base = SolverConfig(lattice=lat, noise=default_noise(), nu=0.1, tau=1.0,
                        gamma=0.5, dt=2.5e-3, t_end=1.0, seed=19)
    values = (0.1, 0.0316, 0.01, 0.00316, 0.001)
    plan = SweepPlan("nu", values, base, burn_in=50.0, total=600.0, replicas=4,
                     dt_map={v: 1.25e-3 for v in values if v < 0.004})
    return damped_scaling_sweep(plan, alphas=(0.5, 0.25, 0.0, -0.25))


def test_damped_trichotomy_slopes(damped_result):
    details = []
    ok = True
    for alpha in (0.5, 0.25):
        fit = damped_result.fits[f"alpha={alpha:g}"]
        need = 2 * alpha - 0.2
        ok = ok and fit is not None and fit["slope"] >= need
        details.append(f"alpha={alpha:g}: slope {fit['slope']:.3f} >= {need:.2f}")
    record("damped trichotomy: decay slopes for alpha > 0", ok, "; ".join(details))


def test_damped_trichotomy_alpha_zero(damped_result):
    s = damped_result.summary["alpha=0"]
    ok = s["max_min_ratio"] <= 2.0 and s["above_floor"]
    record("damped trichotomy: alpha = 0 bounded and nontrivial", ok,
           f"max/min {s['max_min_ratio']:.3f} <= 2, "
           f"mean {s['mean_at_largest_nu']:.3f} >= floor {s['floor_at_largest_nu']:.3f}")


def test_damped_trichotomy_negative_alpha(damped_result):
    s = damped_result.summary["alpha=-0.25"]
    if "growth_factor" in s:
        ok = s["verdict"] == "diverging" and s["monotone"]
        detail = f"growth {s['growth_factor']:.2f}x >= 4 across the decade, monotone"
    else:
        ok = s["verdict"] == "diverging"
        detail = "guard trip reported as diverging"
    record("damped trichotomy: alpha = -0.25 grows", ok, detail)


def test_damped_balance_residuals(damped_result):
    worst = 0.0
    count = 0
    for p in damped_result.points:
        if p.diverged:
            continue
        count += 1
        worst = max(worst, abs(p.extras["res_damped_vorticity"]),
                    abs(p.extras["res_damped_velocity"]))
    record("damped balance identities at every converged point",
           worst <= 0.10, f"worst residual {worst:.2%} <= 10% over {count} points")


# ---------------------------------------------------------------------------
# 9. Moser regularization: drift-independent constant
# ---------------------------------------------------------------------------

def test_moser_regularization():
    lat = Lattice(n=32)
    base = SolverConfig(lattice=lat, noise=default_noise(alpha=0.0), nu=1.0,
                        dt=2.5e-3, t_end=0.25, seed=5)
    res = moser_regularization_experiment(base, amplitudes=(0.0, 1.0, 1e2, 1e4),
                                          T=0.125, replicas=16)
    ratios = {p.coords["amplitude"]: p.extras["ratio"] for p in res.points}
    consistency = max(p.extras["l4l2_consistency"] for p in res.points)
    ok = res.summary["ratio_max_min"] <= 2.0 and consistency <= 1e-8
    record("Moser regularization drift-independence (T=1/8, A up to 1e4)", ok,
           f"r(A) = {[f'{a:g}: {r:.4f}' for a, r in ratios.items()]}, "
           f"max/min {res.summary['ratio_max_min']:.3f} <= 2; "
           f"L4L2 bookkeeping agreement {consistency:.1e} <= 1e-8")


# ---------------------------------------------------------------------------
# 10. L^p Ito ledger dt-refinement
# ---------------------------------------------------------------------------

def test_lp_ito_ledger():
    cfg = SolverConfig(lattice=Lattice(n=32), noise=default_noise(), nu=0.5,
                       dt=0.016, t_end=1.0, mode="full_nonlinear", seed=3)
    res = lp_ito_ledger(cfg, p_values=(2, 4), horizon=2.0, replicas=768)
    details = []
    ok = True
    for p in (2, 4):
        ratio = res.summary[f"p={p}"]["ratio"]
        ok = ok and 0.35 <= ratio <= 0.65
        details.append(f"p={p}: residual ratio {ratio:.3f}")
    record("L^p Ito ledger halves with dt (p in {2,4}, +-30%)", ok,
           "; ".join(details) + " in [0.35, 0.65]")


# ---------------------------------------------------------------------------
# 11 & 12. Elliptic H1 bound and modulus of continuity
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def elliptic_results():
    lat = Lattice(n=128)
    b = random_divfree_velocity(lat, lambda m: counter_normals(77, 0, m, tag=2),
                                band=3, sup_norm=1.0)
    f = random_smooth_field(lat, lambda m: counter_normals(77, 1, m, tag=2),
                            band=4, l2_norm=1.0)
    tol = 1e-10
    radii = [2.0**-k for k in range(3, 8)]
    out = {}
    for A in (0.0, 10.0, 1e2, 1e3, 1e4):
        problem = EllipticProblem(b=b, f=f, amplitude=A)
        v = solve_stationary(problem, tol=tol)
        rep = modulus_of_continuity(v, radii, problem=problem)
        out[A] = {
            "residual": residual_norm(problem, v),
            "h1_ratio": energy_bound_check(problem, v),
            "c_fit": rep.c_fit,
        }
    return out


def test_elliptic_h1_bound(elliptic_results):
    tol = 1e-10
    ok = all(r["h1_ratio"] <= 1.0 + 10 * tol and r["residual"] <= tol
             for r in elliptic_results.values())
    detail = ", ".join(f"A={a:g}: ratio {r['h1_ratio']:.4f} (res {r['residual']:.1e})"
                       for a, r in elliptic_results.items())
    record("elliptic H1 bound ||grad v||^2 <= ||f||^2, drift-independent", ok, detail)


def test_elliptic_modulus(elliptic_results):
    c0 = elliptic_results[0.0]["c_fit"]
    worst = max(r["c_fit"] / c0 for r in elliptic_results.values())
    cs = [f"{a:g}: {r['c_fit']:.4f}" for a, r in elliptic_results.items()]
    record("elliptic log-modulus constant C(A)/C(0) <= 2 (r in 2^-3..2^-7)",
           worst <= 2.0, f"C = {cs}, max ratio {worst:.3f}")


# ---------------------------------------------------------------------------
# 13. Reproducibility: byte-identical payloads under a fixed seed
# ---------------------------------------------------------------------------

def test_reproducibility_byte_identical(tmp_path):
    import io

    cfg = SolverConfig(lattice=Lattice(n=16), noise=default_noise(), nu=0.2,
                       dt=0.02, t_end=1.0, seed=9)
    payloads = []
    for _ in range(2):
        plan = SweepPlan("nu", (0.4, 0.2), cfg, burn_in=5.0, total=160.0, replicas=4)
        res = inviscid_sweep(plan)
        buf = io.StringIO()
        res.write_csv(buf)
        led = lp_ito_ledger(replace(cfg, dt=0.05), p_values=(2,), horizon=0.5,
                            replicas=32)
        payloads.append((buf.getvalue(), res.to_json(), led.to_json()))
    ok = payloads[0] == payloads[1]
    record("reproducibility: identical seed gives byte-identical payloads", ok,
           f"CSV+JSON payloads match across reruns: {ok}")


def test_zz_verdict_summary():
    print("\n" + "=" * 78)
    print("acceptance verdicts")
    print("=" * 78)
    for line in _VERDICTS:
        print(line)
    assert _VERDICTS, "no criteria were recorded"
