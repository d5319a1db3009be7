"""Command-line entry points: run, sweep, oracle, elliptic, balance, report.

Every command resolves its configuration (file plus CLI overrides), writes
the resolved config and a metadata file into the run directory, and emits
deterministic CSV/JSON payloads stamped with the config hash.  Timestamps
live only in metadata.json so identical (config, seed) runs are
byte-identical.  Exit codes: 0 success, 1 validation error, 2 numerical
failure (partial outputs are kept).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import replace


from . import __version__
from .config import ConfigError, RunConfig, load_config
from .diagnostics import DiagnosticsRecord, DiagnosticsStream
from .elliptic import (
    EllipticProblem,
    EllipticSolveError,
    modulus_of_continuity,
    residual_norm,
    solve_stationary,
)
from .experiments import (
    SweepPlan,
    damped_scaling_sweep,
    inviscid_sweep,
    lp_ito_ledger,
    moser_regularization_experiment,
    reference_initial_field,
)
from .forcing import counter_normals, TAG_FIELD
from .integrator import (
    BlowUpError,
    Observer,
    State,
    integrate,
    read_checkpoint,
    write_checkpoint,
)
from .measure import balance_check, estimate_stationary
from .oracles import OuOracle, ou_stationary_law, stokes_mode_variance
from .spectral import random_divfree_velocity, random_smooth_field


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vortlab", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("run", "integrate one trajectory, streaming diagnostics"),
        ("sweep", "run the sweep described by [sweep] (inviscid/damped/moser/lp_ledger)"),
        ("oracle", "compare simulated statistics against analytic oracles"),
        ("elliptic", "stationary drift-diffusion amplitude sweep"),
        ("balance", "stationary estimate plus balance-identity report"),
        ("report", "summarize a completed run directory"),
    ]:
        sp = sub.add_parser(name, help=helptext)
        if name == "report":
            sp.add_argument("run_dir", help="directory with completed outputs")
        else:
            sp.add_argument("--config", default=None, help="configuration file")
            sp.add_argument("--seed", type=int, default=None, help="override [solver] seed")
            sp.add_argument("--out", default=None, help="run directory (default: <dir>/<stamp>)")
            sp.add_argument("--resume", default=None, help="checkpoint to continue from")
            sp.add_argument("--threads", type=int, default=1, help="worker threads for sweep points")
    return p


def _prepare_dir(args, cfg: RunConfig) -> str:
    if args.out:
        out = args.out
    else:
        root = os.environ.get("VORTLAB_OUT_ROOT", cfg.get("output", "dir"))
        stamp = time.strftime("%Y%m%d-%H%M%S", time.gmtime())
        out = os.path.join(root, f"{stamp}-{cfg.config_hash()[:8]}")
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "resolved.cfg"), "w") as fh:
        fh.write(cfg.resolved_text())
    meta = {
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "argv": sys.argv[1:],
        "version": __version__,
        "config_hash": cfg.config_hash(),
    }
    with open(os.path.join(out, "metadata.json"), "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
    return out


def _load(args) -> RunConfig:
    overrides = {}
    if args.seed is not None:
        overrides[("solver", "seed")] = str(args.seed)
    return load_config(args.config, overrides)


def _cmd_run(args) -> int:
    cfg = _load(args)
    out = _prepare_dir(args, cfg)
    solver = cfg.solver()
    if args.resume:
        state, _ = read_checkpoint(args.resume, solver.lattice)
    else:
        state = State(t=0.0, omega=reference_initial_field(solver))
    stride = cfg.get("estimate", "observer_stride")
    path = os.path.join(out, "diagnostics.csv")
    code = 0
    with open(path, "w") as fh:
        fh.write(f"# config_hash={cfg.config_hash()}\n")
        stream = DiagnosticsStream(fh, p_values=(2, 4))
        obs = Observer(lambda t, w: stream.append(DiagnosticsRecord.measure(t, w, p_values=(2, 4))),
                       stride=stride)
        try:
            state = integrate(state, solver, observers=[obs])
        except BlowUpError as exc:
            print(f"numerical failure: {exc}", file=sys.stderr)
            code = 2
    write_checkpoint(os.path.join(out, "state.ckpt"), state, cfg.config_hash())
    print(f"run: t = {state.t:g}, outputs in {out}")
    return code


def _cmd_balance(args) -> int:
    cfg = _load(args)
    out = _prepare_dir(args, cfg)
    solver = cfg.solver()
    est_args = cfg.estimate_args(solver)
    labels = ["l2_sq", "h1_sq", "linf", "exp_moment"]
    if solver.tau > 0:
        from .measure import label_sobolev

        labels += [label_sobolev(-solver.gamma / 2), label_sobolev(-(solver.gamma + 2) / 2)]
    try:
        est = estimate_stationary(
            solver, labels, est_args["burn_in"], est_args["total"],
            replicas=est_args["replicas"], init=reference_initial_field(solver),
            sample_stride=est_args["sample_stride"], delta=est_args["delta"],
            histogram_modes=solver.noise.modes,
        )
    except BlowUpError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    est.config_hash = cfg.config_hash()
    report = balance_check(solver, est)
    with open(os.path.join(out, "estimate.json"), "w") as fh:
        fh.write(est.to_json())
    with open(os.path.join(out, "balance.json"), "w") as fh:
        fh.write(report.to_json())
    for label, entry in report.entries.items():
        print(f"{label}: lhs={entry['lhs_estimate']:.6g} rhs={entry['rhs_exact']:.6g} "
              f"residual={entry['residual']:+.3%}")
    return 0


def _cmd_oracle(args) -> int:
    cfg = _load(args)
    out = _prepare_dir(args, cfg)
    solver = cfg.solver()
    doc = {"config_hash": cfg.config_hash(), "ou": {}, "stokes": {}}

    # Eigenfunction forcing: compare the simulated eigen-coefficient variance
    # with the 1/(2 lambda) law at the configured viscosity.
    from .forcing import NoiseSpec

    lat = solver.lattice
    est_args = cfg.estimate_args(solver)
    ou_noise = NoiseSpec(modes=((1, 0),), b=(1.0,), c=solver.noise.c,
                         alpha=0.5, channels=("cos",))
    ou_cfg = replace(solver, noise=ou_noise, mode="full_nonlinear",
                     tau=0.0, diss_exponent=2.0)
    oracle = OuOracle.shear(lat, nu=solver.nu)
    mean, var = ou_stationary_law(oracle)
    est = estimate_stationary(ou_cfg, ["l2_sq"], est_args["burn_in"], est_args["total"],
                              replicas=2 * est_args["replicas"], sample_stride=5)
    # On the eigen-ray ||w||^2 = z^2 ||w_E||^2 with ||w_E||^2 = 1/2.
    sim_var = est.mean("l2_sq") / oracle.omega_E.l2_sq()
    doc["ou"] = {
        "nu": solver.nu,
        "lambda": oracle.lam,
        "analytic_variance": var,
        "simulated_variance": sim_var,
        "rel_error": sim_var / var - 1.0,
    }

    stokes_cfg = replace(solver, mode="stokes_linear")
    est2 = estimate_stationary(stokes_cfg, ["l2_sq", "h1_sq"], est_args["burn_in"],
                               est_args["total"], replicas=8 * est_args["replicas"],
                               sample_stride=5, histogram_modes=solver.noise.modes)
    for k in solver.noise.modes:
        sv = stokes_mode_variance(solver.noise, stokes_cfg, k)
        doc["stokes"][f"{k[0]},{k[1]}"] = {"pair_omega": sv.pair_omega,
                                           "pair_velocity": sv.pair_velocity}
    doc["stokes"]["balance"] = {
        label: entry for label, entry in balance_check(stokes_cfg, est2).entries.items()
    }
    with open(os.path.join(out, "oracle.json"), "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
    print(f"ou: simulated {sim_var:.4f} vs analytic {var:.4f} "
          f"({100 * doc['ou']['rel_error']:+.2f}%)")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    out = _prepare_dir(args, cfg)
    solver = cfg.solver()
    est_args = cfg.estimate_args(solver)
    kind = cfg.get("sweep", "kind")
    values = cfg.get("sweep", "values")
    replicas = cfg.get("sweep", "replicas")
    if replicas < 0:
        replicas = est_args["replicas"]
    dt_map = {v: solver.dt / 2 for v in values if v < cfg.get("sweep", "dt_half_below")}

    try:
        if kind == "inviscid":
            plan = SweepPlan("nu", values, solver, est_args["burn_in"], est_args["total"],
                             replicas=replicas, dt_map=dt_map, threads=args.threads)
            result = inviscid_sweep(plan, delta=est_args["delta"])
        elif kind == "damped":
            plan = SweepPlan("nu", values, solver, est_args["burn_in"], est_args["total"],
                             replicas=replicas, dt_map=dt_map, threads=args.threads)
            result = damped_scaling_sweep(plan, cfg.get("sweep", "alphas"))
        elif kind == "moser":
            result = moser_regularization_experiment(
                solver, cfg.get("moser", "amplitudes"), T=cfg.get("moser", "window"),
                replicas=cfg.get("moser", "replicas"))
        elif kind == "lp_ledger":
            result = lp_ito_ledger(solver, p_values=cfg.get("sweep", "p_values"),
                                   horizon=cfg.get("sweep", "horizon"),
                                   replicas=replicas * 32)
        else:
            print(f"unknown sweep kind {kind!r}", file=sys.stderr)
            return 1
    except (BlowUpError, EllipticSolveError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    result.config_hash = cfg.config_hash()
    with open(os.path.join(out, "results.csv"), "w") as fh:
        result.write_csv(fh)
    with open(os.path.join(out, "results.json"), "w") as fh:
        fh.write(result.to_json())
    print(json.dumps(result.summary, sort_keys=True, default=str))
    print(f"sweep ({kind}): {len(result.points)} points, outputs in {out}")
    return 0


def _cmd_elliptic(args) -> int:
    cfg = _load(args)
    out = _prepare_dir(args, cfg)
    from .spectral import Lattice

    lat = Lattice(n=cfg.get("elliptic", "n"))
    seed = cfg.get("solver", "seed")
    b = random_divfree_velocity(lat, lambda m: counter_normals(seed, 0, m, tag=TAG_FIELD),
                                band=3, sup_norm=1.0)
    f = random_smooth_field(lat, lambda m: counter_normals(seed, 1, m, tag=TAG_FIELD),
                            band=4, l2_norm=1.0)
    tol = cfg.get("elliptic", "tol")
    radii = cfg.get("elliptic", "radii")
    from .spectral import linf_norm

    f_sup = linf_norm(f)
    rows = []
    doc = {"config_hash": cfg.config_hash(), "tol": tol, "f_sup_norm": f_sup, "points": []}
    code = 0
    for A in cfg.get("elliptic", "amplitudes"):
        problem = EllipticProblem(b=b, f=f, amplitude=A)
        try:
            v = solve_stationary(problem, tol=tol)
        except EllipticSolveError as exc:
            print(f"A={A:g}: {exc}", file=sys.stderr)
            code = 2
            continue
        rep = modulus_of_continuity(v, radii, problem=problem)
        res = residual_norm(problem, v)
        rows.append((A, res, rep))
        # No discrete maximum principle holds exactly; a sup norm far above
        # the forcing scale is flagged for inspection, not failed.
        max_principle_flag = rep.sup_norm > 10.0 * f_sup
        doc["points"].append({
            "amplitude": A, "residual": res, "h1_ratio": rep.h1_ratio,
            "c_fit": rep.c_fit, "sup_norm": rep.sup_norm,
            "max_principle_flag": max_principle_flag,
            "radii": rep.radii, "osc": rep.osc,
        })
        print(f"A={A:g}: residual={res:.2e} h1_ratio={rep.h1_ratio:.4f} C={rep.c_fit:.4f}"
              + (" [FLAGGED sup norm]" if max_principle_flag else ""))
    with open(os.path.join(out, "elliptic.json"), "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
    with open(os.path.join(out, "elliptic.csv"), "w") as fh:
        fh.write(f"# kind=elliptic config_hash={cfg.config_hash()}\n")
        cols = ["amplitude", "residual", "h1_ratio", "c_fit"] + [f"osc_{r:g}" for r in radii]
        fh.write(",".join(cols) + "\n")
        for A, res, rep in rows:
            cells = [f"{A:.17g}", f"{res:.17g}", f"{rep.h1_ratio:.17g}", f"{rep.c_fit:.17g}"]
            cells += [f"{o:.17g}" for o in rep.osc]
            fh.write(",".join(cells) + "\n")
    return code


def _check(lines, name, ok, detail):
    status = "PASS" if ok else "FAIL"
    lines.append(f"[{status}] {name}: {detail}")


def _cmd_report(args) -> int:
    run_dir = args.run_dir
    lines = [f"vortlab report for {run_dir}"]
    consolidated = []

    hash_on_disk = None
    cfg_path = os.path.join(run_dir, "resolved.cfg")
    if os.path.exists(cfg_path):
        import hashlib

        with open(cfg_path, "rb") as fh:
            hash_on_disk = hashlib.sha256(fh.read()).hexdigest()

    def integrity(embedded):
        if hash_on_disk is None or embedded in ("", None):
            return
        if embedded != hash_on_disk:
            lines.append(f"[FLAGGED] integrity: embedded config hash {embedded[:12]} "
                         f"does not match resolved.cfg {hash_on_disk[:12]}")

    found = 0
    res_path = os.path.join(run_dir, "results.json")
    if os.path.exists(res_path):
        found += 1
        with open(res_path) as fh:
            doc = json.load(fh)
        integrity(doc.get("config_hash"))
        kind = doc.get("kind")
        summary = doc.get("summary", {})
        if kind == "inviscid":
            ratio = summary.get("linf_max_min_ratio", math.inf)
            _check(lines, "uniform Linf moment (max/min over nu)", ratio <= 2.0, f"ratio={ratio:.3f}")
            eratio = summary.get("exp_moment_max_min_ratio", math.inf)
            _check(lines, "exp-moment uniformity", eratio <= 2.0, f"ratio={eratio:.3f}")
            for p in doc.get("points", []):
                nu = p["coords"]["nu"]
                for key, label in (("res_enstrophy", "enstrophy balance"),
                                   ("res_l2", "L2 balance")):
                    r = p["extras"][key]
                    _check(lines, f"{label} at nu={nu:g}", abs(r) <= 0.10, f"residual={r:+.3%}")
        elif kind == "damped":
            for key, fit in (doc.get("fits") or {}).items():
                if not fit:
                    continue
                alpha = float(key.split("=")[1])
                ok = fit["slope"] >= 2 * alpha - 0.2
                _check(lines, f"damped decay slope {key}", ok,
                       f"slope={fit['slope']:.3f} (need >= {2 * alpha - 0.2:.2f})")
            for key, s in (doc.get("summary") or {}).items():
                if not isinstance(s, dict):
                    continue
                if "max_min_ratio" in s:
                    _check(lines, f"damped bounded {key}",
                           s["max_min_ratio"] <= 2.0 and s.get("above_floor", False),
                           f"ratio={s['max_min_ratio']:.3f} floor_ok={s.get('above_floor')}")
                if s.get("verdict"):
                    _check(lines, f"damped growth {key}", s["verdict"] == "diverging",
                           f"verdict={s['verdict']}")
        elif kind == "moser":
            ratio = summary.get("ratio_max_min", math.inf)
            _check(lines, "regularization drift-independence", ratio <= 2.0, f"ratio={ratio:.3f}")
        elif kind == "lp_ledger":
            for key, s in summary.items():
                ratio = s.get("ratio", math.inf)
                _check(lines, f"ledger dt-refinement {key}", 0.35 <= ratio <= 0.65,
                       f"ratio={ratio:.3f}")
        consolidated.append(os.path.join(run_dir, "results.csv"))

    bal_path = os.path.join(run_dir, "balance.json")
    if os.path.exists(bal_path):
        found += 1
        with open(bal_path) as fh:
            doc = json.load(fh)
        integrity(doc.get("config_hash"))
        for label, entry in doc.get("identities", {}).items():
            _check(lines, label, abs(entry["residual"]) <= 0.10,
                   f"residual={entry['residual']:+.3%}")

    ell_path = os.path.join(run_dir, "elliptic.json")
    if os.path.exists(ell_path):
        found += 1
        with open(ell_path) as fh:
            doc = json.load(fh)
        integrity(doc.get("config_hash"))
        tol = doc.get("tol", 1e-10)
        pts = doc.get("points", [])
        for p in pts:
            _check(lines, f"elliptic H1 bound A={p['amplitude']:g}",
                   p["h1_ratio"] <= 1 + 10 * tol and p["residual"] <= tol,
                   f"ratio={p['h1_ratio']:.4f} residual={p['residual']:.2e}")
        base = [p for p in pts if p["amplitude"] == 0]
        if base and len(pts) > 1:
            c0 = base[0]["c_fit"]
            worst = max(p["c_fit"] / c0 for p in pts)
            _check(lines, "elliptic modulus drift-independence", worst <= 2.0,
                   f"max C(A)/C(0)={worst:.3f}")
        consolidated.append(os.path.join(run_dir, "elliptic.csv"))

    orc_path = os.path.join(run_dir, "oracle.json")
    if os.path.exists(orc_path):
        found += 1
        with open(orc_path) as fh:
            doc = json.load(fh)
        integrity(doc.get("config_hash"))
        rel = doc.get("ou", {}).get("rel_error")
        if rel is not None:
            _check(lines, "OU stationary variance", abs(rel) <= 0.05, f"rel_error={rel:+.2%}")

    absent = [name for name in ("results.json", "balance.json", "elliptic.json", "oracle.json")
              if not os.path.exists(os.path.join(run_dir, name))]
    if found == 0:
        lines.append("no completed outputs found; zero criteria evaluated")
    elif absent:
        lines.append(f"not present (skipped): {', '.join(absent)}")

    text = "\n".join(lines) + "\n"
    with open(os.path.join(run_dir, "report.txt"), "w") as fh:
        fh.write(text)
    with open(os.path.join(run_dir, "consolidated.csv"), "w") as fh:
        for path in consolidated:
            if os.path.exists(path):
                with open(path) as src:
                    fh.write(src.read())
    print(text, end="")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "oracle": _cmd_oracle,
    "elliptic": _cmd_elliptic,
    "balance": _cmd_balance,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
