"""Command-line entry point: every experiment behind one executable.

Each subcommand writes machine-readable outputs (CSV rows, a JSON summary)
plus a manifest recording the configuration hash, seed, and library
versions, so identical invocations reproduce byte-identical tables.

Exit codes: 0 when every asserted inequality of the run passed, 1 when a
check failed, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .grid import CellSet, ExponentTriple, GridFunction, lebesgue_norm, make_grid
from .inequalities import (
    ProofConstants,
    SetPairSampler,
    boundary_blowup_probe,
    capped_scale_sum,
    capped_scale_sum_sqrt,
    dyadic_truncation_checks,
    hls_check,
    indicator_estimate_suite,
    restricted_weak_type_suite,
    uniform_bound_scan,
    unit_truncation_check,
)
from .interpolation import (
    classify_region,
    strong_type_constant,
    vertex_triples,
)
from .operators import (
    OperatorParams,
    ThetaQuadrature,
    bilinear_op,
    interaction_force_direct,
    interaction_force_divergence,
    interaction_stress,
    riesz_potential,
    truncated_dyadic,
    truncated_unit,
)
from .relative_energy import (
    coercivity_estimate,
    gronwall_fit,
    identity_residuals,
    relative_energy,
    restrict_state,
    sample_pairs_on_grid,
    smooth_pair_sampler,
)
from .simulation import SimConfig, det_bounds_check, energy_report, simulate
from . import storage

_FLOAT_FMT = "%.17g"


def _fmt(value) -> str:
    if isinstance(value, float):
        return _FLOAT_FMT % value
    return str(value)


def _write_csv(path: Path, rows: list[dict]) -> None:
    if not rows:
        path.write_text("", encoding="utf-8")
        return
    keys = sorted({k for row in rows for k in row})
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(keys)
        for row in rows:
            writer.writerow([_fmt(row.get(k, "")) for k in keys])


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _manifest(outdir: Path, args: argparse.Namespace) -> None:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    blob = json.dumps(config, sort_keys=True, default=str)
    _write_json(
        outdir / "manifest.json",
        {
            "config": config,
            "config_sha256": hashlib.sha256(blob.encode()).hexdigest(),
            "seed": getattr(args, "seed", None),
            "versions": {
                "package": __version__,
                "numpy": np.__version__,
                "python": sys.version.split()[0],
            },
        },
    )


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _theta_grid(spec: str) -> list[float]:
    n = int(spec)
    return [i / (n - 1) for i in range(n)] if n > 1 else [0.5]


def _finish(outdir: Path, args, rows: list[dict], summary: dict, passed: bool, csv_name: str) -> int:
    _write_csv(outdir / csv_name, rows)
    summary = dict(summary)
    summary["passed"] = bool(passed)
    _write_json(outdir / "summary.json", summary)
    _manifest(outdir, args)
    print(f"{'PASS' if passed else 'FAIL'}: {summary.get('name', csv_name)} -> {outdir}")
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# subcommands


def cmd_op_eval(args) -> int:
    outdir = _outdir(args)
    grid = make_grid(args.d, args.N, args.half_width)
    f = GridFunction.indicator_box(grid, [args.f_lo] * args.d, [args.f_hi] * args.d)
    g = GridFunction.indicator_box(grid, [args.g_lo] * args.d, [args.g_hi] * args.d)
    params = OperatorParams(alpha=args.alpha, dim=args.d, theta=args.theta)
    if args.kind == "bilinear":
        out = bilinear_op(f, g, params)
    elif args.kind == "unit":
        out = truncated_unit(f, g, args.theta)
    elif args.kind == "dyadic":
        out = truncated_dyadic(f, g, args.theta, args.j)
    elif args.kind == "potential":
        out = riesz_potential(g, params)
    else:  # stress: store the tensor channels and summarize
        stress = interaction_stress(f, params, ThetaQuadrature.gauss_legendre(args.theta_nodes))
        stress.save(outdir / "field.bin")
        summary = {
            "name": "op-eval",
            "kind": args.kind,
            "min_eigenvalue": stress.min_eigenvalue(),
            "trace_l1": lebesgue_norm(stress.trace(), 1),
        }
        return _finish(outdir, args, [], summary, True, "rows.csv")
    storage.write_field(outdir / "field.bin", out)
    rows = [
        {"stat": "l1", "value": lebesgue_norm(out, 1)},
        {"stat": "l2", "value": lebesgue_norm(out, 2)},
        {"stat": "max", "value": lebesgue_norm(out, math.inf)},
    ]
    summary = {"name": "op-eval", "kind": args.kind, "l1": rows[0]["value"]}
    return _finish(outdir, args, rows, summary, True, "rows.csv")


def cmd_identity_check(args) -> int:
    outdir = _outdir(args)
    sizes = [int(s) for s in args.N.split(",")]
    params = OperatorParams(alpha=args.alpha, dim=args.d)
    tq = ThetaQuadrature.gauss_legendre(args.theta_nodes)
    rows = []
    gaps = []
    for n in sizes:
        grid = make_grid(args.d, n, 0.5)
        period = 2.0 * grid.half_width
        coords = grid.coordinates()
        vals = np.ones(grid.shape)
        for c in coords:
            vals += (0.5 / args.d) * np.cos(2 * np.pi * c / period)
        rho = GridFunction(grid, vals, nonneg_hint=True)
        direct = interaction_force_direct(rho, params)
        divergence = interaction_force_divergence(rho, params, tq, args.fd_scheme)
        num = sum(float(np.sum((a.values - b.values) ** 2)) for a, b in zip(direct, divergence))
        den = sum(float(np.sum(a.values**2)) for a in direct)
        gap = math.sqrt(num / den)
        gaps.append(gap)
        rows.append({"N": n, "rel_l2_gap": gap})
    orders = [math.log2(gaps[i] / gaps[i + 1]) for i in range(len(gaps) - 1)]
    for i, order in enumerate(orders):
        rows[i + 1]["order"] = order
    passed = all(order >= args.min_order for order in orders) if orders else True
    summary = {
        "name": "identity-check",
        "alpha": args.alpha,
        "d": args.d,
        "orders": orders,
        "min_order_required": args.min_order,
    }
    return _finish(outdir, args, rows, summary, passed, "convergence.csv")


def cmd_hls(args) -> int:
    outdir = _outdir(args)
    grid = make_grid(args.d, args.N, args.half_width)
    sampler = SetPairSampler(grid=grid, seed=args.seed, window=args.window)
    rows = []
    for A, B in sampler.pairs(args.count):
        rep = hls_check(A.indicator(), B.indicator(), args.alpha, args.p, args.q)
        rows.append(rep.row())
    passed = all(math.isfinite(r["ratio"]) for r in rows)
    ratios = [r["ratio"] for r in rows if r["ratio"] > 0]
    summary = {
        "name": "kernel-pairing-scan",
        "count": len(rows),
        "max_ratio": max(ratios, default=0.0),
    }
    return _finish(outdir, args, rows, summary, passed, "reports.csv")


def cmd_aux_lemmas(args) -> int:
    outdir = _outdir(args)
    grid = make_grid(args.d, args.N, args.half_width)
    sampler = SetPairSampler(grid=grid, seed=args.seed, window=args.window)
    thetas = _theta_grid(args.theta_grid)
    js = range(args.j_min, args.j_max + 1)
    rows = []
    for A, B in sampler.pairs(args.count):
        f, g = A.indicator(), B.indicator()
        for theta in thetas:
            rows.append(unit_truncation_check(f, g, theta).row())
            for j in js:
                for rep in dyadic_truncation_checks(f, g, theta, j):
                    rows.append(rep.row())
    passed = all(r["passed"] for r in rows)
    summary = {"name": "aux-lemmas", "count": len(rows), "violations": sum(not r["passed"] for r in rows)}
    return _finish(outdir, args, rows, summary, passed, "reports.csv")


def cmd_annuli(args) -> int:
    outdir = _outdir(args)
    grid = make_grid(args.d, args.N, args.half_width)
    sampler = SetPairSampler(grid=grid, seed=args.seed, window=args.window)
    thetas = _theta_grid(args.theta_grid)
    rows = []
    for E, A, B in sampler.triples(args.count):
        for theta in thetas:
            for j in range(args.j_min, args.j_max + 1):
                for rep in indicator_estimate_suite(E, A, B, theta, j):
                    rows.append(rep.row())
    passed = all(r["passed"] for r in rows)
    summary = {"name": "indicator-estimates", "count": len(rows), "violations": sum(not r["passed"] for r in rows)}
    return _finish(outdir, args, rows, summary, passed, "reports.csv")


def cmd_sums(args) -> int:
    outdir = _outdir(args)
    rows = []
    passed = True
    grid_vals = [2.0**k for k in range(-10, 11)]
    for a in grid_vals:
        value, bound = capped_scale_sum_sqrt(a, args.alpha, args.d)
        ok = value <= bound * (1 + 1e-12)
        passed &= ok
        rows.append({"sum": "sqrt", "a": a, "b": "", "value": value, "bound": bound, "passed": ok})
    for b in grid_vals:
        value, bound = capped_scale_sum(1.0, b, args.alpha, args.d)
        ok = value <= bound * (1 + 1e-12)
        passed &= ok
        rows.append({"sum": "linear", "a": 1.0, "b": b, "value": value, "bound": bound, "passed": ok})
    log_a = np.log2(grid_vals)
    slope_sqrt = float(np.polyfit(log_a, np.log2([r["value"] for r in rows[:21]]), 1)[0])
    slope_lin = float(np.polyfit(log_a, np.log2([r["value"] for r in rows[21:]]), 1)[0])
    target = args.alpha / args.d
    passed &= abs(slope_sqrt - target) <= 0.05 and abs(slope_lin - target) <= 0.05
    summary = {
        "name": "capped-sums",
        "slope_sqrt": slope_sqrt,
        "slope_linear": slope_lin,
        "target_slope": target,
    }
    return _finish(outdir, args, rows, summary, passed, "sums.csv")


def cmd_restricted(args) -> int:
    outdir = _outdir(args)
    grid = make_grid(args.d, args.N, args.half_width)
    sampler = SetPairSampler(grid=grid, seed=args.seed, window=args.window)
    thetas = _theta_grid(args.theta_grid)
    rows = []
    by_name: dict[str, list[float]] = {}
    for A, B in sampler.pairs(args.count):
        for theta in thetas:
            for rep in restricted_weak_type_suite(A, B, args.alpha, theta):
                rows.append(rep.row())
                by_name.setdefault(rep.name, []).append(rep.ratio)
    passed = all(r["passed"] for r in rows)
    uniformity = {
        name: (max(vals) / min(vals) if min(vals) > 0 else math.inf)
        for name, vals in sorted(by_name.items())
    }
    summary = {"name": "restricted-weak-type", "theta_uniformity": uniformity}
    return _finish(outdir, args, rows, summary, passed, "reports.csv")


def cmd_uniform_scan(args) -> int:
    outdir = _outdir(args)
    grid = make_grid(args.d, args.N, args.half_width)
    sampler = SetPairSampler(grid=grid, seed=args.seed, window=args.window)
    triple = ExponentTriple.from_pq(args.p, args.q, args.alpha, args.d)
    scan = uniform_bound_scan(
        sampler.pairs(args.count),
        triple,
        _theta_grid(args.theta_grid),
        structural_factor=args.structural_factor,
        safety_factor=args.safety_factor,
    )
    summary = {
        "name": scan.name,
        "sup_ratio": scan.sup_ratio,
        "bound": scan.bound,
        **{k: v for k, v in scan.params.items() if k != "vertices"},
    }
    return _finish(outdir, args, scan.rows, summary, scan.passed, "scan.csv")


def cmd_blowup_probe(args) -> int:
    outdir = _outdir(args)
    epsilons = [float(e) for e in args.epsilons.split(",")]
    rep = boundary_blowup_probe(
        args.alpha, args.d, epsilons=epsilons, g_kind=args.g_kind, n=args.N, delta=args.delta
    )
    rows = [{"eps": e, "ratio": r} for e, r in zip(rep.epsilons, rep.ratios)]
    if args.g_kind == "unbounded":
        passed = rep.growth_factor >= args.min_growth and all(
            a < b for a, b in zip(rep.ratios, rep.ratios[1:])
        )
    else:
        passed = rep.max_step_change <= args.max_step
    summary = {
        "name": "blowup-probe",
        "g_kind": rep.g_kind,
        "growth_factor": rep.growth_factor,
        "max_step_change": rep.max_step_change,
    }
    return _finish(outdir, args, rows, summary, passed, "probe.csv")


def cmd_interp(args) -> int:
    outdir = _outdir(args)
    verts = vertex_triples(args.alpha, args.d)
    label = classify_region(1.0 / args.p, 1.0 / args.q, args.alpha, args.d)
    payload = {
        "name": "interp",
        "alpha": args.alpha,
        "d": args.d,
        "p": args.p,
        "q": args.q,
        "region": label.value,
        "vertices": [
            {"inv_p": v.inv_p, "inv_q": v.inv_q, "inv_r": v.inv_r, "r": 1.0 / v.inv_r}
            for v in verts
        ],
    }
    passed = True
    if label.value == "interior_square":
        consts = ProofConstants(alpha=args.alpha, dim=args.d)
        value, solve = strong_type_constant(
            1.0 / args.p, 1.0 / args.q, args.alpha, args.d, consts.restricted, args.structural_factor
        )
        inv_r = 1.0 / args.p + 1.0 / args.q - args.alpha / args.d
        payload.update(
            {
                "r": 1.0 / inv_r,
                "thetas": list(solve["thetas"]),
                "vertices_used": list(solve["vertices"]),
                "interpolated_constant": value,
                "side_condition_ok": solve["side_condition_ok"],
            }
        )
        passed = solve["side_condition_ok"]
    print(json.dumps(payload, indent=2, sort_keys=True))
    _write_json(outdir / "interp.json", payload)
    _manifest(outdir, args)
    return 0 if passed else 1


def _load_sim_config(args) -> SimConfig:
    if args.config:
        return SimConfig.from_json(args.config)
    return SimConfig(
        dim=args.d,
        n=args.N,
        alpha=args.alpha,
        kappa=args.kappa,
        gamma=args.gamma,
        t_end=args.t_end,
        output_interval=args.output_interval,
        formulation=args.formulation,
        scheme=args.scheme,
    )


def cmd_sim_run(args) -> int:
    outdir = _outdir(args)
    cfg = _load_sim_config(args)
    traj = simulate(cfg)
    led = energy_report(traj, c_d=args.c_d)
    for k, state in enumerate(traj):
        storage.write_field(outdir / f"rho_{k:04d}.bin", state.density_field)
    _write_json(outdir / "config.json", cfg.to_dict())
    passed = (
        led.mass_drift <= 1e-12
        and traj[-1].vacuum_events == 0
        and (cfg.formulation != "divergence" or led.momentum_drift <= 1e-12)
    )
    summary = {
        "name": "sim-run",
        "mass_drift": led.mass_drift,
        "energy_drift": led.energy_drift,
        "momentum_drift": led.momentum_drift,
        "vacuum_events": traj[-1].vacuum_events,
        "spacetime_lhs": led.spacetime_lhs,
        "spacetime_rhs": led.spacetime_rhs,
    }
    return _finish(outdir, args, led.rows(), summary, passed, "ledger.csv")


def cmd_sim_diagnostics(args) -> int:
    outdir = _outdir(args)
    cfg = _load_sim_config(args)
    traj = simulate(cfg)
    tq = ThetaQuadrature.gauss_legendre(cfg.theta_nodes)
    rows = []
    passed = True
    for state in traj:
        rep = det_bounds_check(state, tq)
        ok = rep.passes(args.tol)
        passed &= ok
        rows.append(
            {
                "time": state.time,
                "stress_eig_margin": rep.stress_eig_margin,
                "det_pressure_margin": rep.det_pressure_margin,
                "det_stress_margin": rep.det_stress_margin,
                "det_block_margin": rep.det_block_margin,
                "min_spacetime_eigenvalue": rep.min_spacetime_eigenvalue,
                "passed": ok,
            }
        )
    led = energy_report(traj, c_d=args.c_d)
    summary = {
        "name": "sim-diagnostics",
        "spacetime_lhs": led.spacetime_lhs,
        "spacetime_rhs": led.spacetime_rhs,
        "c_d": args.c_d,
    }
    return _finish(outdir, args, rows, summary, passed, "diagnostics.csv")


def cmd_rel_run(args) -> int:
    outdir = _outdir(args)
    cfg = SimConfig(
        dim=1,
        n=args.N,
        alpha=args.alpha,
        kappa=args.kappa,
        gamma=args.gamma,
        t_end=args.t_end,
        output_interval=args.t_end / args.outputs,
        rho_amplitude=0.3 + args.perturbation,
        u_amplitude=0.1 + args.perturbation,
    )
    cfg_bar = SimConfig(
        dim=1,
        n=2 * args.N,
        alpha=args.alpha,
        kappa=args.kappa,
        gamma=args.gamma,
        t_end=args.t_end,
        output_interval=args.t_end / args.outputs,
        rho_amplitude=0.3,
        u_amplitude=0.1,
    )
    traj = simulate(cfg)
    traj_bar = [restrict_state(s) for s in simulate(cfg_bar)]
    samples = [relative_energy(s, sb) for s, sb in zip(traj, traj_bar)]
    times, residuals = identity_residuals(traj, traj_bar)
    rows = [
        {
            "time": s.time,
            "kinetic_rel": s.kinetic_rel,
            "internal_rel": s.internal_rel,
            "interaction_rel": s.interaction_rel,
            "psi": s.psi,
            "identity_residual": float(r),
        }
        for s, r in zip(samples, residuals)
    ]
    passed = all(s.psi >= -1e-12 for s in samples)
    summary = {
        "name": "rel-run",
        "psi0": samples[0].psi,
        "psi_final": samples[-1].psi,
        "max_identity_residual": float(np.abs(residuals[1:-1]).max()),
    }
    return _finish(outdir, args, rows, summary, passed, "psi.csv")


def cmd_rel_fit(args) -> int:
    outdir = _outdir(args)
    if args.psi_csv:
        with open(args.psi_csv, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            data = [(float(r["time"]), float(r["psi"])) for r in reader]
        times = [t for t, _ in data]
        psis = [p for _, p in data]
        fit = gronwall_fit(times, psis)
        c_star = None
    else:
        grid = make_grid(1, args.N, 0.5)
        pairs = sample_pairs_on_grid(smooth_pair_sampler(seed=args.seed), grid, args.count)
        est = coercivity_estimate(pairs, args.alpha, args.gamma)
        c_star = est.c_star
        fit = None
    payload = {"name": "rel-fit"}
    passed = True
    if fit is not None:
        payload.update(
            {
                "c_fit": fit.c_fit,
                "psi0": fit.psi0,
                "envelope_ok": fit.envelope_ok,
                "identity_violation": fit.identity_violation,
            }
        )
        passed = fit.envelope_ok and not fit.identity_violation
    if c_star is not None:
        payload.update({"c_star": c_star, "coupling_window": 2.0 / c_star})
    _write_json(outdir / "fit.json", payload)
    _manifest(outdir, args)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rieszlab",
        description="Bilinear singular-kernel operators, inequality scans, and nonlocal Euler runs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seeded=True, gridded=True):
        p.add_argument("--out", default="out", help="output directory")
        if seeded:
            p.add_argument("--seed", type=int, default=0)
        if gridded:
            p.add_argument("--N", type=int, default=512)
            p.add_argument("--d", type=int, default=1)
            p.add_argument("--alpha", type=float, default=0.5)
            p.add_argument("--half-width", dest="half_width", type=float, default=8.0)
            p.add_argument("--window", type=float, default=2.0)

    p = sub.add_parser("op-eval", help="evaluate one operator on indicator inputs")
    common(p, seeded=False)
    p.add_argument("--kind", choices=["bilinear", "unit", "dyadic", "potential", "stress"], default="bilinear")
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--j", type=int, default=0)
    p.add_argument("--theta-nodes", dest="theta_nodes", type=int, default=16)
    p.add_argument("--f-lo", dest="f_lo", type=float, default=0.0)
    p.add_argument("--f-hi", dest="f_hi", type=float, default=1.0)
    p.add_argument("--g-lo", dest="g_lo", type=float, default=-1.0)
    p.add_argument("--g-hi", dest="g_hi", type=float, default=0.5)
    p.set_defaults(func=cmd_op_eval)

    p = sub.add_parser("identity-check", help="force vs stress-divergence convergence table")
    p.add_argument("--out", default="out")
    p.add_argument("--N", default="128,256")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--fd-scheme", dest="fd_scheme", default="centered-2")
    p.add_argument("--theta-nodes", dest="theta_nodes", type=int, default=16)
    p.add_argument("--min-order", dest="min_order", type=float, default=1.8)
    p.set_defaults(func=cmd_identity_check)

    p = sub.add_parser("hls", help="kernel pairing ratios on random sets")
    common(p)
    p.add_argument("--p", type=float, default=4 / 3)
    p.add_argument("--q", type=float, default=4 / 3)
    p.add_argument("--count", type=int, default=20)
    p.set_defaults(func=cmd_hls)

    p = sub.add_parser("aux-lemmas", help="unit and dyadic truncation bounds")
    common(p)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--theta-grid", dest="theta_grid", default="11")
    p.add_argument("--j-min", dest="j_min", type=int, default=-4)
    p.add_argument("--j-max", dest="j_max", type=int, default=2)
    p.set_defaults(func=cmd_aux_lemmas)

    p = sub.add_parser("annuli", help="the four indicator-set estimates")
    common(p)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--theta-grid", dest="theta_grid", default="11")
    p.add_argument("--j-min", dest="j_min", type=int, default=-4)
    p.add_argument("--j-max", dest="j_max", type=int, default=2)
    p.set_defaults(func=cmd_annuli)

    p = sub.add_parser("sums", help="capped geometric-scale sums against closed-form bounds")
    p.add_argument("--out", default="out")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--d", type=int, default=1)
    p.set_defaults(func=cmd_sums)

    p = sub.add_parser("restricted", help="restricted weak-type suite on random sets")
    common(p)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--theta-grid", dest="theta_grid", default="11")
    p.set_defaults(func=cmd_restricted)

    p = sub.add_parser("uniform-scan", help="strong-norm ratios at an interior exponent point")
    common(p)
    p.add_argument("--p", type=float, default=1.2)
    p.add_argument("--q", type=float, default=1.2)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--theta-grid", dest="theta_grid", default="11")
    p.add_argument("--structural-factor", dest="structural_factor", type=float, default=1.0)
    p.add_argument("--safety-factor", dest="safety_factor", type=float, default=10.0)
    p.set_defaults(func=cmd_uniform_scan)

    p = sub.add_parser("blowup-probe", help="endpoint concentration probe")
    p.add_argument("--out", default="out")
    p.add_argument("--N", type=int, default=1024)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--epsilons", default="1e-1,1e-2,1e-3")
    p.add_argument("--g-kind", dest="g_kind", choices=["unbounded", "smooth"], default="unbounded")
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--min-growth", dest="min_growth", type=float, default=2.0)
    p.add_argument("--max-step", dest="max_step", type=float, default=0.05)
    p.set_defaults(func=cmd_blowup_probe)

    p = sub.add_parser("interp", help="exponent-diagram vertex table and interpolated constant")
    p.add_argument("--out", default="out")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--structural-factor", dest="structural_factor", type=float, default=1.0)
    p.set_defaults(func=cmd_interp)

    def sim_common(p):
        p.add_argument("--out", default="out")
        p.add_argument("--config", default=None, help="JSON run configuration")
        p.add_argument("--N", type=int, default=128)
        p.add_argument("--d", type=int, default=1)
        p.add_argument("--alpha", type=float, default=0.5)
        p.add_argument("--kappa", type=float, default=1.0)
        p.add_argument("--gamma", type=float, default=2.0)
        p.add_argument("--t-end", dest="t_end", type=float, default=0.05)
        p.add_argument("--output-interval", dest="output_interval", type=float, default=0.01)
        p.add_argument("--formulation", choices=["divergence", "force"], default="divergence")
        p.add_argument("--scheme", choices=["ssprk2", "ssprk3"], default="ssprk3")
        p.add_argument("--c-d", dest="c_d", type=float, default=1.0)

    p = sub.add_parser("sim-run", help="run the solver; snapshots plus conservation ledger")
    sim_common(p)
    p.set_defaults(func=cmd_sim_run)

    p = sub.add_parser("sim-diagnostics", help="tensor positivity and determinant bounds along a run")
    sim_common(p)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_sim_diagnostics)

    p = sub.add_parser("rel-run", help="relative energy series of a perturbed pair")
    p.add_argument("--out", default="out")
    p.add_argument("--N", type=int, default=128)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--kappa", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=2.0)
    p.add_argument("--t-end", dest="t_end", type=float, default=0.05)
    p.add_argument("--outputs", type=int, default=10)
    p.add_argument("--perturbation", type=float, default=0.05)
    p.set_defaults(func=cmd_rel_run)

    p = sub.add_parser("rel-fit", help="exponential-envelope fit or coercivity estimate")
    p.add_argument("--out", default="out")
    p.add_argument("--psi-csv", dest="psi_csv", default=None, help="series from rel-run")
    p.add_argument("--N", type=int, default=128)
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=2.0)
    p.set_defaults(func=cmd_rel_fit)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
