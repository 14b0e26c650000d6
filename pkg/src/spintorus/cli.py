"""Command-line surface tying the pipeline together.

Subcommands: spectrum, mu-curve, solve, surface, check.  Exit codes:
0 success, 2 validation error, 3 solver failure, 4 check failure.
Reports are deterministic JSON (schema_version field, canonical float
formatting); identical config and seed give byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, RunConfig, config_from_dict, load_config
from .dirac import dirac_spectrum_numeric, kernel_dimension, DENSE_GRID_CAP
from .fields import lp_norm
from .functional import (
    DegenerateFieldError,
    IterationLimitError,
    mu_curve,
)
from .lattice import closed_form_spectrum, first_positive_eigenvalue
from .report import (
    CheckItem,
    CheckReport,
    dump_report,
    new_report,
    threshold_verdict,
)
from .solver import (
    ContinuationError,
    Solution,
    lambda_consistency,
    solve_at_exponent,
    solve_critical,
)
from .weierstrass import (
    ClosednessError,
    build_alpha,
    closedness_residual,
    count_zeros,
    export_mesh,
    integrate_immersion,
    verify_immersion,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_CHECK = 4


def _parse_copies(text: str) -> tuple[int, int]:
    try:
        k1, k2 = text.lower().split("x")
        return (int(k1), int(k2))
    except ValueError as exc:
        raise ConfigError(f"copies: expected K1xK2, got {text!r}") from exc


def _resolve_config(args) -> RunConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = RunConfig()
    overrides = {}
    if getattr(args, "v1", None):
        overrides["v1"] = [float(t) for t in args.v1.replace(",", " ").split()]
    if getattr(args, "v2", None):
        overrides["v2"] = [float(t) for t in args.v2.replace(",", " ").split()]
    if getattr(args, "eps", None):
        toks = args.eps.replace(",", " ").split()
        if len(toks) != 2:
            raise ConfigError(f"eps: expected two signs, got {args.eps!r}")
        overrides["eps1"], overrides["eps2"] = int(toks[0]), int(toks[1])
    if getattr(args, "grid", None):
        overrides["n_grid"] = args.grid
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "out", None):
        overrides["out_dir"] = args.out
    if getattr(args, "copies", None):
        overrides["copies"] = _parse_copies(args.copies)
    data = cfg.as_dict()
    data.update(overrides)
    return config_from_dict(data)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config_echo(cfg: RunConfig) -> dict:
    """Config as echoed into reports; paths are dropped for byte-determinism."""
    data = cfg.as_dict()
    data.pop("out_dir", None)
    return data


def _spectrum_summary(cfg: RunConfig, entries: int = 10) -> dict:
    lat, spin = cfg.lattice(), cfg.spin()
    closed = closed_form_spectrum(lat, spin, entries)
    lam1 = first_positive_eigenvalue(lat, spin)
    return {
        "closed_form": [[v, m] for v, m in closed],
        "lambda1_plus": lam1,
        "lambda1_sqrt_area": lam1 * math.sqrt(lat.area),
        "kernel_dim_complex": kernel_dimension(spin),
    }


def cmd_spectrum(cfg: RunConfig, args) -> int:
    lat, spin = cfg.lattice(), cfg.spin()
    report = new_report("spectrum", _config_echo(cfg))
    report["spectrum"] = _spectrum_summary(cfg)
    n_dense = min(cfg.n_grid, 12)
    pairs = dirac_spectrum_numeric(lat, spin, n_dense, k=10)
    report["numeric"] = {
        "n_grid": n_dense,
        "values": [p.value for p in pairs],
        "cap": DENSE_GRID_CAP,
    }
    report["threshold"] = threshold_verdict(report["spectrum"]["lambda1_sqrt_area"])
    out = _out_dir(cfg)
    dump_report(report, out / "spectrum_report.json")
    lam1 = report["spectrum"]["lambda1_plus"]
    print(f"lambda1+ = {lam1:.12g}, lambda1+ * sqrt(area) = {report['spectrum']['lambda1_sqrt_area']:.12g}")
    print(f"kernel dim (complex) = {report['spectrum']['kernel_dim_complex']}")
    print(report["threshold"]["verdict"])
    print(f"wrote {out / 'spectrum_report.json'}")
    return EXIT_OK


def cmd_mu_curve(cfg: RunConfig, args) -> int:
    lat, spin = cfg.lattice(), cfg.spin()
    points = mu_curve(
        lat, spin, cfg.q_values, n_grid=cfg.n_grid, seed=cfg.seed
    )
    report = new_report("mu-curve", _config_echo(cfg))
    report["mu_curve"] = [
        {
            "q": pt.q,
            "mu": pt.mu,
            "grad_norm": pt.grad_norm,
            "converged": pt.converged,
            **({"error": pt.error} if pt.error else {}),
        }
        for pt in points
    ]
    lam1 = first_positive_eigenvalue(lat.unit_area(), spin)
    report["duality_q2"] = {
        "mu_2_expected": 1.0 / lam1,
        "note": "mu_2 = 1/lambda1+ on the area-1 torus",
    }
    report["threshold"] = threshold_verdict(
        first_positive_eigenvalue(lat, spin) * math.sqrt(lat.area)
    )
    out = _out_dir(cfg)
    dump_report(report, out / "mu_curve_report.json")
    for pt in points:
        print(f"q = {pt.q:.4f}  mu_q = {pt.mu:.10g}  (|grad| = {pt.grad_norm:.2e})")
    print(f"wrote {out / 'mu_curve_report.json'}")
    return EXIT_OK if all(pt.converged for pt in points) else EXIT_SOLVER


def _solution_report_block(sol: Solution) -> dict:
    dens = sol.phi.pointwise_norm() ** 4
    return {
        "lambda": sol.lam,
        "p": sol.p,
        "residual": sol.residual,
        "norm_p": sol.norm_p,
        "min_abs": sol.min_abs(),
        "max_abs": sol.max_abs(),
        "lambda_consistency": lambda_consistency(sol),
        "trace": sol.trace,
        "conformal_factor": {
            "metric": "g = |phi|^4 g0",
            "min": float(dens.min()),
            "max": float(dens.max()),
            "mean": float(dens.mean()),
        },
    }


def cmd_solve(cfg: RunConfig, args) -> int:
    lat, spin = cfg.lattice(), cfg.spin()
    out = _out_dir(cfg)
    if getattr(args, "resume", None):
        sol = Solution.from_dict(json.loads(Path(args.resume).read_text()))
        sol = solve_at_exponent(4.0, sol, tol_solve=cfg.tol_solve, tol_norm=cfg.tol_norm)
        sol.meta["resumed_from"] = Path(args.resume).name
    else:
        sol = solve_critical(
            lat,
            spin,
            schedule=cfg.schedule(),
            n_grid=cfg.n_grid,
            seed=cfg.seed,
        )
    report = new_report("solve", _config_echo(cfg))
    report["spectrum"] = _spectrum_summary(cfg)
    report["solution"] = _solution_report_block(sol)
    report["solution"]["file"] = "solution.json"
    lam_sqrt_area = sol.lam * math.sqrt(sol.phi.lat.area)
    report["threshold"] = threshold_verdict(lam_sqrt_area)
    tol_solve = cfg.tol_solve if cfg.tol_solve is not None else 1e-9 * sol.phi.n_grid
    checks = CheckReport(
        [
            CheckItem("residual", sol.residual, tol_solve, sol.residual <= tol_solve),
            CheckItem(
                "norm_p deviation",
                abs(sol.norm_p - 1.0),
                cfg.tol_norm,
                abs(sol.norm_p - 1.0) <= cfg.tol_norm,
            ),
            CheckItem(
                "lambda consistency",
                abs(lambda_consistency(sol) - sol.lam),
                2.0 * tol_solve,
                abs(lambda_consistency(sol) - sol.lam) <= 2.0 * tol_solve,
            ),
        ]
    )
    report["checks"] = checks.as_dict()
    with open(out / "solution.json", "w", encoding="utf-8") as fh:
        json.dump(sol.to_dict(), fh, sort_keys=True, indent=1)
    dump_report(report, out / "solve_report.json")
    print(f"lambda = {sol.lam:.12g}  residual = {sol.residual:.3e}")
    print(report["threshold"]["verdict"])
    for line in checks.summary_lines():
        print(line)
    print(f"wrote {out / 'solve_report.json'}")
    return EXIT_OK if checks.passed else EXIT_CHECK


def _load_solution(path) -> Solution:
    try:
        return Solution.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"solution file {path}: {exc}") from exc


def cmd_surface(cfg: RunConfig, args) -> int:
    sol = _load_solution(args.solution)
    if sol.max_abs() == 0.0:
        raise ConfigError("solution file holds the zero spinor")
    alpha = build_alpha(sol.phi)
    imm = integrate_immersion(
        alpha, H=sol.lam, tol_closed=cfg.tol_closed, zero_tol=cfg.zero_tol
    )
    checks = verify_immersion(imm, sol.phi, H=sol.lam, cmc_tol=cfg.tol_cmc)
    report = new_report("surface", _config_echo(cfg))
    report["threshold"] = threshold_verdict(
        sol.lam * math.sqrt(sol.phi.lat.area)
    )
    report["periods"] = [list(map(float, imm.V1)), list(map(float, imm.V2))]
    report["H"] = sol.lam
    report["diagnostics"] = imm.diagnostics
    report["branch_points"] = [
        {"u": j / imm.n_grid, "v": l / imm.n_grid, "order": order}
        for j, l, order in imm.branch_points
    ]
    report["checks"] = checks.as_dict()
    out = _out_dir(cfg)
    if not args.verify_only:
        obj_path, sidecar = export_mesh(
            imm, cfg.copies, out / "surface.obj", lam=sol.lam
        )
        report["files"] = [Path(obj_path).name, Path(sidecar).name]
    dump_report(report, out / "surface_report.json")
    for line in checks.summary_lines():
        print(line)
    print(f"wrote {out / 'surface_report.json'}")
    return EXIT_OK if checks.passed else EXIT_CHECK


def cmd_check(cfg: RunConfig, args) -> int:
    sol = _load_solution(args.solution)
    phi = sol.phi
    tol_solve = cfg.tol_solve if cfg.tol_solve is not None else 1e-9 * phi.n_grid
    checks = CheckReport()
    checks.add("residual", sol.residual, tol_solve, sol.residual <= tol_solve)
    checks.add(
        "norm_p deviation",
        abs(lp_norm(phi, sol.p) - 1.0),
        cfg.tol_norm,
        abs(lp_norm(phi, sol.p) - 1.0) <= cfg.tol_norm,
    )
    lam_gap = abs(lambda_consistency(sol) - sol.lam)
    checks.add("lambda consistency", lam_gap, 2.0 * tol_solve, lam_gap <= 2.0 * tol_solve)
    zc = count_zeros(phi, sol.lam, zero_tol=cfg.zero_tol)
    checks.add(
        "nodal bound",
        float(len(zc.zeros)),
        zc.bound,
        zc.ok,
        note=f"bound {zc.bound:.6g}",
    )
    alpha = build_alpha(phi)
    closed = closedness_residual(alpha)
    checks.add("closedness residual", closed, cfg.tol_closed, closed <= cfg.tol_closed)
    if closed <= cfg.tol_closed:
        imm = integrate_immersion(alpha, H=sol.lam, tol_closed=cfg.tol_closed)
        sub = verify_immersion(imm, phi, H=sol.lam, cmc_tol=cfg.tol_cmc)
        known = {item.name for item in checks.items}
        checks.items.extend(item for item in sub.items if item.name not in known)
    report = new_report("check", _config_echo(cfg))
    lam_sqrt_area = sol.lam * math.sqrt(phi.lat.area)
    report["threshold"] = threshold_verdict(lam_sqrt_area)
    report["checks"] = checks.as_dict()
    out = _out_dir(cfg)
    dump_report(report, out / "check_report.json")
    for line in checks.summary_lines():
        print(line)
    print(report["threshold"]["verdict"])
    print(f"wrote {out / 'check_report.json'}")
    return EXIT_OK if checks.passed else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spintorus",
        description=(
            "Spectral Dirac pipeline on flat 2-tori: spectra, the conformal "
            "eigenvalue functional, the critical nonlinear Dirac equation, and "
            "periodic constant-mean-curvature surfaces."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--config", help="config file (key-value sections or JSON)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="random seed echoed in reports")
        p.add_argument("--grid", type=int, help="grid size N (even)")
        p.add_argument("--v1", help="lattice generator, e.g. '1 0'")
        p.add_argument("--v2", help="lattice generator, e.g. '0 2'")
        p.add_argument("--eps", help="holonomy signs, e.g. '+1 -1'")

    p_spec = sub.add_parser("spectrum", help="closed-form and numeric Dirac spectra")
    common(p_spec)
    p_spec.set_defaults(func=cmd_spectrum)

    p_mu = sub.add_parser("mu-curve", help="mu_q table over a q grid")
    common(p_mu)
    p_mu.set_defaults(func=cmd_mu_curve)

    p_solve = sub.add_parser("solve", help="subcritical continuation to p = 4")
    common(p_solve)
    p_solve.add_argument("--resume", help="saved solution file to re-polish")
    p_solve.set_defaults(func=cmd_solve)

    p_surf = sub.add_parser("surface", help="integrate and export the immersion")
    common(p_surf)
    p_surf.add_argument("--solution", required=True, help="solution JSON file")
    p_surf.add_argument("--copies", help="fundamental domain tiling K1xK2")
    p_surf.add_argument(
        "--verify-only", action="store_true", help="run checks, write no mesh"
    )
    p_surf.set_defaults(func=cmd_surface)

    p_check = sub.add_parser("check", help="verify a saved solution end to end")
    common(p_check)
    p_check.add_argument("--solution", required=True, help="solution JSON file")
    p_check.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ContinuationError, DegenerateFieldError, IterationLimitError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        trace = getattr(exc, "trace", None)
        if trace:
            print(f"partial trace: {trace}", file=sys.stderr)
        return EXIT_SOLVER
    except ClosednessError as exc:
        print(f"check failure: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
