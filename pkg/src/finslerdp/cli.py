"""Command line front end.

Every subcommand reads a TOML experiment file, writes its artifacts into an
output directory, and finishes by writing ``manifest.json`` listing each
emitted file with its SHA-256 content hash.  Nothing written here carries a
timestamp, so a rerun with the same config and seed reproduces the manifest
bit for bit.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numerical error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .config import AUTO_LAMBDA, ExperimentConfig, load_config, validate_hypotheses
from .errors import (
    ConfigurationError,
    DegenerateNormError,
    InvalidInputError,
    NumericalDomainError,
    OutOfRangeError,
    ParameterRegimeError,
    PositivityViolationError,
    PreconditionError,
    SingularPointError,
)
from .fespace import FeFunction, export_csv, export_vtk
from .minkowski import norm_self_check, uniformity_constant
from .solver import SolveReport, minimize, verify
from .thresholds import LambdaParams, ThresholdReport, compute_thresholds, estimate_kappa, lambda_capital

_CONFIG_ERRORS = (
    ConfigurationError,
    InvalidInputError,
    OutOfRangeError,
    PreconditionError,
    DegenerateNormError,
)
_NUMERICAL_ERRORS = (
    NumericalDomainError,
    SingularPointError,
    PositivityViolationError,
    ParameterRegimeError,
)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


class OutputWriter:
    """Collects emitted files and writes the content-hash manifest."""

    def __init__(self, out_dir: Path, command: str, seed: int):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.seed = seed
        self._names: list[str] = []

    def path(self, name: str) -> Path:
        return self.dir / name

    def register(self, name: str):
        if name not in self._names:
            self._names.append(name)

    def write_json(self, name: str, obj) -> Path:
        text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"
        return self.write_text(name, text)

    def write_text(self, name: str, text: str) -> Path:
        p = self.path(name)
        with open(p, "w") as fh:
            fh.write(text)
        self.register(name)
        return p

    def finalize(self) -> Path:
        files = {}
        for name in sorted(self._names):
            digest = hashlib.sha256(self.path(name).read_bytes()).hexdigest()
            files[name] = digest
        manifest = {"command": self.command, "seed": self.seed, "files": files}
        p = self.path("manifest.json")
        with open(p, "w") as fh:
            fh.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return p


# ---------------------------------------------------------------------------
# shared pieces
# ---------------------------------------------------------------------------

def _run_thresholds(cfg: ExperimentConfig, mesh) -> ThresholdReport:
    return compute_thresholds(
        mesh,
        cfg.build_norm(),
        cfg.build_exponents(),
        cfg.gamma,
        cfg.c,
        g_constants=(
            cfg.c1 if cfg.c1 is not None else cfg.a1,
            cfg.c2 if cfg.c2 is not None else cfg.a2,
            cfg.nu,
            cfg.theta,
        ),
        **cfg.threshold_kwargs(),
    )


def _resolve_lambda(cfg: ExperimentConfig, report: ThresholdReport | None) -> float:
    if cfg.lam_mode == "fixed":
        return float(cfg.lam_value)
    if report is None:
        raise ConfigurationError(f"lambda = {AUTO_LAMBDA!r} needs the threshold computation")
    return 0.5 * report.lambda_star


def _lambda_params(cfg: ExperimentConfig, report: ThresholdReport) -> LambdaParams:
    exps = cfg.build_exponents()
    return LambdaParams(
        kappa=report.kappa_used,
        c=cfg.c,
        c1=cfg.c1 if cfg.c1 is not None else cfg.a1,
        c2=cfg.c2 if cfg.c2 is not None else cfg.a2,
        gamma=cfg.gamma,
        nu=cfg.nu,
        theta=cfg.theta,
        p=exps.p,
        p_star=exps.p_star,
        volume=report.domain_volume,
    )


def _thresholds_csv(report: ThresholdReport) -> str:
    cols = [
        ("kappa", report.kappa),
        ("kappa_used", report.kappa_used),
        ("l_f", report.l_f),
        ("sigma_star", report.sigma_star),
        ("s_max", report.s_max),
        ("lambda_at_smax", report.lambda_at_smax),
        ("lambda_star", report.lambda_star),
        ("domain_volume", report.domain_volume),
    ]
    header = ",".join(name for name, _ in cols)
    row = ",".join(format(v, ".17g") for _, v in cols)
    return header + "\n" + row + "\n"


def _trace_csv(report: SolveReport) -> str:
    lines = ["iteration,epsilon,energy,grad_map_norm,min_interior"]
    for it, eps, energy, gm, mi in report.trace:
        lines.append(
            f"{it},{format(eps, '.17g')},{format(energy, '.17g')},"
            f"{format(gm, '.17g')},{format(mi, '.17g')}"
        )
    return "\n".join(lines) + "\n"


def _write_solution(writer: OutputWriter, mesh, u: FeFunction, mu_values: np.ndarray):
    fields = {"u": u.coeffs, "mu": mu_values}
    export_csv(mesh, fields, writer.path("solution.csv"))
    writer.register("solution.csv")
    export_vtk(mesh, fields, writer.path("solution.vtk"), title="double phase minimizer")
    writer.register("solution.vtk")


def _solve_payload(cfg: ExperimentConfig, report: SolveReport, lam: float) -> dict:
    d = report.to_json_dict()
    d["lambda"] = lam
    d["lambda_mode"] = cfg.lam_mode
    if report.weak is not None:
        d["weak_relative"] = report.weak.relative
    return d


def _print_verification(record) -> None:
    for name, ok in record.checks.items():
        print(f"  [{'ok' if ok else 'FAIL'}] {name}")
    print(f"verification {'passed' if record.passed else 'FAILED'}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_validate(cfg: ExperimentConfig, writer: OutputWriter) -> int:
    report = validate_hypotheses(cfg)
    for name, ok, detail in report.lines:
        print(f"  [{'ok' if ok else 'FAIL'}] {name}  ({detail})")
    writer.write_json("validate.json", report.to_json_dict())
    writer.finalize()
    if report.all_passed:
        print("hypotheses: all satisfied")
        return 0
    if cfg.relaxed:
        print("hypotheses: violations present, continuing (relaxed mode)")
        return 0
    print("hypotheses: violations present")
    return 2


def cmd_norm_check(cfg: ExperimentConfig, writer: OutputWriter) -> int:
    norm = cfg.build_norm()
    rng = np.random.default_rng(cfg.seed)
    report = norm_self_check(norm, rng=rng)
    payload = {
        "kind": norm.kind,
        "dim": norm.dim,
        "euler_first_max": report.euler_first_max,
        "euler_second_max": report.euler_second_max,
        "grad_zero_homogeneity_max": report.grad_zero_homogeneity_max,
        "homogeneity_max": report.homogeneity_max,
        "fd_grad_max": report.fd_grad_max,
        "fd_hess_max": report.fd_hess_max,
        "convexity_violation": report.convexity_violation,
        "passed": report.passed,
    }
    writer.write_json("norm_check.json", payload)
    writer.finalize()
    print(
        f"norm {norm.kind} (dim {norm.dim}): euler {report.euler_first_max:.3e}/"
        f"{report.euler_second_max:.3e}, grad 0-hom {report.grad_zero_homogeneity_max:.3e}, "
        f"fd {report.fd_grad_max:.3e}/{report.fd_hess_max:.3e}"
    )
    print(f"norm check {'passed' if report.passed else 'FAILED'}")
    return 0 if report.passed else 1


def cmd_lf(cfg: ExperimentConfig, writer: OutputWriter) -> int:
    est = uniformity_constant(cfg.build_norm(), resolution=cfg.lf_resolution)
    writer.write_json("lf.json", {
        "value": est.value,
        "grid_resolution": est.grid_resolution,
        "refined": est.refined,
    })
    writer.finalize()
    print(f"l_F = {est.value:.12g} (grid resolution {est.grid_resolution}, refined={est.refined})")
    return 0


def cmd_kappa(cfg: ExperimentConfig, writer: OutputWriter) -> int:
    mesh = cfg.build_mesh()
    exps = cfg.build_exponents()
    est = estimate_kappa(
        mesh, cfg.build_norm(), exps.p, exps.p_star,
        iterations=cfg.kappa_iterations, seed=cfg.seed,
    )
    writer.write_json("kappa.json", {
        "value": est.value,
        "converged": est.converged,
        "n_starts": est.n_starts,
        "iterations_cap": est.iterations_cap,
        "best_start": est.best_start,
        "inflation": cfg.kappa_inflation,
        "inflated_value": est.value * cfg.kappa_inflation,
    })
    writer.finalize()
    print(
        f"kappa = {est.value:.12g} (converged={est.converged}, "
        f"best start {est.best_start}/{est.n_starts}); "
        f"inflated x{cfg.kappa_inflation} -> {est.value * cfg.kappa_inflation:.12g}"
    )
    return 0


def cmd_thresholds(cfg: ExperimentConfig, writer: OutputWriter, sweep: int | None) -> int:
    mesh = cfg.build_mesh()
    report = _run_thresholds(cfg, mesh)
    writer.write_json("thresholds.json", report.to_json_dict())
    writer.write_text("thresholds.csv", _thresholds_csv(report))
    if sweep:
        params = _lambda_params(cfg, report)
        lo = min(report.s_max, report.sigma_star) * 1e-3
        hi = max(report.s_max, report.sigma_star) * 1e3
        s = np.geomspace(lo, hi, sweep)
        vals = lambda_capital(s, params)
        rows = ["s,lambda"]
        rows += [
            f"{format(si, '.17g')},{format(vi, '.17g')}" for si, vi in zip(s, vals)
        ]
        writer.write_text("lambda_curve.csv", "\n".join(rows) + "\n")
    writer.finalize()
    print(
        f"kappa = {report.kappa:.10g} (x{report.kappa_inflation} -> {report.kappa_used:.10g}), "
        f"l_F = {report.l_f:.10g}"
    )
    print(
        f"sigma* = {report.sigma_star:.10g}, s_max = {report.s_max:.10g}, "
        f"lambda* = {report.lambda_star:.10g} (attained at {report.lambda_star_attained_at})"
    )
    return 0


def _solve_common(cfg: ExperimentConfig, writer: OutputWriter):
    """Thresholds (when needed), minimize, artifact emission.

    Returns (spec, solve report, lambda) for downstream verification.
    """
    mesh = cfg.build_mesh()
    need_thresholds = cfg.lam_mode == "auto" or cfg.solver.sigma is None
    report = None
    if need_thresholds:
        report = _run_thresholds(cfg, mesh)
        writer.write_json("thresholds.json", report.to_json_dict())
        writer.write_text("thresholds.csv", _thresholds_csv(report))
    lam = _resolve_lambda(cfg, report)
    spec = cfg.build_problem(lam, mesh=mesh)
    result = minimize(spec, cfg.solver, thresholds=report)
    writer.write_json("solve_report.json", _solve_payload(cfg, result, lam))
    writer.write_text("trace.csv", _trace_csv(result))
    u = FeFunction(mesh, result.coeffs)
    _write_solution(writer, mesh, u, spec.mu.values)
    print(
        f"lambda = {lam:.10g} ({cfg.lam_mode}), sigma = {result.sigma:.10g}, "
        f"iterations = {sum(result.iterations)}"
    )
    print(
        f"J = {result.energy.total:.10g}, min interior u = {result.min_interior:.6g}, "
        f"|u|_W = {result.norm_1p0F:.6g} (ratio {result.interiority_ratio:.4f})"
    )
    weak_rel = result.weak.relative if result.weak else float("nan")
    print(
        f"weak residual rel = {weak_rel:.3e}, nehari = {result.nehari:.3e}, "
        f"converged = {result.converged}"
    )
    return spec, result, lam


def cmd_solve(cfg: ExperimentConfig, writer: OutputWriter) -> int:
    spec, result, _ = _solve_common(cfg, writer)
    writer.finalize()
    return 0 if result.converged else 1


def cmd_verify(cfg: ExperimentConfig, writer: OutputWriter) -> int:
    sol_path = writer.path("solution.csv")
    rep_path = writer.path("solve_report.json")
    if not sol_path.exists() or not rep_path.exists():
        raise ConfigurationError(
            f"verify expects solution.csv and solve_report.json in {writer.dir}"
        )
    with open(rep_path) as fh:
        solve_payload = json.load(fh)
    lam = float(solve_payload["lambda"])
    sigma = float(solve_payload["sigma"])

    mesh = cfg.build_mesh()
    rows = np.loadtxt(sol_path, delimiter=",", skiprows=1)
    if rows.shape[0] != mesh.n_vertices:
        raise ConfigurationError(
            f"solution.csv has {rows.shape[0]} rows, mesh has {mesh.n_vertices} vertices"
        )
    coords, coeffs = rows[:, : mesh.dim], rows[:, mesh.dim]
    if not np.allclose(coords, mesh.vertices, atol=1e-12):
        raise ConfigurationError("solution.csv vertex coordinates do not match the mesh")

    spec = cfg.build_problem(lam, mesh=mesh)
    u = FeFunction(mesh, coeffs)
    record = verify(u, spec, sigma)
    writer.write_json("verify.json", record.to_json_dict())
    writer.finalize()
    _print_verification(record)
    return 0 if record.passed else 1


def cmd_run(cfg: ExperimentConfig, writer: OutputWriter) -> int:
    hyp = validate_hypotheses(cfg)
    writer.write_json("validate.json", hyp.to_json_dict())
    for name, ok, detail in hyp.lines:
        print(f"  [{'ok' if ok else 'FAIL'}] {name}  ({detail})")
    if not hyp.all_passed and not cfg.relaxed:
        writer.finalize()
        print("hypotheses: violations present")
        return 2

    norm = cfg.build_norm()
    ncheck = norm_self_check(norm, rng=np.random.default_rng(cfg.seed))
    writer.write_json("norm_check.json", {
        "kind": norm.kind,
        "passed": ncheck.passed,
        "euler_first_max": ncheck.euler_first_max,
        "fd_grad_max": ncheck.fd_grad_max,
    })
    if not ncheck.passed:
        writer.finalize()
        print("norm self-check FAILED")
        return 1

    spec, result, lam = _solve_common(cfg, writer)
    u = FeFunction(spec.mesh, result.coeffs)
    record = verify(u, spec, result.sigma)
    writer.write_json("verify.json", record.to_json_dict())
    writer.finalize()
    _print_verification(record)
    return 0 if (record.passed and result.converged) else 1


def cmd_sweep_lambda(cfg: ExperimentConfig, writer: OutputWriter) -> int:
    mesh = cfg.build_mesh()
    report = _run_thresholds(cfg, mesh)
    writer.write_json("thresholds.json", report.to_json_dict())
    if cfg.sweep_fractions is not None:
        fractions = list(cfg.sweep_fractions)
    elif cfg.sweep_points == 1:
        fractions = [0.5]
    else:
        fractions = list(np.linspace(0.25, 1.25, cfg.sweep_points))

    rows = [
        "lambda,fraction_of_lambda_star,converged,tolerance_reached,energy,"
        "min_interior,interiority_ratio,weak_relative,nehari,iterations"
    ]
    summary = []
    for frac in fractions:
        lam = frac * report.lambda_star
        spec = cfg.build_problem(lam, mesh=mesh)
        result = minimize(spec, cfg.solver, thresholds=report)
        weak_rel = result.weak.relative if result.weak else float("nan")
        nehari = result.nehari if result.nehari is not None else float("nan")
        rows.append(
            f"{format(lam, '.17g')},{format(frac, '.17g')},"
            f"{int(result.converged)},{int(result.tolerance_reached)},"
            f"{format(result.energy.total, '.17g')},"
            f"{format(result.min_interior, '.17g')},"
            f"{format(result.interiority_ratio, '.17g')},"
            f"{format(weak_rel, '.17g')},{format(nehari, '.17g')},"
            f"{sum(result.iterations)}"
        )
        summary.append({
            "lambda": lam,
            "fraction": frac,
            "converged": result.converged,
            "energy": result.energy.total,
            "min_interior": result.min_interior,
        })
        print(
            f"lambda = {lam:.8g} ({frac:.3g} x lambda*): J = {result.energy.total:.8g}, "
            f"min u = {result.min_interior:.4g}, converged = {result.converged}"
        )
    writer.write_text("lambda_sweep.csv", "\n".join(rows) + "\n")
    writer.write_json("lambda_sweep.json", {"lambda_star": report.lambda_star, "points": summary})
    writer.finalize()
    return 0


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finslerdp",
        description="Singular double phase problems driven by a Minkowski norm.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "validate": "check the standing hypotheses of the problem data",
        "norm-check": "run identity and derivative self-checks on the norm",
        "lf": "estimate the uniformity constant of the norm",
        "kappa": "estimate the discrete Sobolev embedding constant",
        "thresholds": "compute sigma*, s_max and the existence threshold lambda*",
        "solve": "minimize the constrained energy and write the solution",
        "verify": "re-verify a previously written solution directory",
        "run": "full pipeline: validate, norm-check, thresholds, solve, verify",
        "sweep-lambda": "solve across a grid of lambda values",
    }
    for name, help_text in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="TOML experiment file")
        p.add_argument("--out", default=None, help="output directory (default from config)")
        p.add_argument("--seed", type=int, default=None, help="override the RNG seed")
        p.add_argument("--relaxed", action="store_true",
                       help="downgrade hypothesis violations to warnings")
        p.add_argument("--quad-order", type=int, default=None,
                       help="override the quadrature order")
        if name == "thresholds":
            p.add_argument("--sweep", type=int, default=None, metavar="N",
                           help="also write an N-point (s, Lambda(s)) curve")
    return parser


_DISPATCH = {
    "validate": cmd_validate,
    "norm-check": cmd_norm_check,
    "lf": cmd_lf,
    "kappa": cmd_kappa,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "run": cmd_run,
    "sweep-lambda": cmd_sweep_lambda,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, relaxed=args.relaxed)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.quad_order is not None:
            if args.quad_order < 1:
                raise ConfigurationError("--quad-order must be >= 1")
            cfg.quad_order = args.quad_order
        out_dir = Path(args.out) if args.out is not None else Path(cfg.out_dir)
        writer = OutputWriter(out_dir, args.command, cfg.seed)
        if args.command == "thresholds":
            return cmd_thresholds(cfg, writer, args.sweep)
        return _DISPATCH[args.command](cfg, writer)
    except _CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
