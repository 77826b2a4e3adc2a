"""Experiment configuration: TOML parsing, validation, object builders.

A config file is a sectioned key-value document ([mesh], [norm],
[exponents], [problem], [g], [mu], [solver], [thresholds], [quadrature],
[output], [run], [sweep]).  Parsing is strict: missing required keys and
type mismatches raise configuration errors naming the section and key, so a
bad experiment fails before any computation starts.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .errors import ConfigurationError
from .fespace import BoxMesh, build_mesh
from .minkowski import EuclideanNorm, MinkowskiNorm, RandersNorm, RiemannianNorm
from .musielak import DoublePhaseExponents, WeightField
from .energy import GSpec, ProblemSpec
from .solver import SolverConfig

AUTO_LAMBDA = "auto-half-lambda-star"


def _section(data: dict, name: str, required: bool = True) -> dict:
    sec = data.get(name)
    if sec is None:
        if required:
            raise ConfigurationError(f"missing [{name}] section")
        return {}
    if not isinstance(sec, dict):
        raise ConfigurationError(f"[{name}] must be a table")
    return sec


def _get(sec: dict, section: str, key: str, kind, default=None, required: bool = False):
    if key not in sec:
        if required:
            raise ConfigurationError(f"[{section}] {key} is required")
        return default
    value = sec[key]
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return int(value)
    if kind is bool and isinstance(value, bool):
        return value
    if kind is str and isinstance(value, str):
        return value
    if kind is list and isinstance(value, list):
        return value
    raise ConfigurationError(
        f"[{section}] {key} must be of type {kind.__name__}, got {type(value).__name__}"
    )


@dataclass
class ExperimentConfig:
    """Parsed, structurally valid experiment description."""

    dimension: int
    extents: tuple[float, ...]
    subdivisions: tuple[int, ...]
    norm_kind: str
    norm_A: Optional[list] = None
    norm_b: Optional[list] = None
    p: float = 2.0
    q: float = 2.5
    gamma: float = 0.5
    c: float = 1.0
    lam_mode: str = "auto"            # "auto" | "fixed"
    lam_value: Optional[float] = None
    a1: float = 1.0
    a2: float = 1.0
    nu: float = 3.0
    theta: float = 1.5
    c1: Optional[float] = None
    c2: Optional[float] = None
    mu_kind: str = "constant"
    mu_value: float = 0.0
    mu_scale: float = 1.0
    mu_axis: int = 1
    mu_path: Optional[str] = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    kappa_inflation: float = 1.25
    lf_resolution: float = 0.05
    kappa_method: str = "discrete-rayleigh"
    kappa_iterations: int = 1500
    quad_order: int = 4
    out_dir: str = "out"
    seed: int = 0
    relaxed: bool = False
    sweep_points: int = 5
    sweep_fractions: Optional[tuple[float, ...]] = None
    base_dir: Path = field(default_factory=Path)

    # ---------------- builders ----------------

    def build_mesh(self) -> BoxMesh:
        return build_mesh(self.dimension, self.extents, self.subdivisions)

    def build_norm(self) -> MinkowskiNorm:
        if self.norm_kind == "euclidean":
            return EuclideanNorm(self.dimension)
        if self.norm_kind == "riemannian":
            if self.norm_A is None:
                raise ConfigurationError("[norm] A is required for kind = 'riemannian'")
            return RiemannianNorm(np.asarray(self.norm_A, dtype=float))
        if self.norm_kind == "randers":
            if self.norm_A is None or self.norm_b is None:
                raise ConfigurationError("[norm] A and b are required for kind = 'randers'")
            return RandersNorm(np.asarray(self.norm_A, dtype=float), np.asarray(self.norm_b, dtype=float))
        raise ConfigurationError(
            f"[norm] kind must be euclidean, riemannian, or randers; got {self.norm_kind!r}"
        )

    def build_exponents(self) -> DoublePhaseExponents:
        return DoublePhaseExponents(self.p, self.q, self.dimension, relaxed=self.relaxed)

    def build_mu(self, mesh: BoxMesh) -> WeightField:
        if self.mu_kind == "constant":
            values = np.full(mesh.n_vertices, self.mu_value)
        elif self.mu_kind == "dist-boundary":
            d = np.min(
                [np.minimum(mesh.vertices[:, k], mesh.extents[k] - mesh.vertices[:, k])
                 for k in range(mesh.dim)],
                axis=0,
            )
            values = self.mu_scale * d
        elif self.mu_kind == "linear":
            axis = self.mu_axis - 1
            if not 0 <= axis < mesh.dim:
                raise ConfigurationError(
                    f"[mu] axis must be in 1..{mesh.dim}, got {self.mu_axis}"
                )
            values = self.mu_scale * mesh.vertices[:, axis]
        elif self.mu_kind == "csv":
            if not self.mu_path:
                raise ConfigurationError("[mu] path is required for kind = 'csv'")
            values = _read_nodal_csv(self.base_dir / self.mu_path, mesh.n_vertices)
        else:
            raise ConfigurationError(
                f"[mu] kind must be constant, dist-boundary, linear, or csv; got {self.mu_kind!r}"
            )
        return WeightField(mesh, values)

    def build_gspec(self) -> GSpec:
        return GSpec(a1=self.a1, a2=self.a2, nu=self.nu, theta=self.theta, c1=self.c1, c2=self.c2)

    def build_problem(self, lam: float, mesh: Optional[BoxMesh] = None) -> ProblemSpec:
        mesh = mesh if mesh is not None else self.build_mesh()
        return ProblemSpec(
            exps=self.build_exponents(),
            gamma=self.gamma,
            c=self.c,
            lam=lam,
            mu=self.build_mu(mesh),
            g=self.build_gspec(),
            norm=self.build_norm(),
            quad_order=self.quad_order,
        )

    def threshold_kwargs(self) -> dict:
        return {
            "kappa_inflation": self.kappa_inflation,
            "lf_resolution": self.lf_resolution,
            "kappa_method": self.kappa_method,
            "kappa_iterations": self.kappa_iterations,
            "seed": self.seed,
        }


def _read_nodal_csv(path: Path, n_vertices: int) -> np.ndarray:
    if not path.exists():
        raise ConfigurationError(f"[mu] csv file not found: {path}")
    values = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            token = line.split(",")[-1]
            try:
                values.append(float(token))
            except ValueError:
                if values:
                    raise ConfigurationError(f"[mu] bad value {token!r} in {path}")
                # header line
    if len(values) != n_vertices:
        raise ConfigurationError(
            f"[mu] csv has {len(values)} values, mesh has {n_vertices} vertices"
        )
    return np.asarray(values)


def load_config(path, relaxed: bool = False) -> ExperimentConfig:
    """Parse and structurally validate a TOML experiment file."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            data = _toml.load(fh)
    except _toml.TOMLDecodeError as exc:
        raise ConfigurationError(f"config parse error in {path}: {exc}") from exc

    mesh_sec = _section(data, "mesh")
    dimension = _get(mesh_sec, "mesh", "dimension", int, required=True)
    extents = _get(mesh_sec, "mesh", "extents", list, required=True)
    subdivisions = _get(mesh_sec, "mesh", "subdivisions", list, required=True)

    norm_sec = _section(data, "norm", required=False) or {"kind": "euclidean"}
    exp_sec = _section(data, "exponents")
    prob_sec = _section(data, "problem")
    g_sec = _section(data, "g")
    mu_sec = _section(data, "mu", required=False) or {"kind": "constant", "value": 0.0}
    solver_sec = _section(data, "solver", required=False)
    thr_sec = _section(data, "thresholds", required=False)
    quad_sec = _section(data, "quadrature", required=False)
    out_sec = _section(data, "output", required=False)
    run_sec = _section(data, "run", required=False)
    sweep_sec = _section(data, "sweep", required=False)

    lam_raw = prob_sec.get("lambda", AUTO_LAMBDA)
    if isinstance(lam_raw, str):
        if lam_raw != AUTO_LAMBDA:
            raise ConfigurationError(
                f"[problem] lambda must be a number or {AUTO_LAMBDA!r}, got {lam_raw!r}"
            )
        lam_mode, lam_value = "auto", None
    elif isinstance(lam_raw, (int, float)) and not isinstance(lam_raw, bool):
        lam_mode, lam_value = "fixed", float(lam_raw)
    else:
        raise ConfigurationError("[problem] lambda must be a number or the auto string")

    solver_kwargs: dict[str, Any] = {}
    for key, kind in [
        ("sigma", float), ("sigma_fraction", float), ("final_polish", bool),
        ("max_iterations", int), ("polish_max_iterations", int),
        ("armijo_slope", float), ("backtrack", float),
        ("grad_tolerance", float), ("polish_rel_tolerance", float),
        ("initial_step", float),
    ]:
        value = _get(solver_sec, "solver", key, kind)
        if value is not None:
            solver_kwargs[key] = value
    sched = _get(solver_sec, "solver", "epsilon_schedule", list)
    if sched is not None:
        solver_kwargs["epsilon_schedule"] = tuple(float(e) for e in sched)
    tau_scan = _get(solver_sec, "solver", "init_tau_scan", list)
    if tau_scan is not None:
        solver_kwargs["init_tau_scan"] = tuple(float(t) for t in tau_scan)

    cfg = ExperimentConfig(
        dimension=dimension,
        extents=tuple(float(x) for x in extents),
        subdivisions=tuple(int(m) for m in subdivisions),
        norm_kind=_get(norm_sec, "norm", "kind", str, default="euclidean"),
        norm_A=_get(norm_sec, "norm", "A", list),
        norm_b=_get(norm_sec, "norm", "b", list),
        p=_get(exp_sec, "exponents", "p", float, required=True),
        q=_get(exp_sec, "exponents", "q", float, required=True),
        gamma=_get(prob_sec, "problem", "gamma", float, required=True),
        c=_get(prob_sec, "problem", "c", float, required=True),
        lam_mode=lam_mode,
        lam_value=lam_value,
        a1=_get(g_sec, "g", "a1", float, required=True),
        a2=_get(g_sec, "g", "a2", float, required=True),
        nu=_get(g_sec, "g", "nu", float, required=True),
        theta=_get(g_sec, "g", "theta", float, required=True),
        c1=_get(g_sec, "g", "c1", float),
        c2=_get(g_sec, "g", "c2", float),
        mu_kind=_get(mu_sec, "mu", "kind", str, default="constant"),
        mu_value=_get(mu_sec, "mu", "value", float, default=0.0),
        mu_scale=_get(mu_sec, "mu", "scale", float, default=1.0),
        mu_axis=_get(mu_sec, "mu", "axis", int, default=1),
        mu_path=_get(mu_sec, "mu", "path", str),
        solver=SolverConfig(**solver_kwargs),
        kappa_inflation=_get(thr_sec, "thresholds", "kappa_inflation", float, default=1.25),
        lf_resolution=_get(thr_sec, "thresholds", "lf_resolution", float, default=0.05),
        kappa_method=_get(thr_sec, "thresholds", "kappa_method", str, default="discrete-rayleigh"),
        kappa_iterations=_get(thr_sec, "thresholds", "kappa_iterations", int, default=1500),
        quad_order=_get(quad_sec, "quadrature", "order", int, default=4),
        out_dir=_get(out_sec, "output", "directory", str, default="out"),
        seed=_get(run_sec, "run", "seed", int, default=0),
        relaxed=relaxed,
        sweep_points=_get(sweep_sec, "sweep", "n_points", int, default=5),
        sweep_fractions=(
            tuple(float(f) for f in raw_fracs)
            if (raw_fracs := _get(sweep_sec, "sweep", "fractions", list)) is not None
            else None
        ),
        base_dir=path.parent,
    )
    return cfg


# ---------------------------------------------------------------------------
# hypothesis validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HypothesisReport:
    lines: tuple[tuple[str, bool, str], ...]   # (name, passed, detail)
    all_passed: bool

    def to_json_dict(self) -> dict:
        return {
            "checks": [
                {"name": name, "passed": ok, "detail": detail}
                for name, ok, detail in self.lines
            ],
            "all_passed": self.all_passed,
        }


def validate_hypotheses(cfg: ExperimentConfig) -> HypothesisReport:
    """Check the standing structural hypotheses one line at a time."""
    lines: list[tuple[str, bool, str]] = []
    p, q, N = cfg.p, cfg.q, cfg.dimension

    lines.append(("0 < gamma < 1", 0.0 < cfg.gamma < 1.0, f"gamma = {cfg.gamma}"))
    lines.append(("c > 0", cfg.c > 0.0, f"c = {cfg.c}"))
    lines.append(("2 <= p < q < N", 2.0 <= p < q < N, f"p = {p}, q = {q}, N = {N}"))
    lines.append((
        "q/p < 1 + 1/N",
        q / p < 1.0 + 1.0 / N,
        f"q/p = {q / p:.6g} vs 1 + 1/N = {1.0 + 1.0 / N:.6g}",
    ))
    p_star = N * p / (N - p) if p < N else float("inf")
    lines.append((
        "1 < theta < p <= nu < p*",
        1.0 < cfg.theta < p <= cfg.nu < p_star,
        f"theta = {cfg.theta}, nu = {cfg.nu}, p* = {p_star:.6g}",
    ))
    c1 = cfg.c1 if cfg.c1 is not None else cfg.a1
    c2 = cfg.c2 if cfg.c2 is not None else cfg.a2
    lines.append((
        "0 <= a1 <= c1, 0 <= a2 <= c2",
        0.0 <= cfg.a1 <= c1 and 0.0 <= cfg.a2 <= c2,
        f"a = ({cfg.a1}, {cfg.a2}), declared growth = ({c1}, {c2})",
    ))

    mu_ok, mu_detail = True, ""
    try:
        mesh = cfg.build_mesh()
        w = cfg.build_mu(mesh)
        mu_ok = bool(np.all(w.values >= 0.0))
        mu_detail = (
            f"min mu = {w.values.min():.6g}, Lipschitz surrogate = "
            f"{w.lipschitz_surrogate():.6g}"
        )
    except ConfigurationError as exc:
        mu_ok, mu_detail = False, str(exc)
    lines.append(("mu >= 0 and Lipschitz (surrogate)", mu_ok, mu_detail))

    norm_ok, norm_detail = True, f"kind = {cfg.norm_kind}"
    try:
        cfg.build_norm()
    except ConfigurationError as exc:
        norm_ok, norm_detail = False, str(exc)
    except Exception as exc:  # degenerate norm data
        norm_ok, norm_detail = False, str(exc)
    lines.append(("norm is a valid Minkowski norm", norm_ok, norm_detail))

    return HypothesisReport(lines=tuple(lines), all_passed=all(ok for _, ok, _ in lines))
