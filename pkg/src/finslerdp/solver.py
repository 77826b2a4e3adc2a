"""Constrained minimization of the energy over a gradient-norm ball.

Projected gradient descent on the interior coefficients with Armijo
backtracking and Barzilai-Borwein step warm starts, run through a decreasing
schedule of singular-term regularizations eps and an optional final stage at
eps = 0 (valid because the discrete energy is smooth at functions that are
positive at every interior vertex, which is where the schedule lands).

The optimizer is only a vehicle: existence-style conclusions are read off
the verification record (negative energy, positive interior values, strict
interiority in the ball, small stationarity residuals), never from the
iteration itself.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .energy import (
    EnergyBreakdown,
    ProblemSpec,
    WeakResidual,
    _operator_vector,
    _rhs_vector,
    energy_J,
    grad_J,
    nehari_identity_residual,
    weak_residual,
)
from .errors import ConfigurationError, PositivityViolationError
from .fespace import FeFunction, w1p0F_norm
from .thresholds import ThresholdReport


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the projected descent; defaults suit the desk-scale meshes.

    sigma = None defers the radius to 0.9 min(s_max, sigma*) from a
    threshold report passed to :func:`minimize`.
    """

    sigma: Optional[float] = None
    sigma_fraction: float = 0.9
    epsilon_schedule: tuple[float, ...] = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
    final_polish: bool = True
    max_iterations: int = 400
    polish_max_iterations: int = 4000
    armijo_slope: float = 1e-4
    backtrack: float = 0.5
    grad_tolerance: float = 1e-7
    polish_rel_tolerance: float = 5e-7
    initial_step: float = 1.0
    init_tau_scan: tuple[float, ...] = field(
        default_factory=lambda: tuple(np.geomspace(1e-4, 10.0, 56))
    )

    def __post_init__(self):
        sched = tuple(float(e) for e in self.epsilon_schedule)
        if len(sched) == 0:
            raise ConfigurationError("epsilon schedule must be nonempty")
        if any(e <= 0.0 for e in sched):
            raise ConfigurationError(f"epsilon schedule must be positive, got {sched}")
        if any(b <= a for a, b in zip(sched[1:], sched[:-1])):
            raise ConfigurationError(f"epsilon schedule must be strictly decreasing, got {sched}")
        if self.sigma is not None and self.sigma <= 0.0:
            raise ConfigurationError(f"sigma must be positive, got {self.sigma}")
        if not 0.0 < self.backtrack < 1.0 or not 0.0 < self.armijo_slope < 1.0:
            raise ConfigurationError("bad line-search parameters")
        object.__setattr__(self, "epsilon_schedule", sched)
        object.__setattr__(self, "init_tau_scan", tuple(float(t) for t in self.init_tau_scan))


def project_to_ball(u: FeFunction, sigma: float, norm, p: float) -> FeFunction:
    """Radial projection onto {||u||_{1,p,0,F} <= sigma}; exact by 1-homogeneity."""
    if sigma <= 0.0:
        raise ConfigurationError(f"sigma must be positive, got {sigma}")
    nrm = w1p0F_norm(u, norm, p)
    if nrm <= sigma:
        return u
    return u * (sigma / nrm)


def initial_guess(spec: ProblemSpec, config: SolverConfig, sigma: Optional[float] = None) -> FeFunction:
    """tau* times the product-of-sines bump, tau* from a feasible J-scan.

    The scan minimizes the first-stage energy over config.init_tau_scan
    restricted to ||tau v|| <= sigma (the boundary tau is always included);
    small tau forces J < 0 through the gamma-term, so a nonnegative best
    energy is reported as a warning rather than an error.
    """
    if sigma is None:
        sigma = config.sigma
    if sigma is None:
        raise ConfigurationError("initial_guess needs a ball radius")
    mesh = spec.mesh
    bump = np.ones(mesh.n_vertices)
    for k in range(mesh.dim):
        bump *= np.sin(np.pi * mesh.vertices[:, k] / mesh.extents[k])
    v = FeFunction(mesh, bump)
    v_norm = w1p0F_norm(v, spec.norm, spec.exps.p)
    tau_max = sigma / v_norm
    taus = sorted({t for t in config.init_tau_scan if t <= tau_max} | {tau_max})
    eps0 = config.epsilon_schedule[0]
    energies = [energy_J(v * t, spec, eps0).total for t in taus]
    k = int(np.argmin(energies))
    if energies[k] > 0.0:
        warnings.warn(
            f"initialization scan found no tau with J <= 0 (best {energies[k]:.3g} "
            f"at tau = {taus[k]:.3g}); descending from there",
            RuntimeWarning,
        )
    return v * taus[k]


@dataclass(frozen=True)
class VerifyLimits:
    """Thresholds a candidate solution must meet in :func:`verify`."""

    interiority_max: float = 0.999
    weak_rel_max: float = 1e-6
    nehari_max: float = 1e-6


@dataclass(frozen=True)
class VerificationRecord:
    min_interior: float
    norm_1p0F: float
    sigma: float
    interiority_ratio: float
    energy: float
    weak: Optional[WeakResidual]
    nehari: Optional[float]
    checks: dict
    passed: bool

    def to_json_dict(self) -> dict:
        d = {
            "min_interior": self.min_interior,
            "norm_1p0F": self.norm_1p0F,
            "sigma": self.sigma,
            "interiority_ratio": self.interiority_ratio,
            "energy": self.energy,
            "weak_max_abs": self.weak.max_abs if self.weak else None,
            "weak_l2": self.weak.l2 if self.weak else None,
            "weak_rhs_max": self.weak.rhs_max if self.weak else None,
            "nehari": self.nehari,
            "checks": dict(self.checks),
            "passed": self.passed,
        }
        return d


def verify(u: FeFunction, spec: ProblemSpec, sigma: float, limits: VerifyLimits = VerifyLimits()) -> VerificationRecord:
    """A posteriori checks: positivity, strict interiority, negative energy,
    weak stationarity, and the ray-stationarity identity.  Pure reporting —
    failures populate the record instead of raising."""
    interior = spec.mesh.interior_mask
    min_interior = float(np.min(u.coeffs[interior]))
    nrm = w1p0F_norm(u, spec.norm, spec.exps.p)
    ratio = nrm / sigma
    energy = energy_J(u, spec, 0.0).total
    weak = nehari = None
    if min_interior > 0.0:
        weak = weak_residual(u, spec)
        nehari = nehari_identity_residual(u, spec)
    checks = {
        "positive_interior": min_interior > 0.0,
        "strict_interiority": ratio <= limits.interiority_max,
        "negative_energy": energy < 0.0,
        "weak_residual": weak is not None and weak.max_abs <= limits.weak_rel_max * weak.rhs_max,
        "nehari_identity": nehari is not None and nehari <= limits.nehari_max,
    }
    return VerificationRecord(
        min_interior=min_interior,
        norm_1p0F=nrm,
        sigma=sigma,
        interiority_ratio=ratio,
        energy=energy,
        weak=weak,
        nehari=nehari,
        checks=checks,
        passed=all(checks.values()),
    )


@dataclass(frozen=True)
class SolveReport:
    coeffs: np.ndarray
    sigma: float
    epsilons: tuple[float, ...]
    iterations: tuple[int, ...]
    grad_map_norm: float
    min_interior: float
    norm_1p0F: float
    interiority_ratio: float
    energy: EnergyBreakdown
    weak: Optional[WeakResidual]
    nehari: Optional[float]
    converged: bool
    tolerance_reached: bool
    trace: tuple  # rows (iteration, epsilon, energy, grad_map_norm, min_interior)

    def to_json_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "epsilons": list(self.epsilons),
            "iterations": list(self.iterations),
            "grad_map_norm": self.grad_map_norm,
            "min_interior": self.min_interior,
            "norm_1p0F": self.norm_1p0F,
            "interiority_ratio": self.interiority_ratio,
            "energy": self.energy.to_json_dict(),
            "weak_max_abs": self.weak.max_abs if self.weak else None,
            "weak_l2": self.weak.l2 if self.weak else None,
            "weak_rhs_max": self.weak.rhs_max if self.weak else None,
            "nehari": self.nehari,
            "converged": self.converged,
            "tolerance_reached": self.tolerance_reached,
        }


def _stage_gradient(u: FeFunction, spec: ProblemSpec, eps: float) -> tuple[np.ndarray, float]:
    """(interior gradient, interior RHS load sup-norm) at regularization eps."""
    interior = spec.mesh.interior_mask
    rhs = _rhs_vector(u, spec, eps)
    g = (_operator_vector(u, spec) - rhs)[interior]
    return g, float(np.max(np.abs(rhs[interior])))


def minimize(
    spec: ProblemSpec,
    config: SolverConfig = SolverConfig(),
    thresholds: Optional[ThresholdReport] = None,
) -> SolveReport:
    """Run the continuation descent and assemble the final report.

    Stage order: the positive epsilon schedule, then (by default) an eps = 0
    polish whose stopping rule targets the unregularized stationarity
    residual relative to the RHS load.  Residuals in the report are always
    evaluated at eps = 0.
    """
    if config.sigma is not None:
        sigma = config.sigma
    elif thresholds is not None:
        sigma = config.sigma_fraction * min(thresholds.s_max, thresholds.sigma_star)
    else:
        raise ConfigurationError("minimize needs config.sigma or a threshold report")

    mesh = spec.mesh
    interior = mesh.interior_mask
    u = initial_guess(spec, config, sigma)
    u = project_to_ball(u, sigma, spec.norm, spec.exps.p)

    stages = list(config.epsilon_schedule) + ([0.0] if config.final_polish else [])
    trace: list[tuple] = []
    iterations: list[int] = []
    grad_map = math.inf
    tolerance_reached = True
    step = config.initial_step
    global_it = 0

    for eps in stages:
        polish = eps == 0.0
        cap = config.polish_max_iterations if polish else config.max_iterations
        n_done = 0
        stage_hit_tol = False
        prev_x = prev_g = None
        j_val = energy_J(u, spec, eps).total
        for _ in range(cap):
            g, rhs_max = _stage_gradient(u, spec, eps)
            gmax = float(np.max(np.abs(g))) if len(g) else 0.0
            if polish:
                if gmax <= config.polish_rel_tolerance * max(rhs_max, 1e-300):
                    stage_hit_tol = True
                    break
            # Barzilai-Borwein warm start for the step length
            x = u.coeffs[interior]
            if prev_x is not None:
                s = x - prev_x
                y = g - prev_g
                sy = float(s @ y)
                if sy > 0.0:
                    step = float(s @ s) / sy
            step = min(max(step, 1e-14), 1e8)
            prev_x, prev_g = x.copy(), g.copy()

            accepted = False
            t = step
            for _ in range(80):
                trial_coeffs = u.coeffs.copy()
                trial_coeffs[interior] = x - t * g
                trial = project_to_ball(
                    u.with_coeffs(trial_coeffs), sigma, spec.norm, spec.exps.p
                )
                diff = trial.coeffs[interior] - x
                dist2 = float(diff @ diff)
                if dist2 == 0.0:
                    break
                j_trial = energy_J(trial, spec, eps).total
                if j_trial <= j_val - config.armijo_slope * dist2 / t:
                    accepted = True
                    break
                t *= config.backtrack
            if not accepted:
                # no descent at line-search resolution: numerically stationary
                grad_map = 0.0 if dist2 == 0.0 else math.sqrt(dist2) / t
                stage_hit_tol = True
                break
            grad_map = math.sqrt(dist2) / t
            u, j_val = trial, j_trial
            n_done += 1
            global_it += 1
            trace.append(
                (global_it, eps, j_val, grad_map, float(np.min(u.coeffs[interior])))
            )
            if not polish and grad_map <= config.grad_tolerance:
                stage_hit_tol = True
                break
        iterations.append(n_done)
        if not stage_hit_tol:
            tolerance_reached = False

    min_interior = float(np.min(u.coeffs[interior]))
    nrm = w1p0F_norm(u, spec.norm, spec.exps.p)
    ratio = nrm / sigma
    breakdown = energy_J(u, spec, 0.0)
    weak = nehari = None
    if min_interior > 0.0:
        try:
            weak = weak_residual(u, spec)
            nehari = nehari_identity_residual(u, spec)
        except PositivityViolationError:  # pragma: no cover - guarded above
            pass
    converged = (
        tolerance_reached
        and min_interior > 0.0
        and ratio < 1.0
        and breakdown.total < 0.0
    )
    return SolveReport(
        coeffs=u.coeffs.copy(),
        sigma=sigma,
        epsilons=tuple(stages),
        iterations=tuple(iterations),
        grad_map_norm=grad_map,
        min_interior=min_interior,
        norm_1p0F=nrm,
        interiority_ratio=ratio,
        energy=breakdown,
        weak=weak,
        nehari=nehari,
        converged=converged,
        tolerance_reached=tolerance_reached,
        trace=tuple(trace),
    )
