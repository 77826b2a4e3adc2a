"""The constrained energy, its operator, gradients, and verification residuals.

For a Minkowski norm F, weight mu, exponents (p, q) and parameters
(gamma, c, lambda, g), the energy on zero-trace P1 functions is

    J(u) = int F^p(grad u)/p + mu F^q(grad u)/q
           - (1/p*) int (u+)^{p*} - (c/gamma) int (u+)^gamma
           - lambda int G(u+),

with G the antiderivative of the power-sum nonlinearity g.  The singular
exponent gamma in (0,1) makes J non-differentiable where u vanishes, so the
descent gradient uses the shifted density c (u+ + eps)^{gamma-1} on {u > 0};
the unregularized residuals are only evaluated at functions positive at all
interior vertices, where the shift can be dropped.

Gradient-part quantities are exact per element (F(grad u) is piecewise
constant and mu enters through its exact element integrals); zero-order
terms use the spec's quadrature order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    ConfigurationError,
    NumericalDomainError,
    PositivityViolationError,
    PreconditionError,
)
from .fespace import BoxMesh, FeFunction
from .minkowski import MinkowskiNorm
from .musielak import DoublePhaseExponents, WeightField


@dataclass(frozen=True)
class GSpec:
    """g(s) = a1 s^(nu-1) + a2 s^(theta-1) for s > 0, and 0 for s <= 0.

    c1, c2 are the declared growth constants appearing in the threshold
    formulas; the default g attains the growth bound with equality, so they
    default to a1, a2.  G is the antiderivative with G(0) = 0.
    """

    a1: float
    a2: float
    nu: float
    theta: float
    c1: Optional[float] = None
    c2: Optional[float] = None

    def __post_init__(self):
        if self.a1 < 0.0 or self.a2 < 0.0:
            raise ConfigurationError(f"g coefficients must be >= 0, got a1={self.a1}, a2={self.a2}")
        if not self.theta > 1.0:
            raise ConfigurationError(f"theta must exceed 1, got {self.theta}")
        if not self.nu >= self.theta:
            raise ConfigurationError(f"need theta <= nu, got theta={self.theta}, nu={self.nu}")
        if self.c1 is None:
            object.__setattr__(self, "c1", self.a1)
        if self.c2 is None:
            object.__setattr__(self, "c2", self.a2)
        if self.a1 > self.c1 or self.a2 > self.c2:
            raise ConfigurationError(
                f"growth constants must dominate: a1={self.a1} <= c1={self.c1}, "
                f"a2={self.a2} <= c2={self.c2}"
            )

    def g(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        sp = np.maximum(s, 0.0)
        return self.a1 * sp ** (self.nu - 1.0) + self.a2 * sp ** (self.theta - 1.0)

    def G(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        sp = np.maximum(s, 0.0)
        return self.a1 * sp**self.nu / self.nu + self.a2 * sp**self.theta / self.theta


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Full problem data; validates the standing hypotheses on construction."""

    exps: DoublePhaseExponents
    gamma: float
    c: float
    lam: float
    mu: WeightField
    g: GSpec
    norm: MinkowskiNorm
    quad_order: int = 4

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ConfigurationError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not self.c > 0.0:
            raise ConfigurationError(f"c must be positive, got {self.c}")
        if not np.isfinite(self.lam):
            raise ConfigurationError(f"lambda must be finite, got {self.lam}")
        p, p_star = self.exps.p, self.exps.p_star
        if not (1.0 < self.g.theta < p <= self.g.nu < p_star):
            raise ConfigurationError(
                f"need 1 < theta < p <= nu < p*: theta={self.g.theta}, p={p}, "
                f"nu={self.g.nu}, p*={p_star:.6g}"
            )
        if self.norm.dim != self.mu.mesh.dim:
            raise ConfigurationError(
                f"norm dimension {self.norm.dim} != mesh dimension {self.mu.mesh.dim}"
            )
        if self.quad_order < 1:
            raise ConfigurationError(f"quadrature order must be >= 1, got {self.quad_order}")

    @property
    def mesh(self) -> BoxMesh:
        return self.mu.mesh

    def with_lambda(self, lam: float) -> "ProblemSpec":
        return ProblemSpec(
            exps=self.exps, gamma=self.gamma, c=self.c, lam=lam, mu=self.mu,
            g=self.g, norm=self.norm, quad_order=self.quad_order,
        )


@dataclass(frozen=True)
class EnergyBreakdown:
    """J and its named parts: total = gradient - critical - singular - g.

    i2 bundles the three negative-sign parts; i1 = -(1/q) mu-term + i2.  The
    epsilon used for the singular part is recorded alongside lambda.
    """

    gradient_part: float
    critical_part: float
    singular_part: float
    g_part: float
    total: float
    i1: float
    i2: float
    epsilon: float
    lam: float

    def to_json_dict(self) -> dict:
        return {
            "gradient_part": self.gradient_part,
            "critical_part": self.critical_part,
            "singular_part": self.singular_part,
            "g_part": self.g_part,
            "total": self.total,
            "i1": self.i1,
            "i2": self.i2,
            "epsilon": self.epsilon,
            "lambda": self.lam,
        }


def _check_same_mesh(u: FeFunction, spec: ProblemSpec):
    if u.mesh is not spec.mesh:
        raise ConfigurationError("function does not live on the spec's mesh object")


def energy_J(u: FeFunction, spec: ProblemSpec, eps: float = 0.0) -> EnergyBreakdown:
    """Energy breakdown at u; eps >= 0 shifts the singular density.

    With eps > 0 the singular part integrates (c/gamma)((u+ + eps)^gamma -
    eps^gamma), which is below the true value and decreases pointwise as eps
    grows, so the regularized energies form an upper continuation of J.
    """
    _check_same_mesh(u, spec)
    if eps < 0.0:
        raise PreconditionError(f"eps must be >= 0, got {eps}")
    exps, mesh = spec.exps, spec.mesh

    grads = u.element_gradients()
    fg = spec.norm.eval(grads)
    p_term = float(np.sum(mesh.volumes * fg**exps.p)) / exps.p
    q_term = float(np.sum(spec.mu.element_integrals() * fg**exps.q)) / exps.q
    gradient_part = p_term + q_term

    order = spec.quad_order
    vals = u.element_values(order)
    _, _, wts = mesh.quad_data(order)
    up = np.maximum(vals, 0.0)
    critical_part = float(np.sum(wts * up**exps.p_star)) / exps.p_star
    if eps == 0.0:
        singular_part = spec.c / spec.gamma * float(np.sum(wts * up**spec.gamma))
    else:
        singular_part = spec.c / spec.gamma * float(
            np.sum(wts * ((up + eps) ** spec.gamma - eps**spec.gamma))
        )
    g_part = spec.lam * float(np.sum(wts * spec.g.G(up)))

    parts = {
        "gradient": gradient_part,
        "critical": critical_part,
        "singular": singular_part,
        "g": g_part,
    }
    for name, value in parts.items():
        if not np.isfinite(value):
            raise NumericalDomainError(f"non-finite {name} part of the energy")

    i2 = critical_part + singular_part + g_part
    i1 = -q_term + i2
    total = gradient_part - i2
    return EnergyBreakdown(
        gradient_part=gradient_part,
        critical_part=critical_part,
        singular_part=singular_part,
        g_part=g_part,
        total=total,
        i1=i1,
        i2=i2,
        epsilon=eps,
        lam=spec.lam,
    )


def _operator_vector(u: FeFunction, spec: ProblemSpec) -> np.ndarray:
    """<A(u), phi_i> for every nodal basis function, as a vertex vector.

    Elements with grad u = 0 contribute nothing: F^{p-1} grad F extends
    continuously by 0 there for p >= 2.
    """
    mesh, exps = spec.mesh, spec.exps
    gu = u.element_gradients()
    s = spec.norm.eval(gu)
    nz = s > 0.0
    out = np.zeros(mesh.n_vertices)
    if np.any(nz):
        gradF = spec.norm.grad(gu[nz])
        coef = (
            mesh.volumes[nz] * s[nz] ** (exps.p - 1.0)
            + spec.mu.element_integrals()[nz] * s[nz] ** (exps.q - 1.0)
        )
        per_vertex = np.einsum("e,en,ena->ea", coef, gradF, mesh.grad_mats[nz])
        np.add.at(out, mesh.elements[nz], per_vertex)
    return out


def apply_A(u: FeFunction, phi: FeFunction, spec: ProblemSpec) -> float:
    """<A(u), phi>: the double phase operator paired with a test function."""
    _check_same_mesh(u, spec)
    _check_same_mesh(phi, spec)
    mesh, exps = spec.mesh, spec.exps
    gu = u.element_gradients()
    gphi = phi.element_gradients()
    s = spec.norm.eval(gu)
    nz = s > 0.0
    if not np.any(nz):
        return 0.0
    gradF = spec.norm.grad(gu[nz])
    coef = (
        mesh.volumes[nz] * s[nz] ** (exps.p - 1.0)
        + spec.mu.element_integrals()[nz] * s[nz] ** (exps.q - 1.0)
    )
    return float(np.sum(coef * np.einsum("en,en->e", gradF, gphi[nz])))


def _rhs_vector(u: FeFunction, spec: ProblemSpec, eps: float) -> np.ndarray:
    """int (u+^{p*-1} + c (u+ + eps)^{gamma-1} [u>0] + lambda g(u)) phi_i dx.

    The singular density is gated on {u > 0}: the eps = 0 power is infinite
    at u = 0, but those quadrature points carry no mass in the weak form of
    a positive solution (they only occur where u vanishes identically).
    """
    mesh, exps = spec.mesh, spec.exps
    order = spec.quad_order
    rule, _, wts = mesh.quad_data(order)
    vals = u.element_values(order)
    up = np.maximum(vals, 0.0)

    density = up ** (exps.p_star - 1.0) + spec.lam * spec.g.g(vals)
    pos = vals > 0.0
    singular = np.zeros_like(vals)
    if eps == 0.0:
        singular[pos] = spec.c * vals[pos] ** (spec.gamma - 1.0)
    else:
        singular[pos] = spec.c * (vals[pos] + eps) ** (spec.gamma - 1.0)
    density = density + singular

    per_vertex = np.einsum("eq,qa->ea", wts * density, rule.points)
    out = np.zeros(mesh.n_vertices)
    np.add.at(out, mesh.elements, per_vertex)
    return out


def grad_J(u: FeFunction, spec: ProblemSpec, eps: float) -> np.ndarray:
    """Gradient of the eps-regularized discrete energy over interior vertices.

    Exact derivative of energy_J(., eps) in every coefficient whose function
    values stay away from 0 (the kink set of u+).
    """
    _check_same_mesh(u, spec)
    if eps <= 0.0:
        raise PreconditionError("grad_J requires eps > 0; use weak_residual at eps = 0")
    full = _operator_vector(u, spec) - _rhs_vector(u, spec, eps)
    if not np.all(np.isfinite(full)):
        raise NumericalDomainError("non-finite gradient entry")
    return full[spec.mesh.interior_mask]


@dataclass(frozen=True)
class WeakResidual:
    """Unregularized stationarity residuals over interior basis functions."""

    max_abs: float
    l2: float          # Euclidean norm divided by the interior vertex count
    rhs_max: float     # largest |RHS load| over interior basis functions

    @property
    def relative(self) -> float:
        return self.max_abs / max(self.rhs_max, 1e-300)


def weak_residual(u: FeFunction, spec: ProblemSpec) -> WeakResidual:
    """r_i = <A(u), phi_i> - int (u^{p*-1} + c u^{gamma-1} + lambda g(u)) phi_i.

    Requires u > 0 at every interior vertex so the gamma - 1 power stays
    finite wherever u is not identically zero.
    """
    _check_same_mesh(u, spec)
    interior = spec.mesh.interior_mask
    min_int = float(np.min(u.coeffs[interior]))
    if min_int <= 0.0:
        raise PositivityViolationError(
            f"weak residual needs positive interior values; min is {min_int:.3g}"
        )
    rhs = _rhs_vector(u, spec, eps=0.0)
    r = (_operator_vector(u, spec) - rhs)[interior]
    if not np.all(np.isfinite(r)):
        raise NumericalDomainError("non-finite weak residual entry")
    return WeakResidual(
        max_abs=float(np.max(np.abs(r))),
        l2=float(np.linalg.norm(r)) / max(1, int(np.sum(interior))),
        rhs_max=float(np.max(np.abs(rhs[interior]))),
    )


def nehari_identity_residual(u: FeFunction, spec: ProblemSpec, check_positivity: bool = True) -> float:
    """| rho_{H,F}(u) - int u^{p*} - c int u^gamma - lambda int g(u) u | (relative).

    The identity is the stationarity of J along the ray (1+t)u at t = 0;
    normalization is max(1, rho_{H,F}(u)).
    """
    _check_same_mesh(u, spec)
    mesh, exps = spec.mesh, spec.exps
    interior = mesh.interior_mask
    if check_positivity:
        min_int = float(np.min(u.coeffs[interior]))
        if min_int <= 0.0:
            raise PositivityViolationError(
                f"Nehari identity needs positive interior values; min is {min_int:.3g}"
            )
    grads = u.element_gradients()
    fg = spec.norm.eval(grads)
    rho = float(
        np.sum(mesh.volumes * fg**exps.p)
        + np.sum(spec.mu.element_integrals() * fg**exps.q)
    )
    order = spec.quad_order
    vals = u.element_values(order)
    _, _, wts = mesh.quad_data(order)
    up = np.maximum(vals, 0.0)
    crit = float(np.sum(wts * up**exps.p_star))
    sing = spec.c * float(np.sum(wts * up**spec.gamma))
    gterm = spec.lam * float(np.sum(wts * spec.g.g(vals) * vals))
    return abs(rho - crit - sing - gterm) / max(1.0, rho)


def monotonicity_check(u: FeFunction, v: FeFunction, spec: ProblemSpec) -> float:
    """<A(u) - A(v), u - v>, assembled over interior coefficients.

    Nonnegative up to rounding for any monotone operator; exactly the
    squared H^1-seminorm of u - v in the linear case (Euclidean F, p = 2,
    mu constant 0).
    """
    _check_same_mesh(u, spec)
    _check_same_mesh(v, spec)
    diff = (_operator_vector(u, spec) - _operator_vector(v, spec))[spec.mesh.interior_mask]
    dcoef = (u.coeffs - v.coeffs)[spec.mesh.interior_mask]
    return float(diff @ dcoef)
