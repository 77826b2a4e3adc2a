"""Threshold constants for the existence window.

Four quantities gate the constrained minimization: the discrete Sobolev
embedding constant kappa (largest ||u||_{p*} / ||u||_{1,p,0,F} over nonzero
zero-trace P1 functions), the ball radius

    sigma* = ( (p*/p) l_F^{p/2} / (2^{p-1} kappa^{p*}) )^{1/(p* - p)},

the rational function Lambda(s) whose positive values delimit admissible
lambda, and lambda* = Lambda(min(s_max, sigma*)) with s_max the maximizer
of Lambda.  The discrete kappa estimate is a lower bound for the continuum
constant (the infimum defining 1/kappa is taken over a subspace), so the
formulas consume an inflated kappa_used = kappa * inflation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gamma as _gamma_fn

from .errors import ConfigurationError, OutOfRangeError, ParameterRegimeError
from .fespace import BoxMesh, FeFunction
from .minkowski import MinkowskiNorm, UniformityEstimate, uniformity_constant
from .musielak import DoublePhaseExponents


# ---------------------------------------------------------------------------
# embedding constant
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KappaEstimate:
    value: float
    converged: bool
    n_starts: int
    iterations_cap: int
    best_start: int


def talenti_constant(N: int, p: float) -> float:
    """Sharp constant C with ||u||_{p*} <= C ||grad u||_p on R^N (1 < p < N).

    Any zero-trace function on a bounded domain extends by zero, so this is
    an upper bound for the embedding constant on every domain, Euclidean
    gradient norm.
    """
    if not 1.0 < p < N:
        raise OutOfRangeError(f"need 1 < p < N, got p={p}, N={N}")
    a = 1.0 - 1.0 / p
    body = (
        _gamma_fn(1.0 + N / 2.0) * _gamma_fn(float(N))
        / (_gamma_fn(N / p) * _gamma_fn(1.0 + N - N / p))
    )
    return (
        math.pi ** -0.5
        * N ** (-1.0 / p)
        * ((p - 1.0) / (N - p)) ** a
        * body ** (1.0 / N)
    )


def _lp_power_gradient(u: FeFunction, r: float, order: int) -> np.ndarray:
    """Vertex-vector gradient of int |u|^r dx."""
    mesh = u.mesh
    rule, _, wts = mesh.quad_data(order)
    vals = u.element_values(order)
    density = r * np.abs(vals) ** (r - 1.0) * np.sign(vals)
    per_vertex = np.einsum("eq,qa->ea", wts * density, rule.points)
    out = np.zeros(mesh.n_vertices)
    np.add.at(out, mesh.elements, per_vertex)
    return out


def _grad_power_gradient(u: FeFunction, norm: MinkowskiNorm, p: float) -> np.ndarray:
    """Vertex-vector gradient of sum_e vol_e F^p(grad u)."""
    mesh = u.mesh
    gu = u.element_gradients()
    s = norm.eval(gu)
    nz = s > 0.0
    out = np.zeros(mesh.n_vertices)
    if np.any(nz):
        gradF = norm.grad(gu[nz])
        coef = p * mesh.volumes[nz] * s[nz] ** (p - 1.0)
        per_vertex = np.einsum("e,en,ena->ea", coef, gradF, mesh.grad_mats[nz])
        np.add.at(out, mesh.elements[nz], per_vertex)
    return out


def estimate_kappa(
    mesh: BoxMesh,
    norm: MinkowskiNorm,
    p: float,
    p_star: float,
    iterations: int = 1500,
    tolerance: float = 1e-12,
    n_random_starts: int = 10,
    seed: int = 0,
    order: Optional[int] = None,
) -> KappaEstimate:
    """Maximize the Rayleigh quotient ||u||_{p*} / ||u||_{1,p,0,F}.

    Normalized gradient ascent with backtracking from the centered-bump
    start plus ``n_random_starts`` seeded random starts; the best quotient
    wins, ties broken by the lowest start index.  The quotient is
    0-homogeneous, so iterates are renormalized to unit gradient norm.
    """
    if p >= mesh.dim and p_star <= 0:
        raise ConfigurationError("p must be below the dimension for a finite p*")
    if order is None:
        order = max(4, int(math.ceil(p_star)) + 1)
    interior = mesh.interior_mask
    rng = np.random.default_rng(seed)

    bump = np.ones(mesh.n_vertices)
    for k in range(mesh.dim):
        bump *= np.sin(np.pi * mesh.vertices[:, k] / mesh.extents[k])
    starts = [bump]
    for _ in range(n_random_starts):
        coeffs = np.zeros(mesh.n_vertices)
        coeffs[interior] = rng.uniform(-0.5, 1.0, size=int(np.sum(interior)))
        starts.append(coeffs)

    def quotient(u: FeFunction) -> tuple[float, float, float]:
        fg = norm.eval(u.element_gradients())
        dn = float(np.sum(mesh.volumes * fg**p)) ** (1.0 / p)
        _, _, wts = mesh.quad_data(order)
        nm = float(np.sum(wts * np.abs(u.element_values(order)) ** p_star)) ** (1.0 / p_star)
        return nm / dn, nm, dn

    best = -np.inf
    best_start = -1
    all_converged = True
    for i, coeffs in enumerate(starts):
        u = FeFunction(mesh, coeffs)
        r_val, nm, dn = quotient(u)
        u = u * (1.0 / dn)
        nm, dn = nm / dn, 1.0
        step = 1.0
        converged = False
        for _ in range(iterations):
            g_nm = _lp_power_gradient(u, p_star, order) / (p_star * nm ** (p_star - 1.0))
            g_dn = _grad_power_gradient(u, norm, p) / p   # dn = 1
            g = (g_nm / nm - g_dn)[interior]
            gnorm2 = float(g @ g)
            if gnorm2 <= 1e-28:
                converged = True
                break
            accepted = False
            t = step
            for _ in range(60):
                trial = u.coeffs.copy()
                trial[interior] += t * g
                u_trial = u.with_coeffs(trial)
                r_new, nm_new, dn_new = quotient(u_trial)
                if math.log(r_new) >= math.log(r_val) + 1e-4 * t * gnorm2:
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                converged = True  # no ascent direction left at this scale
                break
            rel_gain = (r_new - r_val) / r_val
            u = u_trial * (1.0 / dn_new)
            r_val, nm, dn = r_new, nm_new / dn_new, 1.0
            step = min(t * 2.0, 1e6)
            if rel_gain <= tolerance:
                converged = True
                break
        if not converged:
            all_converged = False
        if r_val > best:
            best = r_val
            best_start = i

    if not all_converged:
        warnings.warn(
            "kappa estimate hit the iteration cap on at least one start; "
            "returning best value found",
            RuntimeWarning,
        )
    return KappaEstimate(
        value=float(best),
        converged=all_converged,
        n_starts=len(starts),
        iterations_cap=iterations,
        best_start=best_start,
    )


# ---------------------------------------------------------------------------
# closed-form thresholds
# ---------------------------------------------------------------------------

def sigma_star(p: float, p_star: float, l_f: float, kappa: float) -> float:
    """((p*/p) l_F^{p/2} / (2^{p-1} kappa^{p*}))^{1/(p*-p)}."""
    if p <= 0 or p_star <= p or kappa <= 0 or l_f < 0:
        raise OutOfRangeError(
            f"need 0 < p < p*, kappa > 0, l_F >= 0; got p={p}, p*={p_star}, "
            f"kappa={kappa}, l_F={l_f}"
        )
    base = (p_star / p) * l_f ** (p / 2.0) / (2.0 ** (p - 1.0) * kappa**p_star)
    return base ** (1.0 / (p_star - p))


@dataclass(frozen=True)
class LambdaParams:
    """Inputs of the threshold function Lambda."""

    kappa: float
    c: float
    c1: float
    c2: float
    gamma: float
    nu: float
    theta: float
    p: float
    p_star: float
    volume: float

    def __post_init__(self):
        if self.c1 < 0 or self.c2 < 0:
            raise ConfigurationError(f"growth constants must be >= 0, got {self.c1}, {self.c2}")
        if self.c1 == 0.0 and self.c2 == 0.0:
            raise ConfigurationError(
                "Lambda is undefined with c1 = c2 = 0 (degenerate denominator)"
            )
        if self.kappa <= 0 or self.volume <= 0 or self.c <= 0:
            raise ConfigurationError(
                f"kappa, c, volume must be positive; got {self.kappa}, {self.c}, {self.volume}"
            )


def lambda_capital(s, params: LambdaParams):
    """Lambda(s); vectorized over s > 0.

    Lambda(s) = (s^{p-g} - k^{p*} s^{p*-g} - c k^g V^{(p*-g)/p*})
              / (c1 k^nu V^{(p*-nu)/p*} s^{nu-g} + c2 k^th V^{(p*-th)/p*} s^{th-g})

    with g = gamma, k = kappa, V = |Omega|.
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= 0.0):
        raise OutOfRangeError("Lambda is defined for s > 0 only")
    k, V = params.kappa, params.volume
    g, p, ps = params.gamma, params.p, params.p_star
    num = (
        s_arr ** (p - g)
        - k**ps * s_arr ** (ps - g)
        - params.c * k**g * V ** ((ps - g) / ps)
    )
    den = (
        params.c1 * k**params.nu * V ** ((ps - params.nu) / ps) * s_arr ** (params.nu - g)
        + params.c2 * k**params.theta * V ** ((ps - params.theta) / ps) * s_arr ** (params.theta - g)
    )
    out = num / den
    return float(out) if np.isscalar(s) else out


def find_smax(
    params: LambdaParams,
    s_lo: float = 1e-8,
    s_hi: float = 1e8,
    points_per_decade: int = 100,
    rel_tol: float = 1e-10,
) -> tuple[float, float]:
    """Maximize Lambda: log-grid scan for a bracket, then golden section.

    Raises a parameter-regime error when no scanned point has Lambda > 0
    (the guaranteed-existence construction needs a positive window).
    """
    n = int(round(points_per_decade * math.log10(s_hi / s_lo))) + 1
    grid = np.geomspace(s_lo, s_hi, n)
    vals = lambda_capital(grid, params)
    i = int(np.argmax(vals))
    if vals[i] <= 0.0:
        raise ParameterRegimeError(
            f"Lambda has no positive values on [{s_lo:g}, {s_hi:g}] "
            f"({n} log-grid points; max is {vals[i]:.6g} at s = {grid[i]:.6g})"
        )
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, n - 1)]

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1 = lambda_capital(x1, params)
    f2 = lambda_capital(x2, params)
    for _ in range(400):
        if (b - a) <= rel_tol * max(abs(a), abs(b)):
            break
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = lambda_capital(x2, params)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = lambda_capital(x1, params)
    s_max = 0.5 * (a + b)
    return float(s_max), float(lambda_capital(s_max, params))


def lambda_star(params: LambdaParams, sig_star: float, s_max: float) -> tuple[float, str]:
    """Lambda(min(s_max, sigma*)) and which argument attained the min."""
    if sig_star <= 0 or s_max <= 0:
        raise OutOfRangeError(f"need positive inputs, got sigma*={sig_star}, s_max={s_max}")
    attained = "s_max" if s_max <= sig_star else "sigma_star"
    value = float(lambda_capital(min(s_max, sig_star), params))
    if value <= 0.0:
        warnings.warn(
            f"lambda* = {value:.6g} <= 0: the guaranteed interval (0, lambda*) is empty",
            RuntimeWarning,
        )
    return value, attained


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdReport:
    """All threshold constants plus the provenance needed to recompute them."""

    kappa: float
    kappa_method: str                 # "discrete-rayleigh" | "talenti-reference"
    kappa_inflation: float
    kappa_converged: bool
    l_f: float
    l_f_resolution: float
    sigma_star: float
    s_max: float
    lambda_at_smax: float
    lambda_star: float
    lambda_star_attained_at: str
    s0_bracket: tuple[float, float]   # sign change of Lambda past its positive window
    domain_volume: float

    @property
    def kappa_used(self) -> float:
        return self.kappa * self.kappa_inflation

    def to_json_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "kappa_method": self.kappa_method,
            "kappa_inflation": self.kappa_inflation,
            "kappa_used": self.kappa_used,
            "kappa_converged": self.kappa_converged,
            "l_f": self.l_f,
            "l_f_resolution": self.l_f_resolution,
            "sigma_star": self.sigma_star,
            "s_max": self.s_max,
            "lambda_at_smax": self.lambda_at_smax,
            "lambda_star": self.lambda_star,
            "lambda_star_attained_at": self.lambda_star_attained_at,
            "s0_bracket": list(self.s0_bracket),
            "domain_volume": self.domain_volume,
        }


def _positive_window_upper_bracket(params: LambdaParams, s_max: float) -> tuple[float, float]:
    """Bracket the upper sign change of Lambda, scanning outward from s_max."""
    s = s_max
    val = lambda_capital(s, params)
    for _ in range(400):
        s_next = s * 1.05
        v_next = lambda_capital(s_next, params)
        if val > 0.0 >= v_next:
            return (float(s), float(s_next))
        s, val = s_next, v_next
    return (float(s_max), float(s))


def compute_thresholds(
    mesh: BoxMesh,
    norm: MinkowskiNorm,
    exps: DoublePhaseExponents,
    gamma: float,
    c: float,
    g_constants: tuple[float, float, float, float],
    kappa_inflation: float = 1.25,
    lf_resolution: float = 0.05,
    kappa_method: str = "discrete-rayleigh",
    kappa_iterations: int = 1500,
    seed: int = 0,
    lf_estimate: Optional[UniformityEstimate] = None,
) -> ThresholdReport:
    """Run the full threshold computation.

    ``g_constants`` is (c1, c2, nu, theta).  ``lf_estimate`` short-circuits
    the uniformity-constant search when the caller already has one.
    """
    c1, c2, nu, theta = g_constants
    if kappa_inflation < 1.0:
        raise ConfigurationError(
            f"kappa inflation must be >= 1 (estimate is a lower bound), got {kappa_inflation}"
        )
    if lf_estimate is None:
        lf_estimate = uniformity_constant(norm, resolution=lf_resolution)
    l_f = lf_estimate.value

    if kappa_method == "discrete-rayleigh":
        est = estimate_kappa(mesh, norm, exps.p, exps.p_star, iterations=kappa_iterations, seed=seed)
        kappa, kappa_converged = est.value, est.converged
    elif kappa_method == "talenti-reference":
        if norm.kind != "euclidean":
            raise ConfigurationError("the reference constant applies to the Euclidean norm only")
        kappa, kappa_converged = talenti_constant(mesh.dim, exps.p), True
    else:
        raise ConfigurationError(f"unknown kappa method {kappa_method!r}")

    kappa_used = kappa * kappa_inflation
    sig = sigma_star(exps.p, exps.p_star, l_f, kappa_used)
    params = LambdaParams(
        kappa=kappa_used, c=c, c1=c1, c2=c2, gamma=gamma,
        nu=nu, theta=theta, p=exps.p, p_star=exps.p_star, volume=mesh.volume,
    )
    s_max, lam_at_smax = find_smax(params)
    lam_star, attained = lambda_star(params, sig, s_max)
    s0 = _positive_window_upper_bracket(params, s_max)
    return ThresholdReport(
        kappa=kappa,
        kappa_method=kappa_method,
        kappa_inflation=kappa_inflation,
        kappa_converged=kappa_converged,
        l_f=l_f,
        l_f_resolution=lf_estimate.grid_resolution,
        sigma_star=sig,
        s_max=s_max,
        lambda_at_smax=lam_at_smax,
        lambda_star=lam_star,
        lambda_star_attained_at=attained,
        s0_bracket=s0,
        domain_volume=mesh.volume,
    )
