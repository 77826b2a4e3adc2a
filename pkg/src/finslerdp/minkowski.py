"""Minkowski norm geometry.

A Minkowski norm F on R^N is positively 1-homogeneous, smooth away from the
origin, and has a positive definite Hessian of F^2/2 off the origin.  This
module provides concrete norms (Euclidean, Riemannian sqrt(x'Ax), Randers
sqrt(x'Ax) + b.x), their first and second derivatives, the uniformity
constant

    l_F = min { (D^2(F^2/2))(x) y . y  :  F(x) = F(y) = 1 },

and residual checkers for the two convexity inequalities that the constant
controls.  All norm evaluations are vectorized over a leading batch axis.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize as _nm_minimize

from .errors import (
    ConfigurationError,
    DegenerateNormError,
    InvalidInputError,
    OutOfRangeError,
    SingularPointError,
)

# Euclidean lengths below this are treated as the origin.
ORIGIN_TOL = 1e-14


class MinkowskiNorm:
    """Base class: F, grad F, and the Hessian of F^2/2, batched over points.

    Subclasses set ``dim`` and implement the three evaluators for inputs of
    shape (..., dim).  ``grad`` and ``hess_half_sq`` are only defined away
    from the origin; callers are expected to gate zero inputs themselves
    (the public ops in this module raise ``SingularPointError``).
    """

    dim: int
    kind: str = "abstract"

    def eval(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess_half_sq(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class EuclideanNorm(MinkowskiNorm):
    kind = "euclidean"

    def __init__(self, dim: int):
        if dim < 2:
            raise ConfigurationError(f"norm dimension must be >= 2, got {dim}")
        self.dim = dim

    def eval(self, x):
        return np.linalg.norm(x, axis=-1)

    def grad(self, x):
        return x / self.eval(x)[..., None]

    def hess_half_sq(self, x):
        # D^2(|x|^2/2) = I everywhere.
        x = np.asarray(x, dtype=float)
        eye = np.eye(self.dim)
        return np.broadcast_to(eye, x.shape[:-1] + (self.dim, self.dim)).copy()

    def __repr__(self):
        return f"EuclideanNorm(dim={self.dim})"


class RiemannianNorm(MinkowskiNorm):
    """F(x) = sqrt(x' A x) for symmetric positive definite A."""

    kind = "riemannian"

    def __init__(self, A: np.ndarray):
        A = np.asarray(A, dtype=float)
        _require_spd(A)
        self.A = A
        self.dim = A.shape[0]

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        q = np.einsum("...i,ij,...j->...", x, self.A, x)
        return np.sqrt(np.maximum(q, 0.0))

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return (x @ self.A) / self.eval(x)[..., None]

    def hess_half_sq(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.A, x.shape[:-1] + self.A.shape).copy()

    def __repr__(self):
        return f"RiemannianNorm(A={self.A.tolist()})"


@dataclass(frozen=True, eq=False)
class RandersSpec:
    """Validated data (A, b) of a Randers norm sqrt(x'Ax) + b.x.

    Validity requires A symmetric positive definite and b'A^{-1}b < 1;
    otherwise F vanishes (or turns negative) along some ray and is not a
    norm.  Construct through :func:`randers_validate`.
    """

    A: np.ndarray
    b: np.ndarray

    @property
    def drift_size_sq(self) -> float:
        """b' A^{-1} b, the squared validity margin (must be < 1)."""
        return float(self.b @ np.linalg.solve(self.A, self.b))


def randers_validate(A: np.ndarray, b: np.ndarray, sym_tol: float = 1e-12) -> RandersSpec:
    """Validate (A, b) and return a RandersSpec, or raise DegenerateNormError."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"A must be square, got shape {A.shape}")
    if b.shape != (A.shape[0],):
        raise InvalidInputError(f"b has shape {b.shape}, expected ({A.shape[0]},)")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise InvalidInputError("non-finite entries in A or b")
    _require_spd(A, sym_tol=sym_tol)
    drift = float(b @ np.linalg.solve(A, b))
    if drift >= 1.0:
        raise DegenerateNormError(
            f"b'A^-1 b = {drift:.6g} >= 1: F would vanish on a ray"
        )
    return RandersSpec(A=A, b=b)


class RandersNorm(MinkowskiNorm):
    """F(x) = sqrt(x' A x) + b . x with b' A^{-1} b < 1.

    The norm is generally asymmetric: F(-x) != F(x) unless b = 0.
    """

    kind = "randers"

    def __init__(self, A: np.ndarray, b: np.ndarray):
        spec = randers_validate(A, b)
        self.A = spec.A
        self.b = spec.b
        self.dim = spec.A.shape[0]
        self.spec = spec

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        q = np.einsum("...i,ij,...j->...", x, self.A, x)
        return np.sqrt(np.maximum(q, 0.0)) + x @ self.b

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        Ax = x @ self.A
        s = np.sqrt(np.einsum("...i,...i->...", x, Ax))
        return Ax / s[..., None] + self.b

    def hess_half_sq(self, x):
        # D^2(F^2/2) = grad F (x) grad F + F * D^2 F with
        # D^2 F = A/s - (Ax)(Ax)'/s^3,  s = sqrt(x'Ax).
        x = np.asarray(x, dtype=float)
        Ax = x @ self.A
        s = np.sqrt(np.einsum("...i,...i->...", x, Ax))
        f = s + x @ self.b
        g = Ax / s[..., None] + self.b
        outer_g = g[..., :, None] * g[..., None, :]
        hess_f = (
            self.A / s[..., None, None]
            - Ax[..., :, None] * Ax[..., None, :] / (s**3)[..., None, None]
        )
        return outer_g + f[..., None, None] * hess_f

    def __repr__(self):
        return f"RandersNorm(A={self.A.tolist()}, b={self.b.tolist()})"


def _require_spd(A: np.ndarray, sym_tol: float = 1e-12):
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A - A.T)) > sym_tol * scale:
        raise DegenerateNormError("matrix is not symmetric within tolerance")
    eigs = np.linalg.eigvalsh(A)
    if np.min(eigs) <= 0.0:
        raise DegenerateNormError(f"matrix is not positive definite (min eig {np.min(eigs):.3g})")


# ---------------------------------------------------------------------------
# point operations
# ---------------------------------------------------------------------------

def _check_finite(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("input vector has non-finite components")
    return x


def norm_eval(norm: MinkowskiNorm, x) -> np.ndarray:
    """F(x).  x = 0 is allowed and gives 0."""
    x = _check_finite(x)
    return norm.eval(x)


def norm_grad(norm: MinkowskiNorm, x) -> np.ndarray:
    """grad F(x) for x away from the origin (Euclidean norm > 1e-14)."""
    x = _check_finite(x)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r < ORIGIN_TOL):
        raise SingularPointError("gradient of a Minkowski norm is undefined at the origin")
    return norm.grad(x)


def norm_hess_half_sq(norm: MinkowskiNorm, x) -> np.ndarray:
    """Hessian of F^2/2 at x away from the origin."""
    x = _check_finite(x)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r < ORIGIN_TOL):
        raise SingularPointError("Hessian of F^2/2 is undefined at the origin")
    return norm.hess_half_sq(x)


def quasi_distance(norm: MinkowskiNorm, x, y) -> np.ndarray:
    """d_F(x, y) = F(y - x).  Asymmetric in general: d(x,y) != d(y,x)."""
    x = _check_finite(x)
    y = _check_finite(y)
    return norm.eval(y - x)


# ---------------------------------------------------------------------------
# uniformity constant
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UniformityEstimate:
    """Grid/refined estimate of l_F together with its provenance."""

    value: float
    grid_resolution: float
    refined: bool


def _sphere_directions(dim: int, resolution: float) -> np.ndarray:
    """Euclidean unit sphere sample with angular step ``resolution``.

    Grids are anchored at angle 0 so halving the step yields a superset of
    points; the grid minimum is then monotone under refinement.
    """
    if resolution <= 0.0:
        raise ConfigurationError("resolution must be positive")
    if dim == 2:
        a = np.arange(0.0, 2.0 * np.pi, resolution)
        return np.stack([np.cos(a), np.sin(a)], axis=-1)
    if dim == 3:
        thetas = np.arange(0.0, np.pi + 1e-12, resolution)
        phis = np.arange(0.0, 2.0 * np.pi, resolution)
        pts = [np.array([0.0, 0.0, 1.0])]
        for th in thetas:
            st, ct = math.sin(th), math.cos(th)
            if st < 1e-12:
                continue
            block = np.stack([st * np.cos(phis), st * np.sin(phis), np.full_like(phis, ct)], axis=-1)
            pts.append(block.reshape(-1, 3))
        pts.append(np.array([0.0, 0.0, -1.0]))
        return np.vstack([np.atleast_2d(p) for p in pts])
    raise ConfigurationError(f"uniformity constant supports dim 2 or 3, got {dim}")


def _angles_to_dir(dim: int, a: np.ndarray) -> np.ndarray:
    if dim == 2:
        return np.array([math.cos(a[0]), math.sin(a[0])])
    th, ph = a
    return np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)])


def _dir_to_angles(dim: int, v: np.ndarray) -> np.ndarray:
    if dim == 2:
        return np.array([math.atan2(v[1], v[0])])
    v = v / np.linalg.norm(v)
    return np.array([math.acos(np.clip(v[2], -1.0, 1.0)), math.atan2(v[1], v[0])])


def uniformity_constant(
    norm: MinkowskiNorm,
    resolution: float = 0.05,
    refine: bool = True,
    refine_maxiter: int = 200,
    block: int = 512,
) -> UniformityEstimate:
    """Estimate l_F = min over F-unit vectors x, y of (D^2(F^2/2))(x) y . y.

    Both spheres are parametrized by radial projection z -> z/F(z) of a
    Euclidean sphere grid.  The Hessian of F^2/2 is 0-homogeneous, so the
    projection only matters on the y side, where the quadratic form is
    divided by F(y)^2.  The product-grid minimum is polished by Nelder-Mead
    in the spherical angles; the result is clamped to [0, 1].
    """
    dim = norm.dim
    dirs = _sphere_directions(dim, resolution)
    if len(dirs) < 8:
        raise ConfigurationError(
            f"resolution {resolution} gives only {len(dirs)} sphere points (< 8)"
        )
    fvals = norm.eval(dirs)
    x_sphere = dirs / fvals[:, None]           # F(x) = 1
    y_sphere = dirs / fvals[:, None]
    hess = norm.hess_half_sq(x_sphere)         # (nx, N, N)

    best = np.inf
    best_ix = best_iy = 0
    for lo in range(0, len(x_sphere), block):
        hi = min(lo + block, len(x_sphere))
        vals = np.einsum("xab,ya,yb->xy", hess[lo:hi], y_sphere, y_sphere)
        k = int(np.argmin(vals))
        ix, iy = divmod(k, vals.shape[1])
        if vals[ix, iy] < best:
            best = float(vals[ix, iy])
            best_ix, best_iy = lo + ix, iy

    refined = False
    if refine:
        def objective(params):
            ax, ay = params[: dim - 1], params[dim - 1:]
            x = _angles_to_dir(dim, ax)
            y = _angles_to_dir(dim, ay)
            hx = norm.hess_half_sq(x / norm.eval(x))
            fy = norm.eval(y)
            return float(y @ hx @ y) / (fy * fy)

        a0 = np.concatenate([
            _dir_to_angles(dim, dirs[best_ix]),
            _dir_to_angles(dim, dirs[best_iy]),
        ])
        res = _nm_minimize(
            objective,
            a0,
            method="Nelder-Mead",
            options={"maxiter": refine_maxiter, "xatol": 1e-13, "fatol": 1e-15},
        )
        best = min(best, float(res.fun))
        refined = True

    value = best
    if value < -1e-6 or value > 1.0 + 1e-6:
        warnings.warn(
            f"uniformity estimate {value!r} clamped to [0, 1] by more than 1e-6",
            RuntimeWarning,
        )
    value = min(max(value, 0.0), 1.0)
    return UniformityEstimate(value=value, grid_resolution=resolution, refined=refined)


# ---------------------------------------------------------------------------
# inequality residuals
# ---------------------------------------------------------------------------

def lindqvist_check(norm: MinkowskiNorm, xi, beta, r, l_f: float) -> np.ndarray:
    """LHS - RHS of the power convexity inequality

        F^r(beta) >= F^r(xi) + r F^{r-1}(xi) grad F(xi).(beta - xi)
                     + l_F^{r/2} / 2^{r-1} * F^r(beta - xi),

    valid for r >= 2.  A nonnegative residual (up to rounding) certifies the
    inequality at (xi, beta).  Batched over leading axes; xi = 0 rows use the
    continuous extension (their gradient term is 0).
    """
    xi = _check_finite(xi)
    beta = _check_finite(beta)
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 2.0):
        raise OutOfRangeError("the inequality requires r >= 2")
    if not (0.0 <= l_f <= 1.0):
        raise OutOfRangeError(f"l_F must lie in [0, 1], got {l_f}")

    f_beta = norm.eval(beta)
    f_xi = norm.eval(xi)
    f_diff = norm.eval(beta - xi)

    xi_len = np.linalg.norm(xi, axis=-1)
    safe = xi_len >= ORIGIN_TOL
    grad_term = np.zeros(np.broadcast_shapes(f_xi.shape, r_arr.shape))
    if np.any(safe):
        xi_safe = np.where(safe[..., None], xi, 1.0)
        g = norm.grad(xi_safe)
        dot = np.einsum("...i,...i->...", g, beta - xi)
        term = r_arr * f_xi ** (r_arr - 1.0) * dot
        grad_term = np.where(safe, term, 0.0)

    remainder = (l_f ** (r_arr / 2.0)) / (2.0 ** (r_arr - 1.0)) * f_diff**r_arr
    return f_beta**r_arr - (f_xi**r_arr + grad_term + remainder)


def parallelogram_check(norm: MinkowskiNorm, xi, beta, t, l_f: float) -> np.ndarray:
    """RHS - LHS of the uniform convexity bound for F^2:

        F^2(t xi + (1-t) beta) <= t F^2(xi) + (1-t) F^2(beta)
                                  - l_F t (1-t) F^2(beta - xi),

    for t in [0, 1].  Nonnegative residual = inequality holds.  For the
    Euclidean norm and l_F = 1 the residual vanishes identically (the
    parallelogram identity).
    """
    xi = _check_finite(xi)
    beta = _check_finite(beta)
    t_arr = np.asarray(t, dtype=float)
    if np.any((t_arr < 0.0) | (t_arr > 1.0)):
        raise OutOfRangeError("t must lie in [0, 1]")

    f2_xi = norm.eval(xi) ** 2
    f2_beta = norm.eval(beta) ** 2
    f2_diff = norm.eval(beta - xi) ** 2
    mid = t_arr[..., None] * xi + (1.0 - t_arr[..., None]) * beta
    f2_mid = norm.eval(mid) ** 2
    rhs = t_arr * f2_xi + (1.0 - t_arr) * f2_beta - l_f * t_arr * (1.0 - t_arr) * f2_diff
    return rhs - f2_mid


# ---------------------------------------------------------------------------
# runtime smoothness surrogate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormCheckReport:
    euler_first_max: float
    euler_second_max: float
    grad_zero_homogeneity_max: float
    homogeneity_max: float
    fd_grad_max: float
    fd_hess_max: float
    convexity_violation: float
    passed: bool


def norm_self_check(
    norm: MinkowskiNorm,
    n_points: int = 1000,
    rng: np.random.Generator | None = None,
    fd_step: float = 1e-5,
) -> NormCheckReport:
    """Sample-based consistency check of a norm implementation.

    Verifies Euler's identities, homogeneity of F and grad F, convexity, and
    that finite differences of F (resp. of grad(F^2/2)) reproduce grad
    (resp. hess_half_sq).  This is the acceptance gate for user-supplied
    norms, standing in for smoothness assumptions that cannot be certified
    at runtime.
    """
    rng = rng or np.random.default_rng(0)
    dim = norm.dim
    x = rng.uniform(-2.0, 2.0, size=(n_points, dim))
    lens = np.linalg.norm(x, axis=-1)
    x = x[lens > 0.3]
    f = norm.eval(x)
    g = norm.grad(x)
    h = norm.hess_half_sq(x)

    euler1 = np.max(np.abs(np.einsum("ki,ki->k", x, g) - f) / f)
    quad = np.einsum("ki,kij,kj->k", x, h, x)
    euler2 = np.max(np.abs(quad - f**2) / f**2)

    t = rng.uniform(0.1, 10.0, size=len(x))
    hom = np.max(np.abs(norm.eval(t[:, None] * x) - t * f) / (t * f))
    ghom = np.max(np.abs(norm.grad(t[:, None] * x) - g))

    # central differences of F -> grad, and of grad(F^2/2) = F grad F -> hess
    fd_g = np.empty_like(g)
    fd_h = np.empty_like(h)
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = fd_step
        fp, fm = norm.eval(x + e), norm.eval(x - e)
        fd_g[:, j] = (fp - fm) / (2.0 * fd_step)
        gp = norm.eval(x + e)[:, None] * norm.grad(x + e)
        gm = norm.eval(x - e)[:, None] * norm.grad(x - e)
        fd_h[:, :, j] = (gp - gm) / (2.0 * fd_step)
    fd_grad_max = float(np.max(np.abs(fd_g - g)) / max(1.0, float(np.max(np.abs(g)))))
    fd_hess_max = float(np.max(np.abs(fd_h - h)) / max(1.0, float(np.max(np.abs(h)))))

    y = rng.uniform(-2.0, 2.0, size=x.shape)
    lam = rng.uniform(0.0, 1.0, size=len(x))
    conv = norm.eval(lam[:, None] * x + (1 - lam[:, None]) * y) - (
        lam * norm.eval(x) + (1 - lam) * norm.eval(y)
    )
    convexity_violation = float(np.max(conv))

    passed = (
        euler1 <= 1e-10
        and euler2 <= 1e-8
        and hom <= 1e-11
        and ghom <= 1e-9
        and fd_grad_max <= 1e-6
        and fd_hess_max <= 1e-5
        and convexity_violation <= 1e-12
    )
    return NormCheckReport(
        euler_first_max=float(euler1),
        euler_second_max=float(euler2),
        grad_zero_homogeneity_max=float(ghom),
        homogeneity_max=float(hom),
        fd_grad_max=fd_grad_max,
        fd_hess_max=fd_hess_max,
        convexity_violation=convexity_violation,
        passed=passed,
    )
