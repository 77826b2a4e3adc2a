"""Double phase modulars and the Luxemburg norm.

The integrand H(x, t) = t^p + mu(x) t^q defines the modulars

    rho_H(u)   = int |u|^p + mu |u|^q dx,
    rho_{H,F}(u) = int F^p(grad u) + mu F^q(grad u) dx,

whose Luxemburg norms generate the Musielak-Orlicz space and its Sobolev
counterpart.  For P1 functions both modulars decompose as A tau^{-p} +
B tau^{-q} under the scaling u -> u/tau with A, B fixed, so the Luxemburg
norm is the root of a two-term scalar equation; we still locate it by
bisection on the modular residual, which is the quantity with intrinsic
meaning.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import ConfigurationError, NumericalDomainError, OutOfRangeError
from .fespace import BoxMesh, FeFunction


class HypothesisViolationWarning(UserWarning):
    """Emitted when a relaxed-mode parameter set leaves the guaranteed regime."""


@dataclass(frozen=True)
class DoublePhaseExponents:
    """Exponent triple (p, q, N) with the derived critical exponent.

    Strict mode enforces 2 <= p < q < N and q/p < 1 + 1/N; relaxed mode only
    needs 1 < p < q < p*, and warns that the existence guarantees are not
    claimed there.
    """

    p: float
    q: float
    N: int
    relaxed: bool = False

    def __post_init__(self):
        p, q, N = self.p, self.q, self.N
        if not (np.isfinite(p) and np.isfinite(q)) or N < 2:
            raise ConfigurationError(f"bad exponents p={p}, q={q}, N={N}")
        if not 1.0 < p < q:
            raise ConfigurationError(f"need 1 < p < q, got p={p}, q={q}")
        if p >= N:
            raise ConfigurationError(f"need p < N for the critical exponent, got p={p}, N={N}")
        strict_ok = p >= 2.0 and q < N and q / p < 1.0 + 1.0 / N
        if not strict_ok:
            if not self.relaxed:
                raise ConfigurationError(
                    f"exponents p={p}, q={q}, N={N} violate 2 <= p < q < N, q/p < 1 + 1/N "
                    "(pass relaxed=True to proceed without guarantees)"
                )
            warnings.warn(
                f"relaxed exponents p={p}, q={q}, N={N}: outside the regime "
                "2 <= p < q < N, q/p < 1 + 1/N; existence guarantees do not apply",
                HypothesisViolationWarning,
                stacklevel=2,
            )
        if self.p_star <= q:
            raise ConfigurationError(
                f"critical exponent p* = {self.p_star:.6g} must exceed q = {q}"
            )

    @property
    def p_star(self) -> float:
        return self.N * self.p / (self.N - self.p)


@dataclass(frozen=True, eq=False)
class WeightField:
    """Nonnegative P1 nodal weight mu on a mesh.

    Carries the exact per-element integrals (P1 mean times volume) used by
    the gradient modular, and an advisory Lipschitz surrogate: the largest
    nodal difference quotient over mesh edges.
    """

    mesh: BoxMesh
    values: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if len(values) != self.mesh.n_vertices:
            raise ConfigurationError(
                f"weight has {len(values)} values, mesh has {self.mesh.n_vertices} vertices"
            )
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("non-finite weight values")
        if np.any(values < 0.0):
            raise ConfigurationError(f"weight must be >= 0, min is {values.min():.3g}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def element_values(self, order: int) -> np.ndarray:
        """mu at the quadrature points of each simplex (P1 interpolation)."""
        key = ("qvals", order)
        if key not in self._cache:
            rule, _, _ = self.mesh.quad_data(order)
            nodal = self.values[self.mesh.elements]
            self._cache[key] = nodal @ rule.points.T
        return self._cache[key]

    def element_integrals(self) -> np.ndarray:
        """Exact integral of mu over each simplex: volume times nodal mean."""
        if "eint" not in self._cache:
            nodal = self.values[self.mesh.elements]
            self._cache["eint"] = self.mesh.volumes * nodal.mean(axis=1)
        return self._cache["eint"]

    def lipschitz_surrogate(self) -> float:
        """max |mu_i - mu_j| / |x_i - x_j| over mesh edges (advisory only)."""
        if "lip" not in self._cache:
            elems = self.mesh.elements
            pairs = set()
            nv = elems.shape[1]
            for a in range(nv):
                for b in range(a + 1, nv):
                    i, j = elems[:, a], elems[:, b]
                    lo, hi = np.minimum(i, j), np.maximum(i, j)
                    pairs.update(zip(lo.tolist(), hi.tolist()))
            idx = np.array(sorted(pairs))
            dmu = np.abs(self.values[idx[:, 0]] - self.values[idx[:, 1]])
            dx = np.linalg.norm(
                self.mesh.vertices[idx[:, 0]] - self.mesh.vertices[idx[:, 1]], axis=1
            )
            self._cache["lip"] = float(np.max(dmu / dx)) if len(idx) else 0.0
        return self._cache["lip"]


Which = Literal["function", "gradient"]


def _modular_parts(
    u: FeFunction,
    w: WeightField,
    exps: DoublePhaseExponents,
    which: Which,
    norm=None,
    order: int = 4,
) -> tuple[float, float]:
    """(A, B) with rho(u/tau) = A tau^-p + B tau^-q exactly for P1 u."""
    if u.mesh is not w.mesh:
        raise ConfigurationError("function and weight live on different mesh objects")
    if which == "function":
        vals = np.abs(u.element_values(order))
        muv = w.element_values(order)
        _, _, wts = u.mesh.quad_data(order)
        a = float(np.sum(wts * vals**exps.p))
        b = float(np.sum(wts * muv * vals**exps.q))
    elif which == "gradient":
        if norm is None:
            raise ConfigurationError("gradient modular requires a Minkowski norm")
        fg = norm.eval(u.element_gradients())
        a = float(np.sum(u.mesh.volumes * fg**exps.p))
        b = float(np.sum(w.element_integrals() * fg**exps.q))
    else:
        raise ConfigurationError(f"which must be 'function' or 'gradient', got {which!r}")
    return a, b


def modular_rho_H(u: FeFunction, w: WeightField, exps: DoublePhaseExponents, order: int = 4) -> float:
    """rho_H(u) = int (|u|^p + mu |u|^q)."""
    a, b = _modular_parts(u, w, exps, "function", order=order)
    return a + b


def modular_rho_HF(
    u: FeFunction, w: WeightField, exps: DoublePhaseExponents, norm
) -> float:
    """rho_{H,F}(u) = int (F^p(grad u) + mu F^q(grad u)); exact per element."""
    a, b = _modular_parts(u, w, exps, "gradient", norm=norm)
    return a + b


def luxemburg_norm(
    u: FeFunction,
    w: WeightField,
    exps: DoublePhaseExponents,
    which: Which = "function",
    norm=None,
    order: int = 4,
    tol: float = 1e-12,
) -> float:
    """The unique tau > 0 with rho(u/tau) = 1 (0 for u identically 0).

    Bisection on the modular residual; the initial bracket comes from the
    p- and q-homogeneous bounds rho^(1/q) <= tau <= rho^(1/p) (order swapped
    when rho < 1), expanded by doubling if rounding spoils it.
    """
    a, b = _modular_parts(u, w, exps, which, norm=norm, order=order)
    if not (np.isfinite(a) and np.isfinite(b)):
        raise NumericalDomainError("non-finite modular")
    rho = a + b
    if rho == 0.0:
        return 0.0

    def resid(tau: float) -> float:
        return a * tau**-exps.p + b * tau**-exps.q - 1.0

    lo, hi = sorted((rho ** (1.0 / exps.p), rho ** (1.0 / exps.q)))
    for _ in range(200):
        if resid(lo) >= 0.0:
            break
        lo /= 2.0
    else:
        raise NumericalDomainError("Luxemburg bracket failure (lower end)")
    for _ in range(200):
        if resid(hi) <= 0.0:
            break
        hi *= 2.0
    else:
        raise NumericalDomainError("Luxemburg bracket failure (upper end)")

    for _ in range(20000):
        mid = 0.5 * (lo + hi)
        r = resid(mid)
        if abs(r) <= tol:
            return mid
        if r > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-17 * hi:
            break
    r = resid(0.5 * (lo + hi))
    if abs(r) <= 1e-9:
        return 0.5 * (lo + hi)
    raise NumericalDomainError(f"Luxemburg bisection stalled with residual {r:.3e}")


@dataclass(frozen=True)
class ModularRelationsReport:
    """Outcome of the modular-vs-norm consistency relations at one function."""

    luxemburg: float
    modular: float
    sign_ok: bool
    bounds_ok: bool
    normalized_ok: bool
    violations: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return self.sign_ok and self.bounds_ok and self.normalized_ok


def modular_norm_relations_check(
    u: FeFunction,
    w: WeightField,
    exps: DoublePhaseExponents,
    which: Which = "function",
    norm=None,
    order: int = 4,
) -> ModularRelationsReport:
    """Check sign agreement, the two-sided power bounds, and rho(u/||u||) = 1.

    For ||u|| < 1:  ||u||^q <= rho(u) <= ||u||^p, and mirrored exponents for
    ||u|| > 1; rho(u) - 1 and ||u|| - 1 always share their sign.  Violations
    are collected in the report, never raised.
    """
    a, b = _modular_parts(u, w, exps, which, norm=norm, order=order)
    rho = a + b
    lux = luxemburg_norm(u, w, exps, which, norm=norm, order=order)
    violations: list[str] = []

    if rho == 0.0:
        return ModularRelationsReport(lux, rho, True, True, True, ())

    slack = 1e-12 * max(1.0, rho)
    sign_ok = (lux - 1.0) * (rho - 1.0) >= -1e-10 or abs(lux - 1.0) <= 1e-10
    if not sign_ok:
        violations.append(f"sign mismatch: ||u|| = {lux:.6g}, rho = {rho:.6g}")

    p, q = exps.p, exps.q
    if lux < 1.0:
        lo_bound, hi_bound = lux**q, lux**p
    else:
        lo_bound, hi_bound = lux**p, lux**q
    bounds_ok = lo_bound - slack <= rho <= hi_bound + slack
    if not bounds_ok:
        violations.append(
            f"power bounds fail: {lo_bound:.6g} <= rho = {rho:.6g} <= {hi_bound:.6g}"
        )

    rho_normalized = a * lux**-p + b * lux**-q
    normalized_ok = abs(rho_normalized - 1.0) <= 1e-10
    if not normalized_ok:
        violations.append(f"rho(u/||u||) = {rho_normalized!r} differs from 1")

    return ModularRelationsReport(
        luxemburg=lux,
        modular=rho,
        sign_ok=sign_ok,
        bounds_ok=bounds_ok,
        normalized_ok=normalized_ok,
        violations=tuple(violations),
    )
