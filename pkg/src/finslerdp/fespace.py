"""P1 finite elements on simplicial box meshes.

The discrete setting everything else builds on: box domains [0,L_1] x ... x
[0,L_N] (N = 2 or 3) split into squares/cubes and then into simplices by the
Kuhn (Freudenthal) permutation construction, P1 nodal functions with an
enforced zero boundary trace, per-element constant gradients, and conical
product Gauss quadrature on the reference simplex with positive weights.

Kuhn triangulations are self-similar under dyadic refinement: doubling every
subdivision count produces a mesh whose simplices nest inside the coarse
ones, so energies computed on the refined mesh can only improve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import (
    ConfigurationError,
    InvalidInputError,
    NumericalDomainError,
    OutOfRangeError,
)

BOUNDARY_TOL = 1e-12


# ---------------------------------------------------------------------------
# quadrature on the reference simplex
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Conical product rule on the reference simplex.

    ``points`` are barycentric (nq, dim+1), ``weights`` are positive and sum
    to the reference simplex volume 1/dim!.  Exact for polynomials of total
    degree <= order.
    """

    dim: int
    order: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def npoints(self) -> int:
        return len(self.weights)


def _gauss01(n: int):
    x, w = roots_legendre(n)
    return (x + 1.0) / 2.0, w / 2.0


def _jacobi01(n: int, alpha: int):
    # nodes/weights for weight (1-u)^alpha on [0, 1]
    x, w = roots_jacobi(n, alpha, 0.0)
    return (x + 1.0) / 2.0, w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def quadrature_rule(dim: int, order: int) -> QuadratureRule:
    """Gauss conical product rule exact to total degree >= order."""
    if dim not in (2, 3):
        raise ConfigurationError(f"quadrature supports dim 2 or 3, got {dim}")
    if order < 1:
        raise ConfigurationError(f"quadrature order must be >= 1, got {order}")
    n = (order + 2) // 2  # n-point Gauss per axis is exact to degree 2n-1
    if dim == 2:
        u, wu = _jacobi01(n, 1)
        v, wv = _gauss01(n)
        uu, vv = np.meshgrid(u, v, indexing="ij")
        x = uu.ravel()
        y = (vv * (1.0 - uu)).ravel()
        w = np.outer(wu, wv).ravel()
        bary = np.stack([1.0 - x - y, x, y], axis=-1)
    else:
        u, wu = _jacobi01(n, 2)
        v, wv = _jacobi01(n, 1)
        s, ws = _gauss01(n)
        uu, vv, ss = np.meshgrid(u, v, s, indexing="ij")
        x = uu.ravel()
        y = (vv * (1.0 - uu)).ravel()
        z = (ss * (1.0 - uu) * (1.0 - vv)).ravel()
        w = np.einsum("i,j,k->ijk", wu, wv, ws).ravel()
        bary = np.stack([1.0 - x - y - z, x, y, z], axis=-1)
    bary = np.ascontiguousarray(bary)
    bary.flags.writeable = False
    w.flags.writeable = False
    return QuadratureRule(dim=dim, order=order, points=bary, weights=w)


# ---------------------------------------------------------------------------
# meshes
# ---------------------------------------------------------------------------

def _permutations(n: int) -> Iterable[tuple[int, ...]]:
    import itertools

    return itertools.permutations(range(n))


@dataclass(frozen=True, eq=False)
class BoxMesh:
    """Simplicial mesh of a box [0,L_1] x ... x [0,L_N], immutable."""

    dim: int
    extents: tuple[float, ...]
    subdivisions: tuple[int, ...]
    vertices: np.ndarray        # (nv, N)
    elements: np.ndarray        # (ne, N+1) vertex indices, positive orientation
    boundary_mask: np.ndarray   # (nv,) True on the boundary
    volumes: np.ndarray         # (ne,)
    grad_mats: np.ndarray       # (ne, N, N+1): coeffs -> element gradient
    _qcache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    @property
    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask

    def quad_data(self, order: int):
        """(rule, physical points (ne,nq,N), physical weights (ne,nq)), cached."""
        if order not in self._qcache:
            rule = quadrature_rule(self.dim, order)
            verts = self.vertices[self.elements]                  # (ne, N+1, N)
            pts = np.einsum("qa,ean->eqn", rule.points, verts)
            ref_vol = 1.0 / math.factorial(self.dim)
            wts = np.outer(self.volumes / ref_vol, rule.weights)  # (ne, nq)
            pts.flags.writeable = False
            wts.flags.writeable = False
            self._qcache[order] = (rule, pts, wts)
        return self._qcache[order]


def build_mesh(N: int, extents, subdivisions) -> BoxMesh:
    """Kuhn-triangulated box mesh: 2 triangles per square or 6 tets per cube.

    All cells use the same main-diagonal permutation paths, which is what
    makes dyadic refinement produce nested meshes.
    """
    if N not in (2, 3):
        raise ConfigurationError(f"mesh dimension must be 2 or 3, got {N}")
    extents = tuple(float(L) for L in np.atleast_1d(extents))
    subdivisions = tuple(int(m) for m in np.atleast_1d(subdivisions))
    if len(extents) != N or len(subdivisions) != N:
        raise ConfigurationError(
            f"extents/subdivisions must have length {N}, got {len(extents)}/{len(subdivisions)}"
        )
    if any(L <= 0 or not math.isfinite(L) for L in extents):
        raise ConfigurationError(f"extents must be positive, got {extents}")
    if any(m < 2 for m in subdivisions):
        raise ConfigurationError(f"subdivisions must be >= 2 per axis, got {subdivisions}")

    axes = [np.linspace(0.0, extents[k], subdivisions[k] + 1) for k in range(N)]
    grids = np.meshgrid(*axes, indexing="ij")
    vertices = np.stack([g.ravel() for g in grids], axis=-1)
    shape = tuple(m + 1 for m in subdivisions)

    def vid(idx):
        return np.ravel_multi_index(idx, shape)

    # integer corners of every cell
    cell_axes = [np.arange(m) for m in subdivisions]
    corners = np.stack([g.ravel() for g in np.meshgrid(*cell_axes, indexing="ij")], axis=-1)

    elems = []
    for perm in _permutations(N):
        # walk from the cell corner along axis perm[0], perm[1], ...
        path = [corners]
        cur = corners
        for ax in perm:
            step = np.zeros(N, dtype=int)
            step[ax] = 1
            cur = cur + step
            path.append(cur)
        elems.append(np.stack([vid(tuple(p.T)) for p in path], axis=-1))
    elements = np.vstack(elems)

    # orient all simplices positively
    verts = vertices[elements]
    edge = np.transpose(verts[:, 1:] - verts[:, :1], (0, 2, 1))  # columns = edges
    dets = np.linalg.det(edge)
    flip = dets < 0
    elements[flip, -1], elements[flip, -2] = elements[flip, -2], elements[flip, -1].copy()

    verts = vertices[elements]
    ts = np.transpose(verts[:, 1:] - verts[:, :1], (0, 2, 1))
    dets = np.linalg.det(ts)
    volumes = dets / math.factorial(N)
    if np.any(volumes <= 0):
        raise ConfigurationError("degenerate simplex produced by mesh construction")
    if abs(volumes.sum() - np.prod(extents)) > 1e-12 * np.prod(extents):
        raise ConfigurationError("element volumes do not sum to the box volume")

    tinv = np.linalg.inv(ts)
    grads_inner = np.transpose(tinv, (0, 2, 1))                  # (ne, N, N)
    grad0 = -grads_inner.sum(axis=2, keepdims=True)
    grad_mats = np.concatenate([grad0, grads_inner], axis=2)     # (ne, N, N+1)

    boundary = np.zeros(len(vertices), dtype=bool)
    for k in range(N):
        Lk = extents[k]
        boundary |= np.abs(vertices[:, k]) <= BOUNDARY_TOL * max(1.0, Lk)
        boundary |= np.abs(vertices[:, k] - Lk) <= BOUNDARY_TOL * max(1.0, Lk)

    for arr in (vertices, elements, boundary, volumes, grad_mats):
        arr.flags.writeable = False
    return BoxMesh(
        dim=N,
        extents=extents,
        subdivisions=subdivisions,
        vertices=vertices,
        elements=elements,
        boundary_mask=boundary,
        volumes=volumes,
        grad_mats=grad_mats,
    )


# ---------------------------------------------------------------------------
# P1 functions
# ---------------------------------------------------------------------------

class FeFunction:
    """P1 nodal function; boundary coefficients are zeroed unless told not to.

    ``zero_trace=False`` is a test mode for integrating functions that do not
    vanish on the boundary; everything produced by the solver keeps the
    default.  Enforcement is idempotent: re-wrapping the coefficients changes
    nothing.
    """

    def __init__(self, mesh: BoxMesh, coeffs, zero_trace: bool = True, name: str = "u"):
        coeffs = np.array(coeffs, dtype=float).reshape(-1)
        if len(coeffs) != mesh.n_vertices:
            raise InvalidInputError(
                f"coefficient vector has length {len(coeffs)}, mesh has {mesh.n_vertices} vertices"
            )
        if not np.all(np.isfinite(coeffs)):
            raise InvalidInputError("non-finite coefficients")
        if zero_trace:
            coeffs[mesh.boundary_mask] = 0.0
        self.mesh = mesh
        self.coeffs = coeffs
        self.zero_trace = zero_trace
        self.name = name

    def with_coeffs(self, coeffs) -> "FeFunction":
        return FeFunction(self.mesh, coeffs, zero_trace=self.zero_trace, name=self.name)

    def element_gradients(self) -> np.ndarray:
        """Constant gradient per simplex, shape (ne, N)."""
        nodal = self.coeffs[self.mesh.elements]                   # (ne, N+1)
        return np.einsum("enk,ek->en", self.mesh.grad_mats, nodal)

    def element_values(self, order: int) -> np.ndarray:
        """Values at the quadrature points of every simplex, shape (ne, nq)."""
        rule, _, _ = self.mesh.quad_data(order)
        nodal = self.coeffs[self.mesh.elements]
        return nodal @ rule.points.T

    def __mul__(self, a: float) -> "FeFunction":
        return self.with_coeffs(self.coeffs * float(a))

    __rmul__ = __mul__


def interpolate(mesh: BoxMesh, f: Callable[[np.ndarray], np.ndarray], zero_trace: bool = True) -> FeFunction:
    """Nodal interpolant of a vectorized callable f(points (nv,N)) -> (nv,)."""
    vals = np.asarray(f(mesh.vertices), dtype=float)
    return FeFunction(mesh, vals, zero_trace=zero_trace)


def element_gradient(u: FeFunction, simplex: int) -> np.ndarray:
    """Gradient of u on one simplex (exact: the interpolant is affine there)."""
    ne = u.mesh.n_elements
    if not 0 <= simplex < ne:
        raise OutOfRangeError(f"simplex index {simplex} out of range [0, {ne})")
    nodal = u.coeffs[u.mesh.elements[simplex]]
    return u.mesh.grad_mats[simplex] @ nodal


def integrate(mesh: BoxMesh, rule: QuadratureRule | int, integrand) -> float:
    """Sum over simplices of weighted integrand values.

    ``integrand(points, simplex_indices)`` gets flat arrays, points of shape
    (M, N) and the owning simplex index per point, and must return (M,)
    values (scalars broadcast).  Reduction is numpy pairwise summation, so
    the value is deterministic for a fixed mesh and rule.
    """
    order = rule.order if isinstance(rule, QuadratureRule) else int(rule)
    _, pts, wts = mesh.quad_data(order)
    ne, nq, _ = pts.shape
    simplex_ids = np.repeat(np.arange(ne), nq)
    vals = np.asarray(integrand(pts.reshape(ne * nq, -1), simplex_ids), dtype=float)
    vals = np.broadcast_to(vals, (ne * nq,))
    if not np.all(np.isfinite(vals)):
        bad = int(simplex_ids[np.flatnonzero(~np.isfinite(vals))[0]])
        raise NumericalDomainError(f"non-finite integrand value on simplex {bad}")
    return float(np.sum(vals * wts.reshape(-1)))


def w1p0F_norm(u: FeFunction, norm, p: float) -> float:
    """(sum_e vol_e F(grad u|_e)^p)^(1/p) — the gradient p-norm in the norm F.

    Exact for P1 (no quadrature): F(grad u) is piecewise constant.
    """
    if p < 1.0:
        raise OutOfRangeError(f"p must be >= 1, got {p}")
    fvals = norm.eval(u.element_gradients())
    return float(np.sum(u.mesh.volumes * fvals**p) ** (1.0 / p))


def lp_norm(u: FeFunction, r: float, order: int | None = None) -> float:
    """(integral of |u|^r)^(1/r) by per-element quadrature of |u|^r."""
    if r < 1.0:
        raise OutOfRangeError(f"r must be >= 1, got {r}")
    min_order = int(math.ceil(r))
    if order is None:
        order = max(4, min_order)
    elif order < min_order:
        raise ConfigurationError(f"quadrature order {order} < ceil(r) = {min_order}")
    vals = u.element_values(order)
    _, _, wts = u.mesh.quad_data(order)
    return float(np.sum(wts * np.abs(vals) ** r) ** (1.0 / r))


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def export_vtk(mesh: BoxMesh, fields: Mapping[str, np.ndarray], path, title: str = "finslerdp output"):
    """Legacy ASCII VTK unstructured grid with one scalar per point field."""
    cell_type = 5 if mesh.dim == 2 else 10  # VTK_TRIANGLE / VTK_TETRA
    nv, ne = mesh.n_vertices, mesh.n_elements
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {nv} double",
    ]
    coords = mesh.vertices
    if mesh.dim == 2:
        coords = np.column_stack([coords, np.zeros(nv)])
    lines += [" ".join(_fmt(c) for c in row) for row in coords]
    lines.append(f"CELLS {ne} {ne * (mesh.dim + 2)}")
    lines += [
        f"{mesh.dim + 1} " + " ".join(str(i) for i in elem) for elem in mesh.elements
    ]
    lines.append(f"CELL_TYPES {ne}")
    lines += [str(cell_type)] * ne
    lines.append(f"POINT_DATA {nv}")
    for name, values in fields.items():
        values = np.asarray(values, dtype=float).reshape(-1)
        if len(values) != nv:
            raise InvalidInputError(f"field {name!r} has {len(values)} values, mesh has {nv} vertices")
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines += [_fmt(v) for v in values]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def export_csv(mesh: BoxMesh, fields: Mapping[str, np.ndarray], path):
    """CSV of vertex coordinates followed by one column per field."""
    nv = mesh.n_vertices
    names = list(fields)
    cols = [mesh.vertices[:, k] for k in range(mesh.dim)]
    for name in names:
        values = np.asarray(fields[name], dtype=float).reshape(-1)
        if len(values) != nv:
            raise InvalidInputError(f"field {name!r} has {len(values)} values, mesh has {nv} vertices")
        cols.append(values)
    header = ",".join(list("xyz"[: mesh.dim]) + names)
    rows = [",".join(_fmt(c[i]) for c in cols) for i in range(nv)]
    with open(path, "w") as fh:
        fh.write(header + "\n" + "\n".join(rows) + "\n")
