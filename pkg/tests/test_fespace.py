import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finslerdp import (
    ConfigurationError,
    EuclideanNorm,
    FeFunction,
    NumericalDomainError,
    OutOfRangeError,
    build_mesh,
    export_csv,
    export_vtk,
    integrate,
    interpolate,
    lp_norm,
    quadrature_rule,
    w1p0F_norm,
)
from finslerdp.fespace import element_gradient


# ------------------------------------------------------------------ mesh shape

@pytest.mark.parametrize("dim,m,tets_per_cell", [(2, 2, 2), (2, 5, 2), (3, 2, 6), (3, 4, 6)])
def test_mesh_counts(dim, m, tets_per_cell):
    mesh = build_mesh(dim, (1.0,) * dim, (m,) * dim)
    assert mesh.n_vertices == (m + 1) ** dim
    assert mesh.n_elements == tets_per_cell * m**dim
    assert np.sum(mesh.interior_mask) == (m - 1) ** dim


def test_volumes_positive_and_sum_to_box():
    mesh = build_mesh(3, (2.0, 1.0, 0.5), (3, 2, 4))
    assert mesh.volumes.min() > 0.0
    assert np.sum(mesh.volumes) == pytest.approx(1.0, rel=1e-13)
    assert mesh.volume == pytest.approx(1.0, rel=1e-13)


def test_elements_positively_oriented():
    for dim in (2, 3):
        mesh = build_mesh(dim, (1.0,) * dim, (3,) * dim)
        v = mesh.vertices[mesh.elements]
        edges = v[:, 1:, :] - v[:, :1, :]
        dets = np.linalg.det(edges)
        assert dets.min() > 0.0


def test_each_simplex_fits_in_one_cell():
    mesh = build_mesh(3, (1.0, 1.0, 1.0), (4, 4, 4))
    v = mesh.vertices[mesh.elements]
    span = v.max(axis=1) - v.min(axis=1)
    assert np.max(span) <= 0.25 + 1e-14


def test_all_boundary_simplices_exist():
    # Kuhn meshes of the box contain simplices with every vertex on the
    # boundary (two opposite corner cells); downstream code must not assume
    # each element has an interior vertex.
    mesh = build_mesh(3, (1.0, 1.0, 1.0), (2, 2, 2))
    on_boundary = ~mesh.interior_mask
    all_bnd = np.all(on_boundary[mesh.elements], axis=1)
    assert np.any(all_bnd)


def test_build_mesh_validation():
    with pytest.raises(ConfigurationError):
        build_mesh(3, (1.0, 1.0, 1.0), (1, 2, 2))      # needs >= 2 per axis
    with pytest.raises(ConfigurationError):
        build_mesh(4, (1.0,) * 4, (2,) * 4)            # only dims 2 and 3
    with pytest.raises(ConfigurationError):
        build_mesh(2, (1.0, -1.0), (2, 2))
    with pytest.raises(ConfigurationError):
        build_mesh(3, (1.0, 1.0), (2, 2, 2))           # shape mismatch


# ------------------------------------------------------------------ quadrature

@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("order", [1, 2, 4, 7])
def test_quadrature_weights_and_points(dim, order):
    rule = quadrature_rule(dim, order)
    ref_vol = {2: 0.5, 3: 1.0 / 6.0}[dim]
    assert rule.weights.min() > 0.0
    assert np.sum(rule.weights) == pytest.approx(ref_vol, rel=1e-14)
    assert rule.points.shape[1] == dim + 1
    assert rule.points.min() > 0.0                     # strictly interior
    assert np.allclose(rule.points.sum(axis=1), 1.0, atol=1e-14)


def test_quadrature_rule_cached():
    assert quadrature_rule(3, 4) is quadrature_rule(3, 4)


@pytest.mark.parametrize("dim", [2, 3])
def test_monomial_exactness_on_box(dim):
    # order-4 rules use 3 points per conical axis: exact through degree 5
    mesh = build_mesh(dim, (1.0,) * dim, (2,) * dim)
    rng = np.random.default_rng(21)
    for _ in range(20):
        powers = rng.integers(0, 3, dim)
        while powers.sum() > 5:
            powers = rng.integers(0, 3, dim)
        exact = np.prod([1.0 / (a + 1) for a in powers])
        val = integrate(mesh, 4, lambda x, e: np.prod(x**powers, axis=-1))
        assert val == pytest.approx(exact, rel=1e-13)


def test_integrate_rejects_nonfinite_integrand():
    mesh = build_mesh(2, (1.0, 1.0), (2, 2))

    def bad(x, simplex):
        out = np.ones(x.shape[:-1])
        out[simplex == 3] = np.nan
        return out

    with pytest.raises(NumericalDomainError, match="simplex 3"):
        integrate(mesh, 2, bad)


# ------------------------------------------------------------------ functions

def test_interpolate_reproduces_affine_gradient():
    mesh = build_mesh(3, (1.0, 2.0, 1.0), (3, 3, 3))
    a = np.array([0.7, -1.2, 0.4])
    u = interpolate(mesh, lambda x: x @ a + 2.0, zero_trace=False)
    g = u.element_gradients()
    assert np.max(np.abs(g - a)) < 1e-12


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2), st.floats(-3, 3))
@settings(max_examples=50, deadline=None)
def test_affine_interpolation_exact_2d(a, b):
    mesh = build_mesh(2, (1.0, 1.0), (3, 3))
    a = np.asarray(a)
    u = interpolate(mesh, lambda x: x @ a + b, zero_trace=False)
    assert np.allclose(u.coeffs, mesh.vertices @ a + b, atol=1e-12)
    assert np.allclose(u.element_gradients(), a, atol=1e-11)


def test_zero_trace_enforced_and_idempotent(cube2):
    coeffs = np.arange(cube2.n_vertices, dtype=float)
    u = FeFunction(cube2, coeffs)
    assert np.all(u.coeffs[~cube2.interior_mask] == 0.0)
    again = FeFunction(cube2, u.coeffs)
    assert np.array_equal(u.coeffs, again.coeffs)
    free = FeFunction(cube2, coeffs, zero_trace=False)
    assert np.array_equal(free.coeffs, coeffs)


def test_element_values_match_barycentric_mean(cube2):
    u = FeFunction(cube2, np.linspace(0, 1, cube2.n_vertices), zero_trace=False)
    vals = u.element_values(2)
    nodal = u.coeffs[cube2.elements]
    assert vals.min() >= nodal.min() - 1e-14
    assert vals.max() <= nodal.max() + 1e-14


def test_element_gradient_bounds(cube2):
    u = FeFunction(cube2, np.ones(cube2.n_vertices), zero_trace=False)
    g = element_gradient(u, 0)
    assert g.shape == (3,)
    assert np.allclose(g, 0.0)
    with pytest.raises(OutOfRangeError):
        element_gradient(u, cube2.n_elements)


def test_hat_function_local_support(cube2):
    center = int(np.flatnonzero(cube2.interior_mask)[0])
    coeffs = np.zeros(cube2.n_vertices)
    coeffs[center] = 1.0
    u = FeFunction(cube2, coeffs)
    g = u.element_gradients()
    touches = np.any(cube2.elements == center, axis=1)
    assert np.all(np.linalg.norm(g[~touches], axis=1) == 0.0)
    assert np.all(np.linalg.norm(g[touches], axis=1) > 0.0)


# ------------------------------------------------------------------ norms

def test_lp_norm_of_constant():
    mesh = build_mesh(2, (1.0, 1.0), (3, 3))
    u = FeFunction(mesh, np.full(mesh.n_vertices, 0.7), zero_trace=False)
    for r in (1.0, 2.0, 3.5):
        assert lp_norm(u, r) == pytest.approx(0.7, rel=1e-12)


def test_lp_norm_order_guard():
    mesh = build_mesh(2, (1.0, 1.0), (2, 2))
    u = FeFunction(mesh, np.ones(mesh.n_vertices), zero_trace=False)
    with pytest.raises(ConfigurationError):
        lp_norm(u, 6.0, order=2)
    with pytest.raises(OutOfRangeError):
        lp_norm(u, 0.5)


def test_w1p0F_norm_linear_function():
    mesh = build_mesh(3, (1.0, 1.0, 1.0), (2, 2, 2))
    u = interpolate(mesh, lambda x: x[:, 0] if x.ndim > 1 else x[0], zero_trace=False)
    val = w1p0F_norm(u, EuclideanNorm(3), 2.0)
    assert val == pytest.approx(1.0, rel=1e-13)       # |grad u| = 1 on the unit box


# ------------------------------------------------------------------ export

def test_export_csv_and_vtk(tmp_path, cube2):
    u = FeFunction(cube2, np.linspace(0, 1, cube2.n_vertices))
    csv = tmp_path / "f.csv"
    vtk = tmp_path / "f.vtk"
    export_csv(cube2, {"u": u.coeffs}, csv)
    export_vtk(cube2, {"u": u.coeffs}, vtk)

    lines = csv.read_text().splitlines()
    assert lines[0] == "x,y,z,u"
    assert len(lines) == 1 + cube2.n_vertices

    text = vtk.read_text()
    assert text.startswith("# vtk DataFile Version")
    assert "ASCII" in text and "DATASET UNSTRUCTURED_GRID" in text
    assert f"POINTS {cube2.n_vertices}" in text
    assert f"CELLS {cube2.n_elements}" in text
    assert text.count("\n10\n") >= 1 or " 10\n" in text   # tetra cell type

    # deterministic bytes on rewrite
    first = vtk.read_bytes()
    export_vtk(cube2, {"u": u.coeffs}, vtk)
    assert vtk.read_bytes() == first


def test_export_2d_cell_type(tmp_path):
    mesh = build_mesh(2, (1.0, 1.0), (2, 2))
    vtk = tmp_path / "g.vtk"
    export_vtk(mesh, {"u": np.zeros(mesh.n_vertices)}, vtk)
    body = vtk.read_text()
    tail = body.split("CELL_TYPES")[1].split("POINT_DATA")[0].split()
    assert set(tail[1:]) == {"5"}                     # triangles
