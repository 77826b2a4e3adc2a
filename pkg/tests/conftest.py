import numpy as np
import pytest

from finslerdp import (
    DoublePhaseExponents,
    EuclideanNorm,
    GSpec,
    ProblemSpec,
    RandersNorm,
    RiemannianNorm,
    WeightField,
    build_mesh,
)

# SPD matrices used across the geometry tests; mild anisotropy and a
# non-axis-aligned eigenbasis so nothing cancels by accident.
A2 = np.array([[2.0, 0.3], [0.3, 1.0]])
A3 = np.array([
    [1.5, 0.2, 0.0],
    [0.2, 1.0, 0.1],
    [0.0, 0.1, 2.0],
])
B2 = np.array([0.2, -0.1])
B3 = np.array([0.5, 0.0, 0.0])   # the reference drift: |b| = 1/2 against I


@pytest.fixture(scope="session")
def norm_family():
    """Euclidean, two Riemannian, two Randers, spanning dims 2 and 3."""
    return [
        EuclideanNorm(3),
        RiemannianNorm(A2),
        RiemannianNorm(A3),
        RandersNorm(A2, B2),
        RandersNorm(np.eye(3), B3),
    ]


@pytest.fixture(scope="session")
def randers_reference():
    """The fixture norm with the closed-form uniformity constant 1/9."""
    return RandersNorm(np.eye(3), B3)


@pytest.fixture(scope="session")
def cube2():
    return build_mesh(3, (1.0, 1.0, 1.0), (2, 2, 2))


@pytest.fixture(scope="session")
def cube3():
    return build_mesh(3, (1.0, 1.0, 1.0), (3, 3, 3))


@pytest.fixture(scope="session")
def square4():
    return build_mesh(2, (1.0, 1.0), (4, 4))


def default_exponents(relaxed: bool = False) -> DoublePhaseExponents:
    return DoublePhaseExponents(2.0, 2.5, 3, relaxed=relaxed)


def linear_mu(mesh, scale: float = 0.5, axis: int = 0) -> WeightField:
    return WeightField(mesh, scale * mesh.vertices[:, axis])


def make_spec(mesh, lam: float = 1.0, norm=None, mu=None, c: float = 1.0,
              gamma: float = 0.5, quad_order: int = 4) -> ProblemSpec:
    """Default-parameter problem on the given mesh."""
    if norm is None:
        norm = EuclideanNorm(mesh.dim)
    if mu is None:
        mu = linear_mu(mesh)
    return ProblemSpec(
        exps=default_exponents(),
        gamma=gamma,
        c=c,
        lam=lam,
        mu=mu,
        g=GSpec(a1=1.0, a2=1.0, nu=3.0, theta=1.5),
        norm=norm,
        quad_order=quad_order,
    )


def positive_bump(mesh, rng=None, amplitude: float = 0.3):
    """A strictly positive interior vector: bump plus small noise."""
    vals = np.ones(mesh.n_vertices)
    for k in range(mesh.dim):
        vals *= np.sin(np.pi * mesh.vertices[:, k] / mesh.extents[k])
    if rng is not None:
        vals = vals * (1.0 + amplitude * rng.uniform(-1.0, 1.0, mesh.n_vertices))
    return vals
