import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfgpdi.errors import SingularMatrix
from mfgpdi.fem import (
    FeFunction,
    Mesh1D,
    Tridiagonal,
    assemble_advection,
    assemble_diffusion,
    assemble_mass,
    assemble_transport,
    h1_error,
    h1_seminorm,
    h1_seminorm_error,
    interpolate,
    l2_error,
    l2_norm,
    load_vector,
    solve_linear,
)
from mfgpdi.oracles import constant_drift_density


def random_mesh(rng, n, a=0.0, b=1.0):
    inner = np.sort(rng.uniform(a, b, n - 1))
    return Mesh1D(np.concatenate([[a], inner, [b]]))


def test_mesh_validation():
    with pytest.raises(ValueError):
        Mesh1D([0.0, 1.0])
    with pytest.raises(ValueError):
        Mesh1D([0.0, 0.5, 0.5, 1.0])


def test_diffusion_stencil():
    A = assemble_diffusion(Mesh1D.uniform(0, 1, 4), 1.0).toarray()
    assert np.all(np.diag(A) == 8.0)
    assert np.all(np.diag(A, 1) == -4.0) and np.all(np.diag(A, -1) == -4.0)
    A2 = assemble_diffusion(Mesh1D.uniform(0, 1, 4), 2.0).toarray()
    assert np.array_equal(A2, 2 * A)
    single = assemble_diffusion(Mesh1D([0.0, 0.5, 1.0]), 1.0).toarray()
    assert single.shape == (1, 1) and single[0, 0] == 4.0


def test_diffusion_rejects_nonpositive_nu():
    with pytest.raises(ValueError):
        assemble_diffusion(Mesh1D.uniform(0, 1, 4), 0.0)


def test_diffusion_is_spd(rng):
    A = assemble_diffusion(random_mesh(rng, 30), 0.7).toarray()
    assert np.allclose(A, A.T)
    assert np.min(np.linalg.eigvalsh(A)) > 0


def test_advection_examples():
    mesh = Mesh1D.uniform(0, 1, 16)
    assert np.all(assemble_advection(mesh, 0.0).toarray() == 0.0)
    A1 = assemble_advection(mesh, 1.0).toarray()
    # columns away from the boundary sum to zero: int phi_j * sum_i phi_i' = 0
    assert np.allclose(A1.sum(axis=0)[1:-1], 0.0, atol=1e-14)
    assert np.allclose(A1.sum(axis=1)[1:-1], 0.0, atol=1e-14)
    # skew structure: zero diagonal, antisymmetric off-diagonals
    assert np.allclose(np.diag(A1), 0.0, atol=1e-14)
    assert np.allclose(A1, -A1.T, atol=1e-14)
    assert np.allclose(assemble_advection(mesh, 3.5).toarray(), 3.5 * A1)


def test_advection_is_transport_transpose(rng):
    mesh = random_mesh(rng, 25)
    drift = lambda x: np.sin(7 * x) - 0.3  # noqa: E731
    adv = assemble_advection(mesh, drift).toarray()
    tra = assemble_transport(mesh, drift).toarray()
    assert np.array_equal(adv, tra.T)


def test_advection_against_dense_quadrature(rng):
    mesh = random_mesh(rng, 6)
    A = assemble_advection(mesh, lambda x: 1.0 + x).toarray()
    # exact integral of (1+x) phi_j phi_i' for P1 hats (quadratic integrand)
    x = mesh.nodes
    n = mesh.n_interior
    ref = np.zeros((n, n))
    fine = np.linspace(x[0], x[-1], 200_001)

    def hat(k):
        return np.interp(fine, x, np.eye(x.size)[k])

    for i in range(n):
        dpsi = np.gradient(hat(i + 1), fine)
        for j in range(n):
            ref[i, j] = np.trapezoid((1 + fine) * hat(j + 1) * dpsi, fine)
    assert np.allclose(A, ref, atol=1e-4)


def test_load_examples():
    mesh = Mesh1D.uniform(0, 1, 8)
    assert np.allclose(load_vector(mesh, 1.0), 1 / 8, atol=0, rtol=1e-15)
    mass = assemble_mass(mesh)
    ones = np.ones(mesh.n_interior)
    # mass @ ones = load(1) except in the rows touching the boundary
    assert np.allclose((mass @ ones)[1:-1], load_vector(mesh, 1.0)[1:-1])


def test_norm_examples():
    mesh = Mesh1D.uniform(0, 1, 512)
    u = interpolate(mesh, lambda x: x * (1 - x) / 2)
    assert abs(l2_norm(u) - 1 / math.sqrt(120)) <= 1e-4
    lin = interpolate(mesh, lambda x: x, bc="free")
    assert h1_seminorm(lin) == pytest.approx(1.0, abs=1e-12)


def test_interpolate_identity_at_nodes(rng):
    mesh = random_mesh(rng, 40)
    f = lambda x: np.sin(np.pi * x) * np.exp(x)  # noqa: E731
    u = interpolate(mesh, f)
    assert np.allclose(u(mesh.nodes), u.values, atol=0)
    assert np.allclose(u.values[1:-1], f(mesh.nodes[1:-1]), atol=0)


def test_interpolate_rejects_nonzero_boundary():
    with pytest.raises(ValueError):
        interpolate(Mesh1D.uniform(0, 1, 8), lambda x: x)


def test_fefunction_invariants():
    mesh = Mesh1D.uniform(0, 1, 4)
    with pytest.raises(ValueError):
        FeFunction(mesh, np.ones(5))
    with pytest.raises(ValueError):
        FeFunction(mesh, np.ones(3), bc="free")
    f = FeFunction(mesh, np.ones(5), bc="free")
    assert f.bc == "free"


def test_thomas_matches_dense(rng):
    n = 50
    A = Tridiagonal(rng.normal(size=n - 1), 4 + rng.random(n), rng.normal(size=n - 1))
    rhs = rng.normal(size=n)
    x = solve_linear(A, rhs)
    assert np.linalg.norm(A @ x - rhs) <= 1e-12 * np.linalg.norm(rhs)
    assert np.allclose(x, np.linalg.solve(A.toarray(), rhs))


def test_thomas_singular():
    A = Tridiagonal(np.array([1.0]), np.array([1.0, 1.0]), np.array([1.0]))
    with pytest.raises(SingularMatrix):
        solve_linear(A, np.ones(2))
    with pytest.raises(SingularMatrix):
        solve_linear(Tridiagonal(np.zeros(0), np.array([0.0]), np.zeros(0)), np.ones(1))


@settings(max_examples=50, deadline=None)
@given(n=st.integers(3, 60), seed=st.integers(0, 2 ** 32 - 1), nu=st.floats(0.1, 5.0))
def test_assembled_diffusion_residual_property(n, seed, nu):
    rng = np.random.default_rng(seed)
    mesh = random_mesh(rng, n)
    if np.min(mesh.h) < 1e-6:
        return
    A = assemble_diffusion(mesh, nu)
    rhs = rng.normal(size=mesh.n_interior)
    x = solve_linear(A, rhs)
    assert np.linalg.norm(A @ x - rhs) <= 1e-12 * np.linalg.norm(rhs) * max(1.0, 1 / np.min(mesh.h))


def test_csv_round_trip(tmp_path):
    mesh = Mesh1D.uniform(-1, 1, 17)
    u = interpolate(mesh, lambda x: np.cos(np.pi * x / 2))
    u.to_csv(tmp_path / "u.csv")
    back = FeFunction.from_csv(tmp_path / "u.csv")
    assert np.array_equal(back.values, u.values)
    assert np.array_equal(back.mesh.nodes, mesh.nodes)
    assert (tmp_path / "u.csv").read_text().splitlines()[0] == "x,value"


def _orders(ns, errs):
    return [math.log(errs[k] / errs[k + 1]) / math.log(ns[k + 1] / ns[k]) for k in range(len(ns) - 1)]


def poisson_errors(ns):
    u = lambda x: np.sin(np.pi * x) * x  # noqa: E731
    du = lambda x: np.pi * np.cos(np.pi * x) * x + np.sin(np.pi * x)  # noqa: E731
    f = lambda x: np.pi ** 2 * np.sin(np.pi * x) * x - 2 * np.pi * np.cos(np.pi * x)  # noqa: E731
    l2, h1 = [], []
    for n in ns:
        mesh = Mesh1D.uniform(0, 1, n)
        uh = FeFunction.from_interior(mesh, solve_linear(assemble_diffusion(mesh, 1.0), load_vector(mesh, f)))
        l2.append(l2_error(uh, u))
        h1.append(h1_seminorm_error(uh, du))
    return l2, h1


def advection_errors(ns, c=1.0, nu=1.0):
    m, dm = constant_drift_density(c, nu)
    l2, h1 = [], []
    for n in ns:
        mesh = Mesh1D.uniform(0, 1, n)
        A = assemble_diffusion(mesh, nu) + assemble_advection(mesh, c)
        mh = FeFunction.from_interior(mesh, solve_linear(A, load_vector(mesh, 1.0)))
        l2.append(l2_error(mh, m))
        h1.append(h1_seminorm_error(mh, dm))
    return l2, h1


NS = [16, 32, 64, 128, 256]


def test_poisson_orders():
    l2, h1 = poisson_errors(NS)
    assert min(_orders(NS, l2)) >= 1.9
    assert min(_orders(NS, h1)) >= 0.95


def test_advection_diffusion_orders():
    l2, h1 = advection_errors(NS)
    assert min(_orders(NS, l2)) >= 1.9
    assert min(_orders(NS, h1)) >= 0.95


def test_h1_error_combines_parts():
    mesh = Mesh1D.uniform(0, 1, 10)
    z = FeFunction.zeros(mesh)
    f = lambda x: np.sin(np.pi * x)  # noqa: E731
    df = lambda x: np.pi * np.cos(np.pi * x)  # noqa: E731
    assert h1_error(z, f, df) == pytest.approx(math.sqrt(0.5 + np.pi ** 2 / 2), rel=1e-6)
