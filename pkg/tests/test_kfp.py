import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfgpdi.fem import Mesh1D, assemble_transport, h1_error, h1_seminorm_error, l2_error, load_vector
from mfgpdi.kfp import kfp_matrix, kfp_residual, mesh_peclet, solve_kfp
from mfgpdi.oracles import constant_drift_density, oscillating_drift_density, poisson_limit_density


def test_zero_drift_poisson():
    m, dm = poisson_limit_density(1.0)
    errs = []
    for n in (32, 64, 128):
        mesh = Mesh1D.uniform(0, 1, n)
        errs.append(h1_error(solve_kfp(mesh, 1.0, 0.0, load_vector(mesh, 1.0)), m, dm))
    assert errs[0] / errs[1] > 1.9 and errs[1] / errs[2] > 1.9


@pytest.mark.parametrize("c", [1.0, -1.0, 0.5])
def test_constant_drift_oracle(c):
    m, dm = constant_drift_density(c, 1.0)
    hs, errs = [], []
    for n in (32, 64, 128):
        mesh = Mesh1D.uniform(0, 1, n)
        errs.append(h1_error(solve_kfp(mesh, 1.0, c, load_vector(mesh, 1.0)), m, dm))
        hs.append(1 / n)
    C = errs[0] / hs[0]
    assert all(e <= 1.05 * C * h for e, h in zip(errs, hs))


def test_constant_drift_oracle_solves_ode():
    c, nu = 1.0, 0.7
    m, dm = constant_drift_density(c, nu)
    x = np.linspace(0, 1, 2001)
    d2 = np.gradient(dm(x), x)
    assert abs(m(0.0)) < 1e-15 and abs(m(1.0)) < 1e-15
    assert np.max(np.abs(-nu * d2[5:-5] - c * dm(x[5:-5]) - 1.0)) < 1e-4
    assert np.allclose(np.gradient(m(x), x)[5:-5], dm(x[5:-5]), atol=1e-5)


@pytest.mark.parametrize("j", [4, 16])
def test_oscillating_drift_against_gamma_formula(j):
    m, dm = oscillating_drift_density(j, 1.0)
    mesh = Mesh1D.uniform(0, 1, 400)
    mh = solve_kfp(mesh, 1.0, lambda x: -x * np.cos(j * x), load_vector(mesh, 1.0))
    assert l2_error(mh, m) < 1e-5
    assert h1_seminorm_error(mh, dm) < 1e-2


def test_gamma_oracle_is_a_solution():
    j, nu = 8, 1.0
    m, dm = oscillating_drift_density(j, nu)
    x = np.linspace(0, 1, 4001)
    assert abs(m(0.0)) < 1e-14 and abs(m(1.0)) < 1e-12
    assert np.allclose(np.gradient(m(x), x)[2:-2], dm(x[2:-2]), atol=1e-5)
    # -nu m'' - (m b)' = 1 with b = -x cos(jx): flux nu m' + m b is affine with slope -1
    flux = nu * dm(x) + m(x) * (-x * np.cos(j * x))
    assert np.allclose(np.diff(flux) / np.diff(x), -1.0, atol=1e-6)


def test_adjoint_consistency(rng):
    mesh = Mesh1D(np.concatenate([[0], np.sort(rng.uniform(0, 1, 30)), [1]]))
    drift = lambda x: np.tanh(4 * x - 2)  # noqa: E731
    from mfgpdi.fem import assemble_diffusion
    A = kfp_matrix(mesh, 0.8, drift).toarray()
    hjb_tangent = assemble_diffusion(mesh, 0.8).toarray() + assemble_transport(mesh, drift).toarray()
    assert np.array_equal(A, hjb_tangent.T)


@settings(max_examples=40, deadline=None)
@given(c=st.floats(-1, 1), nu=st.floats(0.05, 2.0), seed=st.integers(0, 10_000))
def test_nonnegative_when_resolved(c, nu, seed):
    rng = np.random.default_rng(seed)
    mesh = Mesh1D.uniform(0, 1, 64)
    if np.max(mesh_peclet(mesh, nu, c)) >= 1:
        return
    g = rng.uniform(0, 2, mesh.n_elements)
    m = solve_kfp(mesh, nu, lambda x: c * np.cos(3 * x), load_vector(mesh, g))
    assert m.info["min_value"] >= -1e-12


def test_stabilization_restores_nonnegativity(caplog):
    # odd element count: plain Galerkin oscillates below zero here
    mesh = Mesh1D.uniform(0, 1, 15)
    src = load_vector(mesh, 1.0)
    with caplog.at_level(logging.WARNING):
        raw = solve_kfp(mesh, 1e-3, -1.0, src)
    assert "Peclet" in caplog.text
    assert raw.info["min_value"] < 0
    stab = solve_kfp(mesh, 1e-3, -1.0, src, stabilize=True)
    assert stab.info["stabilized"] and stab.info["min_value"] >= -1e-12


def test_linearity_in_source(rng):
    mesh = Mesh1D.uniform(0, 1, 50)
    drift = lambda x: 0.9 * np.sin(5 * x)  # noqa: E731
    a, b = rng.normal(size=mesh.n_interior), rng.normal(size=mesh.n_interior)
    ma, mb = solve_kfp(mesh, 1.0, drift, a), solve_kfp(mesh, 1.0, drift, b)
    mab = solve_kfp(mesh, 1.0, drift, a + b)
    assert np.allclose(mab.values, ma.values + mb.values, atol=1e-13)


def test_residual_and_bound():
    mesh = Mesh1D.uniform(0, 1, 40)
    src = load_vector(mesh, 1.0)
    m = solve_kfp(mesh, 1.0, 0.5, src, bound=1.0)
    assert np.linalg.norm(kfp_residual(mesh, 1.0, 0.5, m, src)) < 1e-14
    with pytest.raises(ValueError):
        solve_kfp(mesh, 1.0, 2.0, src, bound=1.0)
