import numpy as np
import pytest

from mfgpdi.coupling import (
    _random_density,
    apply_coupling,
    dual_norm,
    identity_coupling,
    nonmono_ex33_coupling,
    parse_coupling,
    scaled_coupling,
    test_monotonicity as monotonicity_report,
    zero_coupling,
)
from mfgpdi.errors import MeshMismatch
from mfgpdi.fem import Mesh1D, interpolate, l2_norm, load_vector
from mfgpdi.oracles import ex33_pairs


@pytest.fixture
def mesh():
    return Mesh1D.uniform(0, 1, 64)


@pytest.fixture
def ex_mesh():
    return Mesh1D.uniform(-1, 1, 128)


def test_zero(mesh):
    m = interpolate(mesh, lambda x: np.sin(np.pi * x))
    assert np.all(apply_coupling(zero_coupling(), m) == 0.0)


def test_identity_is_load_of_m(mesh):
    m = interpolate(mesh, lambda x: x * (1 - x) / 2)
    assert np.allclose(identity_coupling().apply(m), load_vector(mesh, m), rtol=0, atol=0)
    # 2-point Gauss is exact for the P1 x P1 product
    dense = load_vector(mesh, lambda x: x * (1 - x) / 2)
    assert np.max(np.abs(identity_coupling().apply(m) - dense)) < 1e-6


def test_scaled(mesh):
    m = interpolate(mesh, lambda x: np.sin(np.pi * x))
    assert np.allclose(scaled_coupling(2.5).apply(m), 2.5 * identity_coupling().apply(m))
    assert scaled_coupling(-1.0).strong_mono_c_F is None


def test_nonmono_at_first_exact_density(ex_mesh):
    first, second = ex33_pairs()
    F = nonmono_ex33_coupling(ex_mesh)
    out = F.apply(interpolate(ex_mesh, first.m))
    assert np.allclose(out, load_vector(ex_mesh, lambda x: x * x / 2 + 1), atol=1e-15)
    out2 = F.apply(interpolate(ex_mesh, second.m))
    assert np.allclose(out2, load_vector(ex_mesh, lambda x: x * x / 2 - 1), atol=1e-15)


def test_mesh_mismatch(ex_mesh):
    F = nonmono_ex33_coupling(ex_mesh)
    with pytest.raises(MeshMismatch):
        F.apply(interpolate(Mesh1D.uniform(-1, 1, 64), ex33_pairs()[0].m))


def test_monotonicity_reports(mesh, ex_mesh):
    assert monotonicity_report(identity_coupling(), 100, mesh)["min_quotient"] >= 1 - 1e-10
    assert monotonicity_report(zero_coupling(), 20, mesh)["min_quotient"] == 0.0
    F = nonmono_ex33_coupling(ex_mesh)
    pair = (F.params["m1"], F.params["m2"])
    rep = monotonicity_report(F, 1000, extra_pairs=[pair])
    assert rep["trials"] == 1001
    assert rep["min_quotient"] < 0


def test_nonmono_quotient_at_exact_pair(ex_mesh):
    # F[m1] - F[m2] = 2 and m1 <= m2 pointwise, so the pairing is negative
    F = nonmono_ex33_coupling(ex_mesh)
    m1, m2 = F.params["m1"], F.params["m2"]
    assert np.all(m1.values <= m2.values)
    num = (F.apply(m1) - F.apply(m2)) @ (m1 - m2).interior
    assert num < 0


def test_monotonicity_needs_trials(mesh):
    with pytest.raises(ValueError):
        monotonicity_report(identity_coupling(), 0, mesh)


@pytest.mark.parametrize("tag", ["zero", "identity", "scaled:3", "nonmono33"])
def test_growth_bound(tag, ex_mesh, rng):
    F = parse_coupling(tag, ex_mesh)
    for _ in range(200):
        m = _random_density(ex_mesh, rng) * rng.uniform(0, 5)
        assert dual_norm(ex_mesh, F.apply(m)) <= F.growth_C_F * (l2_norm(m) + 1) + 1e-12


def test_identity_linear(mesh, rng):
    F = identity_coupling()
    for _ in range(50):
        a, b = _random_density(mesh, rng), _random_density(mesh, rng)
        assert np.allclose(F.apply(a + b), F.apply(a) + F.apply(b), atol=1e-12, rtol=0)


def test_dual_norm_of_load_is_l2(mesh):
    m = interpolate(mesh, lambda x: np.sin(3 * x) * x * (1 - x))
    assert dual_norm(mesh, load_vector(mesh, m)) == pytest.approx(l2_norm(m), rel=1e-12)


def test_parse_errors():
    with pytest.raises(ValueError):
        parse_coupling("nonmono33")
    with pytest.raises(ValueError):
        parse_coupling("quadratic")
