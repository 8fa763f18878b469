"""Coupling operators ``F: m -> HJB right-hand side`` with declared constants.

``apply`` returns the assembled load vector of ``F[m]`` on the interior nodes.
Norms of ``F[m]`` are measured in the discrete dual of L2,
``||r||_* = sqrt(r^T M^{-1} r)`` with ``M`` the P1 mass matrix, i.e. the L2
norm of the Galerkin projection of ``F[m]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import MeshMismatch
from .fem import FeFunction, Mesh1D, assemble_mass, interpolate, l2_norm, load_vector, solve_linear
from .oracles import ex33_pairs

KINDS = ("zero", "identity", "scaled-local", "nonmono-ex33")


@dataclass(frozen=True, eq=False)
class CouplingSpec:
    kind: str
    apply_fn: Callable
    growth_C_F: float
    strong_mono_c_F: float | None = None
    lipschitz_L_F: float | None = None
    mesh: Mesh1D | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown coupling kind {self.kind!r}")

    def apply(self, m: FeFunction):
        if self.mesh is not None and not self.mesh.same_as(m.mesh):
            raise MeshMismatch("coupling was built for a different mesh")
        return self.apply_fn(m)


def apply_coupling(spec: CouplingSpec, m: FeFunction):
    return spec.apply(m)


def dual_norm(mesh, r):
    """``sqrt(r^T M^{-1} r)`` for a load vector ``r``."""
    return float(np.sqrt(max(r @ solve_linear(assemble_mass(mesh), r), 0.0)))


def zero_coupling():
    return CouplingSpec(
        kind="zero",
        apply_fn=lambda m: np.zeros(m.mesh.n_interior),
        growth_C_F=0.0,
        strong_mono_c_F=None,
        lipschitz_L_F=0.0,
    )


def scaled_coupling(kappa: float):
    """``F[m] = kappa m``; strongly monotone in L2 with ``c_F = kappa`` when ``kappa > 0``."""
    kappa = float(kappa)

    def apply_fn(m):
        return kappa * load_vector(m.mesh, m)

    return CouplingSpec(
        kind="scaled-local",
        apply_fn=apply_fn,
        growth_C_F=abs(kappa),
        strong_mono_c_F=kappa if kappa > 0 else None,
        lipschitz_L_F=abs(kappa),
        params={"kappa": kappa},
    )


def identity_coupling():
    spec = scaled_coupling(1.0)
    return CouplingSpec(
        kind="identity",
        apply_fn=spec.apply_fn,
        growth_C_F=1.0,
        strong_mono_c_F=1.0,
        lipschitz_L_F=1.0,
    )


def nonmono_ex33_coupling(mesh: Mesh1D):
    """Lipschitz but non-monotone coupling for which both exact pairs solve the system.

    ``F[m] = (x^2/2 + 1) ||m - m2|| / ||m1 - m2|| + (x^2/2 - 1) ||m - m1|| / ||m1 - m2||``
    with ``m1``, ``m2`` replaced by their nodal interpolants on ``mesh`` so that
    ``F[I m1]`` is exactly ``x^2/2 + 1``.
    """
    first, second = ex33_pairs()
    m1 = interpolate(mesh, first.m)
    m2 = interpolate(mesh, second.m)
    gap = l2_norm(m1 - m2)
    plus = load_vector(mesh, lambda x: 0.5 * x * x + 1.0)
    minus = load_vector(mesh, lambda x: 0.5 * x * x - 1.0)

    def apply_fn(m):
        a = l2_norm(m - m2) / gap
        b = l2_norm(m - m1) / gap
        return a * plus + b * minus

    norm_plus = dual_norm(mesh, plus)
    norm_minus = dual_norm(mesh, minus)
    lip = (norm_plus + norm_minus) / gap
    growth = max(lip, (norm_plus * l2_norm(m2) + norm_minus * l2_norm(m1)) / gap)
    return CouplingSpec(
        kind="nonmono-ex33",
        apply_fn=apply_fn,
        growth_C_F=growth,
        strong_mono_c_F=None,
        lipschitz_L_F=lip,
        mesh=mesh,
        params={"m1": m1, "m2": m2, "gap": gap},
    )


def parse_coupling(tag: str, mesh: Mesh1D | None = None):
    """CLI tags: ``zero``, ``identity``, ``scaled:<kappa>``, ``nonmono33``."""
    if tag == "zero":
        return zero_coupling()
    if tag == "identity":
        return identity_coupling()
    if tag.startswith("scaled:"):
        return scaled_coupling(float(tag.split(":", 1)[1]))
    if tag in ("nonmono33", "nonmono-ex33"):
        if mesh is None:
            raise ValueError("nonmono33 coupling needs a mesh")
        return nonmono_ex33_coupling(mesh)
    raise ValueError(f"unknown coupling {tag!r}")


def _random_density(mesh, rng, modes=6):
    x = mesh.nodes
    a, b = mesh.domain
    t = (x - a) / (b - a)
    coeffs = rng.normal(size=modes) / np.arange(1, modes + 1)
    values = sum(c * np.sin((k + 1) * np.pi * t) for k, c in enumerate(coeffs))
    values[0] = values[-1] = 0.0
    return FeFunction(mesh, values)


def test_monotonicity(spec: CouplingSpec, trials: int, mesh: Mesh1D | None = None,
                      seed: int = 0, extra_pairs=()):
    """Minimum over random pairs of ``<F[m1]-F[m2], m1-m2> / ||m1-m2||^2``.

    The pairing is the load vector against interior nodal values, which is the
    exact L2 pairing on the P1 space.  ``extra_pairs`` are included verbatim.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    mesh = mesh or spec.mesh or Mesh1D.uniform(0.0, 1.0, 64)
    rng = np.random.default_rng(seed)
    pairs = [(_random_density(mesh, rng), _random_density(mesh, rng)) for _ in range(trials)]
    pairs.extend(extra_pairs)
    quotients = []
    for m_a, m_b in pairs:
        diff = m_a - m_b
        denom = l2_norm(diff) ** 2
        if denom == 0.0:
            continue
        num = (spec.apply(m_a) - spec.apply(m_b)) @ diff.interior
        quotients.append(num / denom)
    quotients = np.asarray(quotients)
    return {"min_quotient": float(np.min(quotients)), "trials": int(quotients.size),
            "mean_quotient": float(np.mean(quotients))}


test_monotonicity.__test__ = False  # not a pytest test
