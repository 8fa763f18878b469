"""Linear KFP solve: find m with nu (m', phi') + (m b, phi') = <G, phi>."""

from __future__ import annotations

import logging

import numpy as np

from .fem import (
    FeFunction,
    element_values,
    assemble_advection,
    assemble_diffusion,
    solve_linear,
)

logger = logging.getLogger(__name__)


def mesh_peclet(mesh, nu, drift):
    """Per-element ``max|b| h / (2 nu)`` over the Gauss points."""
    bq = element_values(mesh, drift)
    return np.max(np.abs(bq), axis=1) * mesh.h / (2.0 * nu)


def kfp_matrix(mesh, nu, drift, stabilize=False):
    bq = element_values(mesh, drift)
    nu_e = np.full(mesh.n_elements, float(nu))
    if stabilize:
        # full-upwind threshold: raise nu_e until the element Peclet number is 1
        nu_e += np.maximum(0.0, np.max(np.abs(bq), axis=1) * mesh.h / 2.0 - nu)
    return assemble_diffusion(mesh, nu_e) + assemble_advection(mesh, bq)


def kfp_residual(mesh, nu, drift, m: FeFunction, source, stabilize=False):
    return kfp_matrix(mesh, nu, drift, stabilize) @ m.interior - np.asarray(source, dtype=float)


def solve_kfp(mesh, nu, drift, source, stabilize=False, bound=None):
    """Density solving the discrete KFP equation for a given drift field.

    ``drift`` is a callable of ``x`` or an array of Gauss-point values;
    ``source`` is the assembled load vector of ``G``.  If ``bound`` is given it
    is checked against ``max |drift|``.  The minimum nodal value and the largest
    mesh Peclet number are stored in ``m.info``.
    """
    bq = element_values(mesh, drift)
    if bound is not None and np.max(np.abs(bq)) > bound * (1.0 + 1e-12):
        raise ValueError(f"drift exceeds the Lipschitz bound {bound}")
    peclet = float(np.max(np.abs(bq)) * mesh.hmax / (2.0 * nu))
    if peclet >= 1.0 and not stabilize:
        logger.warning("mesh Peclet number %.3g >= 1 without stabilization", peclet)
    A = kfp_matrix(mesh, nu, bq, stabilize)
    m = FeFunction.from_interior(mesh, solve_linear(A, source))
    m.info.update(min_value=float(np.min(m.values)), peclet=peclet, stabilized=bool(stabilize))
    return m
