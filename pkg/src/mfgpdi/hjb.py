"""Damped semismooth Newton for the discrete stationary HJB equation

    nu (u', psi') + (H(x, u'), psi) = <rhs, psi>   for all P1 test functions psi.

For a regularized Hamiltonian the tangent uses ``dH_lam/dp``; for a nonsmooth
one it uses the min-norm subgradient, which makes each step a policy-iteration
step when ``H`` has control-set form.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import MaxIterExceeded, SingularMatrix, SingularTangent
from .fem import (
    FeFunction,
    Tridiagonal,
    assemble_diffusion,
    assemble_transport,
    load_vector,
    solve_linear,
)
from .hamiltonian import select_subgradient
from .regularization import RegularizedHamiltonian

logger = logging.getLogger(__name__)

MAX_HALVINGS = 30
ROUNDOFF_FACTOR = 16.0
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class HjbConfig:
    tol_residual: float = 1e-10
    max_iter: int = 100
    damping: float = 1.0

    def __post_init__(self):
        if self.tol_residual <= 0:
            raise ValueError("tol_residual must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")


def tangent_slope(ham, x, p):
    """``dH/dp`` for regularized Hamiltonians, the min-norm subgradient otherwise."""
    if isinstance(ham, RegularizedHamiltonian):
        return ham.dp(x, p)
    return select_subgradient(ham, x, p, "min-norm")


def realized_drift(ham, u: FeFunction):
    """Drift field ``x -> tangent_slope(ham, x, u'(x))`` as a callable."""

    def drift(x):
        return tangent_slope(ham, x, u.grad(x))

    return drift


def assemble_hjb_nonlinearity(mesh, ham, u: FeFunction):
    """Vector ``int H(x, u') psi_i`` and the tangent ``int dp(x, u') w' psi_i``."""
    xq, _ = mesh.gauss()
    p = np.repeat(u.slopes[:, None], 2, axis=1)
    residual = load_vector(mesh, ham.eval(xq, p))
    tangent = assemble_transport(mesh, tangent_slope(ham, xq, p))
    return residual, tangent


def hjb_residual(mesh, nu, ham, u: FeFunction, rhs, stiffness=None, with_scale=False):
    """Weak-form defect; ``with_scale`` also returns a roundoff scale for it."""
    if stiffness is None:
        stiffness = assemble_diffusion(mesh, nu)
    xq, _ = mesh.gauss()
    p = np.repeat(u.slopes[:, None], 2, axis=1)
    diffusion = stiffness @ u.interior
    nonlinear = load_vector(mesh, ham.eval(xq, p))
    r = diffusion + nonlinear - rhs
    if with_scale:
        # roundoff in K u comes from the absolute stencil, not the cancelled sum
        abs_k = Tridiagonal(np.abs(stiffness.lower), np.abs(stiffness.diag), np.abs(stiffness.upper))
        scale = (np.linalg.norm(abs_k @ np.abs(u.interior)) + np.linalg.norm(nonlinear)
                 + np.linalg.norm(rhs))
        return r, float(scale)
    return r


def solve_hjb(mesh, nu, ham, rhs, cfg: HjbConfig | None = None, u0: FeFunction | None = None):
    """Solve the discrete HJB equation; returns the nodal solution as a FeFunction.

    The default initial guess is the solution of the ``nu``-Laplace problem with
    the same right-hand side.  Each Newton step is damped by ``cfg.damping`` and
    halved (at most 30 times) until the residual norm does not increase.
    The iteration stops once the Euclidean residual norm is below
    ``cfg.tol_residual``, or below ``16 eps`` times the roundoff scale of the
    residual when the solution is too large for the absolute target.

    Raises :class:`MaxIterExceeded` carrying the best iterate if the tolerance
    is not met, and :class:`SingularTangent` if a Newton matrix has a zero pivot.
    """
    cfg = cfg or HjbConfig()
    rhs = np.asarray(rhs, dtype=float)
    stiffness = assemble_diffusion(mesh, nu)
    if u0 is None:
        u = FeFunction.from_interior(mesh, solve_linear(stiffness, rhs))
    else:
        u = FeFunction(mesh, u0.values.copy())

    r, scale = hjb_residual(mesh, nu, ham, u, rhs, stiffness, with_scale=True)
    rnorm = float(np.linalg.norm(r))
    history = [rnorm]
    for it in range(cfg.max_iter):
        # large solutions cannot beat the roundoff level of their own residual
        target = max(cfg.tol_residual, ROUNDOFF_FACTOR * _EPS * scale)
        if rnorm <= target:
            u.info.update(iterations=it, residual=rnorm, history=history, target=target)
            return u
        _, tangent = assemble_hjb_nonlinearity(mesh, ham, u)
        try:
            step = solve_linear(stiffness + tangent, -r)
        except SingularMatrix as exc:
            raise SingularTangent(f"Newton matrix singular at iteration {it}: {exc}") from exc

        theta = cfg.damping
        for _ in range(MAX_HALVINGS + 1):
            trial = FeFunction.from_interior(mesh, u.interior + theta * step)
            r_trial, trial_scale = hjb_residual(mesh, nu, ham, trial, rhs, stiffness, with_scale=True)
            trial_norm = float(np.linalg.norm(r_trial))
            if trial_norm <= rnorm:
                break
            theta *= 0.5
        else:
            u.info.update(iterations=it, residual=rnorm, history=history)
            raise MaxIterExceeded(
                f"line search failed at iteration {it} with residual {rnorm:.3e}",
                best=u,
                residual=rnorm,
            )
        u, r, rnorm, scale = trial, r_trial, trial_norm, trial_scale
        history.append(rnorm)
        logger.debug("hjb newton it=%d theta=%.3g residual=%.3e", it, theta, rnorm)

    target = max(cfg.tol_residual, ROUNDOFF_FACTOR * _EPS * scale)
    if rnorm <= target:
        u.info.update(iterations=cfg.max_iter, residual=rnorm, history=history, target=target)
        return u
    u.info.update(iterations=cfg.max_iter, residual=rnorm, history=history)
    raise MaxIterExceeded(
        f"no convergence in {cfg.max_iter} Newton iterations (residual {rnorm:.3e})",
        best=u,
        residual=rnorm,
    )
