"""Damped Picard iteration for the coupled HJB/KFP system and regularization rate studies."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import Diverged, MaxIterExceeded
from .fem import FeFunction, h1_norm, l2_norm, load_vector
from .hamiltonian import HamiltonianSpec
from .hjb import HjbConfig, hjb_residual, realized_drift, solve_hjb
from .kfp import kfp_residual, solve_kfp
from .regularization import RegularizedHamiltonian, build_family

logger = logging.getLogger(__name__)


@dataclass
class MfgConfig:
    theta: float = 0.5
    outer_tol: float = 1e-10
    max_outer: int = 500
    initial_m: object = "zero"
    hjb: HjbConfig = field(default_factory=HjbConfig)
    stabilize: bool = False

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError("theta must lie in (0, 1]")
        if self.outer_tol <= 0:
            raise ValueError("outer_tol must be positive")


@dataclass
class MfgSolution:
    u: FeFunction
    m: FeFunction
    drift: Callable
    lam: float | None
    diagnostics: dict


def _base_of(ham):
    return ham.base if isinstance(ham, RegularizedHamiltonian) else ham


def pdi_inclusion_defect(u: FeFunction, drift, ham: HamiltonianSpec):
    """Largest distance from ``drift(x)`` to ``subdiff H(x, u'(x))`` over Gauss points."""
    xq, _ = u.mesh.gauss()
    p = np.repeat(u.slopes[:, None], 2, axis=1)
    b = drift(xq) if callable(drift) else np.asarray(drift, dtype=float)
    lo, hi = ham.subdiff(xq, p)
    gap = np.maximum(np.maximum(lo - b, b - hi), 0.0)
    return float(np.max(gap))


def _initial_density(mesh, nu, cfg, source):
    init = cfg.initial_m
    if isinstance(init, FeFunction):
        if not init.mesh.same_as(mesh):
            raise ValueError("initial density lives on a different mesh")
        return FeFunction(mesh, init.values.copy())
    if init == "zero":
        return FeFunction.zeros(mesh)
    if init == "kfp-of-zero-drift":
        return solve_kfp(mesh, nu, 0.0, source)
    raise ValueError(f"unknown initial density {init!r}")


def diagnose(mesh, nu, ham, coupling, source, u, m, drift, cfg):
    """Weak-form defects of ``(u, m, drift)``, recomputed from scratch."""
    r_hjb = hjb_residual(mesh, nu, ham, u, coupling.apply(m))
    r_kfp = kfp_residual(mesh, nu, drift, m, source, cfg.stabilize)
    xq, _ = mesh.gauss()
    return {
        "hjb_residual": float(np.linalg.norm(r_hjb)),
        "kfp_residual": float(np.linalg.norm(r_kfp)),
        "inclusion_defect": pdi_inclusion_defect(u, drift, _base_of(ham)),
        "min_m": float(np.min(m.values)),
        "max_abs_drift": float(np.max(np.abs(drift(xq)))),
    }


def _source_vector(mesh, G):
    if G is None:
        return load_vector(mesh, 1.0)
    G = np.asarray(G, dtype=float) if not callable(G) else G
    if not callable(G) and G.shape == (mesh.n_interior,):
        return G
    return load_vector(mesh, G)


def solve_mfg(mesh, nu, ham, coupling, G=None, cfg: MfgConfig | None = None):
    """Solve the (regularized) MFG system by damped Picard iteration.

    ``ham`` is a :class:`RegularizedHamiltonian` (drift ``dH_lam/dp``) or a raw
    :class:`HamiltonianSpec` (drift is the min-norm subgradient).  ``G`` is a
    callable, a constant, or an assembled load vector; default ``G = 1``.

    Each sweep computes ``u = HJB(F[m_k])``, its drift, ``m_kfp = KFP(drift)``
    and ``m_{k+1} = (1 - theta) m_k + theta m_kfp``.  The returned density is
    ``m_kfp`` of the final sweep, so ``(u, m, drift)`` satisfy the KFP equation
    to solver precision.  A run whose inner HJB solve fails or whose outer
    budget runs out comes back with ``converged=False``; a run whose increments
    grow tenfold over five consecutive sweeps raises :class:`Diverged`.
    """
    cfg = cfg or MfgConfig()
    source = _source_vector(mesh, G)
    m = _initial_density(mesh, nu, cfg, source)
    lam = ham.lam if isinstance(ham, RegularizedHamiltonian) else None
    bound = _base_of(ham).lipschitz
    # F independent of m makes the sweep map constant: no damping needed
    theta = 1.0 if coupling.kind == "zero" else cfg.theta

    increments = []
    converged = False
    status = "max_outer"
    u = m_kfp = drift = None
    for k in range(cfg.max_outer):
        rhs = coupling.apply(m)
        try:
            u = solve_hjb(mesh, nu, ham, rhs, cfg.hjb)
        except MaxIterExceeded as exc:
            u = exc.best
            status = "hjb_failed"
            logger.warning("HJB solve failed in outer sweep %d: %s", k, exc)
        drift = realized_drift(ham, u)
        m_kfp = solve_kfp(mesh, nu, drift, source, cfg.stabilize, bound=bound)
        m_next = (1.0 - theta) * m + theta * m_kfp
        inc = l2_norm(m_next - m)
        increments.append(inc)
        m = m_next
        logger.debug("picard sweep %d increment %.3e", k, inc)
        if status == "hjb_failed":
            break
        if inc <= cfg.outer_tol:
            converged = True
            status = "converged"
            break
        if len(increments) >= 6:
            tail = increments[-6:]
            if all(b > a for a, b in zip(tail, tail[1:])) and tail[-1] >= 10.0 * tail[0]:
                diag = diagnose(mesh, nu, ham, coupling, source, u, m_kfp, drift, cfg)
                diag.update(outer_iters=k + 1, converged=False, status="diverged",
                            increments=increments)
                raise Diverged(
                    f"Picard increments grew from {tail[0]:.3e} to {tail[-1]:.3e}",
                    partial=MfgSolution(u, m_kfp, drift, lam, diag),
                )

    diag = diagnose(mesh, nu, ham, coupling, source, u, m_kfp, drift, cfg)
    diag.update(outer_iters=len(increments), converged=converged, status=status,
                increments=increments)
    return MfgSolution(u=u, m=m_kfp, drift=drift, lam=lam, diagnostics=diag)


# --------------------------------------------------------------------------
# rate studies

@dataclass
class RateReport:
    rows: list
    slope: float
    constant: float
    meta: dict = field(default_factory=dict)

    def to_csv(self, path, config_hash=""):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["lambda", "omega", "err_u_h1", "err_m_l2", "slope", "valid", "config_hash"])
            for row in self.rows:
                writer.writerow([
                    repr(row["lambda"]), repr(row["omega"]), repr(row["err_u_h1"]),
                    repr(row["err_m_l2"]), repr(self.slope), int(row["valid"]), config_hash,
                ])

    def to_json(self, path):
        Path(path).write_text(json.dumps(
            {"rows": self.rows, "slope": self.slope, "constant": self.constant, "meta": self.meta},
            indent=2, default=_jsonable,
        ))


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def fit_loglog_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x``."""
    x = np.log(np.asarray(x, dtype=float))
    y = np.log(np.asarray(y, dtype=float))
    if x.size < 2:
        return float("nan")
    return float(np.polyfit(x, y, 1)[0])


def rate_study(mesh, nu, base_ham, reg_family, coupling, G, lambdas, reference: MfgSolution,
               cfg: MfgConfig | None = None, quad_nodes: int = 64):
    """Regularization error against a same-mesh reference for a list of ``lambda``.

    Errors are ``||u - u_lam||_{H1}`` and ``||m - m_lam||_{L2}``.  The reported
    slope fits ``log(err_u + err_m)`` against ``log(omega)`` over valid rows;
    ``constant`` is ``max (err_u + err_m) / omega^{1/2}`` over the same rows.
    """
    lambdas = [float(v) for v in lambdas]
    if any(b >= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("lambdas must be strictly decreasing")
    if not reference.u.mesh.same_as(mesh):
        raise ValueError("reference solution lives on a different mesh")
    rows = []
    for lam in lambdas:
        reg = build_family(reg_family, base_ham, lam, quad_nodes)
        row = {"lambda": lam, "omega": reg.omega}
        try:
            sol = solve_mfg(mesh, nu, reg, coupling, G, cfg)
            valid = bool(sol.diagnostics["converged"])
            row["diagnostics"] = {k: v for k, v in sol.diagnostics.items() if k != "increments"}
        except Diverged as exc:
            sol = exc.partial
            valid = False
            row["diagnostics"] = {"status": "diverged"}
        row["err_u_h1"] = h1_norm(sol.u - reference.u)
        row["err_m_l2"] = l2_norm(sol.m - reference.m)
        row["valid"] = valid
        rows.append(row)
        logger.info("lambda=%.4g omega=%.4g err_u=%.3e err_m=%.3e valid=%s", lam, reg.omega,
                    row["err_u_h1"], row["err_m_l2"], valid)

    good = [r for r in rows if r["valid"] and r["err_u_h1"] + r["err_m_l2"] > 0]
    total = [r["err_u_h1"] + r["err_m_l2"] for r in good]
    omegas = [r["omega"] for r in good]
    slope = fit_loglog_slope(omegas, total) if good else float("nan")
    constant = max((t / np.sqrt(o) for t, o in zip(total, omegas)), default=float("nan"))
    return RateReport(rows=rows, slope=slope, constant=float(constant),
                      meta={"family": reg_family, "base": base_ham.name, "nu": nu,
                            "n_elements": mesh.n_elements})
