"""Canned reproductions: the nonmonotone two-solution example, the oscillating
and alternating shifted families, and the regularization rate studies.

Every runner takes an :class:`ExperimentConfig` and returns a plain ``dict``
report that serializes to JSON.  Runners that have a natural curve also write
a CSV next to the JSON when ``cfg.out`` is set.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .coupling import dual_norm, identity_coupling, nonmono_ex33_coupling, zero_coupling
from .driver import MfgConfig, fit_loglog_slope, pdi_inclusion_defect, rate_study, solve_mfg
from .errors import MeshTooCoarse
from .fem import (
    FeFunction,
    Mesh1D,
    h1_error,
    h1_seminorm_error,
    interpolate,
    l2_error,
    l2_norm,
    load_vector,
)
from .hamiltonian import abs_hamiltonian, quad_hamiltonian
from .hjb import hjb_residual, realized_drift
from .kfp import kfp_residual
from .oracles import (
    constant_drift_density,
    ex33_pairs,
    oscillating_drift_density,
    oscillation_limit_energy,
    poisson_limit_density,
)
from .regularization import shifted_71, shifted_72

logger = logging.getLogger(__name__)

EXPERIMENTS = ("ex33", "prop71", "prop72", "rate-my", "rate-mollify")


@dataclass
class ExperimentConfig:
    """Settings of one canned run.

    ``n`` is the element count.  For ``ex33`` it is the finest mesh of the
    refinement sweep ``n/8, n/4, n/2, n``.  For ``prop71`` it may be left as
    ``None`` to use ``20 j`` elements per ``j``.
    """

    experiment: str
    n: int | None = None
    nu: float = 1.0
    lambdas: list | None = None
    js: list | None = None
    out: str | None = None
    quad_nodes: int = 64
    outer_tol: float = 1e-10
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if self.n is not None and self.n < 16:
            raise ValueError("n must be at least 16")
        if not self.nu > 0:
            raise ValueError("nu must be positive")

    def config_hash(self):
        payload = {k: v for k, v in asdict(self).items() if k != "out"}
        blob = json.dumps(payload, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_json(cls, path, **overrides):
        data = json.loads(Path(path).read_text())
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)


def oracle_ex33():
    """The two exact ``(u, m)`` pairs of the nonmonotone example on ``(-1, 1)``."""
    return ex33_pairs()


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, FeFunction):
        return obj.values.tolist()
    return str(obj)


def write_report(report, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, default=_json_default))


def _write_rows(path, header, rows, config_hash):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header) + ["config_hash"])
        for row in rows:
            writer.writerow([repr(row[k]) if isinstance(row[k], float) else row[k] for k in header]
                            + [config_hash])


def _outputs(cfg):
    if cfg.out is None:
        return None, None
    base = Path(cfg.out)
    if base.suffix in (".json", ".csv"):
        base = base.with_suffix("")
    return base.with_suffix(".json"), base.with_suffix(".csv")


def _finish(cfg, report, header=None, rows=None):
    report["config"] = {k: v for k, v in asdict(cfg).items()}
    report["config_hash"] = cfg.config_hash()
    json_path, csv_path = _outputs(cfg)
    if json_path is not None:
        write_report(report, json_path)
        report["json_path"] = str(json_path)
        if rows is not None:
            _write_rows(csv_path, header, rows, report["config_hash"])
            report["csv_path"] = str(csv_path)
    return report


def _order(ns, errs):
    """Observed order in ``h = 1/n``; nan if any error vanishes."""
    errs = np.asarray(errs, dtype=float)
    if np.any(errs <= 0):
        return float("nan")
    return -fit_loglog_slope(ns, errs)


# --------------------------------------------------------------------------
# nonmonotone example with two classical solutions

def run_ex33(cfg: ExperimentConfig):
    """Consistency of both exact pairs and Picard runs started near each of them."""
    if cfg.experiment != "ex33":
        raise ValueError("run_ex33 needs experiment='ex33'")
    t0 = time.perf_counter()
    n_max = cfg.n or 1024
    ns = [n_max // 8, n_max // 4, n_max // 2, n_max]
    if ns[0] < 16:
        raise MeshTooCoarse("ex33 sweep needs n >= 128")
    ham = quad_hamiltonian()
    pairs = oracle_ex33()
    nu = 1.0
    perturb = float(cfg.extra.get("perturbation", 1.1))

    rows = []
    runs = {"start_m1": [], "start_m2": []}
    for n in ns:
        mesh = Mesh1D.uniform(-1.0, 1.0, n)
        coupling = nonmono_ex33_coupling(mesh)
        source = load_vector(mesh, 1.0)
        row = {"n": n, "h": mesh.hmax}
        for tag, pair in zip(("1", "2"), pairs):
            u = interpolate(mesh, pair.u)
            m = interpolate(mesh, pair.m)
            r_hjb = hjb_residual(mesh, nu, ham, u, coupling.apply(m))
            r_kfp = kfp_residual(mesh, nu, realized_drift(ham, u), m, source)
            row[f"res_hjb_{tag}"] = dual_norm(mesh, r_hjb)
            row[f"res_kfp_{tag}"] = dual_norm(mesh, r_kfp)
        m1, m2 = coupling.params["m1"], coupling.params["m2"]
        for key, start, own in (("start_m1", m1, 0), ("start_m2", m2, 1)):
            mcfg = MfgConfig(outer_tol=cfg.outer_tol, initial_m=perturb * start)
            sol = solve_mfg(mesh, nu, ham, coupling, None, mcfg)
            d1, d2 = l2_norm(sol.m - m1), l2_norm(sol.m - m2)
            target = pairs[own]
            runs[key].append({
                "n": n,
                "converged": sol.diagnostics["converged"],
                "outer_iters": sol.diagnostics["outer_iters"],
                "dist_m1": d1,
                "dist_m2": d2,
                "approaches": "m1" if d1 < d2 else "m2",
                "err_u_h1": h1_error(sol.u, target.u, target.du),
                "err_m_h1": h1_error(sol.m, target.m, target.dm),
                "inclusion_defect": sol.diagnostics["inclusion_defect"],
                "hjb_residual": sol.diagnostics["hjb_residual"],
                "kfp_residual": sol.diagnostics["kfp_residual"],
            })
        rows.append(row)

    hs = [r["h"] for r in rows]
    orders = {k: _order(ns, [r[k] for r in rows])
              for k in ("res_hjb_1", "res_kfp_1", "res_hjb_2", "res_kfp_2")}
    fits = {}
    for key, items in runs.items():
        total = [it["err_u_h1"] + it["err_m_h1"] for it in items]
        ok = all(it["converged"] for it in items)
        fits[key] = {
            "all_converged": ok,
            "h1_order": _order(ns, total),
            "C": max(t / h for t, h in zip(total, hs)),
        }

    fine = Mesh1D.uniform(-1.0, 1.0, 2 ** 14)
    gap = l2_norm(interpolate(fine, pairs[0].m) - interpolate(fine, pairs[1].m))
    xs = np.linspace(-1.0, 1.0, 101)
    drift_check = max(
        float(np.max(np.abs(ham.select(xs, pair.du(xs)) - pair.du(xs)))) for pair in pairs
    )
    report = {
        "experiment": "ex33",
        "rows": rows,
        "residual_orders": orders,
        "runs": runs,
        "fits": fits,
        "m1_m2_l2_distance": gap,
        "drift_check_max_error": drift_check,
        "elapsed_s": time.perf_counter() - t0,
        "converged": all(f["all_converged"] for f in fits.values()),
    }
    header = ["n", "h", "res_hjb_1", "res_kfp_1", "res_hjb_2", "res_kfp_2"]
    return _finish(cfg, report, header, rows)


# --------------------------------------------------------------------------
# oscillating shift: strong but not H1 convergence of the density

def run_prop71(cfg: ExperimentConfig):
    """``shifted_71(1/j)`` with zero coupling, compared with ``x(1-x)/(2 nu)``."""
    if cfg.experiment != "prop71":
        raise ValueError("run_prop71 needs experiment='prop71'")
    t0 = time.perf_counter()
    js = [int(j) for j in (cfg.js or [8, 16, 32, 64, 128, 256, 512])]
    if any(j < 1 for j in js):
        raise ValueError("j values must be positive")
    if cfg.n is not None and cfg.n < 20 * max(js):
        raise MeshTooCoarse(f"n={cfg.n} is below 20*max(j)={20 * max(js)}")
    nu = cfg.nu
    m_lim, dm_lim = poisson_limit_density(nu)
    energy = oscillation_limit_energy(nu)
    oracle_js = set(cfg.extra.get("oracle_js", [16]))

    rows = []
    for j in js:
        n = cfg.n or 20 * j
        mesh = Mesh1D.uniform(0.0, 1.0, n)
        ham = shifted_71(1.0 / j)
        sol = solve_mfg(mesh, nu, ham, zero_coupling(), None, MfgConfig(outer_tol=cfg.outer_tol))
        semi = h1_seminorm_error(sol.m, dm_lim) ** 2
        row = {
            "j": j,
            "n": n,
            "err_m_l2": l2_error(sol.m, m_lim),
            "grad_err_sq": semi,
            "energy_ratio": semi / energy,
            "inclusion_defect": sol.diagnostics["inclusion_defect"],
            "outer_iters": sol.diagnostics["outer_iters"],
            "converged": sol.diagnostics["converged"],
            "oracle_l2": float("nan"),
            "oracle_h1": float("nan"),
        }
        if j in oracle_js:
            m_j, dm_j = oscillating_drift_density(j, nu)
            row["oracle_l2"] = l2_error(sol.m, m_j)
            row["oracle_h1"] = h1_seminorm_error(sol.m, dm_j)
        rows.append(row)
        logger.info("prop71 j=%d L2=%.3e energy ratio=%.4f", j, row["err_m_l2"], row["energy_ratio"])

    errs = [r["err_m_l2"] for r in rows]
    report = {
        "experiment": "prop71",
        "rows": rows,
        "limit_energy": energy,
        "l2_monotone": all(b < a for a, b in zip(errs, errs[1:])),
        "max_inclusion_defect": max(r["inclusion_defect"] for r in rows),
        "elapsed_s": time.perf_counter() - t0,
        "converged": all(r["converged"] for r in rows),
    }
    header = ["j", "n", "err_m_l2", "grad_err_sq", "energy_ratio", "inclusion_defect",
              "outer_iters", "oracle_l2", "oracle_h1"]
    return _finish(cfg, report, header, rows)


# --------------------------------------------------------------------------
# alternating shift: two limits selected by the parity of j

def run_prop72(cfg: ExperimentConfig):
    """``shifted_72(1/(pi j))`` with zero coupling; the drift sign follows the parity of ``j``."""
    if cfg.experiment != "prop72":
        raise ValueError("run_prop72 needs experiment='prop72'")
    t0 = time.perf_counter()
    js = [int(j) for j in (cfg.js or range(1, 9))]
    if any(j < 1 or j > 16 for j in js):
        raise ValueError("j values must lie in 1..16")
    n = cfg.n or 256
    nu = cfg.nu
    mesh = Mesh1D.uniform(0.0, 1.0, n)
    xq, _ = mesh.gauss()

    rows, dens = [], {}
    for j in js:
        ham = shifted_72(1.0 / (math.pi * j))
        sol = solve_mfg(mesh, nu, ham, zero_coupling(), None, MfgConfig(outer_tol=cfg.outer_tol))
        expected = float((-1) ** (j + 1))
        b = np.asarray(sol.drift(xq), dtype=float)
        m_exact, _ = constant_drift_density(expected, nu)
        dens[j] = sol.m
        rows.append({
            "j": j,
            "lambda": 1.0 / (math.pi * j),
            "drift_expected": expected,
            "drift_max_dev": float(np.max(np.abs(b - expected))),
            "drift_exact": bool(np.all(b == expected)),
            "oracle_l2": l2_error(sol.m, m_exact),
            "inclusion_defect": sol.diagnostics["inclusion_defect"],
            "outer_iters": sol.diagnostics["outer_iters"],
            "converged": sol.diagnostics["converged"],
        })

    odd = [dens[j] for j in js if j % 2]
    even = [dens[j] for j in js if not j % 2]

    def spread(group):
        return max((l2_norm(a - group[0]) for a in group[1:]), default=0.0)

    report = {
        "experiment": "prop72",
        "n": n,
        "rows": rows,
        "within_odd": spread(odd),
        "within_even": spread(even),
        "max_inclusion_defect": max(r["inclusion_defect"] for r in rows),
        "elapsed_s": 0.0,
        "converged": all(r["converged"] for r in rows),
    }
    if odd and even:
        plus, _ = constant_drift_density(1.0, nu)
        minus, _ = constant_drift_density(-1.0, nu)
        fine = Mesh1D.uniform(0.0, 1.0, 2 ** 14)
        report["across_parity"] = l2_norm(odd[0] - even[0])
        report["across_parity_oracle"] = l2_norm(interpolate(fine, plus) - interpolate(fine, minus))
    report["elapsed_s"] = time.perf_counter() - t0
    header = ["j", "lambda", "drift_expected", "drift_max_dev", "oracle_l2", "inclusion_defect",
              "outer_iters"]
    return _finish(cfg, report, header, rows)


# --------------------------------------------------------------------------
# rate studies

def run_rate(cfg: ExperimentConfig):
    """Regularization error of Moreau-Yosida or mollification for ``|p|``."""
    if cfg.experiment not in ("rate-my", "rate-mollify"):
        raise ValueError("run_rate needs experiment 'rate-my' or 'rate-mollify'")
    t0 = time.perf_counter()
    family = cfg.experiment.split("-", 1)[1]
    n = cfg.n or 2 ** 12
    lambdas = [float(v) for v in (cfg.lambdas or [2.0 ** -k for k in range(2, 11)])]
    mesh = Mesh1D.uniform(0.0, 1.0, n)
    base = abs_hamiltonian()
    coupling = identity_coupling()
    ref_tol = float(cfg.extra.get("reference_tol", min(cfg.outer_tol, 1e-12)))
    reference = solve_mfg(mesh, cfg.nu, base, coupling, None, MfgConfig(outer_tol=ref_tol))
    rep = rate_study(mesh, cfg.nu, base, family, coupling, None, lambdas, reference,
                     MfgConfig(outer_tol=cfg.outer_tol), cfg.quad_nodes)
    chash = cfg.config_hash()
    json_path, csv_path = _outputs(cfg)
    if csv_path is not None:
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        rep.to_csv(csv_path, config_hash=chash)
    totals = [r["err_u_h1"] + r["err_m_l2"] for r in rep.rows]
    report = {
        "experiment": cfg.experiment,
        "rows": rep.rows,
        "slope": rep.slope,
        "constant": rep.constant,
        "within_bound": all(t <= rep.constant * math.sqrt(r["omega"]) * (1 + 1e-12)
                            for t, r in zip(totals, rep.rows) if r["valid"]),
        "reference": {k: v for k, v in reference.diagnostics.items() if k != "increments"},
        "meta": rep.meta,
        "elapsed_s": time.perf_counter() - t0,
        "converged": bool(reference.diagnostics["converged"]) and all(r["valid"] for r in rep.rows),
    }
    report["config"] = asdict(cfg)
    report["config_hash"] = chash
    if json_path is not None:
        write_report(report, json_path)
        report["json_path"] = str(json_path)
        report["csv_path"] = str(csv_path)
    print(f"{cfg.experiment}: fitted slope {rep.slope:.4f}, C = {rep.constant:.4g}")
    return report


RUNNERS = {
    "ex33": run_ex33,
    "prop71": run_prop71,
    "prop72": run_prop72,
    "rate-my": run_rate,
    "rate-mollify": run_rate,
}


def run_experiment(cfg: ExperimentConfig):
    return RUNNERS[cfg.experiment](cfg)
