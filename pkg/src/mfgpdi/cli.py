"""Command-line entry point ``mfgpdi``.

Exit status is 0 when every solve converged, 2 when a report was written but
some solve did not converge, and 1 on error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .coupling import parse_coupling
from .driver import MfgConfig, solve_mfg
from .errors import Diverged, MfgError
from .experiments import ExperimentConfig, run_experiment, write_report
from .fem import Mesh1D
from .hamiltonian import get_hamiltonian
from .hjb import HjbConfig
from .regularization import build_family

logger = logging.getLogger("mfgpdi")

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2


def _load_config(path):
    if path is None:
        return {}
    return json.loads(Path(path).read_text())


def _pick(args, conf, name, default=None):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return conf.get(name, default)


def _write_solution(base, sol, config):
    base = Path(base)
    if base.suffix in (".json", ".csv"):
        base = base.with_suffix("")
    base.parent.mkdir(parents=True, exist_ok=True)
    mesh = sol.u.mesh
    xq, _ = mesh.gauss()
    with open(base.with_suffix(".csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "u", "m"])
        for x, u, m in zip(mesh.nodes, sol.u.values, sol.m.values):
            writer.writerow([repr(float(x)), repr(float(u)), repr(float(m))])
    with open(base.with_suffix(".drift.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "drift"])
        for x, b in zip(xq.ravel(), np.asarray(sol.drift(xq), dtype=float).ravel()):
            writer.writerow([repr(float(x)), repr(float(b))])
    diag = dict(sol.diagnostics)
    write_report({"lambda": sol.lam, "diagnostics": diag, "config": config}, base.with_suffix(".json"))
    return base


def cmd_solve(args):
    conf = _load_config(args.config)
    ham_id = _pick(args, conf, "ham", "abs")
    reg = _pick(args, conf, "reg", "none")
    lam = _pick(args, conf, "lam")
    nu = float(_pick(args, conf, "nu", 1.0))
    n = int(_pick(args, conf, "n", 256))
    domain = _pick(args, conf, "domain", [0.0, 1.0])
    quad_nodes = int(_pick(args, conf, "quad_nodes", 64))
    if n < 16:
        raise ValueError("n must be at least 16")
    mesh = Mesh1D.uniform(float(domain[0]), float(domain[1]), n)
    coupling = parse_coupling(_pick(args, conf, "coupling", "identity"), mesh)

    base = get_hamiltonian(ham_id)
    if reg == "none":
        ham = base
    else:
        if lam is None:
            raise ValueError("--lambda is required with a regularization family")
        ham = build_family(reg, base, float(lam), quad_nodes)

    cfg = MfgConfig(
        theta=float(_pick(args, conf, "theta", 0.5)),
        outer_tol=float(_pick(args, conf, "tol", 1e-10)),
        max_outer=int(_pick(args, conf, "max_outer", 500)),
        initial_m=_pick(args, conf, "initial_m", "zero"),
        hjb=HjbConfig(),
        stabilize=bool(_pick(args, conf, "stabilize", False)),
    )
    record = {"ham": ham_id, "reg": reg, "lambda": lam, "nu": nu, "n": n, "domain": list(domain),
              "coupling": coupling.kind, "quad_nodes": quad_nodes, "theta": cfg.theta,
              "outer_tol": cfg.outer_tol}
    try:
        sol = solve_mfg(mesh, nu, ham, coupling, None, cfg)
    except Diverged as exc:
        logger.error("%s", exc)
        if args.out and exc.partial is not None:
            _write_solution(args.out, exc.partial, record)
        return EXIT_NOT_CONVERGED
    if args.out:
        _write_solution(args.out, sol, record)
    d = sol.diagnostics
    print(f"status={d['status']} outer_iters={d['outer_iters']} "
          f"hjb_residual={d['hjb_residual']:.3e} kfp_residual={d['kfp_residual']:.3e} "
          f"inclusion_defect={d['inclusion_defect']:.3e}")
    return EXIT_OK if d["converged"] else EXIT_NOT_CONVERGED


def _experiment_config(args, experiment):
    conf = _load_config(args.config)
    conf["experiment"] = experiment
    for name in ("n", "nu", "out"):
        value = getattr(args, name, None)
        if value is not None:
            conf[name] = value
    if getattr(args, "j", None):
        conf["js"] = args.j
    if getattr(args, "lambdas", None):
        conf["lambdas"] = args.lambdas
    return ExperimentConfig(**conf)


def _report_exit(report):
    return EXIT_OK if report.get("converged", False) else EXIT_NOT_CONVERGED


def cmd_reproduce(args):
    report = run_experiment(_experiment_config(args, args.example))
    _summarize(report)
    return _report_exit(report)


def cmd_rate(args):
    report = run_experiment(_experiment_config(args, f"rate-{args.family}"))
    return _report_exit(report)


def _summarize(report):
    exp = report["experiment"]
    if exp == "ex33":
        print(f"ex33: residual orders {report['residual_orders']}")
        for key, fit in report["fits"].items():
            print(f"  {key}: converged={fit['all_converged']} H1 order={fit['h1_order']:.3f} C={fit['C']:.3g}")
    elif exp == "prop71":
        for row in report["rows"]:
            print(f"  j={row['j']:4d} L2={row['err_m_l2']:.3e} energy ratio={row['energy_ratio']:.4f}")
    elif exp == "prop72":
        print(f"prop72: within odd={report['within_odd']:.2e} within even={report['within_even']:.2e} "
              f"across={report.get('across_parity', float('nan')):.4e}")
    if "json_path" in report:
        print(f"wrote {report['json_path']}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mfgpdi", description="Regularized solvers for stationary 1D mean-field games.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one (regularized) MFG system")
    p.add_argument("--config", help="JSON file with default options")
    p.add_argument("--ham", help="builtin id (abs, xabs, quad) or control:<file.json>")
    p.add_argument("--reg", choices=["my", "mollify", "shift71", "shift72", "none"])
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--coupling", help="zero, identity, scaled:<k>, nonmono33")
    p.add_argument("--nu", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--domain", type=float, nargs=2, metavar=("A", "B"))
    p.add_argument("--quad-nodes", dest="quad_nodes", type=int)
    p.add_argument("--theta", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-outer", dest="max_outer", type=int)
    p.add_argument("--stabilize", action="store_true", default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("reproduce", help="run a canned example")
    p.add_argument("example", choices=["ex33", "prop71", "prop72"])
    p.add_argument("--config")
    p.add_argument("--j", type=int, nargs="+")
    p.add_argument("--n", type=int)
    p.add_argument("--nu", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("rate", help="regularization rate study for |p|")
    p.add_argument("family", choices=["my", "mollify"])
    p.add_argument("--config")
    p.add_argument("--lambdas", type=float, nargs="+")
    p.add_argument("--n", type=int)
    p.add_argument("--nu", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (MfgError, ValueError, OSError, json.JSONDecodeError, TypeError) as exc:
        logger.error("%s", exc)
        return EXIT_ERROR


def _entry():
    sys.exit(main())


if __name__ == "__main__":
    _entry()
