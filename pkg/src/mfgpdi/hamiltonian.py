"""Convex, Lipschitz-in-p Hamiltonians and their partial subdifferentials.

Every Hamiltonian here is a function ``H(x, p)`` on a 1D domain, convex in the
gradient variable ``p``.  Subdifferentials in ``p`` are closed intervals and are
returned as a pair of arrays ``(lo, hi)``.  All callables broadcast over numpy
arrays.

Hamiltonians of control-set form,

    H(x, p) = max_{alpha in A} { b(x, alpha) p - f(x, alpha) },

are supported with ``A`` a finite list of control points.  Their
subdifferential is the convex hull of the drifts ``b(x, alpha)`` over the
maximizing controls.
"""

from __future__ import annotations

import ast
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)

ARGMAX_TOL = 1e-12

RULES = ("min-norm", "left", "right")


@dataclass(frozen=True, eq=False)
class ControlSetSpec:
    """Finite control grid with drift ``b(x, alpha)`` and cost ``f(x, alpha)``.

    ``drift`` and ``cost`` must broadcast over numpy arrays.  ``domain`` is only
    used to estimate the Lipschitz constant ``max |b|``.
    """

    controls: np.ndarray
    drift: Callable
    cost: Callable
    domain: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        controls = np.atleast_1d(np.asarray(self.controls, dtype=float))
        if controls.ndim != 1 or controls.size == 0:
            raise ValueError("control grid must be a nonempty 1D list")
        object.__setattr__(self, "controls", controls)

    def lipschitz(self, n_samples=257):
        x = np.linspace(*self.domain, n_samples)[:, None]
        b = np.broadcast_to(self.drift(x, self.controls[None, :]),
                            (n_samples, self.controls.size))
        return float(np.max(np.abs(b)))

    def lines(self, x):
        """Slopes and intercepts of the affine pieces, shape ``x.shape + (K,)``."""
        x = np.asarray(x, dtype=float)[..., None]
        shape = x.shape[:-1] + (self.controls.size,)
        b = np.broadcast_to(self.drift(x, self.controls), shape)
        f = np.broadcast_to(self.cost(x, self.controls), shape)
        return b, f


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """A convex Hamiltonian with Lipschitz constant and exact subdifferential.

    ``breakpoints(x)`` returns the ``p`` locations where ``H(x, .)`` fails to be
    smooth, as an array of shape ``x.shape + (k,)`` padded with NaN.  It lets
    quadrature-based regularizations split their stencils at kinks.
    """

    name: str
    kind: str
    lipschitz: float
    eval_fn: Callable
    subdiff_fn: Callable
    breakpoints_fn: Callable | None = None
    control: ControlSetSpec | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("analytic", "control-set"):
            raise ValueError(f"unknown Hamiltonian kind {self.kind!r}")
        if self.lipschitz < 0:
            raise ValueError("Lipschitz constant must be nonnegative")

    def eval(self, x, p):
        return self.eval_fn(np.asarray(x, dtype=float), np.asarray(p, dtype=float))

    def subdiff(self, x, p):
        return self.subdiff_fn(np.asarray(x, dtype=float), np.asarray(p, dtype=float))

    def select(self, x, p, rule="min-norm"):
        return select_subgradient(self, x, p, rule)

    def breakpoints(self, x):
        x = np.asarray(x, dtype=float)
        if self.breakpoints_fn is None:
            return np.empty(x.shape + (0,))
        return self.breakpoints_fn(x)


def eval_hamiltonian(spec, x, p):
    return spec.eval(x, p)


def subdiff(spec, x, p):
    """Exact subdifferential interval ``(lo, hi)`` of ``H(x, .)`` at ``p``."""
    return spec.subdiff(x, p)


def select_subgradient(spec, x, p, rule="min-norm"):
    """Pick one element of the subdifferential.

    ``min-norm`` returns the element of smallest absolute value, ``left`` and
    ``right`` the interval endpoints.
    """
    lo, hi = spec.subdiff(x, p)
    if rule == "min-norm":
        return np.clip(0.0, lo, hi)
    if rule == "left":
        return lo
    if rule == "right":
        return hi
    raise ValueError(f"unknown selection rule {rule!r}; expected one of {RULES}")


def _constant_breakpoints(*points):
    pts = np.asarray(points, dtype=float)

    def breakpoints(x):
        return np.broadcast_to(pts, np.shape(x) + pts.shape).copy()

    return breakpoints


def _abs_subdiff(x, p):
    s = np.sign(p)
    lo = np.where(p == 0, -1.0, s)
    hi = np.where(p == 0, 1.0, s)
    lo, hi = np.broadcast_arrays(lo, hi, x)[:2]
    return lo.astype(float), hi.astype(float)


def _xabs_subdiff(x, p):
    x, p = np.broadcast_arrays(x, p)
    s = np.sign(p)
    lo = np.where(p == 0, -x, x * s)
    hi = np.where(p == 0, x, x * s)
    return lo, hi


def _huber_eval(x, p):
    a = np.abs(p)
    return np.broadcast_to(np.where(a <= 1.0, 0.5 * p * p, a - 0.5),
                           np.broadcast_shapes(np.shape(x), np.shape(p))).copy()


def _huber_subdiff(x, p):
    g = np.broadcast_to(np.clip(p, -1.0, 1.0),
                        np.broadcast_shapes(np.shape(x), np.shape(p))).copy()
    return g, g.copy()


def abs_hamiltonian():
    """``H(x, p) = |p|``, the support function of ``[-1, 1]``."""
    return HamiltonianSpec(
        name="abs",
        kind="analytic",
        lipschitz=1.0,
        eval_fn=lambda x, p: np.broadcast_to(np.abs(p), np.broadcast_shapes(np.shape(x), np.shape(p))).copy(),
        subdiff_fn=_abs_subdiff,
        breakpoints_fn=_constant_breakpoints(0.0),
    )


def xabs_hamiltonian():
    """``H(x, p) = x |p|`` on ``[0, 1]``."""
    return HamiltonianSpec(
        name="xabs",
        kind="analytic",
        lipschitz=1.0,
        eval_fn=lambda x, p: x * np.abs(p),
        subdiff_fn=_xabs_subdiff,
        breakpoints_fn=_constant_breakpoints(0.0),
    )


def quad_hamiltonian():
    """``p^2/2`` on ``|p| <= 1`` continued as ``|p| - 1/2`` (Huber function)."""
    return HamiltonianSpec(
        name="quad",
        kind="analytic",
        lipschitz=1.0,
        eval_fn=_huber_eval,
        subdiff_fn=_huber_subdiff,
        breakpoints_fn=_constant_breakpoints(-1.0, 1.0),
        metadata={"extension": "huber: |p| - 1/2 for |p| > 1"},
    )


def control_set_hamiltonian(control: ControlSetSpec, name="control"):
    """Hamiltonian ``max_alpha { b(x, alpha) p - f(x, alpha) }`` over a finite grid."""

    def eval_fn(x, p):
        b, f = control.lines(x)
        p = np.asarray(p, dtype=float)[..., None]
        return np.max(b * p - f, axis=-1)

    def subdiff_fn(x, p):
        x, p = np.broadcast_arrays(x, p)
        b, f = control.lines(x)
        vals = b * p[..., None] - f
        top = np.max(vals, axis=-1, keepdims=True)
        active = vals >= top - ARGMAX_TOL
        lo = np.min(np.where(active, b, np.inf), axis=-1)
        hi = np.max(np.where(active, b, -np.inf), axis=-1)
        return lo, hi

    def breakpoints_fn(x):
        x = np.asarray(x, dtype=float)
        b, f = control.lines(x)
        k = control.controls.size
        if k < 2:
            return np.empty(x.shape + (0,))
        i, j = np.triu_indices(k, 1)
        db = b[..., i] - b[..., j]
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = (f[..., i] - f[..., j]) / db
        cand = np.where(np.abs(db) > 0, cand, np.nan)
        # a crossing is a kink only if both lines are active there
        line_val = b[..., i] * cand - f[..., i]
        top = eval_fn(x[..., None], cand)
        scale = 1.0 + np.abs(top)
        cand = np.where(np.abs(line_val - top) <= 1e-10 * scale, cand, np.nan)
        cand = np.sort(cand, axis=-1)
        width = int(np.max(np.sum(np.isfinite(cand), axis=-1), initial=0))
        return cand[..., :width]

    return HamiltonianSpec(
        name=name,
        kind="control-set",
        lipschitz=control.lipschitz(),
        eval_fn=eval_fn,
        subdiff_fn=subdiff_fn,
        breakpoints_fn=breakpoints_fn,
        control=control,
    )


_EXPR_NAMES = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "abs": np.abs, "tanh": np.tanh, "sign": np.sign,
    "minimum": np.minimum, "maximum": np.maximum, "pi": np.pi,
}


def compile_expression(source: str):
    """Compile an arithmetic expression in ``x`` and ``alpha`` to a numpy callable.

    Only arithmetic, numeric literals and a fixed set of numpy functions are
    accepted.
    """
    tree = ast.parse(source, mode="eval")
    allowed = set(_EXPR_NAMES) | {"x", "alpha"}
    for node in ast.walk(tree):
        if isinstance(node, ast.Name) and node.id not in allowed:
            raise ValueError(f"name {node.id!r} not allowed in expression {source!r}")
        if isinstance(node, (ast.Attribute, ast.Subscript, ast.Lambda, ast.comprehension)):
            raise ValueError(f"unsupported syntax in expression {source!r}")
    code = compile(tree, "<expr>", "eval")

    def fn(x, alpha):
        x, alpha = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(alpha, dtype=float))
        out = eval(code, {"__builtins__": {}}, {**_EXPR_NAMES, "x": x, "alpha": alpha})
        return np.broadcast_to(out, x.shape).astype(float)

    return fn


def load_control_file(path, domain=(0.0, 1.0)):
    """Read ``{"alphas": [...], "b": "<expr>", "f": "<expr>"}`` from JSON."""
    data = json.loads(Path(path).read_text())
    control = ControlSetSpec(
        controls=np.asarray(data["alphas"], dtype=float),
        drift=compile_expression(str(data.get("b", "alpha"))),
        cost=compile_expression(str(data.get("f", "0"))),
        domain=tuple(data.get("domain", domain)),
    )
    return control_set_hamiltonian(control, name=f"control:{path}")


BUILTINS = {
    "abs": abs_hamiltonian,
    "xabs": xabs_hamiltonian,
    "quad": quad_hamiltonian,
}


def get_hamiltonian(ident: str, domain=(0.0, 1.0)):
    """Look up a Hamiltonian by id: ``abs``, ``xabs``, ``quad`` or ``control:<file>``."""
    if ident.startswith("control:"):
        return load_control_file(ident.split(":", 1)[1], domain=domain)
    try:
        return BUILTINS[ident]()
    except KeyError:
        raise ValueError(f"unknown Hamiltonian {ident!r}") from None
