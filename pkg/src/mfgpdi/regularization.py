"""Smooth-in-p regularized Hamiltonian families with certified uniform gap.

Each family returns a :class:`RegularizedHamiltonian` carrying ``eval``, the
partial derivative ``dp`` and a bound ``omega`` on ``sup |H_lam - H|``.

Families
--------
moreau-yosida
    Inf-convolution with ``|q - p|^2 / (2 lam)``; gap ``L_H^2 lam / 2``.
mollified
    Convolution with a scaled bump ``rho_lam``; gap ``C_rho L_H lam``.
shifted-71, shifted-72
    Moreau-Yosida envelopes of ``x|p|`` and ``|p|`` translated in ``p`` by an
    oscillating vector and shifted so that ``H_lam(x, 0) = 0``; gap ``2 lam``.
    The realized drift at ``p = 0`` is ``-x cos(x/lam)`` and
    ``-cos(1/lam)`` respectively.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonConvergence, QuadratureError
from .hamiltonian import HamiltonianSpec, abs_hamiltonian, xabs_hamiltonian

FAMILIES = ("moreau-yosida", "mollified", "shifted-71", "shifted-72")

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
_EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class RegularizedHamiltonian:
    base: HamiltonianSpec
    lam: float
    eval_fn: Callable
    dp_fn: Callable
    omega: float
    family: str

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if not 0.0 < self.lam <= 1.0:
            raise ValueError(f"lambda must lie in (0, 1], got {self.lam}")

    @property
    def lipschitz(self):
        return self.base.lipschitz

    def eval(self, x, p):
        return self.eval_fn(np.asarray(x, dtype=float), np.asarray(p, dtype=float))

    def dp(self, x, p):
        return self.dp_fn(np.asarray(x, dtype=float), np.asarray(p, dtype=float))


# --------------------------------------------------------------------------
# proximal map

def _soft_threshold(p, t):
    return np.sign(p) * np.maximum(np.abs(p) - t, 0.0)


def golden_section_prox(base, x, lam, p, tol=1e-12, max_iter=500):
    """Vectorized golden-section minimization of ``H(x,q) + (q-p)^2/(2 lam)``.

    ``lam`` may be an array broadcast against ``x`` and ``p``.

    The minimizer lies within ``lam * L_H`` of ``p``, which fixes the bracket.
    """
    x, p, lam = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(p, dtype=float),
                                    np.asarray(lam, dtype=float))
    shape = x.shape
    x = x.ravel()
    p = p.ravel()
    lam = lam.ravel()
    radius = lam * base.lipschitz
    if np.all(radius == 0.0):
        return p.reshape(shape)

    def objective(q):
        return base.eval(x, q) + (q - p) ** 2 / (2.0 * lam)

    # floor the tolerance at a few ulps of the iterate magnitude
    tol = np.maximum(tol, 8.0 * _EPS * np.maximum(1.0, np.abs(p) + radius))
    a = p - radius
    b = p + radius
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = objective(c)
    fd = objective(d)
    for _ in range(max_iter):
        if np.all(b - a <= tol):
            break
        left = fc < fd
        a = np.where(left, a, c)
        b = np.where(left, d, b)
        new = np.where(left, b - _INVPHI * (b - a), a + _INVPHI * (b - a))
        fnew = objective(new)
        c, d, fc, fd = (
            np.where(left, new, d),
            np.where(left, c, new),
            np.where(left, fnew, fd),
            np.where(left, fc, fnew),
        )
    else:
        raise NonConvergence(
            f"golden-section bracket did not contract below {np.max(tol):.3g} "
            f"(width {np.max(b - a):.3g}); is the base convex?"
        )
    return (0.5 * (a + b)).reshape(shape)


def prox(base, x, lam, p, method="auto"):
    """Proximal point ``argmin_q { H(x,q) + (q-p)^2 / (2 lam) }``.

    Closed forms are used for ``abs`` (soft threshold at ``lam``) and ``xabs``
    (soft threshold at ``lam x``) unless ``method="golden"``.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if method == "auto" and base.name == "abs":
        return np.broadcast_to(_soft_threshold(p, lam), np.broadcast_shapes(x.shape, p.shape)).copy()
    if method == "auto" and base.name == "xabs":
        return _soft_threshold(p, x * lam)
    if method not in ("auto", "golden"):
        raise ValueError(f"unknown prox method {method!r}")
    return golden_section_prox(base, x, lam, p)


def moreau_yosida(base: HamiltonianSpec, lam: float, method="auto"):
    """Moreau-Yosida envelope of ``base`` in ``p``."""

    def eval_fn(x, p):
        q = prox(base, x, lam, p, method)
        return base.eval(x, q) + (q - p) ** 2 / (2.0 * lam)

    def dp_fn(x, p):
        # closed forms avoid cancellation in (p - q) for |p| >> lam
        if method == "auto" and base.name == "abs":
            return np.broadcast_to(np.clip(p / lam, -1.0, 1.0), np.broadcast_shapes(x.shape, p.shape)).copy()
        if method == "auto" and base.name == "xabs":
            return np.clip(p / lam, -x, x)
        q = prox(base, x, lam, p, method)
        bound = base.lipschitz
        return np.clip((p - q) / lam, -bound, bound)

    return RegularizedHamiltonian(
        base=base,
        lam=lam,
        eval_fn=eval_fn,
        dp_fn=dp_fn,
        omega=base.lipschitz ** 2 * lam / 2.0,
        family="moreau-yosida",
    )


# --------------------------------------------------------------------------
# mollification

@dataclass(frozen=True, eq=False)
class MollifierSpec:
    """Bump ``rho`` supported on ``[-1, 1]`` with unit mass.

    ``nodes``/``weights`` is the ``n_q``-point Gauss-Legendre rule on
    ``[-1, 1]``; the profile is renormalized so that the rule integrates it to
    exactly one.
    """

    profile: Callable
    dprofile: Callable
    n_q: int
    c_rho: float
    nodes: np.ndarray
    weights: np.ndarray
    name: str = "custom"

    def rho(self, s):
        return self.profile(s)


def cos2_mollifier(n_q: int = 64):
    """The bump ``cos^2(pi s / 2)`` on ``[-1, 1]``; ``C_rho = 1/2 - 2/pi^2``."""
    if n_q < 3:
        raise QuadratureError(f"mollifier quadrature needs at least 3 nodes, got {n_q}")
    nodes, weights = np.polynomial.legendre.leggauss(n_q)

    def raw(s):
        return np.where(np.abs(s) <= 1.0, np.cos(0.5 * np.pi * s) ** 2, 0.0)

    def draw(s):
        return np.where(np.abs(s) <= 1.0, -0.5 * np.pi * np.sin(np.pi * s), 0.0)

    mass = float(np.sum(weights * raw(nodes)))
    # |s| has a kink at 0: integrate each half on its own
    half = 0.5 * (nodes + 1.0)
    c_rho = float(np.sum(weights * half * raw(half))) / mass
    return MollifierSpec(
        profile=lambda s: raw(s) / mass,
        dprofile=lambda s: draw(s) / mass,
        n_q=n_q,
        c_rho=c_rho,
        nodes=nodes,
        weights=weights,
        name="cos2",
    )


def _panel_rule(base, x, p, lam, moll):
    """Quadrature nodes ``s`` and weights on ``[-1, 1]`` split at base kinks.

    Returns arrays of shape ``x.shape + (panels * n_q,)``.  Kinks of ``H(x, .)``
    at ``k`` sit at ``s = (p - k)/lam``; splitting there keeps the Gauss rule
    spectrally accurate on each smooth piece.
    """
    x, p = np.broadcast_arrays(x, p)
    kinks = base.breakpoints(x)
    s_kinks = (p[..., None] - kinks) / lam
    s_kinks = np.where(np.isfinite(s_kinks), np.clip(s_kinks, -1.0, 1.0), -1.0)
    lo = np.full(x.shape + (1,), -1.0)
    hi = np.full(x.shape + (1,), 1.0)
    edges = np.sort(np.concatenate([lo, s_kinks, hi], axis=-1), axis=-1)
    left = edges[..., :-1, None]
    width = (edges[..., 1:] - edges[..., :-1])[..., None]
    s = left + 0.5 * width * (moll.nodes + 1.0)
    w = 0.5 * width * moll.weights
    new_shape = x.shape + (-1,)
    return s.reshape(new_shape), w.reshape(new_shape)


def _abs_cos2_closed_form(lam):
    """Exact convolution of ``|p|`` with the cos^2 bump, ``t = p/lam``."""

    def eval_fn(x, p):
        x, p = np.broadcast_arrays(x, p)
        t = np.clip(p / lam, -1.0, 1.0)
        tail = 0.5 * (1.0 - t) - np.sin(np.pi * t) / (2.0 * np.pi)
        first = ((1.0 - t * t) / 4.0 - 1.0 / (2.0 * np.pi ** 2)
                 - t * np.sin(np.pi * t) / (2.0 * np.pi) - np.cos(np.pi * t) / (2.0 * np.pi ** 2))
        inner = lam * (t + 2.0 * (first - t * tail))
        return np.where(np.abs(p) >= lam, np.abs(p), inner)

    def dp_fn(x, p):
        x, p = np.broadcast_arrays(x, p)
        t = np.clip(p / lam, -1.0, 1.0)
        return t + np.sin(np.pi * t) / np.pi

    return eval_fn, dp_fn


def mollify(base: HamiltonianSpec, lam: float, moll: MollifierSpec | None = None,
            method: str = "auto"):
    """Convolution of ``H(x, .)`` with ``rho_lam(q) = rho(q/lam)/lam``.

    ``method="auto"`` uses the closed form for ``abs`` with the cos^2 bump and
    kink-split Gauss quadrature otherwise; ``"quadrature"`` forces the latter.
    """
    if moll is None:
        moll = cos2_mollifier()
    if moll.n_q < 3:
        raise QuadratureError(f"mollifier quadrature needs at least 3 nodes, got {moll.n_q}")
    if method not in ("auto", "quadrature"):
        raise ValueError(f"unknown mollification method {method!r}")
    if method == "auto" and base.name == "abs" and moll.name == "cos2":
        eval_fn, dp_fn = _abs_cos2_closed_form(lam)
        return RegularizedHamiltonian(base=base, lam=lam, eval_fn=eval_fn, dp_fn=dp_fn,
                                      omega=moll.c_rho * base.lipschitz * lam, family="mollified")

    def eval_fn(x, p):
        x, p = np.broadcast_arrays(x, p)
        s, w = _panel_rule(base, x, p, lam, moll)
        vals = base.eval(x[..., None], p[..., None] - lam * s)
        return np.sum(w * moll.profile(s) * vals, axis=-1)

    def dp_fn(x, p):
        x, p = np.broadcast_arrays(x, p)
        s, w = _panel_rule(base, x, p, lam, moll)
        vals = base.eval(x[..., None], p[..., None] - lam * s)
        dp = np.sum(w * moll.dprofile(s) * vals, axis=-1) / lam
        # quadrature roundoff can push the slope a few ulps past L_H
        return np.clip(dp, -base.lipschitz, base.lipschitz)

    return RegularizedHamiltonian(
        base=base,
        lam=lam,
        eval_fn=eval_fn,
        dp_fn=dp_fn,
        omega=moll.c_rho * base.lipschitz * lam,
        family="mollified",
    )


# --------------------------------------------------------------------------
# shifted families

def shifted_71(lam: float):
    """Envelope of ``x|p|`` translated by ``x cos(x/lam) lam``, zero at ``p = 0``."""
    base = xabs_hamiltonian()
    env = moreau_yosida(base, lam)

    def shift(x):
        return (x * np.cos(x / lam)) * lam

    def eval_fn(x, p):
        c = np.cos(x / lam)
        return env.eval(x, p - shift(x)) - x * x * c * c * lam / 2.0

    def dp_fn(x, p):
        return env.dp(x, p - shift(x))

    return RegularizedHamiltonian(
        base=base, lam=lam, eval_fn=eval_fn, dp_fn=dp_fn, omega=2.0 * lam, family="shifted-71"
    )


def shifted_72(lam: float):
    """Envelope of ``|p|`` translated by ``cos(1/lam) lam``, zero at ``p = 0``."""
    base = abs_hamiltonian()
    env = moreau_yosida(base, lam)
    c = math.cos(1.0 / lam)
    q = c * lam

    def eval_fn(x, p):
        return env.eval(x, p - q) - c * c * lam / 2.0

    def dp_fn(x, p):
        return env.dp(x, p - q)

    return RegularizedHamiltonian(
        base=base, lam=lam, eval_fn=eval_fn, dp_fn=dp_fn, omega=2.0 * lam, family="shifted-72"
    )


def build_family(tag: str, base: HamiltonianSpec | None, lam: float, quad_nodes: int = 64):
    """Construct a family by CLI tag: ``my``, ``mollify``, ``shift71``, ``shift72``."""
    if tag in ("my", "moreau-yosida"):
        return moreau_yosida(base, lam)
    if tag in ("mollify", "mollified"):
        return mollify(base, lam, cos2_mollifier(quad_nodes))
    if tag in ("shift71", "shifted-71"):
        return shifted_71(lam)
    if tag in ("shift72", "shifted-72"):
        return shifted_72(lam)
    raise ValueError(f"unknown regularization family {tag!r}")
