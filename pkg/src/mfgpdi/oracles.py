"""Closed-form solutions used as independent references.

None of these functions touch the finite element machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class ExactPair:
    u: Callable
    du: Callable
    m: Callable
    dm: Callable


def ex33_pairs():
    """Two classical solutions on ``(-1, 1)`` of the nonmonotone example, ``nu = 1``.

    ``u1 = (1 - x^2)/2``, ``m1 = 1 - exp((x^2 - 1)/2)`` and
    ``u2 = (x^2 - 1)/2``, ``m2 = exp((1 - x^2)/2) - 1``.
    """
    first = ExactPair(
        u=lambda x: 0.5 * (1.0 - np.asarray(x) ** 2),
        du=lambda x: -np.asarray(x, dtype=float),
        m=lambda x: 1.0 - np.exp(0.5 * (np.asarray(x) ** 2 - 1.0)),
        dm=lambda x: -np.asarray(x) * np.exp(0.5 * (np.asarray(x) ** 2 - 1.0)),
    )
    second = ExactPair(
        u=lambda x: 0.5 * (np.asarray(x) ** 2 - 1.0),
        du=lambda x: np.asarray(x, dtype=float),
        m=lambda x: np.exp(0.5 * (1.0 - np.asarray(x) ** 2)) - 1.0,
        dm=lambda x: -np.asarray(x) * np.exp(0.5 * (1.0 - np.asarray(x) ** 2)),
    )
    return first, second


def constant_drift_density(c: float, nu: float = 1.0):
    """Solution of ``-nu m'' - c m' = 1`` on ``(0, 1)`` with ``m(0) = m(1) = 0``.

    Returns ``(m, dm)``.  ``c = +1`` gives ``m = -x + (1 - e^{-x/nu})/(1 - e^{-1/nu})``.
    """
    if c == 0.0:
        return (lambda x: np.asarray(x) * (1.0 - np.asarray(x)) / (2.0 * nu),
                lambda x: (1.0 - 2.0 * np.asarray(x)) / (2.0 * nu))
    k = c / nu
    denom = -math.expm1(-k)

    def m(x):
        x = np.asarray(x, dtype=float)
        return (-x + (-np.expm1(-k * x)) / denom) / c

    def dm(x):
        x = np.asarray(x, dtype=float)
        return (-1.0 + k * np.exp(-k * x) / denom) / c

    return m, dm


def poisson_limit_density(nu: float = 1.0):
    """``m = x(1 - x)/(2 nu)``, the zero-drift KFP solution with ``G = 1``."""
    return constant_drift_density(0.0, nu)


def oscillating_drift_density(j: int, nu: float = 1.0, n_panels: int = 4096):
    """KFP density on ``(0, 1)`` for drift ``-x cos(j x)`` and ``G = 1``.

    Uses the integrating factor
    ``gamma(s) = exp(-(s sin(js))/(j nu) - cos(js)/(j^2 nu))``:

        m(x) = (S Gamma(x) - Sigma(x) Gamma_1) / (nu gamma(x) Gamma_1)

    with ``Gamma(x) = int_0^x gamma``, ``Sigma(x) = int_0^x s gamma`` and
    ``Gamma_1 = Gamma(1)``, ``S = Sigma(1)``.  The cumulative integrals are
    computed by composite 8-point Gauss-Legendre quadrature on ``n_panels``
    equal panels and then interpolated by the exact local quadrature from the
    nearest panel edge.  Returns ``(m, dm)`` callables.
    """
    def gamma(s):
        return np.exp(-(s * np.sin(j * s)) / (j * nu) - np.cos(j * s) / (j * j * nu))

    pts, wts = np.polynomial.legendre.leggauss(8)
    edges = np.linspace(0.0, 1.0, n_panels + 1)

    def panel_integrals(lo, hi, weight):
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        s = mid[..., None] + half[..., None] * pts
        return np.sum(half[..., None] * wts * weight(s) * gamma(s), axis=-1)

    one = lambda s: np.ones_like(s)  # noqa: E731
    ident = lambda s: s  # noqa: E731
    cum_g = np.concatenate([[0.0], np.cumsum(panel_integrals(edges[:-1], edges[1:], one))])
    cum_sg = np.concatenate([[0.0], np.cumsum(panel_integrals(edges[:-1], edges[1:], ident))])
    total_g, total_sg = cum_g[-1], cum_sg[-1]

    def cumulative(x):
        x = np.asarray(x, dtype=float)
        k = np.clip(np.floor(x * n_panels).astype(int), 0, n_panels - 1)
        g = cum_g[k] + panel_integrals(edges[k], x, one)
        sg = cum_sg[k] + panel_integrals(edges[k], x, ident)
        return g, sg

    def m(x):
        x = np.asarray(x, dtype=float)
        g, sg = cumulative(x)
        return (total_sg * g - sg * total_g) / (nu * gamma(x) * total_g)

    c_j = -total_sg / total_g

    def dm(x):
        x = np.asarray(x, dtype=float)
        return (x * np.cos(j * x) * m(x) - (x + c_j)) / nu

    return m, dm


def oscillation_limit_energy(nu: float = 1.0):
    """``int_0^1 x^2 m^2 / (2 nu^2)`` with ``m = x(1-x)/(2 nu)``; equals ``1/840`` at ``nu = 1``."""
    # int_0^1 x^4 (1-x)^2 dx = 1/5 - 2/6 + 1/7 = 1/105
    return (1.0 / 105.0) / (8.0 * nu ** 4)
