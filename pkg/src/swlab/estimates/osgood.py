"""Osgood bounds: ``rho(t) <= a + int gamma mu(rho)`` implies
``M(a) - M(rho(t)) <= int gamma`` with ``M(x) = int_x^1 dtau / mu(tau)``.

``M`` is evaluated after the substitution ``tau = exp(-y)``, which turns the
integrand into ``tau / mu(tau)`` on ``y in [0, log(1/x)]``; unit-width cells
in ``y`` (a geometric subdivision toward 0 in ``tau``) each get a
Gauss-Legendre rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Union

import numpy as np
from scipy.integrate import quad, trapezoid
from scipy.optimize import brentq

from ..errors import ConfigurationError

__all__ = [
    "OsgoodProblem",
    "OsgoodResult",
    "linear_modulus",
    "log_modulus",
    "osgood_M",
    "gamma_integral",
    "osgood_solve",
    "osgood_bound",
]

Gamma = Union[Callable[[float], float], tuple]


def linear_modulus() -> Callable[[np.ndarray], np.ndarray]:
    """``mu(r) = r`` (the Gronwall case)."""
    return lambda r: np.asarray(r, float)


def log_modulus(W: float) -> Callable[[np.ndarray], np.ndarray]:
    """``mu(r) = r log(e + W / r)``, nondecreasing with ``int_0 dr / mu = inf``."""
    if W < 0:
        raise ValueError("W must be nonnegative")

    def mu(r):
        r = np.asarray(r, float)
        safe = np.where(r > 0, r, 1.0)
        return np.where(r > 0, r * np.log(math.e + W / safe), 0.0)

    return mu


@dataclass(frozen=True)
class OsgoodProblem:
    """Data of an Osgood bound.

    Parameters
    ----------
    a : float
        Initial level, ``a > 0`` for a finite bound.
    gamma : callable or (times, values)
        Nonnegative integrable weight on ``[t0, t1]``.
    mu : callable
        Continuous nondecreasing modulus with ``mu(0) = 0``.
    t0, t1 : float
    nodes : int
        Gauss-Legendre points per unit cell in ``log(1/tau)``.
    x_max : float
        Upper end of the root search; the bound saturates here.
    """

    a: float
    gamma: Gamma
    mu: Callable
    t0: float = 0.0
    t1: float = 1.0
    nodes: int = 16
    x_max: float = 1e12

    def __post_init__(self):
        if self.a < 0:
            raise ConfigurationError("a must be nonnegative")
        if not self.t1 > self.t0:
            raise ConfigurationError("t1 must exceed t0")
        if self.nodes < 2:
            raise ConfigurationError("nodes must be at least 2")
        probe = np.geomspace(1e-12, self.x_max, 97)
        vals = np.asarray(self.mu(probe), float)
        if abs(float(np.asarray(self.mu(np.array([0.0])))[0])) > 0:
            raise ConfigurationError("mu(0) must vanish")
        if np.any(vals <= 0) or np.any(np.diff(vals) < -1e-12 * np.abs(vals[1:])):
            raise ConfigurationError("mu must be positive and nondecreasing on (0, x_max]")
        if isinstance(self.gamma, tuple):
            t, g = (np.asarray(x, float) for x in self.gamma)
            if t.shape != g.shape or t.ndim != 1 or t.size < 2:
                raise ConfigurationError("gamma samples need matching 1-d times and values")
            if np.any(g < 0):
                raise ConfigurationError("gamma must be nonnegative")


@dataclass
class OsgoodResult:
    """Bound with its ingredients and flags."""

    t: float
    bound: float
    M_a: float
    gamma_integral: float
    saturated: bool = False
    zero_data_limit: bool = False
    extra: dict = field(default_factory=dict)


def osgood_M(mu: Callable, x: float, nodes: int = 16) -> float:
    """``M(x) = int_x^1 dtau / mu(tau)`` for ``x > 0`` (negative when ``x > 1``)."""
    if not x > 0:
        raise ValueError("x must be positive")
    Y = math.log(1.0 / x)
    if Y == 0:
        return 0.0
    g, w = np.polynomial.legendre.leggauss(nodes)
    n_cells = max(1, int(math.ceil(abs(Y))))
    edges = np.linspace(0.0, Y, n_cells + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    y = 0.5 * (hi - lo) * g[None, :] + 0.5 * (hi + lo)
    tau = np.exp(-y)
    vals = tau / np.asarray(mu(tau), float)
    return float(np.sum(0.5 * (hi - lo) * w[None, :] * vals))


def gamma_integral(gamma: Gamma, t0: float, t: float) -> float:
    """``int_{t0}^t gamma``: adaptive quadrature for callables, trapezoid for samples."""
    if t <= t0:
        return 0.0
    if callable(gamma):
        val, _ = quad(gamma, t0, t, limit=200)
        return float(val)
    ts, gs = (np.asarray(x, float) for x in gamma)
    keep = (ts >= t0) & (ts <= t)
    tt = np.concatenate([[t0], ts[keep], [t]])
    gg = np.interp(tt, ts, gs)
    return float(trapezoid(gg, tt))


def osgood_solve(p: OsgoodProblem, t: float) -> OsgoodResult:
    """Largest ``rho`` allowed at time ``t``: the root of ``M(rho) = M(a) - int gamma``.

    With ``a = 0`` every ``a' > 0`` gives a valid bound, so the bound at the
    smallest probe ``a'`` is returned and ``zero_data_limit`` is set;
    ``extra["shrinking"]`` records whether it still decreases with ``a'``
    (it tends to 0 exactly when ``int_0 dr / mu`` diverges).
    """
    if not p.t0 <= t <= p.t1:
        raise ValueError("t must lie in [t0, t1]")
    G = gamma_integral(p.gamma, p.t0, t)
    if p.a == 0:
        probes = [1e-75, 1e-150, 1e-300]
        vals = [osgood_solve(replace(p, a=x), t).bound for x in probes]
        shrinking = bool(vals[2] < vals[1] < vals[0])
        return OsgoodResult(t, vals[2], math.inf, G, zero_data_limit=True,
                            extra={"probes": probes, "bounds": vals, "shrinking": shrinking})
    Ma = osgood_M(p.mu, p.a, p.nodes)
    if G == 0:
        return OsgoodResult(t, p.a, Ma, G)
    target = Ma - G
    M_top = osgood_M(p.mu, p.x_max, p.nodes)
    if target <= M_top:
        return OsgoodResult(t, p.x_max, Ma, G, saturated=True)
    root = brentq(lambda y: osgood_M(p.mu, math.exp(y), p.nodes) - target,
                  math.log(p.a), math.log(p.x_max), xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=400)
    return OsgoodResult(t, math.exp(root), Ma, G)


def osgood_bound(p: OsgoodProblem, t: float) -> float:
    """The Osgood bound on ``rho(t)``."""
    return osgood_solve(p, t).bound
