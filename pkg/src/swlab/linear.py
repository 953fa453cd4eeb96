"""Exact per-mode semigroups and the exponential integrator for the linearized system.

The linearized shallow-water system for ``(h, u)`` with transport field ``v``
and forcings ``H, G`` reads::

    h_t + v . grad h + div u = H
    u_t - nu (div D(u) + grad div u) + v . grad u + grad h = G

Per Fourier mode the velocity splits into a component along ``xi`` (coupled
to ``h``) and one across ``xi`` (pure viscous decay at rate ``nu |xi|^2 / 2``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence, Union

import numpy as np
from scipy.integrate import trapezoid

from .besov import (
    BesovSpec,
    HybridBesovSpec,
    Trajectory,
    WeightParams,
    block_energy,
    block_norms,
    plain_time_norm,
    weight_omega,
    weighted_norm_E_hybrid,
)
from .errors import CFLError, GridMismatchError, SolverDivergence
from .spectral import (
    DyadicPartition,
    Grid2D,
    SpectralField2D,
    VectorField2D,
    _to_values,
    from_physical_product,
    gradient,
)

__all__ = [
    "State",
    "LinearizedProblem",
    "CoupledPropagator",
    "lame_semigroup",
    "coupled_semigroup",
    "coupled_exponential",
    "step_linearized",
    "solve_linearized",
    "transport_step",
    "transport_solve",
    "lame_forced_solve",
    "cfl_limit",
    "total_energy",
    "energy_table",
    "apriori_monitors",
]

# Below this value of |s^2| t^2 the cosh/sinh pair is summed as a series.
SERIES_THRESHOLD = 1e-2
SERIES_TERMS = 6


@dataclass(frozen=True, eq=False)
class State:
    """Height perturbation ``h`` and velocity ``u`` at time ``t``."""

    t: float
    h: SpectralField2D
    u: VectorField2D
    nu: float

    def __post_init__(self):
        if self.h.grid != self.u.grid:
            raise GridMismatchError("h and u live on different grids")
        if not self.nu > 0:
            raise ValueError("viscosity must be positive")

    @property
    def grid(self) -> Grid2D:
        return self.h.grid

    def is_finite(self) -> bool:
        return self.h.is_finite() and self.u.is_finite() and math.isfinite(self.t)

    @classmethod
    def zero(cls, grid: Grid2D, nu: float = 1.0, t: float = 0.0) -> "State":
        return cls(t, grid.zero(), VectorField2D.zero(grid), nu)


# --------------------------------------------------------------------------
# Per-mode exponentials
# --------------------------------------------------------------------------


def _cosh_sinh(q: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    """``cosh(s t)`` and ``sinh(s t) / s`` for ``s^2 = q`` (real arrays).

    Closed forms are used away from ``q t^2 = 0``; near it a series in ``q t^2``.
    """
    z = q * t * t
    small = np.abs(z) < SERIES_THRESHOLD
    ch = np.empty_like(q)
    sh = np.empty_like(q)
    if np.any(small):
        zs = z[small]
        c_acc = np.zeros_like(zs)
        s_acc = np.zeros_like(zs)
        term = np.ones_like(zs)
        for j in range(SERIES_TERMS):
            c_acc += term / math.factorial(2 * j)
            s_acc += term / math.factorial(2 * j + 1)
            term = term * zs
        ch[small] = c_acc
        sh[small] = t * s_acc
    over = (~small) & (q > 0)
    if np.any(over):
        s = np.sqrt(q[over])
        ch[over] = np.cosh(s * t)
        sh[over] = np.sinh(s * t) / s
    osc = (~small) & (q < 0)
    if np.any(osc):
        w = np.sqrt(-q[osc])
        ch[osc] = np.cos(w * t)
        sh[osc] = np.sin(w * t) / w
    return ch, sh


def coupled_exponential(r: np.ndarray, nu: float, t: float) -> tuple[np.ndarray, ...]:
    """Entries of ``exp(t M)`` with ``M = [[0, -i r], [-i r, -2 nu r^2]]``.

    Returns ``(E11, E12, E21, E22)``; the diagonal is real and the off-diagonal
    purely imaginary.

    With ``m = -nu r^2`` and ``s^2 = nu^2 r^4 - r^2`` the exponential is
    ``e^{mt} (cosh(st) I + sinh(st)/s (M - m I))``. In the overdamped range the
    products with ``e^{mt}`` are formed from the two eigenvalues
    ``lam_- = m - s`` and ``lam_+ = r^2 / lam_-`` to avoid overflow.
    """
    r = np.asarray(r, float)
    m = -nu * r * r
    q = (nu * r * r) ** 2 - r * r
    z = q * t * t
    small = np.abs(z) < SERIES_THRESHOLD
    over = (~small) & (q > 0)
    ch, sh = _cosh_sinh(np.where(over, 0.0, q), t)
    em = np.exp(m * t)
    ec = em * ch
    es = em * sh
    if np.any(over):
        s = np.sqrt(q[over])
        lam_minus = m[over] - s
        lam_plus = (r[over] ** 2) / lam_minus
        ep = np.exp(lam_plus * t)
        en = np.exp(lam_minus * t)
        ec[over] = 0.5 * (ep + en)
        es[over] = 0.5 * (ep - en) / s
    a = nu * r * r
    E11 = ec + a * es
    E22 = ec - a * es
    E12 = -1j * r * es
    return E11, E12, E12.copy(), E22


def _phi_matrix(r: np.ndarray, nu: float, dt: float, E: tuple[np.ndarray, ...]) -> tuple[np.ndarray, ...]:
    """Entries of ``int_0^dt exp(tau M) dtau``.

    Uses ``M^{-1}(exp(dt M) - I)`` where ``||M|| dt`` is not small and a
    power series otherwise.
    """
    E11, E12, E21, E22 = E
    rr = np.where(r > 0, r, 1.0)
    inv = 1.0 / (rr * rr)
    a = 2.0 * nu * r * r
    P11 = (-a * (E11 - 1.0) + 1j * r * E21) * inv
    P12 = (-a * E12 + 1j * r * (E22 - 1.0)) * inv
    P21 = (1j * r * (E11 - 1.0)) * inv
    P22 = (1j * r * E12) * inv
    norm = np.maximum(r, a) * dt
    small = norm < 0.1
    if np.any(small):
        rs = r[small]
        m11 = np.zeros_like(rs, dtype=complex)
        m12 = -1j * rs
        m22 = -2.0 * nu * rs * rs + 0j
        # power iteration of (dt M)^j / (j+1)!
        t11 = np.ones_like(m11)
        t12 = np.zeros_like(m11)
        t21 = np.zeros_like(m11)
        t22 = np.ones_like(m11)
        s11, s12, s21, s22 = t11.copy(), t12.copy(), t21.copy(), t22.copy()
        for j in range(1, 14):
            n11 = (t11 * m11 + t12 * m12) * dt / (j + 1)
            n12 = (t11 * m12 + t12 * m22) * dt / (j + 1)
            n21 = (t21 * m11 + t22 * m12) * dt / (j + 1)
            n22 = (t21 * m12 + t22 * m22) * dt / (j + 1)
            t11, t12, t21, t22 = n11, n12, n21, n22
            s11 += t11
            s12 += t12
            s21 += t21
            s22 += t22
        P11[small] = dt * s11
        P12[small] = dt * s12
        P21[small] = dt * s21
        P22[small] = dt * s22
    return (P11.real + 0j, 1j * P12.imag, 1j * P21.imag, P22.real + 0j)


def _perp_factors(r: np.ndarray, nu: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    x = -0.5 * nu * r * r * dt
    decay = np.exp(x)
    xs = np.where(x != 0, x, 1.0)
    phi1 = np.where(x != 0, np.expm1(xs) / xs, 1.0) * dt
    return decay, phi1


class CoupledPropagator:
    """Tables for one exponential-integrator step of size ``dt``.

    The Nyquist lines are excluded so every symbol used is exactly odd or even
    and real fields stay real.
    """

    def __init__(self, grid: Grid2D, nu: float, dt: float):
        if not dt >= 0:
            raise ValueError("time step must be nonnegative")
        self.grid, self.nu, self.dt = grid, float(nu), float(dt)
        r = grid.radius
        xi1, xi2 = grid.wavevectors
        interior = grid.nyquist_free[0] * grid.nyquist_free[1]
        interior = interior.copy()
        interior[0, 0] = 0.0
        rr = np.where(r > 0, r, 1.0)
        self.k1 = np.where(r > 0, xi1 / rr, 0.0) * interior
        self.k2 = np.where(r > 0, xi2 / rr, 0.0) * interior
        E = coupled_exponential(r, nu, dt)
        self.E = tuple(e * interior for e in E)
        self.P = tuple(e * interior for e in _phi_matrix(r, nu, dt, E))
        ep, pp = _perp_factors(r, nu, dt)
        self.ep = ep * interior
        self.pp = pp * interior

    def _split(self, u1: np.ndarray, u2: np.ndarray):
        return self.k1 * u1 + self.k2 * u2, -self.k2 * u1 + self.k1 * u2

    def _join(self, a: np.ndarray, b: np.ndarray):
        return self.k1 * a - self.k2 * b, self.k2 * a + self.k1 * b

    def advance(self, h: np.ndarray, u1: np.ndarray, u2: np.ndarray,
                nh: np.ndarray | None = None, nu1: np.ndarray | None = None,
                nu2: np.ndarray | None = None):
        """Propagate coefficient tables by ``dt`` with frozen forcing ``(nh, nu1, nu2)``."""
        a, b = self._split(u1, u2)
        E11, E12, E21, E22 = self.E
        h_new = E11 * h + E12 * a
        a_new = E21 * h + E22 * a
        b_new = self.ep * b
        if nh is not None:
            P11, P12, P21, P22 = self.P
            fa, fb = self._split(nu1, nu2)
            h_new = h_new + P11 * nh + P12 * fa
            a_new = a_new + P21 * nh + P22 * fa
            b_new = b_new + self.pp * fb
        u1_new, u2_new = self._join(a_new, b_new)
        return h_new, u1_new, u2_new


@lru_cache(maxsize=8)
def _propagator(grid: Grid2D, nu: float, dt: float) -> CoupledPropagator:
    return CoupledPropagator(grid, nu, dt)


def lame_semigroup(u0: VectorField2D, nu: float, t: float) -> VectorField2D:
    """``exp(t nu Ltilde) u0``: across-``xi`` part decays at ``nu |xi|^2 / 2``,
    along-``xi`` part at ``2 nu |xi|^2``. The mean is unchanged."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    grid = u0.grid
    r2 = grid.radius ** 2
    xi1, xi2 = grid.wavevectors
    rr = np.where(r2 > 0, np.sqrt(r2), 1.0)
    k1 = np.where(r2 > 0, xi1 / rr, 0.0)
    k2 = np.where(r2 > 0, xi2 / rr, 0.0)
    c1, c2 = u0.u1.coefficients, u0.u2.coefficients
    a = k1 * c1 + k2 * c2
    b = -k2 * c1 + k1 * c2
    a = a * np.exp(-2.0 * nu * r2 * t)
    b = b * np.exp(-0.5 * nu * r2 * t)
    return VectorField2D(SpectralField2D(grid, k1 * a - k2 * b, u0.u1.mean),
                         SpectralField2D(grid, k2 * a + k1 * b, u0.u2.mean))


def coupled_semigroup(s: State, t: float) -> State:
    """Exact free flow of the linear system (no transport, no forcing) over ``t``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    prop = CoupledPropagator(s.grid, s.nu, t)
    h, u1, u2 = prop.advance(s.h.coefficients, s.u.u1.coefficients, s.u.u2.coefficients)
    g = s.grid
    return State(s.t + t, SpectralField2D(g, h, s.h.mean),
                 VectorField2D(SpectralField2D(g, u1, s.u.u1.mean), SpectralField2D(g, u2, s.u.u2.mean)),
                 s.nu)


# --------------------------------------------------------------------------
# Transport products and CFL
# --------------------------------------------------------------------------


def cfl_limit(v_values: tuple[np.ndarray, np.ndarray] | None, grid: Grid2D, c_cfl: float) -> float:
    """Largest admissible step ``c_cfl dx / max |v|`` (``inf`` for ``v = 0``)."""
    if v_values is None:
        return math.inf
    speed = float(np.max(np.hypot(v_values[0], v_values[1])))
    if speed == 0:
        return math.inf
    return c_cfl * grid.dx / speed


def _check_cfl(dt: float, v_values, grid: Grid2D, c_cfl: float, where: str = ""):
    lim = cfl_limit(v_values, grid, c_cfl)
    if dt > lim * (1 + 1e-12):
        raise CFLError(f"dt={dt:g} exceeds the CFL bound {lim:g} (c_cfl={c_cfl:g}){where}")


def _vector_values(v: VectorField2D | None):
    if v is None:
        return None
    return (v.u1.values(), v.u2.values())


def _grad_values(c: np.ndarray, grid: Grid2D) -> tuple[np.ndarray, np.ndarray]:
    xi1, xi2 = grid.wavevectors
    ny1, ny2 = grid.nyquist_free
    return (_to_values(1j * xi1 * ny1 * c, 0.0), _to_values(1j * xi2 * ny2 * c, 0.0))


def _advect_coeffs(c: np.ndarray, vv: tuple[np.ndarray, np.ndarray], grid: Grid2D) -> SpectralField2D:
    """Dealiased ``v . grad f`` for the field with coefficients ``c``."""
    g1, g2 = _grad_values(c, grid)
    return from_physical_product(vv[0] * g1 + vv[1] * g2, grid)


def transport_step(f: SpectralField2D, v: VectorField2D | None, g: SpectralField2D | None,
                   dt: float, c_cfl: float = 0.5) -> SpectralField2D:
    """One Heun (RK2) step of ``f_t + v . grad f = g`` with ``v, g`` frozen."""
    grid = f.grid
    vv = _vector_values(v)
    _check_cfl(dt, vv, grid, c_cfl)

    def rhs(x: SpectralField2D) -> SpectralField2D:
        out = g if g is not None else grid.zero()
        if vv is not None:
            out = out - _advect_coeffs(x.coefficients, vv, grid)
        return out

    k1 = rhs(f)
    if vv is None:
        return f + k1 * dt
    f1 = f + k1 * dt
    k2 = rhs(f1)
    return f + (k1 + k2) * (0.5 * dt)


def transport_solve(f0: SpectralField2D, v, g, dt: float, n_steps: int,
                    c_cfl: float = 0.5) -> list[SpectralField2D]:
    """Repeated :func:`transport_step`; ``v`` and ``g`` may be fields or per-step lists."""
    out = [f0]
    f = f0
    for i in range(n_steps):
        f = transport_step(f, _pick(v, i), _pick(g, i), dt, c_cfl)
        out.append(f)
    return out


def lame_forced_solve(u0: VectorField2D, g, nu: float, dt: float, n_steps: int) -> list[VectorField2D]:
    """Exponential-integrator solution of ``u_t - nu Ltilde u = g`` with step-frozen ``g``."""
    grid = u0.grid
    r2 = grid.radius ** 2
    xi1, xi2 = grid.wavevectors
    rr = np.where(r2 > 0, np.sqrt(r2), 1.0)
    k1 = np.where(r2 > 0, xi1 / rr, 0.0)
    k2 = np.where(r2 > 0, xi2 / rr, 0.0)
    factors = []
    for rate in (2.0 * nu * r2, 0.5 * nu * r2):
        x = -rate * dt
        xs = np.where(x != 0, x, 1.0)
        factors.append((np.exp(x), np.where(x != 0, np.expm1(xs) / xs, 1.0) * dt))
    (ea, pa), (eb, pb) = factors
    out = [u0]
    c1, c2 = u0.u1.coefficients, u0.u2.coefficients
    m1, m2 = u0.u1.mean, u0.u2.mean
    for i in range(n_steps):
        a = k1 * c1 + k2 * c2
        b = -k2 * c1 + k1 * c2
        gi = _pick(g, i)
        a, b = ea * a, eb * b
        if gi is not None:
            ga = k1 * gi.u1.coefficients + k2 * gi.u2.coefficients
            gb = -k2 * gi.u1.coefficients + k1 * gi.u2.coefficients
            a = a + pa * ga
            b = b + pb * gb
            m1 += dt * gi.u1.mean
            m2 += dt * gi.u2.mean
        c1, c2 = k1 * a - k2 * b, k2 * a + k1 * b
        out.append(VectorField2D(SpectralField2D(grid, c1, m1), SpectralField2D(grid, c2, m2)))
    return out


def _pick(seq, i: int):
    if seq is None or isinstance(seq, (SpectralField2D, VectorField2D)):
        return seq
    return seq[i]


# --------------------------------------------------------------------------
# Linearized problem
# --------------------------------------------------------------------------

Series = Union[None, SpectralField2D, VectorField2D, Sequence]


@dataclass(frozen=True, eq=False)
class LinearizedProblem:
    """Data of one linearized solve.

    ``v``, ``forcing_H`` and ``forcing_G`` are None (absent), a single field
    (constant in time), a :class:`Trajectory` holding a ``"u"`` series, or a
    sequence sampled at the step times ``i dt``.
    """

    initial: State
    dt: float
    T: float
    partition: DyadicPartition
    v: Series = None
    forcing_H: Series = None
    forcing_G: Series = None
    c_cfl: float = 0.5
    keep_fields: bool = True
    monitors: bool = True
    weights: WeightParams | None = None

    def __post_init__(self):
        if not (self.dt > 0 and self.T >= 0):
            raise ValueError("dt must be positive and T nonnegative")
        n = self.n_steps
        if abs(n * self.dt - self.T) > 1e-9 * max(self.T, 1.0):
            raise ValueError(f"T={self.T} is not a multiple of dt={self.dt}")
        if self.initial.grid != self.partition.grid:
            raise GridMismatchError("initial state and partition live on different grids")
        if isinstance(self.v, Trajectory):
            object.__setattr__(self, "v", self.v.series("u"))
        for name in ("v", "forcing_H", "forcing_G"):
            seq = getattr(self, name)
            if seq is None or isinstance(seq, (SpectralField2D, VectorField2D)):
                continue
            if len(seq) < n:
                raise ValueError(f"{name} has {len(seq)} samples, need at least {n}")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def nu(self) -> float:
        return self.initial.nu

    def sample(self, name: str, i: int):
        return _pick(getattr(self, name), i)


def step_linearized(s: State, dt: float, v: VectorField2D | None = None,
                    H: SpectralField2D | None = None, G: VectorField2D | None = None,
                    c_cfl: float = 0.5) -> State:
    """One ETD1 step: exact free flow plus the propagated left-endpoint forcing
    ``(-v . grad h + H, -v . grad u + G)``."""
    vv = _vector_values(v)
    _check_cfl(dt, vv, s.grid, c_cfl)
    return _step(s, dt, vv, H, G, _propagator(s.grid, s.nu, float(dt)))


def _step(s: State, dt: float, vv, H, G, prop: CoupledPropagator) -> State:
    grid = s.grid
    h, u1, u2 = s.h.coefficients, s.u.u1.coefficients, s.u.u2.coefficients
    if vv is None and H is None and G is None:
        hn, u1n, u2n = prop.advance(h, u1, u2)
        return State(s.t + dt, SpectralField2D(grid, hn, s.h.mean),
                     VectorField2D(SpectralField2D(grid, u1n, s.u.u1.mean),
                                   SpectralField2D(grid, u2n, s.u.u2.mean)), s.nu)
    zero = np.zeros(grid.shape, dtype=complex)
    nh, n1, n2 = zero, zero, zero
    mh = m1 = m2 = 0.0
    if vv is not None:
        ah = _advect_coeffs(h, vv, grid)
        a1 = _advect_coeffs(u1, vv, grid)
        a2 = _advect_coeffs(u2, vv, grid)
        nh, n1, n2 = -ah.coefficients, -a1.coefficients, -a2.coefficients
        mh, m1, m2 = -ah.mean, -a1.mean, -a2.mean
    if H is not None:
        nh = nh + H.coefficients
        mh += H.mean
    if G is not None:
        n1 = n1 + G.u1.coefficients
        n2 = n2 + G.u2.coefficients
        m1 += G.u1.mean
        m2 += G.u2.mean
    hn, u1n, u2n = prop.advance(h, u1, u2, nh, n1, n2)
    return State(s.t + dt, SpectralField2D(grid, hn, s.h.mean + dt * mh),
                 VectorField2D(SpectralField2D(grid, u1n, s.u.u1.mean + dt * m1),
                               SpectralField2D(grid, u2n, s.u.u2.mean + dt * m2)), s.nu)


def solve_linearized(p: LinearizedProblem) -> Trajectory:
    """Integrate the linearized system from ``p.initial`` to ``p.T``.

    The trajectory holds the ``"h"`` and ``"u"`` series (if ``keep_fields``),
    their block norms, and in ``meta["energy"]`` the per-block dyadic energies.
    With ``monitors`` set, ``meta["monitors"]`` records the a priori estimate
    quantities.
    """
    grid = p.initial.grid
    prop = _propagator(grid, p.nu, float(p.dt))
    s = p.initial
    states = [s]
    for i in range(p.n_steps):
        v = p.sample("v", i)
        vv = _vector_values(v)
        _check_cfl(p.dt, vv, grid, p.c_cfl, where=f" at step {i}")
        nxt = _step(s, p.dt, vv, p.sample("forcing_H", i), p.sample("forcing_G", i), prop)
        if not nxt.is_finite():
            raise SolverDivergence(f"non-finite state at step {i + 1}", last_state=s, step=i + 1)
        s = nxt
        states.append(s)
    times = p.dt * np.arange(p.n_steps + 1)
    traj = Trajectory.from_series(p.partition, times,
                                  {"h": [st.h for st in states], "u": [st.u for st in states]},
                                  keep_fields=True,
                                  meta={"nu": p.nu, "dt": p.dt, "t0": p.initial.t})
    traj.meta["energy"] = energy_table(traj)
    if p.monitors:
        traj.meta["monitors"] = apriori_monitors(traj, p)
    if not p.keep_fields:
        traj = Trajectory(traj.partition, traj.times, None, traj.block_l2, traj.meta)
    return traj


# --------------------------------------------------------------------------
# Energies and monitors
# --------------------------------------------------------------------------


def total_energy(h: SpectralField2D, u: VectorField2D, p: DyadicPartition,
                 weights: np.ndarray | None = None) -> float:
    """``sum_k w_k E_k`` with the regime-split block energies (``w = 1`` by default)."""
    vals = np.array([block_energy(h, u, k, p).value for k in p.block_indices])
    if weights is not None:
        vals = vals * weights
    return float(np.sum(vals))


def energy_table(traj: Trajectory) -> np.ndarray:
    """Per-time, per-block dyadic energies ``E_k(t_i)``."""
    p = traj.partition
    hs, us = traj.series("h"), traj.series("u")
    return np.array([[block_energy(h, u, k, p).value for k in p.block_indices]
                     for h, u in zip(hs, us)])


def _series_list(seq, n: int) -> list | None:
    if seq is None:
        return None
    return [_pick(seq, min(i, n - 1)) for i in range(n + 1)]


def apriori_monitors(traj: Trajectory, p: LinearizedProblem) -> dict:
    """Both sides of the two a priori estimates along a solver trajectory.

    The right sides are formed with every unspecified constant set to 1, so
    ``ratio = lhs / rhs`` is the empirical constant.
    """
    part = traj.partition
    n = p.n_steps
    times = traj.times
    ks = np.arange(part.k_min, part.k_max + 1)
    b0 = BesovSpec(0.0)
    b1 = BesovSpec(1.0)
    b2 = BesovSpec(2.0)
    hy01 = HybridBesovSpec(0.0, 1.0)
    hy21 = HybridBesovSpec(2.0, 1.0)
    T = float(times[-1])
    wp = p.weights or WeightParams(T=T, k_max=part.k_max)
    if wp.T != T:
        wp = WeightParams(c=wp.c, T=T, k_max=wp.k_max)
    omega = np.array([float(weight_omega(int(k), T, wp)) for k in ks])

    e_blocks0 = traj.meta["energy"][0]
    E0 = float(np.sum(e_blocks0))

    def tab(series, fn):
        if series is None:
            return np.zeros((times.size, part.n_blocks))
        return np.array([fn(x) for x in series])

    H = _series_list(p.forcing_H, n) if p.forcing_H is not None else None
    G = _series_list(p.forcing_G, n) if p.forcing_G is not None else None
    V = _series_list(p.v, n) if p.v is not None else None
    H_blocks = tab(H, lambda f: block_norms(f, part))
    gradH_blocks = tab(H, lambda f: block_norms(gradient(f), part))
    G_blocks = tab(G, lambda f: block_norms(f, part))
    V_blocks = tab(V, lambda f: block_norms(f, part))

    def l1(values):
        return float(trapezoid(values, times)) if times.size > 1 else 0.0

    def l2(values):
        return float(np.sqrt(trapezoid(values ** 2, times))) if times.size > 1 else 0.0

    w_h01 = hy01.weights(ks)
    w_h21 = hy21.weights(ks)
    u_b = traj.blocks("u")
    h_b = traj.blocks("h")
    u_B0 = u_b @ b0.weights(ks)
    u_B1 = u_b @ b1.weights(ks)
    u_B2 = u_b @ b2.weights(ks)
    h_H01 = h_b @ w_h01
    h_H21 = h_b @ w_h21
    v_B1 = V_blocks @ b1.weights(ks)
    v_B2 = V_blocks @ b2.weights(ks)

    lhs_e = float(np.max(u_B0) + np.max(h_H01) + l1(h_H21))
    bracket_e = l1(H_blocks @ w_h01) + l1(G_blocks @ b0.weights(ks)) + l1(v_B2 * (u_B0 + h_H01))
    rhs_e = E0 + bracket_e

    h_E = weighted_norm_E_hybrid(traj, 0.0, 1.0, wp, component="h")
    lhs_s = l1(u_B2) + l2(u_B1) + h_E
    forcing_s = float(np.sum(omega * e_blocks0))
    if times.size > 1:
        h_part = np.where(ks >= 1, trapezoid(gradH_blocks, times, axis=0),
                          trapezoid(H_blocks, times, axis=0))
        forcing_s += float(np.sum(omega * (trapezoid(G_blocks, times, axis=0) + h_part)))
    rhs_s = forcing_s + l2(u_B1) * l2(v_B1) + h_E * l1(v_B2)
    return {
        "E0": E0,
        "lhs_energy": lhs_e,
        "rhs_energy": rhs_e,
        "bracket_energy": bracket_e,
        "ratio_energy": lhs_e / rhs_e if rhs_e > 0 else 0.0,
        "lhs_smoothing": lhs_s,
        "rhs_smoothing": rhs_s,
        "ratio_smoothing": lhs_s / rhs_s if rhs_s > 0 else 0.0,
        "u_Linf_B0": float(np.max(u_B0)),
        "u_L1_B2": l1(u_B2),
        "u_L2_B1": l2(u_B1),
        "h_Linf_B01": float(np.max(h_H01)),
        "h_L1_B21": l1(h_H21),
        "h_E01": h_E,
    }
