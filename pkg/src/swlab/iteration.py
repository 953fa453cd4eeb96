"""Picard scheme for the nonlinear system, smallness gates and diagnostics.

Heights are normalized: the physical height is ``hbar0 * (1 + h)``, so every
threshold below acts on ``1 + h`` and ``hbar0`` only scales reported values.
The nonlinear system solved in the limit is::

    h_t + div u + div(h u) = 0
    u_t - nu (div D(u) + grad div u) + u . grad u + grad h = G(h, u)

with ``G_i = nu (sum_j (d_j h / (1 + h)) D(u)_ji + (d_i h / (1 + h)) div u)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np
from scipy.integrate import trapezoid

from .besov import (
    BesovSpec,
    HybridBesovSpec,
    Trajectory,
    WeightParams,
    besov_norm,
    block_energy,
    block_norms,
    hybrid_norm,
    weight_omega,
    weighted_norm_E_hybrid,
)
from .errors import ConfigurationError, GateViolation, SolverDivergence, VacuumProximityError
from .linear import LinearizedProblem, State, solve_linearized
from .spectral import (
    DyadicPartition,
    SpectralField2D,
    VectorField2D,
    _to_values,
    deformation,
    derivative,
    divergence,
    evaluate_at,
    from_physical_product,
    l2_norm,
    lame,
    multiply,
)

__all__ = [
    "IterationConfig",
    "GateReport",
    "IterateRecord",
    "IterationReport",
    "initial_energy",
    "truncate_initial",
    "select_truncation_offset",
    "nonlinear_H",
    "nonlinear_G",
    "smallness_check",
    "picard_iterate",
    "residual",
    "flow_map",
    "height_representation_check",
    "convergence_verdict",
]


@dataclass(frozen=True)
class IterationConfig:
    """Parameters of the Picard scheme and its smallness gates.

    Parameters
    ----------
    N : int
        Initial-data truncation offset: iterate ``n + 1`` starts from blocks
        ``|k| <= n + N``.
    T, dt : float
        Horizon and time step.
    eta, K : float
        Smallness level and bound multiplier of the gates.
    nu : float
        Viscosity.
    hbar0 : float
        Reference height; heights are reported as ``hbar0 * (1 + h)``.
    max_iters : int
    conv_tol : float
        Stop once the successive-difference norm drops below this value.
    c : float
        Weight decay constant.
    gate_C : float
        The generic constant of the gates.
    smallness_c : float
        Threshold of the data smallness condition.
    delta_floor : float
        Vacuum guard on ``1 + h``.
    c_cfl : float
    """

    N: int = 8
    T: float = 0.5
    eta: float = 0.05
    K: float = 4.0
    nu: float = 1.0
    hbar0: float = 1.0
    max_iters: int = 15
    conv_tol: float = 1e-12
    c: float = 0.125
    dt: float = 0.01
    gate_C: float = 1.0
    smallness_c: float = 1e-3
    delta_floor: float = 0.1
    c_cfl: float = 0.5

    def __post_init__(self):
        for name in ("T", "eta", "K", "nu", "hbar0", "conv_tol", "dt", "c", "gate_C", "smallness_c"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.N < 0 or self.max_iters < 1:
            raise ConfigurationError("N must be >= 0 and max_iters >= 1")
        if not 0 < self.delta_floor < 0.5:
            raise ConfigurationError("delta_floor must lie in (0, 1/2)")
        n = round(self.T / self.dt)
        if abs(n * self.dt - self.T) > 1e-9 * self.T:
            raise ConfigurationError("T must be a multiple of dt")


# --------------------------------------------------------------------------
# Data preparation
# --------------------------------------------------------------------------


def initial_energy(h0: SpectralField2D, u0: VectorField2D, p: DyadicPartition) -> tuple[float, float, float]:
    """``E0 = sum_k E_k(0)`` and the pair ``(||h0||_{Btilde^{0,1}}, ||u0||_{B^0})``."""
    E0 = float(sum(block_energy(h0, u0, k, p).value for k in p.block_indices))
    hn = hybrid_norm(h0, HybridBesovSpec(0.0, 1.0), p, check_coverage=False)
    un = besov_norm(u0, BesovSpec(0.0), p, check_coverage=False)
    return E0, hn, un


def _truncation_mask(p: DyadicPartition, level: int) -> np.ndarray:
    mask = np.zeros(p.grid.shape)
    for k in p.block_indices:
        if abs(k) <= level:
            mask = mask + p.mask(k)
    return mask


def truncate_initial(h0: SpectralField2D, u0: VectorField2D, n: int, N: int,
                     p: DyadicPartition) -> tuple[SpectralField2D, VectorField2D]:
    """Keep the blocks ``|k| <= n + N`` of the data; means are kept unchanged."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    level = n + N
    if level >= max(abs(p.k_min), abs(p.k_max)):
        return h0, u0
    mask = _truncation_mask(p, level)

    def cut(f: SpectralField2D) -> SpectralField2D:
        return SpectralField2D(f.grid, f.coefficients * mask, f.mean)

    return cut(h0), u0.map(cut)


def select_truncation_offset(h0: SpectralField2D, u0: VectorField2D, p: DyadicPartition,
                             N_min: int = 0, bound: float = 0.75) -> int:
    """Smallest ``N >= N_min`` with ``min(1 + truncated h0) >= bound`` for every ``n >= 0``."""
    top = max(abs(p.k_min), abs(p.k_max))
    mins = {}
    for level in range(N_min, top + 1):
        h, _ = truncate_initial(h0, u0, 0, level, p)
        mins[level] = float(np.min(1.0 + h.values()))
    for N in range(N_min, top + 1):
        if all(mins[level] >= bound for level in range(N, top + 1)):
            return N
    raise ConfigurationError(f"no truncation offset keeps 1 + h0 above {bound}")


# --------------------------------------------------------------------------
# Nonlinear forcings
# --------------------------------------------------------------------------


def nonlinear_H(h: SpectralField2D, u: VectorField2D) -> SpectralField2D:
    """``H = -h div u`` (dealiased, mean included)."""
    return -multiply(h, divergence(u))


def _check_height(q: np.ndarray, delta_floor: float):
    m = float(np.min(q))
    if m <= delta_floor:
        raise VacuumProximityError(f"1 + h reaches {m:.4g} <= {delta_floor:g}", min_height=m)


def nonlinear_G(h: SpectralField2D, u: VectorField2D, nu: float, delta_floor: float = 0.1) -> VectorField2D:
    """``G_i = nu (sum_j (d_j h/(1+h)) D(u)_ji + (d_i h/(1+h)) div u)``, dealiased."""
    grid = h.grid
    q = 1.0 + h.values()
    _check_height(q, delta_floor)
    xi1, xi2 = grid.wavevectors
    ny1, ny2 = grid.nyquist_free
    g1 = _to_values(1j * xi1 * ny1 * h.coefficients, 0.0) / q
    g2 = _to_values(1j * xi2 * ny2 * h.coefficients, 0.0) / q
    D = deformation(u)
    d11, d12, d22 = D[0][0].values(), D[0][1].values(), D[1][1].values()
    dv = d11 + d22
    G1 = nu * (g1 * d11 + g2 * d12 + g1 * dv)
    G2 = nu * (g1 * d12 + g2 * d22 + g2 * dv)
    return VectorField2D(from_physical_product(G1, grid), from_physical_product(G2, grid))


# --------------------------------------------------------------------------
# Gates
# --------------------------------------------------------------------------


@dataclass
class GateReport:
    """Outcome of the data smallness condition and the four gates."""

    data_size: float
    smallness_c: float
    smallness_ok: bool
    E0: float
    eta: float
    K: float
    C: float
    T: float
    c: float
    k0: int
    R1: bool
    R2: bool
    R3: bool
    R4: bool
    values: dict = field(default_factory=dict)
    sensitive_to_C: dict = field(default_factory=dict)

    @property
    def gates_pass(self) -> bool:
        return self.R1 and self.R2 and self.R3 and self.R4

    @property
    def all_pass(self) -> bool:
        return self.smallness_ok and self.gates_pass

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gates_pass"] = self.gates_pass
        return d


def _gates(E0: float, eta: float, K: float, C: float, T: float, c: float,
           u_blocks: np.ndarray, block_E: np.ndarray, p: DyadicPartition) -> tuple[dict, dict, int]:
    ks = np.arange(p.k_min, p.k_max + 1)
    wp = WeightParams(c=c, T=T, k_max=p.k_max)
    omega = np.array([float(weight_omega(int(k), T, wp)) for k in ks])
    vals: dict = {}
    ok: dict = {}
    vals["exp_C_eta"] = math.exp(C * eta)
    vals["K_growth"] = K * (1 + K * E0) ** 3 * eta
    ok["R1"] = vals["exp_C_eta"] <= 2 and vals["K_growth"] <= 1
    # k0 >= 1: first block index whose velocity tail is small enough
    tail_level = eta / (16 * C * K * E0) if E0 > 0 else math.inf
    k0 = max(1, p.k_max + 1)
    for cand in range(1, p.k_max + 2):
        tail = float(np.sum(u_blocks[ks >= cand]))
        if tail <= tail_level:
            k0 = cand
            break
    vals["k0_tail_level"] = tail_level
    limit = 1.0 / (16 * C * K * E0 * eta) if E0 > 0 else math.inf
    vals["omega_max_low"] = float(np.max(omega[ks <= k0])) if np.any(ks <= k0) else 0.0
    vals["omega_limit"] = limit
    ok["R2"] = vals["omega_max_low"] <= limit
    Q0 = float(np.sum(omega * block_E))
    vals["Q0"] = Q0
    r3 = [C * eta <= 0.5,
          C * Q0 <= eta / 8,
          C * (1 + K * E0) ** 5 * eta < 0.125,
          C * K * E0 * (-math.expm1(-c * T)) * (E0 + K * E0 * eta) <= eta / 8]
    vals["R3_parts"] = r3
    ok["R3"] = all(r3)
    vals["R4_value"] = (1 + C * K * E0) * eta
    ok["R4"] = vals["R4_value"] <= 0.25
    return ok, vals, k0


def smallness_check(h0: SpectralField2D, u0: VectorField2D, cfg: IterationConfig,
                    p: DyadicPartition) -> GateReport:
    """Evaluate the data smallness condition and gates R1-R4 for ``cfg``.

    Gate sensitivity to ``gate_C`` is probed by re-evaluating at ``C/2`` and ``2C``.
    """
    E0, hn, un = initial_energy(h0, u0, p)
    size = hn + un
    u_blocks = block_norms(u0, p)
    block_E = np.array([block_energy(h0, u0, k, p).value for k in p.block_indices])
    ok, vals, k0 = _gates(E0, cfg.eta, cfg.K, cfg.gate_C, cfg.T, cfg.c, u_blocks, block_E, p)
    sens = {}
    for factor in (0.5, 2.0):
        alt, _, _ = _gates(E0, cfg.eta, cfg.K, cfg.gate_C * factor, cfg.T, cfg.c, u_blocks, block_E, p)
        for name in ("R1", "R2", "R3", "R4"):
            sens[name] = sens.get(name, False) or (alt[name] != ok[name])
    vals["norm_h0"] = hn
    vals["norm_u0"] = un
    return GateReport(size, cfg.smallness_c, size <= cfg.smallness_c * cfg.hbar0, E0, cfg.eta, cfg.K,
                      cfg.gate_C, cfg.T, cfg.c, k0, ok["R1"], ok["R2"], ok["R3"], ok["R4"],
                      vals, sens)


# --------------------------------------------------------------------------
# Picard iteration
# --------------------------------------------------------------------------


@dataclass
class IterateRecord:
    """Diagnostics of one Picard iterate ``n``."""

    n: int
    norms: dict
    min_height: float
    diff: float
    ratio: float | None
    bound_small: float
    bound_energy: float
    holds_small: bool
    holds_energy: bool

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class IterationReport:
    """Per-iterate diagnostics, gates and the convergence verdict."""

    E0: float
    data_size: float
    gates: GateReport
    N: int
    hbar0: float
    iterates: list = field(default_factory=list)
    converged: bool = False
    status: str = "running"

    @property
    def diffs(self) -> list[float]:
        return [it.diff for it in self.iterates]

    @property
    def min_height(self) -> float:
        return min((it.min_height for it in self.iterates), default=1.0)

    def summary(self) -> dict:
        return {
            "schema": "swlab.iterate.summary/1",
            "E0": self.E0,
            "data_size": self.data_size,
            "N": self.N,
            "hbar0": self.hbar0,
            "iterations": len(self.iterates),
            "converged": self.converged,
            "status": self.status,
            "min_height": self.min_height,
            "min_physical_height": self.hbar0 * self.min_height,
            "diffs": self.diffs,
            "gates": self.gates.to_dict(),
        }

    def records(self) -> list[dict]:
        out = []
        for it in self.iterates:
            rec = {"schema": "swlab.iterate/1"}
            rec.update(it.to_dict())
            out.append(rec)
        return out


def convergence_verdict(diffs: Sequence[float], conv_tol: float, run: int = 3) -> bool:
    """Converged when the last difference is below ``conv_tol`` and either it is
    exactly zero or the trailing ratios (up to ``run`` of them, at least one)
    are all below one."""
    if not diffs or not diffs[-1] < conv_tol:
        return False
    if diffs[-1] == 0:
        return True
    if len(diffs) < 2:
        return False
    tail = diffs[-(min(run, len(diffs) - 1) + 1):]
    return all(b < a for a, b in zip(tail[:-1], tail[1:]))


def _iterate_norms(traj: Trajectory, wp: WeightParams) -> dict:
    p = traj.partition
    ks = np.arange(p.k_min, p.k_max + 1)
    t = traj.times
    u_b, h_b = traj.blocks("u"), traj.blocks("h")
    u_B0 = u_b @ (2.0 ** (0 * ks))
    u_B1 = u_b @ (2.0 ** ks)
    u_B2 = u_b @ (4.0 ** ks)
    h01 = h_b @ HybridBesovSpec(0.0, 1.0).weights(ks)
    h21 = h_b @ HybridBesovSpec(2.0, 1.0).weights(ks)
    one = t.size > 1
    return {
        "u_Linf_B0": float(np.max(u_B0)),
        "u_L1_B2": float(trapezoid(u_B2, t)) if one else 0.0,
        "u_L2_B1": float(np.sqrt(trapezoid(u_B1 ** 2, t))) if one else 0.0,
        "h_Linf_B01": float(np.max(h01)),
        "h_L1_B21": float(trapezoid(h21, t)) if one else 0.0,
        "h_E01": weighted_norm_E_hybrid(traj, 0.0, 1.0, wp, component="h"),
    }


def _sup_difference(a: Trajectory, b: Trajectory | None) -> float:
    """``sup_t (||h_a - h_b||_{Btilde^{0,1}} + ||u_a - u_b||_{B^0})``."""
    p = a.partition
    hs = HybridBesovSpec(0.0, 1.0)
    b0 = BesovSpec(0.0)
    worst = 0.0
    ha, ua = a.series("h"), a.series("u")
    if b is None:
        for h, u in zip(ha, ua):
            worst = max(worst, hybrid_norm(h, hs, p, False) + besov_norm(u, b0, p, False))
        return worst
    hb, ub = b.series("h"), b.series("u")
    for h1, u1, h2, u2 in zip(ha, ua, hb, ub):
        d = hybrid_norm(h1 - h2, hs, p, False) + besov_norm(u1 - u2, b0, p, False)
        worst = max(worst, d)
    return worst


def picard_iterate(h0: SpectralField2D, u0: VectorField2D, cfg: IterationConfig,
                   p: DyadicPartition) -> tuple[IterationReport, Trajectory]:
    """Run the Picard scheme from ``(h^0, u^0) = (0, 0)``.

    Iterate ``n + 1`` solves the linearized system with transport ``u^n``,
    forcings ``H(h^n, u^n)`` and ``G(h^n, u^n)``, and data truncated to blocks
    ``|k| <= n + N``. The returned trajectory is the last iterate; its ``meta``
    holds the transport and height forcing series that produced it.

    Raises
    ------
    VacuumProximityError
        ``1 + h`` reached ``cfg.delta_floor``.
    GateViolation
        Gate R4 fails and ``1 + h`` dropped below one half.
    SolverDivergence
        A non-finite value appeared.
    """
    grid = p.grid
    gates = smallness_check(h0, u0, cfg, p)
    E0 = gates.E0
    report = IterationReport(E0, gates.data_size, gates, cfg.N, cfg.hbar0)
    wp = WeightParams(c=cfg.c, T=cfg.T, k_max=p.k_max)
    n_steps = int(round(cfg.T / cfg.dt))

    prev: Trajectory | None = None
    prev_v = prev_H = None
    for n in range(cfg.max_iters):
        hd, ud = truncate_initial(h0, u0, n, cfg.N, p)
        if prev is None:
            v = H = G = None
        else:
            hs, us = prev.series("h"), prev.series("u")
            v = us[:n_steps]
            H = [nonlinear_H(h, u) for h, u in zip(hs[:n_steps], us[:n_steps])]
            try:
                G = [nonlinear_G(h, u, cfg.nu, cfg.delta_floor) for h, u in zip(hs[:n_steps], us[:n_steps])]
            except VacuumProximityError as exc:
                report.status = "vacuum"
                exc.report = report
                raise
        problem = LinearizedProblem(State(0.0, hd, ud, cfg.nu), cfg.dt, cfg.T, p, v=v,
                                    forcing_H=H, forcing_G=G, c_cfl=cfg.c_cfl, monitors=False)
        try:
            traj = solve_linearized(problem)
        except SolverDivergence:
            report.status = "diverged"
            raise
        min_h = min(float(np.min(1.0 + h.values())) for h in traj.series("h"))
        diff = _sup_difference(traj, prev)
        last = report.iterates[-1].diff if report.iterates else None
        ratio = (diff / last) if last else None
        norms = _iterate_norms(traj, wp)
        b_small = norms["u_L1_B2"] + norms["u_L2_B1"] + norms["h_E01"]
        b_energy = norms["u_Linf_B0"] + norms["h_Linf_B01"] + norms["h_L1_B21"]
        report.iterates.append(IterateRecord(n + 1, norms, min_h, diff, ratio, b_small, b_energy,
                                             b_small <= cfg.eta, b_energy <= cfg.K * E0 * (1 + 1e-12)))
        if min_h <= cfg.delta_floor:
            report.status = "vacuum"
            raise VacuumProximityError(f"1 + h reaches {min_h:.4g} at iterate {n + 1}",
                                       min_height=min_h, report=report)
        if min_h < 0.5 and not gates.R4:
            report.status = "gate"
            raise GateViolation(f"gate R4 fails and 1 + h drops to {min_h:.4g}", report=report)
        traj.meta["transport"] = v
        traj.meta["forcing_H"] = H
        prev = traj
        if diff < cfg.conv_tol:
            break
    report.converged = convergence_verdict(report.diffs, cfg.conv_tol)
    report.status = "converged" if report.converged else "not_converged"
    return report, prev


# --------------------------------------------------------------------------
# Residual and characteristics
# --------------------------------------------------------------------------


def residual(traj: Trajectory, nu: float) -> tuple[float, float]:
    """``L^1_t L^2_x`` residuals of the mass and momentum equations.

    Time derivatives are centered differences at interior samples.
    """
    t = traj.times
    if t.size < 3:
        raise ValueError("the residual needs at least three samples")
    hs, us = traj.series("h"), traj.series("u")
    mass = np.zeros(t.size - 2)
    mom = np.zeros(t.size - 2)
    for i in range(1, t.size - 1):
        span = t[i + 1] - t[i - 1]
        h, u = hs[i], us[i]
        ht = (hs[i + 1] - hs[i - 1]) / span
        ut = (us[i + 1] - us[i - 1]) / span
        flux = VectorField2D(multiply(h, u.u1), multiply(h, u.u2))
        r_h = ht + divergence(u) + divergence(flux)
        adv = _advect(u, u)
        G = nonlinear_G(h, u, nu, delta_floor=0.0)
        grad_h = VectorField2D(_deriv(h, 0), _deriv(h, 1))
        r_u = ut - lame(u) * nu + adv + grad_h - G
        mass[i - 1] = l2_norm(r_h)
        mom[i - 1] = l2_norm(r_u)
    ti = t[1:-1]
    if ti.size == 1:
        return float(mass[0] * (t[-1] - t[0])), float(mom[0] * (t[-1] - t[0]))
    return float(trapezoid(mass, ti)), float(trapezoid(mom, ti))


def _deriv(f: SpectralField2D, axis: int) -> SpectralField2D:
    return derivative(f, (1, 0) if axis == 0 else (0, 1))


def _advect(v: VectorField2D, w: VectorField2D) -> VectorField2D:
    """Dealiased ``v . grad w`` componentwise."""
    vv = (v.u1.values(), v.u2.values())
    out = []
    for comp in w.components:
        g1 = _deriv(comp, 0).values()
        g2 = _deriv(comp, 1).values()
        out.append(from_physical_product(vv[0] * g1 + vv[1] * g2, comp.grid))
    return VectorField2D(*out)


def _velocity_at(series: Sequence[VectorField2D], times: np.ndarray, t: float, pts: np.ndarray) -> np.ndarray:
    """Velocity at points, linear in time between samples."""
    if t <= times[0]:
        i, w = 0, 0.0
    elif t >= times[-1]:
        i, w = len(times) - 2, 1.0
    else:
        i = int(np.searchsorted(times, t, side="right") - 1)
        i = min(i, len(times) - 2)
        w = (t - times[i]) / (times[i + 1] - times[i])
    a, b = series[i], series[min(i + 1, len(series) - 1)]
    va = np.stack([evaluate_at(a.u1, pts), evaluate_at(a.u2, pts)], axis=1)
    if w == 0.0:
        return va
    vb = np.stack([evaluate_at(b.u1, pts), evaluate_at(b.u2, pts)], axis=1)
    return (1 - w) * va + w * vb


def _flow_path(series, times: np.ndarray, x: np.ndarray, t_from: int, t_to: int) -> list[np.ndarray]:
    """Heun integration of ``dX/dt = v(t, X)`` between sample indices."""
    step = 1 if t_to >= t_from else -1
    path = [x.copy()]
    y = x.copy()
    for i in range(t_from, t_to, step):
        ta, tb = times[i], times[i + step]
        dt = tb - ta
        k1 = _velocity_at(series, times, ta, y)
        k2 = _velocity_at(series, times, tb, y + dt * k1)
        y = y + 0.5 * dt * (k1 + k2)
        path.append(y.copy())
    return path


def flow_map(v_series: Sequence[VectorField2D] | VectorField2D | None, times: np.ndarray,
             x, t: float) -> np.ndarray:
    """Position ``psi_t(x)`` of the characteristic started at ``x`` at time 0.

    ``v_series`` is sampled at ``times`` (a single field means constant in time).
    """
    pts = np.atleast_2d(np.asarray(x, float))
    if v_series is None:
        return pts
    times = np.asarray(times, float)
    if isinstance(v_series, VectorField2D):
        v_series = [v_series] * times.size
    if len(v_series) < times.size:
        v_series = list(v_series) + [v_series[-1]] * (times.size - len(v_series))
    j = int(np.searchsorted(times, t - 1e-12 * max(1.0, abs(t))))
    if abs(times[min(j, times.size - 1)] - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError("t must be one of the sample times")
    return _flow_path(v_series, times, pts, 0, j)[-1]


def height_representation_check(traj: Trajectory, points=None, time_index: int = -1,
                                n_points: int = 8, seed: int = 0) -> float:
    """Max deviation between ``1 + h(t, x)`` and its characteristic representation.

    Along ``dX/dt = v(t, X)`` the height obeys ``d/dt (1 + h) = H - div u``, so
    ``(1 + h)(t, x) = (1 + h)(0, X_0) + int_0^t (H - div u)(tau, X_tau) dtau``
    with ``X_0`` the foot of the characteristic through ``(t, x)``. The
    transport series ``traj.meta["transport"]`` and height forcing
    ``traj.meta["forcing_H"]`` are used (absent entries mean zero).
    """
    times = traj.times
    hs, us = traj.series("h"), traj.series("u")
    m = times.size
    j = time_index % m
    v = traj.meta.get("transport")
    H = traj.meta.get("forcing_H")
    grid = traj.grid
    if points is None:
        rng = np.random.default_rng(seed)
        points = rng.uniform(0.0, grid.period, size=(n_points, 2))
    pts = np.atleast_2d(np.asarray(points, float))

    def seq(s):
        if s is None:
            return None
        s = list(s)
        return s + [s[-1]] * (m - len(s))

    v = seq(v)
    H = seq(H)
    if v is None:
        path = [pts] * (j + 1)
    else:
        back = _flow_path(v, times, pts, j, 0)
        path = back[::-1]
    integrand = np.zeros((j + 1, pts.shape[0]))
    for i in range(j + 1):
        val = -evaluate_at(divergence(us[i]), path[i])
        if H is not None:
            val = val + evaluate_at(H[i], path[i])
        integrand[i] = val
    start = 1.0 + evaluate_at(hs[0], path[0])
    integral = trapezoid(integrand, times[: j + 1], axis=0) if j > 0 else 0.0
    rhs = start + integral
    lhs = 1.0 + evaluate_at(hs[j], pts)
    if v is not None:
        speed = max(float(np.max(np.hypot(x.u1.values(), x.u2.values()))) for x in v[: j + 1])
        if speed * float(np.max(np.diff(times))) > grid.dx:
            warnings.warn("characteristic step exceeds one grid cell; accuracy is degraded",
                          RuntimeWarning, stacklevel=2)
    return float(np.max(np.abs(lhs - rhs)))
