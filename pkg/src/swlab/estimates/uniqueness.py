"""Stability of the Picard solution under a tiny velocity perturbation.

Two converged runs, ``(h_1, u_1)`` from the data and ``(h_2, u_2)`` from the
data with ``u_0`` perturbed in the highest partition block, give
``theta = h_2 - h_1`` and ``w = u_2 - u_1``. The experiment records

``Z(t) = ||w||_{Ltilde^1_t(Bdot^1_{2,inf})} + ||w||_{Ltilde^2_t(Bdot^0_{2,inf})}``,
``W(t) = ||u_1||_{Ltilde^1_t(B^0)} + ||u_1||_{Ltilde^1_t(B^2)}``

and checks ``Z`` against the Osgood bound for
``Z(t) <= a + C int_0^t (1 + W') mu(Z)``, ``mu(r) = r log(e + W(T) / r)``,
where ``a`` is ``Z(T)`` of the freely evolving perturbation and ``C`` is the
smallest prefactor for which the sampled inequality holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from ..besov import Trajectory
from ..errors import ConfigurationError, SwlabError
from ..iteration import IterationConfig, picard_iterate
from ..linear import State, coupled_semigroup
from ..spectral import DyadicPartition, SpectralField2D, VectorField2D
from .osgood import OsgoodProblem, log_modulus, osgood_solve

__all__ = [
    "MAX_PERTURBATION",
    "UniquenessReport",
    "top_block_perturbation",
    "difference_norms",
    "uniqueness_experiment",
]

MAX_PERTURBATION = 1e-8


@dataclass
class UniquenessReport:
    """Outcome of one perturbation experiment.

    ``status`` is ``"ok"`` or ``"inconclusive"`` (a run failed or did not
    converge); ``identical`` is set when the two runs agree bit for bit.
    """

    perturbation: float
    status: str
    times: np.ndarray | None = None
    Z: np.ndarray | None = None
    W: np.ndarray | None = None
    theta: np.ndarray | None = None
    a: float = 0.0
    C_fit: float = 0.0
    osgood_bound: float = math.nan
    below_bound: bool | None = None
    C_theta: float = math.nan
    identical: bool | None = None
    runs: list = field(default_factory=list)
    reason: str = ""

    @property
    def Z_T(self) -> float:
        return float(self.Z[-1]) if self.Z is not None else math.nan

    @property
    def bound_ratio(self) -> float:
        """``osgood_bound / Z(T)`` (``inf`` when ``Z(T) = 0``)."""
        if self.Z is None or not math.isfinite(self.osgood_bound):
            return math.nan
        return math.inf if self.Z_T == 0 else self.osgood_bound / self.Z_T

    def summary(self) -> dict:
        def num(x):
            x = float(x)
            return x if math.isfinite(x) else str(x)

        return {
            "schema": "swlab.uniqueness/1",
            "kind": "summary",
            "perturbation": self.perturbation,
            "status": self.status,
            "reason": self.reason,
            "identical": self.identical,
            "a": num(self.a),
            "C_fit": num(self.C_fit),
            "Z_T": num(self.Z_T),
            "W_T": num(self.W[-1]) if self.W is not None else None,
            "osgood_bound": num(self.osgood_bound),
            "bound_ratio": num(self.bound_ratio),
            "below_bound": self.below_bound,
            "theta_sup": num(self.theta[-1]) if self.theta is not None else None,
            "C_theta": num(self.C_theta),
            "runs": self.runs,
        }

    def records(self) -> list[dict]:
        if self.times is None:
            return []
        return [{"schema": "swlab.uniqueness/1", "kind": "sample", "t": float(t), "Z": float(z),
                 "W": float(w), "theta": float(th)}
                for t, z, w, th in zip(self.times, self.Z, self.W, self.theta)]


def top_block_perturbation(u0: VectorField2D, p: DyadicPartition, size: float, seed: int = 0) -> VectorField2D:
    """Real vector field with ``L^2`` norm ``size`` supported where ``phi_{k_max} = 1``."""
    grid = p.grid
    k = p.k_max
    r = grid.radius
    core = (r >= 1.2 * 2.0 ** k) & (r <= (5.0 / 3.0) * 2.0 ** k)
    rng = np.random.default_rng([seed, 7])
    comps = []
    for _ in range(2):
        c = (rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)) * core
        comps.append(SpectralField2D.from_coefficients(grid, c, 0.0))
    v = VectorField2D(*comps)
    norm = math.sqrt(sum(float(np.sum(np.abs(f.coefficients) ** 2)) for f in comps)) * grid.period
    if norm == 0:
        raise ConfigurationError("the top block holds no resolved modes")
    return v * (size / norm)


def _cumulative(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    return cumulative_trapezoid(y, t, axis=0, initial=0.0)


def difference_norms(w_blocks: np.ndarray, theta_blocks: np.ndarray, u_blocks: np.ndarray,
                     times: np.ndarray, ks: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """``Z(t)``, ``W(t)``, ``W'(t)`` and ``sup_{tau <= t} ||theta||_{Bdot^0_{2,inf}}`` at the samples."""
    Z = (np.max(2.0 ** ks * _cumulative(w_blocks, times), axis=1)
         + np.sqrt(np.max(_cumulative(w_blocks ** 2, times), axis=1)))
    dW = u_blocks @ (1.0 + 4.0 ** ks)
    W = _cumulative(dW, times)
    theta = np.maximum.accumulate(np.max(theta_blocks, axis=1))
    return Z, W, dW, theta


def _fit_prefactor(Z: np.ndarray, dW: np.ndarray, times: np.ndarray, a: float, mu) -> float:
    """Smallest ``C`` with ``Z <= a + C int (1 + W') mu(Z)`` at every sample."""
    I = _cumulative((1.0 + dW) * mu(Z), times)
    excess = np.maximum(Z - a, 0.0)
    pos = I > 0
    if np.any(excess[~pos] > 0):
        return math.inf
    return float(np.max(excess[pos] / I[pos])) if np.any(pos) else 0.0


def _run(h0, u0, cfg, p):
    try:
        report, traj = picard_iterate(h0, u0, cfg, p)
    except SwlabError as exc:
        return None, None, f"{type(exc).__name__}: {exc}"
    if not report.converged:
        return report, None, "iteration did not converge"
    return report, traj, ""


def _same(a: Trajectory, b: Trajectory) -> bool:
    for name in ("h", "u"):
        for x, y in zip(a.series(name), b.series(name)):
            xs = x.components if isinstance(x, VectorField2D) else (x,)
            ys = y.components if isinstance(y, VectorField2D) else (y,)
            for f, g in zip(xs, ys):
                if not (np.array_equal(f.coefficients, g.coefficients) and f.mean == g.mean):
                    return False
    return np.array_equal(a.times, b.times)


def uniqueness_experiment(h0: SpectralField2D, u0: VectorField2D, cfg: IterationConfig,
                          p: DyadicPartition, perturbation: float, seed: int = 0) -> UniquenessReport:
    """Compare the Picard solutions from ``(h0, u0)`` and from ``u0`` perturbed by
    ``perturbation * ||u0||_2`` in the top block.

    A failed or non-converged run makes the experiment inconclusive; it does
    not raise.
    """
    if not 0 <= perturbation <= MAX_PERTURBATION:
        raise ConfigurationError(f"perturbation must lie in [0, {MAX_PERTURBATION:g}]")
    scale = math.sqrt(sum(float(np.sum(np.abs(f.coefficients) ** 2)) for f in u0.components)) * p.grid.period
    if perturbation > 0 and scale == 0:
        raise ConfigurationError("a relative perturbation needs nonzero u0")
    delta = top_block_perturbation(u0, p, perturbation * scale, seed) if perturbation > 0 else None
    u0p = u0 + delta if delta is not None else u0

    rep1, tr1, why1 = _run(h0, u0, cfg, p)
    rep2, tr2, why2 = _run(h0, u0p, cfg, p)
    runs = [r.summary() if r is not None else None for r in (rep1, rep2)]
    if tr1 is None or tr2 is None:
        return UniquenessReport(perturbation, "inconclusive", runs=runs, reason=why1 or why2)

    ks = np.arange(p.k_min, p.k_max + 1)
    t = tr1.times
    w = [b - a for a, b in zip(tr1.series("u"), tr2.series("u"))]
    th = [b - a for a, b in zip(tr1.series("h"), tr2.series("h"))]
    diff = Trajectory.from_series(p, t, {"w": w, "theta": th}, keep_fields=False)
    Z, W, dW, theta = difference_norms(diff.blocks("w"), diff.blocks("theta"), tr1.blocks("u"), t, ks)
    out = UniquenessReport(perturbation, "ok", t, Z, W, theta, runs=runs, identical=_same(tr1, tr2))

    # Monitor: sup ||theta|| <= C ||w||_{L^1 B^1} (1 + sup ||h_1||_{B^1}).
    w_L1_B1 = float(_cumulative(diff.blocks("w") @ (2.0 ** ks), t)[-1])
    h1_B1 = float(np.max(tr1.blocks("h") @ (2.0 ** ks)))
    den = w_L1_B1 * (1.0 + h1_B1)
    out.C_theta = theta[-1] / den if den > 0 else (0.0 if theta[-1] == 0 else math.inf)

    if delta is None:
        out.osgood_bound = 0.0
        out.below_bound = bool(np.all(Z == 0))
        return out

    # Free evolution of the perturbation sets the Osgood level a.
    s0 = State(0.0, p.grid.zero(), delta, cfg.nu)
    free = [coupled_semigroup(s0, float(x)).u for x in t]
    free_blocks = Trajectory.from_series(p, t, {"w": free}, keep_fields=False).blocks("w")
    out.a = float(difference_norms(free_blocks, np.zeros_like(free_blocks), tr1.blocks("u"), t, ks)[0][-1])

    mu = log_modulus(float(W[-1]))
    out.C_fit = _fit_prefactor(Z, dW, t, out.a, mu)
    if not math.isfinite(out.C_fit) or out.a <= 0:
        out.status = "inconclusive"
        out.reason = "Z exceeds a before any integral accumulates"
        return out
    problem = OsgoodProblem(a=out.a, gamma=(t, out.C_fit * (1.0 + dW)), mu=mu, t0=0.0, t1=float(t[-1]))
    res = osgood_solve(problem, float(t[-1]))
    out.osgood_bound = res.bound
    out.below_bound = bool(Z[-1] <= res.bound * (1 + 1e-12))
    return out
