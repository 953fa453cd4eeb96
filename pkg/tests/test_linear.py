"""Per-mode semigroups, the exponential integrator and the transport stepper."""

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from swlab.besov import block_energy, block_norms
from swlab.errors import CFLError, GridMismatchError
from swlab.linear import (
    SERIES_THRESHOLD, LinearizedProblem, State, cfl_limit, coupled_exponential, coupled_semigroup,
    lame_forced_solve, lame_semigroup, solve_linearized, step_linearized, transport_solve,
    transport_step,
)
from swlab.spectral import (
    Grid2D, SpectralField2D, VectorField2D, divergence, forward_transform, gradient, inner,
    l2_norm, lame,
)

from conftest import PERIOD, band_limited, band_limited_vector, cos_mode


def _matrix(r, nu):
    return np.array([[0, -1j * r], [-1j * r, -2 * nu * r * r]])


def _mp_expm(r, nu, t, dps=40):
    """Matrix exponential by mpmath at high precision."""
    with mpmath.workdps(dps):
        M = mpmath.matrix([[0, -1j * mpmath.mpf(r)], [-1j * mpmath.mpf(r), -2 * mpmath.mpf(nu) * mpmath.mpf(r) ** 2]])
        E = mpmath.expm(M * mpmath.mpf(t))
        return np.array([[complex(E[0, 0]), complex(E[0, 1])], [complex(E[1, 0]), complex(E[1, 1])]])


def _free_state(grid, partition, rng, nu=1.0, scale=1.0):
    h = band_limited(grid, partition, rng, amplitude=scale)
    u = band_limited_vector(grid, partition, rng, amplitude=scale)
    return State(0.0, h, u, nu)


class TestLameSemigroup:
    def test_identity_at_zero(self, grid, partition, rng):
        u = band_limited_vector(grid, partition, rng)
        assert l2_norm(lame_semigroup(u, 1.0, 0.0) - u) <= 1e-15 * l2_norm(u)

    def test_negative_time(self, grid):
        with pytest.raises(ValueError):
            lame_semigroup(VectorField2D.zero(grid), 1.0, -0.1)

    def test_divergence_free_mode(self, grid):
        # |xi| = 1 along x1, velocity along x2.
        u = VectorField2D(grid.zero(), cos_mode(grid, 8, 0))
        out = lame_semigroup(u, 1.0, 1.0)
        assert np.allclose(out.u2.values(), np.exp(-0.5) * u.u2.values(), atol=1e-15)

    def test_gradient_mode(self, grid):
        u = VectorField2D(cos_mode(grid, 8, 0), grid.zero())
        out = lame_semigroup(u, 1.0, 1.0)
        assert np.allclose(out.u1.values(), np.exp(-2.0) * u.u1.values(), atol=1e-15)

    def test_generator_is_lame_operator(self, grid, partition, rng):
        u = band_limited_vector(grid, partition, rng)
        eps = 1e-6
        du = (lame_semigroup(u, 1.0, eps) - lame_semigroup(u, 1.0, 0.0)) / eps
        ref = lame(u)
        assert l2_norm(du - ref) <= 1e-4 * l2_norm(ref)

    def test_block_decay(self, grid, partition):
        rng = np.random.default_rng(2)
        nu = 0.7
        for _ in range(5):
            u = band_limited_vector(grid, partition, rng)
            b0 = block_norms(u, partition)
            for t in (0.1, 1.0, 3.0):
                bt = block_norms(lame_semigroup(u, nu, t), partition)
                ks = np.arange(partition.k_min, partition.k_max + 1)
                bound = np.exp(-(nu / 2) * (5 / 6) ** 2 * 4.0 ** ks * t) * b0
                assert np.all(bt <= bound * (1 + 1e-12))

    def test_forced_solve_constant_forcing_exact(self, grid, partition, rng):
        g = band_limited_vector(grid, partition, rng)
        coarse = lame_forced_solve(VectorField2D.zero(grid), g, 1.0, 0.1, 1)[-1]
        fine = lame_forced_solve(VectorField2D.zero(grid), g, 1.0, 0.01, 10)[-1]
        assert l2_norm(coarse - fine) <= 1e-12 * l2_norm(fine)


class TestCoupledExponential:
    @pytest.mark.parametrize("nu", [0.3, 1.0, 4.0])
    def test_matches_expm(self, nu):
        r = np.array([0.05, 0.3, 1.0 / nu, 0.9 / nu, 1.2 / nu, 2.0, 3.3])
        t = 0.7
        E = coupled_exponential(r, nu, t)
        for i, ri in enumerate(r):
            ref = expm(t * _matrix(ri, nu))
            got = np.array([[E[0][i], E[1][i]], [E[2][i], E[3][i]]])
            assert np.max(np.abs(got - ref)) <= 1e-12

    def test_identity_at_zero(self):
        r = np.linspace(0, 3, 7)
        E = coupled_exponential(r, 1.0, 0.0)
        assert np.allclose(E[0], 1) and np.allclose(E[3], 1)
        assert np.allclose(E[1], 0) and np.allclose(E[2], 0)

    @pytest.mark.parametrize("t", [0.1, 1.0, 5.0])
    def test_degenerate_against_series_oracle(self, t):
        nu = 1.0
        r = np.array([1.0, 1.0 + 1e-9, 1.0 - 1e-7])
        E = coupled_exponential(r, nu, t)
        for i, ri in enumerate(r):
            ref = _mp_expm(ri, nu, t)
            got = np.array([[E[0][i], E[1][i]], [E[2][i], E[3][i]]])
            assert np.max(np.abs(got - ref)) <= 1e-13

    def test_near_degenerate_sweep(self):
        for t in (0.05, 1.0, 5.0):
            for d in np.logspace(-12, -1, 12):
                for r in (1 + d, 1 - d):
                    E = coupled_exponential(np.array([r]), 1.0, t)
                    got = np.array([[E[0][0], E[1][0]], [E[2][0], E[3][0]]])
                    assert np.max(np.abs(got - _mp_expm(r, 1.0, t))) <= 1e-14

    def test_jordan_form_at_degeneracy(self):
        # nu r = 1: M = lam I + N with lam = -1, N nilpotent.
        t = 2.0
        E = coupled_exponential(np.array([1.0]), 1.0, t)
        N = _matrix(1.0, 1.0) + np.eye(2)
        ref = (np.eye(2) + t * N) * np.exp(-t)
        got = np.array([[E[0][0], E[1][0]], [E[2][0], E[3][0]]])
        assert np.max(np.abs(got - ref)) <= 1e-15

    def test_series_switch_is_continuous(self):
        nu, t = 1.0, 1.0
        # q t^2 crosses the threshold near r = 1.
        q_edge = SERIES_THRESHOLD
        r_edge = np.sqrt((1 + np.sqrt(1 + 4 * q_edge)) / 2)
        r = np.array([r_edge * (1 - 1e-12), r_edge * (1 + 1e-12)])
        E = coupled_exponential(r, nu, t)
        for e in E:
            assert abs(e[0] - e[1]) <= 1e-12

    def test_no_overflow_when_overdamped(self):
        E = coupled_exponential(np.array([50.0]), 10.0, 100.0)
        assert all(np.isfinite(e).all() for e in E)


class TestCoupledSemigroup:
    def test_identity_at_zero(self, grid, partition, rng):
        s = _free_state(grid, partition, rng)
        out = coupled_semigroup(s, 0.0)
        assert l2_norm(out.h - s.h) <= 1e-15 * l2_norm(s.h)

    def test_negative_time(self, grid):
        with pytest.raises(ValueError):
            coupled_semigroup(State.zero(grid), -1.0)

    def test_state_validation(self, grid):
        with pytest.raises(ValueError):
            State.zero(grid, nu=0.0)
        with pytest.raises(GridMismatchError):
            State(0.0, grid.zero(), VectorField2D.zero(Grid2D(64, PERIOD)), 1.0)

    def test_semigroup_property(self, grid, partition, rng):
        s = _free_state(grid, partition, rng)
        a = coupled_semigroup(coupled_semigroup(s, 0.3), 0.5)
        b = coupled_semigroup(s, 0.8)
        assert l2_norm(a.h - b.h) <= 1e-12 * l2_norm(b.h)
        assert l2_norm(a.u - b.u) <= 1e-12 * l2_norm(b.u)

    def test_high_block_energy_decay(self, grid, partition, rng):
        s = _free_state(grid, partition, rng)
        e0 = block_energy(s.h, s.u, 1, partition).value
        for t in (0.25, 1.0, 4.0):
            out = coupled_semigroup(s, t)
            assert block_energy(out.h, out.u, 1, partition).value <= np.exp(-t / 8) * e0 * (1 + 1e-12)

    def test_low_block_energy_decay(self, grid, partition, rng):
        s = _free_state(grid, partition, rng)
        for k in range(partition.k_min, 1):
            e0 = block_energy(s.h, s.u, k, partition).value
            for t in (0.5, 2.0, 8.0):
                out = coupled_semigroup(s, t)
                rate = (1 / 320) * 4.0 ** k
                assert block_energy(out.h, out.u, k, partition).value <= np.exp(-rate * t) * e0 * (1 + 1e-12)

    def test_mean_preserved(self, grid, partition, rng):
        s = _free_state(grid, partition, rng)
        s = State(0.0, s.h + 0.25, s.u, 1.0)
        assert coupled_semigroup(s, 1.0).h.mean == 0.25


class TestStepper:
    def test_free_step_is_semigroup(self, grid, partition, rng):
        s = _free_state(grid, partition, rng)
        a = step_linearized(s, 0.05)
        b = coupled_semigroup(s, 0.05)
        assert l2_norm(a.h - b.h) <= 1e-12 * l2_norm(b.h)
        assert l2_norm(a.u - b.u) <= 1e-12 * l2_norm(b.u)

    def test_constant_forcing_duhamel(self, grid, partition, rng):
        G = band_limited_vector(grid, partition, rng)
        H = band_limited(grid, partition, rng)
        s = State.zero(grid)
        one = step_linearized(s, 0.1, H=H, G=G)
        many = s
        for _ in range(10):
            many = step_linearized(many, 0.01, H=H, G=G)
        assert l2_norm(one.u - many.u) <= 1e-11 * l2_norm(many.u)
        assert l2_norm(one.h - many.h) <= 1e-11 * l2_norm(many.h)

    def test_cfl_violation(self, grid):
        v = VectorField2D(grid.zero() + 10.0, grid.zero())
        with pytest.raises(CFLError):
            step_linearized(State.zero(grid), 1.0, v=v)

    def test_cfl_limit(self, grid):
        assert cfl_limit(None, grid, 0.5) == np.inf
        vv = (np.full(grid.shape, 3.0), np.full(grid.shape, 4.0))
        assert cfl_limit(vv, grid, 0.5) == pytest.approx(0.5 * grid.dx / 5.0)

    def test_first_order_convergence(self, grid, partition):
        rng = np.random.default_rng(9)
        s = _free_state(grid, partition, rng, scale=0.1)
        v = band_limited_vector(grid, partition, rng, amplitude=0.5)
        H = band_limited(grid, partition, rng, amplitude=0.1)

        def run(n):
            x = s
            for _ in range(n):
                x = step_linearized(x, 1.0 / n, v=v, H=H)
            return x

        a, b, c = run(20), run(40), run(80)
        ratio = l2_norm(a.h - b.h) / l2_norm(b.h - c.h)
        assert 1.7 <= ratio <= 2.3


class TestTransport:
    def test_zero_velocity(self, grid, partition, rng):
        f = band_limited(grid, partition, rng)
        g = band_limited(grid, partition, rng)
        out = transport_step(f, None, g, 0.1)
        assert l2_norm(out - (f + g * 0.1)) <= 1e-15 * l2_norm(f)

    def test_uniform_translation(self, grid):
        x1, x2 = grid.coordinates()
        xi = 3 * grid.spacing
        f = forward_transform(np.sin(xi * x1) + 0.5 * np.cos(2 * xi * x2), grid)
        c = (0.4, -0.3)
        v = VectorField2D(grid.zero() + c[0], grid.zero() + c[1])
        # Heun amplifies by sqrt(1 + theta^4 / 4) per step, theta = |c . xi| dt.
        dt, n = 0.01, 100
        out = transport_solve(f, v, None, dt, n)
        T = dt * n
        exact = np.sin(xi * (x1 - c[0] * T)) + 0.5 * np.cos(2 * xi * (x2 - c[1] * T))
        assert abs(l2_norm(out[-1]) - l2_norm(f)) <= 1e-8 * l2_norm(f)
        assert np.max(np.abs(out[-1].values() - exact)) <= 1e-5

    def test_norm_growth_bounded(self, grid, partition, rng):
        f = band_limited(grid, partition, rng)
        v = band_limited_vector(grid, partition, rng, amplitude=0.3)
        dt, n = 0.05, 40
        out = transport_solve(f, v, None, dt, n)
        grad_sup = max(np.max(np.abs(d.values())) for d in (*gradient(v.u1).components, *gradient(v.u2).components))
        V = grad_sup * dt * n
        assert l2_norm(out[-1]) <= np.exp(V) * l2_norm(f)

    def test_cfl(self, grid):
        v = VectorField2D(grid.zero() + 100.0, grid.zero())
        with pytest.raises(CFLError):
            transport_step(grid.zero(), v, None, 1.0)


class TestSolveLinearized:
    def test_zero_data(self, grid, partition):
        p = LinearizedProblem(State.zero(grid), 0.1, 0.5, partition)
        traj = solve_linearized(p)
        assert np.all(traj.blocks("h") == 0) and np.all(traj.blocks("u") == 0)
        assert traj.times[-1] == 0.5

    def test_rejects_non_multiple(self, grid, partition):
        with pytest.raises(ValueError):
            LinearizedProblem(State.zero(grid), 0.3, 1.0, partition)

    def test_rejects_short_series(self, grid, partition):
        with pytest.raises(ValueError):
            LinearizedProblem(State.zero(grid), 0.1, 1.0, partition, forcing_H=[grid.zero()] * 3)

    def test_free_decay_matches_semigroup(self, grid, partition, rng):
        s = _free_state(grid, partition, rng)
        traj = solve_linearized(LinearizedProblem(s, 0.1, 1.0, partition))
        ref = coupled_semigroup(s, 1.0)
        assert l2_norm(traj.series("h")[-1] - ref.h) <= 1e-12 * l2_norm(ref.h)
        assert traj.consistency_defect() <= 1e-12

    def test_monitors(self, grid, partition):
        rng = np.random.default_rng(4)
        s = _free_state(grid, partition, rng, scale=0.1)
        v = band_limited_vector(grid, partition, rng, amplitude=0.1)
        H = band_limited(grid, partition, rng, amplitude=0.01)
        G = band_limited_vector(grid, partition, rng, amplitude=0.01)
        traj = solve_linearized(LinearizedProblem(s, 0.05, 0.5, partition, v=v, forcing_H=H, forcing_G=G))
        mon = traj.meta["monitors"]
        for key in ("ratio_energy", "ratio_smoothing"):
            assert np.isfinite(mon[key]) and mon[key] > 0
        assert traj.meta["energy"].shape == (11, partition.n_blocks)

    def test_pairing_identity_along_trajectory(self, grid, partition, rng):
        s = _free_state(grid, partition, rng)
        v = band_limited_vector(grid, partition, rng, amplitude=0.2)
        traj = solve_linearized(LinearizedProblem(s, 0.1, 0.5, partition, v=v, monitors=False))
        for h, u in zip(traj.series("h"), traj.series("u")):
            gh = gradient(h)
            lhs = inner(lame(u), gh)
            rhs = 2 * inner(gradient(divergence(u)), gh)
            assert abs(lhs - rhs) <= 1e-10 * abs(rhs)

    def test_drop_fields(self, grid, partition):
        p = LinearizedProblem(State.zero(grid), 0.1, 0.2, partition, keep_fields=False)
        traj = solve_linearized(p)
        assert traj.fields is None and traj.blocks("h").shape == (3, partition.n_blocks)
