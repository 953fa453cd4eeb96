"""Picard scheme, nonlinear forcings, gates, residual and characteristics."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from swlab.errors import ConfigurationError, VacuumProximityError
from swlab.iteration import (
    IterationConfig, convergence_verdict, flow_map, height_representation_check, initial_energy,
    nonlinear_G, nonlinear_H, picard_iterate, residual, select_truncation_offset, smallness_check,
    truncate_initial,
)
from swlab.besov import Trajectory, block_energy
from swlab.spectral import (
    VectorField2D, divergence, dyadic_block, forward_transform, gradient, l2_norm, multiply,
)

from conftest import band_limited, band_limited_vector, cos_mode


def _small(grid, partition, seed, amp=1e-4):
    rng = np.random.default_rng(seed)
    return band_limited(grid, partition, rng, amplitude=amp), band_limited_vector(grid, partition, rng, amplitude=amp)


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(T=0), dict(eta=-1), dict(N=-1), dict(max_iters=0),
                                    dict(delta_floor=0.6), dict(T=0.5, dt=0.3)])
    def test_rejects(self, kw):
        with pytest.raises(ConfigurationError):
            IterationConfig(**kw)


class TestInitialEnergy:
    def test_zero(self, grid, partition):
        assert initial_energy(grid.zero(), VectorField2D.zero(grid), partition) == (0.0, 0.0, 0.0)

    def test_single_high_block(self, grid, partition):
        # Integer mode 22 has |xi| = 2.75, inside the plateau of block 1 only.
        h = cos_mode(grid, 22, 0, 1e-3)
        u = VectorField2D(cos_mode(grid, 0, 22, 1e-3), grid.zero())
        E0, _, _ = initial_energy(h, u, partition)
        assert E0 == pytest.approx(block_energy(h, u, 1, partition).value, rel=1e-14)

    def test_equivalence_ratio(self, grid, partition):
        rng = np.random.default_rng(8)
        for _ in range(20):
            h = band_limited(grid, partition, rng) * rng.uniform(0.1, 10)
            u = band_limited_vector(grid, partition, rng)
            E0, hn, un = initial_energy(h, u, partition)
            assert 1 / 6 <= E0 / (hn + un) <= 4


class TestTruncation:
    def test_identity_when_wide(self, grid, partition, rng):
        h, u = _small(grid, partition, 1)
        h2, u2 = truncate_initial(h, u, 0, 10, partition)
        assert h2 is h and u2 is u

    def test_single_block_below(self, grid, partition):
        h = cos_mode(grid, 22, 0)
        h2, _ = truncate_initial(h, VectorField2D.zero(grid), 0, 0, partition)
        assert l2_norm(h2) <= 1e-14 * l2_norm(h)

    def test_negative_n(self, grid, partition):
        with pytest.raises(ValueError):
            truncate_initial(grid.zero(), VectorField2D.zero(grid), -1, 0, partition)

    def test_monotone(self, grid, partition):
        h, u = _small(grid, partition, 2)
        dists = [l2_norm(truncate_initial(h, u, n, 0, partition)[0] - h) for n in range(6)]
        assert np.all(np.diff(dists) <= 1e-18)
        assert dists[-1] == 0.0

    def test_offset_keeps_three_quarters(self, grid, partition):
        # -0.3 cos(t) + 0.15 cos(2t) has min -0.225; block 0 alone dips to -0.3.
        h = cos_mode(grid, 11, 0, -0.3) + cos_mode(grid, 22, 0, 0.15)
        N = select_truncation_offset(h, VectorField2D.zero(grid), partition)
        assert N == 1
        ht, _ = truncate_initial(h, VectorField2D.zero(grid), 0, 0, partition)
        assert np.min(1 + ht.values()) < 0.75
        for n in range(3):
            ht, _ = truncate_initial(h, VectorField2D.zero(grid), n, N, partition)
            assert np.min(1 + ht.values()) >= 0.75

    def test_offset_impossible(self, grid, partition):
        h = cos_mode(grid, 11, 0, 0.5)
        with pytest.raises(ConfigurationError):
            select_truncation_offset(h, VectorField2D.zero(grid), partition)


class TestNonlinear:
    def test_H_divergence_free(self, grid, partition, rng):
        h = band_limited(grid, partition, rng)
        psi = band_limited(grid, partition, rng)
        g = gradient(psi)
        u = VectorField2D(g.u2, -g.u1)
        assert l2_norm(nonlinear_H(h, u)) <= 1e-13 * l2_norm(h) * l2_norm(u)

    def test_H_constant_height(self, grid, partition, rng):
        u = band_limited_vector(grid, partition, rng)
        c0 = 0.3
        h = grid.zero() + c0
        assert l2_norm(nonlinear_H(h, u) - divergence(u) * (-c0)) <= 1e-14 * l2_norm(divergence(u))

    def test_H_pointwise(self, grid, partition, rng):
        # Both factors below |xi| = 1.6 keep the product inside the 2/3 band.
        h = band_limited(grid, partition, rng, amplitude=0.1, hi=1.6)
        u = band_limited_vector(grid, partition, rng, hi=1.6)
        ref = -h.values() * divergence(u).values()
        assert np.max(np.abs(nonlinear_H(h, u).values() - ref)) <= 1e-10 * np.max(np.abs(ref))

    def test_G_zero_cases(self, grid, partition, rng):
        h = band_limited(grid, partition, rng, amplitude=0.1)
        u = band_limited_vector(grid, partition, rng)
        assert l2_norm(nonlinear_G(grid.zero(), u, 1.0)) == 0.0
        assert l2_norm(nonlinear_G(h, VectorField2D.zero(grid), 1.0)) == 0.0

    def test_G_two_modes(self, grid):
        a, b, nu = 0.1, 0.2, 0.7
        xi, zeta = 2 * grid.spacing, 3 * grid.spacing
        x1, x2 = grid.coordinates()
        h = forward_transform(a * np.cos(xi * x1), grid)
        u = VectorField2D(forward_transform(b * np.sin(zeta * x2), grid), grid.zero())
        G = nonlinear_G(h, u, nu)
        # Hand expansion: only D_12 = b zeta cos(zeta x2) / 2 survives, paired with d_1 h.
        g1 = -a * xi * np.sin(xi * x1) / (1 + a * np.cos(xi * x1))
        ref2 = nu * g1 * 0.5 * b * zeta * np.cos(zeta * x2)
        assert np.max(np.abs(G.u1.values())) <= 1e-15
        assert np.max(np.abs(G.u2.values() - ref2)) <= 1e-8

    def test_G_vacuum_guard(self, grid):
        h = cos_mode(grid, 2, 0, 0.95)
        u = VectorField2D(cos_mode(grid, 0, 3), grid.zero())
        with pytest.raises(VacuumProximityError):
            nonlinear_G(h, u, 1.0, delta_floor=0.1)


class TestGates:
    def test_zero_data_passes(self, grid, partition):
        rep = smallness_check(grid.zero(), VectorField2D.zero(grid), IterationConfig(), partition)
        assert rep.all_pass

    def test_huge_data_fails(self, grid, partition):
        h, u = _small(grid, partition, 3)
        rep = smallness_check(h * 1e6, u * 1e6, IterationConfig(), partition)
        assert not rep.smallness_ok and not rep.all_pass

    def test_threshold_by_bisection(self, grid, partition):
        h, u = _small(grid, partition, 4, amp=1.0)
        cfg = IterationConfig()
        _, hn, un = initial_energy(h, u, partition)
        exact = cfg.smallness_c * cfg.hbar0 / (hn + un)
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if smallness_check(h * mid, u * mid, cfg, partition).smallness_ok:
                lo = mid
            else:
                hi = mid
        assert lo == pytest.approx(exact, rel=1e-12)

    def test_report_dict(self, grid, partition):
        rep = smallness_check(grid.zero(), VectorField2D.zero(grid), IterationConfig(), partition)
        d = rep.to_dict()
        assert d["gates_pass"] and set(d["sensitive_to_C"]) == {"R1", "R2", "R3", "R4"}


class TestConvergenceVerdict:
    def test_cases(self):
        assert not convergence_verdict([], 1e-12)
        assert convergence_verdict([0.0], 1e-12)
        assert not convergence_verdict([1e-13], 1e-12)
        assert convergence_verdict([1e-3, 1e-8, 1e-14], 1e-12)
        assert not convergence_verdict([1e-3, 1e-14, 1e-13], 1e-12)
        assert not convergence_verdict([1e-3, 1e-2], 1e-12)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(1e-300, 1.0), min_size=2, max_size=10))
    def test_requires_decrease(self, diffs):
        if convergence_verdict(diffs, 1e-12):
            assert diffs[-1] < diffs[-2] and diffs[-1] < 1e-12


class TestPicard:
    def test_zero_data(self, grid, partition):
        rep, traj = picard_iterate(grid.zero(), VectorField2D.zero(grid), IterationConfig(T=0.2, dt=0.1), partition)
        assert rep.converged and len(rep.iterates) == 1 and rep.diffs == [0.0]
        assert np.all(traj.blocks("h") == 0)

    def test_small_data_geometric(self, grid, partition):
        h, u = _small(grid, partition, 5)
        cfg = IterationConfig(N=8, T=0.5, dt=0.05)
        rep, traj = picard_iterate(h, u, cfg, partition)
        d = rep.diffs
        assert rep.converged and rep.status == "converged"
        assert all(b < a for a, b in zip(d[:-1], d[1:]))
        assert rep.min_height >= 0.5
        assert all(it.holds_energy for it in rep.iterates)

    def test_positive_height_moderate(self, grid, partition):
        rng = np.random.default_rng(6)
        h = band_limited(grid, partition, rng, amplitude=0.05)
        h = h - float(np.min(h.values()))  # h0 >= 0 pointwise
        u = band_limited_vector(grid, partition, rng, amplitude=0.02)
        rep, _ = picard_iterate(h, u, IterationConfig(N=8, T=0.5, dt=0.05, max_iters=6), partition)
        assert all(it.min_height >= 0.5 for it in rep.iterates)

    def test_deterministic(self, grid, partition):
        h, u = _small(grid, partition, 7)
        cfg = IterationConfig(N=8, T=0.2, dt=0.05)
        a, _ = picard_iterate(h, u, cfg, partition)
        b, _ = picard_iterate(h, u, cfg, partition)
        assert a.records() == b.records() and a.summary() == b.summary()

    def test_residual_and_representation_refine(self, grid, partition):
        h, u = _small(grid, partition, 0)
        res, dev = [], []
        for dt in (0.05, 0.025):
            _, traj = picard_iterate(h, u, IterationConfig(N=8, T=0.5, dt=dt), partition)
            res.append(residual(traj, 1.0))
            dev.append(height_representation_check(traj))
        assert res[0][0] / res[1][0] >= 1.7 and res[0][1] / res[1][1] >= 1.7
        assert dev[1] < dev[0] and dev[0] < 1e-5


class TestResidual:
    def test_zero(self, grid, partition):
        z = [grid.zero()] * 3
        traj = Trajectory.from_series(partition, [0, 0.1, 0.2], {"h": z, "u": [VectorField2D.zero(grid)] * 3})
        assert residual(traj, 1.0) == (0.0, 0.0)

    def test_too_short(self, grid, partition):
        traj = Trajectory.from_series(partition, [0, 0.1], {"h": [grid.zero()] * 2, "u": [VectorField2D.zero(grid)] * 2})
        with pytest.raises(ValueError):
            residual(traj, 1.0)


class TestCharacteristics:
    def test_zero_velocity(self):
        pts = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(flow_map(None, np.array([0.0, 1.0]), pts, 1.0), pts)

    def test_uniform_velocity(self, grid):
        v = VectorField2D(grid.zero() + 0.3, grid.zero() - 0.2)
        times = np.linspace(0, 2, 11)
        out = flow_map(v, times, [[1.0, 1.0]], 2.0)
        assert np.allclose(out, [[1.6, 0.6]], atol=1e-14)

    def test_time_must_be_sampled(self, grid):
        v = VectorField2D(grid.zero() + 0.3, grid.zero())
        with pytest.raises(ValueError):
            flow_map(v, np.linspace(0, 1, 3), [[0.0, 0.0]], 0.7)

    def test_linear_trajectory(self, grid, partition):
        from swlab.linear import LinearizedProblem, State, solve_linearized
        h, u = _small(grid, partition, 9)
        traj = solve_linearized(LinearizedProblem(State(0.0, h, u, 1.0), 0.05, 0.5, partition, monitors=False))
        assert height_representation_check(traj) <= 1e-6
