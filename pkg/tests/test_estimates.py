"""Corpora, empirical-constant reports, Osgood bounds and the perturbation experiment."""

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from swlab.errors import ConfigurationError
from swlab.estimates import (
    DRIFT_LIMIT, INEQUALITY_GROUPS, Corpus, CorpusSpec, EstimateReport, OsgoodProblem, assess, gamma_integral,
    lattice_amplitudes, linear_modulus, log_modulus, osgood_bound, osgood_M, osgood_solve,
    random_field, random_trajectory, random_vector, resolve_selection, run_harness,
    uniqueness_experiment,
)
from swlab.estimates.commutators import (
    _band, _partial_sum, alpha_sequence, block_pairings, cross_pairings, pairing_representers,
)
from swlab.estimates.uniqueness import MAX_PERTURBATION, top_block_perturbation
from swlab.besov import block_norms
from swlab.iteration import IterationConfig
from swlab.spectral import Grid2D, MultiplierSymbol, VectorField2D, make_partition

from conftest import PERIOD, band_limited, band_limited_vector

SYMBOLS = [MultiplierSymbol.identity(), MultiplierSymbol.modulus(), MultiplierSymbol.partial(1)]


@pytest.fixture(scope="module")
def corpus():
    return Corpus(CorpusSpec(count=2, k_lo=-2, k_hi=0), make_partition(Grid2D(128, PERIOD), -4, 1))


def _mp_M(W, x):
    """``int_x^1 dtau / (tau log(e + W / tau))`` in 40-digit arithmetic."""
    with mp.workdps(40):
        f = lambda y: 1 / mp.log(mp.e + W * mp.exp(y))  # noqa: E731
        Y = mp.log(1 / mp.mpf(x))
        return mp.quad(f, mp.linspace(0, Y, int(abs(Y)) + 2))


def _mp_log_bound(W, a, G):
    with mp.workdps(40):
        target = _mp_M(W, a) - G
        y = mp.findroot(lambda y: _mp_M(W, mp.exp(y)) - target, mp.log(a) + G)
        return float(mp.exp(y))


class TestCorpus:
    def test_deterministic(self, corpus):
        a = random_field(corpus.spec, corpus.grid, 3, 1)
        b = random_field(corpus.spec, corpus.grid, 3, 1)
        assert np.array_equal(a.coefficients, b.coefficients)
        c = random_field(corpus.spec, corpus.grid, 4, 1)
        assert not np.array_equal(a.coefficients, c.coefficients)

    def test_grid_independent(self, corpus):
        a = random_field(corpus.spec, corpus.grid, 1)
        b = random_field(corpus.spec, corpus.refined().grid, 1)
        assert np.max(np.abs(a.values() - b.values()[::2, ::2])) <= 1e-14

    def test_real_mean_free_rms(self, corpus):
        f = random_field(corpus.spec, corpus.grid, 0)
        x = f.values()
        assert f.mean == 0.0 and abs(np.mean(x)) <= 1e-15
        assert np.sqrt(np.mean(x ** 2)) * PERIOD == pytest.approx(corpus.spec.amplitude * PERIOD, rel=1e-12)

    def test_support(self, corpus):
        f = random_field(corpus.spec, corpus.grid, 0)
        r = corpus.grid.radius
        outside = (r < 2.0 ** corpus.spec.k_lo) | (r >= 2.0 ** (corpus.spec.k_hi + 1))
        assert not np.any(f.coefficients[outside])

    def test_moduli_fixed(self, corpus):
        _, _, r, a = lattice_amplitudes(corpus.spec, PERIOD)
        assert np.all(np.diff(a[np.argsort(r)]) <= 1e-15)
        f = random_field(corpus.spec, corpus.grid, 0)
        g = random_field(corpus.spec, corpus.grid, 1)
        p = corpus.partition
        np.testing.assert_allclose(block_norms(f, p), block_norms(g, p), rtol=1e-12)

    def test_trajectory_decay(self, corpus):
        tr = random_trajectory(corpus.spec, corpus.partition, 0)
        b = tr.blocks("h")
        assert np.all(np.diff(b, axis=0) <= 1e-15)
        assert np.array_equal(b[0], random_trajectory(corpus.spec, corpus.partition, 0).blocks("h")[0])

    def test_vector_streams_differ(self, corpus):
        v = random_vector(corpus.spec, corpus.grid, 0)
        assert not np.array_equal(v.u1.coefficients, v.u2.coefficients)

    def test_doubled_refined(self, corpus):
        assert corpus.doubled().spec.count == 4
        assert corpus.refined().grid.n_points == 256

    def test_too_wide_rejected(self):
        with pytest.raises(ConfigurationError):
            Corpus(CorpusSpec(k_hi=1), make_partition(Grid2D(128, PERIOD), -4, 1))

    @pytest.mark.parametrize("kw", [dict(count=0), dict(k_lo=2, k_hi=1), dict(amplitude=0),
                                    dict(rate_jitter=1.0), dict(decay=-1.0), dict(n_times=1)])
    def test_spec_rejects(self, kw):
        with pytest.raises(ConfigurationError):
            CorpusSpec(**kw)

    def test_inf_decay_serializes(self):
        assert CorpusSpec(decay=math.inf).to_dict()["decay"] == "inf"


class TestAssess:
    def test_constant_ratios(self, corpus):
        reps = assess(lambda cp, idx: {("x", "p"): [1.0 for _ in idx]}, corpus)
        (r,) = reps
        assert r.bounded and r.drift_corpus == 0.0 and r.drift_resolution == 0.0
        assert len(r.ratios) == 2 * corpus.spec.count and r.skipped == 0

    def test_growth_is_unbounded(self, corpus):
        reps = assess(lambda cp, idx: {("x", "p"): [float(i + 1) for i in idx]}, corpus)
        assert reps[0].verdict == "unbounded-trend"
        assert reps[0].drift_corpus == pytest.approx(1.0)

    def test_drift_limit_edge(self, corpus):
        grow = 1.0 + 0.5 * DRIFT_LIMIT
        reps = assess(lambda cp, idx: {("x", "p"): [grow if i >= cp.spec.count else 1.0 for i in idx]}, corpus)
        assert reps[0].bounded

    def test_resolution_drift(self, corpus):
        fn = lambda cp, idx: {("x", "p"): [float(cp.grid.n_points) / 128 for _ in idx]}  # noqa: E731
        r = assess(fn, corpus, refine_count=1)[0]
        assert r.drift_resolution == pytest.approx(1.0) and not r.bounded
        assert assess(fn, corpus, refine_count=0)[0].bounded

    def test_nan_skipped(self, corpus):
        r = assess(lambda cp, idx: {("x", "p"): [math.nan if i == 0 else 1.0 for i in idx]}, corpus)[0]
        assert r.skipped == 1 and r.bounded
        assert r.sample_records()[0]["ratio"] is None

    def test_all_nan_unbounded(self, corpus):
        r = assess(lambda cp, idx: {("x", "p"): [math.nan for _ in idx]}, corpus)[0]
        assert not r.bounded

    def test_summary_fields(self, corpus):
        r = assess(lambda cp, idx: {("x", "p"): [0.5 for _ in idx]}, corpus)[0]
        s = r.summary()
        assert s["schema"] == "swlab.estimate/1" and s["kind"] == "summary"
        assert s["samples"] == 4 and s["max_ratio"] == 0.5 and s["corpus"]["n_points"] == 128
        assert isinstance(r, EstimateReport)


class TestSelection:
    def test_all(self):
        groups, keep = resolve_selection(None)
        assert "apriori" not in groups and keep is None

    def test_group_and_id(self):
        assert resolve_selection("products") == (["products"], None)
        assert resolve_selection("commutator.low") == (["commutators"], {"commutator.low"})

    def test_prefix(self):
        groups, keep = resolve_selection("product")
        assert set(groups) == {"products", "weighted_products"}
        assert "product.tame" in keep and "product.weighted_sum" in keep

    def test_unknown(self):
        with pytest.raises(KeyError):
            resolve_selection("nope")


class TestCommutatorRatios:
    @pytest.mark.parametrize("A", SYMBOLS, ids=lambda a: a.name)
    def test_representer_identity(self, corpus, A):
        p, g = corpus.partition, corpus.grid
        f = random_field(corpus.spec, g, 0, 1)
        h = random_field(corpus.spec, g, 0, 2)
        v = random_vector(corpus.spec, g, 0, 3)
        V = np.stack([v.u1.coefficients, v.u2.coefficients])
        band = _band(corpus)
        for K, pair in ((pairing_representers(f, A, p, band), block_pairings(v, f, A, p)[0]),
                        (pairing_representers(f, A, p, band, h), cross_pairings(v, f, h, A, p)[0])):
            rep = PERIOD ** 2 * np.array([np.sum((V * np.conj(Kk)).real) for Kk in K])
            assert np.max(np.abs(pair - rep)) <= 1e-14 * np.max(np.abs(pair))

    def test_alpha_zero_velocity(self, corpus):
        p = corpus.partition
        ks = np.arange(p.k_min, p.k_max + 1)
        f = random_field(corpus.spec, corpus.grid, 0)
        pair, naf = block_pairings(VectorField2D.zero(corpus.grid), f, MultiplierSymbol.identity(), p)
        assert np.all(pair == 0)
        alpha = alpha_sequence(pair, naf, ks, 0.0, 1.0, 0.0, 1.0, 0)
        assert np.all(np.isnan(alpha)) and math.isnan(_partial_sum(alpha, ks >= 0))

    def test_alpha_scale_invariant(self, corpus):
        p = corpus.partition
        ks = np.arange(p.k_min, p.k_max + 1)
        pair = np.linspace(1.0, 2.0, ks.size)
        naf = np.ones(ks.size)
        a1 = alpha_sequence(pair, naf, ks, 1.0, 1.0, 0.0, 1.0, 1)
        a2 = alpha_sequence(3 * pair, naf, ks, 3.0, 1.0, 0.0, 1.0, 1)
        np.testing.assert_allclose(a1, a2, rtol=1e-15)
        # Block weights 2^{-k(s_k - m)} with s_k = s1 on k <= 0 and s2 on k >= 1.
        np.testing.assert_allclose(a1, pair / 2.0 ** (-ks * (np.where(ks >= 1, 1.0, 0.0) - 1)), rtol=1e-15)

    def test_alignment_beats_random(self, corpus):
        """The aligned probe never yields a smaller pairing than a random velocity of equal norm."""
        p, g = corpus.partition, corpus.grid
        f = random_field(corpus.spec, g, 0, 1)
        A = MultiplierSymbol.modulus()
        K = pairing_representers(f, A, p, _band(corpus))
        i = p.index(0)
        Va = K[i]
        v = random_vector(corpus.spec, g, 5, 3)
        Vr = np.stack([v.u1.coefficients, v.u2.coefficients])
        Vr *= np.linalg.norm(Va) / np.linalg.norm(Vr)
        aligned = VectorField2D(*(type(f)(g, c, 0.0) for c in Va))
        random = VectorField2D(*(type(f)(g, c, 0.0) for c in Vr))
        assert abs(block_pairings(aligned, f, A, p)[0][i]) >= abs(block_pairings(random, f, A, p)[0][i])


class TestHarness:
    def test_products_small_corpus(self, corpus):
        reps = run_harness("products", corpus=corpus, refine_count=1)
        assert reps and all(r.bounded for r in reps)
        assert {r.inequality for r in reps} <= set(INEQUALITY_GROUPS["products"])

    def test_single_id_filter(self, corpus):
        reps = run_harness("interpolation.log", corpus=corpus, refine_count=0)
        assert reps and {r.inequality for r in reps} == {"interpolation.log"}

    def test_reports_deterministic(self, corpus):
        a = [r.summary() for r in run_harness("commutator.low", corpus=corpus, refine_count=0)]
        b = [r.summary() for r in run_harness("commutator.low", corpus=corpus, refine_count=0)]
        assert a == b


class TestOsgood:
    def test_M_linear(self):
        for x in (1e-12, 0.3, 1.0, 7.0):
            assert osgood_M(linear_modulus(), x) == pytest.approx(math.log(1 / x), abs=1e-13)

    def test_M_log_matches_mpmath(self):
        for W, x in ((1.0, 1e-12), (50.0, 1e-3), (0.0, 0.5)):
            assert osgood_M(log_modulus(W), x) == pytest.approx(float(_mp_M(W, x)), rel=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(a=st.floats(1e-10, 10.0), g=st.floats(0.0, 3.0), t=st.floats(0.05, 1.0))
    def test_gronwall(self, a, g, t):
        p = OsgoodProblem(a=a, gamma=lambda s: g, mu=linear_modulus())
        assert osgood_bound(p, t) == pytest.approx(a * math.exp(g * t), rel=1e-6)

    def test_gronwall_variable_gamma(self):
        p = OsgoodProblem(a=0.01, gamma=lambda s: 1 + math.sin(3 * s), mu=linear_modulus())
        G = 1 + (1 - math.cos(3)) / 3
        assert osgood_bound(p, 1.0) == pytest.approx(0.01 * math.exp(G), rel=1e-6)

    def test_zero_gamma(self):
        p = OsgoodProblem(a=0.25, gamma=lambda s: 0.0, mu=log_modulus(3.0))
        assert osgood_bound(p, 1.0) == 0.25

    def test_log_modulus_oracle(self):
        p = OsgoodProblem(a=1e-12, gamma=lambda s: 1.0, mu=log_modulus(1.0))
        assert osgood_bound(p, 1.0) == pytest.approx(_mp_log_bound(1.0, 1e-12, 1.0), rel=1e-4)

    def test_sampled_gamma(self):
        t = np.linspace(0, 1, 401)
        p1 = OsgoodProblem(a=1e-6, gamma=(t, 2 * t), mu=log_modulus(2.0))
        p2 = OsgoodProblem(a=1e-6, gamma=lambda s: 2 * s, mu=log_modulus(2.0))
        assert gamma_integral((t, 2 * t), 0.0, 0.5) == pytest.approx(0.25, rel=1e-12)
        assert osgood_bound(p1, 1.0) == pytest.approx(osgood_bound(p2, 1.0), rel=1e-10)

    def test_monotone_in_a_and_t(self):
        mu = log_modulus(1.0)
        b = [osgood_bound(OsgoodProblem(a=a, gamma=lambda s: 1.0, mu=mu), 1.0) for a in (1e-9, 1e-6, 1e-3)]
        assert b[0] < b[1] < b[2]
        p = OsgoodProblem(a=1e-6, gamma=lambda s: 1.0, mu=mu)
        assert osgood_bound(p, 0.3) < osgood_bound(p, 0.6) < osgood_bound(p, 1.0)

    def test_zero_data_limit(self):
        res = osgood_solve(OsgoodProblem(a=0.0, gamma=lambda s: 1.0, mu=log_modulus(1.0)), 1.0)
        assert res.zero_data_limit and res.extra["shrinking"] and res.bound < 1e-100

    def test_saturation(self):
        res = osgood_solve(OsgoodProblem(a=1.0, gamma=lambda s: 100.0, mu=linear_modulus(), x_max=1e6), 1.0)
        assert res.saturated and res.bound == 1e6

    @pytest.mark.parametrize("kw", [dict(a=-1.0), dict(t1=0.0), dict(nodes=1),
                                    dict(mu=lambda r: np.asarray(r, float) + 1.0),
                                    dict(gamma=(np.array([0.0, 1.0]), np.array([1.0, -1.0])))])
    def test_rejects(self, kw):
        base = dict(a=1.0, gamma=lambda s: 1.0, mu=linear_modulus())
        with pytest.raises(ConfigurationError):
            OsgoodProblem(**(base | kw))

    def test_time_outside(self):
        with pytest.raises(ValueError):
            osgood_bound(OsgoodProblem(a=1.0, gamma=lambda s: 1.0, mu=linear_modulus()), 2.0)


class TestUniqueness:
    def _data(self, grid, partition, seed=0, amp=1e-4):
        rng = np.random.default_rng(seed)
        return band_limited(grid, partition, rng, amplitude=amp), band_limited_vector(grid, partition, rng, amplitude=amp)

    def test_perturbation_bounds(self, grid, partition):
        h, u = self._data(grid, partition)
        with pytest.raises(ConfigurationError):
            uniqueness_experiment(h, u, IterationConfig(T=0.2, dt=0.05), partition, 2 * MAX_PERTURBATION)

    def test_top_block_support(self, grid, partition):
        h, u = self._data(grid, partition)
        d = top_block_perturbation(u, partition, 1e-3)
        r = grid.radius
        k = partition.k_max
        for c in d.components:
            assert not np.any(c.coefficients[(r < 1.2 * 2.0 ** k) | (r > (5 / 3) * 2.0 ** k)])
        norm = math.sqrt(sum(float(np.sum(np.abs(c.coefficients) ** 2)) for c in d.components)) * PERIOD
        assert norm == pytest.approx(1e-3, rel=1e-12)

    def test_zero_perturbation_identical(self, grid, partition):
        h, u = self._data(grid, partition)
        rep = uniqueness_experiment(h, u, IterationConfig(N=8, T=0.2, dt=0.05), partition, 0.0)
        assert rep.status == "ok" and rep.identical and rep.Z_T == 0.0 and rep.below_bound

    def test_tiny_perturbation_below_bound(self, grid, partition):
        h, u = self._data(grid, partition)
        rep = uniqueness_experiment(h, u, IterationConfig(N=8, T=0.5, dt=0.05), partition, 1e-9)
        assert rep.status == "ok" and not rep.identical
        assert 0 < rep.Z_T <= rep.osgood_bound and rep.below_bound
        assert np.all(np.diff(rep.Z) >= 0)
        s = rep.summary()
        assert s["schema"] == "swlab.uniqueness/1" and len(rep.records()) == rep.times.size
