import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from liningbayes import fem
from liningbayes.bayes import LikelihoodSpec, LogPosterior, PriorSpec, log_likelihood, log_posterior, log_prior
from liningbayes.parameterization import PressureField
from liningbayes.response import ObservationSet, ResponseOperator, full_baselines

LOG_2PI = np.log(2 * np.pi)


@pytest.fixture(scope="module")
def op12(small_model, small_mesh):
    return ResponseOperator.build(small_model, small_mesh, 12)


@pytest.fixture(scope="module")
def truth12():
    return 600.0 + 200.0 * np.cos(2 * np.radians(np.arange(12) * 30.0)) + np.arange(12) * 5.0


def clean_observations(op, q, force=True, sigma=1.0):
    b = full_baselines(op.mesh)
    d = op.convergence(q, b)
    if force:
        return ObservationSet(b.angles, d, sigma=sigma, force_angle=0.0, force=op.hoop_force(q, 0.0),
                              force_sigma=5.0)
    return ObservationSet(b.angles, d, sigma=sigma)


class TestPrior:
    def test_below_box(self):
        prior = PriorSpec(0.0, 3000.0, 4)
        assert log_prior([-1.0, 10.0, 10.0, 10.0], prior) == -np.inf

    def test_flat_inside(self):
        prior = PriorSpec(0.0, 3000.0, 4)
        assert log_prior([1.0, 2.0, 3.0, 4.0], prior) == log_prior([2999.0, 5.0, 1500.0, 0.0], prior)
        assert log_prior([1.0] * 4, prior) == pytest.approx(-4 * np.log(3000.0))

    def test_batch(self):
        prior = PriorSpec(0.0, 10.0, 2)
        out = log_prior([[1.0, 2.0], [11.0, 2.0]], prior)
        assert np.isfinite(out[0]) and out[1] == -np.inf

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            log_prior([1.0, 2.0], PriorSpec(0.0, 10.0, 3))

    def test_empty_box(self):
        with pytest.raises(ValueError):
            PriorSpec(5.0, 5.0, 3)


class TestLikelihood:
    def test_maximum_at_exact_fit(self, op12, truth12):
        obs = clean_observations(op12, truth12, force=False, sigma=0.7)
        spec = LikelihoodSpec(obs, op12)
        H = len(obs)
        assert log_likelihood(truth12, spec) == pytest.approx(-H / 2 * np.log(2 * np.pi * 0.7**2), abs=1e-9)

    def test_one_more_datum(self, op12, truth12):
        obs = clean_observations(op12, truth12, force=False)
        q = truth12 + 40.0 * np.cos(np.radians(np.arange(12) * 30.0 * 2))
        d_pred = op12.convergence(q, full_baselines(op12.mesh))
        # Readings chosen so the added datum sits exactly one sigma from its prediction.
        short = ObservationSet(obs.angles[:-1], obs.readings[:-1])
        longer = ObservationSet(obs.angles, np.r_[obs.readings[:-1], d_pred[-1] + 1.0])
        gap = log_likelihood(q, LikelihoodSpec(longer, op12)) - log_likelihood(q, LikelihoodSpec(short, op12))
        assert gap == pytest.approx(-0.5 - 0.5 * LOG_2PI, abs=1e-9)

    def test_uniform_offset_gap_expansion(self, reference_model, reference_mesh):
        op = ResponseOperator.build(reference_model, reference_mesh, 22)
        b = full_baselines(reference_mesh)
        rng = np.random.default_rng(7)
        q1 = rng.uniform(300, 900, 22)
        q2 = q1 + 200.0
        d = op.convergence(q1 + rng.uniform(-50, 50, 22), b) + rng.normal(0, 1 / 3, len(b))
        obs = ObservationSet(b.angles, d, sigma=1.0)
        spec = LikelihoodSpec(obs, op)
        d1, d2 = op.convergence(q1, b), op.convergence(q2, b)
        expansion = np.sum((d1 - d2) * (d1 + d2 - 2 * d)) / 2.0
        direct = log_likelihood(q2, spec) - log_likelihood(q1, spec)
        assert direct == pytest.approx(expansion, abs=1e-9)
        assert np.ptp(d2 - d1) < 1e-9

    def test_force_term(self, op12, truth12):
        obs = clean_observations(op12, truth12)
        spec = LikelihoodSpec(obs, op12)
        assert spec.has_force
        shifted = ObservationSet(obs.angles, obs.readings, force_angle=0.0, force=obs.force + 5.0,
                                 force_sigma=5.0)
        gap = log_likelihood(truth12, spec) - log_likelihood(truth12, LikelihoodSpec(shifted, op12))
        assert gap == pytest.approx(0.5, abs=1e-9)
        assert not LikelihoodSpec(obs, op12, use_force=False).has_force

    def test_batch_matches_single(self, op12, truth12):
        spec = LikelihoodSpec(clean_observations(op12, truth12), op12)
        Q = truth12 + np.random.default_rng(1).normal(0, 30, (4, 12))
        np.testing.assert_allclose(log_likelihood(Q, spec), [log_likelihood(q, spec) for q in Q])

    @given(st.permutations(list(range(12))))
    @settings(max_examples=20, deadline=None)
    def test_reading_order_does_not_matter(self, op12, truth12, perm):
        obs = clean_observations(op12, truth12, force=False)
        q = truth12 + 25.0
        perm = np.array(perm)
        shuffled = ObservationSet(obs.angles[perm], obs.readings[perm])
        assert log_likelihood(q, LikelihoodSpec(shuffled, op12)) == pytest.approx(
            log_likelihood(q, LikelihoodSpec(obs, op12)), rel=1e-12)


class TestPosterior:
    def test_out_of_box_skips_likelihood(self):
        calls = []

        class Spy:
            n = 3

            def __call__(self, q):
                calls.append(q)
                return 0.0

        prior = PriorSpec(0.0, 10.0, 3)
        assert log_posterior([11.0, 1.0, 1.0], prior, Spy()) == -np.inf
        assert not calls
        assert np.isfinite(log_posterior([1.0, 1.0, 1.0], prior, Spy()))
        assert len(calls) == 1

    def test_batch_skips_out_of_box_rows(self):
        seen = []

        class Spy:
            def __call__(self, q):
                seen.append(np.array(q))
                return np.zeros(len(q))

        prior = PriorSpec(0.0, 10.0, 2)
        out = log_posterior(np.array([[1.0, 1.0], [20.0, 1.0], [3.0, 3.0]]), prior, Spy())
        assert out[1] == -np.inf and np.isfinite(out[[0, 2]]).all()
        assert seen[0].shape == (2, 2)

    def test_prior_only(self):
        prior = PriorSpec(0.0, 10.0, 2)
        assert LogPosterior(prior)([1.0, 2.0]) == pytest.approx(-2 * np.log(10.0))

    @given(arrays(np.float64, 12, elements=st.floats(0, 3000)),
           arrays(np.float64, 12, elements=st.floats(0, 3000)))
    @settings(max_examples=20, deadline=None)
    def test_difference_is_likelihood_difference(self, op12, truth12, a, b):
        prior = PriorSpec(0.0, 3000.0, 12)
        spec = LikelihoodSpec(clean_observations(op12, truth12), op12)
        gap = log_posterior(a, prior, spec) - log_posterior(b, prior, spec)
        assert gap == pytest.approx(spec(a) - spec(b), rel=1e-9, abs=1e-6)

    def test_truth_beats_grid_of_perturbations(self):
        model = fem.LiningModel.from_section(6.2, 3.5e7, 0.35, k_f=1000.0, n_elements=16, eta=0.26)
        mesh = fem.build_mesh(model)
        op = ResponseOperator.build(model, mesh, 4)
        truth = np.array([700.0, 400.0, 650.0, 450.0])
        prior = PriorSpec(0.0, 3000.0, 4)
        spec = LikelihoodSpec(clean_observations(op, truth), op)
        best = log_posterior(truth, prior, spec)
        steps = (-100.0, 0.0, 100.0)
        for delta in itertools.product(steps, repeat=4):
            q = truth + np.array(delta)
            assert log_posterior(q, prior, spec) <= best + 1e-9

    def test_truth_is_exact_maximum(self, op12, truth12):
        spec = LikelihoodSpec(clean_observations(op12, truth12), op12)
        assert spec(truth12) == pytest.approx(spec.max_log_likelihood(), abs=1e-9)
        assert PressureField(truth12).n == spec.n
