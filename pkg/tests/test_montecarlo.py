import math
from dataclasses import dataclass

import numpy as np
import pytest
from scipy import stats

from core import bounds
from core.envelope import Mixture
from core.errors import ArgumentError
from core.families import Exponential, Gaussian
from core.montecarlo import (
    EstimatorConfig,
    McEstimate,
    mc_entropy,
    mc_kl,
    mixture_log_density,
    repetition_stats,
    sample_mixture,
)


def test_sampling_is_deterministic_per_seed(gaussian_pair):
    m, _ = gaussian_pair
    np.testing.assert_array_equal(sample_mixture(m, 1000, seed=5), sample_mixture(m, 1000, seed=5))
    assert not np.array_equal(sample_mixture(m, 1000, seed=5), sample_mixture(m, 1000, seed=6))


def test_sample_follows_the_mixture(gaussian_pair):
    m, _ = gaussian_pair
    xs = sample_mixture(m, 50_000, seed=1)
    cdf = lambda x: sum(c.weight * stats.norm.cdf(x, c.params.mean, c.params.stddev) for c in m.components)
    assert stats.kstest(xs, cdf).pvalue > 1e-4


def test_sample_size_must_be_positive(gaussian_pair):
    with pytest.raises(ArgumentError):
        sample_mixture(gaussian_pair[0], 0)


def test_mixture_log_density(gaussian_pair):
    m, _ = gaussian_pair
    xs = np.array([-2.0, 0.0, 1.5, 40.0])
    expected = np.log(sum(c.weight * stats.norm.pdf(xs, c.params.mean, c.params.stddev) for c in m.components))
    np.testing.assert_allclose(mixture_log_density(m, xs)[:3], expected[:3], rtol=1e-12)
    assert np.isfinite(mixture_log_density(m, xs)[3])


def test_kl_of_a_mixture_with_itself_is_exactly_zero(gaussian_pair):
    m, _ = gaussian_pair
    est = mc_kl(m, m, 500, seed=3)
    assert est.mean == 0.0 and est.stddev == 0.0


def test_single_run_estimates():
    m, m_prime = Mixture.of([(1.0, Gaussian(0.0, 1.0))]), Mixture.of([(1.0, Gaussian(1.0, 1.0))])
    est = mc_kl(m, m_prime, 40_000, seed=9)
    assert est.repetitions == 1 and est.sample_size == 40_000
    assert abs(est.mean - 0.5) < 5 * est.stddev
    assert est.standard_error == est.stddev
    entropy = mc_entropy(m, 40_000, seed=9)
    assert abs(entropy.mean - 1.41894) < 5 * entropy.stddev


def test_repetitions_sandwiched_by_the_bounds(gaussian_pair):
    m, m_prime = gaussian_pair
    est = mc_kl(m, m_prime, 2000, seed=42, reps=20)
    interval = bounds.best_kl_bounds(m, m_prime)
    assert interval.contains(est.mean, 3 * est.stddev)
    assert est.standard_error == pytest.approx(est.stddev / math.sqrt(20))


def test_repetition_statistics_do_not_depend_on_threads():
    m = Mixture.of([(0.5, Exponential(1.0)), (0.5, Exponential(3.0))])
    config = EstimatorConfig("entropy", m, 300)
    one = repetition_stats(config, 8, base_seed=17, max_workers=1)
    many = repetition_stats(config, 8, base_seed=17, max_workers=4)
    assert one == many


@dataclass(frozen=True)
class ConstantEstimator:
    kind: str = "kl"
    sample_size: int = 10

    def run(self, seed):
        return 0.25


def test_constant_estimator_has_zero_spread():
    est = repetition_stats(ConstantEstimator(), 5, base_seed=1)
    assert est == McEstimate(0.25, 0.0, 10, 5, 1)


def test_repetition_statistics_need_two_runs():
    with pytest.raises(ArgumentError):
        repetition_stats(ConstantEstimator(), 1)


def test_estimator_config_validation(gaussian_pair):
    m, _ = gaussian_pair
    with pytest.raises(ArgumentError):
        EstimatorConfig("kl", m, 10)
    with pytest.raises(ArgumentError):
        EstimatorConfig("variance", m, 10)
    with pytest.raises(ArgumentError):
        EstimatorConfig("entropy", m, 0)


@pytest.mark.slow
def test_large_sample_estimates_sit_inside_the_preset_bounds():
    from core.config import preset

    cfg = preset("paper-s4")
    for _, first, second in cfg.pairs:
        for m, m_prime in ((first, second), (second, first)):
            means = [mc_kl(m, m_prime, 1_000_000, seed=s).mean for s in range(10)]
            est_mean = float(np.mean(means))
            est_se = float(np.std(means, ddof=1) / math.sqrt(len(means)))
            assert bounds.best_kl_bounds(m, m_prime).contains(est_mean, 3 * est_se + 1e-12)


@pytest.mark.slow
def test_large_sample_entropy_sits_inside_the_preset_bounds():
    from core.config import preset

    for _, m in preset("entropy-gmm").entropy_targets():
        est = mc_entropy(m, 1_000_000, seed=3, reps=10)
        interval = bounds.entropy_bounds(m)
        margin = 3 * est.standard_error + 1e-12
        assert interval.lower - margin <= est.mean <= min(interval.upper, bounds.meub(m)) + margin
