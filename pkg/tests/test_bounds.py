import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import logsumexp

from core import bounds
from core.cache import cache_stats
from core.config import preset
from core.envelope import Mixture
from core.errors import ArgumentError, InvariantViolation
from core.families import Exponential, Gamma, Gaussian, LogPolynomial, Rayleigh
from core.montecarlo import mixture_log_density

GAP_TOL = 1e-9
DOMINANCE_TOL = 1e-12


def single(params):
    return Mixture.of([(1.0, params)])


def true_cross_entropy(m, m_prime):
    f = lambda x: -math.exp(float(mixture_log_density(m, x)[0])) * float(mixture_log_density(m_prime, x)[0])
    value, _ = integrate.quad(f, m.support.lo, m.support.hi, epsabs=1e-11, epsrel=1e-11, limit=1000)
    return value


def true_kl(m, m_prime):
    return true_cross_entropy(m, m_prime) - true_cross_entropy(m, m)


class TestLogSumExp:
    def test_equal_values(self):
        interval = bounds.lse_bounds([0.0, 0.0])
        assert interval.lower == pytest.approx(math.log(2))
        assert interval.upper == pytest.approx(math.log(2))

    def test_random_values_are_bracketed(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            xs = rng.normal(scale=5.0, size=int(rng.integers(1, 8)))
            assert bounds.lse_bounds(xs).contains(float(logsumexp(xs)), 1e-12)

    def test_empty(self):
        with pytest.raises(ArgumentError):
            bounds.lse_bounds([])


class TestBoundInterval:
    def test_empty_interval_rejected(self):
        with pytest.raises(ArgumentError):
            bounds.BoundInterval(1.0, 0.0)

    def test_operations(self):
        a = bounds.BoundInterval(0.0, 2.0, 0.1)
        b = bounds.BoundInterval(1.0, 3.0, 0.2)
        assert a.gap == 2.0 and a.midpoint == 1.0
        both = a.intersect(b)
        assert (both.lower, both.upper, both.quadrature_slack) == (1.0, 2.0, 0.2)
        total = a + b
        assert (total.lower, total.upper) == (1.0, 5.0)
        assert total.quadrature_slack == pytest.approx(0.3)
        bits = a.to_bits()
        assert bits.upper == pytest.approx(2.0 / math.log(2))
        assert a.widen(0.5).lower == -0.5
        assert a.contains(2.05, 0.1) and not a.contains(2.2)

    def test_rounding_crossing_keeps_the_hull(self):
        both = bounds.BoundInterval(0.0, 1.0).intersect(bounds.BoundInterval(1.0 + 1e-14, 2.0))
        assert (both.lower, both.upper) == (1.0, 1.0 + 1e-14)

    def test_crossing_within_quadrature_slack(self):
        both = bounds.BoundInterval(0.0, 1.0, 0.05).intersect(bounds.BoundInterval(1.04, 2.0))
        assert (both.lower, both.upper) == (1.0, 1.04)

    def test_disjoint_intervals_raise(self):
        with pytest.raises(InvariantViolation):
            bounds.BoundInterval(0.0, 1.0).intersect(bounds.BoundInterval(1.1, 2.0))

    def test_disjoint_adaptive_interval_surfaces_from_the_report(self, gaussian_pair, monkeypatch):
        monkeypatch.setattr(bounds, "adaptive_kl_bounds", lambda *args, **kwargs: bounds.BoundInterval(100.0, 101.0))
        with pytest.raises(InvariantViolation):
            bounds.best_kl_bounds(*gaussian_pair)

    def test_improvement(self):
        assert bounds.improvement(bounds.BoundInterval(0.0, 2.0), bounds.BoundInterval(0.5, 1.5)) == pytest.approx(50.0)
        assert bounds.improvement(bounds.BoundInterval(1.0, 1.0), bounds.BoundInterval(1.0, 1.0)) == 0.0


COLLAPSE_CASES = [
    (Gaussian(0.0, 1.0), Gaussian(1.0, 1.0), 0.5),
    (Exponential(1.0), Exponential(2.0), 1.0 - math.log(2.0)),
    (Rayleigh(1.0), Rayleigh(2.0), 2 * math.log(2.0) + 0.25 - 1.0),
    (Gamma(3.0, 1.0), Gamma(3.0, 2.0), 3 * (0.5 - 1.0) + 3 * math.log(2.0)),
]


@pytest.mark.parametrize("first,second,expected", COLLAPSE_CASES, ids=["gaussian", "exponential", "rayleigh", "gamma"])
def test_single_components_collapse_to_the_exact_divergence(first, second, expected):
    m, m_prime = single(first), single(second)
    for interval in (bounds.kl_bounds_ce(m, m_prime), bounds.kl_bounds_ratio(m, m_prime),
                     bounds.adaptive_kl_bounds(m, m_prime), bounds.best_kl_bounds(m, m_prime)):
        assert interval.gap <= GAP_TOL
        assert interval.midpoint == pytest.approx(expected, abs=GAP_TOL)


def test_gamma_with_different_shapes_collapses():
    m, m_prime = single(Gamma(2.0, 1.0)), single(Gamma(4.0, 0.5))
    interval = bounds.best_kl_bounds(m, m_prime)
    assert interval.gap <= GAP_TOL + 2 * interval.quadrature_slack
    assert interval.contains(true_kl(m, m_prime), 1e-8)


def test_bounds_contain_the_true_divergence(small_pair):
    m, m_prime = small_pair
    truth = true_kl(m, m_prime)
    report = bounds.kl_bound_report(m, m_prime)
    for interval in (report.ce, report.ratio, report.adaptive, report.combinatorial, report.best):
        assert interval.contains(truth, 1e-7), interval
    reverse = bounds.best_kl_bounds(m_prime, m)
    assert reverse.contains(true_kl(m_prime, m), 1e-7)


def test_cross_entropy_bounds_contain_the_truth(small_pair):
    m, m_prime = small_pair
    truth = true_cross_entropy(m, m_prime)
    assert bounds.cross_entropy_bounds(m, m_prime).contains(truth, 1e-7)
    assert bounds.adaptive_cross_entropy_bounds(m, m_prime).contains(truth, 1e-7)


def test_adaptive_interval_never_leaves_the_combinatorial_one(small_pair):
    m, m_prime = small_pair
    report = bounds.kl_bound_report(m, m_prime)
    comb, best = report.combinatorial, report.best
    assert best.lower >= comb.lower - DOMINANCE_TOL
    assert best.upper <= comb.upper + DOMINANCE_TOL


def test_divergence_of_a_mixture_with_itself_contains_zero(small_pair):
    m, _ = small_pair
    for interval in (bounds.kl_bounds_ce(m, m), bounds.kl_bounds_ratio(m, m), bounds.best_kl_bounds(m, m)):
        assert interval.contains(0.0, DOMINANCE_TOL)


def test_width_law_on_the_gaussian_preset_pair():
    cfg = preset("paper-s4")
    _, m, m_prime = next(p for p in cfg.pairs if p[0] == "GMM")
    assert (m.k, m_prime.k) == (7, 9)
    for a, b in ((m, m_prime), (m_prime, m)):
        interval = bounds.kl_bounds_ce(a, b)
        assert interval.gap <= math.log(7) + math.log(9) + 2 * interval.quadrature_slack + DOMINANCE_TOL


def test_width_law_on_cross_entropy(gaussian_pair):
    m, m_prime = gaussian_pair
    interval = bounds.cross_entropy_bounds(m, m_prime)
    assert interval.gap <= math.log(m_prime.k) + 2 * interval.quadrature_slack + DOMINANCE_TOL


def test_coincident_components_are_merged_before_bounding():
    split = Mixture.of([(0.25, Gaussian(0.0, 1.0)), (0.25, Gaussian(0.0, 1.0)), (0.5, Gaussian(3.0, 1.0))])
    joined = Mixture.of([(0.5, Gaussian(0.0, 1.0)), (0.5, Gaussian(3.0, 1.0))])
    other = Mixture.of([(0.5, Gaussian(1.0, 1.0)), (0.5, Gaussian(-2.0, 2.0))])
    assert bounds.best_kl_bounds(split, other) == bounds.best_kl_bounds(joined, other)


def test_mixed_families_rejected():
    with pytest.raises(ArgumentError):
        bounds.kl_bounds_ce(single(Gaussian(0.0, 1.0)), single(Rayleigh(1.0)))


def test_slab_residuals_are_ordered(gaussian_pair):
    m, m_prime = gaussian_pair
    residuals = bounds.slab_residuals(m, m_prime)
    assert residuals[0].lo == -math.inf and residuals[-1].hi == math.inf
    assert math.fsum(r.mass for r in residuals) == pytest.approx(1.0, abs=1e-12)
    for r in residuals:
        assert 0.0 <= r.t_lower <= r.t_upper <= math.log(m_prime.k) + 1e-15


def test_log_ratio_range():
    poly = LogPolynomial(0.0, c2=-1.0)
    assert bounds.log_ratio_range(poly, -1.0, 2.0) == (-4.0, 0.0)
    assert bounds.log_ratio_range(poly, 1.0, math.inf) == (-math.inf, -1.0)


class TestEntropy:
    def test_standard_normal(self):
        m = single(Gaussian(0.0, 1.0))
        for interval in (bounds.entropy_sandwich(m), bounds.entropy_bounds(m)):
            assert interval.gap <= GAP_TOL
            assert interval.midpoint == pytest.approx(1.41894, abs=1e-5)
        assert bounds.meub(m) == pytest.approx(1.41894, abs=1e-5)

    def test_narrow_normal(self):
        interval = bounds.entropy_bounds(single(Gaussian(0.0, 0.1)))
        assert interval.midpoint == pytest.approx(-0.88364, abs=1e-5)

    def test_meub_of_two_narrow_components(self):
        m = Mixture.of([(0.5, Gaussian(-1.0, 0.1)), (0.5, Gaussian(1.0, 0.1))])
        assert bounds.meub(m) == pytest.approx(1.42391, abs=1e-5)

    def test_bounds_contain_the_truth(self, small_pair):
        m, _ = small_pair
        truth = true_cross_entropy(m, m)
        assert bounds.entropy_sandwich(m).contains(truth, 1e-7)
        assert bounds.entropy_bounds(m).contains(truth, 1e-7)

    def test_merged_components_make_meub_tighter_than_the_envelope(self):
        m = Mixture.of([(1 / 3, Gaussian(-0.1, 1.0)), (1 / 3, Gaussian(0.0, 1.0)), (1 / 3, Gaussian(0.1, 1.0))])
        assert bounds.meub(m) < bounds.entropy_sandwich(m).upper

    def test_near_dirac_components_give_a_tight_interval(self):
        m = Mixture.of([(0.5, Gaussian(-1.0, 1e-3)), (0.5, Gaussian(1.0, 1e-3))])
        interval = bounds.entropy_bounds(m)
        assert interval.gap <= 1e-2
        assert interval.contains(math.log(2) + math.log(1e-3) + 1.41894, 1e-4)
        assert bounds.meub(m) == pytest.approx(1.419, abs=1e-2)


class TestComposites:
    def test_jeffreys_is_the_sum_of_both_directions(self, gaussian_pair):
        m, m_prime = gaussian_pair
        total = bounds.jeffreys_bounds(m, m_prime)
        forward, reverse = bounds.best_kl_bounds(m, m_prime), bounds.best_kl_bounds(m_prime, m)
        assert total.lower == pytest.approx(forward.lower + reverse.lower)
        assert total.upper == pytest.approx(forward.upper + reverse.upper)

    def test_js_is_within_zero_and_log_two(self, small_pair):
        m, m_prime = small_pair
        interval = bounds.js_bounds(m, m_prime)
        assert 0.0 <= interval.lower <= interval.upper <= math.log(2)
        avg = bounds.average_mixture(m, m_prime)
        truth = 0.5 * (true_kl(m, avg) + true_kl(m_prime, avg))
        assert interval.contains(truth, 1e-7)

    def test_js_of_identical_mixtures_contains_zero(self, gaussian_pair):
        m, _ = gaussian_pair
        assert bounds.js_bounds(m, m).contains(0.0, DOMINANCE_TOL)

    def test_average_mixture_is_symmetric(self, gaussian_pair):
        m, m_prime = gaussian_pair
        assert bounds.average_mixture(m, m_prime) == bounds.average_mixture(m_prime, m)
        assert bounds.average_mixture(m, m_prime).k == m.k + m_prime.k

    def test_report_improvement(self, gaussian_pair):
        report = bounds.kl_bound_report(*gaussian_pair)
        assert 0.0 <= report.improvement <= 100.0


def test_a_term_is_memoized(gaussian_pair):
    m, m_prime = gaussian_pair
    first = bounds.a_term(m, m_prime)
    assert bounds.a_term(m, m_prime) is first
    assert cache_stats()["a_term"]["hits"] >= 1


def test_js_is_exactly_symmetric(small_pair):
    m, m_prime = small_pair
    assert bounds.js_bounds(m, m_prime) == bounds.js_bounds(m_prime, m)


def test_kl_bounds_are_affine_invariant(gaussian_pair):
    def moved(m):
        return Mixture.of([(c.weight, Gaussian(2.0 * c.params.mean + 1.0, 2.0 * c.params.stddev))
                           for c in m.components])

    m, m_prime = gaussian_pair
    base = bounds.kl_bound_report(m, m_prime)
    mapped = bounds.kl_bound_report(moved(m), moved(m_prime))
    for name in ("combinatorial", "best"):
        before, after = getattr(base, name), getattr(mapped, name)
        assert after.lower == pytest.approx(before.lower, abs=1e-9)
        assert after.upper == pytest.approx(before.upper, abs=1e-9)


def test_near_dirac_components_give_a_tight_adaptive_interval():
    m = Mixture.of([(0.5, Gaussian(0.0, 1e-3)), (0.5, Gaussian(5.0, 1e-3))])
    m_prime = Mixture.of([(0.3, Gaussian(0.0, 1e-3)), (0.7, Gaussian(5.0, 1e-3))])
    interval = bounds.adaptive_kl_bounds(m, m_prime)
    expected = 0.5 * math.log(0.5 / 0.3) + 0.5 * math.log(0.5 / 0.7)
    assert interval.gap <= 1e-3
    assert interval.contains(expected, 1e-6)


def test_quantile_cuts_stay_inside_the_per_slab_interval(small_pair):
    report = bounds.kl_bound_report(*small_pair)
    assert report.slab_best.contains(report.best.lower, 1e-9)
    assert report.slab_best.contains(report.best.upper, 1e-9)
    assert report.improvement >= report.slab_improvement - 1e-9
