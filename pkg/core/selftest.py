# core/selftest.py - invariant suite behind `app.py selftest`
import logging
import math

import numpy as np

from core import bounds, families
from core.envelope import EnvelopeMode, Mixture, WeightedComponent, mixture_partition, pairwise_intersections
from core.errors import MixboundError
from core.families import Exponential, Gaussian, Rayleigh, log_polynomial
from core.integrals import partial_cross_entropy_C
from core.quadrature import adaptive_quadrature

logger = logging.getLogger(__name__)

EXACT_TOL = 1e-9


def _single(params):
    return Mixture.of([(1.0, params)])


def check_gaussian_collapse():
    interval = bounds.best_kl_bounds(_single(Gaussian(0.0, 1.0)), _single(Gaussian(1.0, 1.0)))
    return interval.gap <= EXACT_TOL and abs(interval.midpoint - 0.5) <= EXACT_TOL, \
        f"KL(N(0,1):N(1,1)) in [{interval.lower:.12g}, {interval.upper:.12g}], expected 0.5"


def check_exponential_collapse():
    interval = bounds.best_kl_bounds(_single(Exponential(1.0)), _single(Exponential(2.0)))
    expected = 1.0 - math.log(2.0)
    return interval.gap <= EXACT_TOL and abs(interval.midpoint - expected) <= EXACT_TOL, \
        f"KL(Exp(1):Exp(2)) in [{interval.lower:.12g}, {interval.upper:.12g}], expected {expected:.12g}"


def check_gaussian_entropy():
    interval = bounds.entropy_bounds(_single(Gaussian(0.0, 1.0)))
    expected = families.entropy(Gaussian(0.0, 1.0))
    ok = interval.contains(expected, EXACT_TOL) and abs(bounds.meub(_single(Gaussian(0.0, 1.0))) - expected) <= EXACT_TOL
    return ok, f"H(N(0,1)) in [{interval.lower:.12g}, {interval.upper:.12g}], expected {expected:.12g}"


def check_rayleigh_intersection():
    roots = pairwise_intersections(WeightedComponent(0.5, Rayleigh(1.0)), WeightedComponent(0.5, Rayleigh(2.0)),
                                   Rayleigh.support)
    expected = math.sqrt(8.0 * math.log(4.0) / 3.0)
    return len(roots) == 1 and abs(roots[0] - expected) <= 1e-9, f"Rayleigh(1)/Rayleigh(2) cross at {roots}"


def check_width_law():
    m = Mixture.of([(0.5, Gaussian(-2.0, 0.5)), (0.5, Gaussian(2.0, 1.0))])
    m_prime = Mixture.of([(0.3, Gaussian(0.0, 1.0)), (0.3, Gaussian(3.0, 0.3)), (0.4, Gaussian(-4.0, 2.0))])
    interval = bounds.kl_bounds_ce(m, m_prime)
    limit = math.log(2) + math.log(3) + 2.0 * interval.quadrature_slack + 1e-12
    return interval.gap <= limit, f"CE width {interval.gap:.6g} against log k + log k' = {limit:.6g}"


def check_adaptive_dominance():
    m = Mixture.of([(0.4, Exponential(0.5)), (0.6, Exponential(3.0))])
    m_prime = Mixture.of([(0.5, Exponential(1.0)), (0.5, Exponential(8.0))])
    report = bounds.kl_bound_report(m, m_prime)
    comb, best = report.combinatorial, report.best
    ok = best.lower >= comb.lower - 1e-12 and best.upper <= comb.upper + 1e-12
    return ok, f"adaptive [{best.lower:.6g}, {best.upper:.6g}] inside [{comb.lower:.6g}, {comb.upper:.6g}]"


def check_self_divergence():
    m = Mixture.of([(0.3, Rayleigh(1.0)), (0.7, Rayleigh(4.0))])
    interval = bounds.best_kl_bounds(m, m)
    return interval.contains(0.0, 1e-12), f"KL(m:m) in [{interval.lower:.3g}, {interval.upper:.3g}]"


def check_partition_cover():
    m = Mixture.of([(0.2, Gaussian(-3.0, 1.0)), (0.5, Gaussian(0.0, 0.4)), (0.3, Gaussian(3.0, 1.0))])
    part = mixture_partition(m, EnvelopeMode.UPPER)
    ok = part.breakpoints[0] == -math.inf and part.breakpoints[-1] == math.inf
    ok = ok and all(a < b for a, b in zip(part.breakpoints, part.breakpoints[1:]))
    return ok, f"upper envelope has {len(part)} slabs"


def check_closed_form_against_quadrature():
    ci, cj = WeightedComponent(0.4, Gaussian(0.0, 1.0)), WeightedComponent(0.6, Gaussian(1.0, 2.0))
    log_i, log_j = log_polynomial(ci.params, ci.weight), log_polynomial(cj.params, cj.weight)
    closed = partial_cross_entropy_C(ci, cj, -1.0, 2.0)
    reference = adaptive_quadrature(lambda x: -np.exp(log_i(x)) * log_j(x), -1.0, 2.0, 1e-12)
    diff = abs(closed.value - reference.value)
    return diff <= max(1e-8, closed.error_bound + reference.error_bound), f"C on [-1, 2] differs by {diff:.3e}"


CHECKS = (
    ("gaussian collapse", check_gaussian_collapse),
    ("exponential collapse", check_exponential_collapse),
    ("gaussian entropy", check_gaussian_entropy),
    ("rayleigh intersection", check_rayleigh_intersection),
    ("width law", check_width_law),
    ("adaptive dominance", check_adaptive_dominance),
    ("self divergence", check_self_divergence),
    ("partition cover", check_partition_cover),
    ("closed form vs quadrature", check_closed_form_against_quadrature),
)


def run_checks(echo=print):
    """Run every check, echo a ✅/❌ line per check and return True when all pass."""
    echo("=" * 60)
    all_ok = True
    for name, check in CHECKS:
        try:
            ok, detail = check()
        except MixboundError as exc:
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        echo(f"{'✅' if ok else '❌'} {name}: {detail}")
        if not ok:
            logger.error(f"❌ selftest {name} failed: {detail}")
            all_ok = False
    echo("=" * 60)
    echo("🎉 ALL INVARIANTS HOLD" if all_ok else "⚠️ SOME INVARIANTS FAILED")
    return all_ok
