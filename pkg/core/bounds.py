# core/bounds.py - certified cross-entropy, KL and entropy intervals for univariate mixtures
"""
Deterministic bounds assembled from envelope partitions.

Cross-entropy: on each slab of the upper envelope of m' the log-sum-exp of
the weighted log-densities lies between the dominating term and that term
plus log k', which gives

    A(m:m') - log k' <= H×(m:m') <= A(m:m'),   A = Σ_r Σ_s C_{s,δ(r)}(slab r).

The adaptive variant bounds the residual t = log m' - log(w'_δ p'_δ) per slab
from the extrema of the component density ratios instead of using log k'.
Quadrature error bounds are always folded outward.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from core import families
from core.cache import memoize
from core.envelope import (
    EnvelopeMode,
    Mixture,
    WeightedComponent,
    merged_mixture,
    mixture_partition,
    overlay,
    refine,
)
from core.errors import ArgumentError, InvariantViolation
from core.integrals import kl3_truncated, mass_M, partial_cross_entropy_C
from core.quadrature import QuadratureValue

logger = logging.getLogger(__name__)

LOG2 = math.log(2.0)
# relative rounding allowance when two certified intervals barely cross
CROSSING_RTOL = 1e-12

# component quantiles used to cut envelope slabs before taking residual extrema
REFINE_PROBS = np.array([
    1e-6, 1e-4, 1e-3, 0.01, 0.05, 0.1, 0.25, 0.5,
    0.75, 0.9, 0.95, 0.99, 0.999, 1 - 1e-4, 1 - 1e-6,
])


def crossing_tolerance(*values):
    return CROSSING_RTOL * (1.0 + max(abs(v) for v in values))


@dataclass(frozen=True)
class BoundInterval:
    lower: float
    upper: float
    quadrature_slack: float = 0.0

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise ArgumentError(f"bound interval is empty: [{self.lower}, {self.upper}]")
        if not self.quadrature_slack >= 0.0:
            raise ArgumentError(f"slack must be non-negative, got {self.quadrature_slack}")

    @property
    def gap(self):
        return self.upper - self.lower

    @property
    def midpoint(self):
        return 0.5 * (self.lower + self.upper)

    def contains(self, value, tol=0.0):
        return self.lower - tol <= value <= self.upper + tol

    def intersect(self, other):
        """Common part of two certified intervals; crossings beyond rounding raise InvariantViolation."""
        lower, upper = max(self.lower, other.lower), min(self.upper, other.upper)
        slack = max(self.quadrature_slack, other.quadrature_slack)
        if lower > upper:
            allowed = crossing_tolerance(lower, upper) + self.quadrature_slack + other.quadrature_slack
            if lower - upper > allowed:
                raise InvariantViolation(
                    f"certified intervals [{self.lower:.12g}, {self.upper:.12g}] and "
                    f"[{other.lower:.12g}, {other.upper:.12g}] are disjoint by {lower - upper:.3e}"
                )
            logger.debug(f"intersection crossed by {lower - upper:.3e}; keeping the hull of the crossing")
            lower, upper = upper, lower
        return BoundInterval(lower, upper, slack)

    def widen(self, amount):
        return BoundInterval(self.lower - amount, self.upper + amount, self.quadrature_slack + amount)

    def scale(self, factor):
        if factor < 0:
            raise ArgumentError("bound intervals only scale by non-negative factors")
        return BoundInterval(self.lower * factor, self.upper * factor, self.quadrature_slack * factor)

    def __add__(self, other):
        return BoundInterval(self.lower + other.lower, self.upper + other.upper,
                             self.quadrature_slack + other.quadrature_slack)

    def to_bits(self):
        return self.scale(1.0 / LOG2)


@dataclass(frozen=True)
class SlabResidual:
    slab: int
    lo: float
    hi: float
    piece: int
    mass: float
    t_lower: float
    t_upper: float
    per_component_max: Tuple[float, ...] = field(default=())
    per_component_min: Tuple[float, ...] = field(default=())


# ----------------------------------------------------------------------------
# log-sum-exp and the A term
# ----------------------------------------------------------------------------

def lse_bounds(xs):
    """max(max xs, log l + min xs) <= lse(xs) <= log l + max xs."""
    xs = [float(x) for x in xs]
    if not xs:
        raise ArgumentError("lse_bounds needs at least one value")
    log_l = math.log(len(xs))
    top = max(xs)
    return BoundInterval(max(top, log_l + min(xs)), log_l + top)


def _check_pair(m, m_prime):
    if m.family is not m_prime.family:
        raise ArgumentError(f"cannot compare a {m.family.value} mixture with a {m_prime.family.value} mixture")


def _slab_mass(m, lo, hi):
    return math.fsum(-mass_M(c, lo, hi) for c in m.components)


def _fold(values, lower):
    # conservative scalar from a QuadratureValue
    return values.value - values.error_bound if lower else values.value + values.error_bound


@memoize(maxsize=512)
def a_term(m, m_prime, tol=None):
    """A(m:m') = -∫ m log(max_j w'_j p'_j), summed slab by slab over the upper envelope of m'."""
    _check_pair(m, m_prime)
    partition = mixture_partition(m_prime, EnvelopeMode.UPPER)
    terms = []
    for lo, hi, j in partition.slabs():
        target = m_prime.components[j]
        for comp in m.components:
            terms.append(partial_cross_entropy_C(comp, target, lo, hi, tol))
    total = QuadratureValue.total(terms)
    logger.debug(f"A term over {len(partition)} slabs: {total.value:.12g} ± {total.error_bound:.2e}")
    return total


def _canonical(m, m_prime):
    return merged_mixture(m), merged_mixture(m_prime)


def cross_entropy_bounds(m, m_prime, tol=None):
    """[A - log k' - e, A + e] for H×(m:m')."""
    m, m_prime = _canonical(m, m_prime)
    a = a_term(m, m_prime, tol)
    e = a.error_bound
    return BoundInterval(a.value - math.log(m_prime.k) - e, a.value + e, e)


def kl_bounds_ce(m, m_prime, tol=None):
    """KL(m:m') from the cross-entropy and entropy sandwiches: L×(m:m') - U×(m:m) .. U×(m:m') - L×(m:m)."""
    m, m_prime = _canonical(m, m_prime)
    _check_pair(m, m_prime)
    cross = a_term(m, m_prime, tol)
    self_term = a_term(m, m, tol)
    slack = cross.error_bound + self_term.error_bound
    diff = cross.value - self_term.value
    return BoundInterval(diff - math.log(m_prime.k) - slack, diff + math.log(m.k) + slack, slack)


# ----------------------------------------------------------------------------
# Ratio form
# ----------------------------------------------------------------------------

def _kl3_sum(m, forms, num, den, lo, hi, tol):
    # Σ_s ∫ w_s p_s log(w_num p_num / w_den p_den) over one interval
    (w_num, num_form), (w_den, den_form) = num, den
    return QuadratureValue.total(
        kl3_truncated(c.weight, forms[s], w_num, num_form, w_den, den_form, lo, hi, tol)
        for s, c in enumerate(m.components)
    )


def kl_bounds_ratio(m, m_prime, tol=None):
    """KL(m:m') bounded interval by interval on the overlay of all four envelopes."""
    m, m_prime = _canonical(m, m_prime)
    _check_pair(m, m_prime)
    log_k, log_kp = math.log(m.k), math.log(m_prime.k)
    forms = [families.to_natural(c.params) for c in m.components]
    own = [(c.weight, form) for c, form in zip(m.components, forms)]
    other = [(c.weight, families.to_natural(c.params)) for c in m_prime.components]
    intervals = overlay(
        mixture_partition(m, EnvelopeMode.UPPER),
        mixture_partition(m, EnvelopeMode.LOWER),
        mixture_partition(m_prime, EnvelopeMode.UPPER),
        mixture_partition(m_prime, EnvelopeMode.LOWER),
    )
    lower_parts, upper_parts, slack_parts = [], [], []
    for piece in intervals:
        iu, il, iup, ilp = piece.indices
        u, l, up, lp = own[iu], own[il], other[iup], other[ilp]
        mass = _slab_mass(m, piece.lo, piece.hi)
        k_uu = _kl3_sum(m, forms, u, up, piece.lo, piece.hi, tol)
        k_lu = k_uu if il == iu else _kl3_sum(m, forms, l, up, piece.lo, piece.hi, tol)
        k_ul = k_uu if ilp == iup else _kl3_sum(m, forms, u, lp, piece.lo, piece.hi, tol)
        lower_parts.append(max(_fold(k_lu, True) + (log_k - log_kp) * mass, _fold(k_uu, True) - log_kp * mass))
        upper_parts.append(min(_fold(k_ul, False) + (log_k - log_kp) * mass, _fold(k_uu, False) + log_k * mass))
        slack_parts.append(max(k_uu.error_bound, k_lu.error_bound, k_ul.error_bound))
    lower, upper = math.fsum(lower_parts), math.fsum(upper_parts)
    logger.debug(f"ratio bounds over {len(intervals)} intervals: [{lower:.12g}, {upper:.12g}]")
    return BoundInterval(min(lower, upper), max(lower, upper), math.fsum(slack_parts))


# ----------------------------------------------------------------------------
# Adaptive residuals
# ----------------------------------------------------------------------------

def _edge_value(poly, x):
    if math.isinf(x) or x == 0.0:
        return poly.limit(x)
    return float(poly(x))


def log_ratio_range(poly, lo, hi):
    """(min, max) of a log-polynomial over [lo, hi], from the ends and interior critical points."""
    values = [_edge_value(poly, lo), _edge_value(poly, hi)]
    values += [float(poly(c)) for c in poly.critical_points() if lo < c < hi]
    return min(values), max(values)


def refinement_points(*mixtures):
    points = set()
    for mixture in mixtures:
        for comp in mixture.components:
            points.update(float(q) for q in np.atleast_1d(families.quantile(comp.params, REFINE_PROBS)))
    return sorted(p for p in points if math.isfinite(p))


def slab_residuals(m, m_prime, refined=True):
    """
    Per-slab bounds on t(x) = log(1 + Σ_{i≠δ} w'_i p'_i / w'_δ p'_δ), weighted by the mass of m.

    ``refined=False`` takes the extrema over whole envelope slabs; otherwise the
    slabs are first cut at component quantiles.
    """
    partition = mixture_partition(m_prime, EnvelopeMode.UPPER)
    slabs = refine(partition, refinement_points(m, m_prime) if refined else ())
    polys = [c.log_polynomial() for c in m_prime.components]
    residuals = []
    for r, slab in enumerate(slabs):
        piece = slab.indices[0]
        r_max, r_min = [], []
        for i, poly in enumerate(polys):
            if i == piece:
                continue
            low, high = log_ratio_range(poly - polys[piece], slab.lo, slab.hi)
            # δ dominates on the slab, so every ratio is at most 1
            r_max.append(math.exp(min(high, 0.0)))
            r_min.append(math.exp(min(low, 0.0)))
        residuals.append(SlabResidual(
            slab=r,
            lo=slab.lo,
            hi=slab.hi,
            piece=piece,
            mass=_slab_mass(m, slab.lo, slab.hi),
            t_lower=math.log1p(math.fsum(r_min)),
            t_upper=math.log1p(math.fsum(r_max)),
            per_component_max=tuple(r_max),
            per_component_min=tuple(r_min),
        ))
    return residuals


@memoize(maxsize=512)
def adaptive_cross_entropy_bounds(m, m_prime, tol=None, refined=True):
    """H×(m:m') in [A - Σ mass·t_upper, A - Σ mass·t_lower], widened by the quadrature error."""
    m, m_prime = _canonical(m, m_prime)
    _check_pair(m, m_prime)
    a = a_term(m, m_prime, tol)
    residuals = slab_residuals(m, m_prime, refined)
    high = math.fsum(s.mass * s.t_upper for s in residuals)
    low = math.fsum(s.mass * s.t_lower for s in residuals)
    e = a.error_bound
    logger.debug(f"adaptive residual over {len(residuals)} slabs: [{low:.6g}, {high:.6g}]")
    return BoundInterval(a.value - high - e, a.value - low + e, e)


def adaptive_kl_bounds(m, m_prime, tol=None, refined=True):
    """CEALB/CEAUB: adaptive cross-entropy minus adaptive entropy, kept inside the combinatorial interval."""
    cross = adaptive_cross_entropy_bounds(m, m_prime, tol, refined)
    own = adaptive_cross_entropy_bounds(m, m, tol, refined)
    adaptive = BoundInterval(cross.lower - own.upper, cross.upper - own.lower,
                             cross.quadrature_slack + own.quadrature_slack)
    return adaptive.intersect(kl_bounds_ce(m, m_prime, tol))


# ----------------------------------------------------------------------------
# Entropy
# ----------------------------------------------------------------------------

def _c_sum(m, target, lo, hi, tol):
    return QuadratureValue.total(partial_cross_entropy_C(c, target, lo, hi, tol) for c in m.components)


def entropy_sandwich(m, tol=None):
    """H(m) from max(k·lower env, upper env) <= m <= k·upper env."""
    m = merged_mixture(m)
    log_k = math.log(m.k)
    intervals = overlay(mixture_partition(m, EnvelopeMode.UPPER), mixture_partition(m, EnvelopeMode.LOWER))
    lower_parts, upper_parts, slack_parts = [], [], []
    for piece in intervals:
        u, l = m.components[piece.indices[0]], m.components[piece.indices[1]]
        mass = _slab_mass(m, piece.lo, piece.hi)
        c_u = _c_sum(m, u, piece.lo, piece.hi, tol)
        c_l = c_u if l == u else _c_sum(m, l, piece.lo, piece.hi, tol)
        lower_parts.append(_fold(c_u, True) - log_k * mass)
        upper_parts.append(min(_fold(c_l, False) - log_k * mass, _fold(c_u, False)))
        slack_parts.append(max(c_u.error_bound, c_l.error_bound))
    lower = math.fsum(lower_parts)
    return BoundInterval(lower, max(math.fsum(upper_parts), lower), math.fsum(slack_parts))


def entropy_bounds(m, tol=None):
    """Envelope sandwich on H(m) intersected with the adaptive residual interval A(m:m) - ∫ m t."""
    m = merged_mixture(m)
    return entropy_sandwich(m, tol).intersect(adaptive_cross_entropy_bounds(m, m, tol))


def meub(m):
    """Entropy of the Gaussian with the mixture's variance: an upper bound on H(m)."""
    moments = [families.mean_variance(c.params) for c in m.components]
    weights = [c.weight for c in m.components]
    mean = math.fsum(w * mu for w, (mu, _) in zip(weights, moments))
    variance = math.fsum(w * (var + (mu - mean) ** 2) for w, (mu, var) in zip(weights, moments))
    return 0.5 * (math.log(2.0 * math.pi * math.e) + math.log(variance))


# ----------------------------------------------------------------------------
# Composites
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class KLBoundReport:
    ce: BoundInterval
    ratio: BoundInterval
    adaptive: BoundInterval
    slab_adaptive: BoundInterval

    @property
    def combinatorial(self):
        """CELB/CEUB: both combinatorial forms intersected."""
        return self.ce.intersect(self.ratio)

    @property
    def best(self):
        """CEALB/CEAUB: the adaptive interval inside the combinatorial one."""
        return self.combinatorial.intersect(self.adaptive)

    @property
    def improvement(self):
        return improvement(self.combinatorial, self.best)

    @property
    def slab_best(self):
        """Adaptive bounds with residual extrema over whole envelope slabs (no quantile cuts)."""
        return self.combinatorial.intersect(self.slab_adaptive)

    @property
    def slab_improvement(self):
        return improvement(self.combinatorial, self.slab_best)


def kl_bound_report(m, m_prime, tol=None):
    return KLBoundReport(
        ce=kl_bounds_ce(m, m_prime, tol),
        ratio=kl_bounds_ratio(m, m_prime, tol),
        adaptive=adaptive_kl_bounds(m, m_prime, tol),
        slab_adaptive=adaptive_kl_bounds(m, m_prime, tol, refined=False),
    )


def best_kl_bounds(m, m_prime, tol=None):
    return kl_bound_report(m, m_prime, tol).best


def improvement(combinatorial, adaptive):
    """Gap reduction in percent: 100 (1 - adaptive gap / combinatorial gap)."""
    if combinatorial.gap <= 0.0:
        return 0.0
    return 100.0 * (1.0 - adaptive.gap / combinatorial.gap)


def jeffreys_bounds(m, m_prime, tol=None):
    return best_kl_bounds(m, m_prime, tol) + best_kl_bounds(m_prime, m, tol)


def _component_key(comp):
    return (type(comp.params).__name__, tuple(vars(comp.params).values()), comp.weight)


def average_mixture(m, m_prime):
    """(m + m') / 2 as one k + k' component mixture, in a canonical component order."""
    _check_pair(m, m_prime)
    halves = [WeightedComponent(0.5 * c.weight, c.params) for c in m.components + m_prime.components]
    halves.sort(key=_component_key)
    return merged_mixture(Mixture(tuple(halves)))


def js_bounds(m, m_prime, tol=None):
    """½ [KL(m:a) + KL(m':a)] with a the average mixture, clipped to [0, log 2]."""
    avg = average_mixture(m, m_prime)
    total = best_kl_bounds(m, avg, tol) + best_kl_bounds(m_prime, avg, tol)
    half = total.scale(0.5)
    lower = min(max(half.lower, 0.0), LOG2)
    upper = max(min(half.upper, LOG2), lower)
    return BoundInterval(lower, upper, half.quadrature_slack)
