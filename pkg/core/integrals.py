# core/integrals.py - mass, partial cross-entropy and truncated exponential-family integrals
"""
Per-slab integrals used by the bounds.

Sign conventions::

    M_i(a, b)    = -∫_a^b w_i p_i(x) dx
    C_ij(a, b)   = -∫_a^b w_i p_i(x) log(w_j p_j(x)) dx

Everything reduces to truncated expectations ∫_a^b p(x) g(x) dx with
g in {1, x, x**2, log x}. The first three are closed form for every family;
log x has a closed form only over the full support and otherwise goes
through adaptive quadrature in probability space (the integrating
component's CDF maps (a, b) onto a finite range).
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from core import families
from core.errors import ArgumentError, DomainError
from core.families import EULER_GAMMA, Exponential, Gamma, Gaussian, Rayleigh
from core.quadrature import QuadratureValue, adaptive_quadrature

logger = logging.getLogger(__name__)

STATISTICS = ("log", "x", "x2")


def _check_range(params, a, b):
    if not a < b:
        raise ArgumentError(f"integration range needs a < b, got ({a}, {b})")
    support = params.support
    if a < support.lo or b > support.hi:
        raise ArgumentError(f"range ({a}, {b}) leaves the {params.family.value} support")


def _same_family(*items):
    tags = {item.family for item in items}
    if len(tags) != 1:
        raise ArgumentError(f"mismatched families: {', '.join(sorted(t.value for t in tags))}")


def _edge(x, tail):
    # x * tail(x) with the limit 0 at infinite edges
    return 0.0 if tail == 0.0 else x * tail


# ----------------------------------------------------------------------------
# Truncated expectations
# ----------------------------------------------------------------------------

def _full_support(params, a, b):
    return a == params.support.lo and b == params.support.hi


def _closed_log_moment(params):
    if isinstance(params, Exponential):
        return -EULER_GAMMA - math.log(params.rate)
    if isinstance(params, Rayleigh):
        return math.log(params.scale) + 0.5 * (math.log(2.0) - EULER_GAMMA)
    return float(special.digamma(params.shape)) + math.log(params.scale)


def _gamma_shifted(params, shift, a, b):
    # ∫_a^b x^shift p(x) dx for a gamma component, via the shape-shifted regularised gamma
    k, lam = params.shape, params.scale
    factor = math.exp(special.gammaln(k + shift) - special.gammaln(k) + shift * math.log(lam))
    k2 = k + shift
    xa, xb = a / lam, b / lam
    if a >= families.median(params):
        part = special.gammaincc(k2, xa) - special.gammaincc(k2, xb)
    else:
        part = special.gammainc(k2, xb) - special.gammainc(k2, xa)
    return factor * max(float(part), 0.0)


def _closed_moment(params, stat, a, b):
    """Closed-form ∫_a^b g p for g = x or x**2."""
    if isinstance(params, Gaussian):
        mu, s2 = params.mean, params.stddev ** 2
        m = families.interval_probability(params, a, b)
        pa, pb = families.density(params, a), families.density(params, b)
        if stat == "x":
            return mu * m + s2 * (pa - pb)
        return (mu * mu + s2) * m + s2 * (_edge(a + mu, pa) - _edge(b + mu, pb))
    if isinstance(params, Gamma):
        return _gamma_shifted(params, 1 if stat == "x" else 2, a, b)
    sa, sb = families.survival(params, a), families.survival(params, b)
    if isinstance(params, Exponential):
        lam = params.rate
        if stat == "x":
            return _edge(a + 1.0 / lam, sa) - _edge(b + 1.0 / lam, sb)
        return _edge(a * a + 2.0 * a / lam + 2.0 / lam ** 2, sa) - _edge(b * b + 2.0 * b / lam + 2.0 / lam ** 2, sb)
    s = params.scale
    if stat == "x":
        gauss_part = s * math.sqrt(2.0 * math.pi) * (special.ndtr(-a / s) - special.ndtr(-b / s))
        return _edge(a, sa) - _edge(b, sb) + float(gauss_part)
    return _edge(a * a + 2.0 * s * s, sa) - _edge(b * b + 2.0 * s * s, sb)


def quadrature_moment(params, g: Callable, a, b, tol=None):
    """∫_a^b p(x) g(x) dx by quadrature in probability space, split at the median."""
    _check_range(params, a, b)
    med = families.median(params)
    total = QuadratureValue(0.0)
    if a < med:
        u_lo, u_hi = families.cdf(params, a), families.cdf(params, min(b, med))
        if u_hi > u_lo:
            total = total + adaptive_quadrature(lambda u: g(families.quantile(params, u)), u_lo, u_hi, tol)
    if b > med:
        v_lo, v_hi = families.survival(params, b), families.survival(params, max(a, med))
        if v_hi > v_lo:
            total = total + adaptive_quadrature(lambda v: g(families.survival_quantile(params, v)), v_lo, v_hi, tol)
    return total


def truncated_expectation(params, stat, a, b, tol=None):
    """∫_a^b p(x) g(x) dx for g named by ``stat`` ('log', 'x' or 'x2')."""
    _check_range(params, a, b)
    if stat not in STATISTICS:
        raise ArgumentError(f"unknown statistic {stat!r}")
    if stat == "log":
        if isinstance(params, Gaussian):
            raise ArgumentError("log x is not a statistic of the gaussian family")
        if _full_support(params, a, b):
            return QuadratureValue(_closed_log_moment(params))
        with np.errstate(divide="ignore"):
            return quadrature_moment(params, np.log, a, b, tol)
    return QuadratureValue(_closed_moment(params, stat, a, b))


# ----------------------------------------------------------------------------
# M and C
# ----------------------------------------------------------------------------

def mass_M(c, a, b):
    """-w * P(a < X < b)."""
    _check_range(c.params, a, b)
    return -c.weight * families.interval_probability(c.params, a, b)


def partial_cross_entropy_C(ci, cj, a, b, tol=None):
    """-∫_a^b w_i p_i log(w_j p_j); only the statistics with non-zero coefficients are integrated."""
    _same_family(ci, cj)
    _check_range(ci.params, a, b)
    poly = cj.log_polynomial()
    m = families.interval_probability(ci.params, a, b)
    total = QuadratureValue(poly.c0 * m)
    for stat, coef in (("log", poly.c_log), ("x", poly.c1), ("x2", poly.c2)):
        if coef != 0.0:
            total = total + truncated_expectation(ci.params, stat, a, b, tol).scale(coef)
    return total.scale(-ci.weight)


# ----------------------------------------------------------------------------
# Exponential-family forms
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class BregmanGenerator:
    F: Callable
    gradF: Callable
    in_domain: Callable

    @classmethod
    def of(cls, natural_form):
        return cls(natural_form.log_normalizer, natural_form.grad_log_normalizer, natural_form.in_domain)


def bregman(generator, theta_prime, theta):
    """B_F(θ':θ) = F(θ') - F(θ) - (θ' - θ)·∇F(θ), clamped at 0."""
    theta_prime = np.atleast_1d(np.asarray(theta_prime, dtype=np.float64))
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    for t in (theta_prime, theta):
        if not generator.in_domain(t):
            raise DomainError(f"natural parameter {t} outside the generator domain")
    if np.array_equal(theta_prime, theta):
        return 0.0
    value = generator.F(theta_prime) - generator.F(theta) - float(np.dot(theta_prime - theta, generator.gradF(theta)))
    return max(float(value), 0.0)


def _stat_names(nf):
    return [STATISTICS[int(np.argmax(row))] for row in nf.basis]


def truncated_moments(nf, a, b, tol=None, needed=None):
    """∫_a^b t(x) p(x; θ) dx per sufficient statistic; entries not in ``needed`` are left at 0."""
    out = []
    for i, stat in enumerate(_stat_names(nf)):
        if needed is not None and not needed[i]:
            out.append(QuadratureValue(0.0))
        else:
            out.append(truncated_expectation(nf.params, stat, a, b, tol))
    return out


def _dot(coefs, moments):
    return QuadratureValue.total(m.scale(float(c)) for c, m in zip(coefs, moments) if c != 0.0)


def kl3_truncated(w1, n1, w2, n2, w3, n3, a, b, tol=None):
    """∫_a^b w1 p1 log(w2 p2 / w3 p3) dx; the carriers cancel in the ratio."""
    _same_family(n1, n2, n3)
    _check_range(n1.params, a, b)
    dtheta = n2.theta - n3.theta
    m1 = families.interval_probability(n1.params, a, b)
    if m1 == 0.0:
        return QuadratureValue(0.0)
    moments = truncated_moments(n1, a, b, tol, needed=dtheta != 0.0)
    constant = m1 * (math.log(w2 / w3) + n3.log_normalizer(n3.theta) - n2.log_normalizer(n2.theta))
    return (_dot(dtheta, moments) + constant).scale(w1)


def truncated_kl_scaled(w, n, w_prime, n_prime, a, b, tol=None):
    """∫_a^b w p log(w p / w' p') dx written with a Bregman divergence and the mass gradient.

    Equals w m_D (log(w/w') + B_F(θ':θ)) + w (θ - θ')·∇m_D(θ), where
    ∇m_D(θ) = ∫_D t p - m_D ∇F(θ).
    """
    _same_family(n, n_prime)
    _check_range(n.params, a, b)
    m = families.interval_probability(n.params, a, b)
    if m == 0.0:
        return QuadratureValue(0.0)
    dtheta = n.theta - n_prime.theta
    divergence = bregman(BregmanGenerator.of(n), n_prime.theta, n.theta)
    moments = truncated_moments(n, a, b, tol, needed=dtheta != 0.0)
    grad_f = n.grad_log_normalizer(n.theta)
    grad_mass = [mom - m * g for mom, g in zip(moments, grad_f)]
    head = m * (math.log(w / w_prime) + divergence)
    return (_dot(dtheta, grad_mass) + head).scale(w)
