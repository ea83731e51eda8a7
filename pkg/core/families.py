# core/families.py - component distributions: densities, CDFs, samplers, natural forms
"""
The four component families used by the bounds.

Every density is evaluated in log-space; the plain density is only ever
``exp(log_density)``. Each family also exposes its exponential-family
representation (:class:`NaturalForm`) and the weighted log-density written
in the common basis ``(log x, x, x**2)`` (:class:`LogPolynomial`), which is
what the envelope and residual code works with.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Union

import numpy as np
from scipy import special

from core.errors import ArgumentError, DomainError

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
EULER_GAMMA = 0.5772156649015329


class FamilyTag(str, Enum):
    EXPONENTIAL = "exponential"
    RAYLEIGH = "rayleigh"
    GAUSSIAN = "gaussian"
    GAMMA = "gamma"


@dataclass(frozen=True)
class SupportInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ArgumentError(f"empty support ({self.lo}, {self.hi})")

    def contains(self, x):
        return self.lo <= x <= self.hi


POSITIVE_HALF_LINE = SupportInterval(0.0, math.inf)
REAL_LINE = SupportInterval(-math.inf, math.inf)


def _check_positive(name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ArgumentError(f"{name} must be a positive finite number, got {value!r}")


def _check_finite(name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value)):
        raise ArgumentError(f"{name} must be a finite number, got {value!r}")


# ----------------------------------------------------------------------------
# Parameters
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Exponential:
    rate: float

    family = FamilyTag.EXPONENTIAL
    support = POSITIVE_HALF_LINE

    def __post_init__(self):
        _check_positive("rate", self.rate)


@dataclass(frozen=True)
class Rayleigh:
    scale: float

    family = FamilyTag.RAYLEIGH
    support = POSITIVE_HALF_LINE

    def __post_init__(self):
        _check_positive("scale", self.scale)


@dataclass(frozen=True)
class Gaussian:
    mean: float
    stddev: float

    family = FamilyTag.GAUSSIAN
    support = REAL_LINE

    def __post_init__(self):
        _check_finite("mean", self.mean)
        _check_positive("stddev", self.stddev)


@dataclass(frozen=True)
class Gamma:
    shape: float
    scale: float

    family = FamilyTag.GAMMA
    support = POSITIVE_HALF_LINE

    def __post_init__(self):
        _check_positive("shape", self.shape)
        _check_positive("scale", self.scale)


ComponentParams = Union[Exponential, Rayleigh, Gaussian, Gamma]

PARAMS_BY_FAMILY = {
    FamilyTag.EXPONENTIAL: Exponential,
    FamilyTag.RAYLEIGH: Rayleigh,
    FamilyTag.GAUSSIAN: Gaussian,
    FamilyTag.GAMMA: Gamma,
}


def _as_array(x):
    arr = np.asarray(x, dtype=np.float64)
    return arr, arr.ndim == 0


def _ret(values, scalar):
    return float(values) if scalar else values


# ----------------------------------------------------------------------------
# Densities and CDFs
# ----------------------------------------------------------------------------

def log_density(params, x):
    """Natural log of the density; scalars in, float out; arrays in, arrays out."""
    x, scalar = _as_array(x)
    lo = params.support.lo
    if np.any(np.isnan(x)) or np.any(x < lo):
        raise DomainError(f"{params.family.value} log-density evaluated outside support at {x}")
    with np.errstate(divide="ignore", invalid="ignore"):
        if isinstance(params, Exponential):
            out = math.log(params.rate) - params.rate * x
        elif isinstance(params, Rayleigh):
            s2 = params.scale * params.scale
            out = np.log(x) - math.log(s2) - x * x / (2.0 * s2)
        elif isinstance(params, Gaussian):
            z = (x - params.mean) / params.stddev
            out = -0.5 * LOG_2PI - math.log(params.stddev) - 0.5 * z * z
        elif isinstance(params, Gamma):
            k, lam = params.shape, params.scale
            out = special.xlogy(k - 1.0, x) - x / lam - k * math.log(lam) - special.gammaln(k)
        else:
            raise ArgumentError(f"unknown component parameters {params!r}")
    return _ret(out, scalar)


def density(params, x):
    return np.exp(log_density(params, x))


def cdf(params, x):
    """Clamped CDF: 0 below the support, 1 above."""
    x, scalar = _as_array(x)
    if isinstance(params, Gaussian):
        out = special.ndtr((x - params.mean) / params.stddev)
    else:
        xp = np.maximum(x, 0.0)
        if isinstance(params, Exponential):
            out = -np.expm1(-params.rate * xp)
        elif isinstance(params, Rayleigh):
            out = -np.expm1(-xp * xp / (2.0 * params.scale ** 2))
        else:
            out = special.gammainc(params.shape, xp / params.scale)
    return _ret(out, scalar)


def survival(params, x):
    """1 - cdf, computed without cancellation in the upper tail."""
    x, scalar = _as_array(x)
    if isinstance(params, Gaussian):
        out = special.ndtr((params.mean - x) / params.stddev)
    else:
        xp = np.maximum(x, 0.0)
        if isinstance(params, Exponential):
            out = np.exp(-params.rate * xp)
        elif isinstance(params, Rayleigh):
            out = np.exp(-xp * xp / (2.0 * params.scale ** 2))
        else:
            out = special.gammaincc(params.shape, xp / params.scale)
    return _ret(out, scalar)


def median(params):
    return quantile(params, 0.5)


def interval_probability(params, a, b):
    """P(a < X < b), switching to the survival function past the median."""
    if a >= median(params):
        return max(survival(params, a) - survival(params, b), 0.0)
    return max(cdf(params, b) - cdf(params, a), 0.0)


def quantile(params, u):
    """Inverse CDF on (0, 1)."""
    u, scalar = _as_array(u)
    with np.errstate(divide="ignore"):
        if isinstance(params, Exponential):
            out = -np.log1p(-u) / params.rate
        elif isinstance(params, Rayleigh):
            out = params.scale * np.sqrt(-2.0 * np.log1p(-u))
        elif isinstance(params, Gaussian):
            out = params.mean + params.stddev * special.ndtri(u)
        else:
            out = params.scale * special.gammaincinv(params.shape, u)
    return _ret(out, scalar)


def survival_quantile(params, v):
    """Inverse survival function: the x with P(X > x) = v."""
    v, scalar = _as_array(v)
    with np.errstate(divide="ignore"):
        if isinstance(params, Exponential):
            out = -np.log(v) / params.rate
        elif isinstance(params, Rayleigh):
            out = params.scale * np.sqrt(-2.0 * np.log(v))
        elif isinstance(params, Gaussian):
            out = params.mean - params.stddev * special.ndtri(v)
        else:
            out = params.scale * special.gammainccinv(params.shape, v)
    return _ret(out, scalar)


def mean_variance(params):
    if isinstance(params, Exponential):
        return 1.0 / params.rate, 1.0 / params.rate ** 2
    if isinstance(params, Rayleigh):
        s = params.scale
        return s * math.sqrt(math.pi / 2.0), (4.0 - math.pi) * s * s / 2.0
    if isinstance(params, Gaussian):
        return params.mean, params.stddev ** 2
    return params.shape * params.scale, params.shape * params.scale ** 2


def entropy(params):
    """Closed-form differential entropy (nats) of one component."""
    if isinstance(params, Exponential):
        return 1.0 - math.log(params.rate)
    if isinstance(params, Rayleigh):
        return 1.0 + math.log(params.scale / math.sqrt(2.0)) + EULER_GAMMA / 2.0
    if isinstance(params, Gaussian):
        return 0.5 * (LOG_2PI + 1.0) + math.log(params.stddev)
    k = params.shape
    return k + math.log(params.scale) + special.gammaln(k) + (1.0 - k) * special.digamma(k)


# ----------------------------------------------------------------------------
# Special functions
# ----------------------------------------------------------------------------

def erf(x):
    """Gauss error function, odd by construction."""
    return math.copysign(float(special.erf(abs(x))), x)


def lower_incomplete_gamma(k, x):
    """Unregularised lower incomplete gamma γ(k, x)."""
    if k <= 0:
        raise DomainError(f"shape must be positive, got {k}")
    if x < 0:
        raise DomainError(f"x must be non-negative, got {x}")
    if x == 0:
        return 0.0
    return float(special.gammainc(k, x) * special.gamma(k))


# ----------------------------------------------------------------------------
# Sampling
# ----------------------------------------------------------------------------

def standard_normal(rng, n):
    """Marsaglia polar method, drawing pairs in fixed-size batches."""
    out = np.empty(n, dtype=np.float64)
    filled = 0
    while filled < n:
        need = n - filled
        batch = max(8, int(need * 0.65) + 8)
        u = 2.0 * rng.uniform(batch) - 1.0
        v = 2.0 * rng.uniform(batch) - 1.0
        s = u * u + v * v
        ok = (s > 0.0) & (s < 1.0)
        u, v, s = u[ok], v[ok], s[ok]
        f = np.sqrt(-2.0 * np.log(s) / s)
        pairs = np.empty(2 * len(s))
        pairs[0::2] = u * f
        pairs[1::2] = v * f
        take = min(need, len(pairs))
        out[filled:filled + take] = pairs[:take]
        filled += take
    return out


def _standard_gamma(rng, shape, n):
    # Marsaglia-Tsang squeeze; shape < 1 boosted through U**(1/shape)
    boost = shape < 1.0
    k = shape + 1.0 if boost else shape
    d = k - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(n, dtype=np.float64)
    filled = 0
    while filled < n:
        need = n - filled
        batch = need + 16
        z = standard_normal(rng, batch)
        u = rng.uniform(batch)
        v = (1.0 + c * z) ** 3
        with np.errstate(invalid="ignore", divide="ignore"):
            ok = (v > 0.0) & (
                (u < 1.0 - 0.0331 * z ** 4)
                | (np.log(u) < 0.5 * z * z + d - d * v + d * np.log(v))
            )
        accepted = d * v[ok]
        take = min(need, len(accepted))
        out[filled:filled + take] = accepted[:take]
        filled += take
    if boost:
        out *= rng.uniform(n) ** (1.0 / shape)
    return out


def sample_n(params, rng, n):
    """``n`` independent draws; deterministic given the generator state."""
    n = int(n)
    if isinstance(params, Exponential):
        return -np.log(rng.uniform(n)) / params.rate
    if isinstance(params, Rayleigh):
        return params.scale * np.sqrt(-2.0 * np.log(rng.uniform(n)))
    if isinstance(params, Gaussian):
        return params.mean + params.stddev * standard_normal(rng, n)
    return params.scale * _standard_gamma(rng, params.shape, n)


def sample(params, rng):
    return float(sample_n(params, rng, 1)[0])


# ----------------------------------------------------------------------------
# Exponential-family forms
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class LogPolynomial:
    """c0 + c_log*log(x) + c1*x + c2*x**2 on the support of a family."""

    c0: float
    c_log: float = 0.0
    c1: float = 0.0
    c2: float = 0.0

    def __sub__(self, other):
        return LogPolynomial(self.c0 - other.c0, self.c_log - other.c_log,
                             self.c1 - other.c1, self.c2 - other.c2)

    def __call__(self, x):
        x, scalar = _as_array(x)
        out = self.c0 + self.c1 * x + self.c2 * x * x
        if self.c_log != 0.0:
            with np.errstate(divide="ignore"):
                out = out + self.c_log * np.log(x)
        return _ret(out, scalar)

    def derivative(self, x):
        out = self.c1 + 2.0 * self.c2 * x
        if self.c_log != 0.0:
            out += self.c_log / x
        return out

    @property
    def is_constant(self):
        return self.c_log == 0.0 and self.c1 == 0.0 and self.c2 == 0.0

    def critical_points(self):
        """Real zeros of the derivative (x > 0 required when c_log != 0)."""
        # derivative * x = 2 c2 x^2 + c1 x + c_log
        roots = solve_quadratic(2.0 * self.c2, self.c1, self.c_log) if self.c_log != 0.0 \
            else solve_quadratic(0.0, 2.0 * self.c2, self.c1)
        if self.c_log != 0.0:
            roots = [r for r in roots if r > 0.0]
        return roots

    def limit(self, x):
        """Value or signed infinity at an end of the support (x in {-inf, 0, +inf})."""
        if x == math.inf:
            for coef in (self.c2, self.c1, self.c_log):
                if coef != 0.0:
                    return math.copysign(math.inf, coef)
            return self.c0
        if x == -math.inf:
            if self.c2 != 0.0:
                return math.copysign(math.inf, self.c2)
            if self.c1 != 0.0:
                return math.copysign(math.inf, -self.c1)
            return self.c0
        if x == 0.0 and self.c_log != 0.0:
            return math.copysign(math.inf, -self.c_log)
        return float(self(x))


def solve_quadratic(a, b, c):
    """Real roots of a x^2 + b x + c, sorted, using the cancellation-free form."""
    if a == 0.0:
        if b == 0.0:
            return []
        return [-c / b]
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return []
    sq = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(sq, b))
    if q == 0.0:
        return [0.0]
    roots = sorted({q / a, c / q})
    return roots


# basis rows: coefficients of each sufficient statistic in (log x, x, x^2)
_STAT_BASIS = {
    FamilyTag.EXPONENTIAL: np.array([[0.0, 1.0, 0.0]]),
    FamilyTag.RAYLEIGH: np.array([[0.0, 0.0, 1.0]]),
    FamilyTag.GAUSSIAN: np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
    FamilyTag.GAMMA: np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
}

_BASIS_FUNCS = (np.log, lambda x: x, lambda x: x * x)


def _stat_columns(x, rows):
    # each basis row is a unit vector; evaluate only the statistic it selects
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.stack([_BASIS_FUNCS[int(np.argmax(row))](x) for row in rows], axis=-1)


def _exp_F(theta):
    return -math.log(-theta[0])


def _exp_gradF(theta):
    return np.array([-1.0 / theta[0]])


def _ray_F(theta):
    return -math.log(-2.0 * theta[0])


def _ray_gradF(theta):
    return np.array([-1.0 / theta[0]])


def _gauss_F(theta):
    t1, t2 = theta
    return -t1 * t1 / (4.0 * t2) + 0.5 * math.log(-math.pi / t2)


def _gauss_gradF(theta):
    t1, t2 = theta
    return np.array([-t1 / (2.0 * t2), t1 * t1 / (4.0 * t2 * t2) - 1.0 / (2.0 * t2)])


def _gamma_F(theta):
    t1, t2 = theta
    return float(special.gammaln(t1 + 1.0)) - (t1 + 1.0) * math.log(-t2)


def _gamma_gradF(theta):
    t1, t2 = theta
    return np.array([float(special.digamma(t1 + 1.0)) - math.log(-t2), -(t1 + 1.0) / t2])


def _negative_last(theta):
    return bool(np.all(np.isfinite(theta))) and theta[-1] < 0.0


def _gamma_domain(theta):
    return bool(np.all(np.isfinite(theta))) and theta[0] > -1.0 and theta[1] < 0.0


_FAMILY_FORMS = {
    FamilyTag.EXPONENTIAL: (_exp_F, _exp_gradF, _negative_last),
    FamilyTag.RAYLEIGH: (_ray_F, _ray_gradF, _negative_last),
    FamilyTag.GAUSSIAN: (_gauss_F, _gauss_gradF, _negative_last),
    FamilyTag.GAMMA: (_gamma_F, _gamma_gradF, _gamma_domain),
}


@dataclass(frozen=True, eq=False)
class NaturalForm:
    """exp(theta . t(x) - F(theta) + k(x)) for one component."""

    family: FamilyTag
    theta: np.ndarray
    log_normalizer: Callable[[np.ndarray], float]
    grad_log_normalizer: Callable[[np.ndarray], np.ndarray]
    in_domain: Callable[[np.ndarray], bool]
    params: ComponentParams

    @property
    def basis(self):
        return _STAT_BASIS[self.family]

    def sufficient_stat(self, x):
        return _stat_columns(x, self.basis)

    def carrier(self, x):
        if self.family is FamilyTag.RAYLEIGH:
            with np.errstate(divide="ignore"):
                return np.log(np.asarray(x, dtype=np.float64))
        return np.zeros_like(np.asarray(x, dtype=np.float64))

    def log_density(self, x):
        x, scalar = _as_array(x)
        with np.errstate(invalid="ignore"):
            out = self.sufficient_stat(x) @ self.theta - self.log_normalizer(self.theta) + self.carrier(x)
        return _ret(out, scalar)


def to_natural(params):
    family = params.family
    if isinstance(params, Exponential):
        theta = np.array([-params.rate])
    elif isinstance(params, Rayleigh):
        theta = np.array([-1.0 / (2.0 * params.scale ** 2)])
    elif isinstance(params, Gaussian):
        s2 = params.stddev ** 2
        theta = np.array([params.mean / s2, -1.0 / (2.0 * s2)])
    elif isinstance(params, Gamma):
        theta = np.array([params.shape - 1.0, -1.0 / params.scale])
    else:
        raise ArgumentError(f"unknown component parameters {params!r}")
    F, gradF, in_domain = _FAMILY_FORMS[family]
    return NaturalForm(family, theta, F, gradF, in_domain, params)


def log_polynomial(params, weight=1.0):
    """Weighted log-density as a LogPolynomial, computed from the direct parameters."""
    if isinstance(params, Exponential):
        return LogPolynomial(math.log(weight) + math.log(params.rate), c1=-params.rate)
    if isinstance(params, Rayleigh):
        s2 = params.scale ** 2
        return LogPolynomial(math.log(weight) - math.log(s2), c_log=1.0, c2=-0.5 / s2)
    if isinstance(params, Gaussian):
        mu, s2 = params.mean, params.stddev ** 2
        return LogPolynomial(math.log(weight) - 0.5 * LOG_2PI - math.log(params.stddev) - mu * mu / (2.0 * s2),
                             c1=mu / s2, c2=-0.5 / s2)
    k, lam = params.shape, params.scale
    return LogPolynomial(math.log(weight) - k * math.log(lam) - float(special.gammaln(k)),
                         c_log=k - 1.0, c1=-1.0 / lam)


def log_ratio_coefficients(first, second):
    """log(w_i p_i / w_m p_m) as a LogPolynomial; any carrier term cancels.

    ``first`` and ``second`` are weighted components (``.weight``, ``.params``).
    """
    return log_polynomial(first.params, first.weight) - log_polynomial(second.params, second.weight)
