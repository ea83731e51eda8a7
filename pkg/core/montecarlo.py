# core/montecarlo.py - seeded mixture sampling and Monte-Carlo KL / entropy estimators
"""
Stochastic estimators used as oracles for the certified bounds.

    KL_s(m:m') = (1/s) Σ log(m(x_i) / m'(x_i)),   x_i ~ m
    H_s(m)     = -(1/s) Σ log m(x_i)

Repetition ``i`` of an experiment seeded with ``base`` uses the seed
``NumberGenerator.derive_seed(base, i)``, so repetitions are independent
streams that can run in any order on any thread.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from core import families
from core.envelope import Mixture
from core.errors import ArgumentError, DomainError
from core.number_generator import NumberGenerator
from core.tasks import run_ordered

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stddev: float
    sample_size: int
    repetitions: int
    seed: int

    @property
    def standard_error(self):
        """Standard error of ``mean``: stddev over repetitions shrinks by sqrt(reps)."""
        if self.repetitions >= 2:
            return self.stddev / math.sqrt(self.repetitions)
        return self.stddev


def _generator(seed):
    return seed if isinstance(seed, NumberGenerator) else NumberGenerator(seed)


def sample_mixture(m: Mixture, n, seed=0):
    """``n`` draws: a categorical component choice, then that component's sampler."""
    n = int(n)
    if n < 1:
        raise ArgumentError(f"sample size must be at least 1, got {n}")
    rng = _generator(seed)
    cumulative = np.cumsum(m.weights)
    cumulative[-1] = 1.0
    labels = np.minimum(np.searchsorted(cumulative, rng.uniform(n), side="right"), m.k - 1)
    out = np.empty(n, dtype=np.float64)
    for j, comp in enumerate(m.components):
        chosen = labels == j
        count = int(np.count_nonzero(chosen))
        if count:
            out[chosen] = families.sample_n(comp.params, rng, count)
    return out


def mixture_log_density(m: Mixture, xs):
    """log m(x) = logsumexp_j (log w_j + log p_j(x)), vectorised."""
    return logsumexp(m.weighted_log_densities(xs), axis=0)


def _summarise(values, seed, reps):
    values = np.asarray(values, dtype=np.float64)
    s = len(values)
    mean = float(np.mean(values))
    stddev = float(np.std(values, ddof=1) / math.sqrt(s)) if s > 1 else 0.0
    return McEstimate(mean, stddev, s, reps, int(seed))


def _kl_terms(m, m_prime, xs):
    log_p = mixture_log_density(m, xs)
    if m_prime is m or m_prime == m:
        return log_p - log_p
    log_q = mixture_log_density(m_prime, xs)
    if not np.all(np.isfinite(log_q)):
        bad = xs[~np.isfinite(log_q)][0]
        raise DomainError(f"second mixture has zero density at sampled point {bad!r}")
    return log_p - log_q


def mc_kl(m, m_prime, s, seed=0, reps=1, max_workers=None):
    """Monte-Carlo KL(m:m'); ``reps`` >= 2 switches to repetition statistics."""
    if reps >= 2:
        return repetition_stats(EstimatorConfig("kl", m, s, m_prime), reps, seed, max_workers)
    xs = sample_mixture(m, s, seed)
    return _summarise(_kl_terms(m, m_prime, xs), seed, 1)


def mc_entropy(m, s, seed=0, reps=1, max_workers=None):
    """Plug-in entropy estimate -(1/s) Σ log m(x_i)."""
    if reps >= 2:
        return repetition_stats(EstimatorConfig("entropy", m, s), reps, seed, max_workers)
    xs = sample_mixture(m, s, seed)
    return _summarise(-mixture_log_density(m, xs), seed, 1)


@dataclass(frozen=True)
class EstimatorConfig:
    kind: str
    m: Mixture
    sample_size: int
    m_prime: Optional[Mixture] = None

    def __post_init__(self):
        if self.kind not in ("kl", "entropy"):
            raise ArgumentError(f"unknown estimator kind {self.kind!r}")
        if self.kind == "kl" and self.m_prime is None:
            raise ArgumentError("a KL estimator needs a second mixture")
        if int(self.sample_size) < 1:
            raise ArgumentError(f"sample size must be at least 1, got {self.sample_size}")

    def run(self, seed):
        """One estimate (the sample mean) for one seed."""
        if self.kind == "kl":
            return mc_kl(self.m, self.m_prime, self.sample_size, seed).mean
        return mc_entropy(self.m, self.sample_size, seed).mean


def repetition_stats(config, reps, base_seed=0, max_workers=None):
    """Mean and stddev of ``reps`` independent runs seeded from ``base_seed``."""
    reps = int(reps)
    if reps < 2:
        raise ArgumentError(f"repetition statistics need at least 2 repetitions, got {reps}")
    seeds = [NumberGenerator.derive_seed(base_seed, i) for i in range(reps)]
    values = np.array(run_ordered(config.run, seeds, max_workers), dtype=np.float64)
    mean = float(np.mean(values))
    stddev = float(np.sqrt(np.sum((values - mean) ** 2) / (reps - 1)))
    logger.debug(f"{config.kind} s={config.sample_size}: {reps} reps, mean {mean:.6g}, sd {stddev:.3g}")
    return McEstimate(mean, stddev, int(config.sample_size), reps, int(base_seed))
