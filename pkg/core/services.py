# core/services.py - experiment orchestration: bounds, Monte-Carlo rows and run checks
import logging
import math

from core import bounds
from core.config import BoundName
from core.errors import ConfigError, QuadratureError
from core.montecarlo import mc_entropy, mc_kl
from core.number_generator import NumberGenerator
from core.reports import MC_PREFIX, QUADFAIL_SUFFIX, ResultRow
from core.tasks import run_ordered, worker_count

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
DOMINANCE_TOL = 1e-12
SIGMAS = 3.0
# gap reduction the per-slab adaptive bounds usually achieve on the preset pairs, in percent
EXPECTED_IMPROVEMENT = (25.0, 75.0)
SLAB_SUFFIX = "-slab"

DIRECTIONS = ("forward", "reverse")


class ExperimentService:
    """Runs the KL and entropy experiments of one configuration and collects failed checks."""

    def __init__(self, config, units="nats", max_workers=None):
        if units not in ("nats", "bits"):
            raise ValueError(f"units must be 'nats' or 'bits', got {units!r}")
        self.config = config
        self.units = units
        self.max_workers = max_workers
        self._inner_workers = max_workers
        self.violations = []
        self.quadrature_failures = []

    # -- helpers ---------------------------------------------------------------

    @property
    def unit_scale(self):
        return 1.0 / LN2 if self.units == "bits" else 1.0

    def _row(self, pair, direction, quantity, value, aux=0.0, scaled=True):
        factor = self.unit_scale if scaled else 1.0
        return ResultRow(pair, direction, quantity, value * factor, aux * factor)

    def _wanted(self, name):
        return BoundName(name) in self.config.bounds

    def _seed(self, *index):
        seed = self.config.base_seed
        for i in index:
            seed = NumberGenerator.derive_seed(seed, i)
        return seed

    def _plan_workers(self, tasks):
        # one pool at a time: repetitions run serially when the tasks are already spread over threads
        if len(tasks) > 1 and worker_count(self.max_workers) > 1:
            self._inner_workers = 1
        else:
            self._inner_workers = self.max_workers

    def _violation(self, message):
        logger.error(f"❌ {message}")
        self.violations.append(message)

    def _mc_rows(self, pair, direction, estimator):
        rows, estimates = [], []
        for j, size in enumerate(self.config.sample_sizes):
            est = estimator(size, j)
            estimates.append(est)
            rows.append(self._row(pair, direction, f"{MC_PREFIX}{size}", est.mean, est.stddev))
        return rows, estimates

    def _quadfail_rows(self, pair, direction, names, exc):
        message = f"{pair} {direction}: quadrature failed ({exc})"
        logger.error(f"❌ {message}")
        self.quadrature_failures.append(message)
        return [self._row(pair, direction, f"{name}{QUADFAIL_SUFFIX}", exc.estimate.value, exc.estimate.error_bound)
                for name in names]

    # -- KL --------------------------------------------------------------------

    def _kl_task(self, task):
        index, name, direction, m, m_prime = task
        tol = self.config.quad_tol
        bound_names = [b for b in ("CELB", "CEUB", "CEALB", "CEAUB") if self._wanted(b)]
        try:
            report = bounds.kl_bound_report(m, m_prime, tol)
        except QuadratureError as exc:
            return self._quadfail_rows(name, direction, bound_names, exc)

        comb, best = report.combinatorial, report.best
        values = {"CELB": (comb.lower, comb.quadrature_slack), "CEUB": (comb.upper, comb.quadrature_slack),
                  "CEALB": (best.lower, best.quadrature_slack), "CEAUB": (best.upper, best.quadrature_slack)}
        slab = report.slab_best
        rows = [self._row(name, direction, b, *values[b]) for b in bound_names]
        # unrefined per-slab adaptive interval, reported alongside the refined one
        slab_values = {"CEALB": slab.lower, "CEAUB": slab.upper}
        rows += [self._row(name, direction, f"{b}{SLAB_SUFFIX}", slab_values[b], slab.quadrature_slack)
                 for b in bound_names if b in slab_values]
        rows.append(self._row(name, direction, "improvement%", report.improvement, scaled=False))
        rows.append(self._row(name, direction, f"improvement%{SLAB_SUFFIX}", report.slab_improvement, scaled=False))

        def estimator(size, j):
            return mc_kl(m, m_prime, size, self._seed(index, j), self.config.repetitions,
                         max_workers=self._inner_workers)

        mc_rows, estimates = self._mc_rows(name, direction, estimator)
        self._check_kl(name, direction, m, m_prime, report, estimates)
        logger.info(f"✅ {name} {direction}: KL in [{best.lower:.6g}, {best.upper:.6g}], "
                    f"gap improvement {report.improvement:.1f}%")
        return rows + mc_rows

    def _check_kl(self, name, direction, m, m_prime, report, estimates):
        comb, best = report.combinatorial, report.best
        width = math.log(m.k) + math.log(m_prime.k) + 2.0 * report.ce.quadrature_slack
        if report.ce.gap > width + DOMINANCE_TOL:
            self._violation(f"{name} {direction}: CE width {report.ce.gap:.12g} exceeds {width:.12g}")
        if best.lower < comb.lower - DOMINANCE_TOL or best.upper > comb.upper + DOMINANCE_TOL:
            self._violation(f"{name} {direction}: adaptive interval leaves the combinatorial one")
        slab = report.slab_best
        if best.lower < slab.lower - DOMINANCE_TOL or best.upper > slab.upper + DOMINANCE_TOL:
            self._violation(f"{name} {direction}: quantile-refined interval leaves the per-slab one")
        if m == m_prime and not all(iv.contains(0.0, DOMINANCE_TOL) for iv in (report.ce, report.ratio, best)):
            self._violation(f"{name} {direction}: KL(m:m) interval misses 0")
        if estimates:
            top = estimates[-1]
            if not best.contains(top.mean, SIGMAS * top.standard_error + DOMINANCE_TOL):
                self._violation(f"{name} {direction}: MC@{top.sample_size} = {top.mean:.6g} outside "
                                f"[{best.lower:.6g}, {best.upper:.6g}] by more than {SIGMAS:g} SE")
        low, high = EXPECTED_IMPROVEMENT
        if comb.gap > 0 and not low <= report.slab_improvement <= high:
            logger.warning(f"⚠️ {name} {direction}: per-slab gap improvement {report.slab_improvement:.1f}% "
                           f"outside the usual {low:g}-{high:g}% range")

    def run_kl_experiment(self):
        tasks = []
        for i, (name, first, second) in enumerate(self.config.pairs):
            tasks.append((2 * i, name, DIRECTIONS[0], first, second))
            tasks.append((2 * i + 1, name, DIRECTIONS[1], second, first))
        self._plan_workers(tasks)
        results = run_ordered(self._kl_task, tasks, self.max_workers)
        return [row for rows in results for row in rows]

    # -- entropy ---------------------------------------------------------------

    def _entropy_task(self, task):
        index, name, m = task
        tol = self.config.quad_tol
        names = [b for b in ("CELB", "CEUB", "CEALB", "CEAUB") if self._wanted(b)]
        try:
            sandwich = bounds.entropy_sandwich(m, tol)
            best = bounds.entropy_bounds(m, tol)
        except QuadratureError as exc:
            return self._quadfail_rows(name, "entropy", names, exc)
        upper_meub = bounds.meub(m)
        values = {"CELB": (sandwich.lower, sandwich.quadrature_slack), "CEUB": (sandwich.upper, sandwich.quadrature_slack),
                  "CEALB": (best.lower, best.quadrature_slack), "CEAUB": (best.upper, best.quadrature_slack)}
        rows = [self._row(name, "entropy", b, *values[b]) for b in names]
        if self._wanted("MEUB"):
            rows.append(self._row(name, "entropy", "MEUB", upper_meub))

        def estimator(size, j):
            return mc_entropy(m, size, self._seed(1_000_000 + index, j), self.config.repetitions,
                              max_workers=self._inner_workers)

        mc_rows, estimates = self._mc_rows(name, "entropy", estimator)
        if best.lower > min(best.upper, upper_meub) + DOMINANCE_TOL:
            self._violation(f"{name}: entropy lower bound {best.lower:.12g} above min(upper, MEUB)")
        if estimates:
            top = estimates[-1]
            ceiling = min(best.upper, upper_meub)
            margin = SIGMAS * top.standard_error + DOMINANCE_TOL
            if not best.lower - margin <= top.mean <= ceiling + margin:
                self._violation(f"{name}: MC entropy {top.mean:.6g} outside [{best.lower:.6g}, {ceiling:.6g}]")
        logger.info(f"✅ {name}: H in [{best.lower:.6g}, {best.upper:.6g}], MEUB {upper_meub:.6g}")
        return rows + mc_rows

    def run_entropy_experiment(self):
        tasks = [(i, name, m) for i, (name, m) in enumerate(self.config.entropy_targets())]
        self._plan_workers(tasks)
        results = run_ordered(self._entropy_task, tasks, self.max_workers)
        return [row for rows in results for row in rows]

    # -- single pair -------------------------------------------------------------

    def pair_bounds(self):
        """(kind, BoundInterval) for the first configured pair, in the configured units."""
        if not self.config.pairs:
            raise ConfigError("the bounds command needs a configuration with at least one pair", field="pairs")
        _, m, m_prime = self.config.pairs[0]
        tol = self.config.quad_tol
        results = [
            ("kl", bounds.best_kl_bounds(m, m_prime, tol)),
            ("reverse-kl", bounds.best_kl_bounds(m_prime, m, tol)),
            ("jeffreys", bounds.jeffreys_bounds(m, m_prime, tol)),
            ("js", bounds.js_bounds(m, m_prime, tol)),
            ("entropy", bounds.entropy_bounds(m, tol)),
        ]
        if self.units == "bits":
            results = [(kind, interval.to_bits()) for kind, interval in results]
        return results

    @property
    def ok(self):
        return not self.violations and not self.quadrature_failures


def run_kl_experiment(config, **kwargs):
    return ExperimentService(config, **kwargs).run_kl_experiment()


def run_entropy_experiment(config, **kwargs):
    return ExperimentService(config, **kwargs).run_entropy_experiment()
