# core/envelope.py - weighted components, mixtures and upper/lower envelope partitions
"""
Envelope partitions of the support.

For a list of weighted components ``w_j p_j`` the upper (lower) envelope is
the pointwise max (min) of the weighted densities. Its breakpoints are a
subset of the pairwise intersection points, so the partition is built by
collecting every pairwise root, sorting, and labelling each candidate interval
by direct evaluation at a probe point.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple

import numpy as np
from scipy import optimize

from core import families
from core.cache import memoize
from core.errors import ArgumentError
from core.families import ComponentParams, FamilyTag, SupportInterval

logger = logging.getLogger(__name__)

WEIGHT_SUM_TOL = 1e-12
DEDUP_TOL = 1e-12
ROOT_RESIDUAL = 1e-9


class EnvelopeMode(str, Enum):
    UPPER = "upper"
    LOWER = "lower"


@dataclass(frozen=True)
class WeightedComponent:
    weight: float
    params: ComponentParams

    def __post_init__(self):
        w = self.weight
        if not (isinstance(w, (int, float)) and math.isfinite(w) and 0.0 < w <= 1.0 + WEIGHT_SUM_TOL):
            raise ArgumentError(f"weight must lie in (0, 1], got {w!r}")

    @property
    def family(self):
        return self.params.family

    def log_polynomial(self):
        return families.log_polynomial(self.params, self.weight)

    def log_density(self, x):
        """log(w p(x)), vectorised."""
        return math.log(self.weight) + families.log_density(self.params, x)


@dataclass(frozen=True)
class Mixture:
    """Convex combination of same-family weighted components."""

    components: Tuple[WeightedComponent, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ArgumentError("a mixture needs at least one component")
        tags = {c.family for c in comps}
        if len(tags) != 1:
            names = ", ".join(sorted(t.value for t in tags))
            raise ArgumentError(f"mixture mixes families: {names}")
        total = math.fsum(c.weight for c in comps)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ArgumentError(f"mixture weights sum to {total:.12g}, expected 1")

    @classmethod
    def of(cls, pairs, normalize=False):
        """Build from ``(weight, params)`` pairs, optionally renormalising the weights."""
        pairs = list(pairs)
        if normalize and pairs:
            total = math.fsum(w for w, _ in pairs)
            pairs = [(w / total, p) for w, p in pairs]
        return cls(tuple(WeightedComponent(w, p) for w, p in pairs))

    @property
    def family(self) -> FamilyTag:
        return self.components[0].family

    @property
    def support(self) -> SupportInterval:
        return self.components[0].params.support

    @property
    def k(self):
        return len(self.components)

    @property
    def weights(self):
        return np.array([c.weight for c in self.components])

    def weighted_log_densities(self, x):
        """Matrix of log(w_j p_j(x)), one row per component."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        return np.vstack([c.log_density(x) for c in self.components])


# ----------------------------------------------------------------------------
# Intersections
# ----------------------------------------------------------------------------

def _strictly_inside(x, support):
    return support.lo < x < support.hi


def _polish(poly, root):
    # one Newton step, kept only if it shrinks the residual
    slope = poly.derivative(root)
    if slope == 0.0 or not math.isfinite(slope):
        return root
    candidate = root - float(poly(root)) / slope
    if math.isfinite(candidate) and abs(float(poly(candidate))) < abs(float(poly(root))):
        return candidate
    return root


def _finite_end(poly, limit_value, inner, toward_zero):
    """Walk from ``inner`` toward 0 (halving) or +inf (doubling) until the sign matches the limit."""
    target = math.copysign(1.0, limit_value)
    x = inner
    for _ in range(2100):
        x = x * 0.5 if toward_zero else x * 2.0
        value = float(poly(x))
        if value != 0.0 and math.copysign(1.0, value) == target:
            return x
        if x == 0.0 or math.isinf(x):
            break
    return None


def _bracketed_roots(poly, support):
    """Roots of a log-polynomial carrying a log term, one per monotone piece of (0, inf)."""
    crit = sorted(c for c in poly.critical_points() if _strictly_inside(c, support))
    edges = [support.lo] + crit + [support.hi]
    roots = []
    for left, right in zip(edges[:-1], edges[1:]):
        f_left = poly.limit(left) if left == 0.0 else float(poly(left))
        f_right = poly.limit(right) if math.isinf(right) else float(poly(right))
        if f_left == 0.0 and left > 0.0:
            roots.append(left)
            continue
        if f_left * f_right >= 0.0 or math.isnan(f_left * f_right):
            continue
        xl, xh = left, right
        if left == 0.0:
            start = right if math.isfinite(right) else 1.0
            xl = _finite_end(poly, f_left, start, toward_zero=True)
        if math.isinf(right):
            start = left if left > 0.0 else 1.0
            xh = _finite_end(poly, f_right, start, toward_zero=False)
        if xl is None or xh is None or not xl < xh:
            logger.debug(f"no finite bracket on ({left}, {right}) for {poly}")
            continue
        root = optimize.brentq(poly, xl, xh, xtol=1e-300, rtol=4.0 * np.finfo(float).eps, maxiter=500)
        roots.append(root)
    return roots


def pairwise_intersections(c1, c2, support):
    """Sorted points strictly inside ``support`` where w1 p1(x) = w2 p2(x)."""
    if c1.family is not c2.family:
        raise ArgumentError(f"cannot intersect {c1.family.value} with {c2.family.value}")
    if c1 == c2:
        return []
    diff = families.log_ratio_coefficients(c1, c2)
    if diff.is_constant:
        return []
    if diff.c_log == 0.0:
        candidates = families.solve_quadratic(diff.c2, diff.c1, diff.c0)
    else:
        candidates = _bracketed_roots(diff, support)
    roots = sorted(_polish(diff, r) for r in candidates if math.isfinite(r))
    roots = [r for r in roots if _strictly_inside(r, support)]
    for r in roots:
        residual = abs(float(diff(r)))
        if residual > ROOT_RESIDUAL:
            logger.debug(f"intersection at {r:.17g} has residual {residual:.3e}")
    return roots


# ----------------------------------------------------------------------------
# Partitions
# ----------------------------------------------------------------------------

def probe_point(lo, hi):
    """A point strictly inside (lo, hi) used to label the interval."""
    if math.isinf(lo) and math.isinf(hi):
        return 0.0
    if math.isinf(lo):
        return hi - 1.0
    if math.isinf(hi):
        return lo + 1.0
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class EnvelopePartition:
    breakpoints: Tuple[float, ...]
    piece_index: Tuple[int, ...]
    mode: EnvelopeMode

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        idx = tuple(int(i) for i in self.piece_index)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "piece_index", idx)
        if len(bps) != len(idx) + 1 or not idx:
            raise ArgumentError(f"{len(bps)} breakpoints cannot carry {len(idx)} pieces")
        if any(not a < b for a, b in zip(bps[:-1], bps[1:])):
            raise ArgumentError(f"breakpoints must be strictly increasing: {bps}")

    def __len__(self):
        return len(self.piece_index)

    @property
    def support(self):
        return SupportInterval(self.breakpoints[0], self.breakpoints[-1])

    def slabs(self):
        """Iterate (lo, hi, component index) over the elementary intervals."""
        for r, j in enumerate(self.piece_index):
            yield self.breakpoints[r], self.breakpoints[r + 1], j

    def locate(self, x):
        """Index of the slab containing ``x`` (a breakpoint belongs to the slab on its right)."""
        if not self.breakpoints[0] <= x <= self.breakpoints[-1]:
            raise ArgumentError(f"{x} lies outside the partition {self.breakpoints[0]}..{self.breakpoints[-1]}")
        r = int(np.searchsorted(self.breakpoints, x, side="right")) - 1
        return min(max(r, 0), len(self.piece_index) - 1)


def _merge_coincident(components):
    """Fold components with identical parameters; the first occurrence keeps its index."""
    first_seen = {}
    merged = []
    for i, comp in enumerate(components):
        if comp.params in first_seen:
            slot = first_seen[comp.params]
            index, held = merged[slot]
            merged[slot] = (index, WeightedComponent(min(held.weight + comp.weight, 1.0), comp.params))
        else:
            first_seen[comp.params] = len(merged)
            merged.append((i, comp))
    return merged


def _dedupe(points):
    out = []
    for x in sorted(points):
        if out and abs(x - out[-1]) <= DEDUP_TOL * (1.0 + abs(x)):
            continue
        out.append(x)
    return out


def build_partition(components, support, mode=EnvelopeMode.UPPER):
    """Upper (arg-max) or lower (arg-min) envelope of weighted log-densities over ``support``."""
    components = list(components)
    if not components:
        raise ArgumentError("build_partition needs at least one component")
    if len({c.family for c in components}) != 1:
        raise ArgumentError("build_partition components must share one family")
    mode = EnvelopeMode(mode)

    merged = _merge_coincident(components)
    roots = []
    for a in range(len(merged)):
        for b in range(a + 1, len(merged)):
            roots.extend(pairwise_intersections(merged[a][1], merged[b][1], support))
    breakpoints = [support.lo] + _dedupe(r for r in roots if _strictly_inside(r, support)) + [support.hi]

    probes = np.array([probe_point(lo, hi) for lo, hi in zip(breakpoints[:-1], breakpoints[1:])])
    values = np.vstack([comp.log_density(probes) for _, comp in merged])
    pick = np.argmax(values, axis=0) if mode is EnvelopeMode.UPPER else np.argmin(values, axis=0)
    labels = [merged[int(p)][0] for p in pick]

    kept_bps = [breakpoints[0]]
    kept_idx = [labels[0]]
    for r in range(1, len(labels)):
        if labels[r] == kept_idx[-1]:
            continue
        kept_bps.append(breakpoints[r])
        kept_idx.append(labels[r])
    kept_bps.append(breakpoints[-1])

    partition = EnvelopePartition(tuple(kept_bps), tuple(kept_idx), mode)
    logger.debug(f"{mode.value} envelope: {len(components)} components, {len(roots)} roots, {len(partition)} pieces")
    return partition


@memoize(maxsize=512)
def mixture_partition(mixture, mode=EnvelopeMode.UPPER):
    return build_partition(mixture.components, mixture.support, mode)


# ----------------------------------------------------------------------------
# Overlays
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ElementaryInterval:
    lo: float
    hi: float
    indices: Tuple[int, ...]


def overlay(*partitions: EnvelopePartition):
    """Common refinement of several partitions; each interval carries every partition's index."""
    if not partitions:
        raise ArgumentError("overlay needs at least one partition")
    lo, hi = partitions[0].breakpoints[0], partitions[0].breakpoints[-1]
    for p in partitions[1:]:
        if (p.breakpoints[0], p.breakpoints[-1]) != (lo, hi):
            raise ArgumentError("overlaid partitions must cover the same support")
    points = sorted({b for p in partitions for b in p.breakpoints})
    intervals = []
    for a, b in zip(points[:-1], points[1:]):
        x = probe_point(a, b)
        intervals.append(ElementaryInterval(a, b, tuple(p.piece_index[p.locate(x)] for p in partitions)))
    return intervals


def refine(partition: EnvelopePartition, points: Sequence[float]):
    """Split the slabs of ``partition`` at extra interior points, keeping each slab's index."""
    lo, hi = partition.breakpoints[0], partition.breakpoints[-1]
    cuts = list(partition.breakpoints)
    for x in _dedupe(float(p) for p in points if lo < p < hi):
        nearest = cuts[int(np.argmin([abs(x - c) for c in cuts]))]
        if abs(x - nearest) > DEDUP_TOL * (1.0 + abs(x)):
            cuts.append(x)
    cuts.sort()
    return [
        ElementaryInterval(a, b, (partition.piece_index[partition.locate(probe_point(a, b))],))
        for a, b in zip(cuts[:-1], cuts[1:])
    ]


def merged_mixture(mixture):
    """The same mixture with coincident components folded together (first occurrence order)."""
    merged = _merge_coincident(mixture.components)
    if len(merged) == mixture.k:
        return mixture
    return Mixture(tuple(comp for _, comp in merged))
