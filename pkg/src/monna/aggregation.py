"""Robust aggregation rules.

Nearest-neighbor averaging (NNA) keeps a node's own vector plus its
nearest received vectors and averages them; mean, coordinate-wise trimmed
mean and geometric median are provided as baselines behind one dispatch.

Determinism contract shared by every rule here: distance ties are broken
by the smallest sender index, and the selected vectors are summed in
ascending sender-index order (the caller's own vector uses its own index,
or sorts first when no index is supplied). Fixing the summation order
makes replays bit-identical and makes NNA with f=0 coincide with the
plain mean exactly, not just up to rounding.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DimensionMismatchError, InsufficientInputError

GM_TOLERANCE = 1e-10
# Near-anchor geometries (median close to, but not at, a data point) need
# a few thousand Weiszfeld steps at this tolerance; 1000 stalls on real
# attacked clusters.
GM_MAX_ITERATIONS = 20000
GM_ANCHOR_EPS = 1e-12

RULE_KINDS = ("nna", "mean", "cwtm", "gm")


@dataclass(frozen=True)
class AggregationRule:
    """A rule kind plus the fault threshold it trims against."""

    kind: str
    f: int = 0

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise ValueError(f"unknown aggregation rule {self.kind!r}")
        if self.f < 0:
            raise ValueError("fault threshold f must be >= 0")


def _check_inputs(self_vec, received):
    self_vec = np.asarray(self_vec, dtype=float)
    if self_vec.ndim != 1:
        raise DimensionMismatchError("self vector must be one-dimensional")
    mats = []
    for idx, vec in enumerate(received):
        vec = np.asarray(vec, dtype=float)
        if vec.shape != self_vec.shape:
            raise DimensionMismatchError(
                f"received[{idx}] has shape {vec.shape}, expected {self_vec.shape}"
            )
        mats.append(vec)
    stacked = [self_vec] + mats
    for vec in stacked:
        if not np.all(np.isfinite(vec)):
            raise DimensionMismatchError("non-finite entry in aggregation input")
    return self_vec, mats


def _indexed_average(entries):
    """Average vectors summed in ascending index order.

    entries: list of (index, vector). The fixed order pins the floating
    point result, which the determinism and f=0 degeneration tests rely on.
    """
    entries = sorted(entries, key=lambda item: item[0])
    acc = entries[0][1].copy()
    for _, vec in entries[1:]:
        acc += vec
    acc /= len(entries)
    return acc


def nna_core(self_vec, received, d2, senders, f, self_sender):
    """Selection + average once squared distances are known.

    Shared by nna() and the round executor (which precomputes pairwise
    distances for a whole round); keeping one code path makes the two
    bit-identical.
    """
    keep = len(received) - f
    if keep > 0:
        order = sorted(range(len(received)), key=lambda j: (d2[j], senders[j]))
        kept = order[:keep]
    else:
        kept = []
    entries = [(self_sender, self_vec)]
    entries += [(senders[j], received[j]) for j in kept]
    return _indexed_average(entries)


def nna(self_vec, received, f, senders=None, self_sender=-1):
    """Nearest-neighbor averaging around self_vec.

    Drops the f received vectors farthest from self_vec (squared Euclidean
    distance; no square roots, the ordering is the same) and returns the
    average of self_vec plus the rest. With the full-system arity
    |received| = n-f-1 this keeps n-2f-1 received vectors and averages
    n-2f, matching the coordination-phase mixing rule.

    senders, when given, are the tie-break indices accompanying the
    received vectors; self_sender is the caller's own index. Defaults give
    positional indices with self ordered first.
    """
    if f < 0:
        raise ValueError("f must be >= 0")
    self_vec, mats = _check_inputs(self_vec, received)
    if len(mats) < f:
        raise InsufficientInputError(
            f"need at least f={f} received vectors to trim, got {len(mats)}"
        )
    if senders is None:
        senders = list(range(len(mats)))
    elif len(senders) != len(mats):
        raise DimensionMismatchError("senders and received lengths differ")
    d2 = [float(np.sum((vec - self_vec) ** 2)) for vec in mats]
    return nna_core(self_vec, mats, d2, senders, f, self_sender)


def mean(self_vec, received, senders=None, self_sender=-1):
    """Plain average of self_vec and every received vector."""
    self_vec, mats = _check_inputs(self_vec, received)
    if senders is None:
        senders = list(range(len(mats)))
    entries = [(self_sender, self_vec)]
    entries += list(zip(senders, mats))
    return _indexed_average(entries)


def coordinate_trimmed_mean(self_vec, received, f, senders=None, self_sender=-1):
    """Per-coordinate mean after dropping the f largest and f smallest values.

    Trims over the pooled set self_vec + received. With f=0 this is the
    plain mean and is computed through the same summation path so the two
    coincide exactly.
    """
    if f < 0:
        raise ValueError("f must be >= 0")
    self_vec, mats = _check_inputs(self_vec, received)
    if f == 0:
        return mean(self_vec, received, senders=senders, self_sender=self_sender)
    total = len(mats) + 1
    if total <= 2 * f:
        raise InsufficientInputError(
            f"coordinate-wise trimmed mean needs more than 2f={2 * f} vectors, got {total}"
        )
    stacked = np.vstack([self_vec] + mats)
    stacked = np.sort(stacked, axis=0)
    return stacked[f : total - f].mean(axis=0)


def _anchor_median(points):
    """Return the input point that is itself the geometric median, if any.

    A point y with multiplicity t among the inputs is the median iff the
    summed unit directions toward the other points have norm <= t.
    Weiszfeld converges only sublinearly onto such a point, so this case
    is resolved exactly up front. The comparison is strict: at equality
    the minimizer is a whole segment and the iteration from the mean picks
    the interior solution (the midpoint, in the symmetric two-point case).
    """
    for j in range(len(points)):
        diffs = points - points[j]
        dists = np.sqrt(np.sum(diffs**2, axis=1))
        apart = dists >= GM_ANCHOR_EPS
        multiplicity = len(points) - int(np.count_nonzero(apart))
        pull = (diffs[apart] / dists[apart, None]).sum(axis=0) if np.any(apart) else 0.0
        if float(np.linalg.norm(pull)) < multiplicity * (1.0 - 1e-9):
            return points[j].copy()
    return None


def geometric_median(self_vec, received, tol=GM_TOLERANCE, max_iter=GM_MAX_ITERATIONS):
    """Geometric median of self_vec + received via Weiszfeld iteration.

    Inputs whose median is one of the points themselves are answered by
    the anchor-optimality condition; otherwise the iteration starts from
    the arithmetic mean and an iterate landing within GM_ANCHOR_EPS of an
    anchor is perturbed away from the weight singularity. Raises
    ConvergenceError (carrying the last iterate) if max_iter steps do not
    reach tol.
    """
    self_vec, mats = _check_inputs(self_vec, received)
    points = np.vstack([self_vec] + mats)
    if len(points) == 1:
        return points[0].copy()
    anchored = _anchor_median(points)
    if anchored is not None:
        return anchored
    current = points.mean(axis=0)
    for _ in range(max_iter):
        dists = np.sqrt(np.sum((points - current) ** 2, axis=1))
        if np.any(dists < GM_ANCHOR_EPS):
            # Nudge off the anchor; direction is arbitrary but fixed.
            bump = np.zeros_like(current)
            bump[0] = GM_ANCHOR_EPS
            current = current + bump
            dists = np.sqrt(np.sum((points - current) ** 2, axis=1))
        weights = 1.0 / np.maximum(dists, GM_ANCHOR_EPS)
        candidate = (weights[:, None] * points).sum(axis=0) / weights.sum()
        step = float(np.linalg.norm(candidate - current))
        current = candidate
        if step <= tol:
            return current
    raise ConvergenceError(
        f"geometric median did not converge within {max_iter} iterations",
        last_iterate=current,
    )


def aggregate(rule, self_vec, received, senders=None, self_sender=-1):
    """Dispatch to the rule named by `rule`."""
    if rule.kind == "nna":
        return nna(self_vec, received, rule.f, senders=senders, self_sender=self_sender)
    if rule.kind == "mean":
        return mean(self_vec, received, senders=senders, self_sender=self_sender)
    if rule.kind == "cwtm":
        return coordinate_trimmed_mean(
            self_vec, received, rule.f, senders=senders, self_sender=self_sender
        )
    if rule.kind == "gm":
        return geometric_median(self_vec, received)
    raise ValueError(f"unknown aggregation rule {rule.kind!r}")
