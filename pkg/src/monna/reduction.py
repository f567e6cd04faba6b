"""Mixing audit: measured contraction and centering of a coordination phase.

A coordination phase maps the correct nodes' vectors z to outputs y. Its
quality is summarized by two ratios: alpha_hat = drift(y)/drift(z)
(contraction of the correct-node variance) and
lambda_hat = ||mean(y)-mean(z)||^2 / drift(z) (displacement of the correct
mean). Closed-form worst-case bounds exist in two fault regimes; the audit
measures the ratios under randomized inputs and adversarial faulty values
and checks that they stay below the bounds.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .coordination import nna_round
from .errors import RegimeError


def drift(vectors):
    """Variance of a set of vectors around their mean: mean ||v_i - v_bar||^2.

    Equals half the mean squared pairwise distance (checked as a property
    test), is translation invariant and scales quadratically. Computed on
    row-0-shifted copies so a set of identical vectors reports exactly
    zero (a plain mean of identical rows is not bit-exact).
    """
    stacked = np.asarray(vectors, dtype=float)
    if stacked.ndim == 1:
        stacked = stacked[None, :]
    if stacked.size == 0:
        raise ValueError("drift of an empty vector set is undefined")
    shifted = stacked - stacked[0]
    center = shifted.mean(axis=0)
    return float(np.mean(np.sum((shifted - center) ** 2, axis=1)))


@dataclass(frozen=True)
class ReductionBound:
    """Closed-form (contraction, centering) guarantee for a regime."""

    alpha: float
    lam: float


@dataclass
class MixingReport:
    """Worst-case measured mixing ratios over an audit's trials."""

    gamma_in: float
    gamma_out: float
    alpha_hat: float
    lambda_hat: float
    rounds: int
    regime: str
    trials: int
    violation: bool = False
    worst_strategy: str = ""


def bound_eleven_f(n, f, rounds):
    """Contraction/centering bound for the n >= 11f regime, any round count.

    alpha = (9.88 f/(n-f))^K and lambda = 9f/(n-f) * min(K, 1/(1-sqrt(alpha))^2).
    One round suffices in this regime (alpha <= 0.988 < 1 already at K=1).
    """
    if f < 0 or rounds < 1:
        raise ValueError("need f >= 0 and rounds >= 1")
    if n < 11 * f:
        raise RegimeError(f"n >= 11f required, got n={n}, f={f}")
    if f == 0:
        return ReductionBound(alpha=0.0, lam=0.0)
    alpha = (9.88 * f / (n - f)) ** rounds
    lam = 9.0 * f / (n - f) * min(rounds, 1.0 / (1.0 - math.sqrt(alpha)) ** 2)
    return ReductionBound(alpha=alpha, lam=lam)


def bound_five_f(n, f, delta):
    """Bound for the wider n >= (5+delta)f regime, plus the round count it needs.

    alpha = 2f/(n-f) <= 1/2 and lambda = ((3+delta)/delta)^2 (8f)^2/(n-f),
    attained after K = ceil(log(8(n-f)) / (2 log((3+delta)/3))) + 1 rounds.
    A smaller count, log(8(n-f)) / (2 log((3+delta)/delta)), circulates for
    the same bound; we use the larger conservative value that the
    max-distance contraction argument actually supports, and do not rely on
    the smaller one anywhere.
    """
    if delta <= 0:
        raise ValueError("delta must be > 0")
    if n < (5 + delta) * f:
        raise RegimeError(f"n >= (5+delta)f required, got n={n}, f={f}, delta={delta}")
    rounds = math.ceil(math.log(8 * (n - f)) / (2 * math.log((3 + delta) / 3))) + 1
    if f == 0:
        return ReductionBound(alpha=0.0, lam=0.0), rounds
    alpha = 2.0 * f / (n - f)
    lam = ((3 + delta) / delta) ** 2 * (8.0 * f) ** 2 / (n - f)
    return ReductionBound(alpha=alpha, lam=lam), rounds


# ---------------------------------------------------------------------------
# Coordination-phase runner and adversarial strategies


def make_nna_phase(n, f, rounds, policy="faulty_first", seb=True):
    """Build the K-round NNA coordination phase over the simulated network.

    Returns phase(correct_inputs, faulty_fn, rng) -> outputs, where
    correct_inputs is an (n-f, d) array owned by correct node ids
    0..n-f-1 and faulty ids are n-f..n-1. faulty_fn(k, current, receiver)
    yields the faulty payload for round k; with seb enabled the receiver
    argument is ignored (one payload per round for everyone, which is what
    the echo-broadcast consistency guarantee enforces), otherwise the
    adversary may equivocate per receiver. faulty_fn may return None to
    model silence.
    """
    m = n - f

    def phase(correct_inputs, faulty_fn, rng):
        current = np.array(correct_inputs, dtype=float)
        if current.shape[0] != m:
            raise ValueError(f"expected {m} correct inputs, got {current.shape[0]}")
        for k in range(rounds):
            if faulty_fn is None:
                faulty_for = lambda i: None
            elif seb:
                shared = faulty_fn(k, current, None)
                faulty_for = lambda i, payload=shared: payload
            else:
                faulty_for = lambda i, cur=current, k=k: faulty_fn(k, cur, i)
            current = nna_round(current, faulty_for, n, f, policy, lambda i: rng)
        return current

    return phase


def clone_correct_strategy(k, current, receiver):
    """Faulty value mimics one correct node (hides inside the cluster)."""
    return current[0]


def large_outlier_strategy(k, current, receiver):
    """Faulty value far outside the hull; trimming must exclude it."""
    center = current.mean(axis=0)
    scale = 1e6 * (1.0 + float(np.max(np.abs(current))))
    direction = np.ones_like(center)
    return center + scale * direction


def mid_hull_strategy(k, current, receiver):
    """Faulty value at the correct mean plus a small fixed offset."""
    center = current.mean(axis=0)
    spread = math.sqrt(max(drift(current), 0.0))
    offset = np.zeros_like(center)
    offset[0] = 1e-3 * spread
    return center + offset


def per_receiver_strategy(k, current, receiver):
    """Equivocating adversary (needs SEB off): clone the receiver's own value."""
    if receiver is None:
        return current[0]
    return current[receiver]


DEFAULT_STRATEGIES = (
    ("clone_correct", clone_correct_strategy),
    ("large_outlier", large_outlier_strategy),
    ("mid_hull", mid_hull_strategy),
)


def gaussian_inputs(m, dim, scale=1.0):
    def sample(rng):
        return scale * rng.standard_normal((m, dim))

    return sample


def audit(phase, input_sampler, strategies, trials, seed, rounds=1, regime=""):
    """Measure worst-case mixing ratios over randomized adversarial trials.

    Each trial draws correct inputs, runs the coordination phase once per
    adversarial strategy, and records alpha_hat and lambda_hat with the
    convention 0/0 -> 0 (both ratios are vacuous at zero input drift). A
    trial with zero input drift but nonzero output drift marks the report
    as a reduction violation instead of raising. Deterministic given
    (seed, strategies): trial rngs are derived streams.
    """
    if isinstance(strategies, dict):
        strategies = tuple(strategies.items())
    report = MixingReport(
        gamma_in=0.0,
        gamma_out=0.0,
        alpha_hat=0.0,
        lambda_hat=0.0,
        rounds=rounds,
        regime=regime,
        trials=trials,
    )
    for trial in range(trials):
        inputs = input_sampler(rngmod.stream(seed, rngmod.AUDIT, trial, 0))
        z_bar = inputs.mean(axis=0)
        gamma_in = drift(inputs)
        for s_idx, (name, strategy) in enumerate(strategies):
            run_rng = rngmod.stream(seed, rngmod.AUDIT, trial, 1 + s_idx)
            outputs = phase(inputs, strategy, run_rng)
            gamma_out = drift(outputs)
            centering = float(np.sum((outputs.mean(axis=0) - z_bar) ** 2))
            if gamma_in == 0.0:
                if gamma_out > 0.0 or centering > 0.0:
                    report.violation = True
                    report.worst_strategy = name
                continue
            alpha_hat = gamma_out / gamma_in
            lambda_hat = centering / gamma_in
            if alpha_hat > report.alpha_hat:
                report.alpha_hat = alpha_hat
                report.gamma_in = gamma_in
                report.gamma_out = gamma_out
                report.worst_strategy = name
            report.lambda_hat = max(report.lambda_hat, lambda_hat)
    if not (math.isfinite(report.alpha_hat) and math.isfinite(report.lambda_hat)):
        report.violation = True
    return report
