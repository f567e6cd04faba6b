"""Per-node state machine: momentum update, partial step, mixing rounds.

Iteration t of the algorithm, as executed by one correct node: blend the
fresh stochastic gradient into the momentum, take a partial step to get
the coordination vector, run K mixing rounds against received vectors,
and adopt the result as the next model. Iterations are indexed 0..T-1 and
the returned model is drawn uniformly from that history.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .aggregation import nna
from .errors import RegimeError


@dataclass(frozen=True)
class Schedule:
    """Step size, momentum coefficient, mixing rounds per iteration, iterations."""

    gamma: float
    beta: float
    rounds: int = 1
    iterations: int = 1

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must be in [0, 1)")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.rounds < 1:
            raise ValueError("need at least one coordination round")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")


@dataclass(frozen=True)
class NodeState:
    """One correct node: model theta, momentum, and current mixing vector."""

    node_id: int
    theta: np.ndarray
    momentum: np.ndarray
    x_current: np.ndarray

    @classmethod
    def initial(cls, node_id, theta0):
        theta0 = np.asarray(theta0, dtype=float)
        # Shared initial model; momentum starts at zero by convention.
        return cls(
            node_id=node_id,
            theta=theta0.copy(),
            momentum=np.zeros_like(theta0),
            x_current=theta0.copy(),
        )


def local_phase(state, grad, sched):
    """Momentum blend plus partial model step.

    momentum <- beta * momentum + (1 - beta) * grad, and the coordination
    vector is initialized to theta - gamma * momentum.
    """
    momentum = sched.beta * state.momentum + (1.0 - sched.beta) * np.asarray(grad, dtype=float)
    x = state.theta - sched.gamma * momentum
    return replace(state, momentum=momentum, x_current=x)


def coordination_round(state, received, f):
    """One mixing round: replace the coordination vector by its NNA aggregate.

    received: list of (sender, vector) pairs, exactly n-f-1 of them (the
    network layer enforces the wait rule).
    """
    senders = [s for s, _ in received]
    vectors = [v for _, v in received]
    x = nna(state.x_current, vectors, f, senders=senders, self_sender=state.node_id)
    return replace(state, x_current=x)


def finalize_iteration(state):
    """Adopt the mixed vector as the next model."""
    return replace(state, theta=state.x_current.copy())


@dataclass(frozen=True)
class ScheduleConstants:
    """Closed-form constants behind the single-round theoretical schedule."""

    alpha: float
    lam: float
    c0: float
    c1: float
    c2: float
    c3: float
    c4: float


def theoretical_schedule(lipschitz, iterations, sigma, n, f, initial_gap):
    """Theory-prescribed (gamma, beta, K=1) for the n >= 11f regime.

    gamma = min(1/(12L), (1/L) sqrt(2/(3 c1)), sqrt(c0/(c2 L T sigma^2)))
    and beta = sqrt(1 - 12 gamma L), with

        alpha = 9.88 f/(n-f),  lambda = 9 f/(n-f),
        c0 = 12 * initial_gap          (gap = global loss at start minus Q*),
        c1 = 18 alpha (1+alpha)/(1-alpha)^2,
        c2 = 72 L (3/(n-f) + 2 c1 + (9 lambda/2)(2 c1 + 3)),
        c3 = 6 (6 c1 + (9 lambda/2)(4 c1 + 9)),
        c4 = 9 n c0 c1 / c2.

    The middle gamma term is exactly the step-size cap the drift bound
    needs, (1-alpha)/(L sqrt(27 alpha (1+alpha))), so the returned schedule
    always satisfies that precondition. With f=0 (c1=0) or sigma=0 the
    corresponding terms are inactive.
    """
    if lipschitz <= 0:
        raise ValueError("lipschitz must be > 0")
    if initial_gap < 0:
        raise ValueError("initial_gap must be >= 0")
    if n < 11 * f:
        raise RegimeError(
            f"theoretical schedule needs n >= 11f (got n={n}, f={f}); "
            "use the wide-regime schedule with its own round count instead"
        )
    alpha = 9.88 * f / (n - f)
    lam = 9.0 * f / (n - f)
    c0 = 12.0 * initial_gap
    c1 = 18.0 * alpha * (1.0 + alpha) / (1.0 - alpha) ** 2
    c2 = 72.0 * lipschitz * (3.0 / (n - f) + 2.0 * c1 + 4.5 * lam * (2.0 * c1 + 3.0))
    c3 = 6.0 * (6.0 * c1 + 4.5 * lam * (4.0 * c1 + 9.0))
    c4 = 9.0 * n * c0 * c1 / c2
    terms = [1.0 / (12.0 * lipschitz)]
    if c1 > 0:
        terms.append(math.sqrt(2.0 / (3.0 * c1)) / lipschitz)
    if sigma > 0 and c0 > 0:
        terms.append(math.sqrt(c0 / (c2 * lipschitz * iterations * sigma**2)))
    gamma = min(terms)
    beta = math.sqrt(max(1.0 - 12.0 * gamma * lipschitz, 0.0))
    sched = Schedule(gamma=gamma, beta=beta, rounds=1, iterations=iterations)
    return sched, ScheduleConstants(alpha=alpha, lam=lam, c0=c0, c1=c1, c2=c2, c3=c3, c4=c4)


def wide_regime_schedule(lipschitz, iterations, sigma, n, f, delta, initial_gap):
    """Theory-prescribed schedule for the wider n >= (5+delta)f regime.

    Same gamma/beta structure as the single-round schedule but with the
    wide-regime contraction alpha = 2f/(n-f), centering
    lambda = ((3+delta)/delta)^2 (8f)^2/(n-f), slightly different c2/c3
    weights, and the logarithmic round count that regime requires.
    """
    from .reduction import bound_five_f  # local import; reduction imports coordination

    bound, rounds = bound_five_f(n, f, delta)
    alpha, lam = bound.alpha, bound.lam
    c0 = 12.0 * initial_gap
    c1 = 18.0 * alpha * (1.0 + alpha) / (1.0 - alpha) ** 2
    c2 = 72.0 * lipschitz * (3.0 / (n - f) + 3.0 * c1 + 4.5 * lam * (2.0 * c1 + 3.0))
    c3 = 7.0 * (6.0 * c1 + 4.5 * lam * (4.0 * c1 + 9.0))
    c4 = 9.0 * n * c0 * c1 / c2
    terms = [1.0 / (12.0 * lipschitz)]
    if c1 > 0:
        terms.append(math.sqrt(2.0 / (3.0 * c1)) / lipschitz)
    if sigma > 0 and c0 > 0:
        terms.append(math.sqrt(c0 / (c2 * lipschitz * iterations * sigma**2)))
    gamma = min(terms)
    beta = math.sqrt(max(1.0 - 12.0 * gamma * lipschitz, 0.0))
    sched = Schedule(gamma=gamma, beta=beta, rounds=rounds, iterations=iterations)
    return sched, ScheduleConstants(alpha=alpha, lam=lam, c0=c0, c1=c1, c2=c2, c3=c3, c4=c4)


def output_model(history, rng):
    """Uniformly sampled past iterate (the algorithm's returned model)."""
    if len(history) == 0:
        raise ValueError("empty model history")
    return history[int(rng.integers(len(history)))]


def best_gradient_norm_index(grad_norms):
    """Argmin-gradient-norm selection, a diagnostic alternative to the
    uniform draw (not part of the algorithm's output rule)."""
    return int(np.argmin(np.asarray(grad_norms)))
