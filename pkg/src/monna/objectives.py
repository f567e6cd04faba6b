"""Local loss functions and stochastic gradient oracles.

The quadratic family is the workhorse: a PSD curvature matrix shared by
all nodes with per-node centers, so the smoothness constant is the exact
top eigenvalue, the global minimizer is the mean center, and the
gradient-diversity level is an exact dial rather than a measurement (the
error floor scales with it, so tests need it known). The logistic family
is for qualitative demos; its smoothness constant is an upper bound
estimated from the data spectral norm.
"""

import numpy as np

from .errors import DimensionMismatchError


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


class Quadratic:
    """Local loss 0.5 (theta - b)^T A (theta - b) with A symmetric PSD."""

    kind = "quadratic"

    def __init__(self, matrix, center):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim == 1:
            matrix = np.diag(matrix)
        self.matrix = _frozen(matrix)
        self.center = _frozen(center)
        if self.matrix.shape != (self.center.size, self.center.size):
            raise DimensionMismatchError("curvature matrix and center disagree on dimension")
        self._lipschitz = float(np.max(np.linalg.eigvalsh(self.matrix)))

    @property
    def dim(self):
        return self.center.size

    @property
    def lipschitz(self):
        """Exact: the largest eigenvalue of the curvature matrix."""
        return self._lipschitz

    def value(self, theta):
        diff = np.asarray(theta, dtype=float) - self.center
        return 0.5 * float(diff @ self.matrix @ diff)

    def gradient(self, theta):
        diff = np.asarray(theta, dtype=float) - self.center
        return self.matrix @ diff


class Logistic:
    """Binary logistic loss over a fixed labeled sample with L2 regularization."""

    kind = "logistic"

    def __init__(self, features, labels, reg=1e-2):
        self.features = _frozen(features)
        labels = np.asarray(labels, dtype=float)
        if set(np.unique(labels)) - {0.0, 1.0}:
            raise ValueError("labels must be 0/1")
        self.labels = _frozen(labels)
        self.reg = float(reg)
        count = self.features.shape[0]
        spectral = np.linalg.norm(self.features, ord=2)
        # Upper bound, not exact: sigmoid' <= 1/4.
        self._lipschitz = spectral**2 / (4.0 * count) + self.reg

    @property
    def dim(self):
        return self.features.shape[1]

    @property
    def lipschitz(self):
        return self._lipschitz

    def _probs(self, theta):
        logits = self.features @ np.asarray(theta, dtype=float)
        return 1.0 / (1.0 + np.exp(-logits))

    def value(self, theta):
        theta = np.asarray(theta, dtype=float)
        logits = self.features @ theta
        # log(1+e^z) - y z, computed stably
        per_sample = np.logaddexp(0.0, logits) - self.labels * logits
        return float(per_sample.mean() + 0.5 * self.reg * theta @ theta)

    def gradient(self, theta):
        theta = np.asarray(theta, dtype=float)
        residual = self._probs(theta) - self.labels
        return self.features.T @ residual / self.features.shape[0] + self.reg * theta

    def with_flipped_labels(self):
        return Logistic(self.features, 1.0 - self.labels, reg=self.reg)


class NoiseModel:
    """Additive zero-mean gradient noise with total variance at most sigma^2.

    gaussian: per-coordinate scale sigma/sqrt(d), so the variance equals
    sigma^2 exactly (unbounded pointwise, which is all the variance
    assumption needs). uniform_ball: uniform in a ball of radius
    sigma*sqrt((d+2)/d), also variance sigma^2 exactly but bounded.
    """

    def __init__(self, sigma, distribution="gaussian"):
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        if distribution not in ("gaussian", "uniform_ball"):
            raise ValueError(f"unknown noise distribution {distribution!r}")
        self.sigma = float(sigma)
        self.distribution = distribution

    def sample(self, rng, dim):
        if self.sigma == 0.0:
            return np.zeros(dim)
        if self.distribution == "gaussian":
            return rng.standard_normal(dim) * (self.sigma / np.sqrt(dim))
        radius = self.sigma * np.sqrt((dim + 2.0) / dim)
        direction = rng.standard_normal(dim)
        direction /= np.linalg.norm(direction)
        return radius * rng.uniform() ** (1.0 / dim) * direction


def true_gradient(obj, theta):
    """Exact local gradient (the oracle the theory's left-hand sides use)."""
    return obj.gradient(theta)


def stochastic_gradient(obj, noise, theta, rng):
    """Exact gradient plus one zero-mean perturbation draw."""
    return obj.gradient(theta) + noise.sample(rng, obj.dim)


def global_gradient(objs, theta):
    """Average exact gradient over the given (correct) objectives."""
    acc = objs[0].gradient(theta)
    for obj in objs[1:]:
        acc = acc + obj.gradient(theta)
    return acc / len(objs)


def global_value(objs, theta):
    return sum(obj.value(theta) for obj in objs) / len(objs)


def measure_heterogeneity(objs, theta_samples):
    """Max over sample points of the mean squared gradient diversity."""
    if len(theta_samples) == 0:
        raise ValueError("need at least one evaluation point")
    worst = 0.0
    for theta in theta_samples:
        center = global_gradient(objs, theta)
        spread = np.mean(
            [np.sum((obj.gradient(theta) - center) ** 2) for obj in objs]
        )
        worst = max(worst, float(spread))
    return worst


# ---------------------------------------------------------------------------
# Families


def quadratic_family(n_correct, dim, lipschitz, zeta, rng, mean_center=None,
                     condition=4.0):
    """Correct-node quadratics with exact smoothness and diversity dials.

    Shared diagonal curvature with eigenvalues spanning
    [lipschitz/condition, lipschitz]. Centers are mean_center + r_i with
    sum(r_i) = 0 and mean ||A r_i||^2 = zeta^2 exactly, which makes the
    gradient-diversity bound hold with equality at every theta.
    """
    if n_correct < 1:
        raise ValueError("need at least one correct node")
    if zeta > 0 and n_correct < 2:
        raise ValueError("diversity needs at least two nodes")
    eigs = np.linspace(lipschitz / condition, lipschitz, dim) if dim > 1 else np.array([lipschitz])
    matrix = np.diag(eigs)
    if mean_center is None:
        mean_center = np.full(dim, 2.0 / np.sqrt(dim))
    mean_center = np.asarray(mean_center, dtype=float)
    if zeta == 0.0:
        offsets = np.zeros((n_correct, dim))
    else:
        offsets = rng.standard_normal((n_correct, dim))
        offsets -= offsets.mean(axis=0)
        scale = np.sqrt(np.mean(np.sum((offsets @ matrix) ** 2, axis=1)))
        offsets *= zeta / scale
    return [Quadratic(matrix, mean_center + offsets[i]) for i in range(n_correct)]


def logistic_family(n_correct, dim, dirichlet_alpha, rng, samples_per_node=64, reg=1e-2):
    """Two-cluster logistic tasks with per-node class mixes drawn from a
    symmetric concentration-`dirichlet_alpha` allocation (Beta(alpha, alpha)
    in the binary case): small alpha gives strongly skewed mixes, large
    alpha near-identical ones. No closed-form diversity level exists here;
    use measure_heterogeneity on the result.
    """
    if dirichlet_alpha <= 0:
        raise ValueError("dirichlet_alpha must be > 0")
    # Asymmetric clusters: with symmetric ones the class mix cancels out
    # of the gradients and the allocation dial would have nothing to turn.
    mu_pos = np.zeros(dim)
    mu_pos[0] = 2.0
    mu_neg = np.zeros(dim)
    mu_neg[0] = -1.0
    if dim > 1:
        mu_neg[1] = 1.0
    objs = []
    for i in range(n_correct):
        frac = rng.beta(dirichlet_alpha, dirichlet_alpha)
        n_pos = int(round(frac * samples_per_node))
        n_pos = min(max(n_pos, 1), samples_per_node - 1)
        labels = np.concatenate([np.ones(n_pos), np.zeros(samples_per_node - n_pos)])
        centers = np.where(labels[:, None] > 0.5, mu_pos, mu_neg)
        feats = centers + rng.standard_normal((samples_per_node, dim))
        objs.append(Logistic(feats, labels, reg=reg))
    return objs


def analytic_minimum(objs):
    """(theta*, Q*) for a shared-curvature quadratic family: theta* = mean center."""
    if not all(isinstance(o, Quadratic) for o in objs):
        raise ValueError("analytic minimum is only available for quadratics")
    theta_star = np.mean([o.center for o in objs], axis=0)
    return theta_star, global_value(objs, theta_star)


def numeric_minimum(objs, iters=4000):
    """Deterministic gradient-descent proxy for Q* (used for logistic tasks)."""
    lip = max(o.lipschitz for o in objs)
    theta = np.zeros(objs[0].dim)
    step = 1.0 / lip
    for _ in range(iters):
        theta = theta - step * global_gradient(objs, theta)
    return theta, global_value(objs, theta)


def flipped_for_label_attack(objs):
    """Flipped-label counterparts of the given objectives.

    Logistic: labels inverted. Quadratic: centers reflected through the
    coordinate-wise (max+min)/2 midpoint of all centers - the analogue of
    inverting a label scale, documented as an analogue rather than an
    exact port of the data-space attack.
    """
    if all(isinstance(o, Logistic) for o in objs):
        return [o.with_flipped_labels() for o in objs]
    if all(isinstance(o, Quadratic) for o in objs):
        centers = np.vstack([o.center for o in objs])
        pivot = 0.5 * (centers.max(axis=0) + centers.min(axis=0))
        return [Quadratic(o.matrix, 2.0 * pivot - o.center) for o in objs]
    raise ValueError("mixed or unknown objective kinds")
