"""Independent reference implementations used as test oracles.

Deliberately written against the plainest possible formulations (python
loops, full sorts, explicit fractions) and kept free of the library's
aggregation/coordination code paths, so agreement is evidence, not
tautology. The only shared pieces are the rng streams and gradient
oracles, which are inputs to the paths under test rather than the paths
themselves.
"""

import numpy as np

from monna import rng as rngmod


def brute_force_nna(self_vec, received, f, senders=None, self_sender=-1):
    """Full sort of distances, explicit subset average.

    Matches the contract of the production rule: squared distances, ties
    by smallest sender index, kept vectors summed in ascending index
    order. Distances are computed with plain python arithmetic.
    """
    received = [np.asarray(v, dtype=float) for v in received]
    self_vec = np.asarray(self_vec, dtype=float)
    if senders is None:
        senders = list(range(len(received)))
    dists = []
    for sid, vec in zip(senders, received):
        d2 = 0.0
        for a, b in zip(vec.tolist(), self_vec.tolist()):
            d2 += (a - b) * (a - b)
        dists.append((d2, sid, vec))
    dists.sort(key=lambda item: (item[0], item[1]))
    keep = len(received) - f
    chosen = [(self_sender, self_vec)] + [(sid, vec) for _, sid, vec in dists[:keep]]
    chosen.sort(key=lambda item: item[0])
    acc = chosen[0][1].copy()
    for _, vec in chosen[1:]:
        acc = acc + vec
    return acc / len(chosen)


def brute_force_cwtm(vectors, f):
    """Per-coordinate sort-and-trim mean over the pooled vectors."""
    stacked = [np.asarray(v, dtype=float).tolist() for v in vectors]
    dim = len(stacked[0])
    out = []
    for c in range(dim):
        column = sorted(row[c] for row in stacked)
        middle = column[f : len(column) - f] if f else column
        out.append(sum(middle) / len(middle))
    return np.array(out)


def gm_cost(points, x):
    return sum(float(np.linalg.norm(np.asarray(p) - x)) for p in points)


def gm_grid_1d(points, lo, hi, steps=200001):
    """Brute-force 1-D minimizer of the sum of distances."""
    xs = np.linspace(lo, hi, steps)
    costs = [gm_cost(points, np.array([x])) for x in xs]
    return xs[int(np.argmin(costs))]


def momentum_closed_form(grads, beta):
    """m_t = (1-beta) * sum_{s<=t} beta^(t-s) g_s, evaluated directly."""
    out = []
    for t in range(len(grads)):
        acc = np.zeros_like(np.asarray(grads[0], dtype=float))
        for s in range(t + 1):
            acc = acc + beta ** (t - s) * np.asarray(grads[s], dtype=float)
        out.append((1.0 - beta) * acc)
    return out


def exact_gd_gradient_norms(eigs, offset0, gamma, steps):
    """||grad||^2 along plain gradient descent on a diagonal quadratic.

    theta_{t+1} - b = (I - gamma A)(theta_t - b), so each eigencoordinate
    of the offset decays geometrically by (1 - gamma * eig).
    """
    eigs = np.asarray(eigs, dtype=float)
    offset = np.asarray(offset0, dtype=float).copy()
    norms = []
    for _ in range(steps):
        norms.append(float(np.sum((eigs * offset) ** 2)))
        offset = (1.0 - gamma * eigs) * offset
    return norms


def momentum_dsgd_reference(objectives, noise, gamma, beta, iterations, theta0):
    """Fault-free momentum D-SGD with exact-mean mixing.

    Reproduces the same per-node gradient draws (same streams) but mixes
    with a hand-rolled ascending-index mean, bypassing the aggregation and
    network modules entirely. Returns the per-iteration model history with
    history[t] = model at the start of iteration t.
    """

    def reference(seed):
        m = len(objectives)
        dim = objectives[0].dim
        theta = np.tile(np.asarray(theta0, dtype=float), (m, 1))
        momentum = np.zeros((m, dim))
        streams = [rngmod.stream(seed, rngmod.GRADIENT, i) for i in range(m)]
        history = np.empty((iterations, m, dim))
        for t in range(iterations):
            history[t] = theta
            for i in range(m):
                grad = objectives[i].gradient(theta[i]) + noise.sample(streams[i], dim)
                momentum[i] = beta * momentum[i] + (1.0 - beta) * grad
            x = theta - gamma * momentum
            acc = x[0].copy()
            for j in range(1, m):
                acc += x[j]
            avg = acc / m
            theta = np.tile(avg, (m, 1))
        return history

    return reference


def chi_square_uniform(counts):
    """Chi-square statistic for uniformity over len(counts) bins."""
    counts = np.asarray(counts, dtype=float)
    expected = counts.sum() / counts.size
    return float(np.sum((counts - expected) ** 2 / expected))
