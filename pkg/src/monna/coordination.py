"""Round executors for the coordination phase.

One synchronized round: every correct node broadcasts its current vector,
each receiver keeps the first n-f-1 arrivals per the delivery policy and
aggregates them with its own vector. The NNA executor precomputes the
pairwise squared distances once per round and feeds them to the same
selection core the standalone nna() uses, so the two paths are
bit-identical (asserted in tests) while the round stays fast enough for
thousand-trial audits.
"""

import numpy as np

from .aggregation import aggregate, nna_core
from .network import select_senders


def nna_round(current, faulty_for, n, f, policy, rng_for):
    """Run one NNA mixing round for all correct nodes.

    current: (m, d) array of correct vectors, row i owned by node id i
    (faulty ids are m..n-1). faulty_for(receiver) -> payload the faulty
    nodes present to that receiver this round, or None when silent; all f
    faulty nodes broadcast that same payload (per-receiver variation is the
    caller's choice when echo broadcast is off). rng_for(receiver) -> the
    receiver's delivery rng.
    """
    m = current.shape[0]
    faulty_ids = frozenset(range(m, n))
    diffs = current[:, None, :] - current[None, :, :]
    pair_d2 = np.sum(diffs**2, axis=2)
    correct_candidates = [
        tuple(j for j in range(m) if j != i) for i in range(m)
    ]
    updated = np.empty_like(current)
    for i in range(m):
        payload = faulty_for(i)
        if payload is None:
            candidates = correct_candidates[i]
            attack_d2 = None
        else:
            candidates = correct_candidates[i] + tuple(sorted(faulty_ids))
            attack_d2 = float(np.sum((payload - current[i]) ** 2))
        senders = select_senders(
            i, candidates, faulty_ids, n, f, policy, rng_for(i)
        )
        row = pair_d2[i]
        received, d2 = [], []
        for s in senders:
            if s < m:
                received.append(current[s])
                d2.append(float(row[s]))
            else:
                received.append(payload)
                d2.append(attack_d2)
        updated[i] = nna_core(current[i], received, d2, senders, f, self_sender=i)
    return updated


def rule_round(rule, current, faulty_for, n, f, policy, rng_for):
    """One mixing round under an arbitrary aggregation rule."""
    m = current.shape[0]
    faulty_ids = frozenset(range(m, n))
    updated = np.empty_like(current)
    for i in range(m):
        payload = faulty_for(i)
        candidates = tuple(j for j in range(m) if j != i)
        if payload is not None:
            candidates = candidates + tuple(sorted(faulty_ids))
        senders = select_senders(i, candidates, faulty_ids, n, f, policy, rng_for(i))
        received = [current[s] if s < m else payload for s in senders]
        updated[i] = aggregate(rule, current[i], received, senders=senders, self_sender=i)
    return updated
