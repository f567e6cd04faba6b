"""Coordinated faulty-node strategies on parameter vectors.

The adversary is omniscient over correct state: each round it sees the
vectors the correct nodes are about to mix and chooses one faulty payload
(with echo broadcast on, all faulty nodes must present the same value).
The first three attacks perturb the correct mean x_bar:

- sf:   send -x_bar (scale 2 along -x_bar).
- foe:  send (1-z) x_bar with z grid-searched.
- alie: send x_bar - z * coordinate-wise-std, z grid-searched. The std is
        taken across the correct nodes' current coordination vectors (the
        quantities actually broadcast).
- lf:   send the average of correct-style updates computed against
        flipped-label objectives, tracked with the adversary's own mirror
        momentum.

Grid-searched scales pick the candidate whose post-aggregation outcome at
a probe node lands farthest from x_bar.
"""

from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .errors import UnsupportedAttackError
from .objectives import flipped_for_label_attack, stochastic_gradient

ATTACK_KINDS = ("none", "sf", "foe", "alie", "lf", "custom")

# Covers the sf/foe family (2.0 included) without making runs slow.
DEFAULT_ZETA_GRID = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0)


@dataclass(frozen=True)
class AttackSpec:
    kind: str = "none"
    zeta_grid: tuple = DEFAULT_ZETA_GRID
    custom_fn: object = None

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if self.kind in ("foe", "alie") and not self.zeta_grid:
            raise ValueError("foe/alie need a nonempty zeta grid")
        if self.kind == "custom" and self.custom_fn is None:
            raise ValueError("custom attack needs custom_fn")


def grid_search_zeta(candidates, outcome_fn, reference):
    """Pick the scale whose outcome lands farthest from the reference.

    Returns argmax over candidates of ||outcome_fn(z) - reference||; exact
    ties go to the largest candidate.
    """
    if not candidates:
        raise ValueError("empty candidate grid")
    best_z, best_dist = None, -1.0
    for z in candidates:
        dist = float(np.linalg.norm(outcome_fn(z) - reference))
        if dist > best_dist or (dist == best_dist and (best_z is None or z > best_z)):
            best_z, best_dist = z, dist
    return best_z


def _readonly(arr):
    view = np.asarray(arr)
    view = view.view()
    view.setflags(write=False)
    return view


class Adversary:
    """Stateful driver for the faulty nodes over a whole run.

    Deterministic given (seed, spec). Reads correct state through
    read-only views and never mutates it.
    """

    def __init__(self, spec, schedule, objectives=None, noise=None, seed=0):
        self.spec = spec
        self.schedule = schedule
        self._rng = rngmod.stream(seed, rngmod.ATTACK)
        self._mirror_momentum = None
        self._mirror_x = None
        if spec.kind == "lf":
            if objectives is None:
                raise UnsupportedAttackError(
                    "label-flip attack needs the correct nodes' objectives"
                )
            try:
                self._flipped = flipped_for_label_attack(objectives)
            except ValueError as exc:
                raise UnsupportedAttackError(
                    f"label-flip attack unsupported for these objectives: {exc}"
                ) from exc
            self._noise = noise
        else:
            self._flipped = None
            self._noise = None

    def begin_iteration(self, correct_thetas, t):
        """Per-iteration bookkeeping before any round payload is requested.

        Only the label-flip attack has per-iteration state: it advances its
        mirror momentum using flipped-objective stochastic gradients at the
        correct nodes' current models.
        """
        if self.spec.kind != "lf":
            return
        thetas = _readonly(correct_thetas)
        m = thetas.shape[0]
        if self._mirror_momentum is None:
            self._mirror_momentum = np.zeros_like(np.asarray(thetas))
        beta, gamma = self.schedule.beta, self.schedule.gamma
        for i in range(m):
            grad = stochastic_gradient(self._flipped[i], self._noise, thetas[i], self._rng)
            self._mirror_momentum[i] = beta * self._mirror_momentum[i] + (1.0 - beta) * grad
        self._mirror_x = np.asarray(thetas) - gamma * self._mirror_momentum

    def round_payload(self, correct_x, t, k, probe=None):
        """The vector every faulty node broadcasts this round (None = silent)."""
        kind = self.spec.kind
        if kind == "none":
            return None
        x = _readonly(correct_x)
        if kind == "custom":
            return np.asarray(self.spec.custom_fn(t, k, x, self._rng), dtype=float)
        if kind == "lf":
            if self._mirror_x is None:
                raise UnsupportedAttackError("label-flip payload requested before begin_iteration")
            return self._mirror_x.mean(axis=0)
        x_bar = np.asarray(x).mean(axis=0)
        if kind == "sf":
            return -x_bar
        if kind == "foe":
            direction = -x_bar
        else:  # alie
            direction = -np.asarray(x).std(axis=0)
            if not np.any(direction):
                return x_bar.copy()
        if probe is None:
            zeta = max(self.spec.zeta_grid)
        else:
            zeta = grid_search_zeta(
                self.spec.zeta_grid, lambda z: probe(x_bar + z * direction), x_bar
            )
        return x_bar + zeta * direction


def attack_vector(spec, correct_x, schedule=None, probe=None, objectives=None,
                  noise=None, seed=0, t=0, k=0):
    """One-shot payload for stateless attack kinds (sf/foe/alie/custom)."""
    adv = Adversary(spec, schedule, objectives=objectives, noise=noise, seed=seed)
    if spec.kind == "lf":
        raise UnsupportedAttackError(
            "label-flip is stateful; drive it through Adversary.begin_iteration"
        )
    return adv.round_payload(correct_x, t, k, probe=probe)
