"""Simulated asynchronous message layer.

Asynchrony is modeled as adversarial arrival order plus optional silence,
not clocks: a receiver takes the first n-f-1 messages according to a
delivery policy, which is all the coordination phase depends on. The
signed echo broadcast (SEB) state machine prevents an equivocating sender
from getting two different payloads accepted under one identifier.
"""

import hashlib
import hmac
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .errors import ConfigError, RegimeError

POLICIES = ("faulty_first", "fifo", "seeded_shuffle")


# ---------------------------------------------------------------------------
# Delivery scheduling


def select_senders(receiver, candidates, faulty_ids, n, f, policy, rng):
    """Pick the n-f-1 sender ids whose messages arrive within the cutoff.

    candidates: sorted sender ids that actually sent (never the receiver).

    - faulty_first: worst-case asynchrony emulation; every present faulty
      message is delivered inside the cutoff, the remaining slots are a
      seeded uniform sample of the correct ones.
    - fifo: ascending sender index (a fixed, benign arrival order).
    - seeded_shuffle: a seeded random permutation of all senders.
    """
    if policy not in POLICIES:
        raise ConfigError(f"network.policy: unknown delivery policy {policy!r}")
    need = n - f - 1
    if len(candidates) < need:
        raise ConfigError(
            f"receiver {receiver} has {len(candidates)} deliverable messages, needs {need}"
        )
    if policy == "fifo":
        return list(candidates[:need])
    if policy == "seeded_shuffle":
        order = rng.permutation(len(candidates))
        return [candidates[i] for i in order[:need]]
    faulty = [s for s in candidates if s in faulty_ids]
    correct = [s for s in candidates if s not in faulty_ids]
    fill = need - len(faulty)
    if fill < 0:
        faulty = faulty[:need]
        fill = 0
    picked = rng.permutation(len(correct))[:fill] if fill else []
    return faulty + [correct[i] for i in picked]


def collect_round(receiver, messages, faulty_ids, n, f, policy, rng):
    """Select the n-f-1 messages a receiver acts on this round.

    messages: dict sender -> payload for every sender that sent (correct
    senders always send; faulty senders may be absent). Never includes the
    receiver's own message. Raises ConfigError if fewer than n-f-1
    candidate messages exist (cannot happen with at most f silent nodes).
    """
    candidates = sorted(s for s in messages if s != receiver)
    chosen = select_senders(receiver, candidates, faulty_ids, n, f, policy, rng)
    return [(s, messages[s]) for s in chosen]


# ---------------------------------------------------------------------------
# Signature schemes


class KeyedTagScheme:
    """Keyed-tag signatures (BLAKE2b MACs) over per-node secret keys.

    Sound against the simulated adversary: a faulty node can only produce
    tags under keys it holds, and the harness never hands out another
    node's key. Stands in for public-key signatures, which are out of
    scope.
    """

    def __init__(self, n, seed=0):
        self._keys = [
            rngmod.stream(seed, rngmod.PROFILE, 997, i).bytes(16) for i in range(n)
        ]

    def sign(self, signer, blob):
        return hashlib.blake2b(blob, key=self._keys[signer], digest_size=16).digest()

    def verify(self, signer, blob, tag):
        return hmac.compare_digest(self.sign(signer, blob), tag)


class NullScheme:
    """No-op scheme for honest-majority benchmarks where tags cost time."""

    def sign(self, signer, blob):
        return b""

    def verify(self, signer, blob, tag):
        return True


def payload_blob(identifier, payload):
    ident = ",".join(str(x) for x in identifier).encode()
    body = np.ascontiguousarray(np.asarray(payload, dtype=float)).tobytes()
    return ident + b"|" + body


# ---------------------------------------------------------------------------
# Signed echo broadcast

SEND, ECHO, FINAL, ACCEPT = "send", "echo", "final", "accept"


@dataclass(frozen=True)
class Message:
    """One broadcast message: payload under an (origin, iteration, round) identifier.

    Correct senders use each identifier exactly once; an equivocating
    faulty sender reuses it with different payloads, which is exactly what
    the echo quorum exists to catch.
    """

    sender: int
    identifier: tuple
    payload: object
    signature: bytes

    def blob(self):
        return payload_blob(self.identifier, self.payload)


def seb_threshold(n, f):
    """Echo-signature quorum: floor((n+f)/2) signatures from distinct non-senders.

    This is the smallest count for which two quorums must share a correct
    echoer (consistency), while a correct sender can still assemble it
    from its n-f-1 correct echoers whenever n > 3f (validity).
    """
    return (n + f) // 2


@dataclass
class SebInstance:
    """State machine for one sender's broadcast of one identifier.

    Four communication rounds: the sender SENDs its signed message, each
    recipient ECHOes a signature back (first valid message per identifier
    only), the sender distributes a FINAL certificate once the signature
    quorum is met, and recipients ACCEPT after verifying the certificate.
    """

    n: int
    f: int
    sender: int
    identifier: tuple
    scheme: object
    phase: str = SEND
    # variant key -> payload / Message / sender signature / echo signatures
    variants: dict = field(default_factory=dict)
    sent: dict = field(default_factory=dict)
    sender_sigs: dict = field(default_factory=dict)
    signatures: dict = field(default_factory=dict)
    echoed: dict = field(default_factory=dict)  # correct echoer -> variant it signed
    messages_sent: int = 0

    def __post_init__(self):
        if self.n <= 3 * self.f:
            raise RegimeError(f"SEB requires n > 3f, got n={self.n}, f={self.f}")
        self.threshold = seb_threshold(self.n, self.f)

    def _blob(self, payload):
        return payload_blob(self.identifier, payload)

    def send(self, payload, receivers, signature=None):
        """SEND round: sender transmits its signed message to receivers.

        A faulty sender may call this more than once with different
        payloads (equivocation); each call is one variant. `signature`
        defaults to the sender's own valid tag; pass a forged value to
        model an invalid SEND. Returns the variant key; the corresponding
        Message is kept in self.sent.
        """
        key = self._blob(payload)
        if signature is None:
            signature = self.scheme.sign(self.sender, key)
        message = Message(
            sender=self.sender, identifier=self.identifier,
            payload=payload, signature=signature,
        )
        self.variants[key] = payload
        self.sender_sigs[key] = signature
        self.sent[key] = message
        self.signatures.setdefault(key, {})
        self.messages_sent += len(receivers)
        self.phase = ECHO
        return key

    def echo(self, node, variant_key, honest=True):
        """ECHO round: node signs the sender's message and returns the tag.

        The echoer first checks the sender's signature on the message; an
        invalid signature is refused. An honest node additionally signs
        only the first variant it sees for this identifier and refuses
        anything conflicting. Pass honest=False for a faulty echoer, which
        may sign any number of variants or none.
        """
        if variant_key not in self.variants:
            return None
        if not self.scheme.verify(self.sender, variant_key, self.sender_sigs[variant_key]):
            return None
        if honest:
            seen = self.echoed.get(node)
            if seen is not None and seen != variant_key:
                return None
            self.echoed[node] = variant_key
        tag = self.scheme.sign(node, variant_key)
        self.signatures[variant_key][node] = tag
        self.messages_sent += 1
        return tag

    def final_certificate(self, variant_key):
        """FINAL round: certificate of echo signatures, or None below quorum."""
        sigs = self.signatures.get(variant_key, {})
        sigs = {node: tag for node, tag in sigs.items() if node != self.sender}
        if len(sigs) < self.threshold:
            return None
        self.phase = FINAL
        return dict(sigs)

    def accept(self, receiver, variant_key, certificate):
        """ACCEPT round: receiver verifies the certificate and delivers."""
        if certificate is None or variant_key not in self.variants:
            return False
        valid = {
            node
            for node, tag in certificate.items()
            if node != self.sender and self.scheme.verify(node, variant_key, tag)
        }
        if len(valid) < self.threshold:
            return False
        self.phase = ACCEPT
        self.messages_sent += 1
        return True


def _consistency_instances(n, f, scheme):
    """All equivocation executions of one faulty sender: every assignment of
    correct echoers to (variant 1, variant 2, starved) crossed with every
    behavior of the remaining faulty echoers."""
    import itertools

    import numpy as np

    sender = n - 1  # faulty sender; remaining faulty (if any) are echoers
    other_faulty = list(range(n - f, n - 1))
    correct = [j for j in range(n) if j >= 0 and j < n - f]
    v1, v2 = np.array([1.0]), np.array([2.0])
    for assignment in itertools.product((0, 1, 2), repeat=len(correct)):
        for behaviors in itertools.product((0, 1, 2, 3), repeat=len(other_faulty)):
            inst = SebInstance(n=n, f=f, sender=sender, identifier=(sender, 0, 0),
                               scheme=scheme)
            k1 = inst.send(v1, range(n))
            k2 = inst.send(v2, range(n))
            for node, choice in zip(correct, assignment):
                if choice == 0:
                    inst.echo(node, k1, honest=True)
                elif choice == 1:
                    inst.echo(node, k2, honest=True)
            for node, b in zip(other_faulty, behaviors):
                if b in (1, 3):
                    inst.echo(node, k1, honest=False)
                if b in (2, 3):
                    inst.echo(node, k2, honest=False)
            yield inst, (k1, k2)


def exhaustive_property_check(max_n=7, max_f=2):
    """Enumerate small-instance SEB executions; count validity/consistency failures.

    Validity: for every correct sender and every echo-refusal pattern of
    the faulty nodes, all correct receivers accept. Consistency: for every
    equivocation pattern of a faulty sender (arbitrary split of correct
    echoers across two payload variants, arbitrary double-signing by
    faulty echoers), at most one variant can assemble an acceptable
    certificate. Returns a dict of counters; both failure counts must be
    zero.
    """
    import itertools

    import numpy as np

    stats = {
        "instances": 0,
        "validity_failures": 0,
        "consistency_violations": 0,
        "pairs": [],
    }
    for n in range(2, max_n + 1):
        for f in range(0, max_f + 1):
            if n <= 3 * f:
                continue
            stats["pairs"].append((n, f))
            scheme = KeyedTagScheme(n, seed=11)
            # Validity: correct sender 0, faulty = last f nodes, any refusal set.
            faulty = frozenset(range(n - f, n))
            for refusal_bits in itertools.product((False, True), repeat=f):
                refusing = {node for node, bit in zip(sorted(faulty), refusal_bits) if bit}
                outcome, inst = seb_broadcast(
                    0, np.array([42.0]), n, f, scheme,
                    faulty_ids=faulty, refusing=refusing,
                )
                stats["instances"] += 1
                if any(outcome[j] is None for j in range(1, n) if j not in faulty):
                    stats["validity_failures"] += 1
            # Consistency: faulty sender equivocates (needs f >= 1).
            if f >= 1:
                for inst, (k1, k2) in _consistency_instances(n, f, scheme):
                    stats["instances"] += 1
                    accepted = 0
                    for key in (k1, k2):
                        cert = inst.final_certificate(key)
                        if cert is not None and inst.accept(0, key, cert):
                            accepted += 1
                    if accepted > 1:
                        stats["consistency_violations"] += 1
    return stats


def seb_broadcast(sender, payload, n, f, scheme, faulty_ids=frozenset(),
                  identifier=(0, 0, 0), refusing=frozenset()):
    """Run one SEB instance for a correct sender under honest delivery.

    Faulty echoers listed in `refusing` withhold their echo. Returns a
    dict receiver -> accepted payload (None when the broadcast stalls) plus
    the instance for inspection.
    """
    inst = SebInstance(n=n, f=f, sender=sender, identifier=identifier, scheme=scheme)
    receivers = [j for j in range(n) if j != sender]
    key = inst.send(payload, receivers)
    for j in receivers:
        if j in refusing:
            continue
        inst.echo(j, key, honest=j not in faulty_ids)
    cert = inst.final_certificate(key)
    outcome = {}
    for j in receivers:
        outcome[j] = payload if (cert is not None and inst.accept(j, key, cert)) else None
    return outcome, inst
