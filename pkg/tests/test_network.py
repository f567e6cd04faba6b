import numpy as np
import pytest

from monna.errors import ConfigError, RegimeError
from monna.network import (
    KeyedTagScheme,
    NullScheme,
    SebInstance,
    collect_round,
    exhaustive_property_check,
    seb_broadcast,
    seb_threshold,
    select_senders,
)


def make_messages(n, receiver, silent=frozenset()):
    return {s: np.array([float(s)]) for s in range(n) if s != receiver and s not in silent}


class TestCollectRound:
    def test_fault_free_delivers_all_peers(self):
        rng = np.random.default_rng(0)
        inbox = collect_round(2, make_messages(6, 2), frozenset(), 6, 0, "fifo", rng)
        assert [s for s, _ in inbox] == [0, 1, 3, 4, 5]

    def test_faulty_first_includes_all_faulty(self):
        # n=16, f=3: 3 faulty messages plus 9 sampled correct out of 12.
        rng = np.random.default_rng(1)
        faulty = frozenset({13, 14, 15})
        inbox = collect_round(0, make_messages(16, 0), faulty, 16, 3, "faulty_first", rng)
        senders = [s for s, _ in inbox]
        assert len(senders) == 12
        assert set(senders) >= faulty
        assert len([s for s in senders if s not in faulty]) == 9

    def test_silent_faulty_no_stall(self):
        rng = np.random.default_rng(2)
        faulty = frozenset({13, 14, 15})
        inbox = collect_round(
            0, make_messages(16, 0, silent=faulty), faulty, 16, 3, "faulty_first", rng
        )
        senders = [s for s, _ in inbox]
        assert len(senders) == 12
        assert not set(senders) & faulty

    def test_never_includes_receiver(self):
        rng = np.random.default_rng(3)
        for policy in ("fifo", "seeded_shuffle", "faulty_first"):
            inbox = collect_round(4, make_messages(9, 4), frozenset({8}), 9, 1, policy, rng)
            assert 4 not in [s for s, _ in inbox]
            assert len(inbox) == 7

    def test_deterministic_given_seed(self):
        faulty = frozenset({7})
        first = select_senders(0, tuple(range(1, 8)), faulty, 8, 1, "faulty_first",
                               np.random.default_rng(42))
        second = select_senders(0, tuple(range(1, 8)), faulty, 8, 1, "faulty_first",
                                np.random.default_rng(42))
        assert first == second

    def test_insufficient_messages(self):
        rng = np.random.default_rng(4)
        with pytest.raises(ConfigError):
            collect_round(0, {1: np.zeros(1)}, frozenset(), 6, 0, "fifo", rng)

    def test_unknown_policy(self):
        with pytest.raises(ConfigError):
            select_senders(0, (1, 2), frozenset(), 4, 1, "bogus", np.random.default_rng(0))


class TestSeb:
    def test_all_correct_accept(self):
        n, f = 5, 0
        scheme = KeyedTagScheme(n, seed=1)
        outcome, inst = seb_broadcast(0, np.array([3.14]), n, f, scheme)
        assert all(v is not None for v in outcome.values())
        key = next(iter(inst.variants))
        assert len(inst.signatures[key]) >= seb_threshold(n, f)

    def test_requires_supermajority(self):
        with pytest.raises(RegimeError):
            SebInstance(n=6, f=2, sender=0, identifier=(0, 0, 0), scheme=NullScheme())

    def test_faulty_refusers_cannot_stall_correct_sender(self):
        # n=4, f=1: the one faulty node withholds its echo; the two correct
        # echoers still meet the quorum.
        n, f = 4, 1
        scheme = KeyedTagScheme(n, seed=2)
        outcome, _ = seb_broadcast(
            0, np.array([1.0]), n, f, scheme, faulty_ids=frozenset({3}), refusing={3}
        )
        assert all(outcome[j] is not None for j in (1, 2))

    def test_equivocation_never_double_accepts_n7_f2(self):
        # Faulty sender splits the 5 correct echoers across two payloads in
        # every possible way; the other faulty node signs both. At most one
        # payload can assemble a certificate.
        n, f = 7, 2
        scheme = KeyedTagScheme(n, seed=3)
        v1, v2 = np.array([1.0]), np.array([2.0])
        for split in range(2**5):
            inst = SebInstance(n=n, f=f, sender=6, identifier=(6, 0, 0), scheme=scheme)
            k1 = inst.send(v1, range(6))
            k2 = inst.send(v2, range(6))
            for bit, node in enumerate(range(5)):
                inst.echo(node, k1 if (split >> bit) & 1 else k2, honest=True)
            inst.echo(5, k1, honest=False)
            inst.echo(5, k2, honest=False)
            certs = [inst.final_certificate(k) for k in (k1, k2)]
            accepted = sum(
                1 for k, c in zip((k1, k2), certs) if c is not None and inst.accept(0, k, c)
            )
            assert accepted <= 1

    def test_forged_sender_signature_refused(self):
        n, f = 4, 1
        scheme = KeyedTagScheme(n, seed=4)
        inst = SebInstance(n=n, f=f, sender=3, identifier=(3, 0, 0), scheme=scheme)
        key = inst.send(np.array([9.0]), range(3), signature=b"forged")
        assert inst.echo(1, key, honest=True) is None

    def test_honest_echoer_refuses_second_variant(self):
        n, f = 4, 1
        scheme = KeyedTagScheme(n, seed=5)
        inst = SebInstance(n=n, f=f, sender=3, identifier=(3, 0, 0), scheme=scheme)
        k1 = inst.send(np.array([1.0]), range(3))
        k2 = inst.send(np.array([2.0]), range(3))
        assert inst.echo(0, k1, honest=True) is not None
        assert inst.echo(0, k2, honest=True) is None

    def test_sent_messages_carry_identifier_and_signature(self):
        n, f = 5, 1
        scheme = KeyedTagScheme(n, seed=6)
        _, inst = seb_broadcast(2, np.array([1.0]), n, f, scheme,
                                faulty_ids=frozenset({4}), identifier=(2, 7, 3))
        message = next(iter(inst.sent.values()))
        assert message.sender == 2
        assert message.identifier == (2, 7, 3)
        assert scheme.verify(2, message.blob(), message.signature)

    def test_message_complexity_linear(self):
        for n in (4, 7, 10, 13):
            scheme = NullScheme()
            outcome, inst = seb_broadcast(0, np.array([1.0]), n, 1, scheme,
                                          faulty_ids=frozenset({n - 1}))
            # SEND to n-1, up to n-1 echoes, one accept per receiver.
            assert inst.messages_sent <= 3 * (n - 1)

    def test_exhaustive_small_instances(self):
        stats = exhaustive_property_check(max_n=5, max_f=1)
        assert stats["validity_failures"] == 0
        assert stats["consistency_violations"] == 0
        assert stats["instances"] > 0
