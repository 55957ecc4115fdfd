from itertools import combinations

import pytest

from adaptiveba.crypto import (
    ForgeryAttempt, InsufficientSigners, MixedDigests, SignatureLedger, ThresholdCert, aggregate,
    digest, verify_cert, word_cost,
)
from adaptiveba.messages import Idk, Vote


def test_sign_and_verify(ledger):
    sig = ledger.sign(3, Vote(b"v", 2))
    assert sig.signer == 3 and sig.digest == digest(Vote(b"v", 2))
    assert ledger.verify(sig)


def test_adversary_cannot_sign_for_correct_ids(ledger):
    with pytest.raises(ForgeryAttempt):
        ledger.sign(1, Vote(b"v", 1), adversary=True)
    assert ledger.forgery_attempts == 1
    assert ledger.sign(4, Vote(b"v", 1), adversary=True).signer == 4


def test_signing_is_deterministic(ledger):
    assert ledger.sign(3, Idk(1)) == ledger.sign(3, Idk(1))


def test_unsigned_signature_does_not_verify(ledger):
    fake = type(ledger.sign(1, Idk(1)))(digest(Idk(2)), 1)
    assert not ledger.verify(fake)


def test_digest_recovers_statement():
    assert digest(Vote(b"x", 3)).statement() == Vote(b"x", 3)


def test_aggregate(ledger):
    sigs = [ledger.sign(p, Idk(1)) for p in (1, 2, 3)]
    cert = aggregate(sigs, 3, 5)
    assert cert.signers == frozenset({1, 2, 3}) and cert.threshold == 3
    assert verify_cert(cert, ledger)


def test_aggregate_duplicates_collapse(ledger):
    s1, s2 = ledger.sign(1, Idk(1)), ledger.sign(2, Idk(1))
    with pytest.raises(InsufficientSigners):
        aggregate([s1, s2, s2], 3, 5)


def test_aggregate_rejects_mixed_digests(ledger):
    with pytest.raises(MixedDigests):
        aggregate([ledger.sign(1, Idk(1)), ledger.sign(2, Idk(2))], 1, 5)


def test_cert_with_unsigned_member_fails(ledger):
    sigs = [ledger.sign(p, Idk(1)) for p in (1, 2)]
    cert = ThresholdCert(sigs[0].digest, frozenset({1, 2, 3}), 3, 5)
    assert not ledger.verify_cert(cert)


def test_cert_below_threshold_fails(ledger):
    sigs = [ledger.sign(p, Idk(1)) for p in (1, 2)]
    cert = ThresholdCert(sigs[0].digest, frozenset({1, 2}), 3, 5)
    assert not ledger.verify_cert(cert)


def test_cert_with_out_of_range_signer_fails():
    led = SignatureLedger(3)
    d = digest(Idk(1))
    assert not led.verify_cert(ThresholdCert(d, frozenset({0}), 1, 3))


def test_aggregation_soundness_exhaustive():
    n = 7
    led = SignatureLedger(n)
    sigs = {p: led.sign(p, Idk(1)) for p in range(1, n + 1)}
    for k in range(1, n + 1):
        for size in range(k, n + 1):
            for group in combinations(range(1, n + 1), size):
                assert led.verify_cert(aggregate([sigs[p] for p in group], k, n))


def test_word_costs(ledger):
    sigs = [ledger.sign(p, Idk(1)) for p in range(1, 6)]
    assert word_cost(aggregate(sigs, 5, 5)) == 1
    assert word_cost(sigs[0]) == 1
    assert word_cost(b"v") == 1
