"""Ideal signatures and threshold certificates.

Signatures are ``(digest, signer)`` pairs and certificates are explicit signer
sets.  Unforgeability is enforced by a per-run :class:`SignatureLedger`: a
signature verifies only if the ledger saw it being produced, and the adversary
may only produce signatures for the ids it corrupted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .encoding import decode, encode, wire


class ForgeryAttempt(Exception):
    """The adversary tried to sign on behalf of a process it does not control."""


class InsufficientSigners(ValueError):
    pass


class MixedDigests(ValueError):
    pass


@wire
@dataclass(frozen=True)
class Digest:
    """Canonical bytes of a signed statement.

    The idealised hash is the identity on canonical encodings, which makes it
    trivially collision-free and lets auditors recover the statement.
    """

    data: bytes

    def statement(self):
        return decode(self.data)

    def __repr__(self):
        return f"Digest({self.data[:12].hex()}..)"


def digest(payload) -> Digest:
    return Digest(encode(payload))


@wire
@dataclass(frozen=True)
class Sig:
    digest: Digest
    signer: int


@wire
@dataclass(frozen=True)
class ThresholdCert:
    digest: Digest
    signers: frozenset
    threshold: int
    scheme_n: int

    def statement(self):
        return self.digest.statement()


def aggregate(sigs: Iterable[Sig], k: int, n: int) -> ThresholdCert:
    """Batch at least ``k`` distinct-signer signatures on one digest."""
    sigs = list(sigs)
    digests = {s.digest for s in sigs}
    if len(digests) > 1:
        raise MixedDigests(f"{len(digests)} digests in one aggregate")
    signers = frozenset(s.signer for s in sigs)
    if not digests or len(signers) < k:
        raise InsufficientSigners(f"{len(signers)} distinct signers, need {k}")
    return ThresholdCert(digests.pop(), signers, k, n)


class SignatureLedger:
    """Records every signature produced in one simulated run."""

    def __init__(self, n: int, corrupted: Iterable[int] = ()):
        self.n = n
        self.corrupted = frozenset(corrupted)
        self._signed: set[tuple[Digest, int]] = set()
        self.forgery_attempts = 0

    def sign(self, signer: int, payload, *, adversary: bool = False) -> Sig:
        if not 1 <= signer <= self.n:
            raise ValueError(f"signer {signer} outside 1..{self.n}")
        if adversary and signer not in self.corrupted:
            self.forgery_attempts += 1
            raise ForgeryAttempt(f"adversary signing for correct process {signer}")
        d = payload if isinstance(payload, Digest) else digest(payload)
        self._signed.add((d, signer))
        return Sig(d, signer)

    def verify(self, sig) -> bool:
        return isinstance(sig, Sig) and (sig.digest, sig.signer) in self._signed

    def verify_cert(self, cert) -> bool:
        if not isinstance(cert, ThresholdCert):
            return False
        if cert.threshold < 1 or len(cert.signers) < cert.threshold:
            return False
        if any(not 1 <= s <= cert.scheme_n for s in cert.signers):
            return False
        signed = self._signed
        return all((cert.digest, s) in signed for s in cert.signers)

    def signed_pairs(self):
        """Every ``(digest, signer)`` produced so far, in a stable order."""
        return sorted(self._signed, key=lambda p: (p[0].data, p[1]))

    def __len__(self):
        return len(self._signed)


def verify_cert(cert, ledger: SignatureLedger) -> bool:
    return ledger.verify_cert(cert)


def word_cost(item) -> int:
    """Words taken by one carried item: a signature, a certificate or a value."""
    from .messages import item_count

    return item_count(item)
