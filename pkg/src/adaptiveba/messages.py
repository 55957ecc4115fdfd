"""Wire messages, broadcast values and validity predicates."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Union

from .crypto import Digest, Sig, SignatureLedger, ThresholdCert, digest
from .encoding import UNDECIDED, decode, encode, registered_types, wire

MAX_VALUE_BYTES = 32
# A word holds this many signatures/values; every message of the five
# protocols carries at most four, so each costs exactly one word.
WORD_CAPACITY = 4

Value = Union[bytes, int]


def check_value(v) -> bool:
    if isinstance(v, bool):
        return False
    if isinstance(v, bytes):
        return len(v) <= MAX_VALUE_BYTES
    if isinstance(v, int):
        return v in (0, 1)
    return False


# --------------------------------------------------------------------------
# Signed statements (what signers actually sign) and broadcast values.


@wire
@dataclass(frozen=True)
class BBInput:
    value: bytes


@wire
@dataclass(frozen=True)
class SenderSigned:
    value: bytes
    sig: Sig


@wire
@dataclass(frozen=True)
class IdkCert:
    cert: ThresholdCert


BBValue = Union[SenderSigned, IdkCert]


@wire
@dataclass(frozen=True)
class Endorse:
    """Statement signed by processes vouching for an input payload."""

    payload: bytes


@wire
@dataclass(frozen=True)
class QuorumValue:
    payload: bytes
    cert: ThresholdCert


@wire
@dataclass(frozen=True)
class FallbackInput:
    slot: int
    value: object


# --------------------------------------------------------------------------
# Protocol messages.  ``sig`` authenticates the whole message; the statement
# it signs is the message with ``sig`` cleared.


class ProtocolMessage:
    """Base for wire messages; ``phase`` and ``sig`` are optional per variant."""

    @property
    def kind(self) -> str:
        return type(self).__name__

    def statement(self):
        if getattr(self, "sig", None) is None:
            return self
        return dataclasses.replace(self, sig=None)

    def slot_key(self):
        return (self.kind, getattr(self, "phase", None))

    def signer(self):
        sig = getattr(self, "sig", None)
        return sig.signer if sig is not None else None


def signed(msg: ProtocolMessage, sig: Sig) -> ProtocolMessage:
    return dataclasses.replace(msg, sig=sig)


# Byzantine broadcast vetting


@wire
@dataclass(frozen=True)
class SenderValue(ProtocolMessage):
    value: SenderSigned


@wire
@dataclass(frozen=True)
class HelpReqBB(ProtocolMessage):
    phase: int
    sig: Optional[Sig] = None


@wire
@dataclass(frozen=True)
class ReplyValue(ProtocolMessage):
    phase: int
    value: object


@wire
@dataclass(frozen=True)
class Idk(ProtocolMessage):
    phase: int
    sig: Optional[Sig] = None


@wire
@dataclass(frozen=True)
class PhaseValue(ProtocolMessage):
    phase: int
    value: object


# weak BA


@wire
@dataclass(frozen=True)
class Propose(ProtocolMessage):
    value: object
    phase: int
    sig: Optional[Sig] = None


@wire
@dataclass(frozen=True)
class Vote(ProtocolMessage):
    value: object
    phase: int
    sig: Optional[Sig] = None


@wire
@dataclass(frozen=True)
class Commit(ProtocolMessage):
    value: object
    cert: ThresholdCert
    phase: int
    sig: Optional[Sig] = None


@wire
@dataclass(frozen=True)
class Decide(ProtocolMessage):
    value: object
    phase: int
    sig: Optional[Sig] = None


@wire
@dataclass(frozen=True)
class Finalized(ProtocolMessage):
    value: object
    cert: ThresholdCert
    phase: int
    sig: Optional[Sig] = None


@wire
@dataclass(frozen=True)
class HelpReq(ProtocolMessage):
    sig: Optional[Sig] = None


@wire
@dataclass(frozen=True)
class Help(ProtocolMessage):
    decision: object
    proof: Optional[ThresholdCert]
    sig: Optional[Sig] = None


@wire
@dataclass(frozen=True)
class Fallback(ProtocolMessage):
    cert: ThresholdCert
    decision: object
    proof: Optional[ThresholdCert]
    sig: Optional[Sig] = None


# failure-free strong BA


@wire
@dataclass(frozen=True)
class FFInput(ProtocolMessage):
    value: int
    sig: Optional[Sig] = None


@wire
@dataclass(frozen=True)
class FFPropose(ProtocolMessage):
    value: int
    cert: ThresholdCert
    sig: Optional[Sig] = None


@wire
@dataclass(frozen=True)
class FFDecideSig(ProtocolMessage):
    value: int
    sig: Optional[Sig] = None


@wire
@dataclass(frozen=True)
class FFDecideCert(ProtocolMessage):
    value: int
    cert: ThresholdCert
    sig: Optional[Sig] = None


@wire
@dataclass(frozen=True)
class FFFallback(ProtocolMessage):
    value: object
    proof: Optional[ThresholdCert]
    sig: Optional[Sig] = None


# reference fallback (authenticated broadcast relays)


@wire
@dataclass(frozen=True)
class FallbackRelay(ProtocolMessage):
    round: int
    slot: int
    value: object
    chain: tuple

    def slot_key(self):
        return (self.kind, self.round, self.slot, encode(self.value))


MESSAGE_TYPES = (
    SenderValue, HelpReqBB, ReplyValue, Idk, PhaseValue,
    Propose, Vote, Commit, Decide, Finalized, HelpReq, Help, Fallback,
    FFInput, FFPropose, FFDecideSig, FFDecideCert, FFFallback,
    FallbackRelay,
)


# --------------------------------------------------------------------------
# Word accounting


def item_count(item) -> int:
    """Signatures, certificates and finite-domain values carried by ``item``."""
    if item is None or item is UNDECIDED:
        return 0
    if isinstance(item, (Sig, ThresholdCert)):
        return 1
    if isinstance(item, (bytes, int)):
        return 1
    if isinstance(item, SenderSigned):
        return 2
    if isinstance(item, IdkCert):
        return 1
    if isinstance(item, QuorumValue):
        return 2
    if isinstance(item, tuple):
        return sum(item_count(x) for x in item)
    if isinstance(item, ProtocolMessage):
        total = 0
        for name in item._wire_fields:
            if name in ("phase", "round", "slot"):
                continue
            total += item_count(getattr(item, name))
        return total
    raise TypeError(f"no word cost for {type(item).__name__}")


def word_count(msg: ProtocolMessage) -> int:
    items = item_count(msg)
    return max(1, -(-items // WORD_CAPACITY))


# --------------------------------------------------------------------------
# Statement helpers and certificate checks shared by the protocols


def statement_of(cert_or_sig):
    try:
        return cert_or_sig.digest.statement()
    except Exception:
        return None


def cert_for(cert, ledger: SignatureLedger, cls, threshold: int, **fields) -> bool:
    """True iff ``cert`` verifies, meets ``threshold`` and signs a ``cls``
    statement whose named fields equal ``fields``."""
    if not isinstance(cert, ThresholdCert) or len(cert.signers) < threshold:
        return False
    st = statement_of(cert)
    if type(st) is not cls or getattr(st, "sig", None) is not None:
        return False
    for name, want in fields.items():
        if getattr(st, name) != want:
            return False
    return ledger.verify_cert(cert)


def sig_matches(msg: ProtocolMessage, ledger: SignatureLedger, signer=None) -> bool:
    sig = getattr(msg, "sig", None)
    if sig is None or not ledger.verify(sig):
        return False
    if signer is not None and sig.signer != signer:
        return False
    return sig.digest == digest(msg.statement())


# --------------------------------------------------------------------------
# Validity predicates


def bb_valid(v, sender: int, t: int, ledger: SignatureLedger) -> bool:
    """Signed by the designated sender, or an idk certificate of t+1 signers."""
    if isinstance(v, SenderSigned):
        return (
            isinstance(v.value, bytes)
            and check_value(v.value)
            and v.sig.signer == sender
            and v.sig.digest == digest(BBInput(v.value))
            and ledger.verify(v.sig)
        )
    if isinstance(v, IdkCert):
        return cert_for(v.cert, ledger, Idk, t + 1)
    return False


class ValidityPredicate:
    name = "abstract"

    def __call__(self, v) -> bool:
        raise NotImplementedError

    def proof_ok(self, v, proof, ledger, quorum) -> bool:
        return check_value_proof(v, proof, ledger, quorum) and self(v)


class AlwaysTrue(ValidityPredicate):
    name = "always-true"

    def __call__(self, v) -> bool:
        return isinstance(v, bytes) and check_value(v)


class BBValid(ValidityPredicate):
    name = "bb-valid"

    def __init__(self, sender: int, t: int, ledger: SignatureLedger):
        self.sender, self.t, self.ledger = sender, t, ledger

    def __call__(self, v) -> bool:
        return bb_valid(v, self.sender, self.t, self.ledger)


class SignedByQuorum(ValidityPredicate):
    """Valid iff the payload carries n-t endorsements."""

    name = "signed-by-quorum"

    def __init__(self, n: int, t: int, ledger: SignatureLedger):
        self.n, self.t, self.ledger = n, t, ledger

    def __call__(self, v) -> bool:
        return (
            isinstance(v, QuorumValue)
            and check_value(v.payload)
            and cert_for(v.cert, self.ledger, Endorse, self.n - self.t, payload=v.payload)
        )


def check_value_proof(v, proof, ledger, quorum) -> bool:
    """A weak-BA decide proof: a finalize certificate of ``quorum`` on ``v``."""
    if proof is None:
        return False
    st = statement_of(proof)
    return isinstance(st, Decide) and cert_for(proof, ledger, Decide, quorum, value=v)


def make_predicate(name: str, *, n: int, t: int, sender: int, ledger) -> ValidityPredicate:
    if name == "always-true":
        return AlwaysTrue()
    if name in ("bb-valid", "bb-valid(sender)"):
        return BBValid(sender, t, ledger)
    if name == "signed-by-quorum":
        return SignedByQuorum(n, t, ledger)
    raise ValueError(f"unknown predicate {name!r}")


PREDICATES = ("always-true", "bb-valid", "signed-by-quorum")


# --------------------------------------------------------------------------
# Trace encoding


def _jsonable(x):
    if x is None or isinstance(x, (bool, int, str)):
        return x
    if x is UNDECIDED:
        return "undecided"
    if isinstance(x, bytes):
        return x.hex()
    if isinstance(x, Digest):
        return x.data.hex()
    if isinstance(x, Sig):
        return {"signer": x.signer, "digest": x.digest.data.hex()}
    if isinstance(x, ThresholdCert):
        return {"signers": sorted(x.signers), "threshold": x.threshold, "digest": x.digest.data.hex()}
    if isinstance(x, tuple):
        return [_jsonable(i) for i in x]
    if dataclasses.is_dataclass(x):
        out = {"type": type(x).__name__}
        for name in x._wire_fields:
            out[name] = _jsonable(getattr(x, name))
        return out
    return repr(x)


def message_to_json(msg: ProtocolMessage) -> dict:
    """Named fields for readability plus the canonical hex for exact replay."""
    out = _jsonable(msg)
    out["hex"] = encode(msg).hex()
    return out


def message_from_json(obj: dict) -> ProtocolMessage:
    return decode(bytes.fromhex(obj["hex"]))


def message_types() -> dict[str, type]:
    names = {cls.__name__ for cls in MESSAGE_TYPES}
    return {k: v for k, v in registered_types().items() if k in names}
