import pytest

from adaptiveba.crypto import SignatureLedger, aggregate
from adaptiveba.messages import (
    BBInput, Commit, Decide, FFDecideCert, FFDecideSig, FFFallback, FFInput, FFPropose, Fallback,
    FallbackInput, FallbackRelay, Finalized, Help, HelpReq, HelpReqBB, Idk, IdkCert, PhaseValue,
    Propose, ReplyValue, SenderSigned, SenderValue, Vote,
)


@pytest.fixture
def ledger():
    return SignatureLedger(5, corrupted={4, 5})


def signed(ledger, pid, msg):
    return type(msg)(**{**{k: getattr(msg, k) for k in msg._wire_fields}, "sig": ledger.sign(pid, msg)})


def sample_messages(ledger, n=5, t=2):
    """One instance of every wire message variant, with verifying credentials."""
    q = 4
    ss = SenderSigned(b"v", ledger.sign(1, BBInput(b"v")))
    idk = aggregate([ledger.sign(p, Idk(1)) for p in (1, 2, 3)], t + 1, n)
    commit = aggregate([ledger.sign(p, Vote(b"v", 1)) for p in range(1, q + 1)], q, n)
    fin = aggregate([ledger.sign(p, Decide(b"v", 1)) for p in range(1, q + 1)], q, n)
    fb = aggregate([ledger.sign(p, HelpReq()) for p in (1, 2, 3)], t + 1, n)
    prop = aggregate([ledger.sign(p, FFInput(1)) for p in (1, 2, 3)], t + 1, n)
    dec = aggregate([ledger.sign(p, FFDecideSig(1)) for p in range(1, n + 1)], n, n)
    return [
        SenderValue(ss),
        signed(ledger, 2, HelpReqBB(1)),
        ReplyValue(1, ss),
        signed(ledger, 3, Idk(1)),
        PhaseValue(1, IdkCert(idk)),
        signed(ledger, 1, Propose(b"v", 1)),
        signed(ledger, 2, Vote(b"v", 1)),
        signed(ledger, 1, Commit(b"v", commit, 1)),
        signed(ledger, 2, Decide(b"v", 1)),
        signed(ledger, 1, Finalized(b"v", fin, 1)),
        signed(ledger, 3, HelpReq()),
        signed(ledger, 2, Help(b"v", fin)),
        signed(ledger, 2, Fallback(fb, b"v", fin)),
        signed(ledger, 2, FFInput(1)),
        signed(ledger, 1, FFPropose(1, prop)),
        signed(ledger, 2, FFDecideSig(1)),
        signed(ledger, 1, FFDecideCert(1, dec)),
        signed(ledger, 3, FFFallback(None, None)),
        FallbackRelay(1, 2, b"v", (ledger.sign(2, FallbackInput(2, b"v")),)),
    ]


@pytest.fixture
def messages(ledger):
    return sample_messages(ledger)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
