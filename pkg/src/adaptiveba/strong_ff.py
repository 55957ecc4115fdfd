"""Binary strong BA with a linear failure-free path.

Leader ``p_1`` gathers inputs, certifies a value proposed by ``t+1`` processes,
and collects an ``(n, n)`` decide certificate.  Anyone left without that
certificate after round 5 triggers the fallback, which starts after a ``2
delta`` echo window.
"""

from __future__ import annotations

from fractions import Fraction

from .crypto import aggregate
from .encoding import UNDECIDED
from .messages import FFDecideCert, FFDecideSig, FFFallback, FFInput, FFPropose, cert_for, sig_matches
from .simnet import INF

LEADER = 1
SCRIPTED_ROUNDS = 5


def ff_leader_propose(received, t: int, n: int):
    """Pick the value to certify from signed ``FFInput`` messages.

    Needs ``t+1`` distinct signers; if both bits qualify the larger signer
    count wins and a tie goes to 0.  Returns ``(value, cert)`` or ``None``.
    """
    by_value = {0: {}, 1: {}}
    for msg in received:
        if msg.value in by_value and msg.sig is not None:
            by_value[msg.value].setdefault(msg.sig.signer, msg.sig)
    best = None
    for v in (0, 1):
        if len(by_value[v]) >= t + 1:
            if best is None or len(by_value[v]) > len(by_value[best]):
                best = v
    if best is None:
        return None
    return best, aggregate(by_value[best].values(), t + 1, n)


def propose_cert_ok(value, cert, ledger, t) -> bool:
    return value in (0, 1) and cert_for(cert, ledger, FFInput, t + 1, value=value)


def decide_cert_ok(value, cert, ledger, n) -> bool:
    return value in (0, 1) and cert_for(cert, ledger, FFDecideSig, n, value=value)


class StrongFF:
    def __init__(self, ctx, fallback, start=0):
        self.ctx = ctx
        self.fallback = fallback
        self.start = Fraction(start)
        self.v_i = None
        self.decision = None
        self.proof = None
        self.bu_decision = None
        self.bu_proof = None
        self.fallback_start = INF
        self.fallback_val = None

    def _set_decision(self, v):
        if self.decision is None:
            self.decision = v
            self.ctx.decide(v)

    def round_start(self, r: int) -> Fraction:
        return self.start + (r - 1) * self.ctx.delta

    def run(self, v_i):
        ctx, ledger, n, t = self.ctx, self.ctx.ledger, self.ctx.n, self.ctx.t
        me = ctx.pid
        self.v_i = v_i

        yield ctx.sleep_until(self.round_start(1))
        ctx.mark("ff:1")
        ctx.send(LEADER, FFInput(v_i, ctx.sign(FFInput(v_i))))

        yield ctx.sleep_until(self.round_start(2))
        if me == LEADER:
            got = ctx.receive(lambda e: isinstance(e.msg, FFInput), since=self.round_start(1))
            inputs = [e.msg for e in got if sig_matches(e.msg, ledger, e.frm)]
            picked = ff_leader_propose(inputs, t, n)
            if picked is not None:
                v, cert = picked
                ctx.broadcast(FFPropose(v, cert, ctx.sign(FFPropose(v, cert))))

        yield ctx.sleep_until(self.round_start(3))
        got = ctx.receive(
            lambda e: isinstance(e.msg, FFPropose) and e.frm == LEADER, since=self.round_start(2)
        )
        for env in got:
            m = env.msg
            if sig_matches(m, ledger, LEADER) and propose_cert_ok(m.value, m.cert, ledger, t):
                ctx.send(LEADER, FFDecideSig(m.value, ctx.sign(FFDecideSig(m.value))))
                break

        yield ctx.sleep_until(self.round_start(4))
        if me == LEADER:
            got = ctx.receive(lambda e: isinstance(e.msg, FFDecideSig), since=self.round_start(3))
            sigs = {0: [], 1: []}
            for env in got:
                m = env.msg
                if m.value in sigs and sig_matches(m, ledger, env.frm):
                    sigs[m.value].append(m.sig)
            for v in (0, 1):
                if len({s.signer for s in sigs[v]}) >= n:
                    cert = aggregate(sigs[v], n, n)
                    ctx.broadcast(FFDecideCert(v, cert, ctx.sign(FFDecideCert(v, cert))))
                    break

        yield ctx.sleep_until(self.round_start(5))
        got = ctx.receive(
            lambda e: isinstance(e.msg, FFDecideCert) and e.frm == LEADER, since=self.round_start(4)
        )
        for env in got:
            m = env.msg
            if self.decision is None and sig_matches(m, ledger, LEADER) and decide_cert_ok(m.value, m.cert, ledger, n):
                self._set_decision(m.value)
                self.proof = m.cert
        if self.decision is None:
            self._broadcast_fallback(None, None)

        self.bu_decision = self.decision if self.decision is not None else v_i
        self.bu_proof = self.proof
        yield from self.fallback_window()

        ctx.mark("ff-fallback")
        self.fallback_val = yield from self.fallback.run(ctx, self.bu_decision, self.fallback_start)
        if self.decision is None:
            self._set_decision(self.fallback_val)
        return self.decision

    def _broadcast_fallback(self, v, proof):
        ctx = self.ctx
        ctx.broadcast(FFFallback(v, proof, ctx.sign(FFFallback(v, proof))))
        self.fallback_start = ctx.now + 2 * ctx.delta

    @staticmethod
    def _is_fallback(env):
        return isinstance(env.msg, FFFallback)

    def fallback_window(self):
        ctx, ledger, n = self.ctx, self.ctx.ledger, self.ctx.n
        while self.fallback_start > ctx.now:
            yield ctx.listen(self.fallback_start, self._is_fallback)
            for env in ctx.receive(self._is_fallback):
                m = env.msg
                if not sig_matches(m, ledger, env.frm):
                    continue
                if self.decision is None and m.proof is not None and decide_cert_ok(m.value, m.proof, ledger, n):
                    self.bu_decision = m.value
                    self.bu_proof = m.proof
                if self.fallback_start == INF:
                    self._broadcast_fallback(self.bu_decision, self.bu_proof)


def ff_main(ctx, v_i, fallback, start=0):
    return (yield from StrongFF(ctx, fallback, start).run(v_i))


__all__ = ["StrongFF", "ff_leader_propose", "ff_main", "propose_cert_ok", "decide_cert_ok", "UNDECIDED"]
