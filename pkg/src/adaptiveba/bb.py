"""Byzantine broadcast by reduction to adaptive weak BA.

The sender disseminates its signed value in round 1.  Then ``n`` three-round
vetting phases make sure every correct process holds a ``BB_valid`` value:
signed by the sender, or an idk certificate of ``t+1`` signers.  A leader that
already holds a value stays silent.  Finally a fresh weak BA instance runs on
the vetted values and its output is unwrapped.
"""

from __future__ import annotations

from fractions import Fraction

from .crypto import aggregate
from .messages import (
    BBInput, HelpReqBB, Idk, IdkCert, PhaseValue, ReplyValue, SenderSigned, SenderValue,
    bb_valid, sig_matches,
)
from .weak_ba import WeakBA, leader_of

VET_ROUNDS = 3


def vet_phase_start(j: int, delta) -> Fraction:
    return delta + (j - 1) * VET_ROUNDS * delta


def wba_start(n: int, delta) -> Fraction:
    return delta + n * VET_ROUNDS * delta


def bb_decide(ba_decision):
    """Unwrap a weak BA output: the sender's value, otherwise ``None``."""
    if isinstance(ba_decision, SenderSigned):
        return ba_decision.value
    return None


def sender_value(ledger, sender: int, value: bytes) -> SenderValue:
    return SenderValue(SenderSigned(value, ledger.sign(sender, BBInput(value))))


class BB:
    def __init__(self, ctx, sender: int, validate, fallback, *, commit_lock=True):
        self.ctx = ctx
        self.sender = sender
        self.validate = validate
        self.fallback = fallback
        self.commit_lock = commit_lock
        self.v_i = None
        self.decision = None
        self.wba = None

    def _valid(self, v) -> bool:
        return bb_valid(v, self.sender, self.ctx.t, self.ctx.ledger)

    def run(self, sender_input=None):
        ctx = self.ctx
        yield from self.bb_round1(sender_input)
        for j in range(1, ctx.n + 1):
            val = yield from self.bb_invoke_phase(j)
            if val is not None:
                self.v_i = val
        if self.v_i is not None:
            ctx.note_valid(self.v_i)

        def on_decide(d):
            ctx.decide(d, "ba-decide")
            self.decision = bb_decide(d)
            ctx.decide(self.decision)

        self.wba = WeakBA(
            ctx, self.validate, self.fallback, wba_start(ctx.n, ctx.delta),
            on_decide=on_decide, commit_lock=self.commit_lock,
        )
        yield from self.wba.run(self.v_i)
        return self.decision

    def bb_round1(self, sender_input):
        ctx = self.ctx
        yield ctx.sleep_until(0)
        ctx.mark("init")
        if ctx.pid == self.sender:
            ctx.broadcast(sender_value(ctx.ledger, self.sender, sender_input))
        yield ctx.sleep_until(ctx.delta)
        got = ctx.receive(lambda e: isinstance(e.msg, SenderValue) and e.frm == self.sender, since=0)
        for env in got:
            # first valid one by delivery order
            if self._valid(env.msg.value):
                self.v_i = env.msg.value
                break

    def bb_invoke_phase(self, j: int):
        ctx, d, t, ledger = self.ctx, self.ctx.delta, self.ctx.t, self.ctx.ledger
        leader = leader_of(j, ctx.n)
        start = vet_phase_start(j, d)

        yield ctx.sleep_until(start)
        if leader == ctx.pid and self.v_i is None:
            ctx.mark(f"vet:{j}")
            ctx.broadcast(HelpReqBB(j, ctx.sign(HelpReqBB(j))))

        yield ctx.sleep_until(start + d)
        got = ctx.receive(
            lambda e: isinstance(e.msg, HelpReqBB) and e.msg.phase == j and e.frm == leader, since=start
        )
        if any(sig_matches(e.msg, ledger, leader) for e in got):
            if self.v_i is not None:
                ctx.send(leader, ReplyValue(j, self.v_i))
            else:
                ctx.send(leader, Idk(j, ctx.sign(Idk(j))))

        yield ctx.sleep_until(start + 2 * d)
        if leader == ctx.pid:
            self._leader_relay(j, start)

        yield ctx.sleep_until(start + 3 * d)
        got = ctx.receive(
            lambda e: isinstance(e.msg, PhaseValue) and e.msg.phase == j and e.frm == leader,
            since=start + 2 * d,
        )
        for env in got:
            if self._valid(env.msg.value):
                return env.msg.value
        return None

    def _leader_relay(self, j, start):
        ctx, t, ledger = self.ctx, self.ctx.t, self.ctx.ledger
        got = ctx.receive(
            lambda e: isinstance(e.msg, (ReplyValue, Idk)) and e.msg.phase == j, since=start + ctx.delta
        )
        signed, certs, idks = [], [], []
        for env in got:
            m = env.msg
            if isinstance(m, ReplyValue):
                if isinstance(m.value, SenderSigned) and self._valid(m.value):
                    signed.append(m.value)
                elif isinstance(m.value, IdkCert) and self._valid(m.value):
                    certs.append(m.value)
            elif sig_matches(m, ledger, env.frm):
                idks.append(m.sig)
        if signed:
            ctx.broadcast(PhaseValue(j, signed[0]))
        elif len({s.signer for s in idks}) >= t + 1:
            ctx.broadcast(PhaseValue(j, IdkCert(aggregate(idks, t + 1, ctx.n))))
        elif certs:
            # a correct holder of an idk certificate replies with it instead of idk
            ctx.broadcast(PhaseValue(j, certs[0]))


def bb_main(ctx, sender, sender_input, validate, fallback, **kw):
    return (yield from BB(ctx, sender, validate, fallback, **kw).run(sender_input))


__all__ = ["BB", "bb_decide", "bb_main", "sender_value", "vet_phase_start", "wba_start"]
