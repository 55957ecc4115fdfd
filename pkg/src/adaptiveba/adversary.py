"""Byzantine strategies.

A corrupted process normally runs the honest code through a
:class:`ByzantineContext`, whose sends and receives pass through the
strategy's hooks.  That keeps most strategies to a few lines: they drop,
redirect, delay or rewrite what the honest code would have done.  A strategy
can also replace the program outright (see :class:`TwoCommitLeader`).

Corruption is static and chosen before the run.  Strategies may only sign
with corrupted keys; an attempt to sign for a correct id raises
:class:`~adaptiveba.crypto.ForgeryAttempt`, is counted, and the message is
never sent.
"""

from __future__ import annotations

import dataclasses
import random
from fractions import Fraction

from .crypto import ForgeryAttempt, Sig, ThresholdCert, aggregate
from .messages import (
    BBInput, Commit, Decide, FFDecideCert, FFFallback, FFInput, Fallback, Finalized, HelpReq,
    ProtocolMessage, Propose, SenderSigned, SenderValue, Vote, sig_matches,
)
from .simnet import ProcessContext

# -- helpers --------------------------------------------------------------------


def carried_credentials(obj):
    """Every Sig and ThresholdCert reachable from ``obj``."""
    if isinstance(obj, (Sig, ThresholdCert)):
        yield obj
        return
    if isinstance(obj, tuple):
        for x in obj:
            yield from carried_credentials(x)
        return
    fields = getattr(obj, "_wire_fields", None)
    if fields is None or isinstance(obj, (bytes, int)):
        return
    for name in fields:
        yield from carried_credentials(getattr(obj, name))


def credentials_verify(msg, ledger) -> bool:
    for c in carried_credentials(msg):
        ok = ledger.verify(c) if isinstance(c, Sig) else ledger.verify_cert(c)
        if not ok:
            return False
    return True


def resign(ctx, msg: ProtocolMessage, **changes) -> ProtocolMessage:
    """Rewrite fields of ``msg`` and sign the result with ``ctx``'s key."""
    base = dataclasses.replace(msg, **changes)
    if getattr(msg, "sig", None) is None:
        return base
    base = dataclasses.replace(base, sig=None)
    return dataclasses.replace(base, sig=ctx.sign(base))


def alt_value(ctx, v, rng=None):
    """A different value of the same shape, or ``v`` if none can be made."""
    if isinstance(v, bool):
        return v
    if isinstance(v, int) and v in (0, 1):
        return 1 - v
    if isinstance(v, bytes):
        pool = [b"equivocal-a", b"equivocal-b"]
        if rng is not None:
            rng.shuffle(pool)
        return pool[0] if pool[0] != v else pool[1]
    if isinstance(v, SenderSigned) and ctx.pid == v.sig.signer:
        w = alt_value(ctx, v.value, rng)
        return SenderSigned(w, ctx.sign(BBInput(w)))
    return v


class ByzantineContext(ProcessContext):
    """What the honest code sees when it runs on a corrupted process."""

    byzantine = True

    def __init__(self, sim, pid, strategy):
        super().__init__(sim, pid)
        self.strategy = strategy

    def sign(self, payload):
        return self.ledger.sign(self.pid, payload, adversary=True)

    def sign_as(self, signer: int, payload):
        """Sign for an arbitrary id; raises ForgeryAttempt unless it is corrupted."""
        return self.ledger.sign(signer, payload, adversary=True)

    def send(self, to, msg):
        for to2, msg2, delay in self.strategy.outgoing(self, to, msg):
            self.raw_send(to2, msg2, delay)

    def raw_send(self, to, msg, delay=None):
        if not credentials_verify(msg, self.ledger):
            self.sim.log(self.pid, "dropped-unverifiable", msg.kind)
            return
        if to != self.pid and delay is None:
            delay = self.sim.strategy.byzantine_delay(self, to, msg)
        self.sim.transmit(self.pid, to, msg, delay)

    def receive(self, match, since=None):
        got = super().receive(match, since)
        return [e for e in got if self.strategy.accept(self, e)]

    def mark(self, label):
        super().mark(label)
        self.strategy.on_mark(self, label)

    def correct_ids(self):
        return [p for p in range(1, self.n + 1) if p not in self.sim.corrupted]


# -- strategies -----------------------------------------------------------------


class Strategy:
    """Base strategy: corrupted processes run the honest code unchanged."""

    name = "abstract"

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = random.Random(f"{self.name}:{seed}")
        self.config = None

    # -- setup
    def corrupt_choice(self, n: int, t: int, f: int, config=None) -> frozenset:
        """Default: ``f`` ids sampled with the strategy's seed."""
        return frozenset(random.Random(f"corrupt:{self.name}:{self.seed}").sample(range(1, n + 1), f))

    def bind(self, config):
        self.config = config

    def byzantine_input(self, pid: int, value):
        return value

    def program(self, ctx, honest):
        """Generator run by a corrupted process; ``honest()`` builds the default one."""
        return honest()

    # -- network
    def link_delay(self, sim, frm, to, msg):
        return sim.config.delta

    def byzantine_delay(self, ctx, to, msg):
        return ctx.delta

    def outgoing(self, ctx, to, msg):
        return [(to, msg, None)]

    def accept(self, ctx, env) -> bool:
        return True

    def on_mark(self, ctx, label):
        pass

    def __repr__(self):
        return f"{type(self).__name__}(seed={self.seed})"


def lowest(n, f, exclude=()):
    return frozenset([p for p in range(1, n + 1) if p not in exclude][:f])


def highest(n, f):
    return frozenset(range(n - f + 1, n + 1))


class Honest(Strategy):
    name = "honest"


class Crash(Strategy):
    """The lowest ids (the first leaders) are dead from time 0."""

    name = "crash"

    def corrupt_choice(self, n, t, f, config=None):
        return lowest(n, f)

    def program(self, ctx, honest):
        return iter(())


class CrashAtRound(Strategy):
    """Seeded ids run honestly, then fall silent from a seeded round on."""

    name = "crash-at-round"

    def __init__(self, seed=0, round=None):
        super().__init__(seed)
        self.round = round
        self._at = {}

    def crash_time(self, ctx):
        if ctx.pid not in self._at:
            from .runner import scripted_end

            rounds = int(scripted_end(self.config) / ctx.delta) + 1
            r = self.round if self.round is not None else self.rng.randrange(0, rounds)
            self._at[ctx.pid] = r * ctx.delta
        return self._at[ctx.pid]

    def outgoing(self, ctx, to, msg):
        if ctx.now >= self.crash_time(ctx):
            return []
        return [(to, msg, None)]


class SilentSender(Strategy):
    """The BB sender (or the first leader) never disseminates its value."""

    name = "silent-sender"

    def corrupt_choice(self, n, t, f, config=None):
        if f == 0:
            return frozenset()
        sender = config.sender if config is not None else 1
        return frozenset([sender]) | lowest(n, f - 1, exclude=(sender,))

    def outgoing(self, ctx, to, msg):
        if ctx.pid != self.config.sender or to == ctx.pid:
            return [(to, msg, None)]
        if isinstance(msg, (SenderValue, Propose, FFInput)):
            return []
        # also withhold its own value when it leads a vetting phase or replies
        if isinstance(getattr(msg, "value", None), SenderSigned):
            return []
        return [(to, msg, None)]


class EquivocatingSender(Strategy):
    """Sends one value to the lower half and a re-signed other value to the upper half."""

    name = "equivocating-sender"

    def corrupt_choice(self, n, t, f, config=None):
        if f == 0:
            return frozenset()
        sender = config.sender if config is not None else 1
        return frozenset([sender]) | lowest(n, f - 1, exclude=(sender,))

    def outgoing(self, ctx, to, msg):
        if to == ctx.pid or to <= ctx.n // 2:
            return [(to, msg, None)]
        if isinstance(msg, SenderValue):
            return [(to, SenderValue(alt_value(ctx, msg.value)), None)]
        if isinstance(msg, (Propose, FFInput)):
            return [(to, resign(ctx, msg, value=alt_value(ctx, msg.value)), None)]
        return [(to, msg, None)]


class DecideThenSilence(Strategy):
    """Byzantine leaders finalize for one correct leader only, hoping it stays silent."""

    name = "decide-then-silence"

    def corrupt_choice(self, n, t, f, config=None):
        return lowest(n, f)

    def target(self, ctx):
        leaders = [p for p in ctx.correct_ids() if p <= ctx.t + 1]
        return leaders[-1] if leaders else ctx.correct_ids()[-1]

    def outgoing(self, ctx, to, msg):
        if isinstance(msg, (Finalized, FFDecideCert)) and to not in (ctx.pid, self.target(ctx)):
            return []
        return [(to, msg, None)]


class PartialFallbackDealer(Strategy):
    """Starves correct leaders, then deals fallback notices to one correct process."""

    name = "partial-fallback-dealer"

    def corrupt_choice(self, n, t, f, config=None):
        return lowest(n, f)

    def outgoing(self, ctx, to, msg):
        target = ctx.correct_ids()[0]
        if to == ctx.pid:
            return [(to, msg, None)]
        if isinstance(msg, (Finalized, FFDecideCert)):
            return [(target, msg, None)] if to == target else []
        if isinstance(msg, (Vote, Decide, Commit)) and to not in ctx.sim.corrupted:
            return []
        if isinstance(msg, (Fallback, FFFallback)):
            return [(target, msg, ctx.delta)] if to == target else []
        return [(to, msg, None)]

    def on_mark(self, ctx, label):
        if label == "wba-help":
            req = HelpReq(ctx.sign(HelpReq()))
            for to in range(1, ctx.n + 1):
                ctx.raw_send(to, req)


class HelpReqSpam(Strategy):
    """Byzantine-only help requests; correct processes answer each one."""

    name = "help-req-spam"

    def corrupt_choice(self, n, t, f, config=None):
        return highest(n, f)

    def outgoing(self, ctx, to, msg):
        if isinstance(msg, HelpReq):
            return []
        return [(to, msg, None)]

    def on_mark(self, ctx, label):
        if label == "wba-help":
            req = HelpReq(ctx.sign(HelpReq()))
            for to in range(1, ctx.n + 1):
                ctx.raw_send(to, req)


class RandomFuzzer(Strategy):
    """Seeded drops, delays, substitutions, duplicates and forgery attempts.

    Correct-to-correct links also get seeded delays in ``(0, delta]``.
    """

    name = "random-fuzzer"

    def __init__(self, seed=0, p_drop=0.2, p_sub=0.2, p_dup=0.1, p_forge=0.05):
        super().__init__(seed)
        self.p_drop, self.p_sub, self.p_dup, self.p_forge = p_drop, p_sub, p_dup, p_forge

    def _delay(self, delta):
        return Fraction(self.rng.randint(1, 4), 4) * delta

    def link_delay(self, sim, frm, to, msg):
        return self._delay(sim.config.delta)

    def byzantine_delay(self, ctx, to, msg):
        return self._delay(ctx.delta)

    def outgoing(self, ctx, to, msg):
        rng = self.rng
        if to == ctx.pid:
            return [(to, msg, None)]
        if rng.random() < self.p_forge:
            victims = ctx.correct_ids()
            if victims:
                try:
                    ctx.sign_as(rng.choice(victims), msg.statement())
                except ForgeryAttempt:
                    pass
        if rng.random() < self.p_drop:
            return []
        if rng.random() < self.p_sub and hasattr(msg, "value"):
            w = alt_value(ctx, msg.value, rng)
            msg = resign(ctx, msg, value=w) if not isinstance(msg, SenderValue) else SenderValue(w)
        out = [(to, msg, None)]
        if rng.random() < self.p_dup:
            out.append((to, msg, None))
        return out

    def accept(self, ctx, env):
        return self.rng.random() >= self.p_drop / 2


class TwoCommitLeader(Strategy):
    """Byzantine leaders of the first phases get commit certificates for two values.

    Leader 1 forms a commit certificate for A and withholds it.  Leader 2
    forms one for B and shows it to every correct process but the highest.
    Later Byzantine leaders relay the old A certificate; a finalize for A, if
    it forms, goes to the highest correct process only.  With the commit lock
    disabled this splits decisions once three leaders are corrupted.
    """

    name = "two-commit-leader"
    A, B = b"two-commit-A", b"two-commit-B"

    def __init__(self, seed=0):
        super().__init__(seed)
        self.certs = {}

    def corrupt_choice(self, n, t, f, config=None):
        return lowest(n, f)

    def program(self, ctx, honest):
        if self.config.protocol != "weak-ba" or self.config.predicate != "always-true":
            return honest()
        return self._run(ctx)

    def _run(self, ctx):
        from .weak_ba import WeakBASchedule, commit_cert_ok, leader_of
        from .simnet import quorum_size

        me, n, t, d, ledger = ctx.pid, ctx.n, ctx.t, ctx.delta, ctx.ledger
        corrupted = sorted(ctx.sim.corrupted)
        q = quorum_size(n, t)
        sched = WeakBASchedule(Fraction(0), t, d)
        correct = ctx.correct_ids()
        ctx.note_valid(self.A)
        ctx.note_valid(self.B)

        for j in range(1, t + 2):
            start = sched.phase_start(j)
            leader = leader_of(j, n)
            byz_leader = leader in ctx.sim.corrupted
            k = corrupted.index(leader) if byz_leader else None
            value = {0: self.A, 1: self.B}.get(k)

            yield ctx.sleep_until(start)
            if leader == me and value is not None:
                p = Propose(value, j)
                for to in range(1, n + 1):
                    ctx.raw_send(to, Propose(value, j, ctx.sign(p)))

            yield ctx.sleep_until(start + d)
            if byz_leader and value is not None:
                ctx.raw_send(leader, Vote(value, j, ctx.sign(Vote(value, j))))
            elif not byz_leader:
                got = ctx.receive(lambda e: isinstance(e.msg, Propose) and e.msg.phase == j, since=start)
                newest = max(self.certs, default=None)
                if newest is not None:
                    v, cert = self.certs[newest]
                    ctx.raw_send(leader, Commit(v, cert, j, ctx.sign(Commit(v, cert, j))))
                elif got:
                    v = got[0].msg.value
                    ctx.raw_send(leader, Vote(v, j, ctx.sign(Vote(v, j))))

            yield ctx.sleep_until(start + 2 * d)
            if leader == me:
                votes = ctx.receive(lambda e: isinstance(e.msg, Vote) and e.msg.phase == j, since=start + d)
                if value is not None:
                    sigs = [e.msg.sig for e in votes if e.msg.value == value and sig_matches(e.msg, ledger, e.frm)]
                    if len({s.signer for s in sigs}) >= q:
                        self.certs[j] = (value, aggregate(sigs, q, n))
                if k == 1 and j in self.certs:
                    v, cert = self.certs[j]
                    c = Commit(v, cert, j, ctx.sign(Commit(v, cert, j)))
                    for to in corrupted + correct[:-1]:
                        ctx.raw_send(to, c)
                elif k is not None and k >= 2 and self.certs:
                    v, cert = self.certs[min(self.certs)]
                    c = Commit(v, cert, j, ctx.sign(Commit(v, cert, j)))
                    for to in range(1, n + 1):
                        ctx.raw_send(to, c)

            yield ctx.sleep_until(start + 3 * d)
            commits = ctx.receive(
                lambda e: isinstance(e.msg, Commit) and e.msg.phase == j and e.frm == leader, since=start + 2 * d
            )
            for env in commits:
                m = env.msg
                if commit_cert_ok(m.value, m.cert, ledger, q):
                    ctx.raw_send(leader, Decide(m.value, j, ctx.sign(Decide(m.value, j))))
                    break

            yield ctx.sleep_until(start + 4 * d)
            if leader == me and k is not None and k >= 2:
                decides = ctx.receive(lambda e: isinstance(e.msg, Decide) and e.msg.phase == j, since=start + 3 * d)
                by_value = {}
                for env in decides:
                    if sig_matches(env.msg, ledger, env.frm):
                        by_value.setdefault(env.msg.value, []).append(env.msg.sig)
                for v in sorted(by_value):
                    if len({s.signer for s in by_value[v]}) >= q:
                        cert = aggregate(by_value[v], q, n)
                        fin = Finalized(v, cert, j, ctx.sign(Finalized(v, cert, j)))
                        ctx.raw_send(correct[-1], fin)
                        break

        yield ctx.sleep_until(sched.help_start)
        req = HelpReq(ctx.sign(HelpReq()))
        for to in range(1, n + 1):
            ctx.raw_send(to, req)


STRATEGIES = {
    cls.name: cls
    for cls in (
        Honest, Crash, CrashAtRound, SilentSender, EquivocatingSender, TwoCommitLeader,
        DecideThenSilence, PartialFallbackDealer, HelpReqSpam, RandomFuzzer,
    )
}


def strategy_catalog(seed: int = 0) -> list[Strategy]:
    return [cls(seed) for cls in STRATEGIES.values()]


def make_strategy(name: str, seed: int = 0) -> Strategy:
    try:
        return STRATEGIES[name](seed)
    except KeyError:
        raise ValueError(f"unknown strategy {name!r}; known: {', '.join(STRATEGIES)}") from None


def forge_attempts(strategy, trace) -> int:
    """ForgeryAttempt errors raised against the adversary during the run."""
    return trace.ledger.forgery_attempts if trace.ledger is not None else trace.forgery_attempts


__all__ = [
    "ByzantineContext", "Strategy", "STRATEGIES", "strategy_catalog", "make_strategy",
    "forge_attempts", "credentials_verify", "carried_credentials", "resign",
] + [cls.__name__ for cls in STRATEGIES.values()]
