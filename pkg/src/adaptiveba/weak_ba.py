"""Adaptive weak Byzantine agreement.

``t+1`` leader phases of five rounds each build two levels of quorum
certificates (commit, then finalize) with threshold ``ceil((n+t+1)/2)``.
Processes still undecided afterwards ask for help; ``t+1`` help requests form
a fallback certificate, which is echoed once and followed, after a ``2 delta``
safety window, by the fallback strong BA on stretched rounds.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .crypto import ThresholdCert, aggregate
from .encoding import UNDECIDED, encode
from .messages import (
    Commit, Decide, Fallback, Finalized, Help, HelpReq, Propose, Vote,
    cert_for, sig_matches,
)
from .simnet import INF, quorum_size

PHASE_ROUNDS = 5


@dataclass(frozen=True)
class QuorumParams:
    n: int
    t: int

    @property
    def q(self) -> int:
        return quorum_size(self.n, self.t)

    def intersection_ok(self) -> bool:
        return 2 * self.q - self.n >= self.t + 1 and self.q <= self.n


def leader_of(j: int, n: int) -> int:
    return (j - 1) % n + 1


@dataclass(frozen=True)
class WeakBASchedule:
    start: Fraction
    t: int
    delta: Fraction

    def phase_start(self, j: int) -> Fraction:
        return self.start + (j - 1) * PHASE_ROUNDS * self.delta

    @property
    def help_start(self) -> Fraction:
        return self.phase_start(self.t + 2)

    @property
    def scripted_end(self) -> Fraction:
        return self.help_start + 3 * self.delta


def commit_cert_ok(value, cert, ledger, q) -> bool:
    return cert_for(cert, ledger, Vote, q, value=value)


def finalize_cert_ok(value, cert, ledger, q) -> bool:
    return cert_for(cert, ledger, Decide, q, value=value)


def fallback_cert_ok(cert, ledger, t) -> bool:
    return cert_for(cert, ledger, HelpReq, t + 1)


def cert_phase(cert: ThresholdCert) -> int:
    return cert.statement().phase


def wba_finalize_decision(decision, fallback_val, validate):
    """Post-fallback assignment; decisions taken earlier are kept."""
    if decision is not UNDECIDED:
        return decision
    if fallback_val is not None and validate(fallback_val):
        return fallback_val
    return None


class WeakBA:
    """One weak BA instance as run by one (correct or puppeted) process."""

    def __init__(self, ctx, validate, fallback, start, *, on_decide=None, commit_lock=True):
        self.ctx = ctx
        self.validate = validate
        self.fallback = fallback
        self.schedule = WeakBASchedule(Fraction(start), ctx.t, ctx.delta)
        self.q = quorum_size(ctx.n, ctx.t)
        self.on_decide = on_decide or (lambda d: ctx.decide(d))
        self.commit_lock = commit_lock

        self.v_i = None
        self.decision = UNDECIDED
        self.decide_proof = None
        self.commit = None
        self.commit_proof = None
        self.bu_decision = None
        self.bu_proof = None
        self.fallback_start = INF
        self.fallback_val = None

    # -- helpers --------------------------------------------------------------
    def _set_decision(self, value, proof):
        if self.decision is not UNDECIDED:
            return
        self.decision = value
        self.decide_proof = proof
        self.on_decide(value)

    def _valid(self, v) -> bool:
        ok = self.validate(v)
        if ok:
            self.ctx.note_valid(v)
        return ok

    # -- main -----------------------------------------------------------------
    def run(self, v_i):
        ctx = self.ctx
        self.v_i = v_i
        self.bu_decision = v_i
        self._valid(v_i)
        for j in range(1, ctx.t + 2):
            yield from self.invoke_phase(j)
        yield from self.help_round()
        yield from self.safety_window()
        ctx.mark("wba-fallback")
        self.fallback_val = yield from self.fallback.run(ctx, self.bu_decision, self.fallback_start)
        if self.fallback_val is not None and self.validate(self.fallback_val):
            ctx.note_valid(self.fallback_val)
        if self.decision is UNDECIDED:
            final = wba_finalize_decision(self.decision, self.fallback_val, self.validate)
            self._set_decision(final, None)
        return self.decision

    # -- one phase ------------------------------------------------------------
    def invoke_phase(self, j: int):
        ctx, q, d = self.ctx, self.q, self.ctx.delta
        me, ledger = ctx.pid, ctx.ledger
        leader = leader_of(j, ctx.n)
        start = self.schedule.phase_start(j)

        yield ctx.sleep_until(start)
        ctx.mark(f"ba:{j}")
        if leader == me and self.decision is UNDECIDED:
            msg = Propose(self.v_i, j)
            ctx.broadcast(Propose(self.v_i, j, ctx.sign(msg)))

        # round 2: vote for the leader's value, or report an earlier commit
        yield ctx.sleep_until(start + d)
        got = ctx.receive(
            lambda e: isinstance(e.msg, Propose) and e.msg.phase == j and e.frm == leader,
            since=start,
        )
        got = [e for e in got if sig_matches(e.msg, ledger, leader)]
        if got:
            v = got[0].msg.value
            if self.commit is None and self._valid(v):
                st = Vote(v, j)
                ctx.send(leader, Vote(v, j, ctx.sign(st)))
            elif self.commit is not None:
                st = Commit(self.commit, self.commit_proof, j)
                ctx.send(leader, Commit(self.commit, self.commit_proof, j, ctx.sign(st)))

        # round 3: leader relays a commit certificate or forms one from votes
        yield ctx.sleep_until(start + 2 * d)
        if leader == me:
            self._leader_commit(j, start)

        # round 4: sign decide for the relayed commit
        yield ctx.sleep_until(start + 3 * d)
        got = ctx.receive(
            lambda e: isinstance(e.msg, Commit) and e.msg.phase == j and e.frm == leader,
            since=start + 2 * d,
        )
        for env in got:
            m = env.msg
            if not sig_matches(m, ledger, leader) or not commit_cert_ok(m.value, m.cert, ledger, q):
                continue
            if self.commit_lock and self.commit is not None and self.commit != m.value:
                ctx.mark(f"decide-refused:{j}")
                break
            st = Decide(m.value, j)
            ctx.send(leader, Decide(m.value, j, ctx.sign(st)))
            if self.commit is None:
                self.commit = m.value
                self.commit_proof = m.cert
            break

        # round 5: leader forms the finalize certificate
        yield ctx.sleep_until(start + 4 * d)
        if leader == me:
            decides = ctx.receive(
                lambda e: isinstance(e.msg, Decide) and e.msg.phase == j, since=start + 3 * d
            )
            by_value: dict[bytes, list] = {}
            for env in decides:
                m = env.msg
                if sig_matches(m, ledger, env.frm):
                    by_value.setdefault(encode(m.value), [m.value, []])[1].append(m.sig)
            for key in sorted(by_value):
                value, sigs = by_value[key]
                if len({s.signer for s in sigs}) >= q:
                    cert = aggregate(sigs, q, ctx.n)
                    st = Finalized(value, cert, j)
                    ctx.broadcast(Finalized(value, cert, j, ctx.sign(st)))
                    break

        yield ctx.sleep_until(start + 5 * d)
        got = ctx.receive(
            lambda e: isinstance(e.msg, Finalized) and e.msg.phase == j and e.frm == leader,
            since=start + 4 * d,
        )
        for env in got:
            m = env.msg
            if sig_matches(m, ledger, leader) and finalize_cert_ok(m.value, m.cert, ledger, q):
                self._set_decision(m.value, m.cert)
                break

    def _leader_commit(self, j, start):
        ctx, q, ledger, d = self.ctx, self.q, self.ctx.ledger, self.ctx.delta
        got = ctx.receive(
            lambda e: isinstance(e.msg, (Commit, Vote)) and e.msg.phase == j, since=start + d
        )
        commits, votes = [], {}
        for env in got:
            m = env.msg
            if not sig_matches(m, ledger, env.frm):
                continue
            if isinstance(m, Commit):
                if commit_cert_ok(m.value, m.cert, ledger, q):
                    commits.append(m)
            else:
                votes.setdefault(encode(m.value), [m.value, []])[1].append(m.sig)
        if commits:
            # newest certificate wins; ties by canonical order
            best = max(commits, key=lambda m: (cert_phase(m.cert), encode(m.cert)))
            st = Commit(best.value, best.cert, j)
            ctx.broadcast(Commit(best.value, best.cert, j, ctx.sign(st)))
            return
        for key in sorted(votes):
            value, sigs = votes[key]
            if len({s.signer for s in sigs}) >= q:
                cert = aggregate(sigs, q, ctx.n)
                st = Commit(value, cert, j)
                ctx.broadcast(Commit(value, cert, j, ctx.sign(st)))
                return

    # -- help round -----------------------------------------------------------
    def help_round(self):
        ctx, d, ledger, q = self.ctx, self.ctx.delta, self.ctx.ledger, self.q
        h = self.schedule.help_start
        yield ctx.sleep_until(h)
        ctx.mark("wba-help")
        if self.decision is UNDECIDED:
            ctx.broadcast(HelpReq(ctx.sign(HelpReq())))

        yield ctx.sleep_until(h + d)
        reqs = ctx.receive(lambda e: isinstance(e.msg, HelpReq), since=h)
        reqs = [e for e in reqs if sig_matches(e.msg, ledger, e.frm)]
        if self.decision is not UNDECIDED:
            for env in reqs:
                if env.frm != ctx.pid:
                    st = Help(self.decision, self.decide_proof)
                    ctx.send(env.frm, Help(self.decision, self.decide_proof, ctx.sign(st)))
        if len({e.frm for e in reqs}) >= ctx.t + 1:
            cert = aggregate([e.msg.sig for e in reqs], ctx.t + 1, ctx.n)
            self._broadcast_fallback(cert, self.decision, self.decide_proof)

        yield ctx.sleep_until(h + 2 * d)
        helps = ctx.receive(lambda e: isinstance(e.msg, Help), since=h + d)
        for env in helps:
            m = env.msg
            if self.decision is not UNDECIDED:
                break
            if (
                sig_matches(m, ledger, env.frm)
                and finalize_cert_ok(m.decision, m.proof, ledger, q)
                and self._valid(m.decision)
            ):
                self._set_decision(m.decision, m.proof)

        if self.decision is not UNDECIDED:
            self.bu_decision = self.decision
            self.bu_proof = self.decide_proof

    def _broadcast_fallback(self, cert, decision, proof):
        ctx = self.ctx
        st = Fallback(cert, decision, proof)
        ctx.broadcast(Fallback(cert, decision, proof, ctx.sign(st)))
        self.fallback_start = ctx.now + 2 * ctx.delta
        ctx.mark("wba-fallback-notify")

    def _is_fallback(self, env) -> bool:
        return isinstance(env.msg, Fallback)

    def safety_window(self):
        ctx, ledger, q = self.ctx, self.ctx.ledger, self.q
        while self.fallback_start > ctx.now:
            yield ctx.listen(self.fallback_start, self._is_fallback)
            for env in ctx.receive(self._is_fallback):
                m = env.msg
                if not sig_matches(m, ledger, env.frm) or not fallback_cert_ok(m.cert, ledger, ctx.t):
                    continue
                if (
                    self.decision is UNDECIDED
                    and m.proof is not None
                    and finalize_cert_ok(m.decision, m.proof, ledger, q)
                    and self._valid(m.decision)
                ):
                    self.bu_decision = m.decision
                    self.bu_proof = m.proof
                if self.fallback_start == INF:
                    self._broadcast_fallback(m.cert, self.bu_decision, self.bu_proof)


def wba_main(ctx, v_i, validate, fallback, start=0, **kw):
    """Generator running a full weak BA instance for ``ctx``'s process."""
    inst = WeakBA(ctx, validate, fallback, start, **kw)
    return (yield from inst.run(v_i))


def quorum_intersection_holds(n: int, t: int) -> bool:
    """Brute force: every two Q-subsets of 1..n share at least t+1 members."""
    from itertools import combinations

    q = quorum_size(n, t)
    subsets = [frozenset(c) for c in combinations(range(1, n + 1), q)]
    return all(len(a & b) >= t + 1 for a in subsets for b in subsets)


def max_phases(t: int) -> int:
    return t + 1


def below_fallback_threshold(n: int, t: int, f: int) -> bool:
    return 2 * f < n - t - 1


__all__ = [
    "QuorumParams", "WeakBA", "WeakBASchedule", "leader_of", "wba_main",
    "wba_finalize_decision", "quorum_intersection_holds", "below_fallback_threshold",
    "commit_cert_ok", "finalize_cert_ok", "fallback_cert_ok",
]
