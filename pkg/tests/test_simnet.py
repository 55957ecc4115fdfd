from fractions import Fraction

import pytest

from adaptiveba import ConfigError, RunConfig, run, run_config
from adaptiveba.adversary import Honest, Strategy
from adaptiveba.messages import Fallback, HelpReq, Vote
from adaptiveba.simnet import (
    INF, ProcessContext, RunTrace, Simulation, deliver_window_check, phase_label, quorum_size,
)


def make_sim(n=3, t=1, corrupted=(), strategy=None, horizon=100):
    cfg = RunConfig(n=n, t=t, f=len(corrupted), allow_general_n=True)
    sim = Simulation(cfg, corrupted, strategy or Honest(), horizon)
    sim.trace = RunTrace(cfg, frozenset(corrupted), {})
    return sim, [ProcessContext(sim, p) for p in range(1, n + 1)]


def test_config_validation():
    with pytest.raises(ConfigError):
        RunConfig(n=5, t=2, f=3)
    with pytest.raises(ConfigError):
        RunConfig(n=6, t=2)
    assert RunConfig(n=6, t=2, allow_general_n=True).quorum == 5
    with pytest.raises(ConfigError):
        RunConfig(n=3, t=2, allow_general_n=True)
    with pytest.raises(ConfigError):
        RunConfig(n=3, t=1, delta=0)
    with pytest.raises(ConfigError):
        RunConfig(n=3, t=1, sender=4)


@pytest.mark.parametrize("n,t,q", [(3, 1, 3), (5, 2, 4), (7, 3, 6), (9, 4, 7)])
def test_quorum_size(n, t, q):
    assert quorum_size(n, t) == q


@pytest.mark.parametrize("deliver_at,ok", [(Fraction(19, 2), True), (12, True), (Fraction(121, 10), False), (9, True),
                                           (Fraction(89, 10), False)])
def test_deliver_window(deliver_at, ok):
    assert deliver_window_check(10, deliver_at) is ok


def test_broadcast_costs_n_minus_one_and_self_delivery_is_immediate():
    sim, ctx = make_sim(n=5, t=2)
    seen = {}

    def sender():
        yield ctx[0].sleep_until(0)
        ctx[0].broadcast(HelpReq(ctx[0].sign(HelpReq())))
        seen["self"] = [e.deliver_at for e in ctx[0].receive(lambda e: True)]

    def receiver(c):
        yield c.sleep_until(1)
        seen[c.pid] = [e.deliver_at for e in c.receive(lambda e: True)]

    sim.spawn(1, sender())
    for c in ctx[1:]:
        sim.spawn(c.pid, receiver(c))
    sim.run()
    assert sim.trace.words_total == 4
    assert len(sim.trace.envelopes) == 5
    assert seen["self"] == [0]
    assert all(seen[p] == [1] for p in range(2, 6))


def test_byzantine_sends_are_free():
    sim, ctx = make_sim(n=3, t=1, corrupted=(3,))

    def prog():
        yield ctx[2].sleep_until(0)
        ctx[2].broadcast(HelpReq(ctx[2].sign(HelpReq())))

    sim.spawn(3, prog())
    sim.run()
    assert sim.trace.words_total == 0 and len(sim.trace.envelopes) == 3


def test_duplicates_are_suppressed():
    sim, ctx = make_sim()
    got = []
    vote = Vote(b"v", 1, ctx[0].sign(Vote(b"v", 1)))

    def a():
        yield ctx[0].sleep_until(0)
        ctx[0].send(2, vote)
        ctx[0].send(2, vote)

    def b():
        yield ctx[1].sleep_until(1)
        got.extend(ctx[1].receive(lambda e: True))

    sim.spawn(1, a())
    sim.spawn(2, b())
    sim.run()
    assert len(got) == 1
    assert any(ev[2] == "duplicate" for ev in sim.trace.events)


def test_listen_wakes_on_arrival_and_deadline():
    sim, ctx = make_sim()
    woke = []
    match = lambda e: isinstance(e.msg, Fallback)  # noqa: E731

    def listener():
        yield ctx[1].listen(INF, lambda e: isinstance(e.msg, HelpReq))
        woke.append(ctx[1].now)
        yield ctx[1].listen(7, match)
        woke.append(ctx[1].now)

    def talker():
        yield ctx[0].sleep_until(3)
        ctx[0].send(2, HelpReq(ctx[0].sign(HelpReq())))

    sim.spawn(2, listener())
    sim.spawn(1, talker())
    sim.run()
    assert woke == [4, 7]


def test_since_cursor_excludes_earlier_deliveries():
    sim, ctx = make_sim()
    got = []

    def a():
        yield ctx[0].sleep_until(0)
        ctx[0].send(2, HelpReq(ctx[0].sign(HelpReq())))

    def b():
        yield ctx[1].sleep_until(5)
        got.extend(ctx[1].receive(lambda e: True, since=2))

    sim.spawn(1, a())
    sim.spawn(2, b())
    sim.run()
    assert got == []


class TooSlow(Strategy):
    name = "too-slow"

    def link_delay(self, sim, frm, to, msg):
        return 2 * sim.config.delta


def test_delays_beyond_delta_are_rejected():
    sim, ctx = make_sim(strategy=TooSlow())

    def a():
        yield ctx[0].sleep_until(0)
        ctx[0].send(2, HelpReq(ctx[0].sign(HelpReq())))

    sim.spawn(1, a())
    with pytest.raises(ValueError):
        sim.run()


def test_phase_labels(messages):
    labels = {type(m).__name__: phase_label(m) for m in messages}
    assert labels["Vote"] == "ba:1" and labels["Idk"] == "vet:1"
    assert labels["Help"] == "help" and labels["Fallback"] == "fallback-setup"
    assert labels["FallbackRelay"] == "fallback-run" and labels["FFInput"] == "ff"
    assert labels["SenderValue"] == "init"


def test_small_runs():
    tr = run_config(n=3, t=1, protocol="strong-ff", inputs={1: 1, 2: 1, 3: 1})
    assert tr.decisions == {1: 1, 2: 1, 3: 1} and not tr.fallback_triggered
    tr = run_config(n=3, t=1, protocol="bb", inputs={1: b"hello"})
    assert set(tr.decisions.values()) == {b"hello"}


def test_runs_are_deterministic():
    def fingerprint(tr):
        return [(e.frm, e.to, e.sent_at, e.deliver_at, e.msg) for e in tr.envelopes], tr.events

    cfg = dict(n=7, t=3, f=3, protocol="weak-ba", strategy="random-fuzzer", seed=11)
    assert fingerprint(run_config(**cfg)) == fingerprint(run_config(**cfg))


def test_words_total_matches_envelopes():
    tr = run(RunConfig(n=7, t=3, f=2, protocol="bb", strategy="random-fuzzer", seed=3))
    assert tr.words_total == sum(e.words for e in tr.envelopes if e.frm not in tr.corrupted and e.to != e.frm)
    assert sum(tr.words_by_phase.values()) == tr.words_total
