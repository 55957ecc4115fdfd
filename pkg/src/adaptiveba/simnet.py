"""Deterministic discrete-event synchronous network.

Processes are generator functions.  They yield :class:`Sleep` to wait for a
point in time, or :class:`Listen` to wait for either a deadline or the arrival
of a matching message.  Envelopes are appended to the recipient's pending list
at send time, stamped with their delivery time, and become visible once the
recipient's clock reaches that stamp.

Wake-ups are ordered by ``(time, process id, sequence)`` so a run is a pure
function of its configuration and seed.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from .crypto import SignatureLedger
from .encoding import UNDECIDED
from .messages import ProtocolMessage, word_count

INF = math.inf


class NonTermination(RuntimeError):
    """A correct process was still undecided when the horizon ran out."""


class ConfigError(ValueError):
    pass


def as_time(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass
class RunConfig:
    n: int
    t: int
    f: int = 0
    protocol: str = "weak-ba"
    strategy: str = "honest"
    seed: int = 0
    delta: Fraction = Fraction(1)
    fallback: str = "reference"
    predicate: str = "always-true"
    sender: int = 1
    allow_general_n: bool = False
    # sign a decide only for the value already committed to (see README)
    commit_lock: bool = True

    def __post_init__(self):
        self.delta = as_time(self.delta)
        self.validate()

    def validate(self):
        if self.t < 0 or self.n < 1:
            raise ConfigError("need n >= 1 and t >= 0")
        if self.n < 2 * self.t + 1:
            raise ConfigError(f"n={self.n} < 2t+1={2 * self.t + 1}")
        if self.n != 2 * self.t + 1 and not self.allow_general_n:
            raise ConfigError(f"n={self.n} != 2t+1 (pass allow_general_n)")
        if not 0 <= self.f <= self.t:
            raise ConfigError(f"f={self.f} outside 0..t={self.t}")
        if not 1 <= self.sender <= self.n:
            raise ConfigError(f"sender {self.sender} outside 1..n")
        if self.delta <= 0:
            raise ConfigError("delta must be positive")

    @property
    def quorum(self) -> int:
        return quorum_size(self.n, self.t)


def quorum_size(n: int, t: int) -> int:
    return -(-(n + t + 1) // 2)


@dataclass(eq=False)
class Envelope:
    frm: int
    to: int
    msg: ProtocolMessage
    sent_at: Fraction
    deliver_at: Fraction
    seq: int
    words: int


@dataclass
class Sleep:
    until: Fraction


@dataclass
class Listen:
    until: object  # Fraction or INF
    match: Callable[[Envelope], bool]


@dataclass
class RunTrace:
    config: RunConfig
    corrupted: frozenset
    inputs: dict
    events: list = field(default_factory=list)
    words_total: int = 0
    words_by_phase: dict = field(default_factory=dict)
    fallback_triggered: bool = False
    fallback_starts: dict = field(default_factory=dict)
    window_checks: list = field(default_factory=list)
    decisions: dict = field(default_factory=dict)
    inner_decisions: dict = field(default_factory=dict)
    decision_log: list = field(default_factory=list)
    valid_value_ledger: list = field(default_factory=list)
    forgery_attempts: int = 0
    end_time: Fraction = Fraction(0)
    terminated: bool = True
    envelopes: list = field(default_factory=list)
    ledger: Optional[SignatureLedger] = None
    predicate: object = None

    @property
    def correct(self) -> list[int]:
        return [p for p in range(1, self.config.n + 1) if p not in self.corrupted]


def deliver_window_check(recipient_round_start, deliver_at, delta=1) -> bool:
    """Stretched-round acceptance window ``[t_r - delta, t_r + 2 delta]``."""
    t_r, d, delta = as_time(recipient_round_start), as_time(deliver_at), as_time(delta)
    return t_r - delta <= d <= t_r + 2 * delta


def phase_label(msg: ProtocolMessage) -> str:
    from . import messages as m

    if isinstance(msg, (m.HelpReqBB, m.ReplyValue, m.Idk, m.PhaseValue)):
        return f"vet:{msg.phase}"
    if isinstance(msg, (m.Propose, m.Vote, m.Commit, m.Decide, m.Finalized)):
        return f"ba:{msg.phase}"
    if isinstance(msg, (m.HelpReq, m.Help)):
        return "help"
    if isinstance(msg, (m.Fallback, m.FFFallback)):
        return "fallback-setup"
    if isinstance(msg, m.FallbackRelay):
        return "fallback-run"
    if isinstance(msg, m.SenderValue):
        return "init"
    return "ff"


class ProcessContext:
    """The simulator as seen by one correct process."""

    byzantine = False

    def __init__(self, sim: "Simulation", pid: int):
        self.sim = sim
        self.pid = pid
        self.n = sim.config.n
        self.t = sim.config.t
        self.delta = sim.config.delta
        self.ledger = sim.ledger

    @property
    def now(self) -> Fraction:
        return self.sim.now

    # -- signing and sending ------------------------------------------------
    def sign(self, payload):
        return self.ledger.sign(self.pid, payload)

    def send(self, to: int, msg: ProtocolMessage):
        self.sim.transmit(self.pid, to, msg, None)

    def broadcast(self, msg: ProtocolMessage):
        """Deliver to every process; the copy to self is immediate and free."""
        for to in range(1, self.n + 1):
            self.send(to, msg)

    # -- receiving ------------------------------------------------------------
    def receive(self, match, since=None) -> list[Envelope]:
        return self.sim.consume(self.pid, match, since)

    def sleep_until(self, when) -> Sleep:
        return Sleep(as_time(when))

    def listen(self, until, match) -> Listen:
        return Listen(until, match)

    # -- bookkeeping ----------------------------------------------------------
    def mark(self, label: str):
        self.sim.log(self.pid, "mark", label)

    def decide(self, value, kind: str = "decide"):
        self.sim.record_decision(self.pid, value, kind)

    def note_valid(self, value):
        self.sim.note_valid(value)

    def fallback_started(self, start):
        self.sim.record_fallback_start(self.pid, start)

    def window_check(self, env: Envelope, round_start) -> bool:
        ok = deliver_window_check(round_start, env.deliver_at, self.delta)
        if env.frm not in self.sim.corrupted and env.frm != self.pid:
            self.sim.trace.window_checks.append((self.pid, env.frm, round_start, env.deliver_at, ok))
        return ok


class Simulation:
    def __init__(self, config: RunConfig, corrupted, strategy, horizon):
        self.config = config
        self.corrupted = frozenset(corrupted)
        self.strategy = strategy
        self.ledger = SignatureLedger(config.n, self.corrupted)
        self.now = Fraction(0)
        self.horizon = as_time(horizon)
        self._heap: list = []
        self._seq = 0
        self._pending: dict[int, list[Envelope]] = {p: [] for p in range(1, config.n + 1)}
        self._procs: dict[int, object] = {}
        self._waits: dict[int, object] = {}
        self._tokens: dict[int, int] = {}
        self._valid_seen: dict[bytes, object] = {}
        self.trace: Optional[RunTrace] = None
        self.shared: dict = {}

    # -- process management -------------------------------------------------
    def spawn(self, pid: int, gen):
        self._procs[pid] = gen
        self._push(self.now, pid)

    def _push(self, when, pid):
        self._seq += 1
        token = self._tokens.get(pid, 0)
        heapq.heappush(self._heap, (when, pid, self._seq, token))

    def _park(self, pid, wait):
        self._tokens[pid] = self._tokens.get(pid, 0) + 1
        self._waits[pid] = wait
        if isinstance(wait, Sleep):
            self._push(max(wait.until, self.now), pid)
            return
        if self._has_match(pid, wait.match, due_only=True):
            self._push(self.now, pid)
            return
        for env in self._pending[pid]:
            if env.deliver_at > self.now and wait.match(env):
                self._push(env.deliver_at, pid)
        if wait.until != INF:
            self._push(max(as_time(wait.until), self.now), pid)

    def _has_match(self, pid, match, due_only):
        now = self.now
        return any((not due_only or e.deliver_at <= now) and match(e) for e in self._pending[pid])

    def _resume(self, pid):
        gen = self._procs.get(pid)
        if gen is None:
            return
        self._waits.pop(pid, None)
        try:
            wait = next(gen)
        except StopIteration:
            self._procs.pop(pid, None)
            return
        self._park(pid, wait)

    def run(self):
        while self._heap:
            when, pid, _seq, token = heapq.heappop(self._heap)
            if token != self._tokens.get(pid, 0) or pid not in self._procs:
                continue
            if when > self.horizon:
                self.trace.terminated = False
                break
            self.now = when
            self._resume(pid)
        self.trace.end_time = self.now

    # -- network --------------------------------------------------------------
    def transmit(self, frm: int, to: int, msg: ProtocolMessage, delay):
        if to == frm:
            deliver_at = self.now
        else:
            if delay is None:
                delay = self.strategy.link_delay(self, frm, to, msg)
            delay = as_time(delay)
            if not 0 < delay <= self.config.delta:
                raise ValueError(f"delay {delay} outside (0, delta]")
            deliver_at = self.now + delay
        self._seq += 1
        words = word_count(msg)
        env = Envelope(frm, to, msg, self.now, deliver_at, self._seq, words)
        self._pending[to].append(env)
        tr = self.trace
        tr.envelopes.append(env)
        if frm not in self.corrupted and to != frm:
            tr.words_total += words
            label = phase_label(msg)
            tr.words_by_phase[label] = tr.words_by_phase.get(label, 0) + words
        wait = self._waits.get(to)
        if isinstance(wait, Listen) and to != frm and wait.match(env):
            self._push(deliver_at, to)
        return env

    def consume(self, pid: int, match, since=None) -> list[Envelope]:
        now = self.now
        keep, got = [], []
        for env in self._pending[pid]:
            if env.deliver_at <= now and (since is None or env.deliver_at >= since) and match(env):
                got.append(env)
            else:
                keep.append(env)
        self._pending[pid] = keep
        got.sort(key=lambda e: (e.deliver_at, e.seq))
        seen, out = set(), []
        for env in got:
            key = (env.frm, env.msg.slot_key())
            if key in seen:
                self.log(pid, "duplicate", env.msg.kind)
                continue
            seen.add(key)
            out.append(env)
        return out

    def peek_inbox(self, pid: int) -> list[Envelope]:
        """Everything delivered to ``pid`` so far (adversary view)."""
        return [e for e in self._pending[pid] if e.deliver_at <= self.now]

    # -- bookkeeping ----------------------------------------------------------
    def log(self, pid, kind, detail):
        self.trace.events.append((self.now, pid, kind, detail))

    def record_decision(self, pid, value, kind):
        self.trace.decision_log.append((self.now, pid, kind, value))
        self.log(pid, kind, value)
        if pid in self.corrupted:
            return
        if kind == "decide":
            self.trace.decisions[pid] = value
        else:
            self.trace.inner_decisions[pid] = value

    def note_valid(self, value):
        from .encoding import encode

        key = encode(value)
        if key not in self._valid_seen:
            self._valid_seen[key] = value
            self.trace.valid_value_ledger.append(value)

    def record_fallback_start(self, pid, start):
        self.log(pid, "fallback-start", start)
        if pid not in self.corrupted:
            self.trace.fallback_triggered = True
            self.trace.fallback_starts[pid] = start


def undecided_map(n, corrupted):
    return {p: UNDECIDED for p in range(1, n + 1) if p not in corrupted}
