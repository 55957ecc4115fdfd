"""Strong BA used as the quadratic fallback.

:class:`ReferenceFallback` runs one authenticated broadcast per process in
parallel over ``t+1`` stretched rounds.  A value for slot ``s`` is accepted in
round ``r`` only with a chain of ``r`` distinct signatures starting with
``s``; once every broadcast has resolved each process applies
:func:`decision_rule`.  It is correct for ``n = 2t+1`` but not word-optimal.

:class:`OracleFallback` is a simulator-level cheat with the same decision
rule, used to tell caller bugs from fallback bugs.
"""

from __future__ import annotations

from fractions import Fraction

from .crypto import digest
from .encoding import encode
from .messages import FallbackInput, FallbackRelay


def decision_rule(resolved: dict):
    """Plurality over resolved slot values; unresolved slots are ``None``.

    Ties go to the smallest value in canonical-encoding order and an all-``None``
    input yields ``None``.
    """
    counts: dict[bytes, list] = {}
    for slot in sorted(resolved):
        v = resolved[slot]
        if v is None:
            continue
        key = encode(v)
        if key in counts:
            counts[key][0] += 1
        else:
            counts[key] = [1, v]
    if not counts:
        return None
    best = max(c for c, _ in counts.values())
    return counts[min(k for k, (c, _) in counts.items() if c == best)][1]


class FallbackSpec:
    """Contract for a fallback strong BA run inside a simulated process."""

    name = "abstract"

    def rounds(self, n: int, t: int) -> int:
        raise NotImplementedError

    def round_len(self, delta) -> Fraction:
        return 2 * delta

    def duration(self, n, t, delta) -> Fraction:
        return self.rounds(n, t) * self.round_len(delta)

    def run(self, ctx, value, start):
        """Generator; starts at local time ``start`` and returns the decision."""
        raise NotImplementedError


class ReferenceFallback(FallbackSpec):
    name = "reference"

    def rounds(self, n, t):
        return t + 1

    def run(self, ctx, value, start):
        n, t, me, ledger = ctx.n, ctx.t, ctx.pid, ctx.ledger
        length = self.round_len(ctx.delta)
        last = self.rounds(n, t)
        ctx.fallback_started(start)
        extracted: dict[int, list] = {s: [] for s in range(1, n + 1)}
        outgoing = []

        yield ctx.sleep_until(start)
        own = FallbackInput(me, value)
        outgoing.append(FallbackRelay(1, me, value, (ctx.sign(own),)))
        extracted[me].append(value)

        for r in range(1, last + 1):
            t_r = start + (r - 1) * length
            yield ctx.sleep_until(t_r)
            for msg in outgoing:
                ctx.broadcast(msg)
            outgoing = []
            yield ctx.sleep_until(t_r + length)
            got = ctx.receive(lambda e, r=r: isinstance(e.msg, FallbackRelay) and e.msg.round == r)
            for env in got:
                if not ctx.window_check(env, t_r):
                    continue
                msg = env.msg
                if not self._chain_ok(msg, r, ledger, n):
                    continue
                vals = extracted[msg.slot]
                if msg.value in vals or len(vals) >= 2:
                    continue
                vals.append(msg.value)
                if r < last and all(s.signer != me for s in msg.chain):
                    sig = ctx.sign(FallbackInput(msg.slot, msg.value))
                    outgoing.append(FallbackRelay(r + 1, msg.slot, msg.value, msg.chain + (sig,)))

        resolved = {s: (vals[0] if len(vals) == 1 else None) for s, vals in extracted.items()}
        return decision_rule(resolved)

    @staticmethod
    def _chain_ok(msg: FallbackRelay, r: int, ledger, n) -> bool:
        chain = msg.chain
        if not isinstance(chain, tuple) or len(chain) != r or not 1 <= msg.slot <= n:
            return False
        if chain[0].signer != msg.slot:
            return False
        if len({s.signer for s in chain}) != r:
            return False
        want = FallbackInput(msg.slot, msg.value)
        d = digest(want)
        return all(s.digest == d and ledger.verify(s) for s in chain)


class OracleFallback(FallbackSpec):
    """Reveals every correct input atomically and applies :func:`decision_rule`."""

    name = "oracle"

    def rounds(self, n, t):
        return 1

    def run(self, ctx, value, start):
        ctx.fallback_started(start)
        yield ctx.sleep_until(start)
        board = ctx.sim.shared.setdefault("oracle-inputs", {})
        if not ctx.byzantine:
            board[ctx.pid] = value
        yield ctx.sleep_until(start + self.duration(ctx.n, ctx.t, ctx.delta))
        resolved = {s: board.get(s) for s in range(1, ctx.n + 1)}
        return decision_rule(resolved)


FALLBACKS = {"reference": ReferenceFallback, "oracle": OracleFallback}


def make_fallback(name: str) -> FallbackSpec:
    try:
        return FALLBACKS[name]()
    except KeyError:
        raise ValueError(f"unknown fallback {name!r}") from None


def fallback_run(inputs: dict, round_len=None, *, t=None, fallback="reference", starts=None,
                 delta=Fraction(1)):
    """Run the fallback alone over ``inputs`` (process id -> value).

    ``round_len`` overrides ``delta`` as ``round_len / 2``.  ``starts``
    optionally staggers local start times (each within ``delta`` of the
    earliest).  Returns ``(decisions, trace)``.
    """
    from .adversary import Honest
    from .simnet import ProcessContext, RunConfig, RunTrace, Simulation

    if round_len is not None:
        delta = Fraction(round_len) / 2
    n = len(inputs)
    if t is None:
        t = (n - 1) // 2
    cfg = RunConfig(n=n, t=t, delta=delta, allow_general_n=True, protocol="fallback", fallback=fallback)
    spec = make_fallback(fallback)
    sim = Simulation(cfg, (), Honest(0), horizon=10 * delta + 2 * spec.duration(n, t, delta))
    sim.trace = RunTrace(cfg, frozenset(), dict(inputs))

    starts = starts or {}
    for pid in sorted(inputs):
        ctx = ProcessContext(sim, pid)

        def prog(ctx=ctx, pid=pid):
            d = yield from spec.run(ctx, inputs[pid], Fraction(starts.get(pid, 0)))
            ctx.decide(d)

        sim.spawn(pid, prog())
    sim.run()
    return dict(sim.trace.decisions), sim.trace


def reference_fallback(inputs: dict, **kw):
    return fallback_run(inputs, fallback="reference", **kw)[0]
