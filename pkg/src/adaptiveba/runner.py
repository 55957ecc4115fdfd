"""Assemble and execute one simulated run."""

from __future__ import annotations

import random
from fractions import Fraction

from .adversary import ByzantineContext, Strategy, make_strategy
from .bb import bb_main, wba_start
from .crypto import SignatureLedger, aggregate
from .fallback import make_fallback
from .messages import BBInput, Endorse, QuorumValue, SenderSigned, make_predicate
from .simnet import ConfigError, NonTermination, ProcessContext, RunConfig, RunTrace, Simulation
from .strong_ff import ff_main
from .weak_ba import PHASE_ROUNDS, wba_main

PROTOCOLS = ("bb", "weak-ba", "strong-ff")
INPUT_POOL = (b"value-0", b"value-1")


def scripted_end(config: RunConfig) -> Fraction:
    """Time by which the scripted (pre-fallback) part of a run is over."""
    d, t = config.delta, config.t
    if config.protocol == "strong-ff":
        return 5 * d
    wba = (t + 1) * PHASE_ROUNDS * d + 3 * d
    if config.protocol == "bb":
        return wba_start(config.n, d) + wba
    return wba


def horizon(config: RunConfig) -> Fraction:
    spec = make_fallback(config.fallback)
    return scripted_end(config) + 4 * config.delta + spec.duration(config.n, config.t, config.delta) + 20 * config.delta


def default_inputs(config: RunConfig) -> dict:
    """Seeded inputs: the sender's value for BB, one value per process otherwise."""
    rng = random.Random(f"inputs:{config.protocol}:{config.seed}")
    n = config.n
    if config.protocol == "bb":
        return {config.sender: rng.randbytes(8)}
    if config.protocol == "strong-ff":
        return {p: rng.randint(0, 1) for p in range(1, n + 1)}
    return {p: rng.choice(INPUT_POOL) for p in range(1, n + 1)}


def wrap_inputs(config: RunConfig, raw: dict, ledger: SignatureLedger) -> dict:
    """Turn raw weak-BA payloads into values the configured predicate accepts."""
    if config.protocol != "weak-ba" or config.predicate == "always-true":
        return dict(raw)
    out, made = {}, {}
    for p, payload in sorted(raw.items()):
        if payload not in made:
            if config.predicate == "signed-by-quorum":
                sigs = [ledger.sign(s, Endorse(payload)) for s in range(1, config.n - config.t + 1)]
                made[payload] = QuorumValue(payload, aggregate(sigs, config.n - config.t, config.n))
            else:
                made[payload] = SenderSigned(payload, ledger.sign(config.sender, BBInput(payload)))
        out[p] = made[payload]
    return out


def run(config: RunConfig, inputs: dict | None = None, strategy: Strategy | None = None, *,
        require_termination: bool = True) -> RunTrace:
    """Execute one run.  Raises NonTermination (carrying ``.trace``) if a correct
    process is still undecided once the horizon has passed."""
    if config.protocol not in PROTOCOLS:
        raise ConfigError(f"unknown protocol {config.protocol!r}")
    strategy = strategy or make_strategy(config.strategy, config.seed)
    strategy.bind(config)
    corrupted = frozenset(strategy.corrupt_choice(config.n, config.t, config.f, config))
    if len(corrupted) != config.f:
        raise ConfigError(f"strategy {strategy.name} corrupted {len(corrupted)} ids, wanted {config.f}")

    sim = Simulation(config, corrupted, strategy, horizon(config))
    raw = dict(default_inputs(config) if inputs is None else inputs)
    values = wrap_inputs(config, raw, sim.ledger)
    trace = RunTrace(config, corrupted, values)
    sim.trace = trace
    fb = make_fallback(config.fallback)
    predicate = make_predicate(
        "bb-valid" if config.protocol == "bb" else config.predicate,
        n=config.n, t=config.t, sender=config.sender, ledger=sim.ledger,
    )
    trace.predicate = predicate

    for pid in range(1, config.n + 1):
        byz = pid in corrupted
        ctx = ByzantineContext(sim, pid, strategy) if byz else ProcessContext(sim, pid)
        v = values.get(pid)
        if byz:
            v = strategy.byzantine_input(pid, v)

        def honest(ctx=ctx, v=v):
            if config.protocol == "weak-ba":
                return wba_main(ctx, v, predicate, fb, 0, commit_lock=config.commit_lock)
            if config.protocol == "bb":
                return bb_main(ctx, config.sender, v, predicate, fb, commit_lock=config.commit_lock)
            return ff_main(ctx, v, fb)

        sim.spawn(pid, strategy.program(ctx, honest) if byz else honest())

    sim.run()
    trace.ledger = sim.ledger
    trace.forgery_attempts = sim.ledger.forgery_attempts
    undecided = [p for p in trace.correct if p not in trace.decisions]
    if undecided and require_termination:
        err = NonTermination(f"undecided at horizon {sim.horizon}: {undecided}")
        err.trace = trace
        raise err
    return trace


def run_config(**kw) -> RunTrace:
    inputs = kw.pop("inputs", None)
    return run(RunConfig(**kw), inputs)
