"""Safety and liveness assertions over a completed trace."""

from __future__ import annotations

from dataclasses import dataclass, field

from .adversary import carried_credentials, credentials_verify
from .crypto import ThresholdCert
from .encoding import UNDECIDED, encode
from .messages import Decide, FFDecideSig, Idk, statement_of
from .simnet import RunTrace, quorum_size

SAFETY = (
    "agreement", "validity", "unique_finalize", "single_decision", "fallback_sync",
    "no_idk_with_correct_sender", "unique_ff_decide", "credentials",
)


@dataclass
class Report:
    ok: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def set(self, name, ok, detail=""):
        self.ok[name] = bool(ok)
        if not ok:
            self.details[name] = detail

    @property
    def safe(self) -> bool:
        return all(self.ok.get(k, True) for k in SAFETY)

    @property
    def terminated(self) -> bool:
        return self.ok.get("termination", True)

    def violations(self) -> list[str]:
        return [k for k, v in self.ok.items() if not v]

    @property
    def exit_code(self) -> int:
        if not self.safe:
            return 2
        if not self.terminated:
            return 3
        return 0


def _key(v):
    return encode(v)


def verified_certs(trace: RunTrace):
    """Distinct threshold certificates carried by any envelope that verify."""
    seen = {}
    for env in trace.envelopes:
        for c in carried_credentials(env.msg):
            if isinstance(c, ThresholdCert):
                k = encode(c)
                if k not in seen and trace.ledger.verify_cert(c):
                    seen[k] = c
    return list(seen.values())


def finalize_values(trace: RunTrace) -> set:
    q = quorum_size(trace.config.n, trace.config.t)
    out = set()
    for c in verified_certs(trace):
        st = statement_of(c)
        if isinstance(st, Decide) and len(c.signers) >= q:
            out.add(_key(st.value))
    return out


def ff_decide_values(trace: RunTrace) -> set:
    out = set()
    for c in verified_certs(trace):
        st = statement_of(c)
        if isinstance(st, FFDecideSig) and len(c.signers) >= trace.config.n:
            out.add(st.value)
    return out


def idk_cert_possible(trace: RunTrace) -> bool:
    """True if ``t+1`` distinct processes signed the same idk statement."""
    by_digest = {}
    for d, signer in trace.ledger.signed_pairs():
        st = d.statement()
        if isinstance(st, Idk):
            by_digest.setdefault(d, set()).add(signer)
    return any(len(s) >= trace.config.t + 1 for s in by_digest.values())


def check_trace(trace: RunTrace, *, full: bool = True) -> Report:
    cfg = trace.config
    rep = Report()
    correct = trace.correct
    decisions = trace.decisions

    undecided = [p for p in correct if p not in decisions or decisions[p] is UNDECIDED]
    rep.set("termination", not undecided, f"undecided: {undecided}")

    values = {_key(decisions[p]) for p in correct if p in decisions}
    rep.set("agreement", len(values) <= 1, f"{len(values)} distinct decisions")

    counts = {}
    for _, pid, kind, _ in trace.decision_log:
        if pid not in trace.corrupted:
            counts[(pid, kind)] = counts.get((pid, kind), 0) + 1
    multi = [k for k, c in counts.items() if c > 1]
    rep.set("single_decision", not multi, f"changed more than once: {multi}")

    rep.set("validity", *_validity(trace))

    starts = trace.fallback_starts
    if starts:
        missing = [p for p in correct if p not in starts]
        spread = max(starts.values()) - min(starts.values())
        bad = [w for w in trace.window_checks if not w[4]]
        ok = not missing and spread <= cfg.delta and not bad
        rep.set("fallback_sync", ok, f"missing={missing} spread={spread} bad_windows={len(bad)}")
    else:
        rep.set("fallback_sync", True)

    if cfg.protocol in ("weak-ba", "bb"):
        fv = finalize_values(trace)
        rep.set("unique_finalize", len(fv) <= 1, f"{len(fv)} finalize values")
    if cfg.protocol == "bb" and cfg.sender not in trace.corrupted:
        rep.set("no_idk_with_correct_sender", not idk_cert_possible(trace), "idk certificate formable")
    if cfg.protocol == "strong-ff":
        dv = ff_decide_values(trace)
        rep.set("unique_ff_decide", len(dv) <= 1, f"decide certs for {sorted(dv)}")

    if full:
        bad = [
            env.seq for env in trace.envelopes
            if env.frm not in trace.corrupted and not credentials_verify(env.msg, trace.ledger)
        ]
        rep.set("credentials", not bad, f"unverifiable envelopes {bad[:5]}")
    return rep


def _validity(trace: RunTrace):
    cfg = trace.config
    correct = trace.correct
    dec = {p: trace.decisions[p] for p in correct if p in trace.decisions}
    if cfg.protocol == "bb":
        if cfg.sender in trace.corrupted:
            return True, ""
        want = trace.inputs[cfg.sender]
        bad = [p for p, v in dec.items() if v != want]
        return not bad, f"decided other than sender value: {bad}"
    if cfg.protocol == "strong-ff":
        ins = {trace.inputs[p] for p in correct}
        bad = [p for p, v in dec.items() if v not in (0, 1)]
        if len(ins) == 1:
            want = next(iter(ins))
            bad += [p for p, v in dec.items() if v != want]
        return not bad, f"strong unanimity / domain broken at {bad}"
    pred = trace.predicate
    valid = {_key(v) for v in trace.valid_value_ledger if pred(v)}
    bad = []
    for p, v in dec.items():
        if v is None:
            if len(valid) < 2:
                bad.append(p)
        elif not pred(v):
            bad.append(p)
    return not bad, f"unique validity broken at {bad}"
