"""Word accounting and adaptive-cost fits."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .checks import Report, check_trace
from .encoding import UNDECIDED
from .simnet import RunTrace, phase_label

CSV_COLUMNS = (
    "protocol", "n", "t", "f", "strategy", "seed", "words_total", "words_help", "words_fallback",
    "fallback_triggered", "decided_values", "agreement_ok", "validity_ok", "unique_finalize_ok",
)


class DegenerateSweep(ValueError):
    """Fewer than two distinct ``f`` values in a sweep."""


class AdaptiveFit(NamedTuple):
    slope: float
    intercept: float
    max_ratio: float


def words_of_trace(trace: RunTrace) -> int:
    """Words sent by correct processes to others."""
    return sum(e.words for e in trace.envelopes if e.frm not in trace.corrupted and e.to != e.frm)


def words_by_phase(trace: RunTrace) -> dict:
    out = {}
    for e in trace.envelopes:
        if e.frm in trace.corrupted or e.to == e.frm:
            continue
        label = phase_label(e.msg)
        out[label] = out.get(label, 0) + e.words
    return out


def silent_phases(trace: RunTrace, prefix: str, count: int) -> list[int]:
    """Indices ``1..count`` of ``prefix:j`` phases with no correct words."""
    by = words_by_phase(trace)
    return [j for j in range(1, count + 1) if by.get(f"{prefix}:{j}", 0) == 0]


def adaptive_fit(sweep, n: int) -> AdaptiveFit:
    """Least-squares line of words against ``f``, plus ``max words / (n (f+1))``."""
    pts = [(int(f), float(w)) for f, w in sweep]
    if len({f for f, _ in pts}) < 2:
        raise DegenerateSweep("need at least two distinct f values")
    x = np.array([f for f, _ in pts], dtype=float)
    y = np.array([w for _, w in pts])
    a = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(a, y, rcond=None)
    ratio = max(w / (n * (f + 1)) for f, w in pts)
    return AdaptiveFit(float(slope), float(intercept), float(ratio))


def linear_r2(sweep) -> float:
    """R^2 of the linear fit; exactly 1 when the words do not vary at all."""
    x = np.array([f for f, _ in sweep], dtype=float)
    y = np.array([w for _, w in sweep], dtype=float)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0:
        return 1.0
    a = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    ss_res = float(((y - a @ coef) ** 2).sum())
    return 1.0 - ss_res / ss_tot


def _show(v) -> str:
    if v is None:
        return "bot"
    if v is UNDECIDED:
        return "undecided"
    if isinstance(v, bytes):
        return v.hex()
    if hasattr(v, "value") and isinstance(v.value, bytes):
        return v.value.hex()
    return str(v)


def csv_row(trace: RunTrace, report: Report | None = None) -> dict:
    cfg = trace.config
    report = report or check_trace(trace)
    by = words_by_phase(trace)
    decided = sorted({_show(trace.decisions[p]) for p in trace.correct if p in trace.decisions})
    return {
        "protocol": cfg.protocol,
        "n": cfg.n,
        "t": cfg.t,
        "f": cfg.f,
        "strategy": cfg.strategy,
        "seed": cfg.seed,
        "words_total": words_of_trace(trace),
        "words_help": by.get("help", 0),
        "words_fallback": by.get("fallback-setup", 0) + by.get("fallback-run", 0),
        "fallback_triggered": str(trace.fallback_triggered).lower(),
        "decided_values": ";".join(decided),
        "agreement_ok": str(report.ok.get("agreement", True)).lower(),
        "validity_ok": str(report.ok.get("validity", True)).lower(),
        "unique_finalize_ok": str(report.ok.get("unique_finalize", True)).lower(),
    }


def row_sort_key(row: dict):
    return (int(row["n"]), int(row["t"]), int(row["f"]), row["strategy"], int(row["seed"]))
