"""Acceptance criteria 1-10 over the full seeded grid.

Each test prints one ``PASS``/``FAIL`` line; the lines are repeated in the
pytest terminal summary.  The grid is n in {3, 5, 7, 9}, f in 0..t, every
catalog strategy and 100 seeds per cell, for each of the three protocols.
"""

from __future__ import annotations

import itertools
import math
import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE_LINES  # noqa: E402

from adaptiveba import STRATEGIES, RunConfig, run  # noqa: E402
from adaptiveba.checks import check_trace  # noqa: E402
from adaptiveba.metrics import adaptive_fit, linear_r2, DegenerateSweep  # noqa: E402
from adaptiveba.simnet import quorum_size  # noqa: E402
from adaptiveba.weak_ba import below_fallback_threshold  # noqa: E402

GRID_N = (3, 5, 7, 9)
SEEDS = 100

# Hand-traced word counts, frozen.  Failure-free: strong-ff 4(n-1), weak BA
# 5(n-1), BB 6(n-1).  With the f lowest ids crashed below the fallback
# threshold: weak BA 5(n-1) - 2f; BB 8(n-1) - 3f for f >= 1 (the crashed
# sender forces one vetting phase and an idk certificate).
FAILURE_FREE = {"strong-ff": lambda n: 4 * (n - 1), "weak-ba": lambda n: 5 * (n - 1),
                "bb": lambda n: 6 * (n - 1)}
CRASH_WORDS = {"weak-ba": lambda n, f: 5 * (n - 1) - 2 * f,
               "bb": lambda n, f: 6 * (n - 1) if f == 0 else 8 * (n - 1) - 3 * f}
# Fixed before running any sweep: every phase a correct process joins costs at
# most 9(n-1) words in total, plus at most 6(n-1) per corrupted leader, so
# words <= 9(n-1) + 6f(n-1) <= 9 n (f+1).
C_ADAPTIVE = 9


def report(num: int, ok: bool, detail: str):
    line = f"{'PASS' if ok else 'FAIL'} criterion {num:>2}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _summary(proto, n, f, strategy, seed):
    t = (n - 1) // 2
    cfg = RunConfig(n=n, t=t, f=f, protocol=proto, strategy=strategy, seed=seed)
    inputs = None
    if proto == "strong-ff":
        inputs = {p: seed % 2 for p in range(1, n + 1)}
    tr = run(cfg, inputs, require_termination=False)
    rep = check_trace(tr)
    return {
        "proto": proto, "n": n, "t": t, "f": f, "strategy": strategy, "seed": seed,
        "ok": dict(rep.ok), "words": tr.words_total,
        "fallback": tr.fallback_triggered, "ran_fallback": bool(tr.fallback_starts),
        "sender_correct": cfg.sender not in tr.corrupted,
    }


def _grid(proto):
    for n in GRID_N:
        for f in range((n - 1) // 2 + 1):
            for s in sorted(STRATEGIES):
                for seed in range(SEEDS):
                    yield proto, n, f, s, seed


@pytest.fixture(scope="module")
def grid():
    out = {}
    for proto in ("bb", "weak-ba", "strong-ff"):
        t0 = time.perf_counter()
        out[proto] = [_summary(*job) for job in _grid(proto)]
        print(f"{proto}: {len(out[proto])} runs in {time.perf_counter() - t0:.1f}s")
    return out


def _bad(rows, *keys):
    return [r for r in rows if not all(r["ok"].get(k, True) for k in keys)]


def _where(rows):
    return "" if not rows else f"; first {[(r['n'], r['f'], r['strategy'], r['seed']) for r in rows[:3]]}"


def test_criterion_01_bb_validity_agreement_termination(grid):
    rows = grid["bb"]
    bad = _bad(rows, "agreement", "termination", "validity")
    with_sender = sum(r["sender_correct"] for r in rows)
    report(1, not bad, f"BB {len(rows)} runs ({with_sender} with correct sender), "
                       f"{len(bad)} violations{_where(bad)}")


def test_criterion_02_no_fallback_below_threshold(grid):
    rows = [r for p in ("weak-ba", "bb") for r in grid[p]
            if below_fallback_threshold(r["n"], r["t"], r["f"])]
    bad = [r for r in rows if r["fallback"]]
    report(2, not bad, f"{len(rows)} weak-BA/BB runs below threshold, {len(bad)} triggered fallback{_where(bad)}")


def test_criterion_03_adaptive_words():
    worst, parts, bad = 0.0, [], []
    for proto in ("weak-ba", "bb"):
        for n in GRID_N:
            t = (n - 1) // 2
            fs = [f for f in range(t + 1) if below_fallback_threshold(n, t, f)]
            pts = []
            for f in fs:
                det = run(RunConfig(n=n, t=t, f=f, protocol=proto, strategy="crash")).words_total
                if det != CRASH_WORDS[proto](n, f):
                    bad.append((proto, n, f, "crash", det))
                pts.append((f, det))
                for seed in range(SEEDS):
                    w = run(RunConfig(n=n, t=t, f=f, protocol=proto, strategy="crash-at-round",
                                      seed=seed)).words_total
                    worst = max(worst, w / (n * (f + 1)))
                    if w > C_ADAPTIVE * n * (f + 1):
                        bad.append((proto, n, f, seed, w))
            worst = max(worst, max(w / (n * (f + 1)) for f, w in pts))
            try:
                fit = adaptive_fit(pts, n)
                r2 = linear_r2(pts)
                if r2 < 0.99:
                    bad.append((proto, n, "r2", r2))
                parts.append(f"{proto} n={n} slope={fit.slope:.0f} r2={r2:.3f}")
            except DegenerateSweep:
                parts.append(f"{proto} n={n} single f (r2 n/a)")
    report(3, not bad, f"c={C_ADAPTIVE}, max words/(n(f+1))={worst:.2f}, {len(bad)} violations{'' if not bad else f' {bad[:3]}'}; "
                       + "; ".join(parts))


def test_criterion_04_failure_free_counts():
    bad = []
    for proto, want in FAILURE_FREE.items():
        for n in GRID_N:
            tr = run(RunConfig(n=n, t=(n - 1) // 2, protocol=proto))
            if tr.words_total != want(n):
                bad.append((proto, n, tr.words_total, want(n)))
    report(4, not bad, f"strong-ff 4(n-1), BB 6(n-1), weak BA 5(n-1) for n in {GRID_N}: "
                       f"{len(bad)} mismatches {bad}")


def test_criterion_05_quorum_intersection():
    t0 = time.perf_counter()
    checked, bad = 0, []
    for n in range(1, 10, 2):
        t = (n - 1) // 2
        q = quorum_size(n, t)
        assert q == math.ceil((n + t + 1) / 2)
        subsets = [frozenset(c) for c in itertools.combinations(range(n), q)]
        for a, b in itertools.combinations_with_replacement(subsets, 2):
            checked += 1
            if len(a & b) < t + 1:
                bad.append((n, sorted(a), sorted(b)))
    took = time.perf_counter() - t0
    report(5, not bad and took < 1, f"{checked} quorum pairs for n=1..9, {len(bad)} short intersections, {took:.3f}s")


def test_criterion_06_unique_finalize(grid):
    rows = grid["weak-ba"]
    bad = _bad(rows, "unique_finalize")
    report(6, not bad, f"weak-BA {len(rows)} runs, {len(bad)} with two finalize values{_where(bad)}")


def test_criterion_07_unique_validity(grid):
    rows = grid["weak-ba"]
    bad = _bad(rows, "validity")
    report(7, not bad, f"weak-BA {len(rows)} runs, {len(bad)} bottom decisions without two valid values{_where(bad)}")


def test_criterion_08_fallback_skew(grid):
    rows = [r for p in grid for r in grid[p] if r["ran_fallback"]]
    bad = _bad(rows, "fallback_sync")
    report(8, not bad, f"{len(rows)} runs entered the fallback, {len(bad)} with skew > delta or late messages{_where(bad)}")


def test_criterion_09_strong_unanimity(grid):
    rows = grid["strong-ff"]
    bad = _bad(rows, "validity", "termination", "agreement")
    report(9, not bad, f"strong-ff {len(rows)} uniform-input runs, {len(bad)} violations{_where(bad)}")


def test_criterion_10_single_decision(grid):
    rows = [r for p in grid for r in grid[p]]
    bad = _bad(rows, "single_decision")
    report(10, not bad, f"{len(rows)} runs, {len(bad)} with a decision changed twice{_where(bad)}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
