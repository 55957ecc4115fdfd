"""Command-line harness: single runs and sweeps.

Exit codes: 0 all assertions hold, 2 safety violation, 3 a correct process
never decided, 4 bad configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

from .adversary import STRATEGIES
from .checks import check_trace
from .fallback import FALLBACKS
from .messages import PREDICATES, message_to_json
from .metrics import CSV_COLUMNS, DegenerateSweep, adaptive_fit, csv_row, linear_r2, row_sort_key
from .runner import PROTOCOLS, run
from .simnet import ConfigError, RunConfig
from .weak_ba import below_fallback_threshold

EXIT_OK, EXIT_SAFETY, EXIT_LIVENESS, EXIT_CONFIG = 0, 2, 3, 4

CONFIG_KEYS = {
    "protocol", "n", "t", "f", "strategy", "seed", "delta", "fallback", "predicate", "sender",
    "value", "inputs", "out_dir", "format", "allow_general_n",
}


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = val
    return out


def parse_inputs(spec: str, protocol: str, n: int) -> dict:
    """``uniform:<v>`` or a comma list with one entry per process.

    Entries are bits for strong-ff and hex payloads otherwise.
    """
    conv = int if protocol == "strong-ff" else bytes.fromhex
    if spec.startswith("uniform:"):
        v = conv(spec.split(":", 1)[1])
        return {p: v for p in range(1, n + 1)}
    items = [s.strip() for s in spec.split(",")]
    if len(items) != n:
        raise ConfigError(f"--inputs has {len(items)} entries, need n={n}")
    return {p: conv(x) for p, x in enumerate(items, 1)}


def _common(p):
    p.add_argument("--config", help="flat key = value file; flags win on conflict")
    p.add_argument("--protocol", choices=PROTOCOLS)
    p.add_argument("--t", type=int)
    p.add_argument("--delta")
    p.add_argument("--fallback", choices=sorted(FALLBACKS))
    p.add_argument("--predicate", choices=PREDICATES)
    p.add_argument("--sender", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--format", choices=("jsonl", "csv"))
    p.add_argument("--allow-general-n", action="store_true", default=None)
    p.add_argument("--no-commit-lock", action="store_true", help="literal decide rule (unsafe, for demos)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="adaptiveba", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="one run; prints a CSV row or writes a JSONL trace")
    _common(r)
    r.add_argument("--n", type=int)
    r.add_argument("--f", type=int)
    r.add_argument("--strategy", choices=sorted(STRATEGIES))
    r.add_argument("--seed", type=int)
    r.add_argument("--value", help="BB sender input, hex")
    r.add_argument("--inputs", help="uniform:<v> or comma list, one per process")

    s = sub.add_parser("sweep", help="grid of runs; CSV matrix and fit report")
    _common(s)
    s.add_argument("--n", type=int, nargs="+", default=[3, 5, 7, 9])
    s.add_argument("--f", type=int, nargs="+", help="default 0..t")
    s.add_argument("--strategy", nargs="+", choices=sorted(STRATEGIES))
    s.add_argument("--seeds", type=int, default=20)
    s.add_argument("--seed", type=int, default=0, help="first seed")
    s.add_argument("--jobs", type=int, default=1)
    return ap


def _merged(args) -> dict:
    conf = read_config_file(args.config) if args.config else {}
    for k, v in vars(args).items():
        if v is not None and k in CONFIG_KEYS:
            conf[k] = v
    return conf


def _config(conf: dict, n: int, f: int, strategy: str, seed: int, commit_lock=True) -> RunConfig:
    t = int(conf["t"]) if "t" in conf else (n - 1) // 2
    return RunConfig(
        n=n, t=t, f=f,
        protocol=conf.get("protocol", "weak-ba"),
        strategy=strategy, seed=seed,
        delta=Fraction(conf.get("delta", 1)),
        fallback=conf.get("fallback", "reference"),
        predicate=conf.get("predicate", "always-true"),
        sender=int(conf.get("sender", 1)),
        allow_general_n=str(conf.get("allow_general_n", False)).lower() in ("1", "true", "yes"),
        commit_lock=commit_lock,
    )


def _inputs(conf: dict, cfg: RunConfig):
    if cfg.protocol == "bb" and "value" in conf:
        return {cfg.sender: bytes.fromhex(conf["value"])}
    if "inputs" in conf:
        return parse_inputs(conf["inputs"], cfg.protocol, cfg.n)
    return None


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, bytes):
        return x.hex()
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if x is None or isinstance(x, (bool, int, float, str)):
        return x
    return repr(x)


def trace_jsonl(trace, report, row) -> str:
    cfg = trace.config
    lines = [{"type": "config", **_jsonable(vars(cfg)), "corrupted": sorted(trace.corrupted)}]
    for e in trace.envelopes:
        lines.append({
            "type": "envelope", "frm": e.frm, "to": e.to, "sent_at": str(e.sent_at),
            "deliver_at": str(e.deliver_at), "words": e.words,
            "byzantine": e.frm in trace.corrupted, "msg": message_to_json(e.msg),
        })
    for when, pid, kind, value in trace.decision_log:
        lines.append({"type": "decision", "time": str(when), "pid": pid, "kind": kind,
                      "value": _jsonable(value) if not hasattr(value, "_wire_fields") else repr(value)})
    lines.append({"type": "summary", **row, "violations": report.violations(),
                  "details": report.details, "forgery_attempts": trace.forgery_attempts,
                  "fallback_starts": _jsonable(trace.fallback_starts), "end_time": str(trace.end_time)})
    return "".join(json.dumps(x, sort_keys=True) + "\n" for x in lines)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in sorted(rows, key=row_sort_key):
        w.writerow(row)
    return buf.getvalue()


def cmd_run(args) -> int:
    conf = _merged(args)
    if "n" not in conf:
        raise ConfigError("--n is required")
    cfg = _config(conf, int(conf["n"]), int(conf.get("f", 0)), conf.get("strategy", "honest"),
                  int(conf.get("seed", 0)), not args.no_commit_lock)
    trace = run(cfg, _inputs(conf, cfg), require_termination=False)
    report = check_trace(trace)
    row = csv_row(trace, report)
    fmt = conf.get("format", "csv")
    text = trace_jsonl(trace, report, row) if fmt == "jsonl" else rows_to_csv([row])
    if conf.get("out_dir"):
        out = Path(conf["out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        name = f"{cfg.protocol}-n{cfg.n}-f{cfg.f}-{cfg.strategy}-s{cfg.seed}.{fmt}"
        (out / name).write_text(text)
    else:
        sys.stdout.write(text)
    for v in report.violations():
        print(f"violation: {v}: {report.details.get(v, '')}", file=sys.stderr)
    return report.exit_code


def _sweep_one(job):
    conf, n, f, strategy, seed, lock = job
    cfg = _config(conf, n, f, strategy, seed, lock)
    trace = run(cfg, _inputs(conf, cfg), require_termination=False)
    report = check_trace(trace, full=False)
    return csv_row(trace, report), report.exit_code


def cmd_sweep(args) -> int:
    conf = _merged(args)
    strategies = args.strategy or sorted(STRATEGIES)
    jobs = []
    for n in args.n:
        t = int(conf["t"]) if "t" in conf else (n - 1) // 2
        fs = args.f if args.f is not None else range(t + 1)
        for f in fs:
            if f > t:
                continue
            for s in strategies:
                for seed in range(args.seed, args.seed + args.seeds):
                    jobs.append((conf, n, f, s, seed, not args.no_commit_lock))
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            results = list(ex.map(_sweep_one, jobs, chunksize=16))
    else:
        results = [_sweep_one(j) for j in jobs]
    rows = [r for r, _ in results]
    text = rows_to_csv(rows)
    if conf.get("out_dir"):
        out = Path(conf["out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.csv").write_text(text)
    else:
        sys.stdout.write(text)

    report = sweep_report(rows)
    for line in report:
        print(line, file=sys.stderr)
    codes = {c for _, c in results}
    return EXIT_SAFETY if EXIT_SAFETY in codes else (EXIT_LIVENESS if EXIT_LIVENESS in codes else EXIT_OK)


def sweep_report(rows) -> list[str]:
    """Fit per (n, strategy) and pass/fail lines over the whole matrix."""
    out = []
    groups = {}
    for r in rows:
        groups.setdefault((r["protocol"], int(r["n"]), int(r["t"]), r["strategy"]), []).append(r)
    for (proto, n, t, s), rs in sorted(groups.items()):
        pts = [(int(r["f"]), int(r["words_total"])) for r in rs
               if below_fallback_threshold(n, t, int(r["f"]))]
        try:
            fit = adaptive_fit(pts, n)
            out.append(f"fit {proto} n={n} {s}: slope={fit.slope:.2f} intercept={fit.intercept:.2f} "
                       f"max_ratio={fit.max_ratio:.3f} r2={linear_r2(pts):.4f}")
        except DegenerateSweep:
            out.append(f"fit {proto} n={n} {s}: degenerate (one f below threshold)")

    def line(name, bad):
        out.append(f"{'PASS' if not bad else 'FAIL'} {name} ({bad} violations / {len(rows)} runs)")

    line("agreement", sum(r["agreement_ok"] != "true" for r in rows))
    line("validity", sum(r["validity_ok"] != "true" for r in rows))
    line("unique-finalize", sum(r["unique_finalize_ok"] != "true" for r in rows))
    line("no-fallback-below-threshold", sum(
        r["fallback_triggered"] == "true" and r["protocol"] != "strong-ff"
        and below_fallback_threshold(int(r["n"]), int(r["t"]), int(r["f"])) for r in rows))
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "run":
            return cmd_run(args)
        return cmd_sweep(args)
    except ValueError as e:  # ConfigError, bad hex, unknown names
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
