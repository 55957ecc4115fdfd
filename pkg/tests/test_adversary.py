import pytest

from adaptiveba import STRATEGIES, RunConfig, forge_attempts, make_strategy, run, strategy_catalog
from adaptiveba.adversary import credentials_verify
from adaptiveba.checks import check_trace, finalize_values
from adaptiveba.messages import HelpReq


def test_catalog():
    names = [s.name for s in strategy_catalog(0)]
    assert sorted(names) == sorted(STRATEGIES) and len(names) == 10
    with pytest.raises(ValueError):
        make_strategy("nope")


@pytest.mark.parametrize("name", sorted(STRATEGIES))
def test_corrupts_exactly_f(name):
    s = make_strategy(name, 0)
    cfg = RunConfig(n=9, t=4, f=3, protocol="weak-ba", strategy=name)
    s.bind(cfg)
    assert len(s.corrupt_choice(9, 4, 3, cfg)) == 3


def test_honest_strategy_sends_nothing_byzantine():
    tr = run(RunConfig(n=5, t=2, f=2, protocol="weak-ba", strategy="honest"))
    assert tr.corrupted and check_trace(tr).safe
    assert all(credentials_verify(e.msg, tr.ledger) for e in tr.envelopes)


def test_fuzzer_forgeries_are_counted_and_rejected():
    total = 0
    for seed in range(10):
        tr = run(RunConfig(n=7, t=3, f=3, protocol="weak-ba", strategy="random-fuzzer", seed=seed))
        total += forge_attempts(make_strategy("random-fuzzer", seed), tr)
        assert check_trace(tr).safe
    assert total > 0


def test_equivocation_needs_no_forgery():
    tr = run(RunConfig(n=7, t=3, f=2, protocol="bb", strategy="equivocating-sender"))
    assert tr.forgery_attempts == 0


def test_help_spam_costs_linear_per_spammer_and_no_fallback():
    n, f = 9, 1
    tr = run(RunConfig(n=n, t=4, f=f, protocol="weak-ba", strategy="help-req-spam"))
    assert [e for e in tr.envelopes if isinstance(e.msg, HelpReq) and e.frm in tr.corrupted]
    assert not tr.fallback_triggered
    assert len(finalize_values(tr)) == 1


def test_partial_dealer_keeps_starts_within_delta():
    for seed in range(5):
        tr = run(RunConfig(n=7, t=3, f=3, protocol="weak-ba", strategy="partial-fallback-dealer", seed=seed))
        if tr.fallback_starts:
            spread = max(tr.fallback_starts.values()) - min(tr.fallback_starts.values())
            assert spread <= tr.config.delta
            assert set(tr.fallback_starts) == set(tr.correct)


@pytest.mark.parametrize("name", sorted(STRATEGIES))
def test_correct_envelopes_carry_valid_credentials(name):
    for proto in ("weak-ba", "bb", "strong-ff"):
        tr = run(RunConfig(n=5, t=2, f=2, protocol=proto, strategy=name, seed=1))
        bad = [e for e in tr.envelopes if e.frm not in tr.corrupted and not credentials_verify(e.msg, tr.ledger)]
        assert not bad


def test_two_commit_leader_only_matters_without_lock():
    cfg = dict(n=7, t=3, f=3, protocol="weak-ba", strategy="two-commit-leader")
    assert not check_trace(run(RunConfig(**cfg, commit_lock=False))).safe
    tr = run(RunConfig(**cfg))
    assert check_trace(tr).safe
    assert any(ev[2] == "mark" and str(ev[3]).startswith("decide-refused") for ev in tr.events)
