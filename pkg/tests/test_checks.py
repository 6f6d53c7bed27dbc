import json

import pytest

from rsc import compilers, samples
from rsc.checks import (CheckReport, PreconditionError, check_backtranslation,
                        check_capability_safety, check_correctness, check_race, check_rsc_typed,
                        check_rsc_up, compare_whole, context_mutations)
from rsc.generators import GenConfig, gen_la_component
from rsc.monitors import parse_monitor
from rsc.parser import parse_component, parse_context
from rsc.values import Bool

CFG = GenConfig(seed=0, schedules=3)


def test_report_keeps_the_first_counterexample():
    r = CheckReport("x")
    r.record(True)
    r.record(False, {"first": 1})
    r.record(False, lambda: {"second": 2})
    assert not r.ok and r.counterexample == {"first": 1}
    assert r.summary() == "x: 1/3 passed"
    assert json.loads(r.to_json())["trials"] == 3


def test_compare_whole_relates_deposit_runs():
    ctx = parse_context("context { fun main(x) { call deposit 4; call balance 0 } }", "lu")
    status, detail = compare_whole(ctx, samples.deposit())
    assert status == "pass" and len(detail["source_trace"]) == 4


def test_compare_whole_skips_stuck_sources():
    ctx = parse_context("context { fun main(x) { call deposit true } }", "lu")
    assert compare_whole(ctx, samples.deposit())[0] == "skip"


def test_correctness_check_catches_a_broken_value_translation(monkeypatch):
    real = compilers.translate_value

    def flipped(v, beta):
        return (1 if v.value else 0) if isinstance(v, Bool) else real(v, beta)
    assert check_correctness(CFG, 30).ok
    monkeypatch.setattr(compilers, "translate_value", flipped)
    assert not check_correctness(CFG, 100).ok


def test_typed_rsc_small_run():
    comp = gen_la_component(CFG, 1)
    for compiler in ("ap", "ap-nonatomic", "ai"):
        r = check_rsc_typed(comp, compiler, CFG, attackers=4, index=1)
        assert r.ok and r.trials == 4 * CFG.schedules
        assert r.details["source_passes"] == r.details["source_trials"]


def test_up_rsc_requires_related_monitors():
    ms, _ = samples.balance_monitors()
    strict = parse_monitor("monitor { root kroot; states ok; init ok; trans ok -> ok when root.val > 0; }", "lp")
    with pytest.raises(PreconditionError, match="not related"):
        check_rsc_up(samples.deposit(), ms, strict, CFG, attackers=1)


def test_up_rsc_flags_the_leaky_component():
    ms, mt = samples.balance_monitors()
    r = check_rsc_up(samples.leaky(), ms, mt, CFG, attackers=200)
    assert not r.ok
    assert r.counterexample["source_verdict"].startswith("reject")


def test_leak_is_a_context_mutation():
    hits, r = context_mutations(samples.leaky(), samples.leak_attacker())
    assert hits and hits[0][0] == "g"
    no_leak = parse_context("context { fun main(x) { call deposit 1; 0 := 5 with 0 } }", "lp")
    hits, r = context_mutations(samples.deposit(), no_leak)
    assert not hits and r.status == "stuck"


def test_capability_safety_small_run():
    assert check_capability_safety(samples.deposit(), CFG, attackers=50).ok


def test_backtranslation_small_run():
    r = check_backtranslation(CFG, trials=5)
    assert r.ok and r.trials == 5


def test_race_reaches_a_stuck_component_without_touching_the_region():
    r = check_race()
    assert r["component_stuck"] and r["region_untouched"]
    assert r["stuck_interleavings"] >= 1 and r["interleavings"] >= 2
