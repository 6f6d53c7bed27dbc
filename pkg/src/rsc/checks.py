"""Executable checks: compiler correctness, robust safety of compiled code,
backtranslation, capability safety and the non-atomic allocation race.

Each check returns a ``CheckReport`` that depends only on its inputs and
the generator configuration.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

from . import la, lc, li, lp, lu
from .backtranslation import COUNTER, KNOWN, Exhausted, backtranslate
from .compilers import compile_component, compile_la_context, compile_up, compile_up_context
from .generators import (GenConfig, gen_attacker_la, gen_attacker_lp, gen_attacker_target,
                         gen_la_component, gen_lu_component, gen_lu_whole)
from .lu import LinkError
from .monitors import (Monitor, conformance_monitor, monitor_agree, monitor_rel_check,
                       trace_verdict, typing_monitor)
from .relations import Bijection, heap_rel, infer_beta, trace_rel
from .syntax import show_program
from .values import KROOT

LANG_MODULES = {"lu": lu, "lp": lp, "la": la, "lc": lc, "li": li}


class PreconditionError(Exception):
    pass


@dataclass
class CheckReport:
    name: str
    trials: int = 0
    passes: int = 0
    skipped: int = 0
    counterexample: Optional[dict] = None
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.passes == self.trials

    def record(self, passed: bool, witness=None):
        self.trials += 1
        if passed:
            self.passes += 1
        elif self.counterexample is None:
            self.counterexample = witness() if callable(witness) else (witness or {})

    def to_json(self) -> str:
        return json.dumps(asdict(self), default=repr, indent=2)

    def summary(self) -> str:
        line = f"{self.name}: {self.passes}/{self.trials} passed"
        if self.skipped:
            line += f", {self.skipped} skipped"
        return line

# ---------------------------------------------------------------- correctness


def compare_whole(ctx, comp, max_steps: int = 10_000) -> tuple:
    """Run a whole LU program and its compilation side by side.

    Returns ``(status, detail)`` with status ``pass``, ``fail`` or ``skip``
    (source stuck or out of budget).
    """
    rs = lu.run(lu.plug(ctx, comp), max_steps=max_steps)
    if rs.status != "terminated":
        return "skip", {"reason": f"source {rs.status}"}
    tprog = lp.plug(compile_up_context(ctx), compile_up(comp).component)
    rt = lp.run(tprog, max_steps=max_steps * 10)
    detail = {"source_trace": rs.trace, "target_trace": rt.trace, "target_status": rt.status,
              "reason": rt.reason}
    if rt.status != "terminated":
        return "fail", detail
    beta = infer_beta(Bijection.of([(comp.root, 0, KROOT)]), rs.trace, rt.trace,
                      final=(rs.heap, rt.heap))
    if beta is None:
        return "fail", {**detail, "reason": "allocations do not line up"}
    detail["beta"] = beta.to_json()
    if not trace_rel(beta, rs.trace, rt.trace):
        return "fail", {**detail, "reason": "traces are not related"}
    if not heap_rel(beta, rs.heap, rt.heap, strict=True):
        return "fail", {**detail, "reason": "final heaps are not related"}
    return "pass", detail


def check_correctness(cfg: GenConfig, trials: int = 300) -> CheckReport:
    """``trials`` generated whole programs that terminate in the source."""
    report = CheckReport("correctness")
    i = 0
    while report.trials < trials and i < trials * 5:
        ctx, comp = gen_lu_whole(cfg, i)
        i += 1
        status, detail = compare_whole(ctx, comp, cfg.max_steps)
        if status == "skip":
            report.skipped += 1
            continue
        report.record(status == "pass", lambda: {
            "context": show_program(ctx), "component": show_program(comp), "seed": cfg.seed,
            "index": i - 1, **{k: repr(v) for k, v in detail.items()}})
    return report

# ---------------------------------------------------------------- robust safety


def _run_verdict(module, program, monitor: Monitor, seed, max_steps):
    r = module.run(program, max_steps=max_steps, seed=seed)
    heaps = [a.heap for a in r.trace] + [r.heap]
    return trace_verdict(monitor, heaps), r


def check_rsc_typed(comp, compiler: str, cfg: GenConfig, attackers: int = 10,
                    index: int = 0) -> CheckReport:
    """Compile a well-typed LA component and attack it.

    Half the attackers are compiled UN-typed source attackers, the other
    half native target attackers. Every run, under every schedule seed, must
    keep the conformance monitor happy. The source attackers are also run
    against the source component under the typing monitor.
    """
    out = compile_component(comp, compiler)
    target = out.component
    mod = LANG_MODULES[target.lang]
    ms = typing_monitor(comp.delta)
    mt = conformance_monitor(comp.delta, target.heap0, target.lang)
    for m, c in ((ms, comp), (mt, target)):
        problems = monitor_agree(m, c)
        if problems:
            raise PreconditionError("; ".join(problems))
    report = CheckReport(f"rsc-{compiler}")
    source_trials = source_passes = 0
    for a in range(attackers):
        if a % 2 == 0:
            src_ctx = gen_attacker_la(cfg, comp, index * 1000 + a)
            ctx = compile_la_context(src_ctx, target.lang)
        else:
            src_ctx = None
            ctx = gen_attacker_target(cfg, target, index * 1000 + a)
        try:
            program = mod.plug(ctx, target)
        except LinkError as exc:
            raise PreconditionError(f"generated attacker does not link: {exc}") from exc
        for seed in range(cfg.schedules):
            verdict, r = _run_verdict(mod, program, mt, seed, cfg.max_steps)
            report.record(verdict.accepted, lambda: {
                "component": show_program(comp), "target": show_program(target),
                "attacker": show_program(ctx), "schedule_seed": seed,
                "trace": repr(r.trace), "rejected_at": verdict.at})
            if src_ctx is not None:
                sv, _ = _run_verdict(la, la.plug(src_ctx, comp), ms, seed, cfg.max_steps)
                source_trials += 1
                source_passes += sv.accepted
    report.details = {"source_trials": source_trials, "source_passes": source_passes}
    return report


def check_rsc_up(comp, ms: Monitor, mt: Monitor, cfg: GenConfig, attackers: int = 500,
                 probe: float = 0.3, bt_limit: int = 6) -> CheckReport:
    """Attack an LU component compiled to LP.

    A run passes when the target monitor accepts its trace. When it refuses,
    the trace is backtranslated (if short enough) to a source attacker and
    the source monitor's verdict on the replay is reported alongside.
    """
    target = compile_up(comp).component
    problems = monitor_agree(ms, comp) + monitor_agree(mt, target)
    if problems:
        raise PreconditionError("; ".join(problems))
    rel = monitor_rel_check(ms, mt)
    if rel.status != "related":
        raise PreconditionError(f"monitors are not related: {rel.status} {rel.reason}")
    report = CheckReport("rsc-up")
    for a in range(attackers):
        ctx = gen_attacker_lp(cfg, comp, a, probe)
        program = lp.plug(ctx, target)
        verdict, r = _run_verdict(lp, program, mt, None, cfg.max_steps)
        if verdict.accepted:
            report.record(True)
            continue
        witness = {"component": show_program(comp), "attacker": show_program(ctx),
                   "trace": repr(r.trace), "rejected_at": verdict.at}
        actions = r.trace[:verdict.at] if verdict.at <= len(r.trace) else r.trace
        if len(actions) <= bt_limit:
            try:
                bt = backtranslate(comp.imports, actions, comp)
                sv = trace_verdict(ms, [x.heap for x in bt.source_trace])
                witness["source_attacker"] = show_program(bt.context)
                witness["source_verdict"] = "accept" if sv.accepted else f"reject at {sv.at}"
            except Exhausted as exc:
                witness["source_attacker"] = str(exc)
        report.record(False, witness)
    return report

# ---------------------------------------------------------------- backtranslation


def check_backtranslation_pair(comp, ctx, max_steps: int = 10_000, budget=None) -> tuple:
    """Backtranslate the trace of ``ctx`` against the compiled ``comp``.

    Returns ``(passed, detail)``.
    """
    r = lp.run(lp.plug(ctx, compile_up(comp).component), max_steps=max_steps)
    trace = r.trace
    detail = {"target_trace": trace}
    try:
        bt = backtranslate(comp.imports, trace, comp, budget=budget)
    except Exhausted as exc:
        return False, {**detail, "reason": str(exc)}
    detail.update(source_trace=bt.source_trace, counter=bt.counter, replays=bt.replays,
                  context=bt.context)
    ok = bt.counter == len(trace) + 1 and trace_rel(bt.beta, bt.source_trace, trace,
                                                     {COUNTER, KNOWN})
    return ok, detail


def check_backtranslation(cfg: GenConfig, trials: int = 100, max_actions: int = 6,
                          comp=None) -> CheckReport:
    """Generated (component, attacker) pairs whose traces have 1 to
    ``max_actions`` actions; pairs outside that range are skipped."""
    report = CheckReport("backtranslation")
    i = 0
    while report.trials < trials and i < trials * 20:
        c = comp if comp is not None else gen_lu_component(cfg, i)
        ctx = gen_attacker_lp(cfg, c, i)
        i += 1
        r = lp.run(lp.plug(ctx, compile_up(c).component), max_steps=cfg.max_steps)
        if not 1 <= len(r.trace) <= max_actions:
            report.skipped += 1
            continue
        ok, detail = check_backtranslation_pair(c, ctx, cfg.max_steps)
        report.record(ok, lambda: {"component": show_program(c), "attacker": show_program(ctx),
                                   **{k: repr(v) for k, v in detail.items()}})
    return report

# ---------------------------------------------------------------- capability safety


def context_mutations(comp, ctx, max_steps: int = 10_000) -> tuple:
    """Steps taken by context code that change cell 0 of the compiled program."""
    target = compile_up(comp).component
    program = lp.plug(ctx, target)
    hits = []

    def watch(state, step):
        proc = state.procs[step.proc]
        before, after = state.heap.cells.get(0), step.state.heap.cells.get(0)
        if before != after and proc.current not in target.funs:
            hits.append((proc.current, before, after))

    r = lp.run(program, max_steps=max_steps, observer=watch)
    return hits, r


def check_capability_safety(comp, cfg: GenConfig, attackers: int = 1000,
                            probe: float = 0.5) -> CheckReport:
    report = CheckReport("capability-safety")
    for a in range(attackers):
        ctx = gen_attacker_lp(cfg, comp, a, probe)
        hits, r = context_mutations(comp, ctx, cfg.max_steps)
        report.record(not hits, lambda: {"attacker": show_program(ctx), "mutations": repr(hits)})
    return report

# ---------------------------------------------------------------- race


def explore(program, machine_mod, depth: int, stuck_filter=None) -> dict:
    """Every interleaving of ``program`` up to ``depth`` steps.

    Returns the number of maximal interleavings, how many of them pass
    through a state where a process selected by ``stuck_filter`` is stuck,
    every state reached, and the stuck processes found.
    """
    m = machine_mod.machine(program)
    memo, states, stuck_states = {}, [], []

    def visit(state, d):
        """(interleavings, interleavings hitting a selected stuck process)"""
        key = (state.key(), d)
        if key in memo:
            return memo[key]
        states.append(state)
        hit = False
        for i, p in enumerate(state.procs):
            if not m.finished(p):
                try:
                    m.step(state, i)
                except lu.Stuck as exc:
                    stuck_states.append((state, i, str(exc)))
                    hit = hit or stuck_filter is None or stuck_filter(state.procs[i])
        succ = m.successors(state) if d < depth else []
        if not succ:
            memo[key] = (1, int(hit))
            return memo[key]
        total = hits = 0
        for st in succ:
            n, h = visit(st.state, d + 1)
            total += n
            hits += n if hit else h
        memo[key] = (total, hits)
        return memo[key]

    leaves, stuck_leaves = visit(m.initial(), 0)
    return {"leaves": leaves, "stuck_leaves": stuck_leaves, "states": states,
            "stuck": stuck_states}


RACE_COMPONENT = """component {
  delta { m : Nat; }
  fun f(x : UN) { let y = new 5 : Nat in y := 6 }
}"""

RACE_ATTACKER = """context {
  fun main(x) { fork { let k = hide 1 in skip }; call f 0 }
}"""


def check_race(depth: int = 12) -> dict:
    """The non-atomic allocation race.

    The attacker forks a process that hides address 1, which the compiled
    ``f`` allocates. Explores every interleaving up to ``depth`` steps and
    reports whether some interleaving leaves the component stuck and whether
    the monitored cells stay untouched in all of them.
    """
    from .parser import parse_component, parse_context
    comp = parse_component(RACE_COMPONENT, "la")
    target = compile_component(comp, "ap-nonatomic").component
    program = lc.plug(parse_context(RACE_ATTACKER, "lc"), target)
    in_component = lambda proc: proc.current in target.funs
    result = explore(program, lc, depth, in_component)
    h0 = dict(target.heap0)
    untouched = all(all(s.heap.cells.get(a) == c for a, c in h0.items()) for s in result["states"])
    stuck_component = [(st, i, why) for st, i, why in result["stuck"] if in_component(st.procs[i])]
    return {"interleavings": result["leaves"], "states": len(result["states"]),
            "component_stuck": bool(stuck_component),
            "stuck_interleavings": result["stuck_leaves"],
            "stuck_reasons": sorted({why for _, _, why in stuck_component}),
            "region_untouched": untouched}
