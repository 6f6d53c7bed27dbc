"""Command-line front end.

Exit codes: 0 when everything passes, 1 when a check finds a counterexample
(or a program is ill-typed), 2 for usage, parse and precondition errors.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import la, samples, traceio
from .backtranslation import BacktranslationError, Exhausted, backtranslate
from .checks import (LANG_MODULES, CheckReport, PreconditionError, check_backtranslation,
                     check_correctness, check_rsc_typed, check_rsc_up)
from .compilers import COMPILERS, CompileError, compile_component
from .generators import GenConfig, gen_la_component
from .lu import LinkError
from .monitors import monitor_rel_check, parse_monitor
from .parser import ParseError, parse_component, parse_context, parse_program
from .syntax import Component, show_program
from .traceio import TraceError

LANGS = tuple(LANG_MODULES)


class Failure(click.ClickException):
    """A check found a counterexample."""
    exit_code = 1


class Precondition(click.ClickException):
    exit_code = 2


def _lang(path: str, lang) -> str:
    if lang:
        return lang
    suffix = Path(path).suffix.lstrip(".")
    if suffix in LANGS:
        return suffix
    raise click.UsageError(f"cannot tell the language of {path}; pass --lang")


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise click.UsageError(f"cannot read {path}: {exc.strerror}")


def _load(path: str, lang=None, kind=None):
    lang = _lang(path, lang)
    try:
        if kind == "component":
            return parse_component(_read(path), lang)
        if kind == "context":
            return parse_context(_read(path), lang)
        return parse_program(_read(path), lang)
    except ParseError as exc:
        raise Precondition(f"{path}: {exc}")


def _load_monitor(path: str, lang: str):
    try:
        return parse_monitor(_read(path), lang)
    except ParseError as exc:
        raise Precondition(f"{path}: {exc}")


def _finish(report: CheckReport, as_json: bool):
    click.echo(report.to_json() if as_json else report.summary())
    if not report.ok:
        if not as_json and report.counterexample:
            for key, value in report.counterexample.items():
                click.echo(f"--- {key}\n{value}")
        sys.exit(1)


@click.group()
def main():
    """Interpreters, compilers and robust-safety checks for the LU/LP/LA/LC/LI languages."""


@main.command()
@click.argument("file")
@click.option("--lang", type=click.Choice(LANGS), help="Defaults to the file extension.")
def parse(file, lang):
    """Parse a program and print it back in canonical form."""
    click.echo(show_program(_load(file, lang)), nl=False)


@main.command()
@click.argument("file")
@click.option("--against", help="LA component whose store environment a context is UN-typed against.")
def typecheck(file, against):
    """Typecheck an LA component, or UN-type an LA context."""
    prog = _load(file, "la")
    if isinstance(prog, Component):
        try:
            la.typecheck(prog)
        except la.TypeCheckError as exc:
            raise Failure(str(exc))
        click.echo("well-typed")
        return
    delta = _load(against, "la", "component").delta if against else {}
    errors = la.typecheck_un(prog, delta)
    if errors:
        raise Failure("; ".join(map(str, errors)))
    click.echo("UN-typed")


@main.command()
@click.option("--context", "context_file", required=True)
@click.option("--component", "component_file", required=True)
@click.option("--lang", type=click.Choice(LANGS), help="Defaults to the component's extension.")
@click.option("--seed", type=int, default=None, help="Schedule seed for the concurrent languages.")
@click.option("--max-steps", type=int, default=10_000, show_default=True)
@click.option("--json", "as_json", is_flag=True, help="Print the trace as JSON.")
def run(context_file, component_file, lang, seed, max_steps, as_json):
    """Link a context with a component and run the whole program."""
    lang = _lang(component_file, lang)
    ctx = _load(context_file, lang, "context")
    comp = _load(component_file, lang, "component")
    mod = LANG_MODULES[lang]
    try:
        program = mod.plug(ctx, comp)
    except LinkError as exc:
        raise Precondition(f"cannot link: {exc}")
    kw = {} if seed is None else {"seed": seed}
    r = mod.run(program, max_steps=max_steps, **kw)
    if as_json:
        click.echo(traceio.dumps(r.trace))
    else:
        for a in r.trace:
            click.echo(repr(a))
    click.echo(f"{r.status} after {r.steps} steps" + (f": {r.reason}" if r.reason else ""),
               err=as_json)


@main.command("compile")
@click.option("--compiler", type=click.Choice(COMPILERS), required=True)
@click.option("--in", "in_file", required=True, help="Source component (.lu for up, .la otherwise).")
@click.option("--out", "out_file", help="Where to write the target component; stdout if absent.")
@click.option("--emit-bijection", "beta_file", help="Write the initial bijection as JSON.")
def compile_cmd(compiler, in_file, out_file, beta_file):
    """Compile a component."""
    comp = _load(in_file, "lu" if compiler == "up" else "la", "component")
    try:
        out = compile_component(comp, compiler)
    except la.TypeCheckError as exc:
        raise Precondition(f"the component is not well-typed: {exc}")
    except CompileError as exc:
        raise Precondition(str(exc))
    text = show_program(out.component)
    if out_file:
        Path(out_file).write_text(text)
    else:
        click.echo(text, nl=False)
    if beta_file:
        Path(beta_file).write_text(out.beta.to_json() + "\n")


@main.command("backtranslate")
@click.option("--trace", "trace_file", required=True, help="LP trace as JSON.")
@click.option("--component", "component_file", required=True, help="The LU component.")
@click.option("--interfaces", help="Comma-separated context functions; defaults to the component's imports.")
@click.option("--budget", type=int, default=None, help="Maximum number of candidate replays.")
@click.option("--max-steps", type=int, default=10_000, show_default=True)
@click.option("--json", "as_json", is_flag=True, help="Also print the replayed source trace as JSON.")
def backtranslate_cmd(trace_file, component_file, interfaces, budget, max_steps, as_json):
    """Build an LU context that reproduces an LP trace against a component."""
    comp = _load(component_file, "lu", "component")
    try:
        trace = traceio.loads(_read(trace_file))
    except TraceError as exc:
        raise Precondition(f"{trace_file}: {exc}")
    names = tuple(n for n in interfaces.split(",") if n) if interfaces else comp.imports
    try:
        bt = backtranslate(names, trace, comp, budget=budget, max_steps=max_steps)
    except Exhausted as exc:
        raise Failure(str(exc))
    except BacktranslationError as exc:
        raise Precondition(str(exc))
    click.echo(show_program(bt.context), nl=False)
    if as_json:
        click.echo(traceio.dumps(bt.source_trace))
    click.echo(f"replays: {bt.replays}, final counter: {bt.counter}", err=True)


@main.group()
def check():
    """Run one of the property checks."""


def _options(f):
    f = click.option("--json", "as_json", is_flag=True, help="Print the full report as JSON.")(f)
    f = click.option("--schedule-seeds", type=int, default=20, show_default=True)(f)
    f = click.option("--max-steps", type=int, default=10_000, show_default=True)(f)
    f = click.option("--trials", type=int, default=None, help="Number of trials.")(f)
    f = click.option("--seed", type=int, default=0, show_default=True)(f)
    return f


def _cfg(seed, max_steps, schedule_seeds) -> GenConfig:
    return GenConfig(seed=seed, max_steps=max_steps, schedules=schedule_seeds)


@check.command("correctness")
@_options
def check_correctness_cmd(seed, trials, max_steps, schedule_seeds, as_json):
    """Fuzz whole LU programs against their LP compilation."""
    _finish(check_correctness(_cfg(seed, max_steps, schedule_seeds), trials or 300), as_json)


@check.command("rsc")
@_options
@click.option("--compiler", type=click.Choice(COMPILERS), default="ap", show_default=True)
@click.option("--component", "component_file",
              help="Component to attack; LU for up, LA otherwise. Defaults to fuzzed LA components "
                   "or, for up, the deposit/balance sample.")
@click.option("--source-monitor", help="LU monitor file (up only).")
@click.option("--target-monitor", help="LP monitor file (up only).")
@click.option("--attackers", type=int, default=10, show_default=True,
              help="Attackers per component.")
def check_rsc_cmd(seed, trials, max_steps, schedule_seeds, as_json, compiler, component_file,
                  source_monitor, target_monitor, attackers):
    """Attack compiled components and check the target monitor never refuses."""
    cfg = _cfg(seed, max_steps, schedule_seeds)
    try:
        if compiler == "up":
            comp = _load(component_file, "lu", "component") if component_file else samples.deposit()
            if component_file and not (source_monitor and target_monitor):
                raise click.UsageError("a custom component needs --source-monitor and --target-monitor")
            if source_monitor:
                ms, mt = _load_monitor(source_monitor, "lu"), _load_monitor(target_monitor, "lp")
            else:
                ms, mt = samples.balance_monitors()
            report = check_rsc_up(comp, ms, mt, cfg, attackers=trials or 500)
        else:
            if component_file:
                comps = [_load(component_file, "la", "component")]
            else:
                comps = [gen_la_component(cfg, i) for i in range(trials or 50)]
            report = CheckReport(f"rsc-{compiler}")
            for i, comp in enumerate(comps):
                r = check_rsc_typed(comp, compiler, cfg, attackers, index=i)
                report.trials += r.trials
                report.passes += r.passes
                if report.counterexample is None:
                    report.counterexample = r.counterexample
                for key, value in r.details.items():
                    report.details[key] = report.details.get(key, 0) + value
    except (PreconditionError, CompileError, la.TypeCheckError) as exc:
        raise Precondition(str(exc))
    _finish(report, as_json)


@check.command("backtranslation")
@_options
@click.option("--max-actions", type=int, default=6, show_default=True)
def check_backtranslation_cmd(seed, trials, max_steps, schedule_seeds, as_json, max_actions):
    """Backtranslate fuzzed LP attacker traces and replay them in LU."""
    cfg = _cfg(seed, max_steps, schedule_seeds)
    _finish(check_backtranslation(cfg, trials or 100, max_actions), as_json)


@check.command("monitor-rel")
@click.argument("source_monitor")
@click.argument("target_monitor")
@click.option("--depth", type=int, default=3, show_default=True)
@click.option("--width", type=int, default=2, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def check_monitor_rel_cmd(source_monitor, target_monitor, depth, width, seed, as_json):
    """Decide, up to a bound, whether an LU and an LP monitor are related."""
    ms, mt = _load_monitor(source_monitor, "lu"), _load_monitor(target_monitor, "lp")
    r = monitor_rel_check(ms, mt, depth, width, seed)
    if as_json:
        click.echo(json.dumps({"status": r.status, "states": r.states, "reason": r.reason,
                               "source_heap": repr(r.source_heap),
                               "target_heap": repr(r.target_heap),
                               "heaps_checked": r.heaps_checked}))
    else:
        click.echo(r.status + (f": {r.reason}" if r.reason else ""))
        if r.status == "counterexample":
            click.echo(f"states {r.states}\nsource heap {r.source_heap!r}\ntarget heap {r.target_heap!r}")
    if r.status == "counterexample":
        sys.exit(1)
    if r.status == "bound-exhausted":
        sys.exit(2)
