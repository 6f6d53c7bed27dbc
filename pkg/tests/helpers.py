"""Running bare statements against a chosen heap."""

from rsc import la, lc, li, lp, lu
from rsc.lu import Proc, Program, State
from rsc.parser import parse_stmt
from rsc.syntax import Component, Context

MODULES = {"lu": lu, "lp": lp, "la": la, "lc": lc, "li": li}


def machine_for(lang, heap, funs=None, comp=None):
    comp = comp or Component(lang, {})
    prog = Program(lang, dict(funs or {}), frozenset(comp.funs), heap, comp, Context(lang, {}))
    return MODULES[lang].machine(prog)


def exec_stmt(lang, heap, text, stack=("f",), max_steps=1000, seed=None, comp=None):
    """Run ``text`` as the only process, as if inside function ``stack[-1]``."""
    stmt = text if not isinstance(text, str) else parse_stmt(text, lang)
    m = machine_for(lang, heap, comp=comp)
    return m.run(State(heap, (Proc(stmt, stack, "comp"),)), max_steps=max_steps, seed=seed)
