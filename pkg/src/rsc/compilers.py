"""The three compilers: LU to LP, LA to LC (atomic and non-atomic
allocation) and LA to LI, plus synthesis of the initial monitored heap.

Compiler-introduced binders start with ``_``, a prefix the source parsers
reject, so they never capture source names.
"""

from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass, field

from . import la
from .relations import Bijection
from .syntax import (UN, Assign, Bin, Call, Component, Context, Deref, Destruct, Endorse,
                     Fork, Fun, Hide, If, Ifz, Iso, Let, LetAtom, Lit, New, PairE, Proj,
                     Node, Seq, Skip, TBool, TNat, TProd, TRef, Var, subst)
from .values import KROOT, Bool, Cap, Loc, Pair, Unit

COMPILERS = ("up", "ap", "ap-nonatomic", "ai")


class CompileError(Exception):
    pass


@dataclass
class CompilationOutput:
    component: Component
    beta: Bijection
    spans: dict = field(default_factory=dict)  # function name -> (line, col)


class _Fresh:
    def __init__(self):
        self.counter = itertools.count(1)

    def __call__(self, hint: str) -> str:
        return f"_{hint}{next(self.counter)}"


def wrong(fresh) -> Let:
    """A statement that is always stuck: it projects from a number."""
    return Let(fresh("w"), Proj(1, Lit(0)), Skip())


def translate_value(v, beta: Bijection):
    """Target counterpart of a source value under ``beta``."""
    match v:
        case Bool(b):
            return 0 if b else 1
        case Unit():
            return 0
        case Loc():
            hit = beta.lookup(v)
            if hit is None:
                raise CompileError(f"unresolved location {v!r}")
            n, tag = hit
            if beta.bare:
                return n
            return Pair(n, 0 if tag is None else tag)
        case Pair(a, b):
            return Pair(translate_value(a, beta), translate_value(b, beta))
    return v


class _Translator:
    """Shared structural translation; subclasses handle memory operations."""

    def __init__(self, beta: Bijection):
        self.beta = beta
        self.fresh = _Fresh()

    def lit(self, v):
        match v:
            case Loc():
                t = translate_value(v, self.beta)
                if isinstance(t, Pair):
                    return PairE(Lit(t.fst), Lit(t.snd))
                return Lit(t)
            case Pair(a, b):
                return PairE(self.lit(a), self.lit(b))
        return Lit(translate_value(v, self.beta))

    def expr(self, e):
        match e:
            case Lit(v):
                return self.lit(v)
            case Var():
                return e
            case Bin(op, l, r):
                return Bin(op, self.expr(l), self.expr(r))
            case PairE(a, b):
                return PairE(self.expr(a), self.expr(b))
            case Proj(i, inner):
                return Proj(i, self.expr(inner))
            case Deref(inner):
                return self.deref(self.expr(inner))
        raise CompileError(f"cannot compile expression {e!r}")

    def deref(self, t):
        return Deref(Proj(1, t), Proj(2, t))

    def assign(self, target, value):
        x1, x2 = self.fresh("a"), self.fresh("c")
        return Let(x1, Proj(1, target), Let(x2, Proj(2, target), Assign(Var(x1), value, Var(x2))))

    def stmt(self, s):
        match s:
            case Skip():
                return s
            case Seq(a, b):
                return Seq(self.stmt(a), self.stmt(b))
            case Let(x, e, body):
                return Let(x, self.expr(e), self.stmt(body))
            case If(c, t, f):
                return Ifz(self.expr(c), self.stmt(t), self.stmt(f))
            case Call(fn, e):
                return Call(fn, self.expr(e))
            case Assign(target, e):
                return self.assign(self.expr(target), self.expr(e))
            case New(x, e, body, ty):
                return self.new(x, self.expr(e), self.stmt(body), ty)
            case Fork(body):
                return Fork(self.stmt(body))
            case Endorse(x, e, sty, body):
                return self.endorse(x, self.expr(e), sty, self.stmt(body))
        raise CompileError(f"cannot compile statement {type(s).__name__}")

    def new(self, x, e, body, ty):
        xl, xk = self.fresh("l"), self.fresh("k")
        return New(xl, e, Hide(xk, Var(xl), Let(x, PairE(Var(xl), Var(xk)), body)))

    def endorse(self, x, e, sty, body):
        raise CompileError("endorse is not part of LU")

    def funs(self, funs: dict) -> dict:
        return {n: Fun(f.name, f.param, self.stmt(f.body), None, f.span) for n, f in funs.items()}

# ---------------------------------------------------------------- LU -> LP


def compile_up(comp: Component) -> CompilationOutput:
    """Locations become address/capability pairs; no dynamic checks."""
    if comp.lang != "lu":
        raise CompileError("compile_up expects an LU component")
    if comp.root is None:
        raise CompileError("the component declares no root location")
    beta = Bijection.of([(comp.root, 0, KROOT)])
    tr = _Translator(beta)
    out = Component("lp", tr.funs(comp.funs), comp.imports)
    return CompilationOutput(out, beta, {n: f.span for n, f in comp.funs.items()})


def compile_up_context(ctx: Context) -> Context:
    """Translate an LU context with an empty heap, for whole-program runs."""
    if ctx.heap:
        raise CompileError("only contexts with an empty heap have an LP counterpart")
    return Context("lp", _Translator(Bijection()).funs(ctx.funs))

# ---------------------------------------------------------------- LA -> LC / LI


def synth_initial_heap(delta: dict, lang: str):
    """Initial monitored heap and bijection for a store environment.

    Cells follow the source initial heap: store locations first, then the
    auxiliary cells that reference types need. LC cells sit at 0, 1, ...
    with a fresh capability each; LI cells sit at -1, -2, ...
    """
    cells = la.initial_cells(delta)
    if lang == "lc":
        beta = Bijection.of([(l, i, Cap(f"k{i}")) for i, l in enumerate(cells)])
    elif lang == "li":
        beta = Bijection.of([(l, -1 - i, None) for i, l in enumerate(cells)], bare=True)
    else:
        raise CompileError(f"no initial heap synthesis for {lang}")
    heap0 = {}
    for l, (v, _) in cells.items():
        n, tag = beta.lookup(l)
        heap0[n] = (translate_value(v, beta), tag)
    return heap0, beta


class _APTranslator(_Translator):
    def __init__(self, beta, atomic: bool):
        super().__init__(beta)
        self.atomic = atomic

    def new(self, x, e, body, ty):
        if ty == UN:
            xo = self.fresh("o")
            return New(xo, e, Let(x, PairE(Var(xo), Lit(0)), body))
        if self.atomic:
            return LetAtom(x, e, body)
        xa, xk, xc = self.fresh("n"), self.fresh("k"), self.fresh("v")
        return New(xa, Lit(0), Hide(xk, Var(xa), Let(xc, e, Seq(
            Assign(Var(xa), Var(xc), Var(xk)),
            Let(x, PairE(Var(xa), Var(xk)), body)))))

    def endorse(self, x, e, sty, body):
        w = lambda: wrong(self.fresh)
        match sty:
            case TBool():
                check = Ifz(Var(x), body, Ifz(Bin("-", Var(x), Lit(1)), body, w()))
                return Destruct(x, e, "nat", check, w())
            case TNat():
                return Destruct(x, e, "nat", body, w())
            case TProd():
                return Destruct(x, e, "pair", body, w())
            case TRef():
                probe = Let(self.fresh("p"), self.deref(Var(x)), body)
                return Destruct(x, e, "pair", probe, w())
        raise CompileError(f"cannot endorse at {sty!r}")


class _AITranslator(_APTranslator):
    def __init__(self, beta):
        super().__init__(beta, True)

    def deref(self, t):
        return Deref(t)

    def assign(self, target, value):
        return Assign(target, value)

    def new(self, x, e, body, ty):
        return New(x, e, body) if ty == UN else Iso(x, e, body)

    def endorse(self, x, e, sty, body):
        if isinstance(sty, TRef):
            # addresses below zero belong to the enclave and are never UN cells
            probe = Let(self.fresh("p"), Deref(Var(x)), body)
            guarded = Ifz(Bin("<", Var(x), Lit(0)), wrong(self.fresh), probe)
            return Destruct(x, e, "nat", guarded, wrong(self.fresh))
        return super().endorse(x, e, sty, body)


def _typed(typed) -> la.TypedComponent:
    if isinstance(typed, Component):
        raise CompileError("the typed compilers need a typing derivation; run la.typecheck first")
    comp = typed.component
    if set(typed.derivs) != set(comp.funs):
        raise CompileError("the derivation does not cover every function")
    return typed


def compile_ap(typed: la.TypedComponent, atomic: bool = True) -> CompilationOutput:
    """Protect exactly the trusted allocations with capabilities."""
    comp = _typed(typed).component
    heap0, beta = synth_initial_heap(comp.delta, "lc")
    tr = _APTranslator(beta, atomic)
    out = Component("lc", tr.funs(comp.funs), comp.imports, heap0=heap0)
    return CompilationOutput(out, beta, {n: f.span for n, f in comp.funs.items()})


def compile_ap_nonatomic(typed: la.TypedComponent) -> CompilationOutput:
    return compile_ap(typed, atomic=False)


def compile_ai(typed: la.TypedComponent) -> CompilationOutput:
    """Place trusted data in the enclave and every component function in it."""
    comp = _typed(typed).component
    heap0, beta = synth_initial_heap(comp.delta, "li")
    tr = _AITranslator(beta)
    out = Component("li", tr.funs(comp.funs), comp.imports, heap0=heap0,
                    enclave=frozenset(comp.funs))
    return CompilationOutput(out, beta, {n: f.span for n, f in comp.funs.items()})


def compile_component(comp: Component, compiler: str) -> CompilationOutput:
    match compiler:
        case "up":
            return compile_up(comp)
        case "ap":
            return compile_ap(la.typecheck(comp))
        case "ap-nonatomic":
            return compile_ap_nonatomic(la.typecheck(comp))
        case "ai":
            return compile_ai(la.typecheck(comp))
    raise CompileError(f"unknown compiler {compiler!r}; expected one of {', '.join(COMPILERS)}")


def compile_la_context(ctx: Context, lang: str) -> Context:
    """Translate a UN-typed LA attacker for the LC or LI target.

    Attackers only allocate at UN, so allocations become plain ``new``.
    """
    if ctx.heap:
        raise CompileError("only contexts with an empty heap have a target counterpart")
    tr = _APTranslator(Bijection(), True) if lang == "lc" else _AITranslator(Bijection(bare=True))
    return Context(lang, tr.funs(ctx.funs))


def normalize(node: Node) -> Node:
    """Fold projections of literal pairs and inline lets bound to literals.

    Used to compare compiler output with hand-written target code.
    """
    changes = {}
    for f in dataclasses.fields(node):
        c = getattr(node, f.name)
        if isinstance(c, Node):
            changes[f.name] = normalize(c)
    node = dataclasses.replace(node, **changes) if changes else node
    match node:
        case PairE(Lit(a), Lit(b)):
            return Lit(Pair(a, b))
        case Proj(i, Lit(Pair(a, b))):
            return Lit(a if i == 1 else b)
        case Let(x, Lit(v), body):
            return normalize(subst(body, x, v))
    return node
