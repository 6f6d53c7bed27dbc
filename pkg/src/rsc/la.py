"""Typed concurrent source language LA.

The type checker returns a derivation tree so the typed compilers can be
driven by it. Attackers are checked with the weaker UN discipline. At run
time every heap cell records the type it was allocated at, and ``endorse``
tests one constructor layer of a value against that record.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .lu import Heap, LinkError, Machine, Proc, Program, Red, RunResult, Stuck, check_link
from .syntax import (BOOL, NAT, SUPERFICIAL, UN, Assign, Bin, Call, Component, Context,
                     Deref, Endorse, Fork, Fun, If, Let, Lit, New, PairE, Proj, Seq, Skip,
                     TBool, TNat, TProd, TRef, TUn, Type, Var, free_vars, subst, walk)
from .values import TRUE, Bool, Loc, Pair, Unit, locs_in

# ---------------------------------------------------------------- types


def insecure(t: Type) -> bool:
    """Types whose values may be shared with the attacker."""
    match t:
        case TBool() | TNat() | TUn():
            return True
        case TRef(TUn()):
            return True
        case TProd(a, b):
            return insecure(a) and insecure(b)
    return False


def contains_un(t: Type) -> bool:
    match t:
        case TUn():
            return True
        case TProd(a, b):
            return contains_un(a) or contains_un(b)
        case TRef(inner):
            return contains_un(inner)
    return False


def delta_ok(delta: dict) -> list:
    return [f"store type of {l!r} mentions UN: {t!r}" for l, t in delta.items() if contains_un(t)]

# ---------------------------------------------------------------- derivations


class TypeCheckError(Exception):
    pass


@dataclass(frozen=True)
class Deriv:
    """One node of a typing derivation: the rule used, the term and its type."""

    rule: str
    node: object
    ty: Optional[Type] = None
    premises: tuple = ()

    def rules(self):
        yield self.rule
        for p in self.premises:
            yield from p.rules()


@dataclass
class TypedComponent:
    component: Component
    derivs: dict  # function name -> Deriv of its body


class Checker:
    def __init__(self, delta: dict, callable_names: set):
        self.delta = delta
        self.callable = callable_names

    def fail(self, rule: str, msg: str):
        raise TypeCheckError(f"{rule}: {msg}")

    def synth(self, e, env: dict) -> Deriv:
        match e:
            case Lit(Bool()):
                return Deriv("bool", e, BOOL)
            case Lit(int()):
                return Deriv("nat", e, NAT)
            case Lit(Loc() as l):
                if l not in self.delta:
                    self.fail("loc", f"location {l!r} is not in the store environment")
                return Deriv("loc", e, TRef(self.delta[l]))
            case Lit(v):
                self.fail("value", f"{v!r} has no type")
            case Var(x):
                if x not in env:
                    self.fail("var", f"unbound variable {x}")
                return Deriv("var", e, env[x])
            case PairE(a, b):
                da, db = self.synth(a, env), self.synth(b, env)
                return Deriv("pair", e, TProd(da.ty, db.ty), (da, db))
            case Proj(i, inner):
                d = self.synth(inner, env)
                if not isinstance(d.ty, TProd):
                    self.fail(f"proj-{i}", f"projection from {d.ty!r}")
                return Deriv(f"proj-{i}", e, d.ty.fst if i == 1 else d.ty.snd, (d,))
            case Deref(inner):
                d = self.synth(inner, env)
                if not isinstance(d.ty, TRef):
                    self.fail("deref", f"dereference of {d.ty!r}")
                return Deriv("deref", e, d.ty.inner, (d,))
            case Bin(op, l, r):
                dl, dr = self.check(l, NAT, env), self.check(r, NAT, env)
                rule, ty = ("op", NAT) if op in ("+", "-", "*") else ("cmp", BOOL)
                return Deriv(rule, e, ty, (dl, dr))
        self.fail("expr", f"unknown expression {e!r}")

    def check(self, e, ty: Type, env: dict) -> Deriv:
        if isinstance(e, PairE) and isinstance(ty, TProd):
            da, db = self.check(e.fst, ty.fst, env), self.check(e.snd, ty.snd, env)
            return Deriv("pair", e, ty, (da, db))
        d = self.synth(e, env)
        if d.ty == ty:
            return d
        if ty == UN and insecure(d.ty):
            return Deriv("coercion", e, UN, (d,))
        if ty == UN:
            self.fail("coercion", f"{d.ty!r} cannot be shared as UN")
        self.fail("check", f"expected {ty!r}, found {d.ty!r}")

    def stmt(self, s, env: dict) -> Deriv:
        match s:
            case Skip():
                return Deriv("skip", s)
            case Seq(a, b):
                return Deriv("seq", s, None, (self.stmt(a, env), self.stmt(b, env)))
            case Call(f, e):
                if f not in self.callable:
                    self.fail("call", f"{f} is neither defined nor imported")
                return Deriv("call", s, None, (self.check(e, UN, env),))
            case Let(x, e, body, ty):
                de = self.check(e, ty, env) if ty is not None else self.synth(e, env)
                return Deriv("let", s, de.ty, (de, self.stmt(body, {**env, x: de.ty})))
            case Assign(target, e):
                dt = self.synth(target, env)
                if not isinstance(dt.ty, TRef):
                    self.fail("assign", f"assignment through {dt.ty!r}")
                return Deriv("assign", s, None, (dt, self.check(e, dt.ty.inner, env)))
            case New(x, e, body, ty):
                if ty is None:
                    self.fail("new", "allocation without a type")
                de = self.check(e, ty, env)
                return Deriv("new", s, ty, (de, self.stmt(body, {**env, x: TRef(ty)})))
            case If(c, then, other):
                return Deriv("if", s, None, (self.check(c, BOOL, env), self.stmt(then, env),
                                             self.stmt(other, env)))
            case Fork(body):
                return Deriv("fork", s, None, (self.stmt(body, env),))
            case Endorse(x, e, sty, body):
                if sty not in SUPERFICIAL:
                    self.fail("endorse", f"{sty!r} is not a superficial type")
                return Deriv("endorse", s, sty, (self.check(e, UN, env),
                                                 self.stmt(body, {**env, x: sty})))
        self.fail("stmt", f"{type(s).__name__} is not an LA statement")


def typecheck(comp: Component) -> TypedComponent:
    """Check a component; raises ``TypeCheckError`` naming the failing rule."""
    errors = delta_ok(comp.delta)
    if errors:
        raise TypeCheckError("store: " + "; ".join(errors))
    clash = set(comp.funs) & set(comp.imports)
    if clash:
        raise TypeCheckError(f"component: names both defined and imported: {sorted(clash)}")
    checker = Checker(comp.delta, set(comp.funs) | set(comp.imports))
    derivs = {}
    for f in comp.funs.values():
        if f.param_ty not in (None, UN):
            raise TypeCheckError(f"function: parameter of {f.name} must be UN")
        try:
            derivs[f.name] = checker.stmt(f.body, {f.param: UN})
        except TypeCheckError as exc:
            raise TypeCheckError(f"in {f.name}: {exc}") from None
    return TypedComponent(comp, derivs)


def typecheck_un(ctx: Context, delta: dict) -> list:
    """UN-typing of an attacker; returns the list of violations (empty if ok)."""
    errors = []
    names = {l.id for l in delta}
    for loc, (v, ty) in ctx.heap.items():
        if loc in delta:
            errors.append(f"heap: context heap redefines store location {loc!r}")
        if ty not in (None, UN):
            errors.append(f"heap: context cell {loc!r} must be typed UN, found {ty!r}")
        if any(l in delta for l in locs_in(v)):
            errors.append(f"heap: cell {loc!r} mentions a store location")
    for f in ctx.funs.values():
        if f.param_ty not in (None, UN):
            errors.append(f"function: parameter of {f.name} must be UN")
        for n in walk(f.body):
            match n:
                case Lit(v) if any(l in delta for l in locs_in(v)):
                    errors.append(f"loc: {f.name} mentions store location {locs_in(v)[0]!r}")
                case New(ty=ty) if ty != UN:
                    errors.append(f"new: {f.name} allocates at {ty!r}, attackers allocate at UN")
                case Let(ty=ty) if ty not in (None, UN):
                    errors.append(f"let: {f.name} binds at {ty!r}")
                case Endorse():
                    errors.append(f"endorse: {f.name} uses endorse")
        leaked = (free_vars(f.body) - {f.param}) & names
        for name in sorted(leaked):
            errors.append(f"loc: {f.name} mentions store location {name}")
    return errors

# ---------------------------------------------------------------- run time


def runtime_view(heap: Heap) -> dict:
    return {l: ty for l, (_, ty) in heap.cells.items()}


def has_type(v, t: Type, view: dict) -> bool:
    """Value typing against the types recorded on heap cells."""
    match t:
        case TBool():
            return isinstance(v, Bool)
        case TNat():
            return type(v) is int
        case TProd(a, b):
            return isinstance(v, Pair) and has_type(v.fst, a, view) and has_type(v.snd, b, view)
        case TRef(inner):
            return isinstance(v, Loc) and view.get(v) == inner
        case TUn():
            return shareable(v, view)
    return False


def shareable(v, view: dict) -> bool:
    """v has some insecure type, hence (by coercion) type UN."""
    match v:
        case Bool() | int() | Unit():
            return True
        case Pair(a, b):
            return shareable(a, view) and shareable(b, view)
        case Loc():
            return v in view and insecure(TRef(view[v]))
    return False


def endorse_ok(v, sty: Type, view: dict) -> bool:
    return has_type(v, sty, view)


def heap_ok(heap: Heap, delta: dict) -> bool:
    """Every store location is present, keeps its type and holds a value of it."""
    view = runtime_view(heap)
    for l, t in delta.items():
        if l not in heap or heap.annot(l) != t or not has_type(heap.value(l), t, view):
            return False
    return True


def initial_value(t: Type, loc: Loc, cells: dict):
    """Canonical value of type ``t``; references get a fresh auxiliary cell."""
    match t:
        case TBool():
            return TRUE
        case TNat():
            return 0
        case TProd(a, b):
            return Pair(initial_value(a, loc, cells), initial_value(b, loc, cells))
        case TRef(inner):
            aux = Loc(f"{loc.id}#{len(cells)}")
            cells[aux] = None  # reserve the slot to keep allocation order
            cells[aux] = (initial_value(inner, aux, cells), inner)
            return aux
    raise TypeCheckError(f"no initial value at {t!r}")


def initial_cells(delta: dict) -> dict:
    """Store cells for Δ followed by auxiliary cells for reference types."""
    cells = {l: None for l in delta}
    for l, t in delta.items():
        cells[l] = (initial_value(t, l, cells), t)
    return cells


class LAMachine(Machine):
    lang = "la"

    def alloc(self, heap, v, stmt):
        loc, _ = super().alloc(heap, v, stmt)
        return loc, heap.set(loc, v, stmt.ty)

    def reduce_other(self, s, proc, heap) -> Red:
        if isinstance(s, Endorse):
            v = self.eval(heap, s.expr, proc)
            if not endorse_ok(v, s.sty, runtime_view(heap)):
                raise Stuck(f"endorse of {v!r} as {s.sty!r} failed")
            return Red(subst(s.body, s.x, v))
        return super().reduce_other(s, proc, heap)

    def fork(self, body, proc: Proc) -> Proc:
        return Proc(body, (), self.top_side(proc))


def plug(ctx: Context, comp: Component, attacker: bool = True) -> Program:
    """Link; with ``attacker`` the context must pass UN-typing."""
    errors = check_link(ctx, comp) + delta_ok(comp.delta)
    if attacker:
        errors += [f"attacker-condition: {e}" for e in typecheck_un(ctx, comp.delta)]
    main = ctx.funs.get("main")
    if main is not None and main.param_ty not in (None, UN):
        errors.append("main-signature: main must take a UN argument")
    if errors:
        raise LinkError(errors)
    cells = {l: (v, UN if ty is None else ty) for l, (v, ty) in ctx.heap.items()}
    cells.update(initial_cells(comp.delta))
    return Program("la", {**ctx.funs, **comp.funs}, frozenset(comp.funs), Heap(cells), comp, ctx)


def machine(program: Program) -> LAMachine:
    return LAMachine(program)


def run(program: Program, max_steps: int = 10_000, seed=None, **kw) -> RunResult:
    return machine(program).run(max_steps=max_steps, seed=seed, **kw)
