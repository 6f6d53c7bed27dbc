"""The small-step engine shared by all languages, and the untyped source
language LU built on it.

A program state is a heap plus a soup of processes. Each process holds a
statement and a call stack of function names. Stepping is a pure function
from a state to a label and a new state; heaps are copied on write.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .syntax import (ARITH, Assign, Bin, Call, Component, Context, Deref, Fork, Fun,
                     If, Let, Lit, New, PairE, Proj, Ret, Seq, Skip, Var, calls,
                     free_vars, subst, walk)
from .values import FALSE, TRUE, Bool, Loc, Pair


class Stuck(Exception):
    """A process has no applicable rule."""


class LinkError(Exception):
    def __init__(self, errors: list):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass(frozen=True)
class Heap:
    """Finite map from addresses to ``(value, annotation)`` pairs.

    The annotation is the tag in LP/LC, the static type in LA and unused in
    LU/LI. ``caps`` is the set of allocated capabilities (LP/LC).
    """

    cells: dict = field(default_factory=dict)
    caps: frozenset = frozenset()

    def __contains__(self, addr) -> bool:
        return addr in self.cells

    def value(self, addr):
        return self.cells[addr][0]

    def annot(self, addr):
        return self.cells[addr][1]

    def set(self, addr, v, annot=None) -> "Heap":
        cells = dict(self.cells)
        cells[addr] = (v, annot)
        return Heap(cells, self.caps)

    def with_cap(self, k) -> "Heap":
        return Heap(self.cells, self.caps | {k})

    def restrict(self, addrs) -> "Heap":
        return Heap({a: c for a, c in self.cells.items() if a in addrs}, self.caps)

    def values(self) -> dict:
        return {a: c[0] for a, c in self.cells.items()}

    def key(self):
        return (tuple(sorted(((repr(a), repr(c)) for a, c in self.cells.items()))),
                tuple(sorted(map(repr, self.caps))))

    def __repr__(self) -> str:
        parts = []
        for a, (v, ann) in self.cells.items():
            parts.append(f"{a!r}->{v!r}" + (f":{ann!r}" if ann is not None else ""))
        return "{" + ", ".join(parts) + "}"


CALL, CALLBACK, RETURN, RETURNBACK = "call", "callback", "return", "returnback"
KINDS = (CALL, CALLBACK, RETURN, RETURNBACK)
MAX_CALL_DEPTH = 200


@dataclass(frozen=True)
class Action:
    kind: str
    fn: Optional[str]
    val: object
    heap: Heap

    @property
    def dir(self) -> str:
        return "?" if self.kind in (CALL, RETURNBACK) else "!"

    def __repr__(self) -> str:
        if self.kind in (CALL, CALLBACK):
            return f"{self.kind} {self.fn} {self.val!r} {self.heap!r}{self.dir}"
        return f"{self.kind} {self.heap!r}{self.dir}"


@dataclass(frozen=True)
class Proc:
    stmt: object
    stack: tuple = ()
    side: str = "ctx"  # side of the code below the first frame

    @property
    def current(self) -> Optional[str]:
        return self.stack[-1] if self.stack else None


@dataclass(frozen=True)
class State:
    heap: Heap
    procs: tuple

    @property
    def proc(self) -> Proc:
        return self.procs[0]

    def key(self):
        return (self.heap.key(), self.procs)


@dataclass
class Program:
    """A linked whole program."""

    lang: str
    funs: dict
    comp_names: frozenset
    heap: Heap
    component: Component
    context: Context


@dataclass(frozen=True)
class Red:
    """Result of reducing one process by one step."""

    stmt: object
    heap: Optional[Heap] = None
    label: Optional[Action] = None
    stack: Optional[tuple] = None
    spawn: Optional[Proc] = None


@dataclass(frozen=True)
class Step:
    label: Optional[Action]
    state: State
    proc: int = 0


@dataclass
class RunResult:
    trace: list
    state: State
    status: str  # terminated | stuck | diverged
    steps: int
    reason: str = ""

    @property
    def heap(self) -> Heap:
        return self.state.heap


def classify_jump(caller_side: str, callee_side: str) -> str:
    """Jump kind from the sides on which the two functions are defined."""
    if caller_side == callee_side:
        return "internal"
    return "in" if caller_side == "ctx" else "out"


def classify_names(caller: Optional[str], callee: str, comp_defs, ctx_defs) -> str:
    """``classify_jump`` on function names; ``caller=None`` is top-level context code."""
    for name in (caller, callee):
        if name is not None and name not in comp_defs and name not in ctx_defs:
            raise KeyError(f"unresolvable function {name!r}")
    side = lambda n: "comp" if n in comp_defs else "ctx"
    return classify_jump("ctx" if caller is None else side(caller), side(callee))


class Machine:
    """Single- or multi-process interpreter; languages override the hooks."""

    lang = "lu"
    comparison_true, comparison_false = TRUE, FALSE
    integers = False

    def __init__(self, program: Program):
        self.program = program
        self.funs = program.funs
        self.comp = program.comp_names

    # -- sides and labels
    def side_of(self, fn: Optional[str], base: str = "ctx") -> str:
        if fn is None:
            return base
        return "comp" if fn in self.comp else "ctx"

    def top_side(self, proc: Proc, stack: Optional[tuple] = None) -> str:
        stack = proc.stack if stack is None else stack
        return self.side_of(stack[-1] if stack else None, proc.side)

    # -- expressions
    def eval(self, heap: Heap, e, proc: Proc):
        match e:
            case Lit(v):
                return v
            case Var(n):
                raise Stuck(f"free variable {n}")
            case Bin(op, l, r):
                return self.binop(op, self.eval(heap, l, proc), self.eval(heap, r, proc))
            case PairE(a, b):
                return Pair(self.eval(heap, a, proc), self.eval(heap, b, proc))
            case Proj(i, inner):
                v = self.eval(heap, inner, proc)
                if not isinstance(v, Pair):
                    raise Stuck(f"projection of non-pair {v!r}")
                return v.fst if i == 1 else v.snd
            case Deref(inner, cap):
                v = self.eval(heap, inner, proc)
                c = self.eval(heap, cap, proc) if cap is not None else None
                return self.deref(heap, v, c, proc)
        raise Stuck(f"unknown expression {e!r}")

    def binop(self, op, a, b):
        if type(a) is not int or type(b) is not int:
            raise Stuck(f"{op} on non-numbers {a!r}, {b!r}")
        if op == "+":
            return a + b
        if op == "*":
            return a * b
        if op == "-":
            if a < b and not self.integers:
                raise Stuck("subtraction below zero")
            return a - b
        holds = {"==": a == b, "<": a < b, ">": a > b}[op]
        return self.comparison_true if holds else self.comparison_false

    def deref(self, heap: Heap, v, cap, proc: Proc):
        if not isinstance(v, Loc) or v not in heap:
            raise Stuck(f"dereference of {v!r}")
        return heap.value(v)

    # -- statements
    def reduce(self, s, proc: Proc, heap: Heap) -> Red:
        match s:
            case Seq(Skip(), rest):
                return Red(rest)
            case Seq(first, rest):
                r = self.reduce(first, proc, heap)
                return replace(r, stmt=Seq(r.stmt, rest))
            case Let(x, e, body):
                return Red(subst(body, x, self.eval(heap, e, proc)))
            case Call(fn, e):
                return self.call(fn, self.eval(heap, e, proc), proc, heap)
            case Ret():
                return self.ret(proc, heap)
            case New(x, e, body):
                v = self.eval(heap, e, proc)
                addr, heap2 = self.alloc(heap, v, s)
                return Red(subst(body, x, addr), heap2)
            case Assign(target, e, cap):
                t = self.eval(heap, target, proc)
                v = self.eval(heap, e, proc)
                c = self.eval(heap, cap, proc) if cap is not None else None
                return Red(Skip(), self.assign(heap, t, v, c, proc))
            case Fork(body):
                return Red(Skip(), spawn=self.fork(body, proc))
            case Skip():
                raise Stuck("terminated")
        return self.reduce_other(s, proc, heap)

    def reduce_other(self, s, proc: Proc, heap: Heap) -> Red:
        match s:
            case If(c, then, other):
                v = self.eval(heap, c, proc)
                if not isinstance(v, Bool):
                    raise Stuck(f"if on non-boolean {v!r}")
                return Red(then if v.value else other)
        raise Stuck(f"no rule for {type(s).__name__} in {self.lang.upper()}")

    def call(self, fn: str, v, proc: Proc, heap: Heap) -> Red:
        f: Fun = self.funs.get(fn)
        if f is None:
            raise Stuck(f"call to undefined function {fn}")
        kind = classify_jump(self.top_side(proc), self.side_of(fn))
        label = None
        if kind == "in":
            label = Action(CALL, fn, v, heap)
        elif kind == "out":
            label = Action(CALLBACK, fn, v, heap)
        return Red(Seq(subst(f.body, f.param, v), Ret()), label=label,
                   stack=proc.stack + (fn,))

    def ret(self, proc: Proc, heap: Heap) -> Red:
        if not proc.stack:
            raise Stuck("return with empty stack")
        rest = proc.stack[:-1]
        kind = classify_jump(self.side_of(proc.stack[-1]), self.top_side(proc, rest))
        label = None
        if kind == "out":
            label = Action(RETURN, None, None, heap)
        elif kind == "in":
            label = Action(RETURNBACK, None, None, heap)
        return Red(Skip(), label=label, stack=rest)

    def alloc(self, heap: Heap, v, stmt):
        serials = [l.id for l in heap.cells if isinstance(l, Loc) and isinstance(l.id, int)]
        loc = Loc(max(serials, default=0) + 1)
        return loc, heap.set(loc, v)

    def assign(self, heap: Heap, target, v, cap, proc: Proc) -> Heap:
        if not isinstance(target, Loc) or target not in heap:
            raise Stuck(f"assignment to {target!r}")
        return heap.set(target, v, heap.annot(target))

    def fork(self, body, proc: Proc) -> Proc:
        raise Stuck(f"fork is not part of {self.lang.upper()}")

    # -- processes and soups
    def initial(self) -> State:
        return State(self.program.heap, (Proc(Call("main", Lit(0))),))

    def step(self, state: State, i: int = 0) -> Step:
        proc = state.procs[i]
        r = self.reduce(proc.stmt, proc, state.heap)
        new = Proc(r.stmt, proc.stack if r.stack is None else r.stack, proc.side)
        procs = state.procs[:i] + (new,) + state.procs[i + 1:]
        if r.spawn is not None:
            procs += (r.spawn,)
        heap = state.heap if r.heap is None else r.heap
        return Step(r.label, State(heap, procs), i)

    @staticmethod
    def finished(proc: Proc) -> bool:
        return isinstance(proc.stmt, Skip)

    def successors(self, state: State) -> list:
        """All steps available from ``state``, one per steppable process."""
        out = []
        for i, p in enumerate(state.procs):
            if self.finished(p):
                continue
            try:
                out.append(self.step(state, i))
            except Stuck:
                pass
        return out

    def run(self, state: Optional[State] = None, max_steps: int = 10_000,
            seed: Optional[int] = None,
            observer: Optional[Callable[[State, Step], None]] = None) -> RunResult:
        """Run until termination, stuckness or the step budget.

        With several processes, ``seed`` drives a uniform choice among the
        steppable ones; without a seed the first steppable process runs.
        Runs deeper than ``MAX_CALL_DEPTH`` nested calls count as diverged.
        """
        if max_steps <= 0:
            raise ValueError("max_steps must be positive")
        state = self.initial() if state is None else state
        rng = random.Random(seed)
        trace, steps = [], 0
        blocked = set()
        while True:
            live = [i for i, p in enumerate(state.procs) if not self.finished(p)]
            if not live:
                return RunResult(trace, state, "terminated", steps)
            if steps >= max_steps:
                return RunResult(trace, state, "diverged", steps)
            order = [i for i in live if i not in blocked]
            if seed is not None:
                rng.shuffle(order)
            st, reason = None, "no process can step"
            try:
                for i in order:
                    try:
                        st = self.step(state, i)
                        break
                    except Stuck as exc:
                        # stuckness only depends on the statement and the heap
                        blocked.add(i)
                        if len(live) == 1:
                            reason = str(exc)
            except RecursionError:
                # nesting too deep to interpret counts as running out of resources
                return RunResult(trace, state, "diverged", steps, "call depth exhausted")
            if st is None:
                return RunResult(trace, state, "stuck", steps, reason)
            if len(st.state.procs[st.proc].stack) > MAX_CALL_DEPTH:
                return RunResult(trace, state, "diverged", steps, "call depth exhausted")
            if st.state.heap is not state.heap:
                blocked.clear()
            if observer is not None:
                observer(state, st)
            if st.label is not None:
                trace.append(st.label)
            state = st.state
            steps += 1

# ---------------------------------------------------------------- linking


def check_link(ctx: Context, comp: Component) -> list:
    """Side conditions shared by every language's whole-program rule."""
    errors = []
    for name in sorted(set(ctx.funs) & set(comp.funs)):
        errors.append(f"duplicate-name: {name} is defined by both sides")
    if "main" not in ctx.funs:
        errors.append("missing-main: the context must define main")
    for name in comp.imports:
        if name not in ctx.funs:
            errors.append(f"uncovered-import: {name} is not provided by the context")
    defined = set(ctx.funs) | set(comp.funs)
    for side, funs in (("context", ctx.funs), ("component", comp.funs)):
        for f in funs.values():
            for callee in sorted(calls(f.body)):
                if callee not in defined:
                    errors.append(f"unresolved-call: {side} function {f.name} calls {callee}")
                elif side == "component" and callee not in comp.funs and callee not in comp.imports:
                    errors.append(f"undeclared-import: {f.name} calls {callee} without importing it")
            fv = free_vars(f.body) - {f.param}
            if side == "context" and comp.root is not None and comp.root.id in fv:
                continue  # reported as an attacker-condition violation
            if fv:
                errors.append(f"free-variable: {', '.join(sorted(fv))} in {side} function {f.name}")
    return errors


def mentions(ctx: Context, pred) -> bool:
    """True when some literal value in the context's code or heap satisfies ``pred``."""
    from .values import caps_in, locs_in
    for f in ctx.funs.values():
        for n in walk(f.body):
            if isinstance(n, Lit) and any(pred(x) for x in locs_in(n.value) + caps_in(n.value) + [n.value]):
                return True
    for loc, (v, _) in ctx.heap.items():
        if pred(loc) or any(pred(x) for x in locs_in(v) + caps_in(v)):
            return True
    return False


def plug(ctx: Context, comp: Component) -> Program:
    """Link an LU context and component into a whole program."""
    errors = check_link(ctx, comp)
    if comp.root is None:
        errors.append("missing-root: the component declares no root location")
    else:
        names_root = any(comp.root.id in free_vars(f.body) - {f.param} for f in ctx.funs.values())
        if names_root or mentions(ctx, lambda x: x == comp.root):
            errors.append(f"attacker-condition: the context mentions {comp.root!r}")
    if errors:
        raise LinkError(errors)
    heap = Heap(dict(ctx.heap)).set(comp.root, 0)
    return Program("lu", {**ctx.funs, **comp.funs}, frozenset(comp.funs), heap, comp, ctx)


def initial_state(program: Program) -> State:
    return machine(program).initial()


def machine(program: Program) -> Machine:
    return Machine(program)


def run(program: Program, max_steps: int = 10_000, **kw) -> RunResult:
    return machine(program).run(max_steps=max_steps, **kw)


def eval_expr(heap: Heap, e):
    """Evaluate a closed LU expression; raises ``Stuck``."""
    dummy = Program("lu", {}, frozenset(), heap, Component("lu", {}), Context("lu", {}))
    return Machine(dummy).eval(heap, e, Proc(Skip()))
