"""Trace-based backtranslation from LP traces to LU attacker contexts.

The generated context keeps two bookkeeping cells: ``li`` counts the actions
replayed so far (starting at 1) and ``lglob`` holds the list of locations the
context knows, as nested pairs ``<<loc, address>, rest>`` with ``0`` as the
empty list. Each target action becomes a block guarded by ``if !li == n``,
placed in the context function that is running when the action happens.

Target values can stand for several source values (``0`` is both ``0`` and
``true``), so the blocks are searched: candidates are enumerated in a fixed
order and each prefix is replayed against the source component.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

from . import lu
from .lu import CALL, CALLBACK, RETURN, RETURNBACK, Action, Heap, Stuck
from .lp import initial_heap as lp_initial_heap
from .relations import Bijection, infer_beta, trace_rel
from .syntax import (Assign, Bin, Call, Component, Context, Deref, Fun, If, Let, Lit, New, PairE,
                     Proj, Skip, Var, seq)
from .values import FALSE, KROOT, TRUE, Cap, Loc, Pair

COUNTER = Loc("li")
KNOWN = Loc("lglob")
HELPERS = ("main", "incrementCounter", "register", "update")


class BacktranslationError(Exception):
    """Malformed trace or interface."""


class Exhausted(Exception):
    def __init__(self, tried: int):
        super().__init__(f"no candidate context found within {tried} replays")
        self.tried = tried


# ---------------------------------------------------------------- values
#
# Candidate source values are templates rendered to expressions only when the
# registration count at the point of use is known:
#   ("lit", v)        a closed source value
#   ("ref", n)        the location registered for target address n
#   ("pair", a, b)    a pair of templates


def lookup(n: int, known: tuple) -> object:
    """Expression for the location registered for address ``n``.

    ``register`` prepends, so the element for the i-th registration sits
    ``len(known) - 1 - i`` steps down the list.
    """
    addrs = [a for a, _ in known]
    if n not in addrs:
        raise BacktranslationError(f"address {n} is not known to the context")
    e = Deref(Lit(KNOWN))
    for _ in range(len(addrs) - 1 - addrs.index(n)):
        e = Proj(2, e)
    return Proj(1, Proj(1, e))


def render(t, known: tuple):
    match t:
        case ("lit", v):
            return Lit(v)
        case ("ref", n):
            return lookup(n, known)
        case ("pair", a, b):
            return PairE(render(a, known), render(b, known))
    raise ValueError(t)


def has_ref(t) -> bool:
    return t[0] == "ref" or (t[0] == "pair" and (has_ref(t[1]) or has_ref(t[2])))


def bt_value(vt, known: dict) -> list:
    """Source candidates for target value ``vt``, numbers before booleans.

    ``known`` maps addresses the context knows to their current tag.
    """
    match vt:
        case 0:
            return [("lit", 0), ("lit", TRUE)]
        case int() if vt > 0:
            return [("lit", vt), ("lit", FALSE)]
        case int():
            raise BacktranslationError(f"negative number {vt} in an LP trace")
        case Cap():
            return [("lit", 0)]
        case Pair(n, c):
            out = []
            if type(n) is int and n in known:
                tag = known[n]
                if tag is None or tag == c:
                    out.append(("ref", n))
                    if tag is not None:
                        return out
            out += [("pair", a, b) for a, b in itertools.product(bt_value(n, known), bt_value(c, known))]
            return out
    raise BacktranslationError(f"unknown target value {vt!r}")


def ambiguity(vt) -> int:
    """Number of atoms in ``vt`` with more than one source counterpart."""
    match vt:
        case int() if type(vt) is int:
            return 1
        case Pair(a, b):
            return ambiguity(a) + ambiguity(b)
    return 0

# ---------------------------------------------------------------- skeleton


def _if(cond, then):
    return If(cond, then, Skip())


def counter_is(n: int):
    return Bin("==", Deref(Lit(COUNTER)), Lit(n))


def increment():
    return Call("incrementCounter", Lit(0))


def register(x, n: int):
    return Call("register", PairE(x, Lit(n)))


def helpers() -> dict:
    """incrementCounter, register and update, as LU functions."""
    inc = Let("c", Deref(Lit(COUNTER)), Assign(Lit(COUNTER), Bin("+", Var("c"), Lit(1))))
    reg = Let("l", Deref(Lit(KNOWN)), Assign(Lit(KNOWN), PairE(Var("x"), Var("l"))))
    # update(<<m, u>, list>): walk the list, write u into the location paired with m;
    # stuck on the empty list
    x = Var("x")
    upd = Let("m", Proj(1, Proj(1, x)), Let("u", Proj(2, Proj(1, x)), Let(
        "e", Proj(1, Proj(2, x)),
        If(Bin("==", Proj(2, Var("e")), Var("m")),
           Assign(Proj(1, Var("e")), Var("u")),
           Call("update", PairE(PairE(Var("m"), Var("u")), Proj(2, Proj(2, x))))))))
    return {
        "incrementCounter": Fun("incrementCounter", "x", inc),
        "register": Fun("register", "x", reg),
        "update": Fun("update", "x", upd),
    }


def bt_skeleton(interfaces) -> Context:
    """Bookkeeping heap, helpers, ``main`` and one stub per interface name."""
    clash = sorted(set(interfaces) & set(HELPERS))
    if clash:
        raise BacktranslationError(f"interface names clash with helper names: {clash}")
    funs = {"main": Fun("main", "x", increment())}
    funs.update(helpers())
    for f in interfaces:
        funs[f] = Fun(f, "x", increment())
    heap = {COUNTER: (1, None), KNOWN: (0, None)}
    return Context("lu", funs, heap)

# ---------------------------------------------------------------- actions


@dataclass(frozen=True)
class BtState:
    index: int = 1
    heap_pre: Heap = field(default_factory=lp_initial_heap)
    known: tuple = ()  # (address, tag) in registration order
    stack: tuple = ("main",)


@dataclass(frozen=True)
class BtBlock:
    index: int
    fn: str
    stmt: object


def _calls_update(m: int, u, known):
    return Call("update", PairE(PairE(Lit(m), render(u, known)), Deref(Lit(KNOWN))))


def _input_block(action: Action, st: BtState, comp_funs) -> Iterator[tuple]:
    """Blocks for a call or a returnback: recreate the attacker's heap changes."""
    heap = action.heap
    new = sorted(a for a in heap.cells if a not in st.heap_pre.cells and a != 0)
    known_after = st.known + tuple((a, heap.annot(a)) for a in new)
    kmap = {a: heap.annot(a) for a, _ in known_after}
    old = [a for a, _ in st.known]
    changed = [a for a in old if a in heap and heap.value(a) != st.heap_pre.value(a)]
    slots = [heap.value(a) for a in new] + [heap.value(a) for a in changed]
    if action.kind == CALL:
        slots.append(action.val)
    options = [bt_value(v, kmap) for v in slots]
    if action.kind == CALL:
        if not st.stack or st.stack[0] in comp_funs:
            raise BacktranslationError(f"call at action {st.index} while the component runs")
        fn, stack = st.stack[0], (action.fn,) + st.stack
    else:
        if len(st.stack) < 2 or st.stack[0] in comp_funs:
            raise BacktranslationError(f"returnback at action {st.index} without a pending callback")
        fn, stack = st.stack[0], st.stack[1:]
    nxt = BtState(st.index + 1, heap, known_after, stack)
    for choice in itertools.product(*options):
        body, deferred = [], []
        if action.kind == CALL:
            body.append(increment())
        known = st.known
        for j, (a, t) in enumerate(zip(new, choice)):
            x = f"x{j + 1}"
            init = t
            if has_ref(t):
                init, deferred = ("lit", 0), deferred + [(a, t)]
            known = known + ((a, heap.annot(a)),)
            body.append(New(x, render(init, known), register(Var(x), a)))
        for a, t in deferred:
            body.append(_calls_update(a, t, known))
        for a, t in zip(changed, choice[len(new):]):
            body.append(_calls_update(a, t, known))
        if action.kind == CALL:
            body.append(Call(action.fn, render(choice[-1], known)))
        stmt = _if(counter_is(st.index), seq(*body) if body else Skip())
        yield BtBlock(st.index, fn, stmt), nxt


def reachable(heap: Heap, start: list, known: tuple) -> list:
    """Cells newly reachable by the context, each with a source path to it.

    ``start`` lists ``(target value, source expression)`` roots. A pair
    ``<n, k>`` counts as a location when cell ``n`` is tagged with ``k``.
    """
    seen = {a for a, _ in known}
    found = []
    queue = list(start) + [(heap.value(a), Deref(lookup(a, known))) for a, _ in known if a in heap]
    while queue:
        v, e = queue.pop(0)
        if not isinstance(v, Pair):
            continue
        n, c = v.fst, v.snd
        if type(n) is int and n in heap and isinstance(c, Cap) and heap.annot(n) == c:
            if n not in seen:
                seen.add(n)
                found.append((n, e))
                queue.append((heap.value(n), Deref(e)))
            continue
        queue.append((v.fst, Proj(1, e)))
        queue.append((v.snd, Proj(2, e)))
    return found


def _output_block(action: Action, st: BtState, comp_funs) -> tuple:
    """Block for a callback or return: register what the context can now reach."""
    heap = action.heap
    if action.kind == CALLBACK:
        if not st.stack or st.stack[0] not in comp_funs:
            raise BacktranslationError(f"callback at action {st.index} while the context runs")
        fn, stack = action.fn, (action.fn,) + st.stack
        start = [(action.val, Var("x"))]
    else:
        if len(st.stack) < 2 or st.stack[0] not in comp_funs:
            raise BacktranslationError(f"return at action {st.index} without a pending call")
        stack = st.stack[1:]
        fn, start = stack[0], []
    body = [increment()]
    known = st.known
    for j, (n, e) in enumerate(reachable(heap, start, st.known)):
        # paths refer to registrations made before this block
        e = _shift(e, st.known, known)
        body.append(Let(f"l{j + 1}", e, register(Var(f"l{j + 1}"), n)))
        known = known + ((n, heap.annot(n)),)
    nxt = BtState(st.index + 1, heap, known, stack)
    return BtBlock(st.index, fn, _if(counter_is(st.index), seq(*body))), nxt


def _shift(e, before: tuple, now: tuple):
    """Re-target list lookups after ``len(now) - len(before)`` prepends."""
    extra = len(now) - len(before)
    if extra == 0:
        return e

    def walk(x):
        match x:
            case Deref(Lit(v), None) if v == KNOWN:
                out = x
                for _ in range(extra):
                    out = Proj(2, out)
                return out
            case Proj(i, inner):
                return Proj(i, walk(inner))
            case Deref(inner, cap):
                return Deref(walk(inner), cap)
        return x
    return walk(e)


def bt_action(action: Action, st: BtState, comp_funs=frozenset()) -> Iterator[tuple]:
    """All ``(block, next state)`` candidates for one action, in canonical order."""
    if action.kind in (CALL, RETURNBACK):
        yield from _input_block(action, st, comp_funs)
    elif action.kind in (CALLBACK, RETURN):
        yield _output_block(action, st, comp_funs)
    else:
        raise BacktranslationError(f"unknown action kind {action.kind!r}")


def bt_join(skeleton: Context, blocks: list) -> Context:
    """Put every block into its function, in ascending index order, before
    the trailing counter increment."""
    funs = dict(skeleton.funs)
    for fn in dict.fromkeys(b.fn for b in blocks):
        if fn not in funs:
            raise BacktranslationError(f"block for unknown function {fn}")
        mine = sorted((b for b in blocks if b.fn == fn), key=lambda b: b.index)
        f = funs[fn]
        funs[fn] = replace(f, body=seq(*[b.stmt for b in mine], f.body))
    return Context(skeleton.lang, funs, dict(skeleton.heap))

# ---------------------------------------------------------------- search


@dataclass
class Replay:
    trace: list
    counter: Optional[int]
    status: str
    reason: str = ""


def replay(ctx: Context, comp: Component, n_actions: int, max_steps: int = 10_000) -> Replay:
    """Run the context with the component for ``n_actions`` actions.

    After an output action the run continues until the counter moves past
    the action's index, so its registration block has run.
    """
    try:
        program = lu.plug(ctx, comp)
    except lu.LinkError as exc:
        return Replay([], None, "link-error", str(exc))
    m = lu.machine(program)
    state, trace = m.initial(), []

    def counter(s):
        return s.heap.value(COUNTER)

    if n_actions == 0:
        return Replay([], counter(state), "ok")
    for _ in range(max_steps):
        if m.finished(state.proc):
            return Replay(trace, counter(state), "terminated")
        try:
            st = m.step(state)
        except Stuck as exc:
            return Replay(trace, counter(state), "stuck", str(exc))
        state = st.state
        if st.label is not None:
            if len(trace) == n_actions:
                return Replay(trace, counter(state), "extra-action")
            trace.append(st.label)
        if len(trace) == n_actions:
            last = trace[-1]
            if last.dir == "?" or counter(state) == n_actions + 1:
                return Replay(trace, counter(state), "ok")
    return Replay(trace, counter(state), "diverged")


@dataclass
class BtResult:
    context: Context
    source_trace: list
    beta: Bijection
    counter: int
    replays: int


def default_budget(trace: list) -> int:
    amb = sum(ambiguity(v) for a in trace for v in _input_values(a))
    return (len(trace) + 1) * 4 ** amb


def _input_values(a: Action) -> list:
    if a.dir != "?":
        return []
    vals = [v for v, _ in a.heap.cells.values()]
    return vals + ([a.val] if a.kind == CALL else [])


def check_trace(trace: list):
    """Well-formedness: calls and callbacks nest like brackets, starting with a call."""
    depth = []
    for i, a in enumerate(trace, 1):
        if a.kind == CALL:
            if depth and depth[-1] == CALL:
                raise BacktranslationError(f"action {i}: call while the component runs")
            depth.append(CALL)
        elif a.kind == CALLBACK:
            if not depth or depth[-1] != CALL:
                raise BacktranslationError(f"action {i}: callback while the context runs")
            depth.append(CALLBACK)
        elif a.kind == RETURN:
            if not depth or depth.pop() != CALL:
                raise BacktranslationError(f"action {i}: return without a pending call")
        elif a.kind == RETURNBACK:
            if not depth or depth.pop() != CALLBACK:
                raise BacktranslationError(f"action {i}: returnback without a pending callback")
        else:
            raise BacktranslationError(f"action {i}: unknown kind {a.kind!r}")


def backtranslate(interfaces, trace: list, comp: Component, budget: Optional[int] = None,
                  max_steps: int = 10_000) -> BtResult:
    """Search for an LU context that, linked with ``comp``, produces a trace
    related to the LP ``trace``. Raises ``Exhausted`` past ``budget`` replays."""
    check_trace(trace)
    if comp.root is None:
        raise BacktranslationError("the component declares no root location")
    if {COUNTER, KNOWN} & {comp.root}:
        raise BacktranslationError(f"the root location may not be named {comp.root!r}")
    clash = sorted(set(comp.funs) & set(HELPERS))
    if clash:
        raise BacktranslationError(f"component function names clash with helper names: {clash}")
    skeleton = bt_skeleton(interfaces)
    beta0 = Bijection.of([(comp.root, 0, KROOT)])
    ignore = {COUNTER, KNOWN}
    budget = default_budget(trace) if budget is None else budget
    tried = 0

    def related(ctx, n):
        nonlocal tried
        tried += 1
        r = replay(ctx, comp, n, max_steps)
        if r.status != "ok" or r.counter != n + 1:
            return None
        beta = infer_beta(beta0, r.trace, trace[:n], ignore)
        if beta is None or not trace_rel(beta, r.trace, trace[:n], ignore):
            return None
        return r, beta

    def search(blocks, st):
        if st.index > len(trace):
            return blocks
        for block, nxt in bt_action(trace[st.index - 1], st, comp.funs):
            if tried >= budget:
                raise Exhausted(tried)
            if related(bt_join(skeleton, blocks + [block]), st.index) is None:
                continue
            out = search(blocks + [block], nxt)
            if out is not None:
                return out
        return None

    if not trace:
        return BtResult(skeleton, [], beta0, 1, 0)
    blocks = search([], BtState())
    if blocks is None:
        raise Exhausted(tried)
    ctx = bt_join(skeleton, blocks)
    r, beta = related(ctx, len(trace))
    return BtResult(ctx, r.trace, beta, r.counter, tried)
