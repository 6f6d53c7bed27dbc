"""Safety monitors: finite automata whose transitions are guarded by heap
patterns, plus the bounded checker deciding whether a source and a target
monitor simulate each other on related heaps.

Patterns only mention paths from the monitored roots, never addresses, so
verdicts are invariant under renaming of locations.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass, field, replace
from typing import Optional, Union

from . import la
from .lu import Action, Heap
from .parser import Parser, ParseError, const_value
from .syntax import show_value
from .values import FALSE, KROOT, TRUE, UNIT, Bool, Cap, Loc, Pair, Unit, caps_in, locs_in

# ---------------------------------------------------------------- patterns

VAL = "val"
SHAPES = ("nat", "bool", "pair", "loc", "unit")
NUMERIC = ("<", ">", "<=", ">=")
OPS = ("==", "!=") + NUMERIC


@dataclass(frozen=True)
class Path:
    root: Union[str, int]  # "root" or the index of a monitored cell
    steps: tuple = ()  # each "val", 1 or 2

    def __repr__(self):
        head = "root" if self.root == "root" else f"mon[{self.root}]"
        return head + "".join(f".{s}" for s in self.steps)


@dataclass(frozen=True)
class IsShape:
    path: Path
    shape: str

    def __repr__(self):
        return f"{self.path!r} is {self.shape}"


@dataclass(frozen=True)
class Compare:
    left: object  # Path or constant value
    op: str
    right: object

    def __repr__(self):
        side = lambda x: repr(x) if isinstance(x, Path) else show_value(x)
        return f"{side(self.left)} {self.op} {side(self.right)}"


@dataclass(frozen=True)
class WellTyped:
    def __repr__(self):
        return "welltyped"


@dataclass(frozen=True)
class Transition:
    src: str
    guard: tuple  # conjunction; empty means always
    dst: str


@dataclass(frozen=True)
class Monitor:
    """``root`` is the root location (LU), ``KROOT`` (LP), the store
    environment Δ (LA) or the initial monitored heap H0 (LC, LI)."""

    lang: str
    states: tuple
    transitions: tuple
    init: str
    root: object
    current: Optional[str] = None

    def __post_init__(self):
        if self.current is None:
            object.__setattr__(self, "current", self.init)

    def paths(self):
        for t in self.transitions:
            for c in t.guard:
                for side in (getattr(c, "path", None), getattr(c, "left", None), getattr(c, "right", None)):
                    if isinstance(side, Path):
                        yield side

    def literals(self):
        for t in self.transitions:
            for c in t.guard:
                if isinstance(c, Compare):
                    for side in (c.left, c.right):
                        if not isinstance(side, Path):
                            yield side

# ---------------------------------------------------------------- reach / restrict


def reach_lu(root, heap: Heap) -> set:
    """Locations reachable from ``root`` by following stored locations."""
    if root not in heap:
        return set()
    seen, todo = {root}, [root]
    while todo:
        for l in locs_in(heap.value(todo.pop())):
            if l in heap and l not in seen:
                seen.add(l)
                todo.append(l)
    return seen


def reach_lp(heap: Heap, root_cap=KROOT) -> set:
    """Addresses readable by an expression knowing address 0 and ``root_cap``.

    Numbers can be guessed, so every public cell is reachable; a protected
    cell is reachable once its capability is readable from a reachable cell.
    """
    caps, seen = {root_cap}, set()
    while True:
        now = {a for a, (_, tag) in heap.cells.items() if tag is None or tag in caps}
        found = {k for a in now for k in caps_in(heap.value(a))}
        if now == seen and found <= caps:
            return seen
        seen, caps = now, caps | found


def region(monitor: Monitor) -> list:
    """Monitored cells in declaration order, for ``mon[i]`` paths."""
    match monitor.lang:
        case "lu":
            return [monitor.root]
        case "lp":
            return [0]
        case "la":
            return list(monitor.root)
    return list(monitor.root)


def restrict(heap: Heap, monitor: Monitor) -> Heap:
    match monitor.lang:
        case "lu":
            return heap.restrict(reach_lu(monitor.root, heap))
        case "lp":
            return heap.restrict(reach_lp(heap))
        case "la":
            return heap
    return heap.restrict(set(monitor.root))


class View:
    """Path evaluation over a restricted heap with language-specific deref."""

    def __init__(self, monitor: Monitor, heap: Heap):
        self.m = monitor
        self.full = heap
        self.heap = restrict(heap, monitor)
        self.cells = region(monitor)

    def start(self, root):
        lang = self.m.lang
        if root == "root":
            if lang in ("lu", "lp"):
                return self.m.root if lang == "lu" else Pair(0, KROOT)
            return None
        if not 0 <= root < len(self.cells):
            return None
        addr = self.cells[root]
        if lang in ("lu", "la", "li"):
            return addr
        if lang == "lp":
            return Pair(0, KROOT)
        tag = self.m.root[addr][1]
        return Pair(addr, 0 if tag is None else tag)

    def deref(self, v):
        h = self.heap
        if self.m.lang in ("lu", "la"):
            return h.value(v) if isinstance(v, Loc) and v in h else None
        if self.m.lang == "li":
            return h.value(v) if type(v) is int and v in h else None
        if isinstance(v, Pair) and type(v.fst) is int and v.fst in h:
            tag = h.annot(v.fst)
            if tag is None or tag == v.snd:
                return h.value(v.fst)
        return None

    def path(self, p: Path):
        v = self.start(p.root)
        for s in p.steps:
            if v is None:
                return None
            if s == VAL:
                v = self.deref(v)
            elif isinstance(v, Pair):
                v = v.fst if s == 1 else v.snd
            else:
                return None
        return v

    def operand(self, x):
        return self.path(x) if isinstance(x, Path) else x

    def holds(self, c) -> bool:
        match c:
            case WellTyped():
                return self.m.lang == "la" and la.heap_ok(self.full, self.m.root)
            case IsShape(p, shape):
                v = self.path(p)
                if v is None:
                    return False
                return {"nat": type(v) is int, "bool": isinstance(v, Bool),
                        "pair": isinstance(v, Pair), "unit": isinstance(v, Unit),
                        "loc": self.deref(v) is not None}[shape]
            case Compare(left, op, right):
                a, b = self.operand(left), self.operand(right)
                if a is None or b is None:
                    return False
                if op in NUMERIC:
                    if type(a) is not int or type(b) is not int:
                        return False
                    return {"<": a < b, ">": a > b, "<=": a <= b, ">=": a >= b}[op]
                if locs_in(a) or locs_in(b) or caps_in(a) or caps_in(b):
                    return False
                return (a == b) == (op == "==")
        raise TypeError(f"unknown constraint {c!r}")


def enabled(monitor: Monitor, heap: Heap) -> list:
    """Transitions from the current state whose guard holds on ``heap``."""
    if monitor.lang == "la" and not la.heap_ok(heap, monitor.root):
        return []
    view = View(monitor, heap)
    return [t for t in monitor.transitions
            if t.src == monitor.current and all(view.holds(c) for c in t.guard)]


def mon_step(monitor: Monitor, heap: Heap) -> Optional[Monitor]:
    """The monitor after one heap, or ``None`` when it refuses."""
    ts = enabled(monitor, heap)
    return replace(monitor, current=ts[0].dst) if ts else None


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    at: Optional[int] = None  # 1-based index of the refused action
    monitor: Optional[Monitor] = None

    def to_json(self) -> str:
        if self.accepted:
            return json.dumps({"verdict": "accept"})
        return json.dumps({"verdict": "reject", "at": self.at})


def strip(trace) -> list:
    return [a.heap if isinstance(a, Action) else a for a in trace]


def trace_verdict(monitor: Monitor, trace) -> Verdict:
    m = monitor
    for i, heap in enumerate(strip(trace), 1):
        nxt = mon_step(m, heap)
        if nxt is None:
            return Verdict(False, i, m)
        m = nxt
    return Verdict(True, None, m)


def monitor_agree(monitor: Monitor, comp) -> list:
    """Mismatches between a monitor's root descriptor and a component."""
    match monitor.lang:
        case "lu":
            ok = monitor.root == comp.root
        case "lp":
            ok = monitor.root == KROOT
        case "la":
            ok = dict(monitor.root) == dict(comp.delta)
        case _:
            ok = dict(monitor.root) == dict(comp.heap0)
    if monitor.lang != comp.lang:
        return [f"language mismatch: monitor {monitor.lang}, component {comp.lang}"]
    return [] if ok else [f"root mismatch: monitor watches {monitor.root!r}"]


def determinism_violations(monitor: Monitor, heaps) -> list:
    """States and heaps on which two transitions to different states fire."""
    out = []
    for s in monitor.states:
        m = replace(monitor, current=s)
        for h in heaps:
            dsts = {t.dst for t in enabled(m, h)}
            if len(dsts) > 1:
                out.append((s, h))
                break
    return out

# ---------------------------------------------------------------- text format


def parse_monitor(text: str, lang: str) -> Monitor:
    p = Parser(text, lang)
    word = lambda w: p.tok[1] == w

    def take_word(w):
        if not word(w):
            p.error(f"expected {w!r}")
        p.take()

    take_word("monitor")
    p.expect("{")
    states, trans, init, root = [], [], None, None
    if lang == "lp":
        root = KROOT
    while not p.at("}"):
        if word("root"):
            p.take()
            if lang == "lu":
                root = Loc(p.ident())
            elif lang == "lp":
                p.expect("kroot")
            else:
                p.error(f"{lang.upper()} monitors declare a store or heap, not a root")
            p.expect(";")
        elif word("states"):
            p.take()
            while p.tok[0] == "id":
                states.append(p.take()[1])
            p.expect(";")
        elif word("init"):
            p.take()
            init = p.ident()
            p.expect(";")
        elif word("delta") and lang == "la":
            p.take()
            p.expect("{")
            root = {}
            while not p.at("}"):
                name = p.ident()
                p.expect(":")
                root[Loc(name)] = p.type_()
                p.expect(";")
            p.take()
        elif word("heap") and lang in ("lc", "li"):
            p.take()
            p.expect("{")
            root = {}
            while not p.at("}"):
                addr = p.atom().value
                p.expect("=")
                v = p.value()
                tag = None
                if lang == "lc":
                    p.expect(":")
                    if p.at("bot"):
                        p.take()
                    else:
                        tag = p.value()
                p.expect(";")
                root[addr] = (v, tag)
            p.take()
        elif word("trans"):
            p.take()
            src = p.ident()
            p.expect("->")
            dst = p.ident()
            guard = []
            if word("when"):
                p.take()
                guard = _guard(p)
            p.expect(";")
            trans.append(Transition(src, tuple(guard), dst))
        else:
            p.error("expected a monitor declaration")
    p.take()
    p.expect_eof()
    if root is None:
        raise ParseError("monitor declares no root")
    if init is None or init not in states:
        raise ParseError("monitor needs an init state among its states")
    for t in trans:
        if t.src not in states or t.dst not in states:
            raise ParseError(f"transition {t.src} -> {t.dst} uses an undeclared state")
    return Monitor(lang, tuple(states), tuple(trans), init, root)


def _path(p: Parser) -> Path:
    if p.tok[1] == "root":
        p.take()
        root = "root"
    else:
        p.take()  # mon
        p.expect("[")
        root = int(p.take()[1])
        p.expect("]")
    steps = []
    while p.at("."):
        p.take()
        t = p.take()
        if t[1] == "val":
            steps.append(VAL)
        elif t[1] in ("1", "2"):
            steps.append(int(t[1]))
        else:
            p.error("path steps are .val, .1 or .2", t)
    return Path(root, tuple(steps))


def _operand(p: Parser):
    if p.tok[1] in ("root", "mon"):
        return _path(p)
    tok = p.tok
    v = const_value(p.add_expr())
    if v is None:
        p.error("expected a path or a constant", tok)
    return v


def _guard(p: Parser) -> list:
    out = []
    while True:
        if p.tok[1] == "true":
            p.take()
        elif p.tok[1] == "welltyped":
            p.take()
            out.append(WellTyped())
        else:
            left = _operand(p)
            if p.tok[1] == "is":
                p.take()
                shape = p.take()[1]
                if shape not in SHAPES or not isinstance(left, Path):
                    p.error(f"shape must be one of {', '.join(SHAPES)}")
                out.append(IsShape(left, shape))
            else:
                op = p.take()[1]
                if op not in OPS:
                    p.error("expected a comparison")
                out.append(Compare(left, op, _operand(p)))
        if p.tok[1] != "and":
            return out
        p.take()


def show_monitor(m: Monitor) -> str:
    lines = ["monitor {"]
    match m.lang:
        case "lu":
            lines.append(f"  root {show_value(m.root)};")
        case "lp":
            lines.append("  root kroot;")
        case "la":
            lines.append("  delta { " + " ".join(f"{show_value(l)} : {t!r};" for l, t in m.root.items()) + " }")
        case _:
            cells = []
            for a, (v, tag) in m.root.items():
                ann = "" if m.lang == "li" else " : " + ("bot" if tag is None else show_value(tag))
                cells.append(f"{a} = {show_value(v)}{ann};")
            lines.append("  heap { " + " ".join(cells) + " }")
    lines.append(f"  states {' '.join(m.states)};")
    lines.append(f"  init {m.init};")
    for t in m.transitions:
        guard = " and ".join(map(repr, t.guard))
        lines.append(f"  trans {t.src} -> {t.dst}" + (f" when {guard}" if guard else "") + ";")
    lines.append("}")
    return "\n".join(lines) + "\n"

# ---------------------------------------------------------------- type conformance


def conformance_monitor(delta: dict, heap0: dict, lang: str) -> Monitor:
    """Single-state target monitor requiring every monitored cell of a
    compiled component to keep the shape of its source type.

    References are checked for their shape only (an address/capability pair
    in LC, a number in LI): they may point at trusted cells allocated later,
    which lie outside the monitored region.
    """
    guard = []

    def shape(path: Path, t):
        match t:
            case la.TBool() | la.TNat():
                guard.append(IsShape(path, "nat"))
            case la.TProd(a, b):
                guard.append(IsShape(path, "pair"))
                shape(Path(path.root, path.steps + (1,)), a)
                shape(Path(path.root, path.steps + (2,)), b)
            case la.TRef():
                guard.append(IsShape(path, "pair" if lang == "lc" else "nat"))

    for i, (_, t) in enumerate(la.initial_cells(delta).values()):
        shape(Path(i, (VAL,)), t)
    return Monitor(lang, ("ok",), (Transition("ok", tuple(guard), "ok"),), "ok", dict(heap0))


def typing_monitor(delta: dict) -> Monitor:
    """The LA monitor: one state, steps whenever the heap respects Δ."""
    return Monitor("la", ("ok",), (Transition("ok", (), "ok"),), "ok", dict(delta))

# ---------------------------------------------------------------- relation checker


@dataclass
class RelResult:
    status: str  # related | counterexample | bound-exhausted
    states: Optional[tuple] = None
    source_heap: Optional[Heap] = None
    target_heap: Optional[Heap] = None
    reason: str = ""
    heaps_checked: int = 0
    trail: list = field(default_factory=list)


def _trie(paths) -> dict:
    root = {}
    for p in paths:
        node = root
        for s in p.steps:
            node = node.setdefault(s, {})
    return root


def _atoms(monitors) -> list:
    atoms = [0, 1, 2, TRUE, FALSE, UNIT]
    for m in monitors:
        for lit in m.literals():
            if type(lit) is int:
                for n in (lit - 1, lit, lit + 1):
                    if n >= 0 and n not in atoms:
                        atoms.append(n)
            elif lit not in atoms and not locs_in(lit) and not caps_in(lit):
                atoms.append(lit)
    return atoms


def source_heaps(root: Loc, trie: dict, depth: int, width: int, atoms: list):
    """Source heaps whose shape follows the guard paths, up to ``depth``
    nesting levels and ``width`` cells besides the root."""
    pending = object()

    def gen(node, d, cells):
        for a in atoms:
            yield a, cells
        if d <= 0:
            return
        if 1 in node or 2 in node or not node:
            if 1 in node or 2 in node:
                for v1, c1 in gen(node.get(1, {}), d - 1, cells):
                    for v2, c2 in gen(node.get(2, {}), d - 1, c1):
                        yield Pair(v1, v2), c2
            else:
                yield Pair(0, 0), cells
        if VAL in node or not node:
            for l in list(cells):
                yield l, cells
            if len(cells) - 1 < width:
                new = Loc(len(cells))
                grown = {**cells, new: pending}
                if VAL in node:
                    for v, c in gen(node[VAL], d - 1, grown):
                        yield new, {**c, new: v} if c[new] is pending else c
                else:
                    yield new, {**grown, new: 0}

    for v, cells in gen(trie.get(VAL, {}), depth, {root: pending}):
        cells = {**cells, root: v}
        if any(c is pending for c in cells.values()):
            continue
        yield Heap({l: (c, None) for l, c in cells.items()})


def _translate(v, beta: dict, false_value: int):
    match v:
        case Bool(b):
            return 0 if b else false_value
        case Unit():
            return 0
        case Loc():
            n, tag = beta[v]
            return Pair(n, 0 if tag is None else tag)
        case Pair(a, b):
            return Pair(_translate(a, beta, false_value), _translate(b, beta, false_value))
    return v


def related_targets(hs: Heap, root: Loc, rng: random.Random, extra: int):
    """Target heaps related to ``hs`` under β's that map ``root`` to
    ``(0, kroot)``: canonical ones plus ``extra`` random variants."""
    others = [l for l in hs.cells if l != root]
    plans = []
    for tagged, false_value in ((True, 1), (False, 2)):
        plans.append(([i + 1 for i in range(len(others))], [tagged] * len(others), false_value))
    for _ in range(extra):
        addrs = rng.sample(range(1, len(others) + 6), len(others))
        plans.append((addrs, [rng.random() < 0.5 for _ in others], rng.randint(1, 5)))
    for addrs, tags, false_value in plans:
        beta = {root: (0, KROOT)}
        for i, (l, a, t) in enumerate(zip(others, addrs, tags)):
            beta[l] = (a, Cap(f"k{i + 1}") if t else None)
        cells = {n: (_translate(hs.value(l), beta, false_value), tag) for l, (n, tag) in beta.items()}
        caps = frozenset(tag for _, tag in beta.values() if tag is not None)
        yield Heap(cells, caps), [(l, n, tag) for l, (n, tag) in beta.items()]


def monitor_rel_check(ms: Monitor, mt: Monitor, depth: int = 3, width: int = 2,
                      seed: int = 0, random_variants: int = 2,
                      max_heaps: int = 200_000) -> RelResult:
    """Bounded check that an LU monitor and an LP monitor simulate each other."""
    if ms.lang != "lu" or mt.lang != "lp":
        raise ValueError("the relation is defined between an LU and an LP monitor")
    paths = list(ms.paths()) + list(mt.paths())
    if any(p.root not in ("root", 0) for p in paths):
        return RelResult("bound-exhausted", reason="guards mention cells other than the root")
    if any(len(p.steps) - 1 > depth for p in paths):
        return RelResult("bound-exhausted", reason="guard paths exceed the depth bound")
    rng = random.Random(seed)
    trie = _trie(paths)
    atoms = _atoms((ms, mt))
    pairs = []
    for hs in source_heaps(ms.root, trie, depth, width, atoms):
        for ht, _ in related_targets(hs, ms.root, rng, random_variants):
            pairs.append((hs, ht))
            if len(pairs) > max_heaps:
                return RelResult("bound-exhausted", reason="heap enumeration exceeded its cap",
                                 heaps_checked=len(pairs))
    start = [(ms.init, mt.init), (ms.current, mt.current)]
    seen, todo, parent = set(), [], {}
    for sp in start:
        if sp not in seen:
            seen.add(sp)
            todo.append(sp)
    while todo:
        s, t = todo.pop(0)
        msc, mtc = replace(ms, current=s), replace(mt, current=t)
        for hs, ht in pairs:
            a, b = mon_step(msc, hs), mon_step(mtc, ht)
            if (a is None) != (b is None):
                trail = [(s, t)]
                while trail[-1] in parent:
                    trail.append(parent[trail[-1]])
                side = "source" if a is not None else "target"
                return RelResult("counterexample", (s, t), hs, ht,
                                 f"only the {side} monitor steps", len(pairs), trail[::-1])
            if a is not None:
                nxt = (a.current, b.current)
                if nxt not in seen:
                    seen.add(nxt)
                    parent[nxt] = (s, t)
                    todo.append(nxt)
    return RelResult("related", heaps_checked=len(pairs))
