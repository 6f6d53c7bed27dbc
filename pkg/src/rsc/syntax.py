"""Abstract syntax shared by all five languages.

One AST covers every language; each interpreter accepts the subset its
grammar allows. Binders are plain names and substitution is eager.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from .values import Bool, Cap, Loc, Pair, Unit, Value

# ---------------------------------------------------------------- types (LA)


@dataclass(frozen=True)
class TBool:
    def __repr__(self):
        return "Bool"


@dataclass(frozen=True)
class TNat:
    def __repr__(self):
        return "Nat"


@dataclass(frozen=True)
class TUn:
    def __repr__(self):
        return "UN"


@dataclass(frozen=True)
class TProd:
    fst: "Type"
    snd: "Type"

    def __repr__(self):
        left = f"({self.fst!r})" if isinstance(self.fst, TProd) else repr(self.fst)
        return f"{left} * {self.snd!r}"


@dataclass(frozen=True)
class TRef:
    inner: "Type"

    def __repr__(self):
        inner = f"({self.inner!r})" if isinstance(self.inner, TProd) else repr(self.inner)
        return f"Ref {inner}"


Type = Union[TBool, TNat, TUn, TProd, TRef]
BOOL, NAT, UN = TBool(), TNat(), TUn()
SUPERFICIAL = (BOOL, NAT, TProd(UN, UN), TRef(UN))

# ---------------------------------------------------------------- expressions


class Node:
    """Marker base for AST nodes; ``binds`` names the fields under the binder."""

    binds: tuple = ()


@dataclass(frozen=True)
class Var(Node):
    name: str


@dataclass(frozen=True)
class Lit(Node):
    value: Value


@dataclass(frozen=True)
class Bin(Node):
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class PairE(Node):
    fst: "Expr"
    snd: "Expr"


@dataclass(frozen=True)
class Proj(Node):
    index: int
    expr: "Expr"


@dataclass(frozen=True)
class Deref(Node):
    expr: "Expr"
    cap: Optional["Expr"] = None


Expr = Union[Var, Lit, Bin, PairE, Proj, Deref]
ARITH = ("+", "-", "*")
COMPARE = ("==", "<", ">")

# ---------------------------------------------------------------- statements


@dataclass(frozen=True)
class Skip(Node):
    pass


@dataclass(frozen=True)
class Seq(Node):
    first: "Stmt"
    then: "Stmt"


@dataclass(frozen=True)
class Let(Node):
    x: str
    expr: Expr
    body: "Stmt"
    ty: Optional[Type] = None
    binds = ("body",)


@dataclass(frozen=True)
class If(Node):
    cond: Expr
    then: "Stmt"
    orelse: "Stmt"


@dataclass(frozen=True)
class Ifz(Node):
    cond: Expr
    then: "Stmt"
    orelse: "Stmt"


@dataclass(frozen=True)
class Call(Node):
    fn: str
    arg: Expr


@dataclass(frozen=True)
class New(Node):
    x: str
    expr: Expr
    body: "Stmt"
    ty: Optional[Type] = None
    binds = ("body",)


@dataclass(frozen=True)
class Assign(Node):
    target: Expr
    expr: Expr
    cap: Optional[Expr] = None


@dataclass(frozen=True)
class Hide(Node):
    x: str
    expr: Expr
    body: "Stmt"
    binds = ("body",)


@dataclass(frozen=True)
class LetAtom(Node):
    x: str
    expr: Expr
    body: "Stmt"
    binds = ("body",)


@dataclass(frozen=True)
class Iso(Node):
    x: str
    expr: Expr
    body: "Stmt"
    binds = ("body",)


@dataclass(frozen=True)
class Destruct(Node):
    x: str
    expr: Expr
    pattern: str  # "nat" | "pair"
    body: "Stmt"
    orelse: "Stmt"
    binds = ("body",)


@dataclass(frozen=True)
class Endorse(Node):
    x: str
    expr: Expr
    sty: Type
    body: "Stmt"
    binds = ("body",)


@dataclass(frozen=True)
class Fork(Node):
    body: "Stmt"


@dataclass(frozen=True)
class Ret(Node):
    """Return marker placed after an inlined function body at call time."""


Stmt = Union[Skip, Seq, Let, If, Ifz, Call, New, Assign, Hide, LetAtom, Iso,
             Destruct, Endorse, Fork, Ret]

BINDERS = (Let, New, Hide, LetAtom, Iso, Destruct, Endorse)

# ---------------------------------------------------------------- programs

LANGS = ("lu", "lp", "la", "lc", "li")
TARGETS = ("lp", "lc", "li")


@dataclass(frozen=True)
class Fun:
    name: str
    param: str
    body: Stmt
    param_ty: Optional[Type] = None
    span: Optional[tuple] = field(default=None, compare=False)


@dataclass
class Component:
    lang: str
    funs: dict  # name -> Fun, in definition order
    imports: tuple = ()
    root: Optional[Loc] = None  # LU
    delta: dict = field(default_factory=dict)  # LA: Loc -> Type
    heap0: dict = field(default_factory=dict)  # LC: addr -> (v, tag); LI: addr -> (v, None)
    enclave: frozenset = frozenset()  # LI


@dataclass
class Context:
    lang: str
    funs: dict
    heap: dict = field(default_factory=dict)  # LU/LA: Loc -> (v, annotation)


def seq(*stmts: Stmt) -> Stmt:
    """Right-nested sequence, dropping nothing."""
    out = stmts[-1]
    for s in reversed(stmts[:-1]):
        out = Seq(s, out)
    return out

# ---------------------------------------------------------------- traversal


def children(node: Node) -> Iterator[Node]:
    for f in dataclasses.fields(node):
        v = getattr(node, f.name)
        if isinstance(v, Node):
            yield v


def walk(node: Node) -> Iterator[Node]:
    yield node
    for c in children(node):
        yield from walk(c)


def literals(node: Node) -> Iterator[Value]:
    for n in walk(node):
        if isinstance(n, Lit):
            yield n.value


def subst(node: Node, x: str, v: Value) -> Node:
    """Replace free occurrences of variable ``x`` with the closed value ``v``."""
    if isinstance(node, Var):
        return Lit(v) if node.name == x else node
    if isinstance(node, Lit):
        return node
    shadowed = node.binds if getattr(node, "x", None) == x else ()
    changes = {}
    for f in dataclasses.fields(node):
        c = getattr(node, f.name)
        if isinstance(c, Node) and f.name not in shadowed:
            new = subst(c, x, v)
            if new is not c:
                changes[f.name] = new
    return dataclasses.replace(node, **changes) if changes else node


def free_vars(node: Node) -> set:
    if isinstance(node, Var):
        return {node.name}
    out = set()
    for f in dataclasses.fields(node):
        c = getattr(node, f.name)
        if isinstance(c, Node):
            fv = free_vars(c)
            if f.name in node.binds:
                fv.discard(node.x)
            out |= fv
    return out


def calls(node: Node) -> set:
    return {n.fn for n in walk(node) if isinstance(n, Call)}


def alpha_eq(a: Node, b: Node, env: Optional[dict] = None) -> bool:
    """Structural equality up to consistent renaming of bound names."""
    env = env or {}
    if type(a) is not type(b):
        return False
    if isinstance(a, Var):
        return env.get(a.name, a.name) == b.name
    inner = env
    if isinstance(a, BINDERS):
        inner = {**env, a.x: b.x}
    for f in dataclasses.fields(a):
        if f.name == "x" and isinstance(a, BINDERS):
            continue
        va, vb = getattr(a, f.name), getattr(b, f.name)
        if isinstance(va, Node):
            if not alpha_eq(va, vb, inner if f.name in a.binds else env):
                return False
        elif va != vb:
            return False
    return True

# ---------------------------------------------------------------- printing

_PREC = {"==": 1, "<": 1, ">": 1, "+": 2, "-": 2, "*": 3}


def show_value(v: Value) -> str:
    match v:
        case Bool(b):
            return "true" if b else "false"
        case Unit():
            return "unit"
        case Loc(i):
            return i if isinstance(i, str) else f"l#{i}"
        case Cap("kroot"):
            return "kroot"
        case Cap(i):
            return f"@{i}"
        case Pair(a, b):
            return f"<{show_value(a)}, {show_value(b)}>"
    return str(v)


def show_expr(e: Expr, prec: int = 0) -> str:
    match e:
        case Var(n):
            return n
        case Lit(v):
            s = show_value(v)
            return f"({s})" if isinstance(v, int) and v < 0 else s
        case Bin(op, l, r):
            p = _PREC[op]
            text = f"{show_expr(l, p if p > 1 else p + 1)} {op} {show_expr(r, p + 1)}"
            return f"({text})" if p < prec else text
        case PairE(a, b):
            return f"<{show_expr(a, 2)}, {show_expr(b, 2)}>"
        case Proj(i, inner):
            return f"{show_expr(inner, 5)}.{i}"
        case Deref(inner, cap):
            text = f"!{show_expr(inner, 5)}"
            if cap is not None:
                text += f" with {show_expr(cap, 4)}"
                return f"({text})" if prec > 0 else text
            return f"({text})" if prec >= 5 else text
    raise TypeError(f"not an expression: {e!r}")


def _block(s: Stmt, ind: int) -> str:
    pad = "  " * ind
    return "{\n" + show_stmt(s, ind + 1) + "\n" + pad + "}"


def show_stmt(s: Stmt, ind: int = 0) -> str:
    pad = "  " * ind
    match s:
        case Skip():
            return pad + "skip"
        case Ret():
            return pad + "ret"
        case Seq(a, b):
            first = show_stmt(a, ind)
            if isinstance(a, BINDERS + (Seq,)):
                first = pad + _block(a, ind)
            return first + ";\n" + show_stmt(b, ind)
        case Let(x, e, body, ty):
            ann = f" : {ty!r}" if ty is not None else ""
            return f"{pad}let {x}{ann} = {show_expr(e)} in\n{show_stmt(body, ind)}"
        case New(x, e, body, ty):
            ann = f" : {ty!r}" if ty is not None else ""
            return f"{pad}let {x} = new {show_expr(e)}{ann} in\n{show_stmt(body, ind)}"
        case Hide(x, e, body):
            return f"{pad}let {x} = hide {show_expr(e)} in\n{show_stmt(body, ind)}"
        case LetAtom(x, e, body):
            return f"{pad}letatom {x} = {show_expr(e)} in\n{show_stmt(body, ind)}"
        case Iso(x, e, body):
            return f"{pad}let {x} = iso {show_expr(e)} in\n{show_stmt(body, ind)}"
        case Endorse(x, e, sty, body):
            return f"{pad}endorse {x} = {show_expr(e)} as {sty!r} in\n{show_stmt(body, ind)}"
        case Destruct(x, e, pat, body, other):
            return (f"{pad}destruct {x} = {show_expr(e)} as {pat} in "
                    f"{_block(body, ind)} else {_block(other, ind)}")
        case If(c, t, f):
            return f"{pad}if {show_expr(c)} then {_block(t, ind)} else {_block(f, ind)}"
        case Ifz(c, t, f):
            return f"{pad}ifz {show_expr(c)} then {_block(t, ind)} else {_block(f, ind)}"
        case Call(f, e):
            return f"{pad}call {f} {show_expr(e, 5)}"
        case Assign(t, e, cap):
            text = f"{pad}{show_expr(t, 5)} := {show_expr(e)}"
            return text + (f" with {show_expr(cap, 4)}" if cap is not None else "")
        case Fork(body):
            return f"{pad}fork {_block(body, ind)}"
    raise TypeError(f"not a statement: {s!r}")


def show_fun(f: Fun, ind: int = 1) -> str:
    pad = "  " * ind
    param = f"{f.param} : {f.param_ty!r}" if f.param_ty is not None else f.param
    return f"{pad}fun {f.name}({param}) {_block(f.body, ind)}"


def show_program(p: Union[Component, Context]) -> str:
    lines = []
    if isinstance(p, Component):
        lines.append("component {")
        if p.root is not None:
            lines.append(f"  root {show_value(p.root)};")
        if p.delta:
            lines.append("  delta {")
            for loc, ty in p.delta.items():
                lines.append(f"    {show_value(loc)} : {ty!r};")
            lines.append("  }")
        if p.heap0:
            lines.append("  heap {")
            for addr, (v, tag) in p.heap0.items():
                ann = "" if p.lang == "li" else " : " + ("bot" if tag is None else show_value(tag))
                lines.append(f"    {addr} = {show_value(v)}{ann};")
            lines.append("  }")
        if p.enclave:
            lines.append(f"  enclave {', '.join(sorted(p.enclave))};")
        if p.imports:
            lines.append(f"  import {', '.join(p.imports)};")
    else:
        lines.append("context {")
        if p.heap:
            lines.append("  heap {")
            for loc, (v, ty) in p.heap.items():
                ann = f" : {ty!r}" if ty is not None else ""
                lines.append(f"    {show_value(loc)} = {show_value(v)}{ann};")
            lines.append("  }")
    for f in p.funs.values():
        lines.append(show_fun(f))
    lines.append("}")
    return "\n".join(lines) + "\n"
