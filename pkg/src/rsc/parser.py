"""Recursive-descent parser for the surface syntax of all five languages."""

from __future__ import annotations

import dataclasses
import re
from typing import Optional, Union

from .syntax import (BINDERS, BOOL, NAT, UN, Assign, Bin, Call, Component, Context,
                     Deref, Destruct, Endorse, Fork, Fun, If, Ifz, Iso, Let, LetAtom,
                     Lit, New, PairE, Proj, Ret, Seq, Skip, Hide, TProd, TRef, Var,
                     subst, walk, LANGS)
from .values import FALSE, KROOT, TRUE, UNIT, Cap, Loc, Pair


class ParseError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.msg, self.line, self.col = msg, line, col


_TOKEN = re.compile(r"""
    (?P<ws>\s+|//[^\n]*)
  | (?P<num>\d+)
  | (?P<cap>@[A-Za-z_][A-Za-z0-9_]*)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|==|->|>=|<=|!=|[-+*<>!.,;:(){}=|\[\]])
""", re.VERBOSE)

KEYWORDS = {
    "fun", "let", "in", "new", "if", "then", "else", "ifz", "call", "skip", "ret",
    "true", "false", "unit", "with", "hide", "letatom", "iso", "destruct", "as",
    "endorse", "fork", "component", "context", "root", "import", "heap", "delta",
    "enclave", "kroot", "bot",
}

_FEATURES = {
    "hide": ("lp", "lc"),
    "letatom": ("lc",),
    "destruct": ("lc", "li"),
    "iso": ("li",),
    "fork": ("la", "lc", "li"),
    "endorse": ("la",),
    "if": ("lu", "la"),
    "ifz": ("lp", "lc", "li"),
}


def tokenize(text: str) -> list:
    toks, pos, line, line_start = [], 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        val = m.group()
        if kind != "ws":
            if kind == "id" and val in KEYWORDS:
                kind = "kw"
            toks.append((kind, val, line, m.start() - line_start + 1))
        nl = val.count("\n")
        if nl:
            line += nl
            line_start = m.start() + val.rindex("\n") + 1
        pos = m.end()
    toks.append(("eof", "", line, pos - line_start + 1))
    return toks


class Parser:
    def __init__(self, text: str, lang: str):
        if lang not in LANGS:
            raise ValueError(f"unknown language {lang!r}")
        self.toks = tokenize(text)
        self.i = 0
        self.lang = lang

    # -- token helpers
    @property
    def tok(self):
        return self.toks[self.i]

    def peek(self, k: int = 1):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok=None):
        tok = tok or self.tok
        shown = tok[1] or "end of input"
        raise ParseError(f"{msg} (at {shown!r})", tok[2], tok[3])

    def at(self, *vals) -> bool:
        return self.tok[1] in vals and self.tok[0] in ("kw", "op")

    def take(self):
        t = self.tok
        self.i += 1
        return t

    def expect(self, val: str):
        if not self.at(val):
            self.error(f"expected {val!r}")
        return self.take()

    def ident(self) -> str:
        t = self.tok
        if t[0] != "id":
            self.error("expected identifier")
        if t[1].startswith("_") and self.lang in ("lu", "la"):
            self.error("identifiers starting with '_' are reserved")
        self.i += 1
        return t[1]

    def feature(self, kw: str):
        if self.lang not in _FEATURES[kw]:
            self.error(f"'{kw}' is not part of {self.lang.upper()}")

    # -- types
    def type_(self):
        left = self.type_base()
        if self.at("*"):
            self.take()
            return TProd(left, self.type_())
        return left

    def type_base(self):
        t = self.tok
        if t[0] == "id" and t[1] in ("Bool", "Nat", "UN", "Ref"):
            self.take()
            if t[1] == "Ref":
                return TRef(self.type_base())
            return {"Bool": BOOL, "Nat": NAT, "UN": UN}[t[1]]
        if self.at("("):
            self.take()
            ty = self.type_()
            self.expect(")")
            return ty
        self.error("expected a type")

    # -- expressions
    def expr(self):
        left = self.add_expr()
        if self.at("==", "<", ">"):
            op = self.take()[1]
            left = Bin(op, left, self.add_expr())
            if self.at("==", "<", ">"):
                self.error("comparisons do not chain")
        return left

    def add_expr(self):
        left = self.mul_expr()
        while self.at("+", "-"):
            op = self.take()[1]
            left = Bin(op, left, self.mul_expr())
        return left

    def mul_expr(self):
        left = self.unary()
        while self.at("*"):
            self.take()
            left = Bin("*", left, self.unary())
        return left

    def unary(self):
        if self.at("!"):
            self.take()
            inner = self.unary_operand()
            cap = None
            if self.lang in ("lp", "lc"):
                self.expect("with")
                cap = self.unary()
            elif self.at("with"):
                self.error(f"'with' clauses are not part of {self.lang.upper()}")
            return Deref(inner, cap)
        return self.postfix()

    def unary_operand(self):
        if self.at("!"):
            # nested deref binds tightest: `!!x with a with b` is `!(!x with a) with b`
            return self.unary()
        return self.postfix()

    def postfix(self):
        e = self.atom()
        while self.at(".") and self.peek()[0] == "num":
            self.take()
            idx = int(self.take()[1])
            if idx not in (1, 2):
                self.error("projection index must be 1 or 2")
            e = Proj(idx, e)
        return e

    def atom(self):
        t = self.tok
        if t[0] == "num":
            self.take()
            return Lit(int(t[1]))
        if self.at("-") and self.peek()[0] == "num":
            if self.lang != "li":
                self.error("negative literals only exist in LI")
            self.take()
            return Lit(-int(self.take()[1]))
        if t[0] == "cap":
            if self.lang not in ("lp", "lc"):
                self.error(f"capability literals are not part of {self.lang.upper()}")
            self.take()
            return Lit(Cap(t[1][1:]))
        if t[0] == "id":
            return Var(self.ident())
        if self.at("true", "false", "unit"):
            self.take()
            return Lit({"true": TRUE, "false": FALSE, "unit": UNIT}[t[1]])
        if self.at("kroot"):
            if self.lang not in ("lp", "lc"):
                self.error(f"capability literals are not part of {self.lang.upper()}")
            self.take()
            return Lit(KROOT)
        if self.at("<"):
            self.take()
            a = self.add_expr()
            self.expect(",")
            b = self.add_expr()
            self.expect(">")
            return PairE(a, b)
        if self.at("("):
            self.take()
            e = self.expr()
            self.expect(")")
            return e
        self.error("expected an expression")

    # -- statements
    def seq(self, stop=("}",)):
        stmts = [self.stmt()]
        while self.at(";"):
            self.take()
            if self.at(*stop) or self.tok[0] == "eof":
                break
            stmts.append(self.stmt())
        out = stmts[-1]
        for s in reversed(stmts[:-1]):
            out = Seq(s, out)
        return out

    def branch(self):
        if self.at("{"):
            self.take()
            if self.at("}"):
                self.take()
                return Skip()
            s = self.seq()
            self.expect("}")
            return s
        return self.stmt()

    def stmt(self):
        t = self.tok
        if self.at("{"):
            return self.branch()
        if self.at("skip"):
            self.take()
            return Skip()
        if self.at("ret"):
            self.take()
            return Ret()
        if self.at("call"):
            self.take()
            fn = self.ident()
            return Call(fn, self.expr())
        if self.at("if", "ifz"):
            self.feature(t[1])
            self.take()
            cond = self.expr()
            self.expect("then")
            then = self.branch()
            self.expect("else")
            other = self.branch()
            return (If if t[1] == "if" else Ifz)(cond, then, other)
        if self.at("fork"):
            self.feature("fork")
            self.take()
            return Fork(self.branch())
        if self.at("let"):
            return self.let_stmt()
        if self.at("letatom"):
            self.feature("letatom")
            self.take()
            x = self.ident()
            self.expect("=")
            e = self.expr()
            self.expect("in")
            return LetAtom(x, e, self.seq_body())
        if self.at("endorse"):
            self.feature("endorse")
            self.take()
            x = self.ident()
            self.expect("=")
            e = self.expr()
            self.expect("as")
            sty = self.type_()
            self.expect("in")
            return Endorse(x, e, sty, self.seq_body())
        if self.at("destruct"):
            self.feature("destruct")
            self.take()
            x = self.ident()
            self.expect("=")
            e = self.expr()
            self.expect("as")
            pat = self.take()[1]
            if pat not in ("nat", "pair"):
                self.error("pattern must be nat or pair", t)
            self.expect("in")
            body = self.branch()
            self.expect("else")
            return Destruct(x, e, pat, body, self.branch())
        target = self.expr()
        if not self.at(":="):
            self.error("expected a statement")
        self.take()
        rhs = self.expr()
        cap = None
        if self.lang in ("lp", "lc"):
            self.expect("with")
            cap = self.unary()
        return Assign(target, rhs, cap)

    def seq_body(self):
        # a binder's body extends over the rest of the sequence
        if self.at("}", "else") or self.tok[0] == "eof":
            return Skip()
        return self.seq()

    def let_stmt(self):
        self.take()
        x = self.ident()
        ty = None
        if self.at(":"):
            if self.lang != "la":
                self.error("type annotations are only part of LA")
            self.take()
            ty = self.type_()
        self.expect("=")
        if self.at("new"):
            self.take()
            e = self.expr()
            nty = None
            if self.at(":"):
                if self.lang != "la":
                    self.error("type annotations are only part of LA")
                self.take()
                nty = self.type_()
            elif self.lang == "la":
                self.error("allocation in LA needs a type: new e : T")
            self.expect("in")
            return New(x, e, self.seq_body(), nty)
        for kw, cls in (("hide", Hide), ("iso", Iso)):
            if self.at(kw):
                self.feature(kw)
                self.take()
                e = self.expr()
                self.expect("in")
                return cls(x, e, self.seq_body())
        e = self.expr()
        self.expect("in")
        return Let(x, e, self.seq_body(), ty)

    # -- programs
    def fun(self):
        start = self.expect("fun")
        name = self.ident()
        self.expect("(")
        param = self.ident()
        pty = None
        if self.at(":"):
            if self.lang != "la":
                self.error("type annotations are only part of LA")
            self.take()
            pty = self.type_()
        self.expect(")")
        self.expect("{")
        body = Skip() if self.at("}") else self.seq()
        self.expect("}")
        return Fun(name, param, strip_ret(body), pty, span=(start[2], start[3]))

    def names(self):
        out = [self.ident()]
        while self.at(","):
            self.take()
            out.append(self.ident())
        self.expect(";")
        return out

    def program(self):
        if self.at("fun"):
            # a bare function list is a component with no declarations
            comp = Component(self.lang, {})
            while self.at("fun"):
                self.add_fun(comp.funs)
            self.expect_eof()
            comp.funs = resolve_funs(comp.funs, [])
            return comp
        if self.at("component"):
            return self.component()
        if self.at("context"):
            return self.context()
        self.error("expected 'component' or 'context'")

    def add_fun(self, funs: dict):
        tok = self.tok
        f = self.fun()
        if f.name in funs:
            self.error(f"duplicate function name {f.name!r}", tok)
        funs[f.name] = f

    def component(self):
        self.expect("component")
        self.expect("{")
        comp = Component(self.lang, {})
        imports, locs = [], []
        while not self.at("}"):
            if self.at("root"):
                self.take()
                name = self.ident()
                self.expect(";")
                comp.root = Loc(name)
                locs.append(name)
            elif self.at("import"):
                self.take()
                imports += self.names()
            elif self.at("enclave"):
                if self.lang != "li":
                    self.error("enclave declarations are only part of LI")
                self.take()
                comp.enclave = frozenset(self.names())
            elif self.at("delta"):
                if self.lang != "la":
                    self.error("delta declarations are only part of LA")
                self.take()
                self.expect("{")
                while not self.at("}"):
                    name = self.ident()
                    self.expect(":")
                    comp.delta[Loc(name)] = self.type_()
                    locs.append(name)
                    self.expect(";")
                self.take()
            elif self.at("heap"):
                if self.lang not in ("lc", "li"):
                    self.error("component heaps are only part of LC and LI")
                self.take()
                self.expect("{")
                while not self.at("}"):
                    addr = self.atom()
                    self.expect("=")
                    v = self.value()
                    tag = None
                    if self.lang == "lc":
                        self.expect(":")
                        if self.at("bot"):
                            self.take()
                        else:
                            tag = self.value()
                    self.expect(";")
                    comp.heap0[addr.value] = (v, tag)
                self.take()
            elif self.at("fun"):
                self.add_fun(comp.funs)
            else:
                self.error("expected a component declaration")
        self.take()
        self.expect_eof()
        dup = set(imports) & set(comp.funs)
        if dup:
            raise ParseError(f"imported names are also defined: {sorted(dup)}")
        comp.imports = tuple(imports)
        comp.funs = resolve_funs(comp.funs, locs)
        return comp

    def context(self):
        self.expect("context")
        self.expect("{")
        ctx = Context(self.lang, {})
        locs = []
        while not self.at("}"):
            if self.at("heap"):
                if self.lang not in ("lu", "la"):
                    self.error("context heaps are only part of LU and LA")
                self.take()
                self.expect("{")
                while not self.at("}"):
                    name = self.ident()
                    self.expect("=")
                    v = self.value(locs)
                    ty = None
                    if self.lang == "la":
                        self.expect(":")
                        ty = self.type_()
                    self.expect(";")
                    ctx.heap[Loc(name)] = (v, ty)
                    locs.append(name)
                self.take()
            elif self.at("fun"):
                self.add_fun(ctx.funs)
            else:
                self.error("expected a context declaration")
        self.take()
        self.expect_eof()
        ctx.funs = resolve_funs(ctx.funs, locs)
        return ctx

    def value(self, locs=()):
        tok = self.tok
        v = const_value(self.expr(), locs)
        if v is None:
            self.error("expected a constant value", tok)
        return v

    def expect_eof(self):
        if self.tok[0] != "eof":
            self.error("trailing input")


def strip_ret(s):
    """Drop the optional trailing ``ret`` of a function body."""
    if isinstance(s, Ret):
        return Skip()
    if isinstance(s, Seq):
        if isinstance(s.then, Ret):
            return s.first
        return Seq(s.first, strip_ret(s.then))
    if isinstance(s, BINDERS) and not isinstance(s, Destruct):
        return dataclasses.replace(s, body=strip_ret(s.body))
    return s


def const_value(e, locs=()):
    match e:
        case Lit(v):
            return v
        case Var(n) if n in locs:
            return Loc(n)
        case PairE(a, b):
            va, vb = const_value(a, locs), const_value(b, locs)
            if va is None or vb is None:
                return None
            return Pair(va, vb)
    return None


def resolve_locations(node, names):
    """Turn free occurrences of declared location names into literals."""
    for n in names:
        node = subst(node, n, Loc(n))
    return node


def resolve_funs(funs: dict, names: list) -> dict:
    out = {}
    for name, f in funs.items():
        body = resolve_locations(f.body, [n for n in names if n != f.param])
        if any(isinstance(n, Ret) for n in walk(body)):
            raise ParseError(f"'ret' may only end the body of {name!r}", *(f.span or (0, 0)))
        out[name] = Fun(f.name, f.param, body, f.param_ty, f.span)
    return out


def parse_program(text: str, lang: str) -> Union[Component, Context]:
    return Parser(text, lang).program()


def parse_component(text: str, lang: str) -> Component:
    p = parse_program(text, lang)
    if not isinstance(p, Component):
        raise ParseError("expected a component")
    return p


def parse_context(text: str, lang: str) -> Context:
    p = parse_program(text, lang)
    if not isinstance(p, Context):
        raise ParseError("expected a context")
    return p


def parse_stmt(text: str, lang: str, locations=()):
    p = Parser(text, lang)
    s = p.seq(stop=())
    p.expect_eof()
    return resolve_locations(s, locations)


def parse_expr(text: str, lang: str, locations=()):
    p = Parser(text, lang)
    e = p.expr()
    p.expect_eof()
    return resolve_locations(e, locations)


def parse_type(text: str):
    p = Parser(text, "la")
    t = p.type_()
    p.expect_eof()
    return t
