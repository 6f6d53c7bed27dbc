"""Seeded random generators for components and attackers.

Every generator takes a ``random.Random`` so a configuration reproduces the
same artifacts. Source generators track a small kind discipline so most
programs do not get stuck; attacker generators deliberately do not.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import la
from .syntax import (BOOL, NAT, SUPERFICIAL, UN, Assign, Bin, Call, Component, Context,
                     Deref, Endorse, Fork, Fun, Hide, If, Iso, Let, Lit, New, PairE, Proj, Seq,
                     Skip, TProd, TRef, Var, calls)
from .values import FALSE, TRUE, Loc


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    max_depth: int = 5
    max_funs: int = 4
    max_procs: int = 3
    max_steps: int = 10_000
    schedules: int = 20

    def __post_init__(self):
        for name in ("max_depth", "max_funs", "max_procs", "max_steps", "schedules"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def rng(self, *salt) -> random.Random:
        return random.Random(repr((self.seed,) + salt))

# ---------------------------------------------------------------- LU

# kinds of LU values the source generator keeps track of
K_NAT, K_BOOL, K_REF, K_PAIR = "nat", "bool", "ref", "pair"
PARAM_KINDS = (K_NAT, K_NAT, K_BOOL, K_REF, K_PAIR)


class LUGen:
    """Kind-directed generator of LU function bodies."""

    def __init__(self, rng: random.Random, depth: int, root=None):
        self.rng = rng
        self.depth = depth
        self.root = root
        self.n = 0

    def fresh(self) -> str:
        self.n += 1
        return f"v{self.n}"

    def pick(self, env, kind):
        names = [x for x, k in env if k == kind]
        if kind == K_REF and self.root is not None:
            return self.rng.choice(names + [None]) if names else None
        return self.rng.choice(names) if names else None

    def ref(self, env):
        x = self.pick(env, K_REF)
        if x is None:
            return Lit(self.root) if self.root is not None else None
        return Var(x)

    def expr(self, kind, env, d=0):
        r = self.rng
        leaf = d >= 2 or r.random() < 0.4
        if kind == K_NAT:
            x = self.pick(env, K_NAT)
            if leaf:
                return Var(x) if x and r.random() < 0.6 else Lit(r.randint(0, 5))
            choice = r.randrange(4)
            if choice == 0:
                return Bin(r.choice("+*"), self.expr(K_NAT, env, d + 1), self.expr(K_NAT, env, d + 1))
            if choice == 1 and self.ref(env) is not None:
                return Deref(self.ref(env))
            if choice == 2 and self.pick(env, K_PAIR):
                return Proj(1, Var(self.pick(env, K_PAIR)))
            return Bin("+", self.expr(K_NAT, env, d + 1), Lit(r.randint(0, 3)))
        if kind == K_BOOL:
            x = self.pick(env, K_BOOL)
            if leaf:
                return Var(x) if x and r.random() < 0.5 else Lit(r.choice((TRUE, FALSE)))
            if self.pick(env, K_PAIR) and r.random() < 0.3:
                return Proj(2, Var(self.pick(env, K_PAIR)))
            return Bin(r.choice(("==", "<", ">")), self.expr(K_NAT, env, d + 1), self.expr(K_NAT, env, d + 1))
        if kind == K_PAIR:
            x = self.pick(env, K_PAIR)
            if x and r.random() < 0.5:
                return Var(x)
            return PairE(self.expr(K_NAT, env, d + 1), self.expr(K_BOOL, env, d + 1))
        return self.ref(env)

    def block(self, env, depth, n, callees):
        if n == 0 or depth <= 0:
            return Skip()
        r = self.rng
        rest = lambda env2: self.block(env2, depth, n - 1, callees)
        choice = r.randrange(7)
        if choice == 0:
            kind = r.choice((K_NAT, K_BOOL, K_PAIR))
            x = self.fresh()
            return Let(x, self.expr(kind, env), rest(env + [(x, kind)]))
        if choice == 1:
            x = self.fresh()
            return New(x, self.expr(K_NAT, env), rest(env + [(x, K_REF)]))
        if choice == 2 and self.ref(env) is not None:
            return Seq(Assign(self.ref(env), self.expr(K_NAT, env)), rest(env))
        if choice == 3 and depth > 1:
            s = If(self.expr(K_BOOL, env), self.block(env, depth - 1, r.randint(1, 2), callees),
                   self.block(env, depth - 1, r.randint(1, 2), callees))
            return Seq(s, rest(env))
        if choice in (4, 5) and callees:
            name, kind = r.choice(callees)
            if kind == K_REF and self.ref(env) is None:
                t = self.fresh()
                return Seq(New(t, self.expr(K_NAT, env), Call(name, Var(t))), rest(env))
            return Seq(Call(name, self.expr(kind, env)), rest(env))
        return Seq(Skip(), rest(env)) if n > 1 else Skip()


def _body(gen: LUGen, param_kind, callees, cfg: GenConfig):
    gen.n = 0
    return gen.block([("x", param_kind)], cfg.max_depth, gen.rng.randint(1, 4), callees)


def gen_lu_whole(cfg: GenConfig, index: int = 0) -> tuple:
    """A whole LU program: a context (with ``main``) and a component.

    Calls only go to functions later in a fixed order, so every program
    terminates; either side may call the other.
    """
    rng = cfg.rng("lu-whole", index)
    n = rng.randint(2, max(2, cfg.max_funs))
    names = ["main"] + [f"h{i}" for i in range(1, n)]
    sides = ["ctx"] + ["comp"] + [rng.choice(("ctx", "comp")) for _ in range(n - 2)]
    kinds = [K_NAT] + [rng.choice(PARAM_KINDS) for _ in range(n - 1)]
    root = Loc("lroot")
    ctx_funs, comp_funs, imports = {}, {}, set()
    for i, (name, side, kind) in enumerate(zip(names, sides, kinds)):
        callees = list(zip(names[i + 1:], kinds[i + 1:]))
        gen = LUGen(rng, cfg.max_depth, root if side == "comp" else None)
        body = _body(gen, kind, callees, cfg)
        if name == "main":
            # always cross the boundary at least once
            env = [("x", K_NAT)]
            if kinds[1] == K_REF:
                t = gen.fresh()
                body = Seq(New(t, gen.expr(K_NAT, env), Call("h1", Var(t))), body)
            else:
                body = Seq(Call("h1", gen.expr(kinds[1], env)), body)
        f = Fun(name, "x", body)
        if side == "comp":
            comp_funs[name] = f
            imports |= {c for c, _ in callees if sides[names.index(c)] == "ctx"}
        else:
            ctx_funs[name] = f
    order = [x for x in names if x in imports]
    comp = Component("lu", comp_funs, tuple(order), root=root)
    return Context("lu", ctx_funs), comp


def gen_lu_component(cfg: GenConfig, index: int = 0) -> Component:
    """An LU component with callbacks to imported functions ``g1``, ``g2``."""
    rng = cfg.rng("lu-comp", index)
    n = rng.randint(1, max(1, min(3, cfg.max_funs)))
    imports = [(f"g{i}", rng.choice(PARAM_KINDS)) for i in range(1, rng.randint(1, 2) + 1)]
    root = Loc("lroot")
    funs = {}
    for i in range(1, n + 1):
        gen = LUGen(rng, min(cfg.max_depth, 3), root)
        funs[f"f{i}"] = Fun(f"f{i}", "x", _body(gen, rng.choice(PARAM_KINDS), imports, cfg))
    used = {c for f in funs.values() for c in calls(f.body)}
    return Component("lu", funs, tuple(g for g, _ in imports if g in used), root=root)

# ---------------------------------------------------------------- LP attackers


def gen_attacker_lp(cfg: GenConfig, comp: Component, index: int = 0, probe: float = 0.3) -> Context:
    """A random LP context defining ``main`` and the component's imports.

    It never mentions ``kroot``; it guesses addresses, hides its own cells,
    smuggles values between calls and, with probability ``probe`` per
    statement, pokes at the component's address 0.
    """
    rng = cfg.rng("lp-attacker", index)
    targets = list(comp.funs)
    funs = {}
    for name in ("main",) + tuple(comp.imports):
        funs[name] = Fun(name, "x", _lp_block(rng, targets, rng.randint(1, 5), [], probe,
                                              name != "main", 0))
    return Context("lp", funs)


def _lp_value(rng, cells, caps, has_param):
    options = [lambda: Lit(rng.randint(0, 4)),
               lambda: PairE(Lit(rng.randint(0, 3)), Lit(0)),
               lambda: PairE(Lit(0), Lit(0))]
    if cells:
        c = lambda: Var(rng.choice(cells))
        options += [lambda: PairE(c(), Lit(0)), lambda: Deref(c(), Lit(0))]
        if caps:
            options.append(lambda: PairE(Var(rng.choice(cells)), Var(rng.choice(caps))))
    if has_param:
        options += [lambda: Var("x"), lambda: Proj(1, Var("x")), lambda: Deref(Proj(1, Var("x")), Proj(2, Var("x")))]
    return rng.choice(options)()


def _lp_block(rng, targets, n, cells, probe, has_param, counter):
    if n == 0:
        return Skip()
    caps = [c for c in cells if c.startswith("k")]
    addrs = [c for c in cells if c.startswith("a")]
    rest = lambda cs: _lp_block(rng, targets, n - 1, cs, probe, has_param, counter + 1)
    val = lambda: _lp_value(rng, addrs, caps, has_param)
    if rng.random() < probe:
        cap = rng.choice([Lit(0), Lit(1)] + [Var(k) for k in caps] + ([Proj(2, Var("x"))] if has_param else []))
        probes = [Assign(Lit(0), val(), cap), Let(f"p{counter}", Deref(Lit(0), cap), Skip()),
                  Hide(f"k{counter}", Lit(0), Skip())]
        return Seq(rng.choice(probes), rest(cells))
    choice = rng.randrange(7)
    if choice == 0:
        a = f"a{counter}"
        return New(a, val(), rest(cells + [a]))
    if choice == 1 and addrs:
        k = f"k{counter}"
        return Hide(k, Var(rng.choice(addrs)), rest(cells + [k]))
    if choice == 2 and addrs:
        return Seq(Assign(Var(rng.choice(addrs)), val(), Lit(0)), rest(cells))
    if choice == 3 and has_param:
        # write through a reference handed over by the component
        return Seq(Assign(Proj(1, Var("x")), val(), Proj(2, Var("x"))), rest(cells))
    if choice == 4:
        # stash a value where a later callback can find it
        return Seq(Assign(Lit(rng.randint(1, 3)), val(), Lit(0)), rest(cells))
    return Seq(Call(rng.choice(targets), val()), rest(cells))

# ---------------------------------------------------------------- LA


TRUSTED = (NAT, BOOL, TProd(NAT, BOOL), TRef(NAT), TRef(BOOL))


class LAGen:
    """Type-directed generator of well-typed LA function bodies."""

    def __init__(self, rng: random.Random, delta: dict, imports: list, with_fork: bool):
        self.rng = rng
        self.delta = delta
        self.imports = imports
        self.with_fork = with_fork
        self.n = 0

    def fresh(self):
        self.n += 1
        return f"v{self.n}"

    def vars(self, env, ty):
        return [x for x, t in env if t == ty]

    def expr(self, ty, env, d=0):
        """An expression of type ``ty``, or None when none is at hand."""
        r = self.rng
        cands = [Var(x) for x in self.vars(env, ty)]
        cands += [Lit(l) for l, t in self.delta.items() if TRef(t) == ty]
        if ty == NAT:
            cands += [Lit(r.randint(0, 5))]
            if d < 2:
                refs = [e for e in self._refs(env, NAT)]
                if refs:
                    cands.append(Deref(r.choice(refs)))
                cands.append(Bin(r.choice("+*"), self.expr(NAT, env, d + 1), Lit(r.randint(0, 3))))
        elif ty == BOOL:
            cands += [Lit(r.choice((TRUE, FALSE)))]
            if d < 2:
                cands.append(Bin(r.choice(("==", "<", ">")), self.expr(NAT, env, d + 1), Lit(r.randint(0, 3))))
                refs = self._refs(env, BOOL)
                if refs:
                    cands.append(Deref(r.choice(refs)))
        elif isinstance(ty, TProd):
            a, b = self.expr(ty.fst, env, d + 1), self.expr(ty.snd, env, d + 1)
            if a is not None and b is not None:
                cands.append(PairE(a, b))
        elif ty == UN:
            cands += [Lit(r.randint(0, 5)), Lit(r.choice((TRUE, FALSE)))]
            cands += [Var(x) for x, t in env if la.insecure(t)]
        return r.choice(cands) if cands else None

    def _refs(self, env, inner):
        return [Var(x) for x in self.vars(env, TRef(inner))] + \
               [Lit(l) for l, t in self.delta.items() if t == inner]

    def block(self, env, depth, n):
        if n == 0 or depth <= 0:
            return Skip()
        r = self.rng
        rest = lambda env2: self.block(env2, depth, n - 1)
        choice = r.randrange(9)
        if choice == 0 and self.vars(env, UN):
            x = self.fresh()
            sty = r.choice(SUPERFICIAL)
            return Endorse(x, Var(r.choice(self.vars(env, UN))), sty, rest(env + [(x, sty)]))
        if choice == 1:
            ty = r.choice(TRUSTED[:3] + (UN,))
            x = self.fresh()
            e = self.expr(ty, env)
            return New(x, e, rest(env + [(x, TRef(ty))]), ty)
        if choice == 2:
            refs = [(Var(x), t.inner) for x, t in env if isinstance(t, TRef)]
            refs += [(Lit(l), t) for l, t in self.delta.items()]
            if refs:
                target, inner = r.choice(refs)
                e = self.expr(inner, env)
                if e is not None:
                    return Seq(Assign(target, e), rest(env))
        if choice == 3 and depth > 1:
            s = If(self.expr(BOOL, env), self.block(env, depth - 1, r.randint(1, 2)),
                   self.block(env, depth - 1, r.randint(1, 2)))
            return Seq(s, rest(env))
        if choice in (4, 5) and self.imports:
            return Seq(Call(r.choice(self.imports), self.expr(UN, env)), rest(env))
        if choice == 6 and self.with_fork and depth > 1:
            return Seq(Fork(self.block(env, depth - 1, r.randint(1, 2))), rest(env))
        if choice == 7:
            ty = r.choice((NAT, BOOL))
            x = self.fresh()
            return Let(x, self.expr(ty, env), rest(env + [(x, ty)]))
        return Seq(Skip(), rest(env)) if n > 1 else Skip()


def gen_la_component(cfg: GenConfig, index: int = 0) -> Component:
    """A well-typed LA component (generated, then checked; retried on failure)."""
    rng = cfg.rng("la-comp", index)
    for _ in range(100):
        delta = {Loc(f"m{i}"): rng.choice(TRUSTED) for i in range(1, rng.randint(1, 3) + 1)}
        imports = [f"g{i}" for i in range(1, rng.randint(1, 2) + 1)]
        gen = LAGen(rng, delta, imports, with_fork=cfg.max_procs > 1)
        funs = {}
        for i in range(1, rng.randint(1, max(1, min(3, cfg.max_funs))) + 1):
            gen.n = 0
            body = gen.block([("x", UN)], min(cfg.max_depth, 3), rng.randint(2, 5))
            funs[f"f{i}"] = Fun(f"f{i}", "x", body, UN)
        used = {c for f in funs.values() for c in calls(f.body)}
        comp = Component("la", funs, tuple(g for g in imports if g in used), delta=delta)
        try:
            la.typecheck(comp)
        except la.TypeCheckError:
            continue
        return comp
    raise RuntimeError("could not generate a well-typed component")


def gen_attacker_la(cfg: GenConfig, comp: Component, index: int = 0) -> Context:
    """A UN-typed LA attacker for ``comp`` (verified by UN-typing, retried)."""
    rng = cfg.rng("la-attacker", index)
    targets = list(comp.funs)
    for _ in range(100):
        funs = {}
        forks = [cfg.max_procs - 1]
        for name in ("main",) + tuple(comp.imports):
            body = _la_attacker_block(rng, targets, rng.randint(1, 5), [], name != "main", 0,
                                      forks)
            funs[name] = Fun(name, "x", body, UN)
        ctx = Context("la", funs)
        if not la.typecheck_un(ctx, comp.delta):
            return ctx
    raise RuntimeError("could not generate a UN-typed attacker")


def _la_attacker_block(rng, targets, n, cells, has_param, counter, forks):
    if n == 0:
        return Skip()
    rest = lambda cs: _la_attacker_block(rng, targets, n - 1, cs, has_param, counter + 1, forks)
    opts = [Lit(rng.randint(0, 4)), Lit(rng.choice((TRUE, FALSE))), PairE(Lit(1), Lit(TRUE))]
    if cells:
        opts += [Var(rng.choice(cells)), PairE(Var(rng.choice(cells)), Lit(0))]
    if has_param:
        opts += [Var("x"), Proj(1, Var("x"))]
    val = lambda: rng.choice(opts)
    choice = rng.randrange(6)
    if choice == 0:
        a = f"a{counter}"
        return New(a, val(), rest(cells + [a]), UN)
    if choice == 1 and has_param:
        return Seq(Assign(Var("x"), val()), rest(cells))
    if choice == 2 and cells:
        return Seq(Assign(Var(rng.choice(cells)), val()), rest(cells))
    return _attacker_call(rng, targets, val, has_param, forks, choice == 3, rest(cells))


def _attacker_call(rng, targets, val, has_param, forks, fork, rest):
    """Calls into the component come only from ``main``, so callbacks never
    re-enter it and the process count stays below the fork budget."""
    if has_param:
        return rest
    if fork and forks[0] > 0:
        forks[0] -= 1
        return Seq(Fork(Call(rng.choice(targets), val())), rest)
    return Seq(Call(rng.choice(targets), val()), rest)

# ---------------------------------------------------------------- LC / LI attackers


def gen_attacker_target(cfg: GenConfig, comp: Component, index: int = 0) -> Context:
    """A native LC or LI attacker for a compiled component.

    It forges pointers into the monitored region (address/capability pairs
    with guessed capabilities in LC, negative numbers in LI), probes those
    addresses directly, forks, and calls the component concurrently.
    """
    lang = comp.lang
    rng = cfg.rng(f"{lang}-attacker", index)
    addrs = sorted(comp.heap0)
    targets = list(comp.funs)
    funs, forks = {}, [cfg.max_procs - 1]
    for name in ("main",) + tuple(comp.imports):
        funs[name] = Fun(name, "x", _target_block(rng, lang, addrs, targets, rng.randint(1, 5),
                                                  [], name != "main", 0, forks))
    return Context(lang, funs)


def _target_block(rng, lang, addrs, targets, n, cells, has_param, counter, forks):
    if n == 0:
        return Skip()
    rest = lambda cs: _target_block(rng, lang, addrs, targets, n - 1, cs, has_param, counter + 1,
                                    forks)
    cap = lambda: Lit(0) if lang == "li" else rng.choice([Lit(0)] + [Var(c) for c in cells if c.startswith("k")])
    probe_addr = Lit(rng.choice(addrs)) if addrs else Lit(0)
    opts = [Lit(rng.randint(0, 4))]
    if lang == "lc":
        opts += [PairE(probe_addr, Lit(0)), PairE(Lit(rng.randint(0, 5)), Lit(0))]
        if cells:
            a = [c for c in cells if c.startswith("a")]
            if a:
                opts.append(PairE(Var(rng.choice(a)), Lit(0)))
    else:
        opts += [probe_addr, Lit(rng.randint(0, 5))]
        if cells:
            opts.append(Var(rng.choice(cells)))
    if has_param:
        opts += [Var("x")]
    val = lambda: rng.choice(opts)
    with_cap = lang == "lc"
    choice = rng.randrange(8)
    if choice == 0:
        a = f"a{counter}"
        return New(a, val(), rest(cells + [a]))
    if choice == 1 and with_cap and any(c.startswith("a") for c in cells):
        k = f"k{counter}"
        return Hide(k, Var(rng.choice([c for c in cells if c.startswith("a")])), rest(cells + [k]))
    if choice == 2:
        return Seq(Assign(probe_addr, val(), cap() if with_cap else None), rest(cells))
    if choice == 3:
        return Let(f"p{counter}", Deref(probe_addr, cap() if with_cap else None), rest(cells))
    if choice == 5 and has_param:
        target = Proj(1, Var("x")) if with_cap else Var("x")
        return Seq(Assign(target, val(), Proj(2, Var("x")) if with_cap else None), rest(cells))
    if choice == 6 and lang == "li":
        return Seq(Iso(f"i{counter}", val(), Skip()), rest(cells))
    return _attacker_call(rng, targets, val, has_param, forks, choice == 4, rest(cells))
