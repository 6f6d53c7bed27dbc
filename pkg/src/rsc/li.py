"""Enclave target LI: integer addresses where negative cells form the single
enclave, readable and writable only while an enclave function runs."""

from __future__ import annotations

from .lc import match_pattern
from .lu import Heap, LinkError, Machine, Proc, Program, Red, RunResult, Stuck, check_link
from .syntax import Component, Context, Destruct, Ifz, Iso, Skip, subst


class EnclaveViolation(Stuck):
    """Access to an enclave address from outside the enclave."""


class LIMachine(Machine):
    lang = "li"
    comparison_true, comparison_false = 0, 1
    integers = True

    def __init__(self, program: Program):
        super().__init__(program)
        self.enclave = program.component.enclave

    def in_enclave(self, proc: Proc) -> bool:
        return proc.current is not None and proc.current in self.enclave

    def check_access(self, heap: Heap, addr, proc: Proc):
        if type(addr) is not int or addr not in heap:
            raise Stuck(f"no cell at {addr!r}")
        if addr < 0 and not self.in_enclave(proc):
            raise EnclaveViolation(f"access to enclave address {addr} from {proc.current or 'top level'}")

    def deref(self, heap, v, cap, proc):
        self.check_access(heap, v, proc)
        return heap.value(v)

    def assign(self, heap, target, v, cap, proc):
        self.check_access(heap, target, proc)
        return heap.set(target, v)

    def alloc(self, heap, v, stmt):
        addr = max((a for a in heap.cells if a >= 0), default=-1) + 1
        return addr, heap.set(addr, v)

    def reduce_other(self, s, proc, heap) -> Red:
        match s:
            case Ifz(c, then, other):
                v = self.eval(heap, c, proc)
                if type(v) is not int:
                    raise Stuck(f"ifz on non-number {v!r}")
                return Red(then if v == 0 else other)
            case Iso(x, e, body):
                if not self.in_enclave(proc):
                    raise EnclaveViolation(f"iso outside the enclave in {proc.current or 'top level'}")
                v = self.eval(heap, e, proc)
                addr = min((a for a in heap.cells if a < 0), default=0) - 1
                return Red(subst(body, x, addr), heap.set(addr, v))
            case Destruct(x, e, pattern, body, other):
                v = self.eval(heap, e, proc)
                return Red(subst(body, x, v) if match_pattern(v, pattern) else other)
        raise Stuck(f"no rule for {type(s).__name__} in LI")

    def fork(self, body, proc: Proc) -> Proc:
        return Proc(body, proc.stack[-1:], self.top_side(proc))


def plug(ctx: Context, comp: Component) -> Program:
    errors = check_link(ctx, comp)
    for addr in comp.heap0:
        if addr >= 0:
            errors.append(f"whole-check: H0 address {addr} is not negative")
    for name in sorted(comp.enclave - set(comp.funs)):
        errors.append(f"enclave-list: {name} is not a component function")
    if errors:
        raise LinkError(errors)
    heap = Heap({a: (v, None) for a, (v, _) in comp.heap0.items()})
    return Program("li", {**ctx.funs, **comp.funs}, frozenset(comp.funs), heap, comp, ctx)


def machine(program: Program) -> LIMachine:
    return LIMachine(program)


def run(program: Program, max_steps: int = 10_000, seed=None, **kw) -> RunResult:
    return machine(program).run(max_steps=max_steps, seed=seed, **kw)


def eval_expr(heap: Heap, e, current=None, enclave=frozenset()):
    comp = Component("li", {}, enclave=frozenset(enclave))
    prog = Program("li", {}, frozenset(), heap, comp, Context("li", {}))
    stack = (current,) if current else ()
    return LIMachine(prog).eval(heap, e, Proc(Skip(), stack))
