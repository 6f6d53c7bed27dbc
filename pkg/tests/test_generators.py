from rsc import la, lc, li, lu
from rsc.compilers import compile_component
from rsc.generators import (GenConfig, gen_attacker_la, gen_attacker_lp, gen_attacker_target,
                            gen_la_component, gen_lu_component, gen_lu_whole)
from rsc.syntax import Fork, calls, literals, walk
from rsc.values import KROOT

CFG = GenConfig(seed=7)


def forks_in(ctx):
    return sum(isinstance(n, Fork) for f in ctx.funs.values() for n in walk(f.body))


def test_generation_is_deterministic():
    assert gen_lu_whole(CFG, 3) == gen_lu_whole(CFG, 3)
    assert gen_la_component(CFG, 3) == gen_la_component(CFG, 3)
    assert gen_lu_whole(CFG, 3) != gen_lu_whole(CFG, 4)
    assert gen_lu_whole(CFG, 3) != gen_lu_whole(GenConfig(seed=8), 3)


def test_whole_programs_link_and_cross_the_boundary():
    for i in range(30):
        ctx, comp = gen_lu_whole(CFG, i)
        r = lu.run(lu.plug(ctx, comp))
        assert r.trace and r.trace[0].kind == "call"


def test_la_components_are_well_typed():
    for i in range(20):
        la.typecheck(gen_la_component(CFG, i))


def test_la_attackers_are_un_typed_and_respect_the_fork_budget():
    for i in range(20):
        comp = gen_la_component(CFG, i)
        ctx = gen_attacker_la(CFG, comp, i)
        assert la.typecheck_un(ctx, comp.delta) == []
        assert forks_in(ctx) <= CFG.max_procs - 1


def test_attackers_only_call_the_component_from_main():
    comp = gen_la_component(CFG, 0)
    for i in range(20):
        ctx = gen_attacker_la(CFG, comp, i)
        for name, f in ctx.funs.items():
            if name != "main":
                assert not calls(f.body) & set(comp.funs)


def test_target_attackers_respect_the_fork_budget():
    for compiler, mod in (("ap", lc), ("ai", li)):
        for i in range(10):
            out = compile_component(gen_la_component(CFG, i), compiler)
            ctx = gen_attacker_target(CFG, out.component, i)
            assert ctx.lang == mod.__name__.split(".")[-1]
            assert forks_in(ctx) <= CFG.max_procs - 1


def test_lp_attackers_never_mention_the_root_capability():
    for i in range(20):
        comp = compile_component(gen_lu_component(CFG, i), "up").component
        ctx = gen_attacker_lp(CFG, comp, i)
        assert all(KROOT not in literals(f.body) for f in ctx.funs.values())
        assert set(ctx.funs) == {"main", *comp.imports}
