"""Cross-language relations: partial bijections between source locations and
target addresses, and the value, heap, action and trace relations built on
them."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional

from .lu import Action, Heap
from .values import Bool, Cap, Loc, Pair, Unit


class BijectionError(Exception):
    """Extending a bijection would break functionality in one direction."""


@dataclass(frozen=True)
class Bijection:
    """Triples ``(source location, target address, tag)``.

    With ``bare`` set the tags are ignored and locations relate to plain
    addresses (the enclave target).
    """

    triples: frozenset = frozenset()
    bare: bool = False

    @classmethod
    def of(cls, triples: Iterable, bare: bool = False) -> "Bijection":
        return cls(frozenset(), bare).extend(triples)

    def lookup(self, loc):
        for l, n, tag in self.triples:
            if l == loc:
                return n, tag
        return None

    def source_of(self, addr):
        for l, n, tag in self.triples:
            if n == addr:
                return l, tag
        return None

    @property
    def sources(self) -> set:
        return {t[0] for t in self.triples}

    @property
    def targets(self) -> set:
        return {t[1] for t in self.triples}

    def extend(self, triples: Iterable) -> "Bijection":
        out = set(self.triples)
        for l, n, tag in triples:
            tag = None if self.bare else tag
            for l2, n2, tag2 in out:
                if l2 == l and (n2, tag2) != (n, tag):
                    raise BijectionError(f"{l!r} is already paired with {n2} ({tag2!r})")
                if l2 != l and n2 == n:
                    raise BijectionError(f"address {n} is already paired with {l2!r}")
            out.add((l, n, tag))
        return Bijection(frozenset(out), self.bare)

    def to_json(self) -> str:
        def enc(x):
            match x:
                case Loc(i):
                    return {"loc": i}
                case Cap(i):
                    return {"cap": i}
            return x
        rows = sorted(([enc(l), n, enc(t)] for l, n, t in self.triples), key=repr)
        return json.dumps({"bare": self.bare, "triples": rows})

    @classmethod
    def from_json(cls, text: str) -> "Bijection":
        data = json.loads(text)

        def dec(x):
            if isinstance(x, dict) and "loc" in x:
                return Loc(x["loc"])
            if isinstance(x, dict) and "cap" in x:
                return Cap(x["cap"])
            return x
        return cls.of(((dec(l), n, dec(t)) for l, n, t in data["triples"]), data["bare"])


def value_rel(beta: Bijection, vs, vt) -> bool:
    """Source value ``vs`` is related to target value ``vt`` under ``beta``."""
    match vs:
        case Bool(True):
            return type(vt) is int and vt == 0
        case Bool(False):
            return type(vt) is int and vt != 0
        case Unit():
            return type(vt) is int and vt == 0
        case int():
            # a bare capability only ever stands for the number zero
            return (type(vt) is int and vt == vs) or (vs == 0 and isinstance(vt, Cap))
        case Loc():
            hit = beta.lookup(vs)
            if hit is None:
                return False
            n, tag = hit
            if beta.bare:
                return type(vt) is int and vt == n
            if not isinstance(vt, Pair) or type(vt.fst) is not int or vt.fst != n:
                return False
            return tag is None or vt.snd == tag
        case Pair(a, b):
            return isinstance(vt, Pair) and value_rel(beta, a, vt.fst) and value_rel(beta, b, vt.snd)
    return False


def heap_rel(beta: Bijection, hs: Heap, ht: Heap, strict: bool = False,
             ignore: Iterable = ()) -> bool:
    """Every source cell outside ``ignore`` is paired and holds a related
    value; with ``strict`` every target cell must be paired too."""
    ignore = set(ignore)
    for l in hs.cells:
        if l in ignore:
            continue
        hit = beta.lookup(l)
        if hit is None:
            return False
        n, tag = hit
        if n not in ht:
            return False
        # a public entry is a wildcard: the attacker may hide its own cells later
        if not beta.bare and tag is not None and ht.annot(n) != tag:
            return False
        if not value_rel(beta, hs.value(l), ht.value(n)):
            return False
    if strict:
        paired = {beta.lookup(l)[0] for l in hs.cells if l not in ignore}
        if set(ht.cells) - paired:
            return False
    return True


def action_rel(beta: Bijection, a_s: Action, a_t: Action, ignore: Iterable = ()) -> bool:
    if a_s.kind != a_t.kind or a_s.fn != a_t.fn:
        return False
    if a_s.val is not None or a_t.val is not None:
        if a_s.val is None or a_t.val is None or not value_rel(beta, a_s.val, a_t.val):
            return False
    return heap_rel(beta, a_s.heap, a_t.heap, ignore=ignore)


def trace_rel(beta: Bijection, ts: list, tt: list, ignore: Iterable = ()) -> bool:
    return len(ts) == len(tt) and all(action_rel(beta, a, b, ignore) for a, b in zip(ts, tt))


def strip_rel(beta: Bijection, hs_list: list, ht_list: list, ignore: Iterable = ()) -> bool:
    """Heap lists related pointwise; the target may run longer."""
    return len(hs_list) <= len(ht_list) and all(
        heap_rel(beta, a, b, ignore=ignore) for a, b in zip(hs_list, ht_list))


def _order(l):
    return (0, str(l.id)) if isinstance(l.id, str) else (1, l.id)


def grow(beta: Bijection, hs: Heap, ht: Heap, ignore: Iterable = ()) -> Bijection:
    """Pair the source cells not yet in ``beta`` with the unpaired target
    cells, both in allocation order. Raises ``BijectionError`` when the
    counts differ."""
    ignore = set(ignore)
    new_s = sorted((l for l in hs.cells if l not in ignore and beta.lookup(l) is None), key=_order)
    # enclave cells grow downwards from -1, ordinary cells upwards from 0
    new_t = sorted((a for a in ht.cells if a not in beta.targets and a not in ignore),
                   key=lambda a: (abs(a), a))
    if len(new_s) > len(new_t):
        raise BijectionError(f"{len(new_s)} new source cells but {len(new_t)} new target cells")
    return beta.extend((l, n, None if beta.bare else ht.annot(n)) for l, n in zip(new_s, new_t))


def infer_beta(beta: Bijection, ts: list, tt: list, ignore: Iterable = (),
               final: Optional[tuple] = None) -> Optional[Bijection]:
    """Grow ``beta`` along two traces (and optional final heaps)."""
    heaps = [(a.heap, b.heap) for a, b in zip(ts, tt)]
    if final is not None:
        heaps.append(final)
    try:
        for hs, ht in heaps:
            beta = grow(beta, hs, ht, ignore)
    except BijectionError:
        return None
    return beta
