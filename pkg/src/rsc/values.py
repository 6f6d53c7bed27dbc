"""Runtime values shared by every language.

Booleans get their own class because Python's ``True == 1`` would make a
source ``true`` indistinguishable from the number one inside pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union


@dataclass(frozen=True)
class Bool:
    value: bool

    def __repr__(self) -> str:
        return "true" if self.value else "false"


TRUE = Bool(True)
FALSE = Bool(False)


@dataclass(frozen=True)
class Unit:
    def __repr__(self) -> str:
        return "unit"


UNIT = Unit()


@dataclass(frozen=True)
class Loc:
    """Abstract source location. Declared locations carry their name as id,
    runtime allocations carry an integer serial."""

    id: Union[int, str]

    def __repr__(self) -> str:
        return self.id if isinstance(self.id, str) else f"l#{self.id}"


@dataclass(frozen=True)
class Cap:
    """Unforgeable capability token of the capability languages."""

    id: Union[int, str]

    def __repr__(self) -> str:
        return "kroot" if self.id == "kroot" else f"@{self.id}"


KROOT = Cap("kroot")


@dataclass(frozen=True)
class Pair:
    fst: "Value"
    snd: "Value"

    def __repr__(self) -> str:
        return f"<{self.fst!r}, {self.snd!r}>"


Value = Union[int, Bool, Unit, Loc, Cap, Pair]


def is_nat(v) -> bool:
    return type(v) is int


def show(v) -> str:
    return repr(v)


def locs_in(v) -> list:
    """Locations occurring in a value, left to right."""
    match v:
        case Loc():
            return [v]
        case Pair(a, b):
            return locs_in(a) + locs_in(b)
    return []


def caps_in(v) -> list:
    match v:
        case Cap():
            return [v]
        case Pair(a, b):
            return caps_in(a) + caps_in(b)
    return []
