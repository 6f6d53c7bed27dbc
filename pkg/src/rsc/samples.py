"""Reference programs and monitors used by the acceptance checks and the CLI."""

from __future__ import annotations

from .monitors import parse_monitor
from .parser import parse_component, parse_context

# Naturals are never negative, so the absolute value of the input is the input.
DEPOSIT = """component {
  root lroot;
  fun deposit(x) { let q = x in let amt = !lroot in lroot := amt + q }
  fun balance(x) { let b = !lroot in skip }
}"""

# The expected LP body of deposit, up to binder names.
DEPOSIT_TARGET = "let q = x in let amt = !0 with kroot in 0 := amt + q with kroot"

# Booleans and unit compile to numbers, so the source side accepts them too.
BALANCE_MONITOR_LU = """monitor {
  root lroot;
  states ok;
  init ok;
  trans ok -> ok when root.val >= 0;
  trans ok -> ok when root.val is bool;
  trans ok -> ok when root.val is unit;
}"""

BALANCE_MONITOR_LP = """monitor {
  root kroot;
  states ok;
  init ok;
  trans ok -> ok when root.val >= 0;
}"""

# Hands the monitored location, and with it the root capability, to a callback.
LEAKY = """component {
  root lroot;
  import g;
  fun deposit(x) { let amt = !lroot in lroot := amt + x; call g lroot }
}"""

LEAK_ATTACKER = """context {
  fun main(x) { call deposit 1 }
  fun g(x) { x.1 := <1, 1> with x.2 }
}"""


def deposit():
    return parse_component(DEPOSIT, "lu")


def leaky():
    return parse_component(LEAKY, "lu")


def leak_attacker():
    return parse_context(LEAK_ATTACKER, "lp")


def balance_monitors():
    """The balance-nonnegative monitor on both sides of the compiler."""
    return parse_monitor(BALANCE_MONITOR_LU, "lu"), parse_monitor(BALANCE_MONITOR_LP, "lp")
