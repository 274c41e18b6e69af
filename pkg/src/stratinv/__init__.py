"""Strongest template-polyhedra invariants over Boolean/rational transition systems.

The engine computes, for a transition system mixing Boolean state and
rational numeric state, the least inductive invariant of the shape
"for every Boolean state, a template polyhedron A x <= c(b)", using
SMT-driven max-strategy iteration with BDD-stored strategies and
equivalence-class-reduced exact linear programming.
"""

from .rationals import Eps, Ext, NEG_INF, POS_INF, Rat, ext_add, rat, rat_arith

from .model import (
    AbstractValue,
    Strategy,
    Template,
    TransitionSystem,
    initial_value,
    make_template,
    parse_system,
    print_system,
)
from .solver import EngineConfig, Engine, IterationState, iterate

__all__ = [
    "AbstractValue",
    "Engine",
    "EngineConfig",
    "Eps",
    "Ext",
    "IterationState",
    "NEG_INF",
    "POS_INF",
    "Rat",
    "Strategy",
    "Template",
    "TransitionSystem",
    "ext_add",
    "initial_value",
    "iterate",
    "make_template",
    "parse_system",
    "print_system",
    "rat",
    "rat_arith",
]
