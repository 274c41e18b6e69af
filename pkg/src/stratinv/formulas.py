"""Quantifier-free formulas in negation normal form.

Atoms are propositional literals or linear constraints ``sum(c_i * v_i) rel k``
with rel in {<=, <, =} and exact rational coefficients.  Negation exists only
as literal polarity / atom relation flips, so every construction stays in NNF.
Nodes are immutable and may be shared (DAG), which keeps formulas derived from
decision diagrams linear in the diagram size.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .rationals import Rat

LE, LT, EQ = "<=", "<", "="


class Formula:
    __slots__ = ()


@dataclass(frozen=True)
class Const(Formula):
    value: bool

    def __repr__(self) -> str:
        return "true" if self.value else "false"


TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True)
class Lit(Formula):
    name: str
    polarity: bool = True

    def __repr__(self) -> str:
        return self.name if self.polarity else f"(not {self.name})"


@dataclass(frozen=True)
class Atom(Formula):
    """Linear atom: coeffs . vars  rel  const."""

    coeffs: tuple[tuple[str, Rat], ...]
    rel: str
    const: Rat

    def __repr__(self) -> str:
        terms = " + ".join(f"{c}*{v}" for v, c in self.coeffs) or "0"
        return f"({terms} {self.rel} {self.const})"


@dataclass(frozen=True)
class And(Formula):
    args: tuple[Formula, ...]

    def __repr__(self) -> str:
        return "(and " + " ".join(map(repr, self.args)) + ")"


@dataclass(frozen=True)
class Or(Formula):
    args: tuple[Formula, ...]

    def __repr__(self) -> str:
        return "(or " + " ".join(map(repr, self.args)) + ")"


def lit(name: str, polarity: bool = True) -> Formula:
    return Lit(name, polarity)


def atom(coeffs: Mapping[str, Rat] | Iterable[tuple[str, Rat]], rel: str, const: Rat) -> Formula:
    """Build a linear atom; drops zero coefficients and folds variable-free atoms."""
    if rel not in (LE, LT, EQ):
        raise ValueError(f"bad relation {rel!r}")
    items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
    merged: dict[str, Rat] = {}
    for v, c in items:
        c = Fraction(c)
        if v in merged:
            merged[v] += c
        else:
            merged[v] = c
    tidy = tuple(sorted((v, c) for v, c in merged.items() if c != 0))
    k = Fraction(const)
    if not tidy:
        zero = Fraction(0)
        holds = zero <= k if rel == LE else zero < k if rel == LT else zero == k
        return TRUE if holds else FALSE
    return Atom(tidy, rel, k)


def conj(parts: Iterable[Formula]) -> Formula:
    flat: list[Formula] = []
    for p in parts:
        if p is FALSE or (isinstance(p, Const) and not p.value):
            return FALSE
        if isinstance(p, Const):
            continue
        if isinstance(p, And):
            flat.extend(p.args)
        else:
            flat.append(p)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(parts: Iterable[Formula]) -> Formula:
    flat: list[Formula] = []
    for p in parts:
        if isinstance(p, Const) and p.value:
            return TRUE
        if isinstance(p, Const):
            continue
        if isinstance(p, Or):
            flat.extend(p.args)
        else:
            flat.append(p)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def negate(f: Formula) -> Formula:
    """NNF negation: flips literals and relations, swaps and/or."""
    if isinstance(f, Const):
        return FALSE if f.value else TRUE
    if isinstance(f, Lit):
        return Lit(f.name, not f.polarity)
    if isinstance(f, Atom):
        neg_coeffs = tuple((v, -c) for v, c in f.coeffs)
        if f.rel == LE:
            return Atom(neg_coeffs, LT, -f.const)
        if f.rel == LT:
            return Atom(neg_coeffs, LE, -f.const)
        return disj([Atom(f.coeffs, LT, f.const), Atom(neg_coeffs, LT, -f.const)])
    if isinstance(f, And):
        return disj(negate(a) for a in f.args)
    if isinstance(f, Or):
        return conj(negate(a) for a in f.args)
    raise TypeError(f"not a formula: {f!r}")


def subst_bools(f: Formula, assignment: Mapping[str, bool]) -> Formula:
    """Fix some propositional variables to constants and simplify."""
    memo: dict[int, Formula] = {}

    def rec(g: Formula) -> Formula:
        got = memo.get(id(g))
        if got is not None:
            return got
        if isinstance(g, Lit) and g.name in assignment:
            val = assignment[g.name] == g.polarity
            res: Formula = TRUE if val else FALSE
        elif isinstance(g, And):
            res = conj(rec(a) for a in g.args)
        elif isinstance(g, Or):
            res = disj(rec(a) for a in g.args)
        else:
            res = g
        memo[id(g)] = res
        return res

    return rec(f)


def eval_atoms(f: Formula, nums: Mapping[str, Rat]) -> Formula:
    """Replace every linear atom by its truth value under `nums` and simplify.

    Every numeric variable occurring in f must be assigned; the result is
    purely propositional.
    """
    memo: dict[int, Formula] = {}

    def rec(g: Formula) -> Formula:
        got = memo.get(id(g))
        if got is not None:
            return got
        if isinstance(g, Atom):
            total = Fraction(0)
            for v, c in g.coeffs:
                if v not in nums:
                    raise KeyError(f"numeric variable {v!r} missing from assignment")
                total += c * nums[v]
            if g.rel == LE:
                holds = total <= g.const
            elif g.rel == LT:
                holds = total < g.const
            else:
                holds = total == g.const
            res: Formula = TRUE if holds else FALSE
        elif isinstance(g, And):
            res = conj(rec(a) for a in g.args)
        elif isinstance(g, Or):
            res = disj(rec(a) for a in g.args)
        else:
            res = g
        memo[id(g)] = res
        return res

    return rec(f)


def evaluate(f: Formula, bools: Mapping[str, bool], nums: Mapping[str, Rat]) -> bool:
    g = eval_atoms(f, nums) if has_atoms(f) else f
    g = subst_bools(g, bools)
    if not isinstance(g, Const):
        missing = prop_vars(g)
        raise KeyError(f"unassigned propositional variables: {sorted(missing)}")
    return g.value


def prop_vars(f: Formula) -> set[str]:
    out: set[str] = set()
    seen: set[int] = set()

    def rec(g: Formula) -> None:
        if id(g) in seen:
            return
        seen.add(id(g))
        if isinstance(g, Lit):
            out.add(g.name)
        elif isinstance(g, (And, Or)):
            for a in g.args:
                rec(a)

    rec(f)
    return out


def num_vars(f: Formula) -> set[str]:
    out: set[str] = set()
    seen: set[int] = set()

    def rec(g: Formula) -> None:
        if id(g) in seen:
            return
        seen.add(id(g))
        if isinstance(g, Atom):
            out.update(v for v, _ in g.coeffs)
        elif isinstance(g, (And, Or)):
            for a in g.args:
                rec(a)

    rec(f)
    return out


def atoms_of(f: Formula) -> list[Atom]:
    """Distinct linear atoms in first-encounter order."""
    out: list[Atom] = []
    seen_atoms: set[Atom] = set()
    seen: set[int] = set()

    def rec(g: Formula) -> None:
        if id(g) in seen:
            return
        seen.add(id(g))
        if isinstance(g, Atom):
            if g not in seen_atoms:
                seen_atoms.add(g)
                out.append(g)
        elif isinstance(g, (And, Or)):
            for a in g.args:
                rec(a)

    rec(f)
    return out


def is_propositional(f: Formula) -> bool:
    return not has_atoms(f)


def has_atoms(f: Formula) -> bool:
    seen: set[int] = set()

    def rec(g: Formula) -> bool:
        if id(g) in seen:
            return False
        seen.add(id(g))
        if isinstance(g, Atom):
            return True
        if isinstance(g, (And, Or)):
            return any(rec(a) for a in g.args)
        return False

    return rec(f)
