"""Analysis problem data model and its text format.

A transition system declares Boolean state variables, rational state
variables, nondeterministic rational inputs and (implicitly or explicitly)
Boolean path-choice variables; its transition relation is a quantifier-free
NNF formula over current/primed state, inputs and choices.  Parsing
auto-labels every disjunction that contains numeric literals with fresh
choice variables so a satisfying assignment of the choices identifies one
executed path.

The grammar (UTF-8, `#` line comments):

    system <name>
    bool <id> | num <id> | input num <id> | choice <id>
    init (and <bool-literal>...)
    init-num <id> = <rational>
    transition <nnf-expr>
    template box | octagon | rows ( ((<coeff> <id>)...)... )

where <nnf-expr> is s-expressions over `and`, `or`, `not` (on propositions
only), `(<= <linform> <linform>)`, `(< ...)`, `(= ...)`, identifiers and
primed identifiers `<id>'`.  Rational literals are `[-]digits[/digits]`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from . import formulas as fm
from .bdd import Bdd, BddManager, Mtbdd, formula_to_bdd, interleaved_order
from .rationals import Ext, NEG_INF, POS_INF, Rat

PRIME = "'"


def primed(name: str) -> str:
    return name + PRIME


def unprimed(name: str) -> str:
    return name[:-1] if name.endswith(PRIME) else name


class ModelError(Exception):
    pass


class ParseError(ModelError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


# -- transition systems ----------------------------------------------------------


@dataclass
class TransitionSystem:
    name: str
    bool_vars: list[str]
    num_vars: list[str]
    input_vars: list[str]
    choice_vars: list[str]
    transition: fm.Formula
    init_bool: fm.Formula
    init_num: dict[str, Rat]
    template_spec: object | None = field(default=None, compare=False)
    top_paths: list[dict[str, bool]] = field(default_factory=list, compare=False)

    @property
    def primed_bool_vars(self) -> list[str]:
        return [primed(b) for b in self.bool_vars]

    def sorts(self) -> dict[str, str]:
        out = {}
        for b in self.bool_vars:
            out[b] = "bool"
            out[primed(b)] = "bool'"
        for x in self.num_vars:
            out[x] = "num"
            out[primed(x)] = "num'"
        for y in self.input_vars:
            out[y] = "input"
        for p in self.choice_vars:
            out[p] = "choice"
        return out

    def state_of(self, bools: Mapping[str, bool], primed_vars: bool = False) -> tuple[bool, ...]:
        names = self.primed_bool_vars if primed_vars else self.bool_vars
        return tuple(bool(bools.get(n, False)) for n in names)


@dataclass
class Template:
    """Fixed directions of the polyhedra: one linear form over num_vars per row."""

    rows: list[tuple[str, dict[str, Rat]]]

    def __len__(self) -> int:
        return len(self.rows)

    def label(self, i: int) -> str:
        return self.rows[i][0]

    def coeffs(self, i: int) -> dict[str, Rat]:
        return self.rows[i][1]

    def apply(self, i: int, point: Mapping[str, Rat]) -> Rat:
        return sum((c * point[v] for v, c in self.rows[i][1].items()), Fraction(0))


def _form_label(coeffs: dict[str, Rat]) -> str:
    parts = []
    for v, c in coeffs.items():
        if c == 1:
            parts.append(f"+{v}")
        elif c == -1:
            parts.append(f"-{v}")
        else:
            parts.append(f"{'+' if c > 0 else '-'}{abs(c)}*{v}")
    text = "".join(parts)
    return text[1:] if text.startswith("+") else text


def make_template(spec, num_vars: Sequence[str]) -> Template:
    """`box`, `octagon`, or explicit rows as a list of coeff dicts."""
    rows: list[tuple[str, dict[str, Rat]]] = []
    if spec == "box":
        if not num_vars:
            raise ModelError("box template needs at least one numeric variable")
        for v in num_vars:
            rows.append((v, {v: Fraction(1)}))
            rows.append((f"-{v}", {v: Fraction(-1)}))
    elif spec == "octagon":
        if not num_vars:
            raise ModelError("octagon template needs at least one numeric variable")
        for v in num_vars:
            rows.append((v, {v: Fraction(1)}))
            rows.append((f"-{v}", {v: Fraction(-1)}))
        for i, v in enumerate(num_vars):
            for w in num_vars[i + 1 :]:
                for sv in (1, -1):
                    for sw in (1, -1):
                        coeffs = {v: Fraction(sv), w: Fraction(sw)}
                        rows.append((_form_label(coeffs), coeffs))
    else:
        if isinstance(spec, tuple) and spec and spec[0] == "rows":
            spec = spec[1]
        if not spec:
            raise ModelError("custom template has no rows")
        known = set(num_vars)
        for row in spec:
            coeffs = {v: Fraction(c) for v, c in dict(row).items() if c != 0}
            if not coeffs:
                raise ModelError("template row has no nonzero coefficient")
            for v in coeffs:
                if v not in known:
                    raise ModelError(f"template row references undeclared variable {v!r}")
            rows.append((_form_label(coeffs), coeffs))
    return Template(rows)


# -- abstract values and strategies ------------------------------------------------


@dataclass(frozen=True)
class StrategyChoice:
    """Packed strategy terminal: departure Boolean state and path choices."""

    source: tuple[bool, ...]
    path: tuple[bool, ...]


@dataclass
class AbstractValue:
    """Per template row, an MTBDD over the unprimed Booleans with Ext bounds."""

    man: BddManager
    rows: list[Mtbdd]

    def cells(self, i: int) -> list[tuple[Bdd, Ext]]:
        return self.man.partition(self.rows[i])

    def value_at(self, i: int, state: Mapping[str, bool]) -> Ext:
        return self.man.evaluate(self.rows[i], dict(state))

    def with_row(self, i: int, row: Mtbdd) -> "AbstractValue":
        rows = list(self.rows)
        rows[i] = row
        return AbstractValue(self.man, rows)

    def leq(self, other: "AbstractValue") -> bool:
        if other.man is not self.man or len(other.rows) != len(self.rows):
            raise ModelError("comparing abstract values from different analyses")
        for a, b in zip(self.rows, other.rows):
            ok = self.man.apply2(a, b, lambda x, y: x <= y, as_bdd=True)
            if not ok.is_true:
                return False
        return True

    def equal(self, other: "AbstractValue") -> bool:
        return self.man is other.man and self.rows == other.rows

    def canonical_cells(self, bool_vars: Sequence[str]) -> list[list[tuple[str, str]]]:
        """Manager-independent form: per row, sorted (cube, bound) pairs."""
        out = []
        for i in range(len(self.rows)):
            cells = []
            for guard, value in self.cells(i):
                for cube in self.man.iter_cubes(guard):
                    text = "".join(
                        "1" if cube.get(v) is True else "0" if cube.get(v) is False else "-"
                        for v in bool_vars
                    )
                    cells.append((text, str(value)))
            cells.sort()
            out.append(cells)
        return out


@dataclass
class Strategy:
    """Per template row, an MTBDD over the primed Booleans with StrategyChoice leaves."""

    man: BddManager
    rows: list[Mtbdd]

    def with_row(self, i: int, row: Mtbdd) -> "Strategy":
        rows = list(self.rows)
        rows[i] = row
        return Strategy(self.man, rows)

    def choice_at(self, i: int, state: Mapping[str, bool]) -> StrategyChoice | None:
        return self.man.evaluate(self.rows[i], dict(state))


def analysis_manager(ts: TransitionSystem) -> BddManager:
    return BddManager(interleaved_order(ts.bool_vars, primed))


def initial_value(ts: TransitionSystem, tmpl: Template, man: BddManager) -> AbstractValue:
    """Every initial Boolean state gets the template applied to x0, others -inf."""
    init = formula_to_bdd(man, ts.init_bool)
    rows = []
    for i in range(len(tmpl)):
        bound = Ext.finite(tmpl.apply(i, ts.init_num))
        rows.append(man.assign(man.terminal(NEG_INF), init, bound))
    return AbstractValue(man, rows)


def initial_strategy(ts: TransitionSystem, tmpl: Template, man: BddManager) -> Strategy:
    return Strategy(man, [man.terminal(None) for _ in range(len(tmpl))])


# -- path extraction -------------------------------------------------------------


@dataclass
class PathConjunction:
    """Numeric literals of the transition selected by one choice valuation."""

    atoms: list[fm.Atom]
    residue: fm.Formula


def extract_path_conjunction(ts: TransitionSystem, choices: Mapping[str, bool]) -> PathConjunction:
    missing = [p for p in ts.choice_vars if p not in choices]
    if missing:
        raise ModelError(f"path extraction needs all choice variables; missing {missing}")
    fixed = fm.subst_bools(ts.transition, dict(choices))
    atoms: list[fm.Atom] = []

    def walk(g: fm.Formula) -> fm.Formula:
        if isinstance(g, fm.Atom):
            atoms.append(g)
            return fm.TRUE
        if isinstance(g, fm.And):
            return fm.conj(walk(a) for a in g.args)
        if isinstance(g, fm.Or):
            if fm.has_atoms(g):
                raise ModelError(
                    "transition has a disjunction with numeric literals not resolved "
                    "by the choice variables"
                )
            return g
        return g

    residue = walk(fixed)
    return PathConjunction(atoms, residue)


# -- choice labeling -------------------------------------------------------------


def _fresh_choice_names(taken: set[str]) -> Iterable[str]:
    k = 0
    while True:
        name = f"p{k}"
        if name not in taken:
            yield name
        k += 1


def label_choices(ts: TransitionSystem) -> None:
    """Label every numeric-literal disjunction with fresh choice variables.

    Disjunct j of a k-way disjunction gets the binary code k-1-j over
    ceil(log2 k) fresh variables (most significant bit first), so the
    leftmost disjunct carries the positive literals.  Disjunctions already
    covered by explicitly declared choice variables are left alone.
    """
    taken = set(
        ts.bool_vars
        + ts.primed_bool_vars
        + ts.num_vars
        + [primed(x) for x in ts.num_vars]
        + ts.input_vars
        + ts.choice_vars
    )
    names = _fresh_choice_names(taken)
    new_vars: list[str] = []
    explicit = set(ts.choice_vars)

    def choice_label(disjunct: fm.Formula) -> frozenset[tuple[str, bool]]:
        if isinstance(disjunct, fm.Lit) and disjunct.name in explicit:
            return frozenset([(disjunct.name, disjunct.polarity)])
        if isinstance(disjunct, fm.And):
            out = set()
            for a in disjunct.args:
                if isinstance(a, fm.Lit) and a.name in explicit:
                    out.add((a.name, a.polarity))
            return frozenset(out)
        return frozenset()

    def labels_distinct(children: Sequence[fm.Formula]) -> bool:
        labels = [choice_label(c) for c in children]
        if any(not l for l in labels):
            return False
        for i in range(len(labels)):
            for j in range(i + 1, len(labels)):
                joint = dict(labels[i])
                for name, pol in labels[j]:
                    if joint.get(name, pol) != pol:
                        break
                else:
                    return False
        return True

    top_codes: list[dict[str, bool]] = []

    def rec(g: fm.Formula, top: bool) -> fm.Formula:
        if isinstance(g, fm.And):
            return fm.conj(rec(a, False) for a in g.args)
        if isinstance(g, fm.Or):
            children = [rec(a, False) for a in g.args]
            if not any(fm.has_atoms(c) for c in children):
                return fm.disj(children)
            if labels_distinct(children):
                if top:
                    top_codes.extend(dict(choice_label(c)) for c in children)
                return fm.disj(children)
            k = len(children)
            bits = max(1, math.ceil(math.log2(k)))
            vars_here = [next(names) for _ in range(bits)]
            new_vars.extend(vars_here)
            labelled = []
            for j, child in enumerate(children):
                code = k - 1 - j
                lits = [
                    fm.lit(vars_here[b], bool((code >> (bits - 1 - b)) & 1))
                    for b in range(bits)
                ]
                if top:
                    top_codes.append({l.name: l.polarity for l in lits})
                labelled.append(fm.conj(lits + [child]))
            return fm.disj(labelled)
        return g

    ts.transition = rec(ts.transition, True)
    ts.choice_vars = ts.choice_vars + new_vars
    ts.top_paths = top_codes


# -- tokenizer and parser ----------------------------------------------------------


@dataclass
class _Tok:
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch in " \t\r":
            col += 1
            i += 1
        elif ch == "#":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            toks.append(_Tok(ch, line, col))
            col += 1
            i += 1
        else:
            start = i
            start_col = col
            while i < n and text[i] not in " \t\r\n()#":
                i += 1
                col += 1
            toks.append(_Tok(text[start:i], line, start_col))
    toks.append(_Tok("", line, col))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def next(self) -> _Tok:
        tok = self.toks[self.pos]
        if tok.text == "":
            raise ParseError("unexpected end of input", tok.line, tok.col)
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def at_end(self) -> bool:
        return self.peek().text == ""

    def fail(self, message: str, tok: _Tok | None = None):
        tok = tok or self.peek()
        raise ParseError(message, tok.line, tok.col)

    def sexpr(self) -> object:
        tok = self.next()
        if tok.text == "(":
            out: list[object] = [tok]
            while True:
                if self.peek().text == "":
                    raise ParseError("unbalanced parenthesis", tok.line, tok.col)
                if self.peek().text == ")":
                    self.next()
                    return out
                out.append(self.sexpr())
        if tok.text == ")":
            raise ParseError("unexpected ')'", tok.line, tok.col)
        return tok


def _is_rational(text: str) -> bool:
    body = text[1:] if text[:1] == "-" else text
    if "/" in body:
        a, _, b = body.partition("/")
        return a.isdigit() and b.isdigit()
    return body.isdigit()


def _sx_tok(sx: object) -> _Tok:
    return sx[0] if isinstance(sx, list) else sx  # type: ignore[return-value]


class _Builder:
    """Turns parsed s-expressions into sorted, validated formulas."""

    def __init__(self):
        self.name = ""
        self.bool_vars: list[str] = []
        self.num_vars: list[str] = []
        self.input_vars: list[str] = []
        self.choice_vars: list[str] = []
        self.init_sx = None
        self.init_num: dict[str, Rat] = {}
        self.transition_sx = None
        self.template_spec = None

    def declared(self) -> set[str]:
        return set(self.bool_vars) | set(self.num_vars) | set(self.input_vars) | set(
            self.choice_vars
        )

    def sort_of(self, name: str) -> str | None:
        base = unprimed(name)
        if base in self.bool_vars:
            return "bool" if base == name else "bool'"
        if base in self.num_vars:
            return "num" if base == name else "num'"
        if name in self.input_vars:
            return "input"
        if name in self.choice_vars:
            return "choice"
        return None

    # linear forms -------------------------------------------------------

    def linform(self, sx: object) -> tuple[dict[str, Rat], Rat]:
        tok = _sx_tok(sx)
        if not isinstance(sx, list):
            text = sx.text  # type: ignore[union-attr]
            if _is_rational(text):
                return {}, Fraction(text)
            sort = self.sort_of(text)
            if sort is None:
                raise ParseError(f"undeclared identifier {text!r}", tok.line, tok.col)
            if sort not in ("num", "num'", "input"):
                raise ParseError(
                    f"{text!r} has sort {sort}, not usable in a linear form", tok.line, tok.col
                )
            return {text: Fraction(1)}, Fraction(0)
        head = sx[1] if len(sx) > 1 else None
        if head is None or isinstance(head, list):
            raise ParseError("empty arithmetic expression", tok.line, tok.col)
        op = head.text
        args = sx[2:]
        if op == "+":
            coeffs: dict[str, Rat] = {}
            const = Fraction(0)
            for a in args:
                c, k = self.linform(a)
                for v, q in c.items():
                    coeffs[v] = coeffs.get(v, Fraction(0)) + q
                const += k
            return coeffs, const
        if op == "-":
            if not args:
                raise ParseError("'-' needs arguments", tok.line, tok.col)
            coeffs, const = self.linform(args[0])
            if len(args) == 1:
                return {v: -q for v, q in coeffs.items()}, -const
            for a in args[1:]:
                c, k = self.linform(a)
                for v, q in c.items():
                    coeffs[v] = coeffs.get(v, Fraction(0)) - q
                const -= k
            return coeffs, const
        if op == "*":
            scalar = Fraction(1)
            var_form: tuple[dict[str, Rat], Rat] | None = None
            for a in args:
                c, k = self.linform(a)
                if c:
                    if var_form is not None:
                        raise ParseError("non-linear product", tok.line, tok.col)
                    var_form = (c, k)
                else:
                    scalar *= k
            if var_form is None:
                return {}, scalar
            c, k = var_form
            return {v: q * scalar for v, q in c.items()}, k * scalar
        raise ParseError(f"unknown arithmetic operator {op!r}", tok.line, tok.col)

    # formulas ----------------------------------------------------------------

    def formula(self, sx: object, where: str) -> fm.Formula:
        tok = _sx_tok(sx)
        if not isinstance(sx, list):
            text = sx.text  # type: ignore[union-attr]
            if text == "true":
                return fm.TRUE
            if text == "false":
                return fm.FALSE
            sort = self.sort_of(text)
            if sort is None:
                raise ParseError(f"undeclared identifier {text!r}", tok.line, tok.col)
            if sort not in ("bool", "bool'", "choice"):
                raise ParseError(f"{text!r} is numeric, not a proposition", tok.line, tok.col)
            if where == "init" and sort != "bool":
                raise ParseError("init may only mention unprimed Booleans", tok.line, tok.col)
            return fm.lit(text)
        if len(sx) < 2 or isinstance(sx[1], list):
            raise ParseError("expected an operator", tok.line, tok.col)
        op = sx[1].text
        args = sx[2:]
        if op == "and":
            return fm.conj(self.formula(a, where) for a in args)
        if op == "or":
            if where == "init":
                raise ParseError("init is a conjunction of literals", tok.line, tok.col)
            return fm.disj(self.formula(a, where) for a in args)
        if op == "not":
            if len(args) != 1 or isinstance(args[0], list):
                raise ParseError("'not' applies to a single proposition", tok.line, tok.col)
            inner = self.formula(args[0], where)
            if not isinstance(inner, fm.Lit):
                raise ParseError("'not' applies to propositions only", tok.line, tok.col)
            return fm.Lit(inner.name, not inner.polarity)
        if op in ("<=", "<", "="):
            if where == "init":
                raise ParseError("numeric atoms are not allowed in init", tok.line, tok.col)
            if len(args) != 2:
                raise ParseError(f"{op!r} needs two arguments", tok.line, tok.col)
            lc, lk = self.linform(args[0])
            rc, rk = self.linform(args[1])
            coeffs = dict(lc)
            for v, q in rc.items():
                coeffs[v] = coeffs.get(v, Fraction(0)) - q
            return fm.atom(coeffs, op, rk - lk)
        raise ParseError(f"unknown operator {op!r}", tok.line, tok.col)


def parse_system(text: str) -> TransitionSystem:
    parser = _Parser(text)
    b = _Builder()
    seen_system = False
    while not parser.at_end():
        tok = parser.next()
        kw = tok.text
        if kw == "system":
            b.name = parser.next().text
            seen_system = True
        elif kw in ("bool", "num", "choice"):
            name = parser.next().text
            if name in b.declared():
                raise ParseError(f"duplicate declaration of {name!r}", tok.line, tok.col)
            if name.endswith(PRIME) or _is_rational(name):
                raise ParseError(f"bad identifier {name!r}", tok.line, tok.col)
            {"bool": b.bool_vars, "num": b.num_vars, "choice": b.choice_vars}[kw].append(name)
        elif kw == "input":
            parser.expect("num")
            name = parser.next().text
            if name in b.declared():
                raise ParseError(f"duplicate declaration of {name!r}", tok.line, tok.col)
            if name.endswith(PRIME) or _is_rational(name):
                raise ParseError(f"bad identifier {name!r}", tok.line, tok.col)
            b.input_vars.append(name)
        elif kw == "init":
            b.init_sx = parser.sexpr()
        elif kw == "init-num":
            name = parser.next().text
            if name not in b.num_vars:
                raise ParseError(f"init-num for undeclared numeric {name!r}", tok.line, tok.col)
            parser.expect("=")
            val = parser.next()
            if not _is_rational(val.text):
                raise ParseError(f"bad rational literal {val.text!r}", val.line, val.col)
            b.init_num[name] = Fraction(val.text)
        elif kw == "transition":
            b.transition_sx = parser.sexpr()
        elif kw == "template":
            shape = parser.next()
            if shape.text in ("box", "octagon"):
                b.template_spec = shape.text
            elif shape.text == "rows":
                sx = parser.sexpr()
                rows = []
                for row_sx in sx[1:]:  # type: ignore[index]
                    if not isinstance(row_sx, list):
                        raise ParseError("template row must be a list", shape.line, shape.col)
                    row = {}
                    for pair in row_sx[1:]:
                        if not isinstance(pair, list) or len(pair) != 3:
                            raise ParseError(
                                "template row entries are (<coeff> <id>)", shape.line, shape.col
                            )
                        coeff, ident = pair[1], pair[2]
                        if not _is_rational(coeff.text):
                            raise ParseError(
                                f"bad coefficient {coeff.text!r}", coeff.line, coeff.col
                            )
                        row[ident.text] = Fraction(coeff.text)
                    rows.append(row)
                b.template_spec = ("rows", rows)
            else:
                raise ParseError(f"unknown template {shape.text!r}", shape.line, shape.col)
        else:
            raise ParseError(f"unknown directive {kw!r}", tok.line, tok.col)

    last = parser.toks[-1]
    if not seen_system:
        raise ParseError("missing 'system' header", 1, 1)
    if b.transition_sx is None:
        raise ParseError("missing transition section", last.line, last.col)
    if b.init_sx is None:
        raise ParseError("missing init section", last.line, last.col)
    for x in b.num_vars:
        if x not in b.init_num:
            raise ParseError(f"missing init-num for {x!r}", last.line, last.col)

    init_bool = b.formula(b.init_sx, "init")
    transition = b.formula(b.transition_sx, "transition")
    ts = TransitionSystem(
        name=b.name,
        bool_vars=b.bool_vars,
        num_vars=b.num_vars,
        input_vars=b.input_vars,
        choice_vars=b.choice_vars,
        transition=transition,
        init_bool=init_bool,
        init_num=b.init_num,
        template_spec=b.template_spec,
    )
    label_choices(ts)
    _check_init_satisfiable(ts, last)
    return ts


def _check_init_satisfiable(ts: TransitionSystem, tok: _Tok) -> None:
    from .smt import smt_check

    if smt_check(ts.init_bool) is None:
        raise ParseError("initial condition is unsatisfiable", tok.line, tok.col)


# -- printing ----------------------------------------------------------------------


def format_rat_sx(q: Rat) -> str:
    return str(q)


def formula_to_sx(f: fm.Formula) -> str:
    if isinstance(f, fm.Const):
        return "true" if f.value else "false"
    if isinstance(f, fm.Lit):
        return f.name if f.polarity else f"(not {f.name})"
    if isinstance(f, fm.Atom):
        terms = [
            f"(* {format_rat_sx(c)} {v})" if c != 1 else v for v, c in f.coeffs
        ]
        lhs = terms[0] if len(terms) == 1 else "(+ " + " ".join(terms) + ")"
        return f"({f.rel} {lhs} {format_rat_sx(f.const)})"
    if isinstance(f, fm.And):
        return "(and " + " ".join(formula_to_sx(a) for a in f.args) + ")"
    if isinstance(f, fm.Or):
        return "(or " + " ".join(formula_to_sx(a) for a in f.args) + ")"
    raise ModelError(f"cannot print {f!r}")


def print_system(ts: TransitionSystem) -> str:
    lines = [f"system {ts.name}"]
    for v in ts.bool_vars:
        lines.append(f"bool {v}")
    for v in ts.num_vars:
        lines.append(f"num {v}")
    for v in ts.input_vars:
        lines.append(f"input num {v}")
    for v in ts.choice_vars:
        lines.append(f"choice {v}")
    lines.append(f"init {formula_to_sx(_as_and(ts.init_bool))}")
    for v in ts.num_vars:
        lines.append(f"init-num {v} = {format_rat_sx(ts.init_num[v])}")
    if ts.template_spec is not None:
        if isinstance(ts.template_spec, str):
            lines.append(f"template {ts.template_spec}")
        else:
            rows = ts.template_spec[1]
            row_texts = [
                "(" + " ".join(f"({format_rat_sx(c)} {v})" for v, c in row.items()) + ")"
                for row in rows
            ]
            lines.append("template rows (" + " ".join(row_texts) + ")")
    lines.append(f"transition {formula_to_sx(ts.transition)}")
    return "\n".join(lines) + "\n"


def _as_and(f: fm.Formula) -> fm.Formula:
    if isinstance(f, fm.And):
        return f
    if isinstance(f, fm.Const) and f.value:
        return fm.And(())
    return fm.And((f,))
