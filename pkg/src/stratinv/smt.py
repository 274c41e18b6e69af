"""Satisfiability of quantifier-free Boolean + linear-rational formulas.

The internal solver is a lazy DPLL(T): the propositional skeleton (with each
distinct linear atom abstracted to a fresh Boolean) is enumerated by a small
DPLL with unit propagation, and every full skeleton model is checked for
theory consistency with the exact simplex.  Theory-infeasible atom sets are
blocked with learned conflict clauses, which persist for the lifetime of a
context (they are valid lemmas independent of the asserted stack).

Equality atoms are split into two non-strict inequalities before abstraction
so that negated theory literals stay convex.

An external process backend speaking SMT-LIB 2 (logic QF_LRA) can be used
instead; it is selected with the backend string ``external:<command>``.
"""

from __future__ import annotations

import shlex
import subprocess
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

from . import formulas as fm
from .lp import LpProblem, StrictSat, StrictUnsat, lp_feasible_strict
from .rationals import Rat


class SmtError(Exception):
    pass


class SmtResourceError(SmtError):
    """Raised when the solver exceeds its configured search budget."""


@dataclass
class SmtModel:
    bools: dict[str, bool]
    nums: dict[str, Rat]

    def holds(self, f: fm.Formula) -> bool:
        return fm.evaluate(f, self.bools, self.nums)


def split_equalities(f: fm.Formula) -> fm.Formula:
    """Rewrite every equality atom as a conjunction of two <= atoms."""
    memo: dict[int, fm.Formula] = {}

    def rec(g: fm.Formula) -> fm.Formula:
        got = memo.get(id(g))
        if got is not None:
            return got
        if isinstance(g, fm.Atom) and g.rel == fm.EQ:
            res = fm.conj(
                [
                    fm.atom(dict(g.coeffs), fm.LE, g.const),
                    fm.atom({v: -c for v, c in g.coeffs}, fm.LE, -g.const),
                ]
            )
        elif isinstance(g, fm.And):
            res = fm.conj(rec(a) for a in g.args)
        elif isinstance(g, fm.Or):
            res = fm.disj(rec(a) for a in g.args)
        else:
            res = g
        memo[id(g)] = res
        return res

    return rec(f)


def _ordering_clauses(
    va: int, ra: str, ba: Rat, vb: int, rb: str, bb: Rat
) -> list[list[int]]:
    """Valid clauses between two bounds on one normalized linear form."""
    out: list[list[int]] = []
    uppers = ("le", "lt")

    def upper_implies(r1: str, b1: Rat, r2: str, b2: Rat) -> bool:
        return b1 < b2 or (b1 == b2 and not (r1 == "le" and r2 == "lt"))

    def lower_implies(r1: str, b1: Rat, r2: str, b2: Rat) -> bool:
        return b1 > b2 or (b1 == b2 and not (r1 == "ge" and r2 == "gt"))

    if (ra in uppers) == (rb in uppers):
        implies = upper_implies if ra in uppers else lower_implies
        if implies(ra, ba, rb, bb):
            out.append([-va, vb])
        if implies(rb, bb, ra, ba):
            out.append([-vb, va])
        return out
    # orient: u is the upper bound, l the lower bound
    if ra in uppers:
        (vu, ru, bu), (vl, rl, bl) = (va, ra, ba), (vb, rb, bb)
    else:
        (vu, ru, bu), (vl, rl, bl) = (vb, rb, bb), (va, ra, ba)
    incompatible = bu < bl or (bu == bl and (ru == "lt" or rl == "gt"))
    if incompatible:
        out.append([-vu, -vl])
    tautology = bl < bu or (bl == bu and not (ru == "lt" and rl == "gt"))
    if tautology:
        out.append([vu, vl])
    return out


def _negate_le_atom(a: fm.Atom) -> tuple[dict[str, Rat], str, Rat]:
    coeffs = {v: -c for v, c in a.coeffs}
    if a.rel == fm.LE:
        return coeffs, fm.LT, -a.const
    if a.rel == fm.LT:
        return coeffs, fm.LE, -a.const
    raise SmtError("equality atoms must be split before theory negation")


def _solve_cnf(
    clauses: list[list[int]],
    nvars: int,
    budget: list[int],
    order: Sequence[int] | None = None,
) -> list[bool | None] | None:
    """DPLL with two-watched-literal unit propagation; total assignment or None.

    Decisions follow `order` (default: variable index), false first, so
    results are deterministic.  Putting structural variables before Tseitin
    auxiliaries keeps backtracking from re-exploring irrelevant subtrees.
    ``budget[0]`` is decremented per decision/backtrack.
    """
    decision_order = list(order) if order is not None else list(range(1, nvars + 1))
    assign: list[bool | None] = [None] * (nvars + 1)
    trail: list[int] = []
    queue: list[int] = []
    watches: dict[int, list[int]] = {}

    def enqueue(lit: int) -> bool:
        var = abs(lit)
        val = lit > 0
        cur = assign[var]
        if cur is not None:
            return cur == val
        assign[var] = val
        trail.append(var)
        queue.append(lit)
        return True

    work: list[list[int]] = []
    for cl in clauses:
        if not cl:
            return None
        if len(cl) == 1:
            if not enqueue(cl[0]):
                return None
            continue
        ci = len(work)
        work.append(list(cl))
        watches.setdefault(cl[0], []).append(ci)
        watches.setdefault(cl[1], []).append(ci)

    def value(lit: int) -> bool | None:
        v = assign[abs(lit)]
        return None if v is None else (v == (lit > 0))

    def propagate() -> bool:
        while queue:
            lit = queue.pop()
            falsified = -lit
            pending = watches.get(falsified)
            if not pending:
                continue
            watches[falsified] = []
            for idx, ci in enumerate(pending):
                cl = work[ci]
                if cl[0] == falsified:
                    cl[0], cl[1] = cl[1], cl[0]
                first = value(cl[0])
                if first is True:
                    watches[falsified].append(ci)
                    continue
                for k in range(2, len(cl)):
                    if value(cl[k]) is not False:
                        cl[1], cl[k] = cl[k], cl[1]
                        watches.setdefault(cl[1], []).append(ci)
                        break
                else:
                    watches[falsified].append(ci)
                    if first is False:
                        watches[falsified].extend(pending[idx + 1 :])
                        return False
                    enqueue(cl[0])
        return True

    # decision stack: (variable, trail mark, already flipped to True)
    dstack: list[tuple[int, int, bool]] = []
    while True:
        if propagate():
            var = next((v for v in decision_order if assign[v] is None), 0)
            if var == 0:
                return assign
            budget[0] -= 1
            if budget[0] <= 0:
                raise SmtResourceError("SMT decision budget exhausted")
            dstack.append((var, len(trail), False))
            enqueue(-var)
        else:
            queue.clear()
            while dstack:
                var, mark, flipped = dstack.pop()
                while len(trail) > mark:
                    assign[trail.pop()] = None
                if not flipped:
                    dstack.append((var, mark, True))
                    enqueue(var)
                    break
            else:
                return None
            budget[0] -= 1
            if budget[0] <= 0:
                raise SmtResourceError("SMT decision budget exhausted")


@dataclass
class SmtStats:
    checks: int = 0
    sat_answers: int = 0
    theory_conflicts: int = 0
    decisions_budget_used: int = 0


class InternalContext:
    """Incremental assertion stack over the lazy DPLL(T) solver."""

    def __init__(self, budget: int = 10_000_000):
        self._levels: list[list[fm.Formula]] = [[]]
        self._prop_ids: dict[str, int] = {}
        self._atom_ids: dict[fm.Atom, int] = {}
        self._id_atom: dict[int, fm.Atom] = {}
        self._id_prop: dict[int, str] = {}
        self._nvars = 0
        self._theory_clauses: list[list[int]] = []
        self._theory_seen: set[tuple[int, ...]] = set()
        # atoms grouped by normalized linear form, for ordering lemmas
        self._forms: dict[tuple, list[tuple[int, str, Rat]]] = {}
        self.budget = budget
        self.stats = SmtStats()

    # -- stack -----------------------------------------------------------

    def push(self) -> None:
        self._levels.append([])

    def pop(self) -> None:
        if len(self._levels) <= 1:
            raise SmtError("pop on empty assertion stack")
        self._levels.pop()

    def assert_formula(self, f: fm.Formula) -> None:
        self._levels[-1].append(split_equalities(f))

    # -- encoding -----------------------------------------------------------

    def _fresh(self) -> int:
        self._nvars += 1
        return self._nvars

    def _prop_id(self, name: str) -> int:
        got = self._prop_ids.get(name)
        if got is None:
            got = self._fresh()
            self._prop_ids[name] = got
            self._id_prop[got] = name
        return got

    def _atom_id(self, a: fm.Atom) -> int:
        got = self._atom_ids.get(a)
        if got is None:
            got = self._fresh()
            self._atom_ids[a] = got
            self._id_atom[got] = a
            self._add_ordering_lemmas(got, a)
        return got

    def _add_ordering_lemmas(self, var: int, a: fm.Atom) -> None:
        """Learn valid clauses relating bounds on the same linear form.

        Normalizing by the leading coefficient maps every atom to
        (form, one of le/lt/ge/gt, bound); implications along a direction,
        incompatibilities and tautologies across directions then prune the
        skeleton enumeration before any LP runs.
        """
        lead = a.coeffs[0][1]
        form = tuple((v, c / lead) for v, c in a.coeffs)
        bound = a.const / lead
        if lead > 0:
            rel = "le" if a.rel == fm.LE else "lt"
        else:
            rel = "ge" if a.rel == fm.LE else "gt"
        peers = self._forms.setdefault(form, [])
        for other_var, other_rel, other_bound in peers:
            for cl in _ordering_clauses(var, rel, bound, other_var, other_rel, other_bound):
                self._theory_clauses.append(cl)
        peers.append((var, rel, bound))

    def _encode(self, f: fm.Formula, clauses: list[list[int]], memo: dict[int, int]) -> int:
        got = memo.get(id(f))
        if got is not None:
            return got
        if isinstance(f, fm.Lit):
            v = self._prop_id(f.name)
            lit = v if f.polarity else -v
        elif isinstance(f, fm.Atom):
            lit = self._atom_id(f)
        elif isinstance(f, fm.And):
            v = self._fresh()
            for a in f.args:
                clauses.append([-v, self._encode(a, clauses, memo)])
            lit = v
        elif isinstance(f, fm.Or):
            v = self._fresh()
            clauses.append([-v] + [self._encode(a, clauses, memo) for a in f.args])
            lit = v
        else:
            raise SmtError(f"cannot encode {f!r}")
        memo[id(f)] = lit
        return lit

    # -- solving ---------------------------------------------------------------

    def check(
        self,
        required_bools: Iterable[str] = (),
        required_nums: Iterable[str] = (),
    ) -> SmtModel | None:
        self.stats.checks += 1
        asserted = [f for level in self._levels for f in level]
        clauses: list[list[int]] = []
        memo: dict[int, int] = {}
        for f in asserted:
            if f is fm.FALSE or f == fm.FALSE:
                return None
            if isinstance(f, fm.Const):
                continue
            clauses.append([self._encode(f, clauses, memo)])
        for name in required_bools:
            self._prop_id(name)
        clauses.extend(self._theory_clauses)
        live_atoms: list[fm.Atom] = []
        seen_live: set[fm.Atom] = set()
        for f in asserted:
            for a in fm.atoms_of(f):
                if a not in seen_live:
                    seen_live.add(a)
                    live_atoms.append(a)
        budget = [self.budget]
        try:
            while True:
                assignment = _solve_cnf(clauses, self._nvars, budget)
                if assignment is None:
                    return None
                theory = [
                    (self._atom_ids[atom], atom, bool(assignment[self._atom_ids[atom]]))
                    for atom in live_atoms
                ]
                problem = LpProblem(sorted({v for _, a, _ in theory for v, _ in a.coeffs}))
                for _, a, val in theory:
                    if val:
                        problem.add(dict(a.coeffs), a.rel, a.const)
                    else:
                        coeffs, rel, const = _negate_le_atom(a)
                        problem.add(coeffs, rel, const)
                res = lp_feasible_strict(problem)
                if isinstance(res, StrictSat):
                    bools = {
                        name: bool(assignment[var]) for name, var in self._prop_ids.items()
                    }
                    nums = dict(res.witness)
                    for v in required_nums:
                        nums.setdefault(v, Fraction(0))
                    model = SmtModel(bools, nums)
                    for f in asserted:
                        if isinstance(f, fm.Const):
                            continue
                        if not model.holds(f):
                            raise SmtError("internal solver produced a bad model")
                    self.stats.sat_answers += 1
                    return model
                self.stats.theory_conflicts += 1
                core = self._shrink_conflict(theory)
                conflict = [(-var if val else var) for var, _, val in core]
                key = tuple(sorted(conflict))
                if key in self._theory_seen:
                    raise SmtError("theory conflict loop")
                self._theory_seen.add(key)
                self._theory_clauses.append(conflict)
                clauses.append(conflict)
        finally:
            self.stats.decisions_budget_used += self.budget - budget[0]

    def _shrink_conflict(self, theory: list[tuple[int, fm.Atom, bool]]):
        """Greedy deletion: keep an infeasible subset so the learned clause
        blocks a whole family of skeleton models, not one assignment."""

        def infeasible(subset) -> bool:
            problem = LpProblem(sorted({v for _, a, _ in subset for v, _ in a.coeffs}))
            for _, a, val in subset:
                if val:
                    problem.add(dict(a.coeffs), a.rel, a.const)
                else:
                    coeffs, rel, const = _negate_le_atom(a)
                    problem.add(coeffs, rel, const)
            return isinstance(lp_feasible_strict(problem), StrictUnsat)

        core = list(theory)
        i = 0
        while i < len(core):
            candidate = core[:i] + core[i + 1 :]
            if candidate and infeasible(candidate):
                core = candidate
            else:
                i += 1
        return core

    def close(self) -> None:
        pass


def smt_check(
    f: fm.Formula,
    required_bools: Iterable[str] = (),
    required_nums: Iterable[str] = (),
    budget: int = 10_000_000,
) -> SmtModel | None:
    ctx = InternalContext(budget=budget)
    ctx.assert_formula(f)
    return ctx.check(required_bools=required_bools, required_nums=required_nums)


def eval_under_numeric(f: fm.Formula, nums: Mapping[str, Rat]) -> fm.Formula:
    """Replace linear atoms by truth constants under `nums`; result is propositional."""
    res = fm.eval_atoms(f, nums)
    if fm.has_atoms(res):
        raise SmtError("numeric assignment left atoms unevaluated")
    return res


def sat_all_models(
    f: fm.Formula, project: Sequence[str], budget: int = 10_000_000
) -> Iterator[dict[str, bool]]:
    """Stream the models of a propositional formula projected onto `project`.

    Each yielded assignment is blocked before the next solver call; callers
    needing coarser blocking should drive a context directly.
    """
    if fm.has_atoms(f):
        raise SmtError("sat_all_models expects a propositional formula")
    ctx = InternalContext(budget=budget)
    ctx.assert_formula(f)
    while True:
        model = ctx.check(required_bools=project)
        if model is None:
            return
        out = {v: model.bools[v] for v in project}
        yield out
        ctx.assert_formula(
            fm.disj([fm.lit(v, not val) for v, val in out.items()])
        )


# -- SMT-LIB 2 serialization and process client -------------------------------


def _smt_rat(q: Rat) -> str:
    q = Fraction(q)
    if q < 0:
        return f"(- {_smt_rat(-q)})"
    if q.denominator == 1:
        return f"{q.numerator}.0"
    return f"(/ {q.numerator}.0 {q.denominator}.0)"


def to_smtlib(f: fm.Formula) -> str:
    if isinstance(f, fm.Const):
        return "true" if f.value else "false"
    if isinstance(f, fm.Lit):
        return f.name if f.polarity else f"(not {f.name})"
    if isinstance(f, fm.Atom):
        terms = [f"(* {_smt_rat(c)} {v})" for v, c in f.coeffs]
        lhs = terms[0] if len(terms) == 1 else "(+ " + " ".join(terms) + ")"
        op = {"<=": "<=", "<": "<", "=": "="}[f.rel]
        return f"({op} {lhs} {_smt_rat(f.const)})"
    if isinstance(f, fm.And):
        return "(and " + " ".join(to_smtlib(a) for a in f.args) + ")"
    if isinstance(f, fm.Or):
        return "(or " + " ".join(to_smtlib(a) for a in f.args) + ")"
    raise SmtError(f"cannot serialize {f!r}")


def _parse_sexpr(text: str) -> object:
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    pos = 0

    def rec() -> object:
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            out = []
            while tokens[pos] != ")":
                out.append(rec())
            pos += 1
            return out
        return tok

    return rec()


def _value_from_sexpr(v: object):
    if isinstance(v, list):
        if v and v[0] == "-":
            inner = _value_from_sexpr(v[1])
            return -inner
        if v and v[0] == "/":
            return Fraction(_value_from_sexpr(v[1])) / Fraction(_value_from_sexpr(v[2]))
        raise SmtError(f"cannot parse model value {v!r}")
    if v == "true":
        return True
    if v == "false":
        return False
    return Fraction(str(v))


class SmtLibContext:
    """Child-process SMT solver speaking SMT-LIB 2 with logic QF_LRA."""

    def __init__(self, command: str):
        self.proc = subprocess.Popen(
            shlex.split(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
            bufsize=1,
        )
        self._declared: list[set[str]] = [set()]
        self._bool_sort: dict[str, bool] = {}
        self.stats = SmtStats()
        self._command("(set-option :print-success true)")
        self._command("(set-option :produce-models true)")
        self._command("(set-logic QF_LRA)")

    def _send(self, line: str) -> None:
        assert self.proc.stdin is not None
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()

    def _read_line(self) -> str:
        assert self.proc.stdout is not None
        line = self.proc.stdout.readline()
        if line == "":
            raise SmtError("external solver terminated unexpectedly")
        return line.strip()

    def _read_sexpr(self) -> str:
        buf = ""
        depth = 0
        while True:
            line = self._read_line()
            buf += " " + line
            depth = buf.count("(") - buf.count(")")
            if depth <= 0 and buf.strip():
                return buf.strip()

    def _command(self, cmd: str) -> None:
        self._send(cmd)
        reply = self._read_line()
        if reply != "success":
            raise SmtError(f"solver replied {reply!r} to {cmd!r}")

    def _declare(self, f: fm.Formula) -> None:
        names = {}
        for v in fm.prop_vars(f):
            names[v] = True
        for v in fm.num_vars(f):
            names[v] = False
        declared = set().union(*self._declared)
        for v, is_bool in sorted(names.items()):
            if v in declared:
                continue
            sort = "Bool" if is_bool else "Real"
            self._command(f"(declare-const {_mangle(v)} {sort})")
            self._declared[-1].add(v)
            self._bool_sort[v] = is_bool

    def push(self) -> None:
        self._command("(push 1)")
        self._declared.append(set())

    def pop(self) -> None:
        if len(self._declared) <= 1:
            raise SmtError("pop on empty assertion stack")
        self._command("(pop 1)")
        dropped = self._declared.pop()
        for v in dropped:
            self._bool_sort.pop(v, None)

    def assert_formula(self, f: fm.Formula) -> None:
        self._declare(f)
        self._command(f"(assert {to_smtlib(_mangle_formula(f))})")

    def check(
        self,
        required_bools: Iterable[str] = (),
        required_nums: Iterable[str] = (),
    ) -> SmtModel | None:
        self.stats.checks += 1
        for v in required_bools:
            self._declare(fm.lit(v))
        for v in required_nums:
            self._declare(fm.atom({v: Fraction(1)}, fm.LE, Fraction(0)))
        self._send("(check-sat)")
        verdict = self._read_line()
        if verdict == "unsat":
            return None
        if verdict != "sat":
            raise SmtError(f"external solver verdict {verdict!r}")
        self.stats.sat_answers += 1
        declared = sorted(set().union(*self._declared))
        if not declared:
            return SmtModel({}, {})
        self._send("(get-value (" + " ".join(_mangle(v) for v in declared) + "))")
        reply = self._read_sexpr()
        parsed = _parse_sexpr(reply)
        bools: dict[str, bool] = {}
        nums: dict[str, Rat] = {}
        for entry in parsed:  # type: ignore[union-attr]
            name = _unmangle(str(entry[0]))
            value = _value_from_sexpr(entry[1])
            if isinstance(value, bool):
                bools[name] = value
            else:
                nums[name] = Fraction(value)
        return SmtModel(bools, nums)

    def close(self) -> None:
        try:
            self._send("(exit)")
        except Exception:
            pass
        self.proc.terminate()


def _mangle(name: str) -> str:
    # primed identifiers x' are not legal SMT-LIB symbols
    return "|" + name + "|" if "'" in name else name


def _unmangle(name: str) -> str:
    return name.strip("|")


def _mangle_formula(f: fm.Formula) -> fm.Formula:
    memo: dict[int, fm.Formula] = {}

    def rec(g: fm.Formula) -> fm.Formula:
        got = memo.get(id(g))
        if got is not None:
            return got
        if isinstance(g, fm.Lit):
            res: fm.Formula = fm.Lit(_mangle(g.name), g.polarity)
        elif isinstance(g, fm.Atom):
            res = fm.Atom(tuple((_mangle(v), c) for v, c in g.coeffs), g.rel, g.const)
        elif isinstance(g, fm.And):
            res = fm.And(tuple(rec(a) for a in g.args))
        elif isinstance(g, fm.Or):
            res = fm.Or(tuple(rec(a) for a in g.args))
        else:
            res = g
        memo[id(g)] = res
        return res

    return rec(f)


def make_context(backend: str = "internal", budget: int = 10_000_000):
    """Context factory for the `internal` or `external:<command>` backend."""
    if backend == "internal":
        return InternalContext(budget=budget)
    if backend.startswith("external:"):
        return SmtLibContext(backend[len("external:"):])
    raise SmtError(f"unknown SMT backend {backend!r}")
