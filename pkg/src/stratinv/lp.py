"""Exact rational linear programming with a lexicographic (eps-aware) simplex.

Maximization over free rational variables, rows ``coeffs . x rel rhs`` with
rel in {<=, <, =}.  Strict rows are turned into non-strict ones with an
``rhs - eps`` right-hand side, where eps is the symbolic infinitesimal of
:class:`stratinv.rationals.Eps`; the whole tableau then runs with Eps
right-hand sides.  Bland's rule is used for both entering and leaving
variables, so the solver terminates and is fully deterministic.

Outcomes are exact: Infeasible, Unbounded, or Optimal with a witness that is
re-checked by substitution before being returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .rationals import Eps, Rat, ZERO_EPS

LE, LT, EQ = "<=", "<", "="


class LpError(Exception):
    pass


@dataclass(frozen=True)
class LpRow:
    coeffs: tuple[tuple[str, Rat], ...]
    rel: str
    rhs: Rat

    @staticmethod
    def of(coeffs: Mapping[str, Rat], rel: str, rhs) -> "LpRow":
        if rel not in (LE, LT, EQ):
            raise LpError(f"bad relation {rel!r}")
        tidy = tuple(sorted((v, Fraction(c)) for v, c in coeffs.items() if c != 0))
        return LpRow(tidy, rel, Fraction(rhs))


@dataclass
class LpProblem:
    """Maximize `objective` subject to `rows`; all variables are free rationals."""

    variables: list[str]
    rows: list[LpRow] = field(default_factory=list)
    objective: dict[str, Rat] = field(default_factory=dict)

    def add(self, coeffs: Mapping[str, Rat], rel: str, rhs) -> None:
        row = LpRow.of(coeffs, rel, rhs)
        known = set(self.variables)
        for v, _ in row.coeffs:
            if v not in known:
                raise LpError(f"row references undeclared variable {v!r}")
        self.rows.append(row)

    def set_objective(self, coeffs: Mapping[str, Rat]) -> None:
        known = set(self.variables)
        for v in coeffs:
            if v not in known:
                raise LpError(f"objective references undeclared variable {v!r}")
        self.objective = {v: Fraction(c) for v, c in coeffs.items() if c != 0}

    def dump(self) -> str:
        lines = ["maximize:"]
        obj = " + ".join(f"{c}*{v}" for v, c in sorted(self.objective.items())) or "0"
        lines.append(f"  {obj}")
        lines.append("subject to:")
        for row in self.rows:
            terms = " + ".join(f"{c}*{v}" for v, c in row.coeffs) or "0"
            lines.append(f"  {terms} {row.rel} {row.rhs}")
        lines.append("variables: " + ", ".join(self.variables))
        return "\n".join(lines)


@dataclass(frozen=True)
class Optimal:
    value: Eps
    witness: dict[str, Eps]


@dataclass(frozen=True)
class Unbounded:
    pass


@dataclass(frozen=True)
class Infeasible:
    pass


LpOutcome = Optimal | Unbounded | Infeasible


class Simplex:
    """Two-phase tableau simplex; reusable for several objectives.

    Free variables are split v = v+ - v-; every row becomes a <= row (equalities
    are doubled), slacks complete the identity basis.
    """

    def __init__(self, problem: LpProblem):
        self.problem = problem
        self.var_col: dict[str, int] = {}
        cols = 0
        for v in problem.variables:
            self.var_col[v] = cols
            cols += 2
        rows_le: list[tuple[dict[int, Rat], Eps]] = []
        for row in problem.rows:
            dense: dict[int, Rat] = {}
            for v, c in row.coeffs:
                k = self.var_col[v]
                dense[k] = dense.get(k, Fraction(0)) + c
                dense[k + 1] = dense.get(k + 1, Fraction(0)) - c
            if row.rel == LE:
                rows_le.append((dense, Eps.of(row.rhs)))
            elif row.rel == LT:
                rows_le.append((dense, Eps.strict_below(row.rhs)))
            else:
                rows_le.append((dense, Eps.of(row.rhs)))
                rows_le.append(({k: -c for k, c in dense.items()}, Eps.of(-row.rhs)))
        self.n_struct = cols
        self.m = len(rows_le)
        self.aux = cols + self.m  # column id of the phase-one variable
        ncols = self.aux + 1
        self.T: list[list[Rat]] = []
        self.b: list[Eps] = []
        self.basis: list[int] = []
        zero = Fraction(0)
        for r, (dense, rhs) in enumerate(rows_le):
            line = [zero] * ncols
            for k, c in dense.items():
                line[k] = c
            line[cols + r] = Fraction(1)
            line[self.aux] = Fraction(-1)
            self.T.append(line)
            self.b.append(rhs)
            self.basis.append(cols + r)
        self.disabled = {self.aux}
        self._feasible: bool | None = None
        self.pivots = 0

    # -- core pivoting ---------------------------------------------------------

    def _pivot(self, r: int, e: int, rc: list[Rat]) -> Eps:
        """Pivot column e into row r; returns objective-value delta factor row rhs."""
        piv = self.T[r][e]
        inv = Fraction(1) / piv
        row = self.T[r]
        for j in range(len(row)):
            if row[j]:
                row[j] *= inv
        self.b[r] = self.b[r].scale(inv)
        for k in range(self.m):
            if k == r:
                continue
            f = self.T[k][e]
            if f == 0:
                continue
            tk = self.T[k]
            for j in range(len(row)):
                if row[j]:
                    tk[j] -= f * row[j]
            self.b[k] = self.b[k] - self.b[r].scale(f)
        f = rc[e]
        delta = ZERO_EPS
        if f != 0:
            for j in range(len(row)):
                if row[j]:
                    rc[j] -= f * row[j]
            delta = self.b[r].scale(f)
        self.basis[r] = e
        self.pivots += 1
        return delta

    def _bland(self, rc: list[Rat]) -> tuple[bool, Eps]:
        """Run simplex to optimality with Bland's rule; False means unbounded."""
        gained = ZERO_EPS
        while True:
            enter = -1
            for j in range(len(rc)):
                if j in self.disabled:
                    continue
                if rc[j] > 0:
                    enter = j
                    break
            if enter < 0:
                return True, gained
            leave = -1
            best: Eps | None = None
            for r in range(self.m):
                a = self.T[r][enter]
                if a > 0:
                    ratio = self.b[r].div(a)
                    if best is None or ratio < best or (
                        ratio == best and self.basis[r] < self.basis[leave]
                    ):
                        best = ratio
                        leave = r
            if leave < 0:
                return False, gained
            gained = gained + self._pivot(leave, enter, rc)

    # -- phases ------------------------------------------------------------------

    def find_feasible(self) -> bool:
        if self._feasible is not None:
            return self._feasible
        worst = -1
        for r in range(self.m):
            if self.b[r] < ZERO_EPS and (worst < 0 or self.b[r] < self.b[worst]):
                worst = r
        if worst < 0:
            self._feasible = True
            return True
        # phase one: drive the auxiliary variable to zero
        self.disabled.discard(self.aux)
        rc = [Fraction(0)] * (self.aux + 1)
        rc[self.aux] = Fraction(-1)
        val = self._pivot(worst, self.aux, rc)
        ok, gained = self._bland(rc)
        assert ok, "phase one cannot be unbounded"
        total = val + gained
        self.disabled.add(self.aux)
        if total < ZERO_EPS:
            self._feasible = False
            return False
        if self.aux in self.basis:
            r = self.basis.index(self.aux)
            enter = next(
                (
                    j
                    for j in range(self.aux)
                    if self.T[r][j] != 0
                ),
                -1,
            )
            if enter >= 0:
                self._pivot(r, enter, [Fraction(0)] * (self.aux + 1))
            # else: the row pins the auxiliary variable to zero; leave it
        self._feasible = True
        return True

    def maximize(self, objective: Mapping[str, Rat]) -> LpOutcome:
        if not self.find_feasible():
            return Infeasible()
        ncols = self.aux + 1
        c = [Fraction(0)] * ncols
        for v, q in objective.items():
            k = self.var_col[v]
            c[k] += Fraction(q)
            c[k + 1] -= Fraction(q)
        rc = list(c)
        value = ZERO_EPS
        for r in range(self.m):
            cb = c[self.basis[r]]
            if cb != 0:
                row = self.T[r]
                for j in range(ncols):
                    if row[j]:
                        rc[j] -= cb * row[j]
                value = value + self.b[r].scale(cb)
        ok, gained = self._bland(rc)
        if not ok:
            return Unbounded()
        witness = self._witness()
        self._verify(witness)
        return Optimal(value + gained, witness)

    def _witness(self) -> dict[str, Eps]:
        col_val: dict[int, Eps] = {}
        for r in range(self.m):
            col_val[self.basis[r]] = self.b[r]
        out: dict[str, Eps] = {}
        for v, k in self.var_col.items():
            out[v] = col_val.get(k, ZERO_EPS) - col_val.get(k + 1, ZERO_EPS)
        return out

    def _verify(self, witness: dict[str, Eps]) -> None:
        for row in self.problem.rows:
            total = ZERO_EPS
            for v, c in row.coeffs:
                total = total + witness[v].scale(c)
            rhs = Eps.of(row.rhs)
            ok = (
                total <= rhs
                if row.rel == LE
                else total < rhs
                if row.rel == LT
                else total == rhs
            )
            if not ok:
                raise LpError(f"witness violates row {row}")


def lp_maximize(problem: LpProblem) -> LpOutcome:
    """Exact classification: Infeasible, Unbounded, or Optimal with witness."""
    return Simplex(problem).maximize(problem.objective)


def maximize_many(problem: LpProblem, objectives: Sequence[Mapping[str, Rat]]) -> list[LpOutcome]:
    """Maximize several objectives over one constraint system (shared phase one)."""
    simplex = Simplex(problem)
    return [simplex.maximize(obj) for obj in objectives]


@dataclass(frozen=True)
class StrictSat:
    witness: dict[str, Rat]


@dataclass(frozen=True)
class StrictUnsat:
    pass


def lp_feasible_strict(problem: LpProblem) -> StrictSat | StrictUnsat:
    """Satisfiability of the mixed strict/non-strict system over the rationals.

    The symbolic-eps witness is instantiated with an explicit small positive
    rational and re-checked, so the returned assignment satisfies every row
    including the strict ones.
    """
    simplex = Simplex(problem)
    if not simplex.find_feasible():
        return StrictUnsat()
    eps_witness = simplex._witness()
    eps0 = _instantiation_bound(problem, eps_witness)
    witness = {v: w.real + w.inf * eps0 for v, w in eps_witness.items()}
    _verify_rational(problem, witness)
    return StrictSat(witness)


def _instantiation_bound(problem: LpProblem, witness: dict[str, Eps]) -> Rat:
    eps0 = Fraction(1)
    for row in problem.rows:
        val = ZERO_EPS
        for v, c in row.coeffs:
            val = val + witness[v].scale(c)
        rhs = Eps.strict_below(row.rhs) if row.rel == LT else Eps.of(row.rhs)
        if row.rel == EQ:
            slopes = [(val - rhs), (rhs - val)]
        else:
            slopes = [(val - rhs)]
        for diff in slopes:
            # need diff.real + diff.inf * eps0 <= 0 (lex order guarantees it symbolically)
            if diff.inf > 0:
                assert diff.real < 0
                eps0 = min(eps0, -diff.real / diff.inf / 2)
    return eps0


def _verify_rational(problem: LpProblem, witness: dict[str, Rat]) -> None:
    for row in problem.rows:
        total = sum((c * witness[v] for v, c in row.coeffs), Fraction(0))
        ok = (
            total <= row.rhs
            if row.rel == LE
            else total < row.rhs
            if row.rel == LT
            else total == row.rhs
        )
        if not ok:
            raise LpError(f"instantiated witness violates row {row}")
