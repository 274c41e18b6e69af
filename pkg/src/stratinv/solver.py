"""Max-strategy iteration engine.

One round alternates two steps until no improvement exists:

* improve: satisfiability queries of the form

      (departure state within current bounds)
      and (transition)
      and (arrival strictly above the current bound of one template row)

  yield transitions that leave the current candidate invariant.  Found
  models update the strategy (departure state + path choice) for whole
  sets of arrival states at once, depending on the variant.

* strategy evaluation: for the fixed strategy, the least fixpoint of its
  bound transformer is computed by exact linear programming with one
  unknown per (row, equivalence class of arrival states sharing the same
  strategy entry), instead of one per concrete Boolean state.

Variants (selecting how improvements are found and generalized):
  n - one SMT model per arrival state, no generalization
  t - like n, but each model is also re-applied to every other template row
  s - the template row index is part of one symbolic query (selector bits)
  g - each SMT model is generalized once by fixing its numeric part
  m - full generalization with inner propositional model enumeration

All variants compute the same final invariant; they differ only in cost.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from . import formulas as fm
from .bdd import Bdd, BddManager, Mtbdd, bdd_to_formula, formula_to_bdd
from .lp import LpProblem, Optimal, Simplex, Unbounded
from .model import (
    AbstractValue,
    PathConjunction,
    Strategy,
    StrategyChoice,
    Template,
    TransitionSystem,
    analysis_manager,
    extract_path_conjunction,
    initial_strategy,
    initial_value,
    primed,
)
from .rationals import Ext, NEG_INF, POS_INF, Rat
from .smt import InternalContext, SmtModel, make_context

GAP = "@gap"
SELECTOR = "@row{}"

VARIANTS = ("n", "t", "s", "g", "m")


class EngineError(Exception):
    pass


@dataclass
class EngineConfig:
    variant: str = "g"
    freeze_class_budget: int | None = None
    smt_backend: str = "internal"
    iteration_cap: int = 1_000_000
    smt_budget: int = 10_000_000

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise EngineError(f"unknown variant {self.variant!r}")
        if self.freeze_class_budget is not None and self.freeze_class_budget < 1:
            raise EngineError("freeze budget must be positive")


@dataclass
class Stats:
    rounds: int = 0
    smt_checks: int = 0
    smt_sat: int = 0
    sat_models: int = 0
    lp_solves: int = 0
    lp_vars: int = 0
    lp_rows: int = 0
    strategy_updates: int = 0
    partition_checks: int = 0
    max_classes: int = 0
    class_counts: dict[int, int] = field(default_factory=dict)
    frozen_rows: list[int] = field(default_factory=list)
    frozen_result: bool = False
    wall_time: float = 0.0

    def as_text(self) -> str:
        items = [
            ("rounds", self.rounds),
            ("smt_checks", self.smt_checks),
            ("smt_sat", self.smt_sat),
            ("sat_models", self.sat_models),
            ("lp_solves", self.lp_solves),
            ("lp_vars", self.lp_vars),
            ("lp_rows", self.lp_rows),
            ("strategy_updates", self.strategy_updates),
            ("partition_checks", self.partition_checks),
            ("max_classes", self.max_classes),
            ("class_counts", " ".join(f"{i}:{c}" for i, c in sorted(self.class_counts.items()))),
            ("frozen_rows", " ".join(map(str, self.frozen_rows)) or "none"),
            ("frozen_result", str(self.frozen_result).lower()),
            ("wall_time_s", f"{self.wall_time:.3f}"),
        ]
        return "\n".join(f"{k} = {v}" for k, v in items)


@dataclass
class IterationState:
    rho: AbstractValue
    strategy: Strategy
    stable: bool
    round: int
    frozen: dict[int, list[Bdd]] = field(default_factory=dict)


@dataclass
class UpdateEvent:
    row: int
    arrivals: Bdd  # over primed Booleans
    choice: StrategyChoice


@dataclass
class ImprovementQuery:
    """The per-row satisfiability query: within-bounds /\\ T /\\ above-row /\\ gap>0 /\\ not-done."""

    within: fm.Formula
    above: fm.Formula
    gap_var: str
    done: Bdd
    row: int | None

    def formula(self, man: BddManager, transition: fm.Formula) -> fm.Formula:
        return fm.conj(
            [
                self.within,
                transition,
                self.above,
                fm.atom({self.gap_var: Fraction(-1)}, fm.LT, 0),
                bdd_to_formula(man.neg(self.done)),
            ]
        )


class Engine:
    """One analysis run: a manager, a system, a template and a configuration."""

    def __init__(self, ts: TransitionSystem, tmpl: Template, config: EngineConfig | None = None):
        self.ts = ts
        self.tmpl = tmpl
        self.config = config or EngineConfig()
        self.man = analysis_manager(ts)
        self.stats = Stats()
        self.init_bdd = formula_to_bdd(self.man, ts.init_bool)
        self.prime_map = {b: primed(b) for b in ts.bool_vars}
        self.unprime_map = {primed(b): b for b in ts.bool_vars}
        self.required_bools = ts.bool_vars + ts.primed_bool_vars + ts.choice_vars
        self.required_nums = (
            ts.num_vars + [primed(x) for x in ts.num_vars] + ts.input_vars + [GAP]
        )
        self.ctx = make_context(self.config.smt_backend, budget=self.config.smt_budget)
        self.trace: list[list[UpdateEvent]] = []
        self.rho_trace: list[AbstractValue] = []

    # -- state ------------------------------------------------------------

    def initial_state(self) -> IterationState:
        rho = initial_value(self.ts, self.tmpl, self.man)
        strategy = initial_strategy(self.ts, self.tmpl, self.man)
        return IterationState(rho=rho, strategy=strategy, stable=False, round=0)

    # -- query construction ------------------------------------------------

    def _cells(self, f: Mtbdd) -> list[tuple[Bdd, Ext]]:
        self.stats.partition_checks += 1
        return self.man.partition(f)

    def within_bounds_formula(self, rho: AbstractValue) -> fm.Formula:
        """Departure states and numerics inside the current bounds (one conjunct per row).

        Cells bounded by -inf are unreachable departures and are dropped;
        +inf cells constrain nothing beyond the Boolean guard.
        """
        conjuncts = []
        for i in range(len(self.tmpl)):
            disjuncts = []
            for guard, value in self._cells(rho.rows[i]):
                if value.is_neg_inf:
                    continue
                guard_f = bdd_to_formula(guard)
                if value.is_pos_inf:
                    disjuncts.append(guard_f)
                else:
                    disjuncts.append(
                        fm.conj(
                            [guard_f, fm.atom(self.tmpl.coeffs(i), fm.LE, value.value)]
                        )
                    )
            conjuncts.append(fm.disj(disjuncts))
        return fm.conj(conjuncts)

    def row_improvement_formula(self, rho: AbstractValue, row: int) -> fm.Formula:
        """Arrival strictly above the row bound (gap-shifted equality per cell).

        -inf cells are improved by any arrival, so they contribute the guard
        alone; +inf cells cannot be improved and are dropped.
        """
        disjuncts = []
        coeffs = {primed(v): c for v, c in self.tmpl.coeffs(row).items()}
        for guard, value in self._cells(rho.rows[row]):
            guard_p = bdd_to_formula(self.man.rename(guard, self.prime_map))
            if value.is_pos_inf:
                continue
            if value.is_neg_inf:
                disjuncts.append(guard_p)
            else:
                shifted = dict(coeffs)
                shifted[GAP] = Fraction(-1)
                disjuncts.append(
                    fm.conj([guard_p, fm.atom(shifted, fm.EQ, value.value)])
                )
        return fm.disj(disjuncts)

    def build_query(self, state: IterationState, row: int, done: Bdd) -> ImprovementQuery:
        within = getattr(self, "_within_cache", None)
        if within is None:
            within = self.within_bounds_formula(state.rho)
        return ImprovementQuery(
            within=within,
            above=self.row_improvement_formula(state.rho, row),
            gap_var=GAP,
            done=done,
            row=row,
        )

    # -- model decoding -----------------------------------------------------

    def _model_states(self, model: SmtModel) -> tuple[tuple[bool, ...], tuple[bool, ...], tuple[bool, ...]]:
        dep = tuple(bool(model.bools.get(b, False)) for b in self.ts.bool_vars)
        arr = tuple(bool(model.bools.get(primed(b), False)) for b in self.ts.bool_vars)
        path = tuple(bool(model.bools.get(p, False)) for p in self.ts.choice_vars)
        return dep, arr, path

    def _arrival_cube(self, arr: tuple[bool, ...]) -> Bdd:
        return self.man.cube(
            {primed(b): v for b, v in zip(self.ts.bool_vars, arr)}
        )

    # -- strategy updates -----------------------------------------------------

    def _apply_update(
        self,
        state: IterationState,
        done: dict[int, Bdd],
        row: int,
        arrivals: Bdd,
        choice: StrategyChoice,
        events: list[UpdateEvent],
    ) -> Bdd:
        """Bulk-assign the strategy for `arrivals`; frozen rows switch to whole cells."""
        effective = arrivals
        cells = state.frozen.get(row)
        if cells is not None:
            effective = self.man.false
            for cell in cells:
                cell_p = self.man.rename(cell, self.prime_map)
                if not self.man.conj2(cell_p, arrivals).is_false:
                    effective = self.man.disj2(effective, cell_p)
        if effective.is_false:
            raise EngineError("empty strategy update")
        if not self.man.conj2(effective, done[row]).is_false:
            raise EngineError("strategy update overlaps already-updated arrivals")
        state.strategy = state.strategy.with_row(
            row, self.man.assign(state.strategy.rows[row], effective, choice)
        )
        done[row] = self.man.disj2(done[row], effective)
        state.stable = False
        self.stats.strategy_updates += 1
        events.append(UpdateEvent(row=row, arrivals=effective, choice=choice))
        return effective

    def _block(self, region: Bdd, selector_lits: list[fm.Formula] | None = None) -> None:
        """Exclude a region of arrival states from the running query."""
        blocked = bdd_to_formula(self.man.neg(region))
        if selector_lits:
            blocked = fm.disj([fm.negate(l) for l in selector_lits] + [blocked])
        self.ctx.assert_formula(blocked)

    def _check(self, extra_bools: Sequence[str] = ()) -> SmtModel | None:
        self.stats.smt_checks += 1
        model = self.ctx.check(
            required_bools=list(self.required_bools) + list(extra_bools),
            required_nums=self.required_nums,
        )
        if model is not None:
            self.stats.smt_sat += 1
        return model

    # -- improvement step -------------------------------------------------------

    def improve(self, state: IterationState) -> list[UpdateEvent]:
        """One strategy-improvement sweep; sets state.stable accordingly."""
        state.stable = True
        events: list[UpdateEvent] = []
        done = {i: self.man.false for i in range(len(self.tmpl))}
        variant = self.config.variant
        self._within_cache = self.within_bounds_formula(state.rho)
        if variant == "s":
            self._improve_symbolic(state, done, events)
        else:
            for row in range(len(self.tmpl)):
                self._improve_row(state, row, done, events, variant)
        self._within_cache = None
        self.trace.append(events)
        return events

    def _improve_row(
        self,
        state: IterationState,
        row: int,
        done: dict[int, Bdd],
        events: list[UpdateEvent],
        variant: str,
    ) -> None:
        query = self.build_query(state, row, done[row])
        base = query.formula(self.man, self.ts.transition)
        self.ctx.push()
        try:
            self.ctx.assert_formula(base)
            while True:
                model = self._check()
                if model is None:
                    return
                dep, arr, path = self._model_states(model)
                if variant in ("n", "t"):
                    cube = self._arrival_cube(arr)
                    effective = self._apply_update(
                        state, done, row, cube, StrategyChoice(dep, path), events
                    )
                    self._block(effective)
                    if variant == "t":
                        self._cross_apply(state, done, row, model, dep, arr, path, events)
                elif variant == "g":
                    self._generalize(state, done, row, base, model, dep, path, events)
                elif variant == "m":
                    self._enumerate(state, done, row, base, model, events)
                else:
                    raise EngineError(f"unknown variant {variant!r}")
        finally:
            self.ctx.pop()

    def _numeric_model(self, model: SmtModel) -> dict[str, Rat]:
        return {v: model.nums.get(v, Fraction(0)) for v in self.required_nums}

    def _generalize(
        self,
        state: IterationState,
        done: dict[int, Bdd],
        row: int,
        base: fm.Formula,
        model: SmtModel,
        dep: tuple[bool, ...],
        path: tuple[bool, ...],
        events: list[UpdateEvent],
    ) -> None:
        """Variant g: fix the model numerics, then the model's own departure/choices."""
        nums = self._numeric_model(model)
        fixed = fm.eval_atoms(base, nums)
        fixed = fm.conj([fixed, bdd_to_formula(self.man.neg(done[row]))])
        assignment = {b: v for b, v in zip(self.ts.bool_vars, dep)}
        assignment.update({p: v for p, v in zip(self.ts.choice_vars, path)})
        general = fm.subst_bools(fixed, assignment)
        region = formula_to_bdd(self.man, general)
        effective = self._apply_update(
            state, done, row, region, StrategyChoice(dep, path), events
        )
        self._block(effective)

    def _enumerate(
        self,
        state: IterationState,
        done: dict[int, Bdd],
        row: int,
        base: fm.Formula,
        model: SmtModel,
        events: list[UpdateEvent],
    ) -> None:
        """Variant m: enumerate propositional models of the numeric-fixed query."""
        nums = self._numeric_model(model)
        fixed = fm.conj(
            [fm.eval_atoms(base, nums), bdd_to_formula(self.man.neg(done[row]))]
        )
        inner = InternalContext(budget=self.config.smt_budget)
        inner.assert_formula(fixed)
        while True:
            prop_model = inner.check(required_bools=self.required_bools)
            if prop_model is None:
                return
            self.stats.sat_models += 1
            dep1, _, path1 = self._model_states(prop_model)
            assignment = {b: v for b, v in zip(self.ts.bool_vars, dep1)}
            assignment.update({p: v for p, v in zip(self.ts.choice_vars, path1)})
            general = fm.subst_bools(fixed, assignment)
            region = formula_to_bdd(self.man, general)
            effective = self._apply_update(
                state, done, row, region, StrategyChoice(dep1, path1), events
            )
            blocked = bdd_to_formula(self.man.neg(effective))
            inner.assert_formula(blocked)
            self._block(effective)

    def _cross_apply(
        self,
        state: IterationState,
        done: dict[int, Bdd],
        row: int,
        model: SmtModel,
        dep: tuple[bool, ...],
        arr: tuple[bool, ...],
        path: tuple[bool, ...],
        events: list[UpdateEvent],
    ) -> None:
        """Variant t: try the found transition as an improvement for every other row."""
        arr_assignment = dict(zip(self.ts.bool_vars, arr))
        for other in range(len(self.tmpl)):
            if other == row:
                continue
            cube = self._arrival_cube(arr)
            if not self.man.conj2(cube, done[other]).is_false:
                continue
            bound = state.rho.value_at(other, arr_assignment)
            if bound.is_pos_inf:
                continue
            if not bound.is_neg_inf:
                arrived = sum(
                    (
                        c * model.nums.get(primed(v), Fraction(0))
                        for v, c in self.tmpl.coeffs(other).items()
                    ),
                    Fraction(0),
                )
                if not arrived > bound.value:
                    continue
            self._apply_update(
                state, done, other, cube, StrategyChoice(dep, path), events
            )

    def _improve_symbolic(
        self, state: IterationState, done: dict[int, Bdd], events: list[UpdateEvent]
    ) -> None:
        """Variant s: one query with the row index encoded in selector Booleans."""
        nrows = len(self.tmpl)
        bits = max(1, math.ceil(math.log2(nrows))) if nrows > 1 else 0
        selectors = [SELECTOR.format(k) for k in range(bits)]

        def code_lits(i: int) -> list[fm.Formula]:
            return [
                fm.lit(selectors[b], bool((i >> (bits - 1 - b)) & 1))
                for b in range(bits)
            ]

        within = getattr(self, "_within_cache", None) or self.within_bounds_formula(state.rho)
        branches = []
        for i in range(nrows):
            branches.append(
                fm.conj(
                    code_lits(i)
                    + [
                        self.row_improvement_formula(state.rho, i),
                        bdd_to_formula(self.man.neg(done[i])),
                    ]
                )
            )
        base = fm.conj(
            [
                within,
                self.ts.transition,
                fm.atom({GAP: Fraction(-1)}, fm.LT, 0),
                fm.disj(branches),
            ]
        )
        self.ctx.push()
        try:
            self.ctx.assert_formula(base)
            while True:
                model = self._check(extra_bools=selectors)
                if model is None:
                    return
                code = 0
                for b, name in enumerate(selectors):
                    if model.bools.get(name, False):
                        code |= 1 << (bits - 1 - b)
                if code >= nrows:
                    raise EngineError("selector decoded to an invalid row")
                dep, arr, path = self._model_states(model)
                cube = self._arrival_cube(arr)
                effective = self._apply_update(
                    state, done, code, cube, StrategyChoice(dep, path), events
                )
                self._block(effective, selector_lits=code_lits(code))
        finally:
            self.ctx.pop()

    # -- abstractly unreachable states ---------------------------------------------

    def unreachable_set(self, strategy: Strategy) -> Bdd:
        """Least set Z of non-initial states with a bottom strategy entry,
        closed under following strategy sources into Z."""
        non_init = self.man.neg(self.init_bdd)
        z = self.man.false
        for i in range(len(self.tmpl)):
            self.stats.partition_checks += 1
            for value, pre in self.man.reverse_image(strategy.rows[i]):
                if value is None:
                    z = self.man.disj2(
                        z,
                        self.man.conj2(
                            self.man.rename(pre, self.unprime_map), non_init
                        ),
                    )
        while True:
            grow = self.man.false
            for i in range(len(self.tmpl)):
                for value, pre in self.man.reverse_image(strategy.rows[i]):
                    if value is None:
                        continue
                    src = dict(zip(self.ts.bool_vars, value.source))
                    if self.man.evaluate(z, src):
                        grow = self.man.disj2(
                            grow, self.man.rename(pre, self.unprime_map)
                        )
            new_z = self.man.disj2(z, self.man.conj2(grow, non_init))
            if new_z == z:
                return z
            z = new_z

    # -- strategy evaluation ----------------------------------------------------------

    def strategy_value(self, state: IterationState) -> AbstractValue:
        """Least fixpoint of the current strategy's transformer, from state.rho upward."""
        man = self.man
        z = self.unreachable_set(state.strategy)
        rho_rows = [
            man.ite(z, man.terminal(NEG_INF), state.rho.rows[i])
            for i in range(len(self.tmpl))
        ]

        entries_per_row = self._class_entries(state, rho_rows, z)

        # classify pairs: unknown LP variables vs pinned constants vs +inf
        pairs: dict[tuple[int, int], dict] = {}
        for i, entries in enumerate(entries_per_row):
            for k, entry in enumerate(entries):
                pairs[(i, k)] = entry

        def lookup(j: int, source: tuple[bool, ...]):
            """Row-j bound at a concrete departure state: ('var', key) | ('const', Ext)."""
            src = dict(zip(self.ts.bool_vars, source))
            if man.evaluate(z, src):
                return ("const", NEG_INF)
            for k, entry in enumerate(entries_per_row[j]):
                if man.evaluate(entry["guard"], src):
                    if entry["kind"] == "var":
                        return ("var", (j, k))
                    return ("const", entry["value"])
            raise EngineError("departure state not covered by any class")

        # resolve pairs whose departure is unreachable: they keep their seed
        changed = True
        while changed:
            changed = False
            for key, entry in pairs.items():
                if entry["kind"] != "var":
                    continue
                choice = entry["choice"]
                for j in range(len(self.tmpl)):
                    got = lookup(j, choice.source)
                    if got[0] == "const" and got[1].is_neg_inf:
                        entry["kind"] = "const"
                        entry["value"] = entry["pinned_fallback"]
                        changed = True
                        break

        unknown_keys = [k for k, e in pairs.items() if e["kind"] == "var"]
        solved = self._solve_value_lps(pairs, unknown_keys, lookup)

        new_rows = []
        for i, entries in enumerate(entries_per_row):
            acc = man.terminal(NEG_INF)
            for k, entry in enumerate(entries):
                if entry["kind"] == "var":
                    value = solved[(i, k)]
                elif entry["kind"] == "const":
                    value = entry["value"]
                else:  # top
                    value = POS_INF
                acc = man.assign(acc, entry["guard"], value)
            new_rows.append(acc)
        new_rho = AbstractValue(man, new_rows)

        if not state.rho.leq(new_rho):
            raise EngineError("strategy evaluation decreased a bound")
        state.rho = new_rho
        return new_rho

    def _class_entries(
        self, state: IterationState, rho_rows: list[Mtbdd], z: Bdd
    ) -> list[list[dict]]:
        """Per row: guarded class entries with strategy choice and seed information.

        Classes come from the reverse image of the packed strategy diagram
        (or from the frozen partition), refined so initial states form their
        own cells.  Entry kinds: 'var' (LP unknown), 'const' (pinned bound),
        'top' (stays +inf).
        """
        man = self.man
        live = man.neg(z)
        budget = self.config.freeze_class_budget
        out: list[list[dict]] = []
        for i in range(len(self.tmpl)):
            raw: list[tuple[Bdd, StrategyChoice | None]] = []
            frozen_cells = state.frozen.get(i)
            if frozen_cells is None:
                self.stats.partition_checks += 1
                classes = [
                    (man.rename(pre, self.unprime_map), choice)
                    for choice, pre in man.reverse_image(state.strategy.rows[i])
                ]
                refined: list[tuple[Bdd, StrategyChoice | None]] = []
                for guard, choice in classes:
                    for part in (
                        man.conj2(guard, self.init_bdd),
                        man.diff(guard, self.init_bdd),
                    ):
                        if not part.is_false:
                            refined.append((part, choice))
                if budget is not None and len(refined) > budget:
                    frozen_cells = self._freeze_row(state, i, rho_rows[i])
                else:
                    raw = refined
            if frozen_cells is not None:
                raw = [
                    (cell, state.strategy.choice_at(i, self._first_primed_state(cell)))
                    for cell in frozen_cells
                ]
            self.stats.max_classes = max(self.stats.max_classes, len(raw))
            self.stats.class_counts[i] = len(raw)

            entries: list[dict] = []
            seed_init = Ext.finite(self.tmpl.apply(i, self.ts.init_num))
            for guard, choice in raw:
                g_live = man.conj2(guard, live)
                if g_live.is_false:
                    continue
                values = self._values_on(rho_rows[i], g_live)
                if all(v.is_pos_inf for v in values):
                    entries.append({"guard": g_live, "kind": "top", "choice": choice})
                    continue
                if any(v.is_pos_inf for v in values):
                    raise EngineError("class mixes +inf and improvable bounds")
                touches_init = not man.conj2(g_live, self.init_bdd).is_false
                finite = [v for v in values if v.is_finite]
                fallback = max(finite) if finite else NEG_INF
                if touches_init and seed_init > fallback:
                    fallback = seed_init
                if choice is None:
                    if not man.diff(g_live, self.init_bdd).is_false:
                        raise EngineError("bottom strategy outside init escaped Z")
                    entries.append(
                        {"guard": g_live, "kind": "const", "value": fallback, "choice": choice}
                    )
                    continue
                seed: Ext | None = None
                if state.frozen.get(i) is not None:
                    seed = fallback if fallback.is_finite else None
                elif touches_init:
                    seed = seed_init
                entries.append(
                    {
                        "guard": g_live,
                        "kind": "var",
                        "choice": choice,
                        "seed": seed,
                        "pinned_fallback": fallback,
                    }
                )
            out.append(entries)
        return out

    def _freeze_row(self, state: IterationState, row: int, rho_row: Mtbdd) -> list[Bdd]:
        """Fix the row partition to the current bound cells, init-refined, and
        coarsen the strategy so it is constant on every cell."""
        man = self.man
        cells: list[Bdd] = []
        self.stats.partition_checks += 1
        for guard, _ in man.partition(rho_row):
            for part in (man.conj2(guard, self.init_bdd), man.diff(guard, self.init_bdd)):
                if not part.is_false:
                    cells.append(part)
        strat = state.strategy.rows[row]
        for cell in cells:
            rep = state.strategy.choice_at(row, self._first_primed_state(cell))
            strat = man.assign(strat, man.rename(cell, self.prime_map), rep)
        state.strategy = state.strategy.with_row(row, strat)
        state.frozen[row] = cells
        self.stats.frozen_rows = sorted(set(self.stats.frozen_rows) | {row})
        self.stats.frozen_result = True
        return cells

    def _first_primed_state(self, cell: Bdd) -> dict[str, bool]:
        sat = self.man.sat_one(cell)
        assert sat is not None
        full = {b: False for b in self.ts.bool_vars}
        full.update(sat)
        return {primed(b): v for b, v in full.items()}

    def _values_on(self, row: Mtbdd, region: Bdd) -> list[Ext]:
        picked = self.man.ite(region, row, self.man.terminal(None))
        return [v for v in self.man.terminals_of(picked) if v is not None]

    # -- value LPs ----------------------------------------------------------------------

    def _solve_value_lps(self, pairs, unknown_keys, lookup) -> dict[tuple[int, int], Ext]:
        """Maximize each unknown over the joint system, pruned to its dependency closure."""
        deps: dict[tuple[int, int], set[tuple[int, int]]] = {}
        rows_of: dict[tuple[int, int], list] = {}
        for key in unknown_keys:
            entry = pairs[key]
            i, k = key
            choice = entry["choice"]
            path = extract_path_conjunction(
                self.ts, dict(zip(self.ts.choice_vars, choice.path))
            )
            local_rows = []
            dep_keys: set[tuple[int, int]] = set()
            for j in range(len(self.tmpl)):
                got = lookup(j, choice.source)
                if got[0] == "var":
                    dep_keys.add(got[1])
                    local_rows.append(("dep_var", j, got[1]))
                else:
                    bound = got[1]
                    if bound.is_pos_inf:
                        continue
                    assert not bound.is_neg_inf
                    local_rows.append(("dep_const", j, bound.value))
            local_rows.append(("arrival", i, None))
            local_rows.append(("path", path, None))
            if entry["seed"] is not None:
                local_rows.append(("seed", entry["seed"].value, None))
            deps[key] = dep_keys
            rows_of[key] = local_rows

        closures: dict[tuple[int, int], frozenset] = {}

        def closure(key) -> frozenset:
            got = closures.get(key)
            if got is not None:
                return got
            seen = set()
            stack = [key]
            while stack:
                cur = stack.pop()
                if cur in seen:
                    continue
                seen.add(cur)
                stack.extend(deps[cur])
            result = frozenset(seen)
            closures[key] = result
            return result

        solvers: dict[frozenset, tuple[Simplex, dict]] = {}
        solved: dict[tuple[int, int], Ext] = {}
        for key in unknown_keys:
            group = closure(key)
            if group not in solvers:
                solvers[group] = self._build_group_lp(group, rows_of)
            simplex, var_names = solvers[group]
            self.stats.lp_solves += 1
            outcome = simplex.maximize({var_names[key]: Fraction(1)})
            if isinstance(outcome, Unbounded):
                solved[key] = POS_INF
            elif isinstance(outcome, Optimal):
                if outcome.value.inf != 0:
                    raise EngineError("value LP produced an infinitesimal bound")
                solved[key] = Ext.finite(outcome.value.real)
            else:
                raise EngineError(
                    "value LP infeasible for a chosen strategy (engine bug)"
                )
        return solved

    def _build_group_lp(self, group: frozenset, rows_of) -> tuple[Simplex, dict]:
        var_names = {key: f"v_{key[0]}_{key[1]}" for key in group}
        problem_vars = list(var_names[k] for k in sorted(group))
        problem = LpProblem(problem_vars)

        def fresh(prefix: str, key, name: str) -> str:
            return f"{prefix}_{key[0]}_{key[1]}_{name}"

        for key in sorted(group):
            local = {}
            for x in self.ts.num_vars:
                local[x] = fresh("x", key, x)
                local[primed(x)] = fresh("xp", key, x)
            for y in self.ts.input_vars:
                local[y] = fresh("y", key, y)
            for name in local.values():
                problem.variables.append(name)
            for tag, a, b in rows_of[key]:
                if tag == "dep_var":
                    coeffs = {local[v]: c for v, c in self.tmpl.coeffs(a).items()}
                    coeffs[var_names[b]] = Fraction(-1)
                    problem.add(coeffs, "<=", 0)
                elif tag == "dep_const":
                    coeffs = {local[v]: c for v, c in self.tmpl.coeffs(a).items()}
                    problem.add(coeffs, "<=", b)
                elif tag == "arrival":
                    coeffs = {
                        local[primed(v)]: -c for v, c in self.tmpl.coeffs(a).items()
                    }
                    coeffs[var_names[key]] = Fraction(1)
                    problem.add(coeffs, "<=", 0)
                elif tag == "path":
                    for atom in a.atoms:
                        coeffs = {}
                        for v, c in atom.coeffs:
                            if v not in local:
                                raise EngineError(
                                    f"path constraint mentions unexpected variable {v!r}"
                                )
                            coeffs[local[v]] = c
                        rel = fm.LE if atom.rel == fm.LT else atom.rel
                        problem.add(coeffs, rel, atom.const)
                elif tag == "seed":
                    problem.add({var_names[key]: Fraction(-1)}, "<=", -a)
        self.stats.lp_vars += len(problem.variables)
        self.stats.lp_rows += len(problem.rows)
        return Simplex(problem), var_names

    # -- driver ------------------------------------------------------------------------

    def run(self) -> tuple[AbstractValue, Stats]:
        start = time.perf_counter()
        state = self.initial_state()
        self.rho_trace.append(state.rho)
        while True:
            self.stats.rounds += 1
            if self.stats.rounds > self.config.iteration_cap:
                raise EngineError("iteration cap exceeded")
            previous = state.rho
            self.improve(state)
            if state.stable:
                break
            self.strategy_value(state)
            if previous.equal(state.rho):
                raise EngineError("improvement reported but bounds did not increase")
            self.rho_trace.append(state.rho)
            state.round += 1
        self.stats.wall_time = time.perf_counter() - start
        self.state = state
        return state.rho, self.stats


def iterate(
    ts: TransitionSystem, tmpl: Template, config: EngineConfig | None = None
) -> tuple[AbstractValue, Stats]:
    """Run the full analysis; returns the least inductive invariant and run statistics."""
    return Engine(ts, tmpl, config).run()
