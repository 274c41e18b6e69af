"""Reduced ordered BDDs and MTBDDs with hash-consed nodes.

One manager owns one fixed variable order (no dynamic reordering, so runs
are deterministic) and a shared node store for Boolean-terminal diagrams
(Bdd) and arbitrary-terminal diagrams (Mtbdd).  Structurally equal
functions always share the same node id, so equality is handle equality.

A manager and all its handles are confined to a single thread; parallel
analyses must use disjoint managers.
"""

from __future__ import annotations

from typing import Any, Callable, Hashable, Iterator, Sequence

_TERMINAL_LEVEL = 1 << 30


class BddError(Exception):
    pass


class Mtbdd:
    """Handle to a function B^n -> V inside one manager."""

    __slots__ = ("man", "i")

    def __init__(self, man: "BddManager", i: int):
        self.man = man
        self.i = i

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Mtbdd)
            and self.man is other.man
            and self.i == other.i
        )

    def __hash__(self) -> int:
        return hash((id(self.man), self.i))

    @property
    def is_terminal(self) -> bool:
        return self.man._level[self.i] == _TERMINAL_LEVEL

    @property
    def terminal_value(self) -> Any:
        if not self.is_terminal:
            raise BddError("not a terminal node")
        return self.man._value[self.i]

    @property
    def top_var(self) -> str:
        return self.man.order[self.man._level[self.i]]

    def low(self) -> "Mtbdd":
        return self.man._wrap(self.man._lo[self.i], type(self))

    def high(self) -> "Mtbdd":
        return self.man._wrap(self.man._hi[self.i], type(self))

    def evaluate(self, assignment: dict[str, bool]) -> Any:
        return self.man.evaluate(self, assignment)

    def node_count(self) -> int:
        seen: set[int] = set()
        stack = [self.i]
        while stack:
            i = stack.pop()
            if i in seen:
                continue
            seen.add(i)
            if self.man._level[i] != _TERMINAL_LEVEL:
                stack.append(self.man._lo[i])
                stack.append(self.man._hi[i])
        return len(seen)

    def dump(self) -> str:
        return self.man.dump(self)

    def __repr__(self) -> str:
        return f"<{type(self).__name__} #{self.i} of {self.node_count()} nodes>"


class Bdd(Mtbdd):
    """Mtbdd whose terminals are exactly False/True."""

    def __and__(self, other: "Bdd") -> "Bdd":
        return self.man.conj2(self, other)

    def __or__(self, other: "Bdd") -> "Bdd":
        return self.man.disj2(self, other)

    def __invert__(self) -> "Bdd":
        return self.man.neg(self)

    @property
    def is_false(self) -> bool:
        return self.i == self.man.false.i

    @property
    def is_true(self) -> bool:
        return self.i == self.man.true.i


class BddManager:
    """Unique-table manager for a fixed variable order."""

    def __init__(self, order: Sequence[str], node_cap: int = 4_000_000):
        if len(set(order)) != len(order):
            raise BddError("duplicate variable in order")
        self.order: list[str] = list(order)
        self.level: dict[str, int] = {v: k for k, v in enumerate(self.order)}
        self.node_cap = node_cap
        self._level: list[int] = []
        self._lo: list[int] = []
        self._hi: list[int] = []
        self._value: list[Any] = []
        self._terminals: dict[Hashable, int] = {}
        self._unique: dict[tuple[int, int, int], int] = {}
        self._cache: dict[tuple, int] = {}
        self.false = self._wrap(self._terminal_id(False), Bdd)
        self.true = self._wrap(self._terminal_id(True), Bdd)

    # -- node construction ------------------------------------------------

    def _terminal_id(self, value: Hashable) -> int:
        got = self._terminals.get(value)
        if got is not None:
            return got
        i = self._new_node(_TERMINAL_LEVEL, -1, -1, value)
        self._terminals[value] = i
        return i

    def _new_node(self, level: int, lo: int, hi: int, value: Any = None) -> int:
        if len(self._level) >= self.node_cap:
            raise BddError(f"node cap {self.node_cap} exceeded")
        self._level.append(level)
        self._lo.append(lo)
        self._hi.append(hi)
        self._value.append(value)
        return len(self._level) - 1

    def _mk(self, level: int, lo: int, hi: int) -> int:
        if lo == hi:
            return lo
        key = (level, lo, hi)
        got = self._unique.get(key)
        if got is not None:
            return got
        i = self._new_node(level, lo, hi)
        self._unique[key] = i
        return i

    def _wrap(self, i: int, cls: type = None) -> Mtbdd:
        if cls is None or cls is Mtbdd:
            return Mtbdd(self, i)
        return cls(self, i)

    def _check(self, *nodes: Mtbdd) -> None:
        for f in nodes:
            if f.man is not self:
                raise BddError("operands belong to different managers")

    # -- constructors ------------------------------------------------------

    def var(self, name: str) -> Bdd:
        lvl = self.level.get(name)
        if lvl is None:
            raise BddError(f"unknown variable {name!r}")
        return Bdd(self, self._mk(lvl, self.false.i, self.true.i))

    def literal(self, name: str, polarity: bool) -> Bdd:
        v = self.var(name)
        return v if polarity else ~v

    def terminal(self, value: Hashable) -> Mtbdd:
        return Mtbdd(self, self._terminal_id(value))

    def cube(self, assignment: dict[str, bool]) -> Bdd:
        acc = self.true
        for name in sorted(assignment, key=lambda n: self.level[n], reverse=True):
            lvl = self.level[name]
            if assignment[name]:
                acc = Bdd(self, self._mk(lvl, self.false.i, acc.i))
            else:
                acc = Bdd(self, self._mk(lvl, acc.i, self.false.i))
        return acc

    def conj(self, parts: Sequence[Bdd]) -> Bdd:
        acc = self.true
        for p in parts:
            acc = self.conj2(acc, p)
        return acc

    def disj(self, parts: Sequence[Bdd]) -> Bdd:
        acc = self.false
        for p in parts:
            acc = self.disj2(acc, p)
        return acc

    # -- boolean operations --------------------------------------------------

    def _apply2_bool(self, tag: str, op: Callable[[Any, Any], Any], f: int, g: int) -> int:
        key = (tag, f, g)
        got = self._cache.get(key)
        if got is not None:
            return got
        lf, lg = self._level[f], self._level[g]
        if lf == _TERMINAL_LEVEL and lg == _TERMINAL_LEVEL:
            res = self._terminal_id(op(self._value[f], self._value[g]))
        else:
            lvl = min(lf, lg)
            f0, f1 = (self._lo[f], self._hi[f]) if lf == lvl else (f, f)
            g0, g1 = (self._lo[g], self._hi[g]) if lg == lvl else (g, g)
            res = self._mk(
                lvl,
                self._apply2_bool(tag, op, f0, g0),
                self._apply2_bool(tag, op, f1, g1),
            )
        self._cache[key] = res
        return res

    def conj2(self, f: Bdd, g: Bdd) -> Bdd:
        self._check(f, g)
        if f.is_false or g.is_false:
            return self.false
        return Bdd(self, self._apply2_bool("and", lambda a, b: a and b, f.i, g.i))

    def disj2(self, f: Bdd, g: Bdd) -> Bdd:
        self._check(f, g)
        if f.is_true or g.is_true:
            return self.true
        return Bdd(self, self._apply2_bool("or", lambda a, b: a or b, f.i, g.i))

    def neg(self, f: Bdd) -> Bdd:
        self._check(f)

        def rec(i: int) -> int:
            key = ("not", i)
            got = self._cache.get(key)
            if got is not None:
                return got
            if self._level[i] == _TERMINAL_LEVEL:
                res = self._terminal_id(not self._value[i])
            else:
                res = self._mk(self._level[i], rec(self._lo[i]), rec(self._hi[i]))
            self._cache[key] = res
            return res

        return Bdd(self, rec(f.i))

    def diff(self, f: Bdd, g: Bdd) -> Bdd:
        """f and not g."""
        return self.conj2(f, self.neg(g))

    # -- mtbdd operations ------------------------------------------------------

    def ite(self, cond: Bdd, then: Mtbdd, els: Mtbdd) -> Mtbdd:
        self._check(cond, then, els)
        cls = Bdd if isinstance(then, Bdd) and isinstance(els, Bdd) else Mtbdd

        def rec(c: int, t: int, e: int) -> int:
            if c == self.true.i:
                return t
            if c == self.false.i:
                return e
            if t == e:
                return t
            key = ("ite", c, t, e)
            got = self._cache.get(key)
            if got is not None:
                return got
            lvl = min(self._level[c], self._level[t], self._level[e])
            c0, c1 = (self._lo[c], self._hi[c]) if self._level[c] == lvl else (c, c)
            t0, t1 = (self._lo[t], self._hi[t]) if self._level[t] == lvl else (t, t)
            e0, e1 = (self._lo[e], self._hi[e]) if self._level[e] == lvl else (e, e)
            res = self._mk(lvl, rec(c0, t0, e0), rec(c1, t1, e1))
            self._cache[key] = res
            return res

        return self._wrap(rec(cond.i, then.i, els.i), cls)

    def assign(self, f: Mtbdd, guard: Bdd, value: Hashable) -> Mtbdd:
        """Bulk update: result equals `value` on guard and f elsewhere."""
        self._check(f, guard)
        return self.ite(guard, self.terminal(value), f)

    def map_terminals(self, f: Mtbdd, fn: Callable[[Any], Any], as_bdd: bool = False) -> Mtbdd:
        self._check(f)
        memo: dict[int, int] = {}

        def rec(i: int) -> int:
            got = memo.get(i)
            if got is not None:
                return got
            if self._level[i] == _TERMINAL_LEVEL:
                res = self._terminal_id(fn(self._value[i]))
            else:
                res = self._mk(self._level[i], rec(self._lo[i]), rec(self._hi[i]))
            memo[i] = res
            return res

        return self._wrap(rec(f.i), Bdd if as_bdd else Mtbdd)

    def apply2(self, f: Mtbdd, g: Mtbdd, fn: Callable[[Any, Any], Any], as_bdd: bool = False) -> Mtbdd:
        self._check(f, g)
        memo: dict[tuple[int, int], int] = {}

        def rec(a: int, b: int) -> int:
            key = (a, b)
            got = memo.get(key)
            if got is not None:
                return got
            la, lb = self._level[a], self._level[b]
            if la == _TERMINAL_LEVEL and lb == _TERMINAL_LEVEL:
                res = self._terminal_id(fn(self._value[a], self._value[b]))
            else:
                lvl = min(la, lb)
                a0, a1 = (self._lo[a], self._hi[a]) if la == lvl else (a, a)
                b0, b1 = (self._lo[b], self._hi[b]) if lb == lvl else (b, b)
                res = self._mk(lvl, rec(a0, b0), rec(a1, b1))
            memo[key] = res
            return res

        return self._wrap(rec(f.i, g.i), Bdd if as_bdd else Mtbdd)

    def terminals_of(self, f: Mtbdd) -> list[Any]:
        """Distinct terminal values in deterministic first-encounter (lo-first DFS) order."""
        self._check(f)
        seen: set[int] = set()
        out: list[Any] = []

        def rec(i: int) -> None:
            if i in seen:
                return
            seen.add(i)
            if self._level[i] == _TERMINAL_LEVEL:
                out.append(self._value[i])
            else:
                rec(self._lo[i])
                rec(self._hi[i])

        rec(f.i)
        return out

    def partition(self, f: Mtbdd, check: bool = True) -> list[tuple[Bdd, Any]]:
        """Split f into (guard, value) cells: disjoint guards covering B^n.

        The disjointness/covering invariant is asserted on every call; it is
        cheap and any violation is a structural bug in the diagram code.
        """
        self._check(f)
        cells = [
            (self.map_terminals(f, lambda v, t=t: v == t, as_bdd=True), t)
            for t in self.terminals_of(f)
        ]
        if check:
            union = self.false
            for g, _ in cells:
                if not self.conj2(union, g).is_false:
                    raise BddError("partition guards overlap")
                union = self.disj2(union, g)
            if not union.is_true:
                raise BddError("partition guards do not cover B^n")
        return cells

    def reverse_image(self, f: Mtbdd) -> list[tuple[Any, Bdd]]:
        """Preimage of each terminal value; yields the equivalence classes of f."""
        return [(value, guard) for guard, value in self.partition(f)]

    # -- queries -----------------------------------------------------------------

    def evaluate(self, f: Mtbdd, assignment: dict[str, bool]) -> Any:
        self._check(f)
        i = f.i
        while self._level[i] != _TERMINAL_LEVEL:
            name = self.order[self._level[i]]
            if name not in assignment:
                raise BddError(f"assignment misses variable {name!r}")
            i = self._hi[i] if assignment[name] else self._lo[i]
        return self._value[i]

    def sat_one(self, f: Bdd) -> dict[str, bool] | None:
        """One satisfying assignment over the decided variables, or None.

        Reduced diagrams have no internal constant-false node, so following
        any non-false child always reaches the true terminal.
        """
        self._check(f)
        if f.is_false:
            return None
        out: dict[str, bool] = {}
        i = f.i
        while self._level[i] != _TERMINAL_LEVEL:
            name = self.order[self._level[i]]
            if self._lo[i] != self.false.i:
                out[name] = False
                i = self._lo[i]
            else:
                out[name] = True
                i = self._hi[i]
        return out

    def iter_cubes(self, f: Bdd) -> Iterator[dict[str, bool]]:
        """All cubes (partial assignments) on which f is true, in DFS order."""
        self._check(f)

        def rec(i: int, acc: dict[str, bool]) -> Iterator[dict[str, bool]]:
            if self._level[i] == _TERMINAL_LEVEL:
                if self._value[i]:
                    yield dict(acc)
                return
            name = self.order[self._level[i]]
            acc[name] = False
            yield from rec(self._lo[i], acc)
            acc[name] = True
            yield from rec(self._hi[i], acc)
            del acc[name]

        return rec(f.i, {})

    def iter_minterms(self, f: Bdd, over: Sequence[str]) -> Iterator[tuple[bool, ...]]:
        """All total assignments over `over` satisfying f (f's support must be within)."""
        missing = set(self.support(f)) - set(over)
        if missing:
            raise BddError(f"support {sorted(missing)} outside enumeration variables")
        for cube in self.iter_cubes(f):
            free = [v for v in over if v not in cube]
            for bits in range(1 << len(free)):
                full = dict(cube)
                for k, v in enumerate(free):
                    full[v] = bool((bits >> k) & 1)
                yield tuple(full[v] for v in over)

    def support(self, f: Mtbdd) -> list[str]:
        self._check(f)
        seen: set[int] = set()
        levels: set[int] = set()
        stack = [f.i]
        while stack:
            i = stack.pop()
            if i in seen:
                continue
            seen.add(i)
            if self._level[i] != _TERMINAL_LEVEL:
                levels.add(self._level[i])
                stack.append(self._lo[i])
                stack.append(self._hi[i])
        return [self.order[l] for l in sorted(levels)]

    def restrict(self, f: Mtbdd, assignment: dict[str, bool]) -> Mtbdd:
        """Cofactor: fix some variables to constants."""
        self._check(f)
        fixed = {self.level[name]: val for name, val in assignment.items()}
        memo: dict[int, int] = {}

        def rec(i: int) -> int:
            got = memo.get(i)
            if got is not None:
                return got
            lvl = self._level[i]
            if lvl == _TERMINAL_LEVEL:
                res = i
            elif lvl in fixed:
                res = rec(self._hi[i] if fixed[lvl] else self._lo[i])
            else:
                res = self._mk(lvl, rec(self._lo[i]), rec(self._hi[i]))
            memo[i] = res
            return res

        return self._wrap(rec(f.i), type(f))

    def rename(self, f: Mtbdd, mapping: dict[str, str]) -> Mtbdd:
        """Rename variables; the mapping must preserve the relative order."""
        self._check(f)
        lvl_map = {self.level[a]: self.level[b] for a, b in mapping.items()}
        pairs = sorted(lvl_map.items())
        targets = [b for _, b in pairs]
        if targets != sorted(targets):
            raise BddError("rename mapping does not preserve the variable order")
        memo: dict[int, int] = {}

        def rec(i: int) -> int:
            got = memo.get(i)
            if got is not None:
                return got
            lvl = self._level[i]
            if lvl == _TERMINAL_LEVEL:
                res = i
            else:
                if lvl not in lvl_map:
                    raise BddError(
                        f"variable {self.order[lvl]!r} has no rename target"
                    )
                res = self._mk(lvl_map[lvl], rec(self._lo[i]), rec(self._hi[i]))
            memo[i] = res
            return res

        return self._wrap(rec(f.i), type(f))

    # -- debug ------------------------------------------------------------------

    def dump(self, f: Mtbdd) -> str:
        """Deterministic textual node listing for golden tests."""
        self._check(f)
        serial: dict[int, int] = {}
        lines: list[str] = []

        def rec(i: int) -> int:
            got = serial.get(i)
            if got is not None:
                return got
            if self._level[i] == _TERMINAL_LEVEL:
                n = len(serial)
                serial[i] = n
                lines.append(f"@{n} terminal {self._value[i]!r}")
            else:
                lo = rec(self._lo[i])
                hi = rec(self._hi[i])
                n = len(serial)
                serial[i] = n
                lines.append(f"@{n} {self.order[self._level[i]]} ? @{hi} : @{lo}")
            return serial[i]

        root = rec(f.i)
        lines.append(f"root @{root}")
        return "\n".join(lines)


def interleaved_order(names: Sequence[str], prime: Callable[[str], str]) -> list[str]:
    """Declaration order with primed copies interleaved: b1, b1', b2, b2', ..."""
    out: list[str] = []
    for n in names:
        out.append(n)
        out.append(prime(n))
    return out


def bdd_to_formula(f: Bdd):
    """Propositional formula equivalent to f, linear in the node count.

    Internal nodes become (var and high) or (not var and low); subformulas are
    shared between parents, so re-evaluating the result reproduces the Bdd.
    """
    from . import formulas as fm

    man = f.man
    memo: dict[int, fm.Formula] = {}

    def rec(i: int) -> fm.Formula:
        got = memo.get(i)
        if got is not None:
            return got
        if man._level[i] == _TERMINAL_LEVEL:
            res = fm.TRUE if man._value[i] else fm.FALSE
        else:
            name = man.order[man._level[i]]
            lo = rec(man._lo[i])
            hi = rec(man._hi[i])
            res = fm.disj(
                [
                    fm.conj([fm.lit(name, True), hi]),
                    fm.conj([fm.lit(name, False), lo]),
                ]
            )
        memo[i] = res
        return res

    return rec(f.i)


def formula_to_bdd(man: BddManager, f) -> Bdd:
    """Build the Bdd of a purely propositional formula."""
    from . import formulas as fm

    memo: dict[int, Bdd] = {}

    def rec(g) -> Bdd:
        got = memo.get(id(g))
        if got is not None:
            return got
        if isinstance(g, fm.Const):
            res = man.true if g.value else man.false
        elif isinstance(g, fm.Lit):
            res = man.literal(g.name, g.polarity)
        elif isinstance(g, fm.And):
            res = man.conj([rec(a) for a in g.args])
        elif isinstance(g, fm.Or):
            res = man.disj([rec(a) for a in g.args])
        else:
            raise BddError(f"formula is not propositional: {g!r}")
        memo[id(g)] = res
        return res

    return rec(f)
