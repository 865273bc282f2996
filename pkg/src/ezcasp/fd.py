"""Embedded finite-domain constraint solver.

Constraint expressions are trees of integer arithmetic, comparisons, reified
logical connectives and global constraints (the catalog: all_different,
all_distinct, assignment, circuit, count, cumulative, disjoint2, element,
minimum, maximum, scalar_product, serialized, sum).

The ground-truth checker `satisfied` defines the semantics of every
constraint; search verifies each leaf with it, so propagators only need to be
sound (never remove a value that belongs to some solution), never complete.
Propagation strength: bounds consistency for linear comparisons and
sum/scalar_product, pairwise disequality for all_different, Hall-interval
bounds for all_distinct, time-table filtering for cumulative (serialized is
cumulative with unit resources), light dedicated filters for the remaining
globals, and three-valued filtering for reified formulas.

Labeling is deterministic: leftmost unfixed variable in declaration order,
ascending values, binary x=v / x!=v branching.  A `CSPInstance` is single-
owner mutable during search; independent instances may be solved on separate
threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Optional, Set, Tuple

__all__ = [
    "IntConst", "VarRef", "Arith", "Cmp", "BoolExpr", "Global", "ConstraintExpr",
    "Domain", "CSPInstance", "FdError", "ComplementUnsupported",
    "satisfied", "eval_term", "complement", "propagate", "solve", "feasible",
    "vars_of", "build_csp", "CMP_NAMES",
]

CMP_NAMES = ("lt", "leq", "gt", "geq", "eq", "neq")

_CMP_FUN = {
    "lt": lambda a, b: a < b,
    "leq": lambda a, b: a <= b,
    "gt": lambda a, b: a > b,
    "geq": lambda a, b: a >= b,
    "eq": lambda a, b: a == b,
    "neq": lambda a, b: a != b,
}

_CMP_COMPLEMENT = {"lt": "geq", "geq": "lt", "leq": "gt", "gt": "leq",
                   "eq": "neq", "neq": "eq"}


class FdError(Exception):
    pass


class ComplementUnsupported(FdError):
    """Raised when a negated constraint literal maps to a global constraint
    or reified formula; only primitive comparisons have complements here."""


# ---------------------------------------------------------------------------
# Expression model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntConst:
    value: int


@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass(frozen=True)
class Arith:
    """op in {plus, minus, times, div, neg}; div truncates toward zero."""
    op: str
    args: tuple


@dataclass(frozen=True)
class Cmp:
    op: str
    lhs: "ConstraintExpr"
    rhs: "ConstraintExpr"


@dataclass(frozen=True)
class BoolExpr:
    """Reified connective: op in {or, and, xor, impl, iff, not}."""
    op: str
    args: tuple


@dataclass(frozen=True)
class Global:
    """Global constraint; args are tuples of terms, ints, or comparison-op
    names, per the catalog's signature for `name`."""
    name: str
    args: tuple


ConstraintExpr = object


def vars_of(c) -> Set[str]:
    out: Set[str] = set()
    _collect_vars(c, out)
    return out


def _collect_vars(c, out: Set[str]) -> None:
    if isinstance(c, VarRef):
        out.add(c.name)
    elif isinstance(c, (Arith, BoolExpr, Global)):
        for a in c.args:
            _collect_vars(a, out)
    elif isinstance(c, Cmp):
        _collect_vars(c.lhs, out)
        _collect_vars(c.rhs, out)
    elif isinstance(c, tuple):
        for a in c:
            _collect_vars(a, out)


# ---------------------------------------------------------------------------
# Ground-truth semantics
# ---------------------------------------------------------------------------

def eval_term(t, e: Dict[str, int]) -> Optional[int]:
    """Integer value of an arithmetic term; None on division by zero."""
    if isinstance(t, IntConst):
        return t.value
    if isinstance(t, VarRef):
        return e[t.name]
    if isinstance(t, int):
        return t
    if isinstance(t, Arith):
        vals = [eval_term(a, e) for a in t.args]
        if any(v is None for v in vals):
            return None
        if t.op == "plus":
            return vals[0] + vals[1]
        if t.op == "minus":
            return vals[0] - vals[1]
        if t.op == "times":
            return vals[0] * vals[1]
        if t.op == "div":
            if vals[1] == 0:
                return None
            q = abs(vals[0]) // abs(vals[1])
            return q if (vals[0] >= 0) == (vals[1] >= 0) else -q
        if t.op == "neg":
            return -vals[0]
    raise FdError(f"not an arithmetic term: {t!r}")


def _values(items, e) -> Optional[List[int]]:
    vals = []
    for it in items:
        v = eval_term(it, e)
        if v is None:
            return None
        vals.append(v)
    return vals


def _sat_global(g: Global, e: Dict[str, int]) -> bool:
    name, args = g.name, g.args
    if name in ("all_different", "all_distinct"):
        vals = _values(args[0], e)
        return vals is not None and len(set(vals)) == len(vals)
    if name == "assignment":
        xs, ys = _values(args[0], e), _values(args[1], e)
        if xs is None or ys is None or len(xs) != len(ys):
            return False
        n = len(xs)
        if any(not 1 <= v <= n for v in xs + ys):
            return False
        return all((xs[i] == j + 1) == (ys[j] == i + 1)
                   for i in range(n) for j in range(n))
    if name == "circuit":
        vs = _values(args[0], e)
        n = len(vs)
        if vs is None or any(not 1 <= v <= n for v in vs) or len(set(vs)) != n:
            return False
        seen, cur = 1, vs[0]
        while cur != 1 and seen <= n:
            cur = vs[cur - 1]
            seen += 1
        return cur == 1 and seen == n
    if name == "count":
        m = eval_term(args[0], e)
        vals = _values(args[1], e)
        target = eval_term(args[3], e)
        if m is None or vals is None or target is None:
            return False
        return _CMP_FUN[args[2]](sum(1 for v in vals if v == m), target)
    if name == "cumulative":
        starts = _values(args[0], e)
        durs, ress = list(args[1]), list(args[2])
        limit = eval_term(args[3], e)
        if starts is None or limit is None:
            return False
        for t in _active_times(starts, durs):
            used = sum(r for s, d, r in zip(starts, durs, ress)
                       if s <= t < s + d)
            if used > limit:
                return False
        return True
    if name == "disjoint2":
        xs, ys = _values(args[0], e), _values(args[2], e)
        ws, hs = list(args[1]), list(args[3])
        if xs is None or ys is None:
            return False
        n = len(xs)
        for i in range(n):
            for j in range(i + 1, n):
                x_olap = xs[i] < xs[j] + ws[j] and xs[j] < xs[i] + ws[i]
                y_olap = ys[i] < ys[j] + hs[j] and ys[j] < ys[i] + hs[i]
                if x_olap and y_olap and ws[i] > 0 and hs[i] > 0 \
                        and ws[j] > 0 and hs[j] > 0:
                    return False
        return True
    if name == "element":
        i = eval_term(args[0], e)
        vals = _values(args[1], e)
        tgt = eval_term(args[2], e)
        if i is None or vals is None or tgt is None:
            return False
        return 1 <= i <= len(vals) and vals[i - 1] == tgt
    if name in ("minimum", "maximum"):
        m = eval_term(args[0], e)
        vals = _values(args[1], e)
        if m is None or vals is None or not vals:
            return False
        return m == (min(vals) if name == "minimum" else max(vals))
    if name == "scalar_product":
        coeffs = list(args[0])
        vals = _values(args[1], e)
        target = eval_term(args[3], e)
        if vals is None or target is None:
            return False
        return _CMP_FUN[args[2]](sum(c * v for c, v in zip(coeffs, vals)),
                                 target)
    if name == "serialized":
        starts = _values(args[0], e)
        durs = list(args[1])
        if starts is None:
            return False
        n = len(starts)
        for i in range(n):
            for j in range(i + 1, n):
                if durs[i] > 0 and durs[j] > 0 and \
                        starts[i] < starts[j] + durs[j] and \
                        starts[j] < starts[i] + durs[i]:
                    return False
        return True
    if name == "sum":
        vals = _values(args[0], e)
        target = eval_term(args[2], e)
        if vals is None or target is None:
            return False
        return _CMP_FUN[args[1]](sum(vals), target)
    raise FdError(f"unknown global constraint {name!r}")


def _active_times(starts: List[int], durs: List[int]) -> Iterator[int]:
    times = set()
    for s, d in zip(starts, durs):
        for t in range(s, s + d):
            times.add(t)
    return iter(sorted(times))


def satisfied(c, e: Dict[str, int]) -> bool:
    """Ground-truth check of a constraint under a total evaluation.

    Used both by search (leaf verification) and by the brute-force oracle;
    this function *is* the constraint semantics.
    """
    if isinstance(c, Cmp):
        l, r = eval_term(c.lhs, e), eval_term(c.rhs, e)
        if l is None or r is None:
            return False
        return _CMP_FUN[c.op](l, r)
    if isinstance(c, BoolExpr):
        op = c.op
        if op == "not":
            return not satisfied(c.args[0], e)
        vals = [satisfied(a, e) for a in c.args]
        if op == "or":
            return any(vals)
        if op == "and":
            return all(vals)
        if op == "xor":
            return vals[0] != vals[1]
        if op == "impl":
            return (not vals[0]) or vals[1]
        if op == "iff":
            return vals[0] == vals[1]
        raise FdError(f"unknown connective {op!r}")
    if isinstance(c, Global):
        return _sat_global(c, e)
    raise FdError(f"not a constraint: {c!r}")


def complement(c) -> Cmp:
    """Complement of a primitive comparison: exactly one of c and
    complement(c) holds under any evaluation."""
    if isinstance(c, Cmp):
        return Cmp(_CMP_COMPLEMENT[c.op], c.lhs, c.rhs)
    raise ComplementUnsupported(
        f"complement of non-primitive constraint unsupported: {c!r}")


# ---------------------------------------------------------------------------
# Domains
# ---------------------------------------------------------------------------

class Domain:
    """Integer interval with removed interior values ("holes")."""

    __slots__ = ("lo", "hi", "holes")

    def __init__(self, lo: int, hi: int, holes: Optional[Set[int]] = None):
        self.lo = lo
        self.hi = hi
        self.holes: Set[int] = holes or set()
        self._normalize()

    def _normalize(self) -> None:
        while self.lo <= self.hi and self.lo in self.holes:
            self.holes.discard(self.lo)
            self.lo += 1
        while self.lo <= self.hi and self.hi in self.holes:
            self.holes.discard(self.hi)
            self.hi -= 1
        if self.holes:
            self.holes = {v for v in self.holes if self.lo < v < self.hi}

    @property
    def empty(self) -> bool:
        return self.lo > self.hi

    @property
    def fixed(self) -> bool:
        return self.lo == self.hi

    def size(self) -> int:
        return 0 if self.empty else self.hi - self.lo + 1 - len(self.holes)

    def contains(self, v: int) -> bool:
        return self.lo <= v <= self.hi and v not in self.holes

    def set_min(self, v: int) -> bool:
        if v <= self.lo:
            return False
        self.lo = v
        self._normalize()
        return True

    def set_max(self, v: int) -> bool:
        if v >= self.hi:
            return False
        self.hi = v
        self._normalize()
        return True

    def remove(self, v: int) -> bool:
        if not self.contains(v):
            return False
        if v == self.lo or v == self.hi:
            self.holes.add(v)
            self._normalize()
        else:
            self.holes.add(v)
        return True

    def fix(self, v: int) -> bool:
        changed = self.set_min(v)
        changed |= self.set_max(v)
        return changed

    def intersect_range(self, lo: int, hi: int) -> bool:
        changed = self.set_min(lo)
        changed |= self.set_max(hi)
        return changed

    def values(self) -> Iterator[int]:
        v = self.lo
        while v <= self.hi:
            if v not in self.holes:
                yield v
            v += 1

    def copy(self) -> "Domain":
        d = Domain.__new__(Domain)
        d.lo, d.hi, d.holes = self.lo, self.hi, set(self.holes)
        return d

    def __repr__(self) -> str:
        if self.empty:
            return "Domain(empty)"
        h = f" \\ {sorted(self.holes)}" if self.holes else ""
        return f"Domain({self.lo}..{self.hi}{h})"


# ---------------------------------------------------------------------------
# CSP instances
# ---------------------------------------------------------------------------

class CSPInstance:
    """Variables in declaration order, their current domains, constraints."""

    def __init__(self):
        self.var_order: List[str] = []
        self.domains: Dict[str, Domain] = {}
        self.constraints: List[object] = []

    def add_var(self, name: str, lo: int, hi: int) -> None:
        if name in self.domains:
            self.domains[name].intersect_range(lo, hi)
        else:
            self.var_order.append(name)
            self.domains[name] = Domain(lo, hi)

    def post(self, c) -> None:
        self.constraints.append(c)

    def copy(self) -> "CSPInstance":
        inst = CSPInstance()
        inst.var_order = list(self.var_order)
        inst.domains = {n: d.copy() for n, d in self.domains.items()}
        inst.constraints = list(self.constraints)
        return inst

    def all_fixed(self) -> bool:
        return all(d.fixed for d in self.domains.values())

    def evaluation(self) -> Dict[str, int]:
        return {n: d.lo for n, d in self.domains.items()}

    def assignment_count(self) -> int:
        total = 1
        for d in self.domains.values():
            total *= max(d.size(), 0)
        return total

    def __repr__(self) -> str:
        return (f"CSPInstance({len(self.var_order)} vars, "
                f"{len(self.constraints)} constraints)")


# ---------------------------------------------------------------------------
# Interval arithmetic and linearization
# ---------------------------------------------------------------------------

def _ival(t, dom: Dict[str, Domain]) -> Tuple[int, int]:
    if isinstance(t, IntConst):
        return (t.value, t.value)
    if isinstance(t, int):
        return (t, t)
    if isinstance(t, VarRef):
        d = dom[t.name]
        return (d.lo, d.hi)
    if isinstance(t, Arith):
        if t.op == "neg":
            lo, hi = _ival(t.args[0], dom)
            return (-hi, -lo)
        a, b = _ival(t.args[0], dom), _ival(t.args[1], dom)
        if t.op == "plus":
            return (a[0] + b[0], a[1] + b[1])
        if t.op == "minus":
            return (a[0] - b[1], a[1] - b[0])
        if t.op == "times":
            corners = [x * y for x in a for y in b]
            return (min(corners), max(corners))
        if t.op == "div":
            if b[0] <= 0 <= b[1]:
                # divisor range includes zero; no useful bound
                big = max(abs(a[0]), abs(a[1]))
                return (-big, big)
            corners = []
            for x in (a[0], a[1]):
                for y in (b[0], b[1]):
                    q = abs(x) // abs(y)
                    corners.append(q if (x >= 0) == (y >= 0) else -q)
            return (min(corners), max(corners))
    raise FdError(f"not an arithmetic term: {t!r}")


def _linearize(t) -> Optional[Tuple[Dict[str, int], int]]:
    """Flatten into (coefficients, constant); None if non-linear."""
    if isinstance(t, IntConst):
        return ({}, t.value)
    if isinstance(t, int):
        return ({}, t)
    if isinstance(t, VarRef):
        return ({t.name: 1}, 0)
    if isinstance(t, Arith):
        if t.op == "neg":
            sub = _linearize(t.args[0])
            if sub is None:
                return None
            return ({k: -v for k, v in sub[0].items()}, -sub[1])
        a, b = _linearize(t.args[0]), _linearize(t.args[1])
        if t.op in ("plus", "minus") and a is not None and b is not None:
            sign = 1 if t.op == "plus" else -1
            coeffs = dict(a[0])
            for k, v in b[0].items():
                coeffs[k] = coeffs.get(k, 0) + sign * v
            return ({k: v for k, v in coeffs.items() if v},
                    a[1] + sign * b[1])
        if t.op == "times" and a is not None and b is not None:
            if not a[0]:
                scale, lin = a[1], b
            elif not b[0]:
                scale, lin = b[1], a
            else:
                return None
            return ({k: scale * v for k, v in lin[0].items()},
                    scale * lin[1])
    return None


def _floor_div(a: int, b: int) -> int:
    return a // b


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


class _Store:
    """Mutable propagation context over a CSPInstance's domains."""

    def __init__(self, domains: Dict[str, Domain]):
        self.domains = domains
        self.changed = False
        self.failed = False

    def dom(self, name: str) -> Domain:
        return self.domains[name]

    def note(self, changed: bool, name: str) -> None:
        if changed:
            self.changed = True
            if self.domains[name].empty:
                self.failed = True

    def set_min(self, name: str, v: int) -> None:
        self.note(self.domains[name].set_min(v), name)

    def set_max(self, name: str, v: int) -> None:
        self.note(self.domains[name].set_max(v), name)

    def remove(self, name: str, v: int) -> None:
        self.note(self.domains[name].remove(v), name)

    def fix(self, name: str, v: int) -> None:
        self.note(self.domains[name].fix(v), name)


# ---------------------------------------------------------------------------
# Propagators
# ---------------------------------------------------------------------------

def _filter_linear(st: _Store, coeffs: Dict[str, int], const: int,
                   op: str) -> None:
    """Bounds consistency for sum(coeffs * vars) + const  op  0."""
    if op == "neq":
        unfixed = [n for n in coeffs if not st.dom(n).fixed]
        if not unfixed:
            total = const + sum(c * st.dom(n).lo for n, c in coeffs.items())
            if total == 0:
                st.failed = True
            return
        if len(unfixed) == 1:
            n = unfixed[0]
            rest = const + sum(c * st.dom(m).lo for m, c in coeffs.items()
                               if m != n)
            c = coeffs[n]
            if rest % c == 0:
                st.remove(n, -rest // c)
        return

    bounds = []          # (upper_for_sum, lower_for_sum) two one-sided checks
    if op in ("leq", "lt", "eq"):
        bounds.append(("leq", -const - (1 if op == "lt" else 0)))
    if op in ("geq", "gt", "eq"):
        bounds.append(("geq", -const + (1 if op == "gt" else 0)))

    for kind, k in bounds:
        lo_sum = hi_sum = 0
        term_lo: Dict[str, int] = {}
        term_hi: Dict[str, int] = {}
        for n, c in coeffs.items():
            d = st.dom(n)
            a, b = (c * d.lo, c * d.hi) if c > 0 else (c * d.hi, c * d.lo)
            term_lo[n], term_hi[n] = a, b
            lo_sum += a
            hi_sum += b
        if kind == "leq":
            if lo_sum > k:
                st.failed = True
                return
            for n, c in coeffs.items():
                slack = k - (lo_sum - term_lo[n])
                if c > 0:
                    st.set_max(n, _floor_div(slack, c))
                else:
                    st.set_min(n, _ceil_div(slack, c))
                if st.failed:
                    return
        else:
            if hi_sum < k:
                st.failed = True
                return
            for n, c in coeffs.items():
                slack = k - (hi_sum - term_hi[n])
                if c > 0:
                    st.set_min(n, _ceil_div(slack, c))
                else:
                    st.set_max(n, _floor_div(slack, c))
                if st.failed:
                    return


def _filter_cmp(st: _Store, c: Cmp) -> None:
    lhs, rhs = _linearize(c.lhs), _linearize(c.rhs)
    if lhs is not None and rhs is not None:
        coeffs = dict(lhs[0])
        for k, v in rhs[0].items():
            coeffs[k] = coeffs.get(k, 0) - v
        coeffs = {k: v for k, v in coeffs.items() if v}
        _filter_linear(st, coeffs, lhs[1] - rhs[1], c.op)
        return
    # non-linear: forward interval check only
    if _definitely(c, st) is False:
        st.failed = True


def _definitely(c, st: _Store) -> Optional[bool]:
    """Three-valued truth of a constraint under current domains."""
    if isinstance(c, Cmp):
        try:
            llo, lhi = _ival(c.lhs, st.domains)
            rlo, rhi = _ival(c.rhs, st.domains)
        except KeyError:
            return None
        if c.op == "lt":
            return True if lhi < rlo else (False if llo >= rhi else None)
        if c.op == "leq":
            return True if lhi <= rlo else (False if llo > rhi else None)
        if c.op == "gt":
            return True if llo > rhi else (False if lhi <= rlo else None)
        if c.op == "geq":
            return True if llo >= rhi else (False if lhi < rlo else None)
        if c.op == "eq":
            if llo == lhi == rlo == rhi:
                return True
            return False if lhi < rlo or rhi < llo else None
        if c.op == "neq":
            if lhi < rlo or rhi < llo:
                return True
            return False if llo == lhi == rlo == rhi else None
    if isinstance(c, BoolExpr):
        vals = [_definitely(a, st) for a in c.args]
        if c.op == "not":
            return None if vals[0] is None else (not vals[0])
        if c.op == "or":
            if any(v is True for v in vals):
                return True
            return False if all(v is False for v in vals) else None
        if c.op == "and":
            if any(v is False for v in vals):
                return False
            return True if all(v is True for v in vals) else None
        if c.op == "xor":
            if None in vals:
                return None
            return vals[0] != vals[1]
        if c.op == "impl":
            if vals[0] is False or vals[1] is True:
                return True
            if vals[0] is True and vals[1] is False:
                return False
            return None
        if c.op == "iff":
            if None in vals:
                return None
            return vals[0] == vals[1]
    if isinstance(c, Global):
        if all(st.dom(n).fixed for n in vars_of(c)):
            return satisfied(c, {n: st.dom(n).lo for n in vars_of(c)})
        return None
    raise FdError(f"not a constraint: {c!r}")


def _require(st: _Store, c, want: bool) -> None:
    """Enforce c (or its negation): implication-based reified filtering."""
    if isinstance(c, Cmp):
        _filter_cmp(st, c if want else complement(c))
        return
    if isinstance(c, Global):
        if want:
            _filter_global(st, c)
        else:
            if _definitely(c, st) is True:
                st.failed = True
        return
    if isinstance(c, BoolExpr):
        op, args = c.op, c.args
        if op == "not":
            _require(st, args[0], not want)
            return
        conjunctive = (op == "and") if want else (op == "or")
        if conjunctive:
            for a in args:
                _require(st, a, want)
                if st.failed:
                    return
            return
        if op in ("or", "and"):
            # enforce the only undecided disjunct once the rest are refuted
            vals = [_definitely(a, st) for a in args]
            sat_val = want
            if any(v is sat_val for v in vals):
                return
            open_idx = [i for i, v in enumerate(vals) if v is None]
            if not open_idx:
                st.failed = True
                return
            if len(open_idx) == 1:
                _require(st, args[open_idx[0]], want)
            return
        if op == "impl":
            if want:
                va = _definitely(args[0], st)
                vb = _definitely(args[1], st)
                if va is True:
                    _require(st, args[1], True)
                elif vb is False:
                    _require(st, args[0], False)
            else:
                _require(st, args[0], True)
                if not st.failed:
                    _require(st, args[1], False)
            return
        if op in ("iff", "xor"):
            same = (op == "iff") == want
            va = _definitely(args[0], st)
            vb = _definitely(args[1], st)
            if va is not None and vb is None:
                _require(st, args[1], va if same else not va)
            elif vb is not None and va is None:
                _require(st, args[0], vb if same else not vb)
            elif va is not None and vb is not None:
                if (va == vb) != same:
                    st.failed = True
            return
    raise FdError(f"not a constraint: {c!r}")


# -- global-constraint filters ------------------------------------------------

def _term_vars(items) -> List[object]:
    return list(items)


def _filter_pairwise_diseq(st: _Store, names: List[object]) -> None:
    for i, a in enumerate(names):
        if not isinstance(a, VarRef):
            continue
        da = st.dom(a.name)
        if not da.fixed:
            continue
        for j, b in enumerate(names):
            if i == j:
                continue
            if isinstance(b, VarRef):
                st.remove(b.name, da.lo)
            if st.failed:
                return


def _filter_all_distinct(st: _Store, names: List[object]) -> None:
    _filter_pairwise_diseq(st, names)
    if st.failed:
        return
    doms = [(st.dom(v.name), v.name) for v in names if isinstance(v, VarRef)]
    bounds = sorted({d.lo for d, _ in doms} | {d.hi for d, _ in doms})
    for a in bounds:
        for b in bounds:
            if b < a:
                continue
            inside = [(d, n) for d, n in doms if a <= d.lo and d.hi <= b]
            cap = b - a + 1
            if len(inside) > cap:
                st.failed = True
                return
            if len(inside) == cap:
                for d, n in doms:
                    if (d, n) in inside:
                        continue
                    if a <= d.lo <= b:
                        st.set_min(n, b + 1)
                    if a <= d.hi <= b:
                        st.set_max(n, a - 1)
                    if st.failed:
                        return


def _filter_cumulative(st: _Store, starts, durs, ress, limit) -> None:
    if isinstance(limit, VarRef):
        lim_hi = st.dom(limit.name).hi
    else:
        lim_hi = eval_term(limit, {})
    jobs = []
    for s, d, r in zip(starts, durs, ress):
        if isinstance(s, VarRef):
            jobs.append((s.name, d, r))
    if not jobs:
        return

    def profile(exclude: Optional[str]) -> Dict[int, int]:
        prof: Dict[int, int] = {}
        for name, d, r in jobs:
            if name == exclude or d <= 0:
                continue
            sd = st.dom(name)
            for t in range(sd.hi, sd.lo + d):       # compulsory part
                prof[t] = prof.get(t, 0) + r
        return prof

    full = profile(None)
    peak = max(full.values(), default=0)
    if peak > lim_hi:
        st.failed = True
        return
    if isinstance(limit, VarRef):
        st.set_min(limit.name, peak)
        if st.failed:
            return

    for name, d, r in jobs:
        if d <= 0 or r <= 0:
            continue
        others = profile(name)
        sd = st.dom(name)
        # raise the earliest start past overloaded cells
        lo = sd.lo
        moved = True
        while moved and lo <= sd.hi:
            moved = False
            for t in range(lo, lo + d):
                if others.get(t, 0) + r > lim_hi:
                    lo = t + 1
                    moved = True
                    break
        st.set_min(name, lo)
        if st.failed:
            return
        sd = st.dom(name)
        hi = sd.hi
        moved = True
        while moved and hi >= sd.lo:
            moved = False
            for t in range(hi, hi + d):
                if others.get(t, 0) + r > lim_hi:
                    hi = t - d
                    moved = True
                    break
        st.set_max(name, hi)
        if st.failed:
            return


def _filter_global(st: _Store, g: Global) -> None:
    name, args = g.name, g.args
    if name == "all_different":
        _filter_pairwise_diseq(st, _term_vars(args[0]))
    elif name == "all_distinct":
        _filter_all_distinct(st, _term_vars(args[0]))
    elif name == "assignment":
        xs, ys = _term_vars(args[0]), _term_vars(args[1])
        n = len(xs)
        for v in xs + ys:
            if isinstance(v, VarRef):
                st.note(st.dom(v.name).intersect_range(1, n), v.name)
                if st.failed:
                    return
        for i, x in enumerate(xs):
            if isinstance(x, VarRef) and st.dom(x.name).fixed:
                j = st.dom(x.name).lo
                y = ys[j - 1]
                if isinstance(y, VarRef):
                    st.fix(y.name, i + 1)
                if st.failed:
                    return
        _filter_pairwise_diseq(st, xs)
        if not st.failed:
            _filter_pairwise_diseq(st, ys)
    elif name == "circuit":
        vs = _term_vars(args[0])
        n = len(vs)
        for i, v in enumerate(vs):
            if isinstance(v, VarRef):
                st.note(st.dom(v.name).intersect_range(1, n), v.name)
                if n > 1:
                    st.remove(v.name, i + 1)
                if st.failed:
                    return
        _filter_pairwise_diseq(st, vs)
        if st.failed or n <= 1:
            return
        # a closed chain of fixed successors shorter than n is a subtour
        succ = {}
        for i, v in enumerate(vs):
            if isinstance(v, VarRef) and st.dom(v.name).fixed:
                succ[i + 1] = st.dom(v.name).lo
        for start in succ:
            cur, steps = start, 0
            while cur in succ and steps <= n:
                cur = succ[cur]
                steps += 1
                if cur == start:
                    if steps < n:
                        st.failed = True
                    return
    elif name == "count":
        m, vs, op, target = args
        if isinstance(m, VarRef) and not st.dom(m.name).fixed:
            return
        mval = st.dom(m.name).lo if isinstance(m, VarRef) else eval_term(m, {})
        lower = upper = 0
        for v in vs:
            if isinstance(v, VarRef):
                d = st.dom(v.name)
                if d.contains(mval):
                    upper += 1
                    if d.fixed:
                        lower += 1
            elif eval_term(v, {}) == mval:
                lower += 1
                upper += 1
        if isinstance(target, VarRef):
            tlo, thi = st.dom(target.name).lo, st.dom(target.name).hi
        else:
            tlo = thi = eval_term(target, {})
        ok = any(_CMP_FUN[op](c, t)
                 for c in (lower, upper) for t in (tlo, thi)) or \
            any(_CMP_FUN[op](c, t)
                for c in range(lower, upper + 1) for t in (tlo, thi))
        if not ok:
            st.failed = True
            return
        if op == "eq" and tlo == thi:
            if lower == tlo:
                for v in vs:
                    if isinstance(v, VarRef) and not st.dom(v.name).fixed:
                        st.remove(v.name, mval)
                        if st.failed:
                            return
            elif upper == tlo:
                for v in vs:
                    if isinstance(v, VarRef) and st.dom(v.name).contains(mval) \
                            and not st.dom(v.name).fixed:
                        st.fix(v.name, mval)
                        if st.failed:
                            return
    elif name == "cumulative":
        _filter_cumulative(st, args[0], list(args[1]), list(args[2]), args[3])
    elif name == "serialized":
        starts = _term_vars(args[0])
        durs = list(args[1])
        _filter_cumulative(st, starts, durs, [1] * len(durs), IntConst(1))
    elif name == "disjoint2":
        xs, ws, ys, hs = (_term_vars(args[0]), list(args[1]),
                          _term_vars(args[2]), list(args[3]))
        n = len(xs)

        def rng(v):
            if isinstance(v, VarRef):
                d = st.dom(v.name)
                return d.lo, d.hi
            k = eval_term(v, {})
            return k, k

        for i in range(n):
            for j in range(i + 1, n):
                if min(ws[i], hs[i], ws[j], hs[j]) <= 0:
                    continue
                xi, xj = rng(xs[i]), rng(xs[j])
                yi, yj = rng(ys[i]), rng(ys[j])
                x_sep = xi[0] + ws[i] <= xj[1] or xj[0] + ws[j] <= xi[1]
                y_sep = yi[0] + hs[i] <= yj[1] or yj[0] + hs[j] <= yi[1]
                if not x_sep and not y_sep:
                    st.failed = True
                    return
    elif name == "element":
        idx, vs, tgt = args
        n = len(vs)
        if isinstance(idx, VarRef):
            st.note(st.dom(idx.name).intersect_range(1, n), idx.name)
            if st.failed:
                return
            d_idx = st.dom(idx.name)
        else:
            k = eval_term(idx, {})
            if not 1 <= k <= n:
                st.failed = True
                return
            d_idx = Domain(k, k)

        def t_rng(v):
            if isinstance(v, VarRef):
                d = st.dom(v.name)
                return d.lo, d.hi
            k = eval_term(v, {})
            return k, k

        tlo, thi = t_rng(tgt)
        if isinstance(idx, VarRef):
            for i in list(d_idx.values()):
                vlo, vhi = t_rng(vs[i - 1])
                if vhi < tlo or vlo > thi:
                    st.remove(idx.name, i)
                    if st.failed:
                        return
            d_idx = st.dom(idx.name)
        if d_idx.fixed:
            i = d_idx.lo
            v = vs[i - 1]
            if isinstance(v, VarRef):
                st.set_min(v.name, tlo)
                st.set_max(v.name, thi)
                if st.failed:
                    return
                vlo, vhi = t_rng(v)
            else:
                vlo, vhi = t_rng(v)
            if isinstance(tgt, VarRef):
                st.set_min(tgt.name, vlo)
                st.set_max(tgt.name, vhi)
        else:
            lows, highs = [], []
            for i in d_idx.values():
                vlo, vhi = t_rng(vs[i - 1])
                lows.append(vlo)
                highs.append(vhi)
            if lows and isinstance(tgt, VarRef):
                st.set_min(tgt.name, min(lows))
                st.set_max(tgt.name, max(highs))
    elif name in ("minimum", "maximum"):
        m, vs = args

        def t_rng(v):
            if isinstance(v, VarRef):
                d = st.dom(v.name)
                return d.lo, d.hi
            k = eval_term(v, {})
            return k, k

        rngs = [t_rng(v) for v in vs]
        if not rngs:
            st.failed = True
            return
        if name == "minimum":
            mlo, mhi = min(r[0] for r in rngs), min(r[1] for r in rngs)
        else:
            mlo, mhi = max(r[0] for r in rngs), max(r[1] for r in rngs)
        if isinstance(m, VarRef):
            st.set_min(m.name, mlo)
            st.set_max(m.name, mhi)
            if st.failed:
                return
            cur = st.dom(m.name)
            mval_lo, mval_hi = cur.lo, cur.hi
        else:
            mval_lo = mval_hi = eval_term(m, {})
            if not mlo <= mval_lo <= mhi:
                st.failed = True
                return
        for v in vs:
            if isinstance(v, VarRef):
                if name == "minimum":
                    st.set_min(v.name, mval_lo)
                else:
                    st.set_max(v.name, mval_hi)
                if st.failed:
                    return
    elif name in ("sum", "scalar_product"):
        if name == "sum":
            vs, op, target = args
            coeffs_in = [(1, v) for v in vs]
        else:
            cs, vs, op, target = args
            coeffs_in = list(zip([eval_term(c, {}) for c in cs], vs))
        coeffs: Dict[str, int] = {}
        const = 0
        for c, v in coeffs_in:
            if isinstance(v, VarRef):
                coeffs[v.name] = coeffs.get(v.name, 0) + c
            else:
                const += c * eval_term(v, {})
        if isinstance(target, VarRef):
            coeffs[target.name] = coeffs.get(target.name, 0) - 1
        else:
            const -= eval_term(target, {})
        _filter_linear(st, {k: v for k, v in coeffs.items() if v}, const, op)
    else:
        raise FdError(f"unknown global constraint {name!r}")


def propagate(csp: CSPInstance) -> bool:
    """Filter all constraints to mutual fixpoint; False on inconsistency.

    Never removes a value that belongs to a solution; reports inconsistency
    only when some domain empties or a constraint is interval-refuted.
    """
    st = _Store(csp.domains)
    if any(d.empty for d in csp.domains.values()):
        return False
    while True:
        st.changed = False
        for c in csp.constraints:
            if isinstance(c, Cmp):
                _filter_cmp(st, c)
            elif isinstance(c, BoolExpr):
                if _definitely(c, st) is False:
                    st.failed = True
                else:
                    _require(st, c, True)
            elif isinstance(c, Global):
                _filter_global(st, c)
            else:
                raise FdError(f"not a constraint: {c!r}")
            if st.failed:
                return False
        if not st.changed:
            return True


# ---------------------------------------------------------------------------
# Search
# ---------------------------------------------------------------------------

def solve(csp: CSPInstance, limit: Optional[int] = None
          ) -> Tuple[List[Dict[str, int]], bool]:
    """Backtracking search with propagation at every node.

    Returns (solutions, exhausted).  `limit` caps the number of solutions
    (None = enumerate all); `exhausted` is True iff the search tree was fully
    explored, so an empty solution list with exhausted=True means UNSAT.
    Solutions come in labeling order: leftmost variable in declaration order,
    ascending values, binary x=v / x!=v branching.
    """
    work = csp.copy()
    solutions: List[Dict[str, int]] = []

    def leaf_ok(inst: CSPInstance) -> bool:
        e = inst.evaluation()
        return all(satisfied(c, e) for c in inst.constraints)

    def descend(inst: CSPInstance) -> bool:
        """DFS with binary x=v / x!=v branching; the x!=v spine is iterated
        in place so recursion depth is bounded by the variable count.
        Returns False when the solution limit was hit."""
        while True:
            if not propagate(inst):
                return True
            unf = next((n for n in inst.var_order
                        if not inst.domains[n].fixed), None)
            if unf is None:
                if leaf_ok(inst):
                    solutions.append(inst.evaluation())
                    if limit is not None and len(solutions) >= limit:
                        return False
                return True
            v = inst.domains[unf].lo
            left = inst.copy()
            left.domains[unf].fix(v)
            if not descend(left):
                return False
            inst.domains[unf].remove(v)

    exhausted = descend(work)
    return solutions, exhausted


def feasible(csp: CSPInstance) -> bool:
    sols, _ = solve(csp, limit=1)
    return bool(sols)


# ---------------------------------------------------------------------------
# csp-abstractions of CA programs
# ---------------------------------------------------------------------------

def build_csp(program, m_literals: Iterable[int], semantics: str = "weak"
              ) -> CSPInstance:
    """The CSP induced by the constraint literals of M.

    weak: post gamma(c) for positive constraint literals only; full:
    additionally post complement(gamma(c)) for each negative constraint
    literal.  Variables are the active declarations (declaration atom true in
    M, or unconditional) plus any variable referenced by a posted constraint;
    a variable's range is the program domain intersected with every active
    declaration for it.

    Raises ComplementUnsupported under full semantics when a negated literal
    maps to a global constraint or reified formula.
    """
    if semantics not in ("weak", "full"):
        raise ValueError(f"unknown semantics {semantics!r}")
    m_set = set(m_literals)
    pos_atoms = {l - 1 for l in m_set if l > 0}
    neg_atoms = {-l - 1 for l in m_set if l < 0}

    posted = []
    for cid in program.constraint_order:
        if cid in pos_atoms:
            posted.append(program.gamma[cid])
        elif semantics == "full" and cid in neg_atoms:
            posted.append(complement(program.gamma[cid]))

    inst = CSPInstance()
    lo, hi = program.domain
    for decl in program.var_decls:
        if decl.atom is None or decl.atom in pos_atoms:
            dlo = lo if decl.lo is None else max(lo, decl.lo)
            dhi = hi if decl.hi is None else min(hi, decl.hi)
            inst.add_var(decl.var, dlo, dhi)
    for c in posted:
        for v in sorted(vars_of(c)):
            if v not in inst.domains:
                inst.add_var(v, lo, hi)
        inst.post(c)
    return inst
