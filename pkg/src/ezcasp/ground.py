"""Grounder and CA-program construction.

`ground` instantiates non-constraint variables bottom-up: substitutions are
driven by domain predicates (relations whose atoms are all definitively
derivable facts) and `Var = arithmetic` bindings, built-ins are evaluated and
eliminated, and positive atoms over non-factual relations are kept in the
instances regardless of derivability (they restrict only variables nothing
else binds).  `expand_lists` replaces intensional lists by their extensional
representation; `to_ca_program` maps the ground program to a CA program:
constraint-variable declarations, one constraint atom per distinct
required-argument with its constraint expression, and the two linking
denials per required atom.

Safety: every variable of a rule must be bound by a positive non-builtin body
atom or, transitively, by a `Var = arithmetic` built-in over bound variables.
Choice-element and aggregate-item conditions bind their local variables by
matching established facts.

Everything is a pure transformation over immutable inputs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple, Union

from . import fd
from .asp import RegularProgram
from .lang import (
    AggregateLit, Atom, BuiltinLit, Choice, ChoiceElem, Compound, Const,
    EzProgram, IntensionalList, Lit, ListTerm, OpExpr, RangeTerm, Rule,
    SourcePos, Term, Var, CMP_OPS, GLOBAL_CONSTRAINTS, display_op, parse,
    preprocess,
)

__all__ = [
    "GroundError", "VariableDecl", "CAProgram",
    "ground", "expand_lists", "collect_var_decls", "to_ca_program",
    "ground_program", "canon_term", "canon_atom", "term_key", "display_term",
    "display_atom", "DEFAULT_FD_RANGE",
]

DEFAULT_FD_RANGE = (0, 2 ** 20)

_MAX_POSSIBLE_ATOMS = 200_000
_MAX_CHOICE_COMBOS = 5_000

_ARITH_FUNCTORS = {"plus", "minus", "times", "div", "neg"}
_CMP_FUNCTORS = {"lt", "leq", "gt", "geq", "eq", "neq"}
_LOGIC_FUNCTORS = {"or", "and", "xor", "impl", "iff", "not"}


class GroundError(Exception):
    def __init__(self, msg: str, pos: Optional[SourcePos] = None):
        self.pos = pos
        super().__init__(f"{pos}: {msg}" if pos else msg)


# ---------------------------------------------------------------------------
# Ground-term utilities
# ---------------------------------------------------------------------------

def term_key(t: Term):
    """Lexicographic term order: integers numerically, then symbolic
    constants by name, then compounds by (functor, arity, args)."""
    if isinstance(t, Const):
        if isinstance(t.value, int):
            return (0, t.value)
        return (1, t.value)
    if isinstance(t, Compound):
        return (2, t.functor, len(t.args), tuple(term_key(a) for a in t.args))
    if isinstance(t, ListTerm):
        return (3, len(t.items), tuple(term_key(a) for a in t.items))
    raise GroundError(f"no order for non-ground term {t!r}")


def canon_term(t: Term) -> str:
    if isinstance(t, Const):
        return str(t.value)
    if isinstance(t, Compound):
        return f"{t.functor}({','.join(canon_term(a) for a in t.args)})"
    if isinstance(t, ListTerm):
        return f"[{','.join(canon_term(a) for a in t.items)}]"
    if isinstance(t, IntensionalList):
        inner = t.name
        if t.prefix:
            inner += f"({','.join(canon_term(a) for a in t.prefix)})"
        return f"[{inner}/{t.arity}]"
    raise GroundError(f"cannot intern non-ground term {t!r}")


def canon_atom(a: Atom) -> str:
    if not a.args:
        return a.rel
    return f"{a.rel}({','.join(canon_term(t) for t in a.args)})"


def _restore_ops(t: Term) -> Term:
    """Map canonical operator functors back to surface operators for display."""
    if isinstance(t, Compound):
        args = tuple(_restore_ops(a) for a in t.args)
        if t.functor == "neg" and len(args) == 1:
            if isinstance(args[0], Const) and isinstance(args[0].value, int):
                return Const(-args[0].value)
            return OpExpr("-", args)
        if t.functor == "not" and len(args) == 1:
            return OpExpr("!", args)
        op = display_op(t.functor)
        if op is not None and len(args) == 2:
            return OpExpr(op, args)
        return Compound(t.functor, args)
    if isinstance(t, ListTerm):
        return ListTerm(tuple(_restore_ops(a) for a in t.items))
    return t


def display_term(t: Term) -> str:
    from .lang import _print_term
    return _print_term(_restore_ops(t))


def display_atom(a: Atom) -> str:
    if not a.args:
        return a.rel
    return f"{a.rel}({','.join(display_term(t) for t in a.args)})"


def _is_ground(t: Term) -> bool:
    if isinstance(t, Var):
        return False
    if isinstance(t, (Compound, OpExpr)):
        return all(_is_ground(a) for a in t.args)
    if isinstance(t, ListTerm):
        return all(_is_ground(a) for a in t.items)
    if isinstance(t, IntensionalList):
        return all(_is_ground(a) for a in t.prefix)
    if isinstance(t, RangeTerm):
        return _is_ground(t.lo) and _is_ground(t.hi)
    return True


def _subst(t: Term, env: Dict[str, Term]) -> Term:
    if isinstance(t, Var):
        if t.name in env:
            return env[t.name]
        return t
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(_subst(a, env) for a in t.args))
    if isinstance(t, OpExpr):
        return OpExpr(t.op, tuple(_subst(a, env) for a in t.args))
    if isinstance(t, ListTerm):
        return ListTerm(tuple(_subst(a, env) for a in t.items))
    if isinstance(t, IntensionalList):
        return IntensionalList(t.name, tuple(_subst(a, env) for a in t.prefix),
                               t.arity)
    if isinstance(t, RangeTerm):
        return RangeTerm(_subst(t.lo, env), _subst(t.hi, env))
    return t


def _eval_term(t: Term, pos: Optional[SourcePos] = None) -> Term:
    """Evaluate built-in arithmetic in a ground term; OpExpr nodes must
    reduce to integers."""
    if isinstance(t, OpExpr):
        args = [_eval_term(a, pos) for a in t.args]
        vals = []
        for a in args:
            if not (isinstance(a, Const) and isinstance(a.value, int)):
                raise GroundError(f"arithmetic on non-integer term "
                                  f"{display_term(a)}", pos)
            vals.append(a.value)
        if t.op == "-" and len(vals) == 1:
            return Const(-vals[0])
        a, b = vals[0], vals[1]
        if t.op == "+":
            return Const(a + b)
        if t.op == "-":
            return Const(a - b)
        if t.op == "*":
            return Const(a * b)
        if t.op == "/":
            if b == 0:
                raise GroundError("division by zero in built-in arithmetic",
                                  pos)
            q = abs(a) // abs(b)
            return Const(q if (a >= 0) == (b >= 0) else -q)
        raise GroundError(f"unknown arithmetic operator {t.op!r}", pos)
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(_eval_term(a, pos) for a in t.args))
    if isinstance(t, ListTerm):
        return ListTerm(tuple(_eval_term(a, pos) for a in t.items))
    if isinstance(t, IntensionalList):
        return IntensionalList(t.name,
                               tuple(_eval_term(a, pos) for a in t.prefix),
                               t.arity)
    if isinstance(t, RangeTerm):
        return RangeTerm(_eval_term(t.lo, pos), _eval_term(t.hi, pos))
    return t


def _int_of(t: Term, what: str, pos: Optional[SourcePos] = None) -> int:
    t = _eval_term(t, pos)
    if isinstance(t, Const) and isinstance(t.value, int):
        return t.value
    raise GroundError(f"{what} must be an integer, got {display_term(t)}", pos)


def _vars_in(t: Term) -> Set[str]:
    out: Set[str] = set()

    def walk(x: Term) -> None:
        if isinstance(x, Var):
            out.add(x.name)
        elif isinstance(x, (Compound, OpExpr)):
            for a in x.args:
                walk(a)
        elif isinstance(x, ListTerm):
            for a in x.items:
                walk(a)
        elif isinstance(x, IntensionalList):
            for a in x.prefix:
                walk(a)
        elif isinstance(x, RangeTerm):
            walk(x.lo)
            walk(x.hi)

    walk(t)
    return out


def _atom_vars(a: Atom) -> Set[str]:
    out: Set[str] = set()
    for t in a.args:
        out |= _vars_in(t)
    return out


def _match(pattern: Term, value: Term, env: Dict[str, Term]) -> Optional[Dict[str, Term]]:
    """Structural unification of a body pattern against a ground term.
    Arithmetic subterms of the pattern are evaluated when already bound."""
    pattern = _subst(pattern, env)
    if isinstance(pattern, OpExpr):
        if not _is_ground(pattern):
            return None
        pattern = _eval_term(pattern)
    if isinstance(pattern, Var):
        env = dict(env)
        env[pattern.name] = value
        return env
    if isinstance(pattern, Const):
        return env if pattern == value else None
    if isinstance(pattern, Compound) and isinstance(value, Compound):
        if pattern.functor != value.functor or len(pattern.args) != len(value.args):
            return None
        for p, v in zip(pattern.args, value.args):
            nxt = _match(p, v, env)
            if nxt is None:
                return None
            env = nxt
        return env
    return None


# ---------------------------------------------------------------------------
# Grounding
# ---------------------------------------------------------------------------

def _expand_head_ranges(a: Atom, pos: Optional[SourcePos]) -> List[Atom]:
    """Expand RangeTerm arguments of a ground head atom into instances."""
    slots: List[List[Term]] = []
    for t in a.args:
        t = _eval_term(t, pos)
        if isinstance(t, RangeTerm):
            lo = _int_of(t.lo, "range bound", pos)
            hi = _int_of(t.hi, "range bound", pos)
            slots.append([Const(v) for v in range(lo, hi + 1)])
        else:
            slots.append([t])
    return [Atom(a.rel, combo) for combo in itertools.product(*slots)]


@dataclass
class _Plan:
    steps: List[Tuple[str, object]]


def _plan_rule(r: Rule, domain_rels: Set[Tuple[str, int]],
               facts_mode: bool = False) -> _Plan:
    """Order body elements so each is evaluable when reached.

    Substitutions are driven by domain predicates (relations whose atoms are
    all established facts) and `Var = arithmetic` bindings; a positive atom
    over a non-domain relation restricts the instantiation only when it still
    carries unbound variables (then it is matched against the possible
    atoms), matching the instantiation shown in the grounding examples where
    non-factual body atoms are kept regardless of derivability.  In
    facts_mode every positive atom must match an established fact.
    """
    remaining = list(r.body)
    bound: Set[str] = set()
    steps: List[Tuple[str, object]] = []

    def take(i: int, step: Tuple[str, object]) -> None:
        steps.append(step)
        del remaining[i]

    while remaining:
        progressed = False
        # 1) domain-predicate matches (facts restrict the substitution)
        for i, b in enumerate(remaining):
            if isinstance(b, Lit) and b.kind == "pos" and \
                    (facts_mode or
                     (b.atom.rel, len(b.atom.args)) in domain_rels):
                take(i, ("match_fact", b.atom))
                bound |= _atom_vars(b.atom)
                progressed = True
                break
        if progressed:
            continue
        # 2) built-ins, negative literals and aggregates once bound
        for i, b in enumerate(remaining):
            if isinstance(b, BuiltinLit):
                lv, rv = _vars_in(b.lhs), _vars_in(b.rhs)
                if lv | rv <= bound:
                    take(i, ("test", b))
                    progressed = True
                    break
                if b.op == "=" and isinstance(b.lhs, Var) \
                        and b.lhs.name not in bound and rv <= bound:
                    take(i, ("bind", (b.lhs.name, b.rhs)))
                    bound.add(b.lhs.name)
                    progressed = True
                    break
                if b.op == "=" and isinstance(b.rhs, Var) \
                        and b.rhs.name not in bound and lv <= bound:
                    take(i, ("bind", (b.rhs.name, b.lhs)))
                    bound.add(b.rhs.name)
                    progressed = True
                    break
            elif isinstance(b, Lit) and b.kind in ("not", "notnot"):
                if _atom_vars(b.atom) <= bound:
                    take(i, ("neg", b))
                    progressed = True
                    break
            elif isinstance(b, AggregateLit):
                outer: Set[str] = set()
                for bnd in (b.lower, b.upper):
                    if bnd is not None:
                        outer |= _vars_in(bnd)
                if outer <= bound:
                    take(i, ("agg", b))
                    progressed = True
                    break
        if progressed:
            continue
        # 3) non-domain positive atoms: fully bound instances are kept
        #    without restricting; unbound variables fall back to matching
        #    the possible atoms
        for i, b in enumerate(remaining):
            if isinstance(b, Lit) and b.kind == "pos":
                if _atom_vars(b.atom) <= bound:
                    take(i, ("emit", b.atom))
                else:
                    take(i, ("match_possible", b.atom))
                    bound |= _atom_vars(b.atom)
                progressed = True
                break
        if not progressed:
            loose = set()
            for b in remaining:
                if isinstance(b, Lit):
                    loose |= _atom_vars(b.atom)
                elif isinstance(b, BuiltinLit):
                    loose |= _vars_in(b.lhs) | _vars_in(b.rhs)
            offender = sorted(loose - bound)
            raise GroundError(
                f"unsafe rule: variable {offender[0] if offender else '?'} "
                f"cannot be bound", r.pos)

    head_vars: Set[str] = set()
    if isinstance(r.head, Atom):
        head_vars = _atom_vars(r.head)
    elif isinstance(r.head, Choice):
        for bnd in (r.head.lower, r.head.upper):
            if bnd is not None:
                head_vars |= _vars_in(bnd)
        for e in r.head.elems:
            cond_vars: Set[str] = set()
            for c in e.conds:
                cond_vars |= _atom_vars(c)
            # element variables not bound by the local conditions are global
            head_vars |= (_atom_vars(e.atom) - cond_vars)
    unsafe = head_vars - bound
    if unsafe:
        raise GroundError(f"unsafe rule: head variable {sorted(unsafe)[0]} "
                          f"cannot be bound", r.pos)
    return _Plan(steps)


class _GroundState:
    def __init__(self) -> None:
        # (rel, arity) -> insertion-ordered canonical-key -> ground Atom
        self.possible: Dict[Tuple[str, int], Dict[str, Atom]] = {}
        self.fact_atoms: Dict[Tuple[str, int], Dict[str, Atom]] = {}
        self.facts: Set[str] = set()
        self.count = 0

    def add(self, a: Atom, fact: bool) -> bool:
        key = (a.rel, len(a.args))
        bucket = self.possible.setdefault(key, {})
        c = canon_atom(a)
        new = c not in bucket
        if new:
            bucket[c] = a
            self.count += 1
            if self.count > _MAX_POSSIBLE_ATOMS:
                raise GroundError("grounding did not converge "
                                  "(possible-atom bound exceeded)")
        changed = new
        if fact and c not in self.facts:
            self.facts.add(c)
            self.fact_atoms.setdefault(key, {})[c] = a
            changed = True
        return changed

    def lookup(self, rel: str, arity: int) -> List[Atom]:
        return list(self.possible.get((rel, arity), {}).values())

    def lookup_facts(self, rel: str, arity: int) -> List[Atom]:
        return list(self.fact_atoms.get((rel, arity), {}).values())

    def is_fact(self, a: Atom) -> bool:
        return canon_atom(a) in self.facts

    def in_possible(self, a: Atom) -> bool:
        return canon_atom(a) in self.possible.get((a.rel, len(a.args)), {})


def _test_builtin(b: BuiltinLit, env: Dict[str, Term],
                  pos: Optional[SourcePos]) -> bool:
    lhs = _eval_term(_subst(b.lhs, env), pos)
    rhs = _eval_term(_subst(b.rhs, env), pos)
    op = b.op
    if isinstance(lhs, Const) and isinstance(lhs.value, int) and \
            isinstance(rhs, Const) and isinstance(rhs.value, int):
        a, c = lhs.value, rhs.value
    else:
        if op in ("=", "!="):
            return (lhs == rhs) if op == "=" else (lhs != rhs)
        a, c = term_key(lhs), term_key(rhs)     # total order on ground terms
    return {"=": a == c, "!=": a != c, "<": a < c, "<=": a <= c,
            "=<": a <= c, ">": a > c, ">=": a >= c}[op]


def _instantiate(rule: Rule, plan: _Plan, state: _GroundState):
    """Yield every substitution admitted by the plan."""

    def walk(i: int, env: Dict[str, Term]):
        if i == len(plan.steps):
            yield env
            return
        kind, payload = plan.steps[i]
        if kind in ("match_fact", "match_possible"):
            pat: Atom = payload
            source = state.lookup_facts if kind == "match_fact" \
                else state.lookup
            for cand in source(pat.rel, len(pat.args)):
                nxt = env
                ok = True
                for p, v in zip(pat.args, cand.args):
                    res = _match(p, v, nxt)
                    if res is None:
                        ok = False
                        break
                    nxt = res
                if ok:
                    yield from walk(i + 1, nxt)
        elif kind == "emit":
            yield from walk(i + 1, env)
        elif kind == "bind":
            name, expr = payload
            val = _eval_term(_subst(expr, env), rule.pos)
            nxt = dict(env)
            nxt[name] = val
            yield from walk(i + 1, nxt)
        elif kind == "test":
            if _test_builtin(payload, env, rule.pos):
                yield from walk(i + 1, env)
        elif kind == "neg":
            yield from walk(i + 1, env)
        elif kind == "agg":
            if _eval_aggregate(payload, env, state, rule.pos):
                yield from walk(i + 1, env)
        else:
            raise AssertionError(kind)

    yield from walk(0, {})


def _eval_aggregate(agg: AggregateLit, env: Dict[str, Term],
                    state: _GroundState, pos: Optional[SourcePos]) -> bool:
    total = 0
    for item in agg.items:
        for ienv in _expand_conditions(item.conds, env, state, pos):
            a = Atom(item.atom.rel,
                     tuple(_eval_term(_subst(t, ienv), pos)
                           for t in item.atom.args))
            if not _is_ground_atom(a):
                raise GroundError("aggregate member not ground", pos)
            if state.is_fact(a):
                w = 1 if item.weight is None else \
                    _int_of(_subst(item.weight, ienv), "aggregate weight", pos)
                total += w
            elif state.in_possible(a):
                raise GroundError(
                    f"aggregate over non-factual atom {canon_atom(a)}", pos)
    if agg.lower is not None and \
            total < _int_of(_subst(agg.lower, env), "aggregate bound", pos):
        return False
    if agg.upper is not None and \
            total > _int_of(_subst(agg.upper, env), "aggregate bound", pos):
        return False
    return True


def _is_ground_atom(a: Atom) -> bool:
    return all(_is_ground(t) for t in a.args)


def _expand_conditions(conds: Sequence[Atom], env: Dict[str, Term],
                       state: _GroundState, pos: Optional[SourcePos]):
    """Substitutions extending env that make all condition atoms established
    facts."""
    if not conds:
        yield env
        return
    first, rest = conds[0], conds[1:]
    for cand in state.lookup_facts(first.rel, len(first.args)):
        nxt = env
        ok = True
        for p, v in zip(first.args, cand.args):
            res = _match(p, v, nxt)
            if res is None:
                ok = False
                break
            nxt = res
        if ok:
            yield from _expand_conditions(rest, nxt, state, pos)


def _reject_required_in_bodies(p: EzProgram) -> None:
    for r in p.rules:
        for b in r.body:
            if isinstance(b, Lit) and b.atom.rel == "required":
                raise GroundError(
                    "required-atoms may only occur in rule heads", r.pos)
            if isinstance(b, AggregateLit):
                for item in b.items:
                    if item.atom.rel == "required" or any(
                            c.rel == "required" for c in item.conds):
                        raise GroundError(
                            "required-atoms may only occur in rule heads",
                            r.pos)
        if isinstance(r.head, Choice):
            for e in r.head.elems:
                if e.atom.rel == "required":
                    raise GroundError(
                        "required not allowed in choice heads", r.pos)
                if any(c.rel == "required" for c in e.conds):
                    raise GroundError(
                        "required-atoms may only occur in rule heads", r.pos)


def _domain_relations(p: EzProgram) -> Set[Tuple[str, int]]:
    """Relations whose atoms are all derivable definitively: at least one
    defining rule, no choice heads, no negation, and positive bodies over
    domain relations only.  Relations never occurring in a head have no
    extension and do not restrict instantiation."""
    heads_of: Dict[Tuple[str, int], List[Rule]] = {}
    for r in p.rules:
        heads = [r.head] if isinstance(r.head, Atom) else \
            [e.atom for e in r.head.elems] if isinstance(r.head, Choice) else []
        for h in heads:
            key = (h.rel, len(h.args))
            heads_of.setdefault(key, []).append(r)
    domain = set(heads_of)
    changed = True
    while changed:
        changed = False
        for key, rules in heads_of.items():
            if key not in domain:
                continue
            for r in rules:
                bad = isinstance(r.head, Choice)
                for b in r.body:
                    if isinstance(b, Lit):
                        if b.kind != "pos":
                            bad = True
                        elif (b.atom.rel, len(b.atom.args)) not in domain:
                            bad = True
                    elif isinstance(b, AggregateLit):
                        bad = True
                if bad:
                    domain.discard(key)
                    changed = True
                    break
    return domain


def _compute_facts(p: EzProgram, state: _GroundState,
                   domain_rels: Set[Tuple[str, int]]) -> None:
    """Least fixpoint of definite rules: plain atom head, no negation, no
    aggregates, positive body atoms matched against established facts."""
    definite = []
    for r in p.rules:
        if not isinstance(r.head, Atom):
            continue
        if any(isinstance(b, Lit) and b.kind in ("not", "notnot")
               for b in r.body):
            continue
        if any(isinstance(b, AggregateLit) for b in r.body):
            continue
        definite.append((r, _plan_rule(r, domain_rels, facts_mode=True)))
    changed = True
    while changed:
        changed = False
        for rule, plan in definite:
            for env in _instantiate(rule, plan, state):
                a = Atom(rule.head.rel,
                         tuple(_subst(t, env) for t in rule.head.args))
                for inst in _expand_head_ranges(a, rule.pos):
                    changed |= state.add(inst, fact=True)


def ground(p: EzProgram) -> EzProgram:
    """Naive bottom-up instantiation; built-ins evaluated and eliminated.

    Substitutions are restricted by domain predicates (and by non-factual
    atoms only where they bind otherwise-unbound variables); emitted rules
    keep their instantiated bodies intact.  Output rules contain only ground
    atoms and ground not/not-not literals; choice heads keep their (now
    integer) bounds with expanded elements.  Intensional lists are left
    untouched (see expand_lists).
    """
    _reject_required_in_bodies(p)
    domain_rels = _domain_relations(p)

    # choice-element and aggregate-item conditions must be factual
    for r in p.rules:
        conds = []
        if isinstance(r.head, Choice):
            for e in r.head.elems:
                conds.extend(e.conds)
        for b in r.body:
            if isinstance(b, AggregateLit):
                for item in b.items:
                    conds.extend(item.conds)
        for c in conds:
            if (c.rel, len(c.args)) not in domain_rels:
                raise GroundError(
                    f"condition over non-factual relation {c.rel}/"
                    f"{len(c.args)}", r.pos)

    state = _GroundState()
    _compute_facts(p, state, domain_rels)

    plans = [(r, _plan_rule(r, domain_rels)) for r in p.rules]

    # possible-atom fixpoint
    changed = True
    while changed:
        changed = False
        for rule, plan in plans:
            for env in _instantiate(rule, plan, state):
                if isinstance(rule.head, Atom):
                    a = Atom(rule.head.rel,
                             tuple(_subst(t, env) for t in rule.head.args))
                    for inst in _expand_head_ranges(a, rule.pos):
                        changed |= state.add(inst, fact=False)
                elif isinstance(rule.head, Choice):
                    for elem in rule.head.elems:
                        for cenv in _expand_conditions(elem.conds, env, state,
                                                       rule.pos):
                            a = Atom(elem.atom.rel,
                                     tuple(_subst(t, cenv)
                                           for t in elem.atom.args))
                            for inst in _expand_head_ranges(a, rule.pos):
                                changed |= state.add(inst, fact=False)

    # emission
    out: List[Rule] = []
    seen: Set[str] = set()
    for rule, plan in plans:
        for env in _instantiate(rule, plan, state):
            body: List[Lit] = []
            for b in rule.body:
                if isinstance(b, Lit):
                    a = Atom(b.atom.rel,
                             tuple(_eval_term(_subst(t, env), rule.pos)
                                   for t in b.atom.args))
                    body.append(Lit(b.kind, a))
            heads: List[Union[None, Atom, Choice]] = []
            if rule.head is None:
                heads.append(None)
            elif isinstance(rule.head, Atom):
                a = Atom(rule.head.rel,
                         tuple(_subst(t, env) for t in rule.head.args))
                heads.extend(_expand_head_ranges(a, rule.pos))
            else:
                ch = rule.head
                elems: List[ChoiceElem] = []
                added: Set[str] = set()
                for elem in ch.elems:
                    for cenv in _expand_conditions(elem.conds, env, state,
                                                   rule.pos):
                        a = Atom(elem.atom.rel,
                                 tuple(_eval_term(_subst(t, cenv), rule.pos)
                                       for t in elem.atom.args))
                        for inst in _expand_head_ranges(a, rule.pos):
                            c = canon_atom(inst)
                            if c not in added:
                                added.add(c)
                                elems.append(ChoiceElem(inst, ()))
                lower = None if ch.lower is None else \
                    Const(_int_of(_subst(ch.lower, env), "choice bound",
                                  rule.pos))
                upper = None if ch.upper is None else \
                    Const(_int_of(_subst(ch.upper, env), "choice bound",
                                  rule.pos))
                if lower is not None and upper is not None and \
                        lower.value > upper.value:
                    raise GroundError("choice bounds violate lower <= upper",
                                      rule.pos)
                heads.append(Choice(lower, tuple(elems), upper))
            for h in heads:
                gr = Rule(h, tuple(body), rule.pos)
                key = _rule_canon(gr)
                if key not in seen:
                    seen.add(key)
                    out.append(gr)
    return EzProgram(tuple(out))


def _rule_canon(r: Rule) -> str:
    if r.head is None:
        h = ""
    elif isinstance(r.head, Atom):
        h = canon_atom(r.head)
    else:
        lo = "" if r.head.lower is None else canon_term(r.head.lower)
        hi = "" if r.head.upper is None else canon_term(r.head.upper)
        h = lo + "{" + ";".join(sorted(canon_atom(e.atom)
                                       for e in r.head.elems)) + "}" + hi
    b = ",".join(f"{x.kind}:{canon_atom(x.atom)}"
                 for x in r.body if isinstance(x, Lit))
    return h + ":-" + b


# ---------------------------------------------------------------------------
# Intensional-list expansion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VariableDecl:
    """A cspvar declaration: the declaring ground atom, the variable term,
    and its optional range."""
    atom: str
    var_term: Term
    lo: Optional[int]
    hi: Optional[int]

    @property
    def var(self) -> str:
        return canon_term(self.var_term)


def collect_var_decls(p: EzProgram) -> List[VariableDecl]:
    """All cspvar declarations in head position, in program order."""
    decls: List[VariableDecl] = []
    seen: Set[str] = set()
    for r in p.rules:
        heads = [r.head] if isinstance(r.head, Atom) else \
            [e.atom for e in r.head.elems] if isinstance(r.head, Choice) else []
        for h in heads:
            if h.rel != "cspvar":
                continue
            if isinstance(r.head, Choice):
                raise GroundError("cspvar not allowed in choice heads", r.pos)
            vt = h.args[0]
            if isinstance(vt, Const) and isinstance(vt.value, int):
                raise GroundError("constraint variable cannot be an integer",
                                  r.pos)
            lo = hi = None
            if len(h.args) == 3:
                lo = _int_of(h.args[1], "cspvar lower bound", r.pos)
                hi = _int_of(h.args[2], "cspvar upper bound", r.pos)
                if lo > hi:
                    raise GroundError(
                        f"cspvar range violates lower <= upper: "
                        f"{display_atom(h)}", r.pos)
            key = display_atom(h)
            if key not in seen:
                seen.add(key)
                decls.append(VariableDecl(key, vt, lo, hi))
    return decls


def expand_lists(p: EzProgram, decls: Sequence[VariableDecl]
                 ) -> Tuple[EzProgram, List[str]]:
    """Replace intensional lists in required-arguments by extensional lists.

    ``[f(t..)/k]`` over variables expands to the lexicographically ordered
    declared variables with functor f, arity k and the given prefix;
    ``[r(t..)/k]`` over a relation expands to the k-th arguments of the
    matching facts in lexicographic fact order.  Returns the rewritten
    program and a list of warnings for empty expansions.
    """
    var_terms = [d.var_term for d in decls]
    var_functors = {(t.functor, len(t.args)) for t in var_terms
                    if isinstance(t, Compound)}

    facts_by_rel: Dict[Tuple[str, int], List[Atom]] = {}
    rels: Set[Tuple[str, int]] = set()
    for r in p.rules:
        heads = [r.head] if isinstance(r.head, Atom) else \
            [e.atom for e in r.head.elems] if isinstance(r.head, Choice) else []
        for h in heads:
            rels.add((h.rel, len(h.args)))
            if r.is_fact and isinstance(r.head, Atom):
                facts_by_rel.setdefault((h.rel, len(h.args)), []).append(h)
        for b in r.body:
            if isinstance(b, Lit):
                rels.add((b.atom.rel, len(b.atom.args)))

    warnings: List[str] = []

    def lam(t: Term, pos: Optional[SourcePos]) -> Term:
        if isinstance(t, IntensionalList):
            if not all(_is_ground(a) for a in t.prefix):
                raise GroundError("intensional list prefix not ground", pos)
            prefix = tuple(_eval_term(a, pos) for a in t.prefix)
            if (t.name, t.arity) in var_functors:
                members = [v for v in var_terms
                           if isinstance(v, Compound) and v.functor == t.name
                           and len(v.args) == t.arity
                           and v.args[:len(prefix)] == prefix]
                members = sorted({canon_term(m): m for m in members}.values(),
                                 key=term_key)
                if not members:
                    warnings.append(f"empty expansion of [{t.name}/{t.arity}]")
                return ListTerm(tuple(members))
            if (t.name, t.arity) in rels:
                facts = [a for a in facts_by_rel.get((t.name, t.arity), [])
                         if a.args[:len(prefix)] == prefix]
                facts = sorted({canon_atom(a): a for a in facts}.values(),
                               key=lambda a: tuple(term_key(x)
                                                   for x in a.args))
                if not facts:
                    warnings.append(f"empty expansion of [{t.name}/{t.arity}]")
                return ListTerm(tuple(a.args[t.arity - 1] for a in facts))
            raise GroundError(
                f"intensional list over undeclared functor/relation "
                f"{t.name}/{t.arity}", pos)
        if isinstance(t, Compound):
            return Compound(t.functor, tuple(lam(a, pos) for a in t.args))
        if isinstance(t, ListTerm):
            items = tuple(lam(a, pos) for a in t.items)
            if any(isinstance(a, IntensionalList) for a in items):
                raise GroundError("nested intensional list", pos)
            return ListTerm(items)
        return t

    out: List[Rule] = []
    for r in p.rules:
        head = r.head
        if isinstance(head, Atom) and head.rel == "required":
            head = Atom("required", tuple(lam(a, r.pos) for a in head.args))
        out.append(Rule(head, r.body, r.pos))
    return EzProgram(tuple(out)), warnings


# ---------------------------------------------------------------------------
# CA programs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CADecl:
    """Variable declaration at the CA level; atom None = unconditional."""
    atom: Optional[int]
    var: str
    lo: Optional[int]
    hi: Optional[int]


class CAProgram:
    """A program with constraint atoms: regular part, constraint alphabet,
    atom-to-constraint map, integer domain, and variable declarations."""

    def __init__(self, pi: RegularProgram, constraint_atoms: Sequence[str],
                 gamma: Dict[str, object],
                 domain: Tuple[int, int] = DEFAULT_FD_RANGE,
                 var_decls: Sequence[CADecl] = (),
                 suppressed: FrozenSet[str] = frozenset(),
                 warnings: Sequence[str] = ()):
        self.pi = pi
        self.constraint_order: List[int] = [pi.index[a] for a in constraint_atoms]
        self.constraint_set: FrozenSet[int] = frozenset(self.constraint_order)
        self.gamma: Dict[int, object] = {pi.index[a]: g
                                         for a, g in gamma.items()}
        self.domain = domain
        self.var_decls: Tuple[CADecl, ...] = tuple(var_decls)
        self.suppressed = suppressed          # atom names hidden in ez output
        self.warnings = list(warnings)
        for cid in self.constraint_order:
            for r in pi.rules:
                if r.head == cid:
                    raise ValueError(
                        f"constraint atom {pi.names[cid]} occurs in a head")
        if set(self.gamma) != set(self.constraint_order):
            raise ValueError("gamma must be defined on exactly the "
                             "constraint alphabet")

    @property
    def n_atoms(self) -> int:
        return self.pi.n_atoms

    def classify(self, atom_id: int) -> str:
        if atom_id in self.constraint_set:
            return "constraint"
        name = self.pi.names[atom_id]
        if name.startswith("required(") and name.endswith(")"):
            return "ez"
        return "regular"

    def asp_abstraction(self) -> RegularProgram:
        from .asp import RuleP
        extra = [RuleP(c, (), (), (c,)) for c in self.constraint_order]
        return self.pi.extended(extra)

    def with_extra_denials(self, denials: Sequence) -> "CAProgram":
        """Same program with denials appended to the regular part."""
        pi = self.pi.extended(denials)
        clone = CAProgram.__new__(CAProgram)
        clone.pi = pi
        clone.constraint_order = list(self.constraint_order)
        clone.constraint_set = self.constraint_set
        clone.gamma = dict(self.gamma)
        clone.domain = self.domain
        clone.var_decls = self.var_decls
        clone.suppressed = self.suppressed
        clone.warnings = list(self.warnings)
        return clone

    def csp_variables(self) -> List[str]:
        names: List[str] = []
        for d in self.var_decls:
            if d.var not in names:
                names.append(d.var)
        for cid in self.constraint_order:
            for v in sorted(fd.vars_of(self.gamma[cid])):
                if v not in names:
                    names.append(v)
        return names

    def __repr__(self) -> str:
        return (f"CAProgram({self.pi.n_atoms} atoms, "
                f"{len(self.constraint_order)} constraint atoms, "
                f"D={self.domain[0]}..{self.domain[1]})")


def _build_constraint_expr(t: Term, declared: Set[str],
                           pos: Optional[SourcePos]):
    """Map a ground required-argument term to a constraint expression."""

    def arith(x: Term):
        if isinstance(x, Const) and isinstance(x.value, int):
            return fd.IntConst(x.value)
        if isinstance(x, Compound) and x.functor in _ARITH_FUNCTORS:
            n = 1 if x.functor == "neg" else 2
            if len(x.args) != n:
                raise GroundError(f"arity error in {x.functor}", pos)
            return fd.Arith(x.functor, tuple(arith(a) for a in x.args))
        name = canon_term(x)
        if name in declared:
            return fd.VarRef(name)
        raise GroundError(
            f"required-argument references undeclared constraint variable "
            f"{display_term(x)}", pos)

    def scalar(x: Term):
        return arith(x)

    def var_list(x: Term) -> tuple:
        if not isinstance(x, ListTerm):
            raise GroundError("expected a list argument", pos)
        return tuple(scalar(i) for i in x.items)

    def int_list(x: Term) -> tuple:
        if not isinstance(x, ListTerm):
            raise GroundError("expected a list argument", pos)
        return tuple(_int_of(i, "list element", pos) for i in x.items)

    def cmp_name(x: Term) -> str:
        if isinstance(x, Const) and isinstance(x.value, str):
            if x.value in fd.CMP_NAMES:
                return x.value
            if x.value in CMP_OPS:
                return CMP_OPS[x.value]
        raise GroundError(f"expected a comparison operator, got "
                          f"{display_term(x)}", pos)

    def build(x: Term):
        if not isinstance(x, Compound):
            raise GroundError(f"not a constraint: {display_term(x)}", pos)
        f = x.functor
        if f in _CMP_FUNCTORS:
            if len(x.args) != 2:
                raise GroundError(f"arity error in comparison {f}", pos)
            return fd.Cmp(f, arith(x.args[0]), arith(x.args[1]))
        if f in _LOGIC_FUNCTORS:
            want = 1 if f == "not" else 2
            if len(x.args) != want:
                raise GroundError(f"arity error in connective {f}", pos)
            return fd.BoolExpr(f, tuple(build(a) for a in x.args))
        if f in GLOBAL_CONSTRAINTS:
            a = x.args
            try:
                if f in ("all_different", "all_distinct", "circuit"):
                    return fd.Global(f, (var_list(a[0]),))
                if f == "assignment":
                    return fd.Global(f, (var_list(a[0]), var_list(a[1])))
                if f in ("count",):
                    return fd.Global(f, (scalar(a[0]), var_list(a[1]),
                                         cmp_name(a[2]), scalar(a[3])))
                if f == "cumulative":
                    return fd.Global(f, (var_list(a[0]), int_list(a[1]),
                                         int_list(a[2]), scalar(a[3])))
                if f == "disjoint2":
                    return fd.Global(f, (var_list(a[0]), int_list(a[1]),
                                         var_list(a[2]), int_list(a[3])))
                if f == "element":
                    return fd.Global(f, (scalar(a[0]), var_list(a[1]),
                                         scalar(a[2])))
                if f in ("minimum", "maximum"):
                    return fd.Global(f, (scalar(a[0]), var_list(a[1])))
                if f == "scalar_product":
                    return fd.Global(f, (int_list(a[0]), var_list(a[1]),
                                         cmp_name(a[2]), scalar(a[3])))
                if f == "serialized":
                    return fd.Global(f, (var_list(a[0]), int_list(a[1])))
                if f == "sum":
                    return fd.Global(f, (var_list(a[0]), cmp_name(a[1]),
                                         scalar(a[2])))
            except IndexError:
                raise GroundError(f"arity error in global constraint {f}",
                                  pos)
        raise GroundError(f"not a constraint: {display_term(x)}", pos)

    return build(t)


def to_ca_program(p: EzProgram, decls: Sequence[VariableDecl],
                  default_range: Tuple[int, int] = DEFAULT_FD_RANGE
                  ) -> CAProgram:
    """Translate a ground, list-expanded program into a CA program."""
    domain_args = []
    has_reserved = False
    for r in p.rules:
        heads = [r.head] if isinstance(r.head, Atom) else \
            [e.atom for e in r.head.elems] if isinstance(r.head, Choice) else []
        for h in heads:
            if h.reserved:
                has_reserved = True
            if h.rel == "cspdomain":
                if not r.is_fact:
                    raise GroundError("cspdomain must be a fact", r.pos)
                domain_args.append((h.args[0], r.pos))
            if h.rel == "required" and isinstance(r.head, Choice):
                raise GroundError("required not allowed in choice heads",
                                  r.pos)
        for b in r.body:
            if isinstance(b, Lit):
                if b.atom.rel == "required":
                    raise GroundError(
                        "required-atoms may only occur in rule heads", r.pos)
                if b.atom.reserved:
                    has_reserved = True

    if len(domain_args) > 1:
        raise GroundError("duplicate cspdomain fact")
    if not domain_args:
        if has_reserved:
            raise GroundError("missing cspdomain fact")
    else:
        arg, dpos = domain_args[0]
        if not (isinstance(arg, Const) and arg.value in ("fd", "q", "r")):
            raise GroundError("cspdomain argument must be fd, q or r", dpos)
        if arg.value in ("q", "r"):
            raise GroundError(f"unsupported domain {arg.value!r} "
                              f"(only fd is supported)", dpos)

    declared = {d.var for d in decls}
    decl_atoms = {d.atom for d in decls}

    # constraint alphabet: one atom per distinct required-argument
    required_terms: Dict[str, Term] = {}
    for r in p.rules:
        if isinstance(r.head, Atom) and r.head.rel == "required":
            beta = r.head.args[0]
            if not _is_ground(beta):
                raise GroundError("required-argument not ground", r.pos)
            if isinstance(beta, IntensionalList):
                raise GroundError("unexpanded intensional list", r.pos)
            required_terms.setdefault(canon_term(beta), beta)

    gamma: Dict[str, object] = {}
    beta_name: Dict[str, str] = {}
    req_name: Dict[str, str] = {}
    for key, beta in required_terms.items():
        gamma_expr = _build_constraint_expr(beta, declared, None)
        disp = display_term(beta)
        beta_name[key] = f"|{disp}|"
        req_name[key] = f"required({disp})"
        gamma[beta_name[key]] = gamma_expr

    # propositional rules
    proto: List[Tuple[Optional[str], List[str], List[str], List[str]]] = []

    def atom_name(a: Atom) -> str:
        if a.rel == "required":
            key = canon_term(a.args[0])
            if key not in req_name:
                raise GroundError(f"unknown required atom {display_atom(a)}")
            return req_name[key]
        return display_atom(a)

    for r in p.rules:
        pos_b = [atom_name(b.atom) for b in r.body
                 if isinstance(b, Lit) and b.kind == "pos"]
        neg_b = [atom_name(b.atom) for b in r.body
                 if isinstance(b, Lit) and b.kind == "not"]
        nn_b = [atom_name(b.atom) for b in r.body
                if isinstance(b, Lit) and b.kind == "notnot"]
        if r.head is None:
            proto.append((None, pos_b, neg_b, nn_b))
        elif isinstance(r.head, Atom):
            proto.append((atom_name(r.head), pos_b, neg_b, nn_b))
        else:
            ch = r.head
            elems = [atom_name(e.atom) for e in ch.elems]
            for e in elems:
                proto.append((e, pos_b, neg_b, nn_b + [e]))
            n = len(elems)
            lo = None if ch.lower is None else ch.lower.value
            hi = None if ch.upper is None else ch.upper.value
            if lo is not None and lo > 0:
                k = n - lo + 1
                if k <= 0:
                    proto.append((None, pos_b, neg_b, nn_b))
                else:
                    _check_combos(n, k, r.pos)
                    for subset in itertools.combinations(elems, k):
                        proto.append((None, pos_b, neg_b + list(subset), nn_b))
            if hi is not None and hi < n:
                _check_combos(n, hi + 1, r.pos)
                for subset in itertools.combinations(elems, hi + 1):
                    proto.append((None, pos_b + list(subset), neg_b, nn_b))

    # linking denials per required atom
    for key in required_terms:
        proto.append((None, [req_name[key]], [beta_name[key]], []))
        proto.append((None, [beta_name[key]], [req_name[key]], []))

    # constraint and ez atoms live in reserved name spaces (|..| and
    # required(..)), so the three alphabets are disjoint by construction
    pi = RegularProgram.build(proto)

    ca_decls = []
    for d in decls:
        atom_id = pi.index.get(d.atom)
        if atom_id is None:
            # declaration atom never materialized in a rule; always active
            atom_id = None
        ca_decls.append(CADecl(atom_id, d.var, d.lo, d.hi))

    suppressed = frozenset(beta_name.values())
    return CAProgram(pi, list(beta_name[k] for k in required_terms),
                     {beta_name[k]: gamma[beta_name[k]]
                      for k in required_terms},
                     domain=default_range,
                     var_decls=ca_decls, suppressed=suppressed)


def _check_combos(n: int, k: int, pos: Optional[SourcePos]) -> None:
    import math
    if math.comb(n, k) > _MAX_CHOICE_COMBOS:
        raise GroundError("choice bounds too large to compile", pos)


def ground_program(source: Union[str, EzProgram],
                   default_range: Tuple[int, int] = DEFAULT_FD_RANGE
                   ) -> CAProgram:
    """Full pipeline: parse (if text), preprocess, ground, expand lists,
    translate to a CA program."""
    p = parse(source) if isinstance(source, str) else source
    n_domain_facts = sum(
        1 for r in p.rules
        if isinstance(r.head, Atom) and r.head.rel == "cspdomain")
    if n_domain_facts > 1:
        raise GroundError("duplicate cspdomain fact")
    p = preprocess(p)
    g = ground(p)
    decls = collect_var_decls(g)
    expanded, warnings = expand_lists(g, decls)
    ca = to_ca_program(expanded, decls, default_range)
    ca.warnings.extend(warnings)
    return ca
