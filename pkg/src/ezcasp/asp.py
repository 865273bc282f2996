"""Propositional regular-program machinery.

Rules are ``a0 <- a1,...,al, not a(l+1),..., not am, not not a(m+1),...``
with `a0` an atom or absent (denial).  This module provides clausification,
the reduct, answer-set checking via the least model of the positive reduct,
unit propagation over records, greatest-unfounded-set computation, and a
brute-force answer-set enumerator used as an oracle.

Atoms are interned strings; internally they are integer ids and literals are
signed ids (``id+1`` positive, ``-(id+1)`` negative).  Program structures are
immutable after construction and can be shared across threads; a `Record` is
single-owner mutable search state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

__all__ = [
    "RuleP", "RegularProgram", "Record", "Clause",
    "clausify", "reduct", "least_model", "is_answer_set",
    "unit_propagate", "find_unit_step", "greatest_unfounded_set",
    "enumerate_answer_sets_bruteforce",
    "lit_atom", "lit_sign", "neg",
]

Clause = Tuple[int, ...]


def lit_atom(lit: int) -> int:
    return abs(lit) - 1


def lit_sign(lit: int) -> bool:
    return lit > 0


def neg(lit: int) -> int:
    return -lit


@dataclass(frozen=True)
class RuleP:
    """Ground rule; head is an atom id or None for a denial."""
    head: Optional[int]
    pos: Tuple[int, ...]
    neg: Tuple[int, ...]
    nneg: Tuple[int, ...] = ()


class RegularProgram:
    """Immutable ground program with an ordered atom table."""

    def __init__(self, names: Sequence[str], rules: Sequence[RuleP]):
        self.names: Tuple[str, ...] = tuple(names)
        self.index: Dict[str, int] = {n: i for i, n in enumerate(self.names)}
        if len(self.index) != len(self.names):
            raise ValueError("duplicate atom names")
        self.rules: Tuple[RuleP, ...] = tuple(rules)
        self._check()

    def _check(self) -> None:
        n = len(self.names)
        for r in self.rules:
            for part in (r.pos, r.neg, r.nneg):
                if len(set(part)) != len(part):
                    raise ValueError(f"duplicate atoms in one body part: {r}")
                for a in part:
                    if not 0 <= a < n:
                        raise ValueError(f"atom id out of range: {r}")
            if r.head is not None and not 0 <= r.head < n:
                raise ValueError(f"head id out of range: {r}")

    @classmethod
    def build(cls, rules: Iterable[Tuple[Optional[str], Sequence[str],
                                         Sequence[str], Sequence[str]]],
              extra_atoms: Sequence[str] = ()) -> "RegularProgram":
        """Intern atoms in order of first occurrence and build the program.

        Each rule is (head or None, positive, negated, doubly-negated) over
        atom names; `extra_atoms` forces additional table entries (e.g.
        constraint atoms a caller wants in At even before denials mention
        them).
        """
        names: List[str] = []
        index: Dict[str, int] = {}

        def intern(name: str) -> int:
            if name not in index:
                index[name] = len(names)
                names.append(name)
            return index[name]

        out: List[RuleP] = []
        for head, pos, negs, nneg in rules:
            h = intern(head) if head is not None else None
            out.append(RuleP(
                h,
                tuple(dict.fromkeys(intern(a) for a in pos)),
                tuple(dict.fromkeys(intern(a) for a in negs)),
                tuple(dict.fromkeys(intern(a) for a in nneg)),
            ))
        for a in extra_atoms:
            intern(a)
        return cls(names, out)

    def extended(self, extra: Sequence[RuleP]) -> "RegularProgram":
        return RegularProgram(self.names, tuple(self.rules) + tuple(extra))

    @property
    def n_atoms(self) -> int:
        return len(self.names)

    def atom_set(self, mask: int) -> FrozenSet[str]:
        return frozenset(self.names[i] for i in range(self.n_atoms)
                         if mask >> i & 1)

    def mask_of(self, atoms: Iterable[str]) -> int:
        m = 0
        for a in atoms:
            m |= 1 << self.index[a]
        return m

    def rule_masks(self) -> List[Tuple[int, int, int, int]]:
        """(head_mask, pos_mask, neg_mask, nneg_mask) per rule; head 0 = denial."""
        out = []
        for r in self.rules:
            hm = 0 if r.head is None else 1 << r.head
            pm = sum(1 << a for a in r.pos)
            nm = sum(1 << a for a in r.neg)
            nn = sum(1 << a for a in r.nneg)
            out.append((hm, pm, nm, nn))
        return out

    def __repr__(self) -> str:
        return f"RegularProgram({self.n_atoms} atoms, {len(self.rules)} rules)"


# ---------------------------------------------------------------------------
# Clausification and reduct
# ---------------------------------------------------------------------------

def clausify(prog: RegularProgram) -> List[Clause]:
    """One clause per rule: head, complemented positive body, negated body
    atoms positive, doubly-negated complemented; absent head for denials."""
    out: List[Clause] = []
    for r in prog.rules:
        lits: List[int] = []
        if r.head is not None:
            lits.append(r.head + 1)
        lits.extend(-(a + 1) for a in r.pos)
        lits.extend(a + 1 for a in r.neg)
        lits.extend(-(a + 1) for a in r.nneg)
        out.append(tuple(dict.fromkeys(lits)))
    return out


def _body_holds_mask(r: RuleP, x: int) -> bool:
    for a in r.pos:
        if not x >> a & 1:
            return False
    for a in r.neg:
        if x >> a & 1:
            return False
    for a in r.nneg:
        if not x >> a & 1:
            return False
    return True


def reduct(prog: RegularProgram, x_atoms: Iterable[str]) -> List[Tuple[Optional[int], Tuple[int, ...]]]:
    """Positive program: rules whose body X satisfies, reduced to head <- pos."""
    x = prog.mask_of(x_atoms)
    return [(r.head, r.pos) for r in prog.rules if _body_holds_mask(r, x)]


def least_model(positive: Sequence[Tuple[Optional[int], Tuple[int, ...]]]) -> int:
    """Least model (as an atom mask) of a positive program; denial heads
    contribute nothing here (model checking handles them separately)."""
    lm = 0
    changed = True
    while changed:
        changed = False
        for head, pos in positive:
            if head is None:
                continue
            hbit = 1 << head
            if lm & hbit:
                continue
            if all(lm >> a & 1 for a in pos):
                lm |= hbit
                changed = True
    return lm


def _is_answer_set_mask(prog: RegularProgram, x: int) -> bool:
    lm = 0
    # one pass computes both: denial violation check and the positive reduct
    kept: List[Tuple[int, Tuple[int, ...]]] = []
    for r in prog.rules:
        if not _body_holds_mask(r, x):
            continue
        if r.head is None:
            return False
        kept.append((r.head, r.pos))
    changed = True
    while changed:
        changed = False
        for head, pos in kept:
            hbit = 1 << head
            if lm & hbit:
                continue
            if all(lm >> a & 1 for a in pos):
                lm |= hbit
                changed = True
    return lm == x


def is_answer_set(prog: RegularProgram, x_atoms: Iterable[str]) -> bool:
    """True iff X is subset-minimal among models of the clausified reduct,
    decided by the least-model fixpoint of the positive reduct."""
    return _is_answer_set_mask(prog, prog.mask_of(x_atoms))


def enumerate_answer_sets_bruteforce(prog: RegularProgram,
                                     bound: int = 20) -> List[FrozenSet[str]]:
    """All answer sets by exhausting subsets of At; lexicographic order."""
    n = prog.n_atoms
    if n > bound:
        raise ValueError(f"atom bound exceeded: {n} > {bound}")
    found = [prog.atom_set(x) for x in range(1 << n)
             if _is_answer_set_mask(prog, x)]
    return sorted(found, key=lambda s: tuple(sorted(s)))


# ---------------------------------------------------------------------------
# Records and propagation
# ---------------------------------------------------------------------------

class Record:
    """Annotated literal sequence: distinct literals, decision flags, and an
    optional trailing inconsistency (either a complementary pair created by
    the final literal, or an explicit bottom marker)."""

    def __init__(self, n_atoms: int):
        self.n_atoms = n_atoms
        self.entries: List[Tuple[int, bool]] = []
        self.assign: Dict[int, int] = {}      # atom id -> +1 / -1
        self.bot = False

    def __len__(self) -> int:
        return len(self.entries)

    def value(self, atom: int) -> int:
        return self.assign.get(atom, 0)

    def holds(self, lit: int) -> bool:
        return self.assign.get(lit_atom(lit), 0) == (1 if lit > 0 else -1)

    def is_unassigned(self, lit: int) -> bool:
        return lit_atom(lit) not in self.assign

    @property
    def consistent(self) -> bool:
        return not self.bot and len(self.assign) == len(self.entries)

    def is_complete(self) -> bool:
        return len(self.assign) == self.n_atoms and self.consistent

    def literals(self) -> List[int]:
        return [lit for lit, _ in self.entries]

    def append(self, lit: int, decided: bool = False) -> None:
        if self.bot:
            raise ValueError("cannot extend past bottom")
        if not self.consistent:
            raise ValueError("cannot extend an inconsistent record")
        if self.holds(lit):
            raise ValueError(f"duplicate literal {lit}")
        if decided and not self.is_unassigned(lit):
            raise ValueError("decision on an assigned atom")
        self.entries.append((lit, decided))
        a = lit_atom(lit)
        if a not in self.assign:
            self.assign[a] = 1 if lit > 0 else -1
        # else: complement already present; record is now M'l, inconsistent

    def append_bot(self) -> None:
        if self.bot:
            raise ValueError("bottom already present")
        self.bot = True

    def has_decision(self) -> bool:
        return any(d for _, d in self.entries)

    def backjump_last_decision(self) -> int:
        """Chronological backtrack: drop through the most recent decision
        literal, assert its complement (undecided), return that literal."""
        idx = max(i for i, (_, d) in enumerate(self.entries) if d)
        lit, _ = self.entries[idx]
        for l, _ in self.entries[idx:]:
            a = lit_atom(l)
            if self.assign.get(a) == (1 if l > 0 else -1):
                del self.assign[a]
        del self.entries[idx:]
        self.bot = False
        self.append(neg(lit), decided=False)
        return neg(lit)

    def clear(self) -> None:
        self.entries.clear()
        self.assign.clear()
        self.bot = False

    def state_token(self) -> str:
        parts = []
        for lit, d in self.entries:
            name = str(lit)
            parts.append(name + ("*" if d else ""))
        if self.bot:
            parts.append("#")
        return " ".join(parts)


def _clause_status(m: Record, clause: Clause):
    """-> ('sat', None) | ('unit', lit) | ('false', None) | ('open', None)."""
    unassigned = None
    n_open = 0
    for lit in clause:
        v = m.value(lit_atom(lit))
        if v == 0:
            n_open += 1
            unassigned = lit
            if n_open > 1:
                return ("open", None)
        elif (v > 0) == (lit > 0):
            return ("sat", None)
    if n_open == 1:
        return ("unit", unassigned)
    return ("false", None)


def find_unit_step(m: Record, clauses: Sequence[Clause]):
    """First applicable unit-propagation edge under a fixed clause order.

    Returns (lit, clause) to append, preferring conflicts: if some clause is
    fully falsified, its first literal is returned (appending it makes the
    record inconsistent, which is the conflict edge).  None at fixpoint.
    """
    if not m.consistent:
        return None
    unit = None
    for clause in clauses:
        if not clause:
            continue        # empty clauses are rejected before search
        status, lit = _clause_status(m, clause)
        if status == "false":
            return (clause[0], clause)
        if status == "unit" and unit is None:
            unit = (lit, clause)
    return unit


def unit_propagate(m: Record, clauses: Sequence[Clause]) -> Record:
    """Run unit propagation to fixpoint (mutates and returns `m`)."""
    while True:
        step = find_unit_step(m, clauses)
        if step is None:
            return m
        lit, _ = step
        m.append(lit)
        if not m.consistent:
            return m


# ---------------------------------------------------------------------------
# Unfounded sets
# ---------------------------------------------------------------------------

def greatest_unfounded_set(prog: RegularProgram,
                           m_literals: Iterable[int]) -> FrozenSet[int]:
    """Largest U such that every body of every a in U is contradicted by M or
    depends positively on U; computed as the complement of the fixpoint of
    externally supported atoms."""
    pos_in_m = set()
    neg_in_m = set()
    for lit in m_literals:
        (pos_in_m if lit > 0 else neg_in_m).add(lit_atom(lit))
    if pos_in_m & neg_in_m:
        raise ValueError("M must be consistent")

    def contradicted(r: RuleP) -> bool:
        return (any(a in neg_in_m for a in r.pos)
                or any(a in pos_in_m for a in r.neg)
                or any(a in neg_in_m for a in r.nneg))

    live: Dict[int, List[Tuple[int, ...]]] = {}
    for r in prog.rules:
        if r.head is None or contradicted(r):
            continue
        live.setdefault(r.head, []).append(r.pos)

    supported: set = set()
    changed = True
    while changed:
        changed = False
        for a, bodies in live.items():
            if a in supported:
                continue
            if any(all(p in supported for p in pos) for pos in bodies):
                supported.add(a)
                changed = True
    return frozenset(range(prog.n_atoms)) - supported
