"""Transition-system search over CA programs.

States are M||Gamma||Lambda: a record of annotated literals plus permanent and
temporal stores of learned denials.  The driver applies Decide, Fail,
Backtrack, Unit Propagate, Unfounded, CP-Propagate, Learn/Learn_t and
Restart/Restart_t edges, restricted by the selected integration schema:

  black  - the constraint solver is consulted only on complete propagated
           assignments; a failed check learns the entailed denial permanently
           and restarts, clearing temporal denials (Restart_t);
  grey   - as black, but the restart preserves the temporal store (Restart);
  clear  - the constraint solver is consulted on partial assignments every
           `check_freq` decisions; conflicts are resolved by chronological
           backtracking and no restarts ever occur.

Every run starts from the empty state, halts in a semi-terminal state or
Failstate, and (optionally) emits a machine-checkable trace.  Enumeration of
further answer sets re-runs the search on the program extended with a
blocking denial over the previous model's literals.

One solver run owns its state exclusively; concurrent runs over a shared
CAProgram are safe.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from . import fd
from .asp import (Clause, Record, RegularProgram, RuleP, clausify,
                  find_unit_step, greatest_unfounded_set, lit_atom, neg)
from .ground import CAProgram

__all__ = [
    "SchemaConfig", "SolveResult", "ExtendedAnswerSet", "SolveStats",
    "solve_ca", "cp_entailed_denial", "BudgetExceeded",
    "denial_key", "DEFAULT_STEP_BUDGET",
]

DEFAULT_STEP_BUDGET = 1_000_000


class BudgetExceeded(Exception):
    pass


@dataclass
class SchemaConfig:
    """Search configuration.

    check_freq: clear-box CSP check frequency in decisions (None = check
    complete assignments only); limit: maximum number of extended answer sets
    (0 = all); max_alphas_per_model: cap on evaluations enumerated per answer
    set (0 = all); seed is reserved for future randomized heuristics (the
    default heuristics are deterministic).
    """
    schema: str = "black"
    semantics: str = "weak"
    check_freq: Optional[int] = 1
    limit: int = 1
    max_alphas_per_model: int = 0
    seed: Optional[int] = None
    step_budget: Optional[int] = None

    def __post_init__(self) -> None:
        if self.schema not in ("black", "grey", "clear"):
            raise ValueError(f"unknown schema {self.schema!r}")
        if self.semantics not in ("weak", "full"):
            raise ValueError(f"unknown semantics {self.semantics!r}")
        if self.check_freq is not None and self.check_freq < 1:
            raise ValueError("check_freq must be >= 1")

    def effective_budget(self) -> int:
        if self.step_budget is not None:
            return self.step_budget
        return int(os.environ.get("EZCASP_STEP_BUDGET", DEFAULT_STEP_BUDGET))


@dataclass(frozen=True)
class ExtendedAnswerSet:
    """An answer set (its positive atoms and full literal tuple) paired with
    a solution of its csp-abstraction."""
    atoms: FrozenSet[str]
    assignment: Tuple[Tuple[str, int], ...]
    literals: Tuple[int, ...]

    def assignment_dict(self) -> Dict[str, int]:
        return dict(self.assignment)


@dataclass
class SolveStats:
    decisions: int = 0
    propagations: int = 0
    csp_checks: int = 0
    learned: int = 0
    restarts: int = 0
    steps: int = 0
    runs: int = 0
    candidates: int = 0        # complete candidate models submitted to the CSP


@dataclass
class SolveResult:
    status: str                        # 'sat' | 'unsat' | 'budget'
    models: List[ExtendedAnswerSet]
    stats: SolveStats
    trace: Optional[List[dict]] = None


def denial_key(d: RuleP) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    return (tuple(sorted(d.pos)), tuple(sorted(d.neg)))


def cp_entailed_denial(program: CAProgram, m_literals: Sequence[int],
                       semantics: str) -> RuleP:
    """The denial blocking M's constraint-literal projection.

    Body: positive constraint atoms of M as-is and, under full semantics,
    negative constraint literals as not-literals.  By construction every
    answer set satisfies it while the failing assignment does not.  Must only
    be called when the csp-abstraction of M is infeasible.
    """
    inst = fd.build_csp(program, m_literals, semantics)
    if fd.feasible(inst):
        raise ValueError("cp_entailed_denial called on a feasible record")
    m_set = set(m_literals)
    pos = tuple(c for c in program.constraint_order if (c + 1) in m_set)
    negs = tuple(c for c in program.constraint_order
                 if semantics == "full" and -(c + 1) in m_set)
    return RuleP(None, pos, negs, ())


class _Trace:
    def __init__(self, enabled: bool, names: Tuple[str, ...]):
        self.enabled = enabled
        self.records: List[dict] = []
        self.names = names

    def lit_str(self, lit: int) -> str:
        return ("-" if lit < 0 else "") + self.names[lit_atom(lit)]

    def denial_json(self, d: RuleP) -> dict:
        return {"pos": [self.names[a] for a in d.pos],
                "neg": [self.names[a] for a in d.neg]}

    def start(self, run: int, blocking: Sequence[RuleP],
              cfg: "SchemaConfig") -> None:
        if self.enabled:
            self.records.append({"run": run, "event": "start",
                                 "schema": cfg.schema,
                                 "semantics": cfg.semantics,
                                 "blocking": [self.denial_json(d)
                                              for d in blocking]})

    def edge(self, run: int, rule: str, payload: dict,
             pre: str, post: str) -> None:
        if self.enabled:
            self.records.append({"run": run, "rule": rule, "payload": payload,
                                 "pre": pre, "post": post})

    def end(self, run: int, status: str,
            model: Optional[Sequence[str]] = None) -> None:
        if self.enabled:
            rec = {"run": run, "event": "end", "status": status}
            if model is not None:
                rec["model"] = sorted(model)
            self.records.append(rec)


def state_digest(m: Record, names: Sequence[str], gamma_keys: Sequence[str],
                 lam_keys: Sequence[str]) -> str:
    parts = []
    for lit, d in m.entries:
        parts.append(("-" if lit < 0 else "") + names[lit_atom(lit)]
                     + ("*" if d else ""))
    if m.bot:
        parts.append("#")
    token = " ".join(parts) + "||" + "|".join(sorted(gamma_keys)) \
        + "||" + "|".join(sorted(lam_keys))
    return hashlib.sha1(token.encode()).hexdigest()[:12]


class _Run:
    """One transition-system run from the empty state to a semi-terminal
    state or Failstate."""

    def __init__(self, program: CAProgram, cfg: SchemaConfig,
                 stats: SolveStats, trace: _Trace, run_index: int,
                 budget: int):
        self.program = program
        self.cfg = cfg
        self.stats = stats
        self.trace = trace
        self.run = run_index
        self.budget = budget
        self.abstraction: RegularProgram = program.asp_abstraction()
        self.names = self.abstraction.names
        self.clauses: List[Clause] = clausify(self.abstraction)
        self.gamma: List[RuleP] = []
        self.gamma_keys: set = set()
        self.lam: List[RuleP] = []
        self.lam_keys: set = set()
        self.m = Record(self.abstraction.n_atoms)
        self.decisions_since_check = 0

    # -- helpers --------------------------------------------------------

    def _digest(self) -> str:
        return state_digest(self.m, self.names,
                            [str(denial_key(d)) for d in self.gamma],
                            [str(denial_key(d)) for d in self.lam])

    def _emit(self, rule: str, payload: dict, pre: str) -> None:
        self.stats.steps += 1
        if self.stats.steps > self.budget:
            raise BudgetExceeded()
        self.trace.edge(self.run, rule, payload, pre, self._digest())

    def _csp_feasible(self) -> bool:
        self.stats.csp_checks += 1
        inst = fd.build_csp(self.program, self.m.literals(),
                            self.cfg.semantics)
        return fd.feasible(inst)

    def _learn_projection(self) -> bool:
        """Learn the cp-entailed projection denial; False if stale or empty."""
        m_set = set(self.m.literals())
        pos = tuple(c for c in self.program.constraint_order
                    if (c + 1) in m_set)
        negs = tuple(c for c in self.program.constraint_order
                     if self.cfg.semantics == "full" and -(c + 1) in m_set)
        d = RuleP(None, pos, negs, ())
        key = denial_key(d)
        if (not pos and not negs) or key in self.gamma_keys \
                or key in self.lam_keys:
            return False
        pre = self._digest()
        self.gamma.append(d)
        self.gamma_keys.add(key)
        self.clauses.append(clausify(RegularProgram(self.names, [d]))[0])
        self.stats.learned += 1
        self._emit("Learn", {"denial": self.trace.denial_json(d),
                             "reason": {"kind": "cp-conflict",
                                        "projection": self._projection_strs()}},
                   pre)
        return True

    def _restart(self) -> None:
        pre = self._digest()
        self.m.clear()
        if self.cfg.schema == "black":
            self.lam.clear()
            self.lam_keys.clear()
            rule = "RestartT"
        else:
            rule = "Restart"
        self.decisions_since_check = 0
        self.stats.restarts += 1
        self._emit(rule, {}, pre)

    def _unfounded_literal(self):
        gus = greatest_unfounded_set(self.abstraction, self.m.literals())
        for a in sorted(gus):
            if self.m.value(a) >= 0:      # unassigned or positively assigned
                return a, gus
        return None

    # -- the run --------------------------------------------------------

    def execute(self):
        """-> ('model', Record) | ('failstate',)."""
        cfg = self.cfg
        while True:
            if not self.m.consistent:
                pre = self._digest()
                if self.m.has_decision():
                    flipped = self.m.backjump_last_decision()
                    self._emit("Backtrack",
                               {"lit": self.trace.lit_str(flipped)}, pre)
                else:
                    self._emit("Fail", {}, pre)
                    return ("failstate",)
                continue

            step = find_unit_step(self.m, self.clauses)
            if step is not None:
                lit, clause = step
                pre = self._digest()
                self.m.append(lit)
                self.stats.propagations += 1
                self._emit("UnitPropagate",
                           {"lit": self.trace.lit_str(lit),
                            "clause": [self.trace.lit_str(x) for x in clause]},
                           pre)
                continue

            unf = self._unfounded_literal()
            if unf is not None:
                a, gus = unf
                pre = self._digest()
                self.m.append(neg(a + 1))
                self.stats.propagations += 1
                self._emit("Unfounded",
                           {"lit": self.trace.lit_str(-(a + 1)),
                            "unfounded": sorted(self.names[x] for x in gus)},
                           pre)
                continue

            # consistent propagation fixpoint
            complete = self.m.is_complete()
            if cfg.schema in ("black", "grey"):
                check_now = complete
            else:
                check_now = complete or (
                    cfg.check_freq is not None
                    and self.decisions_since_check >= cfg.check_freq)

            if check_now:
                if complete:
                    self.stats.candidates += 1
                self.decisions_since_check = 0
                if not self._csp_feasible():
                    pre = self._digest()
                    self.m.append_bot()
                    self._emit("CPPropagate",
                               {"projection": self._projection_strs()}, pre)
                    learned = self._learn_projection()
                    if cfg.schema in ("black", "grey") and learned:
                        self._restart()
                    # otherwise resolve by Backtrack/Fail on the next loop
                    continue
                if complete:
                    return ("model", self.m)

            pre = self._digest()
            target = next(a for a in range(self.abstraction.n_atoms)
                          if self.m.value(a) == 0)
            self.m.append(target + 1, decided=True)
            self.stats.decisions += 1
            self.decisions_since_check += 1
            self._emit("Decide", {"lit": self.trace.lit_str(target + 1)}, pre)

    def _projection_strs(self) -> List[str]:
        m_set = set(self.m.literals())
        out = []
        for c in self.program.constraint_order:
            if (c + 1) in m_set:
                out.append(self.trace.lit_str(c + 1))
            elif -(c + 1) in m_set:
                out.append(self.trace.lit_str(-(c + 1)))
        return out


def _blocking_denial(m: Record) -> RuleP:
    pos = tuple(sorted(lit_atom(l) for l in m.literals() if l > 0))
    negs = tuple(sorted(lit_atom(l) for l in m.literals() if l < 0))
    return RuleP(None, pos, negs, ())


def solve_ca(program: CAProgram, cfg: SchemaConfig,
             collect_trace: bool = False) -> SolveResult:
    """Compute extended answer sets of a CA program under the configured
    integration schema and semantics.

    Enumerates up to cfg.limit extended answer sets (0 = all): evaluations
    are enumerated per answer set in labeling order, then the search is
    re-launched with a blocking denial to find the next answer set.
    """
    stats = SolveStats()
    names = program.asp_abstraction().names
    trace = _Trace(collect_trace, names)
    budget = cfg.effective_budget()
    models: List[ExtendedAnswerSet] = []
    blocking: List[RuleP] = []
    status = "unsat"

    # an empty denial is violated by every record; no transition edge can
    # represent the conflict, so the degenerate case is decided up front
    if any(r.head is None and not (r.pos or r.neg or r.nneg)
           for r in program.pi.rules):
        return SolveResult("unsat", [], stats,
                           trace.records if collect_trace else None)

    try:
        while True:
            run_program = program.with_extra_denials(blocking) if blocking \
                else program
            run_idx = stats.runs
            stats.runs += 1
            trace.start(run_idx, blocking, cfg)
            run = _Run(run_program, cfg, stats, trace, run_idx, budget)
            outcome = run.execute()
            if outcome[0] == "failstate":
                trace.end(run_idx, "failstate")
                break
            m: Record = outcome[1]
            atoms = frozenset(names[lit_atom(l)] for l in m.literals()
                              if l > 0)
            trace.end(run_idx, "model", model=atoms)
            status = "sat"

            inst = fd.build_csp(program, m.literals(), cfg.semantics)
            alpha_cap = None
            if cfg.max_alphas_per_model:
                alpha_cap = cfg.max_alphas_per_model
            if cfg.limit:
                remaining = cfg.limit - len(models)
                alpha_cap = min(alpha_cap, remaining) \
                    if alpha_cap is not None else remaining
            sols, _ = fd.solve(inst, limit=alpha_cap)
            lits = tuple(m.literals())
            for s in sols:
                models.append(ExtendedAnswerSet(
                    atoms, tuple(sorted(s.items())), lits))
            if cfg.limit and len(models) >= cfg.limit:
                break
            if not m.literals():
                break           # the empty model over no atoms is unique
            blocking.append(_blocking_denial(m))
    except BudgetExceeded:
        return SolveResult("budget", models, stats,
                           trace.records if collect_trace else None)

    return SolveResult(status if models else "unsat", models, stats,
                       trace.records if collect_trace else None)
