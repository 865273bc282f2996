"""EZ language front end: data model, parser, operator pre-processing, printer.

The surface language is rule-based: `.`-terminated rules, `%` line comments,
`:-` between head and body.  Heads are atoms, cardinality choices
``L { a : cond } U`` or absent (denials).  Bodies mix atoms, `not` / `not not`
literals, built-in comparisons (``X < Y``, ``W = WR + CR``) and the lparse-style
``#sum[ a = w : cond ] U`` aggregate.  The reserved relations `cspdomain`,
`cspvar` and `required` drive the constraint side; inside a `required(...)`
argument the full expression grammar is available (arithmetic, comparisons,
reified connectives, extensional/intensional lists, global constraints).

Everything here is pure and operates on immutable values; parse / preprocess /
pretty_print may be called concurrently from any number of threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

__all__ = [
    "Const", "Var", "Compound", "OpExpr", "ListTerm", "IntensionalList",
    "RangeTerm", "Term",
    "Atom", "Lit", "BuiltinLit", "AggItem", "AggregateLit", "BodyElement",
    "ChoiceElem", "Choice", "Rule", "EzProgram",
    "EzSyntaxError", "SourcePos",
    "parse", "preprocess", "pretty_print",
    "CMP_OPS", "ARITH_OPS", "LOGIC_OPS", "CANON_FUNCTORS",
    "canonical_functor", "display_op", "GLOBAL_CONSTRAINTS",
    "RESERVED_RELATIONS",
]

RESERVED_RELATIONS = ("cspdomain", "cspvar", "required")

GLOBAL_CONSTRAINTS = frozenset({
    "all_different", "all_distinct", "assignment", "circuit", "count",
    "cumulative", "disjoint2", "element", "minimum", "maximum",
    "scalar_product", "serialized", "sum",
})

# Surface operator -> canonical prefix functor, applied by preprocess()
# inside required-arguments only.
CMP_OPS = {"<": "lt", "<=": "leq", "=<": "leq", ">": "gt", ">=": "geq",
           "=": "eq", "==": "eq", "!=": "neq"}
ARITH_OPS = {"+": "plus", "-": "minus", "*": "times", "/": "div"}
LOGIC_OPS = {"\\/": "or", "/\\": "and", "\\": "xor", "xor": "xor",
             "->": "impl", "<-": "impl", "<->": "iff", "!": "not"}

CANON_FUNCTORS = frozenset(CMP_OPS.values()) | frozenset(ARITH_OPS.values()) \
    | frozenset(LOGIC_OPS.values()) | {"neg"}

_DISPLAY = {"lt": "<", "leq": "=<", "gt": ">", "geq": ">=", "eq": "=",
            "neq": "!=", "plus": "+", "minus": "-", "times": "*", "div": "/",
            "or": "\\/", "and": "/\\", "xor": "xor", "impl": "->",
            "iff": "<->", "not": "!", "neg": "-"}


def canonical_functor(op: str) -> str:
    for table in (CMP_OPS, ARITH_OPS, LOGIC_OPS):
        if op in table:
            return table[op]
    raise EzSyntaxError(f"unknown operator {op!r}")


def display_op(functor: str) -> Optional[str]:
    return _DISPLAY.get(functor)


@dataclass(frozen=True)
class SourcePos:
    line: int = 0
    col: int = 0

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


class EzSyntaxError(Exception):
    """Lexical, syntactic or reserved-relation arity error, with position."""

    def __init__(self, msg: str, pos: Optional[SourcePos] = None):
        self.pos = pos
        super().__init__(f"{pos}: {msg}" if pos else msg)


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: Union[int, str]


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Compound:
    functor: str
    args: tuple


@dataclass(frozen=True)
class OpExpr:
    """Raw operator application as written in the source (infix or prefix).

    Inside required-arguments these survive parsing and are rewritten to
    canonical `Compound`s by preprocess(); outside required they are built-in
    arithmetic the grounder evaluates.  `op` is the normalized surface token
    ('>=', '+', '\\/', 'xor', '<-', '!', ...); unary minus and `!` have one
    argument.
    """
    op: str
    args: tuple


@dataclass(frozen=True)
class ListTerm:
    items: tuple


@dataclass(frozen=True)
class IntensionalList:
    """``[name(prefix...)/arity]``; expanded by the grounder."""
    name: str
    prefix: tuple
    arity: int


@dataclass(frozen=True)
class RangeTerm:
    lo: "Term"
    hi: "Term"


Term = Union[Const, Var, Compound, OpExpr, ListTerm, IntensionalList, RangeTerm]


# ---------------------------------------------------------------------------
# Atoms, literals, rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Atom:
    rel: str
    args: tuple = ()

    @property
    def reserved(self) -> bool:
        return self.rel in RESERVED_RELATIONS


@dataclass(frozen=True)
class Lit:
    """Body literal: kind is 'pos', 'not' or 'notnot'."""
    kind: str
    atom: Atom


@dataclass(frozen=True)
class BuiltinLit:
    """Built-in comparison (or `=`-binding) between arithmetic terms."""
    op: str
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class AggItem:
    atom: Atom
    weight: Optional[Term]
    conds: tuple


@dataclass(frozen=True)
class AggregateLit:
    """lparse-style body sum ``L #sum[ a=w : d ] U`` (either bound optional)."""
    lower: Optional[Term]
    items: tuple
    upper: Optional[Term]


BodyElement = Union[Lit, BuiltinLit, AggregateLit]


@dataclass(frozen=True)
class ChoiceElem:
    atom: Atom
    conds: tuple


@dataclass(frozen=True)
class Choice:
    lower: Optional[Term]
    elems: tuple
    upper: Optional[Term]


@dataclass(frozen=True)
class Rule:
    head: Union[None, Atom, Choice]
    body: tuple
    pos: SourcePos = field(default=SourcePos(), compare=False)

    @property
    def is_fact(self) -> bool:
        return self.head is not None and not self.body

    @property
    def is_denial(self) -> bool:
        return self.head is None


@dataclass(frozen=True)
class EzProgram:
    rules: tuple

    def __len__(self) -> int:
        return len(self.rules)


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Token:
    kind: str          # 'int' | 'ident' | 'var' | 'punct' | 'eof'
    text: str
    pos: SourcePos


_MULTI = [":-", "..", "<->", "<-", "->", "<=", "=<", ">=", "!=", "==", "\\/", "/\\"]
_SINGLE = "=<>!\\+-*/()[]{},.;:"


def _tokenize(text: str) -> list:
    toks = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "%":
            while i < n and text[i] != "\n":
                i += 1
            continue
        pos = SourcePos(line, col)
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(_Token("int", text[i:j], pos))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "var" if word[0].isupper() or word[0] == "_" else "ident"
            toks.append(_Token(kind, word, pos))
            col += j - i
            i = j
            continue
        if c == "#":
            j = i + 1
            while j < n and text[j].isalpha():
                j += 1
            toks.append(_Token("punct", text[i:j], pos))
            col += j - i
            i = j
            continue
        matched = None
        for m in _MULTI:
            if text.startswith(m, i):
                matched = m
                break
        if matched is None and c in _SINGLE:
            matched = c
        if matched is None:
            raise EzSyntaxError(f"unexpected character {c!r}", pos)
        toks.append(_Token("punct", matched, pos))
        i += len(matched)
        col += len(matched)
    toks.append(_Token("eof", "", SourcePos(line, col)))
    return toks


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

# Binding powers for the expression grammar inside required-arguments.
# Conventional precedence; comparisons are non-associative.
_INFIX_BP = {
    "<->": (10, 11),
    "->": (21, 20), "<-": (21, 20),          # right-assoc
    "\\/": (30, 31),
    "\\": (40, 41), "xor": (40, 41),
    "/\\": (50, 51),
    "<": (70, 71), "<=": (70, 71), "=<": (70, 71), ">": (70, 71), ">=": (70, 71),
    "=": (70, 71), "==": (70, 71), "!=": (70, 71),
    "+": (80, 81), "-": (80, 81),
    "*": (90, 91), "/": (90, 91),
}
_CMP_TOKENS = frozenset(CMP_OPS)
_ARITH_TOKENS = frozenset(ARITH_OPS)


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    # -- token helpers ------------------------------------------------

    def peek(self, k: int = 0) -> _Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> _Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.peek().text == text and self.peek().kind in ("punct", "ident")

    def expect(self, text: str) -> _Token:
        t = self.next()
        if t.text != text:
            raise EzSyntaxError(f"expected {text!r}, found {t.text!r}", t.pos)
        return t

    # -- program ------------------------------------------------------

    def program(self) -> EzProgram:
        rules = []
        while self.peek().kind != "eof":
            rules.append(self.rule())
        return EzProgram(tuple(rules))

    def rule(self) -> Rule:
        pos = self.peek().pos
        head: Union[None, Atom, Choice]
        if self.at(":-"):
            head = None
        else:
            head = self.head()
        body: tuple = ()
        if self.at(":-"):
            self.next()
            body = tuple(self.body())
        self.expect(".")
        return Rule(head, body, pos)

    def head(self) -> Union[Atom, Choice]:
        t = self.peek()
        if t.text == "{" or (t.kind in ("int", "var") and self.peek(1).text == "{"):
            return self.choice()
        return self.atom()

    def choice(self) -> Choice:
        lower = None
        t = self.peek()
        if t.kind in ("int", "var"):
            lower = self._bound(self.next())
        self.expect("{")
        elems = [self.choice_elem()]
        while self.peek().text in (",", ";"):
            self.next()
            elems.append(self.choice_elem())
        self.expect("}")
        upper = None
        t = self.peek()
        if t.kind in ("int", "var"):
            upper = self._bound(self.next())
        return Choice(lower, tuple(elems), upper)

    def _bound(self, t: _Token) -> Term:
        return Const(int(t.text)) if t.kind == "int" else Var(t.text)

    def choice_elem(self) -> ChoiceElem:
        a = self.atom()
        conds = []
        while self.at(":"):
            self.next()
            conds.append(self.atom())
        return ChoiceElem(a, tuple(conds))

    # -- bodies ---------------------------------------------------------

    def body(self) -> list:
        elems = [self.body_element()]
        while self.at(","):
            self.next()
            elems.append(self.body_element())
        return elems

    def body_element(self) -> BodyElement:
        t = self.peek()
        if t.kind == "ident" and t.text == "not":
            self.next()
            if self.peek().kind == "ident" and self.peek().text == "not":
                self.next()
                return Lit("notnot", self.atom())
            return Lit("not", self.atom())
        if t.text in ("#sum", "["):
            return self.aggregate(lower=None)
        if t.kind in ("int", "var") and self.peek(1).text in ("#sum", "["):
            lower = self._bound(self.next())
            return self.aggregate(lower)
        lhs = self.arith_expr()
        op = self.peek().text
        if op in _CMP_TOKENS:
            self.next()
            rhs = self.arith_expr()
            return BuiltinLit("=" if op == "==" else op, lhs, rhs)
        atom = self._term_to_atom(lhs, t.pos)
        return Lit("pos", atom)

    def aggregate(self, lower: Optional[Term]) -> AggregateLit:
        if self.at("#sum"):
            self.next()
        self.expect("[")
        items = []
        if not self.at("]"):
            items.append(self.agg_item())
            while self.at(","):
                self.next()
                items.append(self.agg_item())
        self.expect("]")
        upper = None
        if self.peek().kind in ("int", "var"):
            upper = self._bound(self.next())
        return AggregateLit(lower, tuple(items), upper)

    def agg_item(self) -> AggItem:
        a = self.atom()
        weight = None
        if self.at("="):
            self.next()
            weight = self.arith_expr()
        conds = []
        while self.at(":"):
            self.next()
            conds.append(self.atom())
        return AggItem(a, weight, tuple(conds))

    # -- atoms ----------------------------------------------------------

    def atom(self) -> Atom:
        t = self.next()
        if t.kind != "ident":
            raise EzSyntaxError(f"expected atom, found {t.text!r}", t.pos)
        rel = t.text
        args: tuple = ()
        if self.at("("):
            self.next()
            if rel == "required":
                args = (self.expr(0),)
            else:
                parsed = [self.term_arg()]
                while self.at(","):
                    self.next()
                    parsed.append(self.term_arg())
                args = tuple(parsed)
            self.expect(")")
        self._check_reserved(rel, args, t.pos)
        return Atom(rel, args)

    def _check_reserved(self, rel: str, args: tuple, pos: SourcePos) -> None:
        if rel == "cspdomain" and len(args) != 1:
            raise EzSyntaxError("cspdomain takes exactly 1 argument", pos)
        if rel == "cspvar" and len(args) not in (1, 3):
            raise EzSyntaxError("cspvar takes 1 or 3 arguments", pos)
        if rel == "required" and len(args) != 1:
            raise EzSyntaxError("required takes exactly 1 argument", pos)

    def _term_to_atom(self, t: Term, pos: SourcePos) -> Atom:
        if isinstance(t, Const) and isinstance(t.value, str):
            a = Atom(t.value)
        elif isinstance(t, Compound):
            a = Atom(t.functor, t.args)
        else:
            raise EzSyntaxError("expected an atom in rule body", pos)
        self._check_reserved(a.rel, a.args, pos)
        return a

    # -- plain terms (atom arguments outside required) -------------------

    def term_arg(self) -> Term:
        t = self.arith_expr()
        if self.at(".."):
            self.next()
            return RangeTerm(t, self.arith_expr())
        return t

    def arith_expr(self) -> Term:
        return self.expr(75)            # comparisons and connectives excluded

    # -- full expression grammar (required arguments) --------------------

    def expr(self, min_bp: int) -> Term:
        lhs = self._prefix()
        while True:
            t = self.peek()
            bp = _INFIX_BP.get(t.text)
            if t.kind == "ident" and t.text == "xor":
                bp = _INFIX_BP["xor"]
            if bp is None or bp[0] < min_bp:
                return lhs
            self.next()
            rhs = self.expr(bp[1])
            lhs = OpExpr(t.text, (lhs, rhs))

    def _prefix(self) -> Term:
        t = self.next()
        if t.kind == "int":
            return Const(int(t.text))
        if t.kind == "var":
            return Var(t.text)
        if t.text == "-":
            inner = self.expr(100)
            if isinstance(inner, Const) and isinstance(inner.value, int):
                return Const(-inner.value)
            return OpExpr("-", (inner,))
        if t.text == "!":
            return OpExpr("!", (self.expr(60),))
        if t.text == "(":
            e = self.expr(0)
            self.expect(")")
            return e
        if t.text == "[":
            return self._list(t.pos)
        if t.kind == "ident":
            if self.at("("):
                self.next()
                args = [self._expr_arg()]
                while self.at(","):
                    self.next()
                    args.append(self._expr_arg())
                self.expect(")")
                return Compound(t.text, tuple(args))
            return Const(t.text)
        raise EzSyntaxError(f"unexpected token {t.text!r} in expression", t.pos)

    def _expr_arg(self) -> Term:
        # A bare comparison operator is legal in global-constraint argument
        # position, e.g. sum([x,y], =<, 5); it denotes the relation itself.
        t = self.peek()
        if t.text in _CMP_TOKENS and self.peek(1).text in (",", ")"):
            self.next()
            return Const(CMP_OPS[t.text])
        return self.expr(0)

    def _list(self, pos: SourcePos) -> Term:
        if self.at("]"):
            self.next()
            return ListTerm(())
        # Intensional form: single element  name[(prefix)] / arity
        save = self.i
        if self.peek().kind == "ident":
            name_tok = self.next()
            prefix: tuple = ()
            ok = True
            if self.at("("):
                self.next()
                items = [self.expr(0)]
                while self.at(","):
                    self.next()
                    items.append(self.expr(0))
                if self.at(")"):
                    self.next()
                    prefix = tuple(items)
                else:
                    ok = False
            if ok and self.at("/") and self.peek(1).kind == "int":
                self.next()
                arity = int(self.next().text)
                self.expect("]")
                return IntensionalList(name_tok.text, prefix, arity)
            self.i = save
        items = [self.expr(0)]
        while self.at(","):
            self.next()
            items.append(self.expr(0))
        self.expect("]")
        return ListTerm(tuple(items))


def parse(text: str) -> EzProgram:
    """Parse EZ source text into an AST with source positions attached."""
    return _Parser(text).program()


# ---------------------------------------------------------------------------
# Pre-processing: canonical functors inside required-arguments
# ---------------------------------------------------------------------------

def _canon_term(t: Term) -> Term:
    if isinstance(t, OpExpr):
        args = tuple(_canon_term(a) for a in t.args)
        if t.op == "-" and len(args) == 1:
            return Compound("neg", args)
        if t.op == "!":
            return Compound("not", args)
        if t.op == "<-":
            return Compound("impl", (args[1], args[0]))
        return Compound(canonical_functor(t.op), args)
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(_canon_term(a) for a in t.args))
    if isinstance(t, ListTerm):
        return ListTerm(tuple(_canon_term(a) for a in t.items))
    if isinstance(t, IntensionalList):
        return IntensionalList(t.name, tuple(_canon_term(a) for a in t.prefix),
                               t.arity)
    if isinstance(t, RangeTerm):
        return RangeTerm(_canon_term(t.lo), _canon_term(t.hi))
    return t


def _preprocess_atom(a: Atom) -> Atom:
    if a.rel == "required":
        return Atom(a.rel, tuple(_canon_term(arg) for arg in a.args))
    return a


def preprocess(p: EzProgram) -> EzProgram:
    """Rewrite operators inside required-arguments to canonical functors.

    ``required(v > 2)`` becomes ``required(gt(v,2))``; built-ins outside
    required are untouched (the grounder evaluates them).  Idempotent.
    """
    out = []
    for r in p.rules:
        head = r.head
        if isinstance(head, Atom):
            head = _preprocess_atom(head)
        elif isinstance(head, Choice):
            head = Choice(head.lower,
                          tuple(ChoiceElem(_preprocess_atom(e.atom), e.conds)
                                for e in head.elems),
                          head.upper)
        body = tuple(Lit(b.kind, _preprocess_atom(b.atom))
                     if isinstance(b, Lit) else b
                     for b in r.body)
        out.append(Rule(head, body, r.pos))
    return EzProgram(tuple(out))


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

def _print_term(t: Term) -> str:
    if isinstance(t, Const):
        return str(t.value)
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Compound):
        return f"{t.functor}({','.join(_print_term(a) for a in t.args)})"
    if isinstance(t, OpExpr):
        if len(t.args) == 1:
            return f"{t.op}{_print_paren(t.args[0], t.op, 'right')}"
        lhs = _print_paren(t.args[0], t.op, "left")
        rhs = _print_paren(t.args[1], t.op, "right")
        return f"{lhs} {t.op} {rhs}"
    if isinstance(t, ListTerm):
        return f"[{','.join(_print_term(a) for a in t.items)}]"
    if isinstance(t, IntensionalList):
        if t.prefix:
            inner = f"{t.name}({','.join(_print_term(a) for a in t.prefix)})"
        else:
            inner = t.name
        return f"[{inner}/{t.arity}]"
    if isinstance(t, RangeTerm):
        return f"{_print_term(t.lo)}..{_print_term(t.hi)}"
    raise TypeError(f"not a term: {t!r}")


def _op_level(op: str) -> int:
    return _INFIX_BP.get(op, (100, 100))[0]


_RIGHT_ASSOC = frozenset({"->", "<-"})


def _print_paren(t: Term, parent_op: str, side: str) -> str:
    s = _print_term(t)
    if not (isinstance(t, OpExpr) and len(t.args) == 2):
        return s
    child, parent = _op_level(t.op), _op_level(parent_op)
    if child < parent:
        return f"({s})"
    if child == parent:
        assoc_side = "right" if parent_op in _RIGHT_ASSOC else "left"
        if side != assoc_side:
            return f"({s})"
    return s


def _print_atom(a: Atom) -> str:
    if not a.args:
        return a.rel
    return f"{a.rel}({','.join(_print_term(t) for t in a.args)})"


def _print_body_element(b: BodyElement) -> str:
    if isinstance(b, Lit):
        prefix = {"pos": "", "not": "not ", "notnot": "not not "}[b.kind]
        return prefix + _print_atom(b.atom)
    if isinstance(b, BuiltinLit):
        return f"{_print_term(b.lhs)} {b.op} {_print_term(b.rhs)}"
    if isinstance(b, AggregateLit):
        items = ",".join(
            _print_atom(it.atom)
            + (f" = {_print_term(it.weight)}" if it.weight is not None else "")
            + "".join(f" : {_print_atom(c)}" for c in it.conds)
            for it in b.items)
        s = f"#sum[{items}]"
        if b.lower is not None:
            s = f"{_print_term(b.lower)} {s}"
        if b.upper is not None:
            s = f"{s} {_print_term(b.upper)}"
        return s
    raise TypeError(f"not a body element: {b!r}")


def _print_rule(r: Rule) -> str:
    parts = []
    if isinstance(r.head, Atom):
        parts.append(_print_atom(r.head))
    elif isinstance(r.head, Choice):
        elems = "; ".join(
            _print_atom(e.atom) + "".join(f" : {_print_atom(c)}" for c in e.conds)
            for e in r.head.elems)
        s = "{ " + elems + " }"
        if r.head.lower is not None:
            s = f"{_print_term(r.head.lower)} {s}"
        if r.head.upper is not None:
            s = f"{s} {_print_term(r.head.upper)}"
        parts.append(s)
    if r.body:
        parts.append(":- " + ", ".join(_print_body_element(b) for b in r.body))
    elif r.head is None:
        parts.append(":-")
    return " ".join(parts) + "."


def pretty_print(p: EzProgram) -> str:
    """Render a program as re-parseable EZ text (round-trips through parse)."""
    return "\n".join(_print_rule(r) for r in p.rules) + ("\n" if p.rules else "")
