import pytest

from ezcasp import fd
from ezcasp.ground import (GroundError, VariableDecl, canon_atom,
                           canon_term, display_atom, display_term,
                           expand_lists, ground, ground_program, term_key)
from ezcasp.lang import (Atom, Compound, Const, EzProgram, IntensionalList,
                         Lit, ListTerm, Rule, parse, preprocess)

from bruteforce import brute_ground, library_ground_canon
from conftest import LIGHT_EZ, RIDDLE_EZ


def _ground_text(text: str) -> EzProgram:
    return ground(preprocess(parse(text)))


# -- instantiation ---------------------------------------------------------------

def test_riddle_rule_grounds_to_three_rules():
    g = _ground_text("""
        index(1). index(2). index(3).
        youngest_brother(2) :- not some.
        some.
        cspdomain(fd).
        cspvar(age(B),1,80) :- index(B).
        required(age(BY) >= 6) :- index(BY), youngest_brother(BY).
    """)
    req = [r for r in g.rules
           if isinstance(r.head, Atom) and r.head.rel == "required"
           and r.body]
    assert len(req) == 3
    bodies = sorted(canon_atom(r.body[0].atom) for r in req)
    assert bodies == ["index(1)", "index(2)", "index(3)"]
    # instances keep their bodies intact (no fact simplification)
    for r in req:
        assert [b.kind for b in r.body] == ["pos", "pos"]


def test_ground_is_fixpoint_on_ground_input():
    src = "a. b :- a, not c. :- b, not a."
    g1 = _ground_text(src)
    g2 = ground(g1)
    assert library_ground_canon(g1) == library_ground_canon(g2)


def test_builtins_evaluated_and_eliminated():
    g = _ground_text("p(1). p(2). q(X,Y) :- p(X), p(Y), X < Y.")
    q = [r for r in g.rules if isinstance(r.head, Atom) and r.head.rel == "q"]
    assert [canon_atom(r.head) for r in q] == ["q(1,2)"]
    assert all(not any(True for b in r.body if not isinstance(b, Lit))
               for b in q for r in q)


def test_equality_binding():
    g = _ground_text("p(1). p(2). q(Y) :- p(X), Y = X + 1.")
    q = sorted(canon_atom(r.head) for r in g.rules
               if isinstance(r.head, Atom) and r.head.rel == "q")
    assert q == ["q(2)", "q(3)"]


def test_range_heads_expand():
    g = _ground_text("length(2). xcoord(-2*N..2*N) :- length(N).")
    xs = {canon_atom(r.head) for r in g.rules
          if isinstance(r.head, Atom) and r.head.rel == "xcoord"}
    assert xs == {f"xcoord({v})" for v in range(-4, 5)}


def test_choice_condition_expansion():
    g = _ground_text("leaf(l1). leaf(l2). location(0). location(1)."
                     "1 { pos(L,N) : location(N) } 1 :- leaf(L).")
    choices = [r for r in g.rules if not isinstance(r.head, (Atom, type(None)))]
    assert len(choices) == 2
    for ch in choices:
        assert ch.head.lower == Const(1) and ch.head.upper == Const(1)
        assert len(ch.head.elems) == 2


def test_unsafe_rule_reports_variable():
    with pytest.raises(GroundError) as e:
        _ground_text("p(1). q(X) :- not p(X).")
    assert "unsafe" in str(e.value) and "X" in str(e.value)


def test_unsafe_head_variable():
    with pytest.raises(GroundError):
        _ground_text("q(X, Y) :- p(X). p(1).")


def test_arithmetic_on_symbolic_term_fails():
    with pytest.raises(GroundError) as e:
        _ground_text("p(a). q(X) :- p(X), X < 3 + foo.")
    assert "non-integer" in str(e.value) or "arith" in str(e.value)


def test_aggregate_over_facts():
    g = _ground_text("w(a,2). w(b,3). ok :- #sum[w(a,2) = 2, w(b,3) = 3] 5.")
    ok = [r for r in g.rules
          if isinstance(r.head, Atom) and r.head.rel == "ok"]
    assert len(ok) == 1 and not ok[0].body
    g2 = _ground_text("w(a,2). w(b,3). ok :- #sum[w(a,2) = 2, w(b,3) = 3] 4.")
    assert not [r for r in g2.rules
                if isinstance(r.head, Atom) and r.head.rel == "ok"]


def test_aggregate_over_nonfactual_atom_rejected():
    with pytest.raises(GroundError) as e:
        _ground_text("{ w }. ok :- #sum[w = 1] 3.")
    assert "non-factual" in str(e.value)


def test_grounding_equivalence_with_bruteforce():
    corpus = [
        "p(1). p(2). p(3). q(X,Y) :- p(X), p(Y), X < Y.",
        "e(a,b). e(b,c). e(c,a). r(X,Y) :- e(X,Y). r(X,Z) :- e(X,Y), r(Y,Z).",
        "n(1). n(2). m(X) :- n(X), not bad(X). bad(2) :- n(2).",
        "f(a). g(b). h(X,Y) :- f(X), g(Y). :- h(X,Y), f(X), g(Y).",
        "p(f(a)). p(f(b)). q(X) :- p(f(X)).",
        "d(1). d(2). { c(X) } :- d(X). e(X) :- d(X), not c(X).",
    ]
    for src in corpus:
        p = preprocess(parse(src))
        assert library_ground_canon(ground(p)) == brute_ground(p), src


# -- term order and canonical forms ------------------------------------------------

def test_term_order():
    ints = [Const(-1), Const(3)]
    syms = [Const("a"), Const("b")]
    comp = [Compound("f", (Const(1),)), Compound("f", (Const(1), Const(2))),
            Compound("g", (Const(0),))]
    ordered = sorted([comp[2], syms[1], ints[1], comp[0], ints[0], syms[0],
                      comp[1]], key=term_key)
    assert ordered == ints + syms + comp


def test_display_restores_operators():
    t = Compound("geq", (Const("x"), Const(12)))
    assert display_term(t) == "x >= 12"
    assert display_atom(Atom("required", (t,))) == "required(x >= 12)"
    inner = Compound("or", (Compound("lt", (Const("y"), Const(3))),
                            Compound("neg", (Const("z"),))))
    assert display_term(inner) == "y < 3 \\/ -z"


# -- intensional lists ---------------------------------------------------------------

def _decls(*terms):
    return [VariableDecl(f"cspvar({canon_term(t)})", t, 0, 9) for t in terms]


def _wrap(*rules):
    return EzProgram(tuple(rules))


def test_lambda_v_prefix_expansion():
    decls = _decls(Compound("v", (Const(1),)), Compound("v", (Const(2),)),
                   Compound("v", (Const(3),)),
                   Compound("w", (Const("a"), Const(1))),
                   Compound("w", (Const("a"), Const(2))),
                   Compound("w", (Const("b"), Const(1))))
    prog = _wrap(Rule(Atom("required", (Compound(
        "all_different", (IntensionalList("w", (Const("a"),), 2),)),)), ()))
    out, warnings = expand_lists(prog, decls)
    arg = out.rules[0].head.args[0].args[0]
    assert arg == ListTerm((Compound("w", (Const("a"), Const(1))),
                            Compound("w", (Const("a"), Const(2)))))
    assert not warnings
    # [v/1] expands to all three v variables in lexicographic order
    prog2 = _wrap(Rule(Atom("required", (Compound(
        "all_different", (IntensionalList("v", (), 1),)),)), ()))
    out2, _ = expand_lists(prog2, decls)
    assert out2.rules[0].head.args[0].args[0] == ListTerm(
        (Compound("v", (Const(1),)), Compound("v", (Const(2),)),
         Compound("v", (Const(3),))))


def test_lambda_r_expansion():
    prog = preprocess(parse(
        "rpp(a,3). rpp(b,1). rpp(c,2). required(sum([rpp/2], =<, 9))."))
    out, _ = expand_lists(prog, [])
    assert out.rules[-1].head.args[0].args[0] == ListTerm(
        (Const(3), Const(1), Const(2)))


def test_lambda_r_prefix_expansion():
    prog = preprocess(parse(
        "rp(a,1,3). rp(a,2,1). rp(b,5,7)."
        "required(sum([rp(a,2)/3], =<, 9))."
        "required(sum([rp(a)/3], =<, 9))."))
    out, _ = expand_lists(prog, [])
    assert out.rules[-2].head.args[0].args[0] == ListTerm((Const(1),))
    assert out.rules[-1].head.args[0].args[0] == ListTerm((Const(3), Const(1)))


def test_lambda_empty_expansion_warns():
    # declared functor and arity match, but no variable has the prefix
    prog = _wrap(Rule(Atom("required", (Compound(
        "all_different", (IntensionalList("v", (Const(9),), 1),)),)), ()))
    decls = _decls(Compound("v", (Const(1),)), Compound("v", (Const(2),)))
    out, warnings = expand_lists(prog, decls)
    assert out.rules[0].head.args[0].args[0] == ListTerm(())
    assert warnings and "empty expansion" in warnings[0]


def test_lambda_unknown_name_rejected():
    prog = _wrap(Rule(Atom("required", (Compound(
        "all_different", (IntensionalList("nosuch", (), 1),)),)), ()))
    with pytest.raises(GroundError) as e:
        expand_lists(prog, [])
    assert "undeclared" in str(e.value)


def test_expansion_outputs_are_sorted():
    import random
    rng = random.Random(3)
    terms = [Compound("v", (Const(i),)) for i in rng.sample(range(20), 8)]
    prog = _wrap(Rule(Atom("required", (Compound(
        "all_different", (IntensionalList("v", (), 1),)),)), ()))
    out, _ = expand_lists(prog, _decls(*terms))
    items = out.rules[0].head.args[0].args[0].items
    keys = [term_key(t) for t in items]
    assert keys == sorted(keys)


# -- CA construction -------------------------------------------------------------

def test_e1_linking_denials():
    P = ground_program(LIGHT_EZ)
    assert len(P.constraint_order) == 2
    names = P.pi.names
    for cid in P.constraint_order:
        beta = names[cid]
        req = f"required({beta[1:-1]})"
        denials = [r for r in P.pi.rules if r.head is None
                   and (cid in r.pos or cid in r.neg)]
        assert len(denials) == 2
        kinds = {(tuple(names[a] for a in d.pos),
                  tuple(names[a] for a in d.neg)) for d in denials}
        assert kinds == {((req,), (beta,)), ((beta,), (req,))}
        # constraint atoms never occur in heads
        assert all(r.head != cid for r in P.pi.rules)


def test_pure_asp_program_has_empty_constraint_alphabet():
    P = ground_program("a. b :- a, not c. { c }.")
    assert P.constraint_order == [] and P.gamma == {}


def test_cspvar_ranges_become_declarations():
    P = ground_program(LIGHT_EZ)
    (decl,) = P.var_decls
    assert decl.var == "x" and (decl.lo, decl.hi) == (0, 23)
    # a declaration is active when its cspvar atom is true in M
    m = [decl.atom + 1, P.pi.index["|x >= 12|"] + 1]
    inst = fd.build_csp(P, m, "weak")
    assert (inst.domains["x"].lo, inst.domains["x"].hi) == (0, 23)
    # without the declaration atom the variable falls back to the fd range
    inst2 = fd.build_csp(P, [P.pi.index["|x >= 12|"] + 1], "weak")
    assert inst2.domains["x"].hi == 2 ** 20


def test_riddle_conditional_declarations():
    P = ground_program(RIDDLE_EZ)
    assert len(P.var_decls) == 3
    assert all(d.atom is not None for d in P.var_decls)


@pytest.mark.parametrize("src,fragment", [
    ("cspdomain(q). cspvar(x,0,1). required(x > 0).", "unsupported domain"),
    ("cspdomain(r). cspvar(x,0,1). required(x > 0).", "unsupported domain"),
    ("cspdomain(fd). cspdomain(fd). cspvar(x,0,1).", "duplicate"),
    ("cspvar(x,0,1). required(x > 0).", "missing cspdomain"),
    ("cspdomain(fd). cspvar(x,0,1). required(y > 0).", "undeclared"),
    ("cspdomain(fd). cspvar(x,0,1). a :- required(x > 0).", "heads"),
    ("cspdomain(fd). cspvar(x,1,0).", "lower <= upper"),
    ("cspdomain(fd). cspvar(5,0,1).", "integer"),
])
def test_ca_errors(src, fragment):
    with pytest.raises(GroundError) as e:
        ground_program(src)
    assert fragment in str(e.value)


def test_alphabets_disjoint_by_construction():
    # a regular atom spelled like the required-argument's canonical form
    # stays a separate atom: constraint atoms live in the |..| name space
    P = ground_program("cspdomain(fd). cspvar(x,0,5). required(x > 0). "
                       "gt(x,0).")
    names = set(P.pi.names)
    assert "gt(x,0)" in names and "|x > 0|" in names
    assert "required(x > 0)" in names
    for cid in P.constraint_order:
        assert P.classify(cid) == "constraint"
        assert all(r.head != cid for r in P.pi.rules)


def test_choice_bounds_compile():
    P = ground_program("d(1). d(2). d(3). 1 { c(X) : d(X) } 2.")
    denials = [r for r in P.pi.rules if r.head is None]
    # lower 1: one all-false denial over 3 elements; upper 2: C(3,3)=1 denial
    lower = [d for d in denials if len(d.neg) == 3]
    upper = [d for d in denials if len(d.pos) == 3]
    assert len(lower) == 1 and len(upper) == 1
    from ezcasp.asp import enumerate_answer_sets_bruteforce
    sets = enumerate_answer_sets_bruteforce(P.pi)
    counts = sorted(sum(1 for a in s if a.startswith("c(")) for s in sets)
    assert counts == [1, 1, 1, 2, 2, 2]


def test_choice_bounds_violate_order():
    with pytest.raises(GroundError):
        ground_program("d(1). 2 { c(X) : d(X) } 1.")


def test_default_range_applies_to_rangeless_declaration():
    P = ground_program("cspdomain(fd). cspvar(x). required(x >= 0).",
                       default_range=(0, 7))
    inst = fd.build_csp(P, [P.pi.index["|x >= 0|"] + 1], "weak")
    assert (inst.domains["x"].lo, inst.domains["x"].hi) == (0, 7)


def test_green_color_rule_two_leaf_hand_enumeration():
    # color-assignment rule on a 2-leaf instance; the non-factual leafPos
    # atoms do not restrict, so the instances are exactly the substitutions
    # admitted by the weight/cost facts and the comparison built-in
    g = _ground_text("""
        leaf(l1). leaf(l2).
        leafWeightCardinality(l1,2,1). leafWeightCardinality(l2,3,1).
        leafCost(l1,2). leafCost(l2,1).
        location(0). location(1).
        1 { leafPos(L,N) : location(N) } 1 :- leaf(L).
        posColor(1,green) :- leafPos(L1,0), leafPos(L2,1),
            leafWeightCardinality(L1,WL,CL), leafWeightCardinality(L2,WR,CR),
            leafCost(L2,W3), W1 = WR + CR, W2 = WL + W3, W1 < W2.
    """)
    instances = set()
    for r in g.rules:
        if isinstance(r.head, Atom) and r.head.rel == "posColor":
            pair = tuple(canon_atom(b.atom) for b in r.body
                         if b.atom.rel == "leafPos")
            instances.add(pair)
    # hand enumeration: W1 = WR+CR, W2 = WL+leafCost(L2); W1 < W2 holds for
    # (L1,L2) in {(l1,l1): 3<4, (l2,l1): 3<5}; fails for (l1,l2): 4<3 and
    # (l2,l2): 4<4
    assert instances == {("leafPos(l1,0)", "leafPos(l1,1)"),
                         ("leafPos(l2,0)", "leafPos(l1,1)")}


def test_aggregate_lower_bound():
    g = _ground_text("w(a). w(b). ok :- 2 #sum[w(a) = 1, w(b) = 1].")
    assert any(isinstance(r.head, Atom) and r.head.rel == "ok"
               for r in g.rules)
    g2 = _ground_text("w(a). ok :- 2 #sum[w(a) = 1].")
    assert not any(isinstance(r.head, Atom) and r.head.rel == "ok"
                   for r in g2.rules)


def test_ca_program_constructor_invariants():
    from ezcasp.asp import RegularProgram
    from ezcasp.ground import CAProgram
    pi = RegularProgram.build([("|c|", [], [], []), (None, ["|c|"], [], [])])
    gamma = {"|c|": fd.Cmp("lt", fd.VarRef("x"), fd.IntConst(1))}
    with pytest.raises(ValueError):          # constraint atom in a head
        CAProgram(pi, ["|c|"], gamma, domain=(0, 5))
    pi2 = RegularProgram.build([(None, ["|c|"], [], [])])
    with pytest.raises(ValueError):          # gamma not defined on exactly C
        CAProgram(pi2, ["|c|"], {}, domain=(0, 5))


def test_ground_fixpoint_with_undefined_positive_atom():
    # an undefined relation in a positive body cannot fire, but the naive
    # ground program keeps the instance; grounding is a fixpoint on it
    src = "a :- ghost. b."
    g1 = _ground_text(src)
    assert library_ground_canon(g1) == {"a:-pos:ghost", "b:-"}
    assert library_ground_canon(ground(g1)) == library_ground_canon(g1)


def test_grounding_equivalence_with_nondomain_sharing():
    # two non-factual atoms sharing a variable: the first (in body order)
    # binds it against the possible atoms, the second does not restrict
    src = ("d(1). d(2). { c(X) } :- d(X). { e(X) } :- d(X). "
           "both(X) :- c(X), e(X).")
    p = preprocess(parse(src))
    assert library_ground_canon(ground(p)) == brute_ground(p)
