# tests/test_ltl_bridge.py
"""
Tests for the LTLf evaluator, the tau1/tau2 translations from TTL and the
brute-force equivalence oracle that compares them with TTL satisfaction.
"""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tests.strategies import NAMES, concurrent_free_formulas, traces
from ttl_agent.errors import PreconditionError
from ttl_agent.ltl_bridge import (
    And,
    Eventually,
    Next,
    Not,
    Or,
    Prop,
    Until,
    check_prop1,
    compare_semantics,
    default_alphabet,
    find_literal_counterexample,
    ltl_true,
    ltlf_satisfies,
    normalise_sequences,
    render_ltl,
    translate_tau1,
    translate_tau2,
)
from ttl_agent.ttl_core import Atom, Choice, NegAtom, Seq, Trace, parse_ttl, ttl_satisfies

ltl_formulas = st.recursive(
    st.sampled_from(NAMES).map(Prop),
    lambda children: st.one_of(
        children.map(Not),
        children.map(Next),
        children.map(Eventually),
        st.builds(And, children, children),
        st.builds(Or, children, children),
        st.builds(Until, children, children),
    ),
    max_leaves=6,
)


# --- Evaluator ---

def test_proposition_holds_at_its_instant():
    assert ltlf_satisfies(Trace.of({"a"}), 0, Prop("a"))
    assert not ltlf_satisfies(Trace.of({"a"}), 0, Prop("b"))


def test_eventually_looks_ahead_only():
    trace = Trace.of({"a"}, {"b"})
    assert ltlf_satisfies(trace, 0, Eventually(Prop("b")))
    assert not ltlf_satisfies(trace, 2, Eventually(Prop("b"))), "Nothing holds past the end"
    assert not ltlf_satisfies(trace, 1, Eventually(Prop("a")))


def test_next_is_strong():
    trace = Trace.of({"a"}, {"b"})
    assert ltlf_satisfies(trace, 0, Next(Prop("b")))
    assert not ltlf_satisfies(trace, 1, Next(Not(Prop("a")))), "Next must fail at the last instant"


def test_until_requires_the_right_operand():
    trace = Trace.of({"a"}, {"a"}, {"b"})
    assert ltlf_satisfies(trace, 0, Until(Prop("a"), Prop("b")))
    assert not ltlf_satisfies(Trace.of({"a"}, {"a"}), 0, Until(Prop("a"), Prop("b")))
    assert not ltlf_satisfies(Trace.of({"a"}, set(), {"b"}), 0, Until(Prop("a"), Prop("b")))


def test_past_the_end_position():
    trace = Trace.of({"a"})
    assert not ltlf_satisfies(trace, 1, Prop("a"))
    assert ltlf_satisfies(trace, 1, Not(Prop("a")))


@pytest.mark.parametrize("position", [-1, 2])
def test_positions_outside_the_trace_are_rejected(position):
    with pytest.raises(IndexError):
        ltlf_satisfies(Trace.of({"a"}), position, Prop("a"))


@given(ltl_formulas, traces)
def test_eventually_matches_true_until(phi, trace):
    for position in range(len(trace) + 1):
        assert ltlf_satisfies(trace, position, Eventually(phi)) == ltlf_satisfies(
            trace, position, Until(ltl_true("a"), phi)
        )


@given(ltl_formulas, traces)
def test_eventually_is_monotone_towards_the_start(phi, trace):
    values = [ltlf_satisfies(trace, k, Eventually(phi)) for k in range(len(trace) + 1)]
    for k in range(1, len(values)):
        assert values[k - 1] or not values[k], "If F(phi) holds at k it must hold at every earlier position"


# --- Translations ---

def test_tau1_of_atom():
    assert translate_tau1(Atom("wood"), {"wood"}) == Eventually(Prop("wood"))
    assert translate_tau2(Atom("wood"), {"wood"}) == Prop("wood")


def test_negated_atom_ranges_over_the_alphabet():
    witnesses = Or(Prop("grass"), Prop("iron"))
    assert translate_tau1(NegAtom("wood"), {"wood", "iron", "grass"}) == Eventually(And(witnesses, Not(Prop("wood"))))
    assert translate_tau2(NegAtom("wood"), {"wood", "iron"}) == And(Prop("iron"), Not(Prop("wood")))


def test_negated_atom_witnesses_are_sorted():
    for alphabet in (["wood", "iron", "grass"], ["iron", "grass", "wood"], ("grass", "wood", "iron")):
        assert render_ltl(translate_tau2(NegAtom("wood"), alphabet)) == "and(or(p:grass,p:iron),not(p:wood))"


def test_tau2_of_choice():
    assert translate_tau2(Choice(Atom("a"), Atom("b")), {"a", "b"}) == Or(Prop("a"), Prop("b"))


@given(concurrent_free_formulas, concurrent_free_formulas)
def test_tau1_distributes_over_choice(left, right):
    alphabet = set(NAMES)
    for literal in (False, True):
        combined = translate_tau1(Choice(left, right), alphabet, literal=literal)
        assert combined == Or(translate_tau1(left, alphabet, literal=literal),
                              translate_tau1(right, alphabet, literal=literal))


def test_literal_clauses_unfold_left_nested_sequences():
    formula = Seq(Seq(Atom("a"), Atom("b")), Atom("c"))
    expected = Eventually(And(Prop("a"), Eventually(And(Prop("b"), Eventually(Prop("c"))))))
    assert translate_tau1(formula, {"a", "b", "c"}, literal=True) == expected


def test_sound_translation_requires_a_later_start():
    formula = Seq(Seq(Atom("a"), Atom("b")), Atom("c"))
    expected = Eventually(And(Prop("a"), Next(Eventually(And(Prop("b"), Next(Eventually(Prop("c"))))))))
    assert translate_tau1(formula, {"a", "b", "c"}) == expected


def test_normalise_sequences_distributes_a_leading_choice():
    formula = parse_ttl("(a | b) ; c")
    assert normalise_sequences(formula) == Choice(Seq(Atom("a"), Atom("c")), Seq(Atom("b"), Atom("c")))


@given(concurrent_free_formulas, traces)
def test_normalise_sequences_preserves_satisfaction(formula, trace):
    assert ttl_satisfies(trace, normalise_sequences(formula)) == ttl_satisfies(trace, formula)


def test_translation_preconditions():
    with pytest.raises(PreconditionError):
        translate_tau1(parse_ttl("a & b"), {"a", "b"})
    with pytest.raises(PreconditionError, match="alphabet lacks atoms"):
        translate_tau1(parse_ttl("a ; c"), {"a", "b"})
    with pytest.raises(PreconditionError, match="needs another proposition"):
        translate_tau2(NegAtom("a"), {"a"})


def test_prefix_notation():
    assert render_ltl(translate_tau1(Atom("wood"), {"wood"})) == "F(p:wood)"
    assert str(translate_tau1(parse_ttl("a ; b"), {"a", "b"})) == "F(and(p:a,X(F(p:b))))"
    assert render_ltl(Until(Not(Prop("a")), Or(Prop("a"), Prop("b")))) == "U(not(p:a),or(p:a,p:b))"


# --- Equivalence oracle ---

def test_compare_semantics_on_small_cases():
    assert compare_semantics(Atom("a"), Trace.of({"a"}), ("a", "b")) == (True, True, True)
    seq = Seq(Atom("a"), Atom("b"))
    assert compare_semantics(seq, Trace.of({"a"}, {"b"}), ("a", "b")) == (True, True, True)
    assert compare_semantics(seq, Trace.of({"b"}, {"a"}), ("a", "b")) == (False, False, False)


@given(concurrent_free_formulas, traces)
def test_sound_translation_agrees_with_ttl(formula, trace):
    ttl, tau1, eventually_tau2 = compare_semantics(formula, trace, NAMES)
    assert ttl == tau1 == eventually_tau2


def test_check_prop1_finds_no_disagreement():
    report = check_prop1(seed=0, trials=2000)
    assert report.trials == 2000
    assert report.passed, report.counterexample and report.counterexample.describe()
    assert report.agreements == 2000


@pytest.mark.slow
def test_check_prop1_full_budget():
    report = check_prop1(seed=1, trials=10_000, formula_depth=3, trace_len=8, alphabet_size=5)
    assert report.disagreements == 0


def test_literal_clauses_disagree_with_ttl():
    report = check_prop1(seed=0, trials=2000, literal=True)
    assert not report.passed, "The literal clauses accept traces where both halves share an instant"
    assert report.counterexample is not None
    ce = report.counterexample
    assert ce.ttl != ce.tau1 or ce.ttl != ce.eventually_tau2


def test_smallest_literal_counterexample():
    ce = find_literal_counterexample()
    assert (ce.ttl, ce.tau1, ce.eventually_tau2) == (False, True, True)
    assert "formula=a ; a" in ce.describe()


@pytest.mark.parametrize("kwargs", [{"alphabet_size": 1}, {"trials": 0}])
def test_check_prop1_preconditions(kwargs):
    arguments = {"seed": 0, "trials": 10}
    arguments.update(kwargs)
    with pytest.raises(PreconditionError):
        check_prop1(**arguments)


def test_default_alphabet():
    assert default_alphabet(3) == ("p0", "p1", "p2")
    assert default_alphabet(0) == ()
