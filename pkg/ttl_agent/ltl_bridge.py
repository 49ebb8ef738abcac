"""
This module connects TTL to Linear-time Temporal Logic on finite traces (LTLf).
It provides:
- An LTLf formula AST and a direct recursive evaluator with strong Next.
- The translations tau1 and tau2 from TTL to LTLf, both in the literal
  clause-by-clause form and in a sound form that agrees with TTL's
  finite-trace semantics on every trace.
- A seeded brute-force oracle that checks the three-way equivalence
  TTL  <=>  tau1  <=>  eventually(tau2) on random formulas and traces.
- A prefix text notation used by the `translate` CLI command.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache, reduce

import numpy as np

from ttl_agent.errors import PreconditionError
from ttl_agent.ttl_core import (
    Atom,
    Choice,
    NegAtom,
    Seq,
    Trace,
    atoms_of,
    random_formula,
    random_trace,
    render_trace,
    render_ttl,
    require_concurrent_free,
    ttl_satisfies,
)

logger = logging.getLogger(__name__)


class LtlFormula:
    __slots__ = ()

    def __str__(self):
        return render_ltl(self)


@dataclass(frozen=True)
class Prop(LtlFormula):
    name: str


@dataclass(frozen=True)
class Not(LtlFormula):
    operand: LtlFormula


@dataclass(frozen=True)
class And(LtlFormula):
    left: LtlFormula
    right: LtlFormula


@dataclass(frozen=True)
class Or(LtlFormula):
    left: LtlFormula
    right: LtlFormula


@dataclass(frozen=True)
class Next(LtlFormula):
    operand: LtlFormula


@dataclass(frozen=True)
class Until(LtlFormula):
    left: LtlFormula
    right: LtlFormula


@dataclass(frozen=True)
class Eventually(LtlFormula):
    operand: LtlFormula


def ltl_true(name):
    """`p or not p`: a tautology built from any proposition name."""
    return Or(Prop(name), Not(Prop(name)))


# --- Evaluation ----------------------------------------------------------------

def ltlf_satisfies(trace, position, formula):
    """
    Evaluates an LTLf formula at `position` of a finite trace.

    Position len(trace) is the past-the-end point where no proposition holds.
    Next is strong: it fails at the last instant.

    Raises:
        IndexError: If position is negative or beyond len(trace).
    """
    steps = trace.steps if isinstance(trace, Trace) else Trace(tuple(trace)).steps
    n = len(steps)
    if not 0 <= position <= n:
        raise IndexError(f"position {position} outside 0..{n}")

    @lru_cache(maxsize=None)
    def holds(phi, k):
        if isinstance(phi, Prop):
            return k < n and phi.name in steps[k]
        if isinstance(phi, Not):
            return not holds(phi.operand, k)
        if isinstance(phi, And):
            return holds(phi.left, k) and holds(phi.right, k)
        if isinstance(phi, Or):
            return holds(phi.left, k) or holds(phi.right, k)
        if isinstance(phi, Next):
            return k + 1 < n and holds(phi.operand, k + 1)
        if isinstance(phi, Eventually):
            return any(holds(phi.operand, m) for m in range(k, n))
        if isinstance(phi, Until):
            for m in range(k, n):
                if holds(phi.right, m):
                    return True
                if not holds(phi.left, m):
                    return False
            return False
        raise PreconditionError(f"Not an LTL formula: {phi!r}")

    return holds(formula, position)


# --- Translations -------------------------------------------------------------------

def _disjunction(props):
    return reduce(Or, props)


def _negated_atom(name, alphabet):
    """
    `name~` as (OR of the other propositions) AND NOT name. The witnesses are
    sorted, so over {wood, iron, grass} the disjunction is `grass | iron` and
    the translation does not depend on how the alphabet was ordered.
    """
    witnesses = sorted(set(alphabet) - {name})
    if not witnesses:
        raise PreconditionError(f"negated atom {name!r} needs another proposition in the alphabet")
    return And(_disjunction([Prop(b) for b in witnesses]), Not(Prop(name)))


def _check_alphabet(formula, alphabet):
    require_concurrent_free(formula, "translation")
    missing = atoms_of(formula) - set(alphabet)
    if missing:
        raise PreconditionError(f"alphabet lacks atoms {sorted(missing)}")


def normalise_sequences(formula):
    """
    Rewrites a Concurrent-free formula so that the left operand of every Seq
    is a (negated) atom, using the TTL equivalences
    (T1;T2);T' = T1;(T2;T') and (T1|T2);T' = (T1;T') | (T2;T').
    """
    if isinstance(formula, (Atom, NegAtom)):
        return formula
    if isinstance(formula, Choice):
        return Choice(normalise_sequences(formula.left), normalise_sequences(formula.right))
    left, right = formula.left, formula.right
    if isinstance(left, Seq):
        return normalise_sequences(Seq(left.left, Seq(left.right, right)))
    if isinstance(left, Choice):
        return Choice(normalise_sequences(Seq(left.left, right)), normalise_sequences(Seq(left.right, right)))
    return Seq(left, normalise_sequences(right))


def _tau(formula, alphabet, eventually, literal):
    if isinstance(formula, Atom):
        body = Prop(formula.name)
        return Eventually(body) if eventually else body
    if isinstance(formula, NegAtom):
        body = _negated_atom(formula.name, alphabet)
        return Eventually(body) if eventually else body
    if isinstance(formula, Choice):
        return Or(_tau(formula.left, alphabet, eventually, literal),
                  _tau(formula.right, alphabet, eventually, literal))
    left, right = formula.left, formula.right
    if literal and isinstance(left, Seq):
        head = _tau(left.left, alphabet, False, literal)
        rest = _tau(Seq(left.right, right), alphabet, True, literal)
        body = And(head, rest)
    elif literal:
        body = And(_tau(left, alphabet, False, literal), _tau(right, alphabet, True, literal))
    else:
        body = And(_tau(left, alphabet, False, literal), Next(_tau(right, alphabet, True, literal)))
    return Eventually(body) if eventually else body


def translate_tau1(formula, alphabet, literal=False):
    """
    Translates a Concurrent-free TTL formula into LTLf (the tau1 translation).

    Args:
        formula (TtlFormula): Concurrent-free formula.
        alphabet (iterable of str): Proposition universe; the negated atom
            `a~` becomes `F((or of p_b for b != a) and not p_a)` over it.
        literal (bool): If True, emit the textbook clauses verbatim:
            tau1(T;T') = F(tau2(T) and tau1(T')), with (T1;T2);T' unfolded as
            F(tau2(T1) and tau1(T2;T')). Those clauses let T' start at the
            same instant T ends, so they accept e.g. `a ; a` on [{a}].
            If False (default), Seq left operands are first normalised to
            atoms and T' is required to start strictly later:
            F(tau2(a) and X tau1(T')). This form agrees with ttl_satisfies.

    Raises:
        PreconditionError: On Concurrent nodes, atoms missing from the
                           alphabet, or a negated atom with no witness.
    """
    _check_alphabet(formula, alphabet)
    if not literal:
        formula = normalise_sequences(formula)
    return _tau(formula, alphabet, True, literal)


def translate_tau2(formula, alphabet, literal=False):
    """
    The tau2 translation: the "holds now" counterpart of tau1, so that
    F(tau2(T)) is equivalent to tau1(T). The tail of a Seq is delegated to
    tau1. Arguments and errors as for translate_tau1.
    """
    _check_alphabet(formula, alphabet)
    if not literal:
        formula = normalise_sequences(formula)
    return _tau(formula, alphabet, False, literal)


# --- Prefix notation -------------------------------------------------------------

def render_ltl(formula):
    """Prefix notation: F(..), X(..), U(..,..), and(..,..), or(..,..), not(..), p:<name>."""
    if isinstance(formula, Prop):
        return f"p:{formula.name}"
    if isinstance(formula, Not):
        return f"not({render_ltl(formula.operand)})"
    if isinstance(formula, Next):
        return f"X({render_ltl(formula.operand)})"
    if isinstance(formula, Eventually):
        return f"F({render_ltl(formula.operand)})"
    names = {And: "and", Or: "or", Until: "U"}
    return f"{names[type(formula)]}({render_ltl(formula.left)},{render_ltl(formula.right)})"


# --- Equivalence oracle -------------------------------------------------------------

@dataclass(frozen=True)
class Counterexample:
    formula: object
    trace: Trace
    ttl: bool
    tau1: bool
    eventually_tau2: bool

    def describe(self):
        return (f"formula={render_ttl(self.formula)} trace={render_trace(self.trace).strip().replace(chr(10), ' | ')} "
                f"ttl={self.ttl} tau1={self.tau1} F(tau2)={self.eventually_tau2}")


@dataclass
class EquivalenceReport:
    trials: int = 0
    agreements: int = 0
    disagreements: int = 0
    literal: bool = False
    counterexample: Counterexample = field(default=None)

    @property
    def passed(self):
        return self.disagreements == 0


def compare_semantics(formula, trace, alphabet, literal=False):
    """Returns (ttl, tau1, eventually tau2) truth values for one formula/trace pair."""
    a = ttl_satisfies(trace, formula)
    b = ltlf_satisfies(trace, 0, translate_tau1(formula, alphabet, literal=literal))
    c = ltlf_satisfies(trace, 0, Eventually(translate_tau2(formula, alphabet, literal=literal)))
    return a, b, c


def default_alphabet(size):
    """
    Proposition names for randomized checks.

    Args:
        size (int): Number of propositions.

    Returns:
        tuple: ("p0", "p1", ...) with `size` entries.
    """
    return tuple(f"p{k}" for k in range(size))


def check_prop1(seed, trials, formula_depth=3, trace_len=8, alphabet_size=5, literal=False, max_labels=2):
    """
    Brute-force check that TTL satisfaction, tau1 and F(tau2) agree.

    Each trial draws a random Concurrent-free formula of depth <= formula_depth
    and a random trace of length <= trace_len over an alphabet of
    `alphabet_size` propositions, then evaluates all three.

    Returns:
        EquivalenceReport: Agreement counts and the first counterexample, if any.
            Disagreement is reported as data, never raised.
    """
    if alphabet_size < 2:
        raise PreconditionError("check_prop1 needs alphabet_size >= 2 so negation has a witness")
    if trials < 1:
        raise PreconditionError("check_prop1 needs at least one trial")
    alphabet = default_alphabet(alphabet_size)
    rng = np.random.default_rng(seed)
    report = EquivalenceReport(literal=literal)
    for _ in range(trials):
        formula = random_formula(rng, formula_depth, alphabet, allow_concurrent=False)
        trace = random_trace(rng, trace_len, alphabet, max_labels=max_labels)
        a, b, c = compare_semantics(formula, trace, alphabet, literal=literal)
        report.trials += 1
        if a == b == c:
            report.agreements += 1
            continue
        report.disagreements += 1
        if report.counterexample is None:
            report.counterexample = Counterexample(formula, trace, a, b, c)
            logger.info("Translation disagreement: %s", report.counterexample.describe())
    return report


def find_literal_counterexample():
    """
    The smallest witness that the literal clauses differ from TTL:
    `a ; a` on the one-instant trace [{a}].
    """
    formula = Seq(Atom("a"), Atom("a"))
    trace = Trace.of({"a"})
    a, b, c = compare_semantics(formula, trace, ("a", "b"), literal=True)
    return Counterexample(formula, trace, a, b, c)
