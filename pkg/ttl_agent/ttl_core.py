"""
This module defines Task Temporal Logic (TTL), the instruction language of the
agent. It includes:
- The formula AST (atoms, postfix negation on atoms, sequence, choice and the
  concurrent abbreviation) and the finite traces formulas are evaluated on.
- A lark-based parser for the ASCII concrete syntax (`~ & ; |`, with the
  Unicode aliases `∼ ∩ ∪`) and a canonical pretty-printer.
- Concurrent-operator expansion and the finite-trace satisfaction relation.
- Seeded generators of random formulas and traces for property testing.

Grammar, loosest to tightest binding (all binary operators left-associative):

    formula := choice
    choice  := seq ("|" seq)*
    seq     := conc (";" conc)*
    conc    := unary ("&" unary)*
    unary   := IDENT "~" | IDENT | "(" formula ")"
    IDENT   := [a-z_][a-z0-9_]*
"""

import logging
import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from lark import Lark, Transformer, v_args
from lark.exceptions import UnexpectedCharacters, UnexpectedInput

from ttl_agent.errors import PreconditionError, TraceFormatError, TtlSyntaxError

logger = logging.getLogger(__name__)

IDENT_PATTERN = re.compile(r"[a-z_][a-z0-9_]*\Z")
UNICODE_ALIASES = str.maketrans({"∪": "|", "∩": "&", "∼": "~"})
EMPTY_INSTANT = "-"


def validate_atom_name(name):
    """
    Checks that `name` is a legal atomic task name and returns it.

    Raises:
        PreconditionError: If the name is empty or uses characters outside
                           lowercase letters, digits and underscore.
    """
    if not isinstance(name, str) or not IDENT_PATTERN.match(name):
        raise PreconditionError(f"Invalid atom name {name!r}: expected [a-z_][a-z0-9_]*")
    return name


class TtlFormula:
    """Base class of TTL formula nodes. Nodes are immutable and hashable."""

    __slots__ = ()

    def __str__(self):
        return render_ttl(self)


@dataclass(frozen=True)
class Atom(TtlFormula):
    name: str

    def __post_init__(self):
        validate_atom_name(self.name)


@dataclass(frozen=True)
class NegAtom(TtlFormula):
    """`name~`: something different from `name` eventually holds."""

    name: str

    def __post_init__(self):
        validate_atom_name(self.name)


@dataclass(frozen=True)
class _Binary(TtlFormula):
    left: TtlFormula
    right: TtlFormula

    def __post_init__(self):
        for child in (self.left, self.right):
            if not isinstance(child, TtlFormula):
                raise PreconditionError(f"{type(self).__name__} operands must be TTL formulas, got {child!r}")


@dataclass(frozen=True)
class Seq(_Binary):
    pass


@dataclass(frozen=True)
class Choice(_Binary):
    pass


@dataclass(frozen=True)
class Concurrent(_Binary):
    pass


LEAF_TYPES = (Atom, NegAtom)
BINARY_TYPES = (Seq, Choice, Concurrent)


@dataclass(frozen=True)
class Trace:
    """
    A finite path: one label set (the propositions true at that instant) per
    step. Label sets are stored as frozensets of atom names.
    """

    steps: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(frozenset(labels) for labels in self.steps))

    @classmethod
    def of(cls, *label_sets):
        return cls(tuple(label_sets))

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def __getitem__(self, j):
        if not 0 <= j < len(self.steps):
            raise IndexError(f"instant {j} outside trace of length {len(self.steps)}")
        return self.steps[j]

    def subpath(self, i, j):
        """Instants i..j inclusive; empty when i > j."""
        if i > j:
            return Trace(())
        return Trace(self.steps[max(i, 0):j + 1])

    def extended(self, suffix):
        return Trace(self.steps + tuple(suffix))


# --- Parsing and printing -------------------------------------------------

_GRAMMAR = r"""
    ?start: choice

    ?choice: seq
           | choice "|" seq      -> choice_op

    ?seq: conc
        | seq ";" conc           -> seq_op

    ?conc: unary
         | conc "&" unary        -> conc_op

    ?unary: IDENT "~"            -> neg_atom
          | IDENT                -> atom
          | "(" choice ")"

    IDENT: /[a-z_][a-z0-9_]*/

    %import common.WS
    %ignore WS
"""


@v_args(inline=True)
class _AstBuilder(Transformer):
    def atom(self, name):
        return Atom(str(name))

    def neg_atom(self, name):
        return NegAtom(str(name))

    def seq_op(self, left, right):
        return Seq(left, right)

    def choice_op(self, left, right):
        return Choice(left, right)

    def conc_op(self, left, right):
        return Concurrent(left, right)


_PARSER = Lark(_GRAMMAR, parser="lalr", transformer=_AstBuilder())


def _describe_syntax_error(text, err):
    position = getattr(err, "pos_in_stream", None)
    if position is None or position < 0:
        position = len(text)
    if position < len(text) and text[position] == "~":
        reason = "negation '~' must directly follow an atomic task"
    elif isinstance(err, UnexpectedCharacters):
        reason = f"unexpected character {text[position]!r}"
    elif text.count("(") != text.count(")"):
        reason = "unbalanced parentheses"
    elif position >= len(text):
        reason = "unexpected end of formula"
    else:
        reason = f"unexpected {text[position]!r}"
    return reason, position


def parse_ttl(text):
    """
    Parses a TTL formula from its concrete syntax.

    Args:
        text (str): e.g. "((wood ; grass) | (iron ; axe)) ; workbench ; toolshed~".
                    The symbols ∪, ∩ and ∼ are accepted as aliases of |, & and ~.

    Returns:
        TtlFormula: The formula's AST.

    Raises:
        TtlSyntaxError: For empty input, prefix negation, negation of a
                        compound formula, unknown characters or unbalanced
                        parentheses. The error carries the character position.
    """
    if text is None or not text.strip():
        raise TtlSyntaxError("empty formula", text or "", 0)
    normalised = text.translate(UNICODE_ALIASES)
    try:
        return _PARSER.parse(normalised)
    except UnexpectedInput as err:
        reason, position = _describe_syntax_error(normalised, err)
        raise TtlSyntaxError(f"syntax error: {reason}", text, position) from None


_PRECEDENCE = {Choice: 1, Seq: 2, Concurrent: 3}
_OPERATOR = {Choice: "|", Seq: ";", Concurrent: "&"}


def _precedence(node):
    return _PRECEDENCE.get(type(node), 4)


def render_ttl(formula):
    """
    Renders a formula in canonical concrete syntax. Parentheses are emitted
    only where precedence or left-associativity require them, so
    `parse_ttl(render_ttl(f)) == f` for every formula.
    """
    if isinstance(formula, Atom):
        return formula.name
    if isinstance(formula, NegAtom):
        return f"{formula.name}~"
    if isinstance(formula, BINARY_TYPES):
        own = _precedence(formula)
        left = render_ttl(formula.left)
        right = render_ttl(formula.right)
        if _precedence(formula.left) < own:
            left = f"({left})"
        if _precedence(formula.right) <= own:
            right = f"({right})"
        return f"{left} {_OPERATOR[type(formula)]} {right}"
    raise PreconditionError(f"Not a TTL formula: {formula!r}")


# --- Structural operations -----------------------------------------------

def iter_nodes(formula):
    """Yields every node of `formula` in pre-order."""
    stack = [formula]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, BINARY_TYPES):
            stack.append(node.right)
            stack.append(node.left)


def atoms_of(formula):
    """Returns the frozenset of atom names occurring in `formula`."""
    return frozenset(node.name for node in iter_nodes(formula) if isinstance(node, LEAF_TYPES))


def count_choices(formula):
    """Number of Choice nodes in `formula`."""
    return sum(1 for node in iter_nodes(formula) if isinstance(node, Choice))


def is_concurrent_free(formula):
    """
    Args:
        formula (TtlFormula): Any formula.

    Returns:
        bool: True if no node of the formula is a Concurrent.
    """
    return not any(isinstance(node, Concurrent) for node in iter_nodes(formula))


def require_concurrent_free(formula, operation):
    """
    Args:
        formula (TtlFormula): Formula about to be processed.
        operation (str): Name used in the error message.

    Raises:
        PreconditionError: If the formula still holds a Concurrent node.
    """
    if not is_concurrent_free(formula):
        raise PreconditionError(f"{operation} requires a Concurrent-free formula; call expand_concurrent first")


def expand_concurrent(formula):
    """
    Replaces every `T & T'` by `(T ; T') | (T' ; T)`, bottom-up.
    Formulas without Concurrent nodes are returned structurally unchanged.
    """
    if isinstance(formula, LEAF_TYPES):
        return formula
    left = expand_concurrent(formula.left)
    right = expand_concurrent(formula.right)
    if isinstance(formula, Concurrent):
        return Choice(Seq(left, right), Seq(right, left))
    return type(formula)(left, right)


# --- Semantics -------------------------------------------------------------

def ttl_satisfies(trace, formula):
    """
    Decides whether a finite trace satisfies a Concurrent-free TTL formula:

    - `a`: some instant is labelled with a.
    - `a~`: some instant carries a label and a is not among its labels.
    - `T ; T'`: for some split j <= |trace|-2, instants 0..j satisfy T and
      instants j+1..end satisfy T'.
    - `T | T'`: either operand holds on the whole trace.

    The empty trace satisfies nothing.

    Raises:
        PreconditionError: If the formula contains a Concurrent node.
    """
    require_concurrent_free(formula, "ttl_satisfies")
    steps = trace.steps if isinstance(trace, Trace) else Trace(tuple(trace)).steps
    if not steps:
        return False

    @lru_cache(maxsize=None)
    def holds(node, i, j):
        if isinstance(node, Atom):
            return any(node.name in steps[k] for k in range(i, j + 1))
        if isinstance(node, NegAtom):
            return any(steps[k] and node.name not in steps[k] for k in range(i, j + 1))
        if isinstance(node, Seq):
            return any(holds(node.left, i, split) and holds(node.right, split + 1, j) for split in range(i, j))
        return holds(node.left, i, j) or holds(node.right, i, j)

    return holds(formula, 0, len(steps) - 1)


# --- Random generation ------------------------------------------------------

def random_formula(seed, max_depth, alphabet, allow_concurrent=True, leaf_probability=0.3):
    """
    Draws a random TTL formula. Negation is only ever applied to atoms.

    Args:
        seed (int or numpy.random.Generator): A Generator is used (and advanced)
                                              as is; an int seeds a fresh one.
        max_depth (int): Depth bound; depth 1 yields a (negated) atom, so the
                         node count is below 2**max_depth.
        alphabet (iterable of str): Atom names to draw from.
        allow_concurrent (bool): If False, only Seq and Choice are produced.
        leaf_probability (float): Chance of stopping early above depth 1.

    Returns:
        TtlFormula: The generated formula.
    """
    names = sorted(alphabet)
    if not names:
        raise PreconditionError("random_formula needs a non-empty alphabet")
    if max_depth < 1:
        raise PreconditionError("random_formula needs max_depth >= 1")
    rng = np.random.default_rng(seed)
    kinds = BINARY_TYPES if allow_concurrent else (Seq, Choice)

    def build(depth):
        if depth <= 1 or rng.random() < leaf_probability:
            name = names[int(rng.integers(len(names)))]
            return Atom(name) if rng.random() < 0.5 else NegAtom(name)
        kind = kinds[int(rng.integers(len(kinds)))]
        left = build(depth - 1)
        right = build(depth - 1)
        return kind(left, right)

    return build(max_depth)


def random_trace(seed, max_length, alphabet, max_labels=1, empty_probability=0.25):
    """
    Draws a random trace of length 0..max_length over `alphabet`. Each
    instant is empty with `empty_probability`, otherwise it carries between
    1 and `max_labels` distinct atoms.
    """
    names = sorted(alphabet)
    rng = np.random.default_rng(seed)
    length = int(rng.integers(max_length + 1))
    steps = []
    for _ in range(length):
        if rng.random() < empty_probability or not names:
            steps.append(frozenset())
            continue
        size = int(rng.integers(1, min(max_labels, len(names)) + 1))
        picked = rng.choice(len(names), size=size, replace=False)
        steps.append(frozenset(names[int(k)] for k in picked))
    return Trace(tuple(steps))


# --- Trace text format --------------------------------------------------------

def parse_trace(text):
    """
    Parses the trace text format: one instant per line, each line a
    comma-separated list of atom names or "-" for the empty set.

    Raises:
        TraceFormatError: Naming the offending line.
    """
    steps = []
    lines = text.splitlines()
    for number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            if number == len(lines):
                break
            raise TraceFormatError(f"empty line; use '{EMPTY_INSTANT}' for an instant with no labels", number)
        if line == EMPTY_INSTANT:
            steps.append(frozenset())
            continue
        names = [part.strip() for part in line.split(",")]
        for name in names:
            if not IDENT_PATTERN.match(name):
                raise TraceFormatError(f"invalid atom name {name!r}", number)
        steps.append(frozenset(names))
    return Trace(tuple(steps))


def render_trace(trace):
    """Inverse of parse_trace; labels within an instant are sorted."""
    lines = [",".join(sorted(labels)) if labels else EMPTY_INSTANT for labels in trace]
    return "".join(f"{line}\n" for line in lines)
