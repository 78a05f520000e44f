"""Bottom-up enumeration of separating predicates over states.

The grammar is deliberately small: integer leaves are the group's
variables plus a constant pool ({0, 1, -1} and constants harvested from
the problem text); integer operators are binary + and - and multiplication
by a pool constant; the boolean layer is {=, <, <=, >, >=} over two
integer terms, plus negation. Everything produced is linear and
well-sorted by construction.

Enumeration runs strictly by term size (node count), with a fixed total
order on operators and operands inside each size, so the first separator
found is size-minimal and re-runs are deterministic. Two reductions keep
the pools small:

  * syntactic pruning of rewrite-redundant shapes (cancellation,
    identities, double negation, comparisons of identical sides), each of
    which has an equivalent strictly smaller term in the grammar;
  * observational equivalence on the conflict group's states only: terms
    with an already-seen value vector are dropped, keeping the earliest
    (hence smallest) representative of each behavior class.
"""

from __future__ import annotations

from dataclasses import dataclass

from .problem import Problem
from .terms import App, IntLit, State, Term, Value, Var, state_key, subterms

COMPARE_OPS = ("=", "<", "<=", ">", ">=")

DEFAULT_MAX_CANDIDATES = 200_000


@dataclass(frozen=True, slots=True)
class ConflictGroup:
    """States indistinguishable under the current feature set, present on
    both the positive and the negative side."""

    positives: tuple[State, ...]
    negatives: tuple[State, ...]
    variables: tuple[str, ...]


def harvest_constants(problem: Problem) -> tuple[int, ...]:
    """Constant pool for synthesis: 0, 1, -1, then every integer literal
    appearing in the problem's relation bodies, ascending."""
    found: set[int] = set()
    for rel in problem.defs.values():
        for t in subterms(rel.body):
            if isinstance(t, IntLit):
                found.add(t.value)
    extra = sorted(found - {0, 1, -1})
    return (0, 1, -1, *extra)


def prune_redundant(t: Term) -> bool:
    """Whether a grammar-produced term should be discarded as redundant.

    Every discarded shape has an equivalent strictly smaller term that the
    enumeration produces anyway: additive identities (e+0, 0+e, e-0),
    additive inverse cancellation (e+x-x and e-x+x in either operand
    order), multiplicative identity (1*e, e*1), multiplication by zero,
    double negation, and comparisons whose sides are syntactically equal.
    """
    if not isinstance(t, App):
        return False
    a = t.args
    if t.op == "+" and len(a) == 2:
        if IntLit(0) in a:
            return True
        left, right = a
        if isinstance(left, App) and left.op == "-" and len(left.args) == 2 and left.args[1] == right:
            return True
        if isinstance(right, App) and right.op == "-" and len(right.args) == 2 and right.args[1] == left:
            return True
    elif t.op == "-" and len(a) == 2:
        if a[1] == IntLit(0):
            return True
        if isinstance(a[0], App) and a[0].op == "+" and len(a[0].args) == 2 and a[1] in a[0].args:
            return True
    elif t.op == "*":
        if IntLit(1) in a or IntLit(0) in a:
            return True
    elif t.op == "not":
        if isinstance(a[0], App) and a[0].op == "not":
            return True
    elif t.op in COMPARE_OPS:
        if len(a) == 2 and a[0] == a[1]:
            return True
    return False


Vector = tuple[Value, ...]


class _IntPool:
    """Integer terms grouped by size, one representative per value vector
    on the group's states."""

    def __init__(self, variables: tuple[str, ...], constants: tuple[int, ...], states: tuple[State, ...]):
        self.states = states
        self.layers: list[list[tuple[Term, Vector]]] = [[]]  # index = size
        self.seen: set[Vector] = set()
        self.built = 0
        self.candidates = 0
        leaves: list[tuple[Term, Vector]] = []
        for v in variables:
            leaves.append((Var(v), tuple(s[v] for s in states)))
        for c in constants:
            leaves.append((IntLit(c), (c,) * len(states)))
        self.constants = constants
        self._leaf_layer = leaves

    def ensure(self, size: int) -> None:
        while self.built < size:
            self.built += 1
            layer: list[tuple[Term, Vector]] = []
            if self.built == 1:
                for term, vec in self._leaf_layer:
                    self.candidates += 1
                    if vec not in self.seen:
                        self.seen.add(vec)
                        layer.append((term, vec))
            else:
                layer = self._compose(self.built)
            self.layers.append(layer)

    def _compose(self, size: int) -> list[tuple[Term, Vector]]:
        layer: list[tuple[Term, Vector]] = []

        def consider(term: Term, vec: Vector) -> None:
            self.candidates += 1
            if prune_redundant(term) or vec in self.seen:
                return
            self.seen.add(vec)
            layer.append((term, vec))

        for op in ("+", "-"):
            for s1 in range(1, size - 1):
                s2 = size - 1 - s1
                for t1, v1 in self.layers[s1]:
                    for t2, v2 in self.layers[s2]:
                        if op == "+":
                            vec = tuple(a + b for a, b in zip(v1, v2))
                        else:
                            vec = tuple(a - b for a, b in zip(v1, v2))
                        consider(App(op, (t1, t2)), vec)
        # multiplication by a pool constant, constant first
        for c in self.constants:
            for t2, v2 in self.layers[size - 2] if size >= 3 else []:
                vec = tuple(c * b for b in v2)
                consider(App("*", (IntLit(c), t2)), vec)
        return layer


def synthesize_feature(
    group: ConflictGroup,
    max_size: int = 7,
    constants: tuple[int, ...] = (0, 1, -1),
    max_candidates: int = DEFAULT_MAX_CANDIDATES,
) -> Term | None:
    """A size-minimal boolean term that is true on every positive state of
    the group and false on every negative one, or None when the grammar is
    exhausted (no separator within the size bound, an identical state on
    both sides, or the candidate budget ran out).

    `max_size` bounds the integer layer; a feature is a comparison of two
    integer terms (optionally negated), so its total size is at most
    2 * max_size + 2.
    """
    assert group.positives and group.negatives, "conflict groups are nonempty on both sides"
    pos_keys = {state_key(s) for s in group.positives}
    if any(state_key(s) in pos_keys for s in group.negatives):
        return None  # identical states are inseparable by any function

    states = tuple(group.positives) + tuple(group.negatives)
    npos = len(group.positives)

    def separates(vec: Vector) -> bool:
        return all(vec[:npos]) and not any(vec[npos:])

    pool = _IntPool(group.variables, constants, states)
    bool_layers: dict[int, list[tuple[Term, Vector]]] = {}
    seen_bool: set[Vector] = set()

    for fsize in range(3, 2 * max_size + 3):
        layer: list[tuple[Term, Vector]] = []
        for op in COMPARE_OPS:
            for s1 in range(1, min(max_size, fsize - 2) + 1):
                s2 = fsize - 1 - s1
                if s2 < 1 or s2 > max_size:
                    continue
                pool.ensure(max(s1, s2))
                if pool.candidates > max_candidates:
                    return None
                for t1, v1 in pool.layers[s1]:
                    for t2, v2 in pool.layers[s2]:
                        term = App(op, (t1, t2))
                        pool.candidates += 1
                        if pool.candidates > max_candidates:
                            return None
                        if prune_redundant(term):
                            continue
                        vec = _compare(op, v1, v2)
                        if separates(vec):
                            return term
                        if vec not in seen_bool:
                            seen_bool.add(vec)
                            layer.append((term, vec))
        for inner, vec in bool_layers.get(fsize - 1, []):
            term = App("not", (inner,))
            pool.candidates += 1
            if prune_redundant(term):
                continue
            neg_vec = tuple(not b for b in vec)
            if separates(neg_vec):
                return term
            if neg_vec not in seen_bool:
                seen_bool.add(neg_vec)
                layer.append((term, neg_vec))
        bool_layers[fsize] = layer
    return None


def _compare(op: str, v1: Vector, v2: Vector) -> Vector:
    if op == "=":
        return tuple(a == b for a, b in zip(v1, v2))
    if op == "<":
        return tuple(a < b for a, b in zip(v1, v2))
    if op == "<=":
        return tuple(a <= b for a, b in zip(v1, v2))
    if op == ">":
        return tuple(a > b for a, b in zip(v1, v2))
    return tuple(a >= b for a, b in zip(v1, v2))
