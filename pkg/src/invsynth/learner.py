"""Precondition learning over labeled states.

The learner keeps a growing list of boolean features (synthesized on
demand), renders every state as its feature truth vector, and learns a
small CNF over the features that is true on all positive states and false
on all negative ones:

  * states with the same vector on both sides form conflict groups and
    trigger synthesis of a new separating feature;
  * once conflict-free, a PAC-style pass collects all clauses of at most
    k literals that hold on every positive row and greedily covers the
    negatives with as few clauses as it can, escalating k only when no
    k-clause cover exists.

Features learned in earlier strengthening rounds are retained for the
lifetime of the learner, so later rounds start from a richer vocabulary.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .features import ConflictGroup, synthesize_feature
from .terms import TRUE, App, EvalError, State, Term, eval_term, mk_and, mk_not, mk_or

Row = tuple[bool, ...]


class LearnerFailure(Exception):
    """Feature synthesis exhausted on a conflict group; no consistent
    precondition can be produced."""


@dataclass(frozen=True, slots=True)
class Literal:
    index: int
    positive: bool

    def holds_on(self, row: Row) -> bool:
        return row[self.index] == self.positive


Clause = tuple[Literal, ...]


def clause_holds_on(clause: Clause, row: Row) -> bool:
    return any(lit.holds_on(row) for lit in clause)


@dataclass(frozen=True, slots=True)
class CnfFormula:
    clauses: tuple[Clause, ...]

    def holds_on(self, row: Row) -> bool:
        return all(clause_holds_on(c, row) for c in self.clauses)

    def to_term(self, features: Sequence[Term]) -> Term:
        def literal_term(lit: Literal) -> Term:
            f = features[lit.index]
            return f if lit.positive else mk_not(f)

        return mk_and([mk_or([literal_term(l) for l in clause]) for clause in self.clauses])


def feature_row(features: Sequence[Term], state: State) -> Row:
    """Truth vector of the features on one state. A feature that fails to
    evaluate (division by zero) counts as false on that state; the final
    precondition is re-verified by the solver regardless."""
    out = []
    for f in features:
        try:
            out.append(bool(eval_term(f, state)))
        except EvalError:
            out.append(False)
    return tuple(out)


@dataclass
class Dataset:
    """Labeled states with their derived feature matrix."""

    positives: tuple[State, ...]
    negatives: tuple[State, ...]
    features: tuple[Term, ...]
    variables: tuple[str, ...]
    pos_rows: tuple[Row, ...] = field(init=False)
    neg_rows: tuple[Row, ...] = field(init=False)

    def __post_init__(self):
        self.pos_rows = tuple(feature_row(self.features, s) for s in self.positives)
        self.neg_rows = tuple(feature_row(self.features, s) for s in self.negatives)


def find_conflicts(dataset: Dataset, group_cap: int = 64) -> list[ConflictGroup]:
    """Group states whose feature vector occurs on both sides, in order of
    first appearance, each side truncated to the earliest `group_cap`."""
    by_row: dict[Row, tuple[list[State], list[State]]] = {}
    order: list[Row] = []
    for state, row in zip(dataset.positives, dataset.pos_rows):
        if row not in by_row:
            by_row[row] = ([], [])
            order.append(row)
        by_row[row][0].append(state)
    for state, row in zip(dataset.negatives, dataset.neg_rows):
        if row not in by_row:
            by_row[row] = ([], [])
            order.append(row)
        by_row[row][1].append(state)
    groups = []
    for row in order:
        pos, neg = by_row[row]
        if pos and neg:
            groups.append(
                ConflictGroup(
                    positives=tuple(pos[:group_cap]),
                    negatives=tuple(neg[:group_cap]),
                    variables=dataset.variables,
                )
            )
    return groups


def _candidate_clauses(num_features: int, max_literals: int, pos_rows: Sequence[Row]) -> list[Clause]:
    """All clauses of at most `max_literals` literals (one per feature) that
    hold on every positive row, in canonical order: fewer literals first,
    then ascending feature indices, positive polarity before negative."""
    out: list[Clause] = []
    for size in range(1, max_literals + 1):
        for combo in itertools.combinations(range(num_features), size):
            for pols in itertools.product((True, False), repeat=size):
                clause = tuple(Literal(i, p) for i, p in zip(combo, pols))
                if all(clause_holds_on(clause, row) for row in pos_rows):
                    out.append(clause)
    return out


def learn_cnf(pos_rows: Sequence[Row], neg_rows: Sequence[Row], k: int = 1) -> CnfFormula:
    """A CNF true on all positive rows whose clauses each have at most k
    literals, chosen by greedy minimum cover of the negative rows; k
    escalates when no k-clause cover exists. Requires conflict-free rows.

    Ties in the greedy cover break toward more newly covered negatives,
    then fewer literals, then the canonically earliest clause.
    """
    if not neg_rows:
        return CnfFormula(())
    num_features = len(neg_rows[0])
    if pos_rows:
        assert len(pos_rows[0]) == num_features
    assert num_features > 0, "conflict-free labeled rows need at least one feature"
    for max_literals in range(k, num_features + 1):
        candidates = _candidate_clauses(num_features, max_literals, pos_rows)
        coverage = [
            frozenset(i for i, row in enumerate(neg_rows) if not clause_holds_on(c, row))
            for c in candidates
        ]
        uncovered = set(range(len(neg_rows)))
        chosen: list[Clause] = []
        while uncovered:
            best_idx = -1
            best_key: tuple[int, int] | None = None
            for idx, covers in enumerate(coverage):
                gain = len(covers & uncovered)
                if gain == 0:
                    continue
                key = (gain, -len(candidates[idx]))
                if best_key is None or key > best_key:
                    best_key = key
                    best_idx = idx
            if best_idx < 0:
                break  # no k-clause cover; escalate
            chosen.append(candidates[best_idx])
            uncovered -= coverage[best_idx]
        if not uncovered:
            return CnfFormula(tuple(chosen))
    raise AssertionError("a covering CNF over all features must exist for conflict-free rows")


class PieLearner:
    """Conflict-driven precondition learner with a persistent feature set."""

    def __init__(
        self,
        variables: Sequence[str],
        *,
        group_cap: int = 64,
        max_feature_size: int = 7,
        constants: tuple[int, ...] = (0, 1, -1),
    ):
        self.variables = tuple(variables)
        self.group_cap = group_cap
        self.max_feature_size = max_feature_size
        self.constants = constants
        self.features: list[Term] = []

    def _dataset(self, positives: Iterable[State], negatives: Iterable[State]) -> Dataset:
        return Dataset(
            positives=tuple(positives),
            negatives=tuple(negatives),
            features=tuple(self.features),
            variables=self.variables,
        )

    def _resolve_conflicts(self, positives, negatives) -> Dataset:
        dataset = self._dataset(positives, negatives)
        while True:
            groups = find_conflicts(dataset, self.group_cap)
            if not groups:
                return dataset
            progress = (len(groups), sum(len(g.positives) + len(g.negatives) for g in groups))
            feature = synthesize_feature(groups[0], self.max_feature_size, self.constants)
            if feature is None:
                feature = synthesize_feature(groups[0], self.max_feature_size * 2, self.constants)
            if feature is None:
                raise LearnerFailure("feature synthesis exhausted on a conflict group")
            assert feature not in self.features, "a separating feature must be new"
            self.features.append(feature)
            dataset = self._dataset(positives, negatives)
            after = find_conflicts(dataset, self.group_cap)
            now = (len(after), sum(len(g.positives) + len(g.negatives) for g in after))
            assert now < progress, "each synthesized feature must shrink the conflicts"

    def learn(self, positives: Iterable[State], negatives: Iterable[State]) -> Term:
        """A precondition true on all positives and false on all negatives,
        as a CNF over the learned features with the features inlined."""
        positives = tuple(positives)
        negatives = tuple(negatives)
        if not negatives:
            return TRUE
        pos_keys = {tuple(sorted(s.items())) for s in positives}
        assert not any(tuple(sorted(s.items())) in pos_keys for s in negatives), (
            "positive/negative state sets must be disjoint"
        )
        dataset = self._resolve_conflicts(positives, negatives)
        cnf = learn_cnf(dataset.pos_rows, dataset.neg_rows)
        result = cnf.to_term(dataset.features)
        for s in positives:
            assert feature_row((result,), s) == (True,), "learned precondition must hold on positives"
        for s in negatives:
            assert feature_row((result,), s) == (False,), "learned precondition must exclude negatives"
        return result


def pie(
    positives: Iterable[State],
    negatives: Iterable[State],
    variables: Sequence[str],
    *,
    group_cap: int = 64,
    max_feature_size: int = 7,
    constants: tuple[int, ...] = (0, 1, -1),
) -> Term:
    """One-shot precondition inference with a fresh feature set."""
    learner = PieLearner(
        variables,
        group_cap=group_cap,
        max_feature_size=max_feature_size,
        constants=constants,
    )
    return learner.learn(positives, negatives)
