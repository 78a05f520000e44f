"""Sampling of reachable loop-head states.

Each run starts from a previously unseen model of the precondition and
repeatedly solves the transition relation for a successor, collecting the
visited states. "Unseen" is enforced with a disequality conjunction over
the solver-constrained variables of the precondition; exact duplicates
that survive pseudo-random completion are discarded on insertion.

Every sampled state is replay-validated by evaluation (heads against the
precondition, adjacent pairs against the transition relation) rather than
trusted from the solver.

Multiple seeded instances, each owning its solver session, run in
parallel and are merged deterministically in instance order.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Iterator, Sequence

from .problem import Params, Problem, prime, primed_params, unprime
from .solver import SolverError, SolverSession, SolverUnknown
from .terms import (
    BoolLit,
    IntLit,
    State,
    Term,
    Value,
    Var,
    eval_term,
    mk_and,
    mk_eq,
    mk_not,
    state_key,
    substitute,
)


class StateSet:
    """Ordered collection of distinct states, first occurrence kept."""

    def __init__(self, items: Iterable[State] = ()):
        self._items: list[State] = []
        self._keys: set[tuple] = set()
        for s in items:
            self.add(s)

    def add(self, state: State) -> bool:
        key = state_key(state)
        if key in self._keys:
            return False
        self._keys.add(key)
        self._items.append(dict(state))
        return True

    def __contains__(self, state: State) -> bool:
        return state_key(state) in self._keys

    def __iter__(self) -> Iterator[State]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, i: int) -> State:
        return self._items[i]

    def __repr__(self) -> str:
        return f"StateSet({self._items!r})"

    def copy(self) -> "StateSet":
        return StateSet(self._items)


def merge_parallel(runs: Sequence[StateSet]) -> StateSet:
    """Concatenate runs in instance order, dropping exact duplicates."""
    merged = StateSet()
    for run in runs:
        for state in run:
            merged.add(state)
    return merged


def value_term(v: Value) -> Term:
    return BoolLit(v) if isinstance(v, bool) else IntLit(v)


def _expired(deadline: float | None) -> bool:
    return deadline is not None and time.monotonic() >= deadline


def _check_replay(cond: Term, env: State, defs, what: str) -> None:
    if eval_term(cond, env, defs) is not True:
        raise SolverError(f"solver model failed replay validation ({what})")


def record_states_from(
    start: State,
    k: int,
    problem: Problem,
    session: SolverSession,
    deadline: float | None = None,
) -> StateSet:
    """The chain of states visited by iterating the transition relation
    from `start`, at most `k` long. Stops early when no successor exists
    or the chain revisits one of its own states.

    Successors are models of the transition relation with the current
    state substituted in, projected onto the primed variables and then
    unprimed; unconstrained primed variables are completed pseudo-randomly.
    """
    assert k >= 1
    defs = problem.defs
    primed = primed_params(problem.inv_params)
    chain = StateSet([start])
    current = start
    while len(chain) < k and not _expired(deadline):
        step = substitute(
            problem.trans_call(), {n: value_term(current[n]) for n, _ in problem.inv_params}
        )
        try:
            model = session.get_model(step, primed)
        except SolverUnknown:
            break
        if model is None:
            break
        successor: State = {unprime(n): v for n, v in model.items()}
        env: State = dict(current)
        env.update({prime(n): v for n, v in successor.items()})
        _check_replay(problem.trans.body, env, defs, "transition step")
        if not chain.add(successor):
            break
        current = successor
    return chain


def record(
    problem: Problem,
    tracked: Sequence[str],
    n: int,
    session: SolverSession,
    deadline: float | None = None,
) -> StateSet:
    """Collect up to `n` distinct reachable loop-head states.

    Runs start from fresh precondition models, excluding already-collected
    states via disequalities over the precondition's solver-constrained
    variables, and follow the transition relation with the remaining
    budget. Solver failure ends the phase with the states collected so
    far; the strengthening loop self-corrects via counterexamples.
    """
    assert n >= 1
    tracked_set = set(tracked)
    variables: Params = tuple((v, s) for v, s in problem.inv_params if v in tracked_set)
    states = StateSet()
    if not variables:
        return states
    defs = problem.defs
    pre_call = problem.pre_call()
    seen_vars = session.constrained_vars(pre_call, variables)
    while len(states) < n and not _expired(deadline):
        exclusions = [
            mk_not(mk_and([mk_eq(Var(v), value_term(s[v])) for v, _ in seen_vars]))
            for s in states
        ]
        try:
            head = session.get_model(mk_and([pre_call, *exclusions]), variables)
            if head is None:
                break
            _check_replay(problem.pre.body, head, defs, "precondition head")
            chain = record_states_from(head, n - len(states), problem, session, deadline)
        except SolverError:
            break
        for state in chain:
            states.add(state)
    return states


def record_parallel(
    problem: Problem,
    tracked: Sequence[str],
    n: int,
    seeds: Sequence[int],
    make_session: Callable[[int], SolverSession],
    budget_s: float = 5.0,
    deadline: float | None = None,
) -> StateSet:
    """Run one seeded sampling instance per seed concurrently, with the
    total budget split evenly, and merge the results in seed order."""
    per_instance = max(1, n // len(seeds))
    phase_deadline = time.monotonic() + budget_s
    if deadline is not None:
        phase_deadline = min(phase_deadline, deadline)

    def one(seed: int) -> StateSet:
        with make_session(seed) as session:
            session.define_relations(problem.defs.values())
            return record(problem, tracked, per_instance, session, phase_deadline)

    if len(seeds) == 1:
        return merge_parallel([one(seeds[0])])
    with ThreadPoolExecutor(max_workers=len(seeds)) as pool:
        runs = list(pool.map(one, seeds))
    return merge_parallel(runs)
