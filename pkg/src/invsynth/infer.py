"""Counterexample-guided strengthening of candidate invariants.

Start from the weakest candidate that implies the postcondition (the
postcondition itself) and repeat:

  * learn a precondition under which one transition preserves the
    candidate, feeding inductiveness counterexamples back to the learner
    until the precondition provably suffices;
  * conjoin it onto the candidate;
  * if the strengthened candidate excludes a precondition-reachable
    state, sample more states from that counterexample and restart with
    the larger dataset (weakening by restart);
  * once the learned precondition is `true` and the precondition check
    passes, the candidate is sufficient.

Unsolvable instances are detected eagerly: a model of pre-and-not-post,
or any recorded reachable state that falsifies the postcondition,
terminates the run as infeasible with that witness. A `solved` outcome is
only ever returned after an independent re-verification in a fresh
solver session.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Sequence

from . import verify
from .features import harvest_constants
from .learner import LearnerFailure, PieLearner
from .problem import Problem, prime, primed_params, unprime
from .record import StateSet, record_states_from
from .solver import Quantified, SolverError, SolverSession, SolverUnknown
from .terms import (
    TRUE,
    State,
    Term,
    eval_term,
    mk_and,
    mk_implies,
    mk_not,
    rename_vars,
)

# fixed offsets keep the inference and verification PRNG streams apart
# from the sampling instances without extra configuration surface
INFER_SEED_OFFSET = 7919
VERIFY_SEED_OFFSET = 104729


@dataclass(frozen=True)
class Config:
    """All pipeline tunables; defaults match the CLI exactly."""

    num_states: int = 512
    conflict_group_size: int = 64
    num_steps_on_restart: int = 256
    record_instances: int = 2
    seeds: tuple[int, ...] = (1, 2)
    max_feature_size: int = 7
    solver_path: str | None = None
    solver_timeout_ms: int = 2000
    record_budget_s: float = 5.0
    total_timeout_s: float = 60.0
    max_restarts: int = 50

    def __post_init__(self):
        for name in (
            "num_states",
            "conflict_group_size",
            "num_steps_on_restart",
            "record_instances",
            "max_feature_size",
            "solver_timeout_ms",
            "max_restarts",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if not self.seeds:
            raise ValueError("at least one seed is required")

    def instance_seeds(self) -> tuple[int, ...]:
        """One seed per sampling instance, extending the given seeds by
        consecutive values when fewer were supplied."""
        seeds = list(self.seeds[: self.record_instances])
        while len(seeds) < self.record_instances:
            seeds.append(seeds[-1] + 1)
        return tuple(seeds)

    def make_session(self, seed: int) -> SolverSession:
        return SolverSession(self.solver_path, seed=seed, timeout_ms=self.solver_timeout_ms)


@dataclass
class InferOutcome:
    status: str  # "solved" | "infeasible" | "unknown"
    invariant: Term | None = None
    witness: State | tuple[State, State] | None = None
    reason: str = ""
    stats: dict = field(default_factory=dict)


def check_feasible(
    problem: Problem, states: StateSet, session: SolverSession
) -> State | None:
    """A witness that no sufficient invariant can exist, or None.

    Infeasibility has two sources: the precondition does not imply the
    postcondition (a model of pre-and-not-post), or a recorded reachable
    state falsifies the postcondition. Solver `unknown` counts as
    feasible-so-far; it can never bless an unsound answer because every
    solved outcome is re-verified.
    """
    defs = problem.defs
    try:
        witness = session.get_model(
            mk_and([problem.pre_call(), mk_not(problem.post_call())]), problem.inv_params
        )
    except SolverUnknown:
        witness = None
    if witness is not None:
        assert eval_term(problem.pre.body, witness, defs) is True
        assert eval_term(problem.post.body, witness, defs) is False
        return witness
    for s in states:
        if eval_term(problem.post.body, s, defs) is not True:
            return s
    return None


def _expired(deadline: float | None) -> bool:
    return deadline is not None and time.monotonic() >= deadline


class _Restart(Exception):
    """Internal: tear down the current strengthening epoch after new
    states were recorded from a counterexample."""


class _Infeasible(Exception):
    def __init__(self, witness):
        self.witness = witness


class _Unknown(Exception):
    def __init__(self, reason: str):
        self.reason = reason


def infer(
    problem: Problem,
    states: StateSet,
    config: Config,
    session: SolverSession | None = None,
    deadline: float | None = None,
) -> InferOutcome:
    """Run the strengthening loop to a verdict.

    `states` must be replay-sound reachable samples over the (already
    simplified) problem's variables; they are treated as positives
    throughout. The returned invariant has passed the independent
    verifier; `unknown` covers solver failures, learner exhaustion, the
    restart cap, and deadline expiry.
    """
    if deadline is None:
        deadline = time.monotonic() + config.total_timeout_s
    own = session is None
    if own:
        session = config.make_session(config.instance_seeds()[0] + INFER_SEED_OFFSET)
        session.define_relations(problem.defs.values())
    try:
        return _infer_loop(problem, states, config, session, deadline)
    except SolverUnknown as e:
        return InferOutcome("unknown", reason=str(e))
    except SolverError as e:
        return InferOutcome("unknown", reason=f"solver failure: {e}")
    finally:
        if own:
            session.close()


def _infer_loop(
    problem: Problem,
    initial: StateSet,
    config: Config,
    session: SolverSession,
    deadline: float | None,
) -> InferOutcome:
    params = problem.inv_params
    primed = primed_params(params)
    priming = {n: prime(n) for n, _ in params}
    defs = problem.defs
    learner = PieLearner(
        problem.var_names,
        group_cap=config.conflict_group_size,
        max_feature_size=config.max_feature_size,
        constants=harvest_constants(problem),
    )
    states = initial.copy()
    stats = {"rounds": 0, "restarts": 0}

    def fail_if_infeasible() -> None:
        witness = check_feasible(problem, states, session)
        if witness is not None:
            raise _Infeasible(witness)

    def grow_and_restart(seed_state: State) -> None:
        """Sample a chain from a counterexample and restart strengthening."""
        before = len(states)
        chain = record_states_from(seed_state, config.num_steps_on_restart, problem, session, deadline)
        for s in chain:
            states.add(s)
        if len(states) == before:
            raise _Unknown("restart produced no new states")
        stats["restarts"] += 1
        if stats["restarts"] > config.max_restarts:
            raise _Unknown(f"restart cap ({config.max_restarts}) exceeded")
        fail_if_infeasible()
        raise _Restart

    def strengthening_epoch() -> Term:
        conjuncts: list[Term] = [problem.post.body]
        while True:
            stats["rounds"] += 1
            candidate = mk_and(conjuncts)
            negatives = StateSet()
            while True:
                if _expired(deadline):
                    raise _Unknown("timeout")
                try:
                    rho = learner.learn(states, negatives)
                except LearnerFailure as e:
                    raise _Unknown(str(e))
                inductive = Quantified(
                    params + primed,
                    mk_implies(
                        rho,
                        mk_implies(
                            mk_and([candidate, problem.trans_call()]),
                            rename_vars(candidate, priming),
                        ),
                    ),
                )
                check = session.check_valid(inductive)
                if check.verdict == "unknown":
                    raise _Unknown(f"inductiveness check: {check.reason}")
                if check.is_valid:
                    break
                pre_state = {n: check.state[n] for n, _ in params}
                post_state = {unprime(pn): check.state[pn] for pn, _ in primed}
                assert eval_term(rho, pre_state, defs) is True, (
                    "inductiveness counterexample must satisfy the candidate precondition"
                )
                if pre_state in states:
                    # the pre-state is known reachable, so its successor is
                    # reachable too: either it breaks the postcondition
                    # (unsolvable) or the candidate is too strong (restart)
                    if eval_term(problem.post.body, post_state, defs) is not True:
                        raise _Infeasible((pre_state, post_state))
                    grow_and_restart(post_state)
                negatives.add(pre_state)
                if eval_term(problem.pre.body, post_state, defs) is True:
                    # the successor is itself a precondition model, hence a
                    # reachable positive worth keeping
                    if states.add(post_state):
                        fail_if_infeasible()
            if rho != TRUE:
                conjuncts.append(rho)
            candidate = mk_and(conjuncts)
            weaker = session.check_valid(Quantified(params, mk_implies(problem.pre_call(), candidate)))
            if weaker.verdict == "unknown":
                raise _Unknown(f"precondition check: {weaker.reason}")
            if weaker.verdict == "counterexample":
                grow_and_restart(weaker.state)
            elif rho == TRUE:
                return candidate

    fail_if_infeasible()
    try:
        while True:
            if _expired(deadline):
                return InferOutcome("unknown", reason="timeout", stats=_final_stats(stats, states, learner))
            try:
                invariant = strengthening_epoch()
            except _Restart:
                continue
            break
    except _Infeasible as e:
        return InferOutcome("infeasible", witness=e.witness, stats=_final_stats(stats, states, learner))
    except _Unknown as e:
        return InferOutcome("unknown", reason=e.reason, stats=_final_stats(stats, states, learner))

    report = verify.check_invariant(
        problem,
        invariant,
        solver_command=config.solver_path,
        timeout_ms=config.solver_timeout_ms,
        seed=config.instance_seeds()[0] + VERIFY_SEED_OFFSET,
    )
    if not report.overall:
        return InferOutcome(
            "unknown",
            reason="candidate failed independent verification",
            stats=_final_stats(stats, states, learner),
        )
    return InferOutcome("solved", invariant=invariant, stats=_final_stats(stats, states, learner))


def _final_stats(stats: dict, states: StateSet, learner: PieLearner) -> dict:
    out = dict(stats)
    out["states"] = len(states)
    out["features"] = len(learner.features)
    return out
