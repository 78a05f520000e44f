"""Final, independent check of the three sufficiency conditions.

A candidate invariant is sufficient when it is weaker than the
precondition, inductive over the transition relation, and stronger than
the postcondition. Each condition runs as its own validity query in a
session the caller did not use for inference, and every reported
counterexample is re-validated by evaluation before it leaves this
module, so failures always carry a true witness.
"""

from __future__ import annotations

from dataclasses import dataclass

from .problem import Params, Problem, prime, primed_params
from .solver import CheckResult, Quantified, SolverSession
from .terms import Sort, Term, TermError, eval_term, mk_and, mk_implies, rename_vars, sort_of


@dataclass(frozen=True, slots=True)
class VerificationReport:
    weaker_than_pre: CheckResult
    inductive: CheckResult
    stronger_than_post: CheckResult

    @property
    def overall(self) -> bool:
        return (
            self.weaker_than_pre.is_valid
            and self.inductive.is_valid
            and self.stronger_than_post.is_valid
        )

    def lines(self) -> list[str]:
        return [
            f"weaker_than_pre: {_describe(self.weaker_than_pre)}",
            f"inductive: {_describe(self.inductive)}",
            f"stronger_than_post: {_describe(self.stronger_than_post)}",
            f"overall: {'valid' if self.overall else 'not verified'}",
        ]


def _describe(result: CheckResult) -> str:
    if result.is_valid:
        return "valid"
    if result.verdict == "counterexample":
        inner = " ".join(f"({n} {_fmt(v)})" for n, v in sorted(result.state.items()))
        return f"counterexample ({inner})"
    return f"unknown ({result.reason})" if result.reason else "unknown"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def sufficiency_conditions(problem: Problem, invariant: Term) -> list[tuple[str, Quantified]]:
    """The three verification conditions as quantified formulas."""
    params = problem.inv_params
    primed = primed_params(params)
    priming = {n: prime(n) for n, _ in params}
    inv_next = rename_vars(invariant, priming)
    return [
        ("weaker_than_pre", Quantified(params, mk_implies(problem.pre_call(), invariant))),
        (
            "inductive",
            Quantified(
                params + primed,
                mk_implies(mk_and([invariant, problem.trans_call()]), inv_next),
            ),
        ),
        ("stronger_than_post", Quantified(params, mk_implies(invariant, problem.post_call()))),
    ]


def check_invariant(
    problem: Problem,
    invariant: Term,
    *,
    session: SolverSession | None = None,
    solver_command=None,
    timeout_ms: int = 2000,
    seed: int = 0,
) -> VerificationReport:
    """Check all three sufficiency conditions for `invariant`.

    The invariant must be a well-sorted boolean term over the problem's
    invariant parameters (it may call the problem's relations). An
    `unknown` verdict on any condition leaves the report not-verified;
    it is never treated as a pass.
    """
    env = dict(problem.inv_params)
    defs = problem.defs
    if sort_of(invariant, env, defs) is not Sort.BOOL:
        raise TermError("invariant must be boolean-sorted")

    own = session is None
    if own:
        session = SolverSession(solver_command, seed=seed, timeout_ms=timeout_ms)
        session.define_relations(defs.values())
    try:
        results: dict[str, CheckResult] = {}
        for name, formula in sufficiency_conditions(problem, invariant):
            result = session.check_valid(formula)
            if result.verdict == "counterexample":
                # report only true witnesses: the completed state must
                # falsify the condition under evaluation
                assert eval_term(formula.matrix, result.state, defs) is False, (
                    f"solver counterexample for {name} failed replay"
                )
            results[name] = result
        return VerificationReport(
            weaker_than_pre=results["weaker_than_pre"],
            inductive=results["inductive"],
            stronger_than_post=results["stronger_than_post"],
        )
    finally:
        if own:
            session.close()
