"""Problem validation and unused-variable elimination.

A variable is "used" when its value can flow into the truth value of the
precondition, the transition relation (directly or through its primed
copy), or the postcondition — through any chain of relation calls. The
tracked set is

    V = V_pre  ∪  { v | v in V_trans or v! in V_trans }  ∪  V_post

computed by labeling each relation's used formal parameters, callees
first, and propagating labels through argument positions at every call
site. Usage is syntactic occurrence-with-flow, not semantic liveness: a
variable inside a tautological subterm still counts.
"""

from __future__ import annotations

from dataclasses import dataclass

from .problem import Params, Problem, RelationDef, definition_order, prime, primed_params
from .terms import App, FALSE, IntLit, Sort, Term, Var, substitute


@dataclass(frozen=True, slots=True)
class UsageAnalysis:
    v_pre: frozenset[str]
    v_trans: frozenset[str]
    v_post: frozenset[str]
    tracked: frozenset[str]


def analyze_usage(problem: Problem) -> UsageAnalysis:
    """Label used formal parameters for every relation, callees first, and
    assemble the tracked-variable set. Requires the (already enforced)
    acyclic call graph."""
    relations = problem.defs
    used: dict[str, frozenset[str]] = {}

    def flowing(t: Term, formals: frozenset[str]) -> set[str]:
        if isinstance(t, Var):
            return {t.name} if t.name in formals else set()
        if isinstance(t, App):
            out: set[str] = set()
            if t.op in relations:
                callee = relations[t.op]
                callee_used = used[t.op]
                for (pname, _), arg in zip(callee.params, t.args):
                    if pname in callee_used:
                        out |= flowing(arg, formals)
                return out
            for a in t.args:
                out |= flowing(a, formals)
            return out
        return set()

    for rel in definition_order(relations):
        formals = frozenset(name for name, _ in rel.params)
        used[rel.name] = frozenset(flowing(rel.body, formals))

    v_pre = used[problem.pre.name]
    v_trans = used[problem.trans.name]
    v_post = used[problem.post.name]
    names = set(problem.var_names)
    tracked = (
        (v_pre & names)
        | {v for v in names if v in v_trans or prime(v) in v_trans}
        | (v_post & names)
    )
    return UsageAnalysis(
        v_pre=frozenset(v_pre),
        v_trans=frozenset(v_trans),
        v_post=frozenset(v_post),
        tracked=frozenset(tracked),
    )


def _neutral(sort: Sort) -> Term:
    return IntLit(0) if sort is Sort.INT else FALSE


def simplify(problem: Problem, usage: UsageAnalysis) -> Problem:
    """Restrict the problem signature to the tracked variables.

    Dropped variables cannot affect any relation's truth value, so their
    occurrences (in dead argument positions) are replaced by a neutral
    constant, which keeps all bodies closed under the narrower signature
    while preserving semantics. An invariant over the tracked variables
    that is valid for the result is valid for the original problem.
    """
    keep: Params = tuple((n, s) for n, s in problem.inv_params if n in usage.tracked)
    if keep == problem.inv_params:
        return problem
    dropped = {n: s for n, s in problem.inv_params if n not in usage.tracked}
    plain = {n: _neutral(s) for n, s in dropped.items()}
    both = dict(plain)
    both.update({prime(n): _neutral(s) for n, s in dropped.items()})

    pre = RelationDef(problem.pre.name, keep, substitute(problem.pre.body, plain))
    post = RelationDef(problem.post.name, keep, substitute(problem.post.body, plain))
    trans = RelationDef(
        problem.trans.name,
        keep + primed_params(keep),
        substitute(problem.trans.body, both),
    )
    return Problem(
        logic=problem.logic,
        inv_name=problem.inv_name,
        inv_params=keep,
        pre=pre,
        trans=trans,
        post=post,
        aux=problem.aux,
    )
