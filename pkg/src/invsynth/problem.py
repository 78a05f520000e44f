"""SyGuS-INV problem representation and parsing.

A problem is the quadruple of precondition, transition relation,
postcondition, and auxiliary relations, together with the invariant's
variable signature. Accepted input is the v1 INV-track command set:

    (set-logic LIA)
    (synth-inv <name> ((v Sort) ...))
    (declare-primed-var <v> <Sort>)          ; optional, checked
    (define-fun <name> ((v Sort) ...) Bool <term>)
    (inv-constraint <inv> <pre> <trans> <post>)
    (check-synth)
"""

from __future__ import annotations

from dataclasses import dataclass

from .sexpr import Atom, Node, SexprError, SList, parse_sexprs
from .terms import (
    OPERATOR_NAMES,
    App,
    Sort,
    Term,
    TermError,
    Var,
    free_vars,
    print_term,
    rename_vars,
    sort_of,
    subterms,
    term_from_node,
)

PRIME_SUFFIX = "!"

Params = tuple[tuple[str, Sort], ...]


class ProblemError(Exception):
    """Invalid SyGuS-INV input, with source position when known."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        if line:
            message = f"{line}:{col}: {message}"
        super().__init__(message)
        self.line = line
        self.col = col


@dataclass(frozen=True, slots=True)
class RelationDef:
    name: str
    params: Params
    body: Term


@dataclass(frozen=True, slots=True)
class Problem:
    logic: str
    inv_name: str
    inv_params: Params
    pre: RelationDef
    trans: RelationDef
    post: RelationDef
    aux: tuple[RelationDef, ...] = ()

    @property
    def defs(self) -> dict[str, RelationDef]:
        """All defined relations by name (pre, trans, post, and aux)."""
        table = {r.name: r for r in self.aux}
        table[self.pre.name] = self.pre
        table[self.trans.name] = self.trans
        table[self.post.name] = self.post
        return table

    @property
    def var_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.inv_params)

    def pre_call(self) -> Term:
        return App(self.pre.name, tuple(Var(n) for n, _ in self.inv_params))

    def post_call(self) -> Term:
        return App(self.post.name, tuple(Var(n) for n, _ in self.inv_params))

    def trans_call(self) -> Term:
        args = [Var(n) for n, _ in self.inv_params]
        args += [Var(prime(n)) for n, _ in self.inv_params]
        return App(self.trans.name, tuple(args))


def prime(name: str) -> str:
    return name + PRIME_SUFFIX


def unprime(name: str) -> str:
    if not name.endswith(PRIME_SUFFIX):
        raise ValueError(f"{name!r} is not a primed name")
    return name[: -len(PRIME_SUFFIX)]


def primed_params(params: Params) -> Params:
    return tuple((prime(n), s) for n, s in params)


def _parse_sort(node: Node) -> Sort:
    if isinstance(node, Atom):
        if node.text == "Int":
            return Sort.INT
        if node.text == "Bool":
            return Sort.BOOL
        raise ProblemError(f"unknown sort {node.text!r}", node.line, node.col)
    raise ProblemError("expected a sort", node.line, node.col)


def _parse_params(node: Node) -> Params:
    if not isinstance(node, SList):
        raise ProblemError("expected a parameter list", node.line, node.col)
    params: list[tuple[str, Sort]] = []
    seen: set[str] = set()
    for item in node.items:
        if not (isinstance(item, SList) and len(item.items) == 2 and isinstance(item.items[0], Atom)):
            raise ProblemError("expected (name Sort)", item.line, item.col)
        name = item.items[0].text
        if name in seen:
            raise ProblemError(f"duplicate parameter {name!r}", item.line, item.col)
        seen.add(name)
        params.append((name, _parse_sort(item.items[1])))
    return tuple(params)


def _atom(node: Node, what: str) -> str:
    if not isinstance(node, Atom):
        raise ProblemError(f"expected {what}", node.line, node.col)
    return node.text


def _check_acyclic(relations: dict[str, RelationDef]) -> None:
    calls: dict[str, set[str]] = {}
    for name, rel in relations.items():
        calls[name] = {
            s.op for s in subterms(rel.body) if isinstance(s, App) and s.op in relations
        }
    # iterative DFS with three colors
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {name: WHITE for name in relations}
    for root in relations:
        if color[root] != WHITE:
            continue
        stack: list[tuple[str, list[str]]] = [(root, sorted(calls[root]))]
        color[root] = GRAY
        while stack:
            name, todo = stack[-1]
            if todo:
                nxt = todo.pop()
                if color[nxt] == GRAY:
                    raise ProblemError(f"recursive relation definitions involving {nxt!r}")
                if color[nxt] == WHITE:
                    color[nxt] = GRAY
                    stack.append((nxt, sorted(calls[nxt])))
            else:
                color[name] = BLACK
                stack.pop()


def parse_problem(source: str) -> Problem:
    """Parse and validate a SyGuS-INV v1 problem from source text.

    Raises ProblemError (with line/column where available) on malformed
    input: unknown commands, sort or arity errors, missing or duplicated
    pre/trans/post definitions, and recursive relation definitions.
    """
    try:
        nodes = parse_sexprs(source)
    except SexprError as e:
        raise ProblemError(str(e)) from e

    logic: str | None = None
    inv_name: str | None = None
    inv_params: Params | None = None
    primed_decls: dict[str, Sort] = {}
    relations: dict[str, RelationDef] = {}
    relation_order: list[str] = []
    constraint: tuple[str, str, str, str] | None = None
    check_synth_seen = False

    for node in nodes:
        if not (isinstance(node, SList) and node.items and isinstance(node.items[0], Atom)):
            raise ProblemError("expected a command", node.line, node.col)
        if check_synth_seen:
            raise ProblemError("no commands allowed after (check-synth)", node.line, node.col)
        cmd = node.items[0].text
        args = node.items[1:]
        if cmd == "set-logic":
            if logic is not None:
                raise ProblemError("duplicate set-logic", node.line, node.col)
            if len(args) != 1:
                raise ProblemError("set-logic expects one argument", node.line, node.col)
            logic = _atom(args[0], "a logic name")
            if logic != "LIA":
                raise ProblemError(f"unsupported logic {logic!r} (only LIA)", node.line, node.col)
        elif cmd == "synth-inv":
            if inv_name is not None:
                raise ProblemError("duplicate synth-inv", node.line, node.col)
            if len(args) != 2:
                raise ProblemError("synth-inv expects a name and a parameter list", node.line, node.col)
            inv_name = _atom(args[0], "an invariant name")
            inv_params = _parse_params(args[1])
        elif cmd == "declare-primed-var":
            if len(args) != 2:
                raise ProblemError("declare-primed-var expects a name and a sort", node.line, node.col)
            name = _atom(args[0], "a variable name")
            sort = _parse_sort(args[1])
            if name in primed_decls and primed_decls[name] is not sort:
                raise ProblemError(f"conflicting declare-primed-var for {name!r}", node.line, node.col)
            primed_decls[name] = sort
        elif cmd == "define-fun":
            if len(args) != 4:
                raise ProblemError("define-fun expects name, params, sort, body", node.line, node.col)
            name = _atom(args[0], "a relation name")
            if name in OPERATOR_NAMES:
                raise ProblemError(f"relation name {name!r} shadows a builtin", node.line, node.col)
            if name in relations:
                raise ProblemError(f"duplicate definition of {name!r}", node.line, node.col)
            params = _parse_params(args[1])
            ret = _parse_sort(args[2])
            if ret is not Sort.BOOL:
                raise ProblemError("defined relations must return Bool", args[2].line, args[2].col)
            try:
                body = term_from_node(args[3])
            except TermError as e:
                raise ProblemError(str(e)) from e
            relations[name] = RelationDef(name, params, body)
            relation_order.append(name)
        elif cmd == "inv-constraint":
            if constraint is not None:
                raise ProblemError("duplicate inv-constraint", node.line, node.col)
            if len(args) != 4:
                raise ProblemError("inv-constraint expects four names", node.line, node.col)
            constraint = tuple(_atom(a, "a relation name") for a in args)  # type: ignore[assignment]
        elif cmd == "check-synth":
            if args:
                raise ProblemError("check-synth takes no arguments", node.line, node.col)
            check_synth_seen = True
        else:
            raise ProblemError(f"unknown command {cmd!r}", node.line, node.col)

    if logic is None:
        raise ProblemError("missing (set-logic LIA)")
    if inv_name is None or inv_params is None:
        raise ProblemError("missing (synth-inv ...)")
    if constraint is None:
        raise ProblemError("missing (inv-constraint ...)")
    if not check_synth_seen:
        raise ProblemError("missing (check-synth)")

    cname, pre_name, trans_name, post_name = constraint
    if cname != inv_name:
        raise ProblemError(f"inv-constraint names {cname!r}, but synth-inv declared {inv_name!r}")
    for role, rname in (("pre", pre_name), ("trans", trans_name), ("post", post_name)):
        if rname not in relations:
            raise ProblemError(f"missing definition of {role} relation {rname!r}")

    pre = relations[pre_name]
    trans = relations[trans_name]
    post = relations[post_name]
    aux = tuple(relations[n] for n in relation_order if n not in {pre_name, trans_name, post_name})

    expected_trans = inv_params + primed_params(inv_params)
    if pre.params != inv_params:
        raise ProblemError(f"pre relation {pre.name!r} must have exactly the invariant's parameters")
    if post.params != inv_params:
        raise ProblemError(f"post relation {post.name!r} must have exactly the invariant's parameters")
    if trans.params != expected_trans:
        raise ProblemError(
            f"trans relation {trans.name!r} must have the invariant's parameters "
            f"followed by their primed copies"
        )
    for name, sort in primed_decls.items():
        declared = dict(inv_params).get(name)
        if declared is None:
            raise ProblemError(f"declare-primed-var {name!r} is not an invariant parameter")
        if declared is not sort:
            raise ProblemError(f"declare-primed-var {name!r} disagrees with synth-inv on its sort")

    _check_acyclic(relations)

    # sort-check every body under its parameters, with calls resolvable
    for rel in relations.values():
        env = dict(rel.params)
        try:
            result = sort_of(rel.body, env, relations)
        except TermError as e:
            raise ProblemError(f"in {rel.name!r}: {e}") from e
        if result is not Sort.BOOL:
            raise ProblemError(f"body of {rel.name!r} is not Bool")

    return Problem(
        logic=logic,
        inv_name=inv_name,
        inv_params=inv_params,
        pre=pre,
        trans=trans,
        post=post,
        aux=aux,
    )


def definition_order(relations: dict[str, RelationDef]) -> list[RelationDef]:
    """Relations sorted callees-first, so each definition only references
    earlier ones. Requires an acyclic call graph."""
    order: list[RelationDef] = []
    done: set[str] = set()

    def visit(name: str) -> None:
        if name in done:
            return
        done.add(name)
        rel = relations[name]
        for s in subterms(rel.body):
            if isinstance(s, App) and s.op in relations:
                visit(s.op)
        order.append(rel)

    for name in relations:
        visit(name)
    return order


def print_params(params: Params) -> str:
    return "(" + " ".join(f"({n} {s})" for n, s in params) + ")"


def print_define_fun(name: str, params: Params, body: Term) -> str:
    return f"(define-fun {name} {print_params(params)} Bool {print_term(body)})"


def parse_invariant(text: str, problem: Problem) -> Term:
    """Read an invariant for `problem` from text.

    Accepts either a full (define-fun ...) whose parameter sorts match the
    invariant signature (parameters are renamed positionally), or a bare
    term over the invariant's parameters. The result is sort-checked.
    """
    try:
        nodes = parse_sexprs(text)
    except SexprError as e:
        raise ProblemError(str(e)) from e
    if len(nodes) != 1:
        raise ProblemError("expected exactly one invariant definition or term")
    node = nodes[0]
    body: Term
    if (
        isinstance(node, SList)
        and node.items
        and isinstance(node.items[0], Atom)
        and node.items[0].text == "define-fun"
    ):
        if len(node.items) != 5:
            raise ProblemError("define-fun expects name, params, sort, body", node.line, node.col)
        params = _parse_params(node.items[2])
        if _parse_sort(node.items[3]) is not Sort.BOOL:
            raise ProblemError("invariant must return Bool", node.line, node.col)
        if tuple(s for _, s in params) != tuple(s for _, s in problem.inv_params):
            raise ProblemError("invariant parameter sorts do not match the problem signature")
        try:
            raw = term_from_node(node.items[4])
        except TermError as e:
            raise ProblemError(str(e)) from e
        renaming = {old: new for (old, _), (new, _) in zip(params, problem.inv_params)}
        body = rename_vars(raw, renaming)
    else:
        try:
            body = term_from_node(node)
        except TermError as e:
            raise ProblemError(str(e)) from e
    env = dict(problem.inv_params)
    try:
        sort = sort_of(body, env, problem.defs)
    except TermError as e:
        raise ProblemError(str(e)) from e
    if sort is not Sort.BOOL:
        raise ProblemError("invariant is not Bool")
    extra = free_vars(body) - set(env)
    if extra:
        raise ProblemError(f"invariant mentions unknown variables {sorted(extra)}")
    return body
