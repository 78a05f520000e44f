"""Terms of linear integer arithmetic with booleans.

The AST mirrors SMT-LIB 2 concrete syntax: integer and boolean literals,
variables, and operator/relation applications. Terms are immutable and
hashable, so they can be shared freely between concurrent pipeline stages
and used as dictionary keys (e.g. for observational-equivalence pools).

Integers are Python ints, i.e. arbitrary precision: doubling loops leave
any fixed width almost immediately.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterator, Mapping

from .sexpr import Atom, Node, SexprError, SList, parse_sexprs


class Sort(enum.Enum):
    INT = "Int"
    BOOL = "Bool"

    def __str__(self) -> str:
        return self.value


class TermError(Exception):
    """Ill-formed term (sort, arity, linearity, or unknown symbol)."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        if line:
            message = f"{line}:{col}: {message}"
        super().__init__(message)
        self.line = line
        self.col = col


class EvalError(Exception):
    """Runtime evaluation failure (division or modulo by zero)."""


@dataclass(frozen=True, slots=True)
class IntLit:
    value: int


@dataclass(frozen=True, slots=True)
class BoolLit:
    value: bool


@dataclass(frozen=True, slots=True)
class Var:
    name: str


@dataclass(frozen=True, slots=True)
class App:
    op: str
    args: tuple["Term", ...]


Term = IntLit | BoolLit | Var | App

Value = int | bool
State = dict[str, Value]

TRUE = BoolLit(True)
FALSE = BoolLit(False)

# operator -> (argument sort, result sort, min arity, max arity or None)
_OPERATORS: dict[str, tuple[Sort, Sort, int, int | None]] = {
    "+": (Sort.INT, Sort.INT, 2, None),
    "-": (Sort.INT, Sort.INT, 1, None),
    "*": (Sort.INT, Sort.INT, 2, None),
    "div": (Sort.INT, Sort.INT, 2, 2),
    "mod": (Sort.INT, Sort.INT, 2, 2),
    "abs": (Sort.INT, Sort.INT, 1, 1),
    "<": (Sort.INT, Sort.BOOL, 2, 2),
    "<=": (Sort.INT, Sort.BOOL, 2, 2),
    ">": (Sort.INT, Sort.BOOL, 2, 2),
    ">=": (Sort.INT, Sort.BOOL, 2, 2),
    "and": (Sort.BOOL, Sort.BOOL, 2, None),
    "or": (Sort.BOOL, Sort.BOOL, 2, None),
    "not": (Sort.BOOL, Sort.BOOL, 1, 1),
    "=>": (Sort.BOOL, Sort.BOOL, 2, None),
}
# "=" and "ite" are sort-polymorphic and handled specially.

OPERATOR_NAMES = frozenset(_OPERATORS) | {"=", "ite"}


def mk_and(args: list[Term] | tuple[Term, ...]) -> Term:
    args = tuple(a for a in args if a != TRUE)
    if any(a == FALSE for a in args):
        return FALSE
    if not args:
        return TRUE
    if len(args) == 1:
        return args[0]
    return App("and", args)


def mk_or(args: list[Term] | tuple[Term, ...]) -> Term:
    args = tuple(a for a in args if a != FALSE)
    if any(a == TRUE for a in args):
        return TRUE
    if not args:
        return FALSE
    if len(args) == 1:
        return args[0]
    return App("or", args)


def mk_not(t: Term) -> Term:
    if isinstance(t, BoolLit):
        return BoolLit(not t.value)
    if isinstance(t, App) and t.op == "not":
        return t.args[0]
    return App("not", (t,))


def mk_implies(a: Term, b: Term) -> Term:
    return App("=>", (a, b))


def mk_eq(a: Term, b: Term) -> Term:
    return App("=", (a, b))


def term_size(t: Term) -> int:
    """Node count of a term."""
    if isinstance(t, App):
        return 1 + sum(term_size(a) for a in t.args)
    return 1


def subterms(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, App):
        for a in t.args:
            yield from subterms(a)


def free_vars(t: Term) -> set[str]:
    """Variables occurring in t. Relation calls are not seen through;
    use inline_calls first when call-through visibility matters."""
    out: set[str] = set()
    for s in subterms(t):
        if isinstance(s, Var):
            out.add(s.name)
    return out


def substitute(t: Term, mapping: Mapping[str, Term]) -> Term:
    """Replace variables by terms. Our language has no binders, so plain
    structural replacement is capture-free."""
    if isinstance(t, Var):
        return mapping.get(t.name, t)
    if isinstance(t, App):
        return App(t.op, tuple(substitute(a, mapping) for a in t.args))
    return t


def rename_vars(t: Term, mapping: Mapping[str, str]) -> Term:
    return substitute(t, {old: Var(new) for old, new in mapping.items()})


def sort_of(t: Term, env: Mapping[str, Sort], defs: Mapping[str, "object"] | None = None) -> Sort:
    """Sort-check a term and return its sort.

    `env` maps variable names to sorts; `defs` maps relation names to
    objects with .params / .name (RelationDef). Raises TermError on any
    sort, arity, linearity, or unknown-symbol violation. Total and
    deterministic on well-formed inputs.
    """
    if isinstance(t, IntLit):
        return Sort.INT
    if isinstance(t, BoolLit):
        return Sort.BOOL
    if isinstance(t, Var):
        sort = env.get(t.name)
        if sort is None:
            raise TermError(f"unknown variable {t.name!r}")
        return sort
    arg_sorts = [sort_of(a, env, defs) for a in t.args]
    n = len(t.args)
    if t.op == "=":
        if n < 2:
            raise TermError("'=' expects at least 2 arguments")
        if len(set(arg_sorts)) != 1:
            raise TermError("'=' arguments must share one sort")
        return Sort.BOOL
    if t.op == "ite":
        if n != 3:
            raise TermError("'ite' expects exactly 3 arguments")
        if arg_sorts[0] is not Sort.BOOL:
            raise TermError("'ite' condition must be Bool")
        if arg_sorts[1] is not arg_sorts[2]:
            raise TermError("'ite' branches must share one sort")
        return arg_sorts[1]
    spec = _OPERATORS.get(t.op)
    if spec is not None:
        arg_sort, result_sort, lo, hi = spec
        if n < lo or (hi is not None and n > hi):
            want = str(lo) if hi == lo else f"at least {lo}"
            raise TermError(f"{t.op!r} expects {want} argument(s), got {n}")
        for i, s in enumerate(arg_sorts):
            if s is not arg_sort:
                raise TermError(f"argument {i + 1} of {t.op!r} must be {arg_sort}")
        if t.op == "*" and sum(1 for a in t.args if free_vars(a)) > 1:
            raise TermError("nonlinear multiplication: all but one '*' argument must be constant")
        return result_sort
    if defs is not None and t.op in defs:
        rel = defs[t.op]
        params = rel.params  # type: ignore[attr-defined]
        if n != len(params):
            raise TermError(f"relation {t.op!r} expects {len(params)} argument(s), got {n}")
        for i, ((_, psort), s) in enumerate(zip(params, arg_sorts)):
            if s is not psort:
                raise TermError(f"argument {i + 1} of {t.op!r} must be {psort}")
        return Sort.BOOL
    raise TermError(f"unknown operator or relation {t.op!r}")


def inline_calls(t: Term, defs: Mapping[str, "object"]) -> Term:
    """Replace every relation call with its body under the parameter
    substitution, recursively. Requires an acyclic definition graph."""
    if isinstance(t, App):
        args = tuple(inline_calls(a, defs) for a in t.args)
        if t.op in defs:
            rel = defs[t.op]
            params = rel.params  # type: ignore[attr-defined]
            body = inline_calls(rel.body, defs)  # type: ignore[attr-defined]
            return substitute(body, {name: arg for (name, _), arg in zip(params, args)})
        return App(t.op, args)
    return t


def _euclidean_div(a: int, b: int) -> int:
    # SMT-LIB integer division: remainder is always in [0, |b|).
    if b > 0:
        return a // b
    return -(a // -b)


def _euclidean_mod(a: int, b: int) -> int:
    if b > 0:
        return a % b
    return a % -b


def eval_term(t: Term, state: State, defs: Mapping[str, "object"] | None = None) -> Value:
    """Evaluate a term under a total assignment, with SMT-LIB semantics
    (Euclidean div/mod). Relation calls are inlined on demand via `defs`.
    Raises EvalError on division or modulo by zero."""
    if isinstance(t, IntLit):
        return t.value
    if isinstance(t, BoolLit):
        return t.value
    if isinstance(t, Var):
        return state[t.name]
    op = t.op
    if op == "ite":
        cond = eval_term(t.args[0], state, defs)
        branch = t.args[1] if cond else t.args[2]
        return eval_term(branch, state, defs)
    if op == "and":
        return all(eval_term(a, state, defs) for a in t.args)
    if op == "or":
        return any(eval_term(a, state, defs) for a in t.args)
    if op == "=>":
        # right-associative: (=> a b c) == a -> (b -> c)
        for a in t.args[:-1]:
            if not eval_term(a, state, defs):
                return True
        return bool(eval_term(t.args[-1], state, defs))
    if op == "not":
        return not eval_term(t.args[0], state, defs)
    if defs is not None and op in defs:
        rel = defs[op]
        params = rel.params  # type: ignore[attr-defined]
        inner: State = {
            name: eval_term(arg, state, defs) for (name, _), arg in zip(params, t.args)
        }
        return eval_term(rel.body, inner, defs)  # type: ignore[attr-defined]
    vals = [eval_term(a, state, defs) for a in t.args]
    if op == "=":
        return all(v == vals[0] for v in vals[1:])
    if op == "+":
        return sum(vals)
    if op == "-":
        if len(vals) == 1:
            return -vals[0]
        acc = vals[0]
        for v in vals[1:]:
            acc -= v
        return acc
    if op == "*":
        acc = 1
        for v in vals:
            acc *= v
        return acc
    if op == "div":
        if vals[1] == 0:
            raise EvalError("division by zero")
        return _euclidean_div(vals[0], vals[1])
    if op == "mod":
        if vals[1] == 0:
            raise EvalError("modulo by zero")
        return _euclidean_mod(vals[0], vals[1])
    if op == "abs":
        return abs(vals[0])
    if op == "<":
        return vals[0] < vals[1]
    if op == "<=":
        return vals[0] <= vals[1]
    if op == ">":
        return vals[0] > vals[1]
    if op == ">=":
        return vals[0] >= vals[1]
    raise TermError(f"unknown operator or relation {op!r}")


def print_term(t: Term) -> str:
    """Render a term as SMT-LIB 2 concrete syntax. parse_term(print_term(t))
    is structurally identical to t."""
    if isinstance(t, IntLit):
        return f"(- {-t.value})" if t.value < 0 else str(t.value)
    if isinstance(t, BoolLit):
        return "true" if t.value else "false"
    if isinstance(t, Var):
        return t.name
    inner = " ".join(print_term(a) for a in t.args)
    return f"({t.op} {inner})"


def term_from_node(node: Node) -> Term:
    """Build a Term from a parsed s-expression node.

    Unary minus applied to a numeral is folded into a negative literal,
    so `(- 5)` and the literal printed for IntLit(-5) denote one term.
    No sort checking happens here; use sort_of separately.
    """
    if isinstance(node, Atom):
        text = node.text
        if text == "true":
            return TRUE
        if text == "false":
            return FALSE
        if text.isdigit():
            return IntLit(int(text))
        if text.startswith('"') or text.startswith("|"):
            raise TermError("string literals are not part of this language", node.line, node.col)
        return Var(text)
    if not node.items:
        raise TermError("empty application", node.line, node.col)
    head = node.items[0]
    if not isinstance(head, Atom):
        raise TermError("operator position must be a symbol", node.line, node.col)
    if head.text == "let":
        raise TermError("let-bindings are not supported", head.line, head.col)
    args = tuple(term_from_node(item) for item in node.items[1:])
    if head.text == "-" and len(args) == 1 and isinstance(args[0], IntLit) and args[0].value >= 0:
        return IntLit(-args[0].value)
    return App(head.text, args)


def parse_term(text: str) -> Term:
    """Parse a single term from concrete syntax."""
    try:
        nodes = parse_sexprs(text)
    except SexprError as e:
        raise TermError(str(e), e.line, e.col) from e
    if len(nodes) != 1:
        raise TermError(f"expected exactly one term, found {len(nodes)}")
    return term_from_node(nodes[0])


def state_key(s: State) -> tuple[tuple[str, Value], ...]:
    """Canonical hashable key for a state."""
    return tuple(sorted(s.items()))
