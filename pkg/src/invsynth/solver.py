"""One external SMT solver subprocess, driven over SMT-LIB 2 pipes.

A session wraps a single solver process (anything that speaks SMT-LIB 2
with model production, e.g. z3). All queries on a session are serialized;
distinct sessions are fully independent and may run in parallel.

The wire protocol appends an `(echo ...)` sentinel to every command batch
and reads until the sentinel line comes back, so declarations, errors, and
multi-line answers can never desynchronize the stream. Scopes map onto
push/pop; queries run inside a scope of their own, keeping the relation
definitions installed at the base level as cached context.

Models are completed into total states: variables the solver was never
constrained on (they do not occur in the query once relation calls are
inlined) are filled from a seeded pseudo-random generator, uniformly over
[-1024, 1023] for integers and a fair coin for booleans.
"""

from __future__ import annotations

import os
import random
import select
import shlex
import shutil
import subprocess
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .problem import Params, RelationDef, definition_order, print_define_fun
from .sexpr import Atom, Node, SexprError, SList, parse_sexprs
from .terms import (
    Sort,
    State,
    Term,
    Value,
    free_vars,
    inline_calls,
    mk_not,
    print_term,
)

RANDOM_INT_LO = -1024
RANDOM_INT_HI = 1023

_SENTINEL = "::ready::"


class SolverError(Exception):
    """Solver crash or protocol desynchronization; the session is poisoned."""


class SolverUnknown(SolverError):
    """The solver answered `unknown` or ran out of time. Callers must never
    treat this as a `valid` or `unsat` verdict."""


@dataclass(frozen=True, slots=True)
class Quantified:
    """A universally quantified formula: for all `vars`, `matrix` holds."""

    vars: Params
    matrix: Term


@dataclass(frozen=True, slots=True)
class CheckResult:
    verdict: str  # "valid" | "counterexample" | "unknown"
    state: State | None = None
    reason: str = ""

    @property
    def is_valid(self) -> bool:
        return self.verdict == "valid"


def default_solver_script() -> Path:
    """Path of the bundled solver wrapper (scripts/z3serve/z3serve.js)."""
    return Path(__file__).resolve().parents[2] / "scripts" / "z3serve" / "z3serve.js"


def resolve_solver_command(explicit: str | None = None) -> list[str]:
    """Resolve the solver command line: explicit path, then the SOLVER_PATH
    environment variable, then the bundled wrapper script."""
    spec = explicit or os.environ.get("SOLVER_PATH")
    if spec:
        return shlex.split(spec) if " " in spec else [spec]
    script = default_solver_script()
    if script.exists():
        if (script.parent / "node_modules").exists() and shutil.which("node"):
            return ["node", str(script)]
        raise SolverError(
            f"bundled solver at {script} is not set up; run scripts/setup_solver.sh "
            "or point SOLVER_PATH at an SMT-LIB 2 solver"
        )
    raise SolverError("no solver configured: pass --solver-path or set SOLVER_PATH")


class SolverSession:
    """A live solver subprocess with scope bookkeeping and a seeded PRNG
    for model completion. Confine each session to one task at a time."""

    def __init__(
        self,
        command: str | Sequence[str] | None = None,
        *,
        seed: int = 0,
        timeout_ms: int = 2000,
    ):
        if command is None or isinstance(command, str):
            argv = resolve_solver_command(command)
        else:
            argv = list(command)
        self.command = argv
        self.seed = seed
        self.timeout_ms = timeout_ms
        self.depth = 0
        self._rng = random.Random(seed)
        self._defs: dict[str, RelationDef] = {}
        self._poisoned = False
        self._buf = b""
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
            )
        except OSError as e:
            raise SolverError(f"cannot start solver {argv!r}: {e}") from e
        self._command_batch(
            "(set-option :produce-models true)"
            f"(set-option :timeout {timeout_ms})"
            "(set-logic LIA)"
        )

    # -- wire protocol -------------------------------------------------

    def _poison(self) -> None:
        self._poisoned = True
        if self._proc.poll() is None:
            self._proc.kill()

    def _read_line(self, deadline: float) -> str:
        fd = self._proc.stdout.fileno()  # type: ignore[union-attr]
        while b"\n" not in self._buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self._poison()
                raise SolverUnknown("solver unresponsive (watchdog expired)")
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                continue
            chunk = os.read(fd, 65536)
            if not chunk:
                self._poison()
                raise SolverError("solver process exited unexpectedly")
            self._buf += chunk
        line, _, self._buf = self._buf.partition(b"\n")
        return line.decode()

    def _command_batch(self, text: str) -> str:
        """Send a batch of commands and return everything the solver printed
        before the sentinel."""
        if self._poisoned:
            raise SolverError("session is poisoned; no further queries possible")
        payload = text + f'(echo "{_SENTINEL}")\n'
        try:
            self._proc.stdin.write(payload.encode())  # type: ignore[union-attr]
            self._proc.stdin.flush()  # type: ignore[union-attr]
        except (BrokenPipeError, OSError) as e:
            self._poison()
            raise SolverError(f"solver pipe closed: {e}") from e
        deadline = time.monotonic() + self.timeout_ms / 1000 * 5 + 20
        lines: list[str] = []
        while True:
            line = self._read_line(deadline)
            if line.strip() == _SENTINEL:
                break
            lines.append(line)
        out = "\n".join(lines)
        if "(error" in out:
            self._poison()
            raise SolverError(f"solver reported an error: {out.strip()}")
        return out

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.write(b"(exit)\n")  # type: ignore[union-attr]
                self._proc.stdin.flush()  # type: ignore[union-attr]
            except (BrokenPipeError, OSError):
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "SolverSession":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- declarations and scopes ----------------------------------------

    def define_relations(self, relations: Iterable[RelationDef]) -> None:
        """Install relation definitions (callees first) in the current scope
        so later queries can call them by name."""
        table = {r.name: r for r in relations}
        batch = []
        for rel in definition_order(table):
            if rel.name in self._defs:
                continue
            self._defs[rel.name] = rel
            batch.append(print_define_fun(rel.name, rel.params, rel.body))
        if batch:
            self._command_batch("".join(batch))

    @property
    def definitions(self) -> dict[str, RelationDef]:
        return dict(self._defs)

    def push_scope(self) -> None:
        self._command_batch("(push 1)")
        self.depth += 1

    def pop_scope(self) -> None:
        if self.depth <= 0:
            raise SolverError("pop without matching push")
        self._command_batch("(pop 1)")
        self.depth -= 1

    def declare_vars(self, variables: Params) -> None:
        self._command_batch(
            "".join(f"(declare-const {n} {s})" for n, s in variables)
        )

    def assert_term(self, t: Term) -> None:
        self._command_batch(f"(assert {print_term(t)})")

    def check_sat(self) -> str:
        out = self._command_batch("(check-sat)").strip()
        if out in ("sat", "unsat", "unknown"):
            return out
        self._poison()
        raise SolverError(f"unexpected check-sat answer: {out!r}")

    # -- values ----------------------------------------------------------

    def get_values(self, names: Sequence[str]) -> dict[str, Value]:
        if not names:
            return {}
        out = self._command_batch(f"(get-value ({' '.join(names)}))")
        return dict(zip(names, _parse_value_list(out)))

    def eval_ground_terms(self, terms: Sequence[Term]) -> list[Value]:
        """Solver-side evaluation of variable-free terms (oracle helper)."""
        self.push_scope()
        try:
            if self.check_sat() != "sat":
                raise SolverError("empty context unexpectedly not sat")
            values: list[Value] = []
            for t in terms:
                out = self._command_batch(f"(get-value ({print_term(t)}))")
                values.extend(_parse_value_list(out))
            return values
        finally:
            if not self._poisoned:
                self.pop_scope()

    def _random_value(self, sort: Sort) -> Value:
        if sort is Sort.INT:
            return self._rng.randint(RANDOM_INT_LO, RANDOM_INT_HI)
        return bool(self._rng.getrandbits(1))

    def complete_state(self, partial: dict[str, Value], variables: Params) -> State:
        """Extend a partial assignment to a total State over `variables`,
        drawing pseudo-random values for the missing ones."""
        state: State = {}
        for name, sort in variables:
            if name in partial:
                state[name] = partial[name]
            else:
                state[name] = self._random_value(sort)
        return state

    # -- queries -----------------------------------------------------------

    def constrained_vars(self, constraint: Term, variables: Params) -> Params:
        """The subset of `variables` that actually occur in the constraint
        once relation calls are inlined; only these can be pinned by the
        solver, the rest are up for pseudo-random completion."""
        occurring = free_vars(inline_calls(constraint, self._defs))
        return tuple((n, s) for n, s in variables if n in occurring)

    def get_model(self, constraint: Term, variables: Params) -> State | None:
        """A total State over `variables` satisfying `constraint`, or None
        when unsatisfiable.

        Raises SolverUnknown on timeout/unknown so callers can decide
        (sampling treats it as exhaustion; inference aborts).
        """
        constrained = self.constrained_vars(constraint, variables)
        self.push_scope()
        try:
            self.declare_vars(variables)
            self.assert_term(constraint)
            verdict = self.check_sat()
            if verdict == "unsat":
                return None
            if verdict == "unknown":
                raise SolverUnknown("solver answered unknown for a model query")
            solved = self.get_values([n for n, _ in constrained])
        finally:
            if not self._poisoned:
                self.pop_scope()
        return self.complete_state(solved, variables)

    def check_valid(self, formula: Quantified) -> CheckResult:
        """Validity of a universally quantified formula, via satisfiability
        of the negated matrix. A counterexample is completed to a total
        State over the quantified variables."""
        negated = mk_not(formula.matrix)
        constrained = self.constrained_vars(negated, formula.vars)
        self.push_scope()
        try:
            self.declare_vars(formula.vars)
            self.assert_term(negated)
            verdict = self.check_sat()
            if verdict == "unsat":
                return CheckResult("valid")
            if verdict == "unknown":
                return CheckResult("unknown", reason="solver answered unknown")
            solved = self.get_values([n for n, _ in constrained])
        finally:
            if not self._poisoned:
                self.pop_scope()
        return CheckResult("counterexample", self.complete_state(solved, formula.vars))


def _parse_value_list(out: str) -> list[Value]:
    """Decode a `(get-value ...)` answer into the listed values, in order."""
    try:
        nodes = parse_sexprs(out)
    except SexprError as e:
        raise SolverError(f"unparseable get-value answer: {out!r}") from e
    if len(nodes) != 1 or not isinstance(nodes[0], SList):
        raise SolverError(f"unexpected get-value answer: {out!r}")
    values: list[Value] = []
    for pair in nodes[0].items:
        if not (isinstance(pair, SList) and len(pair.items) == 2):
            raise SolverError(f"unexpected get-value pair in: {out!r}")
        values.append(_decode_value(pair.items[1]))
    return values


def _decode_value(node: Node) -> Value:
    if isinstance(node, Atom):
        if node.text == "true":
            return True
        if node.text == "false":
            return False
        if node.text.isdigit():
            return int(node.text)
    elif (
        isinstance(node, SList)
        and len(node.items) == 2
        and isinstance(node.items[0], Atom)
        and node.items[0].text == "-"
        and isinstance(node.items[1], Atom)
        and node.items[1].text.isdigit()
    ):
        return -int(node.items[1].text)
    raise SolverError(f"cannot decode model value {node!r}")
