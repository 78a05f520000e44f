"""S-expression reader with source positions.

Tokenizes and parses SMT-LIB 2 / SyGuS-IF concrete syntax into nested
atom/list nodes. Every node carries the (line, column) of its first
character so later passes can report precise errors.
"""

from __future__ import annotations

from dataclasses import dataclass


class SexprError(Exception):
    """Malformed s-expression input."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True, slots=True)
class Atom:
    text: str
    line: int
    col: int


@dataclass(frozen=True, slots=True)
class SList:
    items: tuple["Node", ...]
    line: int
    col: int


Node = Atom | SList

# Characters allowed in SMT-LIB simple symbols (beyond alphanumerics).
_SYMBOL_CHARS = set("~!@$%^&*_-+=<>.?/")


def _is_symbol_char(c: str) -> bool:
    return c.isalnum() or c in _SYMBOL_CHARS


def tokenize(text: str) -> list[Atom]:
    """Split source text into atoms and parenthesis markers.

    Parens are returned as Atom("(") / Atom(")"); ';' comments run to end
    of line; "..." string literals and |...| quoted symbols are kept as
    single atoms.
    """
    tokens: list[Atom] = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
        elif c.isspace():
            col += 1
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            tokens.append(Atom(c, line, col))
            col += 1
            i += 1
        elif c == '"':
            start_line, start_col = line, col
            j = i + 1
            while j < n:
                if text[j] == '"':
                    if j + 1 < n and text[j + 1] == '"':
                        j += 2
                        continue
                    break
                if text[j] == "\n":
                    line += 1
                    col = 0
                j += 1
            if j >= n:
                raise SexprError("unterminated string literal", start_line, start_col)
            tokens.append(Atom(text[i : j + 1], start_line, start_col))
            col += j + 1 - i
            i = j + 1
        elif c == "|":
            start_line, start_col = line, col
            j = text.find("|", i + 1)
            if j < 0:
                raise SexprError("unterminated quoted symbol", start_line, start_col)
            tokens.append(Atom(text[i : j + 1], start_line, start_col))
            col += j + 1 - i
            i = j + 1
        elif _is_symbol_char(c):
            j = i
            while j < n and _is_symbol_char(text[j]):
                j += 1
            tokens.append(Atom(text[i:j], line, col))
            col += j - i
            i = j
        else:
            raise SexprError(f"unexpected character {c!r}", line, col)
    return tokens


def parse_sexprs(text: str) -> list[Node]:
    """Parse source text into a sequence of top-level s-expressions."""
    tokens = tokenize(text)
    out: list[Node] = []
    stack: list[tuple[list[Node], int, int]] = []
    for tok in tokens:
        if tok.text == "(":
            stack.append(([], tok.line, tok.col))
        elif tok.text == ")":
            if not stack:
                raise SexprError("unmatched ')'", tok.line, tok.col)
            items, line, col = stack.pop()
            node = SList(tuple(items), line, col)
            if stack:
                stack[-1][0].append(node)
            else:
                out.append(node)
        else:
            if stack:
                stack[-1][0].append(tok)
            else:
                out.append(tok)
    if stack:
        _, line, col = stack[-1]
        raise SexprError("unclosed '('", line, col)
    return out
