"""Small s-expression reader shared by the program parser and target files.

Produces nested lists of `Sym`/`Str` atoms; `(`/`)` and `[`/`]` both
delimit lists (matching styles enforced). `;` comments run to end of line.
"""

from __future__ import annotations

from dataclasses import dataclass


class SexpError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} at line {line}, column {col}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Sym:
    text: str
    line: int = 0
    col: int = 0

    def __repr__(self):
        return self.text


@dataclass(frozen=True)
class Str:
    text: str
    line: int = 0
    col: int = 0

    def __repr__(self):
        return repr(self.text)


_DELIMS = "()[]"
_CLOSER = {"(": ")", "[": "]"}


def _tokens(text: str):
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch.isspace():
            col += 1
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in _DELIMS:
            yield ch, line, col
            col += 1
            i += 1
        elif ch == '"':
            start_line, start_col = line, col
            i += 1
            col += 1
            buf = []
            while i < n and text[i] != '"':
                if text[i] == "\n":
                    raise SexpError("unterminated string", start_line, start_col)
                if text[i] == "\\" and i + 1 < n:
                    i += 1
                    col += 1
                buf.append(text[i])
                i += 1
                col += 1
            if i >= n:
                raise SexpError("unterminated string", start_line, start_col)
            i += 1
            col += 1
            yield Str("".join(buf), start_line, start_col), start_line, start_col
        else:
            start_line, start_col = line, col
            j = i
            while j < n and not text[j].isspace() and text[j] not in _DELIMS and text[j] not in ';"':
                j += 1
            yield Sym(text[i:j], start_line, start_col), start_line, start_col
            col += j - i
            i = j


def parse_all(text: str) -> list:
    """Parse every top-level form in text."""
    stack: list[tuple[str, list, int, int]] = []
    top: list = []
    for tok, line, col in _tokens(text):
        if tok in ("(", "["):
            stack.append((tok, [], line, col))
        elif tok in (")", "]"):
            if not stack:
                raise SexpError(f"unmatched '{tok}'", line, col)
            opener, items, oline, ocol = stack.pop()
            if _CLOSER[opener] != tok:
                raise SexpError(f"mismatched '{opener}' closed by '{tok}'", line, col)
            if stack:
                stack[-1][1].append(items)
            else:
                top.append(items)
        else:
            if stack:
                stack[-1][1].append(tok)
            else:
                top.append(tok)
    if stack:
        opener, _, oline, ocol = stack[-1]
        raise SexpError(f"unclosed '{opener}'", oline, ocol)
    return top


def parse_one(text: str):
    forms = parse_all(text)
    if len(forms) != 1:
        raise SexpError(f"expected exactly one form, found {len(forms)}", 1, 1)
    return forms[0]


def position(form) -> tuple[int, int]:
    """Best-effort source position of a parsed form."""
    while isinstance(form, list):
        if not form:
            return 0, 0
        form = form[0]
    return form.line, form.col
