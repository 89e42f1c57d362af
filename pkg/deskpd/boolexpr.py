"""Boolean expression trees for liberty ``function`` attributes.

Grammar (lowest to highest precedence): ``|``/``+``, ``^``, ``&``/``*``/juxtaposition, prefix ``!``,
postfix ``'``, atoms (pin names, ``0``/``1``, parenthesised expressions).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Tuple, Union

from .errors import ParseError


@dataclass(frozen=True)
class Const:
    value: bool


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class And:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Or:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Xor:
    left: "Expr"
    right: "Expr"


Expr = Union[Const, Var, Not, And, Or, Xor]

_TOKEN = re.compile(r"\s*(?:(?P<name>[A-Za-z_][\w\[\]\.]*)|(?P<const>[01])|(?P<op>[!'&*|+^()]))")


def parse_function(text: str) -> Expr:
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if match is None or match.end() == pos:
            raise ParseError(f"bad function expression '{text}' at offset {pos}")
        tokens.append(match.group("name") or match.group("const") or match.group("op"))
        pos = match.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    parser = _Parser(tokens, text)
    expr = parser.parse_or()
    if parser.pos != len(tokens):
        raise ParseError(f"trailing tokens in function '{text}'")
    return expr


class _Parser:
    def __init__(self, tokens, text):
        self.tokens = tokens
        self.text = text
        self.pos = 0

    def _peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def parse_or(self) -> Expr:
        left = self.parse_xor()
        while self._peek() in ("|", "+"):
            self.pos += 1
            left = Or(left, self.parse_xor())
        return left

    def parse_xor(self) -> Expr:
        left = self.parse_and()
        while self._peek() == "^":
            self.pos += 1
            left = Xor(left, self.parse_and())
        return left

    def parse_and(self) -> Expr:
        left = self.parse_unary()
        while True:
            tok = self._peek()
            if tok in ("&", "*"):
                self.pos += 1
            elif tok is None or tok in ("|", "+", "^", ")", "'"):
                return left
            left = And(left, self.parse_unary())

    def parse_unary(self) -> Expr:
        tok = self._peek()
        if tok == "!":
            self.pos += 1
            expr: Expr = Not(self.parse_unary())
        elif tok == "(":
            self.pos += 1
            expr = self.parse_or()
            if self._peek() != ")":
                raise ParseError(f"missing ')' in function '{self.text}'")
            self.pos += 1
        elif tok in ("0", "1"):
            self.pos += 1
            expr = Const(tok == "1")
        elif tok is not None and (tok[0].isalpha() or tok[0] == "_"):
            self.pos += 1
            expr = Var(tok)
        else:
            raise ParseError(f"unexpected '{tok}' in function '{self.text}'")
        while self._peek() == "'":
            self.pos += 1
            expr = Not(expr)
        return expr


def evaluate(expr: Expr, values: Mapping[str, bool]) -> bool:
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Var):
        return bool(values[expr.name])
    if isinstance(expr, Not):
        return not evaluate(expr.operand, values)
    if isinstance(expr, And):
        return evaluate(expr.left, values) and evaluate(expr.right, values)
    if isinstance(expr, Or):
        return evaluate(expr.left, values) or evaluate(expr.right, values)
    return evaluate(expr.left, values) != evaluate(expr.right, values)


def variables(expr: Expr) -> Tuple[str, ...]:
    """Input names in first-appearance order."""
    seen: dict = {}

    def walk(node: Expr) -> None:
        if isinstance(node, Var):
            seen.setdefault(node.name, None)
        elif isinstance(node, Not):
            walk(node.operand)
        elif isinstance(node, (And, Or, Xor)):
            walk(node.left)
            walk(node.right)

    walk(expr)
    return tuple(seen)
