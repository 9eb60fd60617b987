"""Recursive-descent parser for rendered expression strings.

Accepts exactly the grammar documented at ``loadsr.tree.render`` and
produces a small evaluable AST. The AST is independent of the tree
machinery so a render -> parse -> evaluate round trip exercises both
sides of the format.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ExpressionParseError
from .operators import GUARD_EPSILON, OperatorLibrary, _REGISTRY, _make_descriptor

_NUMBER = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_OP_NAME = re.compile(r"[a-z_][a-z_0-9]*")


@dataclass
class ParsedLeaf:
    index: int

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        return X[:, self.index]


@dataclass
class ParsedUnary:
    op: object
    a: float
    b: float
    c: float
    child: object

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        return self.a * self.op.value(self.b * self.child.evaluate(X)) + self.c


@dataclass
class ParsedBinary:
    op: object
    a: float
    b: float
    c: float
    d: float
    left: object
    right: object

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        return (self.a * self.op.value(self.b * self.left.evaluate(X),
                                       self.c * self.right.evaluate(X)) + self.d)


@dataclass
class ParsedExpression:
    """Root of a parsed expression plus the variable count it requires."""

    root: object
    n_variables: int
    text: str

    def evaluate(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.shape[1] < self.n_variables:
            raise ExpressionParseError(
                f"expression uses {self.n_variables} variables but X has {X.shape[1]} columns", 0)
        with np.errstate(all="ignore"):
            return self.root.evaluate(X)


def _default_token_maps(guard_epsilon: float):
    unary, binary = {}, {}
    for i, (name, (arity, _, token, _)) in enumerate(_REGISTRY.items()):
        op = _make_descriptor(name, 0, guard_epsilon)
        (unary if arity == 1 else binary)[token] = op
    return unary, binary


class _Parser:
    def __init__(self, text: str, unary_by_token: dict, binary_by_token: dict):
        self.text = text
        self.unary = unary_by_token
        self.binary = binary_by_token
        self.max_leaf = -1

    def fail(self, message: str, pos: int):
        raise ExpressionParseError(message, pos)

    def expect(self, literal: str, pos: int) -> int:
        if not self.text.startswith(literal, pos):
            found = self.text[pos:pos + len(literal)] or "end of input"
            self.fail(f"expected {literal!r}, found {found!r}", pos)
        return pos + len(literal)

    def number(self, pos: int) -> tuple[float, int]:
        m = _NUMBER.match(self.text, pos)
        if m is None:
            self.fail("expected a number", pos)
        return float(m.group()), m.end()

    def parse_expr(self, pos: int):
        a, pos = self.number(pos)
        pos = self.expect("*(", pos)
        inner, pos = self.parse_inner(pos)
        pos = self.expect(") + ", pos)
        tail, pos = self.number(pos)
        kind, payload = inner
        if kind == "unary":
            op, b, child = payload
            return ParsedUnary(op, a, b, tail, child), pos
        op, b, c, left, right = payload
        return ParsedBinary(op, a, b, c, tail, left, right), pos

    def parse_inner(self, pos: int):
        if self.text.startswith("(", pos):
            pos = self.expect("(", pos)
            b, pos = self.number(pos)
            pos = self.expect("*", pos)
            first, pos = self.parse_arg(pos)
            pos = self.expect(")", pos)
            for token, op in self.binary.items():
                joint = f" {token} ("
                if self.text.startswith(joint, pos):
                    pos += len(joint)
                    c, pos = self.number(pos)
                    pos = self.expect("*", pos)
                    right, pos = self.parse_arg(pos)
                    pos = self.expect(")", pos)
                    return ("binary", (op, b, c, first, right)), pos
            # a bare parenthesized group is the identity operator's argument
            if "" not in self.unary:
                self.fail("identity operator not available in this library", pos)
            return ("unary", (self.unary[""], b, first)), pos

        m = _OP_NAME.match(self.text, pos)
        if m is None:
            self.fail("expected an operator name or '('", pos)
        name = m.group()
        if name not in self.unary:
            self.fail(f"unknown unary operator token {name!r}", pos)
        pos = self.expect("(", m.end())
        b, pos = self.number(pos)
        pos = self.expect("*", pos)
        child, pos = self.parse_arg(pos)
        pos = self.expect(")", pos)
        return ("unary", (self.unary[name], b, child)), pos

    def parse_arg(self, pos: int):
        if (self.text.startswith("x", pos)
                and pos + 1 < len(self.text) and self.text[pos + 1].isdigit()):
            end = pos + 1
            while end < len(self.text) and self.text[end].isdigit():
                end += 1
            index = int(self.text[pos + 1:end])
            self.max_leaf = max(self.max_leaf, index)
            return ParsedLeaf(index), end
        return self.parse_expr(pos)


def parse_expression(text: str, library: OperatorLibrary | None = None,
                     guard_epsilon: float = GUARD_EPSILON) -> ParsedExpression:
    """Parse a rendered expression string.

    With no library given, every registered operator token is accepted
    (using ``guard_epsilon`` for the guarded ones); pass a library to
    restrict tokens and reuse its guard setting.
    """
    if library is not None:
        unary = {op.token: op for op in library.unary}
        binary = {op.token: op for op in library.binary}
    else:
        unary, binary = _default_token_maps(guard_epsilon)
    parser = _Parser(text, unary, binary)
    if not text:
        parser.fail("empty expression", 0)
    root, pos = parser.parse_expr(0)
    if pos != len(text):
        parser.fail(f"unexpected trailing characters {text[pos:pos + 10]!r}", pos)
    return ParsedExpression(root, parser.max_leaf + 1, text)
