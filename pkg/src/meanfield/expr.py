"""A small arithmetic language for jump rates.

Grammar (highest precedence first)::

    primary := NUMBER | NAME | '(' expr ')'
    power   := primary ['^' unary]          # right-associative
    unary   := '-' unary | power
    term    := unary (('*' | '/') unary)*
    expr    := term (('+' | '-') term)*

Evaluation works on Python floats and on numpy arrays alike, so the same
tree serves scalar checks and the vectorised simulator.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from .errors import DivisionByZero, DomainError, ExprSyntaxError, UnknownIdentifier

__all__ = [
    "Const", "Var", "Neg", "BinOp", "ExprAst", "SymbolTable",
    "parse_expression", "evaluate", "free_variables", "to_source",
]


@dataclass(frozen=True)
class Const:
    value: float

    def eval(self, env):
        return self.value


@dataclass(frozen=True)
class Var:
    name: str

    def eval(self, env):
        return env[self.name]


@dataclass(frozen=True)
class Neg:
    operand: "ExprAst"

    def eval(self, env):
        return -self.operand.eval(env)


def _pow(base, exponent):
    if np.ndim(exponent) == 0 and float(exponent).is_integer():
        e = int(exponent)
        if e < 0 and np.any(np.asarray(base) == 0):
            raise DivisionByZero("zero raised to a negative power")
        if isinstance(base, np.ndarray):
            return np.power(base, float(e)) if e < 0 else np.power(base, e)
        return float(base) ** e
    bad = (np.asarray(base) < 0) & (np.asarray(exponent) != np.floor(exponent))
    if np.any(bad):
        raise DomainError("non-integer power of a negative base")
    if np.any((np.asarray(base) == 0) & (np.asarray(exponent) < 0)):
        raise DivisionByZero("zero raised to a negative power")
    return np.power(base, exponent) if isinstance(base, np.ndarray) or isinstance(
        exponent, np.ndarray) else float(base) ** float(exponent)


def _div(a, b):
    if np.any(np.asarray(b) == 0):
        raise DivisionByZero("division by zero")
    return a / b


_OPS = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _div,
    "^": _pow,
}


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "ExprAst"
    right: "ExprAst"
    _fn: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_fn", _OPS[self.op])

    def eval(self, env):
        a = self.left.eval(env)
        b = self.right.eval(env)
        return self._fn(a, b)


ExprAst = Union[Const, Var, Neg, BinOp]


@dataclass(frozen=True)
class SymbolTable:
    """State coordinate names plus named parameter values."""

    states: tuple[str, ...]
    params: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "params", dict(self.params))
        if len(set(self.states)) != len(self.states):
            raise ValueError("duplicate state names")
        clash = set(self.states) & set(self.params)
        if clash:
            raise ValueError(f"names used both as state and parameter: {sorted(clash)}")

    @classmethod
    def for_dimension(cls, k: int, params: Mapping[str, float]) -> "SymbolTable":
        return cls(tuple(f"x{i + 1}" for i in range(k)), params)

    def __contains__(self, name):
        return name in self.params or name in self.states


_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos or m.lastgroup is None:
            # skip trailing whitespace, otherwise report the bad character
            rest = source[pos:]
            if rest.strip() == "":
                break
            offset = pos + (len(rest) - len(rest.lstrip()))
            raise ExprSyntaxError(f"unexpected character {source[offset]!r}", offset)
        kind = m.lastgroup
        text = m.group(kind)
        tokens.append((kind, text, m.start(kind)))
        pos = m.end()
    tokens.append(("eof", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source, symbols):
        self.tokens = _tokenize(source)
        self.i = 0
        self.symbols = symbols

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def at_op(self, *ops):
        kind, text, _ = self.peek()
        return kind == "op" and text in ops

    def expect(self, text):
        kind, tok, offset = self.peek()
        if kind != "op" or tok != text:
            raise ExprSyntaxError(f"expected {text!r}", offset)
        self.advance()

    def parse(self):
        node = self.expr()
        kind, text, offset = self.peek()
        if kind != "eof":
            raise ExprSyntaxError(f"unexpected token {text!r}", offset)
        return node

    def expr(self):
        node = self.term()
        while self.at_op("+", "-"):
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.at_op("*", "/"):
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.at_op("-"):
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.primary()
        if self.at_op("^"):
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def primary(self):
        kind, text, offset = self.peek()
        if kind == "num":
            self.advance()
            return Const(float(text))
        if kind == "name":
            self.advance()
            if self.symbols is not None and text not in self.symbols:
                raise UnknownIdentifier(text)
            return Var(text)
        if kind == "op" and text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "eof" else repr(text)
        raise ExprSyntaxError(f"unexpected {what}", offset)


def parse_expression(source: str, symbols: SymbolTable | None = None) -> ExprAst:
    """Parse ``source`` into an expression tree.

    Every identifier must be declared in ``symbols``; pass ``None`` to skip
    that check. Offsets in syntax errors index into ``source``.
    """
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(source, symbols).parse()


def evaluate(ast: ExprAst, bindings: Mapping[str, float]):
    """Evaluate ``ast``; returns a float, or an array if any binding is one."""
    missing = free_variables(ast) - set(bindings)
    if missing:
        raise UnknownIdentifier(sorted(missing)[0])
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        result = ast.eval(bindings)
    if isinstance(result, np.ndarray):
        return result
    return float(result)


def free_variables(ast: ExprAst) -> frozenset[str]:
    if isinstance(ast, Var):
        return frozenset([ast.name])
    if isinstance(ast, Const):
        return frozenset()
    if isinstance(ast, Neg):
        return free_variables(ast.operand)
    return free_variables(ast.left) | free_variables(ast.right)


def to_source(ast: ExprAst) -> str:
    """Fully parenthesised source text; parses back to an equal tree."""
    if isinstance(ast, Const):
        return repr(float(ast.value))
    if isinstance(ast, Var):
        return ast.name
    if isinstance(ast, Neg):
        return f"(-{to_source(ast.operand)})"
    return f"({to_source(ast.left)} {ast.op} {to_source(ast.right)})"
