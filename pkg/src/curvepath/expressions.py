"""Closed expression grammar for metric components.

Supported syntax: coordinate/parameter identifiers, numeric literals,
binary + - * /, unary minus, power with integer exponent (^ or **), and
the functions sqrt, exp, log, sin, cos, tan, sinh, cosh. The grammar is
deliberately tiny so that evaluation is bit-reproducible; fractional
powers are written via sqrt composition.

Parsing is total: any input either parses or raises ParseError with a
line/column location, never an uncaught crash.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Union

from .jets import JET_FUNCTIONS, Jet3

__all__ = [
    "Expression", "Num", "Var", "Neg", "BinOp", "Pow", "Call",
    "ParseError", "EvalError", "parse", "to_string", "evaluate", "free_identifiers",
]

FUNCTION_NAMES = tuple(sorted(JET_FUNCTIONS))

_MATH_FUNCTIONS = {
    "sqrt": math.sqrt, "exp": math.exp, "log": math.log,
    "sin": math.sin, "cos": math.cos, "tan": math.tan,
    "sinh": math.sinh, "cosh": math.cosh,
}


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, col {col})")
        self.line = line
        self.col = col


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Pow:
    base: "Expression"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expression"


Expression = Union[Num, Var, Neg, BinOp, Pow, Call]


# --- tokenizer -------------------------------------------------------------

@dataclass(frozen=True)
class _Token:
    kind: str   # num ident op lparen rparen end
    text: str
    line: int
    col: int


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, line, col = 0, 1, 1
    n = len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < n and (source[j].isdigit() or (source[j] == "." and not seen_dot)):
                if source[j] == ".":
                    seen_dot = True
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            tokens.append(_Token("num", source[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(_Token("ident", source[i:j], line, col))
            col += j - i
            i = j
            continue
        if c == "*" and i + 1 < n and source[i + 1] == "*":
            tokens.append(_Token("op", "^", line, col))
            i += 2
            col += 2
            continue
        if c in "+-*/^":
            tokens.append(_Token("op", c, line, col))
            i += 1
            col += 1
            continue
        if c == "(":
            tokens.append(_Token("lparen", c, line, col))
            i += 1
            col += 1
            continue
        if c == ")":
            tokens.append(_Token("rparen", c, line, col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {c!r}", line, col)
    tokens.append(_Token("end", "", line, col))
    return tokens


# --- recursive descent parser ----------------------------------------------

class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, message: str) -> "ParseError":
        tok = self.peek()
        return ParseError(message, tok.line, tok.col)

    def parse_expression(self) -> Expression:
        node = self.parse_term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.next().text
            node = BinOp(op, node, self.parse_term())
        return node

    def parse_term(self) -> Expression:
        node = self.parse_unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.next().text
            node = BinOp(op, node, self.parse_unary())
        return node

    def parse_unary(self) -> Expression:
        if self.peek().kind == "op" and self.peek().text == "-":
            self.next()
            return Neg(self.parse_unary())
        if self.peek().kind == "op" and self.peek().text == "+":
            self.next()
            return self.parse_unary()
        return self.parse_power()

    def parse_power(self) -> Expression:
        base = self.parse_atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.next()
            base = Pow(base, self.parse_int_exponent())
        return base

    def parse_int_exponent(self) -> int:
        sign = 1
        if self.peek().kind == "op" and self.peek().text in "+-":
            if self.next().text == "-":
                sign = -1
        tok = self.peek()
        if tok.kind != "num":
            raise self.fail("expected integer exponent")
        self.next()
        try:
            value = int(tok.text)
        except ValueError:
            raise ParseError("exponent must be an integer", tok.line, tok.col) from None
        return sign * value

    def parse_atom(self) -> Expression:
        tok = self.peek()
        if tok.kind == "num":
            self.next()
            return Num(float(tok.text))
        if tok.kind == "ident":
            self.next()
            if self.peek().kind == "lparen":
                if tok.text not in FUNCTION_NAMES:
                    raise ParseError(f"unknown function {tok.text!r}", tok.line, tok.col)
                self.next()
                arg = self.parse_expression()
                if self.peek().kind != "rparen":
                    raise self.fail("expected ')'")
                self.next()
                return Call(tok.text, arg)
            return Var(tok.text)
        if tok.kind == "lparen":
            self.next()
            node = self.parse_expression()
            if self.peek().kind != "rparen":
                raise self.fail("expected ')'")
            self.next()
            return node
        raise self.fail(f"unexpected token {tok.text!r}" if tok.text else "unexpected end of input")


def parse(source: str) -> Expression:
    parser = _Parser(_tokenize(source))
    node = parser.parse_expression()
    if parser.peek().kind != "end":
        raise parser.fail(f"trailing input {parser.peek().text!r}")
    return node


# --- printing ---------------------------------------------------------------

def _prec(node: Expression) -> int:
    if isinstance(node, BinOp):
        return 1 if node.op in "+-" else 2
    if isinstance(node, Neg):
        return 3
    if isinstance(node, Pow):
        return 4
    return 5


def to_string(node: Expression) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        inner = to_string(node.arg)
        if _prec(node.arg) < 3:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, BinOp):
        left = to_string(node.left)
        right = to_string(node.right)
        if _prec(node.left) < _prec(node):
            left = f"({left})"
        # the grammar is left associative, so a right operand of equal
        # precedence always needs parens to reparse to the same tree
        if _prec(node.right) <= _prec(node):
            right = f"({right})"
        return f"{left} {node.op} {right}"
    if isinstance(node, Pow):
        base = to_string(node.base)
        if _prec(node.base) <= 4:
            base = f"({base})"
        return f"{base}^{node.exponent}"
    if isinstance(node, Call):
        return f"{node.func}({to_string(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


def free_identifiers(node: Expression) -> set[str]:
    if isinstance(node, Num):
        return set()
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Neg):
        return free_identifiers(node.arg)
    if isinstance(node, BinOp):
        return free_identifiers(node.left) | free_identifiers(node.right)
    if isinstance(node, Pow):
        return free_identifiers(node.base)
    if isinstance(node, Call):
        return free_identifiers(node.arg)
    raise TypeError(f"not an expression node: {node!r}")


# --- evaluation ---------------------------------------------------------------

def evaluate(node: Expression, env: Mapping[str, object]):
    """Evaluate over floats or Jet3, depending on what env holds."""
    if isinstance(node, Num):
        sample = next(iter(env.values()), None)
        if isinstance(sample, Jet3):
            return Jet3.constant(node.value, sample.dim)
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise EvalError(f"unknown identifier {node.name!r}") from None
    if isinstance(node, Neg):
        return -evaluate(node.arg, env)
    if isinstance(node, BinOp):
        left = evaluate(node.left, env)
        right = evaluate(node.right, env)
        try:
            if node.op == "+":
                return left + right
            if node.op == "-":
                return left - right
            if node.op == "*":
                return left * right
            return left / right
        except ZeroDivisionError:
            raise EvalError("division by zero during evaluation") from None
    if isinstance(node, Pow):
        base = evaluate(node.base, env)
        if isinstance(base, Jet3):
            return base ** node.exponent
        if base == 0.0 and node.exponent < 0:
            raise EvalError("division by zero during evaluation")
        return base ** node.exponent
    if isinstance(node, Call):
        arg = evaluate(node.arg, env)
        try:
            if isinstance(arg, Jet3):
                return JET_FUNCTIONS[node.func](arg)
            return _MATH_FUNCTIONS[node.func](arg)
        except ValueError as exc:
            raise EvalError(str(exc)) from None
    raise TypeError(f"not an expression node: {node!r}")
