"""Tiny arithmetic expression language for fixture coefficient functions.

Grammar (standard precedence, ``^`` binds tightest and takes integer
literal exponents only)::

    expr  :=  term  (('+' | '-') term)*
    term  :=  unary (('*' | '/') unary)*
    unary :=  '-' unary | power
    power :=  atom ('^' ['-'] INT)*
    atom  :=  NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Known functions: ``sin``, ``cos``, ``exp``.  Known constant: ``pi``.
Evaluation is plain IEEE double arithmetic and accepts numpy arrays as
variable bindings, broadcasting elementwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FUNCTIONS = ("sin", "cos", "exp")
CONSTANTS = {"pi": np.pi}


class ExpressionError(ValueError):
    """Base for expression problems; carries a 0-based source position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (position {position})")
        self.position = position


class ParseError(ExpressionError):
    pass


class EvalError(ExpressionError):
    pass


@dataclass(frozen=True)
class Literal:
    value: float
    pos: int = 0


@dataclass(frozen=True)
class Var:
    name: str
    pos: int = 0


@dataclass(frozen=True)
class Neg:
    arg: "Expr"
    pos: int = 0


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"
    pos: int = 0


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int
    pos: int = 0


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Expr"
    pos: int = 0


Expr = Literal | Var | Neg | BinOp | Pow | Call


@dataclass(frozen=True)
class _Token:
    kind: str  # number | name | op | end
    text: str
    pos: int


def _tokenize(src: str) -> list[_Token]:
    tokens = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and src[i + 1].isdigit()):
            j = i
            while j < n and (src[j].isdigit() or src[j] == "."):
                j += 1
            if j < n and src[j] in "eE":
                k = j + 1
                if k < n and src[k] in "+-":
                    k += 1
                if k < n and src[k].isdigit():
                    j = k
                    while j < n and src[j].isdigit():
                        j += 1
            tokens.append(_Token("number", src[i:j], i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            tokens.append(_Token("name", src[i:j], i))
            i = j
            continue
        if c in "+-*/^(),":
            tokens.append(_Token("op", c, i))
            i += 1
            continue
        raise ParseError(f"unexpected character {c!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], allowed_vars: frozenset[str]):
        self.tokens = tokens
        self.k = 0
        self.allowed_vars = allowed_vars

    def peek(self) -> _Token:
        return self.tokens[self.k]

    def next(self) -> _Token:
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.next()
        if tok.kind != "op" or tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text or 'end of input'!r}", tok.pos)
        return tok

    def parse_expr(self) -> Expr:
        node = self.parse_term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            tok = self.next()
            node = BinOp(tok.text, node, self.parse_term(), tok.pos)
        return node

    def parse_term(self) -> Expr:
        node = self.parse_unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            tok = self.next()
            node = BinOp(tok.text, node, self.parse_unary(), tok.pos)
        return node

    def parse_unary(self) -> Expr:
        if self.peek().kind == "op" and self.peek().text == "-":
            tok = self.next()
            return Neg(self.parse_unary(), tok.pos)
        return self.parse_power()

    def parse_power(self) -> Expr:
        node = self.parse_atom()
        while self.peek().kind == "op" and self.peek().text == "^":
            tok = self.next()
            node = Pow(node, self.parse_exponent(), tok.pos)
        return node

    def parse_exponent(self) -> int:
        # Exponents are integer literals, optionally negated; chains like
        # 2^3^2 fold right-associatively into a single integer.
        sign = 1
        while self.peek().kind == "op" and self.peek().text == "-":
            self.next()
            sign = -sign
        tok = self.next()
        if tok.kind != "number" or any(ch in tok.text for ch in ".eE"):
            raise ParseError("exponent must be an integer literal", tok.pos)
        value = sign * int(tok.text)
        if self.peek().kind == "op" and self.peek().text == "^":
            self.next()
            value = value ** self.parse_exponent()
        return value

    def parse_atom(self) -> Expr:
        tok = self.next()
        if tok.kind == "number":
            return Literal(float(tok.text), tok.pos)
        if tok.kind == "name":
            if self.peek().kind == "op" and self.peek().text == "(":
                if tok.text not in FUNCTIONS:
                    raise ParseError(f"unknown function {tok.text!r}", tok.pos)
                self.next()
                arg = self.parse_expr()
                self.expect(")")
                return Call(tok.text, arg, tok.pos)
            if tok.text in CONSTANTS:
                return Var(tok.text, tok.pos)
            if tok.text not in self.allowed_vars:
                raise ParseError(f"unknown variable {tok.text!r}", tok.pos)
            return Var(tok.text, tok.pos)
        if tok.kind == "op" and tok.text == "(":
            node = self.parse_expr()
            self.expect(")")
            return node
        raise ParseError(f"unexpected token {tok.text or 'end of input'!r}", tok.pos)


def parse(src: str, allowed_vars=("t", "s", "x", "y", "z")) -> Expr:
    """Parse ``src`` into an Expr; names outside ``allowed_vars`` are errors."""
    if not src or not src.strip():
        raise ParseError("empty expression", 0)
    parser = _Parser(_tokenize(src), frozenset(allowed_vars))
    node = parser.parse_expr()
    tail = parser.peek()
    if tail.kind != "end":
        raise ParseError(f"unexpected token {tail.text!r}", tail.pos)
    return node


def evaluate(expr: Expr, bindings: dict):
    """Evaluate with the given variable bindings (floats or numpy arrays)."""
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, Var):
        if expr.name in CONSTANTS:
            return CONSTANTS[expr.name]
        try:
            return bindings[expr.name]
        except KeyError:
            raise EvalError(f"unbound variable {expr.name!r}", expr.pos) from None
    if isinstance(expr, Neg):
        return -evaluate(expr.arg, bindings)
    if isinstance(expr, BinOp):
        left = evaluate(expr.left, bindings)
        right = evaluate(expr.right, bindings)
        if expr.op == "+":
            return left + right
        if expr.op == "-":
            return left - right
        if expr.op == "*":
            return left * right
        if np.any(right == 0):
            raise EvalError("division by zero", expr.pos)
        return left / right
    if isinstance(expr, Pow):
        base = evaluate(expr.base, bindings)
        if expr.exponent < 0 and np.any(base == 0):
            raise EvalError("zero raised to a negative power", expr.pos)
        return base ** expr.exponent
    if isinstance(expr, Call):
        arg = evaluate(expr.arg, bindings)
        return getattr(np, expr.name)(arg)
    raise TypeError(f"not an expression node: {expr!r}")


_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _prec(expr: Expr) -> int:
    if isinstance(expr, BinOp):
        return _PRECEDENCE[expr.op]
    if isinstance(expr, Neg):
        return _PRECEDENCE["neg"]
    if isinstance(expr, Pow):
        return _PRECEDENCE["^"]
    return _PRECEDENCE["atom"]


def to_source(expr: Expr) -> str:
    """Canonical printer; parse(to_source(parse(s))) equals parse(s)."""

    def wrap(child: Expr, parent_prec: int) -> str:
        text = to_source(child)
        if _prec(child) < parent_prec:
            return f"({text})"
        return text

    if isinstance(expr, Literal):
        return repr(expr.value)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Neg):
        return "-" + wrap(expr.arg, _PRECEDENCE["neg"])
    if isinstance(expr, BinOp):
        prec = _PRECEDENCE[expr.op]
        left = wrap(expr.left, prec)
        # Left-associative: a - (b - c) must keep its parens.
        right = wrap(expr.right, prec + 1)
        return f"{left} {expr.op} {right}"
    if isinstance(expr, Pow):
        base = wrap(expr.base, _PRECEDENCE["^"] + 1)
        if expr.exponent < 0:
            return f"{base}^({expr.exponent})"
        return f"{base}^{expr.exponent}"
    if isinstance(expr, Call):
        return f"{expr.name}({to_source(expr.arg)})"
    raise TypeError(f"not an expression node: {expr!r}")


def differentiate(expr: Expr, var: str) -> Expr:
    """Exact derivative of ``expr`` with respect to ``var``, as a new Expr."""
    if isinstance(expr, Literal):
        return Literal(0.0)
    if isinstance(expr, Var):
        if expr.name == var:
            return Literal(1.0)
        return Literal(0.0)
    if isinstance(expr, Neg):
        return Neg(differentiate(expr.arg, var))
    if isinstance(expr, BinOp):
        dl = differentiate(expr.left, var)
        dr = differentiate(expr.right, var)
        if expr.op in "+-":
            return BinOp(expr.op, dl, dr)
        if expr.op == "*":
            return BinOp("+", BinOp("*", dl, expr.right), BinOp("*", expr.left, dr))
        num = BinOp("-", BinOp("*", dl, expr.right), BinOp("*", expr.left, dr))
        return BinOp("/", num, Pow(expr.right, 2))
    if isinstance(expr, Pow):
        if expr.exponent == 0:
            return Literal(0.0)
        inner = differentiate(expr.base, var)
        scaled = BinOp("*", Literal(float(expr.exponent)), Pow(expr.base, expr.exponent - 1))
        return BinOp("*", scaled, inner)
    if isinstance(expr, Call):
        inner = differentiate(expr.arg, var)
        if expr.name == "sin":
            outer: Expr = Call("cos", expr.arg)
        elif expr.name == "cos":
            outer = Neg(Call("sin", expr.arg))
        else:  # exp
            outer = Call("exp", expr.arg)
        return BinOp("*", outer, inner)
    raise TypeError(f"not an expression node: {expr!r}")
