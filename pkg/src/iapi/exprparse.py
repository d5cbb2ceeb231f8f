"""Recursive-descent parser and evaluator for scalar math expressions.

Configuration files define dynamics, costs, and explicit policies as
expression strings over the state variables ``x1..xn``.  The grammar:

    expr    := term (('+' | '-') term)*          left associative
    term    := factor (('*' | '/') factor)*      left associative
    factor  := '-' factor | power
    power   := primary ('^' factor)?             right associative
    primary := NUMBER | 'pi' | 'e' | VAR | FUNC '(' expr ')' | '(' expr ')'

so ``^`` binds tighter than unary minus, which binds tighter than ``*``
and ``/``.  Evaluation is IEEE double, vectorized over batches of states,
and raises :class:`EvalError` on domain violations instead of letting NaN
propagate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    EvalError,
    ExprSyntaxError,
    UnknownIdentifierError,
    VariableOutOfRangeError,
    WrongArityError,
)

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "ln": None,  # handled specially for the domain check
    "sqrt": None,
    "abs": np.abs,
    "tanh": np.tanh,
}

CONSTANTS = {"pi": math.pi, "e": math.e}

_MAX_DEPTH = 200  # parser recursion guard; deeper nesting is rejected, not crashed


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float
    pos: int = 0


@dataclass(frozen=True)
class Var:
    index: int  # 0-based
    pos: int = 0


@dataclass(frozen=True)
class Neg:
    operand: "ExprAst"
    pos: int = 0


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "ExprAst"
    right: "ExprAst"
    pos: int = 0


@dataclass(frozen=True)
class Call:
    name: str
    arg: "ExprAst"
    pos: int = 0


ExprAst = Const | Var | Neg | BinOp | Call


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Token:
    kind: str  # num | ident | op | lparen | rparen | comma | end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            tokens.append(_Token("num", text[i:j], i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("ident", text[i:j], i))
            i = j
            continue
        if c in "+-*/^":
            tokens.append(_Token("op", c, i))
        elif c == "(":
            tokens.append(_Token("lparen", c, i))
        elif c == ")":
            tokens.append(_Token("rparen", c, i))
        elif c == ",":
            tokens.append(_Token("comma", c, i))
        else:
            raise ExprSyntaxError(f"unexpected character {c!r}", i)
        i += 1
    tokens.append(_Token("end", "", n))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[_Token], dim: int):
        self.tokens = tokens
        self.dim = dim
        self.k = 0
        self.depth = 0

    def peek(self) -> _Token:
        return self.tokens[self.k]

    def advance(self) -> _Token:
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect(self, kind: str, what: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ExprSyntaxError(f"expected {what}", tok.pos)
        return self.advance()

    def _enter(self):
        self.depth += 1
        if self.depth > _MAX_DEPTH:
            raise ExprSyntaxError("expression too deeply nested", self.peek().pos)

    def parse(self) -> ExprAst:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExprSyntaxError(f"unexpected {tok.text!r}", tok.pos)
        return node

    def expr(self) -> ExprAst:
        self._enter()
        try:
            node = self.term()
            while self.peek().kind == "op" and self.peek().text in "+-":
                op = self.advance()
                rhs = self.term()
                node = BinOp(op.text, node, rhs, op.pos)
            return node
        finally:
            self.depth -= 1

    def term(self) -> ExprAst:
        node = self.factor()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance()
            rhs = self.factor()
            node = BinOp(op.text, node, rhs, op.pos)
        return node

    def factor(self) -> ExprAst:
        self._enter()
        try:
            tok = self.peek()
            if tok.kind == "op" and tok.text == "-":
                self.advance()
                return Neg(self.factor(), tok.pos)
            if tok.kind == "op" and tok.text == "+":
                self.advance()
                return self.factor()
            return self.power()
        finally:
            self.depth -= 1

    def power(self) -> ExprAst:
        base = self.primary()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.advance()
            exponent = self.factor()  # right associative; exponent may be signed
            return BinOp("^", base, exponent, tok.pos)
        return base

    def primary(self) -> ExprAst:
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            try:
                value = float(tok.text)
            except (ValueError, OverflowError):
                raise ExprSyntaxError(f"bad number {tok.text!r}", tok.pos) from None
            return Const(value, tok.pos)
        if tok.kind == "lparen":
            self.advance()
            node = self.expr()
            self.expect("rparen", "')'")
            return node
        if tok.kind == "ident":
            self.advance()
            name = tok.text
            if self.peek().kind == "lparen":
                return self.call(name, tok.pos)
            if name in CONSTANTS:
                return Const(CONSTANTS[name], tok.pos)
            if len(name) > 1 and name[0] == "x" and name[1:].isdigit():
                index = int(name[1:])
                if not 1 <= index <= self.dim:
                    raise VariableOutOfRangeError(
                        f"variable {name} out of range for dimension {self.dim}", tok.pos
                    )
                return Var(index - 1, tok.pos)
            raise UnknownIdentifierError(f"unknown identifier {name!r}", tok.pos)
        raise ExprSyntaxError("expected expression", tok.pos)

    def call(self, name: str, pos: int) -> ExprAst:
        if name not in FUNCTIONS:
            raise UnknownIdentifierError(f"unknown function {name!r}", pos)
        self.expect("lparen", "'('")
        args = [self.expr()]
        while self.peek().kind == "comma":
            self.advance()
            args.append(self.expr())
        self.expect("rparen", "')'")
        if len(args) != 1:
            raise WrongArityError(f"{name} takes 1 argument, got {len(args)}", pos)
        return Call(name, args[0], pos)


def parse(text: str, dim: int) -> ExprAst:
    """Parse expression ``text`` over variables x1..x<dim> into an AST."""
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    if dim < 1:
        raise DimensionMismatchError(f"dimension must be >= 1, got {dim}")
    return _Parser(_tokenize(text), dim).parse()


# ---------------------------------------------------------------------------
# Evaluator
# ---------------------------------------------------------------------------

def _int_power(base, k: int):
    """Exponentiation by squaring; exact for the monomial-style integer case."""
    if k == 0:
        return np.ones_like(base) if isinstance(base, np.ndarray) else 1.0
    neg = k < 0
    k = abs(k)
    acc = None
    cur = base
    while k:
        if k & 1:
            acc = cur if acc is None else acc * cur
        k >>= 1
        if k:
            cur = cur * cur
    if neg:
        if np.any(acc == 0.0):
            raise EvalError("zero raised to a negative power")
        return 1.0 / acc
    return acc


def _eval_node(node: ExprAst, columns) -> float | np.ndarray:
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return columns[node.index]
    if isinstance(node, Neg):
        return -_eval_node(node.operand, columns)
    if isinstance(node, Call):
        arg = _eval_node(node.arg, columns)
        if node.name == "ln":
            if np.any(np.asarray(arg) <= 0.0):
                raise EvalError(f"ln of nonpositive value (at position {node.pos})")
            return np.log(arg)
        if node.name == "sqrt":
            if np.any(np.asarray(arg) < 0.0):
                raise EvalError(f"sqrt of negative value (at position {node.pos})")
            return np.sqrt(arg)
        return FUNCTIONS[node.name](arg)
    if isinstance(node, BinOp):
        left = _eval_node(node.left, columns)
        right = _eval_node(node.right, columns)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if node.op == "/":
            if np.any(np.asarray(right) == 0.0):
                raise EvalError(f"division by zero (at position {node.pos})")
            return left / right
        # real power; integer fast path keeps monomials exact and fast
        if isinstance(node.right, Const) and float(node.right.value).is_integer():
            return _int_power(left, int(node.right.value))
        rarr = np.asarray(right, dtype=float)
        larr = np.asarray(left, dtype=float)
        fractional = rarr != np.floor(rarr)
        if np.any((larr < 0.0) & fractional):
            raise EvalError(f"fractional power of negative base (at position {node.pos})")
        if np.any((larr == 0.0) & (rarr < 0.0)):
            raise EvalError(f"zero raised to a negative power (at position {node.pos})")
        return np.power(left, right)
    raise TypeError(f"not an AST node: {node!r}")


def evaluate(ast: ExprAst, x) -> float | np.ndarray:
    """Evaluate ``ast`` at a state (n,) or a batch of states (N, n).

    Returns a float for a single state and an (N,) array for a batch.
    """
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise DimensionMismatchError(f"expected state or state batch, got shape {np.shape(x)}")
    columns = [arr[:, i] for i in range(arr.shape[1])]
    try:
        out = _eval_node(ast, columns)
    except IndexError:
        raise DimensionMismatchError(
            f"expression uses variables beyond state dimension {arr.shape[1]}"
        ) from None
    if isinstance(out, np.ndarray) and out.shape == (arr.shape[0],):
        if np.isnan(out).any():
            raise EvalError("expression produced NaN")
        return float(out[0]) if single else out
    value = float(out)  # constant expression
    if math.isnan(value):
        raise EvalError("expression produced NaN")
    return value if single else np.full(arr.shape[0], value)


def variables_used(ast: ExprAst) -> set[int]:
    """0-based indices of state variables appearing in the AST."""
    if isinstance(ast, Var):
        return {ast.index}
    if isinstance(ast, Neg):
        return variables_used(ast.operand)
    if isinstance(ast, Call):
        return variables_used(ast.arg)
    if isinstance(ast, BinOp):
        return variables_used(ast.left) | variables_used(ast.right)
    return set()
