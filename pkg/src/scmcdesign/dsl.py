"""Text constraints such as ``"x1^2 + x2^2 - 1 <= 0"``.

Grammar (EBNF)::

    constraint := expr relation expr
    relation   := "<=" | "<" | ">=" | ">" | "=="
    expr       := term { ("+" | "-") term }
    term       := unary { ("*" | "/") unary }
    unary      := "-" unary | power
    power      := atom [ "^" unary ]            (right associative)
    atom       := number | variable | call | "(" expr ")"
    call       := name "(" expr { "," expr } ")"
    variable   := "x" digits                    (1-based)
    number     := digits ["." digits] [("e"|"E") ["+"|"-"] digits]

Strict and non-strict relations are treated alike.  ``a <= b`` becomes the
deviation ``a - b``, ``a >= b`` becomes ``b - a`` and ``a == b`` becomes
``|a - b|``.  Expressions evaluate on whole ``(N, D)`` arrays at once.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .regions import EQUALITY, INEQUALITY, BoundingBox, Constraint, Region


class ParseError(ValueError):
    def __init__(self, message: str, text: str, position: int):
        self.message = message
        self.text = text
        self.position = position
        caret = " " * position + "^"
        super().__init__(f"{message} at position {position}\n  {text}\n  {caret}")


class DomainError(ValueError):
    """Evaluation left a function's domain (sqrt of a negative, log of <= 0, ...)."""


# ---------------------------------------------------------------- AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


_ARITY = {"sqrt": 1, "abs": 1, "sin": 1, "cos": 1, "exp": 1, "log": 1, "min": None, "max": None}


def to_text(node) -> str:
    """Fully parenthesised rendering; parses back to the same tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Neg):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_text(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


def max_var_index(node) -> int:
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Neg):
        return max_var_index(node.operand)
    if isinstance(node, BinOp):
        return max(max_var_index(node.left), max_var_index(node.right))
    if isinstance(node, Call):
        return max((max_var_index(a) for a in node.args), default=0)
    return 0


# ---------------------------------------------------------------- lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<rel><=|>=|==|<|>)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


# ---------------------------------------------------------------- parser

_INFIX = {"+": (10, 11), "-": (10, 11), "*": (20, 21), "/": (20, 21), "^": (41, 30)}
_PREFIX_NEG = 30


class _Parser:
    def __init__(self, text: str, dim: int):
        self.text = text
        self.dim = dim
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> Token:
        if self.tok.text != text:
            found = self.tok.text or "end of input"
            raise ParseError(f"expected {text!r}, found {found!r}", self.text, self.tok.pos)
        return self.advance()

    def expression(self, min_bp: int = 0):
        left = self.prefix()
        while True:
            tok = self.tok
            if tok.kind != "op" or tok.text not in _INFIX:
                break
            lbp, rbp = _INFIX[tok.text]
            if lbp < min_bp:
                break
            self.advance()
            right = self.expression(rbp)
            left = BinOp(tok.text, left, right)
        return left

    def prefix(self):
        tok = self.advance()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.text == "-":
            return Neg(self.expression(_PREFIX_NEG))
        if tok.text == "+":
            return self.expression(_PREFIX_NEG)
        if tok.text == "(":
            node = self.expression()
            self.expect(")")
            return node
        if tok.kind == "name":
            return self.name(tok)
        found = tok.text or "end of input"
        raise ParseError(f"expected an operand, found {found!r}", self.text, tok.pos)

    def name(self, tok: Token):
        m = re.fullmatch(r"x(\d+)", tok.text)
        if m:
            index = int(m.group(1))
            if not 1 <= index <= self.dim:
                raise ParseError(
                    f"variable {tok.text} out of range for dimension {self.dim}", self.text, tok.pos
                )
            return Var(index)
        if tok.text not in _ARITY:
            raise ParseError(f"unknown identifier {tok.text!r}", self.text, tok.pos)
        self.expect("(")
        args = [self.expression()]
        while self.tok.text == ",":
            self.advance()
            args.append(self.expression())
        self.expect(")")
        arity = _ARITY[tok.text]
        if (arity is not None and len(args) != arity) or (arity is None and len(args) < 2):
            want = arity if arity is not None else "at least 2"
            raise ParseError(
                f"{tok.text}() takes {want} argument(s), got {len(args)}", self.text, tok.pos
            )
        return Call(tok.text, tuple(args))


@dataclass(frozen=True)
class ConstraintExpr:
    """Parsed constraint; ``ast`` is the (signed) expression before ``abs`` for ``==``."""

    ast: object
    relation: str  # "<=" or "=="
    dim: int
    text: str = ""

    @property
    def kind(self) -> str:
        return EQUALITY if self.relation == "==" else INEQUALITY

    def pretty(self) -> str:
        return f"{to_text(self.ast)} {self.relation} 0"

    def evaluate(self, x) -> np.ndarray | float:
        return eval_constraint(self, x)

    def to_constraint(self) -> Constraint:
        return Constraint(self.kind, lambda pts: eval_constraint(self, pts), label=self.text or self.pretty())


def parse_expression(text: str, dim: int):
    p = _Parser(text, dim)
    node = p.expression()
    if p.tok.kind != "end":
        raise ParseError(f"unexpected {p.tok.text!r}", text, p.tok.pos)
    return node


def parse_constraint(text: str, dim: int) -> ConstraintExpr:
    if not text or not text.strip():
        raise ParseError("empty constraint", text or "", 0)
    if dim < 1:
        raise ValueError("dim must be positive")
    p = _Parser(text, dim)
    lhs = p.expression()
    rel = p.tok
    if rel.kind != "rel":
        found = rel.text or "end of input"
        raise ParseError(f"expected a relation (<=, >=, ==), found {found!r}", text, rel.pos)
    p.advance()
    rhs = p.expression()
    if p.tok.kind != "end":
        raise ParseError(f"unexpected {p.tok.text!r}", text, p.tok.pos)
    if rel.text in (">=", ">"):
        lhs, rhs = rhs, lhs
    ast = lhs if rhs == Num(0.0) else BinOp("-", lhs, rhs)
    relation = "==" if rel.text == "==" else "<="
    return ConstraintExpr(ast, relation, dim, text)


# ---------------------------------------------------------------- evaluation


def _domain_check(bad, node, what):
    if np.any(bad):
        raise DomainError(f"{what} in {to_text(node)}")


def _eval(node, x: np.ndarray):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return x[:, node.index - 1]
    if isinstance(node, Neg):
        return -_eval(node.operand, x)
    if isinstance(node, BinOp):
        a = _eval(node.left, x)
        b = _eval(node.right, x)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            _domain_check(np.asarray(b) == 0, node, "division by zero")
            return a / b
        base = np.asarray(a, dtype=float)
        expo = np.asarray(b, dtype=float)
        _domain_check((base < 0) & (expo != np.round(expo)), node, "negative base with fractional exponent")
        _domain_check((base == 0) & (expo < 0), node, "zero to a negative power")
        return np.power(base, expo)
    if isinstance(node, Call):
        args = [np.asarray(_eval(a, x), dtype=float) for a in node.args]
        if node.name == "sqrt":
            _domain_check(args[0] < 0, node, "square root of a negative number")
            return np.sqrt(args[0])
        if node.name == "log":
            _domain_check(args[0] <= 0, node, "logarithm of a non-positive number")
            return np.log(args[0])
        if node.name == "min":
            return np.minimum.reduce(np.broadcast_arrays(*args))
        if node.name == "max":
            return np.maximum.reduce(np.broadcast_arrays(*args))
        return {"abs": np.abs, "sin": np.sin, "cos": np.cos, "exp": np.exp}[node.name](args[0])
    raise TypeError(f"not an expression node: {node!r}")


def eval_constraint(expr: ConstraintExpr, x):
    """Deviation of ``x`` (one point or an ``(N, D)`` batch)."""
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != expr.dim:
        raise ValueError(f"constraint is {expr.dim}-dimensional, got points of shape {np.shape(x)}")
    val = np.broadcast_to(np.asarray(_eval(expr.ast, pts), dtype=float), (pts.shape[0],))
    if expr.relation == "==":
        val = np.abs(val)
    return float(val[0]) if single else np.array(val)


def dsl_region(texts, lower, upper, name: str = "dsl") -> Region:
    bbox = BoundingBox(lower, upper)
    if isinstance(texts, str):
        texts = [texts]
    exprs = [parse_constraint(t, bbox.dim) for t in texts]
    return Region(bbox, tuple(e.to_constraint() for e in exprs), name=name)
