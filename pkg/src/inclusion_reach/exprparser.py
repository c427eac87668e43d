"""Expression language for drift components.

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' power)?          right associative; exponent must be a
                                         constant non-negative integer
    atom   := NUMBER | 't' | 'x1'..'xd' | '(' expr ')'
            | ('abs' | 'sin' | 'cos' | 'exp') '(' expr ')'
            | ('min' | 'max') '(' expr (',' expr)+ ')'

Error positions are 1-based character offsets into the source string.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "ExprError",
    "ExprSyntaxError",
    "ArityError",
    "DimensionError",
    "EvalError",
    "Const",
    "Var",
    "Unary",
    "Binary",
    "Nary",
    "parse",
    "evaluate",
    "to_source",
    "variables",
]

UNARY_FUNCS = ("abs", "sin", "cos", "exp")
NARY_FUNCS = ("min", "max")


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, msg: str, position: int, expected: tuple[str, ...] = ()):
        self.position = position
        self.expected = expected
        text = f"{msg} at position {position}"
        if expected:
            text += f" (expected one of: {', '.join(expected)})"
        super().__init__(text)


class ArityError(ExprSyntaxError):
    pass


class DimensionError(ExprSyntaxError):
    pass


class EvalError(ExprError, ArithmeticError):
    pass


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str  # "t" or "x<k>"

    @property
    def index(self) -> int | None:
        return None if self.name == "t" else int(self.name[1:]) - 1


@dataclass(frozen=True)
class Unary:
    op: str  # neg | abs | sin | cos | exp
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Nary:
    op: str  # min | max
    args: tuple


Node = Union[Const, Var, Unary, Binary, Nary]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if not m:
            ws = len(src[pos:]) - len(src[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {src[pos + ws]!r}", pos + ws + 1)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append((kind, m.group(kind), start + 1))
        pos = m.end()
    toks.append(("end", "", len(src) + 1))
    return toks


class _Parser:
    def __init__(self, src: str, dim: int):
        self.toks = _tokenize(src)
        self.i = 0
        self.dim = dim

    @property
    def tok(self):
        return self.toks[self.i]

    def accept(self, op: str) -> bool:
        kind, text, _ = self.tok
        if kind == "op" and text == op:
            self.i += 1
            return True
        return False

    def expect(self, op: str, context: tuple[str, ...] = ()):
        if not self.accept(op):
            kind, text, pos = self.tok
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"unexpected {found}", pos, (repr(op),) + context)

    def parse(self) -> Node:
        node = self.expr()
        kind, text, pos = self.tok
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", pos, ("operator", "end of input"))
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok[0] == "op" and self.tok[1] in "+-":
            op = self.tok[1]
            self.i += 1
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok[0] == "op" and self.tok[1] in "*/":
            op = self.tok[1]
            self.i += 1
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.accept("-"):
            return Unary("neg", self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.tok[0] == "op" and self.tok[1] == "^":
            self.i += 1
            pos = self.tok[2]  # errors point at the exponent
            exponent = self.power()
            if variables(exponent):
                raise ExprSyntaxError("exponent must be a constant", pos)
            value = evaluate(exponent, np.zeros(self.dim), 0.0)
            if value < 0 or value != int(value):
                raise ExprSyntaxError(f"exponent must be a non-negative integer, got {value}", pos)
            return Binary("^", base, Const(float(int(value))))
        return base

    def atom(self) -> Node:
        kind, text, pos = self.tok
        if kind == "num":
            self.i += 1
            return Const(float(text))
        if kind == "name":
            self.i += 1
            if text == "t":
                return Var("t")
            m = re.fullmatch(r"x([1-9]\d*)", text)
            if m:
                k = int(m.group(1))
                if k > self.dim:
                    raise DimensionError(f"variable {text} exceeds dimension {self.dim}", pos)
                return Var(text)
            if text in UNARY_FUNCS or text in NARY_FUNCS:
                self.expect("(")
                args = [self.expr()]
                while self.accept(","):
                    args.append(self.expr())
                self.expect(")", ("','",))
                if text in UNARY_FUNCS:
                    if len(args) != 1:
                        raise ArityError(f"{text} takes exactly one argument, got {len(args)}", pos)
                    return Unary(text, args[0])
                if len(args) < 2:
                    raise ArityError(f"{text} needs at least two arguments, got {len(args)}", pos)
                return Nary(text, tuple(args))
            raise ExprSyntaxError(f"unknown identifier {text!r}", pos, ("t", f"x1..x{self.dim}") + UNARY_FUNCS + NARY_FUNCS)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {found}", pos, ("number", "variable", "function", "'('", "'-'"))


def parse(src: str, dim: int) -> Node:
    """Parse ``src`` into an AST over variables ``t, x1..x<dim>``."""
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    return _Parser(src, dim).parse()


def variables(node: Node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Const):
        return set()
    if isinstance(node, Unary):
        return variables(node.arg)
    if isinstance(node, Binary):
        return variables(node.left) | variables(node.right)
    return set().union(*(variables(a) for a in node.args))


def _ipow(base, n: int):
    result = np.ones_like(base)
    while n:
        if n & 1:
            result = result * base
        base = base * base
        n >>= 1
    return result


_UNARY = {"neg": np.negative, "abs": np.abs, "sin": np.sin, "cos": np.cos, "exp": np.exp}


def _eval(node: Node, x: np.ndarray, t):
    if isinstance(node, Const):
        return np.full(x.shape[:-1], node.value)
    if isinstance(node, Var):
        if node.index is None:
            return np.broadcast_to(np.asarray(t, dtype=float), x.shape[:-1]).copy()
        return x[..., node.index].astype(float)
    if isinstance(node, Unary):
        return _UNARY[node.op](_eval(node.arg, x, t))
    if isinstance(node, Nary):
        vals = [_eval(a, x, t) for a in node.args]
        red = np.minimum if node.op == "min" else np.maximum
        out = vals[0]
        for v in vals[1:]:
            out = red(out, v)
        return out
    left = _eval(node.left, x, t)
    if node.op == "^":
        return _ipow(left, int(node.right.value))
    right = _eval(node.right, x, t)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if np.any(right == 0):
        raise EvalError(f"division by zero in {to_source(node)}")
    return left / right


def evaluate(node: Node, x, t=0.0):
    """Evaluate at a point (returns float) or at a stack of points (returns array).

    ``x`` has shape (d,) or (..., d).
    """
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 1
    with np.errstate(all="ignore"):
        out = _eval(node, arr, t)
    if not np.all(np.isfinite(out)):
        raise EvalError(f"non-finite value evaluating {to_source(node)}")
    return float(out) if scalar else out


def to_source(node: Node) -> str:
    """Fully parenthesized source text that parses back to the same AST."""
    if isinstance(node, Const):
        if math.copysign(1.0, node.value) < 0:
            # literals are unsigned; a negative constant reads back as a negation
            return f"(-{-node.value!r})"
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            return f"(-{to_source(node.arg)})"
        return f"{node.op}({to_source(node.arg)})"
    if isinstance(node, Nary):
        return f"{node.op}({', '.join(to_source(a) for a in node.args)})"
    if node.op == "^":
        return f"({to_source(node.left)}^{int(node.right.value)})"
    return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
