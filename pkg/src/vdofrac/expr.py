"""A small arithmetic expression language for coefficient definitions.

Grammar, from lowest to highest precedence::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?          # right-associative
    atom   := NUMBER | NAME | NAME "(" expr ("," expr)* ")" | "(" expr ")"

Functions: ``sin cos exp ln sqrt abs gammafn`` (one argument) and ``min max``
(two arguments). Evaluation works elementwise on numpy arrays.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Mapping, Union

import numpy as np

from vdofrac.fracops import DomainError, gamma_fn

__all__ = [
    "BinOp",
    "Call",
    "EvalError",
    "ExprSyntaxError",
    "Expression",
    "Neg",
    "Num",
    "Var",
    "evaluate",
    "free_vars",
    "parse",
]


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, offset: int, expected: frozenset[str] = frozenset()):
        self.offset = offset
        self.expected = expected
        details = f" (expected one of: {', '.join(sorted(expected))})" if expected else ""
        super().__init__(f"{message} at offset {offset}{details}")


class EvalError(ValueError):
    """Raised for unbound variables and domain errors during evaluation."""


# {{{ ast


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: Node


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple[Node, ...]


Node = Union[Num, Var, Neg, BinOp, Call]

FUNCTION_ARITY = {
    "sin": 1, "cos": 1, "exp": 1, "ln": 1, "sqrt": 1, "abs": 1, "gammafn": 1,
    "min": 2, "max": 2,
}

# }}}


# {{{ tokenizer

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
""", re.VERBOSE)


@dataclass(frozen=True)
class _Token:
    kind: str           # "number", "name", "op" or "eof"
    text: str
    offset: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = match.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, match.group(), pos))
        pos = match.end()

    tokens.append(_Token("eof", "", len(text)))
    return tokens


# }}}


# {{{ parser

_OPERAND_START = frozenset({"number", "name", "'('", "'-'"})


class _Parser:
    def __init__(self, text: str) -> None:
        self.tokens = _tokenize(text)
        self.pos = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def at_op(self, *ops: str) -> bool:
        return self.current.kind == "op" and self.current.text in ops

    def expect_op(self, op: str) -> None:
        if not self.at_op(op):
            self.fail({f"'{op}'"})
        self.advance()

    def fail(self, expected) -> None:
        tok = self.current
        what = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ExprSyntaxError(f"unexpected {what}", tok.offset, frozenset(expected))

    def parse(self) -> Node:
        node = self.expr()
        if self.current.kind != "eof":
            self.fail({"operator", "end of input"})
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.at_op("+", "-"):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.at_op("*", "/"):
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.at_op("-"):
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.at_op("^"):
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        tok = self.current
        if tok.kind == "number":
            self.advance()
            return Num(float(tok.text))

        if tok.kind == "name":
            self.advance()
            if not self.at_op("("):
                return Var(tok.text)

            if tok.text not in FUNCTION_ARITY:
                raise ExprSyntaxError(f"unknown function {tok.text!r}", tok.offset,
                                      frozenset(FUNCTION_ARITY))
            self.advance()
            args = [self.expr()]
            while self.at_op(","):
                self.advance()
                args.append(self.expr())

            arity = FUNCTION_ARITY[tok.text]
            if len(args) != arity:
                raise ExprSyntaxError(
                    f"function {tok.text!r} takes {arity} argument(s), got {len(args)}",
                    tok.offset)
            self.expect_op(")")
            return Call(tok.text, tuple(args))

        if self.at_op("("):
            self.advance()
            node = self.expr()
            self.expect_op(")")
            return node

        self.fail(_OPERAND_START)
        raise AssertionError("unreachable")


def parse(text: str) -> Node:
    """Parse *text* into an expression tree.

    :raises ExprSyntaxError: with the offset of the offending token and the
        set of tokens that would have been accepted there.
    """
    return _Parser(text).parse()


# }}}


# {{{ evaluation


def free_vars(node: Node) -> frozenset[str]:
    if isinstance(node, Num):
        return frozenset()
    if isinstance(node, Var):
        return frozenset({node.name})
    if isinstance(node, Neg):
        return free_vars(node.operand)
    if isinstance(node, BinOp):
        return free_vars(node.left) | free_vars(node.right)
    if isinstance(node, Call):
        result = frozenset()
        for arg in node.args:
            result |= free_vars(arg)
        return result
    raise TypeError(f"not an expression node: {node!r}")


def _call(name: str, args: list[np.ndarray]) -> np.ndarray:
    x = args[0]
    if name == "ln":
        if np.any(~(x > 0.0)):
            raise EvalError("ln of a non-positive value")
        return np.log(x)
    if name == "sqrt":
        if np.any(x < 0.0):
            raise EvalError("sqrt of a negative value")
        return np.sqrt(x)
    if name == "gammafn":
        try:
            return np.asarray(gamma_fn(x))
        except DomainError as exc:
            raise EvalError(str(exc)) from None
    if name == "min":
        return np.minimum(x, args[1])
    if name == "max":
        return np.maximum(x, args[1])

    return {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}[name](x)


def _eval(node: Node, env: Mapping[str, np.ndarray]) -> np.ndarray:
    if isinstance(node, Num):
        return np.float64(node.value)
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise EvalError(f"unbound variable {node.name!r}") from None
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, BinOp):
        left = _eval(node.left, env)
        right = _eval(node.right, env)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if node.op == "/":
            return np.divide(left, right)
        return np.power(left, right)
    if isinstance(node, Call):
        return _call(node.name, [_eval(arg, env) for arg in node.args])
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(node: Node, bindings: Mapping[str, float | np.ndarray]):
    """Evaluate *node* with IEEE double semantics.

    Array bindings broadcast; scalars in, float out.
    """
    env = {k: np.asarray(v, dtype=np.float64) for k, v in bindings.items()}
    with np.errstate(all="ignore"):
        result = _eval(node, env)

    if np.ndim(result) == 0:
        return float(result)
    return np.asarray(result, dtype=np.float64)


# }}}


class Expression:
    """A parsed expression together with its source text."""

    def __init__(self, text: str) -> None:
        self.text = text
        self.ast = parse(text)
        self.variables = free_vars(self.ast)

    def __repr__(self) -> str:
        return f"Expression({self.text!r})"

    def __call__(self, **bindings):
        return evaluate(self.ast, bindings)

    def as_function(self, *params: str) -> Callable[..., np.ndarray]:
        """Positional callable over *params*, broadcasting to the argument shape.

        :raises ValueError: if the expression uses a name outside *params*.
        """
        extra = self.variables - set(params)
        if extra:
            raise ValueError(
                f"expression {self.text!r} uses {sorted(extra)}; "
                f"allowed variables are {list(params)}")

        ast = self.ast

        def func(*args):
            env = dict(zip(params, args))
            value = evaluate(ast, env)
            shape = np.broadcast_shapes(*(np.shape(a) for a in args))
            if shape:
                return np.broadcast_to(value, shape).astype(np.float64)
            return value

        func.__doc__ = f"{self.text} as a function of {', '.join(params)}"
        return func
