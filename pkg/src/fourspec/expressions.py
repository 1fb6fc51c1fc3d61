"""Small arithmetic expression grammar for coefficient specs.

Grammar: +, -, *, /, ^ (right associative), parentheses, unary minus,
numeric literals, the variable ``x``, the imaginary unit ``i``, the
constant ``pi``, and the functions sin, cos, exp, sqrt.  Expressions are
compiled once into vectorized numpy closures returning complex values.
"""

from __future__ import annotations

import re

import numpy as np

from .errors import ExpressionError

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^()]))"
)

_FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "sqrt": lambda v: np.sqrt(v.astype(complex) if hasattr(v, "astype") else complex(v)),
}

_CONSTANTS = {"pi": np.pi, "i": 1j}


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            bad = text[pos:].strip()[:12] or text[pos:pos + 1]
            raise ExpressionError(
                f"unrecognized token {bad!r} at position {pos} in {text!r}",
                token=bad, position=pos)
        if m.lastgroup is None and not text[pos:m.end()].strip():
            pos = m.end()
            continue
        kind = None
        for name in ("num", "name", "op"):
            if m.group(name) is not None:
                kind = name
                break
        if kind is None:
            pos = m.end()
            continue
        value = m.group(kind) if kind != "num" else text[m.start():m.end()].strip()
        tokens.append((kind, value, m.start()))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    """Recursive descent over the token stream."""

    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.k = 0

    def peek(self):
        return self.tokens[self.k]

    def take(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def fail(self, tok, expected):
        raise ExpressionError(
            f"unexpected token {tok[1]!r} at position {tok[2]} in {self.text!r}"
            f" (expected {expected})",
            token=tok[1], position=tok[2])

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            self.fail(tok, "end of expression")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            node = ("add" if op == "+" else "sub", node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.unary()
            node = ("mul" if op == "*" else "div", node, rhs)
        return node

    def unary(self):
        tok = self.peek()
        if tok[1] == "-":
            self.take()
            return ("neg", self.unary())
        if tok[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] in ("^", "**"):
            self.take()
            return ("pow", base, self.unary())
        return base

    def atom(self):
        tok = self.take()
        kind, value, _ = tok
        if kind == "num":
            return ("const", complex(float(value)))
        if kind == "name":
            if value == "x":
                return ("var",)
            if value in _CONSTANTS:
                return ("const", complex(_CONSTANTS[value]))
            if value in _FUNCTIONS:
                opening = self.take()
                if opening[1] != "(":
                    self.fail(opening, f"'(' after {value}")
                arg = self.expr()
                closing = self.take()
                if closing[1] != ")":
                    self.fail(closing, "')'")
                return ("call", value, arg)
            self.fail(tok, "x, i, pi, or a function name")
        if value == "(":
            node = self.expr()
            closing = self.take()
            if closing[1] != ")":
                self.fail(closing, "')'")
            return node
        self.fail(tok, "a value")


def _evaluate(node, x):
    op = node[0]
    if op == "const":
        return node[1]
    if op == "var":
        return x
    if op == "neg":
        return -_evaluate(node[1], x)
    if op == "add":
        return _evaluate(node[1], x) + _evaluate(node[2], x)
    if op == "sub":
        return _evaluate(node[1], x) - _evaluate(node[2], x)
    if op == "mul":
        return _evaluate(node[1], x) * _evaluate(node[2], x)
    if op == "div":
        return _evaluate(node[1], x) / _evaluate(node[2], x)
    if op == "pow":
        return _evaluate(node[1], x) ** _evaluate(node[2], x)
    if op == "call":
        return _FUNCTIONS[node[1]](_evaluate(node[2], x))
    raise ExpressionError(f"corrupt expression node {op!r}")


def _depends_on_x(node):
    if node[0] == "var":
        return True
    return any(_depends_on_x(child) for child in node[1:] if isinstance(child, tuple))


def compile_expression(text):
    """Compile ``text`` into a vectorized callable x -> complex."""
    node = _Parser(text).parse()

    def fn(x):
        x = np.asarray(x, dtype=complex) if np.ndim(x) else complex(x)
        out = _evaluate(node, x)
        if np.ndim(x) and np.ndim(out) == 0:
            out = np.full(np.shape(x), out, dtype=complex)
        return out

    fn.expression = text
    fn.constant = not _depends_on_x(node)
    return fn


def parse_constant(text):
    """Evaluate an expression with no ``x`` dependence (e.g. ``"3*i"``)."""
    node = _Parser(text).parse()
    if _depends_on_x(node):
        raise ExpressionError(f"expression {text!r} must not depend on x")
    return complex(_evaluate(node, 0.0))
