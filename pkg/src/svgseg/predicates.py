"""Boolean filter expressions over edge features.

A tiny recursive-descent language for the `filter` command: comparisons on
the ten named edge-feature components combined with && || ! and
parentheses. No arbitrary code execution.

    contiguous == 1 && intersection_count >= 1
    !(same_style == 1) || log_min_dist < 0.2
"""
from __future__ import annotations

import re
from typing import Callable

import numpy as np

from .graph_builder import EdgeFeature

FEATURE_NAMES = {f.name: f.value for f in EdgeFeature}


class PredicateSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} at position {position}")


_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>[+-]?(?:\d*\.\d+|\d+\.?)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>&&|\|\||==|!=|<=|>=|<|>|!|\(|\))
""", re.VERBOSE)

_COMPARATORS = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<=": lambda a, b: a <= b,
    ">=": lambda a, b: a >= b,
    "<": lambda a, b: a < b,
    ">": lambda a, b: a > b,
}


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise PredicateSyntaxError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(0), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind=None, value=None):
        tok = self.tokens[self.i]
        if kind is not None and tok[0] != kind:
            raise PredicateSyntaxError(f"expected {kind}, found {tok[1]!r}", tok[2])
        if value is not None and tok[1] != value:
            raise PredicateSyntaxError(f"expected {value!r}, found {tok[1]!r}", tok[2])
        self.i += 1
        return tok

    def parse(self) -> Callable[[np.ndarray], bool]:
        expr = self.parse_or()
        tok = self.peek()
        if tok[0] != "end":
            raise PredicateSyntaxError(f"trailing input {tok[1]!r}", tok[2])
        return expr

    def parse_or(self):
        left = self.parse_and()
        while self.peek()[:2] == ("op", "||"):
            self.take()
            right = self.parse_and()
            left = (lambda a, b: lambda f: a(f) or b(f))(left, right)
        return left

    def parse_and(self):
        left = self.parse_unary()
        while self.peek()[:2] == ("op", "&&"):
            self.take()
            right = self.parse_unary()
            left = (lambda a, b: lambda f: a(f) and b(f))(left, right)
        return left

    def parse_unary(self):
        kind, value, pos = self.peek()
        if (kind, value) == ("op", "!"):
            self.take()
            inner = self.parse_unary()
            return lambda f: not inner(f)
        if (kind, value) == ("op", "("):
            self.take()
            inner = self.parse_or()
            self.take("op", ")")
            return inner
        return self.parse_comparison()

    def parse_comparison(self):
        kind, name, pos = self.take("name")
        if name not in FEATURE_NAMES:
            raise PredicateSyntaxError(
                f"unknown feature {name!r} (one of: {', '.join(sorted(FEATURE_NAMES))})",
                pos)
        index = FEATURE_NAMES[name]
        op_tok = self.take("op")
        if op_tok[1] not in _COMPARATORS:
            raise PredicateSyntaxError(f"expected comparator, found {op_tok[1]!r}",
                                       op_tok[2])
        compare = _COMPARATORS[op_tok[1]]
        number = float(self.take("number")[1])
        return lambda f: bool(compare(float(f[index]), number))


def compile_predicate(text: str) -> Callable[[np.ndarray], bool]:
    """Compile a filter expression to a callable over edge-feature rows."""
    if not text.strip():
        raise PredicateSyntaxError("empty expression", 0)
    return _Parser(text).parse()
