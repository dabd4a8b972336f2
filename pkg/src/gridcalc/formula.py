"""Cell references and the formula language: lexing, parsing, rendering, evaluation.

Grammar (whitespace between tokens is ignored)::

    formula  := expr
    expr     := term (("+"|"-") term)*
    term     := factor (("*"|"/") factor)*
    factor   := ("-")* power
    power    := atom ("^" factor)?
    atom     := NUMBER | REF | func | "(" expr ")"
    func     := NAME "(" arg ("," arg)* ")"
    arg      := expr | REF ":" REF

``^`` is right-associative and binds tighter than unary minus, so ``-2^2``
is ``-(2^2)`` while ``2^-1`` is ``2^(-1)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Union

from .errors import EvalError, FormulaSyntaxError, MalformedRef, UnboundRef

MAX_COLUMN = 16384  # XFD
MAX_RANGE_CELLS = 65536  # guards against ranges that would expand to billions of refs

FUNCTIONS = frozenset({'SUM', 'MIN', 'MAX', 'AVERAGE'})

_REF_RE = re.compile(r'([A-Z]{1,3})([1-9][0-9]*)')


def column_index(column: str) -> int:
    """1-based index of a column name: A -> 1, Z -> 26, AA -> 27."""
    n = 0
    for ch in column:
        n = n * 26 + (ord(ch) - 64)
    return n


def column_name(index: int) -> str:
    if index < 1:
        raise ValueError(f'column index must be positive, got {index}')
    letters = []
    while index:
        index, rem = divmod(index - 1, 26)
        letters.append(chr(65 + rem))
    return ''.join(reversed(letters))


class CellRef(NamedTuple):
    """A1-style cell coordinate."""

    column: str
    row: int

    def __str__(self):
        return f'{self.column}{self.row}'

    @property
    def sort_key(self):
        # Row-major: row, then column by length then letters (B before AA).
        return (self.row, len(self.column), self.column)

    @classmethod
    def at(cls, column: int, row: int) -> 'CellRef':
        return cls(column_name(column), row)


def parse_ref(text: str) -> CellRef:
    m = _REF_RE.fullmatch(text) if isinstance(text, str) else None
    if m is None or not _valid_column(m.group(1)):
        raise MalformedRef(f'malformed cell reference {text!r}')
    return CellRef(m.group(1), int(m.group(2)))


def row_major(refs) -> list[CellRef]:
    return sorted(refs, key=lambda r: (r.row, len(r.column), r.column))


# -- AST ---------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class NumberLiteral:
    value: float


@dataclass(frozen=True, slots=True)
class Reference:
    ref: CellRef


@dataclass(frozen=True, slots=True)
class Unary:
    operand: 'Node'
    op: str = '-'


@dataclass(frozen=True, slots=True)
class Binary:
    op: str  # one of + - * / ^
    left: 'Node'
    right: 'Node'


@dataclass(frozen=True, slots=True)
class RangeArg:
    start: CellRef
    end: CellRef

    def size(self) -> int:
        cols = abs(column_index(self.start.column) - column_index(self.end.column)) + 1
        return cols * (abs(self.start.row - self.end.row) + 1)

    def cells(self) -> list[CellRef]:
        """Covered cells in row-major order; corners may be given in any order."""
        c0, c1 = sorted((column_index(self.start.column), column_index(self.end.column)))
        r0, r1 = sorted((self.start.row, self.end.row))
        names = [column_name(c) for c in range(c0, c1 + 1)]
        return [CellRef(name, r) for r in range(r0, r1 + 1) for name in names]


@dataclass(frozen=True, slots=True)
class FunctionCall:
    name: str
    args: tuple  # of Node | RangeArg


Node = Union[NumberLiteral, Reference, Unary, Binary, FunctionCall]

BINARY_OPS = ('+', '-', '*', '/', '^')


# -- lexer -------------------------------------------------------------------

class Token(NamedTuple):
    kind: str  # NUMBER, REF, NAME, OP, END
    text: str
    offset: int


_TOKEN_RE = re.compile(r"""
      (?P<NUMBER>(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?)
    | (?P<WORD>[A-Za-z_$][A-Za-z0-9_$]*)
    | (?P<OP>[-+*/^(),:])
    | (?P<SPACE>\s+)
    | (?P<BAD>.)
    """, re.VERBOSE | re.DOTALL)


def _valid_column(column: str) -> bool:
    return len(column) < 3 or column_index(column) <= MAX_COLUMN


def tokenize(text: str) -> list[Token]:
    tokens = []
    append = tokens.append
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        if kind == 'SPACE':
            continue
        lexeme = m.group()
        if kind == 'WORD':
            if lexeme.isalpha() and lexeme.isupper():
                kind = 'NAME'
            else:
                rm = _REF_RE.fullmatch(lexeme)
                if rm is None or not _valid_column(rm.group(1)):
                    raise FormulaSyntaxError(f'malformed reference {lexeme!r}', m.start(), text)
                kind = 'REF'
        elif kind == 'BAD':
            raise FormulaSyntaxError(f'unexpected character {lexeme!r}', m.start(), text)
        append(Token(kind, lexeme, m.start()))
    append(Token('END', '', len(text)))
    return tokens


# -- parser ------------------------------------------------------------------

class _Parser:
    # The token list always ends with an END token and parsing never advances
    # past it, so ``self.tokens[self.pos]`` is always valid.

    def __init__(self, text):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.tokens[self.pos]
        return FormulaSyntaxError(message, tok.offset, self.text)

    def unexpected(self):
        tok = self.tokens[self.pos]
        if tok.kind == 'END':
            return self.error('unexpected end of formula')
        return self.error(f'unexpected {tok.text!r}')

    def close_paren(self, open_tok):
        tok = self.tokens[self.pos]
        if tok.text == ')' and tok.kind == 'OP':
            self.pos += 1
            return
        if tok.kind == 'END':
            raise self.error('unbalanced parenthesis', open_tok)
        raise self.error(f"expected ')', found {tok.text!r}")

    def parse(self):
        if self.tokens[0].kind == 'END':
            raise self.error('empty formula')
        node = self.expr()
        if self.tokens[self.pos].kind != 'END':
            raise self.unexpected()
        return node

    # Operator lexemes never collide with NUMBER/REF/NAME text, so checking
    # ``tok.text`` alone identifies operators.

    def expr(self):
        node = self.term()
        tokens = self.tokens
        while tokens[self.pos].text in ('+', '-'):
            op = tokens[self.pos].text
            self.pos += 1
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        tokens = self.tokens
        while tokens[self.pos].text in ('*', '/'):
            op = tokens[self.pos].text
            self.pos += 1
            node = Binary(op, node, self.factor())
        return node

    def factor(self):
        if self.tokens[self.pos].text == '-':
            self.pos += 1
            return Unary(self.factor())
        return self.power()

    def power(self):
        base = self.atom()
        if self.tokens[self.pos].text == '^':
            self.pos += 1
            return Binary('^', base, self.factor())
        return base

    def atom(self):
        tok = self.tokens[self.pos]
        kind = tok.kind
        if kind == 'REF':
            self.pos += 1
            return Reference(parse_ref(tok.text))
        if kind == 'NUMBER':
            self.pos += 1
            value = float(tok.text)
            if math.isinf(value):
                raise self.error(f'number out of range {tok.text!r}', tok)
            return NumberLiteral(value)
        if kind == 'NAME':
            return self.call()
        if tok.text == '(':
            self.pos += 1
            node = self.expr()
            self.close_paren(tok)
            return node
        raise self.unexpected()

    def call(self):
        name_tok = self.advance()
        if name_tok.text not in FUNCTIONS:
            raise self.error(f'unknown function {name_tok.text!r}', name_tok)
        if self.tokens[self.pos].text != '(':
            raise self.error(f"expected '(' after {name_tok.text}")
        open_tok = self.advance()
        args = [self.arg()]
        while self.tokens[self.pos].text == ',':
            self.pos += 1
            args.append(self.arg())
        self.close_paren(open_tok)
        return FunctionCall(name_tok.text, tuple(args))

    def arg(self):
        tok = self.tokens[self.pos]
        if tok.kind == 'REF' and self.tokens[self.pos + 1].text == ':':
            self.pos += 2
            end = self.tokens[self.pos]
            if end.kind != 'REF':
                raise self.error("expected cell reference after ':'")
            self.pos += 1
            rng = RangeArg(parse_ref(tok.text), parse_ref(end.text))
            if rng.size() > MAX_RANGE_CELLS:
                raise self.error(f'range covers more than {MAX_RANGE_CELLS} cells', tok)
            return rng
        return self.expr()


def parse_formula(text: str) -> Node:
    """Parse a formula body (no leading ``=``) into an AST."""
    return _Parser(text).parse()


# -- queries -----------------------------------------------------------------

def iter_children(ast) -> Iterator[CellRef]:
    """Yield referenced cells in left-to-right textual order, ranges expanded."""
    stack = [ast]
    while stack:
        node = stack.pop()
        if isinstance(node, Reference):
            yield node.ref
        elif isinstance(node, Binary):
            stack.append(node.right)
            stack.append(node.left)
        elif isinstance(node, Unary):
            stack.append(node.operand)
        elif isinstance(node, FunctionCall):
            stack.extend(reversed(node.args))
        elif isinstance(node, RangeArg):
            yield from node.cells()


def extract_children(ast) -> list[CellRef]:
    return list(iter_children(ast))


def is_constant(ast) -> bool:
    return next(iter_children(ast), None) is None


# -- rendering ---------------------------------------------------------------

def format_number(value: float) -> str:
    """Shortest round-trip decimal; integral values print without a point."""
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f'cannot format non-finite value {value!r}')
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


_PREC = {'+': 1, '-': 1, '*': 2, '/': 2, '^': 4}
_UNARY_PREC = 3
_ATOM_PREC = 5


def _precedence(node) -> int:
    if isinstance(node, Binary):
        return _PREC[node.op]
    if isinstance(node, Unary):
        return _UNARY_PREC
    if isinstance(node, NumberLiteral) and node.value < 0:
        return _UNARY_PREC
    return _ATOM_PREC


def _wrap(node, need_parens):
    text = render_formula(node)
    return f'({text})' if need_parens else text


def render_formula(ast) -> str:
    """Canonical text with the minimal parentheses that keep the tree shape."""
    if isinstance(ast, NumberLiteral):
        return format_number(ast.value)
    if isinstance(ast, Reference):
        return str(ast.ref)
    if isinstance(ast, RangeArg):
        return f'{ast.start}:{ast.end}'
    if isinstance(ast, Unary):
        return '-' + _wrap(ast.operand, _precedence(ast.operand) < _UNARY_PREC)
    if isinstance(ast, FunctionCall):
        return f"{ast.name}({','.join(render_formula(a) for a in ast.args)})"
    if isinstance(ast, Binary):
        prec = _PREC[ast.op]
        lp = _precedence(ast.left)
        rp = _precedence(ast.right)
        if ast.op == '^':
            # left side of ^ must be an atom, right side is a factor
            left = _wrap(ast.left, lp < _ATOM_PREC)
            right = _wrap(ast.right, rp < _UNARY_PREC)
        else:
            left = _wrap(ast.left, lp < prec)
            right = _wrap(ast.right, rp <= prec)
        return f'{left}{ast.op}{right}'
    raise TypeError(f'not a formula node: {ast!r}')


# -- evaluation --------------------------------------------------------------

def _finite(value):
    if value - value != 0.0:  # inf or nan
        raise EvalError('non-finite result')
    return value


def _add(a, b):
    return _finite(a + b)


def _sub(a, b):
    return _finite(a - b)


def _mul(a, b):
    return _finite(a * b)


def _div(a, b):
    if b == 0:
        raise EvalError('division by zero')
    return _finite(a / b)


def _pow(a, b):
    try:
        return _finite(math.pow(a, b))
    except (ValueError, OverflowError):
        raise EvalError(f'invalid power {a!r}^{b!r}') from None


BINARY_FUNCS = {'+': _add, '-': _sub, '*': _mul, '/': _div, '^': _pow}


def apply_binary(op: str, a: float, b: float) -> float:
    try:
        fn = BINARY_FUNCS[op]
    except KeyError:
        raise EvalError(f'unknown operator {op!r}') from None
    return fn(a, b)


def _fsum(values):
    try:
        return _finite(math.fsum(values))
    except OverflowError:
        raise EvalError('non-finite result') from None


def apply_function(name: str, values) -> float:
    if not values:
        raise EvalError(f'{name} needs at least one argument')
    if name == 'SUM':
        return _fsum(values)
    if name == 'MIN':
        return min(values)
    if name == 'MAX':
        return max(values)
    if name == 'AVERAGE':
        return _fsum(values) / len(values)
    raise EvalError(f'unknown function {name!r}')


def _lookup(env, ref):
    try:
        return env[ref]
    except KeyError:
        raise UnboundRef(ref) from None


def evaluate(ast, env) -> float:
    """Evaluate an AST; ``env`` maps CellRef to the current value of each child."""
    if isinstance(ast, Binary):
        return BINARY_FUNCS[ast.op](evaluate(ast.left, env), evaluate(ast.right, env))
    if isinstance(ast, Reference):
        return _lookup(env, ast.ref)
    if isinstance(ast, NumberLiteral):
        return ast.value
    if isinstance(ast, Unary):
        return -evaluate(ast.operand, env)
    if isinstance(ast, FunctionCall):
        values = []
        for arg in ast.args:
            if isinstance(arg, RangeArg):
                values.extend(_lookup(env, r) for r in arg.cells())
            else:
                values.append(evaluate(arg, env))
        return apply_function(ast.name, values)
    raise TypeError(f'not a formula node: {ast!r}')
