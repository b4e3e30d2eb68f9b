"""
Syntax Module for the Berarducci Tree Engine
Parses and prints the surface lambda/mu notation with named variables and
converts it to the de Bruijn coterm core
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

from term_core import (
    APP, BOT, LAM, Coterm, FiniteTerm, Kind, MuBind, MuExpr, MuNode, MuRef,
    NodeKind, TermError, from_mu, truncate,
)

logger = logging.getLogger(__name__)


class ParseError(TermError):
    def __init__(self, line: int, col: int, message: str):
        self.line = line
        self.col = col
        super().__init__(f"line {line}, column {col}: {message}")


class UnboundVariable(TermError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unbound variable {name!r}")


# ----------------------------------------------------------------------------
# Surface terms

@dataclass(frozen=True)
class SVar:
    name: str


@dataclass(frozen=True)
class SConst:
    name: str


@dataclass(frozen=True)
class SBot:
    pass


@dataclass(frozen=True)
class SApp:
    fn: "SurfaceTerm"
    arg: "SurfaceTerm"


@dataclass(frozen=True)
class SLam:
    name: str
    body: "SurfaceTerm"


@dataclass(frozen=True)
class SMu:
    name: str
    body: "SurfaceTerm"


SurfaceTerm = Union[SVar, SConst, SBot, SApp, SLam, SMu]


@dataclass(frozen=True)
class Parsed:
    """Result of parse: the coterm, its surface tree and the free-name table
    (free names in first-use order; name i is the i-th outermost free level)"""

    term: Coterm
    surface: SurfaceTerm
    free_names: Tuple[str, ...] = ()


# ----------------------------------------------------------------------------
# Lexer

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<lam>\\|λ)
  | (?P<mu_sym>μ)
  | (?P<dot>\.)
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<const>\#[a-zA-Z_][a-zA-Z0-9_']*)
  | (?P<ident>[a-zA-Z_][a-zA-Z0-9_']*)
    """,
    re.VERBOSE,
)

_KEYWORDS = {"mu": "mu", "bot": "bot"}


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> List[_Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if match is None:
            raise ParseError(line, pos - line_start + 1, f"unexpected character {text[pos]!r}")
        kind = match.lastgroup
        chunk = match.group()
        if kind == "ws":
            for offset, ch in enumerate(chunk):
                if ch == "\n":
                    line += 1
                    line_start = pos + offset + 1
        else:
            if kind == "ident":
                kind = _KEYWORDS.get(chunk, "ident")
            elif kind == "mu_sym":
                kind = "mu"
            tokens.append(_Token(kind, chunk, line, pos - line_start + 1))
        pos = match.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


# ----------------------------------------------------------------------------
# Parser

class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect(self, kind: str, what: str) -> _Token:
        token = self.peek()
        if token.kind != kind:
            found = token.text or "end of input"
            raise ParseError(token.line, token.col, f"expected {what}, found {found!r}")
        return self.advance()

    def parse(self) -> SurfaceTerm:
        term = self.term()
        self.expect("eof", "end of input")
        return term

    def term(self) -> SurfaceTerm:
        token = self.peek()
        if token.kind == "lam":
            self.advance()
            names = [self.expect("ident", "binder name").text]
            while self.peek().kind == "ident":
                names.append(self.advance().text)
            self.expect("dot", "'.'")
            body = self.term()
            for name in reversed(names):
                body = SLam(name, body)
            return body
        if token.kind == "mu":
            self.advance()
            name = self.expect("ident", "mu-variable name").text
            self.expect("dot", "'.'")
            return SMu(name, self.term())
        return self.application()

    def application(self) -> SurfaceTerm:
        head = self.atom()
        while True:
            kind = self.peek().kind
            if kind in ("lparen", "ident", "const", "bot"):
                head = SApp(head, self.atom())
            elif kind in ("lam", "mu"):
                # a binder as the last argument extends to the right
                return SApp(head, self.term())
            else:
                return head

    def atom(self) -> SurfaceTerm:
        token = self.advance()
        if token.kind == "lparen":
            inner = self.term()
            self.expect("rparen", "')'")
            return inner
        if token.kind == "ident":
            return SVar(token.text)
        if token.kind == "const":
            return SConst(token.text[1:])
        if token.kind == "bot":
            return SBot()
        found = token.text or "end of input"
        raise ParseError(token.line, token.col, f"expected a term, found {found!r}")


def parse_surface(text: str) -> SurfaceTerm:
    """Parse text into a surface term without resolving names"""
    return _Parser(text).parse()


# ----------------------------------------------------------------------------
# Name resolution

def to_mu_expr(
    term: SurfaceTerm, allow_open: bool = False, free_names: Sequence[str] = (),
) -> Tuple[MuExpr, Tuple[str, ...]]:
    """Resolve names to de Bruijn indices (lambda and mu index spaces are
    separate). Free names become the outermost levels: those of free_names
    first, in table order, then the others in first-use order."""
    free: List[str] = list(free_names)
    if len(set(free)) != len(free):
        raise TermError(f"duplicate free names in {free}")

    def convert(t: SurfaceTerm, scope: Tuple[Tuple[str, str], ...]) -> MuExpr:
        if isinstance(t, SVar):
            lam_seen = 0
            mu_seen = 0
            for name, binder in scope:
                if name == t.name:
                    if binder == "lam":
                        return MuNode(NodeKind.var(lam_seen))
                    return MuRef(mu_seen)
                if binder == "lam":
                    lam_seen += 1
                else:
                    mu_seen += 1
            if t.name not in free:
                if not allow_open:
                    raise UnboundVariable(t.name)
                free.append(t.name)
            return MuNode(NodeKind.var(lam_seen + free.index(t.name)))
        if isinstance(t, SConst):
            return MuNode(NodeKind.const(t.name))
        if isinstance(t, SBot):
            return MuNode(BOT)
        if isinstance(t, SApp):
            return MuNode(APP, (convert(t.fn, scope), convert(t.arg, scope)))
        if isinstance(t, SLam):
            return MuNode(LAM, (convert(t.body, ((t.name, "lam"),) + scope),))
        return MuBind(convert(t.body, ((t.name, "mu"),) + scope))

    expr = convert(term, ())
    return expr, tuple(free)


def parse(text: str, allow_open: bool = False, free_names: Sequence[str] = ()) -> Parsed:
    """Parse surface syntax into a coterm.

    free_names fixes the levels of the names it lists (see free_table).

    Raises ParseError, UnboundVariable (closed mode) or GuardednessError.
    """
    surface = parse_surface(text)
    expr, free = to_mu_expr(surface, allow_open, free_names)
    return Parsed(from_mu(expr), surface, free)


def parse_term(text: str, allow_open: bool = False, free_names: Sequence[str] = ()) -> Coterm:
    return parse(text, allow_open, free_names).term


# ----------------------------------------------------------------------------
# Printing

def _fresh(base: str, taken) -> str:
    name = base
    while name in taken:
        name += "'"
    return name


def _max_free_slot(t: FiniteTerm) -> int:
    """Largest free slot (index minus enclosing binders) of t, or -1"""
    best = -1
    stack = [(t, 0)]
    while stack:
        x, depth = stack.pop()
        if x.node.kind is Kind.VAR:
            best = max(best, x.node.index - depth)
        step = 1 if x.node.kind is Kind.LAM else 0
        stack.extend((child, depth + step) for child in x.children)
    return best


def free_table(t: FiniteTerm, free_names: Sequence[str] = ()) -> Tuple[str, ...]:
    """free_names extended with a fresh name v<slot> for every free slot of
    t it leaves unnamed. Passing the table back to parse restores the
    indices of a printed open term."""
    table = list(free_names)
    if len(set(table)) != len(table):
        raise TermError(f"duplicate free names in {table}")
    for slot in range(len(table), _max_free_slot(t) + 1):
        table.append(_fresh(f"v{slot}", table))
    return tuple(table)


def print_finite(t: FiniteTerm, style: str = "named", free_names: Sequence[str] = ()) -> str:
    """Render a finite term in surface syntax (named) or de Bruijn style.

    Named style calls the binder at depth d x<d>, primed until it differs
    from every free name.
    """
    if style not in ("named", "debruijn"):
        raise TermError(f"unknown print style {style!r}")
    table = free_table(t, free_names) if style == "named" else ()
    taken = set(table)
    binders: List[str] = []

    def binder(depth: int) -> str:
        while len(binders) <= depth:
            binders.append(_fresh(f"x{len(binders)}", taken))
        return binders[depth]

    def render(x: FiniteTerm, depth: int) -> str:
        node = x.node
        if node.kind is Kind.VAR:
            if style == "debruijn":
                return str(node.index)
            if node.index < depth:
                return binder(depth - 1 - node.index)
            return table[node.index - depth]
        if node.kind is Kind.CONST:
            return f"#{node.name}"
        if node.kind is Kind.BOT:
            return "bot"
        if node.kind is Kind.LAM:
            body = render(x.children[0], depth + 1)
            if style == "debruijn":
                return "\\." + body
            return f"\\{binder(depth)}. {body}"
        fn, arg = x.children
        fn_text = render(fn, depth)
        if fn.node.kind is Kind.LAM:
            fn_text = f"({fn_text})"
        arg_text = render(arg, depth)
        if arg.node.kind in (Kind.APP, Kind.LAM):
            arg_text = f"({arg_text})"
        return f"{fn_text} {arg_text}"

    return render(t, 0)


def print_truncated(t: Coterm, n: int, style: str = "named", free_names: Sequence[str] = ()) -> str:
    """Render truncate(t, n); named style invents binder names x0, x1, ..."""
    return print_finite(truncate(t, n), style, free_names)
