"""
Term Core Module for the Berarducci Tree Engine
Possibly-infinite lambda terms in de Bruijn form: lazy coterms, finite
truncations, depth-bounded bisimilarity, the convergence metric and the
compilation of guarded mu-expressions into lazy coterms
"""

from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Tuple, Union

logger = logging.getLogger(__name__)

Position = Tuple[int, ...]
ROOT: Position = ()


class TermError(ValueError):
    """Base class of every error raised by the engine"""


class GuardednessError(TermError):
    """A mu-bound variable occurs without a constructor above it"""

    def __init__(self, path: Position, message: str = "unguarded mu-variable occurrence"):
        self.path = path
        super().__init__(f"{message} at {format_position(path)}")


def format_position(p: Position, empty: str = "ε") -> str:
    """Render a position as dotted child indices ('ε' for the root)"""
    return ".".join(str(i) for i in p) if p else empty


def parse_position(text: str) -> Position:
    """Read a position written as '0.1.0', '0·1·0', '' or 'ε'"""
    text = text.strip()
    if text in ("", "ε"):
        return ROOT
    try:
        parts = text.replace("·", ".").split(".")
        p = tuple(int(part) for part in parts)
    except ValueError:
        raise TermError(f"malformed position {text!r}")
    if any(i < 0 for i in p):
        raise TermError(f"malformed position {text!r}")
    return p


# ----------------------------------------------------------------------------
# Node kinds

class Kind(str, Enum):
    VAR = "var"
    CONST = "const"
    BOT = "bot"
    APP = "app"
    LAM = "lam"


_ARITY = {Kind.VAR: 0, Kind.CONST: 0, Kind.BOT: 0, Kind.APP: 2, Kind.LAM: 1}


@dataclass(frozen=True)
class NodeKind:
    """The constructor labelling one node of a term"""

    kind: Kind
    index: int = 0
    name: str = ""

    @staticmethod
    def var(index: int) -> "NodeKind":
        if index < 0:
            raise TermError(f"negative de Bruijn index {index}")
        return NodeKind(Kind.VAR, index=index)

    @staticmethod
    def const(name: str) -> "NodeKind":
        if not name:
            raise TermError("constant needs a name")
        return NodeKind(Kind.CONST, name=name)

    @property
    def arity(self) -> int:
        return _ARITY[self.kind]

    @property
    def is_atom(self) -> bool:
        return self.arity == 0

    def __str__(self) -> str:
        if self.kind is Kind.VAR:
            return f"Var {self.index}"
        if self.kind is Kind.CONST:
            return f"Const {self.name}"
        return self.kind.value.capitalize()


BOT = NodeKind(Kind.BOT)
APP = NodeKind(Kind.APP)
LAM = NodeKind(Kind.LAM)


# ----------------------------------------------------------------------------
# Three-valued answers

class Verdict(str, Enum):
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Tri:
    """Answer of a semi-decision: Yes, No, or Unknown with the reason.

    A Yes carries ``assumed=True`` when it rests on an Unknown that the
    caller's policy chose to read as membership.
    """

    verdict: Verdict
    reason: str = ""
    assumed: bool = False

    @staticmethod
    def yes(assumed: bool = False, reason: str = "") -> "Tri":
        return Tri(Verdict.YES, reason, assumed)

    @staticmethod
    def no(reason: str = "") -> "Tri":
        return Tri(Verdict.NO, reason)

    @staticmethod
    def unknown(reason: str) -> "Tri":
        return Tri(Verdict.UNKNOWN, reason)

    @property
    def is_yes(self) -> bool:
        return self.verdict is Verdict.YES

    @property
    def is_no(self) -> bool:
        return self.verdict is Verdict.NO

    @property
    def is_unknown(self) -> bool:
        return self.verdict is Verdict.UNKNOWN

    def __bool__(self):
        raise TypeError("Tri has no truth value; test .is_yes / .is_no / .is_unknown")

    def __str__(self) -> str:
        if self.is_yes:
            return "Yes (assumed)" if self.assumed else "Yes"
        if self.is_no:
            return "No"
        return f"Unknown ({self.reason})"

    def to_json(self) -> Dict[str, object]:
        out: Dict[str, object] = {"verdict": self.verdict.value}
        if self.assumed:
            out["assumed"] = True
        if self.reason:
            out["reason"] = self.reason
        return out


YES = Tri.yes()
NO = Tri.no()


def tri_all(answers: Iterable[Tri]) -> Tri:
    """Kleene conjunction; stops at the first No"""
    unknown = None
    assumed = False
    for answer in answers:
        if answer.is_no:
            return answer
        if answer.is_unknown and unknown is None:
            unknown = answer
        assumed = assumed or answer.assumed
    if unknown is not None:
        return unknown
    return Tri.yes(assumed=assumed)


def tri_any(answers: Iterable[Tri]) -> Tri:
    """Kleene disjunction; stops at the first Yes that is not assumed"""
    unknown = None
    assumed_yes = None
    last_no = NO
    for answer in answers:
        if answer.is_yes:
            if not answer.assumed:
                return answer
            if assumed_yes is None:
                assumed_yes = answer
        elif answer.is_unknown:
            if unknown is None:
                unknown = answer
        else:
            last_no = answer
    if assumed_yes is not None:
        return assumed_yes
    if unknown is not None:
        return unknown
    return last_no


# ----------------------------------------------------------------------------
# Coterms

Root = Tuple[NodeKind, Tuple["Coterm", ...]]


class Coterm:
    """A possibly infinite lambda term unfolded on demand.

    ``root()`` returns the constructor at the root and the child coterms.
    A coterm is either materialised (root given up front) or lazy: its thunk
    returns a root, or another coterm whose root it shares. Unfolding is
    cached, so every node is computed at most once; concurrent fills write
    the same value.

    ``free_bound``, when known, is an upper bound on the number of binders
    needed to close the term (0 for closed terms).
    """

    __slots__ = ("_thunk", "_root", "_memo", "free_bound")

    def __init__(
        self,
        thunk: Optional[Callable[[], Union[Root, "Coterm"]]] = None,
        root: Optional[Root] = None,
        free_bound: Optional[int] = None,
    ):
        if thunk is None and root is None:
            raise TermError("coterm needs a root or a thunk")
        self._thunk = thunk
        self._root = root
        self._memo: Optional[dict] = None
        self.free_bound = free_bound

    def root(self) -> Root:
        found = self._root
        if found is not None:
            return found
        # Delegation chains are followed iteratively so long chains of
        # shared roots never grow the Python stack.
        chain = [self]
        step = self._thunk()
        while isinstance(step, Coterm):
            if step._root is not None:
                step = step._root
                break
            chain.append(step)
            step = step._thunk()
        for term in chain:
            term._root = step
        return step

    @property
    def node(self) -> NodeKind:
        return self.root()[0]

    @property
    def children(self) -> Tuple["Coterm", ...]:
        return self.root()[1]

    def memo(self) -> dict:
        """Per-node cache shared by the deciders (keys name the question)"""
        if self._memo is None:
            self._memo = {}
        return self._memo

    def __repr__(self) -> str:
        return f"Coterm({truncate(self, 4)})"


def make(node: NodeKind, children: Tuple[Coterm, ...] = (), free_bound: Optional[int] = None) -> Coterm:
    """Materialised node"""
    if node.arity != len(children):
        raise TermError(f"{node} expects {node.arity} children, got {len(children)}")
    return Coterm(root=(node, tuple(children)), free_bound=free_bound)


def var(index: int) -> Coterm:
    return make(NodeKind.var(index), free_bound=index + 1)


def const(name: str) -> Coterm:
    return make(NodeKind.const(name), free_bound=0)


_BOT_TERM = Coterm(root=(BOT, ()), free_bound=0)


def bot() -> Coterm:
    return _BOT_TERM


def app(fn: Coterm, arg: Coterm) -> Coterm:
    bound = None
    if fn.free_bound is not None and arg.free_bound is not None:
        bound = max(fn.free_bound, arg.free_bound)
    return make(APP, (fn, arg), bound)


def lam(body: Coterm) -> Coterm:
    bound = None if body.free_bound is None else max(body.free_bound - 1, 0)
    return make(LAM, (body,), bound)


def subterm_at(t: Coterm, p: Position) -> Optional[Coterm]:
    for i in p:
        children = t.root()[1]
        if i < 0 or i >= len(children):
            return None
        t = children[i]
    return t


def node_at(t: Coterm, p: Position) -> Optional[NodeKind]:
    """Constructor at position p, or None when p leaves the tree"""
    sub = subterm_at(t, p)
    return None if sub is None else sub.root()[0]


def iter_preorder(t: Coterm, depth_bound: int) -> Iterator[Tuple[Position, Coterm]]:
    """Positions at depth < depth_bound, outermost first, left before right"""
    stack: List[Tuple[Position, Coterm]] = [(ROOT, t)]
    while stack:
        p, sub = stack.pop()
        if len(p) >= depth_bound:
            continue
        yield p, sub
        children = sub.root()[1]
        for i in range(len(children) - 1, -1, -1):
            stack.append((p + (i,), children[i]))


# ----------------------------------------------------------------------------
# Finite terms

@dataclass(frozen=True)
class FiniteTerm:
    """Fully materialised finite tree (a truncation, or a finite input)"""

    node: NodeKind
    children: Tuple["FiniteTerm", ...] = ()

    def __post_init__(self):
        if self.node.arity != len(self.children):
            raise TermError(f"{self.node} expects {self.node.arity} children, got {len(self.children)}")

    def depth(self) -> int:
        if not self.children:
            return 0
        return 1 + max(child.depth() for child in self.children)

    def size(self) -> int:
        return 1 + sum(child.size() for child in self.children)

    def to_coterm(self) -> Coterm:
        node = self.node
        if node.kind is Kind.VAR:
            return var(node.index)
        if node.kind is Kind.CONST:
            return const(node.name)
        if node.kind is Kind.BOT:
            return bot()
        if node.kind is Kind.LAM:
            return lam(self.children[0].to_coterm())
        return app(self.children[0].to_coterm(), self.children[1].to_coterm())

    def to_json(self) -> dict:
        node = self.node
        if node.kind is Kind.VAR:
            return {"k": "var", "i": node.index}
        if node.kind is Kind.CONST:
            return {"k": "const", "n": node.name}
        if node.kind is Kind.BOT:
            return {"k": "bot"}
        if node.kind is Kind.LAM:
            return {"k": "lam", "b": self.children[0].to_json()}
        return {"k": "app", "f": self.children[0].to_json(), "a": self.children[1].to_json()}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"), ensure_ascii=False)

    def __str__(self) -> str:
        if self.node.kind is Kind.APP:
            return f"App({self.children[0]}, {self.children[1]})"
        if self.node.kind is Kind.LAM:
            return f"Lam({self.children[0]})"
        return str(self.node)


FINITE_BOT = FiniteTerm(BOT)


def finite_from_json(obj: dict) -> FiniteTerm:
    """Inverse of FiniteTerm.to_json"""
    try:
        k = obj["k"]
        if k == "var":
            return FiniteTerm(NodeKind.var(int(obj["i"])))
        if k == "const":
            return FiniteTerm(NodeKind.const(str(obj["n"])))
        if k == "bot":
            return FINITE_BOT
        if k == "lam":
            return FiniteTerm(LAM, (finite_from_json(obj["b"]),))
        if k == "app":
            return FiniteTerm(APP, (finite_from_json(obj["f"]), finite_from_json(obj["a"])))
    except (KeyError, TypeError) as e:
        raise TermError(f"malformed term JSON: {e}")
    raise TermError(f"unknown node kind {k!r}")


def truncate(t: Coterm, n: int) -> FiniteTerm:
    """Keep every node at depth < n; subterms at depth n become Bot"""
    if n <= 0:
        return FINITE_BOT
    node, children = t.root()
    if not children:
        return FiniteTerm(node)
    return FiniteTerm(node, tuple(truncate(child, n - 1) for child in children))


def first_difference(t: Coterm, s: Coterm, max_depth: int) -> Optional[Position]:
    """Shallowest (then leftmost) position at depth < max_depth where t and s differ"""
    queue = deque([(ROOT, t, s)])
    while queue:
        p, a, b = queue.popleft()
        if a is b or len(p) >= max_depth:
            continue
        node_a, children_a = a.root()
        node_b, children_b = b.root()
        if node_a != node_b:
            return p
        for i, (child_a, child_b) in enumerate(zip(children_a, children_b)):
            queue.append((p + (i,), child_a, child_b))
    return None


def bisim_up_to(t: Coterm, s: Coterm, n: int) -> bool:
    """Depth-n approximant of bisimilarity: equal truncations at depth n"""
    return first_difference(t, s, n) is None


@dataclass(frozen=True)
class Distance:
    """A distance 2^-exponent, or the bound 2^-exponent when the terms
    agreed everywhere the search looked (true distance possibly 0)"""

    exponent: int
    candidate_zero: bool = False

    @property
    def value(self) -> Fraction:
        return Fraction(1, 2 ** self.exponent)

    def __str__(self) -> str:
        base = "1" if self.exponent == 0 else f"2^-{self.exponent}"
        return f"<= {base} (candidate 0)" if self.candidate_zero else base


def metric_dist(t: Coterm, s: Coterm, max_n: int) -> Distance:
    """inf{2^-n | t|n = s|n}, searched for n <= max_n"""
    if max_n < 0:
        raise TermError("max_n must be non-negative")
    diff = first_difference(t, s, max_n)
    if diff is None:
        return Distance(max_n, candidate_zero=True)
    return Distance(len(diff))


# ----------------------------------------------------------------------------
# de Bruijn lifting (shared with the reduction engine)

def lift(t: Coterm, cutoff: int, amount: int) -> Coterm:
    """Lazily add amount to every free index >= cutoff"""
    if amount == 0 or (t.free_bound is not None and t.free_bound <= cutoff):
        return t
    bound = None if t.free_bound is None else t.free_bound + amount

    def unfold() -> Union[Root, Coterm]:
        node, children = t.root()
        if node.kind is Kind.VAR:
            if node.index >= cutoff:
                return NodeKind.var(node.index + amount), ()
            return t
        if node.kind is Kind.LAM:
            return node, (lift(children[0], cutoff + 1, amount),)
        if node.kind is Kind.APP:
            return node, (lift(children[0], cutoff, amount), lift(children[1], cutoff, amount))
        return t

    return Coterm(unfold, free_bound=bound)


# ----------------------------------------------------------------------------
# Guarded mu-expressions

@dataclass(frozen=True)
class MuNode:
    node: NodeKind
    children: Tuple["MuExpr", ...] = ()


@dataclass(frozen=True)
class MuBind:
    """mu X. body; X is MuRef(0) directly inside body (own index space)"""

    body: "MuExpr"


@dataclass(frozen=True)
class MuRef:
    index: int


MuExpr = Union[MuNode, MuBind, MuRef]


def mu_of_finite(t: FiniteTerm) -> MuExpr:
    return MuNode(t.node, tuple(mu_of_finite(c) for c in t.children))


def check_guarded(e: MuExpr) -> None:
    """Every mu-variable occurrence must sit strictly beneath a constructor
    inside its binder's body. Raises GuardednessError with the occurrence
    path (position in the unfolded term)."""

    def walk(x: MuExpr, guarded: Tuple[bool, ...], path: Position) -> None:
        if isinstance(x, MuRef):
            if x.index < 0 or x.index >= len(guarded):
                raise GuardednessError(path, f"unbound mu-variable #{x.index}")
            if not guarded[x.index]:
                raise GuardednessError(path)
        elif isinstance(x, MuBind):
            walk(x.body, (False,) + guarded, path)
        else:
            if x.node.arity != len(x.children):
                raise TermError(f"{x.node} expects {x.node.arity} children, got {len(x.children)}")
            if x.children:
                inner = (True,) * len(guarded)
                for i, child in enumerate(x.children):
                    walk(child, inner, path + (i,))

    walk(e, (), ROOT)


class _MuFrame:
    __slots__ = ("term", "depth", "closed")

    def __init__(self, depth: int, closed: bool):
        self.term: Optional[Coterm] = None
        self.depth = depth
        self.closed = closed


def _binder_closed(binder: MuBind, outer_closed: Tuple[bool, ...]) -> bool:
    """Whether the mu-term has no free lambda indices (so moving it under
    more binders needs no lifting)"""

    def walk(x: MuExpr, depth: int, inner: int) -> bool:
        if isinstance(x, MuRef):
            return x.index < inner or outer_closed[x.index - inner]
        if isinstance(x, MuBind):
            return walk(x.body, depth, inner + 1)
        if x.node.kind is Kind.VAR:
            return x.node.index < depth
        step = 1 if x.node.kind is Kind.LAM else 0
        return all(walk(child, depth + step, inner) for child in x.children)

    return walk(binder.body, 0, 1)


def _compile(e: MuExpr, env: Tuple[_MuFrame, ...], depth: int) -> Coterm:
    if isinstance(e, MuRef):
        frame = env[e.index]
        shift = depth - frame.depth
        if shift == 0 or frame.closed:
            return frame.term
        return lift(frame.term, 0, shift)
    if isinstance(e, MuBind):
        closed = _binder_closed(e, tuple(f.closed for f in env))
        frame = _MuFrame(depth, closed)
        inner_env = (frame,) + env
        frame.term = Coterm(lambda: _compile(e.body, inner_env, depth), free_bound=0 if closed else None)
        return frame.term
    node, children = e.node, e.children
    if not children:
        return make(node, free_bound=node.index + 1 if node.kind is Kind.VAR else 0)
    inner_depth = depth + 1 if node.kind is Kind.LAM else depth
    return Coterm(lambda: (node, tuple(_compile(child, env, inner_depth) for child in children)))


def from_mu(e: MuExpr) -> Coterm:
    """Compile a guarded mu-expression to the coterm solving its equations.

    Each mu-binder becomes a node that refers back to itself, so regular
    terms such as mu X. \\. X are finite cyclic graphs.
    """
    check_guarded(e)
    return _compile(e, (), 0)


@dataclass(frozen=True)
class _IterFrame:
    body: MuExpr
    env: Tuple["_IterFrame", ...]
    depth: int
    rounds: int


def corec_iterate(e: MuExpr, p: Position, seed: Optional[Coterm] = None) -> Optional[NodeKind]:
    """Constructor at p of the approximant f_{|p|+1}(seed).

    The mu-equations are unrolled |p|+1 times from the seed, as in the
    existence proof for guarded corecursive definitions. The approximant is
    evaluated along p only, never materialised. Reference oracle for
    from_mu.
    """
    check_guarded(e)
    if seed is None:
        seed = const("seed")
    rounds = len(p) + 1
    env: Tuple[_IterFrame, ...] = ()
    jumps: List[Tuple[int, int]] = []
    depth = 0
    rest = p
    x = e
    while True:
        if isinstance(x, MuBind):
            env = (_IterFrame(x.body, env, depth, rounds),) + env
            x = x.body
            continue
        if isinstance(x, MuRef):
            frame = env[x.index]
            if frame.rounds - 1 == 0:
                logger.debug("corec_iterate reached the seed at remaining path %s", rest)
                found = node_at(seed, rest)
                return found
            jumps.append((frame.depth, depth))
            env = (_IterFrame(frame.body, frame.env, frame.depth, frame.rounds - 1),) + frame.env
            x = frame.body
            depth = frame.depth
            continue
        if not rest:
            break
        i = rest[0]
        if i >= len(x.children):
            return None
        if x.node.kind is Kind.LAM:
            depth += 1
        x = x.children[i]
        rest = rest[1:]

    node = x.node
    if node.kind is not Kind.VAR or not jumps:
        return node
    # Re-apply the lifts of every back-reference taken on the way down.
    index = node.index
    below = depth - jumps[-1][0]
    for k in range(len(jumps) - 1, -1, -1):
        binder_depth, ref_depth = jumps[k]
        if index >= below:
            index += ref_depth - binder_depth
        outer_base = jumps[k - 1][0] if k > 0 else 0
        below += ref_depth - outer_base
    return NodeKind.var(index)
