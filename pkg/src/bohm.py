"""
Bohm Module for the Berarducci Tree Engine
Lazy Bohm-like normal form trees with per-node provenance, normal form
checks, executable confluence and prepend checks, and the flattening of a
normal form derivation into a strongly convergent reduction sequence
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from term_core import (
    FINITE_BOT, ROOT, Coterm, FiniteTerm, Kind, Position, Root, TermError, Tri,
    YES, bisim_up_to, first_difference, format_position, iter_preorder,
    subterm_at, truncate,
)
from reduction import (
    InvalidTrace, Policy, RuleTag, Step, Strategy, Trace, head_redex_position,
    is_beta_redex, reduce, step_at,
)
from rnf import crnf
from meaningless import Oracle

logger = logging.getLogger(__name__)


class FuelExhausted(TermError):
    """A node needed more fuel than configured under the strict policy"""

    def __init__(self, position: Optional[Position], reason: str = "fuel exhausted"):
        self.position = position
        self.reason = reason
        where = "" if position is None else f" at {format_position(position)}"
        super().__init__(f"{reason}{where}")


class Origin(str, Enum):
    STRUCTURAL = "structural"
    BOTTOM_BY_ORACLE = "bottom-by-oracle"
    BOTTOM_ASSUMED = "bottom-assumed"
    BOTTOM_STUCK = "bottom-stuck"


@dataclass(frozen=True)
class Provenance:
    origin: Origin
    reason: str = ""
    whnf_steps: int = 0

    @property
    def tainted(self) -> bool:
        return self.origin in (Origin.BOTTOM_ASSUMED, Origin.BOTTOM_STUCK)

    def to_json(self) -> Dict[str, object]:
        out: Dict[str, object] = {"origin": self.origin.value}
        if self.origin is Origin.STRUCTURAL:
            out["whnf_steps"] = self.whnf_steps
        if self.reason:
            out["reason"] = self.reason
        return out


class NuTree(Coterm):
    """Node of the normal form tree of ``source`` under ``oracle``.

    The root is derived on first access: members collapse to bottom,
    everything else is unfolded through its canonical root normal form.
    """

    __slots__ = ("source", "oracle", "_provenance")

    def __init__(self, source: Coterm, oracle: Oracle):
        super().__init__(thunk=self._derive)
        self.source = source
        self.oracle = oracle
        self._provenance: Optional[Provenance] = None

    @property
    def provenance(self) -> Provenance:
        self.root()
        return self._provenance

    def _derive(self) -> Root:
        o = self.oracle
        verdict = o.membership(self.source)
        if verdict.is_yes:
            self._provenance = Provenance(Origin.BOTTOM_BY_ORACLE, verdict.reason)
            return FINITE_BOT.node, ()
        if verdict.is_unknown:
            return self._assume(verdict.reason)
        found = crnf(self.source, o.fuel)
        if found.verdict.is_yes:
            self._provenance = Provenance(Origin.STRUCTURAL, whnf_steps=found.whnf_steps)
            node, children = found.term.root()
            return node, tuple(nu_tree(child, o) for child in children)
        if found.verdict.is_no:
            self._provenance = Provenance(Origin.BOTTOM_STUCK, found.verdict.reason)
            return FINITE_BOT.node, ()
        return self._assume(found.verdict.reason)

    def _assume(self, reason: str) -> Root:
        if self.oracle.policy is Policy.STRICT:
            raise FuelExhausted(None, reason)
        logger.debug("assuming bottom: %s", reason)
        self._provenance = Provenance(Origin.BOTTOM_ASSUMED, reason)
        return FINITE_BOT.node, ()


def nu_tree(t: Coterm, o: Oracle) -> NuTree:
    """Lazy normal form tree; one derivation per (term node, oracle)"""
    memo = t.memo()
    key = ("nu", o)
    tree = memo.get(key)
    if tree is None:
        tree = NuTree(t, o)
        memo[key] = tree
    return tree


def _force(tree: Coterm, p: Position) -> Root:
    try:
        return tree.root()
    except FuelExhausted as e:
        if e.position is None:
            raise FuelExhausted(p, e.reason)
        raise


def nu_tree_truncated(t: Coterm, o: Oracle, depth: int) -> FiniteTerm:
    if depth < 0:
        raise TermError("depth must be non-negative")

    def walk(tree: Coterm, p: Position, n: int) -> FiniteTerm:
        if n <= 0:
            return FINITE_BOT
        node, children = _force(tree, p)
        return FiniteTerm(node, tuple(walk(child, p + (i,), n - 1) for i, child in enumerate(children)))

    return walk(nu_tree(t, o), ROOT, depth)


def provenance_up_to(tree: NuTree, depth: int) -> Dict[Position, Provenance]:
    found = {}
    for p, node in iter_preorder(tree, depth):
        _force(node, p)
        found[p] = node.provenance
    return found


def is_tainted(tree: NuTree, depth: int) -> bool:
    """Whether any node within depth is an assumed or stuck bottom"""
    return any(prov.tainted for prov in provenance_up_to(tree, depth).values())


def tree_to_json(tree: NuTree, depth: int) -> dict:
    """Truncated JSON tree carrying the provenance of every node"""

    def walk(node: NuTree, p: Position, n: int) -> dict:
        if n <= 0:
            return {"k": "bot", "cut": True}
        _force(node, p)
        out = truncate(node, 1).to_json()
        out["prov"] = node.provenance.to_json()
        kind = node.root()[0].kind
        children = node.root()[1]
        if kind is Kind.LAM:
            out["b"] = walk(children[0], p + (0,), n - 1)
        elif kind is Kind.APP:
            out["f"] = walk(children[0], p + (0,), n - 1)
            out["a"] = walk(children[1], p + (1,), n - 1)
        return out

    return walk(tree, ROOT, depth)


def is_normal_up_to(t: Coterm, n: int, o: Oracle) -> Tri:
    """No beta redex and no non-bottom member at depth < n.

    Any inconclusive membership verdict makes the answer Unknown, even when
    a violation was also found; otherwise the first violation (outermost,
    leftmost) gives No.
    """
    violation: Optional[str] = None
    unknown: Optional[Tri] = None
    for p, sub in iter_preorder(t, n):
        node = sub.root()[0]
        if node.kind is not Kind.BOT:
            verdict = o.membership(sub)
            if verdict.is_unknown:
                if unknown is None:
                    unknown = Tri.unknown(f"membership unknown at {format_position(p)}: {verdict.reason}")
                continue
            if verdict.is_yes and violation is None:
                violation = f"meaningless subterm at {format_position(p)}"
        if violation is None and is_beta_redex(sub):
            violation = f"beta redex at {format_position(p)}"
    if unknown is not None:
        return unknown
    if violation is not None:
        return Tri.no(violation)
    return YES


# ----------------------------------------------------------------------------
# Confluence and prepend checks

class Status(str, Enum):
    EQUAL = "equal"
    ASSUMED_EQUAL = "assumed-equal"
    DIFFER = "differ"
    TAINTED_DIFFER = "tainted-differ"


@dataclass
class ConfluenceReport:
    term: FiniteTerm
    strategies: Tuple[Strategy, Strategy]
    traces: Tuple[Trace, Trace]
    trees: Tuple[FiniteTerm, FiniteTerm]
    equal: bool
    tainted: bool
    depth: int
    config: Dict[str, object] = field(default_factory=dict)
    trace_files: Tuple[Optional[str], Optional[str]] = (None, None)

    @property
    def status(self) -> Status:
        if self.equal:
            return Status.ASSUMED_EQUAL if self.tainted else Status.EQUAL
        return Status.TAINTED_DIFFER if self.tainted else Status.DIFFER

    @property
    def difference(self) -> Optional[Position]:
        return first_difference(self.trees[0].to_coterm(), self.trees[1].to_coterm(), self.depth + 1)

    def to_json(self) -> Dict[str, object]:
        diff = self.difference
        return {
            "term": self.term.to_json(),
            "status": self.status.value,
            "equal": self.equal,
            "tainted": self.tainted,
            "depth": self.depth,
            "difference": None if diff is None else format_position(diff, empty=""),
            "branches": [
                {
                    "strategy": strat.describe(),
                    "steps": len(tr),
                    "trace_file": path,
                    "tree": tree.to_json(),
                }
                for strat, tr, tree, path in zip(self.strategies, self.traces, self.trees, self.trace_files)
            ],
            "config": self.config,
        }


def _assumed_steps(tr: Trace) -> bool:
    return any(step.rule is RuleTag.BOT_U and not step.verdict.is_yes for step in tr.steps)


def confluence_check(
    t: Coterm,
    s1: Strategy,
    s2: Strategy,
    k: int,
    depth: int,
    o: Oracle,
    config: Optional[Dict[str, object]] = None,
) -> ConfluenceReport:
    """Reduce t along two strategies and compare the normal form trees of
    the two endpoints to the given depth.

    The comparison is tainted when either tree holds an assumed bottom or
    either trace took a bottom step on an Unknown verdict.
    """
    traces = (reduce(t, s1, k, o), reduce(t, s2, k, o))
    nodes = tuple(nu_tree(tr.end, o) for tr in traces)
    trees = tuple(nu_tree_truncated(tr.end, o, depth) for tr in traces)
    tainted = any(is_tainted(node, depth) for node in nodes) or any(_assumed_steps(tr) for tr in traces)
    report = ConfluenceReport(
        truncate(t, depth), (s1, s2), traces, trees, trees[0] == trees[1], tainted, depth, config or {},
    )
    if not report.equal:
        logger.warning("confluence check: trees differ at %s (%s)",
                       format_position(report.difference or ROOT), report.status.value)
    elif tainted:
        logger.warning("confluence check: trees agree only under assumed bottoms")
    return report


def prepend_check(t: Coterm, tr: Trace, depth: int, o: Oracle) -> bool:
    """Whether t and the end of a trace from t have the same normal form
    tree up to depth"""
    if not bisim_up_to(tr.start, t, max(depth, 1)):
        raise InvalidTrace("trace does not start at the given term")
    return nu_tree_truncated(t, o, depth) == nu_tree_truncated(tr.end, o, depth)


# ----------------------------------------------------------------------------
# Flattening the derivation into a reduction sequence

def nu_to_sequence(t: Coterm, o: Oracle, depth: int) -> Trace:
    """Reduction from t realising its normal form tree above depth.

    Nodes are visited breadth first. Each node at p contributes the weak
    head prefix of its canonical root normal form, contracted at positions
    p.0.0...0 at or below p, or a single bottom step when it is collapsed.
    Step depths are therefore not sorted, but once every node at depth at
    most d is done each later step is deeper than d.
    """
    if depth < 0:
        raise TermError("depth must be non-negative")
    current = t
    steps: List[Step] = []

    def emit(position: Position, rule: RuleTag, verdict: Tri = YES) -> None:
        nonlocal current
        current = step_at(current, position, rule, verdict, Policy.ASSUME)
        steps.append(Step(position, rule, len(position), current, verdict))

    queue = deque([ROOT])
    while queue:
        p = queue.popleft()
        if len(p) >= depth:
            continue
        sub = subterm_at(current, p)
        verdict = o.membership(sub)
        if verdict.is_unknown and o.policy is Policy.STRICT:
            raise FuelExhausted(p, verdict.reason)
        if not verdict.is_no:
            if sub.root()[0].kind is not Kind.BOT:
                emit(p, RuleTag.BOT_U, verdict)
            continue
        found = crnf(sub, o.fuel)
        if found.verdict.is_unknown:
            if o.policy is Policy.STRICT:
                raise FuelExhausted(p, found.verdict.reason)
            emit(p, RuleTag.BOT_U, found.verdict)
            continue
        for _ in range(found.whnf_steps):
            emit(p + head_redex_position(subterm_at(current, p)), RuleTag.BETA)
        if found.verdict.is_no:
            continue
        children = subterm_at(current, p).root()[1]
        queue.extend(p + (i,) for i in range(len(children)))
    logger.debug("nu_to_sequence: %d steps to depth %d", len(steps), depth)
    return Trace(t, tuple(steps))


__all__ = [
    "FuelExhausted", "Origin", "Provenance", "NuTree", "Status", "ConfluenceReport",
    "nu_tree", "nu_tree_truncated", "provenance_up_to", "is_tainted", "tree_to_json",
    "is_normal_up_to", "confluence_check", "prepend_check", "nu_to_sequence",
]
