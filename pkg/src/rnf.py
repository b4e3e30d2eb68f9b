"""
Root Normal Form Module for the Berarducci Tree Engine
Fuel-bounded semi-decision of root normal forms, canonical root normal
forms and depth-bounded infinitary beta reduction by weak head search
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional

from term_core import (
    YES, Coterm, Kind, Tri, tri_all, tri_any,
)
from reduction import head_redex_position, whnf_step

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WhnfResult:
    term: Coterm
    steps: int
    exhausted: bool


@dataclass(frozen=True)
class CrnfResult:
    """Outcome of the canonical root normal form search.

    ``term`` is present exactly when the verdict is Yes, and is reached from
    the input by ``whnf_steps`` weak head steps.
    """

    verdict: Tri
    term: Optional[Coterm]
    whnf_steps: int


def whnf(t: Coterm, fuel: int) -> WhnfResult:
    """Iterate whnf_step at most fuel times"""
    current = t
    for steps in range(fuel + 1):
        nxt = whnf_step(current)
        if nxt is None:
            return WhnfResult(current, steps, False)
        if steps == fuel:
            break
        current = nxt
    return WhnfResult(current, fuel, True)


def is_rnf(t: Coterm, fuel: int) -> Tri:
    """Yes for atoms other than bottom, abstractions, and applications whose
    function part weak-head-reduces to a stuck non-abstraction within fuel."""
    node, children = t.root()
    if node.kind is Kind.BOT:
        return Tri.no("bottom is not a root normal form")
    if node.kind is not Kind.APP:
        return YES
    head = whnf(children[0], fuel)
    if head.exhausted:
        return Tri.unknown(f"head search exhausted {fuel} weak head steps")
    if head.term.root()[0].kind is Kind.LAM:
        return Tri.no(f"function part reaches an abstraction in {head.steps} steps")
    return YES


def crnf(t: Coterm, fuel: int) -> CrnfResult:
    """First root normal form on the weak head reduction of t.

    A run of weak head steps that contract inside the function part keeps
    the term it started from as candidate: if that run ends in a stuck
    head, the function part never became an abstraction and the candidate
    was already in root normal form. The verdict is No only when the weak
    head normal form is bottom.
    """
    key = ("crnf", fuel)
    memo = t.memo()
    cached = memo.get(key)
    if cached is not None:
        return cached

    current = t
    candidate: Optional[Coterm] = None
    candidate_steps = 0
    result: Optional[CrnfResult] = None
    for steps in range(fuel + 1):
        node = current.root()[0]
        if node.kind is Kind.BOT:
            result = CrnfResult(Tri.no("weak head normal form is bottom"), None, steps)
            break
        if node.kind is not Kind.APP:
            result = CrnfResult(YES, current, steps)
            break
        q = head_redex_position(current)
        if q is None:
            if candidate is not None:
                result = CrnfResult(YES, candidate, candidate_steps)
            else:
                result = CrnfResult(YES, current, steps)
            break
        if not q:
            candidate = None
        elif candidate is None:
            candidate, candidate_steps = current, steps
        if steps == fuel:
            break
        current = whnf_step(current)
    if result is None:
        logger.debug("crnf exhausted %d weak head steps", fuel)
        result = CrnfResult(Tri.unknown(f"no root normal form within {fuel} weak head steps"), None, fuel)
    memo[key] = result
    return result


def has_rnf(t: Coterm, fuel: int) -> Tri:
    """Yes when crnf finds a root normal form; otherwise Unknown, never No"""
    found = crnf(t, fuel)
    if found.verdict.is_yes:
        return YES
    if found.verdict.is_no:
        return Tri.unknown("weak head normal form is bottom")
    return found.verdict


def inf_beta_up_to(s: Coterm, t: Coterm, n: int, fuel: int) -> Tri:
    """Whether s infinitarily beta-reduces to t, observed to depth n.

    Searches the weak head reduction of s (at most fuel steps per node) for
    a term whose root matches the root of t, then recurses into the
    children. For an application target every application met on the way
    is tried, since later weak head steps may still rebuild the arguments.
    """
    if n <= 0:
        return YES
    target, target_children = t.root()
    current = s
    tried: List[Tri] = []
    for steps in range(fuel + 1):
        node, children = current.root()
        if node == target:
            if not target_children:
                return YES
            if target.kind is Kind.LAM:
                return inf_beta_up_to(children[0], target_children[0], n - 1, fuel)
            answer = tri_all(
                inf_beta_up_to(child, goal, n - 1, fuel)
                for child, goal in zip(children, target_children)
            )
            if answer.is_yes and not answer.assumed:
                return answer
            tried.append(answer)
        nxt = whnf_step(current)
        if nxt is None:
            tried.append(Tri.no(f"stuck at {node} while looking for {target}"))
            return tri_any(tried)
        if steps == fuel:
            break
        current = nxt
    tried.append(Tri.unknown(f"no matching root within {fuel} weak head steps"))
    return tri_any(tried)


__all__ = ["WhnfResult", "CrnfResult", "whnf", "is_rnf", "crnf", "has_rnf", "inf_beta_up_to"]
