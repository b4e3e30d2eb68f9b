"""
Reduction Module for the Berarducci Tree Engine
Lazy de Bruijn substitution, beta and bottom steps under compatible closure,
weak head reduction, strategy-driven traces, postponement of bottom steps
and strong-convergence checking of finite trace prefixes
"""

from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Protocol, Tuple, Union

import numpy as np
import pandas as pd

from term_core import (
    ROOT, YES, Coterm, FiniteTerm, Kind, NodeKind, Position, Root,
    TermError, Tri, app, bisim_up_to, bot, finite_from_json, format_position,
    iter_preorder, lam, lift, parse_position, subterm_at, truncate,
)

logger = logging.getLogger(__name__)

__all__ = [
    "RuleTag", "Policy", "Step", "Trace", "Strategy", "StrategyKind",
    "NotARedex", "InvalidTrace", "ConvergenceReport",
    "lift", "subst", "redexes", "step_at", "whnf_step", "reduce",
    "postpone_bot", "check_strong_convergence", "replace_at",
    "head_redex_position", "replay_trace", "validate_trace", "trace_to_jsonl",
    "trace_from_jsonl",
]


class RuleTag(str, Enum):
    BETA = "beta"
    BOT_U = "botU"


class Policy(str, Enum):
    """How an Unknown membership verdict is read"""

    ASSUME = "assume"
    STRICT = "strict"


class NotARedex(TermError):
    def __init__(self, position: Position, rule: RuleTag, detail: str = ""):
        self.position = position
        self.rule = rule
        message = f"no {rule.value} redex at {format_position(position)}"
        super().__init__(f"{message}: {detail}" if detail else message)


class InvalidTrace(TermError):
    pass


class MembershipOracle(Protocol):
    """What the reduction engine needs from a set of meaningless terms"""

    policy: Policy

    def membership(self, t: Coterm) -> Tri: ...


def admits(verdict: Tri, policy: Policy) -> bool:
    """Whether a membership verdict licenses a bottom step"""
    return verdict.is_yes or (verdict.is_unknown and policy is Policy.ASSUME)


# ----------------------------------------------------------------------------
# Substitution

def subst(body: Coterm, arg: Coterm, index: int = 0) -> Coterm:
    """Lazy capture-avoiding substitution of arg for index in body.

    Var index becomes arg, larger indices drop by one (the binder is gone),
    and arg is lifted by one whenever the substitution passes a binder.
    """
    if body.free_bound is not None and body.free_bound <= index:
        return body

    def unfold() -> Union[Root, Coterm]:
        node, children = body.root()
        if node.kind is Kind.VAR:
            if node.index == index:
                return arg
            if node.index > index:
                return NodeKind.var(node.index - 1), ()
            return body
        if node.kind is Kind.LAM:
            return node, (subst(children[0], lift(arg, 0, 1), index + 1),)
        if node.kind is Kind.APP:
            return node, (subst(children[0], arg, index), subst(children[1], arg, index))
        return body

    return Coterm(unfold)


def is_beta_redex(t: Coterm) -> bool:
    node, children = t.root()
    return node.kind is Kind.APP and children[0].root()[0].kind is Kind.LAM


def contract_beta(redex: Coterm) -> Coterm:
    fn, arg = redex.root()[1]
    return subst(fn.root()[1][0], arg, 0)


def replace_at(t: Coterm, p: Position, new: Coterm) -> Coterm:
    """t with the subterm at p replaced; siblings are shared"""
    if not p:
        return new
    node, children = t.root()
    i = p[0]
    if i >= len(children):
        raise TermError(f"position {format_position(p)} leaves the term")
    child = replace_at(children[i], p[1:], new)
    if node.kind is Kind.LAM:
        return lam(child)
    if i == 0:
        return app(child, children[1])
    return app(children[0], child)


# ----------------------------------------------------------------------------
# One-step reduction

def head_redex_position(t: Coterm) -> Optional[Position]:
    """Position 0^m of the weak head redex, if t has one"""
    spine = 0
    current = t
    while True:
        node, children = current.root()
        if node.kind is not Kind.APP:
            return None
        fn = children[0]
        if fn.root()[0].kind is Kind.LAM:
            return (0,) * spine
        current = fn
        spine += 1


def whnf_step(t: Coterm) -> Optional[Coterm]:
    """Contract the weak head redex; None for atoms, abstractions and
    stuck applications"""
    q = head_redex_position(t)
    if q is None:
        return None
    return replace_at(t, q, contract_beta(subterm_at(t, q)))


def redexes(t: Coterm, depth_bound: int, oracle: Optional[MembershipOracle] = None) -> List[Tuple[Position, RuleTag, Tri]]:
    """All redex positions at depth < depth_bound in outermost-leftmost order.

    With an oracle, a non-bottom subterm whose membership verdict is Yes or
    Unknown is listed as a bottom redex (before a beta redex at the same
    position) tagged with that verdict.
    """
    found = []
    for p, sub in iter_preorder(t, depth_bound):
        node = sub.root()[0]
        if oracle is not None and node.kind is not Kind.BOT:
            verdict = oracle.membership(sub)
            if not verdict.is_no:
                found.append((p, RuleTag.BOT_U, verdict))
        if is_beta_redex(sub):
            found.append((p, RuleTag.BETA, YES))
    return found


def step_at(
    t: Coterm,
    p: Position,
    rule: RuleTag,
    verdict: Optional[Tri] = None,
    policy: Policy = Policy.ASSUME,
    oracle: Optional[MembershipOracle] = None,
) -> Coterm:
    """Contract the redex of the given kind at p.

    A bottom step needs the membership verdict of the subterm, given
    directly or computed with ``oracle`` (whose policy then applies).
    """
    sub = subterm_at(t, p)
    if sub is None:
        raise NotARedex(p, rule, "position leaves the term")
    if rule is RuleTag.BETA:
        if not is_beta_redex(sub):
            raise NotARedex(p, rule)
        return replace_at(t, p, contract_beta(sub))
    if sub.root()[0].kind is Kind.BOT:
        raise NotARedex(p, rule, "subterm is already bottom")
    if verdict is None and oracle is not None:
        verdict = oracle.membership(sub)
        policy = oracle.policy
    if verdict is None:
        raise NotARedex(p, rule, "no membership verdict supplied")
    if not admits(verdict, policy):
        raise NotARedex(p, rule, f"membership verdict {verdict}")
    return replace_at(t, p, bot())


# ----------------------------------------------------------------------------
# Traces

@dataclass(frozen=True)
class Step:
    position: Position
    rule: RuleTag
    depth: int
    result: Coterm
    verdict: Tri = YES


@dataclass(frozen=True)
class Trace:
    """Finite reduction sequence prefix; results are shared lazy coterms"""

    start: Coterm
    steps: Tuple[Step, ...] = ()

    @property
    def end(self) -> Coterm:
        return self.steps[-1].result if self.steps else self.start

    def terms(self) -> List[Coterm]:
        return [self.start] + [step.result for step in self.steps]

    def depths(self) -> List[int]:
        return [step.depth for step in self.steps]

    def __len__(self) -> int:
        return len(self.steps)


class StrategyKind(str, Enum):
    LEFTMOST_OUTERMOST = "leftmost-outermost"
    WEAK_HEAD = "weak-head"
    RANDOM_REDEX = "random"
    BOTTOM_FIRST = "bottom-first"


_STRATEGY_ALIASES = {
    "lo": StrategyKind.LEFTMOST_OUTERMOST,
    "leftmost-outermost": StrategyKind.LEFTMOST_OUTERMOST,
    "wh": StrategyKind.WEAK_HEAD,
    "weak-head": StrategyKind.WEAK_HEAD,
    "random": StrategyKind.RANDOM_REDEX,
    "bottom-first": StrategyKind.BOTTOM_FIRST,
    "bf": StrategyKind.BOTTOM_FIRST,
}


@dataclass(frozen=True)
class Strategy:
    kind: StrategyKind
    seed: int = 0
    depth_bound: int = 8

    @staticmethod
    def parse(text: str, seed: int = 0, depth_bound: int = 8) -> "Strategy":
        """Read 'lo', 'wh', 'bottom-first', 'random' or 'random:SEED'"""
        name, _, seed_text = text.partition(":")
        kind = _STRATEGY_ALIASES.get(name.strip().lower())
        if kind is None:
            raise TermError(f"unknown strategy {text!r}")
        if seed_text:
            seed = int(seed_text, 0)
        return Strategy(kind, seed, depth_bound)

    def describe(self) -> Dict[str, object]:
        return {"kind": self.kind.value, "seed": self.seed, "depth_bound": self.depth_bound}


def _weak_head_choice(t: Coterm, depth_bound: int) -> Optional[Tuple[Position, RuleTag, Tri]]:
    queue = deque([(ROOT, t)])
    while queue:
        p, sub = queue.popleft()
        if len(p) >= depth_bound:
            continue
        q = head_redex_position(sub)
        if q is not None:
            return p + q, RuleTag.BETA, YES
        for i, child in enumerate(sub.root()[1]):
            queue.append((p + (i,), child))
    return None


def _choose(t: Coterm, strat: Strategy, oracle: Optional[MembershipOracle], rng) -> Optional[Tuple[Position, RuleTag, Tri]]:
    if strat.kind is StrategyKind.WEAK_HEAD:
        return _weak_head_choice(t, strat.depth_bound)
    policy = oracle.policy if oracle is not None else Policy.ASSUME
    candidates = [
        c for c in redexes(t, strat.depth_bound, oracle)
        if c[1] is RuleTag.BETA or admits(c[2], policy)
    ]
    if not candidates:
        return None
    if strat.kind is StrategyKind.RANDOM_REDEX:
        return candidates[int(rng.integers(len(candidates)))]
    if strat.kind is StrategyKind.BOTTOM_FIRST:
        for candidate in candidates:
            if candidate[1] is RuleTag.BOT_U:
                return candidate
    return candidates[0]


def reduce(t: Coterm, strat: Strategy, k: int, oracle: Optional[MembershipOracle] = None) -> Trace:
    """Apply up to k strategy-chosen steps, stopping early at a normal form
    of the bounded redex search. Reproducible from the strategy seed."""
    if k < 0:
        raise TermError("k must be non-negative")
    rng = np.random.default_rng(strat.seed)
    policy = oracle.policy if oracle is not None else Policy.ASSUME
    current = t
    steps: List[Step] = []
    for _ in range(k):
        choice = _choose(current, strat, oracle, rng)
        if choice is None:
            break
        p, rule, verdict = choice
        current = step_at(current, p, rule, verdict, policy)
        steps.append(Step(p, rule, len(p), current, verdict))
    logger.debug("reduce(%s): %d of %d steps", strat.kind.value, len(steps), k)
    return Trace(t, tuple(steps))


def replay_trace(t: Coterm, recorded: Trace) -> Trace:
    """Re-run the recorded positions and rules on t, recovering full results
    from a trace whose results are only snapshots"""
    current = t
    steps: List[Step] = []
    for i, step in enumerate(recorded.steps):
        try:
            current = step_at(current, step.position, step.rule, step.verdict, Policy.ASSUME)
        except NotARedex as e:
            raise InvalidTrace(f"step {i}: {e}")
        steps.append(Step(step.position, step.rule, step.depth, current, step.verdict))
    return Trace(t, tuple(steps))


def validate_trace(tr: Trace, depth: int = 12) -> None:
    """Re-apply every step and compare with the recorded result up to depth.
    Raises InvalidTrace on the first mismatch."""
    previous = tr.start
    for i, step in enumerate(tr.steps):
        if step.depth != len(step.position):
            raise InvalidTrace(f"step {i}: depth {step.depth} does not match position {format_position(step.position)}")
        try:
            expected = step_at(previous, step.position, step.rule, step.verdict, Policy.ASSUME)
        except NotARedex as e:
            raise InvalidTrace(f"step {i}: {e}")
        if not bisim_up_to(expected, step.result, depth):
            raise InvalidTrace(f"step {i}: recorded result differs from the contractum")
        previous = step.result


# ----------------------------------------------------------------------------
# Postponement of bottom steps

def postpone_bot(tr: Trace) -> Tuple[Trace, Tuple[Coterm, Coterm]]:
    """Split a mixed beta/bottom trace into a pure beta trace from the same
    start to some r, plus the pair (r, end) related by one parallel bottom
    step.

    Bottom steps are absorbed into the pending parallel step. A beta step
    at q is replayed at q on the un-collapsed term: q cannot lie inside a
    collapsed position (that subterm is bottom, not a redex), and neither
    the application at q nor its abstraction can have been collapsed, so
    the redex is present in r too, and the contracta stay related by
    parallel bottom reduction.
    """
    r = tr.start
    beta_steps: List[Step] = []
    for i, step in enumerate(tr.steps):
        if step.depth != len(step.position):
            raise InvalidTrace(f"step {i}: depth does not match position")
        if step.rule is RuleTag.BOT_U:
            if step.verdict.is_no:
                raise InvalidTrace(f"step {i}: bottom step with verdict No")
            continue
        sub = subterm_at(r, step.position)
        if sub is None or not is_beta_redex(sub):
            raise InvalidTrace(f"step {i}: no beta redex at {format_position(step.position)} in the postponed term")
        r = replace_at(r, step.position, contract_beta(sub))
        beta_steps.append(Step(step.position, RuleTag.BETA, step.depth, r))
    return Trace(tr.start, tuple(beta_steps)), (r, tr.end)


# ----------------------------------------------------------------------------
# Strong convergence

@dataclass
class ConvergenceReport:
    """Per-depth stabilisation witnesses of a finite trace prefix.

    ``last_step[d]`` is the 0-based index of the last step at depth <= d;
    ``limits[d]`` is the depth-d truncation of the term after it (the
    candidate prefix of the limit). ``stabilized[d]`` holds when steps
    follow that index, all of them deeper than d.
    """

    depth_bound: int
    step_count: int
    last_step: List[Optional[int]]
    limits: List[FiniteTerm]
    stabilized: List[bool]
    consistent: bool

    @property
    def stable_depth(self) -> int:
        """Largest d with every depth up to d stabilised (-1 if none)"""
        d = -1
        for flag in self.stabilized:
            if not flag:
                break
            d += 1
        return d

    def summary(self) -> str:
        state = "consistent" if self.consistent else "INCONSISTENT"
        return (f"{state} with strong convergence up to depth {self.depth_bound} "
                f"({self.step_count} steps, stabilised through depth {self.stable_depth})")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "depth": list(range(self.depth_bound + 1)),
            "last_step": pd.array(self.last_step, dtype="Int64"),
            "stabilized": self.stabilized,
            "limit": [str(t) for t in self.limits],
        })

    def to_json(self) -> Dict[str, object]:
        return {
            "depth_bound": self.depth_bound,
            "step_count": self.step_count,
            "consistent": self.consistent,
            "stable_depth": self.stable_depth,
            "per_depth": [
                {"depth": d, "last_step": self.last_step[d], "stabilized": self.stabilized[d],
                 "limit": self.limits[d].to_json()}
                for d in range(self.depth_bound + 1)
            ],
        }


def check_strong_convergence(tr: Trace, D: int) -> ConvergenceReport:
    """Stabilisation table of a finite trace for every depth d <= D.

    A finite prefix can only be consistent with strong convergence; it
    never certifies the limit.
    """
    if D < 0:
        raise TermError("D must be non-negative")
    for i, step in enumerate(tr.steps):
        if step.depth != len(step.position):
            raise InvalidTrace(f"step {i}: depth {step.depth} does not match position {format_position(step.position)}")
    terms = tr.terms()
    last_step: List[Optional[int]] = []
    limits: List[FiniteTerm] = []
    stabilized: List[bool] = []
    last: Optional[int] = None
    by_depth = sorted(range(len(tr.steps)), key=lambda i: tr.steps[i].depth)
    cursor = 0
    for d in range(D + 1):
        while cursor < len(by_depth) and tr.steps[by_depth[cursor]].depth <= d:
            index = by_depth[cursor]
            last = index if last is None else max(last, index)
            cursor += 1
        last_step.append(last)
        after = terms[last + 1] if last is not None else tr.start
        limits.append(truncate(after, d))
        stabilized.append(last is None or last < len(tr.steps) - 1)
    consistent = all(truncate(limits[d + 1].to_coterm(), d) == limits[d] for d in range(D))
    if not consistent:
        logger.warning("trace limit truncations are not coherent")
    return ConvergenceReport(D, len(tr.steps), last_step, limits, stabilized, consistent)


# ----------------------------------------------------------------------------
# Trace files

def trace_to_jsonl(tr: Trace, snapshot_depth: int, config: Optional[Dict[str, object]] = None) -> str:
    """JSON-lines: a header record, then one record per step"""
    header = {
        "type": "header",
        "start": truncate(tr.start, snapshot_depth).to_json(),
        "snapshot_depth": snapshot_depth,
        "steps": len(tr.steps),
        "config": config or {},
    }
    lines = [json.dumps(header, separators=(",", ":"), ensure_ascii=False)]
    for i, step in enumerate(tr.steps):
        record: Dict[str, object] = {
            "i": i,
            "pos": format_position(step.position, empty=""),
            "rule": step.rule.value,
            "depth": step.depth,
            "snapshot": truncate(step.result, snapshot_depth).to_json(),
        }
        if step.rule is RuleTag.BOT_U:
            record["verdict"] = step.verdict.to_json()
        lines.append(json.dumps(record, separators=(",", ":"), ensure_ascii=False))
    return "\n".join(lines) + "\n"


def _verdict_from_json(obj: Optional[dict]) -> Tri:
    if not obj:
        return YES
    verdict = obj.get("verdict", "yes")
    if verdict == "yes":
        return Tri.yes(assumed=bool(obj.get("assumed", False)))
    if verdict == "no":
        return Tri.no(obj.get("reason", ""))
    return Tri.unknown(obj.get("reason", "recorded as unknown"))


def trace_from_jsonl(text: str) -> Tuple[Trace, Dict[str, object]]:
    """Load a trace file. Step results are the recorded snapshots, so the
    loaded trace carries no information below the snapshot depth."""
    try:
        records = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not records or records[0].get("type") != "header":
            raise InvalidTrace("trace file has no header record")
        header = records[0]
        start = finite_from_json(header["start"]).to_coterm()
        steps = []
        for expected, record in enumerate(records[1:]):
            if record["i"] != expected:
                raise InvalidTrace(f"record {expected} is numbered {record['i']}")
            steps.append(Step(
                parse_position(record["pos"]),
                RuleTag(record["rule"]),
                int(record["depth"]),
                finite_from_json(record["snapshot"]).to_coterm(),
                _verdict_from_json(record.get("verdict")),
            ))
    except InvalidTrace:
        raise
    except (json.JSONDecodeError, KeyError, ValueError, TypeError, AttributeError) as e:
        raise InvalidTrace(f"malformed trace record: {e}")
    return Trace(start, tuple(steps)), header
