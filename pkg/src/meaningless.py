"""
Meaningless Terms Module for the Berarducci Tree Engine
Membership oracles for sets of meaningless terms (root-active terms, head
active terms plus the ogre), depth-bounded deciders for the meaningless
congruence and for parallel bottom reduction, and the axiom spot-checker
"""

from __future__ import annotations

import logging
import shlex
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from term_core import (
    FINITE_BOT, LAM, NO, YES, Coterm, FiniteTerm, Kind, MuBind, MuNode, MuRef,
    TermError, Tri, app, bisim_up_to, bot, from_mu, iter_preorder, lam, lift,
    truncate, tri_all, tri_any, var,
)
from reduction import (
    Policy, Strategy, StrategyKind, redexes, reduce, replace_at, step_at, subst,
)
from rnf import crnf, has_rnf, inf_beta_up_to
from syntax import print_finite

logger = logging.getLogger(__name__)

# O = \x. O
OGRE = from_mu(MuBind(MuNode(LAM, (MuRef(0),))))

# Redex positions searched by the head-ogre beta search
HEAD_OGRE_REDEX_DEPTH = 12
# Reducts agreeing up to this depth count as already visited
FINGERPRINT_DEPTH = 24


class OracleKind(str, Enum):
    ROOT_ACTIVE = "root-active"
    HEAD_OGRE = "head-ogre"
    BOT_ONLY = "bot-only"
    COMPOSITE = "composite"


@dataclass(frozen=True)
class Oracle:
    """A set of meaningless terms, approximated with a fuel budget.

    ``membership`` gives the raw verdict; ``resolve`` applies the policy
    (under ASSUME an Unknown reads as an assumed Yes).
    """

    kind: OracleKind
    fuel: int = 200
    policy: Policy = Policy.ASSUME
    parts: Tuple["Oracle", ...] = ()

    def __post_init__(self):
        if self.fuel < 1:
            raise TermError("oracle fuel must be at least 1")
        if self.kind is OracleKind.COMPOSITE and not self.parts:
            raise TermError("a composite oracle needs at least one part")

    @staticmethod
    def root_active(fuel: int = 200, policy: Policy = Policy.ASSUME) -> "Oracle":
        return Oracle(OracleKind.ROOT_ACTIVE, fuel, policy)

    @staticmethod
    def head_ogre(fuel: int = 200, policy: Policy = Policy.ASSUME) -> "Oracle":
        return Oracle(OracleKind.HEAD_OGRE, fuel, policy)

    @staticmethod
    def bot_only(policy: Policy = Policy.ASSUME) -> "Oracle":
        return Oracle(OracleKind.BOT_ONLY, policy=policy)

    @staticmethod
    def composite(*parts: "Oracle", policy: Policy = Policy.ASSUME) -> "Oracle":
        fuel = max(part.fuel for part in parts) if parts else 1
        return Oracle(OracleKind.COMPOSITE, fuel, policy, tuple(parts))

    def membership(self, t: Coterm) -> Tri:
        if t.root()[0].kind is Kind.BOT:
            return Tri.yes(reason="bottom")
        memo = t.memo()
        key = ("member", self)
        found = memo.get(key)
        if found is None:
            found = self._decide(t)
            memo[key] = found
        return found

    def resolve(self, verdict: Tri) -> Tri:
        if verdict.is_unknown and self.policy is Policy.ASSUME:
            return Tri.yes(assumed=True, reason=verdict.reason)
        return verdict

    def member(self, t: Coterm) -> Tri:
        """Membership with the policy applied"""
        return self.resolve(self.membership(t))

    def describe(self) -> Dict[str, object]:
        out: Dict[str, object] = {"kind": self.kind.value, "fuel": self.fuel, "policy": self.policy.value}
        if self.parts:
            out["parts"] = [part.describe() for part in self.parts]
        return out

    def _decide(self, t: Coterm) -> Tri:
        if self.kind is OracleKind.BOT_ONLY:
            return Tri.no("not bottom")
        if self.kind is OracleKind.ROOT_ACTIVE:
            return root_active(t, self.fuel)
        if self.kind is OracleKind.HEAD_OGRE:
            return head_ogre_membership(t, self.fuel)
        return tri_any(part.membership(t) for part in self.parts)


def root_active(t: Coterm, fuel: int) -> Tri:
    found = crnf(t, fuel)
    if found.verdict.is_yes:
        return Tri.no(f"root normal form after {found.whnf_steps} weak head steps")
    if found.verdict.is_no:
        return Tri.yes(reason="weak head normal form is bottom")
    return found.verdict


def head_active(t: Coterm, fuel: int) -> Tri:
    """Whether t is \\x1..xn. r t1..tm with r root-active, trying every
    prefix r of the head spine. Towers of more than fuel abstractions
    answer No; the ogre check covers them."""
    body = t
    stripped = 0
    while body.root()[0].kind is Kind.LAM:
        if stripped == fuel:
            return Tri.no(f"more than {fuel} leading abstractions")
        body = body.root()[1][0]
        stripped += 1
    prefixes = [body]
    while body.root()[0].kind is Kind.APP:
        body = body.root()[1][0]
        prefixes.append(body)
    return tri_any(root_active(r, fuel) for r in prefixes)


def head_ogre_membership(t: Coterm, fuel: int) -> Tri:
    """Breadth-first search over finite beta reducts of t (at most fuel of
    them) for a head active term or one that agrees with the ogre up to
    depth fuel.

    When the budget runs out and every inspected reduct was a definite
    non-member the answer is No: the search gives up on membership rather
    than reporting Unknown, so terms like (\\x y. x x)(\\x y. x x) are
    classified outside the set as the theory requires. Any inconclusive
    head check makes the whole answer Unknown.
    """
    queue = deque([t])
    seen = {truncate(t, FINGERPRINT_DEPTH)}
    inspected = 0
    unknown: Optional[Tri] = None
    while queue and inspected < fuel:
        u = queue.popleft()
        inspected += 1
        if bisim_up_to(u, OGRE, fuel):
            return Tri.yes(reason=f"reduct agrees with the ogre to depth {fuel}")
        verdict = head_active(u, fuel)
        if verdict.is_yes:
            return Tri.yes(reason=f"head active reduct after {inspected} reducts")
        if verdict.is_unknown and unknown is None:
            unknown = verdict
        for p, rule, _ in redexes(u, min(fuel, HEAD_OGRE_REDEX_DEPTH)):
            reduct = step_at(u, p, rule)
            fingerprint = truncate(reduct, FINGERPRINT_DEPTH)
            if fingerprint not in seen:
                seen.add(fingerprint)
                queue.append(reduct)
    if unknown is not None:
        return unknown
    # Budget spent with reducts left: answer No, not Unknown.
    if queue:
        logger.debug("head-ogre search spent its budget of %d reducts", fuel)
        return Tri.no(f"no head active or ogre reduct among {inspected} reducts")
    return Tri.no("beta reducts exhausted")


# ----------------------------------------------------------------------------
# Depth-bounded deciders

def sim_u_up_to(t: Coterm, s: Coterm, n: int, o: Oracle) -> Tri:
    """t and s related by the meaningless congruence, observed to depth n"""
    if n <= 0 or t is s:
        return YES
    node_t, children_t = t.root()
    node_s, children_s = s.root()
    congruent = NO
    if node_t == node_s:
        congruent = tri_all(sim_u_up_to(a, b, n - 1, o) for a, b in zip(children_t, children_s))
        if congruent.is_yes and not congruent.assumed:
            return congruent
    both = tri_all([o.member(t), o.member(s)])
    return tri_any([congruent, both])


def par_bot_up_to(t: Coterm, s: Coterm, n: int, o: Oracle) -> Tri:
    """t parallel-bottom-reduces to s, observed to depth n"""
    if n <= 0 or t is s:
        return YES
    node_t, children_t = t.root()
    node_s, children_s = s.root()
    congruent = NO
    if node_t == node_s:
        congruent = tri_all(par_bot_up_to(a, b, n - 1, o) for a, b in zip(children_t, children_s))
        if congruent.is_yes and not congruent.assumed:
            return congruent
    collapse = NO
    if node_s.kind is Kind.BOT and node_t.kind is not Kind.BOT:
        collapse = o.member(t)
    return tri_any([congruent, collapse])


def common_bot_reduct(t: Coterm, s: Coterm, n: int, o: Oracle) -> Coterm:
    """Common parallel-bottom reduct of two related terms, built to depth n:
    positions where both sides are members become bottom. Raises TermError
    when the roots disagree somewhere and the terms are not both members."""

    def build(a: Coterm, b: Coterm, m: int) -> FiniteTerm:
        if m <= 0:
            return FINITE_BOT
        if tri_all([o.member(a), o.member(b)]).is_yes:
            return FINITE_BOT
        node_a, children_a = a.root()
        node_b, children_b = b.root()
        if node_a != node_b:
            raise TermError(f"terms differ at {node_a} / {node_b} and are not both meaningless")
        return FiniteTerm(node_a, tuple(build(x, y, m - 1) for x, y in zip(children_a, children_b)))

    return build(t, s, n).to_coterm()


# ----------------------------------------------------------------------------
# Axiom spot-checks


AXIOMS = ("closure", "substitution", "overlap", "root-activeness", "indiscernibility", "expansion")

# Depth at which witness terms are printed
WITNESS_DEPTH = 12

Corpus = Union[Mapping[str, Coterm], Sequence[Coterm]]


@dataclass(frozen=True)
class Witness:
    """A term the oracle rejects although the axiom demands membership"""

    axiom: str
    term: str
    detail: str
    replay: str
    label: Optional[str] = None

    def to_json(self) -> Dict[str, object]:
        out: Dict[str, object] = {"axiom": self.axiom, "term": self.term, "detail": self.detail, "replay": self.replay}
        if self.label:
            out["label"] = self.label
        return out


@dataclass
class AxiomOutcome:
    pass_count: int = 0
    fail_witnesses: List[Witness] = field(default_factory=list)
    unknown_count: int = 0


@dataclass
class AxiomReport:
    oracle: Dict[str, object]
    depth: int
    trials: int
    seed: int
    outcomes: Dict[str, AxiomOutcome]
    member_count: int = 0

    @property
    def passed(self) -> bool:
        return not self.failed_axioms()

    def failed_axioms(self) -> List[str]:
        return [axiom for axiom in AXIOMS if self.outcomes[axiom].fail_witnesses]

    def witness_labels(self, axiom: str) -> List[Optional[str]]:
        return [w.label for w in self.outcomes[axiom].fail_witnesses]

    def replay_command(self) -> str:
        return (f"python src/cli.py axioms --oracle {self.oracle['kind']} --fuel {self.oracle['fuel']} "
                f"--policy {self.oracle['policy']} --depth {self.depth} --trials {self.trials} --seed {self.seed}")

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for axiom in AXIOMS:
            outcome = self.outcomes[axiom]
            rows.append({
                "axiom": axiom,
                "passed": outcome.pass_count,
                "failed": len(outcome.fail_witnesses),
                "unknown": outcome.unknown_count,
                "witnesses": ", ".join(w.label or w.term for w in outcome.fail_witnesses),
            })
        return pd.DataFrame(rows)

    def to_json(self) -> Dict[str, object]:
        return {
            "oracle": self.oracle,
            "depth": self.depth,
            "trials": self.trials,
            "seed": self.seed,
            "members": self.member_count,
            "replay": self.replay_command(),
            "axioms": {
                axiom: {
                    "pass_count": outcome.pass_count,
                    "unknown_count": outcome.unknown_count,
                    "fail_witnesses": [w.to_json() for w in outcome.fail_witnesses],
                }
                for axiom, outcome in self.outcomes.items()
            },
        }


def _labelled(corpus: Corpus) -> List[Tuple[Optional[str], Coterm]]:
    if isinstance(corpus, Mapping):
        return list(corpus.items())
    return [(None, t) for t in corpus]


def _identity() -> Coterm:
    return lam(var(0))


def _k() -> Coterm:
    return lam(lam(var(1)))


def axiom_check(o: Oracle, corpus: Corpus, n: int, trials: int, seed: int) -> AxiomReport:
    """Spot-check the six axioms of a set of meaningless terms on a corpus.

    Members are the corpus terms the oracle accepts (assumed members
    included). Every axiom draws from its own child seed, so one axiom's
    sampling never shifts another's. Besides the seeded expansions, every
    non-member that reduces to the ogre while the ogre is a member is
    reported under Expansion.
    """
    entries = _labelled(corpus)
    report = AxiomReport(o.describe(), n, trials, seed, {axiom: AxiomOutcome() for axiom in AXIOMS})
    members = [(label, t) for label, t in entries if o.member(t).is_yes]
    report.member_count = len(members)
    children = np.random.SeedSequence(seed).spawn(len(AXIOMS))
    rngs = {axiom: np.random.default_rng(child) for axiom, child in zip(AXIOMS, children)}

    def expect_member(axiom: str, candidate: Coterm, detail: str, label: Optional[str] = None) -> None:
        verdict = o.member(candidate)
        outcome = report.outcomes[axiom]
        if verdict.is_yes:
            outcome.pass_count += 1
        elif verdict.is_unknown:
            outcome.unknown_count += 1
        else:
            text = print_finite(truncate(candidate, WITNESS_DEPTH), "named")
            source = f"--demo {label}" if label else shlex.quote(text)
            replay = (f"python src/cli.py classify {source} --oracle {o.kind.value} "
                      f"--fuel {o.fuel} --policy {o.policy.value}")
            logger.warning("%s axiom fails on %s: %s", axiom, label or text, detail)
            outcome.fail_witnesses.append(Witness(axiom, text, detail, replay, label))

    def pick(rng, pool):
        return pool[int(rng.integers(len(pool)))]

    if members:
        rng = rngs["closure"]
        for _ in range(trials):
            label, t = pick(rng, members)
            strat = Strategy(StrategyKind.RANDOM_REDEX, seed=int(rng.integers(2 ** 32)), depth_bound=8)
            tr = reduce(t, strat, 1 + int(rng.integers(3)))
            if len(tr):
                expect_member("closure", tr.end, f"beta reduct of member {label or 'term'} after {len(tr)} steps")

        rng = rngs["substitution"]
        for _ in range(trials):
            label, t = pick(rng, members)
            other_label, s = pick(rng, entries)
            expect_member("substitution", subst(t, s, 0),
                          f"member {label or 'term'} with index 0 replaced by {other_label or 'a corpus term'}")

        lambda_members = [(label, t) for label, t in members if t.root()[0].kind is Kind.LAM]
        rng = rngs["overlap"]
        if lambda_members:
            for _ in range(trials):
                label, t = pick(rng, lambda_members)
                other_label, s = pick(rng, entries)
                expect_member("overlap", app(t, s), f"member abstraction {label or 'term'} applied to {other_label or 'a corpus term'}")

        rng = rngs["indiscernibility"]
        for _ in range(trials):
            label, t = pick(rng, members)
            if rng.integers(2):
                partner = pick(rng, entries)[1]
            else:
                positions = [p for p, _ in iter_preorder(t, 4)]
                partner = replace_at(t, pick(rng, positions), bot())
            if sim_u_up_to(t, partner, n, o).is_yes:
                expect_member("indiscernibility", partner, f"related to member {label or 'term'} up to depth {n}")

        rng = rngs["expansion"]
        for _ in range(trials):
            label, s = pick(rng, members)
            c = pick(rng, entries)[1]
            shape = int(rng.integers(3))
            if shape == 0:
                candidate = app(_identity(), s)
            elif shape == 1:
                candidate = app(app(_k(), s), c)
            else:
                candidate = app(lam(lift(s, 0, 1)), c)
            expect_member("expansion", candidate, f"beta expansion of member {label or 'term'}")

    for label, t in entries:
        if not has_rnf(t, o.fuel).is_yes:
            expect_member("root-activeness", t, "no root normal form found", label)

    if o.member(OGRE).is_yes:
        for label, u in entries:
            if o.member(u).is_no and inf_beta_up_to(u, OGRE, n, o.fuel).is_yes:
                expect_member("expansion", u, f"reduces to the ogre (a member) up to depth {n}", label)

    return report
