"""
Demo Corpus for the Berarducci Tree Engine
Named example terms (normal forms, root-active terms, the ogre family,
head-active terms, open terms) and seeded generators of random terms,
guarded mu-expressions and mixed reduction traces
"""

from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from term_core import (
    APP, LAM, Coterm, FiniteTerm, MuBind, MuExpr, MuNode, MuRef, NodeKind,
    TermError,
)
from reduction import MembershipOracle, Strategy, StrategyKind, Trace, reduce
from syntax import Parsed, parse


class DemoCorpus:
    def __init__(self):
        self.records = self._create_corpus()
        self._parsed: Dict[str, Parsed] = {}

    def _create_corpus(self):
        """Named example terms with their surface text and a short note"""

        data = [
            # Normal forms
            {
                'name': 'i',
                'text': '\\x. x',
                'kind': 'normal form',
                'description': 'identity',
            },
            {
                'name': 'k',
                'text': '\\x y. x',
                'kind': 'normal form',
                'description': 'first projection',
            },
            {
                'name': 's',
                'text': '\\x y z. x z (y z)',
                'kind': 'normal form',
                'description': 'distributor',
            },
            {
                'name': 'bot',
                'text': 'bot',
                'kind': 'root-active',
                'description': 'bottom itself',
            },

            # Root-active terms
            {
                'name': 'omega',
                'text': '(\\x. x x) (\\x. x x)',
                'kind': 'root-active',
                'description': 'reduces to itself at the root forever',
            },
            {
                'name': 'i_omega',
                'text': '(\\x. x) ((\\y. y y) (\\y. y y))',
                'kind': 'root-active',
                'description': 'identity applied to omega',
            },
            {
                'name': 'omega_y',
                'text': '(\\x. x x y) (\\x. x x y)',
                'kind': 'root-active',
                'description': 'open root-active term, the head keeps growing',
            },

            # Ogre family
            {
                'name': 'o',
                'text': 'mu O. \\x. O',
                'kind': 'ogre',
                'description': 'the ogre, an infinite tower of abstractions',
            },
            {
                'name': 'l',
                'text': 'mu L. \\x. L',
                'kind': 'ogre',
                'description': 'normal form of m',
            },
            {
                'name': 'm',
                'text': '(\\m x. m m) (\\m x. m m)',
                'kind': 'ogre',
                'description': 'reduces to l, one abstraction per step',
            },
            {
                'name': 'omega_o',
                'text': '(\\x y. x x) (\\x y. x x)',
                'kind': 'ogre',
                'description': 'reduces to the ogre but no finite reduct is meaningless',
            },

            # Head-active terms
            {
                'name': 'head_active_1',
                'text': '\\x. (\\y. y y) (\\y. y y) x',
                'kind': 'head-active',
                'description': 'abstraction over omega applied to a variable',
            },
            {
                'name': 'head_active_2',
                'text': '\\x y. (\\z. z z) (\\z. z z) y x',
                'kind': 'head-active',
                'description': 'two abstractions over omega applied twice',
            },

            # Open terms
            {
                'name': 'y_f',
                'text': '(\\x. f (x x)) (\\x. f (x x))',
                'kind': 'open',
                'description': 'fixed point combinator applied to a free f',
            },
            {
                'name': 'ix_omega',
                'text': 'x ((\\y. y y) (\\y. y y))',
                'kind': 'open',
                'description': 'stuck head with a root-active argument',
            },
            {
                'name': 'k_x_omega',
                'text': '(\\a b. a) x ((\\y. y y) (\\y. y y))',
                'kind': 'open',
                'description': 'first projection discarding omega',
            },
        ]

        return pd.DataFrame(data)

    def names(self) -> List[str]:
        return self.records['name'].tolist()

    def parsed(self, name: str) -> Parsed:
        """Parse result of a named term (open terms allowed)"""
        if name not in self._parsed:
            match = self.records[self.records['name'] == name]
            if match.empty:
                raise TermError(f"unknown demo term {name!r}; try one of {', '.join(self.names())}")
            self._parsed[name] = parse(match.iloc[0]['text'], allow_open=True)
        return self._parsed[name]

    def get(self, name: str) -> Coterm:
        return self.parsed(name).term

    def text(self, name: str) -> str:
        return self.records.loc[self.records['name'] == name, 'text'].iloc[0]

    def get_by_kind(self, kind: str) -> Dict[str, Coterm]:
        names = self.records.loc[self.records['kind'] == kind, 'name']
        return {name: self.get(name) for name in names}

    def closed_names(self) -> List[str]:
        return [name for name in self.names() if not self.parsed(name).free_names]

    def as_mapping(self, names: Optional[List[str]] = None) -> Dict[str, Coterm]:
        return {name: self.get(name) for name in (names or self.names())}

    def to_frame(self) -> pd.DataFrame:
        """The corpus table with the free names of every term"""
        frame = self.records.copy()
        frame['free'] = [', '.join(self.parsed(name).free_names) for name in self.names()]
        return frame[['name', 'kind', 'text', 'free', 'description']]


# ----------------------------------------------------------------------------
# Seeded generators

_CONSTANTS = ("a", "b")


def random_finite_term(rng: np.random.Generator, size: int, frame: int = 0) -> FiniteTerm:
    """Random term with exactly ``size`` nodes (at least one) whose free indices stay below
    ``frame``; beta redexes are drawn on purpose so the term has work to do"""

    def atom(depth: int) -> FiniteTerm:
        if depth > 0 and rng.random() < 0.85:
            return FiniteTerm(NodeKind.var(int(rng.integers(depth))))
        return FiniteTerm(NodeKind.const(_CONSTANTS[int(rng.integers(len(_CONSTANTS)))]))

    def build(n: int, depth: int) -> FiniteTerm:
        if n <= 1:
            return atom(depth)
        if n == 2:
            return FiniteTerm(LAM, (build(1, depth + 1),))
        roll = rng.random()
        if roll < 0.3:
            return FiniteTerm(LAM, (build(n - 1, depth + 1),))
        if roll < 0.55 and n >= 4:
            body = 1 + int(rng.integers(n - 3))
            fn = FiniteTerm(LAM, (build(body, depth + 1),))
            return FiniteTerm(APP, (fn, build(n - 2 - body, depth)))
        left = 1 + int(rng.integers(n - 2))
        return FiniteTerm(APP, (build(left, depth), build(n - 1 - left, depth)))

    return build(max(size, 1), frame)


def random_mu_expr(rng: np.random.Generator, size: int) -> MuExpr:
    """Random guarded closed mu-expression"""

    def build(n: int, depth: int, guarded: Tuple[bool, ...]) -> MuExpr:
        usable = [i for i, flag in enumerate(guarded) if flag]
        if usable and rng.random() < 0.3:
            return MuRef(usable[int(rng.integers(len(usable)))])
        if n <= 1:
            if depth > 0 and rng.random() < 0.7:
                return MuNode(NodeKind.var(int(rng.integers(depth))))
            return MuNode(NodeKind.const(_CONSTANTS[int(rng.integers(len(_CONSTANTS)))]))
        roll = rng.random()
        inner = (True,) * len(guarded)
        if roll < 0.25:
            return MuBind(build(n - 1, depth, (False,) + guarded))
        if roll < 0.55:
            return MuNode(LAM, (build(n - 1, depth + 1, inner),))
        left = 1 + int(rng.integers(max(n - 2, 1)))
        return MuNode(APP, (build(left, depth, inner), build(max(n - 1 - left, 1), depth, inner)))

    return build(max(size, 1), 0, ())


def random_mixed_trace(
    rng: np.random.Generator,
    t: Coterm,
    length: int,
    oracle: Optional[MembershipOracle] = None,
    depth_bound: int = 8,
) -> Trace:
    """Seeded random beta/bottom trace of at most ``length`` steps"""
    strat = Strategy(StrategyKind.RANDOM_REDEX, seed=int(rng.integers(2 ** 63)), depth_bound=depth_bound)
    return reduce(t, strat, length, oracle)
