"""
Shared test setup: puts src/ on the import path and provides the demo
corpus, the common oracles and hypothesis strategies for finite terms
"""

import os
import sys

import pytest
from hypothesis import strategies as st

src_path = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'src')
sys.path.insert(0, src_path)

from term_core import APP, FINITE_BOT, LAM, FiniteTerm, Kind, NodeKind  # noqa: E402
from corpus import DemoCorpus  # noqa: E402
from meaningless import Oracle  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: corpus-scale acceptance runs")


@pytest.fixture(scope="session")
def corpus():
    return DemoCorpus()


@pytest.fixture
def root_active():
    return Oracle.root_active(fuel=100)


def lam_tower(depth, leaf=None):
    """\\. \\. ... leaf with depth abstractions (leaf defaults to bottom)"""
    term = leaf if leaf is not None else FINITE_BOT
    for _ in range(depth):
        term = FiniteTerm(LAM, (term,))
    return term


def finite_terms(max_index=3, max_leaves=8):
    """Finite terms over a few free indices and two constants"""
    atoms = st.one_of(
        st.integers(0, max_index).map(lambda i: FiniteTerm(NodeKind.var(i))),
        st.sampled_from(["a", "b"]).map(lambda name: FiniteTerm(NodeKind.const(name))),
    )

    def extend(children):
        return st.one_of(
            children.map(lambda body: FiniteTerm(LAM, (body,))),
            st.tuples(children, children).map(lambda pair: FiniteTerm(APP, pair)),
        )

    return st.recursive(atoms, extend, max_leaves=max_leaves)


def eager_lift(t, cutoff, amount):
    node = t.node
    if node.kind is Kind.VAR:
        return FiniteTerm(NodeKind.var(node.index + amount)) if node.index >= cutoff else t
    if node.kind is Kind.LAM:
        return FiniteTerm(LAM, (eager_lift(t.children[0], cutoff + 1, amount),))
    if node.kind is Kind.APP:
        return FiniteTerm(APP, tuple(eager_lift(c, cutoff, amount) for c in t.children))
    return t


def eager_subst(t, arg, index=0):
    node = t.node
    if node.kind is Kind.VAR:
        if node.index == index:
            return arg
        if node.index > index:
            return FiniteTerm(NodeKind.var(node.index - 1))
        return t
    if node.kind is Kind.LAM:
        return FiniteTerm(LAM, (eager_subst(t.children[0], eager_lift(arg, 0, 1), index + 1),))
    if node.kind is Kind.APP:
        return FiniteTerm(APP, tuple(eager_subst(c, arg, index) for c in t.children))
    return t
