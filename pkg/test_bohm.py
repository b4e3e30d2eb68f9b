"""
Tests for normal form trees, confluence and prepend checks, and the
flattening of a tree derivation into a reduction sequence
"""

import pytest

from conftest import lam_tower
from term_core import (
    APP, FINITE_BOT, LAM, FiniteTerm, Kind, NodeKind, TermError, Tri, app, bot, lam,
    truncate, var,
)
from syntax import parse_term
from reduction import (
    InvalidTrace, Policy, RuleTag, Step, Strategy, StrategyKind, Trace,
    check_strong_convergence, reduce, step_at, validate_trace,
)
from meaningless import OGRE, Oracle
from bohm import (
    ConfluenceReport, FuelExhausted, Origin, Status, confluence_check,
    is_normal_up_to, is_tainted, nu_to_sequence, nu_tree, nu_tree_truncated,
    prepend_check, provenance_up_to, tree_to_json,
)

I = lam(var(0))
OMEGA = parse_term("(\\x. x x) (\\x. x x)")
OMEGA_O = parse_term("(\\x y. x x) (\\x y. x x)")
M = parse_term("(\\m x. m m) (\\m x. m m)")

WEAK_HEAD = Strategy(StrategyKind.WEAK_HEAD)


def fv(i):
    return FiniteTerm(NodeKind.var(i))


class TestNuTree:
    def test_m_unfolds_to_the_abstraction_tower(self, root_active):
        assert nu_tree_truncated(M, root_active, 5) == lam_tower(5)
        assert nu_tree_truncated(M, root_active, 32) == lam_tower(32)

    def test_omega_collapses(self, root_active):
        tree = nu_tree(OMEGA, root_active)
        assert tree.node.kind is Kind.BOT
        assert tree.provenance.origin is Origin.BOTTOM_ASSUMED

    def test_ogre_redex(self, root_active):
        assert nu_tree_truncated(OMEGA_O, root_active, 4) == lam_tower(4)
        assert nu_tree_truncated(OMEGA_O, root_active, 8) == lam_tower(8)

    def test_bottom(self, root_active):
        assert nu_tree_truncated(bot(), root_active, 3) == FINITE_BOT
        assert nu_tree(bot(), root_active).provenance.origin is Origin.BOTTOM_BY_ORACLE

    def test_fixed_point_of_free_function(self, corpus, root_active):
        expected = FiniteTerm(APP, (fv(0), FiniteTerm(APP, (fv(0), FiniteTerm(APP, (FINITE_BOT, FINITE_BOT))))))
        assert nu_tree_truncated(corpus.get("y_f"), root_active, 3) == expected

    def test_ogre_and_its_unfolding_agree(self, root_active):
        assert nu_tree_truncated(OGRE, root_active, 10) == nu_tree_truncated(lam(OGRE), root_active, 10)

    def test_memoised_per_oracle(self, root_active):
        assert nu_tree(M, root_active) is nu_tree(M, root_active)
        assert nu_tree(M, Oracle.bot_only()) is not nu_tree(M, root_active)

    def test_strict_policy_raises_with_position(self):
        strict = Oracle.root_active(fuel=20, policy=Policy.STRICT)
        with pytest.raises(FuelExhausted) as info:
            nu_tree_truncated(app(var(0), OMEGA), strict, 3)
        assert info.value.position == (1,)

    def test_negative_depth(self, root_active):
        with pytest.raises(TermError):
            nu_tree_truncated(I, root_active, -1)


class TestProvenance:
    def test_structural_nodes(self, root_active):
        tree = nu_tree(M, root_active)
        provenance = provenance_up_to(tree, 3)
        assert set(provenance) == {(), (0,), (0, 0)}
        assert all(p.origin is Origin.STRUCTURAL for p in provenance.values())
        assert provenance[()].whnf_steps == 1
        assert not is_tainted(tree, 10)

    def test_assumed_bottom_taints(self, root_active):
        tree = nu_tree(app(var(0), OMEGA), root_active)
        assert is_tainted(tree, 3)
        assert not is_tainted(tree, 1)

    def test_json(self, root_active):
        doc = tree_to_json(nu_tree(app(var(0), OMEGA), root_active), 4)
        assert doc["k"] == "app"
        assert doc["prov"]["origin"] == "structural"
        assert doc["a"]["prov"]["origin"] == "bottom-assumed"
        assert doc["f"] == {"k": "var", "i": 0, "prov": {"origin": "structural", "whnf_steps": 0}}


class TestNormalForms:
    def test_examples(self):
        ra = Oracle.root_active(fuel=50)
        assert is_normal_up_to(I, 5, ra).is_yes
        assert is_normal_up_to(app(I, var(0)), 5, ra).is_no
        assert is_normal_up_to(OMEGA, 5, Oracle.root_active(fuel=5)).is_unknown

    def test_meaningless_subterm(self):
        t = app(var(0), app(I, bot()))
        verdict = is_normal_up_to(t, 5, Oracle.root_active(fuel=50))
        assert verdict.is_no
        assert "meaningless" in verdict.reason

    def test_trees_are_normal(self, root_active):
        tree = nu_tree_truncated(M, root_active, 8).to_coterm()
        assert is_normal_up_to(tree, 8, root_active).is_yes

    def test_every_corpus_tree_is_normal(self, corpus, root_active):
        for name in corpus.names():
            tree = nu_tree(corpus.get(name), root_active)
            assert not is_normal_up_to(tree, 6, root_active).is_no, name


class TestConfluence:
    def test_m_joins(self, root_active):
        report = confluence_check(M, WEAK_HEAD, Strategy(StrategyKind.RANDOM_REDEX, seed=7), 8, 10, root_active)
        assert report.equal
        assert report.status is Status.EQUAL
        assert report.trees[0] == lam_tower(10)
        assert report.difference is None

    def test_omega_joins_under_assumption(self, root_active):
        report = confluence_check(OMEGA, WEAK_HEAD, Strategy(StrategyKind.RANDOM_REDEX, seed=7), 8, 10, root_active)
        assert report.equal
        assert report.tainted
        assert report.status is Status.ASSUMED_EQUAL

    def test_report_json(self, root_active):
        report = confluence_check(M, WEAK_HEAD, Strategy(StrategyKind.LEFTMOST_OUTERMOST), 4, 6, root_active,
                                  config={"seed": 1})
        doc = report.to_json()
        assert doc["status"] == "equal"
        assert doc["config"] == {"seed": 1}
        assert [b["strategy"]["kind"] for b in doc["branches"]] == ["weak-head", "leftmost-outermost"]

    def test_difference_reported(self):
        report = ConfluenceReport(
            FINITE_BOT, (WEAK_HEAD, WEAK_HEAD), (Trace(I), Trace(I)),
            (lam_tower(1), FINITE_BOT), False, False, 2,
        )
        assert report.status is Status.DIFFER
        assert report.difference == ()
        report.tainted = True
        assert report.status is Status.TAINTED_DIFFER

    @pytest.mark.parametrize("name", ["i_omega", "k_x_omega", "y_f", "omega_o", "head_active_2"])
    def test_corpus_terms_join(self, corpus, root_active, name):
        t = corpus.get(name)
        report = confluence_check(t, Strategy(StrategyKind.LEFTMOST_OUTERMOST),
                                  Strategy(StrategyKind.RANDOM_REDEX, seed=3), 6, 8, root_active)
        assert report.equal


class TestPrepend:
    def test_single_step(self, root_active):
        tr = reduce(M, WEAK_HEAD, 1)
        assert prepend_check(M, tr, 10, root_active)

    def test_bottom_step(self, root_active):
        t = app(var(0), OMEGA)
        t1 = step_at(t, (1,), RuleTag.BOT_U, oracle=root_active)
        tr = Trace(t, (Step((1,), RuleTag.BOT_U, 1, t1, Tri.unknown("fuel")),))
        assert prepend_check(t, tr, 10, root_active)

    def test_wrong_start(self, root_active):
        tr = reduce(M, WEAK_HEAD, 1)
        with pytest.raises(InvalidTrace):
            prepend_check(I, tr, 10, root_active)


class TestSequence:
    def test_m(self, root_active):
        tr = nu_to_sequence(M, root_active, 4)
        assert tr.depths() == [0, 1, 2, 3]
        assert truncate(tr.end, 4) == lam_tower(4)
        validate_trace(tr)
        assert check_strong_convergence(tr, 4).consistent

    def test_collapse_in_argument(self):
        tr = nu_to_sequence(app(var(0), OMEGA), Oracle.root_active(fuel=50), 2)
        assert [(s.position, s.rule) for s in tr.steps] == [((1,), RuleTag.BOT_U)]
        assert tr.steps[0].verdict.is_unknown

    def test_weak_head_prefix_runs_below_the_node(self, root_active):
        kio = "(\\a b. a) (\\z. z) ((\\x. x x) (\\x. x x))"
        t = parse_term(f"{kio} ({kio})")
        tr = nu_to_sequence(t, root_active, 4)
        assert tr.depths() == [2, 1, 0, 1, 0]
        validate_trace(tr)
        assert truncate(tr.end, 4) == FiniteTerm(LAM, (fv(0),))
        report = check_strong_convergence(tr, 3)
        assert report.consistent
        assert report.last_step[0] == 4
        for d in range(4):
            assert report.limits[d] == nu_tree_truncated(t, root_active, d)

    @pytest.mark.parametrize("name", ["y_f", "s", "ix_omega", "k_x_omega"])
    def test_stabilised_prefixes_match_the_tree(self, corpus, root_active, name):
        t = corpus.get(name)
        tr = nu_to_sequence(t, root_active, 6)
        report = check_strong_convergence(tr, 5)
        assert report.consistent
        for d in range(6):
            assert report.limits[d] == nu_tree_truncated(t, root_active, d)

    def test_strict_policy(self):
        strict = Oracle.root_active(fuel=20, policy=Policy.STRICT)
        with pytest.raises(FuelExhausted):
            nu_to_sequence(OMEGA, strict, 3)

    def test_realises_the_tree(self, corpus, root_active):
        for name in corpus.names():
            t = corpus.get(name)
            tr = nu_to_sequence(t, root_active, 6)
            assert truncate(tr.end, 6) == nu_tree_truncated(t, root_active, 6), name
