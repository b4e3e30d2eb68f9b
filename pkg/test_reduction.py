"""
Tests for the reduction engine: substitution, redex search, steps,
strategies, postponement, strong convergence and trace files
"""

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import eager_subst, finite_terms, lam_tower
from term_core import (
    APP, FINITE_BOT, LAM, FiniteTerm, Kind, NodeKind, TermError, Tri, app,
    bisim_up_to, bot, iter_preorder, lam, lift, node_at, truncate, var,
)
from syntax import parse_term
from reduction import (
    InvalidTrace, NotARedex, Policy, RuleTag, Step, Strategy, StrategyKind,
    Trace, check_strong_convergence, head_redex_position, postpone_bot,
    redexes, reduce, replay_trace, step_at, subst, trace_from_jsonl,
    trace_to_jsonl, validate_trace, whnf_step,
)
from meaningless import Oracle, par_bot_up_to
from corpus import random_finite_term

I = lam(var(0))
OMEGA = parse_term("(\\x. x x) (\\x. x x)")
M = parse_term("(\\m x. m m) (\\m x. m m)")


def full(t):
    return truncate(t, 64)


class TestSubstitution:
    def test_identity_body(self):
        assert full(subst(var(0), I)) == full(I)

    def test_lifts_under_binder(self):
        # (\. 1) with Var 0 := Var 0 gives \. 1
        assert full(subst(lam(var(1)), var(0))) == FiniteTerm(LAM, (FiniteTerm(NodeKind.var(1)),))

    def test_larger_indices_drop(self):
        assert full(subst(app(var(0), var(2)), I)) == full(app(I, var(1)))

    @given(finite_terms(), finite_terms())
    def test_matches_eager_substitution(self, s, t):
        assert full(subst(s.to_coterm(), t.to_coterm())) == eager_subst(s, t)

    @settings(max_examples=200)
    @given(finite_terms(), finite_terms(max_leaves=4), finite_terms(max_leaves=4))
    def test_substitution_lemma(self, s, t, u):
        sc, tc, uc = s.to_coterm(), t.to_coterm(), u.to_coterm()
        left = subst(subst(sc, tc, 0), uc, 0)
        right = subst(subst(sc, lift(uc, 0, 1), 1), subst(tc, uc, 0), 0)
        assert full(left) == full(right)

    def test_infinite_argument(self):
        ogre = parse_term("mu O. \\x. O")
        t = subst(app(var(0), var(0)), ogre)
        assert truncate(t, 4) == FiniteTerm(APP, (lam_tower(3), lam_tower(3)))


class TestRedexes:
    def test_positions_in_preorder(self):
        t = parse_term("(\\x. x) ((\\y. y) z)", allow_open=True)
        found = redexes(t, 4)
        assert [(p, r) for p, r, _ in found] == [((), RuleTag.BETA), ((1,), RuleTag.BETA)]

    def test_bottom_redex_before_beta(self, root_active):
        found = redexes(OMEGA, 1, root_active)
        assert [(p, r) for p, r, _ in found] == [((), RuleTag.BOT_U), ((), RuleTag.BETA)]
        assert found[0][2].is_unknown

    def test_unknown_argument(self):
        t = app(var(0), OMEGA)
        found = redexes(t, 4, Oracle.root_active(fuel=50))
        assert any(p == (1,) and r is RuleTag.BOT_U and v.is_unknown for p, r, v in found)

    def test_bottom_is_not_a_bottom_redex(self, root_active):
        assert redexes(bot(), 3, root_active) == []

    def test_depth_bound(self):
        t = parse_term("\\x. \\y. (\\z. z) y")
        assert redexes(t, 2) == []
        assert [p for p, _, _ in redexes(t, 3)] == [(0, 0)]


class TestSteps:
    def test_beta_at_root(self):
        assert full(step_at(app(I, var(0)), (), RuleTag.BETA)) == full(var(0))

    def test_beta_inside(self):
        t = lam(app(I, var(0)))
        assert full(step_at(t, (0,), RuleTag.BETA)) == full(lam(var(0)))

    def test_not_a_redex(self):
        with pytest.raises(NotARedex):
            step_at(I, (), RuleTag.BETA)
        with pytest.raises(NotARedex):
            step_at(I, (0, 0), RuleTag.BETA)

    def test_bottom_step_needs_admitted_verdict(self):
        assert step_at(OMEGA, (), RuleTag.BOT_U, verdict=Tri.unknown("fuel")).node.kind is Kind.BOT
        with pytest.raises(NotARedex):
            step_at(OMEGA, (), RuleTag.BOT_U, verdict=Tri.unknown("fuel"), policy=Policy.STRICT)
        with pytest.raises(NotARedex):
            step_at(I, (), RuleTag.BOT_U, verdict=Tri.no())
        with pytest.raises(NotARedex):
            step_at(OMEGA, (), RuleTag.BOT_U)

    def test_bottom_step_with_oracle(self):
        t = app(var(0), OMEGA)
        result = step_at(t, (1,), RuleTag.BOT_U, oracle=Oracle.root_active(fuel=20))
        assert truncate(result, 3) == FiniteTerm(APP, (FiniteTerm(NodeKind.var(0)), FINITE_BOT))
        with pytest.raises(NotARedex):
            step_at(t, (1,), RuleTag.BOT_U, oracle=Oracle.root_active(fuel=20, policy=Policy.STRICT))

    def test_bottom_is_already_normal(self):
        with pytest.raises(NotARedex):
            step_at(bot(), (), RuleTag.BOT_U, verdict=Tri.yes())

    def test_whnf_step(self):
        assert whnf_step(I) is None
        assert whnf_step(var(0)) is None
        assert whnf_step(app(var(0), OMEGA)) is None
        assert bisim_up_to(whnf_step(OMEGA), OMEGA, 20)
        t = app(app(I, I), var(0))
        assert head_redex_position(t) == (0,)
        assert full(whnf_step(t)) == full(app(I, var(0)))

    def test_whnf_step_deterministic(self, corpus):
        for name in corpus.names():
            t = corpus.get(name)
            first, second = whnf_step(t), whnf_step(t)
            assert (first is None) == (second is None)
            if first is not None:
                assert bisim_up_to(first, second, 12)


class TestStepLocality:
    @settings(max_examples=60)
    @given(st.integers(0, 2 ** 32), st.integers(3, 14))
    def test_positions_outside_the_redex_keep_their_nodes(self, seed, size):
        ra = Oracle.root_active(fuel=30)
        t = app(random_finite_term(np.random.default_rng(seed), size).to_coterm(), OMEGA)
        for p, rule, _ in redexes(t, 8, ra):
            result = step_at(t, p, rule, oracle=ra)
            for q, sub in iter_preorder(t, 10):
                if q[:len(p)] != p:
                    assert node_at(result, q) == sub.node, (p, q)

    @settings(max_examples=60)
    @given(st.integers(0, 2 ** 32), st.integers(3, 14), st.integers(1, 8))
    def test_beta_step_commutes_with_substitution(self, seed, size, arg_size):
        rng = np.random.default_rng(seed)
        s = random_finite_term(rng, size, frame=1).to_coterm()
        t = random_finite_term(rng, arg_size, frame=2).to_coterm()
        image = subst(s, t, 0)
        for p, rule, _ in redexes(s, 8):
            assert rule is RuleTag.BETA
            reduct = step_at(s, p, RuleTag.BETA)
            assert full(step_at(image, p, RuleTag.BETA)) == full(subst(reduct, t, 0))


class TestStrategies:
    def test_parse(self):
        assert Strategy.parse("lo").kind is StrategyKind.LEFTMOST_OUTERMOST
        assert Strategy.parse("wh").kind is StrategyKind.WEAK_HEAD
        assert Strategy.parse("bf").kind is StrategyKind.BOTTOM_FIRST
        s = Strategy.parse("random:0x10")
        assert (s.kind, s.seed) == (StrategyKind.RANDOM_REDEX, 16)
        with pytest.raises(TermError):
            Strategy.parse("innermost")

    def test_leftmost_outermost(self):
        t = app(I, app(I, var(0)))
        tr = reduce(t, Strategy(StrategyKind.LEFTMOST_OUTERMOST), 10)
        assert len(tr) == 2
        assert [s.position for s in tr.steps] == [(), ()]
        assert full(tr.end) == full(var(0))

    def test_weak_head_descends_into_abstractions(self):
        tr = reduce(M, Strategy(StrategyKind.WEAK_HEAD, depth_bound=32), 3)
        assert tr.depths() == [0, 1, 2]
        assert truncate(tr.end, 3) == lam_tower(3)

    def test_omega_loops_at_root(self):
        tr = reduce(OMEGA, Strategy(StrategyKind.LEFTMOST_OUTERMOST), 10)
        assert tr.depths() == [0] * 10
        assert bisim_up_to(tr.end, OMEGA, 20)

    def test_random_is_reproducible(self):
        t = parse_term("(\\x. x x) ((\\y. y) (\\z. (\\w. w) z))")
        a = reduce(t, Strategy(StrategyKind.RANDOM_REDEX, seed=7), 6)
        b = reduce(t, Strategy(StrategyKind.RANDOM_REDEX, seed=7), 6)
        assert [s.position for s in a.steps] == [s.position for s in b.steps]
        assert bisim_up_to(a.end, b.end, 16)

    def test_bottom_first(self, root_active):
        t = app(var(0), OMEGA)
        tr = reduce(t, Strategy(StrategyKind.BOTTOM_FIRST), 3, root_active)
        assert [(s.position, s.rule) for s in tr.steps] == [((1,), RuleTag.BOT_U)]

    def test_strict_policy_never_assumes(self):
        t = app(var(0), OMEGA)
        strict = Oracle.root_active(fuel=20, policy=Policy.STRICT)
        tr = reduce(t, Strategy(StrategyKind.BOTTOM_FIRST), 3, strict)
        assert all(s.rule is RuleTag.BETA for s in tr.steps)

    def test_negative_budget(self):
        with pytest.raises(TermError):
            reduce(I, Strategy(StrategyKind.LEFTMOST_OUTERMOST), -1)


def _mixed_trace():
    """App(I, omega) -botU@1-> App(I, bot) -beta@root-> bot"""
    t0 = app(I, OMEGA)
    t1 = step_at(t0, (1,), RuleTag.BOT_U, verdict=Tri.unknown("fuel"))
    t2 = step_at(t1, (), RuleTag.BETA)
    steps = (Step((1,), RuleTag.BOT_U, 1, t1, Tri.unknown("fuel")), Step((), RuleTag.BETA, 0, t2))
    return Trace(t0, steps)


class TestPostponement:
    def test_beta_steps_move_first(self, root_active):
        tr = _mixed_trace()
        beta, (r, end) = postpone_bot(tr)
        assert [(s.position, s.rule) for s in beta.steps] == [((), RuleTag.BETA)]
        assert bisim_up_to(r, OMEGA, 10)
        assert end.node.kind is Kind.BOT
        assert par_bot_up_to(r, end, 12, root_active).is_yes
        validate_trace(beta)

    def test_pure_beta_trace_unchanged(self):
        tr = reduce(app(I, app(I, var(0))), Strategy(StrategyKind.LEFTMOST_OUTERMOST), 5)
        beta, (r, end) = postpone_bot(tr)
        assert len(beta) == len(tr)
        assert bisim_up_to(r, end, 10)

    def test_rejects_bottom_step_with_no_verdict(self):
        t0 = app(I, var(0))
        bad = Trace(t0, (Step((), RuleTag.BOT_U, 0, bot(), Tri.no()),))
        with pytest.raises(InvalidTrace):
            postpone_bot(bad)

    def test_random_mixed_traces(self, root_active):
        from corpus import random_finite_term, random_mixed_trace
        rng = np.random.default_rng(3)
        for _ in range(20):
            t = random_finite_term(rng, 12).to_coterm()
            tr = random_mixed_trace(rng, app(t, OMEGA), 6, root_active)
            beta, (r, end) = postpone_bot(tr)
            validate_trace(beta)
            assert all(s.rule is RuleTag.BETA for s in beta.steps)
            assert par_bot_up_to(r, end, 12, root_active).is_yes


class TestValidation:
    def test_validate_accepts_recorded_trace(self):
        validate_trace(_mixed_trace())

    def test_validate_rejects_wrong_result(self):
        tr = _mixed_trace()
        broken = Trace(tr.start, (tr.steps[0], Step((), RuleTag.BETA, 0, var(3))))
        with pytest.raises(InvalidTrace):
            validate_trace(broken)

    def test_validate_rejects_wrong_depth(self):
        t = app(I, var(0))
        with pytest.raises(InvalidTrace):
            validate_trace(Trace(t, (Step((), RuleTag.BETA, 2, var(0)),)))


class TestStrongConvergence:
    def test_omega_never_stabilises(self):
        tr = reduce(OMEGA, Strategy(StrategyKind.LEFTMOST_OUTERMOST), 10)
        report = check_strong_convergence(tr, 4)
        assert report.last_step[0] == 9
        assert not report.stabilized[0]
        assert report.stable_depth == -1

    def test_ogre_tower_stabilises_per_depth(self):
        tr = reduce(M, Strategy(StrategyKind.WEAK_HEAD, depth_bound=32), 16)
        assert tr.depths() == list(range(16))
        report = check_strong_convergence(tr, 15)
        assert report.consistent
        for d in range(16):
            assert report.last_step[d] == d
            assert report.limits[d] == lam_tower(d)
        assert all(report.stabilized[:15])
        assert not report.stabilized[15]

    def test_empty_trace(self):
        report = check_strong_convergence(Trace(I), 3)
        assert report.last_step == [None] * 4
        assert all(report.stabilized)
        assert report.limits[1] == FiniteTerm(LAM, (FINITE_BOT,))

    def test_frame(self):
        tr = reduce(M, Strategy(StrategyKind.WEAK_HEAD, depth_bound=32), 4)
        frame = check_strong_convergence(tr, 3).to_frame()
        assert list(frame.columns) == ["depth", "last_step", "stabilized", "limit"]
        assert list(frame["last_step"]) == [0, 1, 2, 3]


class TestTraceFiles:
    def test_round_trip(self):
        tr = reduce(M, Strategy(StrategyKind.WEAK_HEAD, depth_bound=32), 5)
        text = trace_to_jsonl(tr, 8, {"seed": 1})
        lines = text.splitlines()
        header = json.loads(lines[0])
        assert header["type"] == "header"
        assert header["steps"] == 5
        assert header["config"] == {"seed": 1}
        assert json.loads(lines[2])["pos"] == "0"

        loaded, loaded_header = trace_from_jsonl(text)
        assert loaded_header["snapshot_depth"] == 8
        assert [s.position for s in loaded.steps] == [s.position for s in tr.steps]
        replayed = replay_trace(tr.start, loaded)
        validate_trace(replayed)
        assert bisim_up_to(replayed.end, tr.end, 16)

    def test_verdict_recorded_for_bottom_steps(self):
        text = trace_to_jsonl(_mixed_trace(), 6)
        record = json.loads(text.splitlines()[1])
        assert record["rule"] == "botU"
        assert record["verdict"]["verdict"] == "unknown"
        loaded, _ = trace_from_jsonl(text)
        assert loaded.steps[0].verdict.is_unknown

    def test_missing_header(self):
        with pytest.raises(InvalidTrace):
            trace_from_jsonl('{"i":0}\n')

    @pytest.mark.parametrize("text", [
        "not json\n",
        "[1, 2]\n",
        '"header"\n',
        '{"type":"header","start":{"k":"bot"}}\n7\n',
        '{"type":"header","start":{"k":"bot"}}\n{"i":0,"pos":"","rule":"beta","depth":0,"snapshot":[]}\n',
    ])
    def test_malformed_records(self, text):
        with pytest.raises(InvalidTrace):
            trace_from_jsonl(text)

    def test_serialisation_is_stable(self):
        tr = reduce(M, Strategy(StrategyKind.WEAK_HEAD, depth_bound=32), 3)
        assert trace_to_jsonl(tr, 6) == trace_to_jsonl(tr, 6)

    @settings(max_examples=30)
    @given(st.integers(0, 2 ** 32))
    def test_replay_of_random_traces(self, seed):
        t = parse_term("(\\x. x x) ((\\y. y) (\\z. (\\w. w) z))")
        tr = reduce(t, Strategy(StrategyKind.RANDOM_REDEX, seed=seed), 5)
        loaded, _ = trace_from_jsonl(trace_to_jsonl(tr, 10))
        assert bisim_up_to(replay_trace(t, loaded).end, tr.end, 12)
