"""Tests for the relational IR: evaluation, spec checking, oracle, printing."""

from __future__ import annotations

import random

import pytest

from _treegen import TreeGen, bounded_language, fsa_from_paths, make_env
from rela.automata import (
    SymbolTable, accepts, enumerate_shortest, is_empty,
)
from rela.rir import (
    And, Complement, Compose, Concat, Cross, Equal, Evaluator, Identity,
    Image, Intersect, Not, One, Or, OracleEnv, PostState, PreState,
    RelConcat, RelOne, RelStar, RelUnion, RelZero, SnapshotPair, Star,
    Subset, Sym, SymSet, Union, Zero, check_spec, eval_pathset, eval_rel,
    oracle_eval_pathset, pretty,
)


def small_world():
    t = SymbolTable()
    a, b, c = t.location("a"), t.location("b"), t.location("c")
    u = t.universe()
    pre = frozenset({(a,), (a, b)})
    post = frozenset({(a,), (b, c)})
    env = SnapshotPair(fsa_from_paths(pre, u), fsa_from_paths(post, u))
    oenv = OracleEnv(pre, post, tuple(sorted(u)))
    return t, (a, b, c), env, oenv


def paths_of(fsa, limit=50):
    return set(enumerate_shortest(fsa, limit).render())


# ---------------------------------------------------------------------------
# eval_pathset


def test_leaves():
    t, (a, b, c), env, _ = small_world()
    assert paths_of(eval_pathset(Sym(a), env)) == {"a"}
    assert paths_of(eval_pathset(One(), env)) == {""}
    assert is_empty(eval_pathset(Zero(), env))
    assert paths_of(eval_pathset(PreState(), env)) == {"a", "a b"}
    assert paths_of(eval_pathset(PostState(), env)) == {"a", "b c"}


def test_symbol_class_leaf():
    t, (a, b, c), env, oenv = small_world()
    expr = SymSet(frozenset({a, c}))
    assert paths_of(eval_pathset(expr, env)) == {"a", "c"}
    assert oracle_eval_pathset(expr, oenv, 2) == {(a,), (c,)}
    # one leaf, same language as the union of its members
    assert paths_of(eval_pathset(Union(Sym(a), Sym(c)), env)) == \
        paths_of(eval_pathset(expr, env))


def test_union_concat_star():
    t, (a, b, c), env, _ = small_world()
    m = eval_pathset(Union(Sym(a), Concat(Sym(b), Sym(c))), env)
    assert paths_of(m) == {"a", "b c"}
    s = eval_pathset(Star(Sym(a)), env)
    assert accepts(s, ()) and accepts(s, (a, a, a))
    assert not accepts(s, (b,))


def test_intersect_with_complement_of_one():
    # a* with the empty path removed: the non-empty runs of a.
    t, (a, b, c), env, _ = small_world()
    m = eval_pathset(Intersect(Star(Sym(a)), Complement(One())), env)
    got = enumerate_shortest(m, 3)
    assert got.render() == ["a", "a a", "a a a"]
    assert got.truncated


def test_image_of_cross():
    # Image(PreState, D x P): pre holds a D-path, so the image is all of P.
    t, (a, b, c), env, _ = small_world()
    d = Sym(a)
    p = Union(Sym(b), Sym(c))
    img = eval_pathset(Image(PreState(), Cross(d, p)), env)
    assert paths_of(img) == {"b", "c"}
    # No pre-path lies in the domain: empty image.
    img2 = eval_pathset(Image(PreState(), Cross(Sym(c), p)), env)
    assert is_empty(img2)


def test_image_of_identity_filters():
    t, (a, b, c), env, _ = small_world()
    img = eval_pathset(Image(PreState(), Identity(Sym(a))), env)
    assert paths_of(img) == {"a"}


def test_compose_and_relstar():
    t, (a, b, c), env, _ = small_world()
    swap = Compose(Cross(Sym(a), Sym(b)), Cross(Sym(b), Sym(c)))
    img = eval_pathset(Image(Sym(a), swap), env)
    assert paths_of(img) == {"c"}
    stretch = RelStar(Cross(Sym(a), Sym(b)))
    img2 = eval_pathset(Image(Concat(Sym(a), Sym(a)), stretch), env)
    assert paths_of(img2) == {"b b"}


def test_relconcat_pairs_componentwise():
    t, (a, b, c), env, _ = small_world()
    r = RelConcat(Cross(Sym(a), Sym(b)), Identity(Sym(c)))
    img = eval_pathset(Image(Concat(Sym(a), Sym(c)), r), env)
    assert paths_of(img) == {"b c"}


def test_complement_excludes_markers_from_universe():
    t, (a, b, c), env, _ = small_world()
    mk = t.fresh_marker()
    # ~0 is the full universe closure; marker strings are not in it.
    full = eval_pathset(Complement(Zero()), env)
    assert accepts(full, (a, b))
    assert not accepts(full, (mk,))


# ---------------------------------------------------------------------------
# Memoization


def test_ground_cache_shared_across_envs():
    t, (a, b, c), env, oenv = small_world()
    cache: dict = {}
    expr = Star(Union(Sym(a), Sym(b)))
    first = eval_pathset(expr, env, cache)
    pre2 = fsa_from_paths(frozenset({(c,)}), env.universe)
    env2 = SnapshotPair(pre2, pre2)
    second = eval_pathset(expr, env2, cache)
    assert first is second


def test_snapshot_expressions_not_ground():
    assert not PreState().ground
    assert not Union(Sym(SymbolTable().location("x")), PostState()).ground
    assert Star(One()).ground
    assert not Image(One(), Cross(PreState(), One())).ground


def test_structurally_equal_subtrees_evaluate_once():
    t, (a, b, c), env, _ = small_world()
    ev = Evaluator(env)
    e1 = Union(Sym(a), Sym(b))
    e2 = Union(Sym(a), Sym(b))
    assert ev.pathset(e1) is ev.pathset(e2)


def test_snapshot_pair_rejects_mismatched_universes():
    t = SymbolTable()
    a = t.location("a")
    u1 = t.universe()
    b = t.location("b")
    u2 = t.universe()
    with pytest.raises(ValueError):
        SnapshotPair(fsa_from_paths(frozenset({(a,)}), u1),
                     fsa_from_paths(frozenset({(b,)}), u2))


# ---------------------------------------------------------------------------
# check_spec


def test_equal_holds():
    t, (a, b, c), env, _ = small_world()
    v = check_spec(Equal(PreState(), PreState()), env)
    assert v.holds and v.witnesses == ()


def test_equal_fails_with_two_sided_witnesses():
    t, (a, b, c), env, _ = small_world()
    v = check_spec(Equal(PreState(), PostState()), env)
    assert not v.holds
    (w,) = v.witnesses
    assert paths_of(w.missing) == {"a b"}
    assert paths_of(w.unexpected) == {"b c"}


def test_subset_one_sided_witness():
    t, (a, b, c), env, _ = small_world()
    v = check_spec(Subset(PreState(), Sym(a)), env)
    assert not v.holds
    (w,) = v.witnesses
    assert paths_of(w.missing) == {"a b"}
    assert w.unexpected is None
    assert check_spec(Subset(Sym(a), PreState()), env).holds


def test_not_failure_yields_no_witnesses():
    t, (a, b, c), env, _ = small_world()
    v = check_spec(Not(Equal(PreState(), PreState())), env)
    assert not v.holds
    assert v.witnesses == ()


def test_double_negation_restores_witnesses():
    t, (a, b, c), env, _ = small_world()
    v = check_spec(Not(Not(Equal(PreState(), PostState()))), env)
    assert not v.holds
    assert len(v.witnesses) == 1


def test_and_blames_only_failing_branch():
    t, (a, b, c), env, _ = small_world()
    good = Equal(PreState(), PreState())
    bad = Equal(PreState(), PostState())
    v = check_spec(And(good, bad), env)
    assert not v.holds
    assert len(v.witnesses) == 1
    assert v.witnesses[0].leaf == bad


def test_or_blames_both_branches():
    t, (a, b, c), env, _ = small_world()
    bad1 = Equal(PreState(), PostState())
    bad2 = Subset(PreState(), Zero())
    v = check_spec(Or(bad1, bad2), env)
    assert not v.holds
    assert {type(w.leaf) for w in v.witnesses} == {Equal, Subset}


def test_or_holding_collects_nothing():
    t, (a, b, c), env, _ = small_world()
    v = check_spec(Or(Equal(PreState(), PostState()),
                      Equal(One(), One())), env)
    assert v.holds and v.witnesses == ()


# ---------------------------------------------------------------------------
# Oracle


def test_oracle_simple_sets():
    t, (a, b, c), env, oenv = small_world()
    got = oracle_eval_pathset(Union(PreState(), Sym(c)), oenv, 4)
    assert got == {(a,), (a, b), (c,)}


def test_oracle_complement_is_bounded_universe_difference():
    t, (a, b, c), env, oenv = small_world()
    got = oracle_eval_pathset(Complement(PreState()), oenv, 1)
    # All strings of length <= 1 except (a,): the empty path and the
    # three other singletons (universe includes drop).
    assert (a,) not in got
    assert () in got
    assert len(got) == 4


def test_oracle_image():
    t, (a, b, c), env, oenv = small_world()
    got = oracle_eval_pathset(
        Image(PreState(), Cross(Sym(a), Union(Sym(b), Sym(c)))), oenv, 4)
    assert got == {(b,), (c,)}


def test_oracle_relstar_and_compose():
    t, (a, b, c), env, oenv = small_world()
    expr = Image(Star(Sym(a)), RelStar(Cross(Sym(a), Sym(b))))
    got = oracle_eval_pathset(expr, oenv, 3)
    assert got == {(), (b,), (b, b), (b, b, b)}
    expr2 = Image(Sym(a), Compose(Cross(Sym(a), Sym(b)),
                                  Cross(Sym(b), Sym(c))))
    assert oracle_eval_pathset(expr2, oenv, 3) == {(c,)}


def test_oracle_maxlen_guard():
    t, (a, b, c), env, oenv = small_world()
    with pytest.raises(ValueError):
        oracle_eval_pathset(One(), oenv, 9)


def test_randomized_oracle_agreement_small():
    # A slice of the big agreement run in the acceptance suite.
    rng = random.Random(20240811)
    for _ in range(150):
        table, symbols, env, oenv, env_ml = make_env(rng)
        gen = TreeGen(rng, symbols, env_ml, bound=6)
        expr = gen.tree(depth=4)
        want = oracle_eval_pathset(expr, oenv, 6)
        got = bounded_language(eval_pathset(expr, env), 6)
        assert got == want, f"disagreement on {pretty(expr)}"


# ---------------------------------------------------------------------------
# Rendering


def test_pretty_pathsets():
    t = SymbolTable()
    a, b = t.location("a"), t.location("b")
    assert pretty(Union(Sym(a), Union(Sym(b), One()))) == "(a | b | 1)"
    assert pretty(Concat(Sym(a), Star(Sym(b)))) == "a b*"
    assert pretty(Complement(Union(Sym(a), Sym(b)))) == "~((a | b))"
    assert pretty(Image(PreState(), Identity(Sym(a)))) == "(PreState ▷ I(a))"
    assert pretty(SymSet(frozenset({a, b}))) == "(a | b)"
    wide = SymSet(frozenset(t.location(f"r{i}") for i in range(9)))
    assert pretty(wide) == "[9 locations]"


def test_pretty_relations_and_specs():
    t = SymbolTable()
    a, b = t.location("a"), t.location("b")
    r = RelUnion(Identity(Sym(a)), Cross(Sym(a), Sym(b)))
    assert pretty(r) == "(I(a) | (a × b))"
    assert pretty(RelConcat(Identity(Sym(a)), RelStar(Cross(Sym(a), Sym(b))))) \
        == "I(a) (a × b)*"
    s = And(Equal(PreState(), PostState()), Not(Subset(One(), Zero())))
    assert pretty(s) == "(PreState = PostState ∧ ¬(1 ⊆ 0))"
    assert pretty(Compose(RelOne(), RelZero())) == "(1 ∘ 0)"