import math
from decimal import Decimal, getcontext

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lottree.lottery import (
    FirstIsRoot,
    LotteryProfile,
    NoRescaling,
    PiParams,
    RescalingError,
    StructureDependent,
    TimeDependent,
    lottery_matrix,
    lottery_values,
    parse_rescaling,
    pi,
    profile_from_text,
    rescale,
    sybil_merge_value,
)
from lottree.tree import LotTree

P = PiParams()


def pi_decimal(c, beta="0.5", delta="0.08"):
    getcontext().prec = 50
    c, beta, delta = Decimal(str(c)), Decimal(beta), Decimal(delta)
    return float(beta * c + (1 - beta) * c ** (1 + delta))


def naive_lottery(tree, params=P):
    """L(u) from the definition, walking each subtree explicitly."""
    total = sum(tree.contributions())

    def sub(u):
        return tree.contribution(u) + sum(sub(v) for v in tree.children(u))

    w = {u: pi_decimal(sub(u) / total, str(params.beta), str(params.delta)) for u in tree.nodes}
    return {u: w[u] - sum(w[v] for v in tree.children(u)) for u in tree.nodes}


@st.composite
def trees(draw, max_nodes=12):
    n = draw(st.integers(1, max_nodes - 1))
    t = LotTree()
    for i in range(1, n + 1):
        parent = t.nodes[draw(st.integers(0, i - 1))]
        t.add_node(parent, draw(st.integers(1, 20)))
    return t


def test_pi_fixed_points():
    assert pi(P, 0) == 0.0
    assert pi(P, 1) == 1.0


def test_pi_half():
    assert pi(P, 0.5) == pytest.approx(0.48650, abs=1e-4)
    assert pi(P, 0.5) == pytest.approx(pi_decimal(0.5), abs=1e-14)


@pytest.mark.parametrize("c", [-0.1, 1.5])
def test_pi_domain(c):
    with pytest.raises(ValueError):
        pi(P, c)


@pytest.mark.parametrize("beta,delta", [(0, 0.08), (1, 0.08), (0.5, 0), (0.5, -1)])
def test_pi_params_validated(beta, delta):
    with pytest.raises(ValueError):
        PiParams(beta, delta)


def test_min_slope_and_convexity():
    xs = np.linspace(0, 1, 1001)
    ys = np.array([pi(P, x) for x in xs])
    assert np.diff(ys).min() / (xs[1] - xs[0]) >= P.beta - 1e-6
    assert np.all(np.diff(ys, 2) > 0)


def test_single_participant():
    t = LotTree()
    t.add_node("r", 7, "u")
    L = lottery_values(t)
    assert L["u"] == 1.0 and L["r"] == 0.0


def test_two_siblings():
    t = LotTree()
    t.add_node("r", 10, "a")
    t.add_node("r", 10, "b")
    L = lottery_values(t)
    assert L["a"] == pytest.approx(0.48650, abs=1e-4)
    assert L["a"] == pytest.approx(L["b"], abs=1e-15)
    assert L["r"] == pytest.approx(1 - 2 * pi_decimal(0.5), abs=1e-12)
    assert L["r"] == pytest.approx(0.02699, abs=1e-4)


@settings(max_examples=200, deadline=None)
@given(trees())
def test_normalization_and_naive_agreement(tree):
    L = lottery_values(tree)
    assert abs(L.total() - 1) < 1e-9
    naive = naive_lottery(tree)
    for u in tree.nodes:
        assert L[u] == pytest.approx(naive[u], abs=1e-12)
        assert L[u] >= -1e-12


@settings(max_examples=100, deadline=None)
@given(trees())
def test_batch_matches_scalar(tree):
    row = lottery_matrix(np.array(tree.parent_indices()), np.array([tree.contributions()]))[0]
    L = lottery_values(tree)
    assert np.allclose(row, [L[u] for u in tree.nodes], atol=1e-12)


def branching():
    t = LotTree()
    t.add_node("r", 10, "u1")
    t.add_node("r", 10, "u2")
    t.add_node("u1", 10, "u3")
    t.add_node("u1", 10, "u4")
    return t


def test_first_is_root_moves_root_value():
    t = branching()
    L = lottery_values(t)
    R = rescale(L, t, FirstIsRoot())
    assert L["r"] > 0
    assert R["u1"] == L["u1"] + L["r"]
    assert R["r"] == 0.0
    assert R.total() == pytest.approx(1, abs=1e-12)


def test_first_is_root_identity_when_root_empty():
    t = LotTree()
    t.add_node("r", 3, "u1")
    t.add_node("u1", 3, "u2")
    L = lottery_values(t)
    assert L["r"] == 0
    assert rescale(L, t, FirstIsRoot()).values == L.values


def test_time_and_structure_rescaling():
    t = branching()
    L = lottery_values(t)
    T = rescale(L, t, TimeDependent((1, 2), (0.25, 0.75)))
    assert T["u1"] == pytest.approx(L["u1"] + 0.25 * L["r"])
    assert T["u2"] == pytest.approx(L["u2"] + 0.75 * L["r"])
    S = rescale(L, t, StructureDependent(2))
    assert S["u3"] == pytest.approx(L["u3"] + L["r"] / 2)
    assert S["u1"] == L["u1"]
    assert rescale(L, t, NoRescaling()).values == L.values


def test_rescaling_errors():
    t = LotTree()
    t.add_node("r", 1)
    L = lottery_values(t)
    with pytest.raises(RescalingError):
        rescale(L, t, TimeDependent((1, 2)))
    with pytest.raises(RescalingError):
        rescale(L, t, StructureDependent(2))
    with pytest.raises(ValueError):
        TimeDependent((1, 2), (0.5, 0.6))


@settings(max_examples=60, deadline=None)
@given(trees(max_nodes=9))
def test_apply_matrix_matches_apply(tree):
    L = lottery_values(tree)
    row = np.array([[L[u] for u in tree.nodes]])
    parents = np.array(tree.parent_indices())
    strategies = [NoRescaling(), FirstIsRoot(), StructureDependent(1)]
    if len(tree) > 2:
        strategies.append(TimeDependent())
    for s in strategies:
        scalar = s.apply(L, tree)
        batch = s.apply_matrix(row, parents)[0]
        assert np.allclose(batch, [scalar[u] for u in tree.nodes], atol=1e-15), s.name


def split_chain(tree, node, parts):
    """Replace ``node`` by a chain of replicas; its children move to the deepest."""
    out = LotTree(tree.root)
    ids = [f"{node}_{i + 1}" for i in range(len(parts))]
    for u in tree.participants:
        p = tree.parent(u)
        if u == node:
            prev = p
            for rid, c in zip(ids, parts):
                out.add_node(prev, c, rid)
                prev = rid
            continue
        out.add_node(ids[-1] if p == node else p, tree.contribution(u), u)
    return out, ids


@pytest.mark.parametrize("parts", [(10,), (4, 6), (1, 9), (2, 3, 5), (1, 1, 1, 7)])
def test_chain_split_preserves_value(parts):
    t = branching()
    before = lottery_values(t)["u1"]
    split, ids = split_chain(t, "u1", parts)
    assert sybil_merge_value(split, ids) == pytest.approx(before, abs=1e-12)


def test_profile_text_round_trip():
    L = lottery_values(branching())
    back = profile_from_text(L.to_text())
    assert back.values == L.values
    with pytest.raises(ValueError):
        profile_from_text("u1\n")


def test_parse_rescaling():
    assert parse_rescaling("first-is-root").name == "first-is-root"
    with pytest.raises(ValueError):
        parse_rescaling("bogus")
    assert isinstance(LotteryProfile({"r": 1.0}, "r").participants(), dict)
