import pytest

from lottree.tree import (
    DegenerateTreeError,
    LotTree,
    TreeError,
    aggregate,
    build_tree,
    dumps,
    loads,
    mutate_contribution,
    read_tree,
    write_tree,
)


def branching():
    t = LotTree()
    t.add_node("r", 10, "u1")
    t.add_node("r", 10, "u2")
    t.add_node("u1", 10, "u3")
    t.add_node("u1", 10, "u4")
    return t


def chain():
    return build_tree([("a", "r", 5), ("b", "a", 7)])


def test_first_participant_gets_order_one():
    t = LotTree()
    t.add_node("r", 10, "u1")
    assert t.join_order("u1") == 1
    assert t.join_order("r") is None


def test_branching_parent_map():
    t = branching()
    assert {u: t.parent(u) for u in t.participants} == {"u1": "r", "u2": "r", "u3": "u1", "u4": "u1"}
    assert [t.join_order(u) for u in ("u1", "u2", "u3", "u4")] == [1, 2, 3, 4]


def test_zero_contribution_accepted():
    t = LotTree()
    t.add_node("r", 0, "u1")
    assert t.contribution("u1") == 0


@pytest.mark.parametrize("bad", [-1, float("nan"), float("inf")])
def test_bad_contribution_rejected(bad):
    with pytest.raises(TreeError):
        LotTree().add_node("r", bad)


def test_unknown_parent_and_duplicate_id():
    t = LotTree()
    with pytest.raises(TreeError):
        t.add_node("ghost", 1)
    t.add_node("r", 1, "x")
    with pytest.raises(TreeError):
        t.add_node("r", 1, "x")


def test_chain_aggregate():
    agg = aggregate(chain())
    assert agg.subtree_contribution == {"b": 7, "a": 12, "r": 12}
    assert agg.total == 12


@pytest.mark.parametrize("k,c", [(1, 3.0), (4, 2.5), (9, 1.0)])
def test_star_aggregate(k, c):
    t = LotTree()
    for _ in range(k):
        t.add_node("r", c)
    assert aggregate(t).subtree_contribution["r"] == pytest.approx(k * c)


def test_three_node_total():
    t = build_tree([("u1", "r", 10), ("u2", "r", 10)])
    assert aggregate(t).total == 20


def test_degenerate_tree():
    with pytest.raises(DegenerateTreeError):
        aggregate(LotTree())
    t = LotTree()
    t.add_node("r", 0)
    with pytest.raises(DegenerateTreeError):
        aggregate(t)


def test_mutate_contribution():
    t = chain()
    assert aggregate(mutate_contribution(t, "b", 7)).total == 12
    assert aggregate(mutate_contribution(t, "b", 9)).total == 14
    assert aggregate(mutate_contribution(t, "b", 0)).total == 5
    # the original is untouched
    assert t.contribution("b") == 7
    with pytest.raises(TreeError):
        mutate_contribution(t, "r", 3)


def test_queries():
    t = branching()
    assert t.children("u1") == ["u3", "u4"]
    assert t.depth("u4") == 2
    assert sorted(t.subtree("u1")) == ["u1", "u3", "u4"]
    assert t.node_at(2) == "u2"


def test_from_arrays_requires_earlier_parents():
    with pytest.raises(TreeError):
        LotTree.from_arrays([-1, 2, 0], [0, 1, 1])
    t = LotTree.from_arrays([-1, 0, 1], [0, 3, 4])
    assert t.parent("u2") == "u1"


def test_round_trip(tmp_path):
    t = branching()
    t.add_node("u3", 2.5, "u5")
    assert dumps(loads(dumps(t))) == dumps(t)
    path = tmp_path / "t.txt"
    write_tree(t, path)
    back = read_tree(path)
    assert back.nodes == t.nodes
    assert back.contributions() == t.contributions()


def test_loads_accepts_any_line_order_and_comments():
    text = "# a tree\nu2 u1 4 2\nr - 0 -\n\nu1 r 3 1\n"
    t = loads(text)
    assert t.parent("u2") == "u1" and t.contribution("u1") == 3


@pytest.mark.parametrize(
    "text,where",
    [
        ("r - 0 -\nu1 r x 1\n", ":2:"),
        ("r - 0 -\nu1 r 1\n", ":2:"),
        ("u1 r 1 1\n", "no root"),
        ("r - 0 -\nu1 r 1 2\n", ":2:"),
        ("r - 5 -\n", ":1:"),
        ("r - 0 -\nu1 zz 1 1\n", ":2:"),
    ],
)
def test_loads_errors_carry_location(text, where):
    with pytest.raises(TreeError, match=where):
        loads(text, source="f")
