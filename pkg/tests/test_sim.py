import csv
from dataclasses import replace

import networkx as nx
import numpy as np
import pytest

from lottree.cpt import value, weight
from lottree.sim import campaign
from lottree.sim.campaign import (
    SimConfig,
    crossover,
    mean_solicitations,
    parse_config,
    run_campaign,
    solicitation_curve,
    solicitation_experiment,
    write_csv,
)
from lottree.sim.network import NetworkParams, generate_network, shuffled_null
from lottree.tree import dumps

SMALL_NET = dict(network_size=300, N0=30)


@pytest.fixture(scope="module")
def big_net():
    return generate_network(NetworkParams(), seed=1)


def test_seed_only_network():
    g = generate_network(NetworkParams(size=30, n0=30), seed=0)
    assert g.number_of_nodes() == 30
    assert nx.is_connected(g)
    # spanning tree plus n0 extra edges
    assert g.number_of_edges() == 29 + 30


def test_network_is_clustered(big_net):
    c = nx.average_clustering(big_net)
    null = np.mean([nx.average_clustering(shuffled_null(big_net, s)) for s in range(3)])
    assert c > 3 * null


def test_network_degree_tail(big_net):
    deg = np.array([d for _, d in big_net.degree()])
    assert deg.max() > 5 * deg.mean()


def test_network_reproducible():
    a = generate_network(NetworkParams(size=200), seed=4)
    b = generate_network(NetworkParams(size=200), seed=4)
    assert sorted(a.edges()) == sorted(b.edges())


def test_network_params_validated():
    with pytest.raises(ValueError):
        NetworkParams(size=10, n0=30)
    with pytest.raises(ValueError):
        NetworkParams(p_mr1=1.5)


def test_reproducible_outcome():
    cfg = SimConfig(N=25, **SMALL_NET)
    a, b = run_campaign(cfg, seed=9), run_campaign(cfg, seed=9)
    assert (a.solicitations_sent, a.participants, a.rounds, a.curve, a.seed) == (
        b.solicitations_sent,
        b.participants,
        b.rounds,
        b.curve,
        b.seed,
    )
    assert dumps(a.final_tree) == dumps(b.final_tree)
    assert a.tcp == b.tcp and a.acp == b.acp


def test_zero_interest():
    cfg = SimConfig(N=10, PIF=0.0, **SMALL_NET)
    out = run_campaign(cfg, seed=1)
    assert out.participants == 0
    # every message came from the crowdsourcer's pushes
    assert out.solicitations_sent == cfg.initial_set * out.rounds


def test_costless_joining():
    cfg = SimConfig(N=40, PIF=1.0, CP_min=0.0, CP_max=0.0, mechanism="sharing-pachira", **SMALL_NET)
    out = run_campaign(cfg, seed=2, record_decisions=True)
    assert out.participants == 40
    assert all(d.joined for d in out.decisions)


def test_costless_joining_limited_by_reach():
    cfg = SimConfig(N=40, PIF=1.0, CP_min=0.0, CP_max=0.0, mechanism="sharing-pachira", repush=False, initial_set=1, network_size=30, N0=30)
    out = run_campaign(cfg, seed=2)
    assert out.participants <= 30
    assert all(d.joined for d in run_campaign(cfg, seed=2, record_decisions=True).decisions)


def test_prefix_property():
    long = run_campaign(SimConfig(N=40, **SMALL_NET), seed=3)
    for n in (5, 12, 20):
        short = run_campaign(SimConfig(N=n, **SMALL_NET), seed=3)
        if short.participants == n:
            assert short.curve == long.curve[:n]
            assert short.solicitations_sent == solicitation_curve(long, [n])[0]


def test_conservation():
    for seed in range(5):
        out = run_campaign(SimConfig(N=30, **SMALL_NET), seed=seed)
        assert out.solicitations_sent >= out.participants
        assert all(a <= b for a, b in zip(out.curve, out.curve[1:]))


@pytest.mark.parametrize("mechanism", ["sharing-pachira", "1-pachira"])
def test_decisions_use_cpt_valuation(mechanism):
    cfg = SimConfig(N=30, mechanism=mechanism, **SMALL_NET)
    out = run_campaign(cfg, seed=5, record_decisions=True)
    assert out.decisions
    p = cfg.cpt()
    for d in out.decisions:
        L = min(max(d.lottery_value, 0.0), 1.0)
        want = value(p, cfg.B * L) if mechanism == "sharing-pachira" else value(p, cfg.B) * weight(p, L)
        assert d.perceived == pytest.approx(want, rel=1e-12)
        assert d.joined == (d.perceived > d.cost)


def test_parse_config():
    cfg = parse_config("# comment\nN = 12\nB = 5000\nrepush = no\nmechanism = k-pachira  # inline\n")
    assert (cfg.N, cfg.B, cfg.repush, cfg.mechanism) == (12, 5000.0, False, "k-pachira")
    assert cfg.spec().label == "10-pachira(C)"


@pytest.mark.parametrize(
    "text,where",
    [("N = x\n", "cfg:1:"), ("\nfoo = 1\n", "cfg:2:"), ("just words\n", "cfg:1:"), ("PIF = 2\n", "cfg"), ("repush = maybe\n", "cfg:1:")],
)
def test_parse_config_errors(text, where):
    with pytest.raises(ValueError, match=where):
        parse_config(text, "cfg")


def test_crossover_rule():
    lot = {5: 10, 6: 12, 7: 14, 8: 16}
    assert crossover(lot, {5: 8, 6: 11, 7: 15, 8: 18}) == 7
    assert crossover(lot, {5: 8, 6: 9, 7: 10, 8: 11}) is None
    assert crossover(lot, {5: 11, 6: 13, 7: 15, 8: 17}) is None
    assert crossover(lot, {5: 8, 6: 13, 7: 13, 8: 17}) == 8
    # never strictly cheaper before the switch: no crossover
    assert crossover(lot, {5: 10, 6: 12, 7: 15, 8: 18}) is None


def test_experiment_rows_and_csv(tmp_path):
    cfg = SimConfig(**SMALL_NET)
    rows = solicitation_experiment(cfg, budgets=(1000.0,), n_values=range(5, 8), repetitions=2)
    assert len(rows) == 3 * 3 * 2
    means = mean_solicitations(rows)
    assert set(means) == {(m, 1000.0) for m in ("1-pachira", "10-pachira", "sharing-pachira")}
    path = tmp_path / "out.csv"
    write_csv(rows[:4], path)
    write_csv(rows[4:], path, append=True)
    with open(path, newline="") as fh:
        table = list(csv.reader(fh))
    assert tuple(table[0]) == campaign.CSV_COLUMNS
    assert len(table) == 1 + len(rows)


def test_experiment_shares_agents_across_mechanisms():
    cfg = replace(SimConfig(**SMALL_NET), PIF=1.0, CP_min=0.0, CP_max=0.0)
    rows = solicitation_experiment(cfg, budgets=(1000.0,), n_values=[5], repetitions=1)
    # with costless joining the crowdsourcer's first push decides the same way everywhere
    assert len({r.solicitations for r in rows}) == 1
