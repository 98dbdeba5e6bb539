"""Round-synchronous recruitment campaigns on a social network.

Each round, every agent holding a solicitation decides once: it is
interested with probability PIF, values joining under its solicitor with
prospect theory, and joins if that beats its participation cost.  A new
participant then predicts how many neighbours would follow
(round(degree * PIF) newcomers of average contribution under it) and
solicits all its not-yet-joined neighbours if the perceived gain beats its
solicitation cost.  Messages sent in one round are handled in the next.

A run is a deterministic function of its seed.  Per-agent attributes are
drawn up front, so a campaign that needs N participants is an exact
prefix of one that needs more; ``solicitation_curve`` exploits this.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

from ..cpt import CptParams, perceived_reward
from ..lottery import FirstIsRoot, PiParams, lottery_values
from ..mechanisms import MechanismSpec
from ..tree import LotTree
from .network import NetworkParams, generate_network


# What a participant compares soliciting against: nobody joining (default),
# or the predicted newcomers joining anyway as a separate branch under the root.
SOLICIT_BASELINES = ("separate-branch", "none")


@dataclass(frozen=True)
class SimConfig:
    N: int = 20
    B: float = 1000.0
    mechanism: str = "1-pachira"
    K: int = 10
    PIF: float = 0.5
    C_min: int = 1
    C_max: int = 500
    CP_min: float = 1.0
    CP_max: float = 30.0
    CS_min: float = 1.0
    CS_max: float = 15.0
    N0: int = 30
    network_size: int = 1000
    p_mr1: float = 0.95
    mr_variant: bool = False
    ms_min: int = 1
    ms_max: int = 3
    beta: float = 0.5
    delta: float = 0.08
    alpha: float = 0.88
    gamma: float = 0.61
    initial_set: int = 5
    max_rounds: int = 50
    repush: bool = True
    solicit_baseline: str = "none"
    repetitions: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be positive")
        if not 0 <= self.PIF <= 1:
            raise ValueError("PIF must be a probability")
        if self.C_min < 0 or self.C_max < self.C_min:
            raise ValueError("bad contribution range")
        if self.initial_set < 1:
            raise ValueError("the crowdsourcer must solicit somebody")
        if self.solicit_baseline not in SOLICIT_BASELINES:
            raise ValueError(f"solicit_baseline must be one of {SOLICIT_BASELINES}")

    def spec(self) -> MechanismSpec:
        pi = PiParams(self.beta, self.delta)
        if self.mechanism == "1-pachira":
            return MechanismSpec.one_pachira(self.B, pi=pi, rescaling=FirstIsRoot())
        if self.mechanism == "k-pachira":
            return MechanismSpec.k_pachira(self.K, "C", self.B, pi=pi, rescaling=FirstIsRoot())
        if self.mechanism == "sharing-pachira":
            return MechanismSpec.sharing(self.B, pi=pi, rescaling=FirstIsRoot())
        raise ValueError(f"unknown mechanism {self.mechanism!r}")

    def cpt(self) -> CptParams:
        return CptParams(self.alpha, self.gamma)

    def network(self) -> NetworkParams:
        return NetworkParams(self.network_size, self.N0, self.p_mr1, self.mr_variant, self.ms_min, self.ms_max)

    @property
    def mean_contribution(self) -> float:
        return (self.C_min + self.C_max) / 2

    @property
    def label(self) -> str:
        return f"{self.K}-pachira" if self.mechanism == "k-pachira" else self.mechanism


def _coerce(kind, text: str):
    if kind is bool or kind == "bool":
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if kind in (int, "int"):
        return int(text)
    if kind in (float, "float"):
        return float(text)
    return text


def parse_config(text: str, source: str = "<config>", base: SimConfig | None = None) -> SimConfig:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    types = {f.name: f.type for f in fields(SimConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected key = value")
        key, val = (x.strip() for x in line.split("=", 1))
        if key not in types:
            raise ValueError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _coerce(types[key], val)
        except ValueError as exc:
            raise ValueError(f"{source}:{lineno}: {exc}") from None
    try:
        return replace(base or SimConfig(), **values)
    except ValueError as exc:
        raise ValueError(f"{source}: {exc}") from None


def load_config(path) -> SimConfig:
    with open(path) as fh:
        return parse_config(fh.read(), str(path))


@dataclass
class Decision:
    """One Step-2 evaluation, kept for auditing the valuation plumbing."""

    agent: int
    lottery_value: float
    perceived: float
    cost: float
    joined: bool


@dataclass
class SimOutcome:
    solicitations_sent: int
    participants: int
    rounds: int
    final_tree: LotTree
    tcp: float
    acp: float
    curve: list[int] = field(default_factory=list)  # solicitations when the n-th participant joined
    decisions: list[Decision] = field(default_factory=list)
    seed: tuple[int, ...] = ()


class _Agents:
    def __init__(self, config: SimConfig, n: int, rng: np.random.Generator):
        self.interested = rng.random(n) < config.PIF
        self.contribution = rng.integers(config.C_min, config.C_max + 1, size=n).astype(float)
        self.cp = rng.uniform(config.CP_min, config.CP_max, size=n)
        self.cs = rng.uniform(config.CS_min, config.CS_max, size=n)


def _value_of(tree: LotTree, node: str, spec: MechanismSpec) -> float:
    return spec.rescaling.apply(lottery_values(tree, spec.pi), tree)[node]


def _clamped(tree, node, spec):
    return min(max(_value_of(tree, node, spec), 0.0), 1.0)


def _solicitation_gain(tree, me, followers, mean_c, spec, cpt, baseline, perceived_now):
    inside = tree.copy()
    for _ in range(followers):
        inside.add_node(me, mean_c)
    with_followers = perceived_reward(spec, _clamped(inside, me, spec), cpt)
    if baseline == "none":
        return with_followers - perceived_now
    outside = tree.copy()
    head = outside.add_node(outside.root, mean_c)
    for _ in range(followers - 1):
        outside.add_node(head, mean_c)
    return with_followers - perceived_reward(spec, _clamped(outside, me, spec), cpt)


def run_campaign(
    config: SimConfig,
    network: nx.Graph | None = None,
    seed: int | Sequence[int] | None = None,
    *,
    record_decisions: bool = False,
) -> SimOutcome:
    """Run one campaign until ``config.N`` participants or the deadline.

    ``seed`` may be an int or a sequence of ints (e.g. [seed, repetition]);
    the network, agent attributes and crowdsourcer pushes come from
    independent child streams.
    """
    seed = config.seed if seed is None else seed
    ss = np.random.SeedSequence(seed)
    net_ss, agent_ss, push_ss = ss.spawn(3)
    if network is None:
        network = generate_network(config.network(), np.random.default_rng(net_ss))
    n_agents = network.number_of_nodes()
    agents = _Agents(config, n_agents, np.random.default_rng(agent_ss))
    push_rng = np.random.default_rng(push_ss)
    spec = config.spec()
    cpt = config.cpt()
    mean_c = config.mean_contribution

    tree = LotTree()
    node_of: dict[int, str] = {}
    decided = np.zeros(n_agents, dtype=bool)
    sent = 0
    curve: list[int] = []
    decisions: list[Decision] = []

    def push():
        nonlocal sent
        fresh = np.flatnonzero(~decided)
        if not fresh.size:
            return []
        chosen = push_rng.choice(fresh, size=min(config.initial_set, fresh.size), replace=False)
        sent += len(chosen)
        return [(int(a), tree.root) for a in chosen]

    pending = push()
    rounds = 0
    while len(node_of) < config.N and rounds < config.max_rounds:
        if not pending:
            if not config.repush:
                break
            pending = push()
            if not pending:
                break
        rounds += 1
        outgoing = []
        for agent, solicitor in pending:
            if len(node_of) >= config.N:
                break
            if decided[agent]:
                continue
            decided[agent] = True
            if not agents.interested[agent]:
                continue
            trial = tree.copy()
            me = trial.add_node(solicitor, agents.contribution[agent], f"a{agent}")
            value = _value_of(trial, me, spec)
            perceived = perceived_reward(spec, min(max(value, 0.0), 1.0), cpt)
            joined = perceived > agents.cp[agent]
            if record_decisions:
                decisions.append(Decision(agent, value, perceived, float(agents.cp[agent]), joined))
            if not joined:
                continue
            tree = trial
            node_of[agent] = me
            curve.append(sent)

            # Step 3: predicted followers of average contribution
            degree = network.degree(agent)
            followers = math.floor(degree * config.PIF + 0.5)
            if followers == 0:
                continue
            gain = _solicitation_gain(tree, me, followers, mean_c, spec, cpt, config.solicit_baseline, perceived)
            if gain > agents.cs[agent]:
                for nb in sorted(network.neighbors(agent)):
                    if nb not in node_of:
                        sent += 1
                        outgoing.append((nb, me))
        pending = outgoing

    contributions = [tree.contribution(u) for u in tree.participants]
    tcp = math.fsum(contributions)
    acp = tcp / len(contributions) if contributions else 0.0
    return SimOutcome(
        solicitations_sent=sent if len(node_of) < config.N else curve[config.N - 1],
        participants=len(node_of),
        rounds=rounds,
        final_tree=tree,
        tcp=tcp,
        acp=acp,
        curve=curve,
        decisions=decisions,
        seed=tuple(np.atleast_1d(seed).tolist()),
    )


def solicitation_curve(outcome: SimOutcome, n_values: Iterable[int]) -> list[int]:
    """Solicitations needed to reach each N, read off one longer run.

    Past the number of participants actually reached, the campaign ran
    into its deadline and the answer is everything it sent.
    """
    return [outcome.curve[n - 1] if n <= len(outcome.curve) else outcome.solicitations_sent for n in n_values]


MECHANISMS = ("1-pachira", "k-pachira", "sharing-pachira")
CSV_COLUMNS = ("mechanism", "B", "N", "repetition", "seed", "solicitations", "participants", "tcp", "acp")


@dataclass
class ExperimentRow:
    mechanism: str
    B: float
    N: int
    repetition: int
    seed: int
    solicitations: int
    participants: int
    tcp: float
    acp: float


def _prefix_stats(outcome: SimOutcome, n: int) -> tuple[int, float, float]:
    parts = [outcome.final_tree.contribution(u) for u in outcome.final_tree.participants[:n]]
    tcp = math.fsum(parts)
    return len(parts), tcp, (tcp / len(parts) if parts else 0.0)


def solicitation_experiment(
    config: SimConfig,
    budgets: Sequence[float] = (1000.0, 5000.0),
    mechanisms: Sequence[str] = MECHANISMS,
    n_values: Sequence[int] = range(5, 51),
    repetitions: int | None = None,
) -> list[ExperimentRow]:
    """Solicitations needed versus participants required.

    Repetition ``r`` uses seed ``[config.seed, r]`` for every mechanism and
    budget, so they face the same network and the same agents.
    """
    reps = config.repetitions if repetitions is None else repetitions
    n_values = list(n_values)
    n_max = max(n_values)
    rows = []
    for r in range(reps):
        # same stream run_campaign would use to build its own network
        net_ss = np.random.SeedSequence([config.seed, r]).spawn(1)[0]
        net = generate_network(config.network(), np.random.default_rng(net_ss))
        for B in budgets:
            for mech in mechanisms:
                cfg = replace(config, B=B, mechanism=mech, N=n_max)
                out = run_campaign(cfg, net, [config.seed, r])
                for n, s in zip(n_values, solicitation_curve(out, n_values)):
                    p, tcp, acp = _prefix_stats(out, n)
                    rows.append(ExperimentRow(cfg.label, B, n, r, config.seed, s, p, tcp, acp))
    rows.sort(key=lambda x: (x.B, MECHANISMS.index(x.mechanism) if x.mechanism in MECHANISMS else 1, x.repetition, x.N))
    return rows


def mean_solicitations(rows: Iterable[ExperimentRow]) -> dict[tuple[str, float], dict[int, float]]:
    acc: dict = {}
    for row in rows:
        acc.setdefault((row.mechanism, row.B), {}).setdefault(row.N, []).append(row.solicitations)
    return {k: {n: float(np.mean(v)) for n, v in sorted(d.items())} for k, d in acc.items()}


def crossover(lottery: dict[int, float], sharing: dict[int, float]) -> int | None:
    """Smallest N from which Sharing-Pachira needs more solicitations than the lottery for good.

    None unless Sharing-Pachira is strictly cheaper at some smaller N.
    """
    ns = sorted(set(lottery) & set(sharing))
    for i, n in enumerate(ns):
        if all(sharing[m] > lottery[m] for m in ns[i:]):
            return n if any(sharing[m] < lottery[m] for m in ns[:i]) else None
    return None


def write_csv(rows: Iterable[ExperimentRow], path, append: bool = False) -> None:
    new = not append or not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([r.mechanism, f"{r.B:g}", r.N, r.repetition, r.seed, r.solicitations, r.participants, repr(r.tcp), repr(r.acp)])
