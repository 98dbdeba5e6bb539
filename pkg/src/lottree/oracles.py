"""Executable checks for the six mechanism properties.

BC   budget consistency: expected payouts (and every realized drawing) total B.
CCI  contributing more strictly raises a node's expected reward.
CSI  a node strictly prefers a newcomer to join inside its own subtree.
VPC  E[R(u)] >= phi * C(u) / C(T).
USB  a newcomer cannot gain by attaching somewhere other than under its solicitor.
USA  a node cannot gain by splitting into several identities.

Each check accepts a single :class:`LotTree`, an iterable of trees, or a
:class:`TreeFamily`.  Trees and iterables go through the scalar path
(``expected_reward`` on explicit trees).  A family goes through a batched
numpy engine that evaluates every tree of one shape at once; any hit it
finds is replayed through the scalar path before it is reported, so a
counterexample is never an artifact of the vectorized code.

All comparisons use an absolute tolerance of ``TOL * budget``: gains at or
below it count as no gain, strict inequalities must exceed it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np

from .lottery import FirstIsRoot, LotteryProfile, lottery_matrix
from .mechanisms import (
    K_PACHIRA,
    MechanismSpec,
    expected_reward,
    payout_range,
    rescaled_profile,
    rewards_from_lottery,
)
from .tree import LotTree, TreeError, dumps

TOL = 1e-9
PROPERTIES = ("BC", "CCI", "CSI", "VPC", "USB", "USA")


# -- actions ----------------------------------------------------------------


@dataclass(frozen=True)
class BypassAction:
    """A newcomer solicited by ``solicitor`` joins under ``attach_under`` instead."""

    new_node_contribution: float
    solicitor: str
    attach_under: str
    new_node: str = "n"


@dataclass(frozen=True)
class SybilAction:
    """Split ``target`` into replicas.

    ``replica_parents[i]`` is None for the target's own parent or the index
    of an earlier replica.  ``child_owner`` maps each of the target's
    children to the replica that adopts it.  Replicas take the target's
    join-order slot consecutively.
    """

    target: str
    replicas: tuple[float, ...]
    replica_parents: tuple[int | None, ...]
    child_owner: tuple[tuple[str, int], ...] = ()

    def replica_ids(self, tree: LotTree) -> list[str]:
        ids = []
        for i in range(len(self.replicas)):
            rid = f"{self.target}_{i + 1}"
            while rid in tree and rid != self.target:
                rid += "'"
            ids.append(rid)
        return ids


@dataclass(frozen=True)
class ContributionIncrease:
    node: str
    delta: float


@dataclass(frozen=True)
class SolicitationChoice:
    """Reward of ``node`` when a newcomer joins under ``inside`` versus ``outside``."""

    node: str
    inside: str
    outside: str
    contribution: float
    new_node: str = "n"


@dataclass(frozen=True)
class ProportionShortfall:
    node: str
    phi: float


def apply_sybil(tree: LotTree, action: SybilAction) -> tuple[LotTree, list[str]]:
    target = action.target
    if target not in tree:
        raise TreeError(f"unknown node {target!r}")
    if target == tree.root:
        raise TreeError("the root cannot launch a Sybil attack")
    s = len(action.replicas)
    if s < 1 or len(action.replica_parents) != s:
        raise TreeError("one parent entry per replica is required")
    if any(c < 0 for c in action.replicas):
        raise TreeError("replica contributions must be non-negative")
    if not math.isclose(math.fsum(action.replicas), tree.contribution(target), rel_tol=1e-12, abs_tol=1e-12):
        raise TreeError("replica contributions must sum to the target's contribution")
    if action.replica_parents[0] is not None:
        raise TreeError("the first replica must hang from the target's parent")
    for i, p in enumerate(action.replica_parents):
        if p is not None and not 0 <= p < i:
            raise TreeError("a replica's parent must be the target's parent or an earlier replica")
    owner = dict(action.child_owner)
    children = tree.children(target)
    if set(owner) != set(children) or any(not 0 <= j < s for j in owner.values()):
        raise TreeError("every child of the target must be assigned to exactly one replica")

    ids = action.replica_ids(tree)
    out = LotTree(tree.root)
    for node in tree.participants:
        parent = tree.parent(node)
        if node == target:
            for i, (rid, c, p) in enumerate(zip(ids, action.replicas, action.replica_parents)):
                out.add_node(parent if p is None else ids[p], c, rid)
            continue
        if parent == target:
            parent = ids[owner[node]]
        out.add_node(parent, tree.contribution(node), node)
    return out, ids


def apply_bypass(tree: LotTree, action: BypassAction) -> tuple[LotTree, LotTree]:
    """(honest tree, bypass tree) for a newcomer."""
    if action.solicitor not in tree or action.attach_under not in tree:
        raise TreeError("unknown solicitor or attach point")
    if not action.new_node_contribution > 0:
        raise TreeError("a newcomer must contribute something")
    honest, bypass = tree.copy(), tree.copy()
    honest.add_node(action.solicitor, action.new_node_contribution, action.new_node)
    bypass.add_node(action.attach_under, action.new_node_contribution, action.new_node)
    return honest, bypass


# -- verdicts ---------------------------------------------------------------


@dataclass(frozen=True)
class Counterexample:
    """A property violation.

    ``before`` is the reward the property protects (honest behaviour) and
    ``after`` the reward under the deviation or comparison.
    """

    property: str
    tree: LotTree
    action: object
    before: float
    after: float

    @property
    def gain(self) -> float:
        return self.after - self.before

    def trees(self) -> dict[str, LotTree]:
        a = self.action
        if isinstance(a, SybilAction):
            return {"split": apply_sybil(self.tree, a)[0]}
        if isinstance(a, BypassAction):
            honest, bypass = apply_bypass(self.tree, a)
            return {"honest": honest, "bypass": bypass}
        if isinstance(a, ContributionIncrease):
            return {"increased": self.tree.with_contribution(a.node, self.tree.contribution(a.node) + a.delta)}
        if isinstance(a, SolicitationChoice):
            inside, outside = self.tree.copy(), self.tree.copy()
            inside.add_node(a.inside, a.contribution, a.new_node)
            outside.add_node(a.outside, a.contribution, a.new_node)
            return {"inside": inside, "outside": outside}
        return {}

    def to_text(self) -> str:
        lines = [
            f"counterexample {self.property}: {self.action!r}",
            f"before {self.before!r}",
            f"after {self.after!r}",
            f"gain {self.gain!r}",
            "tree:",
            dumps(self.tree).rstrip("\n"),
        ]
        for name, t in self.trees().items():
            lines += [f"{name}:", dumps(t).rstrip("\n")]
        return "\n".join(lines) + "\n"


@dataclass
class PropertyVerdict:
    property: str
    holds: bool
    counterexample: Counterexample | None = None
    search_space: str = ""
    instances: int = 0
    mechanism: str = ""
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.holds == (self.counterexample is not None):
            raise ValueError("a verdict has a counterexample exactly when the property fails")

    def to_text(self) -> str:
        head = f"{self.property} {'PASS' if self.holds else 'FAIL'} mechanism={self.mechanism} instances={self.instances}"
        extra = "".join(f" {k}={v!r}" for k, v in self.detail.items())
        out = head + extra + f"\nsearch: {self.search_space}\n"
        if self.counterexample is not None:
            out += self.counterexample.to_text()
        return out


def describe_spec(spec: MechanismSpec) -> str:
    return f"{spec.label}/{spec.rescaling.name}/B={spec.budget:g}"


# -- scalar replay ----------------------------------------------------------


def _reward(tree: LotTree, spec: MechanismSpec, node: str) -> float:
    return expected_reward(tree, spec).expected[node]


def replay(cx: Counterexample, spec: MechanismSpec) -> tuple[float, float]:
    """Recompute (before, after) for a counterexample on explicit trees."""
    a, tree = cx.action, cx.tree
    if isinstance(a, SybilAction):
        split, ids = apply_sybil(tree, a)
        rewards = expected_reward(split, spec).expected
        return _reward(tree, spec, a.target), math.fsum(rewards[i] for i in ids)
    if isinstance(a, BypassAction):
        honest, bypass = apply_bypass(tree, a)
        return _reward(honest, spec, a.new_node), _reward(bypass, spec, a.new_node)
    if isinstance(a, ContributionIncrease):
        more = tree.with_contribution(a.node, tree.contribution(a.node) + a.delta)
        return _reward(tree, spec, a.node), _reward(more, spec, a.node)
    if isinstance(a, SolicitationChoice):
        trees = cx.trees()
        return _reward(trees["inside"], spec, a.node), _reward(trees["outside"], spec, a.node)
    if isinstance(a, ProportionShortfall):
        return a.phi * tree.contribution(a.node) / tree.total_contribution(), _reward(tree, spec, a.node)
    if a is None and cx.property == "BC":
        return spec.budget, expected_reward(tree, spec).total()
    raise TypeError(f"cannot replay {a!r}")


def _violates(prop: str, before: float, after: float, tol: float) -> bool:
    if prop in ("USA", "USB"):
        return after - before > tol
    if prop == "CCI":
        return after - before <= tol
    if prop == "CSI":
        return before - after <= tol
    if prop == "VPC":
        return after < before - tol
    if prop == "BC":
        return abs(after - before) > tol
    raise ValueError(prop)


def confirm(cx: Counterexample, spec: MechanismSpec) -> Counterexample | None:
    """Replay through the scalar path; keep the counterexample only if it reproduces."""
    before, after = replay(cx, spec)
    if not _violates(cx.property, before, after, TOL * spec.budget):
        return None
    return Counterexample(cx.property, cx.tree, cx.action, before, after)


# -- tree families ----------------------------------------------------------


@dataclass(frozen=True)
class TreeFamily:
    """Every tree shape up to ``max_nodes`` (root included) under every join
    order, with each participant's contribution drawn from ``contributions``."""

    max_nodes: int = 6
    contributions: tuple[float, ...] = (1, 2, 5, 10)
    min_participants: int = 1

    def shapes(self) -> Iterator[tuple[int, ...]]:
        for n in range(self.min_participants, self.max_nodes):
            for tail in itertools.product(*(range(i) for i in range(1, n + 1))):
                yield (-1, *tail)

    def contribution_matrix(self, participants: int) -> np.ndarray:
        grid = np.array(self.contributions, dtype=float)
        rows = np.array(list(itertools.product(grid, repeat=participants)), dtype=float).reshape(-1, participants)
        return np.hstack([np.zeros((len(rows), 1)), rows])

    def trees(self) -> Iterator[LotTree]:
        for parents in self.shapes():
            for row in self.contribution_matrix(len(parents) - 1):
                yield LotTree.from_arrays(parents, row)

    def size(self) -> int:
        g = len(self.contributions)
        return sum(math.factorial(n) * g**n for n in range(self.min_participants, self.max_nodes))

    def describe(self) -> str:
        grid = ",".join(f"{c:g}" for c in self.contributions)
        return f"all trees with <= {self.max_nodes} nodes, contributions in {{{grid}}}"


def _applicable(tree: LotTree, spec: MechanismSpec) -> bool:
    if spec.kind == K_PACHIRA and not spec.k < len(tree) - 1:
        return False
    return spec.rescaling.applicable(tree)


def _as_trees(trees) -> list[LotTree]:
    if isinstance(trees, LotTree):
        return [trees]
    return list(trees)


# -- scalar checks ----------------------------------------------------------


def _csi_pairs(tree: LotTree, spec: MechanismSpec, node: str) -> tuple[list[str], list[str]]:
    """Attach points counted as inside / outside ``node``'s sphere.

    Under first-is-root the first participant effectively is the root, so
    its whole tree is inside; what remains is the competitive effect: a
    newcomer directly under the first participant (or the root) must beat
    one placed under anybody else.
    """
    if isinstance(spec.rescaling, FirstIsRoot) and node == tree.node_at(1):
        inside = [tree.root, node]
    else:
        inside = tree.subtree(node)
    outside = [v for v in tree.nodes if v not in inside]
    return inside, outside


def _scalar_bc(tree, spec):
    tol = TOL * spec.budget
    rewards = expected_reward(tree, spec)
    total = rewards.total()
    if abs(total - spec.budget) > tol:
        return Counterexample("BC", tree, None, spec.budget, total)
    lo, hi = payout_range(rescaled_profile(tree, spec), spec)
    for paid in (lo, hi):
        if abs(paid - spec.budget) > tol:
            return Counterexample("BC", tree, None, spec.budget, paid)
    return None


def _scalar_cci(tree, spec, increments, nodes=None):
    # a sole participant already holds the whole budget under any
    # budget-consistent rule, so no strict increase is possible
    if len(tree) < 3:
        return None
    tol = TOL * spec.budget
    base = expected_reward(tree, spec).expected
    for u in nodes or tree.participants:
        for d in increments:
            if d <= 0:
                continue
            after = _reward(tree.with_contribution(u, tree.contribution(u) + d), spec, u)
            if after - base[u] <= tol:
                return Counterexample("CCI", tree, ContributionIncrease(u, d), base[u], after)
    return None


def _attach_rewards(tree, spec, c):
    out = {}
    for a in tree.nodes:
        t = tree.copy()
        t.add_node(a, c, "n")
        out[a] = expected_reward(t, spec).expected
    return out


def _scalar_csi(tree, spec, grid):
    tol = TOL * spec.budget
    for c in grid:
        rewards = _attach_rewards(tree, spec, c)
        for u in tree.participants:
            inside, outside = _csi_pairs(tree, spec, u)
            for p in inside:
                for q in outside:
                    if rewards[p][u] - rewards[q][u] <= tol:
                        return Counterexample("CSI", tree, SolicitationChoice(u, p, q, c), rewards[p][u], rewards[q][u])
    return None


def _scalar_vpc(tree, spec, phi):
    tol = TOL * spec.budget
    rewards = expected_reward(tree, spec).expected
    total = tree.total_contribution()
    worst, worst_node = math.inf, None
    for u in tree.participants:
        c = tree.contribution(u)
        if c > 0 and rewards[u] * total / c < worst:
            worst, worst_node = rewards[u] * total / c, u
    if worst_node is not None and rewards[worst_node] < phi * tree.contribution(worst_node) / total - tol:
        cx = Counterexample(
            "VPC", tree, ProportionShortfall(worst_node, phi), phi * tree.contribution(worst_node) / total, rewards[worst_node]
        )
        return cx, worst
    return None, worst


def _scalar_usb(tree, spec, grid):
    tol = TOL * spec.budget
    for c in grid:
        rewards = _attach_rewards(tree, spec, c)
        vals = {a: r["n"] for a, r in rewards.items()}
        lo = min(vals, key=vals.get)
        hi = max(vals, key=vals.get)
        if vals[hi] - vals[lo] > tol:
            return Counterexample("USB", tree, BypassAction(c, lo, hi), vals[lo], vals[hi])
    return None


@lru_cache(maxsize=None)
def compositions(total: int, parts: int) -> tuple[tuple[int, ...], ...]:
    """Ordered ways to write ``total`` as ``parts`` positive integers."""
    if parts == 1:
        return ((total,),) if total >= 1 else ()
    out = []
    for first in range(1, total - parts + 2):
        out += [(first, *rest) for rest in compositions(total - first, parts - 1)]
    return tuple(out)


def replica_parent_functions(s: int) -> Iterator[tuple[int | None, ...]]:
    """Replica 0 hangs from the target's parent; replica i from it or an earlier replica."""
    for tail in itertools.product(*([None, *range(i)] for i in range(1, s))):
        yield (None, *tail)


def sybil_actions(tree: LotTree, node: str, max_replicas: int = 3) -> Iterator[SybilAction]:
    c = tree.contribution(node)
    if not float(c).is_integer():
        raise TreeError("Sybil enumeration needs integer contributions")
    children = tree.children(node)
    for s in range(2, max_replicas + 1):
        for parts in compositions(int(c), s):
            for rp in replica_parent_functions(s):
                for owners in itertools.product(range(s), repeat=len(children)):
                    yield SybilAction(node, tuple(float(x) for x in parts), rp, tuple(zip(children, owners)))


def _scalar_usa(tree, spec, max_replicas):
    tol = TOL * spec.budget
    base = expected_reward(tree, spec).expected
    for u in tree.participants:
        for action in sybil_actions(tree, u, max_replicas):
            split, ids = apply_sybil(tree, action)
            rewards = expected_reward(split, spec).expected
            after = math.fsum(rewards[i] for i in ids)
            if after - base[u] > tol:
                return Counterexample("USA", tree, action, base[u], after)
    return None


def _scalar_verdict(prop, trees, spec, fn, space) -> PropertyVerdict:
    count = 0
    for tree in trees:
        if not _applicable(tree, spec):
            continue
        count += 1
        cx = fn(tree)
        if cx is not None:
            return PropertyVerdict(prop, False, cx, space, count, describe_spec(spec))
    return PropertyVerdict(prop, True, None, space, count, describe_spec(spec))


# -- public checks ----------------------------------------------------------


def check_bc(trees, spec: MechanismSpec) -> PropertyVerdict:
    if isinstance(trees, TreeFamily):
        return run_suite(trees, [spec], ("BC",))[0]
    return _scalar_verdict("BC", _as_trees(trees), spec, lambda t: _scalar_bc(t, spec), "given trees")


def check_cci(trees, spec: MechanismSpec, node: str | None = None, increments: Sequence[float] = (1, 5)) -> PropertyVerdict:
    if isinstance(trees, TreeFamily):
        return run_suite(trees, [spec], ("CCI",), increments=increments)[0]
    nodes = None if node is None else [node]
    return _scalar_verdict("CCI", _as_trees(trees), spec, lambda t: _scalar_cci(t, spec, increments, nodes), "given trees")


def check_csi(trees, spec: MechanismSpec, grid: Sequence[float] = (1, 10)) -> PropertyVerdict:
    if isinstance(trees, TreeFamily):
        return run_suite(trees, [spec], ("CSI",), grid=grid)[0]
    return _scalar_verdict("CSI", _as_trees(trees), spec, lambda t: _scalar_csi(t, spec, grid), "given trees")


def check_vpc(trees, spec: MechanismSpec, phi: float | None = None) -> PropertyVerdict:
    """Holds iff E[R(u)] >= phi * C(u)/C(T) everywhere; ``detail['max_phi']``
    is the largest phi that would hold.  phi defaults to B * beta."""
    phi = spec.budget * spec.pi.beta if phi is None else phi
    if isinstance(trees, TreeFamily):
        return run_suite(trees, [spec], ("VPC",), phi=phi)[0]
    worst, count = math.inf, 0
    for tree in _as_trees(trees):
        if not _applicable(tree, spec):
            continue
        count += 1
        cx, w = _scalar_vpc(tree, spec, phi)
        worst = min(worst, w)
        if cx is not None:
            return PropertyVerdict("VPC", False, cx, "given trees", count, describe_spec(spec), {"phi": phi, "max_phi": worst})
    return PropertyVerdict("VPC", True, None, "given trees", count, describe_spec(spec), {"phi": phi, "max_phi": worst})


def check_usb(trees, spec: MechanismSpec, grid: Sequence[float] = (1, 10)) -> PropertyVerdict:
    if isinstance(trees, TreeFamily):
        return run_suite(trees, [spec], ("USB",), grid=grid, stop_at_first=True)[0]
    return _scalar_verdict("USB", _as_trees(trees), spec, lambda t: _scalar_usb(t, spec, grid), "given trees")


def check_usa(trees, spec: MechanismSpec, max_replicas: int = 3) -> PropertyVerdict:
    if isinstance(trees, TreeFamily):
        return run_suite(trees, [spec], ("USA",), max_replicas=max_replicas, stop_at_first=True)[0]
    return _scalar_verdict("USA", _as_trees(trees), spec, lambda t: _scalar_usa(t, spec, max_replicas), "given trees")


# -- batched engine ---------------------------------------------------------


def sybil_parents(parents: Sequence[int], target: int, rp: Sequence[int | None], owners: Sequence[int]) -> np.ndarray:
    """Parent vector after splitting column ``target`` into len(rp) replicas."""
    s = len(rp)
    children = [j for j in range(len(parents)) if parents[j] == target]
    owner = dict(zip(children, owners))
    out = list(parents[:target])
    out += [parents[target] if p is None else target + p for p in rp]
    for j in range(target + 1, len(parents)):
        p = parents[j]
        if p == target:
            out.append(target + owner[j])
        elif p > target:
            out.append(p + s - 1)
        else:
            out.append(p)
    return np.array(out)


class _Shape:
    """Lazily evaluated rewards for every tree of one shape."""

    def __init__(self, parents, contrib):
        self.parents = np.array(parents)
        self.contrib = contrib
        self.m = len(parents)
        self._L = {}

    def rescaled(self, spec, parents, contrib, key):
        k = (spec.pi, spec.rescaling, key)
        if k not in self._L:
            L = lottery_matrix(parents, contrib, spec.pi)
            self._L[k] = spec.rescaling.apply_matrix(L, parents)
        return self._L[k]

    def base_rewards(self, spec):
        return rewards_from_lottery(spec, self.rescaled(spec, self.parents, self.contrib, "base"))

    def attach(self, grid):
        V = len(self.contrib)
        rows = np.vstack([np.hstack([self.contrib, np.full((V, 1), c)]) for c in grid])
        return rows, np.repeat(np.arange(len(grid)), V), np.tile(np.arange(V), len(grid))

    def attach_rewards(self, spec, grid):
        rows, _, _ = self.attach(grid)
        return [
            rewards_from_lottery(spec, self.rescaled(spec, np.append(self.parents, a), rows, ("attach", a, tuple(grid))))
            for a in range(self.m)
        ]


def _tree_at(shape: _Shape, row: int) -> LotTree:
    return LotTree.from_arrays(shape.parents, shape.contrib[row])


class _Suite:
    def __init__(self, family, specs, props, *, phi, grid, increments, max_replicas, stop_at_first):
        self.family = family
        self.specs = list(specs)
        self.props = props
        self.phi = phi
        self.grid = tuple(grid)
        self.increments = tuple(d for d in increments if d > 0)
        self.max_replicas = max_replicas
        self.stop = stop_at_first
        self.found = {(i, p): None for i in range(len(self.specs)) for p in props}
        self.count = {(i, p): 0 for i in range(len(self.specs)) for p in props}
        self.unconfirmed = 0
        self.max_phi = [math.inf] * len(self.specs)

    def open(self, i, p):
        return p in self.props and self.found[(i, p)] is None

    def record(self, i, cx):
        spec = self.specs[i]
        confirmed = confirm(cx, spec)
        if confirmed is None:
            self.unconfirmed += 1
            return False
        self.found[(i, cx.property)] = confirmed
        return True

    def done(self):
        return self.stop and all(v is not None for v in self.found.values())

    def run(self):
        # specs sharing pi and rescaling share every lottery evaluation
        groups: dict = {}
        for i, spec in enumerate(self.specs):
            groups.setdefault((spec.pi, spec.rescaling), []).append(i)
        for parents in self.family.shapes():
            n = len(parents) - 1
            shape = _Shape(parents, self.family.contribution_matrix(n))
            for members in groups.values():
                active = []
                for i in members:
                    spec = self.specs[i]
                    if spec.kind == K_PACHIRA and not spec.k < n:
                        continue
                    if not spec.rescaling.applicable(_tree_at(shape, 0)):
                        continue
                    active.append((i, spec, self.evaluate(shape, i, spec)))
                if "CCI" in self.props and n > 1:
                    self.cci(shape, [a for a in active if self.open(a[0], "CCI")])
                if "USA" in self.props:
                    self.usa(shape, [a for a in active if self.open(a[0], "USA")])
            if self.done():
                break
        return self.verdicts()

    def evaluate(self, shape, i, spec):
        tol = TOL * spec.budget
        R = shape.base_rewards(spec)
        C = shape.contrib
        V, m = C.shape
        for p in self.props:
            if self.open(i, p):
                self.count[(i, p)] += V
        if "BC" in self.props and self.open(i, "BC"):
            totals = R[:, 1:].sum(axis=1)
            bad = np.flatnonzero(np.abs(totals - spec.budget) > tol)
            if not bad.size:
                L = shape.rescaled(spec, shape.parents, C, "base")
                lo, hi = _payout_bounds(spec, L)
                bad = np.flatnonzero((np.abs(lo - spec.budget) > tol) | (np.abs(hi - spec.budget) > tol))
            for r in bad[:5]:
                if self.record(i, Counterexample("BC", _tree_at(shape, r), None, spec.budget, totals[r])):
                    break
        if "VPC" in self.props:
            total = C.sum(axis=1, keepdims=True)
            ratio = np.where(C[:, 1:] > 0, R[:, 1:] * total / np.where(C[:, 1:] > 0, C[:, 1:], 1), np.inf)
            self.max_phi[i] = min(self.max_phi[i], float(ratio.min()))
            if self.open(i, "VPC"):
                short = R[:, 1:] < self.phi * C[:, 1:] / total - tol
                for r, u in np.argwhere(short)[:5]:
                    u = int(u) + 1
                    cx = Counterexample(
                        "VPC", _tree_at(shape, r), ProportionShortfall(f"u{u}", self.phi), self.phi * C[r, u] / total[r, 0], R[r, u]
                    )
                    if self.record(i, cx):
                        break
        if self.open(i, "CSI") or self.open(i, "USB"):
            self.attach(shape, i, spec)
        return R

    def cci(self, shape, members):
        if not members:
            return
        first = members[0][1]
        for u in range(1, shape.m):
            for d in self.increments:
                C2 = shape.contrib.copy()
                C2[:, u] += d
                L = first.rescaling.apply_matrix(lottery_matrix(shape.parents, C2, first.pi), shape.parents)
                for i, spec, R in members:
                    if not self.open(i, "CCI"):
                        continue
                    R2 = rewards_from_lottery(spec, L)
                    for r in np.flatnonzero(R2[:, u] - R[:, u] <= TOL * spec.budget)[:5]:
                        cx = Counterexample("CCI", _tree_at(shape, r), ContributionIncrease(f"u{u}", d), R[r, u], R2[r, u])
                        if self.record(i, cx):
                            break

    def attach(self, shape, i, spec):
        tol = TOL * spec.budget
        Ra = shape.attach_rewards(spec, self.grid)
        _, gi, base = shape.attach(self.grid)
        m = shape.m
        ids = ["r"] + [f"u{j}" for j in range(1, m)]
        if "USB" in self.props and self.open(i, "USB"):
            new = np.stack([R[:, m] for R in Ra])
            hi, lo = new.argmax(axis=0), new.argmin(axis=0)
            gain = new.max(axis=0) - new.min(axis=0)
            for r in np.flatnonzero(gain > tol)[:5]:
                action = BypassAction(float(self.grid[gi[r]]), ids[lo[r]], ids[hi[r]], f"u{m}")
                cx = Counterexample("USB", _tree_at(shape, base[r]), action, new[lo[r], r], new[hi[r], r])
                if self.record(i, cx):
                    break
        if "CSI" in self.props and self.open(i, "CSI"):
            t0 = _tree_at(shape, 0)
            for u in range(1, m):
                inside, outside = _csi_pairs(t0, spec, ids[u])
                if not outside:
                    continue
                pi_ = [t0.index(v) for v in inside]
                qi = [t0.index(v) for v in outside]
                vals = np.stack([R[:, u] for R in Ra])
                pin, qout = vals[pi_].argmin(axis=0), vals[qi].argmax(axis=0)
                margin = vals[pi_].min(axis=0) - vals[qi].max(axis=0)
                hit = False
                for r in np.flatnonzero(margin <= tol)[:5]:
                    p, q = pi_[pin[r]], qi[qout[r]]
                    action = SolicitationChoice(ids[u], ids[p], ids[q], float(self.grid[gi[r]]), f"u{m}")
                    if self.record(i, Counterexample("CSI", _tree_at(shape, base[r]), action, vals[p, r], vals[q, r])):
                        hit = True
                        break
                if hit:
                    break

    def usa(self, shape, members):
        if not members:
            return
        first = members[0][1]
        parents = tuple(int(p) for p in shape.parents)
        C = shape.contrib
        for u in range(1, shape.m):
            children = [j for j in range(shape.m) if parents[j] == u]
            for s in range(2, self.max_replicas + 1):
                blocks, base_idx, comp_rows = [], [], []
                for c in np.unique(C[:, u]):
                    comps = compositions(int(c), s)
                    if not comps:
                        continue
                    rows = np.flatnonzero(C[:, u] == c)
                    Q = np.array(comps, dtype=float)
                    rr = np.repeat(rows, len(Q))
                    parts = np.tile(Q, (len(rows), 1))
                    blocks.append(np.hstack([C[rr, :u], parts, C[rr, u + 1 :]]))
                    base_idx.append(rr)
                    comp_rows.append(parts)
                if not blocks:
                    continue
                C2 = np.vstack(blocks)
                bidx = np.concatenate(base_idx)
                parts = np.vstack(comp_rows)
                for rp in replica_parent_functions(s):
                    for owners in itertools.product(range(s), repeat=len(children)):
                        P2 = sybil_parents(parents, u, rp, owners)
                        L = first.rescaling.apply_matrix(lottery_matrix(P2, C2, first.pi), P2)
                        for i, spec, R in members:
                            if not self.open(i, "USA"):
                                continue
                            before = R[bidx, u]
                            after = rewards_from_lottery(spec, L)[:, u : u + s].sum(axis=1)
                            for r in np.flatnonzero(after - before > TOL * spec.budget)[:5]:
                                tree = _tree_at(shape, bidx[r])
                                action = SybilAction(
                                    f"u{u}", tuple(float(x) for x in parts[r]), rp, tuple((f"u{j}", o) for j, o in zip(children, owners))
                                )
                                if self.record(i, Counterexample("USA", tree, action, before[r], after[r])):
                                    break
                        if all(not self.open(i, "USA") for i, _, _ in members):
                            return

    def verdicts(self):
        out = []
        space = self.family.describe()
        for i, spec in enumerate(self.specs):
            for p in self.props:
                cx = self.found[(i, p)]
                detail = {}
                s = space
                if p == "VPC":
                    detail = {"phi": self.phi, "max_phi": self.max_phi[i]}
                if p in ("CSI", "USB"):
                    s += f"; newcomer contributions {self.grid}"
                if p == "CCI":
                    s += f"; increments {self.increments}"
                if p == "USA":
                    s += f"; up to {self.max_replicas} replicas, all arrangements"
                out.append(PropertyVerdict(p, cx is None, cx, s, self.count[(i, p)], describe_spec(spec), detail))
        return out


def _payout_bounds(spec: MechanismSpec, L: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``payout_range`` for rows of rescaled lottery values."""
    B = spec.budget
    root = L[:, 0]
    npos = (L[:, 1:] > 0).sum(axis=1)
    if spec.kind == "sharing-pachira":
        paid = B * L[:, 1:].sum(axis=1)
        return paid, paid
    if spec.kind == "1-pachira":
        hi = np.where(npos > 0, B, 0.0)
        return np.where(root > 0, 0.0, hi), hi
    k, share = spec.k, B / spec.k
    if spec.selection in ("A", "B"):
        lo = np.empty(len(L))
        hi = np.empty(len(L))
        for r, row in enumerate(L):
            prof = LotteryProfile({("r" if j == 0 else f"u{j}"): v for j, v in enumerate(row)}, "r")
            lo[r], hi[r] = payout_range(prof, spec)
        return lo, hi
    hi = np.where(npos > 0, share * k, 0.0)
    if spec.selection == "C":
        root_max = np.full(len(L), k)
    else:
        root_max = np.minimum(k, np.ceil(root * spec.tickets) + 1)
    lo = np.where(root > 0, share * (k - root_max), hi)
    return lo, hi


def run_suite(
    family: TreeFamily,
    specs: Sequence[MechanismSpec],
    properties: Sequence[str] = PROPERTIES,
    *,
    phi: float | None = None,
    grid: Sequence[float] = (1, 10),
    increments: Sequence[float] = (1, 5),
    max_replicas: int = 3,
    stop_at_first: bool = False,
) -> list[PropertyVerdict]:
    """Run property checks for several mechanisms over a whole family.

    Returns one verdict per (spec, property), specs outermost.  ``phi``
    defaults to B * beta of the first spec.  With ``stop_at_first`` the
    search ends once every (spec, property) has a counterexample.
    """
    unknown = set(properties) - set(PROPERTIES)
    if unknown:
        raise ValueError(f"unknown properties {sorted(unknown)}")
    if phi is None:
        phi = specs[0].budget * specs[0].pi.beta
    suite = _Suite(
        family,
        specs,
        tuple(properties),
        phi=phi,
        grid=grid,
        increments=increments,
        max_replicas=max_replicas,
        stop_at_first=stop_at_first,
    )
    return suite.run()


# -- named instances --------------------------------------------------------


def bypass_instance(contribution: float = 10) -> tuple[LotTree, BypassAction]:
    """r -> u1 -> u2 and r -> u3; a newcomer solicited by u1 joins under r."""
    tree = LotTree()
    tree.add_node("r", contribution, "u1")
    tree.add_node("u1", contribution, "u2")
    tree.add_node("r", contribution, "u3")
    return tree, BypassAction(contribution, "u1", "r", "u4")


def sybil_instance(contribution: float = 10) -> tuple[LotTree, SybilAction]:
    """u1 (children u2, u4; sibling u3) splits into a two-replica chain that keeps both children."""
    tree = LotTree()
    tree.add_node("r", contribution, "u1")
    tree.add_node("u1", contribution, "u2")
    tree.add_node("r", contribution, "u3")
    tree.add_node("u1", contribution, "u4")
    half = contribution / 2
    return tree, SybilAction("u1", (half, half), (None, 0), (("u2", 0), ("u4", 0)))


def instance_counterexample(prop: str, tree: LotTree, action, spec: MechanismSpec) -> Counterexample:
    cx = Counterexample(prop, tree, action, 0.0, 0.0)
    before, after = replay(cx, spec)
    return Counterexample(prop, tree, action, before, after)
