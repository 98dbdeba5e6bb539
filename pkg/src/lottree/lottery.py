"""Pachira lottery values and root-value rescaling.

Two evaluation paths are provided.  The scalar path (``lottery_values``,
``rescale``) works on a :class:`LotTree` with plain Python arithmetic and
is what callers normally use.  The batch path (``lottery_matrix`` and
``Rescaling.apply_matrix``) evaluates many same-sized trees at once with
numpy; the property oracles use it for exhaustive search and replay every
hit through the scalar path.

Batch trees are arrays in join order: column 0 is the root and
``parents[..., i] < i`` for every participant column ``i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .tree import LotTree, TreeError, aggregate


class RescalingError(ValueError):
    """A rescaling strategy selected nodes that the tree does not have."""


@dataclass(frozen=True)
class PiParams:
    """Parameters of pi(c) = beta*c + (1 - beta)*c**(1 + delta)."""

    beta: float = 0.5
    delta: float = 0.08

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1) for strict convexity, got {self.beta}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")

    @classmethod
    def unchecked(cls, beta: float, delta: float) -> "PiParams":
        """Skip validation; used for negative controls such as linear pi."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "beta", beta)
        object.__setattr__(obj, "delta", delta)
        return obj


DEFAULT_PI = PiParams()

# Proportional contributions can overshoot 1 by rounding on non-integer data.
_FRACTION_SLACK = 1e-12


def pi(params: PiParams, c: float) -> float:
    if not -_FRACTION_SLACK <= c <= 1 + _FRACTION_SLACK:
        raise ValueError(f"pi is defined on [0, 1], got {c}")
    if c <= 0:
        return 0.0
    if c >= 1:
        return 1.0
    return params.beta * c + (1 - params.beta) * math.exp((1 + params.delta) * math.log(c))


def pi_array(params: PiParams, c: np.ndarray) -> np.ndarray:
    c = np.clip(c, 0.0, 1.0)
    return params.beta * c + (1 - params.beta) * np.power(c, 1 + params.delta)


@dataclass(frozen=True)
class LotteryProfile:
    values: Mapping[str, float]
    root: str

    def __getitem__(self, node: str) -> float:
        return self.values[node]

    def __iter__(self):
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def items(self):
        return self.values.items()

    def total(self) -> float:
        return math.fsum(self.values.values())

    def participants(self) -> dict[str, float]:
        return {u: v for u, v in self.values.items() if u != self.root}

    def to_text(self) -> str:
        return "".join(f"{u} {v!r}\n" for u, v in self.values.items())


def profile_from_text(text: str, root: str = "r") -> LotteryProfile:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            node, value = line.split()
            values[node] = float(value)
        except ValueError:
            raise ValueError(f"line {lineno}: expected 'node_id lottery_value', got {line!r}") from None
    return LotteryProfile(values, root)


def subtree_weights(tree: LotTree, params: PiParams = DEFAULT_PI) -> dict[str, float]:
    """W(T_u) = pi(C(T_u) / C(T)) for every node."""
    agg = aggregate(tree)
    return {u: pi(params, min(s / agg.total, 1.0)) for u, s in agg.subtree_contribution.items()}


def lottery_values(tree: LotTree, params: PiParams = DEFAULT_PI) -> LotteryProfile:
    """Unrescaled 1-Pachira lottery values, root included."""
    weight = subtree_weights(tree, params)
    parents = tree.parent_indices()
    nodes = tree.nodes
    child_weight = dict.fromkeys(nodes, 0.0)
    for i in range(1, len(nodes)):
        child_weight[nodes[parents[i]]] += weight[nodes[i]]
    return LotteryProfile({u: weight[u] - child_weight[u] for u in nodes}, tree.root)


def lottery_matrix(parents: np.ndarray, contrib: np.ndarray, params: PiParams = DEFAULT_PI) -> np.ndarray:
    """Batch lottery values.

    ``contrib`` has shape (V, m); ``parents`` is either one shared parent
    vector of length m or an int array of shape (V, m).  Returns (V, m).
    """
    contrib = np.asarray(contrib, dtype=float)
    parents = np.asarray(parents)
    V, m = contrib.shape
    shared = parents.ndim == 1
    rows = None if shared else np.arange(V)
    sub = contrib.copy()
    for i in range(m - 1, 0, -1):
        if shared:
            sub[:, parents[i]] += sub[:, i]
        else:
            sub[rows, parents[:, i]] += sub[:, i]
    total = sub[:, 0]
    if np.any(total <= 0):
        raise TreeError("degenerate tree in batch: total contribution is zero")
    weight = pi_array(params, sub / total[:, None])
    child = np.zeros_like(weight)
    for i in range(1, m):
        if shared:
            child[:, parents[i]] += weight[:, i]
        else:
            child[rows, parents[:, i]] += weight[:, i]
    return weight - child


# -- rescaling --------------------------------------------------------------


def _check_proportions(weights: Sequence[float]) -> tuple[float, ...]:
    weights = tuple(float(w) for w in weights)
    if not weights or any(not w > 0 for w in weights):
        raise ValueError("rescaling proportions must be strictly positive")
    if abs(math.fsum(weights) - 1) > 1e-12:
        raise ValueError(f"rescaling proportions must sum to 1, got {math.fsum(weights)}")
    return weights


class Rescaling:
    """Base class: redistribute the root's lottery value."""

    name = "none"

    def targets(self, tree: LotTree) -> list[tuple[str, float]]:
        raise NotImplementedError

    def applicable(self, tree: LotTree) -> bool:
        try:
            self.targets(tree)
        except RescalingError:
            return False
        return True

    def apply(self, profile: LotteryProfile, tree: LotTree) -> LotteryProfile:
        targets = self.targets(tree)
        if not targets:
            return profile
        root_value = profile[tree.root]
        values = dict(profile.values)
        for node, w in targets:
            values[node] += w * root_value
        values[tree.root] = 0.0
        return LotteryProfile(values, profile.root)

    def apply_matrix(self, L: np.ndarray, parents: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class NoRescaling(Rescaling):
    name = "none"

    def targets(self, tree):
        return []

    def apply_matrix(self, L, parents):
        return L


@dataclass(frozen=True)
class FirstIsRoot(Rescaling):
    """The root's value goes to the first participant."""

    name = "first-is-root"

    def targets(self, tree):
        if len(tree) < 2:
            raise RescalingError("first-is-root needs at least one participant")
        return [(tree.node_at(1), 1.0)]

    def apply_matrix(self, L, parents):
        if L.shape[1] < 2:
            raise RescalingError("first-is-root needs at least one participant")
        out = L.copy()
        out[:, 1] += out[:, 0]
        out[:, 0] = 0.0
        return out


@dataclass(frozen=True)
class TimeDependent(Rescaling):
    """The root's value goes to the participants with the given join orders."""

    orders: tuple[int, ...] = (1, 2)
    weights: tuple[float, ...] = (0.5, 0.5)
    name = "time"

    def __post_init__(self):
        object.__setattr__(self, "orders", tuple(int(o) for o in self.orders))
        object.__setattr__(self, "weights", _check_proportions(self.weights))
        if len(self.orders) != len(self.weights) or len(set(self.orders)) != len(self.orders):
            raise ValueError("orders must be distinct and match weights one-to-one")
        if min(self.orders) < 1:
            raise ValueError("join orders start at 1")

    def targets(self, tree):
        if max(self.orders) >= len(tree):
            raise RescalingError(f"tree has no participant with join order {max(self.orders)}")
        return [(tree.node_at(o), w) for o, w in zip(self.orders, self.weights)]

    def apply_matrix(self, L, parents):
        if max(self.orders) >= L.shape[1]:
            raise RescalingError(f"trees have no participant with join order {max(self.orders)}")
        out = L.copy()
        for o, w in zip(self.orders, self.weights):
            out[:, o] += w * L[:, 0]
        out[:, 0] = 0.0
        return out


@dataclass(frozen=True)
class StructureDependent(Rescaling):
    """The root's value goes to every node at a given depth (1 = root's children).

    With ``weights=None`` the selected nodes share equally; otherwise the
    weights are matched to the selected nodes in join order and their count
    must agree.
    """

    depth: int = 1
    weights: tuple[float, ...] | None = None
    name = "structure"

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be at least 1")
        if self.weights is not None:
            object.__setattr__(self, "weights", _check_proportions(self.weights))

    def targets(self, tree):
        chosen = [u for u in tree.participants if tree.depth(u) == self.depth]
        if not chosen:
            raise RescalingError(f"tree has no nodes at depth {self.depth}")
        if self.weights is None:
            return [(u, 1.0 / len(chosen)) for u in chosen]
        if len(self.weights) != len(chosen):
            raise RescalingError(f"{len(chosen)} nodes at depth {self.depth} but {len(self.weights)} weights")
        return list(zip(chosen, self.weights))

    def apply_matrix(self, L, parents):
        V, m = L.shape
        parents = np.broadcast_to(np.asarray(parents), (V, m))
        depth = np.zeros((V, m), dtype=int)
        rows = np.arange(V)
        for i in range(1, m):
            depth[:, i] = depth[rows, parents[:, i]] + 1
        mask = depth == self.depth
        count = mask.sum(axis=1)
        if np.any(count == 0):
            raise RescalingError(f"some trees have no nodes at depth {self.depth}")
        if self.weights is None:
            share = mask / count[:, None]
        else:
            if np.any(count != len(self.weights)):
                raise RescalingError("selected node count does not match the weights")
            share = np.zeros((V, m))
            rank = np.cumsum(mask, axis=1) - 1
            share[mask] = np.asarray(self.weights)[rank[mask]]
        out = L + share * L[:, :1]
        out[:, 0] = 0.0
        return out


def rescale(profile: LotteryProfile, tree: LotTree, strategy: Rescaling) -> LotteryProfile:
    return strategy.apply(profile, tree)


def rescaled_lottery_values(
    tree: LotTree, params: PiParams = DEFAULT_PI, strategy: Rescaling | None = None
) -> LotteryProfile:
    strategy = FirstIsRoot() if strategy is None else strategy
    return strategy.apply(lottery_values(tree, params), tree)


def sybil_merge_value(tree: LotTree, sybil_ids: Iterable[str], params: PiParams = DEFAULT_PI) -> float:
    """Total unrescaled lottery value held by a set of Sybil replicas."""
    profile = lottery_values(tree, params)
    ids = list(sybil_ids)
    for u in ids:
        if u not in tree:
            raise TreeError(f"unknown node {u!r}")
    return math.fsum(profile[u] for u in ids)


def parse_rescaling(name: str, **kw) -> Rescaling:
    """Map a command-line name to a strategy."""
    table = {
        "none": NoRescaling,
        "first-is-root": FirstIsRoot,
        "time": TimeDependent,
        "structure": StructureDependent,
    }
    try:
        return table[name](**kw)
    except KeyError:
        raise ValueError(f"unknown rescaling {name!r}; choose from {', '.join(table)}") from None
