"""Winner selection and expected rewards for 1-, K- and Sharing-Pachira.

K-Pachira splits the budget equally: every drawn winner slot pays B/K.
Four selection strategies are supported:

A  K rounds, each winner removed from the pool before the next draw.
B  deterministic top-K by lottery value, ties to the earlier joiner.
C  K independent draws with replacement.
D  K distinct virtual tickets drawn in one round (see ``ticket_inclusion``).

Strategy D needs a concrete ticket model.  Each node's lottery value is an
arc of length ``L(u) * M`` on a circle of ``M`` unit tickets; the arcs are
laid out contiguously after a uniformly random rotation, K distinct
tickets are drawn, and each drawn ticket is resolved to an owner by a
uniform point inside it.  Rotation makes a node's arc position uniform
regardless of the other nodes, so its win distribution depends on its own
value alone, while the draw is still without replacement over tickets.
As ``M`` grows it approaches strategy C.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .lottery import (
    DEFAULT_PI,
    FirstIsRoot,
    LotteryProfile,
    PiParams,
    Rescaling,
    lottery_matrix,
    lottery_values,
)
from .tree import LotTree

ONE_PACHIRA = "1-pachira"
K_PACHIRA = "k-pachira"
SHARING_PACHIRA = "sharing-pachira"
KINDS = (ONE_PACHIRA, K_PACHIRA, SHARING_PACHIRA)
SELECTIONS = ("A", "B", "C", "D")

EXACT_LIMIT = 12  # largest candidate count enumerated exactly for strategy A


class MechanismError(ValueError):
    pass


@dataclass(frozen=True)
class MechanismSpec:
    kind: str = ONE_PACHIRA
    budget: float = 1000.0
    k: int = 1
    selection: str = "C"
    pi: PiParams = DEFAULT_PI
    rescaling: Rescaling = field(default_factory=FirstIsRoot)
    tickets: int = 100

    def __post_init__(self):
        if self.kind not in KINDS:
            raise MechanismError(f"unknown mechanism {self.kind!r}")
        if not self.budget > 0:
            raise MechanismError("budget must be positive")
        if self.kind == K_PACHIRA:
            if self.k < 2:
                raise MechanismError("K-Pachira needs K > 1")
            if self.selection not in SELECTIONS:
                raise MechanismError(f"unknown selection strategy {self.selection!r}")
            if self.selection == "D" and self.tickets < self.k:
                raise MechanismError("strategy D needs at least K tickets")
        elif self.k != 1:
            object.__setattr__(self, "k", 1)

    @classmethod
    def one_pachira(cls, budget=1000.0, **kw):
        return cls(ONE_PACHIRA, budget, **kw)

    @classmethod
    def k_pachira(cls, k, selection="C", budget=1000.0, **kw):
        return cls(K_PACHIRA, budget, k=k, selection=selection, **kw)

    @classmethod
    def sharing(cls, budget=1000.0, **kw):
        return cls(SHARING_PACHIRA, budget, **kw)

    @property
    def label(self) -> str:
        if self.kind == K_PACHIRA:
            return f"{self.k}-pachira({self.selection})"
        return self.kind

    @property
    def linear(self) -> bool:
        """Expected reward is exactly B times the rescaled lottery value."""
        return self.kind != K_PACHIRA or self.selection in ("C", "D")

    def check_tree(self, tree: LotTree) -> None:
        n = len(tree) - 1
        if self.kind == K_PACHIRA and not self.k < n:
            raise MechanismError(f"K-Pachira needs 1 < K < participant count; K={self.k}, participants={n}")


@dataclass(frozen=True)
class RewardProfile:
    expected: dict[str, float]
    budget: float
    method: str = "exact"
    stderr: dict[str, float] | None = None
    seed: int | None = None

    def __getitem__(self, node):
        return self.expected[node]

    def total(self) -> float:
        return math.fsum(self.expected.values())

    @property
    def retained(self) -> float:
        return self.budget - self.total()


class Estimate(float):
    """A Monte Carlo probability estimate; behaves as a float."""

    def __new__(cls, value, stderr, seed=None):
        obj = super().__new__(cls, value)
        obj.stderr = stderr
        obj.seed = seed
        return obj


# -- inclusion probabilities ------------------------------------------------


def strategy_a_inclusion(values: Sequence[float], k: int) -> list[float]:
    """Exact inclusion probabilities for sequential draws without replacement.

    Dynamic programme over drawn sets: P(S) = sum over the last drawn v of
    P(S - v) * L(v) / (1 - L(S - v)).  Zero-valued candidates are never
    drawn; if fewer than K values are positive every positive one wins.
    """
    pos = [i for i, v in enumerate(values) if v > 0]
    out = [0.0] * len(values)
    if len(pos) <= k:
        for i in pos:
            out[i] = 1.0
        return out
    if len(pos) > 24:
        raise MechanismError("too many candidates for exact enumeration")
    w = [values[i] for i in pos]
    total = math.fsum(w)
    w = [x / total for x in w]
    n = len(w)
    prob = {0: 1.0}
    mass = {0: 0.0}
    for size in range(1, k + 1):
        nxt: dict[int, float] = {}
        for S, p in prob.items():
            rest = 1.0 - mass[S]
            for j in range(n):
                bit = 1 << j
                if S & bit:
                    continue
                T = S | bit
                nxt[T] = nxt.get(T, 0.0) + p * w[j] / rest
                if T not in mass:
                    mass[T] = mass[S] + w[j]
        prob = nxt
    incl = [0.0] * n
    for S, p in prob.items():
        for j in range(n):
            if S >> j & 1:
                incl[j] += p
    for j, i in enumerate(pos):
        out[i] = min(incl[j], 1.0)
    return out


def strategy_a_pair_inclusion(values: Sequence[float], index: int) -> float:
    """Closed form for K = 2: L(u) + sum over v != u of L(v) L(u) / (1 - L(v))."""
    lu = values[index]
    return lu + math.fsum(lv * lu / (1 - lv) for j, lv in enumerate(values) if j != index and lv > 0)


def strategy_b_winners(values: Sequence[float], k: int) -> list[int]:
    """Indices of the top-k values; ties go to the lower index (earlier join).

    Index 0 is the root and loses every tie.
    """
    order = sorted(range(len(values)), key=lambda i: (-values[i], i if i > 0 else math.inf))
    return order[:k]


def strategy_c_inclusion(value: float, k: int) -> float:
    return 1.0 - (1.0 - value) ** k


_GL_NODES, _GL_WEIGHTS = leggauss(4)


def _ticket_miss(arc: float, offset: float, k: int, tickets: int) -> float:
    """P(no drawn ticket lands in an arc of ``arc`` tickets starting at ``offset``)."""
    cover: dict[int, float] = {}
    end = offset + arc
    for cell in range(math.floor(offset), math.ceil(end)):
        c = min(end, cell + 1) - max(offset, cell)
        if c > 0:
            key = cell % tickets
            cover[key] = cover.get(key, 0.0) + c
    partial = [c for c in cover.values() if c < 1.0]
    q = len(cover)
    miss = 0
    for r in range(len(partial) + 1):
        if k - r < 0:
            break
        ways = math.comb(tickets - q, k - r)
        if not ways:
            continue
        for subset in itertools.combinations(partial, r):
            miss += ways * math.prod(1.0 - c for c in subset)
    return miss / math.comb(tickets, k)


def ticket_inclusion(value: float, k: int, tickets: int = 100) -> float:
    """Strategy D: P(node with lottery value ``value`` wins at least once).

    Averages the conditional miss probability over the arc's fractional
    offset; the integrand is a polynomial of degree <= 2 between the
    breakpoints, so Gauss-Legendre quadrature is exact.
    """
    if k > tickets:
        raise MechanismError("cannot draw more tickets than exist")
    if value <= 0:
        return 0.0
    if value >= 1:
        return 1.0
    arc = value * tickets
    cut = math.ceil(arc) - arc
    pieces = [(0.0, cut), (cut, 1.0)] if 0 < cut < 1 else [(0.0, 1.0)]
    miss = 0.0
    for lo, hi in pieces:
        half, mid = (hi - lo) / 2, (hi + lo) / 2
        miss += half * sum(w * _ticket_miss(arc, mid + half * x, k, tickets) for x, w in zip(_GL_NODES, _GL_WEIGHTS))
    return min(max(1.0 - miss, 0.0), 1.0)


def inclusion_probability(
    profile: LotteryProfile | Mapping[str, float],
    k: int,
    selection: str,
    node: str,
    *,
    tickets: int = 100,
    trials: int = 200_000,
    seed: int = 0,
) -> float:
    """P(node is among the winners) for a K-winner draw.

    Exact except strategy A over more than ``EXACT_LIMIT`` positive
    candidates, which returns an :class:`Estimate` carrying its standard
    error.
    """
    values = dict(profile.values if isinstance(profile, LotteryProfile) else profile)
    ids = list(values)
    vals = [values[u] for u in ids]
    i = ids.index(node)
    if selection == "C":
        return strategy_c_inclusion(vals[i], k)
    if selection == "D":
        return ticket_inclusion(vals[i], k, tickets)
    if selection == "B":
        return 1.0 if i in strategy_b_winners(vals, k) else 0.0
    if selection == "A":
        if vals[i] <= 0:
            return 0.0
        if sum(v > 0 for v in vals) <= EXACT_LIMIT:
            return strategy_a_inclusion(vals, k)[i]
        rng = np.random.default_rng(seed)
        hits = np.zeros(trials, dtype=bool)
        for t in range(trials):
            hits[t] = i in _draw_a(vals, k, rng)
        p = hits.mean()
        return Estimate(p, math.sqrt(p * (1 - p) / trials), seed)
    raise MechanismError(f"unknown selection strategy {selection!r}")


# -- drawing ----------------------------------------------------------------


def _draw_a(vals, k, rng) -> list[int]:
    w = np.asarray(vals, dtype=float).clip(min=0)
    winners = []
    for _ in range(k):
        total = w.sum()
        if total <= 0:
            break
        j = int(rng.choice(len(w), p=w / total))
        winners.append(j)
        w[j] = 0.0
    return winners


def _draw_d(vals, k, tickets, rng) -> list[int]:
    bounds = np.cumsum(np.asarray(vals, dtype=float)) * tickets
    bounds[-1] = tickets
    shift = rng.uniform(0, tickets)
    cells = rng.choice(tickets, size=k, replace=False)
    points = cells + rng.uniform(size=k)
    pos = (points - shift) % tickets
    owners = np.searchsorted(bounds, pos, side="right")
    return [int(min(o, len(vals) - 1)) for o in owners]


def select_winners(
    profile: LotteryProfile | Mapping[str, float],
    k: int,
    selection: str,
    seed: int | np.random.Generator = 0,
    *,
    tickets: int = 100,
) -> list[str]:
    """Draw K winners.  Strategies C and D may repeat a node."""
    values = dict(profile.values if isinstance(profile, LotteryProfile) else profile)
    ids = list(values)
    vals = [values[u] for u in ids]
    total = math.fsum(vals)
    if abs(total - 1) > 1e-9:
        raise MechanismError(f"lottery values must sum to 1, got {total}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if selection == "A":
        idx = _draw_a(vals, k, rng)
    elif selection == "B":
        idx = strategy_b_winners(vals, k)
    elif selection == "C":
        p = np.clip(np.asarray(vals, dtype=float), 0, None)
        idx = [int(j) for j in rng.choice(len(vals), size=k, p=p / p.sum())]
    elif selection == "D":
        idx = _draw_d(vals, k, tickets, rng)
    else:
        raise MechanismError(f"unknown selection strategy {selection!r}")
    return [ids[j] for j in idx]


# -- expected rewards -------------------------------------------------------


def rescaled_profile(tree: LotTree, spec: MechanismSpec) -> LotteryProfile:
    return spec.rescaling.apply(lottery_values(tree, spec.pi), tree)


def expected_reward(
    tree: LotTree, spec: MechanismSpec, *, trials: int = 100_000, seed: int = 0
) -> RewardProfile:
    """Expected reward of every participant (the root's share is retained)."""
    spec.check_tree(tree)
    profile = rescaled_profile(tree, spec)
    B = spec.budget
    participants = tree.participants
    if spec.linear:
        return RewardProfile({u: B * profile[u] for u in participants}, B)
    ids = list(profile.values)
    vals = [profile[u] for u in ids]
    share = B / spec.k
    if spec.selection == "B":
        winners = {ids[j] for j in strategy_b_winners(vals, spec.k)}
        return RewardProfile({u: share if u in winners else 0.0 for u in participants}, B)
    if sum(v > 0 for v in vals) <= EXACT_LIMIT:
        incl = dict(zip(ids, strategy_a_inclusion(vals, spec.k)))
        return RewardProfile({u: share * incl[u] for u in participants}, B)
    rng = np.random.default_rng(seed)
    hits = np.zeros((trials, len(ids)))
    for t in range(trials):
        hits[t, _draw_a(vals, spec.k, rng)] = 1.0
    mean = hits.mean(axis=0)
    se = hits.std(axis=0, ddof=1) / math.sqrt(trials)
    return RewardProfile(
        {u: share * mean[j] for j, u in enumerate(ids) if u != tree.root},
        B,
        method="monte-carlo",
        stderr={u: share * se[j] for j, u in enumerate(ids) if u != tree.root},
        seed=seed,
    )


def rewards_from_lottery(spec: MechanismSpec, L: np.ndarray) -> np.ndarray:
    """Per-node expected rewards for a batch of rescaled lottery rows.

    Column 0 (root) is set to zero: the root never receives a payout.
    """
    B = spec.budget
    if spec.linear:
        out = B * L
    else:
        share = B / spec.k
        out = np.zeros_like(L)
        for r, row in enumerate(L):
            vals = list(row)
            if spec.selection == "B":
                out[r, strategy_b_winners(vals, spec.k)] = share
            else:
                out[r] = share * np.asarray(strategy_a_inclusion(vals, spec.k))
    out = out.copy()
    out[:, 0] = 0.0
    return out


def expected_reward_matrix(spec: MechanismSpec, parents: np.ndarray, contrib: np.ndarray) -> np.ndarray:
    L = lottery_matrix(parents, contrib, spec.pi)
    return rewards_from_lottery(spec, spec.rescaling.apply_matrix(L, parents))


def payout_range(profile: LotteryProfile, spec: MechanismSpec) -> tuple[float, float]:
    """Smallest and largest total payout over all drawing outcomes.

    The root's winnings are never paid out.
    """
    B = spec.budget
    root_value = profile[profile.root]
    others = [v for u, v in profile.items() if u != profile.root and v > 0]
    if spec.kind == SHARING_PACHIRA:
        paid = B * math.fsum(profile.participants().values())
        return paid, paid
    if spec.kind == ONE_PACHIRA:
        hi = B if others else 0.0
        lo = 0.0 if root_value > 0 else hi
        return lo, hi
    k, share = spec.k, B / spec.k
    if spec.selection == "B":
        ids = list(profile.values)
        winners = strategy_b_winners([profile[u] for u in ids], k)
        paid = share * sum(1 for j in winners if ids[j] != profile.root)
        return paid, paid
    if spec.selection == "A":
        npos = len(others)
        root_can = root_value > 0
        hi = share * min(k, npos)
        lo = share * min(k - 1 if root_can else k, npos)
        return lo, hi
    if root_value <= 0:
        paid = share * k if others else 0.0
        return paid, paid
    root_max = k if spec.selection == "C" else min(k, math.ceil(root_value * spec.tickets) + 1)
    return share * (k - root_max), (share * k if others else 0.0)


# -- Monte Carlo and transcripts -------------------------------------------


def simulate_rewards(tree: LotTree, spec: MechanismSpec, trials: int, seed: int = 0):
    """Empirical mean and standard error of each participant's realized reward."""
    profile = rescaled_profile(tree, spec)
    ids = list(profile.values)
    vals = np.array([profile[u] for u in ids]).clip(min=0)
    rng = np.random.default_rng(seed)
    n = len(ids)
    if spec.kind == SHARING_PACHIRA:
        r = spec.budget * vals
        return dict(zip(ids[1:], r[1:])), dict.fromkeys(ids[1:], 0.0)
    k = spec.k
    share = spec.budget / k
    if spec.kind == ONE_PACHIRA or spec.selection == "C":
        draws = rng.choice(n, size=(trials, k), p=vals / vals.sum())
        counts = np.zeros((trials, n))
        for j in range(k):
            counts[np.arange(trials), draws[:, j]] += 1
    else:
        counts = np.zeros((trials, n))
        for t in range(trials):
            for j in select_winners(dict(zip(ids, vals / vals.sum())), k, spec.selection, rng, tickets=spec.tickets):
                counts[t, ids.index(j)] += 1
    rewards = share * counts
    mean = rewards.mean(axis=0)
    se = rewards.std(axis=0, ddof=1) / math.sqrt(trials)
    return dict(zip(ids[1:], mean[1:])), dict(zip(ids[1:], se[1:]))


def draw_transcript(tree: LotTree, spec: MechanismSpec, trials: int, seed: int = 0) -> list[tuple[int, list[str], float]]:
    """Audit log of repeated drawings: (trial, winners, payout per winner slot).

    Root wins are listed but pay nothing.
    """
    if spec.kind == SHARING_PACHIRA:
        raise MechanismError("Sharing-Pachira has no drawing")
    profile = rescaled_profile(tree, spec)
    rng = np.random.default_rng(seed)
    rows = []
    for t in range(trials):
        winners = select_winners(profile, spec.k, spec.selection if spec.kind == K_PACHIRA else "C", rng, tickets=spec.tickets)
        rows.append((t, winners, spec.budget / spec.k))
    return rows


def format_transcript(rows) -> str:
    return "".join(f"{t} {','.join(w)} {p!r}\n" for t, w, p in rows)
