"""Cumulative prospect theory valuation of mechanism rewards (gains only)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .mechanisms import K_PACHIRA, ONE_PACHIRA, SHARING_PACHIRA, MechanismSpec


@dataclass(frozen=True)
class CptParams:
    alpha: float = 0.88
    gamma: float = 0.61

    def __post_init__(self):
        for name in ("alpha", "gamma"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")


DEFAULT_CPT = CptParams()


def value(params: CptParams, x: float) -> float:
    if x < 0:
        raise ValueError("only gains are valued")
    return 0.0 if x == 0 else x**params.alpha


def weight(params: CptParams, p: float) -> float:
    """Probability weighting for gains."""
    # tail sums can drift a hair past [0, 1]
    p = min(max(p, 0.0), 1.0)
    if p == 0 or p == 1:
        return float(p)
    g = params.gamma
    pg = p**g
    return pg / (pg + (1 - p) ** g) ** (1 / g)


@dataclass(frozen=True)
class Prospect:
    """Gain outcomes, ascending by gain; any leftover probability is a zero gain."""

    outcomes: tuple[tuple[float, float], ...]

    def __post_init__(self):
        outs = tuple((float(x), float(p)) for x, p in self.outcomes)
        if any(x < 0 for x, _ in outs):
            raise ValueError("gains must be non-negative")
        if any(p < 0 for _, p in outs):
            raise ValueError("probabilities must be non-negative")
        if math.fsum(p for _, p in outs) > 1 + 1e-12:
            raise ValueError("outcome probabilities sum to more than 1")
        if any(a[0] > b[0] for a, b in zip(outs, outs[1:])):
            raise ValueError("outcomes must be sorted by ascending gain")
        object.__setattr__(self, "outcomes", outs)

    @classmethod
    def of(cls, pairs: Iterable[tuple[float, float]]) -> "Prospect":
        return cls(tuple(sorted(pairs)))


def decision_weights(params: CptParams, probs: Sequence[float]) -> list[float]:
    """tau_i = w(p_i + ... + p_m) - w(p_{i+1} + ... + p_m) for ascending gains."""
    m = len(probs)
    tails = [0.0] * (m + 1)
    for i in range(m - 1, -1, -1):
        tails[i] = tails[i + 1] + probs[i]
    return [weight(params, tails[i]) - weight(params, tails[i + 1]) for i in range(m)]


def cpv(params: CptParams, prospect: Prospect) -> float:
    gains = [x for x, _ in prospect.outcomes]
    taus = decision_weights(params, [p for _, p in prospect.outcomes])
    return math.fsum(t * value(params, x) for t, x in zip(taus, gains))


def k_pachira_prospect(budget: float, k: int, L: float) -> Prospect:
    """Binomial number of wins over K independent draws, zero outcome dropped."""
    return Prospect(tuple((budget * i / k, math.comb(k, i) * L**i * (1 - L) ** (k - i)) for i in range(1, k + 1)))


def perceived_reward(mechanism: MechanismSpec, L: float, params: CptParams = DEFAULT_CPT) -> float:
    if not 0 <= L <= 1:
        raise ValueError(f"lottery value must lie in [0, 1], got {L}")
    B = mechanism.budget
    if mechanism.kind == SHARING_PACHIRA:
        return value(params, B * L)
    if mechanism.kind == ONE_PACHIRA:
        return value(params, B) * weight(params, L)
    if mechanism.kind == K_PACHIRA:
        return cpv(params, k_pachira_prospect(B, mechanism.k, L))
    raise ValueError(f"unknown mechanism {mechanism.kind!r}")


def critical_lottery_value(
    budget: float,
    params: CptParams = DEFAULT_CPT,
    k: int | None = None,
    *,
    eps: float = 1e-6,
    tol: float = 1e-6,
    grid: int = 1000,
) -> float | None:
    """Where Sharing-Pachira's perceived reward overtakes the lottery's.

    The lottery is 1-Pachira, or K-Pachira when ``k`` is given.  Returns
    None when the difference never changes sign on (eps, 1 - eps).  A grid
    scan locates the first sign change, then bisection refines it.
    """
    if not budget > 0:
        raise ValueError("budget must be positive")
    lottery = MechanismSpec.one_pachira(budget) if k is None else MechanismSpec.k_pachira(k, "C", budget)
    sharing = MechanismSpec.sharing(budget)

    def diff(L):
        return perceived_reward(sharing, L, params) - perceived_reward(lottery, L, params)

    xs = np.linspace(eps, 1 - eps, grid + 1)
    ds = [diff(x) for x in xs]
    scale = value(params, budget)
    for a, b, da, db in zip(xs.tolist(), xs[1:].tolist(), ds, ds[1:]):
        if da < -1e-12 * scale and db > 1e-12 * scale or da > 1e-12 * scale and db < -1e-12 * scale:
            lo, hi, dlo = a, b, da
            while hi - lo > tol:
                mid = (lo + hi) / 2
                dm = diff(mid)
                if (dm > 0) == (dlo > 0):
                    lo, dlo = mid, dm
                else:
                    hi = mid
            return float((lo + hi) / 2)
    return None


def crossings(budget: float, params: CptParams = DEFAULT_CPT, k: int | None = None, eps: float = 1e-6, grid: int = 1000) -> int:
    """Number of sign changes of perceived(Sharing) - perceived(lottery)."""
    lottery = MechanismSpec.one_pachira(budget) if k is None else MechanismSpec.k_pachira(k, "C", budget)
    sharing = MechanismSpec.sharing(budget)
    scale = value(params, budget)
    signs = []
    for L in np.linspace(eps, 1 - eps, grid + 1):
        d = perceived_reward(sharing, L, params) - perceived_reward(lottery, L, params)
        if abs(d) > 1e-12 * scale:
            signs.append(d > 0)
    return int(sum(a != b for a, b in zip(signs, signs[1:])))


def sweep(budget: float, ks: Sequence[int] = (5, 10), grid: Sequence[float] | None = None, params: CptParams = DEFAULT_CPT):
    """Rows (L, perceived 1-Pachira, perceived K-Pachira for each K, perceived Sharing)."""
    if grid is None:
        grid = np.round(np.arange(1, 100) / 100, 2)
    one = MechanismSpec.one_pachira(budget)
    share = MechanismSpec.sharing(budget)
    kps = [MechanismSpec.k_pachira(k, "C", budget) for k in ks]
    rows = []
    for L in grid:
        L = float(L)
        rows.append(
            (L, perceived_reward(one, L, params), *(perceived_reward(m, L, params) for m in kps), perceived_reward(share, L, params))
        )
    return rows


def format_sweep(rows, ks: Sequence[int] = (5, 10)) -> str:
    head = "L perceived_1P " + " ".join(f"perceived_{k}P" for k in ks) + " perceived_Sharing\n"
    return head + "".join(" ".join(f"{v:.10g}" for v in row) + "\n" for row in rows)
