"""Rooted solicitation trees with contribution bookkeeping.

Nodes are stored in join order: index 0 is the crowdsourcer (root), index
``i`` is the ``i``-th participant to join.  Because a solicitee can never
join before its solicitor, every parent index is smaller than its child's
index, which lets subtree sums be computed in a single reverse sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

ROOT = "r"
NO_PARENT = "-"


class TreeError(ValueError):
    """Structural problem with a tree or a node reference."""


class DegenerateTreeError(TreeError):
    """The tree has zero total contribution, so lottery values are undefined."""


class LotTree:
    """A rooted, contribution-weighted solicitation tree.

    ``add_node`` grows the tree in place (it is the builder); every other
    transformation returns a new tree.
    """

    def __init__(self, root: str = ROOT):
        self._ids: list[str] = [root]
        self._parent: list[int] = [-1]
        self._contribution: list[float] = [0.0]
        self._index: dict[str, int] = {root: 0}

    # -- construction -------------------------------------------------------

    def add_node(self, parent: str, contribution: float, node_id: str | None = None) -> str:
        if parent not in self._index:
            raise TreeError(f"unknown parent {parent!r}")
        contribution = float(contribution)
        if not contribution >= 0 or math.isinf(contribution):
            raise TreeError(f"contribution must be a finite non-negative number, got {contribution!r}")
        if node_id is None:
            node_id = f"u{len(self._ids)}"
            while node_id in self._index:
                node_id += "'"
        elif node_id in self._index:
            raise TreeError(f"duplicate node id {node_id!r}")
        if not node_id or any(ch.isspace() for ch in node_id) or node_id == NO_PARENT:
            raise TreeError(f"invalid node id {node_id!r}")
        self._index[node_id] = len(self._ids)
        self._ids.append(node_id)
        self._parent.append(self._index[parent])
        self._contribution.append(contribution)
        return node_id

    @classmethod
    def from_arrays(
        cls,
        parents: Sequence[int],
        contributions: Sequence[float],
        ids: Sequence[str] | None = None,
    ) -> "LotTree":
        """Build from parent indices in join order (``parents[0]`` is ignored)."""
        if len(parents) != len(contributions):
            raise TreeError("parents and contributions differ in length")
        if ids is None:
            ids = [ROOT] + [f"u{i}" for i in range(1, len(parents))]
        tree = cls(ids[0])
        if contributions[0] != 0:
            raise TreeError("the root cannot contribute")
        for i in range(1, len(parents)):
            p = int(parents[i])
            if not 0 <= p < i:
                raise TreeError(f"node {i} has parent index {p}; parents must join earlier")
            tree.add_node(ids[p], contributions[i], ids[i])
        return tree

    def copy(self) -> "LotTree":
        other = LotTree.__new__(LotTree)
        other._ids = list(self._ids)
        other._parent = list(self._parent)
        other._contribution = list(self._contribution)
        other._index = dict(self._index)
        return other

    def with_contribution(self, node: str, contribution: float) -> "LotTree":
        i = self.index(node)
        if i == 0:
            raise TreeError("the root's contribution is fixed at zero")
        contribution = float(contribution)
        if not contribution >= 0 or math.isinf(contribution):
            raise TreeError(f"contribution must be a finite non-negative number, got {contribution!r}")
        other = self.copy()
        other._contribution[i] = contribution
        return other

    # -- queries ------------------------------------------------------------

    @property
    def root(self) -> str:
        return self._ids[0]

    @property
    def nodes(self) -> tuple[str, ...]:
        """All node ids, root first, then participants in join order."""
        return tuple(self._ids)

    @property
    def participants(self) -> tuple[str, ...]:
        return tuple(self._ids[1:])

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, node: object) -> bool:
        return node in self._index

    def __iter__(self):
        return iter(self._ids)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LotTree):
            return NotImplemented
        return (
            self._ids == other._ids
            and self._parent == other._parent
            and self._contribution == other._contribution
        )

    def __repr__(self) -> str:
        return f"LotTree({len(self._ids) - 1} participants, C(T)={sum(self._contribution):g})"

    def index(self, node: str) -> int:
        try:
            return self._index[node]
        except KeyError:
            raise TreeError(f"unknown node {node!r}") from None

    def parent(self, node: str) -> str | None:
        p = self._parent[self.index(node)]
        return None if p < 0 else self._ids[p]

    def contribution(self, node: str) -> float:
        return self._contribution[self.index(node)]

    def join_order(self, node: str) -> int | None:
        i = self.index(node)
        return i if i > 0 else None

    def node_at(self, order: int) -> str:
        """The participant with the given join order (1 = first)."""
        if not 1 <= order < len(self._ids):
            raise TreeError(f"no participant with join order {order}")
        return self._ids[order]

    def children(self, node: str) -> list[str]:
        i = self.index(node)
        return [self._ids[j] for j in range(i + 1, len(self._ids)) if self._parent[j] == i]

    def depth(self, node: str) -> int:
        d, i = 0, self.index(node)
        while self._parent[i] >= 0:
            i = self._parent[i]
            d += 1
        return d

    def subtree(self, node: str) -> list[str]:
        """Ids in the subtree rooted at ``node`` (inclusive), in join order."""
        i = self.index(node)
        inside = {i}
        for j in range(i + 1, len(self._ids)):
            if self._parent[j] in inside:
                inside.add(j)
        return [self._ids[j] for j in sorted(inside)]

    def parent_indices(self) -> tuple[int, ...]:
        return tuple(self._parent)

    def contributions(self) -> tuple[float, ...]:
        return tuple(self._contribution)

    def total_contribution(self) -> float:
        return math.fsum(self._contribution)


@dataclass(frozen=True)
class SubtreeAggregate:
    subtree_contribution: dict[str, float]
    total: float


def add_node(tree: LotTree, parent: str, contribution: float, node_id: str | None = None) -> str:
    return tree.add_node(parent, contribution, node_id)


def aggregate(tree: LotTree) -> SubtreeAggregate:
    """Bottom-up subtree contribution sums.

    Raises DegenerateTreeError when the tree has no positive contribution.
    """
    contrib = tree.contributions()
    parents = tree.parent_indices()
    sub = list(contrib)
    for i in range(len(sub) - 1, 0, -1):
        sub[parents[i]] += sub[i]
    total = math.fsum(contrib)
    if not total > 0:
        raise DegenerateTreeError("total contribution is zero; lottery values are undefined")
    sub[0] = total
    return SubtreeAggregate(dict(zip(tree.nodes, sub)), total)


def mutate_contribution(tree: LotTree, node: str, new_contribution: float) -> LotTree:
    return tree.with_contribution(node, new_contribution)


def build_tree(edges: Iterable[tuple[str, str, float]], root: str = ROOT) -> LotTree:
    """Build from ``(node, parent, contribution)`` triples given in join order."""
    tree = LotTree(root)
    for node, parent, contribution in edges:
        tree.add_node(parent, contribution, node)
    return tree


# -- text serialization -----------------------------------------------------


def _format_number(x: float) -> str:
    if float(x).is_integer():
        return str(int(x))
    return repr(float(x))


def dumps(tree: LotTree) -> str:
    """One node per line: ``node_id parent_id contribution join_order``."""
    lines = [f"{tree.root} {NO_PARENT} 0 {NO_PARENT}"]
    for node in tree.participants:
        lines.append(
            f"{node} {tree.parent(node)} {_format_number(tree.contribution(node))} {tree.join_order(node)}"
        )
    return "\n".join(lines) + "\n"


def loads(text: str, source: str = "<string>") -> LotTree:
    """Parse the line format written by :func:`dumps`.

    Blank lines and ``#`` comments are skipped.  Lines may come in any
    order; they are applied by join order.  Errors carry ``source:line``.
    """
    root_line = None
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise TreeError(f"{source}:{lineno}: expected 4 fields, got {len(parts)}")
        node, parent, contribution, order = parts
        if parent == NO_PARENT:
            if root_line is not None:
                raise TreeError(f"{source}:{lineno}: second root line")
            if order != NO_PARENT:
                raise TreeError(f"{source}:{lineno}: root must have join order '-'")
            root_line = (lineno, node, contribution)
            continue
        try:
            rows.append((int(order), lineno, node, parent, float(contribution)))
        except ValueError:
            raise TreeError(f"{source}:{lineno}: bad number in {line!r}") from None
    if root_line is None:
        raise TreeError(f"{source}: no root line")
    lineno, root, contribution = root_line
    if float(contribution) != 0:
        raise TreeError(f"{source}:{lineno}: root contribution must be 0")
    rows.sort()
    tree = LotTree(root)
    for expected, (order, lineno, node, parent, contribution) in enumerate(rows, start=1):
        if order != expected:
            raise TreeError(f"{source}:{lineno}: join orders must be 1..n without gaps (got {order})")
        try:
            tree.add_node(parent, contribution, node)
        except TreeError as exc:
            raise TreeError(f"{source}:{lineno}: {exc}") from None
    return tree


def read_tree(path) -> LotTree:
    with open(path) as fh:
        return loads(fh.read(), source=str(path))


def write_tree(tree: LotTree, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(tree))
