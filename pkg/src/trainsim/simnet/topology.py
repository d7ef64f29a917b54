"""Spanning-tree topologies rooted at the verifier (node id 0)."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import InvalidParameter, TopologyError

KINDS = ("line", "star", "tree")


@dataclass
class Topology:
    kind: str
    n: int
    degree: int | None
    parent: list[int]  # parent[0] == -1; parent[i] for provers 1..n
    height: list[int]  # height[0] == 0
    height_net: int
    children: list[list[int]] = field(repr=False)

    def neighbors(self, node: int) -> list[int]:
        kids = self.children[node]
        if node == 0:
            return kids
        return [self.parent[node], *kids]

    @classmethod
    def from_parents(cls, parents: dict[int, int], kind: str = "custom") -> "Topology":
        """Build from an explicit prover -> parent map; rejects cycles and unreachable nodes."""
        n = len(parents)
        if sorted(parents) != list(range(1, n + 1)):
            raise TopologyError("prover ids must be exactly 1..n", "topology")
        parent = [-1] * (n + 1)
        children: list[list[int]] = [[] for _ in range(n + 1)]
        for node, par in parents.items():
            if not 0 <= par <= n or par == node:
                raise TopologyError(f"node {node} has invalid parent {par}", "topology")
            parent[node] = par
            children[par].append(node)
        for kids in children:
            kids.sort()
        height = [-1] * (n + 1)
        height[0] = 0
        frontier = [0]
        while frontier:
            nxt = []
            for node in frontier:
                for c in children[node]:
                    height[c] = height[node] + 1
                    nxt.append(c)
            frontier = nxt
        unreachable = [i for i in range(1, n + 1) if height[i] < 0]
        if unreachable:
            raise TopologyError(
                f"{len(unreachable)} node(s) have no path to the verifier, e.g. {unreachable[0]}",
                "topology",
            )
        return cls(kind, n, None, parent, height, max(height[1:], default=0), children)


def build_topology(kind: str, n: int, degree: int = 2) -> Topology:
    if n < 1:
        raise InvalidParameter("topology needs at least one prover")
    if kind == "line":
        parent = [-1] + list(range(0, n))
        height = list(range(0, n + 1))
        children = [[i + 1] for i in range(n)] + [[]]
        return Topology(kind, n, None, parent, height, n, children)
    if kind == "star":
        parent = [-1] + [0] * n
        height = [0] + [1] * n
        children = [list(range(1, n + 1))] + [[] for _ in range(n)]
        return Topology(kind, n, None, parent, height, 1, children)
    if kind == "tree":
        if not 2 <= degree <= 12:
            raise InvalidParameter(f"tree degree must be in 2..12, got {degree}")
        # breadth-first, children filled left to right; node 1 is the root prover
        parent = [-1, 0] + [(i - 2) // degree + 1 for i in range(2, n + 1)]
        height = [0] * (n + 1)
        children: list[list[int]] = [[] for _ in range(n + 1)]
        children[0].append(1)
        height[1] = 1
        for i in range(2, n + 1):
            p = parent[i]
            height[i] = height[p] + 1
            children[p].append(i)
        return Topology(kind, n, degree, parent, height, height[n], children)
    raise InvalidParameter(f"unknown topology kind {kind!r}; expected one of {KINDS}")
