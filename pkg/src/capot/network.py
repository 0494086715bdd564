"""Residual flow network on integer capacities.

Node layout for a transport instance with ``m`` sources and ``n`` sinks:
``0`` is the super source, ``1..m`` the sources, ``m+1..m+n`` the sinks and
``m+n+1`` the super sink. Arc ``e`` and its reverse ``e ^ 1`` are stored in
pairs.
"""

from __future__ import annotations

import heapq
from collections import deque
from fractions import Fraction

from .instance import TransportInstance


class Network:
    def __init__(self, num_nodes: int):
        self.num_nodes = num_nodes
        self.adj: list[list[int]] = [[] for _ in range(num_nodes)]
        self.head: list[int] = []
        self.tail: list[int] = []
        self.cap: list[int] = []
        self.cost: list[Fraction] = []

    def add_arc(self, u: int, v: int, cap: int, cost=Fraction(0)) -> int:
        e = len(self.head)
        for a, b, c, k in ((u, v, cap, cost), (v, u, 0, -cost)):
            self.tail.append(a)
            self.head.append(b)
            self.cap.append(int(c))
            self.cost.append(k)
            self.adj[a].append(len(self.head) - 1)
        return e

    def flow_on(self, e: int) -> int:
        return self.cap[e ^ 1]

    # -- max flow ---------------------------------------------------------

    def _bfs_path(self, s: int, t: int) -> list[int] | None:
        prev = [-1] * self.num_nodes
        seen = [False] * self.num_nodes
        seen[s] = True
        q = deque([s])
        while q:
            u = q.popleft()
            for e in self.adj[u]:
                v = self.head[e]
                if self.cap[e] > 0 and not seen[v]:
                    seen[v] = True
                    prev[v] = e
                    if v == t:
                        path = []
                        while v != s:
                            path.append(prev[v])
                            v = self.tail[prev[v]]
                        return path
                    q.append(v)
        return None

    def max_flow(self, s: int, t: int) -> int:
        """Edmonds-Karp: augment along shortest (fewest-arc) paths."""
        total = 0
        while (path := self._bfs_path(s, t)) is not None:
            push = min(self.cap[e] for e in path)
            for e in path:
                self.cap[e] -= push
                self.cap[e ^ 1] += push
            total += push
        return total

    def reachable(self, s: int) -> list[bool]:
        seen = [False] * self.num_nodes
        seen[s] = True
        q = deque([s])
        while q:
            u = q.popleft()
            for e in self.adj[u]:
                v = self.head[e]
                if self.cap[e] > 0 and not seen[v]:
                    seen[v] = True
                    q.append(v)
        return seen

    # -- min-cost flow ----------------------------------------------------

    def initial_potentials(self, s: int) -> list[Fraction]:
        """Bellman-Ford distances from ``s`` over arcs with capacity.

        Unreachable nodes get the largest finite distance, which keeps every
        reduced cost nonnegative.
        """
        dist: list[Fraction | None] = [None] * self.num_nodes
        dist[s] = Fraction(0)
        for _ in range(self.num_nodes - 1):
            changed = False
            for e in range(len(self.head)):
                u, v = self.tail[e], self.head[e]
                if self.cap[e] > 0 and dist[u] is not None:
                    nd = dist[u] + self.cost[e]
                    if dist[v] is None or nd < dist[v]:
                        dist[v] = nd
                        changed = True
            if not changed:
                break
        top = max(d for d in dist if d is not None)
        return [top if d is None else d for d in dist]

    def _dijkstra(self, s: int, pot: list[Fraction]):
        dist: list[Fraction | None] = [None] * self.num_nodes
        prev = [-1] * self.num_nodes
        done = [False] * self.num_nodes
        dist[s] = Fraction(0)
        heap = [(Fraction(0), s)]
        while heap:
            d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            for e in self.adj[u]:
                if self.cap[e] <= 0:
                    continue
                v = self.head[e]
                rc = self.cost[e] + pot[u] - pot[v]
                if rc < 0:
                    raise AssertionError("negative reduced cost in Dijkstra")
                nd = d + rc
                if dist[v] is None or nd < dist[v]:
                    dist[v] = nd
                    prev[v] = e
                    heapq.heappush(heap, (nd, v))
        return dist, prev

    def min_cost_flow(self, s: int, t: int, demand: int) -> tuple[int, list[Fraction]]:
        """Successive shortest paths with node potentials.

        Sends up to ``demand`` units from ``s`` to ``t``; returns the amount
        sent and the final potentials, under which every arc with residual
        capacity has nonnegative reduced cost.
        """
        pot = self.initial_potentials(s)
        sent = 0
        while sent < demand:
            dist, prev = self._dijkstra(s, pot)
            reached = [d for d in dist if d is not None]
            top = max(reached)
            pot = [p + (top if d is None else d) for p, d in zip(pot, dist)]
            if dist[t] is None:
                break
            path = []
            v = t
            while v != s:
                path.append(prev[v])
                v = self.tail[prev[v]]
            push = min(min(self.cap[e] for e in path), demand - sent)
            for e in path:
                self.cap[e] -= push
                self.cap[e ^ 1] += push
            sent += push
        return sent, pot


def bipartite_network(inst: TransportInstance, with_costs: bool = False):
    """Build the source -> i -> j -> sink network in units of ``1/denom``.

    Returns the network and the ``m x n`` table of middle-arc indices.
    """
    m, n = inst.shape
    net = Network(m + n + 2)
    s, t = 0, m + n + 1
    for i in range(m):
        net.add_arc(s, 1 + i, int(inst.f_units[i]))
    middle = [[-1] * n for _ in range(m)]
    for i in range(m):
        for j in range(n):
            c = Fraction(float(inst.cost[i, j])) if with_costs else Fraction(0)
            middle[i][j] = net.add_arc(1 + i, 1 + m + j, int(inst.hbar_units[i, j]), c)
    for j in range(n):
        net.add_arc(1 + m + j, t, int(inst.g_units[j]))
    return net, middle
