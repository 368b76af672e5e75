"""
Degree-2 optical topologies: the base ring, the per-phase edge sets E_k and the
residue-class subrings they decompose into, plus reconfiguration plans.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property

import networkx as nx

from .ternary import phase_count

MAX_DEGREE = 2


def _edge(u, v):
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True)
class Topology:
    """Undirected edge set over n nodes.

    `stride` is the ring offset the edges were generated from (1 for the base
    ring); routing walks subrings in steps of `stride`.
    """

    n: int
    edges: tuple
    stride: int = 1

    @classmethod
    def from_edges(cls, n, edges, stride=1):
        return cls(n, tuple(sorted(_edge(u, v) for u, v in edges)), stride)

    @cached_property
    def graph(self):
        g = nx.MultiGraph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges)
        return g

    @cached_property
    def edge_set(self):
        return frozenset(self.edges)

    def has_link(self, u, v):
        return _edge(u, v) in self.edge_set

    def degree(self):
        """Degree of every node, counting duplicate edges, as a dict."""
        return dict(self.graph.degree())

    def components(self):
        """Connected components as sorted tuples, ordered by smallest member."""
        return sorted(tuple(sorted(c)) for c in nx.connected_components(self.graph))

    def dump(self):
        """One sorted edge 'u v' per line."""
        return "".join(f"{u} {v}\n" for u, v in self.edges)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    over_degree: dict = field(default_factory=dict)
    duplicate_edges: tuple = ()
    self_loops: tuple = ()

    @property
    def offending_nodes(self):
        return sorted(self.over_degree)


@dataclass(frozen=True)
class SubringPartition:
    k: int
    radix: int
    classes: tuple

    @property
    def class_size(self):
        return len(self.classes[0])


@dataclass(frozen=True)
class ReconfigPlan:
    """Reconfiguration schedule x = (x_0, ..., x_{s-1}).

    x_0 is the free initial setup of the base ring and must be set; only
    x_1 .. x_{s-1} count towards R.
    """

    x: tuple

    def __post_init__(self):
        if not self.x:
            raise ValueError("A plan needs at least one phase")
        if not self.x[0]:
            raise ValueError("x_0 (initial ring setup) must be set")
        object.__setattr__(self, "x", tuple(bool(v) for v in self.x))

    @classmethod
    def static(cls, s):
        return cls((True,) + (False,) * (s - 1))

    @classmethod
    def every_phase(cls, s):
        return cls((True,) * s)

    @classmethod
    def single_boundary(cls, s, k):
        """Reconfigure only before phase k (1 <= k < s)."""
        if not 1 <= k < s:
            raise ValueError(f"Boundary {k} outside [1, {s})")
        return cls(tuple(i == 0 or i == k for i in range(s)))

    @property
    def s(self):
        return len(self.x)

    @property
    def R(self):
        return sum(self.x[1:])

    def active_phase(self, k):
        """Index of the most recent reconfiguration at or before phase k."""
        return max(j for j in range(k + 1) if self.x[j])

    def segments(self):
        """Lengths of the runs of phases served without reconfiguration."""
        starts = [k for k, flag in enumerate(self.x) if flag] + [self.s]
        return tuple(b - a for a, b in zip(starts, starts[1:]))

    def __str__(self):
        return "".join("1" if v else "0" for v in self.x)


def build_base_ring(n):
    """Ring {i, (i + 1) mod n}; n = 2 gives a single link."""
    if n < 2:
        raise ValueError(f"Ring size must be at least 2, got {n}")
    return Topology.from_edges(n, {_edge(i, (i + 1) % n) for i in range(n)}, stride=1)


def reconfigure(n, k, radix=3):
    """Edge set E_k = {{i, (i + radix**k) mod n}} for phase k.

    Two-node subrings are a single link rather than a double edge.
    """
    s = phase_count(n, radix)
    if not 0 <= k < s:
        raise ValueError(f"Phase {k} outside [0, {s}) for n={n}, radix={radix}")
    stride = radix**k
    if n % stride:
        raise ValueError(f"Offset {stride} does not divide ring size {n}")
    return Topology.from_edges(n, {_edge(i, (i + stride) % n) for i in range(n)}, stride=stride)


def topology_for_phase(plan, k, n, radix=3):
    """Active topology of phase k: E_j for the latest reconfiguration j <= k."""
    return reconfigure(n, plan.active_phase(k), radix)


def subrings(n, k, radix=3):
    """Residue classes S_i^(k) = {u : u = i (mod radix**k)}."""
    modulus = radix**k
    if modulus > n or n % modulus:
        raise ValueError(f"{radix}**{k} does not divide ring size {n}")
    classes = tuple(tuple(range(i, n, modulus)) for i in range(modulus))
    return SubringPartition(k, radix, classes)


def validate(topology):
    """Check the two-port constraint: degree <= 2, no duplicate edges, no self-loops."""
    counts = Counter(topology.edges)
    duplicates = tuple(sorted(e for e, c in counts.items() if c > 1))
    loops = tuple(sorted(e for e in counts if e[0] == e[1]))
    over = {u: d for u, d in topology.degree().items() if d > MAX_DEGREE}
    return ValidationReport(not (over or duplicates or loops), over, duplicates, loops)


def check_subring_minimality(n, k, radix=3):
    """Whether the phase-k subrings hold exactly the nodes needed from phase k on.

    True iff (a) every peer u +/- radix**j, j >= k, stays in u's residue class
    mod radix**k, and (b) the connected components of the future-peer graph
    (all offsets radix**j, j >= k) are exactly the classes S_i^(k).
    """
    s = phase_count(n, radix)
    modulus = radix**k
    future_offsets = [radix**j for j in range(k, s)]
    for u in range(n):
        for step in future_offsets:
            if (u - step) % n % modulus != u % modulus or (u + step) % n % modulus != u % modulus:
                return False

    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_edges_from((u, (u + step) % n) for u in range(n) for step in future_offsets)
    closure = {frozenset(c) for c in nx.connected_components(g)}
    classes = {frozenset(c) for c in subrings(n, k, radix).classes}
    return closure == classes
