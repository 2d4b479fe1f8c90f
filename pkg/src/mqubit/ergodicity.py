"""Graph-theoretic ergodicity analysis of the discretized process.

The transition matrix is read as a directed graph (edge k -> i where the
matrix entry (i, k) is positive); the process is called ergodic when the
graph is a single strongly connected component.  When it is not, the leaf
supernodes of the SCC condensation are invariant angle subsets of the
*continuous* dynamics, and a sufficient slope condition on those subsets
certifies a genuinely localized distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core_maps import (
    TWO_PI,
    Outcome,
    SetupParams,
    eigenangles,
    kraus_matrices,
    theta_map_derivative,
)
from .master_equation import SparseMarkov

#: overlaps below this fraction of a cell are floating-point phantoms
PHANTOM_EDGE_FLOOR = 1e-15


@dataclass
class TransitionGraph:
    """Successor lists in CSR layout: node k's successors are
    ``indices[indptr[k]:indptr[k+1]]``."""

    N: int
    indptr: np.ndarray
    indices: np.ndarray

    @property
    def edge_count(self) -> int:
        return int(self.indices.size)


def build_graph(m: SparseMarkov, threshold: float = 0.0) -> TransitionGraph:
    """Directed graph of transitions with weight above ``threshold``.

    An entry (i, k) of the matrix is the k -> i transition weight, so
    successors of k are the row indices of column k; entries below the
    phantom-edge floor are dropped regardless of ``threshold``.
    """
    csc = m.matrix.tocsc()
    keep = csc.data > max(threshold, PHANTOM_EDGE_FLOOR)
    data = np.where(keep, csc.data, 0.0)
    pruned = csc.copy()
    pruned.data = data
    pruned.eliminate_zeros()
    return TransitionGraph(N=m.N, indptr=pruned.indptr.copy(), indices=pruned.indices.copy())


@dataclass
class SccPartition:
    """SCCs ordered by smallest member node; ``labels[v]`` is v's component id."""

    count: int
    labels: np.ndarray
    components: list[np.ndarray]


def strongly_connected_components(g: TransitionGraph) -> SccPartition:
    """Tarjan's algorithm with an explicit stack (no recursion limit)."""
    n = g.N
    indptr, indices = g.indptr, g.indices
    UNVISITED = -1
    index = np.full(n, UNVISITED, dtype=np.int64)
    lowlink = np.zeros(n, dtype=np.int64)
    on_stack = np.zeros(n, dtype=bool)
    comp = np.full(n, UNVISITED, dtype=np.int64)
    stack: list[int] = []
    counter = 0
    ncomp = 0
    for root in range(n):
        if index[root] != UNVISITED:
            continue
        work = [(root, 0)]
        while work:
            v, ptr = work[-1]
            if ptr == 0:
                index[v] = lowlink[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            for ei in range(indptr[v] + ptr, indptr[v + 1]):
                u = indices[ei]
                if index[u] == UNVISITED:
                    work[-1] = (v, ei - indptr[v] + 1)
                    work.append((int(u), 0))
                    advanced = True
                    break
                if on_stack[u]:
                    if index[u] < lowlink[v]:
                        lowlink[v] = index[u]
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                if lowlink[v] < lowlink[parent]:
                    lowlink[parent] = lowlink[v]
            if lowlink[v] == index[v]:
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp[w] = ncomp
                    if w == v:
                        break
                ncomp += 1
    members: list[list[int]] = [[] for _ in range(ncomp)]
    for v in range(n):
        members[comp[v]].append(v)
    order = sorted(range(ncomp), key=lambda c: members[c][0])
    relabel = np.empty(ncomp, dtype=np.int64)
    for new, old in enumerate(order):
        relabel[old] = new
    labels = relabel[comp]
    components = [np.asarray(members[old], dtype=np.int64) for old in order]
    return SccPartition(count=ncomp, labels=labels, components=components)


def _cells_to_intervals(cells: np.ndarray, n: int) -> list[tuple[float, float]]:
    """Merge contiguous cell runs into [lo, hi] angle intervals (split at +-pi)."""
    dtheta = TWO_PI / n
    cells = np.sort(cells)
    runs = []
    start = prev = int(cells[0])
    for c in cells[1:]:
        c = int(c)
        if c == prev + 1:
            prev = c
        else:
            runs.append((start, prev))
            start = prev = c
    runs.append((start, prev))
    return [(-math.pi + a * dtheta, -math.pi + (b + 1) * dtheta) for a, b in runs]


def condensation_leaves(
    g: TransitionGraph, sccs: SccPartition
) -> list[list[tuple[float, float]]]:
    """Invariant angle subsets: cells of leaf supernodes of the condensation.

    A supernode is a leaf when it has no edge to another supernode; its
    cells can never be left, at any discretization, so they bound the
    support of the converged distribution.
    """
    labels = sccs.labels
    src = np.repeat(np.arange(g.N), np.diff(g.indptr))
    cross = labels[src] != labels[g.indices]
    has_out = np.zeros(sccs.count, dtype=bool)
    has_out[np.unique(labels[src][cross])] = True
    leaves = []
    for c in range(sccs.count):
        if not has_out[c]:
            leaves.append(_cells_to_intervals(sccs.components[c], g.N))
    return leaves


def phenomenological_nonergodicity(p: SetupParams) -> bool:
    """Parameter-space nonergodicity condition, no discretization involved.

    True iff both Kraus matrices have GC eigenangles and each map
    contracts at the *other* matrix's dominant eigenangle
    (``|Theta'_mu(theta_{-mu})| < 1`` for both mu): then small intervals
    around the two eigenangles form an invariant subset.
    """
    kp = kraus_matrices(p)
    ea_minus = eigenangles(p, Outcome.NO_CLICK, kp)
    ea_plus = eigenangles(p, Outcome.CLICK, kp)
    if ea_minus is None or ea_plus is None:
        return False
    slope_plus_at_minus = theta_map_derivative(ea_minus.dominant, Outcome.CLICK, p, kp)
    slope_minus_at_plus = theta_map_derivative(ea_plus.dominant, Outcome.NO_CLICK, p, kp)
    return abs(slope_plus_at_minus) < 1.0 and abs(slope_minus_at_plus) < 1.0


def localization_condition(
    p: SetupParams,
    subset: list[tuple[float, float]],
    samples_per_interval: int = 64,
    c: float = 1.0 - 1e-6,
) -> bool:
    """Sufficient condition for a localized distribution on ``subset``.

    Checks ``sum_mu |Theta'_mu(theta)| <= c`` at ``samples_per_interval``
    points per interval plus the endpoints; if it holds on an invariant
    subset, the support shrinks exponentially and the limit is a set of
    delta peaks.
    """
    if not subset:
        raise ValueError("subset must contain at least one interval")
    kp = kraus_matrices(p)
    worst = 0.0
    for lo, hi in subset:
        pts = np.linspace(lo, hi, samples_per_interval + 2)
        total = np.abs(
            theta_map_derivative(pts, Outcome.NO_CLICK, p, kp)
        ) + np.abs(theta_map_derivative(pts, Outcome.CLICK, p, kp))
        worst = max(worst, float(total.max()))
    return worst <= c


@dataclass
class ErgodicityReport:
    """Connectivity summary of the discretized process."""

    N: int
    scc_count: int
    ergodic: bool
    leaf_subsets: list[list[tuple[float, float]]]
    localization_condition_all_leaves: bool

    def to_json(self) -> dict:
        flat = [[lo, hi] for leaf in self.leaf_subsets for lo, hi in leaf]
        return {
            "scc_count": self.scc_count,
            "ergodic": self.ergodic,
            "leaves": flat,
            "localized": self.localization_condition_all_leaves,
        }


def analyze_ergodicity(m: SparseMarkov, p: SetupParams) -> ErgodicityReport:
    """Full pipeline: graph, SCCs, leaf subsets, localization condition."""
    g = build_graph(m)
    sccs = strongly_connected_components(g)
    ergodic = sccs.count == 1
    leaves = [] if ergodic else condensation_leaves(g, sccs)
    localized = bool(leaves) and all(
        localization_condition(p, leaf) for leaf in leaves
    )
    return ErgodicityReport(
        N=m.N,
        scc_count=sccs.count,
        ergodic=ergodic,
        leaf_subsets=leaves,
        localization_condition_all_leaves=localized,
    )
