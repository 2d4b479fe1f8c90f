import math

import numpy as np
import pytest
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from mqubit.core_maps import Outcome, build_params, theta_map
from mqubit.ergodicity import (
    TransitionGraph,
    analyze_ergodicity,
    build_graph,
    condensation_leaves,
    localization_condition,
    phenomenological_nonergodicity,
    strongly_connected_components,
)
from mqubit.master_equation import SparseMarkov, build_markov


def _graph_from_edges(n, edges):
    """TransitionGraph from a successor edge list [(src, dst), ...]."""
    adj = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
    indptr = np.zeros(n + 1, dtype=np.int64)
    flat = []
    for k in range(n):
        indptr[k + 1] = indptr[k] + len(adj[k])
        flat.extend(sorted(adj[k]))
    return TransitionGraph(N=n, indptr=indptr, indices=np.asarray(flat, dtype=np.int64))


def _markov_from_dense(a):
    csr = sparse.csr_matrix(a)
    return SparseMarkov(N=a.shape[0], matrix=csr, band_minus=csr * 0, band_plus=csr)


class TestBuildGraph:
    def test_identity_matrix_all_self_loops(self):
        m = _markov_from_dense(np.eye(7))
        g = build_graph(m)
        assert g.edge_count == 7
        assert strongly_connected_components(g).count == 7

    def test_single_cycle_one_scc(self):
        m = _markov_from_dense(np.roll(np.eye(9), 1, axis=0))
        g = build_graph(m)
        assert strongly_connected_components(g).count == 1

    def test_generic_point_single_scc(self):
        p = build_params(2.92, 3.1, 1.0)
        m = build_markov(p, 1000)
        assert strongly_connected_components(build_graph(m)).count == 1

    def test_phantom_edges_dropped(self):
        a = np.eye(4)
        a[0, 1] = 1e-16  # below the phantom floor
        m = _markov_from_dense(a)
        assert build_graph(m).edge_count == 4

    def test_edge_orientation_is_column_to_row(self):
        # entry (i, k) means k -> i
        a = np.zeros((3, 3))
        a[2, 0] = 1.0  # 0 -> 2
        a[0, 0] = a[1, 1] = a[2, 2] = 0.5
        g = build_graph(_markov_from_dense(a))
        succ0 = g.indices[g.indptr[0] : g.indptr[1]]
        assert set(succ0.tolist()) == {0, 2}


class TestStronglyConnectedComponents:
    def test_two_disconnected_cycles(self):
        g = _graph_from_edges(6, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
        part = strongly_connected_components(g)
        assert part.count == 2
        assert sorted(map(tuple, (c.tolist() for c in part.components))) == [
            (0, 1, 2), (3, 4, 5),
        ]

    def test_five_node_ergodic_example(self):
        # a small irreducible graph: one SCC holding every node
        g = _graph_from_edges(
            5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (2, 0), (3, 1)]
        )
        part = strongly_connected_components(g)
        assert part.count == 1
        assert part.components[0].tolist() == [0, 1, 2, 3, 4]

    def test_four_node_one_way_coupling(self):
        # two 2-cycles, edges only orange -> blue: 2 SCCs
        g = _graph_from_edges(4, [(0, 1), (1, 0), (2, 3), (3, 2), (0, 2)])
        part = strongly_connected_components(g)
        assert part.count == 2
        leaves = condensation_leaves(g, part)
        assert len(leaves) == 1  # the blue pair is invariant

    def test_twelve_node_single_leaf(self):
        # four SCCs chained so exactly one is a leaf
        edges = []
        blocks = [(0, 1, 2), (3, 4, 5), (6, 7, 8), (9, 10, 11)]
        for a, b, c in blocks:
            edges += [(a, b), (b, c), (c, a)]
        edges += [(0, 3), (3, 6), (4, 9), (9, 6)]  # all roads lead to block 2
        g = _graph_from_edges(12, edges)
        part = strongly_connected_components(g)
        assert part.count == 4
        leaves = condensation_leaves(g, part)
        assert len(leaves) == 1

    def test_against_scipy_on_random_graphs(self):
        rng = np.random.default_rng(50)
        for trial in range(20):
            n = int(rng.integers(5, 60))
            density = rng.uniform(0.02, 0.2)
            a = (rng.uniform(size=(n, n)) < density).astype(float)
            m = _markov_from_dense(a + np.eye(n) * 0.01)
            g = build_graph(m)
            mine = strongly_connected_components(g)
            ncomp, labels = connected_components(
                sparse.csr_matrix(a.T + np.eye(n)), directed=True, connection="strong"
            )
            assert mine.count == ncomp
            # partitions agree up to relabeling
            pairs = {(int(a_), int(b_)) for a_, b_ in zip(mine.labels, labels)}
            assert len(pairs) == ncomp

    def test_deterministic_component_order(self):
        g = _graph_from_edges(4, [(3, 2), (2, 3), (1, 0), (0, 1)])
        part = strongly_connected_components(g)
        assert part.components[0].tolist() == [0, 1]
        assert part.components[1].tolist() == [2, 3]


class TestInvariantSubsets:
    def test_ergodic_graph_leaf_is_everything(self):
        p = build_params(2.92, 3.1, 1.0)
        m = build_markov(p, 200)
        g = build_graph(m)
        part = strongly_connected_components(g)
        leaves = condensation_leaves(g, part)
        assert len(leaves) == 1
        total = sum(hi - lo for lo, hi in leaves[0])
        assert total == pytest.approx(2 * math.pi, rel=1e-9)

    def test_leaf_subsets_closed_under_both_maps(self):
        # forward images of the invariant subset stay inside (one-cell slack)
        p = build_params(2.408, 3.285, 1.0)  # nonergodic, near double-projective
        n = 1000
        m = build_markov(p, n)
        rep = analyze_ergodicity(m, p)
        assert not rep.ergodic and rep.leaf_subsets
        pad = 2 * math.pi / n
        for leaf in rep.leaf_subsets:
            for lo, hi in leaf:
                pts = np.linspace(lo + 1e-9, hi - 1e-9, 32)
                for mu in (Outcome.NO_CLICK, Outcome.CLICK):
                    images = np.asarray(theta_map(pts, mu, p))
                    for img in images:
                        inside = any(
                            a - pad <= img <= b + pad for itv in rep.leaf_subsets for a, b in itv
                        )
                        assert inside

    def test_nonergodicity_persists_under_refinement(self):
        p = build_params(2.408, 3.285, 1.0)
        for n in (1000, 2000):
            m = build_markov(p, n)
            assert not analyze_ergodicity(m, p).ergodic


class TestPhenomenologicalCondition:
    def test_double_projective_point_is_nonergodic(self):
        from mqubit.special_cases import find_double_projective_point

        assert phenomenological_nonergodicity(find_double_projective_point(l=2))

    def test_generic_delocalized_point(self):
        assert not phenomenological_nonergodicity(build_params(2.92, 3.1, 1.0))

    def test_frozen_line(self):
        p = build_params(2.0, 2 * math.pi / math.sqrt(8.0), 1.0)
        assert not phenomenological_nonergodicity(p)


class TestLocalizationCondition:
    def test_frozen_sum_of_slopes_is_two(self):
        p = build_params(2.0, 2 * math.pi / math.sqrt(8.0), 1.0)
        assert not localization_condition(p, [(-1.0, 1.0)])

    def test_entire_gc_never_satisfies(self):
        p = build_params(2.92, 3.0, 1.0)
        assert not localization_condition(p, [(-math.pi, math.pi)])

    def test_holds_near_double_projective(self):
        p = build_params(2.408, 3.285, 1.0)
        m = build_markov(p, 1000)
        rep = analyze_ergodicity(m, p)
        assert rep.leaf_subsets
        assert rep.localization_condition_all_leaves

    def test_empty_subset_rejected(self):
        with pytest.raises(ValueError):
            localization_condition(build_params(1.0, 1.0, 1.0), [])


def test_report_json_schema():
    p = build_params(2.408, 3.285, 1.0)
    m = build_markov(p, 500)
    rep = analyze_ergodicity(m, p)
    js = rep.to_json()
    assert set(js) == {"scc_count", "ergodic", "leaves", "localized"}
    assert js["scc_count"] > 1 and not js["ergodic"]
    assert all(len(pair) == 2 for pair in js["leaves"])
