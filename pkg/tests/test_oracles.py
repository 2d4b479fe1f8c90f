import math

import numpy as np
import pytest

from mqubit.core_maps import Outcome, apply_kraus, build_params, gc_state
from mqubit.oracles import (
    DepthTooLarge,
    chained_evolution,
    enumerate_tree,
    evolution_operator,
    hamiltonian_matrix,
    kraus_from_hamiltonian,
    trajectory_tree,
)

from conftest import circ_dist, random_param_sets


def test_evolution_is_unitary():
    for p in random_param_sets(50, seed=30):
        u = evolution_operator(p)
        assert np.abs(u @ u.conj().T - np.eye(4)).max() < 1e-12


def test_hamiltonian_structure():
    p = build_params(2.0, 1.0, 0.5)
    h = hamiltonian_matrix(p)
    assert np.allclose(h, h.T)
    assert h[0, 1] == p.M and h[0, 2] == p.gamma and h[1, 3] == p.gamma


def test_t_zero_blocks():
    kp = kraus_from_hamiltonian(build_params(1.0, 0.0, 1.0))
    assert np.abs(kp.m_minus - np.eye(2)).max() < 1e-14
    assert np.abs(kp.m_plus).max() < 1e-14


def test_gamma_zero_blocks():
    p = build_params(0.9, 1.3, 0.0)
    kp = kraus_from_hamiltonian(p)
    mt = p.M * p.T
    assert np.abs(kp.m_minus - np.diag([math.cos(mt), 1.0])).max() < 1e-12
    assert np.abs(kp.m_plus - np.diag([-1j * math.sin(mt), 0.0])).max() < 1e-12


def test_norm_preserved_along_branches():
    p = build_params(2.92, 3.0, 1.0)
    amps, weight = chained_evolution(0.7, [Outcome.NO_CLICK, Outcome.CLICK] * 4, p)
    assert np.vdot(amps, amps).real == pytest.approx(1.0, abs=1e-12)
    assert 0.0 < weight < 1.0


class TestTrajectoryTree:
    def test_depth_zero_is_initial_bin(self):
        p = build_params(2.92, 3.0, 1.0)
        dist = enumerate_tree(0.3, 0, p, bins=100)
        idx = int(np.argmax(dist.pr))
        assert dist.pr[idx] == 1.0
        center = dist.centers()[idx]
        assert abs(center - 0.3) <= dist.delta_theta / 2 + 1e-12

    def test_weights_sum_to_one_each_depth(self):
        p = build_params(2.92, 3.0, 1.0)
        for depth in (1, 4, 9, 12):
            tree = trajectory_tree(0.3, depth, p)
            assert tree.weights.size == 2**depth
            assert tree.weights.sum() == pytest.approx(1.0, abs=1e-10)

    def test_leaf_states_match_chained_apply_kraus(self):
        p = build_params(2.4, 1.7, 1.0)
        depth = 6
        tree = trajectory_tree(0.5, depth, p)
        rng = np.random.default_rng(31)
        for k in rng.integers(0, 2**depth, size=10):
            outcomes = tree.outcomes(int(k))
            st = gc_state(0.5)
            weight = 1.0
            for mu in outcomes:
                st, prob = apply_kraus(st, mu, p)
                weight *= prob
            assert circ_dist(st.gc_angle(), tree.thetas[k]) < 1e-9
            assert weight == pytest.approx(tree.weights[k], rel=1e-9, abs=1e-15)

    def test_gamma_zero_null_trajectory_only(self):
        # MT = pi: the click probability vanishes, one trajectory survives
        p = build_params(1.0, math.pi, 0.0)
        tree = trajectory_tree(0.8, 8, p)
        live = tree.weights > 1e-12
        assert live.sum() == 1
        assert circ_dist(tree.thetas[live][0], 0.8) < 1e-9

    def test_depth_cap(self):
        p = build_params(1.0, 1.0, 1.0)
        with pytest.raises(DepthTooLarge):
            trajectory_tree(0.0, 17, p)

    def test_bitstring_labels(self):
        tree = trajectory_tree(0.0, 3, build_params(1.0, 1.0, 1.0))
        assert tree.bitstring(5) == "101"
        assert tree.outcomes(5) == [Outcome.CLICK, Outcome.NO_CLICK, Outcome.CLICK]


def test_tree_vs_master_equation_propagation():
    from mqubit.indicators import chi2_distance
    from mqubit.master_equation import build_markov, coarse_grain, delta_distribution, propagate

    p = build_params(2.92, 3.0, 1.0)
    tree = enumerate_tree(0.3, 12, p, bins=100)
    m = build_markov(p, 100_000)
    w = propagate(m, delta_distribution(100_000, 0.3), 12)
    assert chi2_distance(tree, coarse_grain(w, 100)) < 1e-3
