"""Brute-force references for validating the closed-form physics.

Two independent routes are provided: the Kraus pair rebuilt from the full
4x4 setup Hamiltonian (qubit plus detector) by exact unitary evolution and
detector projection, and the exhaustive enumeration of the binary outcome
tree with Born weights.  Neither route touches the closed forms in
`core_maps`, so agreement is a genuine cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_maps import (
    KrausPair,
    Outcome,
    SetupParams,
    kraus_pair_from_matrices,
    wrap_angles,
)
from .master_equation import DiscretizedDistribution, bin_index

MAX_TREE_DEPTH = 16


class DepthTooLarge(ValueError):
    """Exact tree enumeration refused beyond `MAX_TREE_DEPTH` steps."""


def hamiltonian_matrix(p: SetupParams) -> np.ndarray:
    """4x4 setup Hamiltonian in the basis |1,0>|+>, |1,0>|->, |0,1>|+>, |0,1>|->."""
    m, g = p.M, p.gamma
    return np.array(
        [
            [0.0, m, g, 0.0],
            [m, 0.0, 0.0, g],
            [g, 0.0, 0.0, 0.0],
            [0.0, g, 0.0, 0.0],
        ]
    )


def evolution_operator(p: SetupParams) -> np.ndarray:
    """``exp(-i H T)`` by Hermitian eigendecomposition.

    The reconstruction ``V diag(w) V^T`` is checked against H to 1e-13 so
    the oracle carries no hidden series-truncation error.
    """
    h = hamiltonian_matrix(p)
    w, v = np.linalg.eigh(h)
    recon = (v * w) @ v.T
    err = np.abs(recon - h).max()
    if err > 1e-13:
        raise RuntimeError(f"eigendecomposition reconstruction error {err:.3e}")
    return (v * np.exp(-1j * w * p.T)) @ v.T.conj()


def kraus_from_hamiltonian(p: SetupParams) -> KrausPair:
    """Kraus pair read off the full setup evolution.

    Evolves the |-> detector sector for one period and projects the
    detector onto |+/->; the induced 2x2 blocks of the evolution operator
    are the click / no-click matrices.
    """
    u = evolution_operator(p)
    # columns 1, 3 hold the images of |1,0>|-> and |0,1>|->
    m_plus = np.array([[u[0, 1], u[0, 3]], [u[2, 1], u[2, 3]]])
    m_minus = np.array([[u[1, 1], u[1, 3]], [u[3, 1], u[3, 3]]])
    return kraus_pair_from_matrices(m_minus, m_plus)


def chained_evolution(
    theta0: float, outcomes: list[Outcome], p: SetupParams
) -> tuple[np.ndarray, float]:
    """Evolve a GC state through a fixed outcome sequence via the 4x4 setup.

    Each step embeds the qubit amplitudes with the reset detector, applies
    the full unitary, projects the detector on the recorded outcome and
    renormalizes.  Returns the final amplitudes and the total Born weight.
    """
    u = evolution_operator(p)
    alpha = complex(np.cos(theta0 / 2.0))
    beta = 1j * np.sin(theta0 / 2.0)
    weight = 1.0
    for mu in outcomes:
        setup = np.array([0.0, alpha, 0.0, beta], dtype=complex)
        evolved = u @ setup
        if mu == Outcome.CLICK:
            branch = np.array([evolved[0], evolved[2]])
        else:
            branch = np.array([evolved[1], evolved[3]])
        prob = float(np.vdot(branch, branch).real)
        weight *= prob
        if prob < 1e-300:
            return branch, 0.0
        alpha, beta = branch / np.sqrt(prob)
    return np.array([alpha, beta]), weight


@dataclass(frozen=True)
class TrajectoryTree:
    """All ``2**depth`` outcome sequences with final GC angles and Born weights.

    Leaf ``k`` encodes its bitstring in binary: bit ``depth-1-s`` of ``k``
    is 1 iff step ``s`` (0-based) was a click.
    """

    depth: int
    thetas: np.ndarray
    weights: np.ndarray
    states: np.ndarray  # (2**depth, 2) real GC vectors (cos t/2, sin t/2)

    def bitstring(self, k: int) -> str:
        return format(k, f"0{self.depth}b") if self.depth else ""

    def outcomes(self, k: int) -> list[Outcome]:
        return [
            Outcome.CLICK if c == "1" else Outcome.NO_CLICK for c in self.bitstring(k)
        ]


def trajectory_tree(theta0: float, depth: int, p: SetupParams) -> TrajectoryTree:
    """Exact breadth-first enumeration of the outcome tree on the GC.

    No pruning: zero-probability branches are kept (with weight 0) so the
    leaf count is exactly ``2**depth``.
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if depth > MAX_TREE_DEPTH:
        raise DepthTooLarge(f"depth {depth} exceeds the exact-enumeration limit {MAX_TREE_DEPTH}")
    from .core_maps import kraus_matrices  # local import to keep module deps one-way

    kp = kraus_matrices(p)
    rm, rp = kp.real_minus, kp.real_plus
    states = np.array([[np.cos(theta0 / 2.0), np.sin(theta0 / 2.0)]])
    weights = np.array([1.0])
    for _ in range(depth):
        wm = states @ rm.T
        wp = states @ rp.T
        pm = np.einsum("ij,ij->i", wm, wm)
        pp = np.einsum("ij,ij->i", wp, wp)
        n = states.shape[0]
        new_states = np.empty((2 * n, 2))
        new_weights = np.empty(2 * n)
        safe_m = np.maximum(pm, 1e-300)
        safe_p = np.maximum(pp, 1e-300)
        new_states[0::2] = wm / np.sqrt(safe_m)[:, None]
        new_states[1::2] = wp / np.sqrt(safe_p)[:, None]
        new_weights[0::2] = weights * pm
        new_weights[1::2] = weights * pp
        states, weights = new_states, new_weights
    thetas = wrap_angles(2.0 * np.arctan2(states[:, 1], states[:, 0]))
    return TrajectoryTree(depth=depth, thetas=thetas, weights=weights, states=states)


def enumerate_tree(
    theta0: float, depth: int, p: SetupParams, bins: int
) -> DiscretizedDistribution:
    """Exact ``W_j(theta | theta0)`` binned into ``bins`` GC cells."""
    tree = trajectory_tree(theta0, depth, p)
    pr = np.zeros(bins)
    idx = bin_index(tree.thetas, bins)
    np.add.at(pr, idx, tree.weights)
    return DiscretizedDistribution(pr=pr)
