"""Monte-Carlo sampling of individual quantum trajectories.

One trajectory draws a uniform number per period and applies the click
matrix when it falls below the click probability, otherwise the no-click
matrix, then renormalizes -- exactly the Born-rule unraveling.  Visited
post-measurement GC angles are accumulated into a histogram after a
burn-in; full Bloch vectors can be sampled at a stride for convergence
diagnostics.

Randomness comes from a hand-rolled xoshiro256++ generator seeded through
splitmix64, so runs are bit-reproducible across platforms and trajectory
streams can be derived as ``seed ^ trajectory_index``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core_maps import (
    TWO_PI,
    BlochState,
    Outcome,
    SetupParams,
    bloch_state,
    gc_state,
    kraus_matrices,
)
from .master_equation import DiscretizedDistribution, distribution_from_counts

#: default burn-in when the start state is off the GC (trajectories need
#: of order 1e5 steps to converge to the GC) and when it is on the GC
BURN_IN_OFF_GC = 100_000
BURN_IN_ON_GC = 1_000

_U64 = np.uint64


@njit(cache=True)
def _splitmix64(state):
    z = state + _U64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
    return z, z ^ (z >> _U64(31))


@njit(cache=True)
def _xoshiro_init(seed):
    s = np.empty(4, dtype=np.uint64)
    z = _U64(seed)
    for i in range(4):
        z, out = _splitmix64(z)
        s[i] = out
    return s


@njit(cache=True)
def _rotl(x, k):
    return (x << k) | (x >> (_U64(64) - k))


@njit(cache=True)
def _next_uniform(s):
    """xoshiro256++ step; returns a double in [0, 1)."""
    result = _rotl(s[0] + s[3], _U64(23)) + s[0]
    t = s[1] << _U64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], _U64(45))
    return float(result >> _U64(11)) * 1.1102230246251565e-16


@njit(cache=True)
def _mc_core(m_minus, m_plus, alpha0, beta0, n_steps, burn_in, nbins, seed, stride, n_samples):
    """Single-trajectory hot loop.

    Returns (histogram counts, final amplitudes, click/no-click counts,
    sampled Bloch vectors).  Outcomes are counted post burn-in so the
    click frequency can be compared with the stationary expectation.
    """
    s = _xoshiro_init(seed)
    counts = np.zeros(nbins)
    samples = np.zeros((n_samples, 3))
    a = alpha0
    b = beta0
    clicks = 0
    noclicks = 0
    sample_at = 0
    sample_idx = 0
    scale = nbins / TWO_PI
    for j in range(n_steps):
        wpa = m_plus[0, 0] * a + m_plus[0, 1] * b
        wpb = m_plus[1, 0] * a + m_plus[1, 1] * b
        p_plus = wpa.real * wpa.real + wpa.imag * wpa.imag + wpb.real * wpb.real + wpb.imag * wpb.imag
        q = _next_uniform(s)
        if q <= p_plus:
            inv = 1.0 / math.sqrt(p_plus)
            a = wpa * inv
            b = wpb * inv
            click = True
        else:
            wma = m_minus[0, 0] * a + m_minus[0, 1] * b
            wmb = m_minus[1, 0] * a + m_minus[1, 1] * b
            p_minus = wma.real * wma.real + wma.imag * wma.imag + wmb.real * wmb.real + wmb.imag * wmb.imag
            inv = 1.0 / math.sqrt(p_minus)
            a = wma * inv
            b = wmb * inv
            click = False
        cross = a.conjugate() * b
        bx = 2.0 * cross.real
        by = 2.0 * cross.imag
        bz = (a.real * a.real + a.imag * a.imag) - (b.real * b.real + b.imag * b.imag)
        if j >= burn_in:
            if click:
                clicks += 1
            else:
                noclicks += 1
            theta = math.atan2(by, bz)
            idx = int((theta + math.pi) * scale)
            if idx >= nbins:
                idx -= nbins
            elif idx < 0:
                idx = 0
            counts[idx] += 1.0
        if n_samples > 0 and j == sample_at and sample_idx < n_samples:
            samples[sample_idx, 0] = bx
            samples[sample_idx, 1] = by
            samples[sample_idx, 2] = bz
            sample_idx += 1
            sample_at += stride
    return counts, a, b, clicks, noclicks, samples[:sample_idx]


@dataclass(frozen=True)
class TrajectoryConfig:
    """Settings for one Monte-Carlo trajectory."""

    n_steps: int
    seed: int
    initial_state: BlochState
    bins: int
    burn_in: int | None = None  # None: pick by on/off-GC start
    bloch_samples: int = 0  # >0: record this many Bloch vectors, evenly strided

    def resolved_burn_in(self) -> int:
        if self.burn_in is not None:
            return self.burn_in
        off_gc = abs(self.initial_state.bloch_vector()[0]) > 1e-9
        default = BURN_IN_OFF_GC if off_gc else BURN_IN_ON_GC
        return min(default, max(0, self.n_steps - 1))

    def validate(self) -> None:
        if self.n_steps < 1:
            raise ValueError("n_steps must be positive")
        if self.bins < 2:
            raise ValueError("need at least 2 histogram bins")
        burn = self.resolved_burn_in()
        if not 0 <= burn < self.n_steps:
            raise ValueError(f"burn_in {burn} must lie in [0, n_steps)")


@dataclass
class TrajectoryResult:
    """Time-averaged histogram and end-of-run diagnostics."""

    histogram: DiscretizedDistribution
    final_state: BlochState
    outcome_counts: tuple[int, int]  # (clicks, no-clicks), post burn-in
    gc_deviation_series: np.ndarray | None = None
    bloch_series: np.ndarray | None = None


def simulate(cfg: TrajectoryConfig, p: SetupParams) -> TrajectoryResult:
    """Run one trajectory; deterministic for a fixed seed."""
    cfg.validate()
    kp = kraus_matrices(p)
    burn = cfg.resolved_burn_in()
    if cfg.bloch_samples > 0:
        stride = max(1, cfg.n_steps // cfg.bloch_samples)
    else:
        stride = 1
    counts, a, b, clicks, noclicks, samples = _mc_core(
        np.ascontiguousarray(kp.m_minus),
        np.ascontiguousarray(kp.m_plus),
        complex(cfg.initial_state.alpha),
        complex(cfg.initial_state.beta),
        cfg.n_steps,
        burn,
        cfg.bins,
        np.uint64(cfg.seed & 0xFFFFFFFFFFFFFFFF),
        stride,
        cfg.bloch_samples,
    )
    deviations = None
    bloch = None
    if cfg.bloch_samples > 0:
        bloch = samples
        deviations = np.arctan2(np.abs(samples[:, 0]), np.abs(samples[:, 1]))
    return TrajectoryResult(
        histogram=distribution_from_counts(counts),
        final_state=bloch_state(a, b),
        outcome_counts=(int(clicks), int(noclicks)),
        gc_deviation_series=deviations,
        bloch_series=bloch,
    )


@dataclass
class EnsembleResult:
    histogram: DiscretizedDistribution
    final_thetas: np.ndarray
    outcome_counts: tuple[int, int]


def simulate_ensemble(cfg: TrajectoryConfig, p: SetupParams, n_trajectories: int) -> EnsembleResult:
    """Independent trajectories with streams ``seed ^ k``; merged histogram.

    Merging is a plain sum of counts, so the result does not depend on
    execution order.
    """
    cfg.validate()
    kp = kraus_matrices(p)
    burn = cfg.resolved_burn_in()
    total = np.zeros(cfg.bins)
    finals = np.empty(n_trajectories)
    clicks = 0
    noclicks = 0
    mm = np.ascontiguousarray(kp.m_minus)
    mp = np.ascontiguousarray(kp.m_plus)
    for k in range(n_trajectories):
        counts, a, b, c, nc, _ = _mc_core(
            mm,
            mp,
            complex(cfg.initial_state.alpha),
            complex(cfg.initial_state.beta),
            cfg.n_steps,
            burn,
            cfg.bins,
            np.uint64((cfg.seed ^ k) & 0xFFFFFFFFFFFFFFFF),
            1,
            0,
        )
        total += counts
        finals[k] = bloch_state(a, b).gc_angle()
        clicks += c
        noclicks += nc
    return EnsembleResult(
        histogram=distribution_from_counts(total),
        final_thetas=finals,
        outcome_counts=(int(clicks), int(noclicks)),
    )


def gc_deviation(state: BlochState) -> float:
    """Angular distance of the state's azimuth from the GC plane.

    ``min(|phi - pi/2|, |phi + pi/2|)``; zero on the GC (poles included).
    """
    b = state.bloch_vector()
    return math.atan2(abs(b[0]), abs(b[1]))


def _is_gc_eigenvector(v: np.ndarray, atol: float = 1e-10) -> bool:
    norm2 = float(np.vdot(v, v).real)
    if norm2 < 1e-300:
        return False
    bx = 2.0 * (np.conj(v[0]) * v[1]).real
    return abs(bx) / norm2 < atol


def gc_attraction_scan(p: SetupParams, k_max: int, atol: float = 1e-10) -> int | None:
    """Smallest k with both eigenvectors of ``m_plus^k m_minus`` on the GC.

    k = 0 means both Kraus matrices individually have GC eigenvectors.
    Returns None when no power up to ``k_max`` projects onto the GC.
    Frozen parameters (``YT`` a multiple of 2*pi) are undefined for this
    scan -- both matrices are phases, eigenvectors are degenerate and
    matrix powers only amplify rounding noise -- and return None outright.
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    yt = math.fmod(p.Y * p.T, TWO_PI)
    if min(yt, TWO_PI - yt) < 1e-9:
        return None
    kp = kraus_matrices(p)

    def both_on_gc(mat: np.ndarray) -> bool:
        a, b_, c, d = mat[0, 0], mat[0, 1], mat[1, 0], mat[1, 1]
        if max(abs(b_), abs(c), abs(a - d)) < 1e-14 * max(1e-300, abs(a)):
            return False  # proportional to identity: eigenvectors undefined
        tr = a + d
        det = a * d - b_ * c
        disc = np.emath.sqrt(tr * tr - 4.0 * det)
        ok = True
        for lam in ((tr + disc) / 2.0, (tr - disc) / 2.0):
            v1 = np.array([b_, lam - a])
            v2 = np.array([lam - d, c])
            v = v1 if np.abs(v1).max() >= np.abs(v2).max() else v2
            if np.abs(v).max() < 1e-300:
                return False
            ok = ok and _is_gc_eigenvector(v, atol)
        return ok

    if both_on_gc(kp.m_minus) and both_on_gc(kp.m_plus):
        return 0
    step = 1j * kp.m_plus  # phase does not move eigenvectors
    product = kp.m_minus.copy()
    for k in range(1, k_max + 1):
        product = step @ product
        norm = np.abs(product).max()
        if norm < 1e-280:
            return None
        product = product / norm
        if both_on_gc(product):
            return k
    return None
