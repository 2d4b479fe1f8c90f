"""Discretized master equation on the Grand Circle.

The GC is split into ``N`` equal cells; the stationary angle distribution
solves ``Pr = M_N Pr`` where the column-stochastic matrix ``M_N`` collects,
for each cell ``i``, the overlap of the retrospective-map image of ``c_i``
with every source cell ``k``, weighted by the outcome probability at the
source cell center:

    [M_N]_{ik} = (1/dtheta) * sum_mu P_mu(theta_k) |F_mu(c_i) cap c_k|

Because ``F_mu`` is a circle homeomorphism away from projective
parameters, each row holds two contiguous (mod N) bands of nonzeros and
the matrix is extremely sparse.  Stationary states are found by power
iteration; the spectral gap is estimated by power-iterating the deflated
operator.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import sparse

from .core_maps import (
    PROJECTIVE_DET_TOL,
    TWO_PI,
    KrausPair,
    Outcome,
    SetupParams,
    gc_probability,
    kraus_matrices,
    theta_inverse,
    wrap_angles,
)


class ProjectiveParameters(ValueError):
    """The master-equation discretization needs invertible maps."""


class NotConverged(RuntimeError):
    """Power iteration hit the iteration cap; carries the last iterate."""

    def __init__(self, message: str, distribution: "DiscretizedDistribution", report: "SolveReport"):
        super().__init__(message)
        self.distribution = distribution
        self.report = report


class IndivisibleGrid(ValueError):
    """Coarse grid size must divide the fine one."""


def bin_index(thetas, n: int) -> np.ndarray:
    """Cell index for angles in [-pi, pi); bin i is [-pi + i*dt, -pi + (i+1)*dt)."""
    idx = np.floor((np.asarray(thetas, dtype=float) + math.pi) * (n / TWO_PI)).astype(np.int64)
    return np.mod(idx, n)


@dataclass
class DiscretizedDistribution:
    """Probability weights over ``N`` equal GC cells."""

    pr: np.ndarray

    def __post_init__(self):
        self.pr = np.asarray(self.pr, dtype=float)
        if self.pr.ndim != 1 or self.pr.size < 2:
            raise ValueError("need a 1-d weight vector with at least 2 cells")
        if self.pr.min() < -1e-12:
            raise ValueError(f"negative weight {self.pr.min():.3e}")
        total = self.pr.sum()
        if not math.isfinite(total) or abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {total!r}")

    @property
    def N(self) -> int:
        return self.pr.size

    @property
    def delta_theta(self) -> float:
        return TWO_PI / self.N

    def centers(self) -> np.ndarray:
        return -math.pi + (np.arange(self.N) + 0.5) * self.delta_theta

    def density(self) -> np.ndarray:
        """Heights ``W(theta_i) = Pr_i / dtheta``."""
        return self.pr / self.delta_theta


def uniform_distribution(n: int) -> DiscretizedDistribution:
    return DiscretizedDistribution(pr=np.full(n, 1.0 / n))


def delta_distribution(n: int, theta: float) -> DiscretizedDistribution:
    pr = np.zeros(n)
    pr[bin_index(theta, n)] = 1.0
    return DiscretizedDistribution(pr=pr)


def distribution_from_counts(counts: np.ndarray) -> DiscretizedDistribution:
    counts = np.asarray(counts, dtype=float)
    return DiscretizedDistribution(pr=counts / counts.sum())


def coarse_grain(w: DiscretizedDistribution, n_g: int) -> DiscretizedDistribution:
    """Block-sum onto a broader grid of ``n_g`` cells (``n_g`` divides N)."""
    if n_g < 1 or w.N % n_g != 0:
        raise IndivisibleGrid(f"{n_g} does not divide N = {w.N}")
    return DiscretizedDistribution(pr=w.pr.reshape(n_g, w.N // n_g).sum(axis=1))


# ---------------------------------------------------------------------------
# matrix construction


@dataclass
class SparseMarkov:
    """Column-stochastic transition matrix of the discretized process.

    ``matrix`` is the full operator in CSR layout; ``band_minus`` /
    ``band_plus`` keep the per-outcome parts (same shape) for structure
    inspection and graph construction.
    """

    N: int
    matrix: sparse.csr_matrix
    band_minus: sparse.csr_matrix
    band_plus: sparse.csr_matrix

    @property
    def delta_theta(self) -> float:
        return TWO_PI / self.N

    def column_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=0)).ravel()

    @property
    def nnz(self) -> int:
        return self.matrix.nnz


@njit(cache=True)
def _band_entries(starts, lengths, pvals, n, rows, cols, vals):
    """Fill COO entries for one outcome band; returns the entry count.

    Row ``i`` covers the arc ``[starts[i], starts[i] + lengths[i])`` (in
    radians, ccw); each overlapped source cell ``k`` receives
    ``P(theta_k) * overlap / dtheta``.
    """
    dtheta = TWO_PI / n
    cursor = 0
    for i in range(n):
        u0 = (starts[i] + math.pi) / dtheta
        if u0 >= n:
            u0 -= n
        elif u0 < 0.0:
            u0 += n
        span = lengths[i] / dtheta
        u1 = u0 + span
        k0 = int(math.floor(u0))
        if k0 >= n:
            k0 = n - 1
        k1 = int(math.floor(u1))
        for k in range(k0, k1 + 1):
            lo = u0 if u0 > k else float(k)
            hi = u1 if u1 < k + 1 else float(k + 1)
            overlap = hi - lo
            if overlap <= 0.0:
                continue
            kcol = k if k < n else k - n
            if kcol >= n:
                kcol -= n  # span == n wrap-around
            val = pvals[kcol] * overlap
            if val > 0.0:
                rows[cursor] = i
                cols[cursor] = kcol
                vals[cursor] = val
                cursor += 1
    return cursor


def _band_arcs(p: SetupParams, kp: KrausPair, mu: Outcome, n: int):
    """Start angles and ccw lengths of the retrospective-image arcs.

    ``F_mu(c_i)`` is the arc between the edge images, traversed ccw from
    the image of the lower/upper edge depending on map orientation.  An
    analytic arc-length hint ``|F'| * dtheta`` at the cell midpoint
    disambiguates floating-point noise from genuinely near-full arcs when
    the edge images nearly coincide.
    """
    dtheta = TWO_PI / n
    edges = -math.pi + np.arange(n) * dtheta
    mids = edges + 0.5 * dtheta
    f_edges = theta_inverse(edges, mu, p, kp)
    f_mids = theta_inverse(mids, mu, p, kp)

    r = kp.real_rep(mu)
    det_r = r[0, 0] * r[1, 1] - r[0, 1] * r[1, 0]
    hints = gc_probability(f_mids, mu, p, kp) / abs(det_r) * dtheta

    f_next = np.roll(f_edges, -1)
    if det_r > 0.0:
        start, end = f_edges, f_next
    else:
        start, end = f_next, f_edges
    raw = np.mod(end - start, TWO_PI)
    lengths = np.where((raw > math.pi) & (hints < 1.0), hints, raw)
    return start, lengths, f_edges, f_mids


def build_markov(
    p: SetupParams,
    n: int,
    kp: KrausPair | None = None,
    validate_monotone: bool = False,
) -> SparseMarkov:
    """Assemble the sparse column-stochastic matrix for ``n`` cells.

    Raises `ProjectiveParameters` when either Kraus matrix is projecting
    (use the analytic series instead).  ``validate_monotone`` samples 8
    interior points per cell and checks they fall inside the computed
    image arc.
    """
    if not 2 <= n <= 10**8:
        raise ValueError(f"cell count must be in [2, 1e8], got {n}")
    if kp is None:
        kp = kraus_matrices(p)
    if abs(kp.det_minus) < PROJECTIVE_DET_TOL or abs(kp.det_plus) < PROJECTIVE_DET_TOL:
        raise ProjectiveParameters(
            f"|det m_-| = {abs(kp.det_minus):.3e}, |det m_+| = {abs(kp.det_plus):.3e}: "
            "discretization invalid at projecting parameters"
        )
    dtheta = TWO_PI / n
    centers = -math.pi + (np.arange(n) + 0.5) * dtheta
    bands = {}
    for mu in (Outcome.NO_CLICK, Outcome.CLICK):
        pvals = gc_probability(centers, mu, p, kp)
        starts, lengths, f_edges, _ = _band_arcs(p, kp, mu, n)
        if validate_monotone:
            _check_monotone(p, kp, mu, starts, lengths, n)
        cap = int(np.ceil(lengths.sum() / dtheta)) + 2 * n + 16
        rows = np.empty(cap, dtype=np.int64)
        cols = np.empty(cap, dtype=np.int64)
        vals = np.empty(cap, dtype=np.float64)
        count = _band_entries(starts, lengths, pvals, n, rows, cols, vals)
        coo = sparse.coo_matrix(
            (vals[:count], (rows[:count], cols[:count])), shape=(n, n)
        )
        bands[mu] = coo.tocsr()
    matrix = (bands[Outcome.NO_CLICK] + bands[Outcome.CLICK]).tocsr()
    return SparseMarkov(
        N=n,
        matrix=matrix,
        band_minus=bands[Outcome.NO_CLICK],
        band_plus=bands[Outcome.CLICK],
    )


def _check_monotone(p, kp, mu, starts, lengths, n):
    dtheta = TWO_PI / n
    edges = -math.pi + np.arange(n) * dtheta
    offsets = (np.arange(1, 9) / 9.0) * dtheta
    for off in offsets:
        f = theta_inverse(edges + off, mu, p, kp)
        pos = np.mod(f - starts, TWO_PI)
        bad = pos > lengths + 1e-9
        if bad.any():
            i = int(np.argmax(bad))
            raise RuntimeError(
                f"interior image left the endpoint arc in cell {i} for outcome {mu.name}"
            )


# ---------------------------------------------------------------------------
# solvers


@dataclass
class SolveReport:
    """Outcome of a stationary-state solve."""

    iterations: int
    residual: float
    converged: bool
    eigen_gap: float = field(default=float("nan"))


def power_iterate(
    m: SparseMarkov,
    init: DiscretizedDistribution,
    max_iters: int = 10_000,
    tol: float | None = None,
    strict: bool = False,
) -> tuple[DiscretizedDistribution, SolveReport]:
    """Iterate ``Pr <- M Pr`` until the L1 residual drops below ``tol``.

    Each iterate is renormalized to kill drift.  Default tolerance is
    ``1e-12 * N``.  Non-convergence (expected near frozen/shift/period-2
    parameters) is reported through ``SolveReport.converged``; with
    ``strict=True`` it raises `NotConverged` carrying the last iterate.
    """
    if init.N != m.N:
        raise ValueError(f"init has {init.N} cells, matrix has {m.N}")
    if tol is None:
        tol = 1e-12 * m.N
    a = m.matrix
    x = init.pr.copy()
    residual = math.inf
    ratios: list[float] = []
    prev_residual = None
    iterations = 0
    for iterations in range(1, max_iters + 1):
        y = a @ x
        total = y.sum()
        if total <= 0.0 or not math.isfinite(total):
            raise RuntimeError("power iteration produced a non-normalizable vector")
        y /= total
        residual = float(np.abs(x - y).sum())
        x = y
        if prev_residual is not None and prev_residual > 0.0:
            ratios.append(residual / prev_residual)
        prev_residual = residual
        if residual < tol:
            break
    converged = residual < tol
    # crude gap estimate from the asymptotic residual contraction rate
    tail = [r for r in ratios[-20:] if 0.0 < r <= 1.0 + 1e-9]
    gap = 1.0 - float(np.median(tail)) if tail else float("nan")
    report = SolveReport(
        iterations=iterations,
        residual=residual,
        converged=converged,
        eigen_gap=max(0.0, gap) if math.isfinite(gap) else gap,
    )
    dist = DiscretizedDistribution(pr=np.maximum(x, 0.0) / np.maximum(x, 0.0).sum())
    if strict and not converged:
        raise NotConverged(
            f"residual {residual:.3e} above tol {tol:.3e} after {iterations} iterations",
            dist,
            report,
        )
    return dist, report


def propagate(
    m: SparseMarkov, w0: DiscretizedDistribution, steps: int
) -> DiscretizedDistribution:
    """Apply the transition matrix ``steps`` times (no renormalization)."""
    if w0.N != m.N:
        raise ValueError(f"w0 has {w0.N} cells, matrix has {m.N}")
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    x = w0.pr.copy()
    for _ in range(steps):
        x = m.matrix @ x
    return DiscretizedDistribution(pr=x)


@dataclass
class EigenGapEstimate:
    gap: float
    lambda2: float
    iterations: int


def eigen_gap(
    m: SparseMarkov,
    stationary: DiscretizedDistribution,
    iters: int = 200,
) -> EigenGapEstimate:
    """Estimate ``1 - |lambda_2|`` by power-iterating the deflated operator.

    Column sums being one, the left eigenvector of the leading eigenvalue
    is the all-ones row, so ``B = M - stationary * ones^T`` removes the
    stationary direction exactly.  The estimate averages the log growth
    rate over the trailing half of the iterations; it is an
    order-of-magnitude diagnostic, not a certified eigenvalue.
    """
    if stationary.N != m.N:
        raise ValueError("grid mismatch between matrix and stationary vector")
    resid = float(np.abs(stationary.pr - m.matrix @ stationary.pr).sum())
    if resid > 1e-8:
        raise ValueError(f"stationary input is not a fixed point (residual {resid:.3e})")
    rng = np.random.default_rng(0x5EED)
    z = rng.standard_normal(m.N)
    z -= stationary.pr * z.sum()
    nz = np.abs(z).sum()
    if nz == 0.0:
        return EigenGapEstimate(gap=1.0, lambda2=0.0, iterations=0)
    z /= nz
    log_rates = []
    for _ in range(iters):
        z = m.matrix @ z - stationary.pr * z.sum()
        nz = float(np.abs(z).sum())
        if nz < 1e-280:
            return EigenGapEstimate(gap=1.0, lambda2=0.0, iterations=iters)
        log_rates.append(math.log(nz))
        z /= nz
    tail = log_rates[len(log_rates) // 2 :]
    lam2 = math.exp(sum(tail) / len(tail))
    return EigenGapEstimate(gap=max(0.0, 1.0 - lam2), lambda2=lam2, iterations=iters)


# ---------------------------------------------------------------------------
# binary dump (debugging aid)

_MAGIC = b"MQME"
_VERSION = 1


def save_markov(m: SparseMarkov, path: str) -> None:
    """Little-endian binary dump: magic, version u32, N u64, CSR arrays."""
    csr = m.matrix
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<Q", m.N))
        for arr, dtype in (
            (csr.indptr, "<i8"),
            (csr.indices, "<i8"),
            (csr.data, "<f8"),
        ):
            a = np.asarray(arr).astype(dtype)
            fh.write(struct.pack("<Q", a.size))
            fh.write(a.tobytes())


def load_markov(path: str) -> sparse.csr_matrix:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("not a MQME file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != _VERSION:
            raise ValueError(f"unsupported MQME version {version}")
        (n,) = struct.unpack("<Q", fh.read(8))
        arrs = []
        for dtype in ("<i8", "<i8", "<f8"):
            (size,) = struct.unpack("<Q", fh.read(8))
            arrs.append(np.frombuffer(fh.read(size * 8), dtype=dtype))
        indptr, indices, data = arrs
    return sparse.csr_matrix((data, indices, indptr), shape=(n, n))
