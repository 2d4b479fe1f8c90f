"""Scalar and categorical indicators of a discretized angle distribution.

The suite mirrors the standard localization diagnostics: participation
ratio and its coarse-graining exponent, minimal support for a probability
fraction, the typical-height category read off a histogram of heights,
the box-counting dimension of the distribution curve, and the chi-square
distance between two distributions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .master_equation import DiscretizedDistribution, IndivisibleGrid, coarse_grain


class TooFewLevels(ValueError):
    """PR scaling needs at least 4 coarse-graining levels."""


class GridMismatch(ValueError):
    """chi-square distance requires equal cell counts."""


def participation_ratio(w: DiscretizedDistribution) -> float:
    """``1 / sum(Pr_i^2)``: 1 for a delta, N for the uniform distribution."""
    return float(1.0 / np.sum(w.pr**2))


@dataclass
class PrScalingFit:
    zeta: float
    raw_slope: float
    clamped: bool
    levels: list[int]
    pr_values: list[float]
    residual: float


def default_grids(n: int, levels: int = 6) -> list[int]:
    """Coarse grids for PR scaling: dyadic ``N/2, N/4, ...`` when N allows,
    otherwise the divisors of N nearest to those targets."""
    out = []
    for k in range(1, levels + 1):
        g = n // (2**k)
        if g < 2 or n % (2**k) != 0:
            break
        out.append(g)
    if len(out) >= 4:
        return out
    divisors = [d for d in range(2, n) if n % d == 0]
    picked: list[int] = []
    for k in range(1, levels + 1):
        target = n / 2**k
        if not divisors:
            break
        best = min(divisors, key=lambda d: abs(math.log(d / target)))
        divisors.remove(best)
        picked.append(best)
    return sorted(picked, reverse=True)


def pr_scaling_exponent(
    w: DiscretizedDistribution, grids: list[int] | None = None
) -> PrScalingFit:
    """Least-squares slope of ``log R`` vs ``log N_g`` over coarse grids."""
    if grids is None:
        grids = default_grids(w.N)
    if len(grids) < 4:
        raise TooFewLevels(f"need >= 4 grid levels, got {len(grids)}")
    prs = []
    for g in grids:
        if w.N % g != 0:
            raise IndivisibleGrid(f"{g} does not divide N = {w.N}")
        prs.append(participation_ratio(coarse_grain(w, g)))
    x = np.log(np.asarray(grids, dtype=float))
    y = np.log(np.asarray(prs))
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    clamped = not (-0.05 <= slope <= 1.05)
    zeta = min(1.0, max(0.0, float(slope)))
    return PrScalingFit(
        zeta=zeta,
        raw_slope=float(slope),
        clamped=clamped,
        levels=list(grids),
        pr_values=prs,
        residual=resid,
    )


def support_fraction(w: DiscretizedDistribution, c: float) -> float:
    """Fraction of cells needed to cover probability mass ``c``."""
    if not 0.0 < c <= 1.0:
        raise ValueError(f"coverage must be in (0, 1], got {c}")
    ordered = np.sort(w.pr)[::-1]
    csum = np.cumsum(ordered)
    # guard the c == 1 case against rounding of the final cumulative sum
    n_c = int(np.searchsorted(csum, min(c, csum[-1]))) + 1
    return n_c / w.N


@dataclass
class HeightCategory:
    category: int  # 1 localized, 2 intermediate, 3 delocalized
    h_max: float
    h_0: float
    delta_h: float


def height_category(w: DiscretizedDistribution, n_h: int = 100) -> HeightCategory:
    """Category of the height-histogram maximum.

    Heights are the densities ``Pr_i / dtheta``, histogrammed into ``n_h``
    bins of width ``2*dh``.  Category 1: the maximum sits in the lowest
    bin and that bin is a numerical zero (``min W < dh``); category 2: the
    maximum sits in the lowest bin at finite height; category 3: the
    maximum sits above the lowest bin.  A constant distribution has no
    height structure and counts as delocalized (category 3).
    """
    if n_h < 2:
        raise ValueError("need at least 2 height bins")
    values = w.density()
    mn = float(values.min())
    mx = float(values.max())
    if mx - mn <= 1e-300 or (mx - mn) <= 1e-14 * max(1.0, abs(mx)):
        return HeightCategory(category=3, h_max=mx, h_0=mx, delta_h=0.0)
    dh = (mx - mn) / (2.0 * n_h)
    idx = np.minimum(((values - mn) / (2.0 * dh)).astype(int), n_h - 1)
    hist = np.bincount(idx, minlength=n_h)
    top = int(np.argmax(hist))
    h_of = lambda i: mn + (2 * i + 1) * dh
    h_max = h_of(top)
    h_0 = h_of(int(np.nonzero(hist)[0][0]))  # always bin 0: it holds the minimum
    if top == 0:
        category = 1 if mn < dh else 2
    else:
        category = 3
    return HeightCategory(category=category, h_max=h_max, h_0=h_0, delta_h=dh)


@dataclass
class BoxCountFit:
    dimension: float
    residual: float
    m_values: list[int]
    counts: list[int]


def _column_extrema(y: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Min/max of the polyline through ``y`` over each of ``m`` x-columns.

    Sample x-positions are ``(i + 0.5) / n``; the polyline is linear
    between samples, so per-column extrema are the extrema of interior
    samples and of the interpolated values at column boundaries.
    """
    n = y.size
    x = (np.arange(n) + 0.5) / n
    col = np.minimum((x * m).astype(int), m - 1)
    lo = np.full(m, np.inf)
    hi = np.full(m, -np.inf)
    np.minimum.at(lo, col, y)
    np.maximum.at(hi, col, y)
    # boundary values at x = j/m for j = 1..m-1
    xb = np.arange(1, m) / m
    yb = np.interp(xb, x, y)
    for cols in (np.arange(1, m), np.arange(0, m - 1)):
        np.minimum.at(lo, cols, yb)
        np.maximum.at(hi, cols, yb)
    # columns before the first / after the last sample midpoint
    lo = np.where(np.isfinite(lo), lo, np.interp((np.arange(m) + 0.5) / m, x, y))
    hi = np.where(np.isfinite(hi), hi, lo)
    return lo, hi


def box_count(w: DiscretizedDistribution, m: int) -> int:
    """Number of ``1/m`` boxes covering the max-normalized polyline."""
    y = w.density()
    mx = y.max()
    y = y / mx if mx > 0 else y
    lo, hi = _column_extrema(y, m)
    j_lo = np.clip(np.floor(lo * m), 0, m - 1)
    j_hi = np.clip(np.floor(hi * m - 1e-12), j_lo, m - 1)
    return int(np.sum(j_hi - j_lo + 1))


def box_counting_dimension(
    w: DiscretizedDistribution, m_range: list[int] | None = None
) -> BoxCountFit:
    """Box-counting dimension of the curve ``W(theta)``.

    The curve is rescaled to the unit square (angles to [0,1], heights by
    the maximum) and covered with ``m x m`` boxes; the dimension is the
    least-squares slope of ``log C`` against ``log m`` over octaves
    ``m = 16 .. N/16`` by default.  A spike of height h occupies ~h*m
    boxes because the connecting polyline is covered, not just the points.
    """
    if w.N < 1000:
        raise ValueError("box counting needs at least 1e3 cells")
    if m_range is None:
        m_range = []
        m = 16
        while m <= w.N // 16:
            m_range.append(m)
            m *= 2
    if len(m_range) < 2:
        raise ValueError("need at least two box sizes")
    counts = [box_count(w, m) for m in m_range]
    x = np.log(np.asarray(m_range, dtype=float))
    y = np.log(np.asarray(counts, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return BoxCountFit(
        dimension=float(slope), residual=resid, m_values=list(m_range), counts=counts
    )


def chi2_distance(p: DiscretizedDistribution, q: DiscretizedDistribution) -> float:
    """``0.5 * sum (p-q)^2 / (p+q)`` in [0, 1]; zero terms contribute zero."""
    if p.N != q.N:
        raise GridMismatch(f"cell counts differ: {p.N} vs {q.N}")
    num = (p.pr - q.pr) ** 2
    den = p.pr + q.pr
    mask = den > 0
    return float(0.5 * np.sum(num[mask] / den[mask]))


@dataclass
class IndicatorRecord:
    """The full indicator suite for one distribution."""

    pr: float
    pr_fit: PrScalingFit
    support: float
    heights: HeightCategory
    box_fit: BoxCountFit | None
    chi2_vs_reference: float | None = None

    def to_json(self) -> dict:
        return {
            "pr": self.pr,
            "zeta": self.pr_fit.zeta,
            "support": self.support,
            "category": self.heights.category,
            "h_max": self.heights.h_max,
            "h_0": self.heights.h_0,
            "fractal_dim": self.box_fit.dimension if self.box_fit else None,
            "chi2": self.chi2_vs_reference,
        }


def compute_indicators(
    w: DiscretizedDistribution,
    support_c: float = 0.99,
    n_h: int = 100,
    reference: DiscretizedDistribution | None = None,
    with_box_dimension: bool = True,
) -> IndicatorRecord:
    """Evaluate the whole indicator suite on one distribution."""
    box = None
    if with_box_dimension and w.N >= 1000:
        box = box_counting_dimension(w)
    return IndicatorRecord(
        pr=participation_ratio(w),
        pr_fit=pr_scaling_exponent(w),
        support=support_fraction(w, support_c),
        heights=height_category(w, n_h),
        box_fit=box,
        chi2_vs_reference=chi2_distance(w, reference) if reference is not None else None,
    )
