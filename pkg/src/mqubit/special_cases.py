"""Closed-form angle distributions for the solvable parameter families.

Commensurability singles out four families on top of the decoupled
(``gamma = 0``) qubit: frozen (``YT = 2*pi*q``, nothing moves), shift
(``MT = q*pi``, one matrix reflects, the other rotates by a fixed angle),
period-2 (``YT = (2l+1)*pi``, weak attraction to the two-point cycle at
``+-pi/2``), and projecting matrices (one or both determinants vanish).
Each has an exact stationary distribution; this module classifies
parameters and evaluates those distributions.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from .core_maps import (
    PROJECTIVE_DET_TOL,
    TWO_PI,
    GcEigenangles,
    KrausPair,
    Outcome,
    SetupParams,
    build_params,
    eigenangles,
    gc_probability,
    kraus_matrices,
    theta_map,
    wrap_angle,
)
from .master_equation import DiscretizedDistribution, bin_index


class NotProjective(ValueError):
    pass


class NotDoubleProjective(ValueError):
    pass


class NotShiftCase(ValueError):
    pass


class Variant(enum.Enum):
    GAMMA_ZERO = "gamma_zero"
    FROZEN = "frozen"
    SHIFT = "shift"
    PERIOD2 = "period2"
    PROJECTIVE_MINUS = "projective_minus"
    PROJECTIVE_PLUS = "projective_plus"
    DOUBLE_PROJECTIVE = "double_projective"
    GENERIC = "generic"


@dataclass(frozen=True)
class SpecialCaseTag:
    """Detected solvable family, its integer index, and raw distances.

    ``distances`` holds, for every condition, how far the parameters are
    from satisfying it (angle residues for the commensurate families,
    determinant moduli for the projective ones).
    """

    variant: Variant
    index: int | None
    distances: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "variant": self.variant.value,
            "index": self.index,
            "distances": self.distances,
        }


def _mod_distance(x: float, period: float) -> float:
    """Distance of x from the nearest integer multiple of ``period``."""
    r = math.fmod(x, period)
    if r < 0:
        r += period
    return min(r, period - r)


def classify(p: SetupParams, tol: float = 1e-9) -> SpecialCaseTag:
    """Tag the parameter point with the solvable family it sits on (if any)."""
    kp = kraus_matrices(p)
    yt = p.Y * p.T
    mt = p.M * p.T
    distances = {
        "frozen": _mod_distance(yt, TWO_PI),
        "shift": _mod_distance(mt, math.pi),
        "period2": _mod_distance(yt - math.pi, TWO_PI),
        "projective_minus": abs(kp.det_minus),
        "projective_plus": abs(kp.det_plus),
    }
    if p.gamma == 0.0:
        return SpecialCaseTag(Variant.GAMMA_ZERO, None, distances)
    if distances["projective_minus"] < tol and distances["projective_plus"] < tol:
        return SpecialCaseTag(Variant.DOUBLE_PROJECTIVE, None, distances)
    if distances["frozen"] < tol:
        return SpecialCaseTag(Variant.FROZEN, round(yt / TWO_PI), distances)
    if distances["period2"] < tol:
        return SpecialCaseTag(Variant.PERIOD2, round((yt - math.pi) / TWO_PI), distances)
    if distances["shift"] < tol:
        return SpecialCaseTag(Variant.SHIFT, round(mt / math.pi), distances)
    if distances["projective_minus"] < tol:
        return SpecialCaseTag(Variant.PROJECTIVE_MINUS, None, distances)
    if distances["projective_plus"] < tol:
        return SpecialCaseTag(Variant.PROJECTIVE_PLUS, None, distances)
    return SpecialCaseTag(Variant.GENERIC, None, distances)


@dataclass
class AnalyticADF:
    """Closed-form distribution: weighted delta peaks, or "keeps the input".

    ``preserving`` marks families where the distribution equals whatever
    the initial condition was (frozen dynamics); the peak list then holds
    the initial angle with weight 1.
    """

    peaks: list[tuple[float, float]]
    preserving: bool = False

    def __post_init__(self):
        total = sum(w for _, w in self.peaks)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"peak weights sum to {total!r}, expected 1")

    def to_distribution(self, n: int) -> DiscretizedDistribution:
        pr = np.zeros(n)
        for theta, weight in self.peaks:
            pr[bin_index(theta, n)] += weight
        return DiscretizedDistribution(pr=pr)

    def to_json(self) -> list[dict]:
        return [{"theta": t, "weight": w} for t, w in self.peaks]


# ---------------------------------------------------------------------------
# gamma = 0


def gamma_zero_adf(theta0: float, mt: float | None = None) -> AnalyticADF:
    """Stationary distribution of the decoupled qubit.

    Repeated measurements steer the state to the poles with the initial
    occupation probabilities: weight ``cos^2(theta0/2)`` at the north pole
    and ``sin^2(theta0/2)`` at the south pole (theta = -pi in our wrap).
    When ``mt`` is given and ``MT`` is an integer multiple of pi, the
    click probability vanishes identically and the initial angle is
    preserved instead.
    """
    if mt is not None and _mod_distance(mt, math.pi) < 1e-9:
        return AnalyticADF(peaks=[(wrap_angle(theta0), 1.0)], preserving=True)
    w_north = math.cos(theta0 / 2.0) ** 2
    w_south = math.sin(theta0 / 2.0) ** 2
    return AnalyticADF(peaks=[(0.0, w_north), (-math.pi, w_south)])


def null_probability(theta0: float, mt: float, length: int) -> float:
    """Probability of an all-no-click record of the given length (gamma = 0)."""
    if length < 0:
        raise ValueError("length must be nonnegative")
    return (
        math.cos(theta0 / 2.0) ** 2 * math.cos(mt) ** (2 * length)
        + math.sin(theta0 / 2.0) ** 2
    )


# ---------------------------------------------------------------------------
# period 2


def period2_adf() -> AnalyticADF:
    """Equal peaks at the two-point limit cycle ``theta = +-pi/2``."""
    return AnalyticADF(peaks=[(math.pi / 2.0, 0.5), (-math.pi / 2.0, 0.5)])


def period2_binomial_distribution(
    n_t: int, theta0: float, p: SetupParams, bins: int = 1000
) -> DiscretizedDistribution:
    """Finite-time distribution on the period-2 line for balanced outcomes.

    With ``P_+ = P_- = 1/2`` the walk over the reduced product chain gives
    binomial weights on the alternating-product states
    ``(m_+ m_-)^n psi0`` and their mirror images.
    """
    if n_t < 2 or n_t % 2 != 0:
        raise ValueError("n_t must be a positive even step count")
    tag = classify(p)
    if tag.variant != Variant.PERIOD2:
        raise ValueError("parameters are not on a period-2 line")
    kp = kraus_matrices(p)
    denom = 2.0**n_t
    thetas = [wrap_angle(theta0)]
    weights = [math.comb(n_t, n_t // 2) / denom]
    th_pm = theta0  # orbit of (m_+ m_-)^n
    th_mp = theta0  # orbit of (m_- m_+)^n
    for n in range(1, n_t // 2 + 1):
        th_pm = theta_map(theta_map(th_pm, Outcome.NO_CLICK, p, kp), Outcome.CLICK, p, kp)
        th_mp = theta_map(theta_map(th_mp, Outcome.CLICK, p, kp), Outcome.NO_CLICK, p, kp)
        w = math.comb(n_t, (n_t + 2 * n) // 2) / denom
        thetas.extend([float(th_pm), float(th_mp)])
        weights.extend([w, w])
    pr = np.zeros(bins)
    np.add.at(pr, bin_index(np.asarray(thetas), bins), np.asarray(weights))
    return DiscretizedDistribution(pr=pr)


# ---------------------------------------------------------------------------
# projecting matrices


def _projector_eigenangle(kp: KrausPair, p: SetupParams, mu: Outcome) -> float:
    ea = eigenangles(p, mu, kp)
    if ea is None:
        raise NotProjective(
            f"matrix for outcome {mu.name} has no GC eigenangles"
        )
    # zero-determinant matrix: the dominant eigenangle carries the nonzero eigenvalue
    return ea.dominant


def projective_series_peaks(
    p: SetupParams, n_terms: int = 20, kp: KrausPair | None = None
) -> AnalyticADF:
    """Stationary delta-peak series when exactly one matrix projects.

    The main peak sits at the projector's surviving eigenangle; satellite
    ``n`` sits at the n-fold forward image under the *other* map, weighted
    by the product of that map's Born probabilities along the orbit.
    Truncated after ``n_terms`` satellites (they decay geometrically) and
    renormalized.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be at least 1")
    if kp is None:
        kp = kraus_matrices(p)
    proj_minus = abs(kp.det_minus) < PROJECTIVE_DET_TOL
    proj_plus = abs(kp.det_plus) < PROJECTIVE_DET_TOL
    if proj_minus == proj_plus:
        raise NotProjective(
            "need exactly one projecting matrix "
            f"(|det m_-| = {abs(kp.det_minus):.3e}, |det m_+| = {abs(kp.det_plus):.3e})"
        )
    projector = Outcome.NO_CLICK if proj_minus else Outcome.CLICK
    other = Outcome.CLICK if proj_minus else Outcome.NO_CLICK
    theta_main = _projector_eigenangle(kp, p, projector)
    peaks = [(theta_main, 1.0)]
    theta = theta_main
    weight = 1.0
    for _ in range(n_terms):
        weight *= float(gc_probability(theta, other, p, kp))
        theta = float(theta_map(theta, other, p, kp))
        peaks.append((theta, weight))
    norm = sum(w for _, w in peaks)
    return AnalyticADF(peaks=[(t, w / norm) for t, w in peaks])


def projective_series_adf(
    p: SetupParams, n_terms: int = 20, bins: int = 1000
) -> DiscretizedDistribution:
    """`projective_series_peaks` binned onto ``bins`` GC cells."""
    return projective_series_peaks(p, n_terms).to_distribution(bins)


def double_projective_adf(p: SetupParams) -> tuple[AnalyticADF, float]:
    """Two equal peaks at the projectors' eigenangles, plus the cross probability.

    The escape probability from either peak equals ``1 - 2*cos(YT/2)^2``
    and is the same for both, hence the balanced 1/2 weights.
    """
    kp = kraus_matrices(p)
    if abs(kp.det_minus) >= PROJECTIVE_DET_TOL or abs(kp.det_plus) >= PROJECTIVE_DET_TOL:
        raise NotDoubleProjective(
            f"|det m_-| = {abs(kp.det_minus):.3e}, |det m_+| = {abs(kp.det_plus):.3e}"
        )
    theta_minus = _projector_eigenangle(kp, p, Outcome.NO_CLICK)
    theta_plus = _projector_eigenangle(kp, p, Outcome.CLICK)
    cross = 1.0 - 2.0 * p.cY**2
    return AnalyticADF(peaks=[(theta_plus, 0.5), (theta_minus, 0.5)]), cross


def find_double_projective_point(
    gamma: float = 1.0, l: int = 0, t_bracket: tuple[float, float] = (0.05, 5.0)
) -> SetupParams:
    """Locate an intersection of the two projective curves by root-finding.

    Both determinants vanish iff ``MT = pi/2 + pi*l`` and
    ``M |sin(YT/2)| = Y/sqrt(2)``; for fixed ``l`` the first condition
    makes M a function of T and the second becomes a 1-d root problem.
    """
    target_mt = math.pi / 2.0 + math.pi * l

    def residual(t: float) -> float:
        m = target_mt / t
        y = math.hypot(m, 2.0 * gamma)
        return m * abs(math.sin(y * t / 2.0)) - y / math.sqrt(2.0)

    lo, hi = t_bracket
    ts = np.linspace(lo, hi, 2001)
    vals = [residual(t) for t in ts]
    for a, b, fa, fb in zip(ts[:-1], ts[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            t_root = float(a)
            break
        if fa * fb < 0:
            t_root = float(brentq(residual, a, b, xtol=1e-14, rtol=8.9e-16))
            break
    else:
        raise ValueError(f"no double-projective point for l={l} in {t_bracket}")
    return build_params(M=target_mt / t_root, T=t_root, gamma=gamma)


def find_projective_point(
    m_value: float,
    mu: Outcome,
    gamma: float = 1.0,
    t_bracket: tuple[float, float] = (0.05, 5.0),
) -> SetupParams:
    """Root-find T at fixed M so that ``det m_mu = 0``."""

    def det_at(t: float) -> float:
        p = build_params(m_value, t, gamma)
        kp = kraus_matrices(p)
        return float(kp.det(mu).real)

    lo, hi = t_bracket
    ts = np.linspace(lo, hi, 2001)
    vals = [det_at(t) for t in ts]
    for a, b, fa, fb in zip(ts[:-1], ts[1:], vals[:-1], vals[1:]):
        if fa * fb < 0:
            t_root = float(brentq(det_at, a, b, xtol=1e-14, rtol=8.9e-16))
            return build_params(m_value, t_root, gamma)
    raise ValueError(f"det m_{mu.name} has no zero for M={m_value} in {t_bracket}")


# ---------------------------------------------------------------------------
# shift case


@dataclass(frozen=True)
class ShiftProperties:
    """Rotation angle of the shift matrix and its commensurability."""

    shift_angle: float  # half-angle rotation per application of the shift matrix
    commensurate: bool
    numerator: int | None = None
    denominator: int | None = None


def _rational_approx(x: float, max_den: int, tol: float) -> tuple[int, int] | None:
    frac = Fraction(x).limit_denominator(max_den)
    if abs(x - frac.numerator / frac.denominator) <= tol:
        return frac.numerator, frac.denominator
    return None


def shift_properties(p: SetupParams, max_denominator: int = 64) -> ShiftProperties:
    """Shift angle (phase of the rotating matrix's eigenvalue) on a shift line.

    For odd ``MT/pi`` the click matrix rotates the GC and the no-click
    matrix reflects it; for even multiples the roles swap.  The motion is
    commensurate (finite orbits, localized distribution) iff the angle is
    a rational multiple of pi with denominator up to ``max_denominator``.
    """
    tag = classify(p)
    if tag.variant != Variant.SHIFT:
        raise NotShiftCase(f"MT = {p.M * p.T} is not an integer multiple of pi")
    kp = kraus_matrices(p)
    q = round(p.M * p.T / math.pi)
    rot = kp.real_plus if q % 2 == 1 else kp.real_minus
    # conformal rotation-scaling: angle from any column
    phi = math.atan2(rot[1, 0], rot[0, 0])
    approx = _rational_approx(phi / math.pi, max_denominator, 1e-9)
    if approx is None:
        return ShiftProperties(shift_angle=phi, commensurate=False)
    num, den = approx
    return ShiftProperties(
        shift_angle=phi, commensurate=True, numerator=num, denominator=den
    )
