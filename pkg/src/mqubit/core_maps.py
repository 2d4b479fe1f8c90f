"""Exact single-step physics of the monitored qubit.

A qubit (two tunnel-coupled sites, hopping ``gamma``) is coupled with
strength ``M`` to a two-state detector that is projectively read out and
reset every period ``T``.  Each readout applies one of two 2x2 Kraus
matrices to the qubit state, with Born-rule probabilities.  The circle cut
out of the Bloch sphere by the YZ-plane (the "Grand Circle", GC) is
invariant under both matrices, so the long-time dynamics reduce to maps of
a single angle ``theta``.

This module provides the parameter bundle, the Kraus pair in closed form,
Born probabilities, full Bloch-state updates, and the GC angle maps
together with their inverses, derivatives and fixed-point angles
("eigenangles").  All functions are pure; `SetupParams` and `KrausPair`
are immutable and safe to share across threads.

Angle conventions: the Bloch angle ``theta`` lives in ``[-pi, pi)`` with
the GC state ``(cos(theta/2), i*sin(theta/2))``.  Internally the GC action
of a Kraus matrix is a real 2x2 matrix acting on ``(cos(theta/2),
sin(theta/2))``; this avoids all complex-phase bookkeeping and quadrant
case analysis.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

#: |det| below this counts as a projecting (non-invertible) matrix.
PROJECTIVE_DET_TOL = 1e-12

#: Smallest branch probability apply_kraus will normalize by.
MIN_BRANCH_PROBABILITY = 1e-300


class ZeroProbabilityOutcome(ValueError):
    """Requested measurement branch has (numerically) zero probability."""


class NonInvertibleMap(ValueError):
    """The Kraus matrix for the requested outcome is projecting."""


class Outcome(enum.IntEnum):
    """Detector readout: CLICK flips the detector, NO_CLICK leaves it."""

    CLICK = 1
    NO_CLICK = -1


OUTCOMES = (Outcome.NO_CLICK, Outcome.CLICK)


def wrap_angle(theta: float) -> float:
    """Wrap an angle into [-pi, pi); +pi maps to -pi."""
    w = math.fmod(theta + math.pi, TWO_PI)
    if w < 0.0:
        w += TWO_PI
    return w - math.pi


def wrap_angles(theta: np.ndarray) -> np.ndarray:
    """Vectorized `wrap_angle`."""
    return np.mod(np.asarray(theta, dtype=float) + math.pi, TWO_PI) - math.pi


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class SetupParams:
    """Physical parameters of one phase-diagram point plus derived scales.

    Attributes
    ----------
    M : float
        Qubit-detector coupling strength.
    T : float
        Measurement period.
    gamma : float
        Hopping strength between the two qubit sites.
    Y : float
        Combined energy scale ``sqrt(M**2 + 4*gamma**2)``.
    cM, sM, cY, sY : float
        Cached ``cos/sin(M*T/2)`` and ``cos/sin(Y*T/2)``.
    """

    M: float
    T: float
    gamma: float
    Y: float
    cM: float
    sM: float
    cY: float
    sY: float


def build_params(M: float, T: float, gamma: float) -> SetupParams:
    """Validate inputs and populate all derived fields of `SetupParams`."""
    for name, val in (("M", M), ("T", T), ("gamma", gamma)):
        if not math.isfinite(val):
            raise ValueError(f"{name} must be finite, got {val!r}")
    if M <= 0.0:
        raise ValueError(f"M must be positive, got {M}")
    if T < 0.0:
        raise ValueError(f"T must be nonnegative, got {T}")
    if gamma < 0.0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    Y = math.hypot(M, 2.0 * gamma)
    return SetupParams(
        M=float(M),
        T=float(T),
        gamma=float(gamma),
        Y=Y,
        cM=math.cos(M * T / 2.0),
        sM=math.sin(M * T / 2.0),
        cY=math.cos(Y * T / 2.0),
        sY=math.sin(Y * T / 2.0),
    )


# ---------------------------------------------------------------------------
# Kraus pair


@dataclass(frozen=True)
class EigenData:
    """Closed-form eigen-decomposition of one 2x2 Kraus matrix.

    ``values[k]`` belongs to ``vectors[:, k]``; vectors are unnormalized.
    """

    values: np.ndarray
    vectors: np.ndarray


@dataclass(frozen=True)
class KrausPair:
    """The two post-measurement matrices and derived data.

    ``real_minus``/``real_plus`` are the real 2x2 representations of the GC
    action: up to a global phase each Kraus matrix maps
    ``(x, i*y) -> (x', i*y')`` with ``(x', y') = R @ (x, y)``.
    ``det(real_minus) == det(m_minus)`` and ``det(real_plus) == -det(m_plus)``.
    """

    m_minus: np.ndarray
    m_plus: np.ndarray
    det_minus: complex
    det_plus: complex
    eig_minus: EigenData
    eig_plus: EigenData
    real_minus: np.ndarray
    real_plus: np.ndarray

    def matrix(self, mu: Outcome) -> np.ndarray:
        return self.m_plus if mu == Outcome.CLICK else self.m_minus

    def det(self, mu: Outcome) -> complex:
        return self.det_plus if mu == Outcome.CLICK else self.det_minus

    def eig(self, mu: Outcome) -> EigenData:
        return self.eig_plus if mu == Outcome.CLICK else self.eig_minus

    def real_rep(self, mu: Outcome) -> np.ndarray:
        return self.real_plus if mu == Outcome.CLICK else self.real_minus


def _eigen_2x2(m: np.ndarray) -> EigenData:
    """Closed-form eigenvalues/eigenvectors of a symmetric 2x2 matrix."""
    a, b, d = m[0, 0], m[0, 1], m[1, 1]
    tr = a + d
    det = a * d - b * m[1, 0]
    disc = np.emath.sqrt(tr * tr - 4.0 * det)
    values = np.array([(tr + disc) / 2.0, (tr - disc) / 2.0], dtype=complex)
    vectors = np.empty((2, 2), dtype=complex)
    for k, lam in enumerate(values):
        v1 = np.array([b, lam - a])
        v2 = np.array([lam - d, b])
        v = v1 if np.abs(v1).max() >= np.abs(v2).max() else v2
        if np.abs(v).max() < 1e-300:
            v = np.array([1.0, 0.0]) if k == 0 else np.array([0.0, 1.0])
        vectors[:, k] = v
    return EigenData(values=values, vectors=vectors)


def _real_rep_from_matrix(m: np.ndarray, mu: Outcome, atol: float = 1e-10) -> np.ndarray:
    """Extract the real GC representation of a Kraus matrix.

    For NO_CLICK the matrix already has real diagonal and imaginary
    off-diagonal; for CLICK the same holds after multiplying by i.
    """
    w = 1j * m if mu == Outcome.CLICK else m
    pattern_err = max(
        abs(w[0, 0].imag), abs(w[1, 1].imag), abs(w[0, 1].real), abs(w[1, 0].real)
    )
    if pattern_err > atol:
        raise ValueError(f"matrix does not have the GC structure (residual {pattern_err:.3e})")
    s = -w[0, 1].imag
    return np.array([[w[0, 0].real, s], [-s, w[1, 1].real]])


def kraus_pair_from_matrices(m_minus: np.ndarray, m_plus: np.ndarray) -> KrausPair:
    """Assemble a `KrausPair` (determinants, eigen-data, real reps) from raw matrices."""
    m_minus = np.asarray(m_minus, dtype=complex)
    m_plus = np.asarray(m_plus, dtype=complex)
    det_m = m_minus[0, 0] * m_minus[1, 1] - m_minus[0, 1] * m_minus[1, 0]
    det_p = m_plus[0, 0] * m_plus[1, 1] - m_plus[0, 1] * m_plus[1, 0]
    return KrausPair(
        m_minus=m_minus,
        m_plus=m_plus,
        det_minus=complex(det_m),
        det_plus=complex(det_p),
        eig_minus=_eigen_2x2(m_minus),
        eig_plus=_eigen_2x2(m_plus),
        real_minus=_real_rep_from_matrix(m_minus, Outcome.NO_CLICK),
        real_plus=_real_rep_from_matrix(m_plus, Outcome.CLICK),
    )


def kraus_matrices(p: SetupParams) -> KrausPair:
    """Closed-form no-click and click matrices for the given parameters."""
    ratio = p.M / p.Y
    g2 = 2.0 * p.gamma / p.Y  # = sqrt(Y^2 - M^2) / Y
    off_m = g2 * p.cM * p.sY
    m_minus = np.array(
        [
            [p.cM * p.cY - ratio * p.sM * p.sY, -1j * off_m],
            [-1j * off_m, p.cM * p.cY + ratio * p.sM * p.sY],
        ],
        dtype=complex,
    )
    off_p = g2 * p.sM * p.sY
    m_plus = -1j * np.array(
        [
            [p.sM * p.cY + ratio * p.cM * p.sY, -1j * off_p],
            [-1j * off_p, p.sM * p.cY - ratio * p.cM * p.sY],
        ],
        dtype=complex,
    )
    return kraus_pair_from_matrices(m_minus, m_plus)


# ---------------------------------------------------------------------------
# Bloch states


@dataclass(frozen=True)
class BlochState:
    """A pure qubit state ``(alpha, beta)`` with canonical global phase.

    The phase is fixed so that ``alpha`` is real-nonnegative (if ``alpha``
    vanishes, ``beta`` is made real-positive).  ``theta`` / ``phi`` label
    the state in the chart ``alpha = cos(theta/2)``,
    ``beta = exp(i*phi)*sin(theta/2)`` with ``theta in [-pi, pi)``; states
    on the GC (YZ-plane) are reported with ``phi = pi/2`` and the full
    signed angle ``theta``.
    """

    alpha: complex
    beta: complex
    theta: float
    phi: float

    #: states with |b_x| below this are labeled as GC members
    _GC_ATOL = 1e-12

    def bloch_vector(self) -> np.ndarray:
        """Unit vector ``(2*Re(a* b), 2*Im(a* b), |a|^2 - |b|^2)``."""
        cross = np.conj(self.alpha) * self.beta
        return np.array(
            [
                2.0 * cross.real,
                2.0 * cross.imag,
                abs(self.alpha) ** 2 - abs(self.beta) ** 2,
            ]
        )

    def gc_angle(self) -> float:
        """Signed GC angle of the state's projection onto the YZ-plane."""
        b = self.bloch_vector()
        return wrap_angle(math.atan2(b[1], b[2]))


def _canonical_amplitudes(alpha: complex, beta: complex) -> tuple[complex, complex]:
    norm = math.hypot(abs(alpha), abs(beta))
    if not math.isfinite(norm) or norm < 1e-12:
        raise ValueError("state amplitudes must form a normalizable vector")
    alpha, beta = alpha / norm, beta / norm
    if abs(alpha) > 1e-12:
        phase = alpha / abs(alpha)
    else:
        phase = beta / abs(beta)
    return alpha / phase, beta / phase


def bloch_state(alpha: complex, beta: complex) -> BlochState:
    """Normalize, fix the global phase and derive chart angles."""
    alpha, beta = _canonical_amplitudes(complex(alpha), complex(beta))
    cross = np.conj(alpha) * beta
    bx = 2.0 * cross.real
    by = 2.0 * cross.imag
    bz = abs(alpha) ** 2 - abs(beta) ** 2
    r = math.hypot(bx, by)
    if r < BlochState._GC_ATOL:
        theta = 0.0 if bz > 0.0 else -math.pi
        phi = math.pi / 2.0
    elif abs(bx) < BlochState._GC_ATOL:
        theta = wrap_angle(math.atan2(by, bz))
        phi = math.pi / 2.0
    else:
        phi_full = math.atan2(by, bx)
        theta_mag = math.atan2(r, bz)
        if abs(phi_full) <= math.pi / 2.0:
            theta, phi = theta_mag, phi_full
        else:
            theta = wrap_angle(-theta_mag)
            phi = phi_full - math.copysign(math.pi, phi_full)
    return BlochState(alpha=alpha, beta=beta, theta=theta, phi=phi)


def state_from_angles(theta: float, phi: float) -> BlochState:
    """State ``(cos(theta/2), exp(i*phi)*sin(theta/2))`` for any real angles."""
    return bloch_state(
        math.cos(theta / 2.0),
        complex(math.cos(phi), math.sin(phi)) * math.sin(theta / 2.0),
    )


def gc_state(theta: float) -> BlochState:
    """The GC state at Bloch angle ``theta``."""
    return bloch_state(math.cos(theta / 2.0), 1j * math.sin(theta / 2.0))


def bloch_vector(theta: float, phi: float) -> np.ndarray:
    """Unit Bloch vector ``(sin t cos p, sin t sin p, cos t)``."""
    st, ct = math.sin(theta), math.cos(theta)
    return np.array([st * math.cos(phi), st * math.sin(phi), ct])


# ---------------------------------------------------------------------------
# Born rule and state updates


def born_probabilities(state: BlochState, p: SetupParams) -> tuple[float, float]:
    """``(P_plus, P_minus)`` for one measurement on ``state``.

    Both values are squared norms of the corresponding Kraus matrix applied
    to the amplitudes; completeness makes them sum to one.
    """
    kp = kraus_matrices(p)
    psi = np.array([state.alpha, state.beta])
    wp = kp.m_plus @ psi
    wm = kp.m_minus @ psi
    p_plus = float(np.vdot(wp, wp).real)
    p_minus = float(np.vdot(wm, wm).real)
    return p_plus, p_minus


def apply_kraus(
    state: BlochState, mu: Outcome, p: SetupParams, kp: KrausPair | None = None
) -> tuple[BlochState, float]:
    """Apply the Kraus matrix for outcome ``mu`` and renormalize.

    Returns the post-measurement state (canonical phase) and the Born
    probability of the chosen outcome.  Raises `ZeroProbabilityOutcome`
    when that probability is below ``MIN_BRANCH_PROBABILITY``.
    """
    if kp is None:
        kp = kraus_matrices(p)
    w = kp.matrix(mu) @ np.array([state.alpha, state.beta])
    prob = float(np.vdot(w, w).real)
    if prob < MIN_BRANCH_PROBABILITY:
        raise ZeroProbabilityOutcome(
            f"outcome {mu.name} has probability {prob:.3e} for this state"
        )
    scale = 1.0 / math.sqrt(prob)
    return bloch_state(w[0] * scale, w[1] * scale), prob


# ---------------------------------------------------------------------------
# GC angle maps

def _gc_vec(theta):
    half = np.asarray(theta, dtype=float) / 2.0
    return np.cos(half), np.sin(half)


def _angle_of(x, y):
    return wrap_angles(2.0 * np.arctan2(y, x))


def _apply_real(r: np.ndarray, theta):
    x, y = _gc_vec(theta)
    return _angle_of(r[0, 0] * x + r[0, 1] * y, r[1, 0] * x + r[1, 1] * y)


def gc_probability(theta, mu: Outcome, p: SetupParams, kp: KrausPair | None = None):
    """Born probability of outcome ``mu`` for the GC state at ``theta``.

    Accepts scalars or arrays.  Equals ``|R_mu v(theta/2)|^2`` in the real
    representation, which is the squared norm of the post-measurement
    amplitudes.
    """
    if kp is None:
        kp = kraus_matrices(p)
    r = kp.real_rep(mu)
    x, y = _gc_vec(theta)
    return (r[0, 0] * x + r[0, 1] * y) ** 2 + (r[1, 0] * x + r[1, 1] * y) ** 2


def theta_map(theta, mu: Outcome, p: SetupParams, kp: KrausPair | None = None):
    """Forward GC map ``Theta_mu``: post-measurement angle for outcome ``mu``.

    Implemented by applying the real representation to
    ``(cos(theta/2), sin(theta/2))`` and reading the new angle with atan2;
    total even at projecting parameters (where it becomes constant).
    Accepts scalars or arrays.
    """
    if kp is None:
        kp = kraus_matrices(p)
    return _apply_real(kp.real_rep(mu), theta)


def theta_inverse(theta, mu: Outcome, p: SetupParams, kp: KrausPair | None = None):
    """Retrospective GC map ``F_mu``; inverse of `theta_map`.

    Raises `NonInvertibleMap` when ``|det m_mu|`` is below
    `PROJECTIVE_DET_TOL` (projective line).
    """
    if kp is None:
        kp = kraus_matrices(p)
    if abs(kp.det(mu)) < PROJECTIVE_DET_TOL:
        raise NonInvertibleMap(
            f"matrix for outcome {mu.name} is projecting (|det| = {abs(kp.det(mu)):.3e})"
        )
    r = kp.real_rep(mu)
    det = r[0, 0] * r[1, 1] - r[0, 1] * r[1, 0]
    r_inv = np.array([[r[1, 1], -r[0, 1]], [-r[1, 0], r[0, 0]]]) / det
    return _apply_real(r_inv, theta)


def theta_map_derivative(
    theta,
    mu: Outcome,
    p: SetupParams,
    kp: KrausPair | None = None,
    validate: bool = False,
):
    """Slope ``dTheta_mu/dtheta`` of the forward GC map.

    Closed form: ``det(R_mu) / P_mu(theta)`` with ``R_mu`` the real
    representation (a linear map acting on the half-angle circle, whose
    induced angle map has derivative det/|Rv|^2).  With ``validate=True``
    the value is cross-checked against a central finite difference.
    """
    if kp is None:
        kp = kraus_matrices(p)
    r = kp.real_rep(mu)
    det = r[0, 0] * r[1, 1] - r[0, 1] * r[1, 0]
    slope = det / gc_probability(theta, mu, p, kp)
    if validate:
        h = 1e-6
        lo = theta_map(np.asarray(theta) - h, mu, p, kp)
        hi = theta_map(np.asarray(theta) + h, mu, p, kp)
        fd = wrap_angles(hi - lo) / (2.0 * h)
        rel = np.max(np.abs(fd - slope) / np.maximum(np.abs(slope), 1e-12))
        if rel > 1e-5:
            raise ValueError(f"closed-form slope disagrees with finite difference ({rel:.3e})")
    return slope


@dataclass(frozen=True)
class GcEigenangles:
    """Fixed-point angles of one GC map, dominant (larger |eigenvalue|) first."""

    dominant: float
    subdominant: float
    eigval_dominant: float
    eigval_subdominant: float


def eigenangles(p: SetupParams, mu: Outcome, kp: KrausPair | None = None) -> GcEigenangles | None:
    """GC eigenangles of the Kraus matrix for ``mu``, or None.

    The real representation has real eigenvectors exactly when the Kraus
    eigenvectors lie on the GC; complex spectrum (eigenvectors on the
    equator) returns None.  Each returned angle is a fixed point of
    `theta_map`.
    """
    if kp is None:
        kp = kraus_matrices(p)
    r = kp.real_rep(mu)
    tr = r[0, 0] + r[1, 1]
    det = r[0, 0] * r[1, 1] - r[0, 1] * r[1, 0]
    disc = tr * tr - 4.0 * det
    if disc <= 0.0:
        return None
    root = math.sqrt(disc)
    out = []
    for lam in ((tr + root) / 2.0, (tr - root) / 2.0):
        v1 = (r[0, 1], lam - r[0, 0])
        v2 = (lam - r[1, 1], r[1, 0])
        v = v1 if max(abs(v1[0]), abs(v1[1])) >= max(abs(v2[0]), abs(v2[1])) else v2
        if max(abs(v[0]), abs(v[1])) < 1e-300:
            return None  # degenerate (proportional to identity)
        out.append((wrap_angle(2.0 * math.atan2(v[1], v[0])), lam))
    out.sort(key=lambda tl: -abs(tl[1]))
    return GcEigenangles(
        dominant=out[0][0],
        subdominant=out[1][0],
        eigval_dominant=out[0][1],
        eigval_subdominant=out[1][1],
    )
