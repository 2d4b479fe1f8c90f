"""Parameter-plane driver: classify, solve, characterize, persist.

One grid point runs the full pipeline (special-case classification,
stationary solve or analytic fallback, indicator suite, ergodicity
analysis) and serializes to a single JSON line with a fixed key order, so
sweeps are streamable, resumable and byte-reproducible.  Special-case
curves are emitted as overlay data for the plotting scripts.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core_maps import SetupParams, build_params, gc_state, kraus_matrices
from .ergodicity import analyze_ergodicity
from .indicators import IndicatorRecord, chi2_distance, compute_indicators
from .master_equation import (
    DiscretizedDistribution,
    NotConverged,
    SolveReport,
    SparseMarkov,
    build_markov,
    coarse_grain,
    power_iterate,
    uniform_distribution,
)
from .special_cases import (
    SpecialCaseTag,
    Variant,
    classify,
    double_projective_adf,
    period2_adf,
    projective_series_adf,
)
from .trajectory_mc import BURN_IN_ON_GC, TrajectoryConfig, simulate

#: default angle for trajectories started on the GC
DEFAULT_THETA0 = 0.3


@dataclass(frozen=True)
class SweepConfig:
    """One sweep's settings; defaults are desk-scale versions of the
    published protocol (N = 1e4 cells, 1e4 iterations, 40 x 40 grid)."""

    gamma: float = 1.0
    m_min: float = 1e-2
    m_max: float = 5.0
    m_count: int = 40
    t_min: float = 1e-2
    t_max: float = 5.0
    t_count: int = 40
    cells: int = 10_000
    mc_steps: int = 1_000_000
    me_max_iters: int = 10_000
    seed: int = 0
    out: str | None = None
    mode: str = "me"  # me | mc | both
    special_margin: float = 0.02
    exact_tol: float = 1e-9
    analytic_bins: int | None = None  # bins for analytic fallbacks; default = cells

    def validate(self) -> None:
        if self.mode not in ("me", "mc", "both"):
            raise ValueError(f"mode must be me|mc|both, got {self.mode!r}")
        if self.m_count < 1 or self.t_count < 1:
            raise ValueError("grid counts must be >= 1")
        if not (0.0 < self.m_min <= self.m_max <= 5.0):
            raise ValueError("M range must lie within (0, 5]")
        if not (0.0 < self.t_min <= self.t_max <= 5.0):
            raise ValueError("T range must lie within (0, 5]")
        if self.cells < 2:
            raise ValueError("cells must be >= 2")

    def m_values(self) -> np.ndarray:
        return np.linspace(self.m_min, self.m_max, self.m_count)

    def t_values(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.t_count)


# ---------------------------------------------------------------------------
# distances to special curves


def special_line_distances(M: float, T: float, gamma: float) -> dict[str, float]:
    """Gradient-normalized distance estimates to every special curve.

    Each condition is a residual g(M, T); the reported value is
    ``|g| / |grad g|``, the first-order distance in the (M, T) plane.
    """
    eps = 1e-6

    def fd_norm(fn) -> float:
        g0 = fn(M, T)
        gm = (fn(M + eps, T) - fn(M - eps, T)) / (2 * eps)
        gt = (fn(M, T + eps) - fn(M, T - eps)) / (2 * eps)
        grad = math.hypot(gm, gt)
        return abs(g0) / grad if grad > 1e-12 else math.inf

    def signed_mod(x: float, period: float) -> float:
        r = math.fmod(x, period)
        if r < 0:
            r += period
        return r if r <= period / 2 else r - period

    yt = lambda m, t: math.hypot(m, 2 * gamma) * t
    out = {
        "frozen": fd_norm(lambda m, t: signed_mod(yt(m, t), 2 * math.pi)),
        "shift": fd_norm(lambda m, t: signed_mod(m * t, math.pi)),
        "period2": fd_norm(lambda m, t: signed_mod(yt(m, t) - math.pi, 2 * math.pi)),
        "projective_minus": fd_norm(
            lambda m, t: kraus_matrices(build_params(m, t, gamma)).det_minus.real
        ),
        "projective_plus": fd_norm(
            lambda m, t: kraus_matrices(build_params(m, t, gamma)).det_plus.real
        ),
    }
    out["min"] = min(out.values())
    return out


# ---------------------------------------------------------------------------
# one point


@dataclass
class GridPointResult:
    M: float
    T: float
    gamma: float
    tag: SpecialCaseTag
    near_special: str | None
    warnings: list[str]
    indicators: IndicatorRecord | None
    ergodicity: object | None
    solve: SolveReport | None
    reason: str | None = None
    distribution_file: str | None = None
    distribution: DiscretizedDistribution | None = None  # not serialized

    def to_json(self) -> dict:
        return {
            "M": self.M,
            "T": self.T,
            "gamma": self.gamma,
            "tag": self.tag.to_json(),
            "near_special": self.near_special,
            "warnings": self.warnings,
            "indicators": self.indicators.to_json() if self.indicators else None,
            "ergodicity": self.ergodicity.to_json() if self.ergodicity else None,
            "solve": (
                {
                    "iterations": self.solve.iterations,
                    "residual": self.solve.residual,
                    "converged": self.solve.converged,
                    "eigen_gap": self.solve.eigen_gap,
                }
                if self.solve
                else None
            ),
            "reason": self.reason,
            "distribution_file": self.distribution_file,
        }


def _me_distribution(
    p: SetupParams, cfg: SweepConfig, tag: SpecialCaseTag, warnings: list[str]
) -> tuple[DiscretizedDistribution, SolveReport | None, SparseMarkov | None]:
    m = build_markov(p, cfg.cells)
    dist, report = power_iterate(
        m, uniform_distribution(cfg.cells), max_iters=cfg.me_max_iters
    )
    if not report.converged:
        if tag.variant == Variant.PERIOD2:
            warnings.append("me-nonconvergent-period2-analytic-used")
            dist = period2_adf().to_distribution(cfg.cells)
        else:
            warnings.append("me-nonconvergent")
    return dist, report, m


def _mc_distribution(p: SetupParams, cfg: SweepConfig, seed: int) -> DiscretizedDistribution:
    traj = TrajectoryConfig(
        n_steps=cfg.mc_steps,
        seed=seed,
        initial_state=gc_state(DEFAULT_THETA0),
        bins=cfg.cells,
        burn_in=min(BURN_IN_ON_GC, max(0, cfg.mc_steps - 1)),
    )
    return simulate(traj, p).histogram


def run_point(M: float, T: float, cfg: SweepConfig, seed: int | None = None) -> GridPointResult:
    """Full per-point pipeline; failures are recorded, never raised."""
    cfg.validate()
    if seed is None:
        seed = cfg.seed
    warnings: list[str] = []
    try:
        p = build_params(M, T, cfg.gamma)
        tag = classify(p, tol=cfg.exact_tol)
        dists = special_line_distances(M, T, cfg.gamma)
        near = None
        near_candidates = {k: v for k, v in dists.items() if k != "min"}
        closest = min(near_candidates, key=near_candidates.get)
        if near_candidates[closest] < cfg.special_margin:
            near = closest
            warnings.append(f"near-special:{closest}")
        if tag.variant in (Variant.FROZEN, Variant.SHIFT):
            warnings.append("degenerate-stationary")

        bins = cfg.analytic_bins or cfg.cells
        solve: SolveReport | None = None
        markov: SparseMarkov | None = None
        if tag.variant == Variant.DOUBLE_PROJECTIVE:
            adf, _ = double_projective_adf(p)
            dist = adf.to_distribution(bins)
            warnings.append("analytic-double-projective")
        elif tag.variant in (Variant.PROJECTIVE_MINUS, Variant.PROJECTIVE_PLUS):
            dist = projective_series_adf(p, bins=bins)
            warnings.append("analytic-projective-series")
        elif cfg.mode == "mc":
            dist = _mc_distribution(p, cfg, seed)
        else:
            dist, solve, markov = _me_distribution(p, cfg, tag, warnings)

        if dist.N < 1000:
            warnings.append("box-dimension-skipped:needs-1e3-cells")
        indicators = compute_indicators(dist, with_box_dimension=dist.N >= 1000)
        if cfg.mode == "both":
            mc_bins = min(cfg.cells, 1000)
            if dist.N % mc_bins == 0:
                mc_cfg = replace(cfg, cells=mc_bins)
                mc = _mc_distribution(p, mc_cfg, seed)
                indicators.chi2_vs_reference = chi2_distance(
                    coarse_grain(dist, mc_bins), mc
                )
        ergo = None
        if markov is not None:
            ergo = analyze_ergodicity(markov, p)
        return GridPointResult(
            M=M,
            T=T,
            gamma=cfg.gamma,
            tag=tag,
            near_special=near,
            warnings=warnings,
            indicators=indicators,
            ergodicity=ergo,
            solve=solve,
            distribution=dist,
        )
    except Exception as exc:  # per-point failures must not abort sweeps
        return GridPointResult(
            M=M,
            T=T,
            gamma=cfg.gamma,
            tag=SpecialCaseTag(Variant.GENERIC, None, {}),
            near_special=None,
            warnings=warnings,
            indicators=None,
            ergodicity=None,
            solve=None,
            reason=f"{type(exc).__name__}: {exc}",
        )


def run_cross_section(M: float, t_values, cfg: SweepConfig):
    """Yield `GridPointResult`s along a T-sweep at fixed M, in T order."""
    for idx, t in enumerate(t_values):
        yield run_point(M, float(t), cfg, seed=cfg.seed ^ idx)


# ---------------------------------------------------------------------------
# grids and persistence


def _point_key(m: float, t: float) -> str:
    return f"{m!r}|{t!r}"


def _grid_points(cfg: SweepConfig) -> list[tuple[int, float, float]]:
    pts = []
    idx = 0
    for m in cfg.m_values():
        for t in cfg.t_values():
            pts.append((idx, float(m), float(t)))
            idx += 1
    return pts


def _worker(args: tuple) -> tuple[int, str]:
    idx, m, t, cfg = args
    result = run_point(m, t, cfg, seed=cfg.seed ^ idx)
    return idx, json.dumps(result.to_json())


def _max_workers() -> int:
    env = os.environ.get("MQ_THREADS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def run_grid(cfg: SweepConfig, workers: int | None = None) -> tuple[int, int]:
    """Evaluate the whole grid, appending one JSON line per missing point.

    Existing (M, T) keys in the output file are skipped, so interrupted
    sweeps resume and completed sweeps are byte-idempotent.  Returns
    (points written, failures recorded).
    """
    cfg.validate()
    if cfg.out is None:
        raise ValueError("run_grid needs cfg.out")
    done: set[str] = set()
    if os.path.exists(cfg.out):
        with open(cfg.out) as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                done.add(_point_key(rec["M"], rec["T"]))
    todo = [
        (idx, m, t) for idx, m, t in _grid_points(cfg) if _point_key(m, t) not in done
    ]
    if workers is None:
        workers = min(_max_workers(), max(1, len(todo)))
    written = 0
    failures = 0
    with open(cfg.out, "a") as fh:
        if workers <= 1 or len(todo) <= 1:
            for idx, m, t in todo:
                _, line = _worker((idx, m, t, cfg))
                failures += 1 if json.loads(line)["reason"] else 0
                fh.write(line + "\n")
                written += 1
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for _, line in pool.map(
                    _worker, [(idx, m, t, cfg) for idx, m, t in todo], chunksize=1
                ):
                    failures += 1 if json.loads(line)["reason"] else 0
                    fh.write(line + "\n")
                    written += 1
    if cfg.out and (written > 0 or not os.path.exists(overlay_path(cfg.out))):
        write_overlays(overlay_path(cfg.out), cfg)
    return written, failures


def overlay_path(out: str) -> str:
    return out + ".overlays.json"


def overlay_curves(cfg: SweepConfig, samples: int = 400) -> list[dict]:
    """Points on every special-case curve inside the sweep domain.

    Commensurate curves are parameterized exactly (T as a function of M);
    projective curves are root-found in T per M-sample.  Every emitted
    point satisfies its defining equation to 1e-12.
    """
    from scipy.optimize import brentq

    gamma = cfg.gamma
    ms = np.linspace(cfg.m_min, cfg.m_max, samples)
    curves: list[dict] = []

    def add_parametric(kind: str, t_of_m, index: int):
        pts = []
        for m in ms:
            t = t_of_m(float(m))
            if cfg.t_min <= t <= cfg.t_max:
                pts.append([float(m), float(t)])
        if pts:
            curves.append({"kind": kind, "index": index, "points": pts})

    y_of = lambda m: math.hypot(m, 2 * gamma)
    q = 1
    while 2 * math.pi * q / y_of(cfg.m_max) <= cfg.t_max:
        add_parametric("frozen", lambda m, q=q: 2 * math.pi * q / y_of(m), q)
        q += 1
    q = 1
    while q * math.pi / cfg.m_max <= cfg.t_max:
        add_parametric("shift", lambda m, q=q: q * math.pi / m, q)
        q += 1
    l = 0
    while (2 * l + 1) * math.pi / y_of(cfg.m_max) <= cfg.t_max:
        add_parametric("period2", lambda m, l=l: (2 * l + 1) * math.pi / y_of(m), l)
        l += 1

    # determinants in closed form: det m_- = cM^2 - (M/Y)^2 sY^2 and
    # det m_+ = -sM^2 + (M/Y)^2 sY^2, so the root scan needs no matrices
    def det_fn(kind, m):
        y = math.hypot(m, 2 * gamma)
        if kind == "projective_minus":
            return lambda t: math.cos(m * t / 2) ** 2 - (m / y) ** 2 * math.sin(y * t / 2) ** 2
        return lambda t: -math.sin(m * t / 2) ** 2 + (m / y) ** 2 * math.sin(y * t / 2) ** 2

    ts = np.linspace(cfg.t_min, cfg.t_max, 257)
    for kind in ("projective_minus", "projective_plus"):
        pts = []
        for m in ms:
            det_at = det_fn(kind, float(m))
            vals = np.array([det_at(t) for t in ts])
            sign_change = np.nonzero(vals[:-1] * vals[1:] < 0)[0]
            for i in sign_change:
                root = brentq(det_at, ts[i], ts[i + 1], xtol=1e-15, rtol=8.9e-16)
                pts.append([float(m), float(root)])
            for i in np.nonzero(vals == 0.0)[0]:
                pts.append([float(m), float(ts[i])])
        if pts:
            curves.append({"kind": kind, "index": None, "points": pts})
    return curves


def write_overlays(path: str, cfg: SweepConfig, samples: int = 400) -> None:
    payload = {
        "gamma": cfg.gamma,
        "domain": {
            "m_min": cfg.m_min,
            "m_max": cfg.m_max,
            "t_min": cfg.t_min,
            "t_max": cfg.t_max,
        },
        "curves": overlay_curves(cfg, samples),
    }
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# distribution export


def write_distribution_csv(w: DiscretizedDistribution, path: str) -> None:
    """CSV export: header ``theta,weight``, bin centers, 17 significant digits."""
    centers = w.centers()
    with open(path, "w") as fh:
        fh.write("theta,weight\n")
        for theta, weight in zip(centers, w.pr):
            fh.write(f"{theta:.17g},{weight:.17g}\n")


def read_distribution_csv(path: str) -> DiscretizedDistribution:
    thetas = []
    weights = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "theta,weight":
            raise ValueError(f"unexpected header {header!r}")
        for line in fh:
            if not line.strip():
                continue
            a, b = line.split(",")
            thetas.append(float(a))
            weights.append(float(b))
    return DiscretizedDistribution(pr=np.asarray(weights))
