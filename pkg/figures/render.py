#!/usr/bin/env python3
"""Regenerate publication-style figures from mqubit sweep outputs.

Reads only the files the sweep CLI writes (distribution / trajectory CSVs,
JSON-lines grids and cross-sections, overlay sidecars) and never recomputes
any physics, so a render is a pure function of its inputs.

Usage:
    python figures/render.py --spec spec.json

The spec file selects one figure:

    {
      "kind": "distribution" | "cross_section" | "heatmap" | "bloch",
      "input": "path to the data file",
      "overlays": "path to the .overlays.json sidecar (optional)",
      "overlay": true,
      "zooms": [[lo, hi], ...],      # nested zoom intervals, distribution only
      "out": "figure.png"
    }
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

KINDS = ("distribution", "cross_section", "heatmap", "bloch")

OVERLAY_STYLE = {
    "frozen": dict(color="0.2", ls="--", lw=0.9),
    "shift": dict(color="0.4", ls=":", lw=0.9),
    "period2": dict(color="tab:green", ls="-", lw=0.9),
    "projective_minus": dict(color="purple", ls="-.", lw=0.9),
    "projective_plus": dict(color="darkorange", ls="-.", lw=0.9),
}


class SchemaError(ValueError):
    """Input file does not match the expected sweep-output schema."""


@dataclass
class FigureSpec:
    kind: str
    input: str
    out: str
    overlay: bool = True
    overlays: str | None = None
    zooms: list[tuple[float, float]] = field(default_factory=list)
    title: str | None = None

    @classmethod
    def load(cls, path: str) -> "FigureSpec":
        with open(path) as fh:
            raw = json.load(fh)
        unknown = set(raw) - {"kind", "input", "out", "overlay", "overlays", "zooms", "title"}
        if unknown:
            raise SchemaError(f"unknown spec fields: {sorted(unknown)}")
        for key in ("kind", "input", "out"):
            if key not in raw:
                raise SchemaError(f"spec is missing required field {key!r}")
        if raw["kind"] not in KINDS:
            raise SchemaError(f"kind must be one of {KINDS}, got {raw['kind']!r}")
        spec = cls(
            kind=raw["kind"],
            input=raw["input"],
            out=raw["out"],
            overlay=raw.get("overlay", True),
            overlays=raw.get("overlays"),
            zooms=[tuple(z) for z in raw.get("zooms", [])],
            title=raw.get("title"),
        )
        spec.validate_zooms()
        return spec

    def validate_zooms(self) -> None:
        prev = (-math.pi, math.pi)
        for lo, hi in self.zooms:
            if not (-math.pi <= lo < hi <= math.pi):
                raise SchemaError(f"zoom [{lo}, {hi}] outside [-pi, pi)")
            if not (prev[0] <= lo and hi <= prev[1]):
                raise SchemaError(f"zoom [{lo}, {hi}] not nested inside {list(prev)}")
            prev = (lo, hi)


# ---------------------------------------------------------------------------
# input readers (with line/row numbers in every complaint)


def read_distribution(path: str):
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != "theta,weight":
            raise SchemaError(f"{path}:1: expected header 'theta,weight', got {header!r}")
        thetas, weights = [], []
        for ln, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise SchemaError(f"{path}:{ln}: expected two columns")
            try:
                thetas.append(float(parts[0]))
                weights.append(float(parts[1]))
            except ValueError as exc:
                raise SchemaError(f"{path}:{ln}: {exc}") from None
    if not thetas:
        raise SchemaError(f"{path}: no data rows")
    return np.asarray(thetas), np.asarray(weights)


def read_trajectory(path: str):
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != "step,theta,phi":
            raise SchemaError(f"{path}:1: expected header 'step,theta,phi', got {header!r}")
        rows = []
        for ln, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise SchemaError(f"{path}:{ln}: expected three columns")
            try:
                rows.append((int(parts[0]), float(parts[1]), float(parts[2])))
            except ValueError as exc:
                raise SchemaError(f"{path}:{ln}: {exc}") from None
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return np.asarray(rows)


POINT_FIELDS = {"M", "T", "gamma", "tag", "indicators", "ergodicity", "solve"}


def read_points(path: str) -> list[dict]:
    records = []
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{ln}: invalid JSON ({exc.msg})") from None
            missing = POINT_FIELDS - set(rec)
            if missing:
                raise SchemaError(f"{path}:{ln}: missing fields {sorted(missing)}")
            records.append(rec)
    if not records:
        raise SchemaError(f"{path}: no records")
    return records


def read_overlays(path: str) -> list[dict]:
    with open(path) as fh:
        raw = json.load(fh)
    if "curves" not in raw:
        raise SchemaError(f"{path}: overlay file has no 'curves' field")
    return raw["curves"]


# ---------------------------------------------------------------------------
# renderers


def render_distribution(spec: FigureSpec) -> None:
    thetas, weights = read_distribution(spec.input)
    density = weights * thetas.size / (2.0 * math.pi)
    panels = 1 + len(spec.zooms)
    fig, axes = plt.subplots(panels, 1, figsize=(7, 2.2 * panels), squeeze=False)
    windows = [(-math.pi, math.pi)] + list(spec.zooms)
    for ax, (lo, hi), nxt in zip(
        axes[:, 0], windows, list(spec.zooms) + [None]
    ):
        mask = (thetas >= lo) & (thetas <= hi)
        ax.plot(thetas[mask], density[mask], lw=0.6, color="tab:blue")
        ax.set_xlim(lo, hi)
        ax.set_ylabel(r"$W(\theta)$")
        if nxt is not None:
            ax.axvspan(nxt[0], nxt[1], color="tab:blue", alpha=0.15)
    axes[-1, 0].set_xlabel(r"$\theta$")
    if spec.title:
        axes[0, 0].set_title(spec.title)
    fig.tight_layout()
    fig.savefig(spec.out, dpi=150)
    plt.close(fig)


def _overlay_ts_at(curves, m_value: float, tol: float = 0.1):
    """T positions where overlay curves cross a fixed-M section."""
    hits = []
    for curve in curves:
        pts = np.asarray(curve["points"])
        if pts.size == 0:
            continue
        close = np.abs(pts[:, 0] - m_value) < tol
        for t in pts[close, 1]:
            hits.append((curve["kind"], float(t)))
    return hits


def render_cross_section(spec: FigureSpec) -> None:
    records = read_points(spec.input)
    records.sort(key=lambda r: r["T"])
    t = np.array([r["T"] for r in records])

    def series(getter):
        out = []
        for r in records:
            try:
                out.append(getter(r))
            except (KeyError, TypeError):
                out.append(np.nan)
        return np.asarray(out, dtype=float)

    rows = [
        ("PR", series(lambda r: r["indicators"]["pr"]), "log"),
        (r"$\zeta$", series(lambda r: r["indicators"]["zeta"]), "linear"),
        ("support", series(lambda r: r["indicators"]["support"]), "log"),
        ("category", series(lambda r: r["indicators"]["category"]), "linear"),
        ("fractal dim", series(lambda r: r["indicators"]["fractal_dim"]), "linear"),
        ("ergodic", series(lambda r: 1.0 if r["ergodicity"]["ergodic"] else 0.0), "linear"),
    ]
    fig, axes = plt.subplots(len(rows), 1, figsize=(7, 1.6 * len(rows)), sharex=True)
    for ax, (label, values, scale) in zip(axes, rows):
        ax.plot(t, values, ".-", ms=3, lw=0.8)
        ax.set_ylabel(label)
        if scale == "log" and np.nanmax(values) > 0:
            ax.set_yscale("log")
        if spec.overlay and spec.overlays:
            m_value = records[0]["M"]
            for kind, t_hit in _overlay_ts_at(read_overlays(spec.overlays), m_value):
                ax.axvline(t_hit, **OVERLAY_STYLE.get(kind, {}), alpha=0.6)
    axes[-1].set_xlabel("T")
    if spec.title:
        axes[0].set_title(spec.title)
    fig.tight_layout()
    fig.savefig(spec.out, dpi=150)
    plt.close(fig)


def render_heatmap(spec: FigureSpec) -> None:
    records = read_points(spec.input)
    ms = sorted({r["M"] for r in records})
    ts = sorted({r["T"] for r in records})
    index = {(r["M"], r["T"]): r for r in records}

    def grid(getter):
        out = np.full((len(ts), len(ms)), np.nan)
        for i, tv in enumerate(ts):
            for j, mv in enumerate(ms):
                rec = index.get((mv, tv))
                if rec is None:
                    continue
                try:
                    out[i, j] = getter(rec)
                except (KeyError, TypeError):
                    pass
        return out

    panels = [
        ("PR", grid(lambda r: r["indicators"]["pr"]), dict(norm="log")),
        (r"$\zeta$", grid(lambda r: r["indicators"]["zeta"]), dict(vmin=0, vmax=1)),
        ("support", grid(lambda r: r["indicators"]["support"]), dict(vmin=0, vmax=1)),
        ("category", grid(lambda r: r["indicators"]["category"]), dict(vmin=1, vmax=3)),
        ("fractal dim", grid(lambda r: r["indicators"]["fractal_dim"]), dict(vmin=1, vmax=2)),
        ("ergodic", grid(lambda r: 1.0 if r["ergodicity"]["ergodic"] else 0.0), dict(vmin=0, vmax=1)),
    ]
    extent = (min(ms), max(ms), min(ts), max(ts))
    fig, axes = plt.subplots(3, 2, figsize=(9, 10))
    curves = read_overlays(spec.overlays) if (spec.overlay and spec.overlays) else []
    for ax, (label, values, imkw) in zip(axes.ravel(), panels):
        if np.all(np.isnan(values)):
            ax.set_axis_off()
            continue
        im = ax.imshow(
            values, origin="lower", aspect="auto", extent=extent, cmap="viridis", **imkw
        )
        fig.colorbar(im, ax=ax, shrink=0.9)
        for curve in curves:
            pts = np.asarray(curve["points"])
            if pts.size == 0:
                continue
            style = OVERLAY_STYLE.get(curve["kind"], {})
            if curve["kind"].startswith("projective"):
                ax.plot(pts[:, 0], pts[:, 1], ".", ms=1.0, color=style.get("color", "k"))
            else:
                ax.plot(pts[:, 0], pts[:, 1], **style)
        ax.set_xlim(extent[0], extent[1])
        ax.set_ylim(extent[2], extent[3])
        ax.set_title(label)
        ax.set_xlabel("M")
        ax.set_ylabel("T")
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    fig.savefig(spec.out, dpi=150)
    plt.close(fig)


def render_bloch(spec: FigureSpec) -> None:
    rows = read_trajectory(spec.input)
    theta, phi = rows[:, 1], rows[:, 2]
    x = np.sin(theta) * np.cos(phi)
    y = np.sin(theta) * np.sin(phi)
    z = np.cos(theta)
    fig = plt.figure(figsize=(6, 6))
    ax = fig.add_subplot(projection="3d")
    u = np.linspace(0, 2 * math.pi, 40)
    v = np.linspace(0, math.pi, 20)
    ax.plot_wireframe(
        np.outer(np.cos(u), np.sin(v)),
        np.outer(np.sin(u), np.sin(v)),
        np.outer(np.ones_like(u), np.cos(v)),
        color="0.85",
        lw=0.3,
    )
    gc = np.linspace(-math.pi, math.pi, 200)
    ax.plot(np.zeros_like(gc), np.sin(gc), np.cos(gc), color="0.4", lw=1.0)
    sc = ax.scatter(x, y, z, c=rows[:, 0], cmap="plasma", s=6)
    fig.colorbar(sc, ax=ax, shrink=0.6, label="step")
    ax.set_box_aspect((1, 1, 1))
    if spec.title:
        ax.set_title(spec.title)
    fig.savefig(spec.out, dpi=150)
    plt.close(fig)


RENDERERS = {
    "distribution": render_distribution,
    "cross_section": render_cross_section,
    "heatmap": render_heatmap,
    "bloch": render_bloch,
}


def render(spec: FigureSpec) -> str:
    RENDERERS[spec.kind](spec)
    return spec.out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--spec", required=True, help="figure spec JSON file")
    args = ap.parse_args(argv)
    try:
        spec = FigureSpec.load(args.spec)
        out = render(spec)
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
