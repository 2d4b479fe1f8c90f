"""End-to-end tests: generate data with the mqubit CLI, then render.

The figure scripts talk to the simulation package only through its
command-line interface and file formats, never by importing it.
"""

import json
import math
import os
import subprocess
import sys

import pytest

FIGDIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, FIGDIR)

from render import FigureSpec, SchemaError, main, render  # noqa: E402


def mqubit(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "mqubit.cli", *args], capture_output=True, text=True
    )
    assert proc.returncode == 0, proc.stderr
    return proc.stdout


@pytest.fixture(scope="session")
def data(tmp_path_factory):
    """One shared batch of CLI outputs for all rendering tests."""
    root = tmp_path_factory.mktemp("sweepdata")
    paths = {
        "cross": str(root / "cross.jsonl"),
        "grid": str(root / "grid.jsonl"),
        "dist": str(root / "dist.csv"),
        "traj": str(root / "traj.csv"),
    }
    # cross-section through the criterion-11 window at M = 2.92
    mqubit(
        "cross-section", "--M", "2.92", "--t-min", "2.4", "--t-max", "3.2",
        "--t-count", "8", "--cells", "1000", "--iters", "2000", "--seed", "5",
        "--out", paths["cross"],
    )
    # small grid around the criterion-10 region, with the overlay sidecar
    mqubit(
        "grid", "--m-min", "2.0", "--m-max", "4.1", "--m-count", "3",
        "--t-min", "3.4", "--t-max", "3.8", "--t-count", "3",
        "--cells", "1000", "--iters", "2000", "--seed", "5",
        "--workers", "1", "--out", paths["grid"],
    )
    # a stationary distribution and an off-GC trajectory
    mqubit(
        "adf", "--M", "2.92", "--T", "3.729", "--cells", "20000",
        "--iters", "4000", "--out", paths["dist"],
    )
    mqubit(
        "point", "--M", "2.92", "--T", "1.0", "--cells", "500", "--iters", "500",
        "--steps", "30000", "--theta0", "1.3", "--phi0", "2.5",
        "--trajectory-out", paths["traj"], "--trajectory-samples", "600",
    )
    return paths


def spec_file(tmp_path, **fields):
    path = str(tmp_path / "spec.json")
    with open(path, "w") as fh:
        json.dump(fields, fh)
    return path


def assert_image(path):
    assert os.path.exists(path)
    size = os.path.getsize(path)
    assert size > 5000, f"suspiciously small image ({size} bytes)"
    with open(path, "rb") as fh:
        assert fh.read(8) == b"\x89PNG\r\n\x1a\n"


class TestCrossSectionStack:
    def test_render(self, data, tmp_path):
        out = str(tmp_path / "cross.png")
        spec = spec_file(
            tmp_path, kind="cross_section", input=data["cross"], out=out,
            overlays=data["grid"] + ".overlays.json", title="M = 2.92",
        )
        assert main(["--spec", spec]) == 0
        assert_image(out)


class TestHeatmap:
    def test_render_with_overlays(self, data, tmp_path):
        out = str(tmp_path / "heat.png")
        spec = spec_file(
            tmp_path, kind="heatmap", input=data["grid"], out=out,
            overlays=data["grid"] + ".overlays.json",
        )
        assert main(["--spec", spec]) == 0
        assert_image(out)

    def test_render_without_overlays(self, data, tmp_path):
        out = str(tmp_path / "heat2.png")
        spec = spec_file(
            tmp_path, kind="heatmap", input=data["grid"], out=out, overlay=False,
        )
        assert main(["--spec", spec]) == 0
        assert_image(out)


class TestDistributionPanels:
    def test_plain(self, data, tmp_path):
        out = str(tmp_path / "dist.png")
        spec = spec_file(tmp_path, kind="distribution", input=data["dist"], out=out)
        assert main(["--spec", spec]) == 0
        assert_image(out)

    def test_zoom_cascade(self, data, tmp_path):
        out = str(tmp_path / "fractal.png")
        spec = spec_file(
            tmp_path, kind="distribution", input=data["dist"], out=out,
            zooms=[[-1.0, 1.0], [-0.2, 0.2]],
        )
        assert main(["--spec", spec]) == 0
        assert_image(out)

    def test_zooms_must_nest(self, data, tmp_path):
        spec = spec_file(
            tmp_path, kind="distribution", input=data["dist"], out="x.png",
            zooms=[[-1.0, 1.0], [0.5, 2.0]],
        )
        with pytest.raises(SchemaError):
            FigureSpec.load(spec)


class TestBloch:
    def test_render(self, data, tmp_path):
        out = str(tmp_path / "bloch.png")
        spec = spec_file(tmp_path, kind="bloch", input=data["traj"], out=out)
        assert main(["--spec", spec]) == 0
        assert_image(out)


class TestSchemaErrors:
    def test_bad_jsonl_reports_line_number(self, data, tmp_path):
        broken = str(tmp_path / "broken.jsonl")
        lines = open(data["cross"]).read().splitlines()
        lines[2] = '{"not": "a point record"}'
        with open(broken, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        spec = spec_file(
            tmp_path, kind="cross_section", input=broken, out=str(tmp_path / "x.png")
        )
        code = main(["--spec", spec])
        assert code == 1

    def test_invalid_json_line_number_in_message(self, tmp_path, capsys):
        broken = str(tmp_path / "b.jsonl")
        with open(broken, "w") as fh:
            fh.write('{"M": 1}\nnot json\n')
        spec = spec_file(
            tmp_path, kind="cross_section", input=broken, out=str(tmp_path / "x.png")
        )
        assert main(["--spec", spec]) == 1
        err = capsys.readouterr().err
        assert ":1:" in err or ":2:" in err

    def test_bad_csv_header(self, tmp_path):
        bad = str(tmp_path / "bad.csv")
        with open(bad, "w") as fh:
            fh.write("a,b\n1,2\n")
        spec = spec_file(tmp_path, kind="distribution", input=bad, out=str(tmp_path / "x.png"))
        assert main(["--spec", spec]) == 1

    def test_unknown_kind_rejected(self, tmp_path):
        spec = spec_file(tmp_path, kind="pie", input="x", out="y")
        with pytest.raises(SchemaError):
            FigureSpec.load(spec)

    def test_missing_input_file(self, tmp_path):
        spec = spec_file(
            tmp_path, kind="distribution", input=str(tmp_path / "nope.csv"),
            out=str(tmp_path / "x.png"),
        )
        assert main(["--spec", spec]) == 1


def test_render_is_deterministic(data, tmp_path):
    # same inputs, same bytes: no physics is recomputed at render time
    outs = []
    for name in ("r1.png", "r2.png"):
        out = str(tmp_path / name)
        spec = spec_file(tmp_path, kind="distribution", input=data["dist"], out=out)
        render(FigureSpec.load(spec))
        outs.append(open(out, "rb").read())
    assert outs[0] == outs[1]
