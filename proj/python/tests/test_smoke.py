import json
import math

import pytest

import xmodal_py as xm


def test_caption_and_parse():
    text = xm.caption("circle", "red")
    assert text == "A red circle at the center on a white background."
    assert xm.parse_caption(text) == {
        "shape": "circle", "color": "red", "position": "center", "background": "white"}
    with pytest.raises(xm.ParseError):
        xm.parse_caption("A shape on a background.")


def test_render_extract_round_trip():
    png = xm.render_png("star", "blue", "top-left", "cream", 101)
    assert png[:8] == b"\x89PNG\r\n\x1a\n"
    got = xm.extract(png)
    assert (got["shape"], got["color"], got["position"]) == ("star", "blue", "top-left")
    noise = xm.extract(xm.noise_png(3))
    assert noise["shape"] is None and noise["color"] is None and noise["position"] is None


def test_render_is_deterministic():
    assert xm.render_png("hexagon", "green") == xm.render_png("hexagon", "green")


def test_sample_matches_caption():
    s = xm.sample(42, 0)
    assert s == xm.sample(42, 0)
    assert xm.caption(s["shape"], s["color"], s["position"], s["background"], s["scale"]) == s["caption"]


def test_scores():
    png = xm.render_png("circle", "red")
    text = xm.caption("circle", "red")
    swapped = xm.perturb(text, "shape_swap", 5)
    assert xm.oracle_score(png, text) == 1.0
    assert xm.oracle_score(png, swapped) == pytest.approx(2 / 3)
    assert xm.persona_score(png, swapped, 0.6) == pytest.approx(0.4 * 2 / 3 + 0.6)
    assert xm.persona_score(png, swapped, 1.0) == 1.0


def test_stats():
    lo, hi = xm.wilson_ci(50, 100)
    assert abs(lo - 0.4038) < 1e-4 and abs(hi - 0.5962) < 1e-4
    assert xm.student_t_cdf(0.0, 5) == pytest.approx(0.5)
    assert xm.holm_bonferroni([0.03, 0.04]) == [False, False]
    r = xm.paired_t_test([0.1, 0.2, 0.3])
    assert r["t"] == pytest.approx(3.4641, abs=1e-4)
    assert round(xm.compute_improvement(0.275, 0.098), 1) == 64.4
    with pytest.raises(xm.StatsError):
        xm.paired_t_test([1.0, 1.0])


def test_cli_pipeline(tmp_path):
    ds = str(tmp_path / "ds")
    assert xm.run_cli(["gen", "--n", "20", "--out", ds])[0] == 0
    assert xm.run_cli(["attack", "--manifest", ds])[0] == 0
    out = str(tmp_path / "r.json")
    code, stdout, _ = xm.run_cli(["eval", "--manifest", ds, "--out", out])
    assert code == 0 and "oracle" in stdout
    with open(out) as f:
        report = json.load(f)
    assert report["normal"]["accuracy"] == 1.0
    assert xm.run_cli(["gen", "--n", "0", "--out", ds])[0] == 2
