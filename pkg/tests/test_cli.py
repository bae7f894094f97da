import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from polybary.cli import main

DATA = Path(__file__).resolve().parents[1] / "data"
SQUARE = str(DATA / "square.json")
TRIANGLE = str(DATA / "triangle.json")
PENT = str(DATA / "pentagon_eps_0.1.json")
HEX = str(DATA / "hexagon.json")


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def _rows(text):
    return list(csv.reader(text.splitlines()))


def test_eval_wachspress_square(capsys):
    code, out, _ = run(capsys, "eval", "--family", "wachspress", "--polygon", SQUARE, "--point", "0.5,0.5")
    assert code == 0
    header, row = _rows(out)
    assert header[:3] == ["x", "y", "lambda_1"] and len(header) == 2 + 3 * 4
    np.testing.assert_allclose([float(v) for v in row[2:6]], 0.25, atol=1e-15)


def test_eval_sibson_triangle_centroid(capsys):
    v = np.array(json.loads(Path(TRIANGLE).read_text())["vertices"])
    c = v.mean(0)
    code, out, _ = run(capsys, "eval", "--family", "sibson", "--polygon", TRIANGLE, f"--point={float(c[0])!r},{float(c[1])!r}")
    assert code == 0
    np.testing.assert_allclose([float(s) for s in _rows(out)[1][2:5]], 1 / 3, atol=1e-12)


def test_eval_harmonic_square(capsys):
    code, out, _ = run(capsys, "eval", "--family", "harmonic", "--polygon", SQUARE, "--point", "0.5,0.5", "--harmonic-level", "5")
    assert code == 0
    np.testing.assert_allclose([float(s) for s in _rows(out)[1][2:6]], 0.25, atol=2e-3)


def test_eval_grid_json(capsys, tmp_path):
    out = tmp_path / "e.json"
    assert run(capsys, "eval", "--polygon", HEX, "--grid", "7", "--out", out)[0] == 0
    d = json.loads(out.read_text())
    assert d["family"] == "wachspress" and len(d["rows"]) > 0
    lam = np.array(d["rows"])[:, 2:8]
    np.testing.assert_allclose(lam.sum(1), 1, atol=1e-12)


def test_eval_errors(capsys, tmp_path):
    assert run(capsys, "eval", "--polygon", SQUARE, "--point", "1.5,0.5")[0] == 3
    assert run(capsys, "eval", "--polygon", SQUARE)[0] == 2
    assert run(capsys, "eval", "--polygon", SQUARE, "--point", "1,2,3")[0] == 2
    assert run(capsys, "eval", "--point", "0.5,0.5")[0] == 2
    assert run(capsys, "eval", "--polygon", tmp_path / "missing.json", "--point", "0,0")[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"vertices": [[0, 0], [1, 0], [0.2, 0.2], [0, 1]]}')
    code, _, err = run(capsys, "eval", "--polygon", bad, "--point", "0.1,0.1")
    assert code == 2 and "error" in err
    bad.write_text("not json")
    assert run(capsys, "eval", "--polygon", bad, "--point", "0.1,0.1")[0] == 2


def test_check(capsys):
    code, out, _ = run(capsys, "check", "--polygon", PENT, "--gamma-star", 4, "--d-star", 0.1, "--beta-star-max", 2.9)
    assert code == 0
    d = json.loads(out)
    assert set(["G1", "G2", "G3", "G4", "G5"]) <= set(d)
    assert all(isinstance(d[g], bool) for g in ("G1", "G2", "G3", "G4", "G5"))
    assert run(capsys, "check", "--polygon", PENT, "--gamma-star", 4)[0] == 2
    assert run(capsys, "check", "--polygon", PENT, "--gamma-star", 1, "--d-star", 0.1, "--beta-star-max", 2.9)[0] == 2


def test_convergence_tri(capsys, tmp_path):
    out = tmp_path / "c.json"
    code, _, _ = run(capsys, "convergence", "--family", "tri", "--polygon", HEX, "--scales", "1,0.5,0.25", "--out", out)
    d = json.loads(out.read_text())
    assert code == 0 and d["pass"] is True and 0.9 <= d["h1_rate"] <= 1.1
    code, text, _ = run(capsys, "convergence", "--family", "tri", "--polygon", HEX, "--scales", "1,0.5,0.25")
    rows = _rows(text)
    assert rows[0] == ["parameter", "l2_error", "h1_semi_error", "h1_error", "fitted_rate"]
    assert rows[1][-1] == "" and rows[-1][-1] != ""
    assert run(capsys, "convergence", "--polygon", HEX, "--scales", "1")[0] == 2


def test_convergence_unfittable_exit4(capsys, tmp_path):
    # at these scales the errors sit at rounding level, so no rate is fitted
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"family": "tri", "scales": [1e-8, 2e-8]}))
    out = tmp_path / "c.json"
    code, _, _ = run(capsys, "convergence", "--polygon", HEX, "--config", cfg, "--out", out)
    d = json.loads(out.read_text())
    assert code == 4 and d["pass"] is False


def test_counterexample(capsys, tmp_path):
    out = tmp_path / "ce.json"
    code, _, _ = run(capsys, "counterexample", "--eps", "0.1,0.05,0.025,0.0125", "--grid", 10, "--out", out)
    d = json.loads(out.read_text())
    assert code == 0 and d["pass"] is True and d["slope"] <= -0.9
    assert run(capsys, "counterexample", "--eps", "1.5")[0] == 2


def test_counterexample_fails_exit4(capsys):
    # one value cannot be increasing with a slope
    code, out, _ = run(capsys, "counterexample", "--eps", "0.1", "--grid", 5)
    assert code == 4 and _rows(out)[1][-1] == ""


def test_bounds(capsys):
    args = ["--gamma-star", 4, "--d-star", 0.1, "--beta-star-max", 2.9, "--samples", 500]
    code, out, _ = run(capsys, "bounds", "--family", "wachspress", "--polygon", SQUARE, *args)
    d = json.loads(out)
    assert code == 0 and d["pass"] is True and d["sampled_sup_grad"] <= d["theoretical_bound"]
    assert run(capsys, "bounds", "--polygon", PENT, "--gamma-star", 4, "--d-star", 0.1, "--beta-star-max", 2.0)[0] == 2


def test_levelset_pentagon(capsys):
    code, out, _ = run(capsys, "levelset", "--polygon", PENT, "--index", 1, "--grid", 200)
    assert code == 0
    rows = _rows(out)
    assert rows[0][0] == "y\\x" and len(rows) == 201 and len(rows[0]) == 201
    xs = np.array(rows[0][1:], dtype=float)
    ys = np.array([r[0] for r in rows[1:]], dtype=float)
    grid = np.array([r[1:] for r in rows[1:]], dtype=float)
    inside = ~np.isnan(grid)
    assert np.isnan(grid).any()
    assert grid[inside].min() >= -1e-15 and grid[inside].max() <= 1 + 1e-15
    # an even grid misses the apex (0, 1.1) itself, so the largest sample
    # is the node just below it
    j, k = np.unravel_index(np.nanargmax(grid), grid.shape)
    assert (xs[k], ys[j]) == pytest.approx((0.0, 1.1), abs=0.02)
    assert np.nanmax(grid) > 0.9
    # finite difference across the row just below y = 1
    eps = 0.1
    r = np.searchsorted(ys, 1.0) - 1
    cols = (xs >= 0.25) & (xs <= 0.75)
    dy = (grid[r + 1, cols] - grid[r, cols]) / (ys[r + 1] - ys[r])
    assert np.all(dy > 1 / (28 * eps))


def test_levelset_odd_grid_hits_apex(capsys):
    code, out, _ = run(capsys, "levelset", "--polygon", PENT, "--index", 1, "--grid", 201)
    grid = np.array([r[1:] for r in _rows(out)[1:]], dtype=float)
    assert code == 0 and np.nanmax(grid) == pytest.approx(1.0, abs=1e-12)
    assert grid[-1, 100] == pytest.approx(1.0, abs=1e-12)


def test_levelset_errors(capsys):
    assert run(capsys, "levelset", "--polygon", PENT, "--index", 0)[0] == 2
    assert run(capsys, "levelset", "--polygon", PENT, "--index", 6)[0] == 2
    assert run(capsys, "levelset", "--polygon", PENT, "--grid", 1)[0] == 2


def test_thin_tri(capsys, tmp_path):
    out = tmp_path / "t.json"
    code, _, _ = run(capsys, "thin-tri", "--out", out)
    d = json.loads(out.read_text())
    assert code == 0 and d["pass"] is True and len(d["records"]) == 4
    assert run(capsys, "thin-tri", "--angles", "190")[0] == 2


def test_config_override(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"family": "tri", "point": ["0.25,0.25"]}))
    code, out, _ = run(capsys, "eval", "--polygon", SQUARE, "--family", "sibson", "--config", cfg)
    assert code == 0
    # the fan from vertex 0 puts the point on the diagonal, where
    # lambda_1 = 0.75; Sibson would give the bilinear 0.5625
    assert float(_rows(out)[1][2]) == pytest.approx(0.75)
    cfg.write_text(json.dumps({"nonsense": 1}))
    assert run(capsys, "eval", "--polygon", SQUARE, "--config", cfg)[0] == 2
    assert run(capsys, "eval", "--polygon", SQUARE, "--config", tmp_path / "nope.json")[0] == 2


def test_seventeen_digits(capsys):
    code, out, _ = run(capsys, "eval", "--polygon", HEX, "--point", "0.1,0.05")
    vals = _rows(out)[1]
    for s in vals:
        assert float(format(float(s), ".17g")) == float(s)
    assert any(len(s.lstrip("-").replace(".", "").lstrip("0").split("e")[0]) == 17 for s in vals)


@pytest.mark.parametrize(
    "argv",
    [
        ["eval", "--family", "sibson", "--polygon", HEX, "--grid", "9"],
        ["bounds", "--family", "sibson", "--polygon", HEX, "--gamma-star", "4", "--d-star", "0.1", "--beta-star-max", "2.9", "--samples", "200"],
        ["levelset", "--polygon", PENT, "--grid", "30", "--family", "harmonic", "--harmonic-level", "3"],
    ],
)
def test_deterministic(capsys, tmp_path, argv):
    texts = []
    for k in range(2):
        out = tmp_path / f"o{k}.json"
        assert main(argv + ["--out", str(out)]) == 0
        texts.append(out.read_bytes())
    assert texts[0] == texts[1]


def test_console_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "polybary.cli", "eval", "--polygon", SQUARE, "--point", "2,2"],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 3 and "outside" in res.stderr
