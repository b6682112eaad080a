import json
import math
import os

import numpy as np
import pytest

from anscombe.cli import main
from anscombe.volterra import boundary_from_csv


@pytest.fixture()
def two_point_json(tmp_path):
    path = tmp_path / "two_point.json"
    path.write_text(json.dumps({"family": "two_point", "delta0": 1.0}))
    return str(path)


@pytest.fixture()
def normal_json(tmp_path):
    path = tmp_path / "normal.json"
    path.write_text(json.dumps({"family": "normal", "m0": 0.0, "r0": 1.0}))
    return str(path)


def run(argv):
    return main(argv)


class TestBoundaryCommand:
    def test_terminal_row_last(self, two_point_json, tmp_path):
        out = str(tmp_path / "b.csv")
        assert run(["boundary", "--prior", two_point_json, "--grid", "120",
                    "--out", out]) == 0
        lines = open(out).read().strip().splitlines()
        assert lines[0] == "r,b_upper,b_lower"
        assert lines[-1] == "1,0,"

    def test_deterministic_bytes(self, two_point_json, tmp_path):
        out1 = str(tmp_path / "b1.csv")
        out2 = str(tmp_path / "b2.csv")
        run(["boundary", "--prior", two_point_json, "--grid", "80", "--out", out1])
        run(["boundary", "--prior", two_point_json, "--grid", "80", "--out", out2])
        assert open(out1, "rb").read() == open(out2, "rb").read()

    def test_normal_prior_writes_standard_curve(self, normal_json, tmp_path):
        out = str(tmp_path / "c.csv")
        assert run(["boundary", "--prior", normal_json, "--grid", "150",
                    "--smin", "-30", "--out", out]) == 0
        lines = open(out).read().strip().splitlines()
        assert lines[0] == "s,c_upper,c_lower"
        assert lines[-1] == "-1,0,"

    def test_asymmetric_q(self, two_point_json, tmp_path):
        out = str(tmp_path / "bq.csv")
        assert run(["boundary", "--prior", two_point_json, "--grid", "80",
                    "--q", "1", "--out", out]) == 0
        b = boundary_from_csv(open(out).read())
        assert b.lower is not None
        assert float(b.lower_at(0.5)) < -float(0.0)

    def test_fixed_point_method(self, two_point_json, tmp_path):
        out = str(tmp_path / "bfp.csv")
        assert run(["boundary", "--prior", two_point_json, "--grid", "60",
                    "--method", "fixed-point", "--fp-tol", "1e-3",
                    "--out", out]) == 0
        assert boundary_from_csv(open(out).read()).upper[0] == 0.0


class TestTransformCommand:
    def test_pvalue_shape(self, normal_json, tmp_path):
        c_csv = str(tmp_path / "c.csv")
        run(["boundary", "--prior", normal_json, "--grid", "250", "--smin", "-300",
             "--out", c_csv])
        out = str(tmp_path / "bp.csv")
        assert run(["transform", "--c", c_csv, "--m0", "0", "--r0", "0.1",
                    "--target", "pvalue", "--grid", "150", "--out", out]) == 0
        rows = [ln.split(",") for ln in open(out).read().strip().splitlines()[1:]]
        rr = np.array([float(a) for a, _ in rows])
        bp = np.array([float(b) for _, b in rows])
        assert np.all(np.diff(rr) > 0)
        assert np.all(np.diff(bp) >= 0)  # optimal p-level loosens as the trial ages
        assert np.all((bp >= 0) & (bp <= 0.5))
        meta = json.load(open(out + ".meta.json"))
        assert meta["r0"] == 0.1 and meta["target"] == "pvalue"

    def test_sum_target(self, normal_json, tmp_path):
        c_csv = str(tmp_path / "c.csv")
        run(["boundary", "--prior", normal_json, "--grid", "200", "--smin", "-50",
             "--out", c_csv])
        out = str(tmp_path / "bs.csv")
        assert run(["transform", "--c", c_csv, "--m0", "0.2", "--r0", "0.5",
                    "--target", "sum", "--grid", "100", "--out", out]) == 0
        last = open(out).read().strip().splitlines()[-1].split(",")
        # at r = 1 both sum boundaries equal -m0*r0
        assert float(last[1]) == pytest.approx(-0.1, rel=1e-12)
        assert float(last[2]) == pytest.approx(-0.1, rel=1e-12)


class TestSimulateRoundTrip:
    def test_boundary_feeds_simulate(self, two_point_json, tmp_path):
        b_csv = str(tmp_path / "b.csv")
        run(["boundary", "--prior", two_point_json, "--grid", "120", "--out", b_csv])
        out = str(tmp_path / "est.json")
        assert run(["simulate", "--prior", two_point_json, "--boundary", b_csv,
                    "--paths", "2000", "--step", "1e-3", "--seed", "5",
                    "--out", out]) == 0
        est = json.load(open(out))
        assert est["n_paths"] == 2000
        assert est["mean"] > 0.0

    def test_transformed_flag(self, two_point_json, tmp_path):
        b_csv = str(tmp_path / "b.csv")
        run(["boundary", "--prior", two_point_json, "--grid", "120", "--out", b_csv])
        out = str(tmp_path / "est.json")
        assert run(["simulate", "--prior", two_point_json, "--boundary", b_csv,
                    "--transformed", "--paths", "2000", "--step", "1e-3",
                    "--seed", "5", "--out", out]) == 0
        assert json.load(open(out))["mean"] > 0.0


class TestCompareClassical:
    def test_large_trial(self, capsys):
        assert run(["compare-classical", "--alpha", "0.025", "--r", "1e-5"]) == 0
        obj = json.loads(capsys.readouterr().out)
        assert obj["verdict"] == "classical_accepts_more"
        assert obj["classical_threshold"] == pytest.approx(0.000625, abs=1e-12)

    def test_small_trial(self, capsys):
        assert run(["compare-classical", "--alpha", "0.025", "--r", "1e-3"]) == 0
        assert json.loads(capsys.readouterr().out)["verdict"] == "optimal_accepts_more"


class TestExplicitCommand:
    def test_lomax_json(self, capsys):
        assert run(["explicit", "--kind", "lomax", "--r0", "1"]) == 0
        obj = json.loads(capsys.readouterr().out)
        assert abs(obj["residual"]) <= 1e-8
        assert obj["threshold"] > 0


class TestOracleCommand:
    def test_writes_boundary(self, two_point_json, tmp_path):
        out = str(tmp_path / "tree.csv")
        assert run(["oracle", "--prior", two_point_json, "--dr", "1e-3",
                    "--r-stop", "0.3", "--out", out]) == 0
        b = boundary_from_csv(open(out).read())
        assert b.upper[0] == 0.0

    def test_resource_error_exit_code(self, two_point_json, tmp_path):
        out = str(tmp_path / "tree.csv")
        assert run(["oracle", "--prior", two_point_json, "--dr", "1e-4",
                    "--ymax", "2e5", "--out", out]) == 3


class TestPlot:
    def test_empty_list_is_validation_error(self, tmp_path):
        assert run(["plot", "--out", str(tmp_path / "fig.svg")]) == 2

    def test_single_curve_single_polyline(self, tmp_path):
        csv = tmp_path / "curve.csv"
        csv.write_text("r,b_upper,b_lower\n0.1,0.5,\n1,0,\n")
        out = str(tmp_path / "fig.svg")
        assert run(["plot", str(csv), "--out", out]) == 0
        svg = open(out).read()
        assert svg.count("<polyline") == 1

    def test_three_curves_within_bounds(self, normal_json, tmp_path):
        c_csv = str(tmp_path / "c.csv")
        run(["boundary", "--prior", normal_json, "--grid", "200", "--smin", "-300",
             "--out", c_csv])
        paths = []
        for r0 in ("0.01", "0.1", "1"):
            out = str(tmp_path / f"bp{r0}.csv")
            run(["transform", "--c", c_csv, "--m0", "0", "--r0", r0,
                 "--target", "pvalue", "--grid", "100", "--out", out])
            paths.append(out)
        fig = str(tmp_path / "fig.svg")
        assert run(["plot", *paths, "--xlabel", "trial fraction",
                    "--ylabel", "p-level", "--out", fig]) == 0
        svg = open(fig).read()
        assert svg.count("<polyline") == 3
        for token in svg.split():
            if token.startswith("points="):
                break
        coords = []
        for part in svg.split('points="')[1:]:
            for pair in part.split('"')[0].split():
                x, y = pair.split(",")
                coords.append((float(x), float(y)))
        assert all(0 <= x <= 640 and 0 <= y <= 440 for x, y in coords)

    def test_deterministic(self, tmp_path):
        csv = tmp_path / "curve.csv"
        csv.write_text("r,b_upper,b_lower\n0.1,0.5,\n1,0,\n")
        a = str(tmp_path / "a.svg")
        b = str(tmp_path / "b.svg")
        run(["plot", str(csv), "--out", a])
        run(["plot", str(csv), "--out", b])
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_malformed_csv(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("r,b_upper\n0.1\n")
        assert run(["plot", str(bad), "--out", str(tmp_path / "f.svg")]) == 2


class TestErrorPaths:
    def test_missing_file_is_io_error(self, tmp_path):
        assert run(["boundary", "--prior", str(tmp_path / "nope.json"),
                    "--out", str(tmp_path / "b.csv")]) == 4

    def test_bad_prior_json_is_validation(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"family": "unknown"}))
        assert run(["boundary", "--prior", str(bad),
                    "--out", str(tmp_path / "b.csv")]) == 2

    def test_unparseable_json_is_io(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert run(["boundary", "--prior", str(bad),
                    "--out", str(tmp_path / "b.csv")]) == 4

    def test_unknown_flag_is_validation(self):
        assert run(["boundary", "--frobnicate"]) == 2

    def test_atomic_write_leaves_no_temp(self, two_point_json, tmp_path):
        out = str(tmp_path / "b.csv")
        run(["boundary", "--prior", two_point_json, "--grid", "60", "--out", out])
        leftovers = [f for f in os.listdir(tmp_path) if f.startswith(".anscombe-")]
        assert leftovers == []
