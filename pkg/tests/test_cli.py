import json
import subprocess
import sys

import pytest

from fraciso.cli import REPORT_FIELDS, RunConfig, build_parser, emit_plot_data, main, parse_h, read_csv


@pytest.fixture(scope="module")
def cache(tmp_path_factory):
    path = tmp_path_factory.mktemp("cache") / "ref.json"
    assert main(["cache", "--s", "0.5", "--h", "1/32", "--mc-samples", "200000", "--out", str(path)]) == 0
    return path


def test_parse_h():
    assert parse_h("1/64") == 1 / 64
    assert parse_h("0.25") == 0.25
    with pytest.raises(Exception):
        parse_h("0")


def test_run_config_precedence_and_validation():
    args = build_parser().parse_args(["indices", "--s", "0.25", "--tol", "identity=1e-9"])
    cfg = RunConfig.from_sources(args, {"s_list": [0.75], "h": "1/16"})
    assert cfg.s_list == [0.25]
    assert cfg.h == 1 / 16
    assert cfg.tolerances["identity"] == 1e-9
    with pytest.raises(ValueError):
        RunConfig("verify", s_list=[1.2])
    with pytest.raises(ValueError):
        RunConfig("verify", tolerances={"bogus": 1.0})
    with pytest.raises(ValueError):
        RunConfig("verify", out="/nonexistent/dir/report.csv")


def test_cache_round_trip_and_h_mismatch(cache, tmp_path):
    data = json.loads(cache.read_text())
    (entry,) = data["entries"]
    assert entry["V_s_B1"] == pytest.approx(4 * 3.141592653589793 / 3, rel=1e-15)
    out = tmp_path / "r.csv"
    code = main(["verify", "--corpus", "ball", "--s", "0.5", "--h", "1/64", "--cache", str(cache),
                 "--studies", "none", "--out", str(out)])
    assert code == 2


def test_missing_cache_flags(tmp_path):
    code = main(["verify", "--corpus", "ball", "--h", "1/32", "--cache", str(tmp_path / "none.json"),
                 "--studies", "none", "--out", str(tmp_path / "r.csv")])
    assert code == 2


def test_ball_only_verify_passes(cache, tmp_path):
    out, summ = tmp_path / "r.csv", tmp_path / "s.json"
    code = main(["verify", "--corpus", "ball", "--s", "0.5", "--h", "1/32", "--cache", str(cache),
                 "--studies", "none", "--out", str(out), "--summary", str(summ)])
    assert code == 0
    cols, rows = read_csv(out)
    assert cols == REPORT_FIELDS
    assert {r["check_id"] for r in rows} >= {"ball_deficit", "ball_asymmetry", "beta_identity"}
    assert json.loads(summ.read_text())["failed"] == 0


def test_corrupted_cache_fails(cache, tmp_path):
    data = json.loads(cache.read_text())
    data["entries"][0]["P_s_B1"] *= 1.1
    data["entries"][0]["P_s_grid_ball"] *= 1.1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    out = tmp_path / "r.csv"
    code = main(["verify", "--corpus", "ball", "--s", "0.5", "--h", "1/32", "--cache", str(bad),
                 "--studies", "none", "--out", str(out)])
    assert code == 1
    _, rows = read_csv(out)
    failed = {r["check_id"] for r in rows if r["status"] == "fail"}
    assert "ball_deficit" in failed


def test_plotdata_on_header_only_report(tmp_path):
    rep = tmp_path / "osc.csv"
    rep.write_text("j,P_s,P_s_over_j_s\n")
    paths = emit_plot_data(str(rep), str(tmp_path / "plots"))
    assert paths
    for p in paths:
        assert p.read_text() == p.name.split("__")[1].replace(".dat", "").replace("_vs_", " ").join(["# ", "\n"])


def test_plotdata_growth_is_monotone(tmp_path):
    rep = tmp_path / "osc.csv"
    assert main(["family", "oscillating", "--no-cheeger", "--out", str(rep)]) == 0
    (p,) = [q for q in emit_plot_data(str(rep), str(tmp_path)) if q.name.endswith("j_vs_P_s.dat")]
    ys = [float(line.split()[1]) for line in p.read_text().splitlines()[1:]]
    assert ys == sorted(ys) and len(set(ys)) == 3


def test_family_under_resolved_flags(tmp_path):
    assert main(["family", "oscillating", "--h", "1/64", "--out", str(tmp_path / "o.csv")]) == 2


def _twice(tmp_path, argv):
    outs = []
    for k in range(2):
        p = tmp_path / f"run{k}.csv"
        main(argv + ["--out", str(p)])
        outs.append(p.read_bytes())
    return outs


def test_indices_byte_identical(tmp_path):
    a, b = _twice(tmp_path, ["indices", "--corpus", "square,perturbed:3:0.1", "--h", "1/32"])
    assert a == b and a.count(b"\n") == 3


def test_cheeger_byte_identical(tmp_path):
    a, b = _twice(tmp_path, ["cheeger", "--domain", "random:18:3,random:40:1", "--seed", "2"])
    assert a == b


def test_minimize_exit_and_determinism(tmp_path):
    argv = ["minimize", "--method", "radial_descent", "--resolution", "64", "--iterations", "30",
            "--init", "sin3"]
    a, b = _twice(tmp_path, argv)
    assert a == b


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "fraciso", "family", "oscillating", "--j-list", "2", "4",
                        "--no-cheeger"], capture_output=True, text=True, check=False)
    assert r.returncode == 0
    assert r.stdout.splitlines()[0].startswith("j,P_s,")
