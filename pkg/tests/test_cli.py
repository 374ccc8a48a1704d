import json

import pytest

from iegs_sro import cli
from iegs_sro.fixtures import bundled_path

NET = str(bundled_path("golden"))
SAMPLES = NET.replace(".json", ".csv")
SINGLE = str(bundled_path("single"))


def run(tmp_path, *argv):
    return cli.main([*argv, "--out", str(tmp_path)])


def summary(tmp_path):
    (path,) = tmp_path.glob("summary_*.json")
    return json.loads(path.read_text())


def test_help_lists_commands(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    assert all(c in out for c in ("solve", "compare", "gen"))


def test_solve_writes_files(tmp_path):
    assert run(tmp_path, "solve", "--network", NET, "--samples", SAMPLES, "--budget", "0.05",
               "--mps", "--dump-model", "--dump-screen", "--dump-gas-reduction") == 0
    stems = sorted(p.name.split("_")[0] for p in tmp_path.iterdir())
    for s in ("uc", "policy", "summary", "model", "screen", "gas"):
        assert s in stems
    assert summary(tmp_path)["status"] == "optimal"
    assert summary(tmp_path)["weymouth_max_relative_residual"] <= 0.01


def test_negative_budget_is_usage_error(tmp_path, capsys):
    assert run(tmp_path, "solve", "--network", NET, "--samples", SAMPLES, "--budget", "-0.1") == 2
    assert "budget must be nonnegative" in capsys.readouterr().err


def test_saa_matches_zero_budget_sro(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(a, "solve", "--network", NET, "--samples", SAMPLES, "--mode", "saa") == 0
    assert run(b, "solve", "--network", NET, "--samples", SAMPLES, "--budget", "0") == 0
    assert summary(a)["objective"] == pytest.approx(summary(b)["objective"], rel=1e-6)


def test_saa_rejects_budget(tmp_path):
    assert run(tmp_path, "solve", "--network", NET, "--samples", SAMPLES, "--mode", "saa", "--budget", "0.1") == 2


def test_missing_file_and_bad_network(tmp_path):
    assert run(tmp_path, "solve", "--network", str(tmp_path / "nope.json"), "--samples", SAMPLES) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert run(tmp_path, "solve", "--network", str(bad), "--samples", SAMPLES) == 2


def test_infeasible_budget_exits_one(tmp_path):
    samples = SINGLE.replace(".json", ".csv")
    assert run(tmp_path, "solve", "--network", SINGLE, "--samples", samples, "--budget", "0.5") == 1
    assert summary(tmp_path)["status"] != "optimal"


def test_solve_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(d, "solve", "--network", NET, "--samples", SAMPLES, "--budget", "0.01") == 0
    for p in a.iterdir():
        assert (b / p.name).read_bytes() == p.read_bytes()


def test_compare_outputs(tmp_path, capsys):
    assert run(tmp_path, "compare", "--network", NET, "--samples", SAMPLES, "--grid", "0,0.01", "--draws", "10") == 0
    (csv,) = tmp_path.glob("comparison_*.csv")
    rows = csv.read_text().splitlines()
    assert len(rows) == 5 and rows[1].startswith("SAA")
    assert list(tmp_path.glob("gap_curve_*.csv"))


def test_compare_bad_grid(tmp_path):
    assert run(tmp_path, "compare", "--network", NET, "--samples", SAMPLES, "--grid", "a,b") == 2
    assert run(tmp_path, "compare", "--network", NET, "--samples", SAMPLES, "--grid", "-1") == 2


def test_gen_reproduces_golden(tmp_path):
    assert run(tmp_path, "gen", "--name", "g") == 0
    doc = json.loads((tmp_path / "g.json").read_text())
    ref = json.loads(open(NET).read())
    for key in ("power", "gas", "coupling"):
        assert doc[key] == ref[key]
    assert (tmp_path / "g.csv").read_text() == open(SAMPLES).read()


def test_gen_rejects_too_many_compressors(tmp_path, capsys):
    assert run(tmp_path, "gen", "--gas-nodes", "3", "--compressors", "3") == 2
    assert "compressors" in capsys.readouterr().err


def test_gen_output_solves(tmp_path):
    assert run(tmp_path, "gen", "--buses", "2", "--gas-nodes", "2", "--compressors", "0", "--seed", "9",
               "--periods", "2", "--scenarios", "2", "--farms", "1", "--name", "x") == 0
    out = tmp_path / "o"
    assert run(out, "solve", "--network", str(tmp_path / "x.json"), "--samples", str(tmp_path / "x.csv")) == 0
    assert summary(out)["status"] == "optimal"
