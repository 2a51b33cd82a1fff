import csv
import io

import pytest

from hwgibbs.builders import build_path_graph, build_tree_ising, build_voting_model, voting_dataset
from hwgibbs.cli import main
from hwgibbs.errors import InvalidInput
from hwgibbs.experiments import ExperimentConfig, parse_config, run_experiment, to_csv
from hwgibbs.fgio import format_fg, read_fg
from hwgibbs.inference import energy
from hwgibbs.templates import serialize_dataset, serialize_template, voting_schema
from hwgibbs.width import hierarchy_width

from conftest import all_worlds


def rows_of(text):
    body = "\n".join(ln for ln in text.splitlines() if not ln.startswith("#"))
    return list(csv.DictReader(io.StringIO(body)))


@pytest.fixture
def path4(tmp_path):
    p = tmp_path / "path4.fg"
    p.write_text(format_fg(build_path_graph(4)))
    return str(p)


@pytest.fixture
def voting2(tmp_path):
    p = tmp_path / "voting2.fg"
    p.write_text(format_fg(build_voting_model(2, "logical")))
    return str(p)


def test_width_report(path4, capsys, tmp_path):
    cert = tmp_path / "cert.txt"
    assert main(["width", path4, "--certificate", str(cert)]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "hierarchy_width 2"
    lines = cert.read_text().splitlines()
    assert lines[0].startswith("node 0 parent none :")


def test_width_decision(path4, capsys):
    assert main(["width", path4, "--k", "1"]) == 0
    assert capsys.readouterr().out == "hw_at_most_k 1 false\n"
    assert main(["width", path4, "--k", "2"]) == 0
    assert capsys.readouterr().out == "hw_at_most_k 2 true\n"


def test_width_resource_limit_exits_two(tmp_path, capsys):
    p = tmp_path / "long.fg"
    p.write_text(format_fg(build_path_graph(70)))
    assert main(["width", str(p)]) == 2
    assert "resource limit" in capsys.readouterr().err


def test_validation_errors_exit_one(tmp_path, path4, capsys):
    bad = tmp_path / "bad.fg"
    bad.write_text("garbage\n")
    assert main(["width", str(bad)]) == 1
    assert main(["width", str(tmp_path / "missing.fg")]) == 1
    assert main(["width", path4, "--k", "-1"]) == 1
    assert main(["sample", path4, "--steps", "0"]) == 1
    assert main(["bogus"]) == 1
    assert main(["experiment", "voting-convergence", "--set", "chains=1"]) == 1
    assert capsys.readouterr().err


def test_sample_csv(path4, capsys):
    assert main(["sample", path4, "--steps", "1000", "--chains", "2", "--seed", "3", "--every", "500"]) == 0
    out = capsys.readouterr().out
    assert "# seed = 3" in out
    rows = rows_of(out)
    assert list(rows[0]) == ["step", "chain", "variable", "estimate"]
    assert len(rows) == 2 * 2 * 4
    assert all(0.0 <= float(r["estimate"]) <= 1.0 for r in rows)
    assert main(["sample", path4, "--steps", "1000", "--chains", "2", "--seed", "3", "--every", "500"]) == 0
    assert capsys.readouterr().out == out


def test_sample_query(path4, capsys):
    g = read_fg(path4)
    name = g.variables[2].name
    assert main(["sample", path4, "--steps", "100", "--query", name]) == 0
    assert {r["variable"] for r in rows_of(capsys.readouterr().out)} == {name}
    assert main(["sample", path4, "--query", "nope"]) == 1


def test_sample_couple(voting2, capsys, tmp_path):
    out = tmp_path / "c.csv"
    assert main(["sample", voting2, "--couple", "--steps", "200", "--chains", "5", "--out", str(out)]) == 0
    text = out.read_text()
    assert "# mode = stationary" in text
    rows = rows_of(text)
    assert list(rows[0]) == ["replicate", "coupling_time"]
    assert len(rows) == 5
    assert main(["sample", voting2, "--couple", "--steps", "50", "--chains", "2",
                 "--start=-1,0,0,0,0", "--other", "1,1,1,1,1"]) == 0
    assert "# mode = two-start" in capsys.readouterr().out
    assert main(["sample", voting2, "--couple", "--start", "0,x"]) == 1


def test_spectral_csv(voting2, capsys):
    assert main(["spectral", voting2, "--mixing"]) == 0
    rows = rows_of(capsys.readouterr().out)
    assert list(rows[0]) == ["n", "s", "e", "M", "hw", "gamma", "pi_min", "t_mix_exact",
                             "theorem2_bound", "relaxation_bound"]
    r = rows[0]
    assert (r["n"], r["hw"], r["t_mix_exact"]) == ("5", "3", "8")


def test_spectral_without_mixing_leaves_column_empty(voting2, capsys):
    assert main(["spectral", voting2]) == 0
    assert rows_of(capsys.readouterr().out)[0]["t_mix_exact"] == ""


def test_spectral_verify_lemmas(voting2, capsys):
    assert main(["spectral", voting2, "--verify-lemmas", "--mixing"]) == 0
    err = capsys.readouterr().err
    assert "PASS gap-lemma" in err and "FAIL" not in err


def test_ground_emits_fg(tmp_path, capsys):
    schema = tmp_path / "v.tpl"
    data = tmp_path / "v.dat"
    schema.write_text(serialize_template(voting_schema()))
    data.write_text(serialize_dataset(voting_dataset(2, prior_seed=4)))
    out = tmp_path / "g.fg"
    assert main(["ground", str(schema), str(data), "--semantics", "ratio", "--out", str(out)]) == 0
    g = read_fg(str(out))
    h = build_voting_model(2, "ratio", prior_seed=4)
    for w in all_worlds(h):
        assert energy(g, w) == pytest.approx(energy(h, w), abs=1e-12)
    assert main(["ground", str(schema), str(data), "--semantics", "odd"]) == 1


def test_config_supplies_defaults(path4, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nsteps = 300\nchains = 3\nseed = 9\n")
    assert main(["sample", path4, "--config", str(cfg), "--every", "300"]) == 0
    out = capsys.readouterr().out
    assert "# seed = 9" in out and "# steps = 300" in out
    assert len(rows_of(out)) == 3 * 4
    assert main(["sample", path4, "--config", str(cfg), "--every", "300", "--seed", "1"]) == 0
    assert "# seed = 1" in capsys.readouterr().out
    cfg.write_text("bogus = 1\n")
    assert main(["sample", path4, "--config", str(cfg)]) == 1


def test_experiment_via_config_is_reproducible(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("experiment = voting-convergence\nn = 3\nchains = 3\nschedule = 100, 200\n"
                   "semantics = linear, logical\n")
    assert main(["experiment", "--config", str(cfg), "--seed", "2"]) == 0
    first = capsys.readouterr().out
    assert main(["experiment", "--config", str(cfg), "--seed", "2"]) == 0
    assert capsys.readouterr().out == first
    assert "# experiment = voting-convergence" in first and "# protocol = " in first
    rows = rows_of(first)
    assert list(rows[0]) == ["semantics", "steps", "variance", "mean_estimate"]
    assert len(rows) == 4


def test_experiment_set_override(capsys):
    assert main(["experiment", "verify-bounds", "--set", "graphs=2", "--set", "mixing=false"]) == 0
    rows = rows_of(capsys.readouterr().out)
    assert {r["graph"] for r in rows} == {"0", "1"}
    assert all(r["passed"] == "True" for r in rows)
    assert main(["experiment"]) == 1
    assert main(["experiment", "verify-bounds", "--set", "graphs"]) == 1


def test_ising_experiment_small(capsys):
    assert main(["experiment", "ising-hw", "--set", "nodes=9", "--set", "seeds=2",
                 "--set", "budget=500", "--set", "weights=0.5"]) == 0
    rows = rows_of(capsys.readouterr().out)
    assert [r["family"] for r in rows] == ["path", "caterpillar", "star"]
    for r in rows:
        g, _ = build_tree_ising(9, r["family"], int(r["k"]) if r["k"] else None, 0.5)
        assert int(r["hw"]) == hierarchy_width(g)
    assert int(rows[0]["hw"]) < int(rows[2]["hw"])


def test_parse_config():
    assert parse_config("a = 1\nb = 2.5\nc = x, y\nd = none\ne = TRUE # note\n\n") == {
        "a": 1, "b": 2.5, "c": ["x", "y"], "d": None, "e": True}
    with pytest.raises(InvalidInput):
        parse_config("novalue\n")
    with pytest.raises(InvalidInput):
        parse_config(" = 3\n")


def test_experiment_config_validation():
    cfg = ExperimentConfig.build("ising-hw", nodes=16)
    assert cfg.params["k"] == 4
    for name, kw in [("nope", {}), ("ising-hw", {"families": "tree"}), ("ising-hw", {"k": 0}),
                     ("ising-hw", {"nodes": 1}), ("voting-convergence", {"semantics": "odd"}),
                     ("voting-convergence", {"n": 0}), ("voting-convergence", {"extra": 1}),
                     ("verify-bounds", {"graphs": 0})]:
        with pytest.raises(InvalidInput):
            ExperimentConfig.build(name, **kw)


def test_to_csv_round_trips_floats():
    text = to_csv(["# h"], [{"a": 0.1, "b": 2}])
    assert text == "# h\na,b\n0.1,2\n"
    assert run_experiment(ExperimentConfig.build("verify-bounds", graphs=1, mixing=False))
