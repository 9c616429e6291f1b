import json

import numpy as np
import pytest

from carleson.cli import RunConfig, main
from carleson.measure import load_measure


def run(argv, capsys):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr()


def test_runconfig_round_trip():
    cfg = RunConfig("analyze", measure="m.json", origin=(0.25, -1.0), levels=(-3, 0), A=3.0, eps=0.1,
                    delta=0.2, M=4, out="o", seed=7, threads=2, params={"generation": 3})
    doc = json.loads(json.dumps(cfg.to_dict()))
    assert RunConfig.from_dict(doc) == cfg


@pytest.mark.parametrize("bad", [dict(command="plot"), dict(command="verify", levels=(2, 1)),
                                 dict(command="verify", A=1.0), dict(command="verify", eps=0.0),
                                 dict(command="verify", threads=0)])
def test_runconfig_rejects(bad):
    with pytest.raises(ValueError):
        RunConfig(**bad)


def test_generate_cantor(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    code, out = run(["generate", "cantor_four_corner", "generation=3", "--out", a], capsys)
    assert code == 0 and "N\t64" in out.out
    mu = load_measure(a)
    assert mu.n_atoms == 64 and mu.total_mass == pytest.approx(1.0, rel=1e-14)
    run(["generate", "cantor_four_corner", "generation=3", "--out", b], capsys)
    assert a.read_bytes() == b.read_bytes()


def test_generate_halved_step_count(tmp_path, capsys):
    counts = []
    for step in (0.25, 0.125):
        path = tmp_path / f"p{step}.json"
        run(["generate", "plane_patch", "n=2", "extent=4.0", f"grid_step={step}", "--out", path], capsys)
        counts.append(load_measure(path).n_atoms)
    assert counts == [17 ** 2, 33 ** 2]  # (extent/step + 1)^n


def test_generate_bad_spec(tmp_path, capsys):
    code, out = run(["generate", "plane_patch", "n=0", "extent=1.0", "grid_step=0.5", "--out",
                     tmp_path / "x.json"], capsys)
    assert code != 0 and "error" in out.err


def read_tsv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# schema: ")
    head = lines[1].split("\t")
    return [dict(zip(head, ln.split("\t"))) for ln in lines[2:]]


def test_analyze_plane_and_determinism(tmp_path, capsys):
    m = tmp_path / "plane.json"
    run(["generate", "plane_patch", "n=1", "extent=4.0", "grid_step=0.0625", "--out", m], capsys)
    outs = []
    for threads in (1, 2):
        o = tmp_path / f"out{threads}"
        code, _ = run(["analyze", "--measure", m, "--levels=-2:-1", "--threads", threads, "--out", o], capsys)
        assert code == 0
        outs.append((o / "cubes.tsv").read_bytes())
    assert outs[0] == outs[1]
    rows = read_tsv(tmp_path / "out1" / "cubes.tsv")
    assert rows and max(float(r["jones_term"]) for r in rows) <= 1e-20
    summary = json.loads((tmp_path / "out1" / "summary.json").read_text())
    assert summary["cubes"] == len(rows) and summary["config"]["command"] == "analyze"


def test_analyze_single_atom(tmp_path, capsys):
    from carleson.measure import DiscreteMeasure, save_measure
    m = tmp_path / "one.json"
    save_measure(DiscreteMeasure(np.zeros((1, 2)), np.ones(1), 1.0), m)
    code, _ = run(["analyze", "--measure", m, "--levels=-1:0", "--out", tmp_path / "o"], capsys)
    assert code == 0
    assert all(float(r["constituent"]) == 0.0 for r in read_tsv(tmp_path / "o" / "cubes.tsv"))


def test_analyze_errors(tmp_path, capsys):
    code, out = run(["analyze", "--measure", tmp_path / "missing.json"], capsys)
    assert code == 2 and "error" in out.err
    with pytest.raises(SystemExit):
        main(["analyze"])


def test_verify_growth_identity(tmp_path, capsys):
    code, out = run(["verify", "--suite", "growth_identity", "--out", tmp_path], capsys)
    assert code == 0 and "# growth_identity: PASS" in out.out
    assert out.out.startswith("# schema: check:str")
    doc = json.loads((tmp_path / "growth_identity.json").read_text())
    assert "seconds" not in doc
    first = (tmp_path / "growth_identity.tsv").read_bytes()
    run(["verify", "--suite", "growth_identity", "--out", tmp_path], capsys)
    assert (tmp_path / "growth_identity.tsv").read_bytes() == first


def test_verify_failure_exit_code(capsys):
    code, out = run(["verify", "--suite", "symmetry"], capsys)
    assert code == 1 and "FAIL" in out.out
    with pytest.raises(SystemExit):
        main(["verify", "--suite", "nope"])


def test_sweep_cantor(tmp_path, capsys):
    code, out = run(["sweep", "cantor_four_corner", "generation=3:4", "--out", tmp_path], capsys)
    assert code == 0
    rows = read_tsv(tmp_path / "sweep.tsv")
    assert [r["generation"] for r in rows] == ["3", "4"]
    vals = [float(r["energy_per_mass"]) for r in rows]
    assert vals[1] > vals[0] and "seconds" not in rows[0]


def test_sweep_empty_range(capsys):
    code, out = run(["sweep", "cantor_four_corner", "generation=5:3"], capsys)
    assert code == 2 and "empty" in out.err
