import csv
import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from protqubit.cli import main
from protqubit.config import ConfigError, config_from_dict, dump_config, load_config
from protqubit.figures import shipped_config, shipped_config_names
from protqubit.runner import CLASSIFY_HEADER, INIT_HEADER, MANIP_HEADER, resolve_threads, run_config


def cfg(kind, **blocks):
    return config_from_dict({"schema_version": 1, "kind": kind, **blocks})


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


@pytest.mark.parametrize("raw,field", [
    ({"lattice": {"n": 1}}, "lattice.n"),
    ({"lattice": {"n": 4}}, "lattice.n"),
    ({"lattice": {"j_x": -1.0}}, "lattice.j_x"),
    ({"lattice": {"bonds": "ring"}}, "lattice.bonds"),
    ({"lattice": {"colour": 3}}, "lattice.colour"),
    ({"schedule": {"taus": [5, -1]}}, "schedule.taus[1]"),
    ({"schedule": {"form": "cubic"}}, "schedule.form"),
    ({"noise": {"kind": "directional", "amplitudes": [0.01]}}, "noise.axis"),
    ({"noise": {"kind": "coupling_fluctuation", "amplitudes": [1.5]}}, "noise.amplitudes[0]"),
    ({"seeds": [1, 1]}, "seeds"),
    ({"seeds": [-3]}, "seeds[0]"),
    ({"integrator": {"dt": 0}}, "integrator.dt"),
    ({"extra": 1}, "extra"),
])
def test_validation_names_the_field(raw, field):
    with pytest.raises(ConfigError) as err:
        cfg("init_sweep", **raw)
    assert err.value.field == field


def test_validation_physical_bounds():
    with pytest.raises(ConfigError) as err:
        cfg("manip_sweep", pulse={"axis": "X", "g_values": [0.1, 0.9]})
    assert err.value.field == "pulse.g_values[1]"
    with pytest.raises(ConfigError) as err:
        cfg("manip_sweep", pulse={"axis": "Z", "g_values": [0.1]})
    assert err.value.field == "pulse.axis"
    with pytest.raises(ConfigError) as err:
        cfg("splitting_scan", scan={"axis": "X", "amplitudes": [0.5]})
    assert err.value.field == "scan.amplitudes[0]"
    with pytest.raises(ConfigError) as err:
        cfg("classify", classify={"strings": ["Y33"]})
    assert err.value.field == "classify.strings[0]"
    with pytest.raises(ConfigError) as err:
        config_from_dict({"kind": "init_sweep"})
    assert err.value.field == "schema_version"
    with pytest.raises(ConfigError) as err:
        cfg("init_sweep", schema_version=2)
    assert err.value.field == "schema_version"


def test_yaml_round_trip_and_hash(tmp_path):
    c = cfg("init_sweep", schedule={"taus": [5, 10]}, seeds=[3, 4])
    path = tmp_path / "c.yaml"
    path.write_text(dump_config(c))
    back = load_config(path)
    assert back == c and back.config_hash() == c.config_hash()
    assert c.with_seeds([5]).config_hash() != c.config_hash()
    (tmp_path / "bad.yaml").write_text("kind: [unclosed")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.yaml")


def test_shipped_configs_validate():
    names = shipped_config_names()
    for required in ("fig1_top", "fig1_inset", "fig1_bottom", "fig2"):
        assert required in names
    for name in names:
        shipped_config(name)


def test_init_sweep_example(tmp_path):
    run = run_config(shipped_config("init_noiseless"), tmp_path)
    assert run.ok and run.header == INIT_HEADER
    errors = run.column("final_error")
    taus = run.column("tau")
    assert list(taus) == [5, 10, 20, 50, 100]
    assert np.all(np.diff(errors) < 0)
    assert errors[-1] <= 1e-8
    rows = read_csv(tmp_path / "results.csv")
    assert rows[0] == INIT_HEADER and len(rows) == 6
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["status"] == "ok" and summary["config_hash"] == shipped_config("init_noiseless").config_hash()
    assert (tmp_path / "timings.csv").exists()


def _small_random_init(seeds):
    return cfg("init_sweep", schedule={"taus": [3, 6]},
               noise={"kind": "random_orientation", "amplitudes": [0.01]}, seeds=seeds)


def test_determinism_across_threads(tmp_path):
    c = _small_random_init([0, 1, 2, 3])
    run_config(c, tmp_path / "a", threads=1)
    run_config(c, tmp_path / "b", threads=4)
    for name in ("results.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_independence(tmp_path):
    both = run_config(_small_random_init([0, 1]))
    only1 = run_config(_small_random_init([1]))
    err = {(r[1], r[3]): r[4] for r in both.rows}
    for r in only1.rows:
        assert err[(r[1], r[3])] == r[4]
    assert err[(3.0, 0)] != err[(3.0, 1)]


def test_manip_header_and_classify_header(tmp_path):
    run = run_config(cfg("manip_sweep", pulse={"axis": "X", "g_values": [0.05]}))
    assert run.ok and run.header == MANIP_HEADER
    run = run_config(cfg("classify", classify={"strings": ["Y11 Y12", "Z11 Z22"]}))
    assert run.header == CLASSIFY_HEADER and run.ok


def test_failure_status(tmp_path):
    c = cfg("manip_sweep", pulse={"axis": "X", "g_values": [0.8], "duration_gaps": 1.0})
    run = run_config(c, tmp_path)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert not run.ok and summary["status"] == "failed"
    assert "NonAdiabaticError" in summary["failures"][0]["error"]


def test_threads_resolution(monkeypatch):
    monkeypatch.delenv("THREADS", raising=False)
    assert resolve_threads() == 1
    monkeypatch.setenv("THREADS", "3")
    assert resolve_threads() == 3 and resolve_threads(2) == 2
    with pytest.raises(ValueError):
        resolve_threads(0)



def test_cli_classify_subprocess(tmp_path):
    out = subprocess.run([sys.executable, "-m", "protqubit.cli", "classify", "Y11 Y12", "-n", "2",
                          "--out", str(tmp_path)], capture_output=True, text=True, check=True)
    results = json.loads(out.stdout)
    assert results["verdicts"][0]["logical_class"] == "TauZ"
    assert results["oracle_disagreements"] == []
    assert read_csv(tmp_path / "results.csv")[1][4] == "TauZ"


def test_cli_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump({"schema_version": 1, "kind": "init_sweep", "lattice": {"n": 9}}))
    assert main(["init-sweep", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "lattice.n" in capsys.readouterr().err
    good = tmp_path / "good.yaml"
    good.write_text(yaml.safe_dump({"schema_version": 1, "kind": "classify", "classify": {"strings": ["X11"]}}))
    assert main(["init-sweep", "--config", str(good)]) == 2


def test_cli_seeds_and_run(tmp_path):
    c = tmp_path / "c.yaml"
    c.write_text(dump_config(_small_random_init([0])))
    assert main(["init-sweep", "--config", str(c), "--seeds", "2-3", "--out", str(tmp_path / "o")]) == 0
    rows = read_csv(tmp_path / "o" / "results.csv")[1:]
    assert sorted({int(r[3]) for r in rows}) == [2, 3]
