import json
import math
import subprocess
import sys

import numpy as np
import pytest
import yaml
from hypothesis import given, settings, strategies as st

from corrsurf.cli import main
from corrsurf.experiment import ConfigError, ExperimentConfig, read_csv, run_experiment
from corrsurf.noise import NoiseSpec

from fit_table import DISTANCES


def _cfg(**kw):
    base = dict(distances=[3, 5], models={"pw": NoiseSpec.full_correlated("pairwise", 2e-3)},
                shots=3000, seed=5)
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigError):
        _cfg(distances=[4])
    with pytest.raises(ConfigError):
        _cfg(rounds=0)
    with pytest.raises(ConfigError):
        _cfg(arms=["bogus"])
    assert _cfg().rounds_for(5) == 10
    assert _cfg(rounds=3).rounds_for(5) == 3


specs = st.sampled_from([
    NoiseSpec.standard(1e-3), NoiseSpec.full_correlated("streaky", 2e-3),
    NoiseSpec.single_class("class1", "pairwise", 2e-3, exponent=math.inf), NoiseSpec(),
])


@given(st.lists(st.sampled_from([3, 5, 7, 9]), min_size=1, max_size=3, unique=True),
       st.one_of(st.just("two_d"), st.integers(1, 20)), specs,
       st.one_of(st.none(), st.lists(st.floats(1e-4, 1e-2), min_size=1, max_size=4)),
       st.integers(0, 2**31))
def test_config_round_trip(distances, rounds, spec, sweep, seed):
    cfg = ExperimentConfig(distances=distances, models={"m": spec}, rounds=rounds, p_sweep=sweep, seed=seed)
    back = ExperimentConfig.from_dict(yaml.safe_load(cfg.dump()))
    assert back == cfg


def test_none_noise_reports_zero(tmp_path):
    recs = run_experiment(_cfg(models={"none": NoiseSpec()}), tmp_path)
    assert {r["failures"] for r in recs} == {0}
    assert {r["model"] for r in recs} == {"none/correlated", "none/marginalized"}


def test_rerun_is_byte_identical(tmp_path, monkeypatch):
    cfg = _cfg()
    run_experiment(cfg, tmp_path / "a")
    monkeypatch.setenv("CORRSURF_WORKERS", "2")
    run_experiment(cfg, tmp_path / "b")
    for f in ("results.csv", "summary.json", "config.yaml"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    rows = read_csv(tmp_path / "a" / "results.csv")
    assert len(rows) == 4
    echo = ExperimentConfig.load(tmp_path / "a" / "config.yaml")
    assert echo == cfg


def test_sweep_writes_threshold(tmp_path):
    cfg = _cfg(p_sweep=[4e-3, 8e-3], models={"std": NoiseSpec.standard(1e-3)})
    run_experiment(cfg, tmp_path)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert "threshold" in summary["std/marginalized"]
    ps = {r["p"] for r in read_csv(tmp_path / "results.csv")}
    assert ps == {4e-3, 8e-3}


def test_cli_circuit(capsys):
    assert main(["circuit", "--d", "3", "--rounds", "2"]) == 0
    out = capsys.readouterr().out
    assert sum(1 for l in out.splitlines() if l.startswith("ROUND 1 ")) == 48
    assert sum(1 for l in out.splitlines() if l.startswith("DETECTOR")) == 16


def test_cli_pipeline(tmp_path, capsys):
    dem, ev = tmp_path / "x.dem", tmp_path / "ev.b8"
    assert main(["dem", "--distance", "3", "--rounds", "3", "--out", str(dem)]) == 0
    assert main(["sample", "--distance", "3", "--rounds", "3", "--shots", "2000",
                 "--format", "binary", "--out", str(ev)]) == 0
    assert main(["decode", "--dem", str(dem), "--events", str(ev)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["shots"] == 2000 and 0 <= summary["failures"] < 50
    empty = tmp_path / "empty.txt"
    empty.write_text(("0" * 24 + " 0\n") * 5)
    preds = tmp_path / "p.txt"
    assert main(["decode", "--dem", str(dem), "--events", str(empty), "--predictions", str(preds)]) == 0
    assert preds.read_text() == "0\n" * 5


def test_cli_marginals(tmp_path):
    cfgf = tmp_path / "n.yaml"
    cfgf.write_text(yaml.safe_dump(NoiseSpec.full_correlated("pairwise", 1e-3).to_dict()))
    out = tmp_path / "m.txt"
    assert main(["marginals", "--d", "3", "--rounds", "4", "--noise-config", str(cfgf), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 4 * 49


def test_cli_analyze_fit(tmp_path, capsys):
    csvf = tmp_path / "pts.csv"
    csvf.write_text("d,p_round\n" + "".join(f"{d},{4.03e-3 * math.exp(-0.820 * d)!r}\n" for d in DISTANCES))
    assert main(["analyze", "--results", str(csvf), "--fit", "exponential"]) == 0
    res = json.loads(capsys.readouterr().out)["fit"]
    assert float(f"{res['amplitude']:.3g}") == 4.03e-3 and float(f"{res['rate']:.3g}") == 0.820
    assert res["teraquop_distance"] == 27


def test_cli_errors(tmp_path, capsys):
    assert main(["decode", "--dem", str(tmp_path / "missing"), "--events", "x"]) == 1
    report = json.loads(capsys.readouterr().err)
    assert report["error"] == "FileNotFoundError" and report["command"] == "decode"
    with pytest.raises(SystemExit) as e:
        main(["circuit", "--d", "3", "--rounds", "2", "--bogus"])
    assert e.value.code == 2


def test_console_script_entry():
    r = subprocess.run([sys.executable, "-m", "corrsurf.cli", "circuit", "--d", "3", "--rounds", "1"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "DETECTOR" in r.stdout
