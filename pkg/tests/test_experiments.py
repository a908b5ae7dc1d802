import json

import pytest

from zrpmeta.cli import main
from zrpmeta.experiments import ExperimentConfig, resolve_scales, run_mt1, run_zk


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(Ns=[10, 10])
    with pytest.raises(TypeError):
        ExperimentConfig(unknown=1)


def test_zk_single_site_maximum():
    cfg = ExperimentConfig(graph={"sites": ["a", "b"], "rates": [{"from": "a", "to": "b", "rate": 2},
                                                                  {"from": "b", "to": "a", "rate": 3}]},
                           alpha=2.0, Ns=[100, 200, 400, 800])
    rep = run_zk(cfg)
    assert rep.summary["convergence"]["status"] == "pass"


def test_zk_N1_exact():
    rep = run_zk(ExperimentConfig(Ns=[1, 2, 3]))
    assert rep.rows[0]["Z_NS"] == pytest.approx(2.0)


def test_mt1_nonmaximal_site_and_sandwich():
    g = {"sites": ["0", "1", "2"],
         "rates": [{"from": a, "to": b, "rate": r} for a, b, r in
                   [("0", "1", 1), ("1", "0", 1), ("0", "2", 0.5), ("2", "0", 1), ("1", "2", 0.5), ("2", "1", 1)]]}
    cfg = ExperimentConfig(graph=g, alpha=2.0, Ns=[20, 30, 40])
    rep = run_mt1(cfg)
    assert rep.passed
    assert all(r["sandwich"] for r in rep.rows)
    assert rep.summary["S1_star"] == [0]


def test_resolved_config_embeds_scales(tmp_path):
    cfg = ExperimentConfig(Ns=[50, 100, 200], out=str(tmp_path))
    rep = run_mt1(cfg)
    js, csv_path = rep.write()
    data = json.loads(js.read_text())
    assert data["config"]["resolved_scales"]["50"]["ell_N"] == 14
    assert csv_path.read_text().startswith("N,")
    rerun = run_mt1(ExperimentConfig(**{k: v for k, v in data["config"].items() if k != "resolved_scales"}))
    assert [r["scaled_cap"] for r in rerun.rows] == [r["scaled_cap"] for r in rep.rows]


def test_explicit_and_m1_scales():
    cfg = ExperimentConfig(Ns=[40], scales={"ell": {"40": 5}})
    assert resolve_scales(cfg, cfg.model(), 40)[0] == 5
    cfg = ExperimentConfig(Ns=[40], scales="m1")
    assert resolve_scales(cfg, cfg.model(), 40)[0] == 7


def test_cli_runs_and_exit_code(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"alpha": 2.0, "graph": "complete:2", "Ns": [8, 16, 32]}))
    assert main(["zk", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "zk.json").exists()
    assert main(["remark", "--Ns", "50,100", "--out", str(tmp_path / "out")]) == 0
    assert main(["hcond", "--Ns", "64,128,256", "--alpha", "3", "--out", str(tmp_path / "out")]) == 0
    assert main(["tunnel", "--Ns", "20", "--scales", '{"ell": 4}', "--replicas", "5",
                 "--out", str(tmp_path / "out")]) == 0
    data = json.loads((tmp_path / "out" / "tunnel.json").read_text())
    assert data["summary"]["per_N"][0]["ell_N"] == 4


def test_sandwich_violation_is_hard_failure(tmp_path, monkeypatch):
    import dataclasses

    import zrpmeta.experiments as ex

    real = ex.upper_bound_estimate

    def broken(*args, **kwargs):
        return dataclasses.replace(real(*args, **kwargs), bounded=0.0)

    monkeypatch.setattr(ex, "upper_bound_estimate", broken)
    assert main(["mt1", "--Ns", "50,100,200", "--out", str(tmp_path)]) == 1
    data = json.loads((tmp_path / "mt1.json").read_text())
    assert not data["passed"] and data["hard_failures"]
