"""
test_cli.py - Exit codes, config handling, search outputs, report and demos.

Uso:
    pytest cli
"""

import json
import logging

import pandas as pd
import pytest

from cli.config import ConfigError, RunConfig
from cli.main import main, preset_design
from cli.report import RunData, summary_table
from model.backbone import build_backbone
from model.design import ModelDesign
from settings import (
    ACC_SECACC_SVG, ATTACK_JSON, BEST_ACC_JSON, BEST_SEC_JSON, EPISODES_CSV, MODEL_JSON,
    PARETO_JSON, PARETO_SVG, SEARCH_EPISODES, SECURITY_JSON, SUMMARY_CSV,
)

SEARCH_FILES = (EPISODES_CSV, BEST_ACC_JSON, BEST_SEC_JSON, PARETO_JSON)


@pytest.fixture
def run(tmp_path):
    """main() against an empty config file, so the repo's config.json never leaks in."""
    cfg = tmp_path / "config.json"
    cfg.write_text("{}")

    def _run(*argv):
        return main([*argv, "--config", str(cfg)])
    return _run


def _stdout_json(capsys):
    return json.loads(capsys.readouterr().out)


# ── Exit codes and config ──

def test_usage_errors_exit_2():
    assert main(["search", "--lambduh", "1"]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["search", "--shots", "-3"]) == 2


def test_missing_config_file_exits_1(tmp_path):
    assert main(["search", "--objective", "tabular", "--config", str(tmp_path / "nope.json")]) == 1


def test_unknown_config_keys_warn(tmp_path, caplog):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"bogus": 1, "seed": 4, "search": {"lambda": 2.0, "nope": 3}}))
    with caplog.at_level(logging.WARNING, logger="splitq.cli"):
        cfg = RunConfig(str(path), explicit=True)
    text = caplog.text
    assert "'bogus'" in text and "search.nope" in text
    assert cfg.seed == 4
    assert cfg.search.lam == 2.0
    assert cfg.search.episodes == SEARCH_EPISODES


def test_config_overrides_and_validation(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"transport": "carrier-pigeon", "shots": "exact"}))
    cfg = RunConfig(str(path))
    assert cfg.shots == "exact"
    with pytest.raises(ConfigError):
        cfg.transport
    cfg.set("search.episodes", 12)
    cfg.set("seed", None)
    assert cfg.search.episodes == 12
    assert cfg.seed == 0
    cfg.use_builtin_fleet(4)
    assert [p.provider for p in cfg.profiles] == ["qcp1", "qcp2", "qcp3", "qcp4"]


def test_naive5_preset_layout():
    design = preset_design("naive5", ["qcp1", "qcp2", "qcp3"])
    assert design.active_nodes == [1, 2, 3, 4, 6]
    assert design.providers_used == ["qcp1", "qcp2", "qcp3"]
    assert design.provider[4] == design.provider[2] != design.provider[6]
    with pytest.raises(ValueError):
        preset_design("naive7", ["qcp1"])


# ── Searches and report ──

def test_tabular_search_outputs_are_reproducible(run, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run("search", "--objective", "tabular", "--episodes", "6", "--seed", "2",
                   "--out-dir", str(out)) == 0
    for name in SEARCH_FILES:
        assert (a / "engine" / name).read_bytes() == (b / "engine" / name).read_bytes()
    df = pd.read_csv(a / "engine" / EPISODES_CSV)
    assert len(df) == 6


def test_quantum_search_end_to_end(run, tmp_path):
    assert run("search", "--fast", "--dataset", "synth2", "--providers", "3", "--episodes", "20",
               "--shots", "200", "--eval-cap", "20", "--seed", "1", "--out-dir", str(tmp_path)) == 0
    df = pd.read_csv(tmp_path / "engine" / EPISODES_CSV)
    assert len(df) == 20
    for row in df.itertuples():
        assert row.reward == pytest.approx(row.acc - row.baseline + 0.5 * row.sec_mec, abs=1e-9)
        if row.acc > 0:
            assert row.sec_mec == pytest.approx(1 - row.sec_acc / row.acc, abs=1e-9)
    assert (df["n_providers"] >= 2).any()
    best = json.loads((tmp_path / "engine" / BEST_ACC_JSON).read_text())
    assert best["metrics"]["acc"] == pytest.approx(df["acc"].max())


def test_random_and_single_provider_searches(run, tmp_path):
    assert run("random-search", "--objective", "tabular", "--episodes", "4",
               "--out-dir", str(tmp_path)) == 0
    assert run("nas-single", "--objective", "tabular", "--episodes", "4", "--provider", "qcp2",
               "--out-dir", str(tmp_path)) == 0
    for sub in ("random", "nas-qcp2"):
        for name in SEARCH_FILES:
            assert (tmp_path / sub / name).exists()
    df = pd.read_csv(tmp_path / "nas-qcp2" / EPISODES_CSV)
    assert (df["n_providers"] <= 1).all()


def test_report_from_tabular_runs(run, tmp_path):
    common = ("--objective", "tabular", "--episodes", "8", "--seed", "5", "--out-dir", str(tmp_path))
    assert run("search", *common) == 0
    assert run("random-search", *common) == 0
    assert run("nas-single", *common) == 0
    assert run("report", "--out-dir", str(tmp_path)) == 0
    assert run("report", "--out-dir", str(tmp_path), "--report-dir", str(tmp_path / "again")) == 0

    report = tmp_path / "report"
    for name in (SUMMARY_CSV, PARETO_SVG, ACC_SECACC_SVG):
        assert (report / name).read_bytes() == (tmp_path / "again" / name).read_bytes()

    table = pd.read_csv(report / SUMMARY_CSV)
    nas = table[table["method"].str.startswith("NAS-single")]
    assert len(nas) == 3
    engine = table[(table["method"] == "engine") & (table["pick"] == "acc")].iloc[0]
    assert engine["acc_vs_baseline"] == pytest.approx(engine["acc"] - nas["acc"].max(), abs=2e-4)


def test_report_without_runs_fails(run, tmp_path):
    assert run("report", "--out-dir", str(tmp_path / "empty")) == 1


def test_summary_baselines():
    frame = pd.DataFrame({"acc": [0.5], "sec_mec": [0.1]})

    def metrics(acc, sec):
        return {"acc": acc, "sec_mec": sec, "sec_acc": acc - sec, "n_providers": 2, "n_nodes": 3}

    runs = {
        "nas-qcp1": RunData("nas-qcp1", frame, metrics(0.70, 0.0), metrics(0.70, 0.0)),
        "nas-qcp2": RunData("nas-qcp2", frame, metrics(0.80, 0.0), metrics(0.80, 0.0)),
        "random": RunData("random", frame, metrics(0.75, 0.2), metrics(0.60, 0.4)),
        "engine": RunData("engine", frame, metrics(0.85, 0.5), metrics(0.78, 0.6)),
    }
    table = summary_table(runs, naive=metrics(0.72, 0.3)).set_index(["method", "pick"])
    assert table.loc[("engine", "acc"), "acc_vs_baseline"] == pytest.approx(0.05)
    assert table.loc[("engine", "sec"), "sec_vs_baseline"] == pytest.approx(0.2)
    assert table.loc[("random", "sec"), "sec_vs_baseline"] == pytest.approx(0.0)
    assert table.loc[("naive5", "-"), "acc_vs_baseline"] == pytest.approx(-0.08)


# ── Data, training, security and attack ──

def test_data_prepare(run, capsys):
    assert run("data", "prepare", "--dataset", "synth4", "--seed", "1") == 0
    out = _stdout_json(capsys)
    assert out["n_classes"] == 4
    assert out["train"] == sum(out["train_counts"])
    assert out["test"] == sum(out["test_counts"])


def test_train_then_evaluate(run, tmp_path, capsys):
    design = ModelDesign(build_backbone(2), {1: 1, 2: 3, 3: 1}, {1: "qcp1", 2: "qcp2", 3: "qcp1"})
    path = tmp_path / "design.json"
    path.write_text(design.to_json())
    flags = ("--dataset", "synth2", "--fast", "--eval-cap", "20", "--seed", "3")

    assert run("train", "--design", str(path), "--out-dir", str(tmp_path), *flags) == 0
    trained = _stdout_json(capsys)
    assert (tmp_path / MODEL_JSON).exists()

    assert run("evaluate", "--design", str(tmp_path / MODEL_JSON), "--shots", "300", *flags) == 0
    scored = _stdout_json(capsys)
    assert scored["acc_local"] == trained["acc"]
    assert 0.0 <= scored["acc_fleet"] <= 1.0
    assert scored["providers"] == ["qcp1", "qcp2"]


def test_naive5_security_report(run, tmp_path, capsys):
    assert run("security", "--design", "naive5", "--dataset", "synth2", "--fast", "--shots", "200",
               "--eval-cap", "15", "--providers", "3", "--out-dir", str(tmp_path)) == 0
    printed = _stdout_json(capsys)
    saved = json.loads((tmp_path / SECURITY_JSON).read_text())
    assert printed == saved
    assert saved["n_nodes"] == 5
    assert saved["n_providers"] == 3
    assert saved["sec_mec"] == pytest.approx(1 - saved["sec_acc"] / saved["acc"])


def test_attack_demo(run, tmp_path, capsys):
    logs = tmp_path / "logs"
    assert run("attack-demo", "--design", "naive5", "--dataset", "synth2", "--fast",
               "--shots", "200", "--eval-cap", "10", "--log-dir", str(logs),
               "--out-dir", str(tmp_path)) == 0
    result = json.loads((tmp_path / ATTACK_JSON).read_text())
    assert result == _stdout_json(capsys)
    assert result["single_provider"]["complete"]
    assert result["single_provider"]["min_fidelity"] > 1 - 1e-9
    assert result["consistent"]
    assert sorted(len(s["nodes"]) for s in result["distributed"]["submodels"]) == [1, 2, 2]
    assert (logs / "qcp1.jsonl").stat().st_size > 0
