#!/usr/bin/env python3

import asyncio
import csv
import json

import pandas as pd
import pytest

from qar_monitor.cli import build_parser, main, run_config_from_args
from qar_monitor.manager import EXIT_CRITICAL, EXIT_INVALID, EXIT_OK
from qar_monitor.warning import default_rules, dump_rules

pytestmark = pytest.mark.integration


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    """Synthetic dataset written once through the synth subcommand."""
    root = tmp_path_factory.mktemp("qar")
    status = asyncio.run(main(["synth", "--output", str(root), "--flights", "8", "--seed", "7"]))
    assert status == EXIT_OK
    return root / "synth"


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps({
        "forest": {"n_trees": 3, "max_depth": 6},
        "bpnet": {"epochs": 2, "hidden": 4, "classifier_epochs": 3, "classifier_hidden": 8},
        "boost": {"rounds": 3, "max_depth": 2},
    }))
    return path


def _flight(dataset, n):
    return str(dataset / "flights" / f"flight_{n:03d}.csv")


def test_synth_layout(dataset):
    assert sorted(p.name for p in (dataset / "flights").glob("*.csv")) == [f"flight_{i:03d}.csv" for i in range(1, 9)]
    for name in ("schema.json", "rules.json", "refs.json", "events.csv", "skill.csv"):
        assert (dataset / name).exists(), name


def test_flags_override_config(small_config, dataset):
    args = build_parser().parse_args(["importance", _flight(dataset, 1), "--config", str(small_config),
                                      "--trees", "5", "--seed", "3"])
    run = run_config_from_args(args)
    assert run.config.forest.n_trees == 5
    assert run.config.forest.max_depth == 6
    assert run.seed == 3


def test_unknown_subcommand():
    with pytest.raises(SystemExit) as info:
        build_parser().parse_args(["fly"])
    assert info.value.code == 2


async def test_missing_input_path(tmp_path):
    assert await main(["stats", str(tmp_path / "absent.csv")]) == EXIT_INVALID


async def test_ingest(dataset, tmp_path):
    status = await main(["ingest", _flight(dataset, 1), "--schema", str(dataset / "schema.json"),
                         "--output", str(tmp_path)])
    assert status == EXIT_OK
    table = pd.read_csv(tmp_path / "ingest" / "flight_001.csv")
    assert "DATE" not in table.columns
    assert list(table.columns).count("COG NORM ACCEL") == 1
    assert len(table) == 600
    assert not table.isna().any().any()


async def test_stats_on_three_columns(tmp_path):
    path = tmp_path / "three.csv"
    path.write_text("A,B,C\n1,2,3\n4,5,6\n7,8,10\n")
    assert await main(["stats", str(path), "--output", str(tmp_path)]) == EXIT_OK
    assert len(pd.read_csv(tmp_path / "stats" / "profile.csv")) == 3
    assert (tmp_path / "stats" / "unreliable.json").exists()


async def test_repair_flagged_columns(dataset, tmp_path):
    status = await main(["repair", _flight(dataset, 2), "--schema", str(dataset / "schema.json"),
                         "--all-flagged", "--output", str(tmp_path)])
    assert status == EXIT_OK
    summary = pd.read_csv(tmp_path / "repair" / "repair_summary.csv")
    assert "ROLL ATT" in summary["column"].tolist()
    assert (tmp_path / "repair" / "flight_002.csv").exists()


async def test_repair_needs_a_column(dataset, tmp_path):
    assert await main(["repair", _flight(dataset, 2), "--output", str(tmp_path)]) == EXIT_INVALID


async def test_importance_is_deterministic(dataset, small_config, tmp_path):
    outputs = []
    for run in ("a", "b"):
        status = await main(["importance", _flight(dataset, 1), _flight(dataset, 2), "--schema",
                             str(dataset / "schema.json"), "--config", str(small_config),
                             "--output", str(tmp_path / run)])
        assert status == EXIT_OK
        outputs.append((tmp_path / run / "importance" / "importance.csv").read_text())
    assert outputs[0] == outputs[1]
    weights = pd.read_csv(tmp_path / "a" / "importance" / "importance.csv")
    assert "COG NORM ACCEL" not in weights["feature"].tolist()
    assert weights["weight"].sum() == pytest.approx(1.0, abs=1e-6)


def _rerun_args(dataset, small_config, subcommand):
    schema = ["--schema", str(dataset / "schema.json")]
    warning = ["--rules", str(dataset / "rules.json"), "--refs", str(dataset / "refs.json")]
    config = ["--config", str(small_config)]
    return {
        "stats": [_flight(dataset, 1), *schema],
        "repair": [_flight(dataset, 2), *schema, "--all-flagged"],
        "quantify": [_flight(dataset, 3), *schema, *config],
        "skill-gbdt": [str(dataset / "skill.csv"), "--algo", "gbdt", *config],
        "skill-nn": [str(dataset / "skill.csv"), "--algo", "nn", *config],
        "eda": [str(dataset / "events.csv")],
        "simulate": [str(dataset / "flights"), *schema, *warning],
        "monitor": [_flight(dataset, 1), *warning],
    }[subcommand]


@pytest.mark.parametrize("subcommand", ["stats", "repair", "quantify", "skill-gbdt", "skill-nn", "eda",
                                        "simulate", "monitor"])
async def test_same_seed_gives_identical_artifacts(dataset, small_config, tmp_path, capsys, subcommand):
    """Two runs with the same seed and inputs write byte-identical files."""
    name = subcommand.split("-")[0]
    stdout = []
    for run in ("a", "b"):
        status = await main([name, *_rerun_args(dataset, small_config, subcommand), "--seed", "5",
                             "--output", str(tmp_path / run)])
        assert status == EXIT_OK
        stdout.append(capsys.readouterr().out)
    first = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    second = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
    assert first == second
    assert first
    for relative in first:
        assert (tmp_path / "a" / relative).read_bytes() == (tmp_path / "b" / relative).read_bytes(), relative
    assert stdout[0] == stdout[1]


async def test_quantify(dataset, small_config, tmp_path):
    status = await main(["quantify", _flight(dataset, 3), "--schema", str(dataset / "schema.json"),
                         "--config", str(small_config), "--output", str(tmp_path)])
    assert status == EXIT_OK
    out = tmp_path / "quantify"
    loss = pd.read_csv(out / "loss.csv")
    assert loss["epoch"].tolist() == [0, 1, 2]
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary["relative_error"]) == {"CAP CLM 1 POSN", "CAP WHL 1 POSN", "TRA-L", "TRA-R"}
    assert (out / "model.json").exists()


async def test_eda(dataset, tmp_path):
    assert await main(["eda", str(dataset / "events.csv"), "--output", str(tmp_path)]) == EXIT_OK
    out = tmp_path / "eda"
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["top_event"] == "着陆速度大"
    assert summary["drilldown_event"] == "着陆速度大"
    rejected = pd.read_csv(out / "rejected.csv")
    assert summary["records"] + len(rejected) == 601
    assert pd.read_csv(out / "by_event.csv")["count"].sum() == summary["records"]


@pytest.mark.parametrize("algo", ["gbdt", "nn"])
async def test_skill(dataset, small_config, tmp_path, algo):
    status = await main(["skill", str(dataset / "skill.csv"), "--algo", algo, "--config", str(small_config),
                         "--output", str(tmp_path)])
    assert status == EXIT_OK
    metrics = json.loads((tmp_path / "skill" / "metrics.json").read_text())
    assert metrics["algo"] == algo
    assert 0.0 <= metrics["accuracy"] <= 1.0
    assert (tmp_path / "skill" / "importance.csv").exists() == (algo == "gbdt")


async def test_simulate_rates(dataset, tmp_path):
    status = await main(["simulate", str(dataset / "flights"), "--schema", str(dataset / "schema.json"),
                         "--rules", str(dataset / "rules.json"), "--refs", str(dataset / "refs.json"),
                         "--output", str(tmp_path)])
    assert status == EXIT_OK
    rates = pd.read_csv(tmp_path / "simulate" / "rates.csv").set_index("rule_id")["rate_percent"]
    assert rates["landing_speed_high"] == 12.5
    assert rates["gear_retraction_late"] == 25.0


async def test_monitor_writes_json_lines(dataset, tmp_path, capsys):
    status = await main(["monitor", _flight(dataset, 1), "--rules", str(dataset / "rules.json"),
                         "--refs", str(dataset / "refs.json"), "--output", str(tmp_path)])
    assert status == EXIT_OK
    lines = [line for line in capsys.readouterr().out.splitlines() if line.strip()]
    alerts = [json.loads(line) for line in lines]
    assert any(a["rule_id"] == "landing_speed_high" for a in alerts)
    assert all(a["flight_id"] == "flight_001" for a in alerts)
    table = pd.read_csv(tmp_path / "monitor" / "alerts.csv")
    assert "landing_speed_high" in table["rule_id"].tolist()


async def test_monitor_carries_blank_air_ground(dataset, tmp_path):
    """A dropped air/ground sample mid-air leaves the alerts unchanged."""
    with open(_flight(dataset, 1), newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    column = rows[0].index("AIR GROUND")
    middle = next(r for r in range(len(rows) // 2, len(rows) - 1)
                  if rows[r - 1][column] == rows[r][column] == rows[r + 1][column] == "AIR")
    rows[middle][column] = ""
    gappy = tmp_path / "gappy" / "flight_001.csv"
    gappy.parent.mkdir()
    with open(gappy, "w", newline="", encoding="utf-8") as f:
        csv.writer(f).writerows(rows)

    options = ["--schema", str(dataset / "schema.json"), "--rules", str(dataset / "rules.json"),
               "--refs", str(dataset / "refs.json")]
    assert await main(["monitor", _flight(dataset, 1), *options, "--output", str(tmp_path / "a")]) == EXIT_OK
    assert await main(["monitor", str(gappy), *options, "--output", str(tmp_path / "b")]) == EXIT_OK
    assert (tmp_path / "a" / "monitor" / "alerts.csv").read_bytes() == \
        (tmp_path / "b" / "monitor" / "alerts.csv").read_bytes()


async def test_monitor_ragged_row_is_invalid(dataset, tmp_path):
    lines = (dataset / "flights" / "flight_001.csv").read_text(encoding="utf-8").splitlines()
    lines[50] += ",1.0"
    path = tmp_path / "ragged.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    options = ["--rules", str(dataset / "rules.json"), "--refs", str(dataset / "refs.json")]
    assert await main(["monitor", str(path), *options, "--output", str(tmp_path)]) == EXIT_INVALID
    assert (tmp_path / "monitor" / "alerts.csv").exists()


async def test_monitor_needs_rules(dataset, tmp_path):
    assert await main(["monitor", _flight(dataset, 1), "--output", str(tmp_path)]) == EXIT_INVALID


async def test_monitor_critical_exit(dataset, tmp_path):
    rules = [r.model_copy(update={"critical": r.rule_id == "landing_speed_high"}) for r in default_rules()]
    path = dump_rules(rules, tmp_path / "critical.json")
    options = ["--rules", str(path), "--refs", str(dataset / "refs.json"), "--output", str(tmp_path)]
    assert await main(["monitor", _flight(dataset, 1), *options, "--fail-on-critical"]) == EXIT_CRITICAL
    assert await main(["monitor", _flight(dataset, 1), *options]) == EXIT_OK
    assert await main(["monitor", _flight(dataset, 4), *options, "--fail-on-critical"]) == EXIT_OK
