import csv
import io
import json
import subprocess
import sys

import pytest

from adlab import cli
from adlab import reproduce
from adlab.scenario import (FIXTURES, ResultTable, ScenarioError, fixture_path, format_cell,
                            load_scenario, parse_scenario, render)


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def csv_tables(text):
    return [list(csv.DictReader(io.StringIO(block))) for block in text.strip().split("\n\n")]


@pytest.fixture
def table1_doc():
    return json.loads(fixture_path("table1").read_text())


def write(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return str(p)


# --- scenario parsing -------------------------------------------------------------

def test_all_fixtures_load():
    for name in FIXTURES:
        sc = load_scenario(fixture_path(name))
        assert sc.curve.K >= 3 and sc.bidders


@pytest.mark.parametrize("mutate, where", [
    (lambda d: d.pop("gammas"), "$.gammas"),
    (lambda d: d.update(gammas=[0.5, 0.9]), "$.gammas"),
    (lambda d: d["bidders"][0].pop("value"), "$.bidders[0].value"),
    (lambda d: d["bidders"][1].update(id=1), "$.bidders[1].id"),
    (lambda d: d["bids"][0].update(id=99), "$.bids[0].id"),
    (lambda d: d["bids"][2].update(bid="x"), "$.bids[2].bid"),
    (lambda d: d["bids"].pop(), "$.bids"),
    (lambda d: d["mediator"].update(m_ids=[77]), "$.mediator.m_ids"),
    (lambda d: d.update(fork={"l": 9, "L": 1, "f": 0.5}), "$.fork"),
])
def test_parse_errors_name_the_field(table1_doc, mutate, where):
    mutate(table1_doc)
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(table1_doc)
    assert str(exc.value).startswith(where)


def test_bad_json_reports_position(tmp_path):
    with pytest.raises(ScenarioError, match="line 2 column"):
        load_scenario(write(tmp_path, '{"gammas": [1],\n "bidders": [}'))


def test_format_and_render():
    assert format_cell(1 / 3) == "0.333333" and format_cell(1 / 3, exact=True) == repr(1 / 3)
    assert format_cell(True) == "true" and format_cell(None) == ""
    a = ResultTable(["x"], title="a")
    a.add(1.5)
    b = ResultTable(["y"], title="b")
    b.add(2)
    assert render([a, b]) == "x\n1.5\n\ny\n2\n"
    assert json.loads(render([a, b], "json")) == {"a": [{"x": 1.5}], "b": [{"y": 2}]}
    with pytest.raises(ValueError):
        a.add(1, 2)


# --- subcommands ------------------------------------------------------------------

def test_verify_sne_table1(capsys):
    code, out, _ = run(capsys, "verify-sne", str(fixture_path("table1")))
    rows = csv_tables(out)[0]
    assert code == 0 and len(rows) == 9 and all(r["sne"] == "YES" for r in rows)


def test_verify_sne_raised_bid(capsys, tmp_path, table1_doc):
    next(b for b in table1_doc["bids"] if b["id"] == 7)["bid"] = 13.5
    code, out, _ = run(capsys, "verify-sne", write(tmp_path, table1_doc))
    tables = csv_tables(out)
    assert code == 1 and len(tables) == 2
    assert any((r["rank"], r["bidder"], r["target"]) == ("6", "7", "7") for r in tables[1])


def test_missing_bids_is_input_error(capsys, tmp_path, table1_doc):
    table1_doc.pop("bids")
    code, _, err = run(capsys, "verify-sne", write(tmp_path, table1_doc))
    assert code == 2 and "bids" in err


def test_missing_file_is_input_error(capsys, tmp_path):
    code, _, err = run(capsys, "revenue", str(tmp_path / "nope.json"))
    assert code == 2 and "error" in err


def test_revenue_efficiency_min_sne(capsys):
    code, out, _ = run(capsys, "revenue", "table1")
    row = csv_tables(out)[0][0]
    assert code == 0 and row == {"revenue_direct_sum": "47.5", "revenue_payment_sum": "47.5",
                                 "agree": "true"}
    code, out, _ = run(capsys, "efficiency", "table1", "--format", "json")
    assert json.loads(out) == {"efficiency": [{"efficiency": pytest.approx(67.5)}]}
    code, out, _ = run(capsys, "min-sne", "table1")
    assert [r["min_sne_score"] for r in csv_tables(out)[0]][-2:] == ["10", "9"]


def test_single_slot_revenue(capsys, tmp_path):
    doc = {"gammas": [0.4], "bidders": [{"id": 1, "value": 10}, {"id": 2, "value": 7}]}
    code, out, _ = run(capsys, "revenue", write(tmp_path, doc), "--exact")
    assert code == 0 and float(csv_tables(out)[0][0]["revenue_direct_sum"]) == pytest.approx(2.8)


def test_capacity_sweep_columns_and_monotonicity(capsys):
    code, out, _ = run(capsys, "capacity-sweep", "lemma_l2", "--steps", "12", "--exact")
    rows = csv_tables(out)[0]
    assert code == 0 and list(rows[0]) == cli.SWEEP_COLUMNS and len(rows) == 12
    voc = [float(r["value_of_capacity"]) for r in rows]
    eff = [float(r["efficiency"]) for r in rows]
    assert all(a > b for a, b in zip(voc, voc[1:]))
    assert all(a <= b for a, b in zip(eff, eff[1:]))


def test_capacity_sweep_single_step_and_errors(capsys):
    code, out, _ = run(capsys, "capacity-sweep", "example1", "--steps", "1")
    assert code == 0 and len(csv_tables(out)[0]) == 1
    code, _, _ = run(capsys, "capacity-sweep", "example1", "--steps", "0")
    assert code == 2
    code, _, _ = run(capsys, "capacity-sweep", "example1", "--f-max", "1.5")
    assert code == 2
    code, _, err = run(capsys, "capacity-sweep", "table1")
    assert code == 2 and "--l" in err


def test_capacity_sweep_reports_skipped_ties(capsys, tmp_path):
    doc = {"gammas": [1, 0.5], "bidders": [{"id": i, "value": 10 - i} for i in range(4)]}
    code, out, err = run(capsys, "capacity-sweep", write(tmp_path, doc), "--l", "1", "--L", "2",
                         "--f-min", "0.25", "--f-max", "0.75", "--steps", "3")
    assert code == 0 and len(csv_tables(out)[0]) == 2 and "skipped f=0.5" in err


def test_sweep_is_deterministic(capsys):
    _, first, _ = run(capsys, "capacity-sweep", "example2", "--exact")
    _, second, _ = run(capsys, "capacity-sweep", "example2", "--exact")
    assert first == second


def test_mediator_top(capsys):
    code, out, _ = run(capsys, "mediator", "table1", "--strategy", "top", "--L", "5", "--exact")
    plan = csv_tables(out)[0][0]
    assert code == 0 and float(plan["r_star"]) == pytest.approx(14.2)
    assert plan["flattened_last"] == "4" and float(plan["payoff_per_share"]) == pytest.approx(7.28)


def test_mediator_slide_uses_file_score(capsys):
    code, out, _ = run(capsys, "mediator", "table1", "--strategy", "slide", "--L", "5")
    plan = csv_tables(out)[0][0]
    assert code == 0 and plan["r"] == "12" and plan["payoff_per_share"] == "22.8"


def test_mediator_interior_no_improvement(capsys):
    code, out, _ = run(capsys, "mediator", "table1", "--strategy", "interior", "--anchor", "1",
                       "--L", "4")
    plan = csv_tables(out)[0][0]
    assert code == 1 and plan["status"] == "no_improvement" and plan["r_star"] == "16"
    code, _, _ = run(capsys, "mediator", "table1", "--strategy", "interior", "--L", "4")
    assert code == 2


def test_mediator_non_sne_base(capsys, tmp_path, table1_doc):
    next(b for b in table1_doc["bids"] if b["id"] == 7)["bid"] = 13.5
    code, _, err = run(capsys, "mediator", write(tmp_path, table1_doc), "--L", "5")
    assert code == 1 and "not at SNE" in err


def test_bad_tolerance_env(capsys, monkeypatch):
    monkeypatch.setenv("ADLAB_TOL", "abc")
    code, _, _ = run(capsys, "verify-sne", "table1")
    assert code == 2


def test_input_file_untouched(capsys, tmp_path, table1_doc):
    path = write(tmp_path, table1_doc)
    before = open(path).read()
    for cmd in ("verify-sne", "min-sne", "revenue", "efficiency", "mediator"):
        run(capsys, cmd, path)
    assert open(path).read() == before


# --- reproduction -----------------------------------------------------------------

@pytest.mark.parametrize("target", reproduce.TARGETS)
def test_reproduce_targets(capsys, target):
    code, out, _ = run(capsys, "reproduce", "--target", target)
    rows = csv_tables(out)[0]
    assert code == 0 and rows and all(r["ok"] == "true" for r in rows)


def test_reproduce_unknown_target():
    with pytest.raises(ValueError):
        reproduce.run("table9")


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "adlab.cli", "reproduce", "--target", "table3"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and "7.28" in res.stdout
