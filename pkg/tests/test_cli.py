import json

import pytest
from click.testing import CliRunner

from reebkit.cli import main

T3 = """\
name: tmp-t3
description: contact form on the torus
model: t3-contact
tasks:
  - {id: contact, task: is_contact, form: alpha}
  - {id: wrong, task: is_contact, form: alpha, expect: fail}
"""


@pytest.fixture
def runner():
    return CliRunner()  # click >= 8.2 keeps stderr separate


def _records(out):
    return [json.loads(line) for line in out.splitlines() if line.strip()]


def test_list(runner):
    res = runner.invoke(main, ["list"])
    assert res.exit_code == 0
    for name in ("carriere-suite", "geodesible-demo", "t3-contact-control", "contactize-local",
                 "carriere", "trivial-open-book", "t3-contact"):
        assert name in res.stdout
    scen = [l.split()[0] for l in res.stdout.split("models:")[0].splitlines()[1:] if l.strip()]
    assert scen == sorted(scen)


def test_run_builtin_records(runner):
    res = runner.invoke(main, ["run", "t3-contact-control", "--grid", "10"])
    assert res.exit_code == 0, res.output
    recs = _records(res.stdout)
    assert [r["task"] for r in recs] == ["contact", "descends", "reeb", "alpha-is-connection", "not-basically-exact"]
    assert all(r["ok"] for r in recs)
    assert recs[-1]["expect"] == "fail" and recs[-1]["verdict"] == "fail"


def test_run_deterministic(runner):
    a = runner.invoke(main, ["run", "t3-contact-control", "--grid", "8"]).stdout
    b = runner.invoke(main, ["run", "t3-contact-control", "--grid", "8"]).stdout
    assert a == b


def test_run_pretty(runner):
    res = runner.invoke(main, ["run", "t3-contact-control", "--grid", "8", "--pretty"])
    assert res.exit_code == 0
    assert res.stdout.startswith("t3-contact-control:")
    assert "verdict" in res.stdout and "FAILED" not in res.stdout


def test_run_file_with_failure(runner, tmp_path):
    p = tmp_path / "t.scn"
    p.write_text(T3)
    res = runner.invoke(main, ["run", str(p), "--grid", "8"])
    assert res.exit_code == 1
    recs = _records(res.stdout)
    assert [r["ok"] for r in recs] == [True, False]
    assert "task wrong (line 6)" in res.stderr


def test_run_missing_file(runner, tmp_path):
    res = runner.invoke(main, ["run", str(tmp_path / "nope.scn")])
    assert res.exit_code == 2
    assert "error" in res.stderr


def test_run_unknown_task_reports_line(runner, tmp_path):
    p = tmp_path / "bad.scn"
    p.write_text(T3.replace("task: is_contact, form: alpha, expect", "task: is_contactt, form: alpha, expect"))
    res = runner.invoke(main, ["run", str(p)])
    assert res.exit_code == 2
    assert f"{p}:6:" in res.stderr and "is_contactt" in res.stderr


def test_run_bad_yaml(runner, tmp_path):
    p = tmp_path / "bad.scn"
    p.write_text("name: [unclosed\n")
    assert runner.invoke(main, ["run", str(p)]).exit_code == 2


def test_tol_override(runner):
    res = runner.invoke(main, ["run", "t3-contact-control", "--grid", "8", "--tol", "1e-3"])
    assert res.exit_code == 0


@pytest.mark.parametrize("name", ["carriere-suite", "geodesible-demo", "contactize-local"])
def test_builtin_scenarios_pass(runner, name):
    res = runner.invoke(main, ["run", name, "--grid", "10"])
    assert res.exit_code == 0, res.stderr
