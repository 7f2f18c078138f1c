import json
import subprocess
import sys
from pathlib import Path

import pytest

from sarv.cli import main

DEMOS = Path(__file__).resolve().parent.parent / "demos"


def run(capsys, *argv):
    code = main(list(argv))
    out = json.loads(capsys.readouterr().out)
    return code, out


def test_scenario_subprocess():
    proc = subprocess.run(
        [sys.executable, "-m", "sarv.cli", "scenario", "run", str(DEMOS / "battery_swap_scenario.json")],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0, proc.stderr
    report = json.loads(proc.stdout)
    assert report["ok"] and report["audit"] == []
    assert report["forest"]["K"]["root"] == "R2"


def test_failing_expectation_sets_exit_code(tmp_path, capsys):
    scenario = {
        "accounts": ["u", "v"],
        "steps": [
            {"op": "create-node", "name": "A", "owner": "u", "canAuthorizeChildren": True},
            {"op": "create-node", "name": "B", "owner": "v"},
            # different holders: the bond must be refused
            {"op": "make-bond", "node": "B", "from": "B", "to": "A", "expect": True},
        ],
    }
    path = tmp_path / "s.json"
    path.write_text(json.dumps(scenario))
    code, report = run(capsys, "scenario", "run", str(path))
    assert code == 1 and report["ok"] is False
    assert report["steps"][-1]["result"] is False


def test_permissive_scenario_shows_the_cycle(tmp_path, capsys):
    scenario = {
        "strict": False,
        "accounts": ["u"],
        "steps": [
            {"op": "create-node", "name": n, "owner": "u", "canAuthorizeChildren": True} for n in "ABC"
        ] + [
            {"op": "make-bond", "node": "B", "from": "B", "to": "A", "expect": True},
            {"op": "make-bond", "node": "C", "from": "C", "to": "B", "expect": True},
            {"op": "make-bond", "node": "A", "from": "A", "to": "C", "expect": True},
        ],
    }
    path = tmp_path / "s.json"
    path.write_text(json.dumps(scenario))
    code, report = run(capsys, "scenario", "run", str(path))
    assert code == 0
    assert [v["code"] for v in report["audit"]] == ["CYCLE"]

    code, report = run(capsys, "--strict", "scenario", "run", str(path))
    assert code == 1
    assert report["steps"][-1]["error"] == "PreflightRejected"
    assert report["audit"] == []


def test_persistent_ledger_workflow(tmp_path, capsys):
    ledger = str(tmp_path / "forest.jsonl")
    code, key = run(capsys, "--ledger", ledger, "issue-key", "--organization", "acme")
    assert code == 0
    base = ["--ledger", ledger, "--api-key", key["keyId"]]
    for name in ("alice", "bob"):
        assert run(capsys, *base, "create-account", "--name", name)[0] == 0
    assert run(capsys, *base, "create-node", "--owner", "alice", "--name", "R", "--can-authorize-children")[0] == 0
    assert run(capsys, *base, "create-node", "--owner", "alice", "--name", "P",
               "--metadata", '{"part": "cell"}')[0] == 0
    code, out = run(capsys, *base, "make-bond", "--node", "P", "--from", "P", "--to", "R")
    assert code == 0 and out["result"] is True

    code, out = run(capsys, *base, "query-tree", "--root", "R")
    assert [c["metadata"] for c in out["tree"]["children"]] == [{"part": "cell"}]

    code, out = run(capsys, *base, "delegate", "--node", "P", "--to", "bob")
    assert code == 0 and out["result"] is False  # root may not delegate by default

    assert run(capsys, *base, "set-metadata", "--node", "P", "--key", "grade", "--value", "2")[1]["result"]
    assert run(capsys, *base, "set-authorization", "--node", "P", "--value", "true")[1]["result"]
    code, out = run(capsys, *base, "break-bond", "--node", "P")
    assert out["result"] is True
    code, out = run(capsys, *base, "transfer", "--node", "P", "--to", "bob")
    assert out["result"] is True
    code, out = run(capsys, *base, "claim-back", "--node", "P")
    assert code == 0

    code, out = run(capsys, *base, "query-passport", "--node", "P")
    passport = out["passport"]
    assert passport["currentHolder"] == passport["beneficialOwner"]
    assert [h["kind"] for h in passport["holderHistory"]] == ["mint", "sale", "claimBack"]
    assert run(capsys, *base, "audit")[1] == {"violations": []}

    code, usage = run(capsys, "--ledger", ledger, "usage-report", "--organization", "acme")
    assert usage["usage"][key["keyId"]] > 0

    lines = Path(ledger).read_text().splitlines()
    assert [json.loads(line)["seq"] for line in lines] == list(range(len(lines)))


def test_errors_exit_nonzero(tmp_path, capsys):
    ledger = str(tmp_path / "l.jsonl")
    code, out = run(capsys, "--ledger", ledger, "--api-key", "missing", "audit")
    assert code == 1 and out["error"] == "AuthenticationError"
    with pytest.raises(SystemExit):
        main(["make-bond", "--node", "x"])
