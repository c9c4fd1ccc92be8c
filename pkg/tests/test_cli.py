import contextlib
import io
import json
import subprocess
import sys

import pytest

from entigraph import cli
from entigraph.corpus import write_corpus
from entigraph.fixtures import consult_corpus, table4_scenario


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = cli.main(argv)
    return code, [json.loads(l) for l in out.getvalue().splitlines()], err.getvalue()


@pytest.fixture
def files(tmp_path):
    corpus = tmp_path / "corpus.jsonl"
    write_corpus(consult_corpus(), corpus)
    kg, rk = tmp_path / "kg.json", tmp_path / "rk.json"
    assert run(["build-kg", str(corpus), "--out", str(kg)])[0] == 0
    assert run(["build-rk", str(corpus), "--k", "2", "--out", str(rk)])[0] == 0
    sc = table4_scenario()
    scen = tmp_path / "scenarios.jsonl"
    scen.write_text(sc.to_json() + "\n")
    dlg = tmp_path / "dialogues.jsonl"
    write_corpus([sc.dialogue], dlg)
    return {"tmp": tmp_path, "corpus": corpus, "kg": kg, "rk": rk, "scen": scen, "dlg": dlg}


def test_detect_then_clarify(files):
    events = files["tmp"] / "events.jsonl"
    code, _, _ = run(["detect", str(files["dlg"]), "--kg", str(files["kg"]), "--events", str(events)])
    assert code == 0
    [ev] = [json.loads(l) for l in events.read_text().splitlines()]
    assert (ev["kind"], ev["subject"], ev["turn"]) == ("isolated", "pneumonia", 4)
    code, [plan], _ = run(["clarify", "--kg", str(files["kg"]), "--rk", str(files["rk"]), "--events", str(events)])
    assert code == 0 and plan["question"] == "Do you have a cough?"
    tpl = files["tmp"] / "templates.json"
    tpl.write_text(json.dumps({"isolated": "Any {bridge}?"}))
    code, [plan], _ = run(["clarify", "--kg", str(files["kg"]), "--rk", str(files["rk"]), "--events", str(events),
                           "--templates", str(tpl)])
    assert plan["question"] == "Any cough?"


def test_predict_one_record_per_turn(files):
    code, recs, _ = run(["predict", str(files["dlg"]), "--kg", str(files["kg"]), "--top-k", "2"])
    assert code == 0 and len(recs) == 5
    # turn 0 already names bloating and acid reflux; cough is the next hop
    assert recs[0]["predicted"][0][0] == "cough"
    assert all(len(r["predicted"]) <= 2 for r in recs)


def test_simulate_with_and_without_mitigation(files):
    base = ["simulate", "--kg", str(files["kg"]), "--rk", str(files["rk"]), "--scenarios", str(files["scen"])]
    code, recs, _ = run(base + ["--transcripts"])
    assert code == 0 and recs[0]["success"] and recs[-1]["success_rate"] == 1.0
    assert any(t["text"] == "Do you have a cough?" for t in recs[0]["transcript"])
    code, recs, _ = run(base + ["--no-mitigation"])
    assert recs[-1]["success_rate"] == 0.0 and "transcript" not in recs[0]


def test_eval_prf(tmp_path):
    pred, gold = tmp_path / "p.jsonl", tmp_path / "g.jsonl"
    pred.write_text('{"entities": [{"label": "a", "class": "symptom"}, "b", "c"]}\n')
    gold.write_text('["b", "c", "d"]\n')
    code, [rec], _ = run(["eval", "prf", "--pred", str(pred), "--gold", str(gold)])
    assert code == 0 and rec["overall"]["f1"] == pytest.approx(2 / 3)
    gold.write_text('["b"]\n["c"]\n')
    assert run(["eval", "prf", "--pred", str(pred), "--gold", str(gold)])[0] == 2


def test_verify_bounds_reports(tmp_path):
    code, recs, _ = run(["verify-bounds", "--n-max", "4", "--rows"])
    assert code == 0
    rows, summary = recs[:-1], recs[-1]
    assert len(rows) == summary["sequences"] and all(r["pass"] for r in rows)
    assert summary["violations"] == 0


def test_validation_failures_exit_2(tmp_path, files):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"dialogue_id": "x", "turns": []}\n')
    code, _, err = run(["build-kg", str(bad), "--out", str(tmp_path / "kg2.json")])
    assert code == 2 and "empty turn list" in err
    assert run(["detect", str(tmp_path / "missing.jsonl"), "--kg", str(files["kg"])])[0] == 2
    broken = tmp_path / "broken.json"
    broken.write_bytes(files["kg"].read_bytes()[:50])
    assert run(["detect", str(files["dlg"]), "--kg", str(broken)])[0] == 2
    assert run(["simulate", "--kg", str(files["kg"]), "--rk", str(files["rk"]), "--scenarios", str(files["scen"]),
                "--max-turns", "0"])[0] == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "entigraph", "verify-bounds", "--n-max", "3"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout.splitlines()[-1])["violations"] == 0
