import json
from pathlib import Path

import pytest

from hypomimiacoach.cli import run
from make_goldens import TOY_EVAL_ARGS, TOY_GEN_ARGS, TOY_TRAIN_ARGS

DATA = Path(__file__).parent / "data"


def run_capture(capsys, argv):
    code = run(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_unknown_subcommand_exits_1(capsys):
    code, out, err = run_capture(capsys, ["frobnicate"])
    assert code == 1
    assert "Usage" in err or "No such command" in err


def test_gen_data_writes_105_subject_directories(tmp_path, capsys):
    code, _, _ = run_capture(
        capsys,
        ["gen-data", "--healthy", "55", "--pd", "50", "--frames", "8", "--seed", "7",
         "--out", str(tmp_path / "cohort")],
    )
    assert code == 0
    subject_dirs = [p for p in (tmp_path / "cohort").iterdir() if p.is_dir()]
    assert len(subject_dirs) == 105
    labels = [(p / "label.txt").read_text().strip() for p in subject_dirs]
    assert labels.count("healthy") == 55
    assert labels.count("hypomimia") == 50
    sample = subject_dirs[0]
    assert (sample / "frames.jsonl").exists() and (sample / "features.bin").exists()


def test_gen_data_validation_error_exits_2(tmp_path, capsys):
    code, _, err = run_capture(
        capsys,
        ["gen-data", "--healthy", "0", "--pd", "1", "--out", str(tmp_path / "c")],
    )
    assert code == 2
    assert "error" in err.lower()


def test_toy_train_eval_reproduces_golden(tmp_path, capsys):
    code, _, _ = run_capture(capsys, TOY_GEN_ARGS + ["--out", str(tmp_path / "cohort")])
    assert code == 0
    code, _, err = run_capture(
        capsys,
        TOY_TRAIN_ARGS + ["--cohort", str(tmp_path / "cohort"), "--out", str(tmp_path / "toy.hcmd"),
                          "--history", str(tmp_path / "history.csv")],
    )
    assert code == 0, err
    history = (tmp_path / "history.csv").read_text().strip().split("\n")
    assert history[0] == "epoch,train_loss,val_loss,val_accuracy"
    assert len(history) == 13

    code, out, _ = run_capture(
        capsys,
        ["eval", "--model", str(tmp_path / "toy.hcmd"), "--cohort", str(tmp_path / "cohort")]
        + TOY_EVAL_ARGS,
    )
    assert code == 0
    assert out.encode() == (DATA / "toy_eval_golden.csv").read_bytes()


def test_eval_csv_shape(tmp_path, capsys):
    run_capture(capsys, TOY_GEN_ARGS + ["--out", str(tmp_path / "cohort")])
    run_capture(capsys, TOY_TRAIN_ARGS + ["--cohort", str(tmp_path / "cohort"),
                                          "--out", str(tmp_path / "m.hcmd")])
    code, out, _ = run_capture(
        capsys,
        ["eval", "--model", str(tmp_path / "m.hcmd"), "--cohort", str(tmp_path / "cohort"),
         "--granularity", "subject", "--split-seed", "5"],
    )
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0] == "accuracy,ppv,tpr,f1"
    assert len(lines[1].split(",")) == 4


def test_detect_subject_directory(tmp_path, capsys):
    run_capture(capsys, TOY_GEN_ARGS + ["--out", str(tmp_path / "cohort")])
    run_capture(capsys, TOY_TRAIN_ARGS + ["--cohort", str(tmp_path / "cohort"),
                                          "--out", str(tmp_path / "m.hcmd")])
    healthy_dir = tmp_path / "cohort" / "h000"
    code, out, _ = run_capture(
        capsys,
        ["detect", "--model", str(tmp_path / "m.hcmd"), "--subject", str(healthy_dir)],
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["label"] in ("healthy", "hypomimia")
    assert 0.0 <= payload["probability"] <= 1.0

    code, out2, _ = run_capture(
        capsys,
        ["detect", "--model", str(tmp_path / "m.hcmd"),
         "--frames", str(healthy_dir / "frames.jsonl")],
    )
    assert code == 0
    assert json.loads(out2)["label"] in ("healthy", "hypomimia")

    code, _, _ = run_capture(capsys, ["detect", "--model", str(tmp_path / "m.hcmd")])
    assert code == 1  # needs exactly one input source


def test_replay_session_golden_bytes(tmp_path, capsys):
    out1 = tmp_path / "report1.json"
    out2 = tmp_path / "report2.json"
    for out in (out1, out2):
        code, _, _ = run_capture(
            capsys,
            ["replay-session", "--log", str(DATA / "golden_session.jsonl"), "--out", str(out)],
        )
        assert code == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert out1.read_bytes() == (DATA / "golden_report.json").read_bytes()
    report = json.loads(out1.read_text())
    assert report["overall_score"] == 63


def test_replay_session_events_out(tmp_path, capsys):
    events_path = tmp_path / "events.json"
    code, _, _ = run_capture(
        capsys,
        ["replay-session", "--log", str(DATA / "golden_session.jsonl"),
         "--out", str(tmp_path / "r.json"), "--events-out", str(events_path)],
    )
    assert code == 0
    events = json.loads(events_path.read_text())
    assert events == json.loads((DATA / "golden_events.json").read_text())
    kinds = {e["kind"] for e in events}
    assert {"baseline_started", "rep_completed", "session_completed"} <= kinds


def test_report_command(tmp_path, capsys, monkeypatch):
    from hypomimiacoach.store import PatientStore
    from test_store import make_report

    store = PatientStore(tmp_path / "data")
    pid = store.create_patient("cli-patient")
    store.store_session(make_report("s1", pid, "2026-08-01T00:00:00Z", {"lip": 0.8}))
    store.store_session(make_report("s2", pid, "2026-08-02T00:00:00Z", {"lip": 0.6}))

    code, out, _ = run_capture(capsys, ["report", "--patient", pid, "--data-dir", str(tmp_path / "data")])
    assert code == 0
    payload = json.loads(out)
    assert [s["session_id"] for s in payload["sessions"]] == ["s1", "s2"]

    code, out, _ = run_capture(
        capsys, ["report", "--patient", pid, "--data-dir", str(tmp_path / "data"), "--aggregate"]
    )
    assert code == 0
    agg = json.loads(out)
    assert agg["regions"]["lip"]["mean_achievement"] == pytest.approx(0.7)

    code, _, _ = run_capture(capsys, ["report", "--patient", "ghost", "--data-dir", str(tmp_path / "data")])
    assert code == 2
