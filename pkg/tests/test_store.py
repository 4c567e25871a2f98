import json

import pytest

from hypomimiacoach import store as store_mod
from hypomimiacoach.errors import DuplicateSession, NoSessions, UnknownPatient, UnknownSession
from hypomimiacoach.session import Mode, RepScore, SessionReport, canonical_report_json
from hypomimiacoach.store import PatientStore


def make_report(session_id, patient_id, started_at, region_means, overall=80):
    return SessionReport(
        session_id=session_id,
        patient_id=patient_id,
        mode=Mode.BASIC,
        started_at=started_at,
        overall_score=overall,
        no_activity=False,
        completed=True,
        rep_scores=(RepScore("smile_and_grin", "lip", 1, overall / 100.0, False),),
        segment_scores=(),
        region_means=region_means,
        feedback_event_counts={"come_on": 1, "good": 2, "perfect": 3},
    )


@pytest.fixture
def store(tmp_path):
    return PatientStore(tmp_path / "data")


def test_store_and_load_round_trip(store):
    pid = store.create_patient("alias-1")
    report = make_report("s1", pid, "2026-08-01T10:00:00.000Z", {"lip": 0.8})
    assert store.store_session(report) == "s1"
    loaded = store.load_session(pid, "s1")
    assert loaded == report
    assert canonical_report_json(loaded) == canonical_report_json(report)


def test_duplicate_session_rejected(store):
    pid = store.create_patient("alias-1")
    report = make_report("dup", pid, "2026-08-01T10:00:00.000Z", {"lip": 0.8})
    store.store_session(report)
    with pytest.raises(DuplicateSession):
        store.store_session(report)


def test_interrupted_write_leaves_old_state(store, monkeypatch):
    pid = store.create_patient("alias-1")
    first = make_report("ok", pid, "2026-08-01T10:00:00.000Z", {"lip": 0.8})
    store.store_session(first)

    calls = {"n": 0}
    real_rename = store_mod._rename

    def failing_rename(src, dst):
        calls["n"] += 1
        if calls["n"] == 1:  # die on the session-file rename
            raise OSError("simulated crash")
        return real_rename(src, dst)

    monkeypatch.setattr(store_mod, "_rename", failing_rename)
    crashing = make_report("crash", pid, "2026-08-02T10:00:00.000Z", {"lip": 0.5})
    with pytest.raises(OSError):
        store.store_session(crashing)
    monkeypatch.setattr(store_mod, "_rename", real_rename)

    # old state visible; no partial report in the history
    history = store.patient_history(pid)
    assert [r.session_id for r in history] == ["ok"]
    # retry succeeds cleanly
    store.store_session(crashing)
    assert [r.session_id for r in store.patient_history(pid)] == ["ok", "crash"]


def test_interrupt_between_file_and_index_is_invisible_then_retryable(store, monkeypatch):
    pid = store.create_patient("alias-1")
    calls = {"n": 0}
    real_rename = store_mod._rename

    def failing_rename(src, dst):
        calls["n"] += 1
        if calls["n"] == 2:  # session file landed, index append dies
            raise OSError("simulated crash")
        return real_rename(src, dst)

    monkeypatch.setattr(store_mod, "_rename", failing_rename)
    report = make_report("half", pid, "2026-08-02T10:00:00.000Z", {"lip": 0.5})
    with pytest.raises(OSError):
        store.store_session(report)
    monkeypatch.setattr(store_mod, "_rename", real_rename)

    assert store.patient_history(pid) == []
    assert store.find_session("half") is None
    store.store_session(report)  # retry commits
    assert [r.session_id for r in store.patient_history(pid)] == ["half"]


def test_history_ordering_and_errors(store):
    pid = store.create_patient("alias-1")
    assert store.patient_history(pid) == []
    for sid, at in (("b", "2026-08-02T10:00:00.000Z"), ("a", "2026-08-01T10:00:00.000Z"),
                    ("c", "2026-08-03T10:00:00.000Z")):
        store.store_session(make_report(sid, pid, at, {"lip": 0.5}))
    assert [r.session_id for r in store.patient_history(pid)] == ["a", "b", "c"]
    with pytest.raises(UnknownPatient):
        store.patient_history("nope")
    with pytest.raises(UnknownSession):
        store.load_session(pid, "zzz")


def test_physician_aggregate_means_and_trend(store):
    pid = store.create_patient("alias-1")
    store.store_session(make_report("s1", pid, "2026-08-01T00:00:00Z", {"lip": 0.8}))
    store.store_session(make_report("s2", pid, "2026-08-02T00:00:00Z", {"lip": 0.6}))
    agg = store.physician_aggregate(pid)
    assert agg["lip"].mean_achievement == pytest.approx(0.7)
    assert agg["lip"].session_count == 2
    assert agg["lip"].trend == pytest.approx(-0.2)


def test_trend_examples(store):
    pid = store.create_patient("alias-1")
    for i, value in enumerate((0.2, 0.4, 0.6)):
        store.store_session(
            make_report(f"s{i}", pid, f"2026-08-0{i + 1}T00:00:00Z", {"eyebrow": value})
        )
    agg = store.physician_aggregate(pid)
    assert agg["eyebrow"].trend == pytest.approx(0.2)


def test_single_session_trend_zero(store):
    pid = store.create_patient("alias-1")
    store.store_session(make_report("s1", pid, "2026-08-01T00:00:00Z", {"lip": 0.8}))
    agg = store.physician_aggregate(pid)
    assert agg["lip"].trend == 0.0


def test_aggregate_requires_sessions(store):
    pid = store.create_patient("alias-1")
    with pytest.raises(NoSessions):
        store.physician_aggregate(pid)
    with pytest.raises(UnknownPatient):
        store.physician_aggregate("ghost")


def test_aggregate_is_pure_function_of_reports(store):
    # recompute-from-scratch equals incremental values
    pid = store.create_patient("alias-1")
    values = [0.3, 0.9, 0.5, 0.7]
    for i, v in enumerate(values):
        store.store_session(make_report(f"s{i}", pid, f"2026-08-0{i + 1}T00:00:00Z", {"lip": v}))
    agg1 = store.physician_aggregate(pid)
    agg2 = PatientStore(store.root).physician_aggregate(pid)
    assert agg1 == agg2
    assert agg1["lip"].mean_achievement == pytest.approx(sum(values) / 4)


def test_purge_requires_audit_trail(store):
    pid = store.create_patient("alias-1")
    store.store_session(make_report("s1", pid, "2026-08-01T00:00:00Z", {"lip": 0.8}))
    store.purge_session(pid, "s1", reason="patient data removal request")
    assert store.patient_history(pid) == []
    audit_lines = (store.patients_dir / pid / "audit.jsonl").read_text().strip().split("\n")
    entry = json.loads(audit_lines[0])
    assert entry["action"] == "purge" and entry["session_id"] == "s1"
    with pytest.raises(UnknownSession):
        store.purge_session(pid, "s1", reason="again")


def test_env_var_overrides_root(tmp_path, monkeypatch):
    monkeypatch.setenv("HC_DATA_DIR", str(tmp_path / "envroot"))
    store = PatientStore()
    assert store.root == tmp_path / "envroot"
    pid = store.create_patient("x")
    assert (tmp_path / "envroot" / "patients" / pid / "index.json").exists()


def test_find_session_scans_patients(store):
    p1 = store.create_patient("a")
    p2 = store.create_patient("b")
    store.store_session(make_report("s-find", p2, "2026-08-01T00:00:00Z", {"lip": 0.5}))
    found = store.find_session("s-find")
    assert found is not None and found.patient_id == p2
    assert store.find_session("missing") is None
