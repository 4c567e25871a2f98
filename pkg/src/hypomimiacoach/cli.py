"""Operator command line: data synthesis, training, evaluation, detection,
session replay, report export, and serving.

Exit codes: 0 success, 1 validation/usage error, 2 runtime failure.
Machine-readable output goes to stdout; diagnostics to stderr.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .cohort import (
    CohortConfig,
    SplitRatios,
    load_cohort,
    save_cohort,
    smile_segment,
    split_by_subject,
    subject_features,
    synthesize_cohort,
    synthesize_au_labeled_samples,
)
from .errors import HypomimiaCoachError
from .exercises import load_exercise_catalog
from .frames import parse_au_frame_stream
from .metrics import Granularity, evaluate, metrics_csv
from .model import ModelConfig, classify_subject, load_model, save_model
from .session import canonical_report_json, replay_session_log
from .store import PatientStore
from .training import history_to_csv, pretrain_au_heads, train


def _info(message: str) -> None:
    click.echo(message, err=True)


@click.group()
def cli():
    """HypomimiaCoach operator tools."""


@cli.command("gen-data")
@click.option("--healthy", type=int, required=True, help="Healthy subject count.")
@click.option("--pd", "pd_count", type=int, required=True, help="Hypomimia subject count.")
@click.option("--frames", type=int, default=40, show_default=True, help="Frames per subject.")
@click.option("--attenuation", type=float, default=0.4, show_default=True)
@click.option("--noise", type=float, default=0.05, show_default=True)
@click.option("--feature-dim", type=int, default=32, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True, help="Cohort directory.")
def gen_data(healthy, pd_count, frames, attenuation, noise, feature_dim, seed, out):
    """Synthesize a labeled AU cohort into one directory per subject."""
    config = CohortConfig(
        n_healthy=healthy,
        n_hypomimia=pd_count,
        frames_per_subject=frames,
        attenuation=attenuation,
        noise_sigma=noise,
        seed=seed,
        feature_dim=feature_dim,
    )
    cohort = synthesize_cohort(config)
    save_cohort(out, cohort)
    _info(f"wrote {len(cohort)} subjects to {out}")


def _split_option(value: str) -> SplitRatios:
    parts = [float(v) for v in value.split(",")]
    if len(parts) != 3:
        raise click.BadParameter("expected three comma-separated fractions, e.g. 0.6,0.2,0.2")
    return SplitRatios(*parts)


def _load_split(cohort_dir: Path, split: str, split_seed: int, segment: str):
    cohort = load_cohort(cohort_dir)
    groups = split_by_subject(cohort, _split_option(split), split_seed)
    if segment == "smile":
        groups = tuple([smile_segment(s) for s in g] for g in groups)
    return groups


@cli.command("train")
@click.option("--cohort", "cohort_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True, help="Model file (.hcmd).")
@click.option("--split", default="0.6,0.2,0.2", show_default=True)
@click.option("--split-seed", type=int, default=0, show_default=True)
@click.option("--frames", "segment", type=click.Choice(["smile", "all"]), default="smile",
              show_default=True, help="Restrict detection frames to the smile segment.")
@click.option("--feature-dim", type=int, default=32, show_default=True)
@click.option("--au-feature-dim", type=int, default=16, show_default=True)
@click.option("--c1", type=int, default=16, show_default=True)
@click.option("--c2", type=int, default=8, show_default=True)
@click.option("--k", type=int, default=2, show_default=True)
@click.option("--lr", type=float, default=0.05, show_default=True)
@click.option("--momentum", type=float, default=0.9, show_default=True)
@click.option("--epochs", type=int, default=50, show_default=True)
@click.option("--batch", type=int, default=32, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--static-graph", is_flag=True, help="Freeze one graph from train-set mean features.")
@click.option("--pretrain", is_flag=True, help="Pretrain AU heads on synthetic AU-labeled data first.")
@click.option("--pretrain-samples", type=int, default=512, show_default=True)
@click.option("--history", "history_path", type=click.Path(path_type=Path), default=None,
              help="Write per-epoch CSV here.")
def train_cmd(cohort_dir, out, split, split_seed, segment, feature_dim, au_feature_dim, c1, c2,
              k, lr, momentum, epochs, batch, seed, static_graph, pretrain, pretrain_samples,
              history_path):
    """Train the hypomimia detector on a cohort directory."""
    train_subjects, val_subjects, _ = _load_split(cohort_dir, split, split_seed, segment)
    config = ModelConfig(
        feature_dim=feature_dim, au_feature_dim=au_feature_dim, conv1_channels=c1,
        conv2_channels=c2, k=k, lr=lr, momentum=momentum, epochs=epochs, batch_size=batch,
        seed=seed, static_graph=static_graph,
    )
    heads = None
    if pretrain:
        _info(f"pretraining AU heads on {pretrain_samples} synthetic samples")
        samples = synthesize_au_labeled_samples(pretrain_samples, feature_dim, seed)
        heads = pretrain_au_heads(samples, config).heads
    model, history = train(train_subjects, val_subjects, config, pretrained_heads=heads)
    save_model(model, out)
    if history_path is not None:
        Path(history_path).write_text(history_to_csv(history))
    best = max(history, key=lambda h: h.val_accuracy)
    _info(f"saved {out}; best val accuracy {best.val_accuracy:.4f} at epoch {best.epoch}")


@cli.command("eval")
@click.option("--model", "model_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--cohort", "cohort_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--granularity", type=click.Choice(["frame", "subject"]), default="frame", show_default=True)
@click.option("--split", default="0.6,0.2,0.2", show_default=True)
@click.option("--split-seed", type=int, default=0, show_default=True)
@click.option("--frames", "segment", type=click.Choice(["smile", "all"]), default="smile", show_default=True)
@click.option("--subset", type=click.Choice(["test", "val", "train", "all"]), default="test",
              show_default=True, help="Which split subset to evaluate.")
def eval_cmd(model_path, cohort_dir, granularity, split, split_seed, segment, subset):
    """Evaluate a model; prints accuracy,ppv,tpr,f1 CSV to stdout."""
    model = load_model(model_path)
    if subset == "all":
        subjects = load_cohort(cohort_dir)
        if segment == "smile":
            subjects = [smile_segment(s) for s in subjects]
    else:
        groups = _load_split(cohort_dir, split, split_seed, segment)
        subjects = dict(zip(("train", "val", "test"), groups))[subset]
    metrics = evaluate(model, subjects, Granularity(granularity))
    click.echo(metrics_csv(metrics), nl=False)
    _info(f"confusion tp={metrics.confusion.tp} fp={metrics.confusion.fp} "
          f"fn={metrics.confusion.fn} tn={metrics.confusion.tn}")


@cli.command("detect")
@click.option("--model", "model_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--frames", "frames_path", type=click.Path(exists=True, path_type=Path), default=None,
              help="AU frame JSONL file.")
@click.option("--subject", "subject_dir", type=click.Path(exists=True, path_type=Path), default=None,
              help="Cohort subject directory (frames.jsonl + optional features.bin).")
def detect_cmd(model_path, frames_path, subject_dir):
    """Classify one subject; prints {label, probability} JSON to stdout."""
    model = load_model(model_path)
    if (frames_path is None) == (subject_dir is None):
        raise click.UsageError("provide exactly one of --frames or --subject")
    if frames_path is not None:
        from .cohort import embed_frames

        frames = parse_au_frame_stream(Path(frames_path).read_bytes())
        features = embed_frames(frames, model.config.feature_dim)
    else:
        from .cohort import LabeledSubject, Label

        sdir = Path(subject_dir)
        frames = parse_au_frame_stream((sdir / "frames.jsonl").read_bytes())
        subject = LabeledSubject(sdir.name, Label.HEALTHY, frames)  # label ignored
        if (sdir / "features.bin").exists():
            from .cohort import read_features_bin

            subject.feature_vectors = read_features_bin(sdir / "features.bin")
        features = subject_features(subject, model.config.feature_dim)
    label, probability = classify_subject(model, features)
    click.echo(json.dumps({"label": label.value, "probability": probability}, sort_keys=True))


@cli.command("replay-session")
@click.option("--log", "log_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True, help="Report JSON output.")
@click.option("--events-out", type=click.Path(path_type=Path), default=None,
              help="Also write the emitted feedback events as JSON.")
@click.option("--catalog", "catalog_path", type=click.Path(exists=True, path_type=Path), default=None)
def replay_session_cmd(log_path, out, events_out, catalog_path):
    """Replay a session event log into its report (byte-deterministic)."""
    catalog = load_exercise_catalog(catalog_path)
    report, events = replay_session_log(Path(log_path).read_bytes(), catalog)
    Path(out).write_bytes(canonical_report_json(report))
    if events_out is not None:
        payload = json.dumps([e.to_record() for e in events], sort_keys=True, separators=(",", ":"))
        Path(events_out).write_text(payload + "\n")
    _info(f"replayed {log_path} -> overall score {report.overall_score}")


@cli.command("report")
@click.option("--patient", "patient_id", required=True)
@click.option("--data-dir", type=click.Path(path_type=Path), default=None,
              help="Store root (defaults to HC_DATA_DIR or ./data).")
@click.option("--aggregate", "aggregate_only", is_flag=True, help="Print the physician aggregate instead.")
def report_cmd(patient_id, data_dir, aggregate_only):
    """Export a patient's session history (or per-region aggregate) as JSON."""
    store = PatientStore(data_dir)
    if aggregate_only:
        aggregate = store.physician_aggregate(patient_id)
        payload = {"patient_id": patient_id,
                   "regions": {region: agg.to_dict() for region, agg in aggregate.items()}}
    else:
        history = store.patient_history(patient_id)
        payload = {"patient_id": patient_id, "sessions": [r.to_dict() for r in history]}
    click.echo(json.dumps(payload, sort_keys=True))


@cli.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8200, show_default=True)
@click.option("--model", "model_path", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--data-dir", type=click.Path(path_type=Path), default=None)
@click.option("--token", default=None, help="Require X-API-Token on every request.")
def serve_cmd(host, port, model_path, data_dir, token):
    """Run the HTTP session service."""
    import uvicorn

    from .service import create_app

    store = PatientStore(data_dir)
    app = create_app(store=store, model=model_path, api_token=token)
    uvicorn.run(app, host=host, port=port, log_level="warning")


def run(argv: list[str] | None = None) -> int:
    """Dispatch argv and return the exit code (0/1/2)."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except (HypomimiaCoachError, ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


def main() -> None:
    sys.exit(run())
