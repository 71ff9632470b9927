"""Operator command line: simulate, compress, ingest, label, analyze,
train, predict, verify-ledger, serve, report.

Exit codes are a stable contract: 0 success, 1 verification or validation
failure, 2 usage error, 3 I/O or transport failure. Every failure prints a
single machine-parsable line `error: <category>: <message>` on stderr, and
every artifact-writing command emits one RunManifest JSON next to its
primary output.
"""

from __future__ import annotations

import json
import secrets
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import click

from . import analysis, dsp, labeling, simkit
from .config import Config, load_config, load_registry
from .errors import (FaultSpecError, IndeterminateDirectionError,
                     InsufficientDataError, LedgerFormatError, ParameterError,
                     PermissionDeniedError, RailmonError, SizeError,
                     TransportError, UnknownAuthorError, UnknownReferenceError,
                     ValidationError)
from .ledger import Ledger, verify_log_file
from .principals import SERVICE_AUTHOR

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_USAGE = 2
EXIT_IO = 3


class VerificationFailure(RailmonError):
    """Raised when a verify-style command finds a bad chain."""


def _now_us() -> int:
    return time.time_ns() // 1000


def write_manifest(command: str, args: dict, seed: Optional[int],
                   outputs: list, primary_output: str) -> str:
    manifest = {"command": command, "args": args, "seed": seed,
                "started_at": _now_us(), "outputs": outputs}
    path = primary_output + ".manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _open_store(ledger_path: str, principals_path: str) -> Ledger:
    registry = load_registry(principals_path)
    return Ledger(ledger_path, registry.keyring())


def _fault_from_flags(fault: Optional[str], severity: float,
                      wheel_circumference: Optional[float],
                      position: Optional[float]) -> Optional[simkit.FaultSpec]:
    if fault is None or fault == "none":
        return None
    return simkit.FaultSpec(kind=simkit.FaultKind(fault), severity=severity,
                            wheel_circumference=wheel_circumference,
                            position=position)


@click.group()
def cli():
    """Structure-borne-noise monitoring pipeline tools."""


# -- simulate -----------------------------------------------------------------


@cli.group()
def simulate():
    """Generate synthetic sensor data with known ground truth."""


@simulate.command("ride")
@click.option("--out", required=True, help="raw archive output path")
@click.option("--truth", default=None,
              help="ground-truth JSON path (default: <out>.truth.json)")
@click.option("--route-length", type=float, default=1000.0, show_default=True)
@click.option("--speed", type=float, default=20.0, show_default=True)
@click.option("--sample-rate", type=int, default=8192, show_default=True)
@click.option("--segment-duration", type=float, default=1.0, show_default=True)
@click.option("--sensor-id", default="V1:ub1", show_default=True)
@click.option("--start-timestamp", type=int, default=simkit.DEFAULT_EPOCH_US)
@click.option("--fault", type=click.Choice(["none", "flat_spot", "rail_bump"]),
              default="none", show_default=True)
@click.option("--severity", type=float, default=0.0)
@click.option("--wheel-circumference", type=float, default=None)
@click.option("--position", type=float, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
def simulate_ride(out, truth, route_length, speed, sample_rate,
                  segment_duration, sensor_id, start_timestamp, fault,
                  severity, wheel_circumference, position, seed):
    """Simulate one ride and write a raw archive plus ground truth."""
    spec = _fault_from_flags(fault, severity, wheel_circumference, position)
    faults = (spec,) if spec else ()
    segments = simkit.simulate_ride(route_length, speed, sample_rate,
                                    segment_duration, faults, seed,
                                    sensor_id=sensor_id,
                                    start_timestamp=start_timestamp)
    manifest = simkit.export_raw_archive(segments, out)
    vehicle = simkit.vehicle_of_sensor(sensor_id)
    end_ts = segments[-1].start_timestamp + int(round(
        segments[-1].duration_s * 1e6)) if segments else start_timestamp
    flat = spec is not None and spec.kind is simkit.FaultKind.FLAT_SPOT \
        and spec.severity > 0
    bump = spec is not None and spec.kind is simkit.FaultKind.RAIL_BUMP \
        and spec.severity > 0
    truth_doc = {
        "kind": "ride",
        "seed": seed,
        "sensor_id": sensor_id,
        "vehicle_id": vehicle,
        "sample_rate": sample_rate,
        "segments": len(segments),
        "time_start": start_timestamp,
        "time_end": end_ts,
        "fault": None if spec is None else {
            "kind": spec.kind.value, "severity": spec.severity,
            "wheel_circumference": spec.wheel_circumference,
            "position": spec.position},
        "event_kind": ("flat_spot_suspected" if flat
                       else "track_bump" if bump else "normal"),
        "archive_digest": manifest.digest,
    }
    truth_path = truth or out + ".truth.json"
    with open(truth_path, "w", encoding="utf-8") as fh:
        json.dump(truth_doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest("simulate ride",
                   {"out": out, "route_length": route_length, "speed": speed,
                    "sample_rate": sample_rate, "fault": fault,
                    "severity": severity, "sensor_id": sensor_id},
                   seed, [out, truth_path], out)
    click.echo(json.dumps({"archive": out, "truth": truth_path,
                           "segments": len(segments),
                           "digest": manifest.digest}))


@simulate.command("pass")
@click.option("--out", required=True, help="raw archive output path")
@click.option("--truth", default=None)
@click.option("--speed", type=float, default=10.0, show_default=True)
@click.option("--spacing", type=float, default=5.0, show_default=True,
              help="subunit spacing in meters")
@click.option("--direction", type=click.Choice(["a_to_b", "b_to_a"]),
              default="a_to_b", show_default=True)
@click.option("--sample-rate", type=int, default=8192, show_default=True)
@click.option("--noise-level", type=float, default=0.0, show_default=True)
@click.option("--fault", type=click.Choice(["none", "flat_spot"]),
              default="none", show_default=True)
@click.option("--severity", type=float, default=0.0)
@click.option("--wheel-circumference", type=float, default=None)
@click.option("--sensor-id", default="trk1", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def simulate_pass(out, truth, speed, spacing, direction, sample_rate,
                  noise_level, fault, severity, wheel_circumference,
                  sensor_id, seed):
    """Simulate one track pass over a two-subunit trackside sensor."""
    spec = _fault_from_flags(fault, severity, wheel_circumference, None)
    event = simkit.simulate_track_pass(
        speed, spacing, simkit.PassDirection(direction), spec, sample_rate,
        noise_level, seed, sensor_id=sensor_id)
    manifest = simkit.export_raw_archive(
        [event.subunit_a_waveform, event.subunit_b_waveform], out)
    truth_doc = {
        "kind": "pass", "seed": seed, "pass_id": event.pass_id,
        "sensor_id": sensor_id, "speed": speed, "spacing": spacing,
        "direction": direction, "sample_rate": sample_rate,
        "noise_level": noise_level, "archive_digest": manifest.digest,
    }
    truth_path = truth or out + ".truth.json"
    with open(truth_path, "w", encoding="utf-8") as fh:
        json.dump(truth_doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest("simulate pass",
                   {"out": out, "speed": speed, "spacing": spacing,
                    "direction": direction, "noise_level": noise_level},
                   seed, [out, truth_path], out)
    click.echo(json.dumps({"archive": out, "truth": truth_path,
                           "pass_id": event.pass_id,
                           "digest": manifest.digest}))


# -- compress ------------------------------------------------------------------


@cli.command("compress")
@click.option("--archive", required=True, help="raw archive input")
@click.option("--out", required=True, help="spectral frames JSON-lines output")
@click.option("--window", type=int, default=dsp.DEFAULT_WINDOW_LEN,
              show_default=True)
@click.option("--hop", type=int, default=dsp.DEFAULT_HOP, show_default=True)
@click.option("--window-kind", type=click.Choice(list(dsp.WINDOW_KINDS)),
              default="hann", show_default=True)
def compress_cmd(archive, out, window, hop, window_kind):
    """Transform raw waveforms into quantized spectral frames."""
    segments = simkit.load_raw_archive(archive)
    frames = []
    for segment in segments:
        frames.extend(dsp.compress(segment, window, hop, window_kind))
    dsp.write_frames_jsonl(frames, out)
    write_manifest("compress", {"archive": archive, "out": out,
                                "window": window, "hop": hop,
                                "window_kind": window_kind},
                   None, [out], out)
    click.echo(json.dumps({"frames": len(frames), "out": out}))


# -- ingest --------------------------------------------------------------------


def _post_frames(gateway: str, token: str, batch: list[dict]) -> dict:
    import httpx

    try:
        resp = httpx.post(f"{gateway}/api/frames", json=batch,
                          headers={"Authorization": f"Bearer {token}"},
                          timeout=60.0)
    except httpx.HTTPError as exc:
        raise TransportError(str(exc)) from exc
    if resp.status_code >= 400:
        raise ValidationError("gateway",
                              f"upload failed with status {resp.status_code}")
    return resp.json()


@cli.command("ingest")
@click.option("--frames", "frames_path", required=True,
              help="JSON-lines frame file")
@click.option("--gateway", default=None, help="gateway base URL")
@click.option("--token", default=None, help="bearer token for the gateway")
@click.option("--offline", is_flag=True, help="append directly to a ledger")
@click.option("--ledger", "ledger_path", default=None)
@click.option("--principals", "principals_path", default=None)
@click.option("--author", default=SERVICE_AUTHOR, show_default=True,
              help="ledger author for offline mode")
@click.option("--batch", type=int, default=100, show_default=True)
@click.option("--parallel", type=int, default=1, show_default=True)
def ingest_cmd(frames_path, gateway, token, offline, ledger_path,
               principals_path, author, batch, parallel):
    """Upload spectral frames to the gateway, or write them straight into
    a local ledger with --offline."""
    frames = dsp.read_frames_jsonl(frames_path)
    if offline:
        if not ledger_path or not principals_path:
            raise click.UsageError("--offline requires --ledger and "
                                   "--principals")
        store = _open_store(ledger_path, principals_path)
        start_seq = len(store)
        for frame in frames:
            store.append(labeling.FRAME_KEY_PREFIX + frame.sensor_id,
                         labeling.canonical_payload(frame.to_wire()), author)
        outputs = [{"ledger": ledger_path,
                    "seq_range": [start_seq, len(store)]}]
        write_manifest("ingest", {"frames": frames_path, "offline": True,
                                  "author": author},
                       None, outputs, frames_path)
        click.echo(json.dumps({"accepted": len(frames), "rejected": [],
                               "mode": "offline"}))
        return

    if not gateway or not token:
        raise click.UsageError("provide --gateway and --token, or --offline")
    wire = [f.to_wire() for f in frames]
    batches = [wire[i:i + batch] for i in range(0, len(wire), batch)]
    accepted = 0
    rejected: list = []
    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(
                lambda b: _post_frames(gateway, token, b), batches))
    else:
        results = [_post_frames(gateway, token, b) for b in batches]
    for i, result in enumerate(results):
        accepted += result["accepted"]
        for index, reason in result["rejected"]:
            rejected.append([i * batch + index, reason])
    write_manifest("ingest", {"frames": frames_path, "gateway": gateway,
                              "parallel": parallel},
                   None, [{"gateway": gateway, "accepted": accepted}],
                   frames_path)
    click.echo(json.dumps({"accepted": accepted, "rejected": rejected,
                           "mode": "gateway"}))


# -- labels ---------------------------------------------------------------------


@cli.group("label")
def label_group():
    """Create and import human annotations."""


@label_group.command("from-truth")
@click.argument("truth_files", nargs=-1, required=True)
@click.option("--out", required=True, help="labels JSON output path")
@click.option("--author", default="driver1", show_default=True)
def label_from_truth(truth_files, out, author):
    """Convert simulator ground-truth files into an event label import file."""
    events = []
    for path in truth_files:
        with open(path, "r", encoding="utf-8") as fh:
            truth = json.load(fh)
        if truth.get("kind") != "ride":
            raise ValidationError("kind", f"{path} is not a ride truth file")
        events.append({
            "event_kind": truth["event_kind"],
            "memo_text": f"auto label from {truth['sensor_id']} "
                         f"seed {truth['seed']}",
            "time_start": truth["time_start"],
            "time_end": truth["time_end"],
            "vehicle_id": truth["vehicle_id"],
            "author": author,
        })
    doc = {"events": events, "maintenance": []}
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest("label from-truth", {"truth_files": list(truth_files),
                                        "author": author},
                   None, [out], out)
    click.echo(json.dumps({"events": len(events), "out": out}))


@label_group.command("import")
@click.option("--labels", "labels_path", required=True,
              help="labels JSON file with events/maintenance lists")
@click.option("--gateway", default=None)
@click.option("--token", default=None)
@click.option("--offline", is_flag=True)
@click.option("--ledger", "ledger_path", default=None)
@click.option("--principals", "principals_path", default=None)
def label_import(labels_path, gateway, token, offline, ledger_path,
                 principals_path):
    """Import labels through the gateway, or directly with --offline
    (each entry's `author` must then name a registered principal)."""
    with open(labels_path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    events = doc.get("events", [])
    maintenance = doc.get("maintenance", [])

    created = {"events": 0, "maintenance": 0}
    if offline:
        if not ledger_path or not principals_path:
            raise click.UsageError("--offline requires --ledger and "
                                   "--principals")
        registry = load_registry(principals_path)
        store = Ledger(ledger_path, registry.keyring())
        start_seq = len(store)
        for form in events:
            principal = registry.by_id(str(form.get("author", "")))
            if principal is None:
                raise UnknownAuthorError(
                    f"label author {form.get('author')!r} is not registered")
            labeling.create_event_label(form, store, principal)
            created["events"] += 1
        for form in maintenance:
            principal = registry.by_id(str(form.get("author", "")))
            if principal is None:
                raise UnknownAuthorError(
                    f"label author {form.get('author')!r} is not registered")
            labeling.create_maintenance_record(form, store, principal)
            created["maintenance"] += 1
        outputs = [{"ledger": ledger_path, "seq_range": [start_seq, len(store)]}]
    else:
        if not gateway or not token:
            raise click.UsageError("provide --gateway and --token, or --offline")
        import httpx

        headers = {"Authorization": f"Bearer {token}"}
        try:
            for form, route, counter in (
                    [(f, "/api/labels/events", "events") for f in events]
                    + [(f, "/api/labels/maintenance", "maintenance")
                       for f in maintenance]):
                resp = httpx.post(gateway + route, json=form, headers=headers,
                                  timeout=30.0)
                if resp.status_code >= 400:
                    detail = resp.json().get("detail")
                    raise ValidationError(route, f"rejected: {detail}")
                created[counter] += 1
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        outputs = [{"gateway": gateway, "created": dict(created)}]
    write_manifest("label import", {"labels": labels_path,
                                    "offline": offline},
                   None, outputs, labels_path)
    click.echo(json.dumps(created))


# -- analyze -------------------------------------------------------------------


@cli.group()
def analyze():
    """Run analysis operations and print JSON results."""


@analyze.command("baseline")
@click.option("--frames", "frames_path", required=True)
@click.option("--sensor", default=None,
              help="restrict to one sensor id (default: all frames)")
@click.option("--out", required=True, help="baseline model JSON output")
def analyze_baseline(frames_path, sensor, out):
    frames = dsp.read_frames_jsonl(frames_path)
    if sensor is not None:
        frames = [f for f in frames if f.sensor_id == sensor]
    model = analysis.fit_baseline(sensor or "all", frames)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(analysis.dump_model(model))
        fh.write("\n")
    write_manifest("analyze baseline", {"frames": frames_path,
                                        "sensor": sensor},
                   None, [out], out)
    click.echo(json.dumps({"n_frames": model.n_frames, "out": out,
                           "fingerprint": analysis.model_fingerprint(model)}))


@analyze.command("score")
@click.option("--frames", "frames_path", required=True)
@click.option("--baseline", "baseline_path", required=True)
@click.option("--threshold", type=float,
              default=analysis.DEFAULT_ANOMALY_THRESHOLD, show_default=True)
def analyze_score(frames_path, baseline_path, threshold):
    with open(baseline_path, "r", encoding="utf-8") as fh:
        model = analysis.load_model(fh.read())
    if not isinstance(model, analysis.BaselineModel):
        raise ValidationError("baseline", "model file is not a baseline")
    rows = []
    for frame in dsp.read_frames_jsonl(frames_path):
        score = analysis.anomaly_score(frame, model)
        rows.append({"sensor_id": frame.sensor_id,
                     "frame_index": frame.frame_index,
                     "start_timestamp": frame.start_timestamp,
                     "score": score, "alarm": score > threshold})
    click.echo(json.dumps(rows))


@analyze.command("direction")
@click.option("--archive", required=True,
              help="raw archive holding the two subunit waveforms")
@click.option("--spacing", type=float, required=True)
def analyze_direction(archive, spacing):
    segments = simkit.load_raw_archive(archive)
    if len(segments) < 2:
        raise ValidationError("archive", "need two subunit waveforms")
    estimate = analysis.detect_direction_waveforms(segments[0], segments[1],
                                                   spacing)
    click.echo(json.dumps({"direction": estimate.direction.value,
                           "delta_t": estimate.delta_t,
                           "speed_estimate": estimate.speed_estimate}))


@analyze.command("prepost")
@click.option("--pre", "pre_path", required=True)
@click.option("--post", "post_path", required=True)
def analyze_prepost(pre_path, post_path):
    report = analysis.compare_pre_post(dsp.read_frames_jsonl(pre_path),
                                       dsp.read_frames_jsonl(post_path))
    click.echo(json.dumps(report.to_json()))


# -- train / predict -------------------------------------------------------------


@cli.command("train")
@click.option("--ledger", "ledger_path", required=True)
@click.option("--principals", "principals_path", required=True)
@click.option("--out", required=True, help="classifier model JSON output")
@click.option("--link-tolerance", type=int,
              default=labeling.DEFAULT_LINK_TOLERANCE_US, show_default=True)
@click.option("--author", default=SERVICE_AUTHOR, show_default=True,
              help="author recorded on linkage appends")
def train_cmd(ledger_path, principals_path, out, link_tolerance, author):
    """Link every event label to its frames, then train the classifier."""
    store = _open_store(ledger_path, principals_path)
    labeled: list[tuple[analysis.FeatureVector, str]] = []
    n_labels = 0
    for key in store.keys(labeling.EVENT_KEY_PREFIX):
        for rec in store.history(key):
            event = labeling.EventLabel.from_json(json.loads(rec.payload))
            window = labeling.link_label_to_frames(
                event, store, link_tolerance, author=author)
            features = analysis.features_from_ledger(store, window.frame_keys)
            labeled.extend((fv, event.event_kind.value) for fv in features)
            n_labels += 1
    model = analysis.train_classifier(labeled)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(analysis.dump_model(model))
        fh.write("\n")
    write_manifest("train", {"ledger": ledger_path,
                             "link_tolerance": link_tolerance},
                   None, [out], out)
    counts = {c: sum(1 for _, k in labeled if k == c) for c in model.classes}
    click.echo(json.dumps({"labels": n_labels, "samples": counts,
                           "fingerprint": analysis.model_fingerprint(model),
                           "out": out}))


@cli.command("predict")
@click.option("--ledger", "ledger_path", required=True)
@click.option("--principals", "principals_path", required=True)
@click.option("--model", "model_path", required=True)
@click.option("--subject", default=None, help="restrict to one vehicle id")
@click.option("--author", default=SERVICE_AUTHOR, show_default=True)
@click.option("--max-evidence", type=int, default=50, show_default=True)
@click.option("--dry-run", is_flag=True,
              help="print predictions without publishing")
def predict_cmd(ledger_path, principals_path, model_path, subject, author,
                max_evidence, dry_run):
    """Classify every vehicle's frames and publish recommendations."""
    with open(model_path, "r", encoding="utf-8") as fh:
        model = analysis.load_model(fh.read())
    if not isinstance(model, analysis.ClassifierModel):
        raise ValidationError("model", "model file is not a classifier")
    store = _open_store(ledger_path, principals_path)

    by_vehicle: dict[str, list[analysis.FrameRef]] = {}
    for key in store.keys(labeling.FRAME_KEY_PREFIX):
        vehicle = simkit.vehicle_of_sensor(key[len(labeling.FRAME_KEY_PREFIX):])
        if subject is not None and vehicle != subject:
            continue
        refs = [(key, rec.version) for rec in store.history(key)]
        by_vehicle.setdefault(vehicle, []).extend(refs)

    results = []
    start_seq = len(store)
    for vehicle in sorted(by_vehicle):
        refs = sorted(by_vehicle[vehicle])
        features = analysis.features_from_ledger(store, refs)
        predictions = [analysis.predict(model, fv) for fv in features]
        flagged = [(ref, p) for ref, p in zip(refs, predictions)
                   if p.predicted != labeling.EventKind.NORMAL.value]
        row = {"subject": vehicle, "frames": len(refs),
               "flagged": len(flagged), "published": False}
        if flagged:
            kinds: dict[str, list] = {}
            for ref, p in flagged:
                kinds.setdefault(p.predicted, []).append((ref, p))
            issue = max(kinds, key=lambda k: len(kinds[k]))
            hits = kinds[issue]
            confidence = sum(p.confidence for _, p in hits) / len(hits)
            evidence = [ref for ref, _ in hits[:max_evidence]]
            row.update(predicted_issue=issue, confidence=confidence,
                       evidence_count=len(evidence))
            if not dry_run:
                rec = analysis.publish_recommendation(
                    analysis.PredictionCandidate(
                        predicted=issue, confidence=confidence, distances=()),
                    evidence, store, subject=vehicle, model=model,
                    author=author)
                row.update(published=True, rec_id=rec.rec_id)
        results.append(row)
    if not dry_run:
        write_manifest("predict", {"ledger": ledger_path, "model": model_path,
                                   "subject": subject},
                       None, [{"ledger": ledger_path,
                               "seq_range": [start_seq, len(store)]}],
                       model_path)
    click.echo(json.dumps(results))


# -- verify / serve / report ------------------------------------------------------


@cli.command("verify-ledger")
@click.option("--ledger", "ledger_path", required=True)
@click.option("--principals", "principals_path", required=True)
def verify_ledger_cmd(ledger_path, principals_path):
    """Exit 0 iff the persisted chain verifies end-to-end."""
    registry = load_registry(principals_path)
    result = verify_log_file(ledger_path, registry.keyring())
    click.echo(json.dumps({"ok": result.ok, "length": result.length,
                           "first_bad_seq": result.first_bad_seq,
                           "reason": result.reason}))
    if not result.ok:
        raise VerificationFailure(
            f"chain invalid at seq {result.first_bad_seq} "
            f"({result.reason})")


@cli.command("serve")
@click.option("--config", "config_path", required=True)
def serve_cmd(config_path):
    """Run the HTTP gateway."""
    import uvicorn

    from .gateway import create_app

    cfg = load_config(config_path)
    app = create_app(cfg)
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="warning")


@cli.command("report")
@click.option("--gateway", required=True)
@click.option("--token", required=True)
def report_cmd(gateway, token):
    """Fetch /api/report and render it as a text table."""
    import httpx

    try:
        resp = httpx.get(f"{gateway}/api/report",
                         headers={"Authorization": f"Bearer {token}"},
                         timeout=30.0)
    except httpx.HTTPError as exc:
        raise TransportError(str(exc)) from exc
    if resp.status_code >= 400:
        raise ValidationError("gateway",
                              f"report failed with status {resp.status_code}")
    doc = resp.json()
    lines = [
        f"{'frames':24} {doc['frame_count']}",
        f"{'chain verified':24} {doc['chain_verified']}",
        f"{'anomaly alarms':24} {doc['anomaly_alarms_last_n']}",
    ]
    for kind, count in sorted(doc["label_counts"].items()):
        lines.append(f"{'label ' + kind:24} {count}")
    lines.append(f"{'recommendations':24} {len(doc['open_recommendations'])}")
    for rec in doc["open_recommendations"]:
        lines.append(f"  {rec['subject']:8} {rec['predicted_issue']:20} "
                     f"confidence={rec['confidence']:.3f} "
                     f"evidence={len(rec['evidence'])}")
    click.echo("\n".join(lines))


@cli.command("init")
@click.option("--dir", "target_dir", default=".", show_default=True)
def init_cmd(target_dir):
    """Write a starter config, principal registry and empty ledger."""
    import os

    os.makedirs(target_dir, exist_ok=True)
    principals = [
        {"id": name, "role": role, "token": secrets.token_hex(16),
         "mac_key": secrets.token_hex(32)}
        for name, role in [("sensor1", "sensor"), ("driver1", "driver"),
                           ("mech1", "mechanic"), ("foreman1", "foreman"),
                           ("partner1", "partner"), ("admin1", "admin")]]
    ppath = os.path.join(target_dir, "principals.json")
    with open(ppath, "w", encoding="utf-8") as fh:
        json.dump(principals, fh, indent=2)
        fh.write("\n")
    cpath = os.path.join(target_dir, "railmon.conf")
    with open(cpath, "w", encoding="utf-8") as fh:
        fh.write("# railmon gateway configuration\n"
                 "listen_addr = 127.0.0.1:8321\n"
                 "ledger_path = railmon.log\n"
                 "principals_path = principals.json\n"
                 "anomaly_threshold = 4.0\n"
                 "link_tolerance_us = 2000000\n")
    registry = load_registry(ppath)
    lpath = os.path.join(target_dir, "railmon.log")
    Ledger(lpath, registry.keyring()).close()
    write_manifest("init", {"dir": target_dir}, None,
                   [cpath, ppath, lpath], cpath)
    click.echo(json.dumps({"config": cpath, "principals": ppath,
                           "ledger": lpath}))


# -- entry point --------------------------------------------------------------------


_ERROR_CATEGORIES: list[tuple[type, str, int]] = [
    (VerificationFailure, "verification", EXIT_VERIFY),
    (ValidationError, "validation", EXIT_VERIFY),
    (PermissionDeniedError, "permission", EXIT_VERIFY),
    (UnknownReferenceError, "reference", EXIT_VERIFY),
    (UnknownAuthorError, "reference", EXIT_VERIFY),
    (InsufficientDataError, "validation", EXIT_VERIFY),
    (IndeterminateDirectionError, "validation", EXIT_VERIFY),
    (LedgerFormatError, "verification", EXIT_VERIFY),
    (FaultSpecError, "usage", EXIT_USAGE),
    (ParameterError, "usage", EXIT_USAGE),
    (SizeError, "usage", EXIT_USAGE),
    (TransportError, "transport", EXIT_IO),
    (OSError, "io", EXIT_IO),
]


def main() -> int:
    try:
        cli(standalone_mode=False)
        return EXIT_OK
    except click.exceptions.Abort:
        click.echo("error: usage: aborted", err=True)
        return EXIT_USAGE
    except click.UsageError as exc:
        click.echo(f"error: usage: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        click.echo(f"error: usage: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except Exception as exc:
        for etype, category, code in _ERROR_CATEGORIES:
            if isinstance(exc, etype):
                message = " ".join(str(exc).split())
                click.echo(f"error: {category}: {message}", err=True)
                return code
        message = " ".join(str(exc).split())
        click.echo(f"error: internal: {message}", err=True)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
