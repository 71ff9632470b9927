import json
import shutil
import socket
import subprocess
import sys
import threading

import pytest

from conftest import PRINCIPAL_IDS, TOKENS, make_registry
from railmon import cli as climod
from railmon import dsp
from railmon.ledger import Ledger
from railmon.principals import Role


def run_cli(args):
    old = sys.argv
    sys.argv = ["railmon"] + [str(a) for a in args]
    try:
        return climod.main()
    finally:
        sys.argv = old


def run_json(args, capsys):
    code = run_cli(args)
    out = capsys.readouterr().out.strip()
    assert code == 0, out
    return json.loads(out.splitlines()[-1])


def write_principals(path):
    """Registry file matching conftest.make_registry byte for byte."""
    entries = [{"id": PRINCIPAL_IDS[role], "role": role.value,
                "token": TOKENS[role], "mac_key": (bytes([i + 1]) * 32).hex()}
               for i, role in enumerate(Role)]
    path.write_text(json.dumps(entries))
    return str(path)


def simulate(tmp_path, name, capsys, fault="none", severity=0.0,
             sensor="V1:ub1", seed=0, route=80.0):
    out = str(tmp_path / f"{name}.bin")
    args = ["simulate", "ride", "--out", out, "--route-length", route,
            "--speed", 40.0, "--segment-duration", 1.0,
            "--sensor-id", sensor, "--seed", seed, "--fault", fault,
            "--severity", severity]
    if fault == "flat_spot":
        args += ["--wheel-circumference", 2.0]
    doc = run_json(args, capsys)
    return out, doc


class TestSimulateAndCompress:
    def test_ride_deterministic_digest(self, tmp_path, capsys):
        _, doc1 = simulate(tmp_path, "a", capsys, seed=7)
        _, doc2 = simulate(tmp_path, "b", capsys, seed=7)
        _, doc3 = simulate(tmp_path, "c", capsys, seed=8)
        assert doc1["digest"] == doc2["digest"]
        assert doc1["digest"] != doc3["digest"]

    def test_manifest_written_next_to_archive(self, tmp_path, capsys):
        out, _ = simulate(tmp_path, "m", capsys, seed=1)
        manifest = json.loads((tmp_path / "m.bin.manifest.json").read_text())
        assert manifest["command"] == "simulate ride"
        assert manifest["seed"] == 1
        assert out in manifest["outputs"]
        assert manifest["args"]["speed"] == 40.0

    def test_truth_records_event_kind(self, tmp_path, capsys):
        out, _ = simulate(tmp_path, "f", capsys, fault="flat_spot",
                          severity=0.8)
        truth = json.loads((tmp_path / "f.bin.truth.json").read_text())
        assert truth["event_kind"] == "flat_spot_suspected"
        assert truth["vehicle_id"] == "V1"
        out2, _ = simulate(tmp_path, "n", capsys)
        truth2 = json.loads((tmp_path / "n.bin.truth.json").read_text())
        assert truth2["event_kind"] == "normal"

    def test_compress_emits_expected_frame_count(self, tmp_path, capsys):
        out, doc = simulate(tmp_path, "c1", capsys, route=80.0)
        frames_path = str(tmp_path / "c1.jsonl")
        cdoc = run_json(["compress", "--archive", out, "--out", frames_path],
                        capsys)
        frames = dsp.read_frames_jsonl(frames_path)
        assert cdoc["frames"] == len(frames)
        # 2 segments of 1 s at 8192 Hz, window 1024 hop 1024 -> 8 each
        assert doc["segments"] == 2
        assert len(frames) == 16


class TestErrorContract:
    def test_usage_error_exits_2(self, tmp_path, capsys):
        code = run_cli(["simulate", "ride", "--out", str(tmp_path / "x.bin"),
                        "--fault", "flat_spot"])  # severity missing
        captured = capsys.readouterr()
        assert code == 2
        assert captured.err.startswith("error: usage:")
        assert captured.err.count("\n") == 1

    def test_unknown_option_exits_2(self, tmp_path, capsys):
        code = run_cli(["compress", "--bogus", "x"])
        assert code == 2
        assert capsys.readouterr().err.startswith("error: usage:")

    def test_missing_file_exits_3(self, tmp_path, capsys):
        code = run_cli(["compress", "--archive", str(tmp_path / "no.bin"),
                        "--out", str(tmp_path / "no.jsonl")])
        captured = capsys.readouterr()
        assert code == 3
        assert captured.err.startswith("error: io:")

    def test_transport_error_exits_3(self, tmp_path, capsys):
        out, _ = simulate(tmp_path, "t", capsys, route=40.0)
        frames_path = str(tmp_path / "t.jsonl")
        run_json(["compress", "--archive", out, "--out", frames_path], capsys)
        code = run_cli(["ingest", "--frames", frames_path,
                        "--gateway", "http://127.0.0.1:9", "--token", "x"])
        captured = capsys.readouterr()
        assert code == 3
        assert captured.err.startswith("error: transport:")

    def test_label_import_validation_exits_1(self, tmp_path, capsys):
        labels = tmp_path / "labels.json"
        labels.write_text(json.dumps({"events": [{
            "event_kind": "track_bump", "memo_text": "x",
            "time_start": 100, "time_end": 50, "vehicle_id": "V1",
            "author": "driver1"}], "maintenance": []}))
        principals = write_principals(tmp_path / "principals.json")
        code = run_cli(["label", "import", "--labels", str(labels),
                        "--offline", "--ledger", str(tmp_path / "l.log"),
                        "--principals", principals])
        captured = capsys.readouterr()
        assert code == 1
        assert captured.err.startswith("error: validation:")
        assert "time_end" in captured.err


class TestVerifyLedger:
    def test_clean_chain_exits_0(self, tmp_path, capsys):
        principals = write_principals(tmp_path / "principals.json")
        store = Ledger(str(tmp_path / "v.log"), make_registry().keyring())
        for i in range(10):
            store.append(f"k{i % 3}", f"payload {i}".encode(), "admin1")
        store.close()
        doc = run_json(["verify-ledger", "--ledger", str(tmp_path / "v.log"),
                        "--principals", principals], capsys)
        assert doc == {"ok": True, "length": 10, "first_bad_seq": None,
                       "reason": None}

    def test_tampered_chain_exits_1_and_names_seq(self, tmp_path, capsys):
        import oracles

        principals = write_principals(tmp_path / "principals.json")
        path = tmp_path / "bad.log"
        store = Ledger(str(path), make_registry().keyring())
        for i in range(8):
            store.append("k", f"payload {i}".encode(), "admin1")
        store.close()
        blob = bytearray(path.read_bytes())
        _, spans = oracles.parse_log_records(bytes(blob))
        offset = spans[5][0] + 20  # inside record 5's body
        blob[offset] ^= 0x01
        path.write_bytes(bytes(blob))
        code = run_cli(["verify-ledger", "--ledger", str(path),
                        "--principals", principals])
        captured = capsys.readouterr()
        assert code == 1
        doc = json.loads(captured.out.strip().splitlines()[-1])
        assert doc["ok"] is False
        assert doc["first_bad_seq"] == 5
        assert captured.err.startswith("error: verification:")
        assert "5" in captured.err

    def test_missing_ledger_exits_3(self, tmp_path, capsys):
        principals = write_principals(tmp_path / "principals.json")
        code = run_cli(["verify-ledger", "--ledger", str(tmp_path / "no.log"),
                        "--principals", principals])
        assert code == 3


class TestOfflinePipeline:
    def test_end_to_end_offline(self, tmp_path, capsys):
        principals = write_principals(tmp_path / "principals.json")
        ledger_path = str(tmp_path / "fleet.log")
        truth_files = []
        for sensor, fault, severity, seed in (
                ("V1:ub1", "flat_spot", 0.8, 11), ("V2:ub1", "none", 0.0, 12)):
            out, _ = simulate(tmp_path, f"ride-{sensor[:2]}", capsys,
                              fault=fault, severity=severity, sensor=sensor,
                              seed=seed, route=120.0)
            frames_path = out + ".jsonl"
            run_json(["compress", "--archive", out, "--out", frames_path],
                     capsys)
            doc = run_json(["ingest", "--frames", frames_path, "--offline",
                            "--ledger", ledger_path,
                            "--principals", principals,
                            "--author", "sensor1"], capsys)
            assert doc["accepted"] == 24
            truth_files.append(out + ".truth.json")

        labels_path = str(tmp_path / "labels.json")
        run_json(["label", "from-truth", *truth_files, "--out", labels_path,
                  "--author", "driver1"], capsys)
        doc = run_json(["label", "import", "--labels", labels_path,
                        "--offline", "--ledger", ledger_path,
                        "--principals", principals], capsys)
        assert doc == {"events": 2, "maintenance": 0}

        model_path = str(tmp_path / "model.json")
        tdoc = run_json(["train", "--ledger", ledger_path,
                         "--principals", principals, "--out", model_path],
                        capsys)
        assert tdoc["samples"] == {"flat_spot_suspected": 24, "normal": 24}
        assert tdoc["labels"] == 2

        rows = run_json(["predict", "--ledger", ledger_path,
                         "--principals", principals, "--model", model_path,
                         "--author", "admin1"], capsys)
        by_subject = {r["subject"]: r for r in rows}
        assert by_subject["V1"]["published"] is True
        assert by_subject["V1"]["predicted_issue"] == "flat_spot_suspected"
        assert by_subject["V2"]["flagged"] == 0
        assert by_subject["V2"]["published"] is False

        store = Ledger(ledger_path, make_registry().keyring())
        assert store.count_records("recommendations/") == 1
        store.close()
        doc = run_json(["verify-ledger", "--ledger", ledger_path,
                        "--principals", principals], capsys)
        assert doc["ok"] is True

    def test_predict_dry_run_publishes_nothing(self, tmp_path, capsys):
        principals = write_principals(tmp_path / "principals.json")
        ledger_path = str(tmp_path / "dry.log")
        for sensor, fault, severity, seed in (
                ("V1:ub1", "flat_spot", 0.8, 3), ("V2:ub1", "none", 0.0, 4)):
            out, _ = simulate(tmp_path, f"dry-{sensor[:2]}", capsys,
                              fault=fault, severity=severity, sensor=sensor,
                              seed=seed, route=120.0)
            run_json(["compress", "--archive", out, "--out", out + ".jsonl"],
                     capsys)
            run_json(["ingest", "--frames", out + ".jsonl", "--offline",
                      "--ledger", ledger_path, "--principals", principals,
                      "--author", "sensor1"], capsys)
            run_json(["label", "from-truth", out + ".truth.json",
                      "--out", out + ".labels.json"], capsys)
            run_json(["label", "import", "--labels", out + ".labels.json",
                      "--offline", "--ledger", ledger_path,
                      "--principals", principals], capsys)
        model_path = str(tmp_path / "model.json")
        run_json(["train", "--ledger", ledger_path, "--principals",
                  principals, "--out", model_path], capsys)
        run_json(["predict", "--ledger", ledger_path, "--principals",
                  principals, "--model", model_path, "--dry-run"], capsys)
        store = Ledger(ledger_path, make_registry().keyring())
        assert store.count_records("recommendations/") == 0
        store.close()


class TestAnalyzeCommands:
    def test_direction(self, tmp_path, capsys):
        out = str(tmp_path / "pass.bin")
        run_json(["simulate", "pass", "--out", out, "--speed", 12.0,
                  "--spacing", 6.0, "--seed", 5], capsys)
        doc = run_json(["analyze", "direction", "--archive", out,
                        "--spacing", 6.0], capsys)
        assert doc["direction"] == "a_to_b"
        assert doc["speed_estimate"] == pytest.approx(12.0, rel=0.05)

    def test_baseline_score_prepost(self, tmp_path, capsys):
        out, _ = simulate(tmp_path, "bs", capsys, route=120.0, seed=21)
        frames_path = str(tmp_path / "bs.jsonl")
        run_json(["compress", "--archive", out, "--out", frames_path], capsys)
        model_path = str(tmp_path / "baseline.json")
        bdoc = run_json(["analyze", "baseline", "--frames", frames_path,
                         "--out", model_path], capsys)
        assert bdoc["n_frames"] == 24
        rows = run_json(["analyze", "score", "--frames", frames_path,
                         "--baseline", model_path], capsys)
        assert len(rows) == 24
        assert not any(r["alarm"] for r in rows)
        pdoc = run_json(["analyze", "prepost", "--pre", frames_path,
                         "--post", frames_path], capsys)
        assert pdoc["band_ratio"] == pytest.approx([1.0] * 8)
        assert pdoc["delta_score"] == pytest.approx(0.0, abs=1e-12)


class TestInit:
    def test_init_writes_working_setup(self, tmp_path, capsys):
        target = tmp_path / "site"
        doc = run_json(["init", "--dir", str(target)], capsys)
        assert (target / "railmon.conf").exists()
        principals = json.loads((target / "principals.json").read_text())
        assert {p["role"] for p in principals} == {r.value for r in Role}
        vdoc = run_json(["verify-ledger", "--ledger", doc["ledger"],
                         "--principals", doc["principals"]], capsys)
        assert vdoc["ok"] is True
        assert vdoc["length"] == 0


class TestConsoleScript:
    def test_installed_entry_point(self):
        exe = shutil.which("railmon")
        assert exe, "console script not installed"
        proc = subprocess.run([exe, "--help"], capture_output=True, text=True)
        assert proc.returncode == 0
        assert "simulate" in proc.stdout


class TestGatewayMode:
    @pytest.fixture()
    def server(self, tmp_path):
        import uvicorn

        from railmon.config import Config
        from railmon.gateway import create_app

        with socket.socket() as s:
            s.bind(("127.0.0.1", 0))
            port = s.getsockname()[1]
        cfg = Config(listen_addr=f"127.0.0.1:{port}",
                     ledger_path=str(tmp_path / "gw.log"),
                     principals_path=str(tmp_path / "unused.json"))
        registry = make_registry()
        store = Ledger(cfg.ledger_path, registry.keyring(), fsync=False)
        app = create_app(cfg, ledger=store, registry=registry)
        server = uvicorn.Server(uvicorn.Config(app, host=cfg.host,
                                               port=port, log_level="error"))
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        for _ in range(200):
            if server.started:
                break
            threading.Event().wait(0.05)
        assert server.started
        yield f"http://127.0.0.1:{port}", store
        server.should_exit = True
        thread.join(timeout=10)

    def test_ingest_and_report_over_http(self, tmp_path, capsys, server):
        base, store = server
        out, _ = simulate(tmp_path, "gw", capsys, route=80.0, seed=9)
        frames_path = str(tmp_path / "gw.jsonl")
        run_json(["compress", "--archive", out, "--out", frames_path], capsys)
        doc = run_json(["ingest", "--frames", frames_path, "--gateway", base,
                        "--token", TOKENS[Role.SENSOR], "--batch", "5",
                        "--parallel", "2"], capsys)
        assert doc == {"accepted": 16, "rejected": [], "mode": "gateway"}
        assert store.count_records("frames/") == 16

        code = run_cli(["report", "--gateway", base,
                        "--token", TOKENS[Role.FOREMAN]])
        captured = capsys.readouterr()
        assert code == 0
        assert "frames" in captured.out
        assert "16" in captured.out
        assert "chain verified" in captured.out
        assert "True" in captured.out

    def test_label_import_gateway_mode(self, tmp_path, capsys, server):
        base, store = server
        labels = tmp_path / "labels.json"
        labels.write_text(json.dumps({"events": [{
            "event_kind": "hard_braking", "memo_text": "stop",
            "time_start": 1, "time_end": 2, "vehicle_id": "V3"}],
            "maintenance": [{"vehicle_id": "V3", "phase": "entry",
                             "timestamp": 9}]}))
        doc = run_json(["label", "import", "--labels", str(labels),
                        "--gateway", base, "--token", TOKENS[Role.MECHANIC]],
                       capsys)
        assert doc == {"events": 1, "maintenance": 1}
        assert store.count_records("labels/") == 2
