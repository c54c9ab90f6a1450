import csv
import json
import subprocess
import sys

import pytest

from p2pbotnet.cli import EXIT_CONFIG, EXIT_INPUT, main
from p2pbotnet.pipeline import STAGES


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    assert main(["generate", "--out-dir", str(out), "--seed", "0"]) == 0
    return out


def test_generate_writes_files(dataset_dir):
    assert {p.name for p in dataset_dir.iterdir()} == {"flows.csv", "truth.csv", "manifest.json"}
    manifest = json.loads((dataset_dir / "manifest.json").read_text())
    assert manifest["counts"]["bots"] == 13


def test_detect_with_truth(dataset_dir, tmp_path):
    out = tmp_path / "report.json"
    rc = main(["detect", str(dataset_dir / "flows.csv"), "--truth", str(dataset_dir / "truth.csv"),
               "--report", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert [doc["stage_counts"][k] for k in STAGES] == [1000, 23, 23, 13, 13]
    assert doc["metrics"]["detection_rate"] == 1.0 and doc["metrics"]["false_positives"] == 0


def test_detect_to_stdout_csv(dataset_dir, capsys):
    assert main(["detect", str(dataset_dir / "flows.csv"), "--format", "csv-summary"]) == 0
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert len(rows) >= 2


def test_flags_override_config_file(dataset_dir, tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("theta_avgmcr = 1.0\n")
    out = tmp_path / "r.json"
    main(["detect", str(dataset_dir / "flows.csv"), "--config", str(cfg), "--report", str(out)])
    assert json.loads(out.read_text())["bot_candidates"]["hosts"] == []
    main(["detect", str(dataset_dir / "flows.csv"), "--config", str(cfg), "--theta-avgmcr", "0.25",
          "--report", str(out)])
    assert len(json.loads(out.read_text())["bot_candidates"]["hosts"]) == 13


def test_dump_clusters(dataset_dir, tmp_path):
    dump = tmp_path / "clusters.csv"
    rc = main(["detect", str(dataset_dir / "flows.csv"), "--report", str(tmp_path / "r.json"),
               "--dump-clusters", str(dump)])
    assert rc == 0
    rows = list(csv.DictReader(dump.open()))
    assert sum(r["p2p"] == "1" for r in rows) > 0
    assert all((int(r["dd"]) >= 50) == (r["p2p"] == "1") for r in rows)
    assert len({r["src"] for r in rows if r["p2p"] == "1"}) == 23


def test_score(dataset_dir, tmp_path, capsys):
    report = tmp_path / "r.json"
    main(["detect", str(dataset_dir / "flows.csv"), "--report", str(report)])
    capsys.readouterr()
    assert main(["score", str(report), str(dataset_dir / "truth.csv")]) == 0
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["detection_rate"] == 1.0 and metrics["fbsr"] == 0.0


def test_sweep(dataset_dir, tmp_path):
    out = tmp_path / "sweep.csv"
    rc = main(["sweep", str(dataset_dir / "flows.csv"), str(dataset_dir / "truth.csv"),
               "--param", "theta_dd", "--values", "10,50,1000", "--report", str(out)])
    assert rc == 0
    rows = list(csv.DictReader(out.open()))
    assert [float(r["value"]) for r in rows] == [10, 50, 1000]
    assert float(rows[-1]["detection_rate"]) == 0.0


@pytest.mark.parametrize("flags", [["--theta-mcr", "2"], ["--theta-dd", "0"], ["--internal-cidr", "nope"],
                                   ["--workers", "0"], ["--config", "/nonexistent/cfg"]])
def test_bad_config_exit_code(dataset_dir, flags):
    assert main(["detect", str(dataset_dir / "flows.csv"), *flags]) == EXIT_CONFIG


def test_bad_sweep_values(dataset_dir):
    assert main(["sweep", str(dataset_dir / "flows.csv"), str(dataset_dir / "truth.csv"),
                 "--param", "theta_mcr", "--values", "a,b"]) == EXIT_CONFIG


def test_malformed_flow_file_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("src_ip,dst_ip,proto,bpp_out,bpp_in\n10.0.0.1,8.8.8.8,icmp,1,1\n")
    assert main(["detect", str(bad)]) == EXIT_INPUT
    assert "line 2" in capsys.readouterr().err


def test_missing_flow_file_exit_code(tmp_path):
    assert main(["detect", str(tmp_path / "absent.csv")]) == EXIT_INPUT


def test_truth_missing_hosts_exit_code(dataset_dir, tmp_path):
    report = tmp_path / "r.json"
    main(["detect", str(dataset_dir / "flows.csv"), "--report", str(report)])
    truth = tmp_path / "truth.csv"
    truth.write_text("ip,label\n10.0.0.1,background\n")
    assert main(["score", str(report), str(truth)]) == EXIT_INPUT


def test_bad_generator_config(tmp_path):
    assert main(["generate", "--out-dir", str(tmp_path), "--n-internal", "3"]) == EXIT_CONFIG


def test_module_entry_point(dataset_dir):
    proc = subprocess.run([sys.executable, "-m", "p2pbotnet", "detect", str(dataset_dir / "flows.csv"),
                           "--theta-avgddr", "-1"], capture_output=True, text=True)
    assert proc.returncode == EXIT_CONFIG
    assert "config error" in proc.stderr
