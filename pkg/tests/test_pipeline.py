import csv
import io
import json

import pytest

from p2pbotnet.flow_model import FlowRecord, Protocol
from p2pbotnet.pipeline import (STAGES, CommunityRecord, DetectionReport, PipelineConfig, PipelineError,
                                compute_metrics, emit_report, load_report, run_pipeline, sweep)
from p2pbotnet.synth import GroundTruth

B1, B2, B3, L1, L2, L3 = range(1, 7)
BACKGROUND = [11, 12, 13, 14]


def crafted_report(groups, bots):
    communities = [CommunityRecord(i, sorted(g), 0.5, 0.5, True) for i, g in enumerate(groups)]
    hosts = sorted(h for g in groups for h in g)
    return DetectionReport(
        config={}, stage_counts={}, cliques=[], suspicious_small_communities=[],
        stage_hosts={"input_hosts": hosts + BACKGROUND, "community_hosts": hosts},
        communities=communities, bot_candidates=sorted(bots))


def crafted_truth():
    labels = {B1: "bot:a", B2: "bot:a", B3: "bot:b", L1: "p2p:x", L2: "p2p:x", L3: "p2p:y"}
    labels.update({h: "background" for h in BACKGROUND})
    return GroundTruth(labels)


def test_metrics_on_crafted_fixture():
    report = crafted_report([[B1, B2, L1], [B3], [L2, L3]], bots=[B1, L1])
    m = compute_metrics(report, crafted_truth())
    assert m["detection_rate"] == pytest.approx(1 / 3)
    assert m["false_positives"] == 1
    assert m["fpr_p2p_hosts"] == pytest.approx(1 / 3)
    assert m["fpr_all_internal"] == pytest.approx(1 / 7)
    assert m["flcr"] == pytest.approx(1 / 3)
    assert m["fbcr"] == 0.0
    assert m["fbsr"] == 0.0
    assert not m["botnet_merge"]


def test_metrics_cross_family_merge():
    report = crafted_report([[B1, B2, B3], [L1, L2, L3]], bots=[B1, B2, B3])
    m = compute_metrics(report, crafted_truth())
    assert m["detection_rate"] == 1.0 and m["false_positives"] == 0
    assert m["fbcr"] == 1.0
    assert m["fbsr"] == pytest.approx(-0.5)
    assert m["botnet_merge"]


def test_perfect_run():
    report = crafted_report([[B1, B2], [B3], [L1, L2, L3]], bots=[B1, B2, B3])
    m = compute_metrics(report, crafted_truth())
    assert (m["flcr"], m["fbcr"], m["fbsr"]) == (0.0, 0.0, 0.0)


def test_split_botnet_fbsr():
    # family a split into 3 communities, family b intact
    report = crafted_report([[B1], [B2], [L1, L2, L3], [B3]], bots=[])
    truth = crafted_truth()
    truth.labels[15] = "bot:a"
    report.stage_hosts["community_hosts"].append(15)
    report.stage_hosts["input_hosts"].append(15)
    report.communities.append(CommunityRecord(4, [15], 0.0, 0.0, False))
    m = compute_metrics(report, truth)
    assert m["bot_communities"] == 4
    assert m["fbsr"] == pytest.approx(1.0)


def test_truth_must_cover_internal_hosts():
    report = crafted_report([[B1, B2, L1]], bots=[])
    truth = crafted_truth()
    del truth.labels[BACKGROUND[0]]
    with pytest.raises(ValueError, match="ground truth"):
        compute_metrics(report, truth)


def test_empty_flows():
    report = run_pipeline([])
    assert report.stage_counts == {k: 0 for k in STAGES}
    assert report.communities == [] and report.bot_candidates == []


def test_default_run_stage_counts(default_report):
    assert list(default_report.stage_counts.values()) == [1000, 23, 23, 13, 13]
    counts = list(default_report.stage_counts.values())
    assert counts == sorted(counts, reverse=True)


def test_default_run_is_clean(default_report):
    m = default_report.metrics
    assert m["detection_rate"] == 1.0 and m["false_positives"] == 0
    assert default_report.suspicious_small_communities == []


def test_rerun_is_byte_identical(default_dataset, default_report):
    again = run_pipeline(default_dataset.flows)
    again.metrics = compute_metrics(again, default_dataset.truth)
    assert again.to_json() == default_report.to_json()


def test_json_round_trip(tmp_path, default_report):
    path = emit_report(default_report, tmp_path / "r.json", "json")
    loaded = load_report(path)
    assert loaded == default_report
    doc = json.loads(path.read_text())
    assert set(doc["stage_counts"]) == set(STAGES)
    assert set(doc) >= {"stage_counts", "communities", "bot_candidates", "suspicious_small_communities",
                        "metrics", "stage_hosts", "config"}


def test_csv_summary_one_row_per_community(tmp_path, default_report):
    path = emit_report(default_report, tmp_path / "r.csv", "csv-summary")
    rows = list(csv.DictReader(io.StringIO(path.read_text())))
    assert len(rows) == len(default_report.communities)
    assert sum(int(r["bot_candidates"]) for r in rows) == 13


def test_unknown_format(tmp_path, default_report):
    with pytest.raises(ValueError):
        emit_report(default_report, tmp_path / "x", "xml")


def test_config_defaults_and_validation():
    cfg = PipelineConfig()
    assert (cfg.theta_dd, cfg.theta_mcr, cfg.theta_avgddr, cfg.theta_avgmcr) == (50, 0.03125, 0.0625, 0.25)
    assert cfg.louvain_resolution == 1.0 and cfg.louvain_seed == 0
    for bad in ({"theta_dd": 0}, {"theta_mcr": 1.5}, {"theta_avgmcr": -0.1}, {"internal_cidrs": []},
                {"worker_count": 0}, {"internal_cidrs": ["not-a-net"]}):
        with pytest.raises(ValueError):
            PipelineConfig(**bad)


def test_config_from_kv_file(tmp_path):
    path = tmp_path / "cfg.txt"
    path.write_text("# thresholds\ntheta_dd = 30\ntheta-mcr=0.1\ninternal_cidr = 10.0.0.0/8, 192.168.0.0/16\n")
    cfg = PipelineConfig.from_mapping(PipelineConfig.read_kv(path))
    assert cfg.theta_dd == 30 and cfg.theta_mcr == 0.1
    assert cfg.internal_cidrs == ["10.0.0.0/8", "192.168.0.0/16"]
    with pytest.raises(ValueError):
        PipelineConfig.from_mapping({"bogus": "1"})


def test_stage_errors_name_the_stage(monkeypatch):
    import p2pbotnet.pipeline as pl

    def boom(*a, **k):
        raise RuntimeError("kaput")

    monkeypatch.setattr(pl, "extract_mcg", boom)
    flows = [FlowRecord(0x0A000001, (20 + i) << 24, Protocol.UDP, 1, 1) for i in range(60)]
    with pytest.raises(PipelineError) as info:
        run_pipeline(flows)
    assert info.value.stage == "mcg_extraction"


def test_external_sources_are_reoriented():
    inside = 0x0A000001
    flows = [FlowRecord((20 + i) << 24, inside, Protocol.UDP, 7, 9) for i in range(60)]
    report = run_pipeline(flows)
    assert report.stage_hosts["p2p_hosts"] == [inside]
    assert report.stages.hosts[inside].patterns == {(Protocol.UDP, 9, 7)}


def test_suspicious_small_communities_reported():
    # two hosts sharing all contacts: a flagged community too small for a 3-clique
    flows = []
    for h in (0x0A000001, 0x0A000002):
        flows += [FlowRecord(h, (20 + i) << 24 | 5, Protocol.UDP, 1, 1) for i in range(60)]
    report = run_pipeline(flows)
    assert len(report.communities) == 1 and report.communities[0].botnet
    assert report.suspicious_small_communities == [0]
    assert report.bot_candidates == []


def test_sweep_rows(default_dataset):
    rows = sweep(default_dataset.flows, default_dataset.truth, "theta_avgmcr", [0.0, 0.25, 1.0])
    assert [r["value"] for r in rows] == [0.0, 0.25, 1.0]
    assert rows[1]["detection_rate"] == 1.0
    assert rows[2]["bot_candidates"] == 0
    with pytest.raises(ValueError):
        sweep(default_dataset.flows, default_dataset.truth, "nonsense", [1])
