"""End-to-end detection run, ground-truth scoring and report files."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

from .botnet import (DEFAULT_THETA_AVGDDR, DEFAULT_THETA_AVGMCR, MIN_CLIQUE_SIZE, BotnetThresholds,
                     community_features, detect_bot_candidates, filter_botnet_communities)
from .community import DEFAULT_RESOLUTION, DEFAULT_SEED, Partition, louvain
from .flow_model import FlowRecord, HostId, InternalNetworks, format_ip, orient_flows, parse_ip
from .mcg import DEFAULT_THETA_MCR, MutualContactGraph, extract_mcg
from .p2p_hosts import DEFAULT_THETA_DD, P2PHostResult, detect_p2p_hosts
from .synth import GroundTruth

STAGES = ("input_hosts", "p2p_hosts", "community_hosts", "botnet_community_hosts", "bot_candidates")


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    theta_dd: int = DEFAULT_THETA_DD
    theta_mcr: float = DEFAULT_THETA_MCR
    theta_avgddr: float = DEFAULT_THETA_AVGDDR
    theta_avgmcr: float = DEFAULT_THETA_AVGMCR
    louvain_resolution: float = DEFAULT_RESOLUTION
    louvain_seed: int = DEFAULT_SEED
    internal_cidrs: list[str] = field(default_factory=lambda: ["10.0.0.0/8"])
    worker_count: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if int(self.theta_dd) != self.theta_dd or self.theta_dd < 1:
            raise ValueError(f"theta_dd must be a positive integer, got {self.theta_dd!r}")
        for name in ("theta_mcr", "theta_avgddr", "theta_avgmcr"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
        if self.louvain_resolution <= 0:
            raise ValueError("louvain_resolution must be positive")
        if self.worker_count < 1:
            raise ValueError("worker_count must be at least 1")
        InternalNetworks(self.internal_cidrs)

    def replace(self, **changes) -> "PipelineConfig":
        return PipelineConfig(**{**asdict(self), **changes})

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "PipelineConfig":
        """Build from string or typed values, e.g. a parsed key=value file."""
        types = {f.name: f.type for f in fields(cls)}
        kwargs: dict[str, Any] = {}
        for key, value in values.items():
            key = key.strip().replace("-", "_")
            if key == "internal_cidr":
                key = "internal_cidrs"
            if key not in types:
                raise ValueError(f"unknown config key {key!r}")
            if key == "internal_cidrs":
                kwargs[key] = [c.strip() for c in value.split(",")] if isinstance(value, str) else list(value)
            elif key in ("theta_dd", "louvain_seed", "worker_count"):
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        return cls(**kwargs)

    @classmethod
    def read_kv(cls, path) -> dict[str, str]:
        values = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
        return values


@dataclass
class CommunityRecord:
    id: int
    members: list[HostId]
    avgddr: float
    avgmcr: float
    botnet: bool

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass
class StageResults:
    """In-memory intermediates of one run; not serialized."""
    flows: list[FlowRecord]
    hosts: dict[HostId, P2PHostResult]
    graph: MutualContactGraph
    partition: Optional[Partition]


@dataclass
class DetectionReport:
    config: dict
    stage_counts: dict[str, int]
    stage_hosts: dict[str, list[HostId]]
    communities: list[CommunityRecord]
    cliques: list[list[HostId]]
    bot_candidates: list[HostId]
    suspicious_small_communities: list[int]
    metrics: Optional[dict] = None
    stages: Optional[StageResults] = field(default=None, repr=False, compare=False)

    def community_of(self) -> dict[HostId, int]:
        return {h: c.id for c in self.communities for h in c.members}

    def to_dict(self) -> dict:
        ips = lambda hs: [format_ip(h) for h in hs]
        return {
            "config": self.config,
            "stage_counts": dict(self.stage_counts),
            "stage_hosts": {k: ips(v) for k, v in self.stage_hosts.items()},
            "communities": [
                {"id": c.id, "size": c.size, "members": ips(c.members), "avgddr": c.avgddr,
                 "avgmcr": c.avgmcr, "botnet": c.botnet}
                for c in self.communities
            ],
            "bot_candidates": {"cliques": [ips(c) for c in self.cliques], "hosts": ips(self.bot_candidates)},
            "suspicious_small_communities": list(self.suspicious_small_communities),
            "metrics": self.metrics,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "DetectionReport":
        hosts = lambda xs: [parse_ip(x) for x in xs]
        return cls(
            config=d["config"],
            stage_counts={k: int(v) for k, v in d["stage_counts"].items()},
            stage_hosts={k: hosts(v) for k, v in d["stage_hosts"].items()},
            communities=[CommunityRecord(c["id"], hosts(c["members"]), c["avgddr"], c["avgmcr"], c["botnet"])
                         for c in d["communities"]],
            cliques=[hosts(c) for c in d["bot_candidates"]["cliques"]],
            bot_candidates=hosts(d["bot_candidates"]["hosts"]),
            suspicious_small_communities=list(d["suspicious_small_communities"]),
            metrics=d.get("metrics"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv_summary(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["community_id", "size", "avgddr", "avgmcr", "botnet", "bot_candidates", "members"])
        bots = set(self.bot_candidates)
        for c in self.communities:
            w.writerow([c.id, c.size, repr(c.avgddr), repr(c.avgmcr), int(c.botnet),
                        sum(h in bots for h in c.members), " ".join(format_ip(h) for h in c.members)])
        return buf.getvalue()


class _StageCache:
    """Reuses earlier stage outputs across runs that differ only in later thresholds."""

    def __init__(self):
        self.p2p: dict = {}
        self.mcg: dict = {}
        self.louvain: dict = {}


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as exc:
        raise PipelineError(name, exc) from exc


def run_pipeline(flows: Iterable[FlowRecord], cfg: Optional[PipelineConfig] = None,
                 cache: Optional[_StageCache] = None) -> DetectionReport:
    """P2P host detection, MCG extraction, Louvain, then botnet and clique detection."""
    cfg = cfg or PipelineConfig()
    internal = InternalNetworks(cfg.internal_cidrs)
    oriented = orient_flows(flows, internal)
    input_hosts = sorted({f.src for f in oriented})
    cache = cache or _StageCache()

    key1 = cfg.theta_dd
    if key1 not in cache.p2p:
        cache.p2p[key1] = _stage("p2p_host_detection", detect_p2p_hosts, oriented, cfg.theta_dd, cfg.worker_count)
    hosts = cache.p2p[key1]

    key2 = (key1, cfg.theta_mcr)
    if key2 not in cache.mcg:
        cache.mcg[key2] = _stage("mcg_extraction", extract_mcg, hosts, cfg.theta_mcr, cfg.worker_count)
    graph = cache.mcg[key2]

    key3 = (key2, cfg.louvain_resolution, cfg.louvain_seed)
    if key3 not in cache.louvain:
        cache.louvain[key3] = (_stage("community_detection", louvain, graph, cfg.louvain_resolution,
                                      cfg.louvain_seed) if len(graph) else None)
    partition = cache.louvain[key3]

    communities: list[CommunityRecord] = []
    cliques: list[list[HostId]] = []
    bots: list[HostId] = []
    suspicious: list[int] = []
    if partition is not None:
        th = BotnetThresholds(cfg.theta_avgddr, cfg.theta_avgmcr)
        feats = _stage("botnet_detection", community_features, graph, partition)
        flagged = filter_botnet_communities(feats, th)
        candidates = _stage("botnet_detection", detect_bot_candidates, graph, flagged, partition)
        groups = partition.groups()
        communities = [CommunityRecord(f.community_id, groups[f.community_id], f.avgddr, f.avgmcr,
                                       f.community_id in flagged) for f in feats]
        cliques = [list(c) for c in candidates.cliques]
        bots = sorted(candidates.bots)
        suspicious = sorted(c.id for c in communities if c.botnet and c.size < MIN_CLIQUE_SIZE)

    flagged_hosts = sorted(h for c in communities if c.botnet for h in c.members)
    stage_hosts = {
        "input_hosts": input_hosts,
        "p2p_hosts": sorted(hosts),
        "community_hosts": sorted(partition.assignment) if partition else [],
        "botnet_community_hosts": flagged_hosts,
        "bot_candidates": bots,
    }
    return DetectionReport(
        config=asdict(cfg),
        stage_counts={k: len(stage_hosts[k]) for k in STAGES},
        stage_hosts=stage_hosts,
        communities=communities,
        cliques=cliques,
        bot_candidates=bots,
        suspicious_small_communities=suspicious,
        stages=StageResults(oriented, hosts, graph, partition),
    )


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def compute_metrics(report: DetectionReport, truth: GroundTruth) -> dict:
    """Detection rate, false positives and the three clustering-quality rates.

    FBSR keeps its sign: fewer bot-holding communities than botnets gives a
    negative value, and ``botnet_merge`` is set.
    """
    missing = [h for h in report.stage_hosts["input_hosts"] if h not in truth.labels]
    if missing:
        raise ValueError(f"ground truth lacks {len(missing)} internal hosts, e.g. {format_ip(missing[0])}")

    true_bots = truth.bots
    flagged = set(report.bot_candidates)
    detected = flagged & true_bots
    false_pos = flagged - true_bots

    legit_all = [h for h in truth.labels if h not in true_bots]
    community_hosts = report.stage_hosts["community_hosts"]
    legit_present = [h for h in community_hosts if h not in true_bots]
    bots_present = [h for h in community_hosts if h in true_bots]

    members = {c.id: c.members for c in report.communities}
    bot_coms = {cid for cid, ms in members.items() if any(h in true_bots for h in ms)}
    families_in = {cid: {truth.family(h) for h in members[cid] if h in true_bots} for cid in bot_coms}
    com_of = report.community_of()

    falsely_clustered = sum(com_of[h] in bot_coms for h in legit_present)
    cross_bots = sum(len(families_in[com_of[h]]) > 1 for h in bots_present)
    n_botnets = len(truth.families)

    return {
        "true_bots": len(true_bots),
        "detected_bots": len(detected),
        "detection_rate": _ratio(len(detected), len(true_bots)),
        "false_positives": len(false_pos),
        "fpr": _ratio(len(false_pos), len(legit_present)),
        "fpr_p2p_hosts": _ratio(len(false_pos), len(legit_present)),
        "fpr_all_internal": _ratio(len(false_pos), len(legit_all)),
        "flcr": _ratio(falsely_clustered, len(legit_present)),
        "fbcr": _ratio(cross_bots, len(bots_present)),
        "fbsr": _ratio(len(bot_coms) - n_botnets, n_botnets),
        "bot_communities": len(bot_coms),
        "botnet_count": n_botnets,
        "botnet_merge": len(bot_coms) < n_botnets,
    }


def emit_report(report: DetectionReport, path, fmt: str = "json") -> Path:
    if fmt == "json":
        text = report.to_json()
    elif fmt == "csv-summary":
        text = report.to_csv_summary()
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    path = Path(path)
    path.write_text(text)
    return path


def load_report(path) -> DetectionReport:
    return DetectionReport.from_dict(json.loads(Path(path).read_text()))


SWEEPABLE = {"theta_dd": "theta_dd", "theta_mcr": "theta_mcr", "theta_avgddr": "theta_avgddr",
             "theta_avgmcr": "theta_avgmcr", "resolution": "louvain_resolution",
             "louvain_resolution": "louvain_resolution"}


def sweep(flows: Sequence[FlowRecord], truth: GroundTruth, param: str, values: Iterable[float],
          cfg: Optional[PipelineConfig] = None) -> list[dict]:
    """Run the pipeline over a grid of one threshold; one row of counts and metrics per value."""
    if param not in SWEEPABLE:
        raise ValueError(f"cannot sweep {param!r}; choose from {sorted(SWEEPABLE)}")
    cfg = cfg or PipelineConfig()
    flows = list(flows)
    cache = _StageCache()
    rows = []
    for value in values:
        value = int(value) if param == "theta_dd" else float(value)
        report = run_pipeline(flows, cfg.replace(**{SWEEPABLE[param]: value}), cache)
        row = {"param": param, "value": value, **report.stage_counts}
        row.update({k: v for k, v in compute_metrics(report, truth).items()})
        rows.append(row)
    return rows


def write_sweep_csv(rows: Sequence[dict], fh) -> None:
    if not rows:
        return
    w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
