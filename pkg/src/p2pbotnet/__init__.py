"""
Peer-to-peer botnet detection from aggregated network flows.

Stages
------
p2p_hosts
    Flow clusters with high /16 destination diversity mark P2P hosts.
mcg
    Mutual contact graph: DDR per host, Jaccard-weighted edges.
community
    Weighted modularity and Louvain.
botnet
    AVGDDR/AVGMCR community filter and maximum-clique bot candidates.
pipeline
    The four stages chained, plus ground-truth metrics and reports.
synth
    Labelled synthetic datasets.

Examples
--------
>>> from p2pbotnet import generate_dataset, run_pipeline, compute_metrics
>>> ds = generate_dataset()
>>> report = run_pipeline(ds.flows)
>>> compute_metrics(report, ds.truth)["detection_rate"]
1.0
"""
from .botnet import (BotCandidateSet, BotnetThresholds, CommunityFeatures, community_features,
                     detect_bot_candidates, filter_botnet_communities, max_cliques)
from .community import Community, Partition, louvain, modularity
from .flow_model import (FlowKey, FlowRecord, InternalNetworks, Protocol, RawFlowRecord, format_ip,
                         parse_flow_csv, parse_ip, prefix16, quantize_bpp, read_flow_csv)
from .mcg import MutualContactGraph, compute_ddr, compute_mcr, extract_mcg
from .p2p_hosts import (FlowCluster, P2PHostResult, cluster_flows, detect_p2p_flow_clusters,
                        detect_p2p_hosts)
from .pipeline import (DetectionReport, PipelineConfig, compute_metrics, emit_report, load_report,
                       run_pipeline, sweep)
from .synth import GenConfig, GroundTruth, generate_dataset

__version__ = "0.1.0"
