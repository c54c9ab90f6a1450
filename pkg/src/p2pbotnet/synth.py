"""Labelled synthetic flow datasets for exercising the detector.

The recipe mirrors how gateway evaluation sets are usually assembled:

1. build a background contact graph (clients talking to a handful of popular
   servers plus private destinations packed into a few /16 networks);
2. pick the internal hosts by two-colouring that graph breadth-first, so the
   internal side is bipartite with respect to the external side and every
   internal host shares a contact with another internal host;
3. generate botnet and legitimate P2P traces on placeholder hosts;
4. remap the placeholder hosts onto randomly chosen internal hosts and merge.

Everything is driven by one ``numpy.random.Generator`` seeded from the config,
so a seed reproduces a dataset byte for byte.
"""
from __future__ import annotations

import csv
import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .flow_model import (FlowRecord, HostId, InternalNetworks, Protocol, format_ip,
                         parse_ip, prefix16, write_flow_csv)
from .mcg import compute_mcr
from .p2p_hosts import DEFAULT_THETA_DD

MAX_ATTEMPTS = 10
MIN_BOT_MCR = 0.25
MAX_LEGIT_MCR = 0.1

BLACK, WHITE = "black", "white"
BACKGROUND = "background"

ContactGraph = dict[HostId, set[HostId]]


class GenerationError(RuntimeError):
    pass


@dataclass
class BotnetSpec:
    family: str
    bot_count: int
    peer_pool_size: int = 200
    shared_contact_rate: float = 0.6
    # /16 networks the peer pool spans; None puts every peer in its own /16
    prefix_count: Optional[int] = None
    proto: str = "udp"
    noise_flows: int = 5


@dataclass
class P2PAppSpec:
    app: str
    host_count: int
    peer_universe_size: int = 5000
    contact_count: int = 500
    prefix_count: int = 100
    proto: str = "udp"
    noise_flows: int = 20


@dataclass
class BackgroundSpec:
    popular_server_count: int = 20
    popular_per_host: tuple[int, int] = (1, 6)
    private_per_host: tuple[int, int] = (2, 25)
    private_prefixes_per_host: tuple[int, int] = (1, 3)
    patterns_per_host: tuple[int, int] = (1, 4)
    client_pool_factor: float = 1.5


def _default_botnets():
    return [
        BotnetSpec("storm", 5, peer_pool_size=300, shared_contact_rate=0.6, prefix_count=120),
        BotnetSpec("kelihos", 8, peer_pool_size=150, shared_contact_rate=0.85, proto="tcp"),
    ]


def _default_apps():
    return [
        P2PAppSpec("emule", 5, peer_universe_size=5000, contact_count=500, prefix_count=80),
        P2PAppSpec("utorrent", 5, peer_universe_size=8000, contact_count=600, prefix_count=60,
                   proto="tcp"),
    ]


@dataclass
class GenConfig:
    n_internal: int = 1000
    botnets: list[BotnetSpec] = field(default_factory=_default_botnets)
    p2p_apps: list[P2PAppSpec] = field(default_factory=_default_apps)
    background: BackgroundSpec = field(default_factory=BackgroundSpec)
    seed: int = 0
    internal_cidr: str = "10.0.0.0/8"

    @property
    def bot_count(self) -> int:
        return sum(b.bot_count for b in self.botnets)

    @property
    def p2p_count(self) -> int:
        return sum(a.host_count for a in self.p2p_apps)

    def validate(self) -> None:
        if self.n_internal < 1:
            raise ValueError("n_internal must be positive")
        labels = [b.family for b in self.botnets] + [a.app for a in self.p2p_apps]
        if len(set(labels)) != len(labels):
            raise ValueError("botnet and P2P labels must be unique")
        for b in self.botnets:
            if b.bot_count < 2:
                raise ValueError(f"botnet {b.family!r} needs at least 2 bots")
            if b.peer_pool_size < 1 or not 0 < b.shared_contact_rate <= 1:
                raise ValueError(f"botnet {b.family!r} has an invalid peer pool")
        for a in self.p2p_apps:
            if a.host_count < 1 or a.contact_count < 1:
                raise ValueError(f"P2P app {a.app!r} needs positive host and contact counts")
            if a.contact_count > a.peer_universe_size:
                raise ValueError(f"P2P app {a.app!r}: contact_count exceeds the peer universe")
        if self.bot_count + self.p2p_count > self.n_internal:
            raise ValueError("more injected hosts than internal hosts")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "GenConfig":
        d = dict(d)
        bg = {k: tuple(v) if isinstance(v, list) else v
              for k, v in d.pop("background", {}).items()}
        cfg = cls(background=BackgroundSpec(**bg), **{k: v for k, v in d.items()
                                                     if k not in ("botnets", "p2p_apps")})
        if "botnets" in d:
            cfg.botnets = [BotnetSpec(**b) for b in d["botnets"]]
        if "p2p_apps" in d:
            cfg.p2p_apps = [P2PAppSpec(**a) for a in d["p2p_apps"]]
        return cfg


@dataclass
class GroundTruth:
    labels: dict[HostId, str] = field(default_factory=dict)

    @staticmethod
    def kind(label: str) -> str:
        return label.split(":", 1)[0]

    @staticmethod
    def group(label: str) -> str:
        return label.split(":", 1)[1] if ":" in label else label

    def is_bot(self, host: HostId) -> bool:
        return self.kind(self.labels.get(host, BACKGROUND)) == "bot"

    @property
    def bots(self) -> set[HostId]:
        return {h for h, lab in self.labels.items() if self.kind(lab) == "bot"}

    def family(self, host: HostId) -> Optional[str]:
        lab = self.labels[host]
        return self.group(lab) if self.kind(lab) == "bot" else None

    @property
    def families(self) -> set[str]:
        return {self.group(lab) for lab in self.labels.values() if self.kind(lab) == "bot"}

    def hosts_of(self, kind: str) -> set[HostId]:
        return {h for h, lab in self.labels.items() if self.kind(lab) == kind}

    def write_csv(self, fh) -> None:
        fh.write("ip,label\n")
        for h in sorted(self.labels):
            fh.write(f"{format_ip(h)},{self.labels[h]}\n")

    @classmethod
    def read_csv(cls, path) -> "GroundTruth":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls({parse_ip(r["ip"]): r["label"].strip() for r in rows})


@dataclass
class ColoredSample:
    black: set[HostId]
    white: set[HostId]
    order: list[HostId]
    c_black: int
    c_white: int
    internal: list[HostId]

    @property
    def external(self) -> set[HostId]:
        return self.white


@dataclass
class Trace:
    """Flows of injected hosts before remapping; src ids are placeholders."""
    flows: list[FlowRecord]
    labels: dict[HostId, str]


@dataclass
class BackgroundUniverse:
    contacts: ContactGraph
    clients: list[HostId]
    flows: dict[HostId, list[FlowRecord]]


@dataclass
class Dataset:
    flows: list[FlowRecord]
    truth: GroundTruth
    config: GenConfig
    internal: list[HostId]
    attempts: dict[str, int] = field(default_factory=dict)

    def manifest(self) -> dict:
        labels = list(self.truth.labels.values())
        return {
            "seed": self.config.seed,
            "config": self.config.to_dict(),
            "counts": {
                "flows": len(self.flows),
                "internal_hosts": len(self.truth.labels),
                "bots": sum(GroundTruth.kind(x) == "bot" for x in labels),
                "p2p_hosts": sum(GroundTruth.kind(x) == "p2p" for x in labels),
                "background_hosts": sum(x == BACKGROUND for x in labels),
            },
            "attempts": self.attempts,
        }

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"flows": out / "flows.csv", "truth": out / "truth.csv",
                 "manifest": out / "manifest.json"}
        with open(paths["flows"], "w", newline="") as fh:
            write_flow_csv(self.flows, fh)
        with open(paths["truth"], "w", newline="") as fh:
            self.truth.write_csv(fh)
        paths["manifest"].write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n")
        return paths


_RESERVED_FIRST_OCTETS = {0, 10, 127}


def _external_prefixes() -> np.ndarray:
    prefixes = []
    for a in range(1, 224):
        if a in _RESERVED_FIRST_OCTETS:
            continue
        for b in range(256):
            if (a == 172 and 16 <= b < 32) or (a == 192 and b == 168):
                continue
            prefixes.append((a << 8) | b)
    return np.array(prefixes, dtype=np.int64)


class AddressAllocator:
    """Hands out never-repeating external IPv4 addresses."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.prefixes = _external_prefixes()
        self.used: set[HostId] = set()

    def pick_prefixes(self, k: int) -> np.ndarray:
        if k > len(self.prefixes):
            raise GenerationError(f"cannot pick {k} distinct /16 prefixes")
        return self.rng.choice(self.prefixes, size=k, replace=False)

    def in_prefixes(self, n: int, prefixes: Sequence[int]) -> list[HostId]:
        """n fresh addresses spread uniformly over the given /16 prefixes."""
        prefixes = np.asarray(prefixes, dtype=np.int64)
        if n > 65_000 * len(prefixes):
            raise GenerationError("not enough room in the requested /16 prefixes")
        out: list[HostId] = []
        while len(out) < n:
            need = n - len(out)
            cand = (self.rng.choice(prefixes, size=need) << 16) | self.rng.integers(1, 65535, size=need)
            for a in cand.tolist():
                if a not in self.used:
                    self.used.add(a)
                    out.append(a)
        return out

    def spread(self, n: int) -> list[HostId]:
        """n fresh addresses, each in a distinct /16 where possible."""
        k = min(n, len(self.prefixes))
        prefixes = self.pick_prefixes(k)
        if k == n:
            out = []
            for p in prefixes.tolist():
                out.extend(self.in_prefixes(1, [p]))
            return out
        return self.in_prefixes(n, prefixes)


def _range_draw(rng: np.random.Generator, bounds: tuple[int, int]) -> int:
    lo, hi = bounds
    return int(rng.integers(lo, hi + 1))


def _random_pattern(rng: np.random.Generator, proto: Optional[str] = None) -> tuple[Protocol, int, int]:
    p = Protocol(proto) if proto else (Protocol.TCP if rng.random() < 0.8 else Protocol.UDP)
    return p, int(rng.integers(40, 1500)), int(rng.integers(40, 1500))


def _internal_addresses(cidr: str, n: int, rng: np.random.Generator) -> list[HostId]:
    net = InternalNetworks([cidr]).networks[0]
    size = net.num_addresses - 2
    if n > size:
        raise GenerationError(f"{cidr} cannot hold {n} hosts")
    base = int(net.network_address) + 1
    offsets = rng.choice(size, size=n, replace=False) if size <= 10 * n else None
    if offsets is None:
        picked: set[int] = set()
        while len(picked) < n:
            picked.update(rng.integers(0, size, size=n - len(picked)).tolist())
        offsets = sorted(picked)
    return sorted(base + int(o) for o in offsets)


def generate_background_contacts(cfg: GenConfig, rng: np.random.Generator,
                                 alloc: Optional[AddressAllocator] = None) -> BackgroundUniverse:
    """Contact graph and flows for a pool of background clients.

    Clients draw from a shared set of popular servers (the source of mutual
    contacts) and from private destinations packed into 1-3 /16 networks, over
    a handful of per-client flow patterns. The number of /16 networks one
    client can reach is capped well below the default P2P threshold.
    """
    bg = cfg.background
    if bg.popular_server_count < 1:
        raise GenerationError("need at least one popular server to keep background hosts mutually connected")
    max_dd = bg.popular_per_host[1] + bg.private_prefixes_per_host[1]
    if max_dd >= DEFAULT_THETA_DD:
        raise GenerationError(f"background hosts could reach {max_dd} /16 networks; keep it below {DEFAULT_THETA_DD}")
    alloc = alloc or AddressAllocator(rng)
    n_clients = max(cfg.n_internal, math.ceil(bg.client_pool_factor * cfg.n_internal))
    clients = _internal_addresses(cfg.internal_cidr, n_clients, rng)
    popular = alloc.spread(bg.popular_server_count)
    # a few servers attract most clients
    weights = 1.0 / np.arange(1, len(popular) + 1)
    weights /= weights.sum()

    contacts: ContactGraph = {c: set() for c in clients}
    flows: dict[HostId, list[FlowRecord]] = {}
    for c in clients:
        n_pop = min(_range_draw(rng, bg.popular_per_host), len(popular))
        servers = rng.choice(len(popular), size=n_pop, replace=False, p=weights).tolist()
        k_pref = _range_draw(rng, bg.private_prefixes_per_host)
        private = alloc.in_prefixes(_range_draw(rng, bg.private_per_host), alloc.pick_prefixes(k_pref))
        dsts = sorted({popular[s] for s in servers}) + private
        contacts[c].update(dsts)
        patterns = [_random_pattern(rng) for _ in range(_range_draw(rng, bg.patterns_per_host))]
        picks = rng.integers(0, len(patterns), size=len(dsts)).tolist()
        flows[c] = [FlowRecord(c, d, *patterns[i]) for d, i in zip(dsts, picks)]

    # make sure every client shares at least one server with another client
    server_users: dict[HostId, int] = {}
    for c in clients:
        for d in contacts[c]:
            server_users[d] = server_users.get(d, 0) + 1
    hub = popular[0]
    for c in clients:
        if not any(server_users[d] > 1 for d in contacts[c]) and hub not in contacts[c]:
            contacts[c].add(hub)
            flows[c].append(FlowRecord(c, hub, *flows[c][0].key.pattern))
            server_users[hub] += 1

    for c in clients:
        for d in contacts[c]:
            contacts.setdefault(d, set()).add(c)
    return BackgroundUniverse(contacts, clients, flows)


def two_color_sample(contacts: Mapping[HostId, Iterable[HostId]], n_internal: int,
                     rng: np.random.Generator, start: Optional[HostId] = None) -> ColoredSample:
    """Breadth-first two-colouring until both colours hold ``n_internal`` hosts.

    The start host is black, its contacts white, their contacts black, and so
    on; a host keeps the first colour it gets. The first ``n_internal`` black
    hosts in visiting order become the internal set.
    """
    if start is None:
        nodes = sorted(contacts)
        if not nodes:
            raise GenerationError("empty contact graph")
        start = nodes[int(rng.integers(len(nodes)))]
    color = {start: BLACK}
    order = [start]
    counts = {BLACK: 1, WHITE: 0}
    queue = deque([start])
    while queue and not (counts[BLACK] >= n_internal and counts[WHITE] >= n_internal):
        h = queue.popleft()
        other = WHITE if color[h] == BLACK else BLACK
        for c in sorted(contacts.get(h, ())):
            if c not in color:
                color[c] = other
                counts[other] += 1
                order.append(c)
                queue.append(c)
    if counts[BLACK] < n_internal or counts[WHITE] < n_internal:
        raise GenerationError(
            f"contact graph exhausted at {counts[BLACK]} black / {counts[WHITE]} white hosts; "
            f"need {n_internal} of each, use a larger host universe")
    black = [h for h in order if color[h] == BLACK]
    return ColoredSample(set(black), {h for h in order if color[h] == WHITE}, order,
                         counts[BLACK], counts[WHITE], black[:n_internal])


def _min_pairwise_mcr(sets: list[set[HostId]]) -> float:
    return min((compute_mcr(a, b) for a, b in combinations(sets, 2)), default=1.0)


def _max_pairwise_mcr(sets: list[set[HostId]]) -> float:
    return max((compute_mcr(a, b) for a, b in combinations(sets, 2)), default=0.0)


class _Placeholders:
    """Distinct stand-in ids for injected hosts, later remapped to internal hosts."""

    base = parse_ip("172.16.0.1")

    def __init__(self):
        self.next = self.base

    def take(self, n: int) -> list[HostId]:
        out = list(range(self.next, self.next + n))
        self.next += n
        return out


def _noise(host: HostId, n: int, alloc: AddressAllocator, rng) -> list[FlowRecord]:
    return [FlowRecord(host, d, *_random_pattern(rng)) for d in alloc.spread(n)] if n else []


def generate_botnet_traces(specs: Sequence[BotnetSpec], rng: np.random.Generator,
                           alloc: AddressAllocator, ids: Optional[_Placeholders] = None,
                           attempts: Optional[dict] = None) -> Trace:
    """Bots of a family sample their contacts from one shared peer pool.

    Each family gets its own pool (disjoint addresses) and one management
    flow pattern. Contact draws are retried until every bot pair in the
    family reaches the minimum mutual contact ratio and every bot reaches
    the P2P diversity threshold.
    """
    ids = ids or _Placeholders()
    flows: list[FlowRecord] = []
    labels: dict[HostId, str] = {}
    for spec in specs:
        if spec.bot_count < 2:
            raise GenerationError(f"botnet {spec.family!r} needs at least 2 bots")
        if spec.prefix_count is None:
            pool = alloc.spread(spec.peer_pool_size)
        else:
            pool = alloc.in_prefixes(spec.peer_pool_size, alloc.pick_prefixes(spec.prefix_count))
        pattern = _random_pattern(rng, spec.proto)
        k = max(1, round(spec.shared_contact_rate * len(pool)))
        bots = ids.take(spec.bot_count)
        for attempt in range(1, MAX_ATTEMPTS + 1):
            chosen = [set(rng.choice(pool, size=k, replace=False).tolist()) for _ in bots]
            ok_mcr = _min_pairwise_mcr(chosen) >= MIN_BOT_MCR
            ok_dd = all(len({prefix16(c) for c in s}) >= DEFAULT_THETA_DD for s in chosen)
            if ok_mcr and ok_dd:
                break
        else:
            raise GenerationError(
                f"botnet {spec.family!r}: could not reach pairwise MCR >= {MIN_BOT_MCR} and "
                f"DD >= {DEFAULT_THETA_DD} in {MAX_ATTEMPTS} attempts")
        if attempts is not None:
            attempts[f"bot:{spec.family}"] = attempt
        for bot, peers in zip(bots, chosen):
            labels[bot] = f"bot:{spec.family}"
            flows.extend(FlowRecord(bot, p, *pattern) for p in sorted(peers))
            flows.extend(_noise(bot, spec.noise_flows, alloc, rng))
    return Trace(flows, labels)


def generate_p2p_traces(specs: Sequence[P2PAppSpec], rng: np.random.Generator,
                        alloc: AddressAllocator, ids: Optional[_Placeholders] = None,
                        attempts: Optional[dict] = None) -> Trace:
    """Legitimate P2P hosts draw peers independently from a large per-app universe."""
    ids = ids or _Placeholders()
    flows: list[FlowRecord] = []
    labels: dict[HostId, str] = {}
    for spec in specs:
        if spec.host_count < 1:
            raise GenerationError(f"P2P app {spec.app!r} needs at least one host")
        universe = np.array(alloc.in_prefixes(spec.peer_universe_size,
                                              alloc.pick_prefixes(spec.prefix_count)))
        pattern = _random_pattern(rng, spec.proto)
        hosts = ids.take(spec.host_count)
        for attempt in range(1, MAX_ATTEMPTS + 1):
            chosen = [set(rng.choice(universe, size=spec.contact_count, replace=False).tolist())
                      for _ in hosts]
            ok_dd = all(len({prefix16(c) for c in s}) >= DEFAULT_THETA_DD for s in chosen)
            if ok_dd and _max_pairwise_mcr(chosen) < MAX_LEGIT_MCR:
                break
        else:
            raise GenerationError(
                f"P2P app {spec.app!r}: calibration failed after {MAX_ATTEMPTS} attempts")
        if attempts is not None:
            attempts[f"p2p:{spec.app}"] = attempt
        for host, peers in zip(hosts, chosen):
            labels[host] = f"p2p:{spec.app}"
            flows.extend(FlowRecord(host, p, *pattern) for p in sorted(peers))
            flows.extend(_noise(host, spec.noise_flows, alloc, rng))
    return Trace(flows, labels)


def extract_internal_flows(universe: BackgroundUniverse, internal: Sequence[HostId]) -> list[FlowRecord]:
    """Flows of the selected internal hosts, minus any internal-internal pairs."""
    inside = set(internal)
    return [f for h in sorted(inside) for f in universe.flows.get(h, ()) if f.dst not in inside]


def mix_datasets(background_flows: Sequence[FlowRecord], internal: Sequence[HostId],
                 traces: Sequence[Trace], rng: np.random.Generator) -> tuple[list[FlowRecord], GroundTruth]:
    """Graft injected traces onto randomly chosen internal hosts.

    Chosen hosts keep their background flows and gain the trace flows.
    Flows between injected hosts are dropped to keep the boundary bipartite.
    """
    labels: dict[HostId, str] = {}
    for t in traces:
        labels.update(t.labels)
    placeholders = sorted(labels)
    internal = sorted(internal)
    if len(placeholders) > len(internal):
        raise GenerationError(f"{len(placeholders)} injected hosts but only {len(internal)} internal hosts")
    chosen = rng.choice(len(internal), size=len(placeholders), replace=False).tolist()
    remap = {ph: internal[i] for ph, i in zip(placeholders, chosen)}

    merged = list(background_flows)
    for t in traces:
        for f in t.flows:
            if f.dst in remap:
                continue
            merged.append(FlowRecord(remap[f.src], f.dst, f.proto, f.bpp_out, f.bpp_in))

    truth = GroundTruth({h: BACKGROUND for h in internal})
    for ph, host in remap.items():
        truth.labels[host] = labels[ph]
    return merged, truth


def generate_dataset(cfg: Optional[GenConfig] = None) -> Dataset:
    cfg = cfg or GenConfig()
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    alloc = AddressAllocator(rng)
    universe = generate_background_contacts(cfg, rng, alloc)
    start = universe.clients[int(rng.integers(len(universe.clients)))]
    sample = two_color_sample(universe.contacts, cfg.n_internal, rng, start=start)
    background = extract_internal_flows(universe, sample.internal)

    attempts: dict[str, int] = {}
    ids = _Placeholders()
    bots = generate_botnet_traces(cfg.botnets, rng, alloc, ids, attempts)
    p2p = generate_p2p_traces(cfg.p2p_apps, rng, alloc, ids, attempts)
    flows, truth = mix_datasets(background, sample.internal, [bots, p2p], rng)
    return Dataset(flows, truth, cfg, sorted(sample.internal), attempts)
