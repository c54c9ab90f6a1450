"""Flow records, IPv4 helpers and CSV parsing shared by every stage.

Hosts are plain ``int`` IPv4 addresses internally; :func:`format_ip` gives the
dotted-quad form used in files and reports.
"""
from __future__ import annotations

import enum
import ipaddress
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Sequence, TextIO

HostId = int
Prefix16 = int

FLOW_HEADER = ("src_ip", "dst_ip", "proto", "bpp_out", "bpp_in")
RAW_FLOW_HEADER = ("src_ip", "dst_ip", "proto", "bytes_out", "pkts_out",
                   "bytes_in", "pkts_in")


class FlowError(ValueError):
    """Base class for flow input problems."""


class FlowParseError(FlowError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class FlowValidationError(FlowError):
    pass


class Protocol(str, enum.Enum):
    TCP = "tcp"
    UDP = "udp"

    @classmethod
    def parse(cls, token: str) -> "Protocol":
        try:
            return cls(token.strip().lower())
        except ValueError:
            raise ValueError(f"unknown protocol {token!r}") from None

    def __str__(self) -> str:
        return self.value


def parse_ip(text: str) -> HostId:
    return int(ipaddress.IPv4Address(text.strip()))


def format_ip(host: HostId) -> str:
    return str(ipaddress.IPv4Address(host))


def prefix16(host: HostId) -> Prefix16:
    """Upper 16 bits of an address, i.e. its /16 network."""
    return host >> 16


def format_prefix16(prefix: Prefix16) -> str:
    return f"{prefix >> 8}.{prefix & 0xFF}"


class FlowKey(NamedTuple):
    src: HostId
    proto: Protocol
    bpp_out: int
    bpp_in: int

    @property
    def pattern(self) -> tuple[Protocol, int, int]:
        return (self.proto, self.bpp_out, self.bpp_in)


@dataclass(frozen=True, slots=True)
class FlowRecord:
    src: HostId
    dst: HostId
    proto: Protocol
    bpp_out: int
    bpp_in: int

    def __post_init__(self):
        if self.src == self.dst:
            raise FlowValidationError(f"src equals dst ({format_ip(self.src)})")
        if self.bpp_out < 0 or self.bpp_in < 0:
            raise FlowValidationError("bytes-per-packet must be nonnegative")

    @property
    def key(self) -> FlowKey:
        return FlowKey(self.src, self.proto, self.bpp_out, self.bpp_in)

    def reversed(self) -> "FlowRecord":
        """The same bidirectional flow seen from the destination side."""
        return FlowRecord(self.dst, self.src, self.proto, self.bpp_in, self.bpp_out)


@dataclass(frozen=True, slots=True)
class RawFlowRecord:
    src: HostId
    dst: HostId
    proto: Protocol
    bytes_out: int
    pkts_out: int
    bytes_in: int
    pkts_in: int

    def __post_init__(self):
        for name in ("bytes_out", "pkts_out", "bytes_in", "pkts_in"):
            if getattr(self, name) < 0:
                raise FlowValidationError(f"{name} must be nonnegative")
        if self.pkts_out == 0 and self.bytes_out != 0:
            raise FlowValidationError("bytes_out > 0 with zero packets")
        if self.pkts_in == 0 and self.bytes_in != 0:
            raise FlowValidationError("bytes_in > 0 with zero packets")


def _bpp(nbytes: int, npkts: int) -> int:
    # zero-packet direction maps to 0
    return nbytes // npkts if npkts else 0


def quantize_bpp(raw: RawFlowRecord) -> FlowRecord:
    """Collapse byte/packet counters into floored bytes-per-packet values."""
    return FlowRecord(raw.src, raw.dst, raw.proto,
                      _bpp(raw.bytes_out, raw.pkts_out),
                      _bpp(raw.bytes_in, raw.pkts_in))


def _nonneg_int(token: str, lineno: int, column: str) -> int:
    try:
        value = int(token)
    except ValueError:
        raise FlowParseError(lineno, f"{column} is not an integer: {token!r}") from None
    if value < 0:
        raise FlowParseError(lineno, f"{column} is negative: {value}")
    return value


def _parse_common(fields: list[str], lineno: int):
    try:
        src = parse_ip(fields[0])
        dst = parse_ip(fields[1])
    except ValueError as exc:
        raise FlowParseError(lineno, f"malformed IP address ({exc})") from None
    try:
        proto = Protocol.parse(fields[2])
    except ValueError as exc:
        raise FlowParseError(lineno, str(exc)) from None
    return src, dst, proto


def _split_header(line: str) -> tuple[str, ...]:
    return tuple(f.strip().lower() for f in line.strip().split(","))


def iter_flow_csv(lines: Iterable[str]) -> Iterator[FlowRecord]:
    """Stream :class:`FlowRecord` objects out of CSV text lines.

    Accepts the canonical ``src_ip,dst_ip,proto,bpp_out,bpp_in`` layout or the
    raw counter layout, which is quantized on ingest. Blank lines are skipped.
    """
    it = iter(lines)
    try:
        header = _split_header(next(it))
    except StopIteration:
        raise FlowParseError(1, "missing header") from None
    if header == FLOW_HEADER:
        raw = False
    elif header == RAW_FLOW_HEADER:
        raw = True
    else:
        raise FlowParseError(1, f"unexpected header {','.join(header)!r}")
    ncols = len(header)

    for lineno, line in enumerate(it, start=2):
        line = line.strip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != ncols:
            raise FlowParseError(lineno, f"expected {ncols} columns, got {len(fields)}")
        src, dst, proto = _parse_common(fields, lineno)
        nums = [_nonneg_int(tok.strip(), lineno, col)
                for tok, col in zip(fields[3:], header[3:])]
        try:
            if raw:
                yield quantize_bpp(RawFlowRecord(src, dst, proto, *nums))
            else:
                yield FlowRecord(src, dst, proto, *nums)
        except FlowValidationError as exc:
            raise FlowValidationError(f"line {lineno}: {exc}") from None


def parse_flow_csv(lines: Iterable[str]) -> list[FlowRecord]:
    return list(iter_flow_csv(lines))


def read_flow_csv(path) -> list[FlowRecord]:
    with open(path, newline="") as fh:
        return parse_flow_csv(fh)


def render_flow(flow: FlowRecord) -> str:
    return (f"{format_ip(flow.src)},{format_ip(flow.dst)},{flow.proto.value},"
            f"{flow.bpp_out},{flow.bpp_in}")


def write_flow_csv(flows: Iterable[FlowRecord], fh: TextIO) -> None:
    fh.write(",".join(FLOW_HEADER) + "\n")
    for flow in flows:
        fh.write(render_flow(flow) + "\n")


def render_flow_csv(flows: Iterable[FlowRecord]) -> str:
    return "\n".join([",".join(FLOW_HEADER), *map(render_flow, flows)]) + "\n"


class InternalNetworks:
    """Membership test for the configured internal CIDR blocks."""

    def __init__(self, cidrs: Sequence[str]):
        if not cidrs:
            raise ValueError("at least one internal CIDR is required")
        self.networks = [ipaddress.IPv4Network(c, strict=False) for c in cidrs]
        self._ranges = [(int(n.network_address), int(n.broadcast_address))
                        for n in self.networks]

    def __contains__(self, host: HostId) -> bool:
        return any(lo <= host <= hi for lo, hi in self._ranges)

    def __repr__(self):
        return f"InternalNetworks({[str(n) for n in self.networks]!r})"


def orient_flows(flows: Iterable[FlowRecord], internal: InternalNetworks) -> list[FlowRecord]:
    """Key every boundary flow by its internal endpoint.

    Flows that start outside and end inside are flipped (src/dst and the two
    BPP directions swapped). Internal-internal and external-external flows are
    not visible at a gateway and are dropped.
    """
    out = []
    for f in flows:
        src_in = f.src in internal
        dst_in = f.dst in internal
        if src_in and not dst_in:
            out.append(f)
        elif dst_in and not src_in:
            out.append(f.reversed())
    return out
