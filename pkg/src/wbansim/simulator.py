"""Star-topology experiment harness on a virtual clock.

One hub, up to 64 nodes.  Every node first joins via the management
handshake, then offers saturated stop-and-wait traffic: one outstanding
packet per node, next packet generated the moment the previous one resolves,
until the simulated duration runs out.  A heap-ordered event queue
interleaves the per-link exchanges in virtual time; links never interact,
and each link draws noise from its own channel substream, so results are
reproducible bit for bit from the seed and unaffected by adding nodes.

Frame accounting per link (uplink data frames only):

- s_frm: transmission attempts at the node
- r_frm: frames that arrived at the hub with a valid checksum
  (duplicates included; a retransmission is a frame like any other)
- s_pkt: distinct packets handed to the ARQ sender
- r_pkt: distinct packets the hub accepted

Missing and checksum-failed frames are indistinguishable in these counters,
exactly as a real rig that logs send/receive tallies would see them.
"""

import heapq
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np

from . import analytics
from .channel import ChannelModel, ber_for_distance, preset
from .errors import ConfigError
from .frames import data_frame
from .mac import (DEFAULT_DATA_RATE_BPS, Device, Role,
                  establish_connection, make_link, send_with_arq)

PRESETS = ("wireless", "wired", "explicit")


@dataclass
class ExperimentConfig:
    node_count: int = 6
    distance_m: Union[float, Sequence[float]] = 2.0
    payload_len: int = 10
    max_retries: int = 3
    data_rate_bps: float = DEFAULT_DATA_RATE_BPS
    duration_s: float = 5.0
    seed: int = 1234
    preset: str = "wireless"
    ber: Optional[float] = None                 # explicit flat BER override
    distance_map: Optional[tuple] = None        # explicit calibration table

    def distances(self) -> list[float]:
        if isinstance(self.distance_m, (int, float)):
            return [float(self.distance_m)] * self.node_count
        return [float(d) for d in self.distance_m]

    def validate(self) -> None:
        if not 1 <= self.node_count <= 64:
            raise ConfigError(f"node_count={self.node_count} outside 1..64")
        if not 0 <= self.payload_len <= 255:
            raise ConfigError(f"payload_len={self.payload_len} outside 0..255")
        if self.max_retries < 0:
            raise ConfigError(f"max_retries={self.max_retries} must be >= 0")
        if self.data_rate_bps <= 0:
            raise ConfigError(f"data_rate_bps={self.data_rate_bps} must be positive")
        if self.duration_s <= 0:
            raise ConfigError(f"duration_s={self.duration_s} must be positive")
        if self.preset not in PRESETS:
            raise ConfigError(f"preset={self.preset!r} not one of {PRESETS}")
        distances = self.distances()
        if len(distances) != self.node_count:
            raise ConfigError(
                f"{len(distances)} distances given for {self.node_count} nodes")
        if any(d <= 0 for d in distances):
            raise ConfigError("distances must be positive")
        if self.ber is not None and not 0.0 <= self.ber <= 1.0:
            raise ConfigError(f"ber={self.ber} is not a probability")
        if self.preset == "explicit" and self.ber is None and self.distance_map is None:
            raise ConfigError("explicit preset needs `ber` or `distance_map`")


@dataclass
class LinkCounters:
    s_frm: int = 0
    r_frm: int = 0
    s_pkt: int = 0
    r_pkt: int = 0

    def __post_init__(self):
        if not (0 <= self.r_frm <= self.s_frm and 0 <= self.r_pkt <= self.s_pkt):
            raise ConfigError("counters must satisfy 0 <= received <= sent")

    def __add__(self, other: "LinkCounters") -> "LinkCounters":
        return LinkCounters(self.s_frm + other.s_frm, self.r_frm + other.r_frm,
                            self.s_pkt + other.s_pkt, self.r_pkt + other.r_pkt)

    @property
    def fer(self) -> float:
        return analytics.fer(self.s_frm, self.r_frm) if self.s_frm else 0.0

    @property
    def per(self) -> float:
        return analytics.per(self.s_pkt, self.r_pkt) if self.s_pkt else 0.0


@dataclass
class LinkResult:
    node_id: int
    distance_m: float
    ber: float
    counters: LinkCounters
    delivered: int
    lost: int
    busy_s: float       # link-local virtual time consumed

    @property
    def attempt_failure_rate(self) -> float:
        """Share of ARQ attempts whose data frame or ack was corrupted."""
        if self.counters.s_frm == 0:
            return 0.0
        return (self.counters.s_frm - self.delivered) / self.counters.s_frm


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    links: list[LinkResult]

    @property
    def totals(self) -> LinkCounters:
        total = LinkCounters()
        for link in self.links:
            total = total + link.counters
        return total

    @property
    def fer(self) -> float:
        return self.totals.fer

    @property
    def per(self) -> float:
        return self.totals.per

    @property
    def attempt_failure_rate(self) -> float:
        total = self.totals
        delivered = sum(link.delivered for link in self.links)
        if total.s_frm == 0:
            return 0.0
        return (total.s_frm - delivered) / total.s_frm


class _SensorSource:
    """Synthetic sensor readings: deterministic random bytes, drawn in blocks."""

    def __init__(self, rng, payload_len: int, block: int = 1024):
        self.rng = rng
        self.n = payload_len
        self.block = block
        self.buf = b""
        self.pos = 0

    def take(self) -> bytes:
        n = self.n
        if n == 0:
            return b""
        if self.pos + n > len(self.buf):
            self.buf = self.rng.bytes(n * self.block)
            self.pos = 0
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk


def build_channel(config: ExperimentConfig) -> ChannelModel:
    if config.preset == "explicit":
        return ChannelModel(ber=config.ber if config.ber is not None else 0.0,
                            rng_seed=config.seed,
                            distance_map=config.distance_map)
    return preset(config.preset, rng_seed=config.seed)


def _link_ber(config: ExperimentConfig, model: ChannelModel, distance: float) -> float:
    if config.ber is not None:
        return config.ber
    if model.distance_map:
        return ber_for_distance(distance, model)
    return model.ber


def run_experiment(config: ExperimentConfig,
                   trace: Optional[list] = None) -> ExperimentResult:
    """Execute one timed experiment; fully reproducible from config.seed."""
    config.validate()
    model = build_channel(config)
    distances = config.distances()

    hub = Device(Role.HUB, 0, data_rate_bps=config.data_rate_bps, trace=trace)
    nodes = []
    links = []
    bers = []
    for i in range(config.node_count):
        node = Device(Role.NODE, i + 1, max_retries=config.max_retries,
                      data_rate_bps=config.data_rate_bps, trace=trace)
        ber = _link_ber(config, model, distances[i])
        link = make_link(node, hub, model, ber=ber)
        if not establish_connection(node, hub, link):
            raise ConfigError(f"node {node.device_id} failed to join the hub")
        nodes.append(node)
        links.append(link)
        bers.append(ber)

    sensors = [_SensorSource(model.stream(("sensor", node.device_id)),
                             config.payload_len) for node in nodes]

    # event queue entries: (next send time, node index)
    queue = [(node.now, i) for i, node in enumerate(nodes)]
    heapq.heapify(queue)
    while queue:
        t, i = heapq.heappop(queue)
        if t >= config.duration_s:
            continue
        node = nodes[i]
        frame = data_frame(hub.device_id, node.device_id, 0, sensors[i].take())
        send_with_arq(node, frame, links[i])
        heapq.heappush(queue, (node.now, i))

    results = []
    for i, node in enumerate(nodes):
        counters = LinkCounters(
            s_frm=node.frames_sent,
            r_frm=hub.rx_frames[node.device_id],
            s_pkt=node.packets_sent,
            r_pkt=hub.rx_packets[node.device_id],
        )
        results.append(LinkResult(
            node_id=node.device_id, distance_m=distances[i], ber=bers[i],
            counters=counters, delivered=node.packets_delivered,
            lost=node.packets_lost, busy_s=node.now))
    return ExperimentResult(config=config, links=results)


SWEEP_AXES = {
    "distance": "distance_m",
    "max_retries": "max_retries",
    "payload_len": "payload_len",
}


@dataclass
class SweepRow:
    axis: str
    value: float
    counters: LinkCounters

    @property
    def fer(self) -> float:
        return self.counters.fer

    @property
    def per(self) -> float:
        return self.counters.per


def derive_seed(base_seed: int, index: int) -> int:
    """Stable per-run seed; independent streams for each sweep point."""
    state = np.random.SeedSequence(entropy=[int(base_seed) & (2**64 - 1), index])
    return int(state.generate_state(2, dtype=np.uint64)[0])


def sweep(base: ExperimentConfig, axis: str, values: Sequence) -> list[SweepRow]:
    """Run one experiment per value of `axis`, with per-value derived seeds."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"axis={axis!r} not one of {sorted(SWEEP_AXES)}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    field_name = SWEEP_AXES[axis]
    rows = []
    for index, value in enumerate(values):
        cfg = replace(base, **{field_name: value},
                      seed=derive_seed(base.seed, index))
        result = run_experiment(cfg)
        rows.append(SweepRow(axis=axis, value=value, counters=result.totals))
    return rows
