"""Polling MAC engine: management, data service, and data transmission.

Each device runs one logical poll loop.  `poll_step` consumes at most one
inbox event per call and dispatches it to one of three handlers mirroring
the protocol's service split:

- management: connection build-up/tear-down handshake and the hub's
  connected-node table (capacity 64)
- data service: fragmentation of service data units into frame payloads
  and reassembly of arriving fragments, with a gap timeout
- data transmission: framing, CRC verification, address judgment, payload
  ciphering, acks, and stop-and-wait ARQ with a retry limit

Cross-layer commands and notifications travel as Primitives; frames travel
as wire bytes produced/consumed here.  Poll outputs are action tuples:
``("tx", frame, wire_bytes)`` for transmissions and ``("ind", primitive)``
for upward notifications.

Timing is virtual: a driver (the simulator or a test) advances
``device.now`` and the device compares it against its own deadlines.  The
ack timeout is the on-air time of one maximum-size frame at the configured
data rate plus a 2x guard, the smallest value that can never expire on an
exchange that is still in flight.
"""

from collections import Counter, deque
from dataclasses import dataclass
from enum import Enum, auto
from typing import Optional

from .channel import ChannelModel, FrameCorruptor
from .errors import EmptySduError, ProtocolError, RangeError
from .frames import (Frame, FrameType, ack_frame, data_frame, decode_frame,
                     encode_frame, management_frame)
from . import frames as _frames
from .errors import CrcError, MalformedError, TruncatedError

MAX_NODES = 64
MAX_FRAME_BYTES = _frames.MAX_PAYLOAD + _frames.OVERHEAD_BYTES
MAX_FRAGMENTS = _frames.MAX_FRAGMENT_INDEX + 1
DEFAULT_DATA_RATE_BPS = 121_400


class PrimitiveFamily(Enum):
    MANAGEMENT = auto()
    DATA_SERVICE = auto()
    DATA_TRANSFER = auto()


class PrimitiveKind(Enum):
    REQUEST = auto()
    CONFIRM = auto()
    INDICATION = auto()


@dataclass
class Primitive:
    family: PrimitiveFamily
    kind: PrimitiveKind
    payload: dict


class Role(Enum):
    HUB = auto()
    NODE = auto()


class Connection(Enum):
    IDLE = auto()
    CONNECTING = auto()
    CONNECTED = auto()
    DISCONNECTING = auto()


class IdentityCipher:
    """Stand-in for the (unspecified) link cipher: passes bytes through."""

    def encrypt(self, data: bytes) -> bytes:
        return data

    def decrypt(self, data: bytes) -> bytes:
        return data


@dataclass
class TransmissionOutcome:
    success: bool
    attempts_used: int
    elapsed_s: float = 0.0


@dataclass
class _PendingAck:
    frame: Frame
    wire: bytes
    sdu_id: int
    attempts_used: int
    deadline: float


@dataclass
class _ReassemblyEntry:
    chunks: dict
    last_index: Optional[int]
    deadline: float


def ack_timeout_for_rate(data_rate_bps: float) -> float:
    return 3.0 * (MAX_FRAME_BYTES * 8) / data_rate_bps


def fragment_sdu(sdu: bytes, max_payload: int) -> list[bytes]:
    """Split `sdu` into consecutive chunks of at most `max_payload` bytes.

    Concatenating the result reproduces `sdu` exactly; the final chunk is
    the only one allowed to be short.
    """
    if max_payload < 1:
        raise RangeError(f"max_payload={max_payload} must be >= 1")
    if len(sdu) == 0:
        raise EmptySduError("cannot fragment an empty service data unit")
    return [bytes(sdu[i:i + max_payload]) for i in range(0, len(sdu), max_payload)]


class Device:
    """One hub or node: state, counters, and the three-way poll dispatch."""

    def __init__(self, role: Role, device_id: int, *, max_retries: int = 3,
                 max_payload: int = _frames.MAX_PAYLOAD,
                 data_rate_bps: float = DEFAULT_DATA_RATE_BPS,
                 ack_timeout: Optional[float] = None,
                 reassembly_timeout: Optional[float] = None,
                 cipher=None, trace: Optional[list] = None):
        if not 0 <= device_id <= 255:
            raise RangeError(f"device_id={device_id} does not fit in one byte")
        self.role = role
        self.device_id = device_id
        self.max_retries = max_retries
        self.max_payload = max_payload
        self.data_rate_bps = data_rate_bps
        self.ack_timeout = (ack_timeout if ack_timeout is not None
                            else ack_timeout_for_rate(data_rate_bps))
        self.reassembly_timeout = (reassembly_timeout if reassembly_timeout is not None
                                   else 10.0 * self.ack_timeout)
        self.cipher = cipher if cipher is not None else IdentityCipher()
        self.trace = trace

        self.now = 0.0
        self.connection = Connection.IDLE
        self.hub_id: Optional[int] = None          # node side
        self.registry: dict[int, float] = {}       # hub side: node id -> join time
        self.next_sequence = 0
        self.inbox: deque = deque()

        self._tx_queue: deque = deque()            # (sdu_id, Frame)
        self._pending: Optional[_PendingAck] = None
        self._next_sdu_id = 0
        self._mgmt_deadline: Optional[float] = None
        self._reassembly: dict = {}                # (sender, base_seq) -> entry
        self._last_accepted: dict[int, int] = {}   # sender -> last data sequence
        self._ack_tx_memo: dict = {}               # (sender, seq) -> tx action
        self._ack_rx_memo: dict = {}               # ack wire bytes -> Frame

        # raw tallies; the simulator folds them into per-link counters
        self.frames_sent = 0        # data-frame transmission attempts
        self.packets_sent = 0       # distinct SDUs handed down
        self.packets_delivered = 0  # SDUs confirmed by ack
        self.packets_lost = 0       # SDUs exhausted after all retries
        self.rx_frames: Counter = Counter()   # per sender, intact data frames
        self.rx_packets: Counter = Counter()  # per sender, completed SDUs
        self.drops: Counter = Counter()       # reason -> count

    # ------------------------------------------------------------------ API

    def deliver(self, wire: bytes) -> None:
        """Queue received wire bytes for the next poll."""
        self.inbox.append(("frame", wire))

    def deliver_primitive(self, primitive: Primitive) -> None:
        self.inbox.append(("primitive", primitive))

    def request_connect(self, hub_id: int) -> None:
        self.deliver_primitive(Primitive(
            PrimitiveFamily.MANAGEMENT, PrimitiveKind.REQUEST,
            {"action": "connect", "hub_id": hub_id}))

    def request_disconnect(self) -> None:
        self.deliver_primitive(Primitive(
            PrimitiveFamily.MANAGEMENT, PrimitiveKind.REQUEST,
            {"action": "disconnect"}))

    def request_send(self, sdu: bytes) -> None:
        self.deliver_primitive(Primitive(
            PrimitiveFamily.DATA_SERVICE, PrimitiveKind.REQUEST, {"sdu": sdu}))

    def poll_step(self) -> list:
        """Consume at most one inbox event; otherwise advance timers."""
        outputs: list = []
        if self.inbox:
            kind, item = self.inbox.popleft()
            if kind == "frame":
                self._on_wire(item, outputs)
            else:
                self._on_primitive(item, outputs)
        else:
            self._check_timers(outputs)
        return outputs

    # ------------------------------------------------------- event dispatch

    def _record(self, primitive: Primitive) -> None:
        if self.trace is not None:
            self.trace.append((self.now, self.device_id,
                               primitive.family.name, primitive.kind.name))

    def _emit(self, outputs: list, primitive: Primitive) -> None:
        self._record(primitive)
        outputs.append(("ind", primitive))

    def _on_primitive(self, primitive: Primitive, outputs: list) -> None:
        self._record(primitive)
        if primitive.family is PrimitiveFamily.MANAGEMENT:
            self.handle_management(primitive, outputs)
        elif primitive.family is PrimitiveFamily.DATA_SERVICE:
            self._data_service_request(primitive, outputs)
        else:  # raw frame handed straight to the transmission module
            frame = primitive.payload["frame"]
            self._enqueue_frames([frame], outputs)

    def _on_wire(self, wire: bytes, outputs: list) -> None:
        frame = self._ack_rx_memo.get(wire) if len(wire) == 9 else None
        if frame is None:
            try:
                frame = decode_frame(wire)
            except CrcError as exc:
                self.drops["crc"] += 1
                if exc.header is not None:
                    self.drops[f"crc_from_{exc.header.sender_id}"] += 1
                return
            except TruncatedError:
                self.drops["truncated"] += 1
                return
            except MalformedError:
                self.drops["malformed"] += 1
                return
            if frame.header.frame_type is FrameType.ACK:
                self._ack_rx_memo[wire] = frame
        if frame.header.recipient_id != self.device_id:
            self.drops["address"] += 1
            return
        ftype = frame.header.frame_type
        if ftype is FrameType.DATA:
            self._data_rx(frame, outputs)
        elif ftype is FrameType.ACK:
            self._ack_rx(frame, outputs)
        else:
            self.handle_management(frame, outputs)

    def _check_timers(self, outputs: list) -> None:
        if self._pending is not None and self.now >= self._pending.deadline:
            self._retry_or_give_up(outputs)
        if self._mgmt_deadline is not None and self.now >= self._mgmt_deadline:
            self._mgmt_retry(outputs)
        if self._reassembly:
            expired = [key for key, entry in self._reassembly.items()
                       if self.now >= entry.deadline]
            for key in expired:
                entry = self._reassembly.pop(key)
                self.drops["gap"] += 1
                self._emit(outputs, Primitive(
                    PrimitiveFamily.DATA_SERVICE, PrimitiveKind.INDICATION,
                    {"error": "gap", "sender": key[0],
                     "missing": self._missing_indices(entry)}))

    # ----------------------------------------------------------- management

    def handle_management(self, event, outputs: list) -> None:
        """Connection handshake: build-up, assignment, tear-down."""
        if isinstance(event, Primitive):
            action = event.payload.get("action")
            if action == "connect":
                self._start_connect(event.payload["hub_id"], outputs)
            elif action == "disconnect":
                self._start_disconnect(outputs)
            else:
                raise ProtocolError(f"unknown management action {action!r}")
            return

        frame: Frame = event
        ftype = frame.header.frame_type
        sender = frame.header.sender_id
        if ftype is FrameType.MGMT_REQUEST:
            if self.role is not Role.HUB:
                self._protocol_drop("request_at_node")
                return
            if sender in self.registry:
                self._send_mgmt(FrameType.MGMT_ASSIGNMENT, sender, outputs)
                return
            if len(self.registry) >= MAX_NODES:
                self.drops["capacity"] += 1
                self._send_mgmt(FrameType.MGMT_DISCONNECT, sender, outputs)
                return
            self.registry[sender] = self.now
            self._send_mgmt(FrameType.MGMT_ASSIGNMENT, sender, outputs)
            self._emit(outputs, Primitive(
                PrimitiveFamily.MANAGEMENT, PrimitiveKind.INDICATION,
                {"event": "node_joined", "node_id": sender}))
        elif ftype is FrameType.MGMT_ASSIGNMENT:
            if self.role is not Role.NODE or self.connection is not Connection.CONNECTING \
                    or sender != self.hub_id:
                self._protocol_drop("unexpected_assignment")
                return
            self.connection = Connection.CONNECTED
            self._mgmt_deadline = None
            self._emit(outputs, Primitive(
                PrimitiveFamily.MANAGEMENT, PrimitiveKind.CONFIRM,
                {"event": "connected", "hub_id": sender}))
            self._transmit_next(outputs)   # flush data held during the handshake
        elif ftype is FrameType.MGMT_DISCONNECT:
            if self.role is Role.HUB:
                if sender in self.registry:
                    del self.registry[sender]
                    self._emit(outputs, Primitive(
                        PrimitiveFamily.MANAGEMENT, PrimitiveKind.INDICATION,
                        {"event": "node_left", "node_id": sender}))
                else:
                    self._protocol_drop("disconnect_unknown_node")
            else:
                if self.connection is Connection.CONNECTING:
                    # join rejected (hub at capacity)
                    self.connection = Connection.IDLE
                    self._mgmt_deadline = None
                    self._emit(outputs, Primitive(
                        PrimitiveFamily.MANAGEMENT, PrimitiveKind.CONFIRM,
                        {"event": "rejected", "hub_id": sender}))
                elif self.connection in (Connection.CONNECTED, Connection.DISCONNECTING):
                    was_tearing_down = self.connection is Connection.DISCONNECTING
                    self.connection = Connection.IDLE
                    self._mgmt_deadline = None
                    self._emit(outputs, Primitive(
                        PrimitiveFamily.MANAGEMENT,
                        PrimitiveKind.CONFIRM if was_tearing_down
                        else PrimitiveKind.INDICATION,
                        {"event": "disconnected", "hub_id": sender}))
                else:
                    self._protocol_drop("disconnect_while_idle")

    def _start_connect(self, hub_id: int, outputs: list) -> None:
        if self.role is not Role.NODE or self.connection is not Connection.IDLE:
            self._protocol_drop("connect_request_bad_state")
            return
        self.hub_id = hub_id
        self.connection = Connection.CONNECTING
        self._send_mgmt(FrameType.MGMT_REQUEST, hub_id, outputs)
        self._mgmt_deadline = self.now + self.ack_timeout

    def _start_disconnect(self, outputs: list) -> None:
        if self.role is Role.NODE and self.connection is Connection.CONNECTED:
            self.connection = Connection.DISCONNECTING
            self._send_mgmt(FrameType.MGMT_DISCONNECT, self.hub_id, outputs)
            self.connection = Connection.IDLE
            self._emit(outputs, Primitive(
                PrimitiveFamily.MANAGEMENT, PrimitiveKind.CONFIRM,
                {"event": "disconnected", "hub_id": self.hub_id}))
        else:
            self._protocol_drop("disconnect_bad_state")

    def _mgmt_retry(self, outputs: list) -> None:
        if self.connection is Connection.CONNECTING:
            self._send_mgmt(FrameType.MGMT_REQUEST, self.hub_id, outputs)
            self._mgmt_deadline = self.now + self.ack_timeout
        else:
            self._mgmt_deadline = None

    def _send_mgmt(self, ftype: FrameType, recipient: int, outputs: list) -> None:
        frame = management_frame(ftype, recipient, self.device_id, self._take_sequence())
        outputs.append(("tx", frame, encode_frame(frame)))

    def _protocol_drop(self, reason: str) -> None:
        self.drops["protocol"] += 1
        self.drops[f"protocol_{reason}"] += 1

    # --------------------------------------------------------- data service

    def _data_service_request(self, primitive: Primitive, outputs: list) -> None:
        sdu = primitive.payload["sdu"]
        if self.hub_id is None:
            raise ProtocolError("no hub association; connect before sending data")
        chunks = fragment_sdu(sdu, self.max_payload)
        if len(chunks) > MAX_FRAGMENTS:
            raise RangeError(
                f"SDU needs {len(chunks)} fragments; the header carries at most {MAX_FRAGMENTS}")
        last = len(chunks) - 1
        frames = [data_frame(self.hub_id, self.device_id, 0, self.cipher.encrypt(chunk),
                             fragment_index=i, last_fragment=(i == last))
                  for i, chunk in enumerate(chunks)]
        self._enqueue_frames(frames, outputs)

    def _enqueue_frames(self, frames: list[Frame], outputs: list) -> None:
        sdu_id = self._next_sdu_id
        self._next_sdu_id += 1
        self.packets_sent += 1
        for frame in frames:
            frame.header.sequence = self._take_sequence()
            frame.header.payload_len = len(frame.body)
            self._tx_queue.append((sdu_id, frame))
        self._transmit_next(outputs)

    def _take_sequence(self) -> int:
        seq = self.next_sequence
        self.next_sequence = (seq + 1) & 0xFF
        return seq

    def reassemble(self, frame: Frame) -> Optional[bytes]:
        """Feed one data frame in; give the whole SDU back once complete.

        Fragments may arrive in any order.  Grouping key is the sequence
        number the first fragment carried, recovered as
        (sequence - fragment_index) mod 256.
        """
        header = frame.header
        if header.fragment_index == 0 and header.last_fragment:
            return self.cipher.decrypt(frame.body)   # unfragmented SDU
        base_seq = (header.sequence - header.fragment_index) & 0xFF
        key = (header.sender_id, base_seq)
        entry = self._reassembly.get(key)
        if entry is None:
            entry = _ReassemblyEntry({}, None, self.now + self.reassembly_timeout)
            self._reassembly[key] = entry
        entry.chunks[header.fragment_index] = self.cipher.decrypt(frame.body)
        if header.last_fragment:
            entry.last_index = header.fragment_index
        if entry.last_index is None or len(entry.chunks) != entry.last_index + 1:
            return None
        del self._reassembly[key]
        return b"".join(entry.chunks[i] for i in range(entry.last_index + 1))

    @staticmethod
    def _missing_indices(entry: _ReassemblyEntry) -> list[int]:
        upper = entry.last_index if entry.last_index is not None else max(entry.chunks)
        return [i for i in range(upper + 1) if i not in entry.chunks]

    # ---------------------------------------------------- data transmission

    def _data_rx(self, frame: Frame, outputs: list) -> None:
        sender = frame.header.sender_id
        if self.role is Role.HUB:
            if sender not in self.registry:
                self.drops["access"] += 1
                return
        elif not (self.connection is Connection.CONNECTED and sender == self.hub_id):
            self.drops["access"] += 1
            return
        self.rx_frames[sender] += 1
        key = (sender, frame.header.sequence)
        action = self._ack_tx_memo.get(key)
        if action is None:
            ack = ack_frame(sender, self.device_id, frame.header.sequence)
            action = ("tx", ack, encode_frame(ack))
            self._ack_tx_memo[key] = action
        outputs.append(action)
        if self._last_accepted.get(sender) == frame.header.sequence:
            self.drops["duplicate"] += 1
            return
        self._last_accepted[sender] = frame.header.sequence
        sdu = self.reassemble(frame)
        if sdu is not None:
            self.rx_packets[sender] += 1
            self._emit(outputs, Primitive(
                PrimitiveFamily.DATA_SERVICE, PrimitiveKind.INDICATION,
                {"sdu": sdu, "sender": sender}))

    def _ack_rx(self, frame: Frame, outputs: list) -> None:
        pending = self._pending
        if pending is None or frame.acked_sequence != pending.frame.header.sequence:
            self.drops["stale_ack"] += 1
            return
        self._pending = None
        if pending.frame.header.last_fragment:
            self.packets_delivered += 1
        self._emit(outputs, Primitive(
            PrimitiveFamily.DATA_TRANSFER, PrimitiveKind.CONFIRM,
            {"success": True, "sequence": pending.frame.header.sequence,
             "attempts_used": pending.attempts_used, "sdu_id": pending.sdu_id}))
        self._transmit_next(outputs)

    def _transmit_next(self, outputs: list) -> None:
        if self._pending is not None or not self._tx_queue:
            return
        if self.connection is not Connection.CONNECTED and self.role is Role.NODE:
            return  # handshake safety: hold data until Connected
        sdu_id, frame = self._tx_queue.popleft()
        wire = encode_frame(frame)
        self._pending = _PendingAck(frame, wire, sdu_id, 0, 0.0)
        self._transmit_pending(outputs)

    def _transmit_pending(self, outputs: list) -> None:
        pending = self._pending
        pending.attempts_used += 1
        pending.deadline = (self.now + len(pending.wire) * 8 / self.data_rate_bps
                            + self.ack_timeout)
        self.frames_sent += 1
        outputs.append(("tx", pending.frame, pending.wire))

    def _retry_or_give_up(self, outputs: list) -> None:
        pending = self._pending
        if pending.attempts_used <= self.max_retries:
            self._transmit_pending(outputs)
            return
        self._pending = None
        self.packets_lost += 1
        self.drops["exhausted"] += 1
        # the rest of this SDU is pointless; drop queued siblings
        while self._tx_queue and self._tx_queue[0][0] == pending.sdu_id:
            self._tx_queue.popleft()
        self._emit(outputs, Primitive(
            PrimitiveFamily.DATA_TRANSFER, PrimitiveKind.CONFIRM,
            {"success": False, "sequence": pending.frame.header.sequence,
             "attempts_used": pending.attempts_used, "sdu_id": pending.sdu_id}))
        self._transmit_next(outputs)


# --------------------------------------------------------------- ARQ driver

@dataclass
class LinkHandle:
    """Channel endpoints for one node<->hub pair, with its own substreams."""

    peer: Device
    model: ChannelModel
    uplink: FrameCorruptor    # sender -> peer
    downlink: FrameCorruptor  # peer -> sender

    @property
    def ber(self) -> float:
        return self.uplink.ber

    @ber.setter
    def ber(self, value: float) -> None:
        self.uplink.ber = value
        self.downlink.ber = value

    def to_peer(self, wire: bytes) -> bytes:
        return self.uplink.corrupt(wire)

    def to_sender(self, wire: bytes) -> bytes:
        return self.downlink.corrupt(wire)


def make_link(sender: Device, peer: Device, model: ChannelModel,
              ber: Optional[float] = None) -> LinkHandle:
    effective = model.ber if ber is None else ber
    return LinkHandle(
        peer, model,
        FrameCorruptor(model.stream((sender.device_id, peer.device_id)), effective),
        FrameCorruptor(model.stream((peer.device_id, sender.device_id)), effective))


def send_with_arq(sender: Device, frame: Frame, link: LinkHandle) -> TransmissionOutcome:
    """Drive one data frame through the ARQ loop against a live peer.

    Runs the sender's own poll machinery synchronously: transmit, ferry
    the bytes through the channel, poll the peer, ferry any ack back, and
    jump the clock to the ack deadline when nothing returns.  Success means
    some attempt's data frame AND its ack both came through uncorrupted.
    """
    if sender.connection is not Connection.CONNECTED:
        raise ProtocolError("sender is not connected")
    if frame.header.frame_type is not FrameType.DATA:
        raise ProtocolError("ARQ applies to data frames")
    start = sender.now
    sdu_id = sender._next_sdu_id
    sender._next_sdu_id += 1
    sender.packets_sent += 1
    frame.header.sequence = sender._take_sequence()
    sender._tx_queue.append((sdu_id, frame))
    outputs: list = []
    sender._transmit_next(outputs)
    peer = link.peer
    rate = sender.data_rate_bps

    for _ in range(8 * (sender.max_retries + 2)):
        for item in outputs:
            if item[0] == "ind":
                p = item[1]
                if (p.family is PrimitiveFamily.DATA_TRANSFER
                        and p.kind is PrimitiveKind.CONFIRM
                        and p.payload.get("sdu_id") == sdu_id):
                    return TransmissionOutcome(p.payload["success"],
                                               p.payload["attempts_used"],
                                               sender.now - start)
            else:  # "tx"
                wire = item[2]
                sender.now += len(wire) * 8 / rate
                if peer.now < sender.now:
                    peer.now = sender.now
                peer.deliver(link.to_peer(wire))
                for pitem in peer.poll_step():
                    if pitem[0] == "tx":
                        pwire = pitem[2]
                        sender.now += len(pwire) * 8 / rate
                        sender.deliver(link.to_sender(pwire))
        if sender.inbox:
            outputs = sender.poll_step()
        elif sender._pending is not None:
            sender.now = sender._pending.deadline
            outputs = sender.poll_step()
        else:
            outputs = []
    raise ProtocolError("ARQ exchange did not resolve")


def establish_connection(node: Device, hub: Device, link: LinkHandle,
                         max_rounds: int = 64) -> bool:
    """Run the join handshake over the (possibly lossy) link."""
    node.request_connect(hub.device_id)
    for _ in range(max_rounds):
        if node.connection is Connection.CONNECTED:
            return True
        outputs = node.poll_step()
        progressed = False
        for _, _f, wire in [o for o in outputs if o[0] == "tx"]:
            progressed = True
            node.now += len(wire) * 8 / node.data_rate_bps
            hub.now = max(hub.now, node.now)
            hub.deliver(link.to_peer(wire))
            hub_out = hub.poll_step()
            for _, _hf, hwire in [o for o in hub_out if o[0] == "tx"]:
                node.now += len(hwire) * 8 / node.data_rate_bps
                node.deliver(link.to_sender(hwire))
        if not progressed and not node.inbox:
            if node._mgmt_deadline is not None:
                node.now = max(node.now, node._mgmt_deadline)
            else:
                return node.connection is Connection.CONNECTED
    return node.connection is Connection.CONNECTED
