"""MAC engine tests: handshake, fragmentation/reassembly, ARQ, polling."""

import math
import random

import pytest

from wbansim.channel import ChannelModel
from wbansim.errors import EmptySduError, ProtocolError, RangeError
from wbansim.frames import (FrameType, ack_frame, data_frame, encode_frame,
                            management_frame)
from wbansim.mac import (MAX_NODES, Connection, Device,
                         PrimitiveFamily, PrimitiveKind, Role,
                         establish_connection, fragment_sdu, make_link,
                         send_with_arq)


def lossless_pair(max_retries=3, seed=0):
    hub = Device(Role.HUB, 0)
    node = Device(Role.NODE, 1, max_retries=max_retries)
    link = make_link(node, hub, ChannelModel(ber=0.0, rng_seed=seed))
    return hub, node, link


def connect(hub, node, link):
    assert establish_connection(node, hub, link)
    return hub, node, link


def txs(outputs):
    return [item for item in outputs if item[0] == "tx"]


def inds(outputs):
    return [item[1] for item in outputs if item[0] == "ind"]


# ---------------------------------------------------------------- handshake

def test_connect_request_moves_to_connecting():
    node = Device(Role.NODE, 1)
    node.request_connect(0)
    outputs = node.poll_step()
    assert node.connection is Connection.CONNECTING
    sent = txs(outputs)
    assert len(sent) == 1
    assert sent[0][1].header.frame_type is FrameType.MGMT_REQUEST
    assert sent[0][1].header.recipient_id == 0


def test_hub_registers_and_assigns():
    hub = Device(Role.HUB, 0)
    node = Device(Role.NODE, 5)
    node.request_connect(0)
    request_wire = txs(node.poll_step())[0][2]
    hub.deliver(request_wire)
    outputs = hub.poll_step()
    assert 5 in hub.registry
    sent = txs(outputs)
    assert sent[0][1].header.frame_type is FrameType.MGMT_ASSIGNMENT
    joined = [p for p in inds(outputs) if p.payload.get("event") == "node_joined"]
    assert joined and joined[0].payload["node_id"] == 5


def test_full_handshake_reaches_connected():
    hub, node, link = lossless_pair()
    assert establish_connection(node, hub, link)
    assert node.connection is Connection.CONNECTED
    assert node.device_id in hub.registry


def test_hub_capacity_rejection():
    hub = Device(Role.HUB, 0)
    for i in range(MAX_NODES):
        hub.registry[i + 1] = 0.0
    node = Device(Role.NODE, 70)
    link = make_link(node, hub, ChannelModel(ber=0.0, rng_seed=1))
    assert not establish_connection(node, hub, link)
    assert node.connection is Connection.IDLE
    assert 70 not in hub.registry
    assert hub.drops["capacity"] == 1


def test_assignment_while_idle_is_protocol_error():
    node = Device(Role.NODE, 1)
    node.hub_id = 0
    wire = encode_frame(management_frame(FrameType.MGMT_ASSIGNMENT, 1, 0, 0))
    node.deliver(wire)
    node.poll_step()
    assert node.connection is Connection.IDLE
    assert node.drops["protocol"] == 1


def test_disconnect_tears_down_both_sides():
    hub, node, link = connect(*lossless_pair())
    node.request_disconnect()
    outputs = node.poll_step()
    assert node.connection is Connection.IDLE
    wire = txs(outputs)[0][2]
    hub.deliver(link.to_peer(wire))
    hub.poll_step()
    assert node.device_id not in hub.registry


def test_handshake_survives_lost_request():
    # first request corrupted; retry timer drives a second one
    hub = Device(Role.HUB, 0)
    node = Device(Role.NODE, 1)
    model = ChannelModel(ber=0.0, rng_seed=2)
    link = make_link(node, hub, model)
    loss_plan = iter([True, False, False, False])
    original = link.to_peer
    link.to_peer = lambda wire: (b"\x00" * len(wire)
                                 if next(loss_plan, False) else wire)
    assert establish_connection(node, hub, link)
    assert node.connection is Connection.CONNECTED


# ------------------------------------------------------------ fragmentation

def test_fragment_arithmetic_split():
    chunks = fragment_sdu(bytes(25), 10)
    assert [len(c) for c in chunks] == [10, 10, 5]


def test_fragment_exact_fit_single_chunk():
    chunks = fragment_sdu(bytes(10), 10)
    assert len(chunks) == 1


def test_fragment_empty_sdu_rejected():
    with pytest.raises(EmptySduError):
        fragment_sdu(b"", 10)
    with pytest.raises(RangeError):
        fragment_sdu(b"abc", 0)


def test_fragment_concat_inverse_full_range():
    rng = random.Random(42)
    for _ in range(300):
        sdu = rng.randbytes(rng.randrange(1, 1025))
        k = rng.randrange(1, 256)
        chunks = fragment_sdu(sdu, k)
        assert b"".join(chunks) == sdu
        assert all(len(c) <= k for c in chunks)
        assert all(len(c) == k for c in chunks[:-1])


def test_reassemble_in_order():
    hub, node, link = connect(*lossless_pair())
    sdu = bytes(range(25))
    node.max_payload = 10
    node.request_send(sdu)
    outputs = node.poll_step()
    delivered = []
    for _ in range(10):
        for _, frame, wire in txs(outputs):
            hub.deliver(wire)
            hub_out = hub.poll_step()
            delivered += [p.payload["sdu"] for p in inds(hub_out)
                          if "sdu" in p.payload]
            for _, _a, awire in txs(hub_out):
                node.deliver(awire)
        outputs = node.poll_step()
    assert delivered == [sdu]


def make_fragments(sender_id, sdu, max_payload, base_seq=10):
    chunks = fragment_sdu(sdu, max_payload)
    last = len(chunks) - 1
    return [data_frame(0, sender_id, (base_seq + i) & 0xFF, chunk,
                       fragment_index=i, last_fragment=(i == last))
            for i, chunk in enumerate(chunks)]


def test_reassemble_out_of_order_permutations():
    rng = random.Random(9)
    hub = Device(Role.HUB, 0)
    hub.registry[1] = 0.0
    for trial in range(40):
        sdu = rng.randbytes(rng.randrange(2, 60))
        frames = make_fragments(1, sdu, 7, base_seq=rng.randrange(256))
        rng.shuffle(frames)
        got = None
        for frame in frames:
            result = hub.reassemble(frame)
            if result is not None:
                got = result
        assert got == sdu


def test_reassembly_gap_times_out():
    hub = Device(Role.HUB, 0)
    hub.registry[1] = 0.0
    frames = make_fragments(1, bytes(30), 10)
    hub.deliver(encode_frame(frames[0]))
    hub.deliver(encode_frame(frames[2]))  # index 1 missing, last flag seen
    hub.poll_step()
    outputs = hub.poll_step()
    for _, _f, wire in txs(outputs):
        pass  # acks, ignored
    hub.now += hub.reassembly_timeout + 1.0
    outputs = hub.poll_step()   # empty inbox -> timer sweep
    gaps = [p for p in inds(outputs) if p.payload.get("error") == "gap"]
    assert len(gaps) == 1
    assert gaps[0].payload["missing"] == [1]
    assert hub.drops["gap"] == 1


# ------------------------------------------------------------------ ARQ

def test_arq_perfect_channel_single_attempt():
    hub, node, link = connect(*lossless_pair())
    outcome = send_with_arq(node, data_frame(0, 1, 0, bytes(10)), link)
    assert outcome.success and outcome.attempts_used == 1


def test_arq_dead_channel_exhausts_retries():
    hub, node, link = connect(*lossless_pair(max_retries=3))
    link.ber = 1.0
    outcome = send_with_arq(node, data_frame(0, 1, 0, bytes(10)), link)
    assert not outcome.success
    assert outcome.attempts_used == 4
    assert node.packets_lost == 1


def test_arq_attempt_bound_various_limits():
    for retries in (0, 1, 2, 5):
        hub, node, link = connect(*lossless_pair(max_retries=retries))
        link.ber = 1.0
        outcome = send_with_arq(node, data_frame(0, 1, 0, b"x"), link)
        assert outcome.attempts_used == retries + 1


def test_arq_requires_connected_state():
    hub, node, link = lossless_pair()
    with pytest.raises(ProtocolError):
        send_with_arq(node, data_frame(0, 1, 0, b"x"), link)


def test_arq_rejects_non_data_frames():
    hub, node, link = connect(*lossless_pair())
    with pytest.raises(ProtocolError):
        send_with_arq(node, ack_frame(0, 1, 3), link)


def test_corrupted_ack_forces_retry_and_dedup():
    # data always clean, first ack corrupted: sender retries, hub counts
    # the duplicate frame but delivers the packet only once
    hub, node, link = connect(*lossless_pair())
    acks = iter([True, False])
    original = link.to_sender
    link.to_sender = lambda wire: (b"\x00" * len(wire)
                                   if next(acks, False) else original(wire))
    outcome = send_with_arq(node, data_frame(0, 1, 0, bytes(10)), link)
    assert outcome.success
    assert outcome.attempts_used == 2
    assert hub.rx_frames[1] == 2       # both copies arrived intact
    assert hub.rx_packets[1] == 1      # delivered exactly once
    assert hub.drops["duplicate"] == 1


def test_arq_sequence_discipline():
    hub, node, link = connect(*lossless_pair())
    first = node.next_sequence
    for k in range(300):
        send_with_arq(node, data_frame(0, 1, 0, b"d"), link)
    # acked data frames observed at the hub climbed mod 256
    assert node.next_sequence == (first + 300) & 0xFF


def test_arq_empirical_attempt_failure_matches_exchange_model():
    # per-attempt failure/Monte Carlo vs the analytic exchange model with
    # the actual 9-byte ack (72 bits)
    p_ber = 2e-3
    hub, node, link = connect(*lossless_pair(max_retries=3, seed=7))
    link.ber = p_ber
    packets = 4000
    attempts = 0
    delivered = 0
    for _ in range(packets):
        out = send_with_arq(node, data_frame(0, 1, 0, bytes(10)), link)
        attempts += out.attempts_used
        delivered += out.success
    fail_rate = (attempts - delivered) / attempts
    expected = 1 - (1 - p_ber) ** (144 + 72)
    sigma = math.sqrt(expected * (1 - expected) / attempts)
    assert abs(fail_rate - expected) < 3 * sigma


# ------------------------------------------------------------------ polling

def test_poll_empty_inbox_only_advances_timers():
    hub, node, link = connect(*lossless_pair())
    before = (node.connection, node.next_sequence, node.frames_sent)
    assert node.poll_step() == []
    assert (node.connection, node.next_sequence, node.frames_sent) == before


def test_poll_drops_frames_for_other_devices():
    hub, node, link = connect(*lossless_pair())
    stray = data_frame(200, 1, 0, b"not for the hub")
    hub.deliver(encode_frame(stray))
    outputs = hub.poll_step()
    assert outputs == []
    assert hub.drops["address"] == 1
    assert hub.rx_frames[1] == 0


def test_poll_never_acks_misaddressed_frames():
    hub, node, link = connect(*lossless_pair())
    for recipient in (5, 77, 255):
        hub.deliver(encode_frame(data_frame(recipient, 1, 3, b"x")))
        assert txs(hub.poll_step()) == []


def test_poll_valid_data_frame_emits_ack_and_indication():
    hub, node, link = connect(*lossless_pair())
    frame = data_frame(0, 1, 9, b"reading")
    hub.deliver(encode_frame(frame))
    outputs = hub.poll_step()
    sent = txs(outputs)
    assert len(sent) == 1
    assert sent[0][1].header.frame_type is FrameType.ACK
    assert sent[0][1].acked_sequence == 9
    notes = [p for p in inds(outputs)
             if p.family is PrimitiveFamily.DATA_SERVICE
             and p.kind is PrimitiveKind.INDICATION]
    assert notes and notes[0].payload["sdu"] == b"reading"


def test_poll_rejects_data_from_unregistered_sender():
    hub = Device(Role.HUB, 0)
    hub.deliver(encode_frame(data_frame(0, 9, 0, b"intruder")))
    outputs = hub.poll_step()
    assert txs(outputs) == []
    assert hub.drops["access"] == 1


def test_node_emits_data_only_when_connected():
    # enqueue while idle: nothing goes out; connecting flushes the queue
    hub = Device(Role.HUB, 0)
    node = Device(Role.NODE, 1)
    node.hub_id = 0
    node.request_send(b"early")
    assert txs(node.poll_step()) == []

    link = make_link(node, hub, ChannelModel(ber=0.0, rng_seed=3))
    node.request_connect(0)
    request_wire = txs(node.poll_step())[0][2]
    hub.deliver(request_wire)
    assignment_wire = txs(hub.poll_step())[0][2]
    node.deliver(assignment_wire)
    outputs = node.poll_step()
    assert node.connection is Connection.CONNECTED
    sent = txs(outputs)
    assert len(sent) == 1
    assert sent[0][1].header.frame_type is FrameType.DATA


def test_primitive_trace_records_family_and_kind():
    trace = []
    hub = Device(Role.HUB, 0, trace=trace)
    node = Device(Role.NODE, 1, trace=trace)
    link = make_link(node, hub, ChannelModel(ber=0.0, rng_seed=4))
    establish_connection(node, hub, link)
    send_with_arq(node, data_frame(0, 1, 0, b"t"), link)
    families = {entry[2] for entry in trace}
    assert "MANAGEMENT" in families
    assert "DATA_TRANSFER" in families
    kinds = {entry[3] for entry in trace}
    assert {"REQUEST", "CONFIRM", "INDICATION"} <= kinds
