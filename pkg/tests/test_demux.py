import io

import pytest

from dvbts.analysis import analyze_stream
from dvbts.demux import ALL_ES, PesPacket, demux_to_sinks, extract_pes, suggested_name
from dvbts.errors import UnknownPid
from dvbts.events import AnomalyKind
from dvbts.genstream import es_payload, replica_spec
from dvbts.packet import TsPacket, parse_packet


def pid_packets(data, pid, size=188):
    out, idx = [], []
    for i in range(0, len(data), size):
        if ((data[i + 1] & 0x1F) << 8) | data[i + 2] == pid:
            out.append(parse_packet(data[i:i + 188]))
            idx.append(i // size)
    return out, idx


def test_single_packet_pes():
    payload = bytes.fromhex("000001C00008") + b"\x80\x00\x00" + b"ABCDE"
    pkt = TsPacket(0x44, 0, payload + b"\xff" * (184 - len(payload)), payload_unit_start_indicator=True)
    pes = extract_pes([pkt])
    assert len(pes) == 1
    assert (pes[0].stream_id, pes[0].declared_length, pes[0].complete) == (0xC0, 8, True)
    assert pes[0].payload == b"ABCDE"


def test_missing_start_code():
    pkt = TsPacket(0x44, 0, b"\x47\x11" + bytes(182), payload_unit_start_indicator=True)
    anomalies = []
    assert extract_pes([pkt], anomalies) == []
    assert [a.kind for a in anomalies] == [AnomalyKind.PES_START_MISSING]


def test_trailing_partial_pes_is_incomplete():
    head = bytes.fromhex("000001E00400") + b"\x80\x00\x00" + bytes(175)
    pes = extract_pes([TsPacket(0x44, 0, head, payload_unit_start_indicator=True)])
    assert len(pes) == 1 and not pes[0].complete


def test_unbounded_pes_ends_at_next_start():
    first = bytes.fromhex("000001E00000") + b"\x80\x00\x00" + b"a" * 175
    second = bytes.fromhex("000001E00000") + b"\x80\x00\x00" + b"b" * 175
    pes = extract_pes([TsPacket(0x44, 0, first, payload_unit_start_indicator=True),
                       TsPacket(0x44, 1, b"c" * 184),
                       TsPacket(0x44, 2, second, payload_unit_start_indicator=True)])
    assert [p.complete for p in pes] == [True, False]
    assert pes[0].payload == b"a" * 175 + b"c" * 184


def test_duplicate_packet_not_reassembled_twice():
    first = bytes.fromhex("000001E00000") + b"\x80\x00\x00" + b"a" * 175
    mid = TsPacket(0x44, 1, b"c" * 184)
    pes = extract_pes([TsPacket(0x44, 0, first, payload_unit_start_indicator=True), mid, mid])
    assert pes[0].payload == b"a" * 175 + b"c" * 184


def test_declared_length_law():
    raw = bytes.fromhex("000001C00010") + b"\x80\x00\x00" + bytes(13)
    pes = PesPacket.from_bytes(raw, True)
    assert 6 + pes.declared_length == len(raw)


@pytest.mark.parametrize("pid", [520, 730, 800])
def test_generator_round_trip(replica, pid):
    spec = replica_spec()
    es = next(s for s in spec.elementary_streams() if s.elementary_pid == pid)
    packets, idx = pid_packets(replica.data, pid)
    pes = extract_pes(packets, indices=idx)
    records = replica.truth.pes[pid]
    assert len(pes) == len(records)
    for k, (got, rec) in enumerate(zip(pes, records)):
        assert got.payload == es_payload(spec.seed, pid, k, es.pes_size_bytes)[:rec.emitted_payload]
        assert got.complete == rec.complete


def test_demux_selection(replica, tmp_path):
    result = demux_to_sinks(replica.data, {520}, out_dir=tmp_path, stem="replica")
    assert set(result) == {520}
    path = tmp_path / suggested_name("replica", 520)
    assert path.stat().st_size == replica.truth.es_bytes()[520] == result[520].bytes_written
    assert result[520].pes_count == replica.truth.pes_counts()[520]


def test_demux_all_es(replica, tmp_path):
    result = demux_to_sinks(replica.data, ALL_ES, out_dir=tmp_path, stem="replica")
    assert sorted(result) == [520, 730, 731, 732, 800]
    assert sorted(p.name for p in tmp_path.iterdir()) == [
        f"replica_pid{p}.es" for p in (520, 730, 731, 732, 800)]
    for pid, summary in result.items():
        assert summary.bytes_written == replica.truth.es_bytes()[pid]


def test_demux_empty_selection(replica, tmp_path):
    assert demux_to_sinks(replica.data, set(), out_dir=tmp_path) == {}
    assert list(tmp_path.iterdir()) == []


def test_demux_name_override(replica, tmp_path):
    demux_to_sinks(replica.data, {730}, out_dir=tmp_path, names={730: "english.mp2"})
    assert (tmp_path / "english.mp2").exists()


def test_unknown_pid_warns(replica, tmp_path):
    with pytest.warns(UnknownPid):
        result = demux_to_sinks(replica.data, {4000}, out_dir=tmp_path)
    assert not result[4000].present and result[4000].bytes_written == 0


class FailingSink(io.BytesIO):
    def write(self, data):
        raise OSError("disk full")


def test_sink_failure_aborts_only_that_pid(replica):
    sinks = {}

    def factory(pid):
        sinks[pid] = FailingSink() if pid == 730 else io.BytesIO()
        sinks[pid].close = lambda: None
        return sinks[pid]

    result = demux_to_sinks(replica.data, {520, 730}, sink_factory=factory)
    assert result[730].error and "disk full" in result[730].error
    assert result[520].error is None
    assert len(sinks[520].getvalue()) == replica.truth.es_bytes()[520]


def test_byte_conservation_and_order(replica):
    packets, idx = pid_packets(replica.data, 731)
    expected = b"".join(p.payload for p in extract_pes(packets, indices=idx))
    buf = io.BytesIO()
    buf.close = lambda: None
    demux_to_sinks(replica.data, {731}, sink_factory=lambda pid: buf)
    assert buf.getvalue() == expected


def test_filtering_commutes_with_analysis(replica):
    data = replica.data
    frames = [data[i:i + 188] for i in range(0, len(data), 188)]
    full = {s.pid: s for s in analyze_stream(frames).pid_stats}
    keep = {0, 268, 269, 731}
    sub = [f for f in frames if ((f[1] & 0x1F) << 8) | f[2] in keep]
    part = {s.pid: s for s in analyze_stream(sub).pid_stats}
    for pid in keep:
        a, b = full[pid], part[pid]
        assert {**vars(a), "first_index": 0} == {**vars(b), "first_index": 0}
