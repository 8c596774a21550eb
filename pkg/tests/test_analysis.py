import dataclasses

import pytest
from hypothesis import given, settings, strategies as st

from dvbts import ErrorKind, ErrorSpec, generate, replica_spec
from dvbts.analysis import (
    PidClass,
    PidRole,
    analyze_source,
    analyze_stream,
    check_continuity,
    classify_pids,
    estimate_bitrate,
)
from dvbts.errors import InsufficientPcrs, NonMonotonicPcr
from dvbts.events import AnomalyKind
from dvbts.packet import PCR_MODULUS, TsPacket
from dvbts.psi import EsInfo, PatTable, PmtTable, SiKind
from oracles import cc_verdicts
from strategies import cc_packet, packet_pids


def kinds(events):
    return [(e.kind, e.packet_index, e.expected, e.observed) for e in events]


def test_perfect_wraparound():
    assert check_continuity([cc_packet(i % 16) for i in range(18)]) == []


def test_gap():
    events = check_continuity([cc_packet(0), cc_packet(1), cc_packet(3)])
    assert kinds(events) == [(AnomalyKind.CC_DISCONTINUITY, 2, 2, 3)]


def test_single_duplicate_tolerated_second_is_excess():
    events = check_continuity([cc_packet(5), cc_packet(5), cc_packet(5)])
    assert [(e.kind, e.packet_index) for e in events] == [(AnomalyKind.CC_EXCESS_DUPLICATE, 2)]


def test_adaptation_only_does_not_advance():
    assert check_continuity([cc_packet(0), cc_packet(0, afc=2), cc_packet(1), cc_packet(9, afc=2), cc_packet(2)]) == []


def test_discontinuity_on_adaptation_only_packet_suppresses_next_check():
    seq = [cc_packet(0), cc_packet(1), cc_packet(1, afc=2, disc=True), cc_packet(7), cc_packet(8)]
    assert check_continuity(seq) == []


def test_discontinuity_on_payload_packet():
    assert check_continuity([cc_packet(0), cc_packet(9, afc=3, disc=True), cc_packet(10)]) == []


def test_null_pid_exempt():
    assert check_continuity([cc_packet(3, pid=0x1FFF), cc_packet(3, pid=0x1FFF), cc_packet(3, pid=0x1FFF)]) == []


@st.composite
def cc_sequences(draw):
    """Mostly well-formed counters with gaps, duplicates, afc=2 and discontinuities mixed in."""
    n = draw(st.integers(1, 40))
    cc = draw(st.integers(0, 15))
    seq = []
    for _ in range(n):
        move = draw(st.sampled_from(("next", "next", "next", "dup", "jump", "af", "disc")))
        if move == "next":
            cc = (cc + 1) % 16
            seq.append((cc, draw(st.sampled_from((1, 3))), False))
        elif move == "dup":
            seq.append((cc, 1, False))
        elif move == "jump":
            cc = draw(st.integers(0, 15))
            seq.append((cc, 1, False))
        elif move == "af":
            seq.append((draw(st.integers(0, 15)), 2, draw(st.booleans())))
        else:
            cc = draw(st.integers(0, 15))
            seq.append((cc, 3, True))
    return seq


def run_rule(seq):
    events = check_continuity([cc_packet(cc, afc, disc) for cc, afc, disc in seq])
    got = {e.packet_index: ("gap" if e.kind is AnomalyKind.CC_DISCONTINUITY else "excess", e.expected)
           for e in events}
    want = {i: v for i, v in enumerate(cc_verdicts(seq)) if v[0] is not None}
    return got, want


@settings(max_examples=500)
@given(cc_sequences())
def test_continuity_matches_oracle(seq):
    got, want = run_rule(seq)
    assert got == want


def test_classify_replica_inventory():
    pat = PatTable(1, 0, 16, {0x1241: 268, 0x1181: 269})
    es = (EsInfo(2, 520), EsInfo(3, 730), EsInfo(3, 731), EsInfo(3, 732), EsInfo(6, 800))
    pmts = [PmtTable(0x1241, 520, es), PmtTable(0x1181, 520, es)]
    observed = [0, 16, 17, 18, 20, 268, 269, 520, 730, 731, 732, 800, 0x1FFF, 999]
    roles = classify_pids(pat, pmts, observed)
    assert set(roles) == set(observed)
    assert roles[520] == PidRole(PidClass.VIDEO)
    assert {roles[p].pid_class for p in (730, 731, 732)} == {PidClass.AUDIO}
    assert roles[800].pid_class is PidClass.PRIVATE
    assert roles[268] == PidRole(PidClass.PSI, SiKind.PMT)
    assert roles[18] == PidRole(PidClass.PSI, SiKind.EIT)
    assert sum(r.pid_class is PidClass.PSI for r in roles.values()) == 7
    assert roles[0x1FFF].pid_class is PidClass.NULL
    assert roles[999].pid_class is PidClass.UNREFERENCED


def test_classify_without_pat():
    roles = classify_pids(None, [], [0, 0x1FFF, 300])
    assert roles[0].psi_kind is SiKind.PAT
    assert roles[300].pid_class is PidClass.UNREFERENCED


def test_bitrate_exact():
    assert estimate_bitrate([(0, 0), (188000, 27_000_000)]).bps == 1_504_000


def test_bitrate_errors():
    with pytest.raises(InsufficientPcrs):
        estimate_bitrate([(0, 5)])
    with pytest.raises(NonMonotonicPcr):
        estimate_bitrate([(0, 5), (188, 5)])


def test_bitrate_unrolls_wraparound():
    start = PCR_MODULUS - 13_500_000
    obs = [(0, start), (94_000, (start + 13_500_000) % PCR_MODULUS),
           (188_000, (start + 27_000_000) % PCR_MODULUS)]
    assert estimate_bitrate(obs).bps == 1_504_000


def test_bitrate_skips_backwards_interval():
    est = estimate_bitrate([(0, 0), (100, 10), (188000, 27_000_000)])
    assert est.skipped == 0
    est = estimate_bitrate([(0, 0), (100, 0), (188000, 27_000_000)])
    assert est.skipped == 1 and est.bps == 1_504_000


@given(st.lists(st.tuples(st.integers(1, 10_000), st.integers(1, 10_000_000)), min_size=1, max_size=20))
def test_bitrate_scales_with_bytes(steps):
    obs, pos, pcr = [(0, 0)], 0, 0
    for dp, dt in steps:
        pos, pcr = pos + dp, pcr + dt
        obs.append((pos, pcr))
    doubled = [(2 * p, t) for p, t in obs]
    assert estimate_bitrate(doubled).bps == pytest.approx(2 * estimate_bitrate(obs).bps, rel=1e-12)


def test_replica_report(replica):
    report = analyze_source(replica.data)
    rows = {r.pid: r for r in report.packet_table}
    assert (rows[520].packet_type, rows[520].adaptation_control, rows[520].pcr) == ("video", 3, 0)
    for pid in (730, 731, 732):
        assert (rows[pid].packet_type, rows[pid].adaptation_control) == ("audio", 1)
    assert rows[800].packet_type == "private"
    assert all(r.error_indicator == 0 and r.transport_priority == 0 for r in rows.values())
    assert [r.table_id for r in report.psi_table] == [0x00, 0x02, 0x02, 0x40, 0x42, 0x4E, 0x70]
    assert report.summary == {"video": 1, "audio": 3, "private": 1, "signaling": 7, "null": 1,
                              "unreferenced": 0}
    assert report.anomalies == []
    assert [r.index for r in report.packet_table] == list(range(len(report.packet_table)))


def test_conservation_and_determinism(replica):
    a = analyze_source(replica.data)
    b = analyze_source(replica.data)
    assert a == b
    assert sum(s.packet_count for s in a.pid_stats) == a.packet_count == replica.truth.packet_count
    for s in a.pid_stats:
        assert s.packet_count == replica.truth.pid_counts[s.pid]
        assert s.packet_count >= s.tei_count and s.packet_count >= s.pcr_count


def test_every_psi_row_is_distinct(replica):
    rows = analyze_source(replica.data).psi_table
    keys = [(r.pid, r.table_id, r.version_number, r.section_number) for r in rows]
    assert len(keys) == len(set(keys))


def test_empty_stream():
    report = analyze_stream([])
    assert report.packet_table == [] and report.psi_table == [] and report.anomalies == []
    assert report.packet_count == 0


def test_tei_conservation(replica):
    pids = packet_pids(replica.data, 188)
    targets = [i for i, p in enumerate(pids) if p == 731][5:40:7]
    spec = dataclasses.replace(replica_spec(), errors=(ErrorSpec(ErrorKind.TEI_FLAG, 731, targets),))
    report = analyze_source(generate(spec).data)
    assert report.stats_for(731).tei_count == len(targets)
    assert report.anomaly_counts() == {"TeiSet": len(targets)}


def test_gaps_counted_per_pid(replica):
    pids = packet_pids(replica.data, 188)
    targets = [i for i, p in enumerate(pids) if p == 520][10:400:50]
    spec = dataclasses.replace(replica_spec(), errors=(ErrorSpec(ErrorKind.CC_GAP, 520, targets),))
    report = analyze_source(generate(spec).data)
    gaps = [a for a in report.anomalies if a.kind is AnomalyKind.CC_DISCONTINUITY]
    assert len(gaps) == len(targets) and {a.pid for a in gaps} == {520}


def test_table_version_change_recorded():
    from dvbts.psi import encode_section
    from dvbts.genstream import packetize_section

    frames = []
    for cc, version in enumerate((1, 1, 2)):
        for pusi, payload in packetize_section(encode_section(0x42, b"x" * 10, version=version)):
            frames.append(TsPacket(17, cc, payload, payload_unit_start_indicator=pusi).encode())
    report = analyze_stream(frames)
    assert [(u.old_version, u.new_version) for u in report.table_updates] == [(1, 2)]
    assert [r.version_number for r in report.psi_table] == [1, 2]


def test_pes_start_missing_only_for_es():
    es_frames = [TsPacket(520, 0, b"\x47\x11" + bytes(182), payload_unit_start_indicator=True).encode()]
    report = analyze_stream(es_frames)
    assert report.anomalies == []  # unreferenced PID: not known to carry PES
