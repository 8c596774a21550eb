import json

from hypothesis import given, strategies as st

from dvbts.analysis import PacketRow, PidClass, PidStats, PsiRow, StreamReport, TableUpdate, analyze_source
from dvbts.config import dump_spec, load_errors, load_spec, load_spec_text, save_spec
from dvbts.events import AnomalyEvent, AnomalyKind
from dvbts.genstream import ErrorKind, ErrorSpec, replica_spec
from dvbts.packet import FrameAlignment
from dvbts.psi import EsInfo, PatTable, PmtTable, SiKind
from dvbts.report import (
    PACKET_COLUMNS,
    PSI_COLUMNS,
    format_tree,
    parse_report,
    report_to_dict,
    serialize_report,
)
from strategies import stream_specs

u8 = st.integers(0, 255)
u16 = st.integers(0, 0xFFFF)
pid = st.integers(0, 0x1FFF)
opt = st.none() | st.integers(0, 31)
label = st.sampled_from(("video", "audio", "PAT", "PMT", "null", "Other(0x99)"))

rows = st.builds(PacketRow, st.integers(0, 10**6), pid, label, st.integers(0, 1), st.integers(0, 1),
                 st.integers(0, 3), st.none() | st.integers(0, 2**42), st.integers(0, 15))
psi_rows = st.builds(PsiRow, st.integers(0, 10**6), pid, label, st.integers(0, 4093), opt, opt, u8)
stats = st.builds(PidStats, pid, st.integers(0, 10**6), st.integers(0, 10**6),
                  st.sampled_from(PidClass), st.none() | st.sampled_from(SiKind), st.none() | u8,
                  st.integers(0, 99), st.integers(0, 99), st.integers(0, 99), st.integers(0, 99),
                  st.integers(0, 15), st.integers(0, 15), st.integers(0, 3), st.booleans(),
                  st.booleans(), st.none() | st.integers(0, 2**42))
pats = st.builds(PatTable, u16, st.integers(0, 31), st.none() | st.integers(0x10, 0x1FFE),
                 st.dictionaries(st.integers(1, 0xFFFF), st.integers(1, 0x1FFE), max_size=5))
pmts = st.builds(PmtTable, st.integers(1, 0xFFFF), pid,
                 st.lists(st.builds(EsInfo, u8, pid, st.binary(max_size=8)), max_size=4,
                          unique_by=lambda e: e.elementary_pid).map(tuple),
                 st.integers(0, 31), st.binary(max_size=8))
events = st.builds(AnomalyEvent, st.sampled_from(AnomalyKind), st.none() | pid, st.integers(0, 10**6),
                   st.none() | st.integers(0, 15), st.none() | st.integers(0, 2**32), st.text(max_size=10))
updates = st.builds(TableUpdate, pid, u8, st.none() | u16, st.integers(0, 31), st.integers(0, 31),
                    st.integers(0, 10**6))
reports = st.builds(
    StreamReport,
    alignment=st.none() | st.builds(FrameAlignment, st.integers(0, 10**6), st.sampled_from((188, 204))),
    packet_count=st.integers(0, 10**7),
    packet_table=st.lists(rows, max_size=5),
    psi_table=st.lists(psi_rows, max_size=5),
    pid_stats=st.lists(stats, max_size=4),
    pat=st.none() | pats,
    pmts=st.lists(pmts, max_size=3),
    anomalies=st.lists(events, max_size=5),
    table_updates=st.lists(updates, max_size=3),
    bitrate_bps=st.none() | st.floats(0, 1e9, allow_nan=False),
    summary=st.dictionaries(st.sampled_from(("video", "audio", "null")), st.integers(0, 99)),
    truncated_sections=st.integers(0, 9),
)


@given(reports)
def test_structured_round_trip(report):
    assert parse_report(serialize_report(report, "json")) == report


@given(reports)
def test_serialization_is_deterministic(report):
    assert serialize_report(report, "text", tree=True) == serialize_report(report, "text", tree=True)
    assert serialize_report(report, "json") == serialize_report(report, "json")


def test_text_has_published_columns(replica):
    text = serialize_report(analyze_source(replica.data)).decode()
    assert "  ".join(PACKET_COLUMNS) in text
    assert "  ".join(PSI_COLUMNS) in text
    assert "520  video  0  0  3  0  0" in text
    assert "Transport packets for program 0x1241 (4673)" in text
    for line in ("0  0  PAT  21  0  0  0x00", "20  TDT  9  -  -  0x70"):
        assert line in text


def test_structured_is_self_describing(replica):
    doc = json.loads(serialize_report(analyze_source(replica.data), "json"))
    assert doc["format"] == "dvbts-report" and doc["version"] == 1
    assert {r["table_id"] for r in doc["psi_table"]} == {0x00, 0x02, 0x40, 0x42, 0x4E, 0x70}


def test_text_content_present_in_structured(replica):
    report = analyze_source(replica.data)
    doc = report_to_dict(report)
    text = serialize_report(report).decode()
    for row in doc["packet_table"]:
        assert f"{row['index']}  {row['pid']}  {row['packet_type']}" in text
    for row in doc["psi_table"]:
        assert f"{row['index']}  {row['pid']}  {row['psi_type']}  {row['section_length']}" in text


def test_empty_report():
    report = analyze_source(b"")
    text = serialize_report(report).decode()
    assert "  ".join(PACKET_COLUMNS) in text and "  ".join(PSI_COLUMNS) in text
    doc = json.loads(serialize_report(report, "json"))
    assert doc["packet_table"] == [] and doc["psi_table"] == [] and doc["anomalies"] == []


def test_tree_shows_hierarchy(replica):
    tree = format_tree(analyze_source(replica.data))
    assert "Program 0x1241 (4673)" in tree
    assert "PMT PID 0x010C (268)" in tree
    assert "video PID 0x0208 (520)" in tree
    assert "EIT table 0x4E" in tree


def test_spec_yaml_round_trip(tmp_path):
    spec = replica_spec()
    assert load_spec_text(dump_spec(spec)) == spec
    save_spec(spec, tmp_path / "s.yaml")
    assert load_spec(tmp_path / "s.yaml") == spec


@given(stream_specs())
def test_random_spec_yaml_round_trip(spec):
    assert load_spec_text(dump_spec(spec)) == spec


def test_error_document(tmp_path):
    path = tmp_path / "errs.yaml"
    path.write_text("errors:\n  - {kind: CcGap, pid: 520, at_packet_indices: [10, 20]}\n"
                    "  - {kind: SyncCorrupt, at_packet_indices: [5]}\n")
    assert load_errors(path) == [ErrorSpec(ErrorKind.CC_GAP, 520, (10, 20)),
                                 ErrorSpec(ErrorKind.SYNC_CORRUPT, None, (5,))]
