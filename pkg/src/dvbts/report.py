"""
Rendering of :class:`~dvbts.analysis.StreamReport`.

Three renderings are provided: column tables for people, a versioned JSON
document for programs (``parse_report`` inverts it exactly), and an
indented program/PID/section tree.
"""

from __future__ import annotations

import json
from typing import Any, Dict, List, Optional

from .analysis import (
    PacketRow,
    PidClass,
    PidStats,
    PsiRow,
    StreamReport,
    TableUpdate,
)
from .events import AnomalyEvent, AnomalyKind
from .packet import FrameAlignment
from .psi import EsInfo, PatTable, PmtTable, SiKind

REPORT_FORMAT = "dvbts-report"
REPORT_VERSION = 1
SEP = "  "

PACKET_COLUMNS = ("Index", "PID value", "Packet type", "Error indicator", "Transport priority",
                  "Adaptation control", "PCR", "Continuity counter")
PSI_COLUMNS = ("Index", "PID value", "PSI type", "Section length", "Version number",
               "Section number", "Table ID")


def pid_label(pid: Optional[int]) -> str:
    if pid is None:
        return "-"
    return f"0x{pid:04X} ({pid})"


def _dash(value) -> str:
    return "-" if value is None else str(value)


def _packet_line(row: PacketRow) -> str:
    return SEP.join((str(row.index), str(row.pid), row.packet_type, str(row.error_indicator),
                     str(row.transport_priority), str(row.adaptation_control), _dash(row.pcr),
                     str(row.continuity_counter)))


def _psi_line(row: PsiRow) -> str:
    return SEP.join((str(row.index), str(row.pid), row.psi_type, str(row.section_length),
                     _dash(row.version_number), _dash(row.section_number), f"0x{row.table_id:02X}"))


def _program_pids(report: StreamReport) -> List[tuple]:
    """(program_number, PID set) in PAT order; PMT PID first."""
    if report.pat is None:
        return []
    pmts = {p.program_number: p for p in report.pmts}
    groups = []
    for number, pmt_pid in report.pat.programs.items():
        pids = {pmt_pid}
        pmt = pmts.get(number)
        if pmt is not None:
            pids.update(s.elementary_pid for s in pmt.streams)
            pids.add(pmt.pcr_pid)
        groups.append((number, pids))
    return groups


def format_text(report: StreamReport) -> str:
    lines: List[str] = []
    if report.alignment is not None:
        lines.append(f"Alignment: offset {report.alignment.offset}, "
                     f"packet size {report.alignment.packet_size}")
    else:
        lines.append("Alignment: none")
    lines.append(f"Packets: {report.packet_count}")
    lines.append("")

    header = SEP.join(PACKET_COLUMNS)
    grouped = set()
    for number, pids in _program_pids(report):
        lines.append(f"Transport packets for program 0x{number:04X} ({number})")
        lines.append(header)
        for row in report.packet_table:
            if row.pid in pids:
                lines.append(_packet_line(row))
                grouped.add(row.pid)
        lines.append("")
    lines.append("Other transport packets")
    lines.append(header)
    for row in report.packet_table:
        if row.pid not in grouped:
            lines.append(_packet_line(row))
    lines.append("")

    lines.append("PSI/SI sections")
    lines.append(SEP.join(PSI_COLUMNS))
    lines.extend(_psi_line(row) for row in report.psi_table)
    lines.append("")

    if report.table_updates:
        lines.append("Table updates")
        for u in report.table_updates:
            lines.append(f"#{u.packet_index} PID {u.pid} table 0x{u.table_id:02X} "
                         f"version {u.old_version} -> {u.new_version}")
        lines.append("")

    lines.append(f"Anomalies: {len(report.anomalies)}")
    for kind, count in sorted(report.anomaly_counts().items()):
        lines.append(f"  {kind}: {count}")
    lines.extend("  " + a.describe() for a in report.anomalies)
    lines.append("")

    lines.append("Summary")
    for key, value in report.summary.items():
        lines.append(f"  {key}: {value}")
    if report.truncated_sections:
        lines.append(f"  truncated sections: {report.truncated_sections}")
    rate = "unknown" if report.bitrate_bps is None else f"{report.bitrate_bps:.0f} bps"
    lines.append(f"Bitrate: {rate}")
    return "\n".join(lines) + "\n"


def format_tree(report: StreamReport) -> str:
    """Program -> PID -> section hierarchy."""
    lines: List[str] = []
    sections_by_pid: Dict[int, List[PsiRow]] = {}
    for row in report.psi_table:
        sections_by_pid.setdefault(row.pid, []).append(row)
    stats = {s.pid: s for s in report.pid_stats}

    def section_lines(pid, indent):
        for row in sections_by_pid.get(pid, ()):
            lines.append(f"{indent}{row.psi_type} table 0x{row.table_id:02X} "
                         f"version {_dash(row.version_number)} section {_dash(row.section_number)} "
                         f"length {row.section_length}")

    pat = report.pat
    if pat is None:
        lines.append("Transport stream (no PAT)")
    else:
        lines.append(f"Transport stream id {pid_label(pat.transport_stream_id)}")
        lines.append(f"  PAT PID {pid_label(0)}")
        section_lines(0, "    ")
        if pat.network_pid is not None:
            lines.append(f"  Network PID {pid_label(pat.network_pid)}")
        pmts = {p.program_number: p for p in report.pmts}
        for number, pmt_pid in pat.programs.items():
            lines.append(f"  Program {pid_label(number)}")
            lines.append(f"    PMT PID {pid_label(pmt_pid)}")
            section_lines(pmt_pid, "      ")
            pmt = pmts.get(number)
            if pmt is None:
                lines.append("      (PMT not seen)")
                continue
            lines.append(f"      PCR PID {pid_label(pmt.pcr_pid)}")
            for es in pmt.streams:
                s = stats.get(es.elementary_pid)
                cls = s.pid_class.value if s is not None else "absent"
                count = s.packet_count if s is not None else 0
                lines.append(f"      {cls} PID {pid_label(es.elementary_pid)} "
                             f"stream_type 0x{es.stream_type:02X} packets {count}")
    si_pids = [s.pid for s in report.pid_stats
               if s.pid_class is PidClass.PSI and s.psi_kind not in (SiKind.PAT, SiKind.PMT)]
    if si_pids:
        lines.append("  Service information")
        for pid in sorted(set(si_pids)):
            kind = stats[pid].psi_kind
            lines.append(f"    {kind.value if kind else 'PSI'} PID {pid_label(pid)}")
            section_lines(pid, "      ")
    return "\n".join(lines) + "\n"


# structured form

def _hex(data: bytes) -> str:
    return data.hex()


def report_to_dict(report: StreamReport) -> Dict[str, Any]:
    al = report.alignment
    return {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "alignment": None if al is None else {"offset": al.offset, "packet_size": al.packet_size},
        "packet_count": report.packet_count,
        "bitrate_bps": report.bitrate_bps,
        "summary": dict(report.summary),
        "truncated_sections": report.truncated_sections,
        "packet_table": [
            {"index": r.index, "pid": r.pid, "packet_type": r.packet_type,
             "error_indicator": r.error_indicator, "transport_priority": r.transport_priority,
             "adaptation_control": r.adaptation_control, "pcr": r.pcr,
             "continuity_counter": r.continuity_counter}
            for r in report.packet_table],
        "psi_table": [
            {"index": r.index, "pid": r.pid, "psi_type": r.psi_type,
             "section_length": r.section_length, "version_number": r.version_number,
             "section_number": r.section_number, "table_id": r.table_id}
            for r in report.psi_table],
        "pid_stats": [
            {"pid": s.pid, "first_index": s.first_index, "packet_count": s.packet_count,
             "pid_class": s.pid_class.value,
             "psi_kind": None if s.psi_kind is None else s.psi_kind.value,
             "stream_type": s.stream_type, "tei_count": s.tei_count,
             "priority_count": s.priority_count, "pcr_count": s.pcr_count,
             "pes_count": s.pes_count, "first_cc": s.first_cc, "last_cc": s.last_cc,
             "first_afc": s.first_afc, "first_tei": s.first_tei,
             "first_priority": s.first_priority, "first_pcr": s.first_pcr}
            for s in report.pid_stats],
        "pat": None if report.pat is None else {
            "transport_stream_id": report.pat.transport_stream_id,
            "version": report.pat.version,
            "network_pid": report.pat.network_pid,
            "programs": [{"program_number": n, "pmt_pid": p}
                         for n, p in report.pat.programs.items()]},
        "pmts": [
            {"program_number": p.program_number, "pcr_pid": p.pcr_pid, "version": p.version,
             "program_info": _hex(p.program_info),
             "streams": [{"stream_type": s.stream_type, "elementary_pid": s.elementary_pid,
                          "es_info": _hex(s.es_info)} for s in p.streams]}
            for p in report.pmts],
        "anomalies": [
            {"kind": a.kind.value, "pid": a.pid, "packet_index": a.packet_index,
             "expected": a.expected, "observed": a.observed, "detail": a.detail}
            for a in report.anomalies],
        "table_updates": [
            {"pid": u.pid, "table_id": u.table_id, "table_id_extension": u.table_id_extension,
             "old_version": u.old_version, "new_version": u.new_version,
             "packet_index": u.packet_index}
            for u in report.table_updates],
    }


def report_from_dict(doc: Dict[str, Any]) -> StreamReport:
    if doc.get("format") != REPORT_FORMAT:
        raise ValueError(f"not a {REPORT_FORMAT} document")
    if doc.get("version") != REPORT_VERSION:
        raise ValueError(f"unsupported report version {doc.get('version')}")
    al = doc["alignment"]
    pat = doc["pat"]
    return StreamReport(
        alignment=None if al is None else FrameAlignment(al["offset"], al["packet_size"]),
        packet_count=doc["packet_count"],
        packet_table=[PacketRow(**r) for r in doc["packet_table"]],
        psi_table=[PsiRow(**r) for r in doc["psi_table"]],
        pid_stats=[PidStats(**{**s, "pid_class": PidClass(s["pid_class"]),
                               "psi_kind": None if s["psi_kind"] is None else SiKind(s["psi_kind"])})
                   for s in doc["pid_stats"]],
        pat=None if pat is None else PatTable(
            pat["transport_stream_id"], pat["version"], pat["network_pid"],
            {e["program_number"]: e["pmt_pid"] for e in pat["programs"]}),
        pmts=[PmtTable(p["program_number"], p["pcr_pid"],
                       tuple(EsInfo(s["stream_type"], s["elementary_pid"], bytes.fromhex(s["es_info"]))
                             for s in p["streams"]),
                       p["version"], bytes.fromhex(p["program_info"]))
              for p in doc["pmts"]],
        anomalies=[AnomalyEvent(AnomalyKind(a["kind"]), a["pid"], a["packet_index"],
                                a["expected"], a["observed"], a["detail"])
                   for a in doc["anomalies"]],
        table_updates=[TableUpdate(**u) for u in doc["table_updates"]],
        bitrate_bps=doc["bitrate_bps"],
        summary=dict(doc["summary"]),
        truncated_sections=doc["truncated_sections"],
    )


def serialize_report(report: StreamReport, fmt: str = "text", tree: bool = False) -> bytes:
    """Deterministic byte rendering; *fmt* is ``text`` or ``json``."""
    if fmt == "json":
        return (json.dumps(report_to_dict(report), indent=2) + "\n").encode()
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt!r}")
    text = format_text(report)
    if tree:
        text += "\n" + format_tree(report)
    return text.encode()


def parse_report(document: bytes) -> StreamReport:
    return report_from_dict(json.loads(document))
