"""
Stream analysis: continuity checking, PID classification, PCR bitrate
estimation and the per-stream report (packet table, PSI table, anomalies).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

from .errors import InsufficientPcrs, NonMonotonicPcr, PsiError
from .events import AnomalyEvent, AnomalyKind
from .packet import (
    AFC_ADAPTATION,
    PACKET_SIZE,
    PCR_MODULUS,
    PID_NULL,
    SYSTEM_CLOCK_HZ,
    FrameAlignment,
    TsPacket,
)
from .psi import (
    WELL_KNOWN_PIDS,
    CrcStatus,
    PatTable,
    PmtTable,
    SectionAssembler,
    SiKind,
    classify_table,
    parse_pat,
    parse_pmt,
)

VIDEO_STREAM_TYPES = frozenset({0x01, 0x02, 0x10, 0x1B})
AUDIO_STREAM_TYPES = frozenset({0x03, 0x04, 0x0F, 0x11})


class PidClass(enum.Enum):
    VIDEO = "video"
    AUDIO = "audio"
    PRIVATE = "private"
    PSI = "psi"
    NULL = "null"
    UNREFERENCED = "unreferenced"


class PidRole(NamedTuple):
    pid_class: PidClass
    psi_kind: Optional[SiKind] = None

    @property
    def label(self) -> str:
        if self.pid_class is PidClass.PSI:
            return self.psi_kind.value
        return self.pid_class.value


def stream_type_class(stream_type: int) -> PidClass:
    if stream_type in VIDEO_STREAM_TYPES:
        return PidClass.VIDEO
    if stream_type in AUDIO_STREAM_TYPES:
        return PidClass.AUDIO
    return PidClass.PRIVATE


def classify_pids(pat: Optional[PatTable], pmts: Sequence[PmtTable],
                  observed: Iterable[int]) -> Dict[int, PidRole]:
    """Assign exactly one role to every observed PID."""
    psi: Dict[int, SiKind] = dict(WELL_KNOWN_PIDS)
    if pat is not None:
        if pat.network_pid is not None:
            psi.setdefault(pat.network_pid, SiKind.NIT)
        for pmt_pid in pat.programs.values():
            psi[pmt_pid] = SiKind.PMT
    es: Dict[int, int] = {}
    for pmt in pmts:
        for s in pmt.streams:
            es.setdefault(s.elementary_pid, s.stream_type)
    roles = {}
    for pid in observed:
        if pid in psi:
            roles[pid] = PidRole(PidClass.PSI, psi[pid])
        elif pid in es:
            roles[pid] = PidRole(stream_type_class(es[pid]))
        elif pid == PID_NULL:
            roles[pid] = PidRole(PidClass.NULL)
        else:
            roles[pid] = PidRole(PidClass.UNREFERENCED)
    return roles


# continuity verdicts
CC_OK = 0
CC_DUPLICATE = 1
CC_EXCESS_DUPLICATE = 2
CC_GAP = 3


class ContinuityState:
    """Per-PID continuity counter rule.

    Only payload-carrying packets advance the counter. One repeat of the
    previous counter is a legal duplicate; further repeats are errors. A
    discontinuity_indicator (on this packet or on an adaptation-only packet
    since the last check) makes the next check accept any value.
    """

    __slots__ = ("last", "dups", "suppress")

    def __init__(self):
        self.last = None
        self.dups = 0
        self.suppress = False

    def check(self, cc: int, has_payload: bool, discontinuity: bool = False) -> int:
        if not has_payload:
            if discontinuity:
                self.suppress = True
            return CC_OK
        last = self.last
        if last is None or discontinuity or self.suppress:
            self.last, self.dups, self.suppress = cc, 0, False
            return CC_OK
        if cc == last:
            self.dups += 1
            return CC_DUPLICATE if self.dups == 1 else CC_EXCESS_DUPLICATE
        self.last, self.dups = cc, 0
        return CC_OK if cc == (last + 1) & 0xF else CC_GAP


def check_continuity(packets: Iterable[TsPacket], indices: Optional[Sequence[int]] = None
                     ) -> List[AnomalyEvent]:
    """Continuity anomalies for one PID's packets in stream order."""
    state = ContinuityState()
    events = []
    for pos, pkt in enumerate(packets):
        if pkt.pid == PID_NULL or pkt.adaptation_field_control == 0:
            continue
        index = indices[pos] if indices is not None else pos
        previous = state.last
        verdict = state.check(pkt.continuity_counter, pkt.has_payload, pkt.discontinuity)
        if verdict == CC_GAP:
            events.append(AnomalyEvent(AnomalyKind.CC_DISCONTINUITY, pkt.pid, index,
                                       (previous + 1) & 0xF, pkt.continuity_counter))
        elif verdict == CC_EXCESS_DUPLICATE:
            events.append(AnomalyEvent(AnomalyKind.CC_EXCESS_DUPLICATE, pkt.pid, index,
                                       (previous + 1) & 0xF, pkt.continuity_counter))
    return events


@dataclass(frozen=True)
class BitrateEstimate:
    bps: float
    intervals: Tuple[float, ...] = ()
    skipped: int = 0


def estimate_bitrate(observations: Sequence[Tuple[int, int]]) -> BitrateEstimate:
    """
    Mux rate from ``(byte_position, pcr_ticks)`` pairs of one PID.

    PCR wraparound is unrolled first; observations that do not advance the
    clock are skipped. The overall rate spans the first and last accepted
    observation.
    """
    if len(observations) < 2:
        raise InsufficientPcrs(f"need two PCRs, have {len(observations)}")
    accepted = []
    skipped = 0
    wraps = 0
    prev_raw = None
    for pos, value in observations:
        if prev_raw is not None and value < prev_raw - PCR_MODULUS // 2:
            wraps += 1
        prev_raw = value
        ticks = value + wraps * PCR_MODULUS
        if accepted and (ticks <= accepted[-1][1] or pos <= accepted[-1][0]):
            skipped += 1
            continue
        accepted.append((pos, ticks))
    if len(accepted) < 2:
        raise NonMonotonicPcr("PCR never advances")
    intervals = tuple(
        (b[0] - a[0]) * 8 * SYSTEM_CLOCK_HZ / (b[1] - a[1]) for a, b in zip(accepted, accepted[1:]))
    (p0, t0), (p1, t1) = accepted[0], accepted[-1]
    return BitrateEstimate((p1 - p0) * 8 * SYSTEM_CLOCK_HZ / (t1 - t0), intervals, skipped)


@dataclass
class PidStats:
    pid: int
    first_index: int
    packet_count: int = 0
    pid_class: PidClass = PidClass.UNREFERENCED
    psi_kind: Optional[SiKind] = None
    stream_type: Optional[int] = None
    tei_count: int = 0
    priority_count: int = 0
    pcr_count: int = 0
    pes_count: int = 0
    first_cc: int = 0
    last_cc: int = 0
    first_afc: int = 0
    first_tei: bool = False
    first_priority: bool = False
    first_pcr: Optional[int] = None

    @property
    def role(self) -> PidRole:
        return PidRole(self.pid_class, self.psi_kind)


@dataclass(frozen=True)
class PacketRow:
    index: int
    pid: int
    packet_type: str
    error_indicator: int
    transport_priority: int
    adaptation_control: int
    pcr: Optional[int]
    continuity_counter: int


@dataclass(frozen=True)
class PsiRow:
    index: int
    pid: int
    psi_type: str
    section_length: int
    version_number: Optional[int]
    section_number: Optional[int]
    table_id: int


@dataclass(frozen=True)
class TableUpdate:
    pid: int
    table_id: int
    table_id_extension: Optional[int]
    old_version: int
    new_version: int
    packet_index: int


@dataclass
class StreamReport:
    alignment: Optional[FrameAlignment] = None
    packet_count: int = 0
    packet_table: List[PacketRow] = field(default_factory=list)
    psi_table: List[PsiRow] = field(default_factory=list)
    pid_stats: List[PidStats] = field(default_factory=list)
    pat: Optional[PatTable] = None
    pmts: List[PmtTable] = field(default_factory=list)
    anomalies: List[AnomalyEvent] = field(default_factory=list)
    table_updates: List[TableUpdate] = field(default_factory=list)
    bitrate_bps: Optional[float] = None
    summary: Dict[str, int] = field(default_factory=dict)
    truncated_sections: int = 0

    def stats_for(self, pid: int) -> Optional[PidStats]:
        for s in self.pid_stats:
            if s.pid == pid:
                return s
        return None

    def anomaly_counts(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for a in self.anomalies:
            counts[a.kind.value] = counts.get(a.kind.value, 0) + 1
        return counts


SUMMARY_KEYS = ("video", "audio", "private", "signaling", "null", "unreferenced")


class _PidState:
    __slots__ = ("stats", "cc", "pcrs", "pes_missing")

    def __init__(self, pid, index):
        self.stats = PidStats(pid, index)
        self.cc = ContinuityState()
        self.pcrs = []
        self.pes_missing = []


class Analyzer:
    """
    Incremental analyzer: feed frames in stream order, then :meth:`finish`.

    Frames may be 188 or 204 bytes; only the first 188 are read.
    """

    def __init__(self, packet_size: int = PACKET_SIZE, alignment: Optional[FrameAlignment] = None):
        self.packet_size = packet_size
        self.alignment = alignment
        self._origin = alignment.offset if alignment is not None else 0
        self._pids: Dict[int, _PidState] = {}
        self._asm: Dict[int, SectionAssembler] = {pid: SectionAssembler(pid) for pid in WELL_KNOWN_PIDS}
        self._anomalies: List[AnomalyEvent] = []
        self._psi_rows: Dict[tuple, PsiRow] = {}
        self._versions: Dict[tuple, int] = {}
        self._updates: List[TableUpdate] = []
        self._pat: Optional[PatTable] = None
        self._pmts: Dict[int, PmtTable] = {}
        self._count = 0

    def sync_lost(self, index: int):
        """Bytes were lost before frame *index*: report it and distrust counter state."""
        self._anomalies.append(AnomalyEvent(AnomalyKind.SYNC_LOSS, None, index))
        for st in self._pids.values():
            st.cc.suppress = True
        for asm in self._asm.values():
            asm.reset()

    def feed(self, index: int, frame) -> None:
        self._count += 1
        b1 = frame[1]
        pid = ((b1 & 0x1F) << 8) | frame[2]
        b3 = frame[3]
        afc = (b3 >> 4) & 3
        cc = b3 & 0x0F
        st = self._pids.get(pid)
        if st is None:
            st = self._pids[pid] = _PidState(pid, index)
            s = st.stats
            s.first_cc, s.first_afc = cc, afc
            s.first_tei, s.first_priority = bool(b1 & 0x80), bool(b1 & 0x20)
        stats = st.stats
        stats.packet_count += 1
        stats.last_cc = cc
        if b1 & 0x80:
            stats.tei_count += 1
            self._anomalies.append(AnomalyEvent(AnomalyKind.TEI_SET, pid, index))
        if b1 & 0x20:
            stats.priority_count += 1
        if afc == 0:
            self._anomalies.append(AnomalyEvent(AnomalyKind.RESERVED_AFC, pid, index))
            return
        start = 4
        disc = False
        pcr = None
        if afc & 2:
            af_len = frame[4]
            start = 5 + af_len
            if start > 188:
                return
            if af_len:
                flags = frame[5]
                disc = bool(flags & 0x80)
                if flags & 0x10 and af_len >= 7:
                    v = int.from_bytes(frame[6:12], "big")
                    pcr = (v >> 15) * 300 + (v & 0x1FF)
        if pcr is not None:
            stats.pcr_count += 1
            if stats.first_pcr is None:
                stats.first_pcr = pcr
        if pid == PID_NULL:
            return
        has_payload = afc != AFC_ADAPTATION
        previous = st.cc.last
        verdict = st.cc.check(cc, has_payload, disc)
        if verdict:
            if verdict == CC_GAP:
                self._anomalies.append(AnomalyEvent(
                    AnomalyKind.CC_DISCONTINUITY, pid, index, (previous + 1) & 0xF, cc))
                asm = self._asm.get(pid)
                if asm is not None:
                    asm.reset()
            else:
                if verdict == CC_EXCESS_DUPLICATE:
                    self._anomalies.append(AnomalyEvent(
                        AnomalyKind.CC_EXCESS_DUPLICATE, pid, index, (previous + 1) & 0xF, cc))
                return  # duplicates carry nothing new
        if pcr is not None:
            st.pcrs.append((self._origin + index * self.packet_size, pcr))
        if not has_payload:
            return
        pusi = b1 & 0x40
        asm = self._asm.get(pid)
        if asm is not None:
            for section in asm.push(frame[start:188], bool(pusi), index):
                self._on_section(section, index)
        elif pusi:
            if frame[start:start + 3] == b"\x00\x00\x01":
                stats.pes_count += 1
            else:
                st.pes_missing.append(index)

    def _on_section(self, section, index):
        pid, tid = section.pid, section.table_id
        if section.crc_status is CrcStatus.INVALID:
            self._anomalies.append(AnomalyEvent(
                AnomalyKind.CRC_INVALID, pid, index, expected=0,
                observed=section.crc, detail=f"table 0x{tid:02X}"))
            return
        pmt_pids = set(self._pat.programs.values()) if self._pat is not None else set()
        kind = classify_table(pid, tid, pmt_pids)
        key = (pid, tid, section.version_number, section.section_number)
        if key not in self._psi_rows:
            label = kind.value if kind is not SiKind.OTHER else f"Other(0x{tid:02X})"
            self._psi_rows[key] = PsiRow(len(self._psi_rows), pid, label, section.section_length,
                                         section.version_number, section.section_number, tid)
        if section.version_number is not None:
            vkey = (pid, tid, section.table_id_extension)
            old = self._versions.get(vkey)
            if old is not None and old != section.version_number:
                self._updates.append(TableUpdate(pid, tid, section.table_id_extension, old,
                                                 section.version_number, index))
            self._versions[vkey] = section.version_number
        try:
            if kind is SiKind.PAT and section.current_next_indicator:
                self._on_pat(parse_pat(section))
            elif kind is SiKind.PMT and section.current_next_indicator:
                pmt = parse_pmt(section)
                if self._pat is None or self._pat.programs.get(pmt.program_number) == pid:
                    self._pmts[pmt.program_number] = pmt
        except PsiError:
            pass

    def _on_pat(self, pat: PatTable):
        self._pat = pat
        for pmt_pid in pat.programs.values():
            if pmt_pid not in self._asm:
                self._asm[pmt_pid] = SectionAssembler(pmt_pid)
        stale = [n for n in self._pmts if n not in pat.programs]
        for n in stale:
            del self._pmts[n]

    @property
    def packet_count(self) -> int:
        return self._count

    @property
    def anomaly_count(self) -> int:
        return len(self._anomalies)

    @property
    def pid_count(self) -> int:
        return len(self._pids)

    def finish(self) -> StreamReport:
        truncated = sum(asm.flush() for asm in self._asm.values())
        pat = self._pat
        order = list(pat.programs) if pat is not None else sorted(self._pmts)
        pmts = [self._pmts[n] for n in order if n in self._pmts]
        roles = classify_pids(pat, pmts, self._pids)
        stream_types = {}
        for pmt in pmts:
            for s in pmt.streams:
                stream_types.setdefault(s.elementary_pid, s.stream_type)

        anomalies = list(self._anomalies)
        states = sorted(self._pids.values(), key=lambda st: st.stats.first_index)
        summary = dict.fromkeys(SUMMARY_KEYS, 0)
        rows = []
        for row_index, st in enumerate(states):
            s = st.stats
            role = roles[s.pid]
            s.pid_class, s.psi_kind = role.pid_class, role.psi_kind
            s.stream_type = stream_types.get(s.pid)
            if role.pid_class in (PidClass.VIDEO, PidClass.AUDIO, PidClass.PRIVATE):
                anomalies.extend(AnomalyEvent(AnomalyKind.PES_START_MISSING, s.pid, i)
                                 for i in st.pes_missing)
            else:
                s.pes_count = 0
            key = "signaling" if role.pid_class is PidClass.PSI else role.pid_class.value
            summary[key] += 1
            rows.append(PacketRow(row_index, s.pid, role.label, int(s.first_tei),
                                  int(s.first_priority), s.first_afc, s.first_pcr, s.first_cc))
        anomalies.sort(key=lambda a: a.packet_index)

        bitrate = None
        for pmt in pmts:
            st = self._pids.get(pmt.pcr_pid)
            if st is not None:
                try:
                    bitrate = estimate_bitrate(st.pcrs).bps
                except (InsufficientPcrs, NonMonotonicPcr):
                    pass
            break

        return StreamReport(
            alignment=self.alignment,
            packet_count=self._count,
            packet_table=rows,
            psi_table=list(self._psi_rows.values()),
            pid_stats=[st.stats for st in states],
            pat=pat,
            pmts=pmts,
            anomalies=anomalies,
            table_updates=list(self._updates),
            bitrate_bps=bitrate,
            summary=summary,
            truncated_sections=truncated,
        )


def analyze_stream(frames: Iterable, packet_size: int = PACKET_SIZE,
                   alignment: Optional[FrameAlignment] = None) -> StreamReport:
    """
    Analyze already aligned frames.

    *frames* yields raw frame buffers or ``(index, buffer)`` pairs.
    """
    analyzer = Analyzer(packet_size, alignment)
    for i, item in enumerate(frames):
        if isinstance(item, tuple):
            analyzer.feed(item[0], item[1])
        else:
            analyzer.feed(i, item)
    return analyzer.finish()


def analyze_source(source, packet_size=None, probe_window: int = 5) -> StreamReport:
    """Read, align and analyze a file path, bytes object or ingest source."""
    from .ingest import read_aligned

    reader = read_aligned(source, packet_size=packet_size, probe_window=probe_window)
    analyzer = None
    losses = reader.sync_losses  # grows while reading
    k = 0
    for index, frame in reader:
        if analyzer is None:
            analyzer = Analyzer(reader.alignment.packet_size, reader.alignment)
        while k < len(losses) and losses[k] <= index:
            analyzer.sync_lost(losses[k])
            k += 1
        analyzer.feed(index, frame)
    if analyzer is None:
        return StreamReport(alignment=reader.alignment, summary=dict.fromkeys(SUMMARY_KEYS, 0))
    for pending in losses[k:]:
        analyzer.sync_lost(pending)
    return analyzer.finish()
