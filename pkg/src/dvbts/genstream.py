"""
Deterministic synthesis of transport streams from a declarative
:class:`StreamSpec`, plus controlled error injection.

Every generated stream comes with a :class:`GroundTruth` describing what
it contains, so parsers and analyzers can be checked against it.

Multiplexing model: each packet slot is assigned, in priority order, to a
due PCR, then pending PSI/SI packets (re-inserted every
``psi_repetition_ms``), then the elementary stream that is furthest behind
its nominal rate, and finally to a null packet.
"""

from __future__ import annotations

import enum
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .analysis import PidClass, stream_type_class
from .errors import IndexOutOfRange, InjectionError, SpecError, SpecOverCapacity, SpecPidCollision
from .events import AnomalyKind
from .packet import (
    MAX_PAYLOAD,
    PACKET_SIZE,
    PACKET_SIZES,
    PID_NULL,
    PID_PAT,
    SYNC_BYTE,
    SYSTEM_CLOCK_HZ,
    Pcr,
    resync,
)
from .psi import WELL_KNOWN_PIDS, EsInfo, PatTable, PmtTable, classify_table, encode_section

PCR_INTERVAL_S = 0.030
PES_HEADER_SIZE = 14  # start code, stream_id, length, flags, header length, PTS
MAX_LOAD = 0.9
CORRUPT_SYNC = SYNC_BYTE ^ 0xFF

NULL_PACKET = bytes((SYNC_BYTE, 0x1F, 0xFF, 0x10)) + b"\xff" * MAX_PAYLOAD


@dataclass(frozen=True)
class EsSpec:
    elementary_pid: int
    stream_type: int
    payload_rate_bps: int
    pes_size_bytes: int
    es_info: bytes = b""


@dataclass(frozen=True)
class ProgramSpec:
    program_number: int
    pmt_pid: int
    pcr_pid: int
    streams: Tuple[EsSpec, ...] = ()
    version: int = 0
    program_info: bytes = b""

    def __post_init__(self):
        object.__setattr__(self, "streams", tuple(self.streams))

    def pmt(self) -> PmtTable:
        return PmtTable(self.program_number, self.pcr_pid,
                        tuple(EsInfo(s.stream_type, s.elementary_pid, s.es_info) for s in self.streams),
                        self.version, self.program_info)


@dataclass(frozen=True)
class SiTableSpec:
    """A raw SI section: header fields plus a body given literally or by length."""

    pid: int
    table_id: int
    body: Optional[bytes] = None
    body_length: Optional[int] = None
    version: int = 0
    section_number: int = 0
    last_section_number: int = 0
    table_id_extension: int = 0
    long_form: Optional[bool] = None

    @property
    def is_long_form(self) -> bool:
        if self.long_form is not None:
            return self.long_form
        return self.table_id not in (0x70, 0x71, 0x72, 0x7E)

    def resolved_body(self, seed: int) -> bytes:
        if self.body is not None:
            return bytes(self.body)
        if self.body_length is None:
            raise SpecError(f"SI table 0x{self.table_id:02X} on PID {self.pid} has no body")
        rng = random.Random(f"{seed}:si:{self.pid}:{self.table_id}:{self.section_number}")
        return rng.randbytes(self.body_length)

    def encode(self, seed: int) -> bytes:
        return encode_section(self.table_id, self.resolved_body(seed), long_form=self.is_long_form,
                              table_id_extension=self.table_id_extension, version=self.version,
                              section_number=self.section_number,
                              last_section_number=self.last_section_number)


class ErrorKind(enum.Enum):
    CC_GAP = "CcGap"
    CC_DUPLICATE = "CcDuplicate"
    TEI_FLAG = "TeiFlag"
    SYNC_CORRUPT = "SyncCorrupt"
    CRC_CORRUPT = "CrcCorrupt"


EXPECTED_ANOMALY = {
    ErrorKind.CC_GAP: AnomalyKind.CC_DISCONTINUITY,
    ErrorKind.CC_DUPLICATE: AnomalyKind.CC_EXCESS_DUPLICATE,
    ErrorKind.TEI_FLAG: AnomalyKind.TEI_SET,
    ErrorKind.SYNC_CORRUPT: AnomalyKind.SYNC_LOSS,
    ErrorKind.CRC_CORRUPT: AnomalyKind.CRC_INVALID,
}


@dataclass(frozen=True)
class ErrorSpec:
    kind: ErrorKind
    pid: Optional[int] = None
    at_packet_indices: Tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", ErrorKind(self.kind))
        object.__setattr__(self, "at_packet_indices", tuple(self.at_packet_indices))


@dataclass(frozen=True)
class StreamSpec:
    transport_stream_id: int = 1
    packet_size: int = PACKET_SIZE
    target_bitrate_bps: int = 2_000_000
    duration_s: float = 1.0
    psi_repetition_ms: float = 100.0
    programs: Tuple[ProgramSpec, ...] = ()
    si_tables: Tuple[SiTableSpec, ...] = ()
    errors: Tuple[ErrorSpec, ...] = ()
    seed: int = 0
    network_pid: Optional[int] = None
    pat_version: int = 0

    def __post_init__(self):
        for name in ("programs", "si_tables", "errors"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @property
    def packet_count(self) -> int:
        return round(self.target_bitrate_bps * self.duration_s / 8 / self.packet_size)

    def pat(self) -> PatTable:
        return PatTable(self.transport_stream_id, self.pat_version, self.network_pid,
                        {p.program_number: p.pmt_pid for p in self.programs})

    def elementary_streams(self) -> List[EsSpec]:
        seen: Dict[int, EsSpec] = {}
        for prog in self.programs:
            for s in prog.streams:
                seen.setdefault(s.elementary_pid, s)
        return list(seen.values())


@dataclass(frozen=True)
class LedgerEntry:
    """One applied mutation and the anomaly it must produce."""

    kind: ErrorKind
    pid: Optional[int]
    source_index: int
    output_index: int
    expected: AnomalyKind


@dataclass
class PesRecord:
    index: int
    payload_size: int
    emitted_payload: int = 0
    complete: bool = False


@dataclass
class GroundTruth:
    packet_count: int
    packet_size: int
    pid_counts: Dict[int, int]
    pid_classes: Dict[int, str]
    stream_types: Dict[int, int]
    programs: Dict[int, int]
    psi_tables: List[Tuple[int, str, Optional[int], Optional[int], int]]
    pes: Dict[int, List[PesRecord]]
    ledger: List[LedgerEntry] = field(default_factory=list)

    def pes_counts(self) -> Dict[int, int]:
        return {pid: len(v) for pid, v in self.pes.items()}

    def es_bytes(self) -> Dict[int, int]:
        return {pid: sum(r.emitted_payload for r in v) for pid, v in self.pes.items()}

    def expected_anomalies(self) -> List[Tuple[str, Optional[int]]]:
        return sorted(((e.expected.value, e.pid) for e in self.ledger),
                      key=lambda kp: (kp[0], -1 if kp[1] is None else kp[1]))


@dataclass
class GeneratedStream:
    data: bytes
    truth: GroundTruth


def es_payload(seed: int, pid: int, k: int, size: int) -> bytes:
    """Payload bytes of the *k*-th PES on *pid* (reproducible from the seed)."""
    return random.Random(f"{seed}:es:{pid}:{k}").randbytes(size)


def _stream_id(stream_type: int, ordinal: int) -> int:
    cls = stream_type_class(stream_type)
    if cls is PidClass.VIDEO:
        return 0xE0 | (ordinal & 0x0F)
    if cls is PidClass.AUDIO:
        return 0xC0 | (ordinal & 0x1F)
    return 0xBD


def _pts_bytes(pts: int) -> bytes:
    pts &= (1 << 33) - 1
    return bytes((
        0x21 | ((pts >> 29) & 0x0E),
        (pts >> 22) & 0xFF,
        0x01 | ((pts >> 14) & 0xFE),
        (pts >> 7) & 0xFF,
        0x01 | ((pts << 1) & 0xFE),
    ))


def _header(pid: int, cc: int, pusi: bool, afc: int) -> bytes:
    return bytes((SYNC_BYTE, (pusi << 6) | (pid >> 8), pid & 0xFF, (afc << 4) | cc))


def _adaptation(size: int, pcr: Optional[int]) -> bytes:
    """Adaptation field of exactly *size* bytes, optionally carrying a PCR."""
    if size == 1:
        return b"\x00"
    body = b"\x00"
    if pcr is not None:
        body = b"\x10" + Pcr.from_value(pcr).encode()
    return bytes((size - 1,)) + body + b"\xff" * (size - 1 - len(body))


def packetize_section(section: bytes) -> List[Tuple[bool, bytes]]:
    """Split a section into 184-byte payloads (pointer_field 0, 0xFF stuffing)."""
    data = b"\x00" + section
    out = []
    for i in range(0, len(data), MAX_PAYLOAD):
        chunk = data[i:i + MAX_PAYLOAD]
        out.append((i == 0, chunk + b"\xff" * (MAX_PAYLOAD - len(chunk))))
    return out


class _Es:
    __slots__ = ("spec", "stream_id", "bounded", "cc", "k", "current", "pos", "sent",
                 "interval", "rate", "records", "seed")

    def __init__(self, spec: EsSpec, ordinal: int, seed: int):
        self.spec = spec
        self.stream_id = _stream_id(spec.stream_type, ordinal)
        self.bounded = (stream_type_class(spec.stream_type) is not PidClass.VIDEO
                        and spec.pes_size_bytes + 8 <= 0xFFFF)
        self.cc = 0
        self.k = 0
        self.current = b""
        self.pos = 0
        self.sent = 0
        self.rate = spec.payload_rate_bps / 8
        self.interval = spec.pes_size_bytes / self.rate
        self.records: List[PesRecord] = []
        self.seed = seed

    def available(self, t: float) -> bool:
        return self.pos < len(self.current) or self.k * self.interval <= t

    def behind(self) -> float:
        return self.sent / self.rate

    def next_packet(self, pcr: Optional[int]) -> bytes:
        pusi = False
        if self.pos >= len(self.current):
            size = self.spec.pes_size_bytes
            t = self.k * self.interval
            length = 8 + size if self.bounded else 0
            head = (b"\x00\x00\x01" + bytes((self.stream_id, length >> 8, length & 0xFF, 0x80, 0x80, 5))
                    + _pts_bytes(round(t * 90_000) + 90_000))
            self.current = head + es_payload(self.seed, self.spec.elementary_pid, self.k, size)
            self.pos = 0
            self.records.append(PesRecord(self.k, size))
            self.k += 1
            pusi = True
        cap = MAX_PAYLOAD - (8 if pcr is not None else 0)
        start = self.pos
        chunk = self.current[start:start + cap]
        self.pos += len(chunk)
        record = self.records[-1]
        record.emitted_payload += len(chunk) - max(0, min(PES_HEADER_SIZE, start + len(chunk)) - start)
        if self.pos >= len(self.current):
            record.complete = True
        self.sent += len(chunk)
        pid = self.spec.elementary_pid
        if len(chunk) == MAX_PAYLOAD:
            pkt = _header(pid, self.cc, pusi, 1) + chunk
        else:
            pkt = _header(pid, self.cc, pusi, 3) + _adaptation(MAX_PAYLOAD - len(chunk), pcr) + chunk
        self.cc = (self.cc + 1) & 0xF
        return pkt


def _psi_sections(spec: StreamSpec) -> List[Tuple[int, bytes]]:
    sections = [(PID_PAT, spec.pat().encode())]
    for prog in spec.programs:
        sections.append((prog.pmt_pid, prog.pmt().encode()))
    for si in spec.si_tables:
        sections.append((si.pid, si.encode(spec.seed)))
    return sections


def validate_spec(spec: StreamSpec) -> None:
    """Raise :class:`SpecPidCollision` / :class:`SpecOverCapacity` / :class:`SpecError`."""
    if spec.packet_size not in PACKET_SIZES:
        raise SpecError(f"packet_size must be 188 or 204, got {spec.packet_size}")
    if spec.target_bitrate_bps <= 0 or spec.duration_s < 0 or spec.psi_repetition_ms <= 0:
        raise SpecError("bitrate, duration and PSI repetition must be positive")
    numbers = [p.program_number for p in spec.programs]
    if len(set(numbers)) != len(numbers) or any(not 0 < n <= 0xFFFF for n in numbers):
        raise SpecError("program numbers must be distinct and in 1..65535")

    def check_pid(pid, what):
        if not 0x10 <= pid < PID_NULL:
            raise SpecPidCollision(f"{what} PID {pid} outside 0x0010..0x1FFE")

    pmt_pids = set()
    for prog in spec.programs:
        check_pid(prog.pmt_pid, "PMT")
        if prog.pmt_pid in pmt_pids or prog.pmt_pid in WELL_KNOWN_PIDS:
            raise SpecPidCollision(f"PMT PID {prog.pmt_pid} reused")
        pmt_pids.add(prog.pmt_pid)
    si_pids = {si.pid for si in spec.si_tables}
    for pid in si_pids:
        check_pid(pid, "SI")
    if spec.network_pid is not None:
        check_pid(spec.network_pid, "network")
    es: Dict[int, EsSpec] = {}
    for prog in spec.programs:
        local = set()
        for s in prog.streams:
            pid = s.elementary_pid
            check_pid(pid, "elementary")
            if pid in local or pid in pmt_pids or pid in si_pids or pid in WELL_KNOWN_PIDS \
                    or pid == spec.network_pid:
                raise SpecPidCollision(f"elementary PID {pid} collides")
            if pid in es and es[pid] != s:
                raise SpecPidCollision(f"PID {pid} declared twice with different parameters")
            if s.payload_rate_bps <= 0 or s.pes_size_bytes <= 0:
                raise SpecError(f"PID {pid}: rate and PES size must be positive")
            local.add(pid)
            es[pid] = s
        if prog.pcr_pid != prog.pmt_pid and prog.pcr_pid not in local:
            raise SpecError(f"program {prog.program_number}: PCR PID must be an ES or the PMT PID")
        if len(prog.pmt().encode()) > 1024:
            raise SpecError(f"program {prog.program_number}: PMT exceeds one section")
    if len(spec.pat().encode()) > 1024:
        raise SpecError("PAT exceeds one section")

    capacity = spec.target_bitrate_bps / 8 / spec.packet_size
    per_cycle = sum(len(packetize_section(sec)) for _, sec in _psi_sections(spec))
    demand = per_cycle * 1000.0 / spec.psi_repetition_ms
    for s in es.values():
        per_pes = -(-(s.pes_size_bytes + PES_HEADER_SIZE) // (MAX_PAYLOAD - 8))
        demand += per_pes * s.payload_rate_bps / 8 / s.pes_size_bytes
    demand += sum(1 for p in spec.programs if p.pcr_pid == p.pmt_pid) / PCR_INTERVAL_S
    if demand > MAX_LOAD * capacity:
        raise SpecOverCapacity(
            f"content needs {demand:.0f} packets/s, {spec.target_bitrate_bps} bps carries {capacity:.0f}")


def generate(spec: StreamSpec) -> GeneratedStream:
    """Synthesize the stream described by *spec* (errors in ``spec.errors`` applied last)."""
    validate_spec(spec)
    size = spec.packet_size
    rate = spec.target_bitrate_bps
    n = spec.packet_count
    slot = size * 8 / rate
    rep = spec.psi_repetition_ms / 1000.0
    parity = bytes(size - PACKET_SIZE)
    null = NULL_PACKET + parity

    sections = _psi_sections(spec)
    cycle = [(pid, pusi, payload) for pid, sec in sections for pusi, payload in packetize_section(sec)]
    streams = [_Es(s, i, spec.seed) for i, s in enumerate(spec.elementary_streams())]
    by_pid = {e.spec.elementary_pid: e for e in streams}
    psi_cc: Dict[int, int] = {}
    pcr_due = {}
    for prog in spec.programs:
        pcr_due.setdefault(prog.pcr_pid, 0.0)
    counts: Dict[int, int] = {}

    out = bytearray()
    queue: deque = deque()
    next_psi = 0.0
    for i in range(n):
        t = i * slot
        if t >= next_psi:
            queue.extend(cycle)
            next_psi += rep
        pkt = None
        pid = None
        for pcr_pid, due in pcr_due.items():
            if t >= due:
                pcr = (i * size * 8 * SYSTEM_CLOCK_HZ + rate // 2) // rate
                es = by_pid.get(pcr_pid)
                if es is not None and es.available(t):
                    pkt = es.next_packet(pcr)
                else:
                    cc = es.cc if es is not None else psi_cc.get(pcr_pid, 0)
                    pkt = _header(pcr_pid, (cc - 1) & 0xF, False, 2) + _adaptation(MAX_PAYLOAD, pcr)
                pcr_due[pcr_pid] = t + PCR_INTERVAL_S
                pid = pcr_pid
                break
        if pkt is None and queue:
            pid, pusi, payload = queue.popleft()
            cc = psi_cc.get(pid, 0)
            psi_cc[pid] = (cc + 1) & 0xF
            pkt = _header(pid, cc, pusi, 1) + payload
        if pkt is None:
            best = None
            for es in streams:
                if es.available(t) and (best is None or es.behind() < best.behind()):
                    best = es
            if best is not None:
                pkt = best.next_packet(None)
                pid = best.spec.elementary_pid
        if pkt is None:
            out += null
            counts[PID_NULL] = counts.get(PID_NULL, 0) + 1
            continue
        out += pkt
        if parity:
            out += parity
        counts[pid] = counts.get(pid, 0) + 1

    truth = _ground_truth(spec, counts, streams, sections)
    data = bytes(out)
    if spec.errors:
        data, truth.ledger = inject_errors(data, spec.errors, size)
    return GeneratedStream(data, truth)


def _ground_truth(spec, counts, streams, sections) -> GroundTruth:
    stream_types = {e.spec.elementary_pid: e.spec.stream_type for e in streams}
    pmt_pids = {p.pmt_pid for p in spec.programs}
    classes: Dict[int, str] = {}
    for pid in counts:
        if pid in pmt_pids:
            classes[pid] = "PMT"
        elif pid in WELL_KNOWN_PIDS:
            classes[pid] = WELL_KNOWN_PIDS[pid].value
        elif pid in stream_types:
            classes[pid] = stream_type_class(stream_types[pid]).value
        elif pid == PID_NULL:
            classes[pid] = "null"
        else:
            classes[pid] = "unreferenced"
    psi = []
    for pid, sec in sections:
        if pid not in counts:
            continue
        tid = sec[0]
        long_form = bool(sec[1] & 0x80)
        kind = classify_table(pid, tid, pmt_pids)
        label = kind.value if kind.value != "Other" else f"Other(0x{tid:02X})"
        row = (pid, label, (sec[5] >> 1) & 0x1F if long_form else None,
               sec[6] if long_form else None, tid)
        if row not in psi:
            psi.append(row)
    return GroundTruth(
        packet_count=sum(counts.values()),
        packet_size=spec.packet_size,
        pid_counts=dict(counts),
        pid_classes=classes,
        stream_types={pid: st for pid, st in stream_types.items() if pid in counts},
        programs={p.program_number: p.pmt_pid for p in spec.programs},
        psi_tables=psi,
        pes={e.spec.elementary_pid: e.records for e in streams if e.records},
    )


# ---------------------------------------------------------------- injection

def _packet_info(data, i, size):
    off = i * size
    b1, b3 = data[off + 1], data[off + 3]
    afc = (b3 >> 4) & 3
    disc = afc & 2 and data[off + 4] > 0 and data[off + 5] & 0x80
    return ((b1 & 0x1F) << 8) | data[off + 2], afc, bool(disc)


def _crc_end_packets(data, size, pid, n) -> Dict[int, int]:
    """Map packet index -> stream offset of the last CRC byte of a section ending there."""
    ends: Dict[int, int] = {}
    cur: Optional[List[int]] = None
    need = 0

    def step(p, i):
        nonlocal cur, need
        cur.append(p)
        if len(cur) == 3:
            need = 3 + (((data[cur[1]] & 0x0F) << 8) | data[cur[2]])
        if len(cur) >= 3 and len(cur) == need:
            if data[cur[1]] & 0x80:
                ends[i] = p
            cur = None
            return True
        return False

    for i in range(n):
        off = i * size
        if data[off] != SYNC_BYTE or (((data[off + 1] & 0x1F) << 8) | data[off + 2]) != pid:
            continue
        afc = (data[off + 3] >> 4) & 3
        if not afc & 1:
            continue
        p = off + 4 + (1 + data[off + 4] if afc & 2 else 0)
        end = off + PACKET_SIZE
        pusi = bool(data[off + 1] & 0x40)
        stop = end
        if pusi:
            stop = min(p + 1 + data[p], end)
            p += 1
        completed = False
        while cur is not None and p < stop:
            completed = step(p, i)
            p += 1
        if pusi:
            cur = None
            p = stop
        elif not completed:
            continue
        while p < end:
            if cur is None:
                if data[p] == 0xFF:
                    break
                cur = []
            step(p, i)
            p += 1
    return ends


def inject_errors(stream: bytes, errors: Sequence[ErrorSpec], packet_size: Optional[int] = None
                  ) -> Tuple[bytes, List[LedgerEntry]]:
    """
    Apply *errors* to an aligned stream.

    Indices refer to packets of the input. ``CcGap`` deletes the packet,
    ``CcDuplicate`` emits it twice more, ``TeiFlag`` sets the error
    indicator, ``SyncCorrupt`` overwrites the sync byte, ``CrcCorrupt`` flips
    a bit in the CRC of the section that ends in the packet.
    """
    if packet_size is None:
        packet_size = resync(stream).packet_size if stream else PACKET_SIZE
    size = packet_size
    n = len(stream) // size
    deleted = set()
    dup = set()
    mutations: Dict[int, List[Tuple[str, int]]] = {}
    pending = []
    crc_maps: Dict[int, Dict[int, int]] = {}
    for err in errors:
        for i in err.at_packet_indices:
            if not 0 <= i < n:
                raise IndexOutOfRange(f"packet index {i} outside 0..{n - 1}")
            pid, afc, _ = _packet_info(stream, i, size)
            if err.kind is not ErrorKind.SYNC_CORRUPT and err.pid is not None and err.pid != pid:
                raise InjectionError(f"packet {i} is on PID {pid}, not {err.pid}")
            if err.kind in (ErrorKind.CC_GAP, ErrorKind.CC_DUPLICATE):
                if pid == PID_NULL or not afc & 1:
                    raise InjectionError(f"packet {i} carries no counted payload")
            if err.kind is ErrorKind.CC_GAP:
                if not any(_packet_info(stream, j, size)[0] == pid and _packet_info(stream, j, size)[1] & 1
                           for j in range(i)):
                    raise InjectionError(f"packet {i} is the first on PID {pid}; a gap there is invisible")
                nxt = next((j for j in range(i + 1, n) if _packet_info(stream, j, size)[0] == pid
                            and _packet_info(stream, j, size)[1] & 1), None)
                if nxt is None or _packet_info(stream, nxt, size)[2]:
                    raise InjectionError(f"no later packet on PID {pid} would reveal a gap at {i}")
                deleted.add(i)
                pending.append((err.kind, pid, i, nxt))
            elif err.kind is ErrorKind.CC_DUPLICATE:
                dup.add(i)
                pending.append((err.kind, pid, i, i))
            elif err.kind is ErrorKind.TEI_FLAG:
                mutations.setdefault(i, []).append(("tei", 1))
                pending.append((err.kind, pid, i, i))
            elif err.kind is ErrorKind.SYNC_CORRUPT:
                if i == 0:
                    raise InjectionError("the first packet anchors alignment and cannot be corrupted")
                mutations.setdefault(i, []).append(("sync", 0))
                pending.append((err.kind, None, i, i))
            elif err.kind is ErrorKind.CRC_CORRUPT:
                if pid not in crc_maps:
                    crc_maps[pid] = _crc_end_packets(stream, size, pid, n)
                where = crc_maps[pid].get(i)
                if where is None:
                    raise InjectionError(f"no section CRC ends in packet {i}")
                mutations.setdefault(i, []).append(("crc", where))
                pending.append((err.kind, pid, i, i))
    if deleted & (dup | set(mutations)):
        raise InjectionError("a deleted packet cannot carry other errors")

    out = bytearray()
    out_index: Dict[int, int] = {}
    k = 0
    for i in range(n):
        if i in deleted:
            continue
        off = i * size
        frame = stream[off:off + size]
        if i in mutations:
            frame = bytearray(frame)
            for what, where in mutations[i]:
                if what == "tei":
                    frame[1] |= 0x80
                elif what == "sync":
                    frame[0] = CORRUPT_SYNC
                else:
                    frame[where - off] ^= 0x01
        out_index[i] = k
        copies = 3 if i in dup else 1
        out += frame * copies
        k += copies
    out += stream[n * size:]

    ledger = []
    for kind, pid, i, j in pending:
        target = out_index[j] + (2 if kind is ErrorKind.CC_DUPLICATE else 0)
        ledger.append(LedgerEntry(kind, pid, i, target, EXPECTED_ANOMALY[kind]))
    ledger.sort(key=lambda e: (e.output_index, e.kind.value))
    return bytes(out), ledger


# ---------------------------------------------------------------- fixtures

def replica_spec(duration_s: float = 1.0, target_bitrate_bps: int = 8_000_000,
                 packet_size: int = PACKET_SIZE, seed: int = 2003) -> StreamSpec:
    """
    Reconstruction of the two-program multiplex analysed in the reference
    captures: one video, three audio and one private stream shared by
    programs 0x1241 and 0x1181, with NIT/SDT/EIT/TDT on their fixed PIDs.
    """
    lang = lambda code: b"\x0a\x04" + code + b"\x00"  # ISO 639 language descriptor
    streams = (
        EsSpec(520, 0x02, 3_000_000, 12_000),
        EsSpec(730, 0x03, 192_000, 1_152, lang(b"eng")),
        EsSpec(731, 0x03, 192_000, 1_152, lang(b"deu")),
        EsSpec(732, 0x03, 192_000, 1_152, lang(b"ron")),
        EsSpec(800, 0x06, 64_000, 512),
    )
    program_info = b"\x80\x17" + bytes(range(0x17))  # user-private descriptor, 25 bytes total
    programs = (
        ProgramSpec(0x1241, 268, 520, streams, version=0, program_info=program_info),
        ProgramSpec(0x1181, 269, 520, streams, version=9, program_info=program_info),
    )
    si = (
        SiTableSpec(16, 0x40, body_length=163 - 9, version=0, table_id_extension=0x3001),
        SiTableSpec(17, 0x42, body_length=121 - 9, version=21, table_id_extension=1),
        SiTableSpec(18, 0x4E, body_length=282 - 9, version=3, table_id_extension=0x1241),
        SiTableSpec(20, 0x70, body=bytes.fromhex("d2ee120000") + b"\xff" * 4),
    )
    return StreamSpec(transport_stream_id=1, packet_size=packet_size,
                      target_bitrate_bps=target_bitrate_bps, duration_s=duration_s,
                      programs=programs, si_tables=si, seed=seed, network_pid=16)
