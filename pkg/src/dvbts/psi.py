"""
PSI/SI sections: reassembly from packet payloads, CRC validation, and
decoding of PAT, PMT and generic SI headers.

Sections start at the byte addressed by the pointer_field of a packet with
payload_unit_start set and may run across several packets. ``0xFF`` in the
table_id position marks stuffing to the end of the packet.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

from .crc import crc32_mpeg
from .errors import (
    BodyLengthNotMultipleOf4,
    DescriptorLoopOverrun,
    InvalidSectionCrc,
    TruncatedSection,
    WrongTableId,
)
from .packet import PID_EIT, PID_NIT, PID_NULL, PID_PAT, PID_SDT, PID_TDT

TID_PAT = 0x00
TID_PMT = 0x02
TID_NIT_ACTUAL = 0x40
TID_NIT_OTHER = 0x41
TID_SDT_ACTUAL = 0x42
TID_SDT_OTHER = 0x46
TID_TDT = 0x70
TID_TOT = 0x73
TID_STUFFING = 0xFF

MAX_SECTION_LENGTH = 4093
MAX_PSI_SECTION_LENGTH = 1021  # PAT, CAT, PMT


class CrcStatus(enum.Enum):
    VALID = "valid"
    INVALID = "invalid"
    NOT_APPLICABLE = "n/a"


class SiKind(enum.Enum):
    PAT = "PAT"
    PMT = "PMT"
    NIT = "NIT"
    SDT = "SDT"
    EIT = "EIT"
    TDT = "TDT"
    TOT = "TOT"
    OTHER = "Other"


# PID -> kind for the fixed-PID tables; the PID alone classifies a packet stream
WELL_KNOWN_PIDS = {
    PID_PAT: SiKind.PAT,
    PID_NIT: SiKind.NIT,
    PID_SDT: SiKind.SDT,
    PID_EIT: SiKind.EIT,
    PID_TDT: SiKind.TDT,
}


@dataclass(frozen=True)
class PsiSection:
    pid: int
    table_id: int
    section_syntax_indicator: bool
    section_length: int
    body: bytes
    crc_status: CrcStatus
    private_indicator: bool = False
    table_id_extension: Optional[int] = None
    version_number: Optional[int] = None
    current_next_indicator: Optional[bool] = None
    section_number: Optional[int] = None
    last_section_number: Optional[int] = None
    raw: bytes = field(default=b"", repr=False)
    packet_index: Optional[int] = field(default=None, compare=False)

    @property
    def long_form(self) -> bool:
        return self.section_syntax_indicator

    @classmethod
    def from_bytes(cls, raw, pid: int = 0, packet_index: Optional[int] = None) -> "PsiSection":
        raw = bytes(raw)
        if len(raw) < 3:
            raise ValueError("section shorter than its 3-byte header")
        table_id = raw[0]
        ssi = bool(raw[1] & 0x80)
        length = ((raw[1] & 0x0F) << 8) | raw[2]
        if len(raw) != 3 + length:
            raise ValueError(f"section_length {length} disagrees with {len(raw)} bytes")
        common = dict(pid=pid, table_id=table_id, section_syntax_indicator=ssi,
                      section_length=length, private_indicator=bool(raw[1] & 0x40),
                      raw=raw, packet_index=packet_index)
        if not ssi:
            return cls(body=raw[3:], crc_status=CrcStatus.NOT_APPLICABLE, **common)
        if length < 9:
            raise ValueError(f"long-form section_length {length} < 9")
        status = CrcStatus.VALID if crc32_mpeg(raw) == 0 else CrcStatus.INVALID
        return cls(
            body=raw[8:-4],
            crc_status=status,
            table_id_extension=(raw[3] << 8) | raw[4],
            version_number=(raw[5] >> 1) & 0x1F,
            current_next_indicator=bool(raw[5] & 1),
            section_number=raw[6],
            last_section_number=raw[7],
            **common,
        )

    @property
    def crc(self) -> Optional[int]:
        if not self.section_syntax_indicator:
            return None
        return int.from_bytes(self.raw[-4:], "big")


def encode_section(table_id: int, body: bytes = b"", *, long_form: bool = True,
                   table_id_extension: int = 0, version: int = 0, current_next: bool = True,
                   section_number: int = 0, last_section_number: int = 0,
                   private_indicator: Optional[bool] = None) -> bytes:
    """Frame *body* as a complete section, appending the CRC for long-form sections."""
    if private_indicator is None:
        private_indicator = table_id >= 0x40
    if long_form:
        length = 5 + len(body) + 4
    else:
        length = len(body)
    limit = MAX_PSI_SECTION_LENGTH if table_id <= TID_PMT else MAX_SECTION_LENGTH
    if length > limit:
        raise ValueError(f"section_length {length} exceeds {limit} for table 0x{table_id:02X}")
    if not 0 <= version <= 31:
        raise ValueError("version_number is 5 bits")
    head = bytes((table_id, (long_form << 7) | (private_indicator << 6) | 0x30 | (length >> 8),
                  length & 0xFF))
    if not long_form:
        return head + bytes(body)
    ext = bytes((table_id_extension >> 8, table_id_extension & 0xFF,
                 0xC0 | (version << 1) | int(current_next), section_number, last_section_number))
    section = head + ext + bytes(body)
    return section + crc32_mpeg(section).to_bytes(4, "big")


class SectionAssembler:
    """
    Reassembles sections for one PID from payloads fed in stream order.

    Byte accounting: every payload byte ends up in exactly one of
    ``section_bytes`` (emitted sections), ``skipped_bytes`` (pointer fields
    and stuffing) or ``discarded_bytes`` (fragments without a usable start,
    malformed or abandoned sections).
    """

    def __init__(self, pid: int):
        self.pid = pid
        self._buf: Optional[bytearray] = None
        self._start_index = None
        self.fed_bytes = 0
        self.section_bytes = 0
        self.skipped_bytes = 0
        self.discarded_bytes = 0
        self.truncated = 0

    @property
    def in_progress(self) -> bool:
        return self._buf is not None

    def reset(self):
        """Drop any partial section (used after packet loss)."""
        if self._buf is not None:
            self.discarded_bytes += len(self._buf)
            self._buf = None

    def push(self, payload, pusi: bool, index: Optional[int] = None) -> List[PsiSection]:
        n = len(payload)
        self.fed_bytes += n
        out: List[PsiSection] = []
        if not n:
            return out
        if not pusi:
            if self._buf is None:
                self.discarded_bytes += n
            else:
                self._consume(payload, 0, n, index, out)
            return out
        pointer = payload[0]
        self.skipped_bytes += 1
        start = 1 + pointer
        if start > n:
            self.reset()
            self.discarded_bytes += n - 1
            return out
        if self._buf is not None:
            end = self._consume(payload, 1, start, index, out, allow_new=False)
            if self._buf is not None:  # previous section did not finish where the pointer says
                self.reset()
            self.discarded_bytes += start - end
        else:
            self.discarded_bytes += pointer
        self._consume(payload, start, n, index, out)
        return out

    def flush(self) -> bool:
        """End of stream: discard a partial section, returning whether one existed."""
        if self._buf is None:
            return False
        self.truncated += 1
        self.reset()
        return True

    def _consume(self, data, pos, end, index, out, allow_new=True):
        while pos < end:
            buf = self._buf
            if buf is None:
                if not allow_new:
                    return pos
                if data[pos] == TID_STUFFING:
                    self.skipped_bytes += end - pos
                    return end
                buf = self._buf = bytearray()
                self._start_index = index
            if len(buf) < 3:
                take = min(3 - len(buf), end - pos)
                buf += data[pos:pos + take]
                pos += take
                if len(buf) < 3:
                    return pos
                length = ((buf[1] & 0x0F) << 8) | buf[2]
                limit = MAX_PSI_SECTION_LENGTH if buf[0] <= TID_PMT else MAX_SECTION_LENGTH
                if length > limit or (buf[1] & 0x80 and length < 9):
                    self.reset()
                    self.discarded_bytes += end - pos
                    return end
            total = 3 + (((buf[1] & 0x0F) << 8) | buf[2])
            take = min(total - len(buf), end - pos)
            buf += data[pos:pos + take]
            pos += take
            if len(buf) == total:
                self.section_bytes += total
                out.append(PsiSection.from_bytes(buf, self.pid, self._start_index))
                self._buf = None
        return pos


def _feed_items(packets):
    for item in packets:
        if isinstance(item, tuple):
            yield item[0], item[1]
        else:
            yield item.payload, item.payload_unit_start_indicator


def assemble_sections(pid: int, packets: Iterable) -> List[PsiSection]:
    """
    Reassemble every complete section on *pid*.

    *packets* yields :class:`~dvbts.packet.TsPacket` objects or
    ``(payload, payload_unit_start)`` tuples in stream order. A section cut
    off by the end of input is discarded with a :class:`TruncatedSection`
    warning.
    """
    asm = SectionAssembler(pid)
    sections: List[PsiSection] = []
    for i, (payload, pusi) in enumerate(_feed_items(packets)):
        sections.extend(asm.push(payload, pusi, i))
    if asm.flush():
        warnings.warn(f"PID {pid}: stream ended mid-section", TruncatedSection, stacklevel=2)
    return sections


@dataclass(frozen=True)
class PatTable:
    transport_stream_id: int = 0
    version: int = 0
    network_pid: Optional[int] = None
    programs: Dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        for number, pmt_pid in self.programs.items():
            if number == 0:
                raise ValueError("program_number 0 is the network PID entry")
            if pmt_pid in (PID_PAT, PID_NULL):
                raise ValueError(f"PMT PID {pmt_pid} is reserved")

    @property
    def entry_count(self) -> int:
        return len(self.programs) + (self.network_pid is not None)

    def encode(self) -> bytes:
        body = bytearray()
        if self.network_pid is not None:
            body += (0).to_bytes(2, "big") + (0xE000 | self.network_pid).to_bytes(2, "big")
        for number, pmt_pid in self.programs.items():
            body += number.to_bytes(2, "big") + (0xE000 | pmt_pid).to_bytes(2, "big")
        return encode_section(TID_PAT, bytes(body), table_id_extension=self.transport_stream_id,
                              version=self.version)


def _require(section: PsiSection, table_id: int):
    if section.table_id != table_id:
        raise WrongTableId(f"expected table 0x{table_id:02X}, got 0x{section.table_id:02X}")
    if section.crc_status is not CrcStatus.VALID:
        raise InvalidSectionCrc(f"table 0x{table_id:02X} section has {section.crc_status.value} CRC")


def parse_pat(section: PsiSection) -> PatTable:
    _require(section, TID_PAT)
    body = section.body
    if len(body) % 4:
        raise BodyLengthNotMultipleOf4(f"PAT body is {len(body)} bytes")
    network_pid = None
    programs: Dict[int, int] = {}
    for i in range(0, len(body), 4):
        number = (body[i] << 8) | body[i + 1]
        pid = ((body[i + 2] & 0x1F) << 8) | body[i + 3]
        if number == 0:
            network_pid = pid
        else:
            programs[number] = pid
    return PatTable(section.table_id_extension, section.version_number, network_pid, programs)


@dataclass(frozen=True)
class EsInfo:
    stream_type: int
    elementary_pid: int
    es_info: bytes = b""


@dataclass(frozen=True)
class PmtTable:
    program_number: int
    pcr_pid: int
    streams: Tuple[EsInfo, ...] = ()
    version: int = 0
    program_info: bytes = b""

    def __post_init__(self):
        object.__setattr__(self, "streams", tuple(self.streams))
        pids = [s.elementary_pid for s in self.streams]
        if len(set(pids)) != len(pids):
            raise ValueError(f"duplicate elementary PIDs in program {self.program_number}")

    def encode(self) -> bytes:
        body = bytearray((0xE0 | self.pcr_pid >> 8, self.pcr_pid & 0xFF,
                          0xF0 | len(self.program_info) >> 8, len(self.program_info) & 0xFF))
        body += self.program_info
        for s in self.streams:
            body += bytes((s.stream_type, 0xE0 | s.elementary_pid >> 8, s.elementary_pid & 0xFF,
                           0xF0 | len(s.es_info) >> 8, len(s.es_info) & 0xFF))
            body += s.es_info
        return encode_section(TID_PMT, bytes(body), table_id_extension=self.program_number,
                              version=self.version)


def parse_pmt(section: PsiSection) -> PmtTable:
    _require(section, TID_PMT)
    body = section.body
    if len(body) < 4:
        raise DescriptorLoopOverrun("PMT body shorter than its fixed fields")
    pcr_pid = ((body[0] & 0x1F) << 8) | body[1]
    info_len = ((body[2] & 0x0F) << 8) | body[3]
    pos = 4 + info_len
    if pos > len(body):
        raise DescriptorLoopOverrun("program_info_length runs past the section")
    program_info = body[4:pos]
    streams = []
    while pos < len(body):
        if pos + 5 > len(body):
            raise DescriptorLoopOverrun("truncated elementary stream entry")
        es_len = ((body[pos + 3] & 0x0F) << 8) | body[pos + 4]
        end = pos + 5 + es_len
        if end > len(body):
            raise DescriptorLoopOverrun("ES_info_length runs past the section")
        streams.append(EsInfo(body[pos], ((body[pos + 1] & 0x1F) << 8) | body[pos + 2],
                              body[pos + 5:end]))
        pos = end
    return PmtTable(section.table_id_extension, pcr_pid, tuple(streams),
                    section.version_number, program_info)


@dataclass(frozen=True)
class SiTableInfo:
    kind: SiKind
    pid: int
    table_id: int
    section_length: int
    version_number: Optional[int] = None
    section_number: Optional[int] = None

    @property
    def label(self) -> str:
        if self.kind is SiKind.OTHER:
            return f"Other(0x{self.table_id:02X})"
        return self.kind.value


def classify_table(pid: int, table_id: int, pmt_pids=None) -> SiKind:
    if pid == PID_PAT and table_id == TID_PAT:
        return SiKind.PAT
    if table_id == TID_PMT and (pmt_pids is None or pid in pmt_pids):
        return SiKind.PMT
    if pid == PID_NIT and table_id in (TID_NIT_ACTUAL, TID_NIT_OTHER):
        return SiKind.NIT
    if pid == PID_SDT and table_id in (TID_SDT_ACTUAL, TID_SDT_OTHER):
        return SiKind.SDT
    if pid == PID_EIT and 0x4E <= table_id <= 0x6F:
        return SiKind.EIT
    if pid == PID_TDT and table_id == TID_TDT:
        return SiKind.TDT
    if pid == PID_TDT and table_id == TID_TOT:
        return SiKind.TOT
    return SiKind.OTHER


def parse_si_header(section: PsiSection, pmt_pids=None) -> SiTableInfo:
    """Header-level view of any section; *pmt_pids* restricts PMT recognition."""
    return SiTableInfo(
        kind=classify_table(section.pid, section.table_id, pmt_pids),
        pid=section.pid,
        table_id=section.table_id,
        section_length=section.section_length,
        version_number=section.version_number,
        section_number=section.section_number,
    )
