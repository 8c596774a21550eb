"""
Transport packet layer.

A transport packet is 188 bytes: a 4-byte header, an optional adaptation
field and the payload. Header layout (MSB first)::

    byte 0     sync byte 0x47
    byte 1-2   TEI(1) | PUSI(1) | priority(1) | PID(13)
    byte 3     scrambling(2) | adaptation_field_control(2) | CC(4)

DVB transmission framing appends 16 Reed-Solomon parity bytes, giving 204
byte frames. Parity is stripped here, never decoded.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .errors import MalformedAdaptation, NeedMoreData, NoSyncFound, SyncByteMismatch

SYNC_BYTE = 0x47
PACKET_SIZE = 188
RS_PACKET_SIZE = 204
HEADER_SIZE = 4
MAX_PAYLOAD = 184
PACKET_SIZES = (PACKET_SIZE, RS_PACKET_SIZE)

PID_PAT = 0x0000
PID_NIT = 0x0010
PID_SDT = 0x0011
PID_EIT = 0x0012
PID_TDT = 0x0014
PID_NULL = 0x1FFF

AFC_RESERVED = 0
AFC_PAYLOAD = 1
AFC_ADAPTATION = 2
AFC_BOTH = 3

SYSTEM_CLOCK_HZ = 27_000_000
PCR_MODULUS = (1 << 33) * 300

DEFAULT_PROBE_WINDOW = 5


@dataclass(frozen=True)
class Pcr:
    """Program clock reference: 33-bit 90 kHz base plus 9-bit 27 MHz extension."""

    base: int
    extension: int = 0

    def __post_init__(self):
        if not 0 <= self.base < (1 << 33):
            raise ValueError(f"PCR base out of range: {self.base}")
        if not 0 <= self.extension < 300:
            raise ValueError(f"PCR extension must be < 300, got {self.extension}")

    def value(self) -> int:
        return self.base * 300 + self.extension

    @classmethod
    def from_value(cls, ticks: int) -> "Pcr":
        ticks %= PCR_MODULUS
        return cls(ticks // 300, ticks % 300)

    def encode(self) -> bytes:
        v = (self.base << 15) | 0x7E00 | self.extension
        return v.to_bytes(6, "big")

    @classmethod
    def decode(cls, b) -> "Pcr":
        v = int.from_bytes(b[:6], "big")
        return cls(v >> 15, v & 0x1FF)


def pcr_to_seconds(pcr) -> Fraction:
    """Seconds represented by *pcr* (a :class:`Pcr` or a raw 27 MHz tick count)."""
    ticks = pcr.value() if isinstance(pcr, Pcr) else int(pcr)
    return Fraction(ticks, SYSTEM_CLOCK_HZ)


@dataclass(frozen=True)
class AdaptationField:
    """
    Decoded adaptation field.

    ``length`` is the adaptation_field_length byte, so the field occupies
    ``1 + length`` bytes of the packet. ``optional`` holds the raw bytes of
    OPCR/splice/private/extension sub-fields, which are not interpreted.
    """

    length: int
    discontinuity_indicator: bool = False
    random_access_indicator: bool = False
    es_priority_indicator: bool = False
    pcr: Optional[Pcr] = None
    flags: int = 0
    optional: bytes = b""
    stuffing_bytes: int = 0

    @property
    def size(self) -> int:
        return 1 + self.length

    def encode(self) -> bytes:
        if self.length == 0:
            return b"\x00"
        flags = self.flags & 0x0F
        flags |= self.discontinuity_indicator << 7
        flags |= self.random_access_indicator << 6
        flags |= self.es_priority_indicator << 5
        body = bytearray()
        if self.pcr is not None:
            flags |= 0x10
            body += self.pcr.encode()
        body += self.optional
        body = bytes([flags]) + body
        if len(body) > self.length:
            raise MalformedAdaptation("adaptation content longer than declared length")
        return bytes([self.length]) + body + b"\xff" * (self.length - len(body))

    @classmethod
    def build(cls, total_size: int, pcr: Optional[Pcr] = None,
              discontinuity: bool = False) -> "AdaptationField":
        """Adaptation field occupying exactly *total_size* packet bytes (stuffed)."""
        if total_size < 1:
            raise ValueError("adaptation field needs at least one byte")
        length = total_size - 1
        if length == 0:
            if pcr is not None or discontinuity:
                raise MalformedAdaptation("zero-length adaptation field carries no flags")
            return cls(0)
        used = 1 + (6 if pcr is not None else 0)
        if used > length:
            raise MalformedAdaptation(f"{total_size} bytes cannot hold the requested fields")
        return cls(length, discontinuity_indicator=discontinuity, pcr=pcr,
                   stuffing_bytes=length - used)


def _optional_fields_size(flags, data, pos, end):
    """Size of OPCR/splice/private/extension sub-fields starting at *pos*."""
    start = pos
    if flags & 0x08:  # OPCR
        pos += 6
    if flags & 0x04:  # splice countdown
        pos += 1
    if flags & 0x02:  # transport private data
        if pos >= end:
            raise MalformedAdaptation("truncated private data length")
        pos += 1 + data[pos]
    if flags & 0x01:  # adaptation field extension
        if pos >= end:
            raise MalformedAdaptation("truncated extension length")
        pos += 1 + data[pos]
    if pos > end:
        raise MalformedAdaptation("optional sub-fields overrun the adaptation field")
    return pos - start


def parse_adaptation_field(data, offset: int = 0, limit: Optional[int] = None) -> AdaptationField:
    """
    Decode the adaptation field whose length byte sits at ``data[offset]``.

    *limit* bounds the bytes available to the field (defaults to the end of
    *data*).
    """
    end_of_buf = len(data) if limit is None else min(len(data), offset + limit)
    if offset >= end_of_buf:
        raise MalformedAdaptation("missing adaptation_field_length byte")
    length = data[offset]
    end = offset + 1 + length
    if end > end_of_buf:
        raise MalformedAdaptation(
            f"adaptation length {length} exceeds {end_of_buf - offset - 1} remaining bytes")
    if length == 0:
        return AdaptationField(0)
    flags = data[offset + 1]
    pos = offset + 2
    pcr = None
    if flags & 0x10:
        if pos + 6 > end:
            raise MalformedAdaptation("PCR flag set but field too short")
        pcr = Pcr.decode(data[pos:pos + 6])
        pos += 6
    opt = _optional_fields_size(flags, data, pos, end)
    optional = bytes(data[pos:pos + opt])
    pos += opt
    return AdaptationField(
        length=length,
        discontinuity_indicator=bool(flags & 0x80),
        random_access_indicator=bool(flags & 0x40),
        es_priority_indicator=bool(flags & 0x20),
        pcr=pcr,
        flags=flags & 0x0F,
        optional=optional,
        stuffing_bytes=end - pos,
    )


@dataclass(frozen=True)
class TsPacket:
    pid: int
    continuity_counter: int = 0
    payload: bytes = b""
    transport_error_indicator: bool = False
    payload_unit_start_indicator: bool = False
    transport_priority: bool = False
    scrambling_control: int = 0
    adaptation_field_control: int = AFC_PAYLOAD
    adaptation: Optional[AdaptationField] = None

    def __post_init__(self):
        if not 0 <= self.pid <= PID_NULL:
            raise ValueError(f"PID must be 0..8191, got {self.pid}")
        if not 0 <= self.continuity_counter <= 15:
            raise ValueError(f"continuity counter must be 0..15, got {self.continuity_counter}")
        if not 0 <= self.scrambling_control <= 3:
            raise ValueError("scrambling control is 2 bits")
        if (self.adaptation is not None) != (self.adaptation_field_control in (2, 3)):
            raise ValueError("adaptation presence disagrees with adaptation_field_control")
        if self.payload and self.adaptation_field_control not in (1, 3):
            raise ValueError("payload present but adaptation_field_control forbids it")

    @property
    def has_payload(self) -> bool:
        return self.adaptation_field_control in (AFC_PAYLOAD, AFC_BOTH)

    @property
    def pcr(self) -> Optional[Pcr]:
        return self.adaptation.pcr if self.adaptation is not None else None

    @property
    def discontinuity(self) -> bool:
        return self.adaptation is not None and self.adaptation.discontinuity_indicator

    def header(self) -> bytes:
        b1 = (self.transport_error_indicator << 7 | self.payload_unit_start_indicator << 6
              | self.transport_priority << 5 | self.pid >> 8)
        b3 = self.scrambling_control << 6 | self.adaptation_field_control << 4 | self.continuity_counter
        return bytes((SYNC_BYTE, b1, self.pid & 0xFF, b3))

    def encode(self, packet_size: int = PACKET_SIZE) -> bytes:
        """Serialize to a 188-byte packet (zero parity appended for 204)."""
        af = self.adaptation.encode() if self.adaptation is not None else b""
        out = self.header() + af + self.payload
        if len(out) > PACKET_SIZE:
            raise ValueError(f"packet content is {len(out)} bytes")
        if self.adaptation_field_control != AFC_RESERVED and len(out) < PACKET_SIZE:
            raise ValueError(f"packet content is {len(out)} bytes; stuff the adaptation field")
        out += b"\xff" * (PACKET_SIZE - len(out))
        if packet_size == RS_PACKET_SIZE:
            out += bytes(16)
        return out


def encode_packet(packet: TsPacket, packet_size: int = PACKET_SIZE) -> bytes:
    return packet.encode(packet_size)


def parse_packet(buffer, packet_size: int = PACKET_SIZE) -> TsPacket:
    """Decode one transport packet from a buffer of exactly *packet_size* bytes."""
    if packet_size not in PACKET_SIZES:
        raise ValueError(f"packet size must be 188 or 204, got {packet_size}")
    if len(buffer) != packet_size:
        raise ValueError(f"expected {packet_size} bytes, got {len(buffer)}")
    if buffer[0] != SYNC_BYTE:
        raise SyncByteMismatch(f"sync byte is 0x{buffer[0]:02X}")
    b1, b2, b3 = buffer[1], buffer[2], buffer[3]
    afc = (b3 >> 4) & 3
    adaptation = None
    payload = b""
    if afc & 2:
        adaptation = parse_adaptation_field(buffer, HEADER_SIZE, limit=MAX_PAYLOAD)
        start = HEADER_SIZE + adaptation.size
        if afc == AFC_BOTH:
            payload = bytes(buffer[start:PACKET_SIZE])
        elif start != PACKET_SIZE:
            raise MalformedAdaptation("adaptation-only packet must have a 183-byte field")
    elif afc == AFC_PAYLOAD:
        payload = bytes(buffer[HEADER_SIZE:PACKET_SIZE])
    return TsPacket(
        pid=((b1 & 0x1F) << 8) | b2,
        continuity_counter=b3 & 0x0F,
        payload=payload,
        transport_error_indicator=bool(b1 & 0x80),
        payload_unit_start_indicator=bool(b1 & 0x40),
        transport_priority=bool(b1 & 0x20),
        scrambling_control=b3 >> 6,
        adaptation_field_control=afc,
        adaptation=adaptation,
    )


@dataclass(frozen=True)
class FrameAlignment:
    offset: int
    packet_size: int = PACKET_SIZE


def _periodic(data, off, size, frames):
    end = len(data)
    for k in range(frames):
        p = off + k * size
        if p >= end or data[p] != SYNC_BYTE:
            return False
    return True


def resync(data, probe_window: int = DEFAULT_PROBE_WINDOW, *, start: int = 0,
           final: bool = True, limit: Optional[int] = None,
           sizes=PACKET_SIZES) -> FrameAlignment:
    """
    Find the first offset at or after *start* where sync bytes recur.

    188-byte framing is tried before 204 at every candidate offset. With
    ``final=False`` the buffer is treated as a prefix of a longer stream and
    :class:`NeedMoreData` is raised when it is too short to decide; with
    ``final=True`` offsets near the end are confirmed with the frames that
    remain. :class:`NoSyncFound` carries ``searched``, the number of bytes
    past *start* that can be discarded.
    """
    n = len(data)
    widest = max(sizes)
    if not final and n - start < probe_window * widest + widest:
        raise NeedMoreData(f"need {probe_window * widest + widest} bytes to confirm sync")
    stop = n if limit is None else min(n, start + limit)
    decidable = n - (probe_window - 1) * widest  # last offset with a full probe for every size
    pos = start
    while pos < stop:
        pos = data.find(b"\x47", pos, stop) if hasattr(data, "find") else _find(data, pos, stop)
        if pos < 0:
            break
        if not final and pos >= decidable:
            err = NoSyncFound("no sync lock in searched region")
            err.searched = pos - start
            raise err
        for size in sizes:
            frames = probe_window
            if final:
                frames = min(probe_window, (n - pos) // size)
                if frames < 1:
                    continue
            if _periodic(data, pos, size, frames):
                return FrameAlignment(pos, size)
        pos += 1
    err = NoSyncFound(f"no sync byte pattern in {stop - start} bytes")
    err.searched = (stop - start) if final else max(0, min(stop, decidable) - start)
    raise err


def _find(data, pos, stop):
    for i in range(pos, stop):
        if data[i] == SYNC_BYTE:
            return i
    return -1
