"""
PID filtering and PES reassembly.

Elementary stream bytes are written to one sink per PID. Default sink
files are named ``<stem>_pid<decimal>.es``; callers may override names or
supply their own sink factory.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Union

from .analysis import PidClass, analyze_source
from .errors import SinkWriteFailure, UnknownPid
from .events import AnomalyEvent, AnomalyKind
from .ingest import read_aligned
from .packet import PACKET_SIZE, TsPacket, parse_packet

ALL_ES = "all-ES"
START_CODE = b"\x00\x00\x01"
# stream_ids whose PES packets have no optional header
_NO_OPTIONAL_HEADER = frozenset({0xBC, 0xBE, 0xBF, 0xF0, 0xF1, 0xF2, 0xF8, 0xFF})


@dataclass(frozen=True)
class PesPacket:
    stream_id: int
    declared_length: int
    payload: bytes
    complete: bool
    packet_index: Optional[int] = None

    @classmethod
    def from_bytes(cls, raw: bytes, complete: bool, packet_index=None) -> "PesPacket":
        stream_id = raw[3] if len(raw) > 3 else 0
        declared = (raw[4] << 8) | raw[5] if len(raw) >= 6 else 0
        end = 6 + declared if declared else len(raw)
        start = 6
        if stream_id not in _NO_OPTIONAL_HEADER and len(raw) >= 9:
            start = 9 + raw[8]
        return cls(stream_id, declared, bytes(raw[start:end]), complete, packet_index)


class PesAssembler:
    """Accumulates one PID's PES packets; unbounded PES end at the next unit start."""

    def __init__(self, pid: int):
        self.pid = pid
        self.anomalies: List[AnomalyEvent] = []
        self._buf: Optional[bytearray] = None
        self._start = None
        self._last_cc = None
        self._last_payload = None

    def push(self, pkt: TsPacket, index: Optional[int] = None) -> List[PesPacket]:
        out: List[PesPacket] = []
        if not pkt.has_payload:
            return out
        if pkt.continuity_counter == self._last_cc and pkt.payload == self._last_payload:
            return out  # duplicate
        self._last_cc, self._last_payload = pkt.continuity_counter, pkt.payload
        payload = pkt.payload
        if pkt.payload_unit_start_indicator:
            if self._buf is not None:
                out.append(self._finish(complete=self._declared() == 0))
            if payload[:3] != START_CODE:
                self.anomalies.append(AnomalyEvent(
                    AnomalyKind.PES_START_MISSING, self.pid, index if index is not None else -1))
                return out
            self._buf = bytearray(payload)
            self._start = index
        elif self._buf is not None:
            self._buf += payload
        else:
            return out
        declared = self._declared()
        if declared and len(self._buf) >= 6 + declared:
            out.append(self._finish(complete=True))
        return out

    def flush(self) -> List[PesPacket]:
        if self._buf is None:
            return []
        return [self._finish(complete=False)]

    def _declared(self) -> int:
        buf = self._buf
        return (buf[4] << 8) | buf[5] if buf is not None and len(buf) >= 6 else 0

    def _finish(self, complete: bool) -> PesPacket:
        pes = PesPacket.from_bytes(bytes(self._buf), complete, self._start)
        self._buf = None
        return pes


def extract_pes(packets: Iterable[TsPacket], anomalies: Optional[list] = None,
                indices=None) -> List[PesPacket]:
    """
    Reassemble the PES packets of one PID.

    A trailing PES cut off by the end of input is returned with
    ``complete=False``. ``PesStartMissing`` events go to *anomalies*.
    """
    asm = None
    out: List[PesPacket] = []
    for pos, pkt in enumerate(packets):
        if asm is None:
            asm = PesAssembler(pkt.pid)
        out.extend(asm.push(pkt, indices[pos] if indices is not None else pos))
    if asm is not None:
        out.extend(asm.flush())
        if anomalies is not None:
            anomalies.extend(asm.anomalies)
    return out


def suggested_name(stem: str, pid: int) -> str:
    return f"{stem}_pid{pid}.es"


@dataclass
class SinkSummary:
    pid: int
    bytes_written: int = 0
    pes_count: int = 0
    path: Optional[str] = None
    present: bool = False
    error: Optional[str] = None


def file_sinks(out_dir: Union[str, os.PathLike], stem: str,
               names: Optional[Mapping[int, str]] = None) -> Callable:
    """Sink factory writing ``<out_dir>/<stem>_pid<N>.es`` unless *names* overrides."""
    out_dir = Path(out_dir)
    names = dict(names or {})

    def factory(pid: int):
        path = out_dir / names.get(pid, suggested_name(stem, pid))
        return open(path, "wb")

    return factory


def demux_to_sinks(source, selection: Union[str, Iterable[int]] = ALL_ES,
                   out_dir: Union[str, os.PathLike, None] = None, stem: Optional[str] = None,
                   names: Optional[Mapping[int, str]] = None,
                   sink_factory: Optional[Callable] = None,
                   packet_size=None) -> Dict[int, SinkSummary]:
    """
    Write the elementary streams of the selected PIDs.

    *selection* is a PID collection or ``"all-ES"`` (every video, audio and
    private PID announced by the PMTs; this needs a discovery pass, so
    *source* must be re-readable). A sink that fails is closed and its PID
    abandoned; other PIDs continue.
    """
    if stem is None:
        stem = Path(source).stem if isinstance(source, (str, os.PathLike)) else "stream"
    if sink_factory is None:
        sink_factory = file_sinks(out_dir if out_dir is not None else ".", stem, names)
    if isinstance(selection, str):
        if selection != ALL_ES:
            raise ValueError(f"selection must be PIDs or {ALL_ES!r}")
        report = analyze_source(source, packet_size=packet_size)
        wanted = [s.pid for s in report.pid_stats
                  if s.pid_class in (PidClass.VIDEO, PidClass.AUDIO, PidClass.PRIVATE)]
    else:
        wanted = sorted(set(selection))
    summaries = {pid: SinkSummary(pid) for pid in wanted}
    assemblers = {pid: PesAssembler(pid) for pid in wanted}
    sinks: Dict[int, object] = {}

    def write(pid, pes_list):
        summary = summaries[pid]
        if summary.error is not None or not pes_list:
            return
        try:
            sink = sinks.get(pid)
            if sink is None:
                sink = sinks[pid] = sink_factory(pid)
                summary.path = getattr(sink, "name", None)
            for pes in pes_list:
                sink.write(pes.payload)
                summary.bytes_written += len(pes.payload)
                summary.pes_count += 1
        except OSError as exc:
            summary.error = str(SinkWriteFailure(f"PID {pid}: {exc}"))
            sink = sinks.pop(pid, None)
            if sink is not None:
                try:
                    sink.close()
                except OSError:
                    pass

    reader = read_aligned(source, packet_size=packet_size)
    try:
        for index, frame in reader:
            pid = ((frame[1] & 0x1F) << 8) | frame[2]
            asm = assemblers.get(pid)
            if asm is None:
                continue
            summaries[pid].present = True
            pkt = parse_packet(frame[:PACKET_SIZE])
            write(pid, asm.push(pkt, index))
        for pid, asm in assemblers.items():
            write(pid, asm.flush())
    finally:
        for sink in sinks.values():
            sink.close()
    for pid, summary in summaries.items():
        if not summary.present:
            warnings.warn(f"PID {pid} not present in stream", UnknownPid, stacklevel=2)
    return summaries
