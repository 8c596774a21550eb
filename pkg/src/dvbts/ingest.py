"""
Stream acquisition: offline files and live UDP (unicast or multicast).

Both paths produce the same thing: an ordered feed of ``(index, frame)``
pairs where every frame starts with a sync byte. Framing is acquired with
:func:`~dvbts.packet.resync` and re-acquired whenever a frame boundary no
longer holds a sync byte.
"""

from __future__ import annotations

import logging
import os
import queue
import socket
import struct
import threading
import time
from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple, Union

from .analysis import ContinuityState, CC_GAP
from .errors import NeedMoreData, NoSyncFound, SinkWriteFailure, SourceUnavailable
from .packet import (
    DEFAULT_PROBE_WINDOW,
    PACKET_SIZE,
    PACKET_SIZES,
    PID_NULL,
    SYNC_BYTE,
    FrameAlignment,
    resync,
)

log = logging.getLogger(__name__)

READ_CHUNK = 1 << 20
MAX_SYNC_SEARCH = 1 << 20
UDP_RECV_SIZE = 65536


@dataclass(frozen=True)
class FileSource:
    path: Union[str, os.PathLike]
    packet_budget: Optional[int] = None


@dataclass(frozen=True)
class UdpSource:
    """UDP endpoint; *group* triggers a multicast join on *interface*."""

    host: str = "0.0.0.0"
    port: int = 1234
    group: Optional[str] = None
    interface: str = "0.0.0.0"
    packet_budget: Optional[int] = None
    duration: Optional[float] = None
    idle_timeout: Optional[float] = 2.0

    @classmethod
    def parse(cls, endpoint: str, **kw) -> "UdpSource":
        """``host:port`` or ``group:port`` (multicast addresses join the group)."""
        host, _, port = endpoint.rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"expected addr:port, got {endpoint!r}")
        first = int(host.split(".")[0]) if host[0].isdigit() else 0
        if 224 <= first <= 239:
            return cls(host="0.0.0.0", port=int(port), group=host, **kw)
        return cls(host=host, port=int(port), **kw)


class UdpReceiver:
    """Bound UDP socket. Use as a context manager; bind happens on entry."""

    def __init__(self, source: UdpSource, rcvbuf: int = 4 << 20):
        self.source = source
        self.rcvbuf = rcvbuf
        self.sock: Optional[socket.socket] = None

    def __enter__(self) -> "UdpReceiver":
        self.open()
        return self

    def __exit__(self, *exc):
        self.close()

    def open(self):
        src = self.source
        try:
            sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM, socket.IPPROTO_UDP)
            sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            try:
                sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, self.rcvbuf)
            except OSError:
                pass
            sock.bind((src.host, src.port))
            if src.group:
                mreq = struct.pack("4s4s", socket.inet_aton(src.group), socket.inet_aton(src.interface))
                sock.setsockopt(socket.IPPROTO_IP, socket.IP_ADD_MEMBERSHIP, mreq)
        except OSError as exc:
            raise SourceUnavailable(f"cannot bind UDP {src.host}:{src.port}: {exc}") from exc
        self.sock = sock

    def close(self):
        if self.sock is not None:
            self.sock.close()
            self.sock = None

    @property
    def address(self) -> Tuple[str, int]:
        return self.sock.getsockname()

    def datagrams(self, duration: Optional[float] = None,
                  idle_timeout: Optional[float] = None) -> Iterator[bytes]:
        """Yield datagram payloads until *duration* elapses or the link is idle."""
        if self.sock is None:
            self.open()
        duration = self.source.duration if duration is None else duration
        idle = self.source.idle_timeout if idle_timeout is None else idle_timeout
        deadline = None if duration is None else time.monotonic() + duration
        while True:
            wait = idle
            if deadline is not None:
                left = deadline - time.monotonic()
                if left <= 0:
                    return
                wait = left if wait is None else min(wait, left)
            self.sock.settimeout(wait)
            try:
                data = self.sock.recv(UDP_RECV_SIZE)
            except socket.timeout:
                if deadline is not None and time.monotonic() < deadline and idle is None:
                    continue
                return
            if data:
                yield data


def _file_chunks(path) -> Iterator[bytes]:
    try:
        f = open(path, "rb")
    except OSError as exc:
        raise SourceUnavailable(f"cannot open {path}: {exc}") from exc
    with f:
        while True:
            chunk = f.read(READ_CHUNK)
            if not chunk:
                return
            yield chunk


def _memory_chunks(data) -> Iterator[bytes]:
    view = memoryview(data)
    for i in range(0, len(view), READ_CHUNK):
        yield view[i:i + READ_CHUNK]


class AlignedReader:
    """
    Iterator of ``(index, frame)`` over any byte source.

    After iteration starts, ``alignment`` holds the initial framing and
    ``sync_losses`` the indices of frames that immediately follow a loss of
    sync (the first frame read after framing was re-acquired).
    """

    def __init__(self, source, packet_size: Optional[int] = None,
                 probe_window: int = DEFAULT_PROBE_WINDOW, max_search: int = MAX_SYNC_SEARCH):
        if packet_size not in (None, "auto") and packet_size not in PACKET_SIZES:
            raise ValueError(f"packet size must be auto, 188 or 204, got {packet_size}")
        self.source = source
        self.sizes = PACKET_SIZES if packet_size in (None, "auto") else (packet_size,)
        self.probe_window = probe_window
        self.max_search = max_search
        self.alignment: Optional[FrameAlignment] = None
        self.sync_losses: List[int] = []
        self.frames = 0
        self.budget = getattr(source, "packet_budget", None)

    def _chunks(self) -> Iterator[bytes]:
        src = self.source
        if isinstance(src, (bytes, bytearray, memoryview)):
            return _memory_chunks(src)
        if isinstance(src, (str, os.PathLike)):
            return _file_chunks(src)
        if isinstance(src, FileSource):
            return _file_chunks(src.path)
        if isinstance(src, UdpReceiver):
            return src.datagrams()
        if isinstance(src, UdpSource):
            return self._udp_chunks(src)
        raise TypeError(f"unsupported source {type(src).__name__}")

    @staticmethod
    def _udp_chunks(src):
        with UdpReceiver(src) as rx:
            yield from rx.datagrams()

    def __iter__(self) -> Iterator[Tuple[int, bytes]]:
        if self.budget == 0:
            return
        chunks = self._chunks()
        buf = bytearray()
        base = 0  # absolute offset of buf[0]
        pos = 0
        eof = False
        size = None
        searched = 0
        index = 0
        while True:
            if size is None:
                try:
                    al = resync(buf, self.probe_window, start=pos, final=eof, sizes=self.sizes)
                except NeedMoreData:
                    pass
                except NoSyncFound as exc:
                    pos += exc.searched
                    searched += exc.searched
                    if eof:
                        if self.alignment is None and index == 0 and base + len(buf):
                            raise NoSyncFound(f"no transport stream sync in {base + len(buf)} bytes")
                        return
                    if searched > self.max_search:
                        raise NoSyncFound(f"no sync lock within {searched} bytes")
                else:
                    searched += al.offset - pos
                    pos, size = al.offset, al.packet_size
                    if self.alignment is None:
                        self.alignment = FrameAlignment(base + pos, size)
                    continue
                if eof:
                    return
            else:
                if len(buf) - pos >= size:
                    if buf[pos] != SYNC_BYTE:
                        log.debug("sync lost at byte %d", base + pos)
                        self.sync_losses.append(index)
                        size = None
                        searched = 0
                        continue
                    yield index, bytes(buf[pos:pos + size])
                    index += 1
                    self.frames = index
                    pos += size
                    if self.budget is not None and index >= self.budget:
                        return
                    continue
                if eof:
                    return
            if pos > READ_CHUNK:
                del buf[:pos]
                base += pos
                pos = 0
            chunk = next(chunks, None)
            if chunk is None:
                eof = True
            else:
                buf += chunk


def read_aligned(source, packet_size: Optional[int] = None,
                 probe_window: int = DEFAULT_PROBE_WINDOW,
                 max_search: int = MAX_SYNC_SEARCH) -> AlignedReader:
    """Aligned frame feed for a path, bytes, :class:`FileSource` or UDP source."""
    return AlignedReader(source, packet_size, probe_window, max_search)


@dataclass(frozen=True)
class CaptureSummary:
    packets: int
    bytes: int
    datagrams: int
    drops: int


def capture_to_file(source, sink, duration: Optional[float] = None,
                    packet_budget: Optional[int] = None,
                    packet_size: int = PACKET_SIZE) -> CaptureSummary:
    """
    Persist raw UDP payload bytes to *sink* unmodified.

    Capture stops after *duration* seconds, *packet_budget* packets, or
    when the source goes idle. ``drops`` counts continuity gaps seen in
    datagrams that carry whole packets.
    """
    budget = packet_budget if packet_budget is not None else getattr(source, "packet_budget", None)
    own = not isinstance(source, UdpReceiver)
    rx = UdpReceiver(source) if own else source
    if rx.sock is None:
        rx.open()
    try:
        try:
            out = open(sink, "wb")
        except OSError as exc:
            raise SinkWriteFailure(f"cannot open {sink}: {exc}") from exc
        total = datagrams = drops = 0
        limit = None if budget is None else budget * packet_size
        states = {}
        with out:
            if limit == 0:
                return CaptureSummary(0, 0, 0, 0)
            for data in rx.datagrams(duration=duration):
                if limit is not None and total + len(data) > limit:
                    data = data[:limit - total]
                try:
                    out.write(data)
                except OSError as exc:
                    raise SinkWriteFailure(f"write to {sink} failed: {exc}") from exc
                total += len(data)
                datagrams += 1
                if len(data) % packet_size == 0:
                    drops += _count_gaps(data, packet_size, states)
                if limit is not None and total >= limit:
                    break
        return CaptureSummary(total // packet_size, total, datagrams, drops)
    finally:
        if own:
            rx.close()


def _count_gaps(data, size, states) -> int:
    gaps = 0
    for i in range(0, len(data), size):
        if data[i] != SYNC_BYTE:
            continue
        pid = ((data[i + 1] & 0x1F) << 8) | data[i + 2]
        if pid == PID_NULL:
            continue
        b3 = data[i + 3]
        st = states.get(pid)
        if st is None:
            st = states[pid] = ContinuityState()
        if st.check(b3 & 0x0F, bool(b3 & 0x10)) == CC_GAP:
            gaps += 1
    return gaps


_DONE = object()


def threaded_feed(reader, maxsize: int = 4096) -> Iterator:
    """
    Run *reader* on a producer thread, delivering its items in order through
    a bounded queue. The producer blocks while the queue is full.
    """
    q: queue.Queue = queue.Queue(maxsize)
    stop = threading.Event()

    def produce():
        try:
            for item in reader:
                while not stop.is_set():
                    try:
                        q.put(item, timeout=0.1)
                        break
                    except queue.Full:
                        continue
                if stop.is_set():
                    return
            q.put(_DONE)
        except BaseException as exc:  # forwarded to the consumer
            q.put(exc)

    worker = threading.Thread(target=produce, name="dvbts-ingest", daemon=True)
    worker.start()
    try:
        while True:
            item = q.get()
            if item is _DONE:
                return
            if isinstance(item, BaseException):
                raise item
            yield item
    finally:
        stop.set()
