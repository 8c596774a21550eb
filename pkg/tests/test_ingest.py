import random
import threading

import pytest

from dvbts.analysis import analyze_source
from dvbts.errors import NoSyncFound, SourceUnavailable
from dvbts.genstream import generate, replica_spec
from dvbts.ingest import (
    FileSource,
    UdpReceiver,
    UdpSource,
    capture_to_file,
    read_aligned,
    threaded_feed,
)
from strategies import garbage, send_paced


@pytest.fixture(scope="module")
def small():
    return generate(replica_spec(duration_s=0.2)).data


def test_udp_source_parse():
    assert UdpSource.parse("127.0.0.1:5000") == UdpSource("127.0.0.1", 5000)
    mc = UdpSource.parse("239.1.2.3:1234")
    assert (mc.host, mc.group, mc.port) == ("0.0.0.0", "239.1.2.3", 1234)
    with pytest.raises(ValueError):
        UdpSource.parse("nonsense")


def test_reader_yields_aligned_frames(small):
    reader = read_aligned(b"\x00" * 100 + small)
    items = list(reader)
    assert reader.alignment.offset == 100
    assert len(items) == len(small) // 188
    assert all(frame[0] == 0x47 for _, frame in items)
    assert [i for i, _ in items] == list(range(len(items)))


def test_reader_from_file(small, tmp_path):
    path = tmp_path / "s.ts"
    path.write_bytes(small)
    assert len(list(read_aligned(path))) == len(small) // 188
    assert len(list(read_aligned(FileSource(path, packet_budget=10)))) == 10


def test_reader_budget_zero(small, tmp_path):
    path = tmp_path / "s.ts"
    path.write_bytes(small)
    assert list(read_aligned(FileSource(path, packet_budget=0))) == []


def test_missing_file():
    with pytest.raises(SourceUnavailable):
        list(read_aligned("/nonexistent/file.ts"))


def test_no_sync_in_noise():
    with pytest.raises(NoSyncFound):
        list(read_aligned(garbage(random.Random(1), 50_000)))


def test_gives_up_after_search_limit():
    with pytest.raises(NoSyncFound):
        list(read_aligned(garbage(random.Random(2), 3 << 20), max_search=1 << 20))


def test_sync_loss_recorded(small):
    cut = 188 * 100
    data = small[:cut] + b"\x01\x02\x03" + small[cut:]
    reader = read_aligned(data)
    assert len(list(reader)) == len(small) // 188
    assert reader.sync_losses == [100]


def test_threaded_feed_preserves_order(small):
    direct = list(read_aligned(small))
    assert list(threaded_feed(read_aligned(small), maxsize=8)) == direct


def test_threaded_feed_forwards_errors():
    with pytest.raises(NoSyncFound):
        list(threaded_feed(read_aligned(bytes(10_000))))


def test_udp_capture_equals_file(small, tmp_path):
    rx = UdpReceiver(UdpSource("127.0.0.1", 0, idle_timeout=1.0))
    rx.open()
    sink = tmp_path / "cap.ts"
    sender = threading.Thread(target=send_paced, args=(small, rx.address))
    sender.start()
    try:
        summary = capture_to_file(rx, sink, duration=20, packet_budget=len(small) // 188)
    finally:
        sender.join()
        rx.close()
    assert summary.bytes == len(small)
    assert summary.drops == 0
    assert sink.read_bytes() == small
    assert analyze_source(sink) == analyze_source(small)


def test_live_udp_analysis(small):
    with UdpReceiver(UdpSource("127.0.0.1", 0, packet_budget=len(small) // 188, idle_timeout=1.0)) as rx:
        sender = threading.Thread(target=send_paced, args=(small, rx.address))
        sender.start()
        live = analyze_source(rx)
        sender.join()
    assert live == analyze_source(small)


def test_capture_budget_zero(tmp_path):
    with UdpReceiver(UdpSource("127.0.0.1", 0)) as rx:
        summary = capture_to_file(rx, tmp_path / "z.ts", packet_budget=0)
    assert summary.bytes == 0 and (tmp_path / "z.ts").read_bytes() == b""


def test_bind_failure():
    # not a local address, so bind fails
    with pytest.raises(SourceUnavailable):
        UdpReceiver(UdpSource("203.0.113.1", 9)).open()
