"""
Command-line entry point: ``dvbts <verb> [options]``.

Exit status is 0 on success with a clean stream, 1 on success when
anomalies were found, 2 on operational errors and bad flags.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import yaml

from .analysis import Analyzer, StreamReport, analyze_source
from .config import load_errors, load_spec
from .demux import ALL_ES, demux_to_sinks, file_sinks
from .errors import TsError
from .genstream import generate, inject_errors, replica_spec
from .ingest import UdpSource, capture_to_file, read_aligned, threaded_feed
from .report import serialize_report

EXIT_OK = 0
EXIT_ANOMALIES = 1
EXIT_ERROR = 2
FORMAT_ENV = "DVBTS_FORMAT"
FORMATS = ("text", "json")


def _packet_size(value: str):
    if value == "auto":
        return None
    if value in ("188", "204"):
        return int(value)
    raise argparse.ArgumentTypeError("must be auto, 188 or 204")


def _pid_list(value: str):
    if value.lower() in ("all", ALL_ES.lower()):
        return ALL_ES
    try:
        pids = {int(p, 0) for p in value.split(",") if p.strip()}
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad PID list {value!r}") from None
    if any(not 0 <= p <= 0x1FFF for p in pids):
        raise argparse.ArgumentTypeError("PIDs must be in 0..8191")
    return pids


def _endpoint(value: str) -> UdpSource:
    try:
        return UdpSource.parse(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _seed(value: str) -> int:
    seed = int(value, 0)
    if not 0 <= seed < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return seed


def _positive(value: str) -> float:
    v = float(value)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _rename(value: str):
    pid, sep, name = value.partition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError("expected PID=FILENAME")
    return int(pid, 0), name


def build_parser() -> argparse.ArgumentParser:
    default_format = os.environ.get(FORMAT_ENV, "text")
    if default_format not in FORMATS:
        default_format = "text"
    parser = argparse.ArgumentParser(prog="dvbts", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True, metavar="VERB")

    def size_flag(p):
        p.add_argument("--packet-size", type=_packet_size, default=None, metavar="auto|188|204",
                       help="frame size (default: auto-detect)")

    p = sub.add_parser("analyze", help="analyze a capture file or live UDP stream")
    p.add_argument("input", nargs="?", help="transport stream file")
    p.add_argument("--udp", type=_endpoint, metavar="ADDR:PORT", help="read from UDP instead of a file")
    p.add_argument("--duration", type=_positive, help="seconds to read from --udp")
    p.add_argument("--format", choices=FORMATS, default=default_format)
    p.add_argument("--tree", action="store_true", help="append the program/PID/section tree")
    p.add_argument("--pids", type=_pid_list, help="restrict packet rows and anomalies to these PIDs")
    p.add_argument("--out", help="write the report here instead of stdout")
    size_flag(p)

    p = sub.add_parser("demux", help="extract elementary streams")
    p.add_argument("input")
    p.add_argument("--pids", type=_pid_list, default=ALL_ES, help="comma list or 'all' (default)")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--name", type=_rename, action="append", default=[], metavar="PID=FILE",
                   help="override the suggested file name for a PID")
    size_flag(p)

    p = sub.add_parser("generate", help="synthesize a stream from a spec")
    p.add_argument("--spec", help="YAML stream spec (default: the replica stream)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=_seed)
    p.add_argument("--duration", type=_positive, help="override duration_s")

    p = sub.add_parser("inject", help="apply an error list to a stream")
    p.add_argument("--spec", required=True, help="YAML error list")
    p.add_argument("input")
    p.add_argument("output")
    size_flag(p)

    p = sub.add_parser("capture", help="record a UDP stream to a file")
    p.add_argument("--udp", type=_endpoint, required=True, metavar="ADDR:PORT")
    p.add_argument("--out", required=True)
    p.add_argument("--duration", type=_positive)
    p.add_argument("--packets", type=int, help="stop after this many packets")

    p = sub.add_parser("monitor", help="print a per-second summary of a live UDP stream")
    p.add_argument("--udp", type=_endpoint, required=True, metavar="ADDR:PORT")
    p.add_argument("--duration", type=_positive, help="stop after this many seconds")
    size_flag(p)
    return parser


def _filter(report: StreamReport, pids) -> StreamReport:
    if pids is None or pids == ALL_ES:
        return report
    return dataclasses.replace(
        report,
        packet_table=[r for r in report.packet_table if r.pid in pids],
        psi_table=[r for r in report.psi_table if r.pid in pids],
        pid_stats=[s for s in report.pid_stats if s.pid in pids],
        anomalies=[a for a in report.anomalies if a.pid is None or a.pid in pids])


def _emit(data: bytes, out: Optional[str]):
    if out is None:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        Path(out).write_bytes(data)


def cmd_analyze(args) -> int:
    if (args.input is None) == (args.udp is None):
        raise ValueError("give exactly one of INPUT or --udp")
    source = args.input
    if args.udp is not None:
        source = dataclasses.replace(args.udp, duration=args.duration)
    report = _filter(analyze_source(source, packet_size=args.packet_size), args.pids)
    _emit(serialize_report(report, args.format, tree=args.tree), args.out)
    return EXIT_ANOMALIES if report.anomalies else EXIT_OK


def cmd_demux(args) -> int:
    stem = Path(args.input).stem
    sinks = file_sinks(args.out, stem, dict(args.name))
    summaries = demux_to_sinks(args.input, args.pids, sink_factory=sinks,
                               packet_size=args.packet_size)
    failed = False
    for pid, s in sorted(summaries.items()):
        if s.error:
            failed = True
            print(f"PID {pid}: FAILED {s.error}")
        elif not s.present:
            print(f"PID {pid}: not present")
        else:
            print(f"PID {pid}: {s.bytes_written} bytes, {s.pes_count} PES -> {s.path}")
    return EXIT_ERROR if failed else EXIT_OK


def cmd_generate(args) -> int:
    spec = load_spec(args.spec) if args.spec else replica_spec()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.duration is not None:
        changes["duration_s"] = args.duration
    if changes:
        spec = dataclasses.replace(spec, **changes)
    stream = generate(spec)
    Path(args.out).write_bytes(stream.data)
    print(f"wrote {len(stream.data)} bytes ({stream.truth.packet_count} packets) to {args.out}")
    return EXIT_OK


def cmd_inject(args) -> int:
    errors = load_errors(args.spec)
    data = Path(args.input).read_bytes()
    out, ledger = inject_errors(data, errors, args.packet_size)
    Path(args.output).write_bytes(out)
    for e in ledger:
        pid = "-" if e.pid is None else e.pid
        print(f"{e.kind.value} pid={pid} source={e.source_index} output={e.output_index} "
              f"expect={e.expected.value}")
    return EXIT_OK


def cmd_capture(args) -> int:
    summary = capture_to_file(dataclasses.replace(args.udp, duration=args.duration), args.out,
                              duration=args.duration, packet_budget=args.packets)
    print(f"captured {summary.bytes} bytes ({summary.packets} packets, "
          f"{summary.datagrams} datagrams, {summary.drops} continuity gaps) to {args.out}")
    return EXIT_OK


def cmd_monitor(args) -> int:
    source = dataclasses.replace(args.udp, duration=args.duration, idle_timeout=None)
    reader = read_aligned(source, packet_size=args.packet_size)
    analyzer = None
    losses = reader.sync_losses
    k = 0
    start = last = time.monotonic()
    last_count = 0
    anomalies = 0

    def line(now):
        nonlocal last, last_count
        count = analyzer.packet_count if analyzer else 0
        size = analyzer.packet_size if analyzer else 188
        rate = (count - last_count) * size * 8 / max(now - last, 1e-9)
        pids = analyzer.pid_count if analyzer else 0
        found = analyzer.anomaly_count if analyzer else 0
        print(f"t={now - start:7.1f}s packets={count} rate={rate / 1e6:.3f} Mbps "
              f"pids={pids} anomalies={found}", flush=True)
        last, last_count = now, count

    try:
        for index, frame in threaded_feed(reader):
            if analyzer is None:
                analyzer = Analyzer(reader.alignment.packet_size, reader.alignment)
            while k < len(losses) and losses[k] <= index:
                analyzer.sync_lost(losses[k])
                k += 1
            analyzer.feed(index, frame)
            now = time.monotonic()
            if now - last >= 1.0:
                line(now)
    except KeyboardInterrupt:
        pass
    line(time.monotonic())
    if analyzer is not None:
        anomalies = analyzer.anomaly_count
    return EXIT_ANOMALIES if anomalies else EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "demux": cmd_demux,
    "generate": cmd_generate,
    "inject": cmd_inject,
    "capture": cmd_capture,
    "monitor": cmd_monitor,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    try:
        return COMMANDS[args.verb](args)
    except (TsError, OSError, ValueError, yaml.YAMLError) as exc:
        print(f"dvbts {args.verb}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
