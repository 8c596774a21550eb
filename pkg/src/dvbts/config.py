"""
YAML documents for :class:`~dvbts.genstream.StreamSpec` and error lists.

Byte fields (``es_info``, ``program_info``, SI ``body``) are hex strings.
Omitted keys take the dataclass defaults. An error document is either a
full stream spec (only its ``errors`` key is used) or a mapping with a
single ``errors`` list.
"""

from __future__ import annotations

import os
from typing import Any, Dict, List, Union

import yaml

from .errors import SpecError
from .genstream import ErrorSpec, EsSpec, ProgramSpec, SiTableSpec, StreamSpec

PathLike = Union[str, os.PathLike]


def _bytes_out(data: bytes) -> str:
    return data.hex()


def _bytes_in(value) -> bytes:
    if value is None or value == "":
        return b""
    return bytes.fromhex(str(value))


def error_to_dict(err: ErrorSpec) -> Dict[str, Any]:
    return {"kind": err.kind.value, "pid": err.pid, "at_packet_indices": list(err.at_packet_indices)}


def error_from_dict(doc: Dict[str, Any]) -> ErrorSpec:
    return ErrorSpec(doc["kind"], doc.get("pid"), tuple(doc.get("at_packet_indices", ())))


def spec_to_dict(spec: StreamSpec) -> Dict[str, Any]:
    return {
        "transport_stream_id": spec.transport_stream_id,
        "packet_size": spec.packet_size,
        "target_bitrate_bps": spec.target_bitrate_bps,
        "duration_s": spec.duration_s,
        "psi_repetition_ms": spec.psi_repetition_ms,
        "seed": spec.seed,
        "network_pid": spec.network_pid,
        "pat_version": spec.pat_version,
        "programs": [
            {"program_number": p.program_number, "pmt_pid": p.pmt_pid, "pcr_pid": p.pcr_pid,
             "version": p.version, "program_info": _bytes_out(p.program_info),
             "streams": [
                 {"elementary_pid": s.elementary_pid, "stream_type": s.stream_type,
                  "payload_rate_bps": s.payload_rate_bps, "pes_size_bytes": s.pes_size_bytes,
                  "es_info": _bytes_out(s.es_info)}
                 for s in p.streams]}
            for p in spec.programs],
        "si_tables": [
            {"pid": t.pid, "table_id": t.table_id,
             "body": None if t.body is None else _bytes_out(t.body),
             "body_length": t.body_length, "version": t.version,
             "section_number": t.section_number, "last_section_number": t.last_section_number,
             "table_id_extension": t.table_id_extension, "long_form": t.long_form}
            for t in spec.si_tables],
        "errors": [error_to_dict(e) for e in spec.errors],
    }


def spec_from_dict(doc: Dict[str, Any]) -> StreamSpec:
    if not isinstance(doc, dict):
        raise SpecError("stream spec must be a mapping")
    try:
        programs = [
            ProgramSpec(
                p["program_number"], p["pmt_pid"], p["pcr_pid"],
                tuple(EsSpec(s["elementary_pid"], s["stream_type"], s["payload_rate_bps"],
                             s["pes_size_bytes"], _bytes_in(s.get("es_info")))
                      for s in p.get("streams", ())),
                p.get("version", 0), _bytes_in(p.get("program_info")))
            for p in doc.get("programs") or ()]
        tables = [
            SiTableSpec(t["pid"], t["table_id"],
                        None if t.get("body") is None else _bytes_in(t["body"]),
                        t.get("body_length"), t.get("version", 0), t.get("section_number", 0),
                        t.get("last_section_number", 0), t.get("table_id_extension", 0),
                        t.get("long_form"))
            for t in doc.get("si_tables") or ()]
        errors = [error_from_dict(e) for e in doc.get("errors") or ()]
        defaults = StreamSpec()
        return StreamSpec(
            transport_stream_id=doc.get("transport_stream_id", defaults.transport_stream_id),
            packet_size=doc.get("packet_size", defaults.packet_size),
            target_bitrate_bps=doc.get("target_bitrate_bps", defaults.target_bitrate_bps),
            duration_s=doc.get("duration_s", defaults.duration_s),
            psi_repetition_ms=doc.get("psi_repetition_ms", defaults.psi_repetition_ms),
            programs=tuple(programs), si_tables=tuple(tables), errors=tuple(errors),
            seed=doc.get("seed", defaults.seed), network_pid=doc.get("network_pid"),
            pat_version=doc.get("pat_version", defaults.pat_version))
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"invalid stream spec: {exc!r}") from exc


def dump_spec(spec: StreamSpec) -> str:
    return yaml.safe_dump(spec_to_dict(spec), sort_keys=False)


def load_spec_text(text: str) -> StreamSpec:
    return spec_from_dict(yaml.safe_load(text))


def load_spec(path: PathLike) -> StreamSpec:
    with open(path, encoding="utf-8") as f:
        return load_spec_text(f.read())


def save_spec(spec: StreamSpec, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(dump_spec(spec))


def load_errors(path: PathLike) -> List[ErrorSpec]:
    with open(path, encoding="utf-8") as f:
        doc = yaml.safe_load(f)
    if isinstance(doc, list):
        items = doc
    elif isinstance(doc, dict):
        items = doc.get("errors") or []
    else:
        items = []
    try:
        return [error_from_dict(e) for e in items]
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"invalid error list: {exc!r}") from exc
