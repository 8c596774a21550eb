"""MPEG-2/DVB transport stream analysis, demultiplexing and test-stream generation."""

from .analysis import (
    Analyzer,
    PidClass,
    StreamReport,
    analyze_source,
    analyze_stream,
    check_continuity,
    classify_pids,
    estimate_bitrate,
)
from .crc import crc32_mpeg
from .events import AnomalyEvent, AnomalyKind
from .genstream import (
    ErrorKind,
    ErrorSpec,
    EsSpec,
    ProgramSpec,
    SiTableSpec,
    StreamSpec,
    generate,
    inject_errors,
    replica_spec,
)
from .ingest import FileSource, UdpSource, capture_to_file, read_aligned
from .packet import (
    AdaptationField,
    FrameAlignment,
    Pcr,
    TsPacket,
    parse_adaptation_field,
    parse_packet,
    pcr_to_seconds,
    resync,
)
from .psi import (
    PatTable,
    PmtTable,
    PsiSection,
    assemble_sections,
    parse_pat,
    parse_pmt,
    parse_si_header,
)

__version__ = "0.1.0"
