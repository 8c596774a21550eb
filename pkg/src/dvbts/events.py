"""Anomaly events shared by ingestion, analysis and demultiplexing."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional


class AnomalyKind(enum.Enum):
    CC_DISCONTINUITY = "CcDiscontinuity"
    CC_EXCESS_DUPLICATE = "CcExcessDuplicate"
    TEI_SET = "TeiSet"
    SYNC_LOSS = "SyncLoss"
    CRC_INVALID = "CrcInvalid"
    RESERVED_AFC = "ReservedAfc"
    PES_START_MISSING = "PesStartMissing"


@dataclass(frozen=True)
class AnomalyEvent:
    kind: AnomalyKind
    pid: Optional[int]  # None for stream-level events (sync loss)
    packet_index: int
    expected: Optional[int] = None
    observed: Optional[int] = None
    detail: str = ""

    def describe(self) -> str:
        where = "stream" if self.pid is None else f"PID {self.pid} (0x{self.pid:04X})"
        text = f"#{self.packet_index} {self.kind.value} on {where}"
        if self.expected is not None or self.observed is not None:
            text += f": expected {self.expected}, observed {self.observed}"
        if self.detail:
            text += f" [{self.detail}]"
        return text
