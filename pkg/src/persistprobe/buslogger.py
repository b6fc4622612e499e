"""Emulated DDR bus probe: trigger, bounded trace depth, storage qualification, CSV."""

from dataclasses import dataclass, field
from typing import Optional

from .addressing import AddressError, GeometricAddress, WildcardMask

DEFAULT_DEPTH = 8000
CSV_HEADER = "index,command,bank_group,bank,row,column"


class TraceFormatError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class CaptureConfig:
    depth: int = DEFAULT_DEPTH
    qualification: Optional[WildcardMask] = None
    trigger: str = "FIRST_WRITE"

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("capture depth must be >= 1")
        if self.trigger != "FIRST_WRITE":
            raise ValueError(f"unsupported trigger {self.trigger!r}")


@dataclass(frozen=True)
class TraceRecord:
    index: int
    addr: GeometricAddress
    command: str = "WR"


@dataclass
class Trace:
    records: list
    config: CaptureConfig = field(default_factory=CaptureConfig)

    def __len__(self):
        return len(self.records)

    def addresses(self):
        return [r.addr for r in self.records]


def capture(bus_events, config: CaptureConfig = CaptureConfig()) -> Trace:
    """Record bus writes from the trigger onwards.

    The trigger fires on the first write. Qualification filters what is
    stored, and the depth limit counts stored records only, so a tight mask
    lets the capture run longer.
    """
    records = []
    mask = config.qualification
    for idx, addr in bus_events:
        if mask is not None and not mask.matches_raw(addr.packed):
            continue
        records.append(TraceRecord(idx, addr))
        if len(records) >= config.depth:
            break
    return Trace(records, config)


def export_csv(trace: Trace) -> str:
    lines = [CSV_HEADER]
    for r in trace.records:
        a = r.addr
        lines.append(f"{r.index},{r.command},{a.bank_group},{a.bank},{a.row},{a.column}")
    return "\n".join(lines) + "\n"


def parse_csv(text: str, config: CaptureConfig = None) -> Trace:
    lines = text.splitlines()
    if not lines or lines[0].strip() != CSV_HEADER:
        raise TraceFormatError(f"missing header {CSV_HEADER!r}", 1)
    records = []
    last = None
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.strip().split(",")
        if len(parts) != 6:
            raise TraceFormatError(f"expected 6 fields, got {len(parts)}", lineno)
        if parts[1] != "WR":
            raise TraceFormatError(f"unsupported command {parts[1]!r}", lineno)
        try:
            idx, bg, bank, row, col = (int(p) for p in (parts[0], *parts[2:]))
        except ValueError:
            raise TraceFormatError(f"non-integer field in {line!r}", lineno) from None
        if last is not None and idx <= last:
            raise TraceFormatError(f"index {idx} not strictly increasing", lineno)
        try:
            addr = GeometricAddress(bg, bank, row, col)
        except AddressError as e:
            raise TraceFormatError(str(e), lineno) from None
        records.append(TraceRecord(idx, addr))
        last = idx
    if config is None:
        config = CaptureConfig(depth=max(DEFAULT_DEPTH, len(records)))
    return Trace(records, config)


def read_csv(path) -> Trace:
    with open(path, encoding="utf-8") as f:
        return parse_csv(f.read())
