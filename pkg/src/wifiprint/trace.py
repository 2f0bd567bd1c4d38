"""Frame, device and trace types plus the canonical text trace format.

Every other module consumes :class:`CanonicalTrace`. Times are integer
microseconds relative to the trace origin and mark the *end* of reception.

Canonical format (UTF-8)::

    #wifiprint-trace v1 origin=<unix-epoch-us>
    <t_end_us> <size_bytes> <rate_mbps|-> <mgmt|ctrl|data> <subtype> <sender|-> <retry> <fcs_ok>
"""

from __future__ import annotations

import enum
import io
import re
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Optional

HEADER_PREFIX = "#wifiprint-trace v1"
_HEADER_RE = re.compile(r"^#wifiprint-trace v1 origin=(-?\d+)$")
_MAC_RE = re.compile(r"^[0-9a-fA-F]{2}([:-][0-9a-fA-F]{2}){5}$")


class TraceError(ValueError):
    """Malformed canonical trace input."""

    def __init__(self, message: str, line: Optional[int] = None, field_name: Optional[str] = None):
        self.line = line
        self.field_name = field_name
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field_name is not None:
            where.append(f"field {field_name!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


class TraceOrderError(TraceError):
    """Timestamps decrease between two consecutive frames."""


@dataclass(frozen=True, order=True)
class DeviceId:
    """48-bit hardware address. Ordering is by the raw integer value."""

    value: int

    def __post_init__(self) -> None:
        if not 0 <= self.value < 1 << 48:
            raise ValueError(f"MAC address out of range: {self.value:#x}")

    @classmethod
    def parse(cls, text: str) -> "DeviceId":
        if not _MAC_RE.match(text):
            raise ValueError(f"not a MAC address: {text!r}")
        return cls(int(text.replace(":", "").replace("-", ""), 16))

    @classmethod
    def from_bytes(cls, raw: bytes) -> "DeviceId":
        if len(raw) != 6:
            raise ValueError("MAC address needs exactly 6 octets")
        return cls(int.from_bytes(raw, "big"))

    @property
    def mac(self) -> str:
        h = f"{self.value:012x}"
        return ":".join(h[i:i + 2] for i in range(0, 12, 2))

    def __str__(self) -> str:
        return self.mac

    def __repr__(self) -> str:
        return f"DeviceId({self.mac!r})"


class FrameType(enum.IntEnum):
    MANAGEMENT = 0
    CONTROL = 1
    DATA = 2

    @property
    def word(self) -> str:
        return _TYPE_WORDS[self]

    @classmethod
    def from_word(cls, word: str) -> "FrameType":
        try:
            return _WORD_TYPES[word]
        except KeyError:
            raise ValueError(f"unknown frame type word {word!r}") from None


_TYPE_WORDS = {FrameType.MANAGEMENT: "mgmt", FrameType.CONTROL: "ctrl", FrameType.DATA: "data"}
_WORD_TYPES = {w: t for t, w in _TYPE_WORDS.items()}

# 802.11-2016 frame control type/subtype assignments.
SUBTYPE_NAMES: dict[tuple[FrameType, int], str] = {
    (FrameType.MANAGEMENT, 0): "assoc-req",
    (FrameType.MANAGEMENT, 1): "assoc-resp",
    (FrameType.MANAGEMENT, 2): "reassoc-req",
    (FrameType.MANAGEMENT, 3): "reassoc-resp",
    (FrameType.MANAGEMENT, 4): "probe-req",
    (FrameType.MANAGEMENT, 5): "probe-resp",
    (FrameType.MANAGEMENT, 6): "timing-adv",
    (FrameType.MANAGEMENT, 8): "beacon",
    (FrameType.MANAGEMENT, 9): "atim",
    (FrameType.MANAGEMENT, 10): "disassoc",
    (FrameType.MANAGEMENT, 11): "auth",
    (FrameType.MANAGEMENT, 12): "deauth",
    (FrameType.MANAGEMENT, 13): "action",
    (FrameType.MANAGEMENT, 14): "action-noack",
    (FrameType.CONTROL, 4): "bf-report-poll",
    (FrameType.CONTROL, 5): "vht-ndp-announce",
    (FrameType.CONTROL, 6): "ctrl-ext",
    (FrameType.CONTROL, 7): "ctrl-wrapper",
    (FrameType.CONTROL, 8): "block-ack-req",
    (FrameType.CONTROL, 9): "block-ack",
    (FrameType.CONTROL, 10): "ps-poll",
    (FrameType.CONTROL, 11): "rts",
    (FrameType.CONTROL, 12): "cts",
    (FrameType.CONTROL, 13): "ack",
    (FrameType.CONTROL, 14): "cf-end",
    (FrameType.CONTROL, 15): "cf-end-ack",
    (FrameType.DATA, 0): "data",
    (FrameType.DATA, 1): "data-cf-ack",
    (FrameType.DATA, 2): "data-cf-poll",
    (FrameType.DATA, 3): "data-cf-ack-poll",
    (FrameType.DATA, 4): "null",
    (FrameType.DATA, 5): "cf-ack",
    (FrameType.DATA, 6): "cf-poll",
    (FrameType.DATA, 7): "cf-ack-poll",
    (FrameType.DATA, 8): "qos-data",
    (FrameType.DATA, 9): "qos-data-cf-ack",
    (FrameType.DATA, 10): "qos-data-cf-poll",
    (FrameType.DATA, 11): "qos-data-cf-ack-poll",
    (FrameType.DATA, 12): "qos-null",
    (FrameType.DATA, 14): "qos-cf-poll",
    (FrameType.DATA, 15): "qos-cf-ack-poll",
}


@dataclass(frozen=True, order=True)
class FrameTypeKey:
    """802.11 (type, subtype) pair; rendered as ``data/0``, ``ctrl/11`` etc."""

    type: FrameType
    subtype: int

    def __post_init__(self) -> None:
        if not isinstance(self.type, FrameType):
            object.__setattr__(self, "type", FrameType(self.type))
        if not 0 <= self.subtype <= 15:
            raise ValueError(f"subtype out of range: {self.subtype}")

    @property
    def known(self) -> bool:
        """False for reserved type/subtype combinations."""
        return (self.type, self.subtype) in SUBTYPE_NAMES

    @property
    def name(self) -> str:
        return SUBTYPE_NAMES.get((self.type, self.subtype), "reserved")

    @classmethod
    def parse(cls, text: str) -> "FrameTypeKey":
        word, _, sub = text.partition("/")
        if not sub:
            raise ValueError(f"frame type must look like 'data/0': {text!r}")
        return cls(FrameType.from_word(word), int(sub))

    def __str__(self) -> str:
        return f"{self.type.word}/{self.subtype}"


# Frequently used keys.
DATA = FrameTypeKey(FrameType.DATA, 0)
NULL_DATA = FrameTypeKey(FrameType.DATA, 4)
QOS_DATA = FrameTypeKey(FrameType.DATA, 8)
PROBE_REQ = FrameTypeKey(FrameType.MANAGEMENT, 4)
BEACON = FrameTypeKey(FrameType.MANAGEMENT, 8)
RTS = FrameTypeKey(FrameType.CONTROL, 11)
CTS = FrameTypeKey(FrameType.CONTROL, 12)
ACK = FrameTypeKey(FrameType.CONTROL, 13)


@dataclass(frozen=True)
class FrameRecord:
    t_end: int
    size: int
    rate: Optional[float]
    ftype: FrameTypeKey
    sender: Optional[DeviceId] = None
    retry: bool = False
    fcs_ok: bool = True

    def __post_init__(self) -> None:
        if self.t_end < 0:
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")
        if self.size < 1:
            raise ValueError(f"size must be >= 1, got {self.size}")
        if self.rate is not None and not self.rate > 0:
            raise ValueError(f"rate must be > 0, got {self.rate}")


@dataclass(frozen=True)
class CanonicalTrace:
    """Frames in capture order with non-decreasing ``t_end``."""

    frames: tuple[FrameRecord, ...] = ()
    origin: int = 0

    def __post_init__(self) -> None:
        frames = tuple(self.frames)
        object.__setattr__(self, "frames", frames)
        for i in range(1, len(frames)):
            if frames[i].t_end < frames[i - 1].t_end:
                raise TraceOrderError(
                    f"t_end {frames[i].t_end} < previous {frames[i - 1].t_end}", line=None
                )

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self) -> Iterator[FrameRecord]:
        return iter(self.frames)

    @property
    def duration(self) -> int:
        """End-of-reception time of the last frame (0 when empty)."""
        return self.frames[-1].t_end if self.frames else 0

    def devices(self) -> list[DeviceId]:
        return sorted({f.sender for f in self.frames if f.sender is not None})


def _format_rate(rate: Optional[float]) -> str:
    return "-" if rate is None else repr(float(rate))


def format_frame(frame: FrameRecord) -> str:
    return " ".join((
        str(frame.t_end),
        str(frame.size),
        _format_rate(frame.rate),
        frame.ftype.type.word,
        str(frame.ftype.subtype),
        "-" if frame.sender is None else frame.sender.mac,
        "1" if frame.retry else "0",
        "1" if frame.fcs_ok else "0",
    ))


def _flag(text: str, line: int, name: str) -> bool:
    if text not in ("0", "1"):
        raise TraceError(f"expected 0 or 1, got {text!r}", line, name)
    return text == "1"


def parse_frame(text: str, line: int = 0) -> FrameRecord:
    parts = text.split()
    if len(parts) != 8:
        raise TraceError(f"expected 8 fields, got {len(parts)}", line)
    t_s, size_s, rate_s, type_s, sub_s, sender_s, retry_s, fcs_s = parts
    try:
        t_end = int(t_s)
    except ValueError:
        raise TraceError(f"not an integer: {t_s!r}", line, "t_end") from None
    if t_end < 0:
        raise TraceError("must be >= 0", line, "t_end")
    try:
        size = int(size_s)
    except ValueError:
        raise TraceError(f"not an integer: {size_s!r}", line, "size") from None
    if size < 1:
        raise TraceError("must be >= 1", line, "size")
    rate: Optional[float] = None
    if rate_s != "-":
        try:
            rate = float(rate_s)
        except ValueError:
            raise TraceError(f"not a number: {rate_s!r}", line, "rate") from None
        if not rate > 0 or rate == float("inf"):
            raise TraceError("must be a finite value > 0", line, "rate")
    try:
        ftype_t = FrameType.from_word(type_s)
    except ValueError as exc:
        raise TraceError(str(exc), line, "type") from None
    try:
        sub = int(sub_s)
        ftype = FrameTypeKey(ftype_t, sub)
    except ValueError:
        raise TraceError(f"subtype must be 0-15, got {sub_s!r}", line, "subtype") from None
    sender = None
    if sender_s != "-":
        try:
            sender = DeviceId.parse(sender_s)
        except ValueError as exc:
            raise TraceError(str(exc), line, "sender") from None
    return FrameRecord(
        t_end=t_end,
        size=size,
        rate=rate,
        ftype=ftype,
        sender=sender,
        retry=_flag(retry_s, line, "retry"),
        fcs_ok=_flag(fcs_s, line, "fcs_ok"),
    )


def parse_canonical(stream: IO[str] | Iterable[str]) -> CanonicalTrace:
    """Read a canonical trace; raises :class:`TraceError` naming the line."""
    lines = iter(stream)
    try:
        header = next(lines)
    except StopIteration:
        raise TraceError("missing header line", 1) from None
    m = _HEADER_RE.match(header.rstrip("\r\n"))
    if not m:
        raise TraceError(f"bad header {header.rstrip()!r}", 1)
    origin = int(m.group(1))

    frames: list[FrameRecord] = []
    prev = None
    for lineno, raw in enumerate(lines, start=2):
        text = raw.strip()
        if not text:
            continue
        frame = parse_frame(text, lineno)
        if prev is not None and frame.t_end < prev:
            raise TraceOrderError(f"t_end {frame.t_end} < previous {prev}", lineno, "t_end")
        prev = frame.t_end
        frames.append(frame)
    return CanonicalTrace(tuple(frames), origin)


def write_canonical(trace: CanonicalTrace, stream: Optional[IO[str]] = None) -> str:
    """Render ``trace``; also writes to ``stream`` when one is given."""
    out = io.StringIO()
    out.write(f"{HEADER_PREFIX} origin={trace.origin}\n")
    for frame in trace.frames:
        out.write(format_frame(frame))
        out.write("\n")
    text = out.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def load_trace(path) -> CanonicalTrace:
    with open(path, encoding="utf-8") as fh:
        return parse_canonical(fh)


def save_trace(trace: CanonicalTrace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_canonical(trace, fh)
