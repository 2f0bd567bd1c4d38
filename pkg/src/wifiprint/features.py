"""Per-frame network parameters and their attribution to (device, frame type).

Timing parameters always use the immediately preceding frame on the channel
as predecessor, whoever sent it; frames without a sender (ACK, CTS) are
never attributed but still act as predecessors.
"""

from __future__ import annotations

import csv
import enum
import io
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .trace import CanonicalTrace, DeviceId, FrameTypeKey


class ParameterKind(str, enum.Enum):
    RATE = "rate"
    FRAME_SIZE = "frame_size"
    MEDIUM_ACCESS_TIME = "medium_access_time"
    TRANSMISSION_TIME = "transmission_time"
    INTER_ARRIVAL_TIME = "inter_arrival_time"

    @property
    def unit(self) -> str:
        return _UNITS[self]

    def __str__(self) -> str:
        return self.value


_UNITS = {
    ParameterKind.RATE: "Mbps",
    ParameterKind.FRAME_SIZE: "bytes",
    ParameterKind.MEDIUM_ACCESS_TIME: "us",
    ParameterKind.TRANSMISSION_TIME: "us",
    ParameterKind.INTER_ARRIVAL_TIME: "us",
}

# skip reasons
NO_RATE = "no_rate"
NO_PREDECESSOR = "no_predecessor"


@dataclass
class SampleSet:
    """Values of one parameter for one (device, frame type)."""

    device: DeviceId
    ftype: FrameTypeKey
    kind: ParameterKind
    values: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.values)


def transmission_duration(size: int, rate: float) -> float:
    """Airtime in microseconds of ``size`` bytes at ``rate`` Mbps."""
    if not rate > 0:
        raise ValueError(f"rate must be > 0, got {rate}")
    return size * 8 / rate


def frame_values(trace: CanonicalTrace, kind: ParameterKind) -> list[Optional[float]]:
    """One value per frame (None where the parameter is undefined),
    regardless of whether the frame has a sender."""
    kind = ParameterKind(kind)
    out: list[Optional[float]] = []
    prev_t: Optional[int] = None
    for f in trace.frames:
        if kind is ParameterKind.RATE:
            v = f.rate
        elif kind is ParameterKind.FRAME_SIZE:
            v = float(f.size)
        elif kind is ParameterKind.TRANSMISSION_TIME:
            v = transmission_duration(f.size, f.rate) if f.rate is not None else None
        elif kind is ParameterKind.INTER_ARRIVAL_TIME:
            v = float(f.t_end - prev_t) if prev_t is not None else None
        else:
            if prev_t is None or f.rate is None:
                v = None
            else:
                v = max(0.0, (f.t_end - prev_t) - transmission_duration(f.size, f.rate))
        out.append(v)
        prev_t = f.t_end
    return out


def _skip_reason(kind: ParameterKind, index: int) -> str:
    if kind in (ParameterKind.INTER_ARRIVAL_TIME, ParameterKind.MEDIUM_ACCESS_TIME) and index == 0:
        return NO_PREDECESSOR
    return NO_RATE


def extract_samples(trace: CanonicalTrace, kind: ParameterKind,
                    tally: Optional[Counter] = None) -> list[SampleSet]:
    """Group per-frame values into sample sets keyed by (sender, frame type).

    Output is sorted by (device, ftype). Skipped frames with a sender are
    counted by reason in ``tally`` when given.
    """
    kind = ParameterKind(kind)
    sets: dict[tuple[DeviceId, FrameTypeKey], SampleSet] = {}
    for i, (f, v) in enumerate(zip(trace.frames, frame_values(trace, kind))):
        if f.sender is None:
            continue
        if v is None:
            if tally is not None:
                tally[_skip_reason(kind, i)] += 1
            continue
        key = (f.sender, f.ftype)
        s = sets.get(key)
        if s is None:
            s = sets[key] = SampleSet(f.sender, f.ftype, kind)
        s.values.append(v)
    return [sets[k] for k in sorted(sets)]


def group_by_device(samples: Iterable[SampleSet]) -> dict[DeviceId, list[SampleSet]]:
    out: dict[DeviceId, list[SampleSet]] = {}
    for s in samples:
        out.setdefault(s.device, []).append(s)
    return out


def samples_csv(samples: Iterable[SampleSet]) -> str:
    """Dump as ``device,ftype,kind,value`` rows."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["device", "ftype", "kind", "value"])
    for s in samples:
        for v in s.values:
            w.writerow([s.device.mac, str(s.ftype), s.kind.value, repr(float(v))])
    return buf.getvalue()
