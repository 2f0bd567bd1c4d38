"""Deterministic single-channel 802.11 traffic generator.

Devices are scheduled FIFO on one channel with no collisions by default.
A frame that becomes ready while the channel is busy waits DIFS plus a
number of backoff slots drawn from its profile; a frame that becomes ready
on an idle channel is sent immediately. RTS/CTS, SIFS-separated exchanges
and ACKs follow the usual 802.11 sequencing. ACK and CTS frames carry no
sender.

All times are integer microseconds. Frame sizes are padded up to the next
size whose airtime at the chosen rate is a whole number of microseconds,
so generated timings are exact.

Random numbers come from numpy's PCG64 bit generator, one stream per device
seeded with ``SeedSequence([seed, device_index])`` plus one channel stream
``SeedSequence([seed, 2**32])``. Only ``random_raw`` is used; uniform
doubles are ``(raw >> 11) * 2**-53``, so traces do not depend on numpy's
distribution code.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .trace import (ACK, CTS, DATA, NULL_DATA, RTS, CanonicalTrace, DeviceId,
                    FrameRecord, FrameTypeKey)

MAX_RTS_THRESHOLD = 2347
MAX_RETRIES = 7


class ScenarioError(ValueError):
    """Invalid scenario or profile definition; ``path`` names the field."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class PortableRng:
    """PCG64 raw output turned into uniforms, integers and choices."""

    def __init__(self, *entropy: int):
        self._bits = np.random.PCG64(np.random.SeedSequence(list(entropy)))

    def random(self) -> float:
        raw = int(self._bits.random_raw())
        return (raw >> 11) * (1.0 / (1 << 53))

    def integer(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi]."""
        return lo + min(int(self.random() * (hi - lo + 1)), hi - lo)

    def choice(self, weights: Sequence[float]) -> int:
        u = self.random() * sum(weights)
        acc = 0.0
        for i, w in enumerate(weights):
            acc += w
            if u < acc:
                return i
        return len(weights) - 1

    def exponential(self, mean: float) -> int:
        return int(round(-mean * math.log(1.0 - self.random())))


def whole_us_size(size: int, rate: float) -> int:
    """Smallest size >= ``size`` whose airtime at ``rate`` is whole microseconds."""
    step = (Fraction(8) / Fraction(rate)).denominator
    return -(-size // step) * step


def airtime(size: int, rate: float) -> int:
    t = Fraction(size * 8) / Fraction(rate)
    if t.denominator != 1:
        raise ValueError(f"{size} bytes at {rate} Mbps is not a whole number of microseconds")
    return int(t)


@dataclass(frozen=True)
class ChannelModel:
    sifs: int = 10
    difs: int = 28
    slot: int = 9
    ack_size: int = 14
    ack_rate: float = 2.0
    rts_size: int = 20
    collision_prob: float = 0.0

    def __post_init__(self) -> None:
        if not 0 < self.sifs < self.difs:
            raise ScenarioError("channel.sifs", "need 0 < sifs < difs")
        if self.slot <= 0:
            raise ScenarioError("channel.slot", "must be > 0")
        if not 0.0 <= self.collision_prob < 1.0:
            raise ScenarioError("channel.collision_prob", "must lie in [0, 1)")
        if self.ack_rate <= 0:
            raise ScenarioError("channel.ack_rate", "must be > 0")
        for name, size in (("ack_size", self.ack_size), ("rts_size", self.rts_size)):
            if whole_us_size(size, self.ack_rate) != size:
                raise ScenarioError(f"channel.{name}",
                                    f"{size} bytes at {self.ack_rate} Mbps is not a whole number of microseconds")


@dataclass(frozen=True)
class BackoffModel:
    """Backoff slot distribution.

    Slot positions are 0..cw_slots-1; ``extra_pre_slot`` adds position -1,
    i.e. transmitting one slot before DIFS expires. ``slot_weights`` covers
    all positions in ascending order (uniform when omitted). ``difs`` and
    ``slot`` override the channel values for this device.
    """

    cw_slots: int = 16
    extra_pre_slot: bool = False
    slot_weights: Optional[tuple[float, ...]] = None
    difs: Optional[int] = None
    slot: Optional[int] = None

    def __post_init__(self) -> None:
        if self.cw_slots < 1:
            raise ScenarioError("backoff.cw_slots", "must be >= 1")
        if self.slot_weights is not None:
            w = tuple(float(x) for x in self.slot_weights)
            object.__setattr__(self, "slot_weights", w)
            if len(w) != len(self.positions):
                raise ScenarioError("backoff.slot_weights", f"expected {len(self.positions)} weights")
            if any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
                raise ScenarioError("backoff.slot_weights", "must be non-negative and sum to 1")

    @property
    def positions(self) -> tuple[int, ...]:
        return ((-1,) if self.extra_pre_slot else ()) + tuple(range(self.cw_slots))

    @property
    def weights(self) -> tuple[float, ...]:
        n = len(self.positions)
        return self.slot_weights or (1.0 / n,) * n


@dataclass(frozen=True)
class RatePolicy:
    """Current rate is redrawn from ``weights`` with ``switch_prob`` per frame."""

    rates: tuple[float, ...] = (54.0,)
    weights: Optional[tuple[float, ...]] = None
    switch_prob: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if not self.rates or any(r <= 0 for r in self.rates):
            raise ScenarioError("rate_policy.rates", "need at least one rate > 0")
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
            if len(self.weights) != len(self.rates) or any(w < 0 for w in self.weights) \
                    or abs(sum(self.weights) - 1.0) > 1e-9:
                raise ScenarioError("rate_policy.weights", "one non-negative weight per rate, summing to 1")
        if not 0.0 <= self.switch_prob <= 1.0:
            raise ScenarioError("rate_policy.switch_prob", "must lie in [0, 1]")

    @classmethod
    def fixed(cls, rate: float) -> "RatePolicy":
        return cls((rate,))


@dataclass(frozen=True)
class Service:
    """Periodic frames from one network service.

    With ``burst == 0`` frames repeat every ``period`` (+/- ``jitter``) for
    the whole run. Otherwise the service emits bursts of ``burst`` frames
    spaced by ``period``; bursts are separated by exponential gaps with
    mean ``burst_gap``.
    """

    period: int
    jitter: int = 0
    size: int = 100
    broadcast: bool = True
    burst: int = 0
    burst_gap: int = 0
    ftype: FrameTypeKey = DATA

    def __post_init__(self) -> None:
        if self.period <= 0:
            raise ScenarioError("period", "must be > 0")
        if not 0 <= self.jitter < self.period:
            raise ScenarioError("jitter", "must lie in [0, period)")
        if self.size < 1:
            raise ScenarioError("size", "must be >= 1")
        if self.burst < 0:
            raise ScenarioError("burst", "must be >= 0")
        if self.burst and self.burst_gap <= 0:
            raise ScenarioError("burst_gap", "must be > 0 for bursty services")


@dataclass(frozen=True)
class DataSource:
    """Application data. ``interval == 0`` means saturated (always backlogged);
    otherwise arrivals are Poisson with that mean spacing."""

    interval: int = 0
    sizes: tuple[int, ...] = (1500,)
    size_weights: Optional[tuple[float, ...]] = None
    broadcast: bool = False
    ftype: FrameTypeKey = DATA

    def __post_init__(self) -> None:
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if self.interval < 0:
            raise ScenarioError("interval", "must be >= 0")
        if not self.sizes or any(s < 1 for s in self.sizes):
            raise ScenarioError("sizes", "need at least one size >= 1")
        if self.size_weights is not None:
            object.__setattr__(self, "size_weights", tuple(float(w) for w in self.size_weights))
            if len(self.size_weights) != len(self.sizes) or any(w < 0 for w in self.size_weights) \
                    or abs(sum(self.size_weights) - 1.0) > 1e-9:
                raise ScenarioError("size_weights", "one non-negative weight per size, summing to 1")


@dataclass(frozen=True)
class DeviceProfile:
    id: DeviceId
    backoff: BackoffModel = field(default_factory=BackoffModel)
    rts_threshold: Optional[int] = None
    rate_policy: RatePolicy = field(default_factory=RatePolicy)
    services: tuple[Service, ...] = ()
    null_frame_period: Optional[int] = None
    data: Optional[DataSource] = None
    null_size: int = 28

    def __post_init__(self) -> None:
        object.__setattr__(self, "services", tuple(self.services))
        if self.rts_threshold is not None and not 0 <= self.rts_threshold <= MAX_RTS_THRESHOLD:
            raise ScenarioError("rts_threshold", f"must lie in [0, {MAX_RTS_THRESHOLD}] or be null")
        if self.null_frame_period is not None and self.null_frame_period <= 0:
            raise ScenarioError("null_frame_period", "must be > 0")

    def with_id(self, mac: str | DeviceId) -> "DeviceProfile":
        return replace(self, id=mac if isinstance(mac, DeviceId) else DeviceId.parse(mac))


@dataclass(frozen=True)
class FrameAccess:
    """How a generated frame got the medium: ``backoff`` (waited DIFS plus
    ``slots`` slots after a busy channel), ``idle`` (sent on arrival) or
    ``sifs`` (inside an exchange, including ACK/CTS)."""

    mode: str
    slots: Optional[int] = None


@dataclass(order=True)
class _Job:
    ready: int
    dev: int
    source: int
    seq: int
    size: int = field(compare=False)
    ftype: FrameTypeKey = field(compare=False)
    broadcast: bool = field(compare=False)
    retries: int = field(compare=False, default=0)


class _Source:
    """Arrival process of one frame source on one device."""

    saturated = False

    def first(self, rng: PortableRng) -> Optional[int]:
        raise NotImplementedError

    def next(self, rng: PortableRng, prev: int) -> Optional[int]:
        raise NotImplementedError

    def frame(self, rng: PortableRng) -> tuple[int, FrameTypeKey, bool]:
        raise NotImplementedError


class _ServiceSource(_Source):
    def __init__(self, svc: Service):
        self.svc = svc
        self.left = 0

    def _spacing(self, rng: PortableRng) -> int:
        j = self.svc.jitter
        return self.svc.period + (rng.integer(-j, j) if j else 0)

    def first(self, rng):
        if self.svc.burst:
            self.left = self.svc.burst - 1
            return rng.exponential(self.svc.burst_gap)
        return rng.integer(0, self.svc.period - 1)

    def next(self, rng, prev):
        if not self.svc.burst:
            return prev + self._spacing(rng)
        if self.left > 0:
            self.left -= 1
            return prev + self._spacing(rng)
        self.left = self.svc.burst - 1
        return prev + self.svc.period + rng.exponential(self.svc.burst_gap)

    def frame(self, rng):
        return self.svc.size, self.svc.ftype, self.svc.broadcast


class _NullSource(_Source):
    def __init__(self, period: int, size: int):
        self.period, self.size = period, size

    def first(self, rng):
        return rng.integer(0, self.period - 1)

    def next(self, rng, prev):
        return prev + self.period

    def frame(self, rng):
        return self.size, NULL_DATA, False


class _DataSource(_Source):
    def __init__(self, src: DataSource):
        self.src = src
        self.saturated = src.interval == 0

    def first(self, rng):
        return 0 if self.saturated else rng.exponential(self.src.interval)

    def next(self, rng, prev):
        return prev + max(1, rng.exponential(self.src.interval))

    def frame(self, rng):
        if len(self.src.sizes) == 1:
            size = self.src.sizes[0]
        else:
            weights = self.src.size_weights or (1.0,) * len(self.src.sizes)
            size = self.src.sizes[rng.choice(weights)]
        return size, self.src.ftype, self.src.broadcast


class _DeviceState:
    def __init__(self, profile: DeviceProfile, rng: PortableRng):
        self.profile = profile
        self.rng = rng
        self.rate = profile.rate_policy.rates[0]
        if len(profile.rate_policy.rates) > 1:
            self.rate = profile.rate_policy.rates[rng.choice(self._rate_weights)]
        self.sources: list[_Source] = [_ServiceSource(s) for s in profile.services]
        if profile.null_frame_period:
            self.sources.append(_NullSource(profile.null_frame_period, profile.null_size))
        if profile.data is not None:
            self.sources.append(_DataSource(profile.data))

    @property
    def _rate_weights(self) -> tuple[float, ...]:
        pol = self.profile.rate_policy
        return pol.weights or (1.0,) * len(pol.rates)

    def next_rate(self) -> float:
        pol = self.profile.rate_policy
        if len(pol.rates) > 1 and pol.switch_prob and self.rng.random() < pol.switch_prob:
            self.rate = pol.rates[self.rng.choice(self._rate_weights)]
        return self.rate

    def backoff_slots(self) -> int:
        bo = self.profile.backoff
        return bo.positions[self.rng.choice(bo.weights)]


def generate_annotated(profiles: Sequence[DeviceProfile], channel: ChannelModel, duration: int,
                       seed: int) -> tuple[CanonicalTrace, list[FrameAccess]]:
    """Like :func:`generate`, also returning how each frame accessed the medium."""
    if not profiles:
        raise ScenarioError("devices", "need at least one device")
    if duration <= 0:
        raise ScenarioError("duration_us", "must be > 0")
    ids = [p.id for p in profiles]
    if len(set(ids)) != len(ids):
        raise ScenarioError("devices", "device MAC addresses must be unique")

    devices = [_DeviceState(p, PortableRng(seed, i)) for i, p in enumerate(profiles)]
    chan_rng = PortableRng(seed, 1 << 32)
    heap: list[_Job] = []
    seq = 0

    def push(dev: int, src: int, ready: Optional[int], retries: int = 0, frame=None) -> None:
        nonlocal seq
        if ready is None or ready >= duration:
            return
        state = devices[dev]
        size, ftype, bcast = frame or state.sources[src].frame(state.rng)
        heapq.heappush(heap, _Job(ready, dev, src, seq, size, ftype, bcast, retries))
        seq += 1

    for d, state in enumerate(devices):
        for s, source in enumerate(state.sources):
            push(d, s, source.first(state.rng))

    frames: list[FrameRecord] = []
    access: list[FrameAccess] = []
    t_free = 0
    ctrl_rate = channel.ack_rate

    while heap:
        job = heapq.heappop(heap)
        state = devices[job.dev]
        prof = state.profile
        difs = prof.backoff.difs if prof.backoff.difs is not None else channel.difs
        slot = prof.backoff.slot if prof.backoff.slot is not None else channel.slot

        if frames and job.ready <= t_free:
            n = state.backoff_slots()
            start = t_free + difs + n * slot
            first_access = FrameAccess("backoff", n)
        else:
            start = max(job.ready, t_free)
            first_access = FrameAccess("idle")

        rate = state.next_rate()
        size = whole_us_size(job.size, rate)
        collided = (channel.collision_prob > 0 and not job.broadcast
                    and first_access.mode == "backoff" and job.retries < MAX_RETRIES
                    and chan_rng.random() < channel.collision_prob)

        # (ftype, sender, size, rate) for each frame of the exchange
        seqf: list[tuple[FrameTypeKey, Optional[DeviceId], int, float, bool]] = []
        use_rts = (not job.broadcast and prof.rts_threshold is not None
                   and size > prof.rts_threshold)
        if use_rts:
            seqf.append((RTS, prof.id, channel.rts_size, ctrl_rate, False))
            seqf.append((CTS, None, channel.ack_size, ctrl_rate, False))
        seqf.append((job.ftype, prof.id, size, rate, job.retries > 0))
        if not job.broadcast and not collided:
            seqf.append((ACK, None, channel.ack_size, ctrl_rate, False))

        exchange = []
        t = start
        for i, (ftype, sender, fsize, frate, retry) in enumerate(seqf):
            if i:
                t += channel.sifs
            t += airtime(fsize, frate)
            exchange.append(FrameRecord(t, fsize, frate, ftype, sender, retry, True))
        if t >= duration:
            break
        frames.extend(exchange)
        access.append(first_access)
        access.extend(FrameAccess("sifs") for _ in exchange[1:])
        t_free = t

        source = state.sources[job.source]
        if collided:
            push(job.dev, job.source, t, job.retries + 1, (job.size, job.ftype, job.broadcast))
        if source.saturated:
            if not collided:
                push(job.dev, job.source, t)
        elif not job.retries:
            push(job.dev, job.source, source.next(state.rng, job.ready))

    return CanonicalTrace(tuple(frames), 0), access


def generate(profiles: Sequence[DeviceProfile], channel: ChannelModel, duration: int,
             seed: int) -> CanonicalTrace:
    return generate_annotated(profiles, channel, duration, seed)[0]


# -- presets ---------------------------------------------------------------

def _placeholder(n: int) -> DeviceId:
    return DeviceId(0x02_00_00_00_00_00 + n)


def profile_library() -> dict[str, DeviceProfile]:
    """Named presets, one per device-level factor.

    backoff-standard     saturated unicast stream, 16 uniform backoff slots
    backoff-extra-slot   as above plus a rarely used slot before DIFS ends,
                         and a skewed slot distribution
    rts-off              saturated 2400-byte frames, virtual carrier sense off
    rts-2000             same traffic with an RTS threshold of 2000 bytes
    rate-switcher        Poisson traffic, redraws its rate with p=0.3/frame
    service-netbook      bursty broadcast services ~950 us and ~1200 us apart
    null-beacon          Data-null frame every 100 ms plus light traffic
    """
    lib = {
        "backoff-standard": DeviceProfile(
            _placeholder(1),
            data=DataSource(interval=0, sizes=(1500,)),
        ),
        "backoff-extra-slot": DeviceProfile(
            _placeholder(2),
            backoff=BackoffModel(
                cw_slots=16, extra_pre_slot=True,
                slot_weights=(0.02,) + (0.07,) * 8 + (0.0525,) * 8,
            ),
            data=DataSource(interval=0, sizes=(1500,)),
        ),
        "rts-off": DeviceProfile(
            _placeholder(3),
            data=DataSource(interval=0, sizes=(2400,)),
        ),
        "rts-2000": DeviceProfile(
            _placeholder(4),
            rts_threshold=2000,
            data=DataSource(interval=0, sizes=(2400,)),
        ),
        "rate-switcher": DeviceProfile(
            _placeholder(5),
            rate_policy=RatePolicy(rates=(54.0, 48.0, 36.0, 24.0),
                                   weights=(0.4, 0.3, 0.2, 0.1), switch_prob=0.3),
            data=DataSource(interval=2000, sizes=(1500, 600, 100), size_weights=(0.6, 0.2, 0.2)),
        ),
        "service-netbook": DeviceProfile(
            _placeholder(6),
            services=(
                Service(period=950, jitter=3, size=60, broadcast=True, burst=8, burst_gap=50_000),
                Service(period=1200, jitter=3, size=90, broadcast=True, burst=8, burst_gap=70_000),
            ),
        ),
        "null-beacon": DeviceProfile(
            _placeholder(7),
            null_frame_period=100_000,
            data=DataSource(interval=20_000, sizes=(300,)),
        ),
    }
    return lib


# -- scenario files -------------------------------------------------------

def _coerce(value: Any, path: str, kind):
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is int and isinstance(value, float) and value.is_integer():
        value = int(value)
    if not isinstance(value, kind) or (kind in (int, float) and isinstance(value, bool)):
        raise ScenarioError(path, f"expected {kind.__name__}")
    return value


def _field(obj: Mapping, path: str, key: str, kind, default: Any = ..., *, nullable: bool = False):
    where = f"{path}.{key}".lstrip(".")
    if key not in obj:
        if default is ...:
            raise ScenarioError(where, "missing")
        return default
    if obj[key] is None and nullable:
        return None
    return _coerce(obj[key], where, kind)


def _list(obj: Mapping, path: str, key: str, kind, default: Any = ...):
    where = f"{path}.{key}".lstrip(".")
    if key not in obj or (obj[key] is None and default is not ...):
        if default is ...:
            raise ScenarioError(where, "missing")
        return default
    if not isinstance(obj[key], list):
        raise ScenarioError(where, "expected a list")
    return tuple(_coerce(v, f"{where}[{i}]", kind) for i, v in enumerate(obj[key]))


def _nested(path: str, build, *args, **kwargs):
    try:
        return build(*args, **kwargs)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}.{exc.path}" if exc.path else path, exc.message) from None


def _ftype(obj: Mapping, path: str) -> FrameTypeKey:
    text = _field(obj, path, "ftype", str, str(DATA))
    try:
        return FrameTypeKey.parse(text)
    except ValueError as exc:
        raise ScenarioError(f"{path}.ftype", str(exc)) from None


def _known_keys(obj: Mapping, path: str, allowed: set[str]) -> None:
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ScenarioError(f"{path}.{extra[0]}".lstrip("."), "unknown field")


def _mapping(value: Any, path: str) -> Mapping:
    if not isinstance(value, Mapping):
        raise ScenarioError(path, "expected an object")
    return value


def _device_from_json(obj: Any, path: str, presets: Mapping[str, DeviceProfile]) -> DeviceProfile:
    obj = _mapping(obj, path)
    _known_keys(obj, path, {"preset", "mac", "backoff", "rts_threshold", "rate_policy",
                            "services", "null_frame_period", "data"})
    try:
        mac = DeviceId.parse(_field(obj, path, "mac", str))
    except ValueError as exc:
        raise ScenarioError(f"{path}.mac", str(exc)) from None
    base = DeviceProfile(mac)
    if "preset" in obj:
        name = _field(obj, path, "preset", str)
        if name not in presets:
            raise ScenarioError(f"{path}.preset", f"unknown preset {name!r}")
        base = presets[name].with_id(mac)

    changes: dict[str, Any] = {}
    if "backoff" in obj:
        b = _mapping(obj["backoff"], f"{path}.backoff")
        bp = f"{path}.backoff"
        _known_keys(b, bp, {"cw_slots", "extra_pre_slot", "slot_weights", "difs", "slot"})
        changes["backoff"] = _nested(path, BackoffModel,
                                     cw_slots=_field(b, bp, "cw_slots", int, 16),
                                     extra_pre_slot=_field(b, bp, "extra_pre_slot", bool, False),
                                     slot_weights=_list(b, bp, "slot_weights", float, None),
                                     difs=_field(b, bp, "difs", int, None, nullable=True),
                                     slot=_field(b, bp, "slot", int, None, nullable=True))
    if "rts_threshold" in obj:
        changes["rts_threshold"] = _field(obj, path, "rts_threshold", int, nullable=True)
    if "rate_policy" in obj:
        r = _mapping(obj["rate_policy"], f"{path}.rate_policy")
        rp = f"{path}.rate_policy"
        _known_keys(r, rp, {"rates", "weights", "switch_prob"})
        changes["rate_policy"] = _nested(path, RatePolicy,
                                         rates=_list(r, rp, "rates", float),
                                         weights=_list(r, rp, "weights", float, None),
                                         switch_prob=_field(r, rp, "switch_prob", float, 0.0))
    if "services" in obj:
        svcs = []
        for i, s in enumerate(_field(obj, path, "services", list)):
            sp = f"{path}.services[{i}]"
            s = _mapping(s, sp)
            _known_keys(s, sp, {"period", "jitter", "size", "broadcast", "burst", "burst_gap", "ftype"})
            svcs.append(_nested(sp, Service,
                                period=_field(s, sp, "period", int),
                                jitter=_field(s, sp, "jitter", int, 0),
                                size=_field(s, sp, "size", int, 100),
                                broadcast=_field(s, sp, "broadcast", bool, True),
                                burst=_field(s, sp, "burst", int, 0),
                                burst_gap=_field(s, sp, "burst_gap", int, 0),
                                ftype=_ftype(s, sp)))
        changes["services"] = tuple(svcs)
    if "null_frame_period" in obj:
        changes["null_frame_period"] = _field(obj, path, "null_frame_period", int, nullable=True)
    if "data" in obj:
        if obj["data"] is None:
            changes["data"] = None
        else:
            d = _mapping(obj["data"], f"{path}.data")
            dp = f"{path}.data"
            _known_keys(d, dp, {"interval", "sizes", "size_weights", "broadcast", "ftype"})
            changes["data"] = _nested(dp, DataSource,
                                      interval=_field(d, dp, "interval", int, 0),
                                      sizes=_list(d, dp, "sizes", int, (1500,)),
                                      size_weights=_list(d, dp, "size_weights", float, None),
                                      broadcast=_field(d, dp, "broadcast", bool, False),
                                      ftype=_ftype(d, dp))
    return _nested(path, replace, base, **changes)


@dataclass(frozen=True)
class Scenario:
    profiles: tuple[DeviceProfile, ...]
    channel: ChannelModel
    duration: int
    seed: int

    def generate(self) -> CanonicalTrace:
        return generate(self.profiles, self.channel, self.duration, self.seed)


def scenario_from_json(obj: Any) -> Scenario:
    obj = _mapping(obj, "")
    _known_keys(obj, "", {"channel", "duration_us", "seed", "devices"})
    ch = _mapping(obj.get("channel", {}), "channel")
    _known_keys(ch, "channel", {"sifs", "difs", "slot", "ack_size", "ack_rate", "rts_size", "collision_prob"})
    channel = ChannelModel(
        sifs=_field(ch, "channel", "sifs", int, 10),
        difs=_field(ch, "channel", "difs", int, 28),
        slot=_field(ch, "channel", "slot", int, 9),
        ack_size=_field(ch, "channel", "ack_size", int, 14),
        ack_rate=_field(ch, "channel", "ack_rate", float, 2.0),
        rts_size=_field(ch, "channel", "rts_size", int, 20),
        collision_prob=_field(ch, "channel", "collision_prob", float, 0.0),
    )
    duration = _field(obj, "", "duration_us", int)
    if duration <= 0:
        raise ScenarioError("duration_us", "must be > 0")
    seed = _field(obj, "", "seed", int, 0)
    devs = _field(obj, "", "devices", list)
    if not devs:
        raise ScenarioError("devices", "need at least one device")
    presets = profile_library()
    profiles = tuple(_device_from_json(d, f"devices[{i}]", presets) for i, d in enumerate(devs))
    if len({p.id for p in profiles}) != len(profiles):
        raise ScenarioError("devices", "device MAC addresses must be unique")
    return Scenario(profiles, channel, duration, seed)


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError("", f"invalid JSON: {exc}") from None
    return scenario_from_json(obj)
