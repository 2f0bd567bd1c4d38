"""Histogram signatures and the reference database.

A signature holds, per frame type, a normalized histogram of one parameter
plus a weight equal to that frame type's share of the device's samples.
Raw bin counts are the persisted source of truth; frequencies and weights
are always recomputed from them.
"""

from __future__ import annotations

import bisect
import hashlib
import json
import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .features import ParameterKind, SampleSet
from .trace import DeviceId, FrameTypeKey

DB_VERSION = 1

# 802.11a/b/g rate set, Mbps
RATE_SET = (1.0, 2.0, 5.5, 6.0, 9.0, 11.0, 12.0, 18.0, 24.0, 36.0, 48.0, 54.0)


class SchemeMismatchError(ValueError):
    """Histograms or signatures built with different binning schemes."""


@dataclass(frozen=True)
class BinningScheme:
    """``len(edges) - 1`` half-open regular bins plus one overflow bin.

    Values below ``edges[0]`` fall into bin 0.
    """

    kind: ParameterKind
    edges: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ParameterKind(self.kind))
        edges = tuple(float(e) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        if len(edges) < 2:
            raise ValueError("need at least two edges")
        if not all(math.isfinite(e) for e in edges):
            raise ValueError("edges must be finite")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("edges must be strictly increasing")

    @property
    def n_bins(self) -> int:
        return len(self.edges)

    @property
    def scheme_id(self) -> str:
        payload = json.dumps([self.kind.value, [repr(e) for e in self.edges]])
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def bin_index(self, value: float) -> int:
        return bin_index(self, value)

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "edges": list(self.edges), "id": self.scheme_id}

    @classmethod
    def from_json(cls, obj: Mapping) -> "BinningScheme":
        scheme = cls(ParameterKind(obj["kind"]), tuple(obj["edges"]))
        if "id" in obj and obj["id"] != scheme.scheme_id:
            raise ValueError("scheme id does not match its edges")
        return scheme


def bin_index(scheme: BinningScheme, value: float) -> int:
    if math.isnan(value):
        raise ValueError("cannot bin NaN")
    i = bisect.bisect_right(scheme.edges, value) - 1
    return min(max(i, 0), scheme.n_bins - 1)


def _bin_counts(scheme: BinningScheme, values: Sequence[float]) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if np.isnan(arr).any():
        raise ValueError("cannot bin NaN")
    idx = np.searchsorted(np.asarray(scheme.edges), arr, side="right") - 1
    idx = np.clip(idx, 0, scheme.n_bins - 1)
    return np.bincount(idx, minlength=scheme.n_bins).astype(np.int64)


def default_scheme(kind: ParameterKind) -> BinningScheme:
    kind = ParameterKind(kind)
    if kind is ParameterKind.RATE:
        # one bin per rate, boundaries halfway between neighbours
        mids = [(a + b) / 2 for a, b in zip(RATE_SET, RATE_SET[1:])]
        edges = [0.0, *mids, RATE_SET[-1] + 3.0]
    elif kind is ParameterKind.FRAME_SIZE:
        edges = range(0, 2352 + 1, 16)
    elif kind is ParameterKind.TRANSMISSION_TIME:
        edges = range(0, 20_000 + 1, 20)
    else:
        edges = range(0, 10_000 + 1, 10)
    return BinningScheme(kind, tuple(edges))


class Histogram:
    """Bin counts with derived percentage frequencies. Immutable."""

    __slots__ = ("scheme_id", "_counts", "_freqs")

    def __init__(self, scheme_id: str, counts: Iterable[int]):
        counts = np.array(list(counts) if not isinstance(counts, np.ndarray) else counts,
                          dtype=np.int64)
        if counts.ndim != 1 or (counts < 0).any():
            raise ValueError("counts must be a flat non-negative vector")
        counts.setflags(write=False)
        self.scheme_id = scheme_id
        self._counts = counts
        total = int(counts.sum())
        freqs = counts / total if total else np.zeros(len(counts))
        freqs.setflags(write=False)
        self._freqs = freqs

    @classmethod
    def from_values(cls, scheme: BinningScheme, values: Sequence[float]) -> "Histogram":
        return cls(scheme.scheme_id, _bin_counts(scheme, values))

    @property
    def counts(self) -> np.ndarray:
        return self._counts

    @property
    def total(self) -> int:
        return int(self._counts.sum())

    @property
    def frequencies(self) -> np.ndarray:
        return self._freqs

    def __add__(self, other: "Histogram") -> "Histogram":
        if other.scheme_id != self.scheme_id:
            raise SchemeMismatchError("cannot add histograms from different schemes")
        return Histogram(self.scheme_id, self._counts + other._counts)

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, Histogram) and self.scheme_id == other.scheme_id
                and np.array_equal(self._counts, other._counts))

    def __hash__(self) -> int:
        return hash((self.scheme_id, self._counts.tobytes()))

    def __repr__(self) -> str:
        nz = {int(i): int(c) for i, c in enumerate(self._counts) if c}
        return f"Histogram({self.scheme_id}, total={self.total}, nonzero={nz})"


@dataclass(frozen=True)
class SignatureEntry:
    weight: float
    hist: Histogram
    count: int


@dataclass(frozen=True)
class DeviceSignature:
    device: DeviceId
    kind: ParameterKind
    scheme_id: str
    entries: Mapping[FrameTypeKey, SignatureEntry]

    @property
    def built_from(self) -> int:
        return sum(e.count for e in self.entries.values())

    @classmethod
    def from_histograms(cls, device: DeviceId, kind: ParameterKind, scheme_id: str,
                        hists: Mapping[FrameTypeKey, Histogram]) -> "DeviceSignature":
        """Weights follow from the per-frame-type observation counts."""
        grand = sum(h.total for h in hists.values())
        entries = {}
        for ftype in sorted(hists):
            h = hists[ftype]
            if h.scheme_id != scheme_id:
                raise SchemeMismatchError(f"histogram for {ftype} uses another scheme")
            if h.total == 0:
                continue
            entries[ftype] = SignatureEntry(h.total / grand, h, h.total)
        return cls(device, ParameterKind(kind), scheme_id, MappingProxyType(entries))


def build_signature(samples: Iterable[SampleSet], scheme: BinningScheme,
                    min_obs: int = 50) -> Optional[DeviceSignature]:
    """Signature of one device, or None with fewer than ``min_obs`` samples."""
    samples = list(samples)
    if not samples:
        return None
    device = samples[0].device
    for s in samples:
        if s.device != device:
            raise ValueError("samples from more than one device")
        if s.kind != scheme.kind:
            raise ValueError(f"sample kind {s.kind} does not match scheme kind {scheme.kind}")
    if sum(len(s) for s in samples) < min_obs:
        return None
    hists: dict[FrameTypeKey, Histogram] = {}
    for s in samples:
        if not s.values:
            continue
        h = Histogram.from_values(scheme, s.values)
        hists[s.ftype] = hists[s.ftype] + h if s.ftype in hists else h
    return DeviceSignature.from_histograms(device, scheme.kind, scheme.scheme_id, hists)


class ReferenceDatabase:
    """Reference signatures keyed by device, all on one binning scheme."""

    def __init__(self, scheme: BinningScheme, signatures: Iterable[DeviceSignature] = ()):
        sigs = {}
        for sig in signatures:
            if sig.scheme_id != scheme.scheme_id or sig.kind != scheme.kind:
                raise SchemeMismatchError(f"signature for {sig.device} uses another scheme")
            if sig.device in sigs:
                raise ValueError(f"duplicate reference {sig.device}")
            sigs[sig.device] = sig
        self._scheme = scheme
        self._sigs = MappingProxyType({d: sigs[d] for d in sorted(sigs)})

    @property
    def scheme(self) -> BinningScheme:
        return self._scheme

    @property
    def kind(self) -> ParameterKind:
        return self._scheme.kind

    @property
    def signatures(self) -> Mapping[DeviceId, DeviceSignature]:
        return self._sigs

    def devices(self) -> list[DeviceId]:
        return list(self._sigs)

    def __len__(self) -> int:
        return len(self._sigs)

    def __contains__(self, device: object) -> bool:
        return device in self._sigs

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, ReferenceDatabase) and self._scheme == other._scheme
                and dict(self._sigs) == dict(other._sigs))

    def to_json(self) -> dict:
        devices = []
        for dev, sig in self._sigs.items():
            devices.append({
                "mac": dev.mac,
                "entries": [
                    {"ftype": str(ft), "weight": e.weight, "counts": [int(c) for c in e.hist.counts]}
                    for ft, e in sig.entries.items()
                ],
            })
        return {
            "version": DB_VERSION,
            "kind": self.kind.value,
            "scheme": self._scheme.to_json(),
            "devices": devices,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, obj: Mapping) -> "ReferenceDatabase":
        if obj.get("version") != DB_VERSION:
            raise ValueError(f"unsupported database version {obj.get('version')!r}")
        scheme = BinningScheme.from_json(obj["scheme"])
        if ParameterKind(obj["kind"]) != scheme.kind:
            raise ValueError("database kind does not match its scheme")
        sigs = []
        for dev in obj["devices"]:
            hists = {}
            for e in dev["entries"]:
                counts = e["counts"]
                if len(counts) != scheme.n_bins:
                    raise ValueError(f"{dev['mac']} {e['ftype']}: expected {scheme.n_bins} counts")
                hists[FrameTypeKey.parse(e["ftype"])] = Histogram(scheme.scheme_id, counts)
            sigs.append(DeviceSignature.from_histograms(
                DeviceId.parse(dev["mac"]), scheme.kind, scheme.scheme_id, hists))
        return cls(scheme, sigs)

    @classmethod
    def loads(cls, text: str) -> "ReferenceDatabase":
        return cls.from_json(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "ReferenceDatabase":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())
