"""Decode classic pcap captures (radiotap or Prism link headers) into traces.

Only the radiotap TSFT, Flags and Rate fields are consumed. TSFT marks the
arrival of the first MPDU bit, so timestamps are moved to end of reception
by adding the frame's airtime.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import BinaryIO, Optional

from .trace import CanonicalTrace, DeviceId, FrameRecord, FrameType, FrameTypeKey

logger = logging.getLogger(__name__)

LINKTYPE_PRISM = 119
LINKTYPE_RADIOTAP = 127

_MAGIC_US = 0xA1B2C3D4
_MAGIC_NS = 0xA1B23C4D
_PCAPNG_MAGIC = 0x0A0D0D0A

# radiotap Flags field
FLAG_FCS_AT_END = 0x10
FLAG_BAD_FCS = 0x40

# 802.11 frame control, second octet
FC_RETRY = 0x08

_PRISM_ITEMS = ("hosttime", "mactime", "channel", "rssi", "sq", "signal",
                "noise", "rate", "istx", "frmlen")


class UnsupportedFormatError(ValueError):
    """Not a classic pcap file, or a link type other than radiotap/Prism."""


@dataclass(frozen=True)
class RadioMeta:
    tsft: Optional[int] = None
    rate: Optional[float] = None
    flags: int = 0

    @property
    def bad_fcs(self) -> bool:
        return bool(self.flags & FLAG_BAD_FCS)


@dataclass
class DecodeStats:
    """Per-file counters; ``total == decoded + skipped``."""

    total: int = 0
    decoded: int = 0
    bad_fcs: int = 0
    truncated: int = 0
    unsupported: int = 0
    malformed_headers: int = 0
    clamped: int = 0
    bad_fcs_kept: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def skipped(self) -> int:
        return self.bad_fcs + self.truncated + self.unsupported


class _Truncated(Exception):
    pass


def rate_from_radiotap(raw: int) -> Optional[float]:
    """Radiotap rate byte is in 500 kbps units; 0 means unknown."""
    return raw / 2.0 if raw else None


def parse_radiotap(buf: bytes) -> tuple[RadioMeta, int]:
    """Return the decoded fields and the radiotap header length."""
    if len(buf) < 8:
        raise _Truncated("radiotap header")
    version, _pad, length, present = struct.unpack_from("<BBHI", buf, 0)
    if version != 0:
        raise ValueError(f"unsupported radiotap version {version}")
    if length < 8 or length > len(buf):
        raise _Truncated("radiotap length")

    offset = 8
    word = present
    while word & 0x80000000:
        if offset + 4 > length:
            raise _Truncated("radiotap presence bitmap")
        (word,) = struct.unpack_from("<I", buf, offset)
        offset += 4

    # TSFT, Flags and Rate are the first three fields of the first bitmap,
    # so their offsets only depend on the size of the bitmap chain.
    tsft = rate = None
    flags = 0
    if present & 0x1:
        offset = (offset + 7) & ~7
        if offset + 8 > length:
            raise _Truncated("radiotap TSFT")
        (tsft,) = struct.unpack_from("<Q", buf, offset)
        offset += 8
    if present & 0x2:
        if offset + 1 > length:
            raise _Truncated("radiotap flags")
        flags = buf[offset]
        offset += 1
    if present & 0x4:
        if offset + 1 > length:
            raise _Truncated("radiotap rate")
        rate = rate_from_radiotap(buf[offset])
    return RadioMeta(tsft=tsft, rate=rate, flags=flags), length


def parse_prism(buf: bytes) -> tuple[RadioMeta, int]:
    """wlan-ng Prism header: msgcode, msglen, devname[16], then 10 items.

    Each item is ``did u32, status u16, len u16, data u32``; status 0 means
    the value is present. Host byte order, detected from ``msglen``.
    """
    if len(buf) < 144:
        raise _Truncated("prism header")
    endian = "<"
    (msglen,) = struct.unpack_from("<I", buf, 4)
    if msglen > 0xFFFF:
        endian = ">"
        (msglen,) = struct.unpack_from(">I", buf, 4)
    if msglen < 144 or msglen > len(buf):
        raise _Truncated("prism length")
    items = {}
    for i, name in enumerate(_PRISM_ITEMS):
        _did, status, _len, data = struct.unpack_from(endian + "IHHI", buf, 24 + 12 * i)
        if status == 0:
            items[name] = data
    rate = rate_from_radiotap(items["rate"]) if "rate" in items else None
    return RadioMeta(tsft=items.get("mactime"), rate=rate), msglen


def _needs_transmitter_addr(ftype: FrameTypeKey) -> bool:
    if ftype.type is FrameType.CONTROL:
        # RTS, PS-Poll, Block-ACK, Block-ACK-Req carry TA in Address 2.
        return ftype.subtype in (8, 9, 10, 11)
    return True


def frame_type_of(fc0: int) -> FrameTypeKey:
    ftype = (fc0 >> 2) & 0x3
    if ftype == 3:
        raise ValueError("reserved frame type 3")
    return FrameTypeKey(FrameType(ftype), (fc0 >> 4) & 0xF)


def required_header_len(ftype: FrameTypeKey) -> int:
    return 16 if _needs_transmitter_addr(ftype) else 10


def extract_transmitter(header: bytes, stats: Optional[DecodeStats] = None) -> Optional[DeviceId]:
    """Address 2 of the MAC header, or None for ACK/CTS and other frames
    without a transmitter address. Short headers yield None and bump
    ``stats.malformed_headers``."""
    if len(header) < 10:
        if stats is not None:
            stats.malformed_headers += 1
        return None
    try:
        ftype = frame_type_of(header[0])
    except ValueError:
        if stats is not None:
            stats.malformed_headers += 1
        return None
    if not _needs_transmitter_addr(ftype):
        return None
    if len(header) < 16:
        if stats is not None:
            stats.malformed_headers += 1
        return None
    return DeviceId.from_bytes(header[10:16])


def airtime_us(size: int, rate: float) -> int:
    """Whole microseconds needed to send ``size`` bytes at ``rate`` Mbps."""
    return math.ceil(Fraction(size * 8) / Fraction(rate))


def end_of_reception(meta: RadioMeta, pcap_ts: Optional[int], size: int,
                     rate: Optional[float]) -> int:
    if meta.tsft is not None:
        if rate is not None:
            return meta.tsft + airtime_us(size, rate)
        return meta.tsft
    if pcap_ts is None:
        raise ValueError("need a TSFT or a pcap timestamp")
    return pcap_ts


def _read_exact(stream: BinaryIO, n: int) -> bytes:
    data = stream.read(n)
    return data if data is not None else b""


def decode_pcap(stream: BinaryIO, keep_bad_fcs: bool = False) -> tuple[CanonicalTrace, DecodeStats]:
    """Decode every record of a classic pcap stream.

    Time base: when the first decoded frame carries TSFT, frame times are
    TSF microseconds and ``origin`` is the epoch time at which the TSF read
    zero; frames without TSFT then fall back to their pcap timestamps.
    Otherwise pcap timestamps are used throughout, relative to the first
    frame. Times that would go backwards are clamped to the previous frame.
    """
    head = _read_exact(stream, 24)
    if len(head) < 24:
        if len(head) >= 4 and struct.unpack("<I", head[:4])[0] == _PCAPNG_MAGIC:
            raise UnsupportedFormatError("pcapng is not supported; convert to classic pcap first")
        raise UnsupportedFormatError("file too short for a pcap header")
    for endian in ("<", ">"):
        (magic,) = struct.unpack(endian + "I", head[:4])
        if magic in (_MAGIC_US, _MAGIC_NS):
            break
    else:
        (magic,) = struct.unpack("<I", head[:4])
        if magic == _PCAPNG_MAGIC:
            raise UnsupportedFormatError("pcapng is not supported; convert to classic pcap first")
        raise UnsupportedFormatError(f"bad pcap magic {magic:#010x}")
    nanos = magic == _MAGIC_NS
    (linktype,) = struct.unpack_from(endian + "I", head, 20)
    linktype &= 0x0FFFFFFF
    if linktype == LINKTYPE_RADIOTAP:
        link_parser = parse_radiotap
    elif linktype == LINKTYPE_PRISM:
        link_parser = parse_prism
    else:
        raise UnsupportedFormatError(f"unsupported link type {linktype}")

    stats = DecodeStats()
    frames: list[FrameRecord] = []
    origin: Optional[int] = None
    use_tsft = False
    last_t = 0
    rec_fmt = endian + "IIII"

    while True:
        rec = _read_exact(stream, 16)
        if not rec:
            break
        if len(rec) < 16:
            stats.total += 1
            stats.truncated += 1
            stats.notes.append("truncated record header at end of file")
            break
        ts_sec, ts_frac, incl_len, orig_len = struct.unpack(rec_fmt, rec)
        data = _read_exact(stream, incl_len)
        stats.total += 1
        if len(data) < incl_len:
            stats.truncated += 1
            stats.notes.append("truncated record body at end of file")
            break
        pcap_us = ts_sec * 1_000_000 + (ts_frac // 1000 if nanos else ts_frac)

        try:
            meta, hdr_len = link_parser(data)
        except _Truncated:
            stats.truncated += 1
            continue
        except ValueError:
            stats.unsupported += 1
            continue
        if meta.bad_fcs and not keep_bad_fcs:
            stats.bad_fcs += 1
            continue

        mpdu = data[hdr_len:]
        size = orig_len - hdr_len
        if len(mpdu) < 2 or size < 1:
            stats.truncated += 1
            continue
        fc0, fc1 = mpdu[0], mpdu[1]
        if fc0 & 0x3:
            stats.unsupported += 1
            continue
        try:
            ftype = frame_type_of(fc0)
        except ValueError:
            stats.unsupported += 1
            continue
        if len(mpdu) < required_header_len(ftype):
            stats.truncated += 1
            continue
        sender = extract_transmitter(mpdu, stats)

        if origin is None:
            use_tsft = meta.tsft is not None
            origin = pcap_us - meta.tsft if use_tsft else pcap_us
        if not use_tsft:
            meta = RadioMeta(tsft=None, rate=meta.rate, flags=meta.flags)
        t_end = end_of_reception(meta, pcap_us - origin, size, meta.rate)
        if t_end < last_t:
            stats.clamped += 1
            t_end = last_t
        last_t = t_end

        if meta.bad_fcs:
            stats.bad_fcs_kept += 1
        frames.append(FrameRecord(
            t_end=t_end,
            size=size,
            rate=meta.rate,
            ftype=ftype,
            sender=sender,
            retry=bool(fc1 & FC_RETRY),
            fcs_ok=not meta.bad_fcs,
        ))
        stats.decoded += 1

    if stats.clamped:
        logger.warning("%d frame timestamps went backwards and were clamped", stats.clamped)
    return CanonicalTrace(tuple(frames), origin or 0), stats


def read_pcap(stream: BinaryIO, keep_bad_fcs: bool = False) -> CanonicalTrace:
    return decode_pcap(stream, keep_bad_fcs)[0]
