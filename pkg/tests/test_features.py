from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from wifiprint.features import (ParameterKind, extract_samples, frame_values, group_by_device,
                                samples_csv, transmission_duration)
from wifiprint.trace import (ACK, CTS, DATA, RTS, CanonicalTrace, DeviceId, FrameRecord,
                             FrameType, FrameTypeKey)

A = DeviceId.parse("00:00:00:00:00:0a")
C = DeviceId.parse("00:00:00:00:00:0c")


@pytest.fixture
def fig1():
    """DATA0 by A, ACK1, DATA2 by A, ACK3, RTS4 by C, CTS5."""
    return CanonicalTrace((
        FrameRecord(100, 1500, 54.0, DATA, A),
        FrameRecord(130, 14, 2.0, ACK),
        FrameRecord(500, 1000, 36.0, DATA, A),
        FrameRecord(530, 14, 2.0, ACK),
        FrameRecord(700, 20, 6.0, RTS, C),
        FrameRecord(730, 14, 2.0, CTS),
    ))


def as_dict(samples):
    return {(s.device, s.ftype): s.values for s in samples}


def test_fig1_inter_arrival_attribution(fig1):
    got = as_dict(extract_samples(fig1, ParameterKind.INTER_ARRIVAL_TIME))
    # f0 has no predecessor; ACK and CTS values are dropped
    assert got == {(A, DATA): [500 - 130], (C, RTS): [700 - 530]}


def test_fig1_rate_attribution(fig1):
    got = as_dict(extract_samples(fig1, ParameterKind.RATE))
    assert got == {(A, DATA): [54.0, 36.0], (C, RTS): [6.0]}


def test_fig1_medium_access(fig1):
    got = as_dict(extract_samples(fig1, ParameterKind.MEDIUM_ACCESS_TIME))
    assert got[(A, DATA)] == [500 - 130 - 1000 * 8 / 36]
    assert got[(C, RTS)] == [700 - 530 - 20 * 8 / 6]


def test_single_frame_has_no_inter_arrival():
    trace = CanonicalTrace((FrameRecord(5, 100, 1.0, DATA, A),))
    tally = Counter()
    assert extract_samples(trace, ParameterKind.INTER_ARRIVAL_TIME, tally) == []
    assert tally == {"no_predecessor": 1}


def test_transmission_duration_examples():
    assert transmission_duration(1500, 54.0) == pytest.approx(222.22, abs=0.01)
    assert transmission_duration(2346, 1.0) == 18768
    for r in (0.5, 1.0, 5.5, 54.0, 600.0):
        assert transmission_duration(1, r) == 8 / r


@pytest.mark.parametrize("rate", [0.0, -1.0])
def test_transmission_duration_domain(rate):
    with pytest.raises(ValueError):
        transmission_duration(100, rate)


def test_missing_rate_is_skipped_and_tallied():
    trace = CanonicalTrace((FrameRecord(10, 100, None, DATA, A), FrameRecord(20, 100, None, DATA, A)))
    tally = Counter()
    assert extract_samples(trace, ParameterKind.TRANSMISSION_TIME, tally) == []
    assert tally == {"no_rate": 2}
    assert len(extract_samples(trace, ParameterKind.FRAME_SIZE)[0]) == 2


def test_negative_medium_access_clamps_to_zero():
    trace = CanonicalTrace((FrameRecord(10, 100, 1.0, ACK), FrameRecord(20, 1500, 1.0, DATA, A)))
    assert frame_values(trace, ParameterKind.MEDIUM_ACCESS_TIME) == [None, 0.0]


def test_output_order_and_csv():
    trace = CanonicalTrace((
        FrameRecord(1, 10, 1.0, RTS, C),
        FrameRecord(2, 20, 1.0, DATA, C),
        FrameRecord(3, 30, 1.0, DATA, A),
    ))
    samples = extract_samples(trace, "frame_size")
    assert [(s.device, s.ftype) for s in samples] == [(A, DATA), (C, RTS), (C, DATA)]
    assert list(group_by_device(samples)) == [A, C]
    assert samples_csv(samples).splitlines() == [
        "device,ftype,kind,value",
        "00:00:00:00:00:0a,data/0,frame_size,30.0",
        "00:00:00:00:00:0c,ctrl/11,frame_size,10.0",
        "00:00:00:00:00:0c,data/0,frame_size,20.0",
    ]


@st.composite
def traces(draw):
    n = draw(st.integers(0, 60))
    senders = [None, A, C, DeviceId(7)]
    ftypes = [DATA, ACK, RTS, CTS, FrameTypeKey(FrameType.MANAGEMENT, 8)]
    t, frames = 0, []
    for _ in range(n):
        t += draw(st.integers(0, 3000))
        frames.append(FrameRecord(
            t, draw(st.integers(1, 2346)),
            draw(st.sampled_from([None, 1.0, 2.0, 5.5, 11.0, 54.0])),
            draw(st.sampled_from(ftypes)), draw(st.sampled_from(senders))))
    return CanonicalTrace(tuple(frames))


@settings(max_examples=150, deadline=None)
@given(traces(), st.sampled_from(list(ParameterKind)))
def test_conservation(trace, kind):
    tally = Counter()
    samples = extract_samples(trace, kind, tally)
    with_sender = sum(1 for f in trace.frames if f.sender is not None)
    assert sum(len(s) for s in samples) + sum(tally.values()) == with_sender


@settings(max_examples=150, deadline=None)
@given(traces())
def test_value_ranges_and_timing_identity(trace):
    iat = frame_values(trace, ParameterKind.INTER_ARRIVAL_TIME)
    mat = frame_values(trace, ParameterKind.MEDIUM_ACCESS_TIME)
    tt = frame_values(trace, ParameterKind.TRANSMISSION_TIME)
    for i, f in enumerate(trace.frames):
        if iat[i] is not None:
            assert iat[i] >= 0
        if tt[i] is not None:
            assert tt[i] > 0
        if mat[i] is not None:
            assert mat[i] >= 0
            if iat[i] >= tt[i]:
                assert iat[i] == mat[i] + tt[i]
            else:
                assert mat[i] == 0.0
