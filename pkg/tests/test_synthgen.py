import json

import pytest

from wifiprint.features import ParameterKind, extract_samples, frame_values
from wifiprint.signature import Histogram, default_scheme
from wifiprint.synthgen import (BackoffModel, ChannelModel, DataSource, DeviceProfile, PortableRng,
                                RatePolicy, Service, ScenarioError, airtime, generate,
                                generate_annotated, load_scenario, profile_library,
                                scenario_from_json, whole_us_size)
from wifiprint.trace import (ACK, CTS, DATA, NULL_DATA, RTS, DeviceId, write_canonical)

A = DeviceId.parse("02:00:00:00:01:01")
B = DeviceId.parse("02:00:00:00:01:02")
CH = ChannelModel()


def test_portable_rng_is_reproducible():
    a, b = PortableRng(7, 0), PortableRng(7, 0)
    xs = [a.random() for _ in range(100)]
    assert xs == [b.random() for _ in range(100)]
    assert all(0.0 <= x < 1.0 for x in xs)
    assert xs != [PortableRng(7, 1).random() for _ in range(100)]
    r = PortableRng(1)
    assert {r.integer(-2, 2) for _ in range(500)} == {-2, -1, 0, 1, 2}


def test_whole_microsecond_sizes():
    assert whole_us_size(1500, 54.0) == 1512
    assert airtime(1512, 54.0) == 224
    assert whole_us_size(100, 1.0) == 100
    assert whole_us_size(14, 2.0) == 14
    with pytest.raises(ValueError):
        airtime(1500, 54.0)


def test_same_seed_same_trace():
    profiles = [p.with_id(DeviceId(i + 1)) for i, p in enumerate(profile_library().values())]
    t1 = generate(profiles, CH, 300_000, seed=11)
    t2 = generate(profiles, CH, 300_000, seed=11)
    assert write_canonical(t1) == write_canonical(t2)
    assert write_canonical(t1) != write_canonical(generate(profiles, CH, 300_000, seed=12))


def test_service_peak_at_950():
    prof = DeviceProfile(A, services=(Service(period=950, size=100),))
    trace = generate([prof], CH, 2_000_000, seed=1)
    scheme = default_scheme(ParameterKind.INTER_ARRIVAL_TIME)
    (s,) = extract_samples(trace, ParameterKind.INTER_ARRIVAL_TIME)
    counts = Histogram.from_values(scheme, s.values).counts
    assert int(counts.argmax()) == scheme.bin_index(950)
    assert counts.max() == len(s.values) > 2000


def rts_trace(size):
    prof = DeviceProfile(A, rts_threshold=2000, data=DataSource(interval=0, sizes=(size,)))
    return generate([prof], CH, 200_000, seed=3)


def test_rts_threshold_not_exceeded():
    trace = rts_trace(1500)
    kinds = {f.ftype for f in trace.frames}
    assert RTS not in kinds and CTS not in kinds
    assert kinds == {DATA, ACK}


def test_rts_threshold_exceeded():
    trace = rts_trace(2400)
    frames = trace.frames
    datas = [i for i, f in enumerate(frames) if f.ftype == DATA]
    assert len(datas) > 10
    for i in datas:
        assert frames[i - 2].ftype == RTS and frames[i - 1].ftype == CTS
        start = frames[i].t_end - airtime(frames[i].size, frames[i].rate)
        assert start - frames[i - 1].t_end == CH.sifs


def test_contention_free_frames_wait_exactly_sifs():
    lib = profile_library()
    profiles = [lib["rts-2000"].with_id(A), lib["backoff-standard"].with_id(B)]
    trace, access = generate_annotated(profiles, CH, 500_000, seed=2)
    mat = frame_values(trace, ParameterKind.MEDIUM_ACCESS_TIME)
    sifs = [m for m, a in zip(mat, access) if a.mode == "sifs"]
    assert len(sifs) > 100 and set(sifs) == {float(CH.sifs)}


def test_backoff_frames_follow_slot_grid():
    prof = DeviceProfile(A, backoff=BackoffModel(cw_slots=4, extra_pre_slot=True),
                         data=DataSource(interval=0, sizes=(1500,)))
    trace, access = generate_annotated([prof], CH, 300_000, seed=4)
    mat = frame_values(trace, ParameterKind.MEDIUM_ACCESS_TIME)
    seen = {int(m) for m, a in zip(mat, access) if a.mode == "backoff"}
    assert seen == {CH.difs + n * CH.slot for n in (-1, 0, 1, 2, 3)}


def test_generated_traces_are_valid_and_non_overlapping():
    profiles = [p.with_id(DeviceId(i + 1)) for i, p in enumerate(profile_library().values())]
    trace = generate(profiles, ChannelModel(collision_prob=0.1), 1_000_000, seed=5)
    prev_end = -1
    for f in trace.frames:
        start = f.t_end - airtime(f.size, f.rate)
        assert start > prev_end
        prev_end = f.t_end
    assert all(f.sender is None for f in trace.frames if f.ftype in (ACK, CTS))
    assert any(f.retry for f in trace.frames)
    assert trace.duration < 1_000_000


def test_preset_library():
    lib = profile_library()
    assert len(lib) >= 6
    assert lib["backoff-extra-slot"].backoff.extra_pre_slot
    assert lib["rate-switcher"].rate_policy.switch_prob == 0.3
    assert lib["null-beacon"].null_frame_period == 100_000


def test_null_beacon_period():
    prof = profile_library()["null-beacon"].with_id(A)
    trace = generate([prof], CH, 1_000_000, seed=9)
    nulls = [f.t_end for f in trace.frames if f.ftype == NULL_DATA]
    assert len(nulls) == 10
    gaps = [b - a for a, b in zip(nulls, nulls[1:])]
    assert all(abs(g - 100_000) < 2_000 for g in gaps)


def test_rate_switcher_uses_several_rates():
    prof = profile_library()["rate-switcher"].with_id(A)
    rates = {f.rate for f in generate([prof], CH, 2_000_000, seed=1).frames if f.sender}
    assert rates == {54.0, 48.0, 36.0, 24.0}


@pytest.mark.parametrize("kwargs", [dict(sifs=30), dict(slot=0), dict(collision_prob=1.0),
                                    dict(ack_size=15, ack_rate=6.0)])
def test_channel_validation(kwargs):
    with pytest.raises(ScenarioError):
        ChannelModel(**kwargs)


def test_profile_validation():
    with pytest.raises(ScenarioError):
        DeviceProfile(A, rts_threshold=3000)
    with pytest.raises(ScenarioError):
        RatePolicy(rates=(54.0, 11.0), weights=(1.0,))
    with pytest.raises(ScenarioError):
        Service(period=100, jitter=100)
    with pytest.raises(ScenarioError):
        generate([DeviceProfile(A), DeviceProfile(A)], CH, 10, 0)
    with pytest.raises(ScenarioError):
        generate([DeviceProfile(A)], CH, 0, 0)


SCENARIO = {
    "duration_us": 200_000,
    "seed": 4,
    "channel": {"sifs": 10, "difs": 28},
    "devices": [
        {"mac": "02:00:00:00:01:01", "preset": "rts-2000"},
        {"mac": "02:00:00:00:01:02", "services": [{"period": 950, "size": 60}], "data": None},
    ],
}


def test_scenario_round_trip(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps(SCENARIO))
    sc = load_scenario(path)
    assert sc.profiles[0].rts_threshold == 2000 and sc.profiles[0].id == A
    assert sc.profiles[1].services[0].period == 950
    assert write_canonical(sc.generate()) == write_canonical(scenario_from_json(SCENARIO).generate())


@pytest.mark.parametrize("patch,path", [
    (lambda s: s.update(duration_us=0), "duration_us"),
    (lambda s: s.pop("duration_us"), "duration_us"),
    (lambda s: s["devices"][1]["services"][0].update(period=-5), "devices[1].services[0].period"),
    (lambda s: s["devices"][0].update(preset="nope"), "devices[0].preset"),
    (lambda s: s["devices"][0].update(mac="zz"), "devices[0].mac"),
    (lambda s: s["devices"][1].update(colour="red"), "devices[1].colour"),
    (lambda s: s["channel"].update(sifs="ten"), "channel.sifs"),
    (lambda s: s["devices"][0].update(rate_policy={"rates": [54, "x"]}), "devices[0].rate_policy.rates[1]"),
])
def test_scenario_errors_name_the_field(patch, path):
    bad = json.loads(json.dumps(SCENARIO))
    patch(bad)
    with pytest.raises(ScenarioError) as exc:
        scenario_from_json(bad)
    assert exc.value.path == path


def test_invalid_json_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{")
    with pytest.raises(ScenarioError):
        load_scenario(path)
