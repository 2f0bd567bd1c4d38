import json
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wifiprint.features import ParameterKind, SampleSet
from wifiprint.signature import (BinningScheme, DeviceSignature, Histogram, ReferenceDatabase,
                                 SchemeMismatchError, bin_index, build_signature, default_scheme)
from wifiprint.trace import DATA, RTS, DeviceId

from oracle import bin_of

IAT = ParameterKind.INTER_ARRIVAL_TIME
A = DeviceId.parse("00:00:00:00:00:01")
B = DeviceId.parse("00:00:00:00:00:02")
SMALL = BinningScheme(IAT, (0, 10, 20))


def samples(device, ftype, values, kind=IAT):
    return SampleSet(device, ftype, kind, list(values))


@pytest.mark.parametrize("value,expected", [(10, 1), (-3, 0), (10_000, 2), (0, 0), (9.999, 0), (20, 2)])
def test_bin_index_examples(value, expected):
    assert bin_index(SMALL, value) == expected


def test_bin_index_nan():
    with pytest.raises(ValueError):
        bin_index(SMALL, float("nan"))
    with pytest.raises(ValueError):
        Histogram.from_values(SMALL, [1.0, float("nan")])


@pytest.mark.parametrize("edges", [(0,), (0, 0), (5, 1), (0, float("inf"))])
def test_invalid_schemes(edges):
    with pytest.raises(ValueError):
        BinningScheme(IAT, edges)


def test_default_schemes():
    assert default_scheme(ParameterKind.FRAME_SIZE).n_bins == 148
    assert default_scheme(IAT).n_bins == 1001
    assert default_scheme(ParameterKind.MEDIUM_ACCESS_TIME).n_bins == 1001
    assert default_scheme(ParameterKind.TRANSMISSION_TIME).n_bins == 1001
    rate = default_scheme(ParameterKind.RATE)
    bins = [rate.bin_index(r) for r in (1, 2, 5.5, 6, 9, 11, 12, 18, 24, 36, 48, 54)]
    assert bins == list(range(12))
    assert rate.bin_index(300.0) == rate.n_bins - 1


def test_default_scheme_resolves_backoff_and_service_peaks():
    s = default_scheme(IAT)
    slots = [s.bin_index(28 + 9 * n) for n in range(8)]
    assert len(set(slots)) == 8
    assert s.bin_index(1200) - s.bin_index(950) >= 20


def test_scheme_id_is_stable_and_content_based():
    a = BinningScheme(IAT, (0, 10, 20))
    assert a.scheme_id == BinningScheme("inter_arrival_time", [0.0, 10.0, 20.0]).scheme_id
    assert a.scheme_id != BinningScheme(ParameterKind.RATE, (0, 10, 20)).scheme_id
    assert a.scheme_id != BinningScheme(IAT, (0, 10, 21)).scheme_id
    assert BinningScheme.from_json(a.to_json()) == a
    bad = dict(a.to_json(), id="0" * 16)
    with pytest.raises(ValueError):
        BinningScheme.from_json(bad)


def test_min_obs_gate():
    assert build_signature([samples(A, DATA, range(49))], SMALL, 50) is None
    assert build_signature([samples(A, DATA, range(50))], SMALL, 50) is not None
    assert build_signature([], SMALL, 1) is None


def test_weights_from_counts():
    sig = build_signature([samples(A, DATA, [5] * 80), samples(A, RTS, [15] * 20)], SMALL, 50)
    assert sig.entries[DATA].weight == 0.8
    assert sig.entries[RTS].weight == 0.2
    assert sig.built_from == 100


def test_degenerate_distribution():
    sig = build_signature([samples(A, DATA, [12.0] * 100)], SMALL, 50)
    assert list(sig.entries[DATA].hist.frequencies) == [0.0, 1.0, 0.0]


def test_mixed_inputs_rejected():
    with pytest.raises(ValueError):
        build_signature([samples(A, DATA, [1]), samples(B, DATA, [1])], SMALL, 1)
    with pytest.raises(ValueError):
        build_signature([samples(A, DATA, [1], kind=ParameterKind.RATE)], SMALL, 1)


def test_histogram_is_immutable():
    h = Histogram.from_values(SMALL, [1, 2, 15])
    with pytest.raises(ValueError):
        h.counts[0] = 9
    with pytest.raises(SchemeMismatchError):
        h + Histogram("other", [1, 1, 1])


values = st.lists(st.floats(-50, 12_000, allow_nan=False), min_size=1, max_size=200)


@settings(max_examples=100, deadline=None)
@given(values, st.randoms())
def test_permutation_invariance(vals, rnd):
    shuffled = list(vals)
    rnd.shuffle(shuffled)
    scheme = default_scheme(IAT)
    assert Histogram.from_values(scheme, vals) == Histogram.from_values(scheme, shuffled)


@settings(max_examples=100, deadline=None)
@given(values, values)
def test_additivity(a, b):
    scheme = default_scheme(IAT)
    assert (Histogram.from_values(scheme, a) + Histogram.from_values(scheme, b)
            == Histogram.from_values(scheme, a + b))


@settings(max_examples=100, deadline=None)
@given(values)
def test_matches_linear_bin_search(vals):
    edges = (0.0, 7.5, 100.0, 101.0, 5000.0)
    h = Histogram.from_values(BinningScheme(IAT, edges), vals)
    expected = [0] * len(edges)
    for v in vals:
        expected[bin_of(edges, v)] += 1
    assert list(h.counts) == expected


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([DATA, RTS]), st.floats(0, 30)), min_size=1, max_size=100))
def test_signature_invariants(pairs):
    sets = {}
    for ft, v in pairs:
        sets.setdefault(ft, []).append(v)
    sig = build_signature([samples(A, ft, v) for ft, v in sets.items()], SMALL, 1)
    assert sum(e.weight for e in sig.entries.values()) == pytest.approx(1.0, abs=1e-9)
    for e in sig.entries.values():
        assert int(e.hist.counts.sum()) == e.hist.total == e.count
        assert e.hist.frequencies.sum() == pytest.approx(1.0, abs=1e-9)
        assert ((e.hist.frequencies >= 0) & (e.hist.frequencies <= 1)).all()


def random_db(seed, scheme=None):
    rng = random.Random(seed)
    scheme = scheme or default_scheme(IAT)
    sigs = []
    for d in range(5):
        sets = [samples(DeviceId(d + 1), ft, [rng.uniform(0, 11_000) for _ in range(rng.randrange(1, 80))])
                for ft in (DATA, RTS)]
        sigs.append(build_signature(sets, scheme, 1))
    return ReferenceDatabase(scheme, reversed(sigs))


def test_database_json_round_trip(tmp_path):
    db = random_db(3)
    assert db.devices() == sorted(db.devices())
    path = tmp_path / "db.json"
    db.save(path)
    again = ReferenceDatabase.load(path)
    assert again == db
    assert again.dumps() == db.dumps() == random_db(3).dumps()
    obj = json.loads(db.dumps())
    assert obj["version"] == 1 and obj["scheme"]["id"] == db.scheme.scheme_id


def test_database_rejects_foreign_signatures():
    sig = build_signature([samples(A, DATA, [1] * 5)], SMALL, 1)
    with pytest.raises(SchemeMismatchError):
        ReferenceDatabase(default_scheme(IAT), [sig])
    with pytest.raises(ValueError):
        ReferenceDatabase(SMALL, [sig, sig])


def test_database_load_validation():
    obj = json.loads(random_db(1, SMALL).dumps())
    obj["devices"][0]["entries"][0]["counts"].append(0)
    with pytest.raises(ValueError):
        ReferenceDatabase.from_json(obj)
    with pytest.raises(ValueError):
        ReferenceDatabase.from_json(dict(obj, version=2))


def test_signature_from_histograms_skips_empty():
    sig = DeviceSignature.from_histograms(A, IAT, SMALL.scheme_id, {
        DATA: Histogram(SMALL.scheme_id, [1, 3, 0]),
        RTS: Histogram(SMALL.scheme_id, [0, 0, 0]),
    })
    assert list(sig.entries) == [DATA]
    np.testing.assert_allclose(sig.entries[DATA].hist.frequencies, [0.25, 0.75, 0])
