import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import bin_scalar, half_bits_by_hand, half_round, preprocess_dense
from xcorrsim.halfprec import HALF_TO_F32, half_bits, to_half
from xcorrsim.spectra import (
    BinnedSpectrum,
    PreprocessedSpectrum,
    RawSpectrum,
    bin_spectrum,
    decode_csr,
    encode_csr,
    format_spectra,
    iter_spectra,
    preprocess,
    preprocess_values,
)


def binned(pairs, pid="s", prec=500.0):
    return BinnedSpectrum.from_pairs(pid, prec, pairs)


# -- binning -------------------------------------------------------------------


def test_bin_empty():
    s = bin_spectrum(RawSpectrum.from_peaks("e", 100.0, []), 1.0)
    assert s.pairs == []


def test_bin_single_peak():
    s = bin_spectrum(RawSpectrum.from_peaks("a", 100.0, [(100.4, 10.0)]), 1.0)
    assert s.pairs == [(100, 10.0)]


def test_bin_collision_keeps_max():
    raw = RawSpectrum.from_peaks("a", 100.0, [(100.2, 3.0), (100.8, 5.0)])
    assert bin_spectrum(raw, 1.0).pairs == bin_scalar(raw.peaks, 1.0) == [(100, 5.0)]


def test_bin_overflow():
    raw = RawSpectrum.from_peaks("a", 100.0, [(65536.0, 1.0)])
    with pytest.raises(OverflowError):
        bin_spectrum(raw, 1.0)


def test_bin_matches_scalar_rule_on_random_peaks():
    rng = np.random.default_rng(3)
    for _ in range(50):
        mz = np.unique(np.round(rng.uniform(50, 3000, 80), 3))
        inten = np.round(rng.uniform(0, 200, mz.size), 3)
        raw = RawSpectrum("r", 900.0, mz, inten)
        for width in (1.0, 0.5, 1.0005):
            assert bin_spectrum(raw, width).pairs == bin_scalar(raw.peaks, width)


def test_raw_spectrum_invariants():
    with pytest.raises(ValueError):
        RawSpectrum.from_peaks("a", 100.0, [(2.0, 1.0), (1.0, 1.0)])
    with pytest.raises(ValueError):
        RawSpectrum.from_peaks("a", 100.0, [(1.0, -1.0)])
    with pytest.raises(ValueError):
        RawSpectrum.from_peaks("a", 0.0, [])


def test_binned_rejects_unsorted():
    with pytest.raises(ValueError):
        binned([(5, 1.0), (5, 2.0)])


# -- half precision ------------------------------------------------------------


def test_half_table_against_hand_decoder():
    for bits in [0x0000, 0x0001, 0x03FF, 0x0400, 0x3C00, 0x3C01, 0x7BFF, 0x8001, 0xC000]:
        assert HALF_TO_F32[bits] == struct.unpack("<e", struct.pack("<H", bits))[0]


@given(st.floats(min_value=-65504, max_value=65504, allow_nan=False))
def test_half_rounding_matches_hand_encoder(x):
    assert int(half_bits(to_half([x]))[0]) == half_bits_by_hand(x)


def test_half_overflow():
    with pytest.raises(OverflowError):
        to_half([70000.0])


# -- preprocessing -------------------------------------------------------------


def test_preprocess_zero():
    assert preprocess(binned([])).pairs == []


def test_preprocess_single_interior_bin():
    out = dict(preprocess(binned([(100, 151.0)])).pairs)
    expect = {i: -1.0 for i in range(25, 176)}
    expect[100] = 150.0
    assert out == expect


def test_preprocess_left_boundary():
    out = dict(preprocess(binned([(10, 151.0)])).pairs)
    expect = {i: -1.0 for i in range(0, 86)}
    expect[10] = 150.0
    assert out == expect


def test_preprocess_right_boundary():
    out = dict(preprocess(binned([(65530, 151.0)])).pairs)
    expect = {i: -1.0 for i in range(65455, 65536)}
    expect[65530] = 150.0
    assert out == expect


def random_binned(rng, lo=0, hi=65536, n=None):
    n = n if n is not None else int(rng.integers(1, 120))
    bins = np.sort(rng.choice(np.arange(lo, hi), size=n, replace=False))
    vals = to_half(rng.uniform(0, 1000, n) * rng.choice([1e-3, 1.0], n))
    return BinnedSpectrum("r", 500.0, bins, vals)


@pytest.mark.parametrize("exclude", [False, True])
def test_preprocess_matches_dense_oracle(exclude):
    rng = np.random.default_rng(11 + exclude)
    for k in range(100):
        if k % 4 == 0:
            s = random_binned(rng, 0, 300)
        elif k % 4 == 1:
            s = random_binned(rng, 65236, 65536)
        else:
            s = random_binned(rng)
        got = preprocess(s, exclude)
        idx, vals = preprocess_dense(s.pairs, exclude)
        assert np.array_equal(got.bins.astype(np.int64), idx)
        assert np.array_equal(got.intensities.view(np.uint16), vals.view(np.uint16))


def test_preprocess_linearity():
    rng = np.random.default_rng(5)
    for _ in range(30):
        bins = np.sort(rng.choice(np.arange(200, 2000), 40, replace=False))
        small = rng.integers(1, 64, 40).astype(np.float64)  # small integers: exact in f32 and half
        a = BinnedSpectrum("a", 500.0, bins, small)
        b = BinnedSpectrum("b", 500.0, bins, 2 * small)
        pa, va = preprocess_values(a)
        pb, vb = preprocess_values(b)
        assert np.array_equal(pa, pb)
        assert np.array_equal(vb, 2 * va)


@pytest.mark.parametrize("value", [151.0, 3.0, 0.5, 1000.0])
def test_window_sum_conservation(value):
    pos, vals = preprocess_values(binned([(4000, value)]))
    assert pos.size == 151
    total = np.sum(vals.astype(np.float64))
    # exactly zero before rounding, up to the float32 representation of v/151
    assert abs(total) <= 151 * np.spacing(np.float32(value / 151)) + np.spacing(np.float32(value))


def test_preprocessed_type_and_support():
    s = binned([(300, 10.0), (305, 4.0)])
    p = preprocess(s)
    assert isinstance(p, PreprocessedSpectrum)
    assert set(p.bins.tolist()) <= set(range(225, 381))
    assert np.all(np.diff(p.bins.astype(np.int64)) > 0)


# -- CSR -------------------------------------------------------------------------


def test_encode_empty():
    assert encode_csr(binned([])) == b""


def test_encode_one_entry():
    blob = encode_csr(binned([(1, 1.0)]))
    assert blob == bytes([0x01, 0x00, 0x00, 0x3C])
    assert blob[2:] == struct.pack("<e", 1.0)
    assert half_bits_by_hand(1.0) == 0x3C00


@given(
    st.lists(
        st.tuples(st.integers(0, 65535), st.floats(-65504, 65504, allow_nan=False, width=16)),
        max_size=200,
        unique_by=lambda p: p[0],
    )
)
def test_csr_round_trip(pairs):
    s = binned(sorted(pairs))
    back = decode_csr(encode_csr(s), s.id, s.precursor_mass)
    assert back == s
    assert len(encode_csr(s)) == 4 * len(pairs)


def test_csr_round_trip_preprocessed():
    s = preprocess(binned([(100, 151.0), (130, 2.5)]))
    back = decode_csr(encode_csr(s), s.id, s.precursor_mass, cls=PreprocessedSpectrum)
    assert back == s


# -- text format -------------------------------------------------------------------


def test_spectrum_file_round_trip():
    a = RawSpectrum.from_peaks("scan1", 812.25, [(100.5, 3.0), (200.25, 0.125)])
    b = RawSpectrum.from_peaks("scan2", 900.0, [])
    text = format_spectra([a, b])
    assert text.startswith("S scan1 812.25\n100.5 3.0\n")
    back = list(iter_spectra(text.splitlines()))
    assert [s.id for s in back] == ["scan1", "scan2"]
    assert back[0].peaks == a.peaks
    assert back[1].peaks == []


def test_spectrum_file_errors():
    with pytest.raises(ValueError):
        list(iter_spectra(["100.0 1.0"]))
    with pytest.raises(ValueError):
        list(iter_spectra(["S only_id"]))


def test_half_round_helper_agrees_with_numpy():
    for x in (0.1, 1e-5, 3.14159, 65504.0, -2.5e-7):
        assert half_round(x) == float(np.float16(x))
