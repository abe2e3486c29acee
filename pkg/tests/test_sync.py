import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import direct_dft, oracle_sync
from stnsync.errors import DegenerateError, ShapeError
from stnsync.preprocess import BipolarSet
from stnsync.sync import (Spectrum, analysis_bins, dft, lag_series, phase_lag, select_pair,
                          sync_matrix, sync_measure)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def rotate(x, bins, angles):
    """Rotate the phase of the given DFT bins of a real signal."""
    X = np.fft.rfft(x)
    for k, th in zip(bins, angles):
        X[k] *= np.exp(-1j * th)
    return np.fft.irfft(X, len(x))


def two_tone(n=64, k=(3, 7), shifts=(0.0, 0.0)):
    t = np.arange(n)
    return sum(np.cos(2 * np.pi * kk * t / n + 0.4 * i + 0.25 + s) for i, (kk, s) in enumerate(zip(k, shifts)))


# --- dft ---------------------------------------------------------------------

def test_dft_cosine_bin():
    n, k = 64, 5
    spec = dft(2.5 * np.cos(2 * np.pi * k * np.arange(n) / n))
    assert abs(spec.a[k] - 2.5) < 1e-12 and abs(spec.b[k]) < 1e-12
    others = np.delete(spec.magnitude, k)
    assert others.max() < 1e-12


def test_dft_zero():
    spec = dft(np.zeros(64))
    assert np.all(spec.a == 0) and np.all(spec.b == 0)


def test_dft_matches_direct_sum_length_37():
    x = np.random.default_rng(37).standard_normal(37)
    a, b = direct_dft(x)
    spec = dft(x)
    np.testing.assert_allclose(spec.a, a, atol=1e-9)
    np.testing.assert_allclose(spec.b, b, atol=1e-9)


@given(st.integers(4, 300).flatmap(lambda n: arrays(np.float64, n, elements=finite)))
def test_dft_direct_oracle_and_synthesis(x):
    a, b = direct_dft(x)
    spec = dft(x)
    scale = 1.0 + np.abs(x).max()
    np.testing.assert_allclose(spec.a, a, atol=1e-9 * scale)
    np.testing.assert_allclose(spec.b, b, atol=1e-9 * scale)
    np.testing.assert_allclose(spec.synthesize(), x, atol=1e-9 * scale)


def test_dft_frequencies_and_bins():
    spec = dft(np.ones(10), sample_rate_hz=100.0)
    np.testing.assert_allclose(spec.freqs, [0, 10, 20, 30, 40, 50])
    assert list(analysis_bins(spec)) == [1, 2, 3, 4]
    assert list(analysis_bins(dft(np.ones(9)))) == [1, 2, 3, 4]
    assert list(analysis_bins(spec, (15.0, 40.0))) == [2, 3, 4]
    with pytest.raises(ShapeError):
        dft(np.ones(3))


# --- phase_lag ---------------------------------------------------------------

def single_bin(a, b):
    return Spectrum(np.array([0.0, a, 0.0]), np.array([0.0, b, 0.0]), 4)


def test_phase_lag_identical_bins():
    assert phase_lag(single_bin(1, 2), single_bin(1, 2), 1) == 0.0


def test_phase_lag_quadrature_is_skipped():
    assert phase_lag(single_bin(1, 0), single_bin(0, 1), 1) is None


def test_phase_lag_tangent_difference():
    th = 0.9
    s1 = single_bin(2 * np.cos(th), 2 * np.sin(th))
    s2 = single_bin(0.5 * np.cos(th - 0.3), 0.5 * np.sin(th - 0.3))
    assert abs(phase_lag(s1, s2, 1) - 0.309336) < 1e-6
    assert abs(phase_lag(s1, s2, 1) - np.tan(0.3)) < 1e-12


def test_phase_lag_is_pi_periodic():
    s1 = single_bin(1.0, 0.4)
    s2 = single_bin(0.3, -0.8)
    s3 = single_bin(-0.3, 0.8)  # phase shifted by pi
    assert phase_lag(s1, s2, 1) == phase_lag(s1, s3, 1)


# --- sync_measure ------------------------------------------------------------

@given(st.integers(8, 200).flatmap(lambda n: arrays(np.float64, n, elements=st.floats(-1e3, 1e3))))
def test_self_sync_is_one(x):
    assume(np.count_nonzero(np.abs(np.fft.rfft(x))[1:-1] > 1e-6 * np.abs(x).max()) >= 2)
    assert sync_measure(x, x)[0] == 1.0


def test_constant_rotation_gives_one():
    x = np.random.default_rng(0).standard_normal(128)
    bins = range(1, 64)
    y = rotate(x, bins, [0.3] * len(bins))
    score, lags = sync_measure(x, y)
    assert abs(score - 1.0) < 1e-12
    np.testing.assert_allclose(lags.pl, np.tan(0.3), atol=1e-12)


def test_two_tone():
    x = two_tone()
    y = two_tone(shifts=(0.2, 0.5))
    score, lags = sync_measure(x, y)
    assert list(lags.retained_bins) == [3, 7]
    np.testing.assert_allclose(lags.pl, [0.202710, 0.546302], atol=1e-6)
    np.testing.assert_allclose(lags.e, [0.343592], atol=1e-6)
    assert abs(score - 0.744274) < 1e-6
    assert abs(score - 1 / (1 + np.tan(0.5) - np.tan(0.2))) < 1e-12


@given(arrays(np.float64, 64, elements=finite), arrays(np.float64, 64, elements=finite))
def test_symmetry_and_range(x, y):
    try:
        s_xy = sync_measure(x, y)[0]
    except DegenerateError:
        return
    assert s_xy == sync_measure(y, x)[0]
    assert 0.0 < s_xy <= 1.0


dyadic = st.builds(lambda s, k: s * 2.0 ** k, st.sampled_from([-1.0, 1.0]), st.integers(-20, 20))


@given(arrays(np.float64, 64, elements=dyadic), arrays(np.float64, 64, elements=dyadic),
       st.sampled_from([-3.0, -1.0, 0.01, 7.0, 0.5, -1e5]), st.sampled_from([-3.0, -1.0, 0.01, 7.0, 2.0]))
def test_amplitude_invariance_bit_exact(x, y, a, b):
    """Exact when a*x and b*y are representable, which holds for signed powers of two."""
    try:
        ref = sync_measure(x, y)[0]
    except DegenerateError:
        with pytest.raises(DegenerateError):
            sync_measure(a * x, b * y)
        return
    assert sync_measure(a * x, b * y)[0] == ref


moderate = st.builds(lambda m, s: m * s, st.floats(1e-3, 1e3), st.sampled_from([-1.0, 1.0]))


@given(arrays(np.float64, 64, elements=moderate), arrays(np.float64, 64, elements=moderate),
       st.floats(1e-3, 1e3), st.booleans())
def test_amplitude_invariance_general(x, y, a, neg):
    """For arbitrary samples the rescaled input is itself rounded; agreement is then to rounding."""
    a = -a if neg else a
    try:
        s0 = sync_measure(x, y)[0]
    except DegenerateError:
        return
    assert abs(sync_measure(a * x, y)[0] - s0) < 1e-9


def test_oracle_random_pairs():
    rng = np.random.default_rng(64)
    for _ in range(50):
        x, y = rng.standard_normal(64), rng.standard_normal(64)
        score, lags = sync_measure(x, y)
        ref, kept, pl = oracle_sync(x, y)
        np.testing.assert_array_equal(lags.retained_bins, kept)
        np.testing.assert_allclose(lags.pl, pl, rtol=1e-9)
        assert abs(score - ref) < 1e-9


def test_oracle_with_band():
    rng = np.random.default_rng(5)
    x, y = rng.standard_normal(480), rng.standard_normal(480)
    score, lags = sync_measure(x, y, band_hz=(13.0, 30.0), sample_rate_hz=480.0)
    ref, kept, _ = oracle_sync(x, y, band_hz=(13.0, 30.0), fs=480.0)
    assert list(lags.retained_bins) == list(range(13, 31)) == list(kept)
    assert abs(score - ref) < 1e-9


def test_skips_are_reported_not_clamped():
    x = two_tone()
    y = two_tone(shifts=(np.pi / 2, 0.5))  # quadrature at bin 3
    lags = lag_series(dft(x), dft(y))
    assert (3, "denominator") in lags.skipped_bins
    assert (5, "magnitude") in lags.skipped_bins
    assert list(lags.retained_bins) == [7]
    with pytest.raises(DegenerateError, match="only 1 bins"):
        sync_measure(x, y)


def test_degenerate_and_shape_errors():
    with pytest.raises(DegenerateError):
        sync_measure(np.zeros(32), np.zeros(32))
    with pytest.raises(ShapeError):
        sync_measure(np.zeros(32), np.zeros(31))
    with pytest.raises(ShapeError):
        lag_series(dft(np.ones(8)), dft(np.ones(10)))


# --- sync_matrix -------------------------------------------------------------

def random_bipolar(seed, n=2048):
    rng = np.random.default_rng(seed)
    return BipolarSet(rng.standard_normal((3, n)), rng.standard_normal((3, n)), 256.0)


def test_copied_hemisphere_diagonal_ones():
    b = random_bipolar(0)
    rep = sync_matrix(BipolarSet(b.left, b.left.copy(), b.sample_rate_hz))
    assert np.all(np.diag(rep.matrix) == 1.0)
    assert np.all(rep.matrix[~np.eye(3, dtype=bool)] < 1.0)
    assert rep.selected == (0, 0)


def test_independent_noise_never_reaches_one():
    worst = max(sync_matrix(random_bipolar(s)).matrix.max() for s in range(20))
    assert worst < 1 - 1e-6


def test_selection_invariant_to_rescaling():
    rng = np.random.default_rng(3)
    n = 2048
    src = rng.standard_normal(n)
    left = rng.standard_normal((3, n))
    right = rng.standard_normal((3, n))
    left[1] += 3 * src
    right[2] += 3 * src
    rep = sync_matrix(BipolarSet(left, right, 256.0))
    assert rep.selected == (1, 2)
    scales = np.array([[4.0, -0.25, 1024.0], [2.0 ** -10, 2.0, -8.0]])
    rep2 = sync_matrix(BipolarSet(left * scales[0][:, None], right * scales[1][:, None], 256.0))
    assert rep2.selected == (1, 2)
    np.testing.assert_array_equal(rep.matrix, rep2.matrix)  # power-of-two factors are exact


def test_select_pair_tie_break():
    assert select_pair(np.ones((3, 3))) == (0, 0)
    m = np.zeros((3, 3))
    m[2, 0] = m[1, 2] = 0.5
    assert select_pair(m) == (1, 2)


def test_report_dict(small_prepared):
    d = small_prepared.sync.to_dict()
    assert d["selected"] == [2, 1] and d["selected_names"] == ["L2-3", "R1-2"]
    assert d["band_hz"] == [13.0, 30.0]
    assert len(d["matrix"]) == 3 and all(len(r) == 3 for r in d["skipped_bins"])
