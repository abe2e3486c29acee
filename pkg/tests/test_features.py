import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import direct_morlet
from stnsync.errors import ConfigError, DegenerateError, LabelError, ShapeError
from stnsync.features import (FeatureMatrix, SpectrogramConfig, assemble_pair_features,
                              downsample_time, morlet_spectrogram, morlet_wavelet, pca_fit,
                              pca_transform)
from stnsync.pipeline import PipelineConfig, prepare

CFG = SpectrogramConfig()


def test_default_grid():
    assert CFG.freqs_hz == tuple(float(f) for f in range(13, 31))
    with pytest.raises(ConfigError):
        SpectrogramConfig(freqs_hz=(10.0, 20.0))
    with pytest.raises(ConfigError):
        SpectrogramConfig(freqs_hz=(20.0, 14.0))
    with pytest.raises(ConfigError):
        SpectrogramConfig(wavelet_cycles=2)


def test_wavelet_unit_energy():
    w = morlet_wavelet(20.0, 4800.0)
    assert abs(np.sum(np.abs(w) ** 2) - 1.0) < 1e-12
    assert w.shape[0] % 2 == 1


def test_morlet_matches_direct_convolution():
    rng = np.random.default_rng(0)
    fs = 1000.0
    for _ in range(2):
        x = rng.standard_normal(2000)
        spec = morlet_spectrogram(x, CFG, fs)
        for k, f in enumerate(CFG.freqs_hz):
            ref = direct_morlet(x, f, fs)
            assert np.max(np.abs(spec[k] - ref)) <= 1e-6 * np.max(np.abs(ref))


def test_morlet_20hz_ridge():
    fs = 4800.0
    x = np.cos(2 * np.pi * 20.0 * np.arange(9600) / fs)
    spec = morlet_spectrogram(x, CFG, fs)
    row = CFG.freqs_hz.index(20.0)
    half = morlet_wavelet(13.0, fs).shape[0] // 2
    assert np.all(np.argmax(spec[:, half:-half], axis=0) == row)


def test_morlet_zero_and_homogeneous():
    rng = np.random.default_rng(1)
    assert np.all(morlet_spectrogram(np.zeros(4000), CFG, 1000.0) == 0)
    x = rng.standard_normal(4000)
    np.testing.assert_allclose(morlet_spectrogram(2 * x, CFG, 1000.0),
                               2 * morlet_spectrogram(x, CFG, 1000.0), rtol=1e-12, atol=1e-12)


def test_morlet_stack_matches_single():
    rng = np.random.default_rng(2)
    stack = rng.standard_normal((3, 2500))
    out = morlet_spectrogram(stack, CFG, 1000.0)
    assert out.shape == (3, 18, 2500)
    np.testing.assert_allclose(out[1], morlet_spectrogram(stack[1], CFG, 1000.0), atol=1e-12)
    with pytest.raises(ShapeError):
        morlet_spectrogram(np.zeros(100), CFG, 1000.0)


def test_assemble_pair_features():
    rng = np.random.default_rng(3)
    l, r = rng.random((18, 96)), rng.random((18, 96))
    v = assemble_pair_features(l, r)
    assert v.shape == (3456,)
    assert np.all(assemble_pair_features(np.zeros((18, 96)), r)[:1728] == 0)
    w = assemble_pair_features(r, l)
    np.testing.assert_array_equal(np.concatenate([w[1728:], w[:1728]]), v)
    with pytest.raises(ShapeError):
        assemble_pair_features(l, r[:, :95])


def test_downsample_examples():
    row = np.arange(1, 201, dtype=float)[None, :]
    np.testing.assert_array_equal(downsample_time(row, 100), [[50.5, 150.5]])
    c = np.full((18, 9600), 3.25)
    np.testing.assert_array_equal(downsample_time(c, 100), np.full((18, 96), 3.25))
    x = np.random.default_rng(4).random((4, 7))
    np.testing.assert_array_equal(downsample_time(x, 1), x)


@given(st.integers(0, 6), st.integers(0, 4), st.integers(1, 4), st.data())
def test_downsample_preserves_row_means_exactly(log_factor, log_blocks, rows, data):
    """Bit-exact when every division is by a power of two (integer samples)."""
    factor, n = 2 ** log_factor, 2 ** (log_factor + log_blocks)
    x = data.draw(arrays(np.float64, (rows, n), elements=st.integers(-2**20, 2**20).map(float)))
    np.testing.assert_array_equal(downsample_time(x, factor).mean(axis=-1), x.mean(axis=-1))


@given(st.sampled_from([3, 5, 7, 10, 12, 100]), st.integers(1, 8), st.data())
def test_downsample_row_means_match_exact_arithmetic(factor, blocks, data):
    from fractions import Fraction
    x = data.draw(arrays(np.float64, (2, factor * blocks), elements=st.floats(-1e3, 1e3)))
    got = downsample_time(x, factor).mean(axis=-1)
    for g, row in zip(got, x):
        exact = sum(Fraction(v) for v in row) / len(row)
        scale = max(np.abs(row).max(), 1e-300)
        assert abs(Fraction(g) - exact) <= 8 * np.finfo(float).eps * scale


def test_downsample_trailing_cells_warn():
    with pytest.warns(UserWarning, match="dropping 5"):
        out = downsample_time(np.ones((2, 105)), 10)
    assert out.shape == (2, 10)
    with pytest.raises(ConfigError):
        downsample_time(np.ones((2, 10)), 0)
    with pytest.raises(ShapeError):
        downsample_time(np.ones((2, 10)), 11)


# --- PCA ---------------------------------------------------------------------

def test_pca_rank_one_line():
    rng = np.random.default_rng(5)
    direction = rng.standard_normal(5)
    rows = np.outer(rng.standard_normal(30), direction) + 2.0
    m = pca_fit(rows)
    assert m.n_components == 1
    assert abs(m.explained_fraction - 1.0) < 1e-12
    assert abs(abs(m.components[0] @ direction) / np.linalg.norm(direction) - 1) < 1e-12


def test_pca_isotropic_2d_against_closed_form():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((400, 2))
    m = pca_fit(X, 0.95)
    c = np.cov(X.T)
    tr, det = c[0, 0] + c[1, 1], c[0, 0] * c[1, 1] - c[0, 1] ** 2
    disc = np.sqrt(tr * tr / 4 - det)
    np.testing.assert_allclose(m.eigenvalues, [tr / 2 + disc, tr / 2 - disc], rtol=1e-12)
    assert m.eigenvalues[0] / tr < 0.95
    assert m.n_components == 2


def test_pca_duplicated_rows():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((20, 6)) @ rng.standard_normal((6, 6))
    a, b = pca_fit(X, 0.9), pca_fit(np.vstack([X, X]), 0.9)
    assert a.n_components == b.n_components
    np.testing.assert_allclose(b.components, a.components, atol=1e-10)
    np.testing.assert_allclose(b.eigenvalues, a.eigenvalues * 2 * 19 / 39, rtol=1e-10)


@given(st.integers(3, 25), st.integers(2, 12), st.integers(0, 2**31))
def test_pca_invariants(n, d, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d)) * rng.uniform(0.1, 5, d)
    m = pca_fit(X, 0.95)
    k = m.n_components
    np.testing.assert_allclose(m.components @ m.components.T, np.eye(k), atol=1e-9)
    assert m.explained_fraction >= 0.95 - 1e-12
    assert np.all(pca_transform(m, m.mean) == 0)
    np.testing.assert_allclose(pca_transform(m, m.mean + m.components[0]), np.eye(k)[0], atol=1e-9)
    # reconstruction error on training rows equals the discarded variance
    Z = m.transform(X)
    err = np.sum((X - m.mean - Z @ m.components) ** 2) / (n - 1)
    total = np.sum(m.eigenvalues)
    assert err <= (1 - m.explained_fraction) * total + 1e-9 * total


def test_pca_errors():
    with pytest.raises(DegenerateError):
        pca_fit(np.ones((1, 3)))
    with pytest.raises(DegenerateError):
        pca_fit(np.ones((5, 3)))
    m = pca_fit(np.random.default_rng(0).random((5, 3)))
    with pytest.raises(ShapeError):
        m.transform(np.ones(4))


# --- feature matrices --------------------------------------------------------

def test_feature_matrix_csv_round_trip():
    rng = np.random.default_rng(8)
    fm = FeatureMatrix(rng.standard_normal((4, 3)), ["BP", "S", "MM", "BP"])
    back = FeatureMatrix.from_csv(fm.to_csv())
    np.testing.assert_array_equal(back.rows, fm.rows)
    assert back.labels == fm.labels
    assert fm.subset([1, 2]).labels == ("S", "MM")
    with pytest.raises(LabelError):
        FeatureMatrix(np.zeros((1, 2)), ["XX"])
    with pytest.raises(ShapeError):
        FeatureMatrix(np.zeros((2, 2)), ["BP"])


def test_pipeline_features_shape_and_determinism(small_recording, small_prepared):
    fm = small_prepared.selected_features()
    assert fm.rows.shape == (20, 2 * 18 * 96)
    assert fm.provenance["pair_names"] == ["L2-3", "R1-2"]
    again = prepare(small_recording, PipelineConfig()).selected_features()
    assert again.rows.tobytes() == fm.rows.tobytes()
    assert again.labels == fm.labels
