"""FFT-based phase synchronisation between bipolar LFP channels.

For two equal-length signals with real Fourier coefficients (a_n, b_n) the
phase lag at bin n is

    PL(n) = |(a_in b_jn - b_in a_jn) / (a_in a_jn + b_in b_jn)|  (= |tan(theta_i - theta_j)|)

and the synchronisation score is ``1 / (1 + mean(E) + std(E))`` with
``E(n) = |PL(n) - PL(n+1)|`` taken over consecutive retained bins.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DegenerateError, ShapeError

EPS_MAG = 1e-8
EPS_DEN = 1e-10

SKIP_MAGNITUDE = "magnitude"
SKIP_DENOMINATOR = "denominator"


@dataclass(frozen=True)
class Spectrum:
    """Cosine/sine coefficients of a real signal for bins 0..floor(N/2).

    Synthesis: x[t] = a0/2 + sum_{n>=1} (a_n cos(2 pi n t/N) + b_n sin(2 pi n t/N)),
    with the Nyquist term (even N) also halved.
    """

    a: np.ndarray
    b: np.ndarray
    n_samples: int
    sample_rate_hz: float = 1.0

    @property
    def freqs(self) -> np.ndarray:
        return np.arange(self.a.shape[0]) * (self.sample_rate_hz / self.n_samples)

    @property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.a, self.b)

    @property
    def bins(self) -> List[Tuple[float, float, float]]:
        return list(zip(self.a.tolist(), self.b.tolist(), self.freqs.tolist()))

    def synthesize(self) -> np.ndarray:
        n = self.n_samples
        return np.fft.irfft((self.a - 1j * self.b) * (n / 2.0), n)


def dft(x, sample_rate_hz: float = 1.0) -> Spectrum:
    """Real-signal Fourier coefficients via an O(N log N) transform of any length."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] < 4:
        raise ShapeError(f"dft needs a 1-D signal of length >= 4, got shape {x.shape}")
    n = x.shape[0]
    X = np.fft.rfft(x)
    return Spectrum(2.0 * X.real / n, -2.0 * X.imag / n, n, float(sample_rate_hz))


def analysis_bins(spec: Spectrum, band_hz: Optional[Tuple[float, float]] = None) -> np.ndarray:
    """Bin indices inside ``band_hz`` (inclusive), never DC or Nyquist."""
    n_bins = spec.a.shape[0]
    idx = np.arange(n_bins)
    keep = idx > 0
    if spec.n_samples % 2 == 0:
        keep &= idx < n_bins - 1
    if band_hz is not None:
        lo, hi = band_hz
        f = spec.freqs
        keep &= (f >= lo) & (f <= hi)
    return idx[keep]


@dataclass
class LagSeries:
    retained_bins: np.ndarray
    pl: np.ndarray
    e: np.ndarray
    skipped_bins: List[Tuple[int, str]] = field(default_factory=list)


def _check_pair(spec_i: Spectrum, spec_j: Spectrum):
    if spec_i.n_samples != spec_j.n_samples:
        raise ShapeError(f"spectra of different lengths ({spec_i.n_samples} vs {spec_j.n_samples})")


def _lags(spec_i: Spectrum, spec_j: Spectrum, bins: np.ndarray):
    """Vectorised phase lag over ``bins``; returns (pl, skip_reason) arrays."""
    ai, bi, aj, bj = spec_i.a[bins], spec_i.b[bins], spec_j.a[bins], spec_j.b[bins]
    mag_i = np.hypot(ai, bi)
    mag_j = np.hypot(aj, bj)
    small = (mag_i < EPS_MAG * spec_i.magnitude.max()) | (mag_j < EPS_MAG * spec_j.magnitude.max())
    num = ai * bj - bi * aj
    den = ai * aj + bi * bj
    singular = np.abs(den) < EPS_DEN * (np.abs(ai * aj) + np.abs(bi * bj) + EPS_MAG)
    with np.errstate(divide="ignore", invalid="ignore"):
        pl = np.abs(num / den)
    reason = np.full(bins.shape, "", dtype=object)
    reason[singular] = SKIP_DENOMINATOR
    reason[small] = SKIP_MAGNITUDE
    return pl, reason


def phase_lag(spec_i: Spectrum, spec_j: Spectrum, n: int):
    """PL at bin ``n``, or ``None`` when the bin is skipped."""
    _check_pair(spec_i, spec_j)
    if not 0 <= n < spec_i.a.shape[0]:
        raise ShapeError(f"bin {n} outside spectrum of {spec_i.a.shape[0]} bins")
    pl, reason = _lags(spec_i, spec_j, np.array([n]))
    return None if reason[0] else float(pl[0])


def lag_series(spec_i: Spectrum, spec_j: Spectrum, band_hz=None) -> LagSeries:
    _check_pair(spec_i, spec_j)
    bins = analysis_bins(spec_i, band_hz)
    pl, reason = _lags(spec_i, spec_j, bins)
    ok = reason == ""
    skipped = [(int(k), str(r)) for k, r in zip(bins[~ok], reason[~ok])]
    pl = pl[ok]
    return LagSeries(bins[ok], pl, np.abs(np.diff(pl)), skipped)


def unit_peak(x) -> np.ndarray:
    """Scale ``x`` so that max|x| = 1 (zero signals are returned unchanged).

    When ``c * x`` is exactly representable, ``c * x / max|c * x|`` equals
    ``sign(c) * x / max|x|`` bit for bit, so every score computed downstream
    is exactly invariant to the amplitude of either signal.
    """
    x = np.asarray(x, dtype=np.float64)
    peak = np.max(np.abs(x)) if x.size else 0.0
    return x / peak if peak > 0 else x.copy()


def score_from_lags(e: np.ndarray) -> float:
    """``1 / (1 + mean(E) + std(E))`` with the population standard deviation."""
    return 1.0 / (1.0 + float(np.mean(e)) + float(np.std(e)))


def sync_spectra(spec_x: Spectrum, spec_y: Spectrum, band_hz=None) -> Tuple[float, LagSeries]:
    lags = lag_series(spec_x, spec_y, band_hz)
    if lags.retained_bins.shape[0] < 2:
        raise DegenerateError(
            f"only {lags.retained_bins.shape[0]} bins retained in band {band_hz} "
            f"({len(lags.skipped_bins)} skipped); the measure is undefined")
    return score_from_lags(lags.e), lags


def sync_measure(x, y, band_hz=None, sample_rate_hz: float = 1.0) -> Tuple[float, LagSeries]:
    """Synchronisation score of two whole signals plus the lag diagnostics.

    ``band_hz=None`` uses every bin except DC and Nyquist.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeError(f"signals differ in shape: {x.shape} vs {y.shape}")
    return sync_spectra(dft(unit_peak(x), sample_rate_hz), dft(unit_peak(y), sample_rate_hz), band_hz)


@dataclass
class SyncReport:
    matrix: np.ndarray                      # [left][right]
    selected: Tuple[int, int]
    band_hz: Optional[Tuple[float, float]]
    skipped_counts: np.ndarray              # [left][right]
    left_names: Tuple[str, ...] = ("L0-1", "L1-2", "L2-3")
    right_names: Tuple[str, ...] = ("R0-1", "R1-2", "R2-3")

    @property
    def selected_names(self) -> Tuple[str, str]:
        return self.left_names[self.selected[0]], self.right_names[self.selected[1]]

    def to_dict(self) -> Dict:
        return {
            "matrix": [[float(v) for v in row] for row in self.matrix],
            "selected": list(self.selected),
            "selected_names": list(self.selected_names),
            "band_hz": None if self.band_hz is None else [float(v) for v in self.band_hz],
            "skipped_bins": [[int(v) for v in row] for row in self.skipped_counts],
            "left_channels": list(self.left_names),
            "right_channels": list(self.right_names),
        }


def select_pair(matrix) -> Tuple[int, int]:
    """Argmax with ties going to the lexicographically smallest (left, right)."""
    m = np.asarray(matrix)
    best = m.max()
    for l in range(m.shape[0]):
        for r in range(m.shape[1]):
            if m[l, r] == best:
                return l, r
    raise DegenerateError("sync matrix has no finite maximum")


def sync_matrix(bipolar, band_hz=(1.0, 100.0)) -> SyncReport:
    """Score all 9 left x right bipolar pairs and pick the most synchronous."""
    fs = bipolar.sample_rate_hz
    left = [dft(unit_peak(x), fs) for x in bipolar.left]
    right = [dft(unit_peak(x), fs) for x in bipolar.right]
    matrix = np.zeros((3, 3))
    skipped = np.zeros((3, 3), dtype=int)
    for l in range(3):
        for r in range(3):
            try:
                score, lags = sync_spectra(left[l], right[r], band_hz)
            except DegenerateError as exc:
                raise DegenerateError(
                    f"pair {bipolar.left_names[l]}/{bipolar.right_names[r]}: {exc}") from exc
            matrix[l, r] = score
            skipped[l, r] = len(lags.skipped_bins)
    band = None if band_hz is None else (float(band_hz[0]), float(band_hz[1]))
    return SyncReport(matrix, select_pair(matrix), band, skipped,
                      tuple(bipolar.left_names), tuple(bipolar.right_names))
