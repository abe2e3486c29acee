"""Beta-band Morlet spectrogram features, block downsampling and PCA."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import signal as sps

from .errors import ConfigError, DegenerateError, LabelError, ShapeError
from .signal_io import CLASSES

BETA_HZ = (13.0, 30.0)


@dataclass(frozen=True)
class SpectrogramConfig:
    freqs_hz: Tuple[float, ...] = tuple(float(f) for f in range(13, 31))
    wavelet_cycles: float = 6.0
    support_sd: float = 4.0
    use_magnitude: bool = True

    def __post_init__(self):
        object.__setattr__(self, "freqs_hz", tuple(float(f) for f in self.freqs_hz))
        f = np.asarray(self.freqs_hz)
        if f.size == 0 or np.any(np.diff(f) <= 0):
            raise ConfigError("freqs_hz must be a non-empty ascending list")
        if f[0] < BETA_HZ[0] or f[-1] > BETA_HZ[1]:
            raise ConfigError(f"freqs_hz must lie within {BETA_HZ} Hz")
        if self.wavelet_cycles < 3:
            raise ConfigError("wavelet_cycles must be >= 3")
        if not self.use_magnitude:
            raise ConfigError("only magnitude features are supported")

    def to_dict(self) -> Dict:
        return {"freqs_hz": list(self.freqs_hz), "wavelet_cycles": self.wavelet_cycles,
                "support_sd": self.support_sd, "use_magnitude": self.use_magnitude}

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:12]


def morlet_wavelet(freq_hz: float, fs: float, cycles: float = 6.0, support_sd: float = 4.0) -> np.ndarray:
    """Unit-energy complex Morlet sampled on +-``support_sd`` Gaussian SDs."""
    sd = cycles / (2.0 * np.pi * freq_hz)
    half = int(np.ceil(support_sd * sd * fs))
    t = np.arange(-half, half + 1) / fs
    w = np.exp(2j * np.pi * freq_hz * t) * np.exp(-0.5 * (t / sd) ** 2)
    return w / np.sqrt(np.sum(np.abs(w) ** 2))


def morlet_spectrogram(epoch, cfg: SpectrogramConfig = SpectrogramConfig(), fs: float = 4800.0) -> np.ndarray:
    """|x * w_f| for every configured frequency; shape (n_freqs, n_time).

    ``epoch`` may be a 1-D window or a stack (n_epochs, n_time), in which case
    the result is (n_epochs, n_freqs, n_time).  The signal is reflect-padded
    by the wavelet half-width so the time axis keeps its length.
    """
    x = np.asarray(getattr(epoch, "samples", epoch), dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    n = x.shape[-1]
    out = np.empty((x.shape[0], len(cfg.freqs_hz), n))
    for k, f in enumerate(cfg.freqs_hz):
        w = morlet_wavelet(f, fs, cfg.wavelet_cycles, cfg.support_sd)
        half = w.shape[0] // 2
        if w.shape[0] > n:
            raise ShapeError(f"epoch of {n} samples is shorter than the {f} Hz wavelet ({w.shape[0]} samples)")
        padded = np.pad(x, ((0, 0), (half, half)), mode="reflect")
        out[:, k, :] = np.abs(sps.fftconvolve(padded, w[None, :], mode="valid", axes=1))
    return out[0] if single else out


def assemble_pair_features(spec_left, spec_right) -> np.ndarray:
    """Row-major concatenation [left.ravel(), right.ravel()]."""
    l = np.asarray(spec_left, dtype=np.float64)
    r = np.asarray(spec_right, dtype=np.float64)
    if l.shape != r.shape:
        raise ShapeError(f"spectrogram shapes differ: {l.shape} vs {r.shape}")
    return np.concatenate([l.ravel(), r.ravel()])


def downsample_time(spec, factor: int = 100) -> np.ndarray:
    """Block means of ``factor`` consecutive cells along the last (time) axis."""
    if int(factor) != factor or factor < 1:
        raise ConfigError(f"downsample factor must be a positive integer, got {factor}")
    factor = int(factor)
    s = np.asarray(spec, dtype=np.float64)
    n = s.shape[-1]
    n_out = n // factor
    if n_out == 0:
        raise ShapeError(f"time axis ({n}) shorter than the downsample factor ({factor})")
    if n % factor:
        warnings.warn(f"time length {n} not divisible by {factor}; dropping {n % factor} trailing cells",
                      stacklevel=2)
    blocks = s[..., :n_out * factor].reshape(s.shape[:-1] + (n_out, factor))
    return blocks.mean(axis=-1)


@dataclass
class FeatureMatrix:
    rows: np.ndarray
    labels: Tuple[str, ...]
    provenance: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = np.atleast_2d(np.asarray(self.rows, dtype=np.float64))
        self.labels = tuple(self.labels)
        if self.rows.shape[0] != len(self.labels):
            raise ShapeError(f"{self.rows.shape[0]} rows but {len(self.labels)} labels")
        bad = set(self.labels) - set(CLASSES)
        if bad:
            raise LabelError(f"unknown labels {sorted(bad)}")

    def __len__(self):
        return self.rows.shape[0]

    def subset(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx)
        return FeatureMatrix(self.rows[idx], [self.labels[i] for i in idx], dict(self.provenance))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"f{i}" for i in range(self.rows.shape[1])] + ["label"])
        for row, lab in zip(self.rows, self.labels):
            w.writerow([repr(float(v)) for v in row] + [lab])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "FeatureMatrix":
        lines = list(csv.reader(io.StringIO(text)))
        body = lines[1:]
        rows = np.array([[float(v) for v in r[:-1]] for r in body])
        return cls(rows, [r[-1] for r in body])


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray      # (k, d), rows orthonormal
    eigenvalues: np.ndarray     # all retained-rank eigenvalues, descending
    explained_fraction: float

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def transform(self, rows) -> np.ndarray:
        return pca_transform(self, rows)


def pca_fit(train_rows, variance_frac: float = 0.95) -> PcaModel:
    """Covariance eigenbasis keeping the fewest components reaching ``variance_frac``.

    The eigendecomposition is obtained from the SVD of the centred data
    (eigenvalues = s**2 / (n - 1)), which avoids forming the d x d covariance.
    """
    X = np.asarray(getattr(train_rows, "rows", train_rows), dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DegenerateError(f"PCA needs at least 2 rows, got shape {X.shape}")
    if not 0 < variance_frac <= 1:
        raise ConfigError("variance_frac must be in (0, 1]")
    mean = X.mean(axis=0)
    Xc = X - mean
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    eig = s ** 2 / (X.shape[0] - 1)
    total = eig.sum()
    if not total > 0:
        raise DegenerateError("training rows have zero variance")
    cum = np.cumsum(eig) / total
    k = int(np.searchsorted(cum, variance_frac)) + 1
    k = min(k, eig.shape[0])
    comps = vt[:k].copy()
    lead = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(k), lead])
    comps *= signs[:, None]
    return PcaModel(mean, comps, eig, float(cum[k - 1]))


def pca_transform(model: PcaModel, rows) -> np.ndarray:
    """components @ (row - mean), for one row or a stack of rows."""
    r = np.asarray(rows, dtype=np.float64)
    if r.shape[-1] != model.mean.shape[0]:
        raise ShapeError(f"row dimension {r.shape[-1]} != model dimension {model.mean.shape[0]}")
    return (r - model.mean) @ model.components.T
