"""End-to-end wiring: recording -> bipolar -> band-pass -> sync -> features -> classifier."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError
from .features import (FeatureMatrix, SpectrogramConfig, downsample_time, morlet_spectrogram,
                       pca_fit)
from .learn import (OneVsRest, TrainConfig, linear, median_sq_distance, multiclass_train,
                    polynomial, rbf)
from .preprocess import BipolarSet, bandpass, extract_epochs, recording_bipolar
from .signal_io import Recording
from .sync import SyncReport, sync_matrix

CLASSIFIERS = ("svm-linear", "svm-poly", "svm-rbf", "mkl")


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of the pipeline; defaults are the reference settings."""

    filter_band_hz: Tuple[float, float] = (1.0, 100.0)
    sync_band_hz: Tuple[float, float] = (13.0, 30.0)
    pre_s: float = 1.0
    post_s: float = 1.0
    spectrogram: SpectrogramConfig = SpectrogramConfig()
    downsample_factor: int = 100
    pca_fraction: float = 0.95
    train: TrainConfig = TrainConfig()
    classifier: str = "mkl"
    paper_mode: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "filter_band_hz", tuple(float(v) for v in self.filter_band_hz))
        object.__setattr__(self, "sync_band_hz", tuple(float(v) for v in self.sync_band_hz))
        if self.classifier not in CLASSIFIERS:
            raise ConfigError(f"classifier must be one of {CLASSIFIERS}, got {self.classifier!r}")
        if not 0 < self.pca_fraction <= 1:
            raise ConfigError("pca_fraction must be in (0, 1]")
        if self.pre_s < 0 or self.post_s < 0 or self.pre_s + self.post_s <= 0:
            raise ConfigError("epoch window must have positive length")
        lo, hi = self.sync_band_hz
        if not 0 <= lo < hi:
            raise ConfigError("sync band must satisfy 0 <= lo < hi")

    def to_dict(self) -> Dict:
        return {
            "filter_band_hz": list(self.filter_band_hz),
            "sync_band_hz": list(self.sync_band_hz),
            "pre_s": self.pre_s,
            "post_s": self.post_s,
            "spectrogram": self.spectrogram.to_dict(),
            "downsample_factor": self.downsample_factor,
            "pca_fraction": self.pca_fraction,
            "train": self.train.to_dict(),
            "classifier": self.classifier,
            "paper_mode": self.paper_mode,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Dict) -> "PipelineConfig":
        d = dict(d)
        unknown = set(d) - set(cls().to_dict())
        if unknown:
            raise ConfigError(f"unknown pipeline config keys {sorted(unknown)}")
        if "spectrogram" in d:
            d["spectrogram"] = SpectrogramConfig(**d["spectrogram"])
        if "train" in d:
            d["train"] = TrainConfig.from_dict(d["train"])
        return cls(**d)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"


def classifier_config(kind: str, train: TrainConfig, rows) -> TrainConfig:
    """Concrete kernel bank for a classifier kind on the given training rows."""
    if kind == "mkl":
        return replace(train, kernel_bank=train.bank_for(rows))
    if kind == "svm-linear":
        bank = (linear(1.0),)
    elif kind == "svm-poly":
        bank = (polynomial(1.0, 2),)
    elif kind == "svm-rbf":
        bank = (rbf(1.0 / median_sq_distance(rows)),)
    else:
        raise ConfigError(f"unknown classifier {kind!r}")
    return replace(train, kernel_bank=bank)


def make_trainer(kind: str, train: TrainConfig = TrainConfig()) -> Callable[[np.ndarray, Sequence[str]], OneVsRest]:
    def trainer(rows, labels):
        return multiclass_train(rows, labels, classifier_config(kind, train, rows))
    trainer.kind = kind
    return trainer


@dataclass
class PreparedRecording:
    """Filtered bipolar channels, their sync report and per-channel epoch features.

    ``left_features[k]`` / ``right_features[k]`` are (n_trials, n_freqs, n_time)
    downsampled spectrogram magnitudes of bipolar channel k.
    """

    bipolar: BipolarSet
    sync: SyncReport
    labels: Tuple[str, ...]
    left_features: List[np.ndarray]
    right_features: List[np.ndarray]
    config: PipelineConfig

    def pair_features(self, left: int, right: int) -> FeatureMatrix:
        L = self.left_features[left]
        R = self.right_features[right]
        rows = np.concatenate([L.reshape(L.shape[0], -1), R.reshape(R.shape[0], -1)], axis=1)
        prov = {
            "pair": [left, right],
            "pair_names": [self.bipolar.left_names[left], self.bipolar.right_names[right]],
            "spectrogram": self.config.spectrogram.digest(),
        }
        return FeatureMatrix(rows, self.labels, prov)

    def selected_features(self) -> FeatureMatrix:
        return self.pair_features(*self.sync.selected)


def channel_features(x, rec: Recording, cfg: PipelineConfig) -> np.ndarray:
    fs = rec.sample_rate_hz
    epochs = extract_epochs(x, rec.events, fs, cfg.pre_s, cfg.post_s)
    stack = np.stack([e.samples for e in epochs])
    spec = morlet_spectrogram(stack, cfg.spectrogram, fs)
    return downsample_time(spec, cfg.downsample_factor)


def prepare(rec: Recording, cfg: PipelineConfig = PipelineConfig()) -> PreparedRecording:
    """Run every stage up to (and excluding) PCA and classification."""
    fs = rec.sample_rate_hz
    lo, hi = cfg.filter_band_hz
    bip = recording_bipolar(rec).map(lambda x: bandpass(x, fs, lo, hi))
    report = sync_matrix(bip, cfg.sync_band_hz)
    left = [channel_features(x, rec, cfg) for x in bip.left]
    right = [channel_features(x, rec, cfg) for x in bip.right]
    labels = tuple(e.label for e in rec.events)
    return PreparedRecording(bip, report, labels, left, right, cfg)


def global_pca(fm: FeatureMatrix, fraction: float) -> FeatureMatrix:
    """Project all rows on a PCA fitted to the whole dataset (global PCA mode)."""
    model = pca_fit(fm.rows, fraction)
    return FeatureMatrix(model.transform(fm.rows), fm.labels,
                         dict(fm.provenance, pca="global", pca_components=model.n_components))
