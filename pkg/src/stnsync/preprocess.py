"""Bipolar re-referencing, zero-phase band-pass filtering and epoch extraction."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import List, Sequence, Tuple

import numpy as np
from scipy import signal as sps

from .errors import BoundaryError, ConfigError, ShapeError
from .signal_io import CLASSES, LEFT_CONTACTS, RIGHT_CONTACTS, EventMarker, Recording

#: Stopband attenuation of the band-pass design.  Kaiser windows tie passband
#: ripple to stopband ripple, so 120 dB also keeps the passband flat to ~1e-6.
STOPBAND_DB = 120.0


@dataclass(frozen=True)
class BipolarSet:
    left: np.ndarray   # (3, n): 0-1, 1-2, 2-3
    right: np.ndarray  # (3, n)
    sample_rate_hz: float
    left_names: Tuple[str, ...] = ("L0-1", "L1-2", "L2-3")
    right_names: Tuple[str, ...] = ("R0-1", "R1-2", "R2-3")

    def __post_init__(self):
        left = np.asarray(self.left, dtype=np.float64)
        right = np.asarray(self.right, dtype=np.float64)
        if left.ndim != 2 or right.ndim != 2 or left.shape[0] != 3 or right.shape[0] != 3:
            raise ShapeError(f"need 3 bipolar channels per side, got {left.shape} and {right.shape}")
        if left.shape != right.shape:
            raise ShapeError(f"left/right lengths differ: {left.shape} vs {right.shape}")
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    @property
    def n_samples(self) -> int:
        return self.left.shape[1]

    def map(self, fn) -> "BipolarSet":
        """Apply a per-channel transform to all six signals."""
        return BipolarSet(np.stack([fn(x) for x in self.left]), np.stack([fn(x) for x in self.right]),
                          self.sample_rate_hz, self.left_names, self.right_names)


@dataclass(frozen=True)
class Epoch:
    samples: np.ndarray
    label: str
    onset_sample: int


def bipolar_rereference(left_contacts, right_contacts, sample_rate_hz: float) -> BipolarSet:
    """Differences of adjacent contacts (0-1, 1-2, 2-3) on each lead."""
    out = []
    for contacts in (left_contacts, right_contacts):
        c = np.asarray(contacts, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] != 4:
            raise ShapeError(f"expected 4 equal-length contact signals per side, got shape {c.shape}")
        out.append(c[:-1] - c[1:])
    return BipolarSet(out[0], out[1], sample_rate_hz)


def recording_bipolar(rec: Recording) -> BipolarSet:
    """Re-reference a contact-level recording with channels L0..L3, R0..R3."""
    try:
        left = [rec.channel(n) for n in LEFT_CONTACTS]
        right = [rec.channel(n) for n in RIGHT_CONTACTS]
    except KeyError as exc:
        raise ShapeError(f"recording lacks contact channel {exc.args[0]!r}; "
                         f"need {LEFT_CONTACTS + RIGHT_CONTACTS}") from None
    return bipolar_rereference(left, right, rec.sample_rate_hz)


@lru_cache(maxsize=16)
def bandpass_taps(lo_hz: float, hi_hz: float, fs: float) -> np.ndarray:
    """Linear-phase Kaiser-windowed sinc band-pass.

    The transition band is ``lo_hz / 2`` wide on both edges, so the stopband
    is reached one octave below the low edge (and well before one octave
    above the high edge).
    """
    if not 0 < lo_hz < hi_hz < fs / 2:
        raise ConfigError(f"band [{lo_hz}, {hi_hz}] Hz must satisfy 0 < lo < hi < {fs / 2}")
    tw = lo_hz / 2.0
    if hi_hz + tw >= fs / 2:
        raise ConfigError(f"high edge {hi_hz} Hz too close to Nyquist ({fs / 2} Hz)")
    numtaps, beta = sps.kaiserord(STOPBAND_DB, tw / (fs / 2))
    numtaps |= 1  # odd length: integer group delay
    taps = sps.firwin(numtaps, [lo_hz - tw / 2, hi_hz + tw / 2], window=("kaiser", beta),
                      pass_zero=False, fs=fs)
    taps.setflags(write=False)
    return taps


def bandpass(x, fs: float, lo_hz: float = 1.0, hi_hz: float = 100.0) -> np.ndarray:
    """Zero-phase FIR band-pass with reflect padding at both ends."""
    taps = bandpass_taps(float(lo_hz), float(hi_hz), float(fs))
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError("bandpass expects a 1-D signal")
    if x.shape[0] <= taps.shape[0]:
        raise ShapeError(f"signal of {x.shape[0]} samples is not longer than the "
                         f"{taps.shape[0]}-tap filter")
    half = taps.shape[0] // 2
    padded = np.pad(x, half, mode="reflect")
    return sps.oaconvolve(padded, taps, mode="valid")


def extract_epochs(x, events: Sequence[EventMarker], fs: float,
                   pre_s: float = 1.0, post_s: float = 1.0) -> List[Epoch]:
    """Cut the half-open window [onset - pre, onset + post) around every event."""
    x = np.asarray(x, dtype=np.float64)
    pre = int(round(pre_s * fs))
    length = int(round((pre_s + post_s) * fs))
    epochs = []
    for i, ev in enumerate(events):
        if ev.label not in CLASSES:
            raise ShapeError(f"event {i} has unknown label {ev.label!r}")
        start = ev.onset_sample - pre
        stop = start + length
        if start < 0 or stop > x.shape[0]:
            raise BoundaryError(
                f"event {i} ({ev.label} at sample {ev.onset_sample}) needs window "
                f"[{start}, {stop}) but the signal has {x.shape[0]} samples")
        epochs.append(Epoch(x[start:stop].copy(), ev.label, ev.onset_sample))
    return epochs
