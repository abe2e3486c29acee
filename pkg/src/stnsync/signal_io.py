"""Recording container, on-disk dataset format and the synthetic LFP generator.

Dataset directory layout::

    header.json     {"sample_rate_hz": 4800.0,
                     "channels": ["L0", ...],
                     "events": [{"onset_sample": 9600, "label": "BP"}, ...]}
    <name>.f64      raw little-endian IEEE-754 doubles, one file per channel

Synthetic noise is drawn from ``numpy.random.Generator(numpy.random.Philox(seed))``
(a counter-based 64-bit generator) with ``standard_normal`` in a fixed order,
see :func:`synth_recording`.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .errors import ConfigError, FormatError, IntegrityError, LabelError, ValidationError

#: Behaviour classes in their canonical order (also the multiclass tie-break order).
CLASSES: Tuple[str, ...] = ("BP", "S", "RS", "AM", "MM")
CLASS_NAMES = {
    "BP": "Button Press",
    "S": "Speech",
    "RS": "Rest Segment",
    "AM": "Arm Movement",
    "MM": "Mouth Movement",
}

LEFT_CONTACTS = ("L0", "L1", "L2", "L3")
RIGHT_CONTACTS = ("R0", "R1", "R2", "R3")
DEFAULT_FS = 4800.0

HEADER_NAME = "header.json"
_DTYPE = np.dtype("<f8")


def _frozen(x) -> np.ndarray:
    arr = np.array(x, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ChannelSignal:
    name: str
    samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen(self.samples))
        if self.samples.ndim != 1:
            raise IntegrityError(f"channel {self.name!r}: samples must be 1-D")


@dataclass(frozen=True, order=True)
class EventMarker:
    onset_sample: int
    label: str

    def __post_init__(self):
        if self.label not in CLASSES:
            raise LabelError(f"unknown behaviour label {self.label!r}; expected one of {CLASSES}")
        if int(self.onset_sample) != self.onset_sample or self.onset_sample < 0:
            raise IntegrityError(f"onset_sample must be a non-negative integer, got {self.onset_sample!r}")
        object.__setattr__(self, "onset_sample", int(self.onset_sample))


@dataclass(frozen=True)
class Recording:
    """Multi-channel sampled signal with labelled event markers."""

    sample_rate_hz: float
    channels: Tuple[ChannelSignal, ...]
    events: Tuple[EventMarker, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "events", tuple(sorted(self.events)))
        if not self.sample_rate_hz > 0:
            raise IntegrityError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if not self.channels:
            raise IntegrityError("recording has no channels")
        names = [c.name for c in self.channels]
        if len(set(names)) != len(names):
            raise IntegrityError(f"duplicate channel names in {names}")
        lengths = {c.samples.shape[0] for c in self.channels}
        if len(lengths) != 1:
            raise IntegrityError(f"channel lengths differ: {sorted(lengths)}")
        n = lengths.pop()
        if n < 2:
            raise IntegrityError("channels need at least 2 samples")
        for ev in self.events:
            if ev.onset_sample >= n:
                raise IntegrityError(
                    f"event {ev.label}@{ev.onset_sample} lies beyond the signal end ({n} samples)")

    @property
    def n_samples(self) -> int:
        return self.channels[0].samples.shape[0]

    @property
    def channel_names(self) -> List[str]:
        return [c.name for c in self.channels]

    def channel(self, name: str) -> np.ndarray:
        for c in self.channels:
            if c.name == name:
                return c.samples
        raise KeyError(name)

    def check_finite(self):
        for c in self.channels:
            if not np.all(np.isfinite(c.samples)):
                raise ValidationError(f"channel {c.name!r} contains non-finite samples")


def save_recording(rec: Recording, path) -> None:
    """Write ``rec`` as a dataset directory (created if needed)."""
    rec.check_finite()
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    header = {
        "sample_rate_hz": float(rec.sample_rate_hz),
        "channels": rec.channel_names,
        "events": [{"onset_sample": e.onset_sample, "label": e.label} for e in rec.events],
    }
    for c in rec.channels:
        c.samples.astype(_DTYPE).tofile(path / f"{c.name}.f64")
    with open(path / HEADER_NAME, "w") as fh:
        json.dump(header, fh, indent=1)
        fh.write("\n")


def load_recording(path) -> Recording:
    """Read a dataset directory written by :func:`save_recording`."""
    path = Path(path)
    try:
        with open(path / HEADER_NAME) as fh:
            header = json.load(fh)
    except FileNotFoundError as exc:
        raise FormatError(f"{path}: no {HEADER_NAME}") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}/{HEADER_NAME}: {exc}") from exc
    try:
        fs = float(header["sample_rate_hz"])
        names = [str(n) for n in header["channels"]]
        raw_events = list(header["events"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}/{HEADER_NAME}: malformed header ({exc})") from exc

    channels = []
    for name in names:
        f = path / f"{name}.f64"
        if not f.is_file():
            raise IntegrityError(f"header declares channel {name!r} but {f.name} is missing")
        if os.path.getsize(f) % _DTYPE.itemsize:
            raise IntegrityError(f"{f.name}: size is not a multiple of 8 bytes")
        channels.append(ChannelSignal(name, np.fromfile(f, dtype=_DTYPE)))
    try:
        events = [EventMarker(int(e["onset_sample"]), str(e["label"])) for e in raw_events]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}/{HEADER_NAME}: malformed event table ({exc})") from exc
    rec = Recording(fs, channels, events)
    rec.check_finite()
    return rec


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the synthetic two-lead recording.

    ``coupling_snr`` is the power ratio between the shared beta source and the
    independent broadband noise on the coupled bipolar channels.  The shared
    source is a continuous 13-30 Hz band-limited background plus, for each
    event, a class-specific carrier under a Hann envelope spanning
    [onset - 1 s, onset + 1 s]; ``burst_gain`` is the carrier peak amplitude
    relative to the background RMS.
    """

    n_trials_per_class: int = 10
    seed: int = 0
    coupled_pair: Tuple[int, int] = (2, 1)
    coupling_snr: float = 10.0
    beta_hz_per_class: Mapping[str, float] = field(
        default_factory=lambda: {"BP": 14.0, "S": 18.0, "RS": 22.0, "AM": 26.0, "MM": 30.0})
    trial_spacing_s: float = 3.0
    lead_s: float = 2.0
    burst_gain: float = 2.0
    sample_rate_hz: float = DEFAULT_FS
    noise_std: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "coupled_pair", tuple(int(i) for i in self.coupled_pair))
        object.__setattr__(self, "beta_hz_per_class", dict(self.beta_hz_per_class))
        self.validate()

    def validate(self):
        if int(self.n_trials_per_class) != self.n_trials_per_class or self.n_trials_per_class < 1:
            raise ConfigError("n_trials_per_class must be a positive integer")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if len(self.coupled_pair) != 2 or any(i not in (0, 1, 2) for i in self.coupled_pair):
            raise ConfigError(f"coupled_pair indices must be in {{0,1,2}}, got {self.coupled_pair}")
        if not self.coupling_snr > 0:
            raise ConfigError("coupling_snr must be positive")
        missing = set(CLASSES) - set(self.beta_hz_per_class)
        if missing:
            raise ConfigError(f"beta_hz_per_class lacks classes {sorted(missing)}")
        for k, f in self.beta_hz_per_class.items():
            if not 13.0 <= f <= 30.0:
                raise ConfigError(f"carrier for {k} ({f} Hz) is outside 13-30 Hz")
        if not self.trial_spacing_s > 0 or not self.lead_s >= 1.0:
            raise ConfigError("trial_spacing_s must be positive and lead_s >= 1 s")
        if not self.sample_rate_hz > 0 or not self.noise_std > 0 or not self.burst_gain >= 0:
            raise ConfigError("sample_rate_hz and noise_std must be positive, burst_gain >= 0")

    def n_samples(self) -> int:
        n_events = len(CLASSES) * self.n_trials_per_class
        total_s = 2 * self.lead_s + (n_events - 1) * self.trial_spacing_s
        n = total_s * self.sample_rate_hz
        if not np.isfinite(n) or n > 2**31:
            raise ConfigError(f"trial count x spacing gives an unrepresentable length ({n:.3g} samples)")
        return int(round(n))

    def to_dict(self) -> Dict:
        return {
            "n_trials_per_class": self.n_trials_per_class,
            "seed": self.seed,
            "coupled_pair": list(self.coupled_pair),
            "coupling_snr": self.coupling_snr,
            "beta_hz_per_class": {k: self.beta_hz_per_class[k] for k in CLASSES},
            "trial_spacing_s": self.trial_spacing_s,
            "lead_s": self.lead_s,
            "burst_gain": self.burst_gain,
            "sample_rate_hz": self.sample_rate_hz,
            "noise_std": self.noise_std,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SynthConfig":
        known = set(cls().to_dict())
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown synth config keys {sorted(extra)}")
        return cls(**d)


def _band_limited(rng: np.random.Generator, n: int, fs: float, lo: float, hi: float) -> np.ndarray:
    """Unit-RMS Gaussian noise with a brick-wall spectrum on [lo, hi] Hz."""
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1.0 / fs)
    spec[(f < lo) | (f > hi)] = 0.0
    x = np.fft.irfft(spec, n)
    return x / np.sqrt(np.mean(x * x))


def synth_events(cfg: SynthConfig) -> List[EventMarker]:
    fs = cfg.sample_rate_hz
    n_events = len(CLASSES) * cfg.n_trials_per_class
    return [
        EventMarker(int(round((cfg.lead_s + i * cfg.trial_spacing_s) * fs)), CLASSES[i % len(CLASSES)])
        for i in range(n_events)
    ]


def synth_recording(cfg: SynthConfig = SynthConfig()) -> Recording:
    """Generate an 8-contact recording with one planted coupled bipolar pair.

    Bipolar channels are synthesised first and integrated into contacts so
    that re-referencing recovers them exactly (up to rounding).  Draw order
    from the Philox stream: 6 bipolar noise vectors (L0-1, L1-2, L2-3, R0-1,
    R1-2, R2-3), then the left and right reference-contact noise, then the
    shared background, then one carrier phase per event.
    """
    cfg.validate()
    fs = cfg.sample_rate_hz
    n = cfg.n_samples()
    rng = np.random.Generator(np.random.Philox(int(cfg.seed)))

    bipolar = cfg.noise_std * rng.standard_normal((6, n))
    reference = cfg.noise_std * rng.standard_normal((2, n))
    background = _band_limited(rng, n, fs, 13.0, 30.0)
    events = synth_events(cfg)
    phases = rng.uniform(0.0, 2.0 * np.pi, len(events))

    source = background.copy()
    t_half = int(round(fs))
    win = np.hanning(2 * t_half + 1)
    tt = np.arange(-t_half, t_half + 1) / fs
    for ev, ph in zip(events, phases):
        f0 = cfg.beta_hz_per_class[ev.label]
        sl = slice(ev.onset_sample - t_half, ev.onset_sample + t_half + 1)
        source[sl] += cfg.burst_gain * win * np.cos(2 * np.pi * f0 * tt + ph)
    source *= cfg.noise_std * np.sqrt(cfg.coupling_snr) / np.sqrt(np.mean(source * source))

    left_k, right_k = cfg.coupled_pair
    bipolar[left_k] += source
    bipolar[3 + right_k] += 0.8 * source

    channels = []
    for side, (names, ref) in enumerate(((LEFT_CONTACTS, reference[0]), (RIGHT_CONTACTS, reference[1]))):
        contacts = [None] * 4
        contacts[3] = ref
        for k in (2, 1, 0):
            contacts[k] = contacts[k + 1] + bipolar[3 * side + k]
        channels.extend(ChannelSignal(name, c) for name, c in zip(names, contacts))
    return Recording(fs, channels, events)
