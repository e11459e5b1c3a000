"""Audio ingestion, edge trimming and energy-based voice activity detection.

Pipeline order matters: trim first, then VAD, so that clicks and artifacts
near the recording edges never reach the energy detector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .errors import NoSpeechError, ValidationError

TARGET_RATE = 16000

# relative-energy VAD defaults
VAD_FRAME_MS = 25
VAD_HOP_MS = 10
VAD_THRESHOLD_DB = -35.0
VAD_MIN_FRAMES = 3

_SILENCE_FLOOR_DB = -120.0


@dataclass(frozen=True)
class Utterance:
    """Mono audio at 16 kHz with speaker / utterance identity."""

    speaker_id: str
    utterance_id: str
    samples: np.ndarray  # float64, amplitudes in [-1, 1]
    sample_rate: int = TARGET_RATE

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64))
        if self.samples.ndim != 1:
            raise ValidationError("utterance samples must be one-dimensional")
        if self.samples.size == 0:
            raise ValidationError("utterance has no samples")
        if self.sample_rate <= 0:
            raise ValidationError("sample rate must be positive")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class VadSegment:
    """Half-open voiced frame range [start_frame, end_frame) with its mean energy."""

    start_frame: int
    end_frame: int
    mean_energy: float  # dB relative to full scale

    def __post_init__(self):
        if not (0 <= self.start_frame < self.end_frame):
            raise ValidationError(
                f"invalid segment [{self.start_frame}, {self.end_frame})"
            )

    @property
    def n_frames(self) -> int:
        return self.end_frame - self.start_frame


def _to_float(data: np.ndarray) -> np.ndarray:
    """Scale integer PCM to [-1, 1]; pass floats through."""
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype == np.int32:
        # 24-bit WAV is delivered as int32 with the low byte zeroed
        return data.astype(np.float64) / 2147483648.0
    if data.dtype in (np.float32, np.float64):
        return data.astype(np.float64)
    raise ValidationError(f"unsupported WAV sample format: {data.dtype}")


def load_audio(path, speaker_id: str = "", utterance_id: str = "") -> Utterance:
    """Load a PCM WAV file as a mono 16 kHz utterance.

    Multichannel audio is channel-averaged; other sample rates are
    resampled with a polyphase windowed-sinc filter.
    """
    path = Path(path)
    if not utterance_id:
        utterance_id = path.stem
    try:
        rate, data = wavfile.read(str(path))
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise ValidationError(f"cannot read WAV file {path}: {exc}") from exc
    if data.size == 0:
        raise ValidationError(f"zero-length audio: {path}")
    x = _to_float(np.atleast_1d(data))
    if x.ndim == 2:
        x = x.mean(axis=1)
    if rate != TARGET_RATE:
        g = math.gcd(int(rate), TARGET_RATE)
        x = resample_poly(x, TARGET_RATE // g, int(rate) // g)
        if x.size == 0:
            raise ValidationError(f"audio too short to resample: {path}")
    x = np.clip(x, -1.0, 1.0)
    return Utterance(speaker_id, utterance_id, x, TARGET_RATE)


def trim_edges(u: Utterance, fraction: float = 0.15) -> Utterance:
    """Drop floor(fraction * len) samples from each end of the utterance."""
    if not (0.0 <= fraction < 0.5):
        raise ValidationError(f"trim fraction must be in [0, 0.5), got {fraction}")
    if fraction == 0.0:
        return u
    k = int(fraction * len(u))
    if len(u) - 2 * k <= 0:
        raise ValidationError("trimming would leave no samples")
    return replace(u, samples=u.samples[k: len(u) - k])


def _frame_rms(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    n_frames = (x.size - frame_len) // hop + 1
    if n_frames <= 0:
        # signal shorter than one frame: treat it as a single frame
        return np.array([math.sqrt(float(np.mean(x**2)))])
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n_frames)[:, None]
    return np.sqrt(np.mean(x[idx] ** 2, axis=1))


def detect_voice_activity(
    u: Utterance,
    frame_ms: float = VAD_FRAME_MS,
    hop_ms: float = VAD_HOP_MS,
    threshold_db: float = VAD_THRESHOLD_DB,
    min_frames: int = VAD_MIN_FRAMES,
) -> list[VadSegment]:
    """Relative-energy VAD: a frame is voiced when its RMS is within
    ``threshold_db`` of the loudest frame.  Runs of voiced frames shorter
    than ``min_frames`` are dropped.  Scale-invariant by construction.
    """
    frame_len = int(round(frame_ms * u.sample_rate / 1000.0))
    hop = int(round(hop_ms * u.sample_rate / 1000.0))
    rms = _frame_rms(u.samples, frame_len, hop)
    peak = rms.max()
    if peak <= 0.0:
        return []
    with np.errstate(divide="ignore"):
        rel_db = 20.0 * np.log10(np.where(rms > 0, rms / peak, 0.0))
    rel_db[rms == 0] = _SILENCE_FLOOR_DB
    voiced = rel_db > threshold_db

    segments: list[VadSegment] = []
    start = None
    for i, v in enumerate(voiced):
        if v and start is None:
            start = i
        elif not v and start is not None:
            if i - start >= min_frames:
                segments.append(VadSegment(start, i, float(rel_db[start:i].mean())))
            start = None
    if start is not None and voiced.size - start >= min_frames:
        segments.append(
            VadSegment(start, voiced.size, float(rel_db[start:].mean()))
        )
    return segments


def apply_vad(
    u: Utterance,
    segments: list[VadSegment],
    frame_ms: float = VAD_FRAME_MS,
    hop_ms: float = VAD_HOP_MS,
) -> Utterance:
    """Concatenate the voiced sample spans, order preserved.

    A segment [s, e) covers samples [s*hop, e*hop), except that a segment
    reaching the last frame extends to the end of the signal so a
    full-cover segment reproduces the input exactly.
    """
    if not segments:
        raise NoSpeechError(f"no voiced segments in {u.utterance_id!r}")
    frame_len = int(round(frame_ms * u.sample_rate / 1000.0))
    hop = int(round(hop_ms * u.sample_rate / 1000.0))
    n_frames = max((len(u) - frame_len) // hop + 1, 1)
    prev_end = 0
    pieces = []
    for seg in segments:
        if seg.start_frame < prev_end or seg.end_frame > n_frames:
            raise ValidationError("segments overlap or exceed the frame grid")
        lo = seg.start_frame * hop
        hi = len(u) if seg.end_frame == n_frames else seg.end_frame * hop
        pieces.append(u.samples[lo:hi])
        prev_end = seg.end_frame
    return replace(u, samples=np.concatenate(pieces))


def preprocess(
    u: Utterance,
    trim_fraction: float = 0.15,
    frame_ms: float = VAD_FRAME_MS,
    hop_ms: float = VAD_HOP_MS,
    threshold_db: float = VAD_THRESHOLD_DB,
    min_frames: int = VAD_MIN_FRAMES,
) -> Utterance:
    """Full preprocessing chain: trim edges, then keep voiced audio only."""
    t = trim_edges(u, trim_fraction)
    segs = detect_voice_activity(t, frame_ms, hop_ms, threshold_db, min_frames)
    return apply_vad(t, segs, frame_ms, hop_ms)
