"""Mel-spectrogram and pitch features on a shared 64 ms / 16 ms frame grid."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .preprocess import Utterance

# framing (64 ms frames, 16 ms hop at 16 kHz)
FRAME_LEN = 1024
HOP = 256
N_FFT = 1024

# mel filterbank
N_MELS = 80
MEL_FMIN = 90.0
MEL_FMAX = 7600.0
DB_FLOOR = -100.0

# pitch search band and quantization grid
F0_MIN = 55.0
F0_MAX = 600.0
YIN_THRESHOLD = 0.25
N_PITCH_BINS = 256  # + 1 unvoiced bin
PITCH_CLAMP_SIGMA = 3.0


def n_frames(num_samples: int, frame_len: int = FRAME_LEN, hop: int = HOP) -> int:
    return (num_samples - frame_len) // hop + 1


@dataclass(frozen=True)
class MelSpectrogram:
    """80 x T log-mel matrix, values normalized to [0, 1]."""

    bins: np.ndarray
    utterance_id: str = ""
    frame_len_ms: float = 64.0
    hop_ms: float = 16.0

    def __post_init__(self):
        b = np.asarray(self.bins, dtype=np.float64)
        object.__setattr__(self, "bins", b)
        if b.ndim != 2 or b.shape[0] != N_MELS:
            raise ValidationError(f"mel matrix must be {N_MELS} x T, got {b.shape}")
        if b.shape[1] < 1:
            raise ValidationError("mel matrix has no frames")
        if not np.all((b >= 0.0) & (b <= 1.0)):
            raise ValidationError("mel values must lie in [0, 1]")

    @property
    def T(self) -> int:
        return self.bins.shape[1]


@dataclass(frozen=True)
class PitchContour:
    """Per-frame F0 in Hz, 0 marks unvoiced; same frame grid as the mel."""

    f0: np.ndarray
    utterance_id: str = ""

    def __post_init__(self):
        f = np.asarray(self.f0, dtype=np.float64)
        object.__setattr__(self, "f0", f)
        if f.ndim != 1 or f.size == 0:
            raise ValidationError("pitch contour must be a nonempty vector")
        if np.any(f < 0):
            raise ValidationError("f0 values must be nonnegative")

    @property
    def T(self) -> int:
        return self.f0.size

    def voiced_mask(self) -> np.ndarray:
        return self.f0 > 0


@dataclass(frozen=True)
class QuantizedPitch:
    """One-hot (N_PITCH_BINS + 1) x T matrix; last row is the unvoiced bin."""

    one_hot: np.ndarray
    utterance_id: str = ""

    def __post_init__(self):
        m = np.asarray(self.one_hot)
        object.__setattr__(self, "one_hot", m)
        if m.ndim != 2 or m.shape[0] != N_PITCH_BINS + 1:
            raise ValidationError(
                f"quantized pitch must have {N_PITCH_BINS + 1} rows, got {m.shape}"
            )
        colsum = m.sum(axis=0)
        if not np.all(colsum == 1):
            raise ValidationError("each quantized pitch column must sum to 1")

    @property
    def T(self) -> int:
        return self.one_hot.shape[1]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(
    n_mels: int = N_MELS,
    n_fft: int = N_FFT,
    sample_rate: int = 16000,
    fmin: float = MEL_FMIN,
    fmax: float = MEL_FMAX,
) -> np.ndarray:
    """Triangular mel filters (HTK mel scale), peak-normalized to 1."""
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    fft_freqs = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)
    fb = np.zeros((n_mels, fft_freqs.size))
    for i in range(n_mels):
        lo, center, hi = edges[i], edges[i + 1], edges[i + 2]
        up = (fft_freqs - lo) / (center - lo)
        down = (hi - fft_freqs) / (hi - center)
        fb[i] = np.maximum(0.0, np.minimum(up, down))
    return fb


def mel_center_frequencies(n_mels: int = N_MELS, fmin: float = MEL_FMIN,
                           fmax: float = MEL_FMAX) -> np.ndarray:
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    return edges[1:-1]


def _frames(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    nf = n_frames(x.size, frame_len, hop)
    if nf < 1:
        raise ValidationError(
            f"utterance of {x.size} samples is shorter than one {frame_len}-sample frame"
        )
    idx = np.arange(frame_len)[None, :] + hop * np.arange(nf)[:, None]
    return x[idx]


def mel_spectrogram(u: Utterance) -> MelSpectrogram:
    """Hann-windowed STFT magnitude -> mel filterbank -> dB with a -100 dB
    floor -> affine map to [0, 1].  No padding: T = (n - 1024) // 256 + 1.
    """
    if u.sample_rate != 16000:
        raise ValidationError("mel_spectrogram expects 16 kHz audio")
    frames = _frames(u.samples, FRAME_LEN, HOP)
    window = np.hanning(FRAME_LEN)
    spec = np.abs(np.fft.rfft(frames * window, n=N_FFT, axis=1)).T  # bins x T
    mel = mel_filterbank() @ spec
    floor_amp = 10.0 ** (DB_FLOOR / 20.0)
    db = 20.0 * np.log10(np.maximum(mel, floor_amp))
    bins = np.clip((db - DB_FLOOR) / -DB_FLOOR, 0.0, 1.0)
    return MelSpectrogram(bins, utterance_id=u.utterance_id)


def _yin_frame(x: np.ndarray, tau_min: int, tau_max: int,
               threshold: float) -> float:
    """YIN on one frame: cumulative-mean-normalized difference function,
    absolute-threshold pick with parabolic refinement.  Returns 0 if unvoiced.
    """
    w = x.size - tau_max
    taus = np.arange(1, tau_max + 1)
    # d(tau) = sum_t (x[t] - x[t+tau])^2 over the integration window
    d = np.array([np.sum((x[:w] - x[tau: tau + w]) ** 2) for tau in taus])
    cumsum = np.cumsum(d)
    with np.errstate(divide="ignore", invalid="ignore"):
        cmnd = np.where(cumsum > 0, d * taus / cumsum, 1.0)

    lo = tau_min - 1  # index of tau_min in the tau axis
    best = None
    for i in range(lo, cmnd.size):
        if cmnd[i] < threshold:
            while i + 1 < cmnd.size and cmnd[i + 1] < cmnd[i]:
                i += 1
            best = i
            break
    if best is None:
        return 0.0
    # parabolic interpolation around the minimum
    tau = float(taus[best])
    if 0 < best < cmnd.size - 1:
        a, b, c = cmnd[best - 1], cmnd[best], cmnd[best + 1]
        denom = a - 2 * b + c
        if denom > 0:
            tau += 0.5 * (a - c) / denom
    return tau


def extract_pitch(u: Utterance) -> PitchContour:
    """Autocorrelation (YIN) pitch on the mel frame grid; F0 in [55, 600] Hz."""
    if u.sample_rate != 16000:
        raise ValidationError("extract_pitch expects 16 kHz audio")
    sr = u.sample_rate
    tau_min = int(sr / F0_MAX)
    tau_max = int(np.ceil(sr / F0_MIN))
    nf = n_frames(u.samples.size)
    if nf < 1:
        raise ValidationError("utterance shorter than one frame")
    # each frame needs tau_max samples of lookahead; zero-pad the tail
    padded = np.concatenate([u.samples, np.zeros(tau_max)])
    f0 = np.zeros(nf)
    for k in range(nf):
        frame = padded[k * HOP: k * HOP + FRAME_LEN + tau_max]
        tau = _yin_frame(frame, tau_min, tau_max, YIN_THRESHOLD)
        if tau > 0:
            hz = sr / tau
            if F0_MIN <= hz <= F0_MAX:
                f0[k] = hz
    return PitchContour(f0, utterance_id=u.utterance_id)


def speaker_f0_stats(contours: list[PitchContour]) -> tuple[float, float]:
    """Mean and std of log-F0 over all voiced frames of a speaker."""
    voiced = np.concatenate([c.f0[c.voiced_mask()] for c in contours]) \
        if contours else np.array([])
    if voiced.size == 0:
        return 0.0, 0.0
    logs = np.log(voiced)
    if voiced.size < 2:
        return float(logs.mean()), 0.0
    return float(logs.mean()), float(logs.std())


def quantize_pitch(p: PitchContour, mean_log_f0: float,
                   std_log_f0: float) -> QuantizedPitch:
    """Z-normalize log-F0 per speaker, clamp to +-3 sigma, map linearly to
    256 bins; unvoiced frames land in the extra last bin.  Edge values are
    broken downward, so z = 0 maps to bin 127.
    """
    if p.T == 0:
        raise ValidationError("empty pitch contour")
    one_hot = np.zeros((N_PITCH_BINS + 1, p.T), dtype=np.uint8)
    for t in range(p.T):
        if p.f0[t] <= 0:
            one_hot[N_PITCH_BINS, t] = 1
            continue
        if std_log_f0 > 0:
            z = (np.log(p.f0[t]) - mean_log_f0) / std_log_f0
        else:
            z = 0.0
        z = float(np.clip(z, -PITCH_CLAMP_SIGMA, PITCH_CLAMP_SIGMA))
        u01 = (z + PITCH_CLAMP_SIGMA) / (2 * PITCH_CLAMP_SIGMA)
        idx = int(np.ceil(u01 * N_PITCH_BINS)) - 1
        one_hot[min(max(idx, 0), N_PITCH_BINS - 1), t] = 1
    return QuantizedPitch(one_hot, utterance_id=p.utterance_id)
