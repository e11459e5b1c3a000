"""Bridge-side feature computation.

This is an independent implementation of the shared feature contract:
80-bin mel-spectrogram on 64 ms / 16 ms frames (symmetric Hann, no
padding), HTK mel scale over 90-7600 Hz with peak-normalized triangular
filters, magnitude in dB floored at -100 dB and mapped affinely to
[0, 1].  Pitch: autocorrelation F0 in [55, 600] Hz on the same grid,
z-normalized log-F0 quantized into 256 bins plus one unvoiced bin.
Parity with the scoring side is enforced by `verify_parity`.
"""
from __future__ import annotations

import numpy as np
import torch

SAMPLE_RATE = 16000
N_FFT = 1024
HOP = 256
N_MELS = 80
FMIN, FMAX = 90.0, 7600.0
DB_FLOOR = -100.0

F0_MIN, F0_MAX = 55.0, 600.0
N_PITCH_BINS = 256


def _mel_points(n: int) -> np.ndarray:
    def to_mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def from_mel(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    return from_mel(np.linspace(to_mel(FMIN), to_mel(FMAX), n))


def mel_basis() -> torch.Tensor:
    edges = _mel_points(N_MELS + 2)
    freqs = np.fft.rfftfreq(N_FFT, d=1.0 / SAMPLE_RATE)
    fb = np.zeros((N_MELS, freqs.size), dtype=np.float32)
    for i in range(N_MELS):
        left, center, right = edges[i: i + 3]
        rising = (freqs - left) / (center - left)
        falling = (right - freqs) / (right - center)
        fb[i] = np.clip(np.minimum(rising, falling), 0.0, None)
    return torch.from_numpy(fb)


def mel_spectrogram(samples: np.ndarray) -> torch.Tensor:
    """80 x T mel in [0, 1]; frames exactly like the scoring side."""
    x = torch.as_tensor(samples, dtype=torch.float32)
    if x.numel() < N_FFT:
        raise ValueError("signal shorter than one analysis frame")
    window = torch.hann_window(N_FFT, periodic=False)
    spec = torch.stft(x, n_fft=N_FFT, hop_length=HOP, win_length=N_FFT,
                      window=window, center=False, return_complex=True).abs()
    mel = mel_basis() @ spec
    floor = 10.0 ** (DB_FLOOR / 20.0)
    db = 20.0 * torch.log10(torch.clamp(mel, min=floor))
    return torch.clamp((db - DB_FLOOR) / -DB_FLOOR, 0.0, 1.0)


def pitch_contour(samples: np.ndarray) -> np.ndarray:
    """Per-frame F0 (Hz, 0 = unvoiced) on the mel frame grid."""
    x = np.asarray(samples, dtype=np.float64)
    tau_min = int(SAMPLE_RATE / F0_MAX)
    tau_max = int(np.ceil(SAMPLE_RATE / F0_MIN))
    nf = (x.size - N_FFT) // HOP + 1
    padded = np.concatenate([x, np.zeros(tau_max)])
    out = np.zeros(max(nf, 0))
    for k in range(nf):
        frame = padded[k * HOP: k * HOP + N_FFT + tau_max]
        w = frame.size - tau_max
        taus = np.arange(1, tau_max + 1)
        d = np.array([np.sum((frame[:w] - frame[tau: tau + w]) ** 2)
                      for tau in taus])
        csum = np.cumsum(d)
        with np.errstate(divide="ignore", invalid="ignore"):
            cmnd = np.where(csum > 0, d * taus / csum, 1.0)
        tau_star = 0.0
        for i in range(tau_min - 1, cmnd.size):
            if cmnd[i] < 0.25:
                while i + 1 < cmnd.size and cmnd[i + 1] < cmnd[i]:
                    i += 1
                tau_star = float(taus[i])
                if 0 < i < cmnd.size - 1:
                    a, b, c = cmnd[i - 1], cmnd[i], cmnd[i + 1]
                    den = a - 2 * b + c
                    if den > 0:
                        tau_star += 0.5 * (a - c) / den
                break
        if tau_star > 0:
            hz = SAMPLE_RATE / tau_star
            if F0_MIN <= hz <= F0_MAX:
                out[k] = hz
    return out


def quantize_pitch(f0: np.ndarray, mean_log_f0: float,
                   std_log_f0: float) -> np.ndarray:
    """(257, T) one-hot: 256 z-normalized log-F0 bins + 1 unvoiced bin."""
    one_hot = np.zeros((N_PITCH_BINS + 1, f0.size), dtype=np.float32)
    for t, hz in enumerate(f0):
        if hz <= 0:
            one_hot[N_PITCH_BINS, t] = 1.0
            continue
        z = (np.log(hz) - mean_log_f0) / std_log_f0 if std_log_f0 > 0 else 0.0
        z = float(np.clip(z, -3.0, 3.0))
        idx = int(np.ceil((z + 3.0) / 6.0 * N_PITCH_BINS)) - 1
        one_hot[min(max(idx, 0), N_PITCH_BINS - 1), t] = 1.0
    return one_hot


def speaker_log_f0_stats(contours: list[np.ndarray]) -> tuple[float, float]:
    voiced = np.concatenate([c[c > 0] for c in contours]) if contours else \
        np.array([])
    if voiced.size == 0:
        return 0.0, 0.0
    logs = np.log(voiced)
    if voiced.size < 2:
        return float(logs.mean()), 0.0
    return float(logs.mean()), float(logs.std())
