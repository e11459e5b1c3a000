"""Shared fixtures: WAV fixtures, scoring-side feature dumps, a checkpoint.

The scoring package is exercised only through its external interfaces:
its `pathintel` CLI produces the feature dumps, and its public loader is
used once for the cross-component round-trip test.
"""
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.io import wavfile

from codebridge.model import init_checkpoint

SR = 16000


def make_wav(path: Path, seed: int, dur_s: float = 0.8):
    """A tone-plus-noise signal with voiced and unvoiced stretches."""
    rng = np.random.default_rng(seed)
    n = int(dur_s * SR)
    t = np.arange(n) / SR
    f0 = 120.0 + 40.0 * np.sin(2 * np.pi * 0.8 * t)
    voiced = 0.5 * np.sin(2 * np.pi * np.cumsum(f0) / SR)
    voiced += 0.15 * np.sin(2 * np.pi * 3 * np.cumsum(f0) / SR)
    noise = 0.01 * rng.normal(size=n)
    x = voiced + noise
    x[: n // 8] = noise[: n // 8]          # unvoiced head
    x[-n // 8:] = noise[-n // 8:] * 5.0    # breathy tail
    wavfile.write(path, SR, x.astype(np.float32))
    return path


def run_pathintel(*argv) -> subprocess.CompletedProcess:
    return subprocess.run([sys.executable, "-m", "pathintel.cli", *argv],
                          capture_output=True, text=True)


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    """WAVs plus the scoring side's mel and pitch dumps for each."""
    root = tmp_path_factory.mktemp("fixtures")
    for i, seed in enumerate((11, 12, 13)):
        wav = make_wav(root / f"fx{i}.wav", seed)
        proc = run_pathintel("features", str(wav),
                             str(root / f"fx{i}.mel.cdm"), "--no-preprocess",
                             "--pitch-out", str(root / f"fx{i}.pitch.csv"))
        assert proc.returncode == 0, proc.stderr
    return root


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "encoder.pt"
    init_checkpoint(path, seed=7)
    return path


@pytest.fixture(scope="session")
def manifest(tmp_path_factory):
    """Two speakers, two utterances each, pointing at generated WAVs."""
    root = tmp_path_factory.mktemp("corpus")
    lines = ["speaker_id,gender,group,intelligibility,utterance_id,path"]
    for sid, gender, seed0 in (("SPK_A", "F", 21), ("SPK_B", "M", 31)):
        for j in range(2):
            wav = make_wav(root / f"{sid}_u{j}.wav", seed0 + j)
            lines.append(f"{sid},{gender},control,,u{j},{wav}")
    path = root / "manifest.csv"
    path.write_text("\n".join(lines) + "\n")
    return path
