"""Batch export of latent code files, plus the cross-side parity check.

`export_codes` runs the encoder heads over every utterance in a manifest
and writes one CDM1 file per (utterance, kind) named
`<speaker_id>__<utterance_id>.<kind>.cdm`. Inputs are expected to be
preprocessed 16 kHz mono WAVs (already trimmed and speech-gated).

`verify_parity` guards the feature contract: it recomputes the
mel-spectrogram (and pitch) here and compares against dumps produced by
the scoring package's own feature extractor on the same WAVs.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from scipy.io import wavfile

from . import cdm, features
from .model import load_checkpoint

VALID_KINDS = ("content", "rhythm", "frequency")
MEL_TOLERANCE = 1e-4
F0_TOLERANCE_HZ = 1.0


@dataclass(frozen=True)
class BridgeConfig:
    """One export run: which checkpoint, which utterances, which codes."""

    checkpoint: Path
    manifest: Path
    out_dir: Path
    kinds: tuple[str, ...] = ("content",)
    device: str = "cpu"

    def __post_init__(self):
        object.__setattr__(self, "checkpoint", Path(self.checkpoint))
        object.__setattr__(self, "manifest", Path(self.manifest))
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        object.__setattr__(self, "kinds", tuple(self.kinds))
        if not self.kinds:
            raise ValueError("no code kinds requested")
        for k in self.kinds:
            if k not in VALID_KINDS:
                raise ValueError(f"unknown code kind {k!r}; "
                                 f"choose from {', '.join(VALID_KINDS)}")


@dataclass(frozen=True)
class ManifestRow:
    speaker_id: str
    utterance_id: str
    path: Path


def load_manifest(path) -> list[ManifestRow]:
    """Read the evaluation manifest; only identity and path matter here."""
    path = Path(path)
    required = {"speaker_id", "utterance_id", "path"}
    rows = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ValueError(f"{path}: manifest must have columns "
                             f"{sorted(required)}")
        for lineno, rec in enumerate(reader, start=2):
            sid, uid = rec["speaker_id"].strip(), rec["utterance_id"].strip()
            if not sid or not uid or not rec["path"].strip():
                raise ValueError(f"{path}:{lineno}: empty field")
            rows.append(ManifestRow(sid, uid, Path(rec["path"].strip())))
    if not rows:
        raise ValueError(f"{path}: manifest has no rows")
    return rows


def load_wav(path) -> np.ndarray:
    """Preprocessed input: 16 kHz; channels are averaged, ints rescaled."""
    sr, data = wavfile.read(path)
    if sr != features.SAMPLE_RATE:
        raise ValueError(f"{path}: expected {features.SAMPLE_RATE} Hz "
                         f"preprocessed audio, got {sr} Hz")
    x = np.asarray(data, dtype=np.float64)
    if x.ndim == 2:
        x = x.mean(axis=1)
    if np.issubdtype(data.dtype, np.integer):
        x = x / float(np.iinfo(data.dtype).max)
    return np.clip(x, -1.0, 1.0)


def export_codes(config: BridgeConfig) -> dict:
    """Run the requested encoder heads over the manifest; returns a summary
    {"files": [...], "dims": {kind: C}, "utterances": N}.
    """
    model = load_checkpoint(config.checkpoint).to(config.device)
    rows = load_manifest(config.manifest)
    config.out_dir.mkdir(parents=True, exist_ok=True)

    need_pitch = "frequency" in config.kinds
    mels: dict[tuple[str, str], torch.Tensor] = {}
    contours: dict[tuple[str, str], np.ndarray] = {}
    for row in rows:
        samples = load_wav(row.path)
        key = (row.speaker_id, row.utterance_id)
        mels[key] = features.mel_spectrogram(samples)
        if need_pitch:
            contours[key] = features.pitch_contour(samples)

    # frequency codes need per-speaker pitch statistics
    stats: dict[str, tuple[float, float]] = {}
    if need_pitch:
        by_speaker: dict[str, list[np.ndarray]] = {}
        for (sid, _), c in contours.items():
            by_speaker.setdefault(sid, []).append(c)
        stats = {sid: features.speaker_log_f0_stats(cs)
                 for sid, cs in by_speaker.items()}

    written, dims = [], {}
    for row in sorted(rows, key=lambda r: (r.speaker_id, r.utterance_id)):
        key = (row.speaker_id, row.utterance_id)
        for kind in config.kinds:
            if kind == "frequency":
                mean, std = stats[row.speaker_id]
                feats = torch.from_numpy(
                    features.quantize_pitch(contours[key], mean, std))
            else:
                feats = mels[key]
            codes = model.encode(kind, feats.to(config.device))
            values = codes.cpu().numpy()
            if values.shape[1] != mels[key].shape[1]:
                raise ValueError(
                    f"{row.speaker_id}/{row.utterance_id}: encoder produced "
                    f"{values.shape[1]} frames for {mels[key].shape[1]} "
                    "mel frames")
            out = config.out_dir / (
                f"{row.speaker_id}__{row.utterance_id}.{kind}.cdm")
            cdm.write_atomic(kind, values, out)
            written.append(str(out))
            dims[kind] = values.shape[0]
    return {"files": written, "dims": dims, "utterances": len(rows)}


def verify_parity(fixture_dir, mel_tolerance: float = MEL_TOLERANCE) -> dict:
    """Compare this package's features with the scoring side's dumps.

    The fixture directory holds, per fixture name, `<name>.wav` plus
    `<name>.mel.cdm` (raw_mel dump from the scoring package's feature
    extractor) and optionally `<name>.pitch.csv` (frame,f0_hz). Raises
    ValueError on missing fixtures or any disagreement above tolerance.
    """
    fixture_dir = Path(fixture_dir)
    wavs = sorted(fixture_dir.glob("*.wav"))
    if not wavs:
        raise ValueError(f"no fixture WAVs found in {fixture_dir}")
    report = {"fixtures": {}, "max_mel_abs_diff": 0.0}
    failures = []
    for wav in wavs:
        name = wav.stem
        mel_dump = fixture_dir / f"{name}.mel.cdm"
        if not mel_dump.is_file():
            raise ValueError(f"missing mel dump for fixture {name}")
        kind, theirs = cdm.read(mel_dump)
        if kind != "raw_mel":
            raise ValueError(f"{mel_dump}: expected a raw_mel dump, got {kind}")
        ours = features.mel_spectrogram(load_wav(wav)).numpy()
        entry = {}
        if ours.shape != theirs.shape:
            failures.append(f"{name}: mel shape {ours.shape} vs {theirs.shape}")
            entry["mel_abs_diff"] = float("inf")
        else:
            diff = float(np.abs(ours - theirs).max())
            entry["mel_abs_diff"] = diff
            report["max_mel_abs_diff"] = max(report["max_mel_abs_diff"], diff)
            if diff > mel_tolerance:
                failures.append(f"{name}: mel differs by {diff:.3g} "
                                f"(tolerance {mel_tolerance:g})")

        pitch_csv = fixture_dir / f"{name}.pitch.csv"
        if pitch_csv.is_file():
            with pitch_csv.open(newline="") as fh:
                their_f0 = np.array([float(r["f0_hz"])
                                     for r in csv.DictReader(fh)])
            our_f0 = features.pitch_contour(load_wav(wav))
            if our_f0.size != their_f0.size:
                failures.append(f"{name}: pitch frame count "
                                f"{our_f0.size} vs {their_f0.size}")
            else:
                voicing = (our_f0 > 0) == (their_f0 > 0)
                both = (our_f0 > 0) & (their_f0 > 0)
                worst = float(np.abs(our_f0[both] - their_f0[both]).max()) \
                    if both.any() else 0.0
                entry["voicing_agreement"] = float(voicing.mean())
                entry["max_f0_abs_diff_hz"] = worst
                if not voicing.all():
                    failures.append(f"{name}: voicing decisions disagree on "
                                    f"{int((~voicing).sum())} frame(s)")
                elif worst > F0_TOLERANCE_HZ:
                    failures.append(f"{name}: voiced f0 differs by "
                                    f"{worst:.3g} Hz")
        report["fixtures"][name] = entry
    if failures:
        raise ValueError("feature parity check failed: " + "; ".join(failures))
    return report
