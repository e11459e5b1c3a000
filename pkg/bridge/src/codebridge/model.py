"""Disentanglement encoder heads and checkpoint handling.

Three convolutional encoder heads map utterance features to latent code
sequences: content and rhythm read the 80-bin mel-spectrogram, frequency
reads the 257-dim quantized pitch. Hyperparameters live inside the
checkpoint ({"hparams": ..., "state_dict": ...}); the checkpoint's own
padding and widths are authoritative. No training code ships here; any
random sampling used as a training-time augmentation is absent from the
inference path, so repeated exports are bit-identical.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import torch
import torch.nn as nn

N_MEL_INPUT = 80
N_PITCH_INPUT = 257
CONTENT_DIM = 16


@dataclass(frozen=True)
class HParams:
    """Architecture knobs stored alongside the weights."""

    hidden: int = 128
    n_layers: int = 3
    kernel: int = 5
    content_dim: int = CONTENT_DIM
    rhythm_dim: int = 2
    frequency_dim: int = 32

    def __post_init__(self):
        if self.content_dim != CONTENT_DIM:
            raise ValueError(f"content bottleneck must be {CONTENT_DIM}, "
                             f"got {self.content_dim}")
        if self.kernel % 2 != 1:
            raise ValueError("kernel size must be odd (same-length output)")


class EncoderHead(nn.Module):
    """Conv stack producing one code sequence, same length as the input."""

    def __init__(self, in_dim: int, out_dim: int, hp: HParams):
        super().__init__()
        layers: list[nn.Module] = []
        width = in_dim
        for _ in range(hp.n_layers):
            layers += [nn.Conv1d(width, hp.hidden, hp.kernel,
                                 padding=hp.kernel // 2),
                       nn.GroupNorm(8, hp.hidden), nn.ReLU()]
            width = hp.hidden
        layers.append(nn.Conv1d(width, out_dim, 1))
        self.net = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class CodeEncoder(nn.Module):
    """The three heads behind one module so a checkpoint covers them all."""

    def __init__(self, hp: HParams):
        super().__init__()
        self.hparams = hp
        self.content = EncoderHead(N_MEL_INPUT, hp.content_dim, hp)
        self.rhythm = EncoderHead(N_MEL_INPUT, hp.rhythm_dim, hp)
        self.frequency = EncoderHead(N_PITCH_INPUT, hp.frequency_dim, hp)

    @torch.no_grad()
    def encode(self, kind: str, features: torch.Tensor) -> torch.Tensor:
        """features: (D, T) -> codes (C_kind, T); deterministic."""
        self.eval()
        head = {"content": self.content, "rhythm": self.rhythm,
                "frequency": self.frequency}.get(kind)
        if head is None:
            raise ValueError(f"no encoder head for kind {kind!r}")
        return head(features.unsqueeze(0)).squeeze(0)


def save_checkpoint(model: CodeEncoder, path) -> None:
    torch.save({"hparams": asdict(model.hparams),
                "state_dict": model.state_dict()}, path)


def load_checkpoint(path) -> CodeEncoder:
    """Build the architecture from the stored hparams and load weights."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    blob = torch.load(path, map_location="cpu", weights_only=True)
    if not isinstance(blob, dict) or "hparams" not in blob \
            or "state_dict" not in blob:
        raise ValueError(f"{path}: not an encoder checkpoint "
                         "(expected 'hparams' and 'state_dict')")
    try:
        hp = HParams(**blob["hparams"])
    except TypeError as exc:
        raise ValueError(f"{path}: unknown hyperparameter fields: {exc}")
    model = CodeEncoder(hp)
    try:
        model.load_state_dict(blob["state_dict"], strict=True)
    except RuntimeError as exc:
        raise ValueError(
            f"{path}: weights do not match the declared architecture: {exc}"
        ) from None
    model.eval()
    return model


def init_checkpoint(path, seed: int = 0, hp: HParams | None = None) -> None:
    """Write a randomly initialized checkpoint (fixtures, smoke tests)."""
    torch.manual_seed(seed)
    save_checkpoint(CodeEncoder(hp or HParams()), path)
