"""Encoder bridge: exports latent speech code matrices as CDM1 files."""
from .cdm import encode, read, write_atomic
from .export import (BridgeConfig, export_codes, load_manifest, load_wav,
                     verify_parity)
from .features import (mel_spectrogram, pitch_contour, quantize_pitch,
                       speaker_log_f0_stats)
from .model import (CodeEncoder, HParams, init_checkpoint, load_checkpoint,
                    save_checkpoint)

__version__ = "0.1.0"
