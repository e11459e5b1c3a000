"""Reference-based pathological speech intelligibility scoring.

Latent speech-code sequences of parallel utterances from a healthy
reference and an assessed speaker are time-aligned with dynamic time
warping; squared code differences are averaged into a per-speaker
intelligibility index and evaluated against subjective scores.
"""

__version__ = "0.1.0"

from .align import AlignedPair, WarpPath, align, dtw, frame_distance, warp
from .codes import (CodeKind, CodeMatrix, load_code_matrix,
                    mel_passthrough_codes, write_code_matrix)
from .errors import (FormatError, NoSpeechError, PathintelError,
                     ValidationError)
from .evaluate import (CdmFileProvider, MelPassthroughProvider,
                       EvaluationReport, ReferencePair, SpeakerRecord,
                       load_manifest, reference_pair_sweep, run_evaluation,
                       score_speaker, subsample_experiment)
from .features import (MelSpectrogram, PitchContour, QuantizedPitch,
                       extract_pitch, mel_spectrogram, quantize_pitch,
                       speaker_f0_stats)
from .preprocess import (Utterance, VadSegment, apply_vad,
                         detect_voice_activity, load_audio, preprocess,
                         trim_edges)
from .score import (DiffMatrix, IntelligibilityIndex, diff_matrix,
                    intelligibility_index)
from .stats import (CorrelationResult, correlate, linear_regression,
                    midranks, pearson, spearman, student_t_two_sided_p)
