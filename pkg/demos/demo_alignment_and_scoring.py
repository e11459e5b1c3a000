"""Walk through the core math on tiny hand-made sequences.

Two short code sequences are aligned with dynamic time warping, their
squared differences are computed, and the per-speaker index is formed.
Run with:  python3 demos/demo_alignment_and_scoring.py
"""
import numpy as np

from pathintel import CodeKind, CodeMatrix, align, diff_matrix, intelligibility_index

# A reference utterance and a slower rendition of the same content.
ref = CodeMatrix(CodeKind.RHYTHM, np.array([[1.0, 2.0, 3.0, 2.0, 1.0]]))
slow = CodeMatrix(CodeKind.RHYTHM, np.array([[1.0, 1.0, 2.0, 3.0, 3.0, 2.0, 1.0]]))

pair, path = align(ref, slow)
print("warping path:", path.pairs)
print("total alignment cost:", path.total_cost)
print("ref warped:  ", pair.ref_warped[0])
print("other warped:", pair.other_warped[0])

# Identical content at a different speaking rate aligns with zero cost.
assert path.total_cost == 0.0

# Now distort the subject's codes and watch the index react.
rng = np.random.default_rng(0)
noise = rng.normal(size=slow.values.shape)
print("\nindex vs. distortion level:")
for eps in (0.0, 0.1, 0.3, 0.6, 1.0):
    distorted = CodeMatrix(CodeKind.RHYTHM, slow.values + eps * noise)
    pair, _ = align(ref, distorted)
    idx = intelligibility_index([diff_matrix(pair)], speaker_id="demo")
    print(f"  eps = {eps:.1f}  ->  I = {idx.value:.4f}")
