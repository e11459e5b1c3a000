"""Command-line interface binding the scoring pipeline into reproducible
batch commands.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 internal error.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from . import __version__
from .align import align
from .codes import CodeKind, load_code_matrix, mel_passthrough_codes, write_code_matrix
from .errors import PathintelError, ValidationError
from .evaluate import (CdmFileProvider, MelPassthroughProvider, ReferencePair,
                       load_manifest, run_evaluation, subsample_experiment)
from .features import extract_pitch, mel_spectrogram
from .preprocess import (apply_vad, detect_voice_activity, load_audio,
                         trim_edges)
from .score import diff_matrix, intelligibility_index

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_INTERNAL = 3

# defaults mirror the pipeline constants; every one is overridable by
# config file or flag, and flags win over the config file
DEFAULTS = {
    "trim": 0.15,
    "vad_frame_ms": 25.0,
    "vad_hop_ms": 10.0,
    "vad_threshold_db": -35.0,
    "vad_min_frames": 3,
    "band": 0,          # 0 disables the Sakoe-Chiba constraint
    "index_mode": "grand-mean",
    "provider": "mel-passthrough",
    "seed": 0,
    "threads": 0,       # 0 = all available cores
}


def read_config(path) -> dict:
    """Parse a key = value config file; '#' starts a comment."""
    cfg = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ValidationError(f"{path}:{lineno}: unknown config key {key!r}")
        kind = type(DEFAULTS[key])
        cfg[key] = value if kind is str else kind(float(value) if kind is int else value)
    return cfg


def _settings(args) -> dict:
    """Layer defaults < config file < explicit flags."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(read_config(args.config))
    for key in DEFAULTS:
        flag = key.replace("-", "_")
        val = getattr(args, flag, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _provider(cfg):
    if cfg["provider"] == "cdm-files":
        return CdmFileProvider()
    if cfg["provider"] == "mel-passthrough":
        return MelPassthroughProvider(trim_fraction=cfg["trim"],
                                      vad_threshold_db=cfg["vad_threshold_db"])
    raise ValidationError(f"unknown provider {cfg['provider']!r}")


def _threads(cfg) -> int:
    return cfg["threads"] if cfg["threads"] > 0 else (os.cpu_count() or 1)


def _band(cfg):
    return cfg["band"] if cfg["band"] > 0 else None


def _load_codes(path: str, cfg):
    """A WAV goes through the preprocessing + mel pipeline; a .cdm loads as-is."""
    if path.endswith(".cdm"):
        return load_code_matrix(path, utterance_id=Path(path).stem)
    u = load_audio(path)
    u = trim_edges(u, cfg["trim"])
    segs = detect_voice_activity(u, cfg["vad_frame_ms"], cfg["vad_hop_ms"],
                                 cfg["vad_threshold_db"], cfg["vad_min_frames"])
    u = apply_vad(u, segs, cfg["vad_frame_ms"], cfg["vad_hop_ms"])
    return mel_passthrough_codes(mel_spectrogram(u))


def _write_report(path, payload: dict) -> None:
    """Deterministic body; volatile metadata segregated under 'meta'."""
    doc = dict(payload)
    doc["meta"] = {"tool": "pathintel", "version": __version__,
                   "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_scatter_csv(path, scatter: list) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["speaker_id", "group", "subjective", "index"])
        for row in scatter:
            w.writerow([row["speaker_id"], row["group"],
                        row["subjective"], row["index"]])


def _write_scatter_svg(path, scatter: list, regression=None) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for group, marker in (("control", "o"), ("pathological", "x")):
        xs = [r["subjective"] for r in scatter if r["group"] == group]
        ys = [r["index"] for r in scatter if r["group"] == group]
        ax.scatter(xs, ys, marker=marker, label=group)
    if regression:
        xs = np.array([r["subjective"] for r in scatter if r["subjective"] is not None])
        if xs.size:
            grid = np.linspace(xs.min(), xs.max(), 2)
            ax.plot(grid, regression["slope"] * grid + regression["intercept"],
                    "k--", label="least-squares fit")
    ax.set_xlabel("subjective intelligibility [%]")
    ax.set_ylabel("intelligibility index I")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def cmd_preprocess(args) -> int:
    cfg = _settings(args)
    u = load_audio(args.input)
    u = trim_edges(u, cfg["trim"])
    segs = detect_voice_activity(u, cfg["vad_frame_ms"], cfg["vad_hop_ms"],
                                 cfg["vad_threshold_db"], cfg["vad_min_frames"])
    out = apply_vad(u, segs, cfg["vad_frame_ms"], cfg["vad_hop_ms"])
    wavfile.write(args.output, out.sample_rate, out.samples.astype(np.float32))
    print(f"{args.input}: {len(segs)} voiced segment(s), "
          f"{out.duration:.3f}s of {u.duration:.3f}s kept")
    for seg in segs:
        print(f"  frames [{seg.start_frame}, {seg.end_frame}) "
              f"mean energy {seg.mean_energy:.1f} dB")
    return EXIT_OK


def cmd_features(args) -> int:
    cfg = _settings(args)
    u = load_audio(args.input)
    if not args.no_preprocess:
        u = trim_edges(u, cfg["trim"])
        segs = detect_voice_activity(u, cfg["vad_frame_ms"], cfg["vad_hop_ms"],
                                     cfg["vad_threshold_db"], cfg["vad_min_frames"])
        u = apply_vad(u, segs, cfg["vad_frame_ms"], cfg["vad_hop_ms"])
    mel = mel_spectrogram(u)
    write_code_matrix(mel_passthrough_codes(mel), args.mel_out)
    print(f"wrote mel dump {args.mel_out} ({mel.bins.shape[0]}x{mel.T})")
    if args.pitch_out:
        contour = extract_pitch(u)
        with Path(args.pitch_out).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["frame", "f0_hz"])
            for k, hz in enumerate(contour.f0):
                w.writerow([k, f"{hz:.6f}"])
        print(f"wrote pitch contour {args.pitch_out} ({contour.T} frames)")
    return EXIT_OK


def cmd_score_pair(args) -> int:
    cfg = _settings(args)
    ref = _load_codes(args.reference, cfg)
    subj = _load_codes(args.subject, cfg)
    if ref.kind is not subj.kind:
        raise ValidationError(
            f"code kind mismatch: {ref.kind.name} vs {subj.kind.name}"
        )
    pair, path = align(ref, subj, band=_band(cfg))
    phi = diff_matrix(pair, utterance_id=subj.utterance_id)
    idx = intelligibility_index([phi], speaker_id=subj.speaker_id,
                                mode=cfg["index_mode"])
    print(f"kind={ref.kind.name} C={ref.C} T_ref={ref.T} T_subj={subj.T} "
          f"K={pair.K}")
    print(f"dtw_cost={path.total_cost:.6f}")
    print(f"phi_mean={phi.values.mean():.9f} phi_max={phi.values.max():.9f}")
    print(f"index={idx.value:.9f}")
    if args.dump_path:
        Path(args.dump_path).write_text(json.dumps(
            {"cost": path.total_cost, "pairs": [list(p) for p in path.pairs]}
        ) + "\n")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _settings(args)
    manifest = load_manifest(args.manifest)
    refpair = _parse_refpair(args.refpair)
    report = run_evaluation(manifest, refpair, _provider(cfg),
                            mode=cfg["index_mode"], band=_band(cfg),
                            threads=_threads(cfg), config=cfg)
    _write_report(args.out, report.as_dict())
    if args.scatter_csv:
        _write_scatter_csv(args.scatter_csv, report.scatter)
    if args.svg:
        reg = (report.correlation_all.as_dict()["regression"]
               if report.correlation_all else None)
        _write_scatter_svg(args.svg, report.scatter, reg)
    if report.correlation_all:
        c = report.correlation_all
        print(f"-all: R={c.pearson_r:.4f} (p={c.pearson_p:.3g}) "
              f"Rs={c.spearman_r:.4f} (p={c.spearman_p:.3g}) n={c.n}")
    if report.correlation_pat:
        c = report.correlation_pat
        print(f"-pat: R={c.pearson_r:.4f} (p={c.pearson_p:.3g}) "
              f"Rs={c.spearman_r:.4f} (p={c.spearman_p:.3g}) n={c.n}")
    print(f"report written to {args.out}")
    return EXIT_OK


def cmd_subsample(args) -> int:
    cfg = _settings(args)
    manifest = load_manifest(args.manifest)
    refpair = _parse_refpair(args.refpair)
    result = subsample_experiment(
        manifest, refpair, _provider(cfg),
        n_utterances=args.n, iterations=args.iterations, seed=cfg["seed"],
        mode=cfg["index_mode"], band=_band(cfg), threads=_threads(cfg),
    )
    if args.out:
        _write_report(args.out, result)
    print(f"R = {result['mean_r']:.4f} +- {result['std_r']:.4f}   "
          f"Rs = {result['mean_rs']:.4f} +- {result['std_rs']:.4f}   "
          f"worst p = {result['worst_p']:.3g}")
    return EXIT_OK


def cmd_export_scatter(args) -> int:
    report = json.loads(Path(args.report).read_text())
    scatter = report.get("scatter")
    if scatter is None:
        raise ValidationError(f"{args.report}: no scatter data in report")
    _write_scatter_csv(args.csv, scatter)
    print(f"wrote {args.csv} ({len(scatter)} rows)")
    if args.svg:
        corr = report.get("correlation_all") or {}
        _write_scatter_svg(args.svg, scatter, corr.get("regression"))
        print(f"wrote {args.svg}")
    return EXIT_OK


def _parse_refpair(spec: str) -> ReferencePair:
    parts = [s.strip() for s in spec.split(",")]
    if len(parts) != 2 or not all(parts):
        raise ValidationError(
            "reference pair must be 'FEMALE_ID,MALE_ID'"
        )
    return ReferencePair(female_ref=parts[0], male_ref=parts[1])


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file; flags win")
    p.add_argument("--trim", type=float, default=None,
                   help=f"edge trim fraction (default {DEFAULTS['trim']})")
    p.add_argument("--vad-threshold-db", type=float, default=None,
                   help=f"VAD threshold relative to peak frame RMS "
                        f"(default {DEFAULTS['vad_threshold_db']} dB)")
    p.add_argument("--vad-frame-ms", type=float, default=None,
                   help=f"VAD frame length (default {DEFAULTS['vad_frame_ms']} ms)")
    p.add_argument("--vad-hop-ms", type=float, default=None,
                   help=f"VAD hop (default {DEFAULTS['vad_hop_ms']} ms)")
    p.add_argument("--vad-min-frames", type=int, default=None,
                   help=f"minimum voiced segment length "
                        f"(default {DEFAULTS['vad_min_frames']} frames)")
    p.add_argument("--band", type=int, default=None,
                   help="Sakoe-Chiba DTW band half-width, 0 = unconstrained "
                        "(default 0)")
    p.add_argument("--index-mode", choices=("grand-mean", "per-utterance-mean"),
                   default=None, help="index aggregation (default grand-mean)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads, 0 = all cores (default 0)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pathintel",
        description="Reference-based pathological speech intelligibility "
                    "scoring from latent speech codes.",
    )
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="trim edges, then keep voiced audio")
    p.add_argument("input"), p.add_argument("output")
    _add_common(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("features", help="dump mel features (raw-mel CDM1)")
    p.add_argument("input")
    p.add_argument("mel_out")
    p.add_argument("--pitch-out", help="also write a per-frame F0 CSV")
    p.add_argument("--no-preprocess", action="store_true",
                   help="skip trimming and VAD before feature extraction")
    _add_common(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("score-pair",
                       help="index for one reference/subject pair "
                            "(WAV or .cdm inputs)")
    p.add_argument("reference"), p.add_argument("subject")
    p.add_argument("--dump-path", help="write the DTW path as JSON")
    _add_common(p)
    p.set_defaults(func=cmd_score_pair)

    p = sub.add_parser("evaluate", help="full corpus evaluation report")
    p.add_argument("--manifest", required=True)
    p.add_argument("--refpair", required=True, metavar="FEMALE_ID,MALE_ID")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--provider", choices=("mel-passthrough", "cdm-files"),
                   default=None, help="code source (default mel-passthrough)")
    p.add_argument("--scatter-csv", help="also write scatter CSV")
    p.add_argument("--svg", help="also write an SVG scatter plot")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("subsample", help="subsampling robustness experiment")
    p.add_argument("--manifest", required=True)
    p.add_argument("--refpair", required=True, metavar="FEMALE_ID,MALE_ID")
    p.add_argument("--n", type=int, default=20, help="utterances per speaker")
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default 0)")
    p.add_argument("--provider", choices=("mel-passthrough", "cdm-files"),
                   default=None)
    p.add_argument("--out", help="write the summary as JSON")
    _add_common(p)
    p.set_defaults(func=cmd_subsample)

    p = sub.add_parser("export-scatter",
                       help="scatter CSV/SVG from an existing report")
    p.add_argument("--report", required=True)
    p.add_argument("--csv", required=True)
    p.add_argument("--svg")
    p.set_defaults(func=cmd_export_scatter)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, PathintelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, FileNotFoundError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # pragma: no cover
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
