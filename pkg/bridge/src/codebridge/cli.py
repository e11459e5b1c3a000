"""Command-line entry points for the encoder bridge.

    codebridge export-codes --checkpoint P --manifest M \\
        --kinds content,rhythm,frequency --out DIR [--device cpu]
    codebridge verify-parity --fixtures DIR [--tolerance 1e-4]
    codebridge init-checkpoint --out P [--seed N]

Exit codes: 0 success, 1 validation failure, 2 I/O failure.
"""
from __future__ import annotations

import argparse
import sys

from .export import BridgeConfig, export_codes, verify_parity
from .model import init_checkpoint

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2


def cmd_export(args) -> int:
    config = BridgeConfig(checkpoint=args.checkpoint, manifest=args.manifest,
                          out_dir=args.out, device=args.device,
                          kinds=tuple(k.strip()
                                      for k in args.kinds.split(",") if k.strip()))
    summary = export_codes(config)
    dims = ", ".join(f"{k}: C={c}" for k, c in summary["dims"].items())
    print(f"exported {len(summary['files'])} file(s) for "
          f"{summary['utterances']} utterance(s) to {args.out} ({dims})")
    return EXIT_OK


def cmd_verify(args) -> int:
    report = verify_parity(args.fixtures, mel_tolerance=args.tolerance)
    for name, entry in report["fixtures"].items():
        extra = ""
        if "voicing_agreement" in entry:
            extra = (f", voicing agreement {entry['voicing_agreement']:.0%}, "
                     f"max f0 diff {entry['max_f0_abs_diff_hz']:.3g} Hz")
        print(f"{name}: max mel diff {entry['mel_abs_diff']:.3g}{extra}")
    print(f"parity OK (worst mel diff {report['max_mel_abs_diff']:.3g} "
          f"<= {args.tolerance:g})")
    return EXIT_OK


def cmd_init(args) -> int:
    init_checkpoint(args.out, seed=args.seed)
    print(f"wrote randomly initialized checkpoint {args.out} (seed {args.seed})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="codebridge",
        description="Export latent speech code matrices from a pretrained "
                    "encoder checkpoint as CDM1 files.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export-codes",
                       help="run encoder heads over a manifest of WAVs")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--kinds", default="content",
                   help="comma-separated: content,rhythm,frequency")
    p.add_argument("--out", required=True)
    p.add_argument("--device", default="cpu")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("verify-parity",
                       help="check feature agreement against scoring-side dumps")
    p.add_argument("--fixtures", required=True)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("init-checkpoint",
                       help="write a randomly initialized checkpoint")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_init)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
