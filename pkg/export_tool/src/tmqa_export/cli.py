"""Export-tool CLI: `export` writes a model package, `verify` checks it
against the reference forward pass."""

import argparse
import sys

from tonemap_iqa.errors import TonemapIqaError

from .export import (
    GraphValidationFailureError,
    ParityFailureError,
    export_backbone,
    verify_export,
)
from .trunk import CheckpointUnavailableError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tonemap-iqa-export", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="write a model package from a checkpoint")
    p.add_argument("--checkpoint", required=True,
                   help="torchvision:<TAG>, random:<seed>, or a state-dict path")
    p.add_argument("--out", required=True, help="output package directory")

    p = sub.add_parser("verify", help="parity-check a package against its checkpoint")
    p.add_argument("--package", required=True, help="model package directory")
    p.add_argument("--probe", default=None, help="probe image (default: seeded random)")

    args = parser.parse_args(argv)
    try:
        if args.command == "export":
            manifest = export_backbone(args.checkpoint, args.out)
            print(f"{args.out}: {len(manifest['tap_layers'])} taps, "
                  f"strides {sorted(set(manifest['output_stride'].values()))}")
        else:
            diffs = verify_export(args.package, args.probe)
            worst = max(diffs.values())
            print(f"parity OK: 13 taps, worst max abs diff {worst:.2e}")
        return 0
    except (CheckpointUnavailableError, GraphValidationFailureError, ParityFailureError,
            TonemapIqaError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
