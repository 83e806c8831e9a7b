"""plots <kind> --in <dir> --out <file.png>

Exit codes: 0 success, 2 bad arguments or schema mismatch (with a column
diff on stderr).
"""

from __future__ import annotations

import argparse
import sys

from .figures import FigureSpec, render
from .schema import KINDS, SchemaError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plots", description="Regenerate figures from experiment CSV outputs"
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"render the {kind} figure")
        p.add_argument("--in", dest="in_dir", required=True, help="experiment output directory")
        p.add_argument("--out", dest="out_path", required=True, help="output image path")
        p.add_argument("--title", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(kind=args.kind, in_dir=args.in_dir, out_path=args.out_path, title=args.title)
    try:
        path = render(spec)
    except SchemaError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
