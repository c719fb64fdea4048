"""Adapter command line: extract artifacts, validate emitted files.

Exit codes: 0 success, 1 validation failures, 2 bad invocation or inputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import AdapterError
from .formats import validate_outputs
from .synthetic import SYNTHETIC_MODEL, TASKS, AdapterJob, extract_artifacts


def cmd_extract(args) -> int:
    tasks = tuple(args.tasks.split(",")) if args.tasks else TASKS
    try:
        job = AdapterJob(frames_dir=args.frames, out_dir=args.out,
                         tasks=tasks, model=args.model, seed=int(args.seed),
                         device=args.device)
        fragment = extract_artifacts(job)
    except (AdapterError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    frag_path = Path(args.out) / "fragment.json"
    frag_path.write_text(json.dumps(fragment, sort_keys=True, indent=2) + "\n")
    n = (len(fragment["embeddings"]) + len(fragment["masks"])
         + ("tracks" in fragment))
    print(f"wrote {n} artifacts under {args.out}")
    return 0


def cmd_validate(args) -> int:
    out_dir = Path(args.dir)
    if not out_dir.is_dir():
        print(f"error: {out_dir} is not a directory", file=sys.stderr)
        return 2
    report = validate_outputs(out_dir)
    if not report:
        print(f"error: no artifacts found under {out_dir}", file=sys.stderr)
        return 2
    failures = 0
    for name, failure in report:
        if failure is None:
            print(f"pass {name}")
        else:
            failures += 1
            print(f"FAIL {name}: {failure}")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adapter",
        description="Extract embedding/mask/track artifacts from frame "
                    "directories in the evaluation suite's file formats.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="run extraction tasks on one video")
    p.add_argument("--frames", required=True,
                   help="frame directory (frame_*.png) or raw frames file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--tasks", default=None,
                   help=f"comma list from {','.join(TASKS)} (default: all)")
    p.add_argument("--seed", default=0, help="deterministic seed (default: 0)")
    p.add_argument("--model", default=SYNTHETIC_MODEL,
                   help="model identifier (default: synthetic, no weights)")
    p.add_argument("--device", default="cpu", help="device hint (default: cpu)")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("validate", help="schema-check emitted artifacts")
    p.add_argument("--dir", required=True, help="directory of emitted files")
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
