"""Command line capture tool.

``trace-extract --model toy:seed=7 --prompt-file prompts.txt --out x.trace``
captures one session per prompt line. Exit codes: 0 success, 1 usage
errors, 2 extraction/schema/data errors.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ExtractorError
from .extractor import (
    LAYER_POLICIES,
    ExtractionConfig,
    capture_run,
    install_hooks,
    load_model,
    verify_roundtrip,
)
from .wire import write_trace

USAGE_EXIT = 1
DATA_EXIT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _build_parser() -> _Parser:
    parser = _Parser(prog="trace-extract", description=__doc__,
                     allow_abbrev=False)
    parser.add_argument("--model", required=True)
    parser.add_argument("--prompt-file", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--steps", type=int, default=10,
                        help="generation bursts per session (default 10)")
    parser.add_argument("--layer-policy", choices=LAYER_POLICIES,
                        default="last_hidden")
    parser.add_argument("--attn-layer", type=int, default=-1)
    parser.add_argument("--n-a-window", type=int, default=4)
    parser.add_argument("--verify", action="store_true",
                        help="round-trip the capture through the engine CLI")
    parser.add_argument("--engine-cmd", default="chainv",
                        help="engine command for --verify (default: chainv)")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.steps < 1:
        parser.error("--steps must be >= 1")
    if args.n_a_window < 2:
        parser.error("--n-a-window must be >= 2")
    try:
        cfg = ExtractionConfig(model_id=args.model,
                               layer_policy=args.layer_policy,
                               attn_layer=args.attn_layer,
                               n_a_window=args.n_a_window)
        with open(args.prompt_file, "r", encoding="utf-8") as handle:
            prompts = [line.strip() for line in handle if line.strip()]
        if not prompts:
            raise ExtractorError("prompt file has no prompts")
        all_records = []
        total_skipped = 0
        for index, prompt in enumerate(prompts, start=1):
            session = load_model(args.model, prompt, cfg)
            hooked = install_hooks(session, cfg)
            records, skipped = capture_run(hooked, f"capture-{index:03d}",
                                           args.steps)
            all_records.extend(records)
            total_skipped += skipped
        write_trace(args.out, all_records)
        print(f"captured {len(all_records)} records from {len(prompts)} "
              f"session(s) ({total_skipped} skipped) -> {args.out}")
        if args.verify:
            report = verify_roundtrip(args.out, tuple(args.engine_cmd.split()))
            status = "clean" if report.clean else "NOT clean"
            print(f"roundtrip: {report.records} records, parse rate "
                  f"{report.parse_rate:.2f}, {report.hint_count} hints, "
                  f"{status}")
            if not report.clean:
                return DATA_EXIT
        return 0
    except ExtractorError as exc:
        print(f"trace-extract: error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except FileNotFoundError as exc:
        print(f"trace-extract: error: {exc.filename}: no such file",
              file=sys.stderr)
        return DATA_EXIT
    except OSError as exc:
        print(f"trace-extract: error: {exc}", file=sys.stderr)
        return DATA_EXIT


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
