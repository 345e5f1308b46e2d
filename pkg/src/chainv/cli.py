"""Command line interface.

Commands: ``select`` (traces to hints), ``score`` (per-kind score table),
``run`` (scripted harness), ``metrics`` (efficiency table from result
files), ``render`` (one-off hint sentence). Exit codes: 0 on success, 1 for
usage errors, 2 for data errors such as missing files, malformed records,
or misaligned scripts. Flags are long-form only. The ``CHAINV_LOG``
environment variable (``error``, ``info``, ``debug``) controls logging.
"""

from __future__ import annotations

import argparse
import logging
import os
import re
import sys

from . import __version__
from .config import EngineConfig, load_config
from .errors import ChainVError
from .harness import (
    index_traces,
    load_script,
    read_run_reports,
    run_sessions,
    summarize_runs,
    write_run_reports,
)
from .patch_selection import MIN_TOP_K
from .pipeline import candidate_hints, hint_records
from .scheduler import render_hint_text
from .trace_model import (
    HINT_KINDS,
    QUALITY_LABELS,
    VERTEX_COUNTS,
    HintRecord,
    read_trace_records,
    write_hint_records,
)

log = logging.getLogger("chainv")

USAGE_EXIT = 1
DATA_EXIT = 2

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage problems with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _setup_logging() -> None:
    name = os.environ.get("CHAINV_LOG", "error").strip().lower()
    level = _LOG_LEVELS.get(name)
    if level is None:
        level = logging.ERROR
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    log.setLevel(level)


def _load_engine_config(path) -> EngineConfig:
    if path is None:
        return EngineConfig()
    return load_config(path)


def _data_error(message: str) -> int:
    print(f"chainv: error: {message}", file=sys.stderr)
    return DATA_EXIT


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_select(args) -> int:
    cfg = _load_engine_config(args.config)
    cfg = EngineConfig(**{**_cfg_dict(cfg), "k": args.k})
    records = read_trace_records(args.trace)
    hints: list[HintRecord] = []
    for record in records:
        hints.extend(hint_records(record, cfg, all_hints=args.all_hints))
    write_hint_records(args.out, hints)
    log.info("select: %d trace records -> %d hints -> %s",
             len(records), len(hints), args.out)
    return 0


def _cfg_dict(cfg: EngineConfig) -> dict:
    return {
        "k": cfg.k,
        "eps": cfg.eps,
        "line_thickness": cfg.line_thickness,
        "pixel_map_mode": cfg.pixel_map_mode,
        "enable_visual_assistant": cfg.enable_visual_assistant,
        "enable_patch_selection": cfg.enable_patch_selection,
        "enable_atomic_hints": cfg.enable_atomic_hints,
        "enable_reliability": cfg.enable_reliability,
        "reliability_rendering": cfg.reliability_rendering,
        "insertion_mode": cfg.insertion_mode,
        "scheduler": cfg.scheduler,
    }


def cmd_score(args) -> int:
    cfg = _load_engine_config(args.config)
    cfg = EngineConfig(**{**_cfg_dict(cfg), "k": args.k})
    records = read_trace_records(args.trace)
    print(f"{'session':<12} {'step':>4} {'kind':<9} {'mean_attention':>15} "
          f"{'consistency':>12} {'quality':<7}")
    for record in records:
        for hint in candidate_hints(record, cfg):
            print(f"{record.session_id:<12} {record.step:>4} {hint.kind:<9} "
                  f"{hint.mean_attention:>15.6f} {hint.consistency:>12.6f} "
                  f"{hint.quality:<7}")
    return 0


def cmd_run(args) -> int:
    cfg = _load_engine_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    scripts = load_script(args.script)
    traces = index_traces(read_trace_records(args.trace)) if args.trace else {}
    reports = run_sessions(scripts, traces, cfg)
    write_run_reports(args.out, reports)
    if args.hints_out:
        hints = [h for report in reports for h in report.hints]
        write_hint_records(args.hints_out, hints)
    summary = summarize_runs(reports)
    log.info("run: %d sessions, mean tokens %.2f, mean waits %.2f, wall %.3fs",
             summary.count, summary.mean_output_tokens, summary.mean_wait_tokens,
             sum(r.wall_time or 0.0 for r in reports))
    return 0


def cmd_metrics(args) -> int:
    results = read_run_reports(args.results)
    baseline = read_run_reports(args.baseline)
    result_ids = sorted(r.session_id for r in results)
    baseline_ids = sorted(r.session_id for r in baseline)
    if result_ids != baseline_ids:
        raise ChainVError("results and baseline cover different session ids")
    method = summarize_runs(results, baseline=baseline, t_max=args.t_max)
    base = summarize_runs(baseline, baseline=baseline, t_max=args.t_max)
    print(f"{'method':<10} {'sessions':>8} {'mean_tokens':>12} "
          f"{'mean_waits':>11} {'rep':>10}")
    for name, summary in (("results", method), ("baseline", base)):
        rep_text = f"{summary.rep:.2f}" if summary.rep is not None else "n/a"
        print(f"{name:<10} {summary.count:>8} {summary.mean_output_tokens:>12.2f} "
              f"{summary.mean_wait_tokens:>11.2f} {rep_text:>10}")
    return 0


_VERTEX_RE = re.compile(r"\((-?\d+),(-?\d+)\)")


def _parse_vertices(text: str, parser: argparse.ArgumentParser) -> tuple:
    matches = _VERTEX_RE.findall(text)
    rebuilt = ",".join(f"({x},{y})" for x, y in matches)
    if not matches or rebuilt != text:
        parser.error("--vertices must look like (x1,y1),(x2,y2)[,(x3,y3)]")
    return tuple((int(x), int(y)) for x, y in matches)


def cmd_render(args, parser) -> int:
    vertices = _parse_vertices(args.vertices, parser)
    if len(vertices) != VERTEX_COUNTS[args.kind]:
        parser.error(f"{args.kind} needs {VERTEX_COUNTS[args.kind]} vertices")
    cfg = _load_engine_config(args.config)
    hint = HintRecord(
        session_id="cli",
        step=0,
        hint_kind=args.kind,
        vertices=vertices,
        mean_attention=0.0,
        consistency=args.consistency,
        quality=args.quality,
        rendered_text="",
    )
    print(render_hint_text(hint, cfg.scheduler, args.rendering))
    return 0


# ---------------------------------------------------------------------------
# wiring
# ---------------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="chainv", description=__doc__, allow_abbrev=False)
    parser.add_argument("--version", action="version", version=f"chainv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_select = sub.add_parser("select", allow_abbrev=False,
                              help="build hint records from a trace stream")
    p_select.add_argument("--trace", required=True)
    p_select.add_argument("--out", required=True)
    p_select.add_argument("--k", type=int, default=3)
    p_select.add_argument("--all-hints", action="store_true")
    p_select.add_argument("--config", default=None)

    p_score = sub.add_parser("score", allow_abbrev=False,
                             help="print per-kind attention and consistency scores")
    p_score.add_argument("--trace", required=True)
    p_score.add_argument("--k", type=int, default=3)
    p_score.add_argument("--config", default=None)

    p_run = sub.add_parser("run", allow_abbrev=False,
                           help="mock-decode a script against a trace stream")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--script", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--trace", default=None)
    p_run.add_argument("--hints-out", default=None)
    p_run.add_argument("--seed", type=int, default=None)

    p_metrics = sub.add_parser("metrics", allow_abbrev=False,
                               help="efficiency table for results vs a baseline")
    p_metrics.add_argument("--results", required=True)
    p_metrics.add_argument("--baseline", required=True)
    p_metrics.add_argument("--t-max", type=float, required=True)

    p_render = sub.add_parser("render", allow_abbrev=False,
                              help="render one hint sentence")
    p_render.add_argument("--kind", choices=HINT_KINDS, required=True)
    p_render.add_argument("--vertices", required=True)
    p_render.add_argument("--quality", choices=QUALITY_LABELS, default="high")
    p_render.add_argument("--consistency", type=float, default=0.0)
    p_render.add_argument("--rendering", default="words")
    p_render.add_argument("--config", default=None)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "k", None) is not None and args.k < MIN_TOP_K:
        parser.error(f"--k must be >= {MIN_TOP_K}")
    if args.command == "metrics" and args.t_max <= 0:
        parser.error("--t-max must be positive")
    try:
        if args.command == "select":
            return cmd_select(args)
        if args.command == "score":
            return cmd_score(args)
        if args.command == "run":
            return cmd_run(args)
        if args.command == "metrics":
            return cmd_metrics(args)
        if args.command == "render":
            return cmd_render(args, parser)
    except ChainVError as exc:
        line = getattr(exc, "line_no", None)
        prefix = f"line {line}: " if line else ""
        return _data_error(prefix + str(exc))
    except FileNotFoundError as exc:
        return _data_error(f"{exc.filename}: no such file")
    except OSError as exc:
        return _data_error(str(exc))
    raise AssertionError("unreachable command")


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
