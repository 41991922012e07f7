"""Command-line entry point.

Exit codes: 0 ok, 2 config error, 3 invariant failure, 4 budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import runner
from .config import ExperimentConfig, defaults, load_config, preset_config, validate
from .errors import BudgetError, ConfigError, SrtlabError

log = logging.getLogger("srtlab")

COMMANDS = ("dist-build", "renewal", "criteria", "probe", "mc", "report")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="srtlab", description="Renewal-theorem numerical laboratory")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="INI experiment file (applied on top of --preset)")
    ap.add_argument("--preset", help="pareto-0.7, 'pareto a=0.7 h=1', uao, twosided, half, ...")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--cache", help="renewal table cache directory")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--svg", action="store_true", help="emit SVG figures instead of PNG (report)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def resolve_config(args) -> ExperimentConfig:
    cfg = preset_config(args.preset) if args.preset else defaults()
    if args.config:
        cfg = load_config(args.config, base=cfg)
    for key in ("out", "cache", "seed", "threads"):
        val = getattr(args, key)
        if val is not None:
            cfg.run[key] = val
    return validate(cfg)


def _verdict_line(v: dict) -> str:
    if v["trend"] is not None:
        return f"{v['probe']}: {v['trend']}"
    vals = v["values"]
    if isinstance(vals, dict) and "sup" in vals:
        return f"{v['probe']}: sup = {vals['sup']:.6g}"
    return f"{v['probe']}: done"


def _summarize(command: str, result) -> str:
    if command == "dist-build":
        keep = ("family", "alpha", "h", "p", "q", "hash", "cluster_count")
        return json.dumps({k: result.get(k) for k in keep if k in result}, sort_keys=True)
    if command == "renewal":
        return (f"K={result['K']} srt_ratio(K)={result['srt_ratio_at_K']:.6f} "
                f"integrated_ratio(K)={result['integrated_ratio_at_K']:.6f} cache_hit={result['cache_hit']}")
    if command in ("criteria", "probe"):
        return "\n".join(_verdict_line(v) for v in result["verdicts"])
    if command == "mc":
        return f"{result['target']}: {result['estimate']:.6g} +- {result['stderr']:.3g}"
    return "\n".join(result.get("figures", []))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        fn = {
            "dist-build": runner.cmd_dist_build,
            "renewal": runner.cmd_renewal,
            "criteria": runner.cmd_criteria,
            "probe": runner.cmd_probe,
            "mc": runner.cmd_mc,
        }.get(args.command)
        result = runner.cmd_report(cfg, svg=args.svg) if fn is None else fn(cfg)
        print(_summarize(args.command, result))
        return 0
    except SrtlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except MemoryError:
        print("error: out of memory", file=sys.stderr)
        return BudgetError.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
