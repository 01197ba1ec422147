"""Command-line entry point: ``brpd analyze | synth | plots``.

Exit codes: 0 success, 1 usage error, 2 every recording failed. The output
directory may also be set with the ``BRPD_OUT`` environment variable; an
explicit ``--out`` wins.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import PipelineConfig, load_config
from .errors import BrpdError, ConfigError
from .pipeline import EXIT_OK, EXIT_USAGE, UsageError, run_pipeline
from .plots import emit_plots
from .synth import generate_cohort

ENV_OUT = "BRPD_OUT"
FIXTURES = ("default",)


def _out_dir(args, fallback: str) -> str:
    return args.out or os.environ.get(ENV_OUT) or fallback


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="brpd", description="inter-BRPD mental-effort analysis of EEG recordings")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="run the full pipeline over a directory of EDF + marker files")
    a.add_argument("input_dir")
    a.add_argument("--config", help="INI configuration file (defaults apply when omitted)")
    a.add_argument("--out", help=f"output directory (env {ENV_OUT})")
    a.add_argument("--jobs", type=int, default=1, help="recordings processed in parallel")

    s = sub.add_parser("synth", help="write a synthetic cohort fixture")
    s.add_argument("--fixture", default="default", choices=FIXTURES)
    s.add_argument("--out", help=f"output directory (env {ENV_OUT})")
    s.add_argument("--subjects", type=int, default=27)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--model", default="sinusoid", choices=("sinusoid", "bandlimited"))
    s.add_argument("--jobs", type=int, default=1)

    pl = sub.add_parser("plots", help="write plot-ready CSVs from a cohort report")
    pl.add_argument("report")
    pl.add_argument("--out", help=f"output directory (env {ENV_OUT})")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "analyze":
            cfg = load_config(args.config) if args.config else PipelineConfig().validate()
            if args.jobs < 1:
                raise UsageError("--jobs must be >= 1")
            return run_pipeline(cfg, args.input_dir, _out_dir(args, cfg.output_dir), jobs=args.jobs)
        if args.command == "synth":
            if args.subjects < 3:
                raise UsageError("--subjects must be >= 3")
            out = _out_dir(args, "brpd-fixture")
            manifest = generate_cohort(out, n_subjects=args.subjects, seed=args.seed,
                                       model=args.model, jobs=max(1, args.jobs))
            print(f"wrote {len(manifest['recordings'])} recordings to {out}")
            return EXIT_OK
        if args.command == "plots":
            if not os.path.isfile(args.report):
                raise UsageError(f"report {args.report} not found")
            paths = emit_plots(args.report, _out_dir(args, "brpd-plots"))
            for path in paths.values():
                print(path)
            return EXIT_OK
    except (UsageError, ConfigError, BrpdError) as exc:
        print(f"brpd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
