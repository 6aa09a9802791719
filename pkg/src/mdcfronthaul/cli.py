"""Command-line entry point: ``sweep``, ``summarize`` and ``validate``.

Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 solver failure.
"""

import argparse
import logging
import sys
from dataclasses import replace

from . import experiments
from .errors import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_SOLVER = 0, 1, 2, 3

log = logging.getLogger("mdcfronthaul")


def _parser():
    p = argparse.ArgumentParser(prog="mdcfronthaul",
                                description="MDC / path-diversity fronthaul sweeps")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("sweep", help="run a configured parameter sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--mc-trials", type=int, default=None,
                   help="Monte Carlo trials per row (overrides trials_mc)")
    m = sub.add_parser("summarize", help="average a sweep CSV over channel seeds")
    m.add_argument("--in", dest="inp", required=True)
    m.add_argument("--out", required=True)
    v = sub.add_parser("validate", help="check a configuration without running it")
    v.add_argument("--config", required=True)
    return p


def _load(path):
    try:
        return experiments.load_spec(path), None
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return None, EXIT_CONFIG
    except OSError as exc:
        log.error("cannot read %s: %s", path, exc)
        return None, EXIT_IO


def _sweep(args):
    spec, code = _load(args.config)
    if spec is None:
        return code
    if args.jobs < 1:
        log.error("--jobs must be >= 1")
        return EXIT_CONFIG
    if args.mc_trials is not None:
        if args.mc_trials < 0:
            log.error("--mc-trials must be >= 0")
            return EXIT_CONFIG
        spec = replace(spec, trials_mc=args.mc_trials)
    try:
        rows = experiments.run_sweep(spec, jobs=args.jobs)
    except Exception:
        log.exception("solver failure")
        return EXIT_SOLVER
    try:
        experiments.emit_csv(rows, args.out)
    except OSError as exc:
        log.error("cannot write %s: %s", args.out, exc)
        return EXIT_IO
    log.info("wrote %d rows to %s", len(rows), args.out)
    return EXIT_OK


def _summarize(args):
    try:
        rows = experiments.read_csv(args.inp)
    except OSError as exc:
        log.error("cannot read %s: %s", args.inp, exc)
        return EXIT_IO
    except (ValueError, TypeError) as exc:
        log.error("malformed sweep file %s: %s", args.inp, exc)
        return EXIT_IO
    try:
        experiments.emit_summary(experiments.summarize(rows), args.out)
    except OSError as exc:
        log.error("cannot write %s: %s", args.out, exc)
        return EXIT_IO
    return EXIT_OK


def _validate(args):
    spec, code = _load(args.config)
    if spec is None:
        return code
    print(f"ok: {experiments.expected_row_count(spec)} rows")
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    return {"sweep": _sweep, "summarize": _summarize, "validate": _validate}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
