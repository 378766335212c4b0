"""Command line interface.

    gmclab <experiment> --config FILE [--seed S] [--workers W] [--out PATH]
    gmclab kappa --gamma-sq X
    gmclab report --in FILE --format {csv,json}

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

from .errors import ConfigError, NumericError, GmcLabError
from .experiments import experiment_names
from .harness import load_config, read_results, run_experiment
from .integrals import kappa, kappa_closed_form


def _build_parser():
    parser = argparse.ArgumentParser(prog="gmclab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name in experiment_names():
        if name == "kappa":
            continue
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="config file with a [%s] section" % name)
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument("--workers", type=int, default=None, help="override worker count")
        p.add_argument("--out", default=None, help="override records output path")

    pk = sub.add_parser("kappa", help="evaluate the oscillatory variance integral")
    pk.add_argument("--gamma-sq", type=float, required=True)

    pr = sub.add_parser("report", help="summarize a records file")
    pr.add_argument("--in", dest="path", required=True)
    pr.add_argument("--format", choices=("csv", "json"), default="json")
    return parser


def _cmd_experiment(args) -> int:
    config = load_config(args.config, args.command)
    if args.seed is not None:
        config.master_seed = args.seed
    if args.workers is not None:
        config.workers = args.workers
    if args.out is not None:
        config.output_path = args.out
    config.validate()
    report = run_experiment(config)
    json.dump(report, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def _cmd_kappa(args) -> int:
    gsq = args.gamma_sq
    if not 0.0 <= gsq < 1.0:
        raise ConfigError(f"--gamma-sq must lie in [0, 1), got {gsq}")
    result = kappa(math.sqrt(gsq))
    if not result.converged:
        raise NumericError(
            f"kappa quadrature failed to converge "
            f"(error estimate {result.abs_error_estimate:.2e})")
    out = {
        "gamma_sq": gsq,
        "value": result.value,
        "abs_error_estimate": result.abs_error_estimate,
        "evaluations": result.evaluations,
        "closed_form": kappa_closed_form(math.sqrt(gsq)),
    }
    json.dump(out, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def _cmd_report(args) -> int:
    records = read_results(args.path)
    if args.format == "json":
        json.dump([{"replica_index": r.replica_index, "seed": r.seed,
                    "wall_time_ms": r.wall_time_ms, "payload": r.payload}
                   for r in records], sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
        return 0

    # csv: one row per replica, scalar payload fields as columns
    if not records:
        sys.stdout.write("replica_index,seed,wall_time_ms\n")
        return 0
    scalar_keys = sorted(k for k, v in records[0].payload.items()
                         if isinstance(v, (int, float, bool)))
    writer = csv.writer(sys.stdout)
    writer.writerow(["replica_index", "seed", "wall_time_ms"] + scalar_keys)
    for r in records:
        row = [r.replica_index, r.seed, r.wall_time_ms]
        row += [format(r.payload.get(k, ""), ".17g")
                if isinstance(r.payload.get(k), float) else r.payload.get(k, "")
                for k in scalar_keys]
        writer.writerow(row)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "kappa":
            return _cmd_kappa(args)
        if args.command == "report":
            return _cmd_report(args)
        return _cmd_experiment(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except GmcLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
