"""Command line interface.

    survmult run --dataset FD001 --data-dir data/CMAPSSData --out results
    survmult ingest|train|analyze|sweep --dataset FD001 --out results
    survmult report results/
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .cmapss import SUBSETS
from .config import load_config
from .exceptions import SurvmultError
from .pipeline import Experiment, read_report_csv

logger = logging.getLogger("survmult")

STAGES = ("ingest", "train", "analyze", "sweep", "run")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}")


def _datasets(text):
    return [s.strip().upper() for s in text.split(",") if s.strip()]


def _add_experiment_args(p):
    p.add_argument("--config", type=Path, help="YAML experiment config")
    p.add_argument("--dataset", type=_datasets, help="subset id(s), e.g. FD001 or FD001,FD003")
    p.add_argument("--data-dir", help="directory holding train_FD00x.txt files")
    p.add_argument("--synthetic", action="store_true", default=None,
                   help="use simulated CMAPSS-format telemetry instead of data files")
    p.add_argument("--epsilon-grid", type=_float_list, help="e.g. 0.01,0.05,0.1")
    p.add_argument("--delta-grid", type=_float_list, help="e.g. 0.01,0.05,0.1")
    p.add_argument("--seed", type=int)
    p.add_argument("--profile", choices=("paper", "desk"))
    p.add_argument("--n-jobs", type=int, help="worker processes for grid training")
    p.add_argument("--out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="survmult",
        description="Predictive multiplicity of random survival forests on CMAPSS.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "ingest": "reformulate raw telemetry as survival data and split it",
        "train": "train and score the hyperparameter grid, write the prediction cube",
        "analyze": "Rashomon set size and performance range per epsilon",
        "sweep": "ambiguity / discrepancy / obscurity over the epsilon x delta grid",
        "run": "all stages for every configured subset",
    }
    for stage in STAGES:
        _add_experiment_args(sub.add_parser(stage, help=helps[stage]))
    rp = sub.add_parser("report", help="print report CSVs as a fixed-width table")
    rp.add_argument("paths", nargs="+", type=Path,
                    help="report_<subset>.csv files or directories containing them")
    return parser


def _config_from_args(args):
    return load_config(
        args.config,
        datasets=args.dataset,
        data_dir=args.data_dir,
        synthetic=args.synthetic,
        epsilon_grid=args.epsilon_grid,
        delta_grid=args.delta_grid,
        seed=args.seed,
        profile=args.profile,
        n_jobs=args.n_jobs,
        out=args.out,
    )


def _collect_reports(paths):
    files = []
    for p in paths:
        if p.is_dir():
            files.extend(sorted(p.glob("report_*.csv")))
        elif p.exists():
            files.append(p)
        else:
            raise FileNotFoundError(f"no such report: {p}")
    if not files:
        raise FileNotFoundError("no report_<subset>.csv files found")
    reports = [read_report_csv(f) for f in files]
    order = {s: k for k, s in enumerate(SUBSETS)}
    reports.sort(key=lambda r: (order.get(r.dataset_id, len(order)), r.dataset_id))
    return reports


def render_report(paths) -> str:
    """Fixed-width table: one line per (subset, epsilon, delta)."""
    reports = _collect_reports([Path(p) for p in paths])
    header = (f"{'dataset':<8} {'epsilon':>8} {'delta':>8} {'A':>8} {'D':>8} "
              f"{'O':>8} {'|R|':>7}")
    lines = [header, "-" * len(header)]
    for rep in reports:
        rows = sorted(rep.rows, key=lambda r: (r.epsilon, r.delta))
        for r in rows:
            lines.append(
                f"{rep.dataset_id:<8} {r.epsilon:>8.4f} {r.delta:>8.4f} {r.ambiguity:>8.4f} "
                f"{r.discrepancy:>8.4f} {r.obscurity:>8.4f} {r.rashomon_size:>7d}"
            )
    return "\n".join(lines)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "report":
            print(render_report(args.paths))
            return 0
        config = _config_from_args(args)
        exp = Experiment(config)
        if args.command == "run":
            exp.run()
        else:
            for subset in config.datasets:
                getattr(exp, args.command)(subset)
        print(f"wrote outputs to {exp.out} (config_hash={exp.hash})")
        return 0
    except (SurvmultError, OSError) as exc:
        print(f"survmult: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
