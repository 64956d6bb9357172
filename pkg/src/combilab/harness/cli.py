"""Command-line front end.

Subcommands map one-to-one to the experiment runners plus two primitives
(sampling and single-matrix spectra). All randomness is addressed by
(--seed, trial index), so a repeated invocation reproduces its output byte
for byte, independent of --threads.

Exit codes: 0 success, 1 usage or domain error, 2 resource cap exceeded,
3 verification failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from typing import Optional

import numpy as np

from ..clcd import ClcdQuery, clcd_search, difference_vector
from ..combi import sample_fixed_weight, sample_row_regular, substream
from ..errors import CombilabError, ResourceLimitError
from ..spectral import smallest_singular_value
from ..sphere import PartitionParams, sample_non_almost_constant
from .config import (
    DEFAULT_DELTA,
    DEFAULT_GAMMA,
    DEFAULT_RHO,
    ExperimentConfig,
    SummaryRow,
    TrialRecord,
)
from .experiments import (
    CENSUS_CAP,
    run_distance_experiment,
    run_inequality_suite,
    run_singularity_census,
    run_smallball_validation,
    run_tail_experiment,
)
from .io import fmt17, write_run


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the contract reserves 2 for
    # resource caps and uses 1 for usage
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _eps_grid(text: str) -> tuple[float, ...]:
    try:
        a, b, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a:b:step, got {text!r}")
    if step <= 0 or b < a:
        raise argparse.ArgumentTypeError("eps grid needs step > 0 and b >= a")
    return tuple(np.arange(a, b + step / 2, step))


def _vector(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {text!r}")


def _add_common(p: _Parser, trials: int = 1000) -> None:
    p.add_argument("--n", type=int, required=True, help="matrix/vector dimension")
    p.add_argument("--d", type=int, default=None, help="row weight (default n/2)")
    p.add_argument("--m", type=int, default=None, help="row count (default n)")
    p.add_argument("--trials", type=int, default=trials)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", type=str, default=None, help="records path (CSV) or document path (JSON)")
    p.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")


def _add_eps(p: _Parser) -> None:
    p.add_argument(
        "--eps-grid", type=_eps_grid, default=None, metavar="A:B:STEP",
        help="epsilon grid (default 0:1:0.05)",
    )


def _add_sphere(p: _Parser) -> None:
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    p.add_argument("--rho", type=float, default=DEFAULT_RHO)


def _add_clcd(p: _Parser) -> None:
    p.add_argument("--alpha", type=float, default=None, help="cap (default n/2)")
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA, help="slope in (0,1)")
    p.add_argument("--horizon", type=float, default=1e6)


def _config(args, experiment: str, **extra) -> ExperimentConfig:
    kwargs = dict(
        experiment=experiment,
        n=args.n,
        d=getattr(args, "d", None),
        m=getattr(args, "m", None),
        trials=args.trials,
        seed=args.seed,
        threads=getattr(args, "threads", 1),
        out=getattr(args, "out", None),
        fmt=getattr(args, "fmt", "csv"),
        delta=getattr(args, "delta", DEFAULT_DELTA),
        rho=getattr(args, "rho", DEFAULT_RHO),
        alpha=getattr(args, "alpha", None),
        gamma=getattr(args, "gamma", None),
        horizon=getattr(args, "horizon", 1e6),
    )
    grid = getattr(args, "eps_grid", None)
    if grid is not None:
        kwargs["eps_grid"] = grid
    kwargs.update(extra)
    return ExperimentConfig(**kwargs)


def _emit(cfg: ExperimentConfig, records, summary, d: Optional[int]) -> int:
    sys.stdout.write(write_run(cfg, records, summary, d))
    return 0


def cmd_sample(args) -> int:
    cfg = _config(args, "sample")
    d = cfg.resolved_d()
    records = []
    for i in range(cfg.trials):
        fv = sample_fixed_weight(cfg.n, d, substream(cfg.seed, i))
        records.append(TrialRecord(i, "bits", "".join(str(b) for b in fv.bits)))
    return _emit(cfg, records, [], d)


def cmd_svmin(args) -> int:
    cfg = _config(args, "svmin")
    d = cfg.resolved_d()
    m = cfg.resolved_m()

    def one(i: int) -> float:
        q = sample_row_regular(m, cfg.n, d, substream(cfg.seed, i))
        return smallest_singular_value(q)

    from .experiments import _map_trials

    vals = np.asarray(_map_trials(cfg.trials, cfg.threads, one))
    records = [TrialRecord(i, "smin", float(v)) for i, v in enumerate(vals)]
    mean = float(vals.mean())
    se = float(vals.std(ddof=1)) / math.sqrt(cfg.trials) if cfg.trials > 1 else 0.0
    summary = [
        SummaryRow("svmin", cfg.n, "mean", mean, mean - 1.96 * se, mean + 1.96 * se, cfg.trials),
        SummaryRow("svmin", cfg.n, "min", float(vals.min()), None, None, cfg.trials),
    ]
    return _emit(cfg, records, summary, d)


def cmd_singularity(args) -> int:
    cfg = _config(args, "singularity")
    d = cfg.resolved_d()
    mode = args.mode
    if mode == "auto":
        mode = "exhaustive" if math.comb(cfg.n, d) ** cfg.n <= CENSUS_CAP else "montecarlo"
    result, records, summary = run_singularity_census(cfg.n, mode, cfg)
    return _emit(cfg, records, summary, result.d)


def cmd_tail(args) -> int:
    cfg = _config(args, "tail")
    records, summary = run_tail_experiment(cfg)
    return _emit(cfg, records, summary, cfg.resolved_d())


def cmd_distance(args) -> int:
    cfg = _config(args, "distance")
    records, summary = run_distance_experiment(cfg)
    return _emit(cfg, records, summary, cfg.resolved_d())


def cmd_clcd(args) -> int:
    if args.v is not None:
        v = np.asarray(args.v, dtype=float)
        n = v.size
    else:
        if args.n is None:
            raise CombilabError("clcd needs --v or --n")
        n = args.n
        part = PartitionParams(args.delta, args.rho)
        v = sample_non_almost_constant(n, part, substream(args.seed, 0).generator())
    alpha = args.alpha if args.alpha is not None else n / 2.0
    cfg = ExperimentConfig(
        experiment="clcd", n=n, trials=1, seed=args.seed, alpha=alpha,
        gamma=args.gamma, horizon=args.horizon, out=args.out, fmt=args.fmt,
    )
    query = ClcdQuery(cap=alpha, slope=args.gamma, horizon=args.horizon)
    res = clcd_search(difference_vector(v), query)
    value = res.value if res.is_finite else math.inf
    records = [
        TrialRecord(0, "clcd_value", value, res.status),
        TrialRecord(0, "certified_gap", res.certified_gap),
        TrialRecord(0, "evaluations", float(res.evaluations)),
        TrialRecord(0, "input", ";".join(fmt17(float(x)) for x in v)),
    ]
    if res.witness is not None and res.witness.size <= 256:
        records.append(
            TrialRecord(0, "witness", ";".join(str(int(x)) for x in res.witness))
        )
    summary = [SummaryRow("clcd", n, "value", value, None, None, 1)]
    return _emit(cfg, records, summary, None)


def cmd_smallball(args) -> int:
    cfg = _config(args, "smallball")
    v = np.asarray(args.v, dtype=float) if args.v is not None else None
    records, summary, _ = run_smallball_validation(cfg, v=v)
    return _emit(cfg, records, summary, cfg.resolved_d())


def cmd_verify(args) -> int:
    cfg = ExperimentConfig(
        experiment="verify", n=args.n, trials=args.trials, seed=args.seed,
        threads=args.threads, delta=args.delta, rho=args.rho,
    )
    report = run_inequality_suite(cfg)
    for line in report.lines():
        print(line)
    if report.passed:
        print("verify: all checks passed")
        return 0
    print("verify: FAILURES above", file=sys.stderr)
    return 3


def _build_parser() -> _Parser:
    parser = _Parser(prog="combilab", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw fixed-weight 0/1 vectors")
    _add_common(p, trials=10)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("svmin", help="smallest singular values of sampled matrices")
    _add_common(p)
    p.set_defaults(func=cmd_svmin)

    p = sub.add_parser("singularity", help="singularity probability census")
    _add_common(p)
    p.add_argument("--mode", choices=("auto", "exhaustive", "montecarlo"), default="auto")
    p.set_defaults(func=cmd_singularity)

    p = sub.add_parser("tail", help="smallest-singular-value tail experiment")
    _add_common(p)
    _add_eps(p)
    p.set_defaults(func=cmd_tail)

    p = sub.add_parser("distance", help="row-to-span distance experiment")
    _add_common(p)
    _add_eps(p)
    _add_sphere(p)
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("clcd", help="denominator search for a vector")
    p.add_argument("--v", type=_vector, default=None, help="comma-separated coordinates")
    p.add_argument("--n", type=int, default=None, help="dimension for a generated vector")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    _add_sphere(p)
    _add_clcd(p)
    p.set_defaults(func=cmd_clcd)

    p = sub.add_parser("smallball", help="small-ball bound against the empirical law")
    _add_common(p, trials=100_000)
    _add_eps(p)
    _add_sphere(p)
    _add_clcd(p)
    p.add_argument("--v", type=_vector, default=None, help="explicit unit vector")
    p.set_defaults(func=cmd_smallball)

    p = sub.add_parser("verify", help="run the inequality suite; exit 3 on failure")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    p.add_argument("--rho", type=float, default=DEFAULT_RHO)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ResourceLimitError as exc:
        print(f"combilab: resource limit: {exc}", file=sys.stderr)
        return 2
    except CombilabError as exc:
        print(f"combilab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
