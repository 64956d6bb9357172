"""Flat-file persistence for experiment runs.

CSV is the contract: a records table `experiment,n,d,trial,statistic,value,flag`
and a parallel summary table `experiment,n,eps,estimate,ci_low,ci_high,trials`,
floats at 17 significant digits so round-tripping is exact and repeated runs
compare byte for byte. JSON bundles config, records, and summary in one object.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Optional, Sequence

from .config import ExperimentConfig, SummaryRow, TrialRecord

RECORD_COLUMNS = ("experiment", "n", "d", "trial", "statistic", "value", "flag")
SUMMARY_COLUMNS = ("experiment", "n", "eps", "estimate", "ci_low", "ci_high", "trials")


def fmt17(x) -> str:
    """Serialize one cell: floats with 17 significant digits, strings as-is,
    None as the empty cell."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int,)):
        return str(x)
    return format(float(x), ".17g")


def records_csv(cfg: ExperimentConfig, records: Sequence[TrialRecord], d: Optional[int]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_COLUMNS)
    for r in records:
        w.writerow(
            [cfg.experiment, cfg.n, "" if d is None else d, r.trial, r.statistic, fmt17(r.value), r.flag]
        )
    return buf.getvalue()


def summary_csv(rows: Sequence[SummaryRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for s in rows:
        w.writerow(
            [s.experiment, s.n, fmt17(s.eps), fmt17(s.estimate), fmt17(s.ci_low), fmt17(s.ci_high), s.trials]
        )
    return buf.getvalue()


def run_json(
    cfg: ExperimentConfig, records: Sequence[TrialRecord], rows: Sequence[SummaryRow], d: Optional[int]
) -> str:
    payload = {
        "config": cfg.as_dict(),
        "records": [
            {
                "experiment": cfg.experiment,
                "n": cfg.n,
                "d": d,
                "trial": r.trial,
                "statistic": r.statistic,
                "value": r.value if isinstance(r.value, str) else float(r.value),
                "flag": r.flag,
            }
            for r in records
        ],
        "summary": [
            {
                "experiment": s.experiment,
                "n": s.n,
                "eps": s.eps if isinstance(s.eps, str) else float(s.eps),
                "estimate": float(s.estimate),
                "ci_low": None if s.ci_low is None else float(s.ci_low),
                "ci_high": None if s.ci_high is None else float(s.ci_high),
                "trials": s.trials,
            }
            for s in rows
        ],
    }
    return json.dumps(payload, indent=2) + "\n"


def summary_path_for(records_path: Path) -> Path:
    """out.csv -> out.summary.csv, kept next to the records file."""
    suffix = records_path.suffix or ".csv"
    return records_path.with_name(records_path.stem + ".summary" + suffix)


def write_run(
    cfg: ExperimentConfig,
    records: Sequence[TrialRecord],
    rows: Sequence[SummaryRow],
    d: Optional[int],
) -> str:
    """Persist a run per the config; return what should go to stdout.

    CSV with an output path writes two files and reports their names;
    CSV without a path streams both tables to stdout separated by a blank
    line; JSON is a single document either way.
    """
    if cfg.fmt == "json":
        doc = run_json(cfg, records, rows, d)
        if cfg.out:
            Path(cfg.out).write_text(doc, encoding="utf-8")
            return f"wrote {cfg.out}\n"
        return doc
    rec_text = records_csv(cfg, records, d)
    sum_text = summary_csv(rows)
    if cfg.out:
        rec_path = Path(cfg.out)
        sum_path = summary_path_for(rec_path)
        rec_path.write_text(rec_text, encoding="utf-8")
        sum_path.write_text(sum_text, encoding="utf-8")
        return f"wrote {rec_path} and {sum_path}\n"
    return rec_text + "\n" + sum_text
