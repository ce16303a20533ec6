"""Tables and plot-ready series derived from a Monte Carlo aggregate."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .datagen import MEASURES
from .mcrunner import (
    HIST_BINS, JOINT_PARAMS, N_BUCKETS, ALPHA, McAggregate, stratified_fp, type_m_curve,
    type_s_rate,
)
from .numerics import binom_ci95
from .params import DOTTED, FIELDS

SCHEMA_VERSION = 1
GROUPINGS = ("criterion", "strict", "measure", "n-bucket")
AGGREGATE_FILE = "aggregate.json"


@dataclass
class SummaryTable:
    columns: tuple
    rows: list = field(default_factory=list)

    @property
    def no_data(self) -> bool:
        return not self.rows

    def records(self) -> list[dict]:
        return [dict(zip(self.columns, r)) for r in self.rows]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for row in self.rows:
                w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else f"{v:.6f}"
    if v is None:
        return ""
    return v


def _rate_row(hits, n):
    lo, hi = binom_ci95(hits, n)
    return hits / n, lo, hi


def fp_table(agg: McAggregate) -> SummaryTable:
    """False-positive rate of each criterion at 0 ms (either direction counts)."""
    table = SummaryTable(("criterion", "rate", "ci_low", "ci_high", "hits", "n"))
    if 0.0 not in agg.effects:
        return table
    for label in agg.labels:
        hits, n = agg.criterion(label, 0.0, "free")
        if n:
            table.rows.append((label, *_rate_row(hits, n), hits, n))
    return table


def _strict(label):
    return label.startswith("all")


def power_curves(agg: McAggregate, grouping: str = "criterion") -> SummaryTable:
    """Detection rate (significant and positive) against effect size.

    The 0 ms entries are direction-required as well, i.e. roughly half the
    false-positive rate.
    """
    if grouping not in GROUPINGS:
        raise ValueError(f"grouping must be one of {GROUPINGS}")
    table = SummaryTable(("grouping", "series", "bucket", "delta", "rate", "ci_low",
                          "ci_high", "hits", "n"))
    if grouping == "measure":
        for m in MEASURES:
            for d in agg.effects:
                mc = agg.measure_counts(m, d)
                if mc["n"]:
                    table.rows.append((grouping, m, "all", d, *_rate_row(mc["sig+"], mc["n"]),
                                       mc["sig+"], mc["n"]))
        return table
    if grouping == "strict":
        labels = [lab for lab in agg.labels if _strict(lab)]
    else:
        labels = [lab for lab in agg.labels if not _strict(lab)]
    buckets = N_BUCKETS if grouping == "n-bucket" else ("all",)
    for label in labels:
        for b in buckets:
            for d in agg.effects:
                hits, n = agg.criterion(label, d, "power", b)
                if n:
                    table.rows.append((grouping, label, b, d, *_rate_row(hits, n), hits, n))
    return table


def pval_histogram(agg: McAggregate, delta: float) -> SummaryTable:
    """Mirrored p-value histogram pooled over measures.

    Side ``correct`` holds positive-sign estimates, ``wrong`` negative
    ones; bin 0 (p <= 0.05) is the significant bin.
    """
    if float(delta) not in agg.effects:
        raise ValueError(f"effect size {delta} is not on the grid")
    table = SummaryTable(("delta", "side", "bin", "p_low", "p_high", "significant", "count"))
    width = 1.0 / HIST_BINS
    for side, sign in (("correct", "+"), ("wrong", "-")):
        for b in range(HIST_BINS):
            count = sum(agg.histogram(m, delta, sign, b) for m in MEASURES)
            table.rows.append((float(delta), side, b, b * width, (b + 1) * width,
                               int(b * width < ALPHA), count))
    return table


def type_s_table(agg: McAggregate) -> SummaryTable:
    table = SummaryTable(("delta", "sig_correct", "sig_wrong", "type_s_rate"))
    for d in agg.effects:
        pos = sum(agg.measure_counts(m, d)["sig+"] for m in MEASURES)
        neg = sum(agg.measure_counts(m, d)["sig-"] for m in MEASURES)
        rate = type_s_rate(agg, d)
        table.rows.append((d, pos, neg, float("nan") if rate is None else rate))
    return table


def type_m_table(agg: McAggregate) -> SummaryTable:
    table = SummaryTable(("measure", "bucket", "delta", "mean_detected_ms", "exaggeration",
                          "n_detected"))
    for m in (*MEASURES, "pooled"):
        for b in ("all", *N_BUCKETS):
            curve = type_m_curve(agg, None if m == "pooled" else m, b)
            for d, mean in curve:
                ms = MEASURES if m == "pooled" else (m,)
                n = sum(agg.measure_counts(x, d, b)["sig+"] for x in ms)
                if mean is None:
                    continue
                ratio = mean / d if d > 0 else float("nan")
                table.rows.append((m, b, d, mean, ratio, n))
    return table


def strata_table(agg: McAggregate, criterion: str = "one") -> SummaryTable:
    table = SummaryTable(("parameter", "low_rate", "low_ci_low", "low_ci_high", "low_n",
                          "high_rate", "high_ci_low", "high_ci_high", "high_n", "difference"))
    for name in (*FIELDS, "joint"):
        s = stratified_fp(agg, name, criterion)
        nan = float("nan")
        lo_ci = s.low_ci or (nan, nan)
        hi_ci = s.high_ci or (nan, nan)
        table.rows.append((
            DOTTED.get(name, name),
            nan if s.low_rate is None else s.low_rate, *lo_ci, s.low_n,
            nan if s.high_rate is None else s.high_rate, *hi_ci, s.high_n,
            nan if s.difference is None else s.difference,
        ))
    return table


def _json_records(table: SummaryTable):
    return [{k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in r.items()}
            for r in table.records()]


def summary(agg: McAggregate) -> dict:
    """Everything needed to read off the published-style tables, as plain data."""
    c = agg.counts
    return {
        "schema_version": SCHEMA_VERSION,
        "iterations": agg.iterations,
        "effects": list(agg.effects),
        "criteria": list(agg.labels),
        "false_positives": _json_records(fp_table(agg)),
        "power": {g: _json_records(power_curves(agg, g)) for g in GROUPINGS},
        "type_s": _json_records(type_s_table(agg)),
        "type_m": _json_records(type_m_table(agg)),
        "strata": _json_records(strata_table(agg)),
        "joint_stratum_parameters": [DOTTED[n] for n in JOINT_PARAMS],
        "fits": {
            "total": c["diag", "fits"],
            "nonconverged": c["diag", "nonconverged_fits"],
            "invalid_tests": c["diag", "invalid_tests"],
            "loglik_order_violations": c["diag", "monotone_violations"],
        },
    }


_GNUPLOT = """\
set datafile separator ','
set key autotitle columnhead
set xlabel 'true effect (ms)'
set ylabel 'detection rate'
# columns: grouping,series,bucket,delta,rate,ci_low,ci_high,hits,n
plot for [s in "{series}"] 'curves.csv' using ($2 eq s && $1 eq 'criterion' ? $4 : 1/0):5 with linespoints title s
"""


def write_results(agg: McAggregate, out_dir: str | Path, diagnostics: dict | None = None,
                  gnuplot: bool = False) -> Path:
    """Write the results directory (see README for the file list)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / AGGREGATE_FILE).write_text(json.dumps(agg.to_dict()) + "\n")
    (out / "summary.json").write_text(json.dumps(summary(agg), indent=2, sort_keys=True) + "\n")

    curves = SummaryTable(power_curves(agg, "criterion").columns)
    for g in ("criterion", "strict", "n-bucket"):
        curves.rows.extend(power_curves(agg, g).rows)
    curves.to_csv(out / "curves.csv")
    power_curves(agg, "measure").to_csv(out / "per_measure.csv")
    type_s_table(agg).to_csv(out / "type_s.csv")
    type_m_table(agg).to_csv(out / "type_m.csv")
    strata_table(agg).to_csv(out / "strata.csv")
    hist = SummaryTable(pval_histogram(agg, agg.effects[0]).columns)
    for d in agg.effects:
        hist.rows.extend(pval_histogram(agg, d).rows)
    hist.to_csv(out / "pval_hist.csv")

    diag = dict(diagnostics or {})
    diag.update(summary(agg)["fits"])
    (out / "diagnostics.json").write_text(json.dumps(diag, indent=2, sort_keys=True) + "\n")
    if gnuplot:
        labels = " ".join(lab for lab in agg.labels if not _strict(lab))
        (out / "curves.gp").write_text(_GNUPLOT.format(series=labels))
    return out


def read_aggregate(out_dir: str | Path) -> McAggregate:
    path = Path(out_dir) / AGGREGATE_FILE
    return McAggregate.from_dict(json.loads(path.read_text()))
