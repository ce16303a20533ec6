"""Artificial eye-tracking datasets with crossed subject/item intercepts.

Every subject reads every item once; conditions alternate in a two-list
Latin square.  Durations are log-normal; gaze, go-past and total viewing
times are built from first fixation duration plus optional increments.
"""
from __future__ import annotations

import csv
import dataclasses
import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterator

import numpy as np

from .numerics import RngStream
from .params import ParamSet

MEASURES = ("ffd", "gzd", "gpd", "tvt")
EFFECT_SIZES_MS = (0.0, 2.5, 5.0, 10.0, 20.0, 40.0, 80.0)
EFFECT_MODES = ("propagate", "per_measure")
CSV_HEADER = ("subject", "item", "condition", "ffd", "gzd", "gpd", "tvt",
              "refixated", "regressed", "reread")


class Condition(str, enum.Enum):
    A = "a"  # baseline
    B = "b"  # treatment


def latin_square_condition(subject_id: int, item_id: int) -> Condition:
    return Condition.A if (subject_id + item_id) % 2 == 0 else Condition.B


@dataclass(frozen=True)
class TrialRecord:
    subject_id: int
    item_id: int
    condition: Condition
    ffd: float
    gzd: float
    gpd: float
    tvt: float
    refixated: bool
    regressed: bool
    reread: bool


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-oriented set of trials.

    ``condition`` holds 0 for A and 1 for B.  ``params`` is None for data
    read from a file.
    """

    subject: np.ndarray
    item: np.ndarray
    condition: np.ndarray
    ffd: np.ndarray
    gzd: np.ndarray
    gpd: np.ndarray
    tvt: np.ndarray
    refixated: np.ndarray
    regressed: np.ndarray
    reread: np.ndarray
    params: ParamSet | None = None
    true_effect_ms: float = 0.0
    calibration: "EffectCalibration | None" = field(default=None, repr=False)
    subject_intercepts: np.ndarray | None = field(default=None, repr=False)
    item_intercepts: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return self.subject.size

    @cached_property
    def n_subjects(self) -> int:
        return int(self.subject.max()) + 1

    @cached_property
    def n_items(self) -> int:
        return int(self.item.max()) + 1

    def measure(self, name: str) -> np.ndarray:
        if name not in MEASURES:
            raise KeyError(f"unknown measure {name!r}; expected one of {MEASURES}")
        return getattr(self, name)

    def trials(self) -> Iterator[TrialRecord]:
        for t in range(len(self)):
            yield TrialRecord(
                int(self.subject[t]), int(self.item[t]),
                Condition.B if self.condition[t] else Condition.A,
                float(self.ffd[t]), float(self.gzd[t]), float(self.gpd[t]), float(self.tvt[t]),
                bool(self.refixated[t]), bool(self.regressed[t]), bool(self.reread[t]),
            )

    def condition_means(self, name: str) -> tuple[float, float]:
        y = self.measure(name)
        b = self.condition.astype(bool)
        return float(y[~b].mean()), float(y[b].mean())

    def to_csv(self, path_or_file) -> None:
        """Write one row per trial; accepts a path or an open text file."""
        if hasattr(path_or_file, "write"):
            self._write_rows(path_or_file)
        else:
            with open(path_or_file, "w", newline="") as fh:
                self._write_rows(fh)

    def _write_rows(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for t in self.trials():
            w.writerow([
                t.subject_id, t.item_id, t.condition.value,
                f"{t.ffd:.10g}", f"{t.gzd:.10g}", f"{t.gpd:.10g}", f"{t.tvt:.10g}",
                int(t.refixated), int(t.regressed), int(t.reread),
            ])

    @classmethod
    def read_csv(cls, path: str | Path) -> "Dataset":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader, ()))
            if header != CSV_HEADER:
                raise ValueError(f"{path}: unexpected header {header}")
            rows = [r for r in reader if r]
        if not rows:
            raise ValueError(f"{path}: no trials")
        cols = list(zip(*rows))
        cond = [c.strip().lower() for c in cols[2]]
        if not set(cond) <= {"a", "b"}:
            raise ValueError(f"{path}: condition must be 'a' or 'b'")
        as_bool = lambda c: np.array([v.strip().lower() in ("1", "true") for v in c])
        return cls(
            subject=np.array(cols[0], dtype=np.int64),
            item=np.array(cols[1], dtype=np.int64),
            condition=np.array([c == "b" for c in cond], dtype=np.int8),
            ffd=np.array(cols[3], dtype=float),
            gzd=np.array(cols[4], dtype=float),
            gpd=np.array(cols[5], dtype=float),
            tvt=np.array(cols[6], dtype=float),
            refixated=as_bool(cols[7]),
            regressed=as_bool(cols[8]),
            reread=as_bool(cols[9]),
        )


@dataclass(frozen=True)
class EffectCalibration:
    """Expected baseline means (ms) and the log-scale shifts that raise each
    of them by ``delta_ms``."""

    delta_ms: float
    baseline_means: dict
    shifts: dict


def generate_base(params: ParamSet, rng: RngStream) -> Dataset:
    """Simulate one dataset without any condition effect."""
    S, I = params.n_subjects, params.n_items
    u = rng.normal(0.0, math.log(params.sd_subjects), S)
    w = rng.normal(0.0, math.log(params.sd_items), I)
    log_mu = math.log(params.mean_ffd) + u[:, None] + w[None, :]
    ffd = np.exp(rng.normal(log_mu, math.log(params.sd_ffd)))

    def increment(p, mean, sd):
        happened = rng.bernoulli(p, (S, I))
        extra = rng.lognormal(math.log(mean), math.log(sd), (S, I))
        return happened, np.where(happened, extra, 0.0)

    refix, gaze_extra = increment(params.p_refix, params.mean_gazediff, params.sd_gazediff)
    regr, gopast_extra = increment(params.p_regr, params.mean_gopastdiff, params.sd_gopastdiff)
    reread, tvt_extra = increment(params.p_reread, params.mean_tvtdiff, params.sd_tvtdiff)
    gzd = ffd + gaze_extra
    gpd = gzd + gopast_extra
    # rereading adds to gaze duration: regression-path fixations lie on earlier words
    tvt = gzd + tvt_extra

    subject, item = np.divmod(np.arange(S * I), I)
    return Dataset(
        subject=subject, item=item,
        condition=((subject + item) % 2).astype(np.int8),
        ffd=ffd.ravel(), gzd=gzd.ravel(), gpd=gpd.ravel(), tvt=tvt.ravel(),
        refixated=refix.ravel(), regressed=regr.ravel(), reread=reread.ravel(),
        params=params, true_effect_ms=0.0, subject_intercepts=u, item_intercepts=w,
    )


def expected_means(params: ParamSet) -> dict:
    """Arithmetic means of the four measures implied by the log-normal model."""
    ln2 = lambda g: math.log(g) ** 2
    ffd = params.mean_ffd * math.exp(
        (ln2(params.sd_ffd) + ln2(params.sd_subjects) + ln2(params.sd_items)) / 2)
    gzd = ffd + params.p_refix * params.mean_gazediff * math.exp(ln2(params.sd_gazediff) / 2)
    gpd = gzd + params.p_regr * params.mean_gopastdiff * math.exp(ln2(params.sd_gopastdiff) / 2)
    tvt = gzd + params.p_reread * params.mean_tvtdiff * math.exp(ln2(params.sd_tvtdiff) / 2)
    return {"ffd": ffd, "gzd": gzd, "gpd": gpd, "tvt": tvt}


def calibrate_effect(params: ParamSet, delta_ms: float) -> EffectCalibration:
    if delta_ms < 0:
        raise ValueError("effect size must be nonnegative")
    means = expected_means(params)
    shifts = {m: math.log1p(delta_ms / mu) for m, mu in means.items()}
    return EffectCalibration(float(delta_ms), means, shifts)


def apply_effect(base: Dataset, cal: EffectCalibration, mode: str = "propagate") -> Dataset:
    """Inject the calibrated effect into condition-B trials.

    ``mode="propagate"`` shifts log first fixation duration by the FFD
    shift; the increment is carried into gaze, go-past and total viewing
    time, so every measure's expected mean rises by ``delta_ms`` and all
    ordering relations between measures survive.  ``mode="per_measure"``
    multiplies each measure by its own ``exp(shift)``, which also raises
    each mean by ``delta_ms`` but can put gaze duration below first
    fixation duration on trials without refixation.  A trials are never
    touched.
    """
    if base.true_effect_ms != 0:
        raise ValueError("effects can only be injected into a zero-effect dataset")
    if mode not in EFFECT_MODES:
        raise ValueError(f"unknown effect mode {mode!r}; expected one of {EFFECT_MODES}")
    if cal.delta_ms == 0:
        return base
    b = base.condition.astype(bool)
    if mode == "propagate":
        extra = np.where(b, base.ffd * math.expm1(cal.shifts["ffd"]), 0.0)
        scaled = {m: base.measure(m) + extra for m in MEASURES}
    else:
        scaled = {}
        for m in MEASURES:
            y = base.measure(m).copy()
            y[b] *= math.exp(cal.shifts[m])
            scaled[m] = y
    return dataclasses.replace(base, true_effect_ms=cal.delta_ms, calibration=cal, **scaled)


def effect_size_grid() -> list[float]:
    return list(EFFECT_SIZES_MS)


def generate_effect_series(
    params: ParamSet, rng: RngStream, grid=EFFECT_SIZES_MS, coupled_noise: bool = True,
    mode: str = "propagate",
) -> list[Dataset]:
    """One dataset per effect size.

    With ``coupled_noise`` all datasets share the same noise realization and
    differ only in the injected effect; otherwise each is simulated afresh
    from its own substream.
    """
    if coupled_noise:
        base = generate_base(params, rng.substream(0))
        return [apply_effect(base, calibrate_effect(params, d), mode) for d in grid]
    out = []
    for k, d in enumerate(grid):
        base = generate_base(params, rng.substream(k + 1))
        out.append(apply_effect(base, calibrate_effect(params, d), mode))
    return out


# Correlations of (FFD, GZD, GPD, TVT) in artificial data resembling each
# reference experiment; rows/cols follow MEASURES.
REFERENCE_CORRELATIONS = {
    "angele": np.array([
        [1.00, 0.65, 0.46, 0.42],
        [0.65, 1.00, 0.71, 0.64],
        [0.46, 0.71, 1.00, 0.45],
        [0.42, 0.64, 0.45, 1.00],
    ]),
    "metzner": np.array([
        [1.00, 0.61, 0.20, 0.36],
        [0.61, 1.00, 0.35, 0.57],
        [0.20, 0.35, 1.00, 0.19],
        [0.36, 0.57, 0.19, 1.00],
    ]),
}


def mean_correlations(params: ParamSet, n_datasets: int, rng: RngStream) -> np.ndarray:
    """Average Pearson correlation matrix of the raw measures over datasets."""
    total = np.zeros((len(MEASURES), len(MEASURES)))
    for k in range(n_datasets):
        data = generate_base(params, rng.substream(k))
        total += np.corrcoef(np.stack([data.measure(m) for m in MEASURES]))
    return total / n_datasets
