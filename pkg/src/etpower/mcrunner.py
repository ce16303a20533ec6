"""Monte Carlo experiment: sample parameters, simulate, fit, decide, count.

Iteration ``i`` draws all of its randomness from ``RngStream(seed, i)``, and
per-iteration results are folded into an :class:`McAggregate` whose merge
is exact (integer counters and rational sums).  The final aggregate
therefore does not depend on how iterations are split across workers.
"""
from __future__ import annotations

import logging
import multiprocessing
import os
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple

from .criteria import CriterionSpec, Decision, decide, default_criteria
from .datagen import EFFECT_MODES, EFFECT_SIZES_MS, MEASURES, generate_effect_series
from .lmm import MeasureTest, lrt_all
from .numerics import RngStream, binom_ci95
from .params import DOTTED, FIELDS, ParamRange, ParamSet, default_range, read_range, sample_paramset

log = logging.getLogger(__name__)

ALPHA = 0.05
HIST_BINS = 20
N_LOW_MAX = 55
N_HIGH_MIN = 85
N_BUCKETS = ("low", "mid", "high")
JOINT_PARAMS = ("p_regr", "p_reread", "mean_gopastdiff")
DESK_ITERATIONS = 2000
CHUNK = 20


def n_bucket(params: ParamSet) -> str:
    """Size class of a design by the total number of subjects plus items."""
    total = params.n_subjects + params.n_items
    if total <= N_LOW_MAX:
        return "low"
    if total >= N_HIGH_MIN:
        return "high"
    return "mid"


@dataclass(frozen=True)
class RunConfig:
    iterations: int = DESK_ITERATIONS
    master_seed: int = 42
    range: ParamRange = field(default_factory=default_range)
    effects: tuple = EFFECT_SIZES_MS
    criteria: tuple = field(default_factory=lambda: tuple(default_criteria()))
    coupled_noise: bool = True
    effect_mode: str = "propagate"
    out_dir: Path | None = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        effects = tuple(float(e) for e in self.effects)
        if 0.0 not in effects:
            raise ValueError("the effect grid must contain 0")
        if any(e < 0 for e in effects) or len(set(effects)) != len(effects):
            raise ValueError("effect sizes must be distinct and nonnegative")
        object.__setattr__(self, "effects", tuple(sorted(effects)))
        object.__setattr__(self, "criteria", tuple(self.criteria))
        if self.effect_mode not in EFFECT_MODES:
            raise ValueError(f"effect_mode must be one of {EFFECT_MODES}")
        labels = [c.label for c in self.criteria]
        if len(set(labels)) != len(labels):
            raise ValueError("criterion labels must be unique")

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "RunConfig":
        """Read a flat ``key = value`` configuration file.

        Keys: iterations, seed, range (path of a range file, relative to the
        config file), effects (comma list), criteria (comma list of tokens),
        alpha, k, coupled_noise, effect_mode, out.
        """
        return config_from_strings(read_config(path), base_dir=Path(path).parent, **overrides)


def read_config(path: str | Path) -> dict:
    raw = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        raw[key.replace("-", "_")] = value
    return raw


def parse_bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def config_from_strings(raw: dict, base_dir: Path | None = None, **overrides) -> RunConfig:
    known = {"iterations", "seed", "range", "effects", "criteria", "alpha", "k",
             "coupled_noise", "effect_mode", "out"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    kw = {}
    if "iterations" in raw:
        kw["iterations"] = int(raw["iterations"])
    if "seed" in raw:
        kw["master_seed"] = int(raw["seed"])
    if "range" in raw:
        p = Path(raw["range"])
        kw["range"] = read_range(p if p.is_absolute() or base_dir is None else base_dir / p)
    if "effects" in raw:
        kw["effects"] = tuple(float(x) for x in raw["effects"].split(","))
    alpha = float(raw.get("alpha", ALPHA))
    k = int(raw.get("k", 2))
    tokens = [t.strip() for t in raw.get("criteria", "").split(",") if t.strip()]
    if tokens:
        kw["criteria"] = tuple(CriterionSpec.from_token(t, alpha=alpha, k=k) for t in tokens)
    elif "alpha" in raw or "k" in raw:
        kw["criteria"] = tuple(default_criteria(alpha, k))
    if "coupled_noise" in raw:
        kw["coupled_noise"] = parse_bool(raw["coupled_noise"])
    if "effect_mode" in raw:
        kw["effect_mode"] = raw["effect_mode"]
    if "out" in raw:
        kw["out_dir"] = Path(raw["out"])
    kw.update(overrides)
    return RunConfig(**kw)


@dataclass
class IterationOutcome:
    index: int
    params: ParamSet
    tests: dict  # effect size -> list[MeasureTest]
    decisions: dict  # (effect size, label, "power" | "free") -> Decision
    n_fits: int
    n_failures: int


def run_iteration(i: int, cfg: RunConfig) -> IterationOutcome:
    rng = RngStream(cfg.master_seed, i)
    params = sample_paramset(cfg.range, rng.substream(0))
    datasets = generate_effect_series(params, rng.substream(1), cfg.effects,
                                      cfg.coupled_noise, cfg.effect_mode)
    tests, decisions = {}, {}
    failures = 0
    for delta, data in zip(cfg.effects, datasets):
        results = lrt_all(data)
        tests[delta] = results
        failures += sum(not t.valid for t in results)
        if not all(t.valid for t in results):
            continue
        for spec in cfg.criteria:
            decisions[delta, spec.label, "power"] = decide(results, spec.with_direction(True, 1))
            decisions[delta, spec.label, "free"] = decide(results, spec.with_direction(False, 0))
    return IterationOutcome(i, params, tests, decisions,
                            n_fits=2 * len(MEASURES) * len(cfg.effects), n_failures=failures)


class McAggregate:
    """Mergeable tallies over Monte Carlo iterations.

    ``counts`` is a Counter keyed by tuples whose first element names the
    table (``crit``, ``meas``, ``hist``, ``strata``, ``diag``); ``sums``
    holds exact rational sums of detected effect sizes for Type M analysis.
    """

    def __init__(self, effects, labels, prange: ParamRange):
        self.effects = tuple(float(e) for e in effects)
        self.labels = tuple(labels)
        self.range = prange
        self.counts: Counter = Counter()
        self.sums: dict = {}

    @classmethod
    def for_config(cls, cfg: RunConfig) -> "McAggregate":
        return cls(cfg.effects, [c.label for c in cfg.criteria], cfg.range)

    @property
    def iterations(self) -> int:
        return self.counts[("diag", "iterations")]

    def _add_sum(self, key, value):
        self.sums[key] = self.sums.get(key, Fraction(0)) + Fraction(value)

    def add(self, out: IterationOutcome) -> None:
        c = self.counts
        bucket = n_bucket(out.params)
        c["diag", "iterations"] += 1
        c["diag", "fits"] += out.n_fits
        c["diag", "invalid_tests"] += out.n_failures
        for delta in self.effects:
            tests: list[MeasureTest] = out.tests[delta]
            for t in tests:
                if t.full_fit is not None and t.null_fit is not None:
                    c["diag", "nonconverged_fits"] += (not t.full_fit.converged) + (not t.null_fit.converged)
                    if t.full_fit.loglik < t.null_fit.loglik - 1e-8:
                        c["diag", "monotone_violations"] += 1
                if not t.valid:
                    continue
                side = "-" if t.sign < 0 else "+"
                sig = t.p_value <= ALPHA
                for b in ("all", bucket):
                    c["meas", t.measure, delta, b, "n"] += 1
                    if sig:
                        c["meas", t.measure, delta, b, "sig" + side] += 1
                        if side == "+":
                            self._add_sum((t.measure, delta, b), t.effect_ms)
                hbin = min(int(t.p_value / ALPHA), HIST_BINS - 1)
                c["hist", t.measure, delta, side, hbin] += 1
            for label in self.labels:
                power = out.decisions.get((delta, label, "power"))
                free = out.decisions.get((delta, label, "free"))
                if power is None:
                    continue
                for b in ("all", bucket):
                    c["crit", "power", label, delta, b, "n"] += 1
                    c["crit", "power", label, delta, b, "hit"] += power.detected
                    c["crit", "free", label, delta, b, "n"] += 1
                    c["crit", "free", label, delta, b, "hit"] += free.detected
                if delta == 0:
                    self._add_strata(out.params, label, free.detected)

    def _add_strata(self, params, label, detected):
        c = self.counts
        sides = {}
        for name in FIELDS:
            lo, hi = self.range.bounds(name)
            if lo == hi:
                continue
            side = "low" if getattr(params, name) <= (lo + hi) / 2 else "high"
            sides[name] = side
            c["strata", name, side, label, "n"] += 1
            c["strata", name, side, label, "hit"] += detected
        joint = {sides.get(n) for n in JOINT_PARAMS}
        if len(joint) == 1 and None not in joint:
            side = joint.pop()
            c["strata", "joint", side, label, "n"] += 1
            c["strata", "joint", side, label, "hit"] += detected

    def merge(self, other: "McAggregate") -> "McAggregate":
        if (self.effects, self.labels) != (other.effects, other.labels):
            raise ValueError("cannot merge aggregates of different configurations")
        out = McAggregate(self.effects, self.labels, self.range)
        out.counts = self.counts + other.counts
        out.sums = dict(self.sums)
        for k, v in other.sums.items():
            out.sums[k] = out.sums.get(k, Fraction(0)) + v
        return out

    __add__ = merge

    def __eq__(self, other) -> bool:
        if not isinstance(other, McAggregate):
            return NotImplemented
        return (self.effects == other.effects and self.labels == other.labels
                and +self.counts == +other.counts and self.sums == other.sums)

    # -- lookups ----------------------------------------------------------
    def criterion(self, label, delta, semantics="power", bucket="all") -> tuple[int, int]:
        c = self.counts
        return (c["crit", semantics, label, float(delta), bucket, "hit"],
                c["crit", semantics, label, float(delta), bucket, "n"])

    def measure_counts(self, measure, delta, bucket="all") -> dict:
        c = self.counts
        key = ("meas", measure, float(delta), bucket)
        return {"n": c[key + ("n",)], "sig+": c[key + ("sig+",)], "sig-": c[key + ("sig-",)]}

    def effect_sum(self, measure, delta, bucket="all") -> Fraction:
        return self.sums.get((measure, float(delta), bucket), Fraction(0))

    def histogram(self, measure, delta, side, hbin) -> int:
        return self.counts["hist", measure, float(delta), side, hbin]

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "effects": list(self.effects),
            "labels": list(self.labels),
            "range": {DOTTED[n]: list(self.range.bounds(n)) for n in FIELDS},
            "counts": sorted(([list(k), v] for k, v in self.counts.items() if v),
                             key=lambda kv: repr(kv[0])),
            "sums": sorted(([list(k), f"{v.numerator}/{v.denominator}"]
                            for k, v in self.sums.items()), key=lambda kv: repr(kv[0])),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "McAggregate":
        lower = {n: d["range"][DOTTED[n]][0] for n in FIELDS}
        upper = {n: d["range"][DOTTED[n]][1] for n in FIELDS}
        prange = ParamRange(ParamSet(**lower), ParamSet(**upper))
        agg = cls(d["effects"], d["labels"], prange)
        for key, v in d["counts"]:
            agg.counts[tuple(key)] = v
        for key, v in d["sums"]:
            agg.sums[tuple(key)] = Fraction(v)
        return agg


def _run_chunk(args) -> McAggregate:
    start, stop, cfg = args
    agg = McAggregate.for_config(cfg)
    for i in range(start, stop):
        agg.add(run_iteration(i, cfg))
    return agg


def run(cfg: RunConfig, workers: int | None = None, chunk: int = CHUNK) -> McAggregate:
    """Run all iterations and merge their tallies.

    ``workers`` defaults to the number of CPUs.  Iterations are grouped in
    fixed chunks, so the merged aggregate is identical for any worker count.
    """
    workers = workers or os.cpu_count() or 1
    chunks = [(s, min(s + chunk, cfg.iterations), cfg) for s in range(0, cfg.iterations, chunk)]
    total = McAggregate.for_config(cfg)
    t0 = time.monotonic()
    if workers == 1:
        results = map(_run_chunk, chunks)
        pool = None
    else:
        pool = ProcessPoolExecutor(workers, mp_context=multiprocessing.get_context("fork"))
        results = pool.map(_run_chunk, chunks)
    try:
        for agg in results:
            total = total.merge(agg)
            log.info("%d/%d iterations (%.0f s)", total.iterations, cfg.iterations,
                     time.monotonic() - t0)
    finally:
        if pool is not None:
            pool.shutdown()
    return total


# -- derived quantities -----------------------------------------------------

class StrataContrast(NamedTuple):
    low_rate: float | None
    high_rate: float | None
    difference: float | None
    low_ci: tuple | None
    high_ci: tuple | None
    low_n: int
    high_n: int


def _rate(hits, n):
    if n == 0:
        return None, None
    return hits / n, binom_ci95(hits, n)


def stratified_fp(agg: McAggregate, parameter: str, criterion: str = "one") -> StrataContrast:
    """False-positive rate below vs. above the parameter's range midpoint.

    ``parameter`` is a field name (dotted spelling accepted) or ``"joint"``
    for the combined split on p.regr, p.reread and mean.gopastdiff.
    Rates and the difference are None when a stratum is empty.
    """
    name = parameter.replace(".", "_") if parameter != "joint" else parameter
    c = agg.counts
    lo_hits, lo_n = c["strata", name, "low", criterion, "hit"], c["strata", name, "low", criterion, "n"]
    hi_hits, hi_n = c["strata", name, "high", criterion, "hit"], c["strata", name, "high", criterion, "n"]
    lo_rate, lo_ci = _rate(lo_hits, lo_n)
    hi_rate, hi_ci = _rate(hi_hits, hi_n)
    diff = None if lo_rate is None or hi_rate is None else hi_rate - lo_rate
    return StrataContrast(lo_rate, hi_rate, diff, lo_ci, hi_ci, lo_n, hi_n)


def type_s_rate(agg: McAggregate, delta: float, bucket: str = "all") -> float | None:
    """Share of significant per-measure results carrying the wrong sign."""
    pos = neg = 0
    for m in MEASURES:
        mc = agg.measure_counts(m, delta, bucket)
        pos += mc["sig+"]
        neg += mc["sig-"]
    return None if pos + neg == 0 else neg / (pos + neg)


def type_m_curve(agg: McAggregate, measure: str | None = None, bucket: str = "all"):
    """Mean observed effect (ms) among significant correct-sign results.

    Returns ``[(delta, mean or None), ...]``; ``measure=None`` pools all
    measures.
    """
    measures = MEASURES if measure is None else (measure,)
    out = []
    for delta in agg.effects:
        hits = sum(agg.measure_counts(m, delta, bucket)["sig+"] for m in measures)
        total = sum((agg.effect_sum(m, delta, bucket) for m in measures), Fraction(0))
        out.append((delta, float(total / hits) if hits else None))
    return out


def measure_power(agg: McAggregate, measure: str, delta: float, bucket: str = "all"):
    mc = agg.measure_counts(measure, delta, bucket)
    return None if mc["n"] == 0 else mc["sig+"] / mc["n"]
