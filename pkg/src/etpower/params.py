"""Generative parameter space and uniform sampling from its hyperbox."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .numerics import RngStream


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class ParamSet:
    """One point of the generative model's parameter space.

    Durations are geometric means in ms, spreads are geometric SDs
    (dimensionless, >= 1).
    """

    n_subjects: int
    n_items: int
    sd_subjects: float
    sd_items: float
    p_refix: float
    p_regr: float
    p_reread: float
    mean_ffd: float
    mean_gazediff: float
    mean_gopastdiff: float
    mean_tvtdiff: float
    sd_ffd: float
    sd_gazediff: float
    sd_gopastdiff: float
    sd_tvtdiff: float

    def validate(self) -> "ParamSet":
        if self.n_subjects < 2 or self.n_items < 2:
            raise ParameterError("need at least 2 subjects and 2 items")
        for name in PROBABILITIES:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1], got {v}")
        for name in GEOMETRIC_MEANS:
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        for name in GEOMETRIC_SDS:
            if not getattr(self, name) >= 1.0:
                raise ParameterError(f"{name} must be >= 1 (geometric SD)")
        return self

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


FIELDS = tuple(f.name for f in dataclasses.fields(ParamSet))
INTEGER_FIELDS = ("n_subjects", "n_items")
PROBABILITIES = ("p_refix", "p_regr", "p_reread")
GEOMETRIC_MEANS = ("mean_ffd", "mean_gazediff", "mean_gopastdiff", "mean_tvtdiff")
GEOMETRIC_SDS = (
    "sd_subjects", "sd_items", "sd_ffd", "sd_gazediff", "sd_gopastdiff", "sd_tvtdiff",
)

# dotted names as they appear in parameter files, e.g. ``p.refix``
DOTTED = {name: name.replace("_", ".") for name in FIELDS}
UNDOTTED = {v: k for k, v in DOTTED.items()}


@dataclass(frozen=True)
class ParamRange:
    lower: ParamSet
    upper: ParamSet

    def __post_init__(self):
        for name in FIELDS:
            lo, hi = getattr(self.lower, name), getattr(self.upper, name)
            if lo > hi:
                raise ParameterError(f"degenerate range for {DOTTED[name]}: {lo} > {hi}")

    def bounds(self, name: str) -> tuple[float, float]:
        return getattr(self.lower, name), getattr(self.upper, name)

    def midpoint(self, name: str) -> float:
        lo, hi = self.bounds(name)
        return (lo + hi) / 2.0


_LOWER = ParamSet(
    n_subjects=20, n_items=20,
    sd_subjects=1.10, sd_items=1.07,
    p_refix=0.14, p_regr=0.07, p_reread=0.19,
    mean_ffd=219.72, mean_gazediff=197.09, mean_gopastdiff=312.02, mean_tvtdiff=242.26,
    sd_ffd=1.31, sd_gazediff=1.40, sd_gopastdiff=1.69, sd_tvtdiff=1.55,
)
_UPPER = ParamSet(
    n_subjects=50, n_items=50,
    sd_subjects=1.16, sd_items=1.08,
    p_refix=0.32, p_regr=0.43, p_reread=0.41,
    mean_ffd=232.35, mean_gazediff=204.27, mean_gopastdiff=558.27, mean_tvtdiff=291.40,
    sd_ffd=1.43, sd_gazediff=1.69, sd_gopastdiff=1.84, sd_tvtdiff=1.87,
)

ENDPOINT_N = 40


def default_range() -> ParamRange:
    """Bounds spanning the two reference reading experiments.

    The lower bounds resemble a study with few refixations and regressions
    (Angele-like), the upper bounds one with many (Metzner-like).  Subject
    and item counts cover 20 to 50.
    """
    return ParamRange(_LOWER, _UPPER)


def sample_paramset(prange: ParamRange, rng: RngStream) -> ParamSet:
    """Draw every parameter independently and uniformly from its bounds."""
    values = {}
    for name in FIELDS:
        lo, hi = prange.bounds(name)
        if name in INTEGER_FIELDS:
            values[name] = int(rng.integers(int(lo), int(hi)))
        elif lo == hi:
            values[name] = lo
        else:
            values[name] = float(rng.uniform(lo, hi))
    return ParamSet(**values).validate()


def endpoint(which: str, n: int = ENDPOINT_N) -> ParamSet:
    """Parameter set at one end of the default range (``angele`` or ``metzner``)."""
    key = which.lower().removesuffix("-like")
    if key == "angele":
        base = _LOWER
    elif key == "metzner":
        base = _UPPER
    else:
        raise ParameterError(f"unknown endpoint {which!r}; use 'angele' or 'metzner'")
    return dataclasses.replace(base, n_subjects=n, n_items=n)


def read_range(path: str | Path) -> ParamRange:
    """Read a range file with lines ``name = lower upper``.

    Names use the dotted spelling (``p.refix``); underscores are accepted
    too.  Parameters not listed keep their default bounds.  Blank lines and
    ``#`` comments are ignored.
    """
    defaults = default_range()
    lower, upper = defaults.lower.as_dict(), defaults.upper.as_dict()
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{path}:{lineno}: expected 'name = lower upper'")
        key, value = (s.strip() for s in line.split("=", 1))
        name = UNDOTTED.get(key, key if key in FIELDS else None)
        if name is None:
            raise ParameterError(f"{path}:{lineno}: unknown parameter {key!r}")
        parts = value.replace(",", " ").split()
        if len(parts) != 2:
            raise ParameterError(f"{path}:{lineno}: expected two bounds for {key}")
        conv = int if name in INTEGER_FIELDS else float
        try:
            lower[name], upper[name] = (conv(float(p)) for p in parts)
        except ValueError as exc:
            raise ParameterError(f"{path}:{lineno}: {exc}") from None
    prange = ParamRange(ParamSet(**lower), ParamSet(**upper))
    prange.lower.validate()
    prange.upper.validate()
    return prange


def write_range(prange: ParamRange, path: str | Path) -> None:
    lines = []
    for name in FIELDS:
        lo, hi = prange.bounds(name)
        lines.append(f"{DOTTED[name]} = {lo!r} {hi!r}")
    Path(path).write_text("\n".join(lines) + "\n")
