"""Decision criteria mapping per-measure tests to an overall verdict."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Sequence

KINDS = ("any_uncorrected", "bonferroni", "holm", "k_of_m", "all_uncorrected", "all_bonferroni")

TOKENS = {
    "one": "any_uncorrected",
    "two": "k_of_m",
    "bonferroni": "bonferroni",
    "holm": "holm",
    "all": "all_uncorrected",
    "all-bonferroni": "all_bonferroni",
}
DEFAULT_TOKENS = ("one", "two", "bonferroni", "holm", "all", "all-bonferroni")


class CriterionError(ValueError):
    pass


@dataclass(frozen=True)
class CriterionSpec:
    kind: str
    alpha: float = 0.05
    k: int = 2
    m: int = 4
    require_correct_direction: bool = False
    true_direction: int = 1
    label: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise CriterionError(f"unknown criterion kind {self.kind!r}")
        if not 0 < self.alpha < 1:
            raise CriterionError("alpha must lie in (0, 1)")
        if not 1 <= self.k <= self.m:
            raise CriterionError("need 1 <= k <= m")
        if self.true_direction not in (-1, 0, 1):
            raise CriterionError("true_direction must be -1, 0 or 1")
        if not self.label:
            object.__setattr__(self, "label", _default_label(self.kind, self.k))

    @classmethod
    def from_token(cls, token: str, alpha: float = 0.05, k: int = 2, m: int = 4):
        try:
            kind = TOKENS[token]
        except KeyError:
            raise CriterionError(
                f"unknown criterion {token!r}; choose from {', '.join(TOKENS)}") from None
        return cls(kind, alpha=alpha, k=k, m=m, label=token)

    def with_direction(self, required: bool, true_direction: int = 1) -> "CriterionSpec":
        return dataclasses.replace(
            self, require_correct_direction=required, true_direction=true_direction)

    @property
    def min_count(self) -> int:
        if self.kind == "k_of_m":
            return self.k
        if self.kind.startswith("all_"):
            return self.m
        return 1


def _default_label(kind, k):
    if kind == "k_of_m":
        return "two" if k == 2 else f"{k}-of-m"
    return {v: t for t, v in TOKENS.items()}[kind]


@dataclass(frozen=True)
class Decision:
    detected: bool
    qualifying: frozenset


def default_criteria(alpha: float = 0.05, k: int = 2) -> list[CriterionSpec]:
    return [CriterionSpec.from_token(t, alpha=alpha, k=k) for t in DEFAULT_TOKENS]


def significant_set(p_values: Sequence[float], spec: CriterionSpec) -> set[int]:
    """Indices whose p-value passes the criterion's threshold rule (no sign check)."""
    m = spec.m
    if spec.kind in ("bonferroni", "all_bonferroni"):
        return {i for i, p in enumerate(p_values) if p <= spec.alpha / m}
    if spec.kind == "holm":
        rejected = set()
        order = sorted(range(m), key=lambda i: p_values[i])
        for rank, i in enumerate(order):
            if p_values[i] > spec.alpha / (m - rank):
                break
            rejected.add(i)
        return rejected
    return {i for i, p in enumerate(p_values) if p <= spec.alpha}


def decide(tests: Sequence, spec: CriterionSpec) -> Decision:
    """Apply a criterion to one dataset's tests.

    ``tests`` are objects with ``measure``, ``p_value`` and ``sign``
    attributes (see :class:`etpower.lmm.MeasureTest`).  When a direction is
    required, every qualifying measure must itself carry the true sign.
    """
    if len(tests) != spec.m:
        raise CriterionError(f"criterion expects {spec.m} tests, got {len(tests)}")
    passed = significant_set([t.p_value for t in tests], spec)
    if spec.require_correct_direction:
        passed = {i for i in passed if tests[i].sign == spec.true_direction}
    qualifying = frozenset(tests[i].measure for i in passed)
    return Decision(len(passed) >= spec.min_count, qualifying)


def detection_rate_semantics(effect_ms: float, false_positive: bool = False) -> tuple[bool, int]:
    """Direction requirement for a detection count at ``effect_ms``.

    Power curves always demand a significant effect in the true (positive)
    direction, including their 0 ms endpoint.  False-positive counts at
    0 ms accept either direction.  Returns ``(require_correct_direction,
    true_direction)``.
    """
    if false_positive and effect_ms == 0:
        return False, 0
    return True, 1
