from types import SimpleNamespace

import pytest
from hypothesis import given, settings, strategies as st

from etpower.criteria import (
    DEFAULT_TOKENS, KINDS, CriterionError, CriterionSpec, decide, default_criteria,
    detection_rate_semantics, significant_set,
)
from etpower.datagen import MEASURES


def measure_tests(p, signs=(1, 1, 1, 1)):
    return [SimpleNamespace(measure=m, p_value=v, sign=s) for m, v, s in zip(MEASURES, p, signs)]


def spec(kind, **kw):
    return CriterionSpec(kind, **kw)


def test_any_uncorrected_example():
    assert decide(measure_tests((0.04, 0.2, 0.3, 0.4)), spec("any_uncorrected")).detected


def test_bonferroni_example():
    assert not decide(measure_tests((0.04, 0.2, 0.3, 0.4)), spec("bonferroni")).detected
    assert decide(measure_tests((0.0125, 0.2, 0.3, 0.4)), spec("bonferroni")).detected


def test_two_of_four_example():
    d = decide(measure_tests((0.04, 0.045, 0.3, 0.4)), spec("k_of_m", k=2))
    assert d.detected and d.qualifying == {"ffd", "gzd"}


def test_holm_example():
    p = (0.010, 0.013, 0.02, 0.2)
    assert significant_set(p, spec("holm")) == {0, 1, 2}
    assert decide(measure_tests(p), spec("holm")).detected
    assert significant_set(p, spec("bonferroni")) == {0}


def test_holm_stops_at_first_failure():
    # 0.02 fails 0.05/3 so 0.024 is not rejected although 0.024 <= 0.025
    assert significant_set((0.001, 0.02, 0.024, 0.9), spec("holm")) == {0}


def test_all_criteria():
    p = (0.001, 0.002, 0.04, 0.01)
    assert decide(measure_tests(p), spec("all_uncorrected")).detected
    assert not decide(measure_tests(p), spec("all_bonferroni")).detected
    assert decide(measure_tests((0.01,) * 4), spec("all_bonferroni")).detected


def test_ties_count_as_significant():
    assert decide(measure_tests((0.05, 1, 1, 1)), spec("any_uncorrected")).detected


def test_direction_required():
    p = (0.001, 0.001, 0.5, 0.5)
    wrong = measure_tests(p, (-1, -1, 1, 1))
    strict = spec("any_uncorrected").with_direction(True, 1)
    assert not decide(wrong, strict).detected
    assert decide(wrong, spec("any_uncorrected")).detected
    mixed = measure_tests(p, (1, -1, 1, 1))
    assert decide(mixed, strict).qualifying == {"ffd"}
    assert not decide(mixed, spec("k_of_m", k=2).with_direction(True, 1)).detected


def test_mismatched_m():
    with pytest.raises(CriterionError):
        decide(measure_tests((0.01, 0.02, 0.03)), spec("bonferroni"))


@pytest.mark.parametrize("kw", [dict(kind="nope"), dict(kind="holm", alpha=0.0),
                                dict(kind="k_of_m", k=5), dict(kind="holm", alpha=1.0)])
def test_invalid_spec(kw):
    with pytest.raises(CriterionError):
        CriterionSpec(**kw)


def test_tokens():
    specs = default_criteria()
    assert [s.label for s in specs] == list(DEFAULT_TOKENS)
    assert {s.kind for s in specs} == set(KINDS)
    with pytest.raises(CriterionError, match="unknown criterion"):
        CriterionSpec.from_token("three")


def test_bonferroni_with_single_measure_is_uncorrected():
    for p in (0.0, 0.01, 0.049, 0.05, 0.051, 0.7):
        assert significant_set((p,), spec("bonferroni", m=1, k=1)) == \
            significant_set((p,), spec("any_uncorrected", m=1, k=1))


def test_semantics():
    assert detection_rate_semantics(0.0, false_positive=True) == (False, 0)
    assert detection_rate_semantics(0.0) == (True, 1)
    assert detection_rate_semantics(20.0) == (True, 1)


p_values = st.lists(st.floats(0, 1), min_size=4, max_size=4)
signs = st.lists(st.sampled_from([-1, 1]), min_size=4, max_size=4)


@given(p_values)
@settings(max_examples=300)
def test_holm_superset_of_bonferroni(p):
    assert significant_set(p, spec("holm")) >= significant_set(p, spec("bonferroni"))


@given(p_values, signs, st.integers(0, 3), st.floats(0, 1), st.sampled_from(KINDS), st.booleans())
@settings(max_examples=500)
def test_lowering_a_p_value_never_undetects(p, sg, idx, frac, kind, directed):
    s = spec(kind).with_direction(directed, 1)
    before = decide(measure_tests(p, sg), s).detected
    lowered = list(p)
    lowered[idx] = p[idx] * frac
    after = decide(measure_tests(lowered, sg), s).detected
    assert not (before and not after)


@given(p_values, signs, st.sampled_from(KINDS))
def test_decide_is_pure(p, sg, kind):
    t = measure_tests(p, sg)
    assert decide(t, spec(kind)) == decide(t, spec(kind))


@given(p_values, signs)
def test_cardinality_rule(p, sg):
    t = measure_tests(p, sg)
    for kind in KINDS:
        for directed in (False, True):
            s = spec(kind).with_direction(directed, 1)
            d = decide(t, s)
            assert d.detected == (len(d.qualifying) >= s.min_count)
