"""
From four p-values to one verdict
=================================

The same four test results can lead to different conclusions depending on
how the multiple comparisons are handled.
"""
from types import SimpleNamespace

from etpower.criteria import decide, default_criteria

p_values = {"ffd": 0.030, "gzd": 0.011, "gpd": 0.400, "tvt": 0.048}
signs = {"ffd": 1, "gzd": 1, "gpd": -1, "tvt": -1}
tests = [SimpleNamespace(measure=m, p_value=p, sign=signs[m]) for m, p in p_values.items()]

print(f"{'criterion':<16}{'any direction':<30}correct direction")
for spec in default_criteria():
    free = decide(tests, spec.with_direction(False, 0))
    power = decide(tests, spec.with_direction(True, 1))
    print(f"{spec.label:<16}{free.detected!s:<7}{' '.join(sorted(free.qualifying)):<23}"
          f"{power.detected!s:<7}{' '.join(sorted(power.qualifying))}")

# with no true effect, four independent tests at 0.05 give this family-wise error
print(f"\n1 - 0.95^4 = {1 - 0.95 ** 4:.3f}")
