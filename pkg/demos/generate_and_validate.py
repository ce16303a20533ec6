"""
Simulating reading data at the two reference endpoints
======================================================

Generate artificial eye-tracking datasets at the two parameter endpoints and
compare the mean correlations between measures with the reference values.
"""
import numpy as np

from etpower import MEASURES, RngStream, endpoint, generate_base
from etpower.datagen import REFERENCE_CORRELATIONS, mean_correlations

# one dataset: 40 subjects x 40 items, conditions alternate in a Latin square
params = endpoint("angele")
data = generate_base(params, RngStream(2024, 0))
print(f"{len(data)} trials, {data.refixated.mean():.1%} with refixation")
for m in MEASURES:
    a, b = data.condition_means(m)
    print(f"{m.upper():>4}: A {a:6.1f} ms   B {b:6.1f} ms")

# averaged over 100 datasets, the correlations should sit near the reference
np.set_printoptions(precision=2, suppress=True)
for which in ("angele", "metzner"):
    corr = mean_correlations(endpoint(which), 100, RngStream(2024, 1))
    print(f"\n{which}-like, simulated:\n{corr}")
    print(f"reference:\n{REFERENCE_CORRELATIONS[which]}")
