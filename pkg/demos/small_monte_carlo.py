"""
A small Monte Carlo run
=======================

Sample parameter sets from the default range, simulate seven datasets per
iteration (one per effect size), and tabulate false positives and power.
The desk-scale run uses 2,000 iterations; 60 keep this script quick, so the
rates are rough.
"""
from etpower.mcrunner import RunConfig, run, type_s_rate
from etpower.report import fp_table, power_curves

cfg = RunConfig(iterations=60, master_seed=3)
agg = run(cfg, workers=1)

print("false positives at 0 ms (either direction)")
for r in fp_table(agg).records():
    print(f"  {r['criterion']:<15} {r['rate']:6.1%}  [{r['ci_low']:.1%}, {r['ci_high']:.1%}]")

print("\npower (significant and positive)")
curves = power_curves(agg, "criterion").records()
print(f"  {'ms':<11}" + "".join(f"{d:>7g}" for d in agg.effects))
for label in ("one", "two", "bonferroni", "holm"):
    row = [r["rate"] for r in curves if r["series"] == label]
    print(f"  {label:<11}" + "".join(f"{v:7.2f}" for v in row))

print("\nshare of significant results with the wrong sign")
for d in agg.effects:
    s = type_s_rate(agg, d)
    print(f"  {d:5g} ms: {'-' if s is None else f'{s:.1%}'}")
